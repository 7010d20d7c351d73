use std::sync::Arc;

use super::system::DgSystem;
use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::linsolve::{LinearSolver, PcgWithLuFallback, SolveStats, SolverOptions};
use crate::sparse::CsrMatrix;
use crate::trajectory::{step_count, Trajectory};

/// Volumetric forcing `f(x)` over the step `(t_prev, t_next]`. Only used to
/// verify the discretization against manufactured solutions.
pub trait SourceTerm: Sync {
    fn value(&self, x: Point, t_prev: f64, t_next: f64) -> f64;
}

impl<F> SourceTerm for F
where
    F: Fn(Point, f64, f64) -> f64 + Sync,
{
    fn value(&self, x: Point, t_prev: f64, t_next: f64) -> f64 {
        self(x, t_prev, t_next)
    }
}

/// Semi-implicit Euler for the DG system:
/// `(M + dt (A - M_alpha + M~_alpha(C^n))) C^{n+1} = M C^n (+ dt F^{n+1})`.
pub struct SemiImplicitEuler<'s, 'm> {
    system: &'s DgSystem<'m>,
    dt: f64,
    /// `M + dt (A - M_alpha)`, fixed for the run.
    base: CsrMatrix,
    solver: Arc<dyn LinearSolver>,
    opts: SolverOptions,
    source: Option<&'s dyn SourceTerm>,
}

impl<'s, 'm> SemiImplicitEuler<'s, 'm> {
    pub fn new(
        system: &'s DgSystem<'m>,
        dt: f64,
        solver: Arc<dyn LinearSolver>,
        opts: SolverOptions,
    ) -> Result<Self> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::param("dt", format!("must be > 0, got {dt}")));
        }
        let base = CsrMatrix::linear_combination(&[
            (1.0, system.mass()),
            (dt, system.stiffness()),
            (-dt, system.linear_reaction()),
        ])?;
        Ok(Self {
            system,
            dt,
            base,
            solver,
            opts,
            source: None,
        })
    }

    pub fn with_source(mut self, source: &'s dyn SourceTerm) -> Self {
        self.source = Some(source);
        self
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Advances `c` from time `t` to `t + dt`.
    pub fn step(&self, c: &[f64], t: f64) -> Result<(Vec<f64>, SolveStats)> {
        let n = self.system.ndofs();
        if c.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: c.len(),
            });
        }
        let nonlinear = self.system.nonlinear_reaction(c)?;
        let lhs = CsrMatrix::linear_combination(&[(1.0, &self.base), (self.dt, &nonlinear)])?;
        let mut rhs = self.system.mass().mul_vec(c);
        if let Some(src) = self.source {
            let (t0, t1) = (t, t + self.dt);
            let f = self.system.space().project(|x| src.value(x, t0, t1));
            for (r, fi) in rhs.iter_mut().zip(&f) {
                *r += self.dt * fi;
            }
        }
        let mut next = c.to_vec();
        let stats = self.solver.solve(&lhs, &rhs, &mut next, &self.opts)?;
        Ok((next, stats))
    }

    /// Runs from `initial` at t = 0 to `t_final`.
    pub fn run(&self, initial: Vec<f64>, t_final: f64, scheme: &str) -> Result<Trajectory> {
        let steps = step_count(self.dt, t_final)?;
        let mut traj = Trajectory::new(self.dt, initial, self.system.alpha(), scheme);
        for k in 0..steps {
            let t = k as f64 * self.dt;
            let (next, stats) = self.step(traj.last(), t)?;
            if next.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite { step: k + 1 });
            }
            traj.push(next, stats);
        }
        Ok(traj)
    }
}

/// One semi-implicit Euler step with the default PCG + LU fallback solver.
pub fn step_euler_semi_implicit(system: &DgSystem<'_>, c: &[f64], dt: f64) -> Result<Vec<f64>> {
    let stepper = SemiImplicitEuler::new(
        system,
        dt,
        Arc::new(PcgWithLuFallback),
        SolverOptions::default(),
    )?;
    Ok(stepper.step(c, 0.0)?.0)
}
