//! Linear solvers for the per-step systems, selectable by name.

use std::collections::BTreeMap;
use std::sync::{Arc, Mutex};

use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::Lu;
use faer::sparse::{SparseColMat, Triplet};
use faer::Mat;

use crate::error::{Error, Result};
use crate::sparse::{dot, norm2, CsrMatrix};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverOptions {
    /// Relative residual target `||b - Ax|| / ||b||`.
    pub rel_tol: f64,
    /// Iteration cap is `maxit_factor * n`.
    pub maxit_factor: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            rel_tol: 1e-10,
            maxit_factor: 10,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SolveStats {
    pub iterations: usize,
    pub rel_residual: f64,
    pub used_direct: bool,
}

pub trait LinearSolver: Send + Sync {
    fn name(&self) -> &'static str;

    /// Solves `a x = b`, using `x` as the initial guess where meaningful.
    fn solve(
        &self,
        a: &CsrMatrix,
        b: &[f64],
        x: &mut [f64],
        opts: &SolverOptions,
    ) -> Result<SolveStats>;

    /// Instance for a single run. Solvers that cache factorizations return a
    /// fresh one so concurrent runs do not share state.
    fn instance(&self) -> Arc<dyn LinearSolver>;
}

/// Jacobi-preconditioned conjugate gradients.
#[derive(Clone, Copy, Debug, Default)]
pub struct JacobiPcg;

/// Sparse LU factorization.
#[derive(Clone, Copy, Debug, Default)]
pub struct SparseLu;

/// PCG first; sparse LU when PCG stalls or breaks down on an indefinite matrix.
#[derive(Clone, Copy, Debug, Default)]
pub struct PcgWithLuFallback;

/// PCG preconditioned by a sparse LU of an earlier matrix. Suited to step
/// sequences where the matrix drifts slowly; the factorization is refreshed
/// whenever PCG needs more than `refactor_after` iterations or fails.
pub struct PcgLaggedLu {
    refactor_after: usize,
    cached: Mutex<Option<Factor>>,
}

struct Factor {
    n: usize,
    lu: Lu<usize, f64>,
}

impl Factor {
    fn new(a: &CsrMatrix) -> Result<Self> {
        let n = a.nrows();
        let triplets: Vec<Triplet<usize, usize, f64>> = a
            .triplets()
            .map(|(i, j, v)| Triplet::new(i, j, v))
            .collect();
        let mat = SparseColMat::<usize, f64>::try_new_from_triplets(n, a.ncols(), &triplets)
            .map_err(|e| Error::Singular(format!("{e:?}")))?;
        let lu = mat.sp_lu().map_err(|e| Error::Singular(format!("{e:?}")))?;
        Ok(Self { n, lu })
    }

    fn apply(&self, r: &[f64], z: &mut [f64]) {
        let sol = self.lu.solve(Mat::from_fn(self.n, 1, |i, _| r[i]));
        for (i, zi) in z.iter_mut().enumerate() {
            *zi = sol[(i, 0)];
        }
    }
}

impl PcgLaggedLu {
    pub fn new(refactor_after: usize) -> Self {
        Self {
            refactor_after: refactor_after.max(1),
            cached: Mutex::new(None),
        }
    }
}

impl Default for PcgLaggedLu {
    fn default() -> Self {
        Self::new(25)
    }
}

fn relative_residual(a: &CsrMatrix, b: &[f64], x: &[f64]) -> f64 {
    let ax = a.mul_vec(x);
    let r: f64 = b
        .iter()
        .zip(&ax)
        .map(|(bi, axi)| (bi - axi) * (bi - axi))
        .sum::<f64>()
        .sqrt();
    let nb = norm2(b);
    if nb == 0.0 {
        r
    } else {
        r / nb
    }
}

fn check_dims(a: &CsrMatrix, b: &[f64], x: &[f64]) -> Result<()> {
    let n = b.len();
    if a.nrows() != n || a.ncols() != n || x.len() != n {
        return Err(Error::DimensionMismatch {
            expected: a.nrows(),
            actual: n,
        });
    }
    Ok(())
}

/// Preconditioned CG with `precond(r, z)` computing `z = P^{-1} r`.
fn pcg(
    a: &CsrMatrix,
    b: &[f64],
    x: &mut [f64],
    opts: &SolverOptions,
    maxit: usize,
    mut precond: impl FnMut(&[f64], &mut [f64]),
) -> Result<SolveStats> {
    let n = b.len();
    let nb = norm2(b);
    if nb == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return Ok(SolveStats::default());
    }
    let mut r = a.mul_vec(x);
    for (ri, bi) in r.iter_mut().zip(b) {
        *ri = bi - *ri;
    }
    let mut z = vec![0.0; n];
    precond(&r, &mut z);
    let mut p = z.clone();
    let mut ap = vec![0.0; n];
    let mut rz = dot(&r, &z);
    let mut history = Vec::new();
    let mut res = norm2(&r) / nb;
    history.push(res);
    let mut it = 0;
    while res > opts.rel_tol {
        if it == maxit {
            return Err(Error::SolverDiverged {
                iterations: it,
                residuals: history,
            });
        }
        a.mul_vec_into(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            // Indefinite or singular along p.
            return Err(Error::SolverDiverged {
                iterations: it,
                residuals: history,
            });
        }
        let step = rz / pap;
        for i in 0..n {
            x[i] += step * p[i];
            r[i] -= step * ap[i];
        }
        precond(&r, &mut z);
        let rz_next = dot(&r, &z);
        let beta = rz_next / rz;
        rz = rz_next;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
        it += 1;
        res = norm2(&r) / nb;
        history.push(res);
    }
    // Recursive residual can drift from the true one.
    Ok(SolveStats {
        iterations: it,
        rel_residual: relative_residual(a, b, x),
        used_direct: false,
    })
}

impl LinearSolver for JacobiPcg {
    fn name(&self) -> &'static str {
        "pcg-jacobi"
    }

    fn solve(
        &self,
        a: &CsrMatrix,
        b: &[f64],
        x: &mut [f64],
        opts: &SolverOptions,
    ) -> Result<SolveStats> {
        check_dims(a, b, x)?;
        let inv_diag: Vec<f64> = a
            .diagonal()
            .into_iter()
            .map(|d| if d.abs() > 0.0 { 1.0 / d } else { 1.0 })
            .collect();
        let maxit = (opts.maxit_factor * b.len()).max(1);
        pcg(a, b, x, opts, maxit, |r, z| {
            for i in 0..r.len() {
                z[i] = r[i] * inv_diag[i];
            }
        })
    }

    fn instance(&self) -> Arc<dyn LinearSolver> {
        Arc::new(*self)
    }
}

/// Direct solve with up to two steps of iterative refinement.
fn direct_solve(
    factor: &Factor,
    a: &CsrMatrix,
    b: &[f64],
    x: &mut [f64],
    opts: &SolverOptions,
) -> Result<SolveStats> {
    factor.apply(b, x);
    let mut res = relative_residual(a, b, x);
    let mut refinements = 0;
    let mut corr = vec![0.0; b.len()];
    while res > opts.rel_tol && refinements < 2 && res.is_finite() {
        let ax = a.mul_vec(x);
        let r: Vec<f64> = b.iter().zip(&ax).map(|(bi, axi)| bi - axi).collect();
        factor.apply(&r, &mut corr);
        for (xi, ci) in x.iter_mut().zip(&corr) {
            *xi += ci;
        }
        res = relative_residual(a, b, x);
        refinements += 1;
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Singular(
            "factorization produced non-finite values".into(),
        ));
    }
    if !(res <= opts.rel_tol.max(1e-8)) {
        return Err(Error::Singular(format!(
            "direct solve residual {res:.3e} exceeds tolerance"
        )));
    }
    Ok(SolveStats {
        iterations: 1 + refinements,
        rel_residual: res,
        used_direct: true,
    })
}

impl LinearSolver for SparseLu {
    fn name(&self) -> &'static str {
        "sparse-lu"
    }

    fn solve(
        &self,
        a: &CsrMatrix,
        b: &[f64],
        x: &mut [f64],
        opts: &SolverOptions,
    ) -> Result<SolveStats> {
        check_dims(a, b, x)?;
        direct_solve(&Factor::new(a)?, a, b, x, opts)
    }

    fn instance(&self) -> Arc<dyn LinearSolver> {
        Arc::new(*self)
    }
}

impl LinearSolver for PcgLaggedLu {
    fn name(&self) -> &'static str {
        "pcg-lagged-lu"
    }

    fn solve(
        &self,
        a: &CsrMatrix,
        b: &[f64],
        x: &mut [f64],
        opts: &SolverOptions,
    ) -> Result<SolveStats> {
        check_dims(a, b, x)?;
        let mut cached = self.cached.lock().unwrap_or_else(|e| e.into_inner());
        if let Some(factor) = cached.as_ref().filter(|f| f.n == b.len()) {
            let guess = x.to_vec();
            match pcg(a, b, x, opts, self.refactor_after, |r, z| {
                factor.apply(r, z)
            }) {
                Ok(stats) => return Ok(stats),
                Err(Error::SolverDiverged { .. }) => x.copy_from_slice(&guess),
                Err(e) => return Err(e),
            }
        }
        let factor = Factor::new(a)?;
        let stats = direct_solve(&factor, a, b, x, opts)?;
        *cached = Some(factor);
        Ok(stats)
    }

    fn instance(&self) -> Arc<dyn LinearSolver> {
        Arc::new(Self::new(self.refactor_after))
    }
}

impl LinearSolver for PcgWithLuFallback {
    fn name(&self) -> &'static str {
        "pcg-lu-fallback"
    }

    fn solve(
        &self,
        a: &CsrMatrix,
        b: &[f64],
        x: &mut [f64],
        opts: &SolverOptions,
    ) -> Result<SolveStats> {
        let guess = x.to_vec();
        match JacobiPcg.solve(a, b, x, opts) {
            Ok(stats) => Ok(stats),
            Err(Error::SolverDiverged {
                iterations,
                residuals,
            }) => {
                log::warn!(
                    "PCG stalled after {iterations} iterations (residual {:.3e}); falling back to sparse LU",
                    residuals.last().copied().unwrap_or(f64::NAN)
                );
                x.copy_from_slice(&guess);
                let mut stats = SparseLu.solve(a, b, x, opts)?;
                stats.iterations += iterations;
                Ok(stats)
            }
            Err(e) => Err(e),
        }
    }

    fn instance(&self) -> Arc<dyn LinearSolver> {
        Arc::new(*self)
    }
}

/// Name-keyed collection of linear solvers.
#[derive(Clone)]
pub struct SolverRegistry {
    entries: BTreeMap<&'static str, Arc<dyn LinearSolver>>,
}

impl SolverRegistry {
    pub fn empty() -> Self {
        Self {
            entries: BTreeMap::new(),
        }
    }

    pub fn with_builtin() -> Self {
        let mut reg = Self::empty();
        reg.register(Arc::new(JacobiPcg));
        reg.register(Arc::new(SparseLu));
        reg.register(Arc::new(PcgWithLuFallback));
        reg.register(Arc::new(PcgLaggedLu::default()));
        reg
    }

    pub fn register(&mut self, solver: Arc<dyn LinearSolver>) {
        self.entries.insert(solver.name(), solver);
    }

    pub fn get(&self, name: &str) -> Result<Arc<dyn LinearSolver>> {
        self.entries
            .get(name)
            .cloned()
            .ok_or_else(|| Error::UnknownStrategy {
                kind: "linear solver",
                name: name.to_string(),
                available: self.names(),
            })
    }

    pub fn names(&self) -> Vec<String> {
        self.entries.keys().map(|s| s.to_string()).collect()
    }
}

impl Default for SolverRegistry {
    fn default() -> Self {
        Self::with_builtin()
    }
}
