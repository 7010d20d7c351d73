//! Spreading schemes behind one interface, looked up by name.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use crate::dg::{DgSpace, DgSystem, SemiImplicitEuler};
use crate::error::{Error, Result};
use crate::geometry::{Connectome, DiffusionModel, PolytopalMesh, RegionId};
use crate::graph::{default_graph_options, default_graph_solver, CnExtrapolated, RhsReaction};
use crate::linsolve::{SolverOptions, SolverRegistry};
use crate::trajectory::Trajectory;

/// Linear solver used by the DG scheme unless the setup names one.
pub const DG_DEFAULT_SOLVER: &str = "pcg-lagged-lu";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DomainKind {
    Mesh,
    Graph,
}

impl DomainKind {
    pub fn as_str(self) -> &'static str {
        match self {
            DomainKind::Mesh => "mesh",
            DomainKind::Graph => "graph",
        }
    }
}

impl std::fmt::Display for DomainKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Copy, Debug)]
pub enum Domain<'a> {
    Mesh(&'a PolytopalMesh),
    Graph(&'a Connectome),
}

impl Domain<'_> {
    pub fn kind(&self) -> DomainKind {
        match self {
            Domain::Mesh(_) => DomainKind::Mesh,
            Domain::Graph(_) => DomainKind::Graph,
        }
    }

    pub fn region_ids(&self) -> Vec<RegionId> {
        match self {
            Domain::Mesh(m) => m.region_ids(),
            Domain::Graph(g) => g.region_ids(),
        }
    }
}

/// Initial concentration.
#[derive(Clone, Debug, PartialEq)]
pub enum Seed {
    Uniform(f64),
    /// `value` inside the listed regions, zero elsewhere.
    Regions {
        ids: BTreeSet<RegionId>,
        value: f64,
    },
}

impl Seed {
    pub fn value_in(&self, region: RegionId) -> f64 {
        match self {
            Seed::Uniform(v) => *v,
            Seed::Regions { ids, value } => {
                if ids.contains(&region) {
                    *value
                } else {
                    0.0
                }
            }
        }
    }

    fn validate(&self, labels: &[RegionId]) -> Result<()> {
        let v = match self {
            Seed::Uniform(v) => *v,
            Seed::Regions { ids, value } => {
                let missing: Vec<RegionId> = ids
                    .iter()
                    .filter(|i| !labels.contains(i))
                    .copied()
                    .collect();
                if !missing.is_empty() {
                    return Err(Error::UnknownRegions { ids: missing });
                }
                if ids.is_empty() {
                    return Err(Error::param("seed_regions", "empty seed region list"));
                }
                *value
            }
        };
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::param(
                "seed_value",
                format!("must lie in [0, 1], got {v}"),
            ));
        }
        Ok(())
    }
}

/// Everything a scheme needs besides the domain.
#[derive(Clone, Debug)]
pub struct RunSetup {
    pub alpha: f64,
    pub dt: f64,
    pub t_final: f64,
    pub degree: usize,
    pub eta0: f64,
    pub model: DiffusionModel,
    pub seed: Seed,
    /// Registry name; `None` picks the scheme's default.
    pub linear_solver: Option<String>,
    pub solver_options: Option<SolverOptions>,
}

impl Default for RunSetup {
    fn default() -> Self {
        Self {
            alpha: 0.61,
            dt: 0.05,
            t_final: 40.0,
            degree: 2,
            eta0: 10.0,
            model: DiffusionModel::default(),
            seed: Seed::Uniform(0.1),
            linear_solver: None,
            solver_options: None,
        }
    }
}

/// Region averages as linear functionals of a state vector.
#[derive(Clone, Debug, PartialEq)]
pub struct RegionAverager {
    state_len: usize,
    /// Per region: sparse weights `(index, integral of the basis function)`.
    weights: BTreeMap<RegionId, Vec<(usize, f64)>>,
    measures: BTreeMap<RegionId, f64>,
}

impl RegionAverager {
    pub fn for_space(mesh: &PolytopalMesh, space: &DgSpace) -> Self {
        let integrals = space.integrals();
        let mut weights: BTreeMap<RegionId, Vec<(usize, f64)>> = BTreeMap::new();
        let mut measures: BTreeMap<RegionId, f64> = BTreeMap::new();
        for (e, el) in mesh.elements().iter().enumerate() {
            let w = weights.entry(el.region).or_default();
            for i in space.dofs(e) {
                if integrals[i] != 0.0 {
                    w.push((i, integrals[i]));
                }
            }
            *measures.entry(el.region).or_default() += el.measure;
        }
        Self {
            state_len: space.ndofs(),
            weights,
            measures,
        }
    }

    pub fn for_graph(conn: &Connectome) -> Self {
        let mut weights: BTreeMap<RegionId, Vec<(usize, f64)>> = BTreeMap::new();
        let mut measures: BTreeMap<RegionId, f64> = BTreeMap::new();
        for (i, n) in conn.nodes().iter().enumerate() {
            weights.entry(n.region).or_default().push((i, n.volume));
            *measures.entry(n.region).or_default() += n.volume;
        }
        Self {
            state_len: conn.len(),
            weights,
            measures,
        }
    }

    pub fn region_ids(&self) -> Vec<RegionId> {
        self.measures.keys().copied().collect()
    }

    pub fn measure(&self, region: RegionId) -> Option<f64> {
        self.measures.get(&region).copied()
    }

    fn check(&self, regions: &BTreeSet<RegionId>) -> Result<()> {
        if regions.is_empty() {
            return Err(Error::param("region", "empty region set"));
        }
        let missing: Vec<RegionId> = regions
            .iter()
            .filter(|r| !self.measures.contains_key(r))
            .copied()
            .collect();
        if !missing.is_empty() {
            return Err(Error::UnknownRegions { ids: missing });
        }
        Ok(())
    }

    /// Measure-weighted mean over the union of `regions`.
    pub fn average(&self, state: &[f64], regions: &BTreeSet<RegionId>) -> Result<f64> {
        self.check(regions)?;
        if state.len() != self.state_len {
            return Err(Error::DimensionMismatch {
                expected: self.state_len,
                actual: state.len(),
            });
        }
        let mut num = 0.0;
        let mut den = 0.0;
        for r in regions {
            num += self.weights[r]
                .iter()
                .map(|(i, w)| w * state[*i])
                .sum::<f64>();
            den += self.measures[r];
        }
        Ok(num / den)
    }

    pub fn global_average(&self, state: &[f64]) -> Result<f64> {
        let all: BTreeSet<RegionId> = self.measures.keys().copied().collect();
        self.average(state, &all)
    }
}

/// Time series of the average over `regions`.
pub fn spatial_average(
    traj: &Trajectory,
    averager: &RegionAverager,
    regions: &BTreeSet<RegionId>,
) -> Result<Vec<f64>> {
    traj.states
        .iter()
        .map(|s| averager.average(s, regions))
        .collect()
}

pub struct Simulation {
    pub trajectory: Trajectory,
    pub averager: RegionAverager,
}

pub trait SpreadingScheme: Send + Sync {
    fn name(&self) -> &'static str;
    fn domain(&self) -> DomainKind;
    fn simulate(
        &self,
        domain: Domain<'_>,
        setup: &RunSetup,
        solvers: &SolverRegistry,
    ) -> Result<Simulation>;
}

fn check_setup(setup: &RunSetup) -> Result<()> {
    if !(setup.dt > 0.0) || !setup.dt.is_finite() {
        return Err(Error::param("dt", format!("must be > 0, got {}", setup.dt)));
    }
    if !(setup.t_final >= setup.dt) || !setup.t_final.is_finite() {
        return Err(Error::param(
            "T",
            format!("must be >= dt, got {}", setup.t_final),
        ));
    }
    if !(setup.alpha >= 0.0) || !setup.alpha.is_finite() {
        return Err(Error::param(
            "alpha",
            format!("must be >= 0, got {}", setup.alpha),
        ));
    }
    Ok(())
}

/// Interior-penalty DG in space, semi-implicit Euler in time.
#[derive(Clone, Copy, Debug, Default)]
pub struct DgSemiImplicitEuler;

impl SpreadingScheme for DgSemiImplicitEuler {
    fn name(&self) -> &'static str {
        "dg-semi-implicit-euler"
    }

    fn domain(&self) -> DomainKind {
        DomainKind::Mesh
    }

    fn simulate(
        &self,
        domain: Domain<'_>,
        setup: &RunSetup,
        solvers: &SolverRegistry,
    ) -> Result<Simulation> {
        let Domain::Mesh(mesh) = domain else {
            return Err(Error::WrongDomain {
                scheme: self.name(),
                domain: domain.kind().as_str(),
            });
        };
        check_setup(setup)?;
        setup.seed.validate(&mesh.region_ids())?;
        let space = DgSpace::new(mesh, setup.degree)?;
        let averager = RegionAverager::for_space(mesh, &space);
        let initial =
            space.project_piecewise_constant(|e| setup.seed.value_in(mesh.elements()[e].region));
        let system = DgSystem::assemble(mesh, space, setup.model, setup.alpha, setup.eta0)?;
        let solver = solvers
            .get(setup.linear_solver.as_deref().unwrap_or(DG_DEFAULT_SOLVER))?
            .instance();
        let opts = setup.solver_options.unwrap_or_default();
        let stepper = SemiImplicitEuler::new(&system, setup.dt, solver, opts)?;
        let trajectory = stepper.run(initial, setup.t_final, self.name())?;
        Ok(Simulation {
            trajectory,
            averager,
        })
    }
}

/// Crank-Nicolson on the connectome with extrapolated reaction.
#[derive(Clone, Copy, Debug, Default)]
pub struct GraphCn {
    pub rhs: RhsReaction,
}

impl SpreadingScheme for GraphCn {
    fn name(&self) -> &'static str {
        match self.rhs {
            RhsReaction::Consistent => "graph-cn",
            RhsReaction::PaperLiteral => "graph-cn-paper-literal",
        }
    }

    fn domain(&self) -> DomainKind {
        DomainKind::Graph
    }

    fn simulate(
        &self,
        domain: Domain<'_>,
        setup: &RunSetup,
        solvers: &SolverRegistry,
    ) -> Result<Simulation> {
        let Domain::Graph(conn) = domain else {
            return Err(Error::WrongDomain {
                scheme: self.name(),
                domain: domain.kind().as_str(),
            });
        };
        check_setup(setup)?;
        setup.seed.validate(&conn.region_ids())?;
        let initial: Vec<f64> = conn
            .nodes()
            .iter()
            .map(|n| setup.seed.value_in(n.region))
            .collect();
        let solver = match &setup.linear_solver {
            Some(name) => solvers.get(name)?.instance(),
            None => default_graph_solver(conn.len()),
        };
        let opts = setup.solver_options.unwrap_or_else(default_graph_options);
        let stepper = CnExtrapolated::new(conn.laplacian(), setup.alpha, setup.dt)?
            .with_rhs_reaction(self.rhs)
            .with_solver(solver, opts);
        let trajectory = stepper.run(initial, setup.t_final, self.name())?;
        Ok(Simulation {
            trajectory,
            averager: RegionAverager::for_graph(conn),
        })
    }
}

pub struct SchemeRegistry {
    schemes: BTreeMap<&'static str, Arc<dyn SpreadingScheme>>,
}

impl SchemeRegistry {
    pub fn empty() -> Self {
        Self {
            schemes: BTreeMap::new(),
        }
    }

    pub fn with_builtin() -> Self {
        let mut r = Self::empty();
        r.register(Arc::new(DgSemiImplicitEuler));
        r.register(Arc::new(GraphCn::default()));
        r.register(Arc::new(GraphCn {
            rhs: RhsReaction::PaperLiteral,
        }));
        r
    }

    pub fn register(&mut self, scheme: Arc<dyn SpreadingScheme>) {
        self.schemes.insert(scheme.name(), scheme);
    }

    pub fn get(&self, name: &str) -> Result<Arc<dyn SpreadingScheme>> {
        self.schemes
            .get(name)
            .cloned()
            .ok_or_else(|| Error::UnknownStrategy {
                kind: "scheme",
                name: name.into(),
                available: self.names(),
            })
    }

    pub fn names(&self) -> Vec<String> {
        self.schemes.keys().map(|s| s.to_string()).collect()
    }

    /// Default scheme for a domain kind.
    pub fn default_for(
        &self,
        kind: DomainKind,
        paper_literal_rhs: bool,
    ) -> Result<Arc<dyn SpreadingScheme>> {
        match (kind, paper_literal_rhs) {
            (DomainKind::Mesh, _) => self.get("dg-semi-implicit-euler"),
            (DomainKind::Graph, false) => self.get("graph-cn"),
            (DomainKind::Graph, true) => self.get("graph-cn-paper-literal"),
        }
    }
}

impl Default for SchemeRegistry {
    fn default() -> Self {
        Self::with_builtin()
    }
}
