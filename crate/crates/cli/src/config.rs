//! Flat `key = value` run configuration with `#` comments.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use fkneuro_core::geometry::RegionId;
use fkneuro_core::scheme::DomainKind;

/// Which proteins' mapping parameters and seeding keywords apply.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Protein {
    Abeta,
    Tau,
}

impl Protein {
    pub fn as_str(self) -> &'static str {
        match self {
            Protein::Abeta => "abeta",
            Protein::Tau => "tau",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "abeta" | "amyloid" | "ab" => Ok(Protein::Abeta),
            "tau" | "taup" => Ok(Protein::Tau),
            other => bail!("unknown protein `{other}` (expected abeta or tau)"),
        }
    }
}

/// Initial-condition support.
#[derive(Clone, Debug, PartialEq)]
pub enum SeedRegions {
    All,
    /// The atlas seed set of a protein: neocortex for abeta, entorhinal for tau.
    Atlas(Protein),
    Ids(BTreeSet<RegionId>),
}

impl SeedRegions {
    fn parse(s: &str) -> Result<Self> {
        let t = s.trim();
        match t.to_ascii_lowercase().as_str() {
            "all" | "" => return Ok(SeedRegions::All),
            "abeta" => return Ok(SeedRegions::Atlas(Protein::Abeta)),
            "tau" => return Ok(SeedRegions::Atlas(Protein::Tau)),
            _ => {}
        }
        let ids = t
            .split(',')
            .map(|x| {
                x.trim()
                    .parse::<RegionId>()
                    .with_context(|| format!("bad region id `{x}`"))
            })
            .collect::<Result<BTreeSet<_>>>()?;
        Ok(SeedRegions::Ids(ids))
    }

    fn render(&self) -> String {
        match self {
            SeedRegions::All => "all".into(),
            SeedRegions::Atlas(p) => p.as_str().into(),
            SeedRegions::Ids(ids) => ids
                .iter()
                .map(|i| i.to_string())
                .collect::<Vec<_>>()
                .join(","),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimulationConfig {
    pub domain: DomainKind,
    pub mesh: Option<PathBuf>,
    pub graph: Option<PathBuf>,
    pub atlas: Option<PathBuf>,
    pub alpha: f64,
    pub dt: f64,
    pub t_final: f64,
    pub ell: usize,
    pub eta0: f64,
    pub d_ext: f64,
    pub d_axn: f64,
    pub seed_regions: SeedRegions,
    pub seed_value: f64,
    pub solver_tol: Option<f64>,
    pub solver_maxit_factor: usize,
    pub linear_solver: Option<String>,
    pub scheme: Option<String>,
    pub c_crit: f64,
    /// Overrides the connectome file's scale factor.
    pub k: Option<f64>,
    pub paper_literal_rhs: bool,
    pub protein: Protein,
    pub theta_low: Option<f64>,
    pub theta_high: Option<f64>,
    pub gamma: f64,
    pub epsilon: f64,
    pub positivity_cutoff: f64,
    pub alphas: Vec<f64>,
    pub output: PathBuf,
    pub workers: Option<usize>,
    pub dump_state: bool,
    pub node_output: bool,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            domain: DomainKind::Mesh,
            mesh: None,
            graph: None,
            atlas: None,
            alpha: 0.61,
            dt: 0.05,
            t_final: 40.0,
            ell: 2,
            eta0: 10.0,
            d_ext: 8.0,
            d_axn: 80.0,
            seed_regions: SeedRegions::All,
            seed_value: 0.1,
            solver_tol: None,
            solver_maxit_factor: 10,
            linear_solver: None,
            scheme: None,
            c_crit: 0.5,
            k: None,
            paper_literal_rhs: false,
            protein: Protein::Abeta,
            theta_low: None,
            theta_high: None,
            gamma: 0.25,
            epsilon: 0.1,
            positivity_cutoff: 1.55,
            alphas: Vec::new(),
            output: PathBuf::from("fkneuro-out"),
            workers: None,
            dump_state: false,
            node_output: false,
        }
    }
}

/// Amyloid-beta growth rates swept in the sensitivity study, 1/year.
pub const ABETA_ALPHAS: [f64; 8] = [0.08, 0.27, 0.61, 1.24, 2.18, 3.87, 6.30, 8.54];
/// Tau growth rates swept in the sensitivity study, 1/year.
pub const TAU_ALPHAS: [f64; 8] = [0.20, 0.37, 0.52, 0.70, 0.98, 1.33, 1.89, 2.57];

fn parse_f64(key: &str, v: &str) -> Result<f64> {
    v.trim()
        .parse::<f64>()
        .map_err(|_| anyhow!("`{key}`: expected a number, got `{v}`"))
}

fn parse_opt<T>(v: &str, f: impl FnOnce(&str) -> Result<T>) -> Result<Option<T>> {
    if v.trim().is_empty() {
        Ok(None)
    } else {
        f(v).map(Some)
    }
}

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v.trim().to_ascii_lowercase().as_str() {
        "true" | "1" | "yes" | "on" => Ok(true),
        "false" | "0" | "no" | "off" => Ok(false),
        _ => bail!("`{key}`: expected true or false, got `{v}`"),
    }
}

fn opt_to_string<T: std::fmt::Debug>(v: &Option<T>) -> String {
    v.as_ref().map(|x| format!("{x:?}")).unwrap_or_default()
}

fn path_to_string(p: &Option<PathBuf>) -> String {
    p.as_ref()
        .map(|x| x.display().to_string())
        .unwrap_or_default()
}

impl SimulationConfig {
    /// Applies one `key = value` assignment.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key.trim() {
            "domain" => {
                self.domain = match v.to_ascii_lowercase().as_str() {
                    "mesh" => DomainKind::Mesh,
                    "graph" => DomainKind::Graph,
                    _ => bail!("`domain`: expected mesh or graph, got `{v}`"),
                }
            }
            "mesh" => self.mesh = parse_opt(v, |s| Ok(PathBuf::from(s)))?,
            "graph" => self.graph = parse_opt(v, |s| Ok(PathBuf::from(s)))?,
            "atlas" => self.atlas = parse_opt(v, |s| Ok(PathBuf::from(s)))?,
            "alpha" => self.alpha = parse_f64(key, v)?,
            "dt" => self.dt = parse_f64(key, v)?,
            "T" => self.t_final = parse_f64(key, v)?,
            "ell" => {
                self.ell = v
                    .parse()
                    .map_err(|_| anyhow!("`ell`: expected an integer, got `{v}`"))?
            }
            "eta0" => self.eta0 = parse_f64(key, v)?,
            "d_ext" => self.d_ext = parse_f64(key, v)?,
            "d_axn" => self.d_axn = parse_f64(key, v)?,
            "seed_regions" => self.seed_regions = SeedRegions::parse(v)?,
            "seed_value" => self.seed_value = parse_f64(key, v)?,
            "solver_tol" => self.solver_tol = parse_opt(v, |s| parse_f64(key, s))?,
            "solver_maxit_factor" => {
                self.solver_maxit_factor = v
                    .parse()
                    .map_err(|_| anyhow!("`solver_maxit_factor`: expected an integer, got `{v}`"))?
            }
            "linear_solver" => self.linear_solver = parse_opt(v, |s| Ok(s.to_string()))?,
            "scheme" => self.scheme = parse_opt(v, |s| Ok(s.to_string()))?,
            "c_crit" => self.c_crit = parse_f64(key, v)?,
            "k" => self.k = parse_opt(v, |s| parse_f64(key, s))?,
            "paper_literal_rhs" => self.paper_literal_rhs = parse_bool(key, v)?,
            "protein" => self.protein = Protein::parse(v)?,
            "theta_low" => self.theta_low = parse_opt(v, |s| parse_f64(key, s))?,
            "theta_high" => self.theta_high = parse_opt(v, |s| parse_f64(key, s))?,
            "gamma" => self.gamma = parse_f64(key, v)?,
            "epsilon" => self.epsilon = parse_f64(key, v)?,
            "positivity_cutoff" => self.positivity_cutoff = parse_f64(key, v)?,
            "alphas" => {
                self.alphas = match v.to_ascii_lowercase().as_str() {
                    "" => Vec::new(),
                    "abeta" => ABETA_ALPHAS.to_vec(),
                    "tau" => TAU_ALPHAS.to_vec(),
                    _ => v
                        .split(',')
                        .map(|x| parse_f64(key, x))
                        .collect::<Result<_>>()?,
                }
            }
            "output" => self.output = PathBuf::from(v),
            "workers" => {
                self.workers = parse_opt(v, |s| {
                    s.parse::<usize>()
                        .map_err(|_| anyhow!("`workers`: expected an integer, got `{s}`"))
                })?
            }
            "dump_state" => self.dump_state = parse_bool(key, v)?,
            "node_output" => self.node_output = parse_bool(key, v)?,
            other => bail!("unknown configuration key `{other}`"),
        }
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| anyhow!("line {}: expected `key = value`", i + 1))?;
            cfg.set(k, v).with_context(|| format!("line {}", i + 1))?;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("in {}", path.display()))
    }

    /// Every key in a fixed order; `parse` of the output reproduces `self`.
    pub fn serialize(&self) -> String {
        let mut out = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(out, "{k} = {v}");
        };
        kv("domain", self.domain.as_str().into());
        kv("mesh", path_to_string(&self.mesh));
        kv("graph", path_to_string(&self.graph));
        kv("atlas", path_to_string(&self.atlas));
        kv("alpha", format!("{:?}", self.alpha));
        kv("dt", format!("{:?}", self.dt));
        kv("T", format!("{:?}", self.t_final));
        kv("ell", self.ell.to_string());
        kv("eta0", format!("{:?}", self.eta0));
        kv("d_ext", format!("{:?}", self.d_ext));
        kv("d_axn", format!("{:?}", self.d_axn));
        kv("seed_regions", self.seed_regions.render());
        kv("seed_value", format!("{:?}", self.seed_value));
        kv("solver_tol", opt_to_string(&self.solver_tol));
        kv("solver_maxit_factor", self.solver_maxit_factor.to_string());
        kv(
            "linear_solver",
            self.linear_solver.clone().unwrap_or_default(),
        );
        kv("scheme", self.scheme.clone().unwrap_or_default());
        kv("c_crit", format!("{:?}", self.c_crit));
        kv("k", opt_to_string(&self.k));
        kv("paper_literal_rhs", self.paper_literal_rhs.to_string());
        kv("protein", self.protein.as_str().into());
        kv("theta_low", opt_to_string(&self.theta_low));
        kv("theta_high", opt_to_string(&self.theta_high));
        kv("gamma", format!("{:?}", self.gamma));
        kv("epsilon", format!("{:?}", self.epsilon));
        kv("positivity_cutoff", format!("{:?}", self.positivity_cutoff));
        kv(
            "alphas",
            self.alphas
                .iter()
                .map(|a| format!("{a:?}"))
                .collect::<Vec<_>>()
                .join(","),
        );
        kv("output", self.output.display().to_string());
        kv("workers", opt_to_string(&self.workers));
        kv("dump_state", self.dump_state.to_string());
        kv("node_output", self.node_output.to_string());
        out
    }

    /// Checks parameter ranges before any file is read.
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            bail!("invalid dt = {}: must be > 0", self.dt);
        }
        if !(self.t_final >= self.dt) || !self.t_final.is_finite() {
            bail!("invalid T = {}: must be >= dt = {}", self.t_final, self.dt);
        }
        if !(self.alpha > 0.0) || !self.alpha.is_finite() {
            bail!("invalid alpha = {}: must be > 0", self.alpha);
        }
        if !(self.seed_value > 0.0 && self.seed_value <= 1.0) {
            bail!(
                "invalid seed_value = {}: must lie in (0, 1]",
                self.seed_value
            );
        }
        if self.ell < 1 {
            bail!("invalid ell = {}: must be >= 1", self.ell);
        }
        if !(self.eta0 > 0.0) {
            bail!("invalid eta0 = {}: must be > 0", self.eta0);
        }
        if !(self.c_crit > 0.0 && self.c_crit < 1.0) {
            bail!("invalid c_crit = {}: must lie in (0, 1)", self.c_crit);
        }
        if let Some(a) = self.alphas.iter().find(|a| !(**a > 0.0)) {
            bail!("invalid sweep alpha = {a}: must be > 0");
        }
        match self.domain {
            DomainKind::Mesh if self.mesh.is_none() => bail!("domain = mesh requires `mesh`"),
            DomainKind::Graph if self.graph.is_none() => bail!("domain = graph requires `graph`"),
            _ => {}
        }
        Ok(())
    }
}
