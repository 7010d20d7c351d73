//! Single runs, alpha sweeps, and mesh-vs-graph comparisons, with their CSV artifacts.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use fkneuro_core::geometry::{
    load_mesh, BraakAtlas, BraakStage, Connectome, DiffusionModel, PolytopalMesh, RegionId,
};
use fkneuro_core::linsolve::{SolverOptions, SolverRegistry};
use fkneuro_core::scheme::{Domain, DomainKind, RunSetup, SchemeRegistry, Seed, Simulation};
use fkneuro_core::staging::{
    braak_activation_order, crossing_time, reconstruct_macrostages, stage_curves,
    staging_report_csv, ActivationOrder, MacrostageTimeline,
};
use fkneuro_core::trajectory::write_state_dump;
use rayon::prelude::*;

use crate::config::{Protein, SeedRegions, SimulationConfig};

/// Reported concentrations outside this band get a warning row.
pub const REPORT_BAND: (f64, f64) = (-0.05, 1.05);
/// Level whose crossing marks the onset of saturation.
pub const SATURATION_LEVEL: f64 = 0.95;

pub enum LoadedDomain {
    Mesh(PolytopalMesh),
    Graph(Connectome),
}

impl LoadedDomain {
    pub fn as_domain(&self) -> Domain<'_> {
        match self {
            LoadedDomain::Mesh(m) => Domain::Mesh(m),
            LoadedDomain::Graph(g) => Domain::Graph(g),
        }
    }
}

pub fn load_domain(cfg: &SimulationConfig) -> Result<LoadedDomain> {
    match cfg.domain {
        DomainKind::Mesh => {
            let path = cfg.mesh.as_ref().context("domain = mesh requires `mesh`")?;
            let mesh =
                load_mesh(path).with_context(|| format!("loading mesh {}", path.display()))?;
            Ok(LoadedDomain::Mesh(mesh))
        }
        DomainKind::Graph => {
            let path = cfg
                .graph
                .as_ref()
                .context("domain = graph requires `graph`")?;
            let mut conn = Connectome::load(path)
                .with_context(|| format!("loading graph {}", path.display()))?;
            if let Some(k) = cfg.k {
                conn = conn.with_scale(k)?;
            }
            Ok(LoadedDomain::Graph(conn))
        }
    }
}

/// Atlas from file, or the ordered-slab atlas when the domain has exactly five regions.
pub fn load_atlas(cfg: &SimulationConfig, domain: &LoadedDomain) -> Result<Option<BraakAtlas>> {
    let labels = domain.as_domain().region_ids();
    if let Some(path) = &cfg.atlas {
        let atlas =
            BraakAtlas::load(path).with_context(|| format!("loading atlas {}", path.display()))?;
        atlas.validate_against(&labels)?;
        return Ok(Some(atlas));
    }
    if labels.len() == 5 {
        let ids: [RegionId; 5] = labels.clone().try_into().unwrap();
        log::info!("no atlas given; treating regions {labels:?} as ordered slabs II..VI");
        return Ok(Some(BraakAtlas::ordered_slabs(ids)));
    }
    log::info!("no atlas given; Braak staging is skipped");
    Ok(None)
}

pub fn run_setup(cfg: &SimulationConfig, atlas: Option<&BraakAtlas>) -> Result<RunSetup> {
    let seed = match &cfg.seed_regions {
        SeedRegions::All => Seed::Uniform(cfg.seed_value),
        SeedRegions::Ids(ids) => Seed::Regions {
            ids: ids.clone(),
            value: cfg.seed_value,
        },
        SeedRegions::Atlas(p) => {
            let atlas = atlas.context("seed_regions = abeta/tau requires an atlas")?;
            let ids = match p {
                Protein::Abeta => atlas.abeta_seed(),
                Protein::Tau => atlas.tau_seed(),
            };
            Seed::Regions {
                ids: ids.clone(),
                value: cfg.seed_value,
            }
        }
    };
    let default_tol = match cfg.domain {
        DomainKind::Mesh => SolverOptions::default().rel_tol,
        DomainKind::Graph => fkneuro_core::graph::default_graph_options().rel_tol,
    };
    let model = if cfg.d_ext == 0.0 && cfg.d_axn == 0.0 {
        DiffusionModel::none()
    } else {
        DiffusionModel::new(cfg.d_ext, cfg.d_axn)?
    };
    Ok(RunSetup {
        alpha: cfg.alpha,
        dt: cfg.dt,
        t_final: cfg.t_final,
        degree: cfg.ell,
        eta0: cfg.eta0,
        model,
        seed,
        linear_solver: cfg.linear_solver.clone(),
        solver_options: Some(SolverOptions {
            rel_tol: cfg.solver_tol.unwrap_or(default_tol),
            maxit_factor: cfg.solver_maxit_factor,
        }),
    })
}

pub struct RunOutcome {
    pub simulation: Simulation,
    pub scheme: String,
    pub region_curves: BTreeMap<RegionId, Vec<f64>>,
    pub global: Vec<f64>,
    pub stage_curves: Option<BTreeMap<BraakStage, Vec<f64>>>,
    pub order: Option<ActivationOrder>,
    pub timeline: Option<MacrostageTimeline>,
    /// `(kind, t, column, value)` rows.
    pub warnings: Vec<(String, f64, String, f64)>,
}

impl RunOutcome {
    pub fn times(&self) -> &[f64] {
        &self.simulation.trajectory.times
    }
}

/// Runs the configured scheme without touching the output directory.
pub fn simulate(
    cfg: &SimulationConfig,
    domain: &LoadedDomain,
    atlas: Option<&BraakAtlas>,
) -> Result<RunOutcome> {
    let schemes = SchemeRegistry::with_builtin();
    let scheme = match &cfg.scheme {
        Some(name) => schemes.get(name)?,
        None => schemes.default_for(cfg.domain, cfg.paper_literal_rhs)?,
    };
    if cfg.paper_literal_rhs && cfg.domain == DomainKind::Mesh {
        log::warn!("paper_literal_rhs only affects graph runs; ignored");
    }
    let setup = run_setup(cfg, atlas)?;
    let simulation =
        scheme.simulate(domain.as_domain(), &setup, &SolverRegistry::with_builtin())?;
    let traj = &simulation.trajectory;
    let avg = &simulation.averager;
    let mut region_curves = BTreeMap::new();
    for id in avg.region_ids() {
        let curve = fkneuro_core::scheme::spatial_average(traj, avg, &BTreeSet::from([id]))?;
        region_curves.insert(id, curve);
    }
    let global = traj
        .states
        .iter()
        .map(|s| avg.global_average(s))
        .collect::<fkneuro_core::Result<Vec<f64>>>()?;
    let mut warnings = Vec::new();
    let (lo, hi) = REPORT_BAND;
    for (id, curve) in &region_curves {
        for (t, v) in traj.times.iter().zip(curve) {
            if !(lo..=hi).contains(v) {
                warnings.push(("overshoot".into(), *t, format!("region_{id}"), *v));
            }
        }
    }
    let (stage_curves, order, timeline) = match atlas {
        Some(atlas) => {
            let curves = stage_curves(traj, avg, atlas)?;
            let order = braak_activation_order(&traj.times, &curves, cfg.c_crit)?;
            let t_final = traj.final_time();
            let timeline = match reconstruct_macrostages(&traj.times, &curves, cfg.c_crit) {
                Ok(t) => Some(t),
                Err(e) => {
                    log::warn!("{e}");
                    warnings.push(("staging".into(), t_final, e.to_string(), f64::NAN));
                    None
                }
            };
            for w in timeline.iter().flat_map(|t| &t.warnings) {
                warnings.push(("staging".into(), t_final, w.clone(), f64::NAN));
            }
            (Some(curves), Some(order), timeline)
        }
        None => (None, None, None),
    };
    Ok(RunOutcome {
        scheme: scheme.name().to_string(),
        simulation,
        region_curves,
        global,
        stage_curves,
        order,
        timeline,
        warnings,
    })
}

fn fmt_f(v: f64) -> String {
    format!("{v:.16e}")
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_f).unwrap_or_else(|| "NA".into())
}

pub fn trajectory_csv(out: &RunOutcome) -> String {
    let mut s = String::from("t");
    for id in out.region_curves.keys() {
        let _ = write!(s, ",region_{id}");
    }
    s.push_str(",global\n");
    for (n, t) in out.times().iter().enumerate() {
        s.push_str(&fmt_f(*t));
        for curve in out.region_curves.values() {
            let _ = write!(s, ",{}", fmt_f(curve[n]));
        }
        let _ = writeln!(s, ",{}", fmt_f(out.global[n]));
    }
    s
}

pub fn braak_curves_csv(times: &[f64], curves: &BTreeMap<BraakStage, Vec<f64>>) -> String {
    let mut s = String::from("t");
    for stage in curves.keys() {
        let _ = write!(s, ",{}", stage.roman());
    }
    s.push('\n');
    for (n, t) in times.iter().enumerate() {
        s.push_str(&fmt_f(*t));
        for c in curves.values() {
            let _ = write!(s, ",{}", fmt_f(c[n]));
        }
        s.push('\n');
    }
    s
}

/// Reads a `t,II,...,VI` curve file back.
/// Time grid and per-stage curves.
pub type BraakCurves = (Vec<f64>, BTreeMap<BraakStage, Vec<f64>>);

pub fn parse_braak_curves(text: &str) -> Result<BraakCurves> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines.next().context("empty curve file")?;
    let stages = header
        .split(',')
        .skip(1)
        .map(|h| BraakStage::parse(h).with_context(|| format!("unknown Braak stage column `{h}`")))
        .collect::<Result<Vec<_>>>()?;
    let mut times = Vec::new();
    let mut curves: BTreeMap<BraakStage, Vec<f64>> =
        stages.iter().map(|s| (*s, Vec::new())).collect();
    for (i, line) in lines.enumerate() {
        let f: Vec<f64> = line
            .split(',')
            .map(|x| x.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .with_context(|| format!("row {}: bad number", i + 2))?;
        if f.len() != stages.len() + 1 {
            bail!(
                "row {}: expected {} fields, found {}",
                i + 2,
                stages.len() + 1,
                f.len()
            );
        }
        times.push(f[0]);
        for (s, v) in stages.iter().zip(&f[1..]) {
            curves.get_mut(s).unwrap().push(*v);
        }
    }
    Ok((times, curves))
}

fn warnings_csv(rows: &[(String, f64, String, f64)]) -> String {
    let mut s = String::from("kind,t,column,value\n");
    for (kind, t, col, v) in rows {
        let _ = writeln!(
            s,
            "{kind},{},{},{}",
            fmt_f(*t),
            col.replace(',', ";"),
            fmt_f(*v)
        );
    }
    s
}

fn node_csv(out: &RunOutcome, conn: &Connectome) -> String {
    let mut s = String::from("t,node_id,c\n");
    for (t, state) in out.times().iter().zip(&out.simulation.trajectory.states) {
        for (node, c) in conn.nodes().iter().zip(state) {
            let _ = writeln!(s, "{},{},{}", fmt_f(*t), node.region, fmt_f(*c));
        }
    }
    s
}

fn write(dir: &Path, name: &str, body: &str) -> Result<()> {
    let path = dir.join(name);
    fs::write(&path, body).with_context(|| format!("writing {}", path.display()))
}

pub fn write_artifacts(
    cfg: &SimulationConfig,
    domain: &LoadedDomain,
    out: &RunOutcome,
) -> Result<()> {
    let dir = &cfg.output;
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    write(dir, "config.txt", &cfg.serialize())?;
    write(dir, "trajectory.csv", &trajectory_csv(out))?;
    write(dir, "warnings.csv", &warnings_csv(&out.warnings))?;
    if let (Some(curves), Some(order)) = (&out.stage_curves, &out.order) {
        write(
            dir,
            "braak_curves.csv",
            &braak_curves_csv(out.times(), curves),
        )?;
        write(dir, "staging.csv", &staging_report_csv(order))?;
    }
    if cfg.dump_state {
        let path = dir.join("state.bin");
        let file =
            fs::File::create(&path).with_context(|| format!("creating {}", path.display()))?;
        write_state_dump(&out.simulation.trajectory, std::io::BufWriter::new(file))?;
    }
    if cfg.node_output {
        if let LoadedDomain::Graph(conn) = domain {
            write(dir, "nodes.csv", &node_csv(out, conn))?;
        }
    }
    Ok(())
}

/// Worker count: config, then `FKNEURO_THREADS`, then the rayon default.
pub fn worker_count(cfg: &SimulationConfig) -> Option<usize> {
    let env = std::env::var("FKNEURO_THREADS")
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok());
    match (cfg.workers, env) {
        (Some(w), Some(e)) => Some(w.min(e)),
        (w, e) => w.or(e),
    }
    .map(|n| n.max(1))
}

fn in_pool<T: Send>(cfg: &SimulationConfig, f: impl FnOnce() -> T + Send) -> Result<T> {
    match worker_count(cfg) {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(n).build()?;
            Ok(pool.install(f))
        }
        None => Ok(f()),
    }
}

/// Validates, loads, simulates, and writes all run artifacts.
pub fn run(cfg: &SimulationConfig) -> Result<RunOutcome> {
    cfg.validate()?;
    let domain = load_domain(cfg)?;
    let atlas = load_atlas(cfg, &domain)?;
    let out = in_pool(cfg, || simulate(cfg, &domain, atlas.as_ref()))??;
    write_artifacts(cfg, &domain, &out)?;
    Ok(out)
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub alpha: f64,
    pub t_half: Option<f64>,
    pub t_saturation: Option<f64>,
    pub global: Vec<f64>,
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut s = String::from("alpha,t_half,t_saturation\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{}",
            fmt_f(r.alpha),
            fmt_opt(r.t_half),
            fmt_opt(r.t_saturation)
        );
    }
    s
}

/// One run per alpha (in parallel). Successful rows are written even when a
/// run fails; the first failure is then returned.
pub fn sweep_on(
    cfg: &SimulationConfig,
    domain: &LoadedDomain,
    atlas: Option<&BraakAtlas>,
) -> Result<Vec<SweepRow>> {
    let alphas = if cfg.alphas.is_empty() {
        vec![cfg.alpha]
    } else {
        cfg.alphas.clone()
    };
    let results: Vec<Result<SweepRow>> = in_pool(cfg, || {
        alphas
            .par_iter()
            .map(|&alpha| {
                let c = SimulationConfig {
                    alpha,
                    ..cfg.clone()
                };
                let out =
                    simulate(&c, domain, atlas).with_context(|| format!("alpha = {alpha}"))?;
                Ok(SweepRow {
                    alpha,
                    t_half: crossing_time(out.times(), &out.global, 0.5),
                    t_saturation: crossing_time(out.times(), &out.global, SATURATION_LEVEL),
                    global: out.global,
                })
            })
            .collect()
    })?;
    let mut rows = Vec::new();
    let mut first_err = None;
    for r in results {
        match r {
            Ok(row) => rows.push(row),
            Err(e) if first_err.is_none() => first_err = Some(e),
            Err(e) => log::error!("{e:#}"),
        }
    }
    fs::create_dir_all(&cfg.output)
        .with_context(|| format!("creating {}", cfg.output.display()))?;
    write(&cfg.output, "sweep.csv", &sweep_csv(&rows))?;
    if let Some(e) = first_err {
        return Err(e.context("sweep aborted; completed rows kept in sweep.csv"));
    }
    let mut sorted = rows.clone();
    sorted.sort_by(|a, b| a.alpha.total_cmp(&b.alpha));
    for w in sorted.windows(2) {
        match (w[0].t_half, w[1].t_half) {
            (Some(a), Some(b)) if b < a => {}
            (a, b) => bail!(
                "t_half is not strictly decreasing in alpha: alpha {} -> {}, alpha {} -> {}",
                w[0].alpha,
                fmt_opt(a),
                w[1].alpha,
                fmt_opt(b)
            ),
        }
    }
    Ok(rows)
}

pub fn sweep(cfg: &SimulationConfig) -> Result<Vec<SweepRow>> {
    cfg.validate()?;
    let domain = load_domain(cfg)?;
    let atlas = load_atlas(cfg, &domain)?;
    sweep_on(cfg, &domain, atlas.as_ref())
}

#[derive(Clone, Debug, PartialEq)]
pub struct CompareRow {
    pub column: String,
    pub max_abs_deviation: f64,
    pub activation_mesh: Option<f64>,
    pub activation_graph: Option<f64>,
}

impl CompareRow {
    /// Positive when the graph activates first.
    pub fn graph_lead(&self) -> Option<f64> {
        Some(self.activation_mesh? - self.activation_graph?)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Comparison {
    pub grid: Vec<f64>,
    pub rows: Vec<CompareRow>,
    /// Largest stage up to which both activation orders agree.
    pub order_agreement_through: Option<BraakStage>,
}

fn interpolate(times: &[f64], values: &[f64], t: f64) -> f64 {
    let k = times.partition_point(|x| *x < t);
    if k == 0 {
        return values[0];
    }
    if k >= times.len() {
        return *values.last().unwrap();
    }
    let (t0, t1) = (times[k - 1], times[k]);
    values[k - 1] + (t - t0) / (t1 - t0) * (values[k] - values[k - 1])
}

/// Grid of the coarser run up to the shorter horizon.
fn common_grid(a: &[f64], b: &[f64]) -> Vec<f64> {
    let end = a.last().unwrap().min(*b.last().unwrap());
    let coarse = if a.len() <= b.len() { a } else { b };
    coarse
        .iter()
        .copied()
        .filter(|t| *t <= end + 1e-12)
        .collect()
}

fn stage_agreement(a: &ActivationOrder, b: &ActivationOrder) -> Option<BraakStage> {
    let rank = |o: &ActivationOrder, upto: BraakStage| -> Vec<BraakStage> {
        o.order
            .iter()
            .map(|(s, _)| *s)
            .filter(|s| *s <= upto)
            .collect()
    };
    let mut through = None;
    for stage in BraakStage::ALL {
        if rank(a, stage) == rank(b, stage)
            && a.time_of(stage).is_some()
            && b.time_of(stage).is_some()
        {
            through = Some(stage);
        } else {
            break;
        }
    }
    through
}

pub fn compare_outcomes(mesh: &RunOutcome, graph: &RunOutcome, c_crit: f64) -> Result<Comparison> {
    let left: BTreeSet<RegionId> = mesh.region_curves.keys().copied().collect();
    let right: BTreeSet<RegionId> = graph.region_curves.keys().copied().collect();
    if left != right {
        return Err(fkneuro_core::Error::VocabularyMismatch {
            only_left: left.difference(&right).copied().collect(),
            only_right: right.difference(&left).copied().collect(),
        }
        .into());
    }
    let grid = common_grid(mesh.times(), graph.times());
    let mut rows = Vec::new();
    let mut push = |column: String, a: &[f64], b: &[f64]| {
        let ia: Vec<f64> = grid
            .iter()
            .map(|t| interpolate(mesh.times(), a, *t))
            .collect();
        let ib: Vec<f64> = grid
            .iter()
            .map(|t| interpolate(graph.times(), b, *t))
            .collect();
        let dev = ia
            .iter()
            .zip(&ib)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max);
        rows.push(CompareRow {
            column,
            max_abs_deviation: dev,
            activation_mesh: crossing_time(&grid, &ia, c_crit),
            activation_graph: crossing_time(&grid, &ib, c_crit),
        });
    };
    for (id, a) in &mesh.region_curves {
        push(format!("region_{id}"), a, &graph.region_curves[id]);
    }
    if let (Some(sa), Some(sb)) = (&mesh.stage_curves, &graph.stage_curves) {
        for (stage, a) in sa {
            push(format!("braak_{}", stage.roman()), a, &sb[stage]);
        }
    }
    push("global".into(), &mesh.global, &graph.global);
    let order_agreement_through = match (&mesh.stage_curves, &graph.stage_curves) {
        (Some(sa), Some(sb)) => {
            let resample = |times: &[f64], curves: &BTreeMap<BraakStage, Vec<f64>>| {
                curves
                    .iter()
                    .map(|(s, c)| (*s, grid.iter().map(|t| interpolate(times, c, *t)).collect()))
                    .collect::<BTreeMap<_, Vec<f64>>>()
            };
            let oa = braak_activation_order(&grid, &resample(mesh.times(), sa), c_crit)?;
            let ob = braak_activation_order(&grid, &resample(graph.times(), sb), c_crit)?;
            stage_agreement(&oa, &ob)
        }
        _ => None,
    };
    Ok(Comparison {
        grid,
        rows,
        order_agreement_through,
    })
}

pub fn comparison_csv(c: &Comparison) -> String {
    let mut s = String::from(
        "column,max_abs_deviation,activation_mesh,activation_graph,graph_lead_years\n",
    );
    for r in &c.rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{}",
            r.column,
            fmt_f(r.max_abs_deviation),
            fmt_opt(r.activation_mesh),
            fmt_opt(r.activation_graph),
            fmt_opt(r.graph_lead())
        );
    }
    s
}

/// Runs both configurations and writes `comparison.csv` into the mesh run's output directory.
pub fn compare(mesh_cfg: &SimulationConfig, graph_cfg: &SimulationConfig) -> Result<Comparison> {
    if mesh_cfg.domain != DomainKind::Mesh || graph_cfg.domain != DomainKind::Graph {
        bail!("compare expects a mesh configuration and a graph configuration");
    }
    mesh_cfg.validate()?;
    graph_cfg.validate()?;
    let md = load_domain(mesh_cfg)?;
    let gd = load_domain(graph_cfg)?;
    let (ml, gl) = (md.as_domain().region_ids(), gd.as_domain().region_ids());
    if ml != gl {
        let (a, b): (BTreeSet<_>, BTreeSet<_>) =
            (ml.into_iter().collect(), gl.into_iter().collect());
        return Err(fkneuro_core::Error::VocabularyMismatch {
            only_left: a.difference(&b).copied().collect(),
            only_right: b.difference(&a).copied().collect(),
        }
        .into());
    }
    let ma = load_atlas(mesh_cfg, &md)?;
    let ga = load_atlas(graph_cfg, &gd)?;
    let mo = in_pool(mesh_cfg, || simulate(mesh_cfg, &md, ma.as_ref()))??;
    let go = simulate(graph_cfg, &gd, ga.as_ref())?;
    let cmp = compare_outcomes(&mo, &go, mesh_cfg.c_crit)?;
    fs::create_dir_all(&mesh_cfg.output)?;
    write(&mesh_cfg.output, "comparison.csv", &comparison_csv(&cmp))?;
    Ok(cmp)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interpolation_and_grid() {
        let t = [0.0, 1.0, 2.0];
        assert_eq!(interpolate(&t, &[0.0, 2.0, 4.0], 1.5), 3.0);
        assert_eq!(interpolate(&t, &[0.0, 2.0, 4.0], 5.0), 4.0);
        assert_eq!(
            common_grid(&[0.0, 0.5, 1.0, 1.5], &[0.0, 1.0]),
            vec![0.0, 1.0]
        );
    }

    #[test]
    fn curve_file_round_trip() {
        let times = vec![0.0, 0.5];
        let curves: BTreeMap<_, _> = BraakStage::ALL
            .iter()
            .map(|s| (*s, vec![0.1, 0.2]))
            .collect();
        let (t, c) = parse_braak_curves(&braak_curves_csv(&times, &curves)).unwrap();
        assert_eq!(t, times);
        assert_eq!(c, curves);
    }
}
