use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use fkneuro_cli::config::{Protein, SimulationConfig};
use fkneuro_cli::experiment;
use fkneuro_core::geometry::{
    generate_structured_mesh, stage_of_name, write_mesh, BraakStage, Connectome, Labeling,
};
use fkneuro_core::staging::{
    braak_activation_order, classify_phase, map_suvr_abeta, map_suvr_tau, mapping_report_csv,
    parse_clinical_csv, reconstruct_macrostages, stage_means_by_region, staging_report_csv, Phase,
    SuvrMapParams,
};

#[derive(Parser)]
#[command(
    name = "fkneuro",
    version,
    about = "Fisher-Kolmogorov protein spreading on meshes and connectomes"
)]
struct Cli {
    /// Print the default configuration and exit.
    #[arg(long, global = true)]
    show_defaults: bool,

    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand)]
enum Command {
    /// Run one simulation and write trajectory, staging and warning CSVs.
    Simulate(RunArgs),
    /// Run one simulation per alpha and write `alpha,t_half,t_saturation`.
    Sweep(RunArgs),
    /// Braak staging of a `t,II,...,VI` curve file.
    Stage(StageArgs),
    /// Map PET SUVR values to normalized concentrations.
    MapSuvr(MapArgs),
    /// Run a mesh and a graph configuration and compare their region curves.
    Compare(CompareArgs),
    /// Write a structured simplicial mesh of a square or cube.
    GenMesh(GenMeshArgs),
    /// Write a chain connectome with optional shortcut edges.
    GenGraph(GenGraphArgs),
}

#[derive(Args, Default)]
struct RunArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Any configuration key, as `key=value`; applied last.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    sets: Vec<String>,
    #[arg(long)]
    domain: Option<String>,
    #[arg(long)]
    mesh: Option<String>,
    #[arg(long)]
    graph: Option<String>,
    #[arg(long)]
    atlas: Option<String>,
    #[arg(long)]
    alpha: Option<String>,
    #[arg(long)]
    dt: Option<String>,
    #[arg(long = "T", value_name = "YEARS")]
    t_final: Option<String>,
    #[arg(long)]
    ell: Option<String>,
    #[arg(long)]
    eta0: Option<String>,
    #[arg(long)]
    d_ext: Option<String>,
    #[arg(long)]
    d_axn: Option<String>,
    #[arg(long)]
    seed_regions: Option<String>,
    #[arg(long)]
    seed_value: Option<String>,
    #[arg(long)]
    solver_tol: Option<String>,
    #[arg(long)]
    solver_maxit_factor: Option<String>,
    #[arg(long)]
    linear_solver: Option<String>,
    #[arg(long)]
    scheme: Option<String>,
    #[arg(long)]
    c_crit: Option<String>,
    #[arg(long)]
    k: Option<String>,
    /// Use the reaction sign of the printed graph scheme.
    #[arg(long)]
    paper_literal_rhs: bool,
    #[arg(long)]
    protein: Option<String>,
    /// Comma-separated list, or `abeta` / `tau` for the published lists.
    #[arg(long)]
    alphas: Option<String>,
    #[arg(long)]
    output: Option<String>,
    #[arg(long)]
    workers: Option<String>,
    #[arg(long)]
    dump_state: bool,
    #[arg(long)]
    node_output: bool,
}

impl RunArgs {
    fn config(&self) -> Result<SimulationConfig> {
        let mut cfg = match &self.config {
            Some(p) => SimulationConfig::load(p)?,
            None => SimulationConfig::default(),
        };
        let flags: [(&str, &Option<String>); 23] = [
            ("domain", &self.domain),
            ("mesh", &self.mesh),
            ("graph", &self.graph),
            ("atlas", &self.atlas),
            ("alpha", &self.alpha),
            ("dt", &self.dt),
            ("T", &self.t_final),
            ("ell", &self.ell),
            ("eta0", &self.eta0),
            ("d_ext", &self.d_ext),
            ("d_axn", &self.d_axn),
            ("seed_regions", &self.seed_regions),
            ("seed_value", &self.seed_value),
            ("solver_tol", &self.solver_tol),
            ("solver_maxit_factor", &self.solver_maxit_factor),
            ("linear_solver", &self.linear_solver),
            ("scheme", &self.scheme),
            ("c_crit", &self.c_crit),
            ("k", &self.k),
            ("protein", &self.protein),
            ("alphas", &self.alphas),
            ("output", &self.output),
            ("workers", &self.workers),
        ];
        for (key, value) in flags {
            if let Some(v) = value {
                cfg.set(key, v)
                    .with_context(|| format!("--{}", key.replace('_', "-")))?;
            }
        }
        if self.paper_literal_rhs {
            cfg.paper_literal_rhs = true;
        }
        if self.dump_state {
            cfg.dump_state = true;
        }
        if self.node_output {
            cfg.node_output = true;
        }
        for s in &self.sets {
            let (k, v) = s
                .split_once('=')
                .with_context(|| format!("--set `{s}`: expected KEY=VALUE"))?;
            cfg.set(k, v)?;
        }
        Ok(cfg)
    }
}

#[derive(Args)]
struct StageArgs {
    /// `t,II,III,IV,V,VI` curve file (as written by `simulate`).
    #[arg(long)]
    curves: PathBuf,
    #[arg(long, default_value_t = 0.5)]
    c_crit: f64,
    /// Output CSV; stdout when absent.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct MapArgs {
    #[arg(long, default_value = "abeta")]
    protein: String,
    /// SUVR values to map.
    #[arg(long = "s", value_delimiter = ',')]
    values: Vec<f64>,
    /// Phase applied to `--s` values for tau.
    #[arg(long, default_value = "active")]
    phase: String,
    /// Clinical CSV `protein,braak_stage,region,mean_suvr,sd_suvr`.
    #[arg(long)]
    clinical: Option<PathBuf>,
    /// Abnormality threshold used for regions without their own.
    #[arg(long)]
    threshold: Option<f64>,
    /// Per-region threshold, `region=value`.
    #[arg(long = "region-threshold")]
    region_thresholds: Vec<String>,
    #[arg(long)]
    theta_low: Option<f64>,
    #[arg(long)]
    theta_high: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct CompareArgs {
    #[arg(long)]
    mesh_config: PathBuf,
    #[arg(long)]
    graph_config: PathBuf,
    /// Output directory; defaults to the mesh configuration's.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct GenMeshArgs {
    #[arg(long, default_value_t = 2)]
    dim: usize,
    /// Cells per axis.
    #[arg(long, default_value_t = 8)]
    n: usize,
    /// Side length, mm.
    #[arg(long, default_value_t = 1.0)]
    extent: f64,
    /// Number of ordered slabs; 1 gives a single region.
    #[arg(long, default_value_t = 5)]
    slabs: u32,
    #[arg(long, default_value_t = 0)]
    axis: usize,
    #[arg(long, default_value_t = 1)]
    first_id: u32,
    #[arg(long, value_delimiter = ',', default_value = "1,0,0")]
    axon: Vec<f64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct GenGraphArgs {
    #[arg(long, default_value_t = 5)]
    nodes: usize,
    /// Node spacing and tract length, mm.
    #[arg(long, default_value_t = 1.0)]
    spacing: f64,
    #[arg(long, default_value_t = 1.0)]
    volume: f64,
    #[arg(long, default_value_t = 1.0)]
    tracts: f64,
    #[arg(long, default_value_t = 1)]
    first_id: u32,
    /// Extra edge between 0-based node indices, `i:j`.
    #[arg(long = "shortcut")]
    shortcuts: Vec<String>,
    #[arg(long, default_value_t = 1.0)]
    k: f64,
    #[arg(long)]
    out: PathBuf,
}

fn emit(output: Option<&Path>, body: &str) -> Result<()> {
    match output {
        Some(p) => fs::write(p, body).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{body}");
            Ok(())
        }
    }
}

fn simulate(args: &RunArgs) -> Result<()> {
    let cfg = args.config()?;
    let out = experiment::run(&cfg)?;
    let last = out.global.last().copied().unwrap_or(f64::NAN);
    println!(
        "{}: {} steps, final global mean {:.6}, output in {}",
        out.scheme,
        out.simulation.trajectory.steps(),
        last,
        cfg.output.display()
    );
    if let Some(order) = &out.order {
        let seq: Vec<String> = order
            .order
            .iter()
            .map(|(s, _)| s.roman().to_string())
            .collect();
        println!(
            "Braak activation order ({}): {}",
            order.verdict.as_str(),
            seq.join(" < ")
        );
    }
    if !out.warnings.is_empty() {
        log::warn!("{} warning rows in warnings.csv", out.warnings.len());
    }
    Ok(())
}

fn sweep(args: &RunArgs) -> Result<()> {
    let cfg = args.config()?;
    let rows = experiment::sweep(&cfg)?;
    print!("{}", experiment::sweep_csv(&rows));
    Ok(())
}

fn stage(args: &StageArgs) -> Result<()> {
    let text = fs::read_to_string(&args.curves)
        .with_context(|| format!("reading {}", args.curves.display()))?;
    let (times, curves) = experiment::parse_braak_curves(&text)?;
    let order = braak_activation_order(&times, &curves, args.c_crit)?;
    let timeline = reconstruct_macrostages(&times, &curves, args.c_crit)?;
    for w in &timeline.warnings {
        log::warn!("{w}");
    }
    eprintln!(
        "macrostages: 0-II until {:.4}, III-IV until {:.4}, V-VI to {:.4} (order {})",
        timeline.t1,
        timeline.t2,
        timeline.t_final,
        order.verdict.as_str()
    );
    emit(args.output.as_deref(), &staging_report_csv(&order))
}

fn map_suvr(args: &MapArgs) -> Result<()> {
    let protein = Protein::parse(&args.protein)?;
    let mut p = match protein {
        Protein::Abeta => SuvrMapParams::abeta(),
        Protein::Tau => SuvrMapParams::tau(),
    };
    if let Some(v) = args.theta_low {
        p.theta_low = v;
    }
    if let Some(v) = args.theta_high {
        p.theta_high = v;
    }
    if let Some(v) = args.gamma {
        p.gamma = v;
    }
    if let Some(v) = args.epsilon {
        p.epsilon = v;
    }
    for rt in &args.region_thresholds {
        let (name, v) = rt
            .split_once('=')
            .with_context(|| format!("`{rt}`: expected region=value"))?;
        p.thresholds.insert(
            name.trim().to_string(),
            v.trim().parse().with_context(|| format!("`{rt}`"))?,
        );
    }
    p.validate()?;
    let mut rows: Vec<(f64, Option<Phase>, f64)> = Vec::new();
    let fixed_phase =
        Phase::parse(&args.phase).with_context(|| format!("unknown phase `{}`", args.phase))?;
    for &s in &args.values {
        rows.push(match protein {
            Protein::Abeta => (s, None, map_suvr_abeta(s, &p)),
            Protein::Tau => (s, Some(fixed_phase), map_suvr_tau(s, fixed_phase, &p)),
        });
    }
    if let Some(path) = &args.clinical {
        let text =
            fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let clinical = parse_clinical_csv(&text, path)?;
        let by_region: BTreeMap<String, Vec<(BraakStage, f64)>> =
            stage_means_by_region(&clinical, protein.as_str());
        if by_region.is_empty() {
            bail!("{} has no `{}` rows", path.display(), protein.as_str());
        }
        for (region, means) in by_region {
            match protein {
                Protein::Abeta => rows.extend(
                    means
                        .iter()
                        .map(|(_, s)| (*s, None, map_suvr_abeta(*s, &p))),
                ),
                Protein::Tau => {
                    let threshold = p
                        .thresholds
                        .get(&region)
                        .copied()
                        .or(args.threshold)
                        .with_context(|| {
                            format!("no abnormality threshold for region `{region}`")
                        })?;
                    let early = stage_of_name(&region) == Some(BraakStage::II);
                    let row = classify_phase(&means, threshold, early, &p)?;
                    if row.never_crossed {
                        log::warn!("region `{region}` never crosses its threshold {threshold}");
                    }
                    for ((_, s), (_, phase)) in means.iter().zip(&row.phases) {
                        rows.push((*s, Some(*phase), map_suvr_tau(*s, *phase, &p)));
                    }
                }
            }
        }
    }
    if rows.is_empty() {
        bail!("nothing to map: pass --s values or --clinical");
    }
    emit(args.output.as_deref(), &mapping_report_csv(&rows))
}

fn compare(args: &CompareArgs) -> Result<()> {
    let mut mesh = SimulationConfig::load(&args.mesh_config)?;
    let graph = SimulationConfig::load(&args.graph_config)?;
    if let Some(o) = &args.output {
        mesh.output = o.clone();
    }
    let cmp = experiment::compare(&mesh, &graph)?;
    print!("{}", experiment::comparison_csv(&cmp));
    match cmp.order_agreement_through {
        Some(s) => println!("stage ordering agrees through Braak {s}"),
        None => println!("stage ordering disagrees from Braak II"),
    }
    Ok(())
}

fn gen_mesh(args: &GenMeshArgs) -> Result<()> {
    if args.axon.len() != 3 {
        bail!("--axon needs three components");
    }
    let labeling = if args.slabs <= 1 {
        Labeling::Uniform(args.first_id)
    } else {
        Labeling::Slabs {
            axis: args.axis,
            count: args.slabs,
            first_id: args.first_id,
        }
    };
    let axon = [args.axon[0], args.axon[1], args.axon[2]];
    let mesh = generate_structured_mesh(args.dim, args.n, args.extent, &labeling, axon)?;
    fs::write(&args.out, write_mesh(&mesh))
        .with_context(|| format!("writing {}", args.out.display()))?;
    println!(
        "{} elements, {} internal faces",
        mesh.elements().len(),
        mesh.internal_faces().len()
    );
    Ok(())
}

fn gen_graph(args: &GenGraphArgs) -> Result<()> {
    let shortcuts = args
        .shortcuts
        .iter()
        .map(|s| {
            let (i, j) = s
                .split_once(':')
                .with_context(|| format!("`{s}`: expected i:j"))?;
            Ok((i.trim().parse()?, j.trim().parse()?))
        })
        .collect::<Result<Vec<(usize, usize)>>>()?;
    let conn = Connectome::chain(
        args.nodes,
        args.spacing,
        args.volume,
        args.tracts,
        args.first_id,
        &shortcuts,
        args.k,
    )?;
    fs::write(&args.out, conn.to_csv())
        .with_context(|| format!("writing {}", args.out.display()))?;
    println!("{} nodes, {} edges", conn.len(), conn.edges().len());
    Ok(())
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if cli.show_defaults {
        print!("{}", SimulationConfig::default().serialize());
        return;
    }
    let result = match &cli.command {
        Some(Command::Simulate(a)) => simulate(a),
        Some(Command::Sweep(a)) => sweep(a),
        Some(Command::Stage(a)) => stage(a),
        Some(Command::MapSuvr(a)) => map_suvr(a),
        Some(Command::Compare(a)) => compare(a),
        Some(Command::GenMesh(a)) => gen_mesh(a),
        Some(Command::GenGraph(a)) => gen_graph(a),
        None => {
            eprintln!("no subcommand; see `fkneuro --help`");
            std::process::exit(2);
        }
    };
    if let Err(e) = result {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
