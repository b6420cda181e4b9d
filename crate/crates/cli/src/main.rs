use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;
mod output;

use output::{resolve_tolerance, to_json, write_text, Failure, RunManifest};

#[derive(Parser, Debug)]
#[command(name = "mtl", version, about = "Minitwistor surfaces, nodal curves and Einstein-Weyl checks")]
struct Cli {
    /// Validator tolerance; overrides MTL_TOL.
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Write a run manifest to this path.
    #[arg(long, global = true)]
    manifest: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a point configuration.
    Config(ConfigArgs),
    /// Lattice report for a divisor class.
    Lattice(LatticeArgs),
    /// Solve for a member of W through a configuration.
    Solve(SolveArgs),
    /// Conformal metric and null-cone diagnostics of a member.
    Metric(MetricArgs),
    /// Trace a subvariety of W.
    Trace(TraceArgs),
    /// Fit the Einstein-Weyl structure on a chart and report residuals.
    EwCheck(EwArgs),
    /// Build a real member and trace real geodesics.
    Real(RealArgs),
    /// Render a trace as SVG.
    Render(RenderArgs),
}

#[derive(Args, Debug)]
pub struct ConfigArgs {
    #[arg(long)]
    pub m: usize,
    #[arg(long, default_value_t = 1)]
    pub k: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct LatticeArgs {
    /// Class written `k,l:m1,...,mn`.
    #[arg(long)]
    pub class: String,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct SolveArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Smooth away from the split curve with this point omitted, instead of
    /// picking the best-conditioned member.
    #[arg(long)]
    pub omit: Option<usize>,
    #[arg(long, default_value_t = 1e-2)]
    pub step: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct MetricArgs {
    #[arg(long)]
    pub curve: PathBuf,
    /// Parameters sampled for the null-cone check.
    #[arg(long, default_value_t = 8)]
    pub samples: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum TraceMode {
    Geodesic,
    Nullsurf,
    Nodal,
    Nullgeo,
}

#[derive(Args, Debug)]
pub struct TraceArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub curve: PathBuf,
    #[arg(long, value_enum)]
    pub mode: TraceMode,
    /// Point `u,v` with coordinates `re`, `re:im` or `inf`.
    #[arg(long, allow_hyphen_values = true)]
    pub p: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub q: Option<String>,
    /// Take p as the image of this parameter (`re` or `re:im`).
    #[arg(long, allow_hyphen_values = true)]
    pub zp: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub zq: Option<String>,
    #[arg(long, default_value_t = 50)]
    pub steps: usize,
    #[arg(long, default_value_t = 0.02)]
    pub h: f64,
    /// Grid size of a null-surface patch.
    #[arg(long, default_value_t = 5)]
    pub grid: usize,
    /// Trace every branch of W_{p,q} through the member.
    #[arg(long)]
    pub all_branches: bool,
    #[arg(long)]
    pub jobs: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub svg: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct EwArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub curve: PathBuf,
    #[arg(long, default_value_t = 3)]
    pub levels: usize,
    #[arg(long, default_value_t = 0.05)]
    pub radius: f64,
    #[arg(long, default_value_t = 500)]
    pub samples: usize,
    #[arg(long, default_value_t = 30)]
    pub geodesics: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub jobs: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Residual table, one row per refinement level.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct RealArgs {
    #[arg(long, default_value_t = 2)]
    pub m: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 20)]
    pub steps: usize,
    /// Real geodesics through generic points, besides the one through a node.
    #[arg(long, default_value_t = 2)]
    pub geodesics: usize,
    /// Also fit the Einstein-Weyl structure on the real slice.
    #[arg(long)]
    pub ew: bool,
    #[arg(long)]
    pub jobs: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Per-state table of the real geodesic traces.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct RenderArgs {
    /// Trace JSON as written by `trace`.
    #[arg(long)]
    pub trace: PathBuf,
    /// Which trace to draw when the file holds several.
    #[arg(long, default_value_t = 0)]
    pub index: usize,
    #[arg(long, default_value_t = 4.0)]
    pub radius: f64,
    #[arg(long, default_value_t = 0)]
    pub u_chart: usize,
    #[arg(long, default_value_t = 0)]
    pub v_chart: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// What a subcommand reports back for the summary line and the manifest.
pub struct Outcome {
    pub summary: String,
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
    pub seed: Option<u64>,
}

fn name(cmd: &Command) -> &'static str {
    match cmd {
        Command::Config(_) => "config",
        Command::Lattice(_) => "lattice",
        Command::Solve(_) => "solve",
        Command::Metric(_) => "metric",
        Command::Trace(_) => "trace",
        Command::EwCheck(_) => "ew-check",
        Command::Real(_) => "real",
        Command::Render(_) => "render",
    }
}

fn set_jobs(jobs: Option<usize>) -> Result<(), Failure> {
    if let Some(n) = jobs {
        if n == 0 {
            return Err(Failure::Usage("--jobs must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| Failure::Usage(e.to_string()))?;
    }
    Ok(())
}

fn dispatch(cmd: &Command, tol: f64) -> Result<Outcome, Failure> {
    match cmd {
        Command::Config(a) => commands::config(a),
        Command::Lattice(a) => commands::lattice(a),
        Command::Solve(a) => commands::solve(a, tol),
        Command::Metric(a) => commands::metric(a, tol),
        Command::Trace(a) => {
            set_jobs(a.jobs)?;
            commands::trace(a, tol)
        }
        Command::EwCheck(a) => {
            set_jobs(a.jobs)?;
            commands::ew_check(a)
        }
        Command::Real(a) => {
            set_jobs(a.jobs)?;
            commands::real(a, tol)
        }
        Command::Render(a) => commands::render(a),
    }
}

fn main() {
    let cli = Cli::parse();
    let sub = name(&cli.command);
    let start = Instant::now();
    let result = resolve_tolerance(cli.tol).and_then(|(tol, source)| dispatch(&cli.command, tol).map(|o| (o, tol, source)));
    let (code, status, outcome, tol, source) = match result {
        Ok((o, tol, source)) => {
            eprintln!("mtl {sub}: {}", o.summary);
            (0, "ok".to_string(), Some(o), tol, source)
        }
        Err(f) => {
            let diag = f.diagnostic(sub);
            println!("{}", serde_json::to_string_pretty(&diag).expect("diagnostic JSON"));
            let label = diag["status"].as_str().unwrap_or("failure").to_string();
            eprintln!("mtl {sub}: {label}");
            let (tol, source) = resolve_tolerance(cli.tol).unwrap_or((output::DEFAULT_TOL, "default".into()));
            (f.exit_code(), label, None, tol, source)
        }
    };
    if let Some(path) = &cli.manifest {
        let manifest = RunManifest {
            subcommand: sub.into(),
            args: std::env::args().skip(1).collect(),
            inputs: outcome.as_ref().map(|o| o.inputs.clone()).unwrap_or_default(),
            seed: outcome.as_ref().and_then(|o| o.seed),
            tolerance: tol,
            tolerance_source: source,
            outputs: outcome.as_ref().map(|o| o.outputs.clone()).unwrap_or_default(),
            tool_version: env!("CARGO_PKG_VERSION").into(),
            status,
            timing_ms: start.elapsed().as_secs_f64() * 1e3,
        };
        if let Err(f) = to_json(&manifest).and_then(|t| write_text(path, &t)) {
            eprintln!("mtl {sub}: {:?}", f);
            std::process::exit(2);
        }
    }
    std::process::exit(code);
}
