use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use rwrp_core::experiments::config::{GeometryConfig, OutputConfig, PotentialConfig, TargetName, TiltSourceName};
use rwrp_core::experiments::{emit_outputs, run, selftest, ExperimentBlock, ExperimentConfig, ExperimentKind, SCHEMA_VERSION};
use rwrp_core::transfer::DEFAULT_PRUNE;
use rwrp_core::Error;

#[derive(Parser)]
#[command(name = "rwrp", version, about = "Free energies, rate functions and variational formulas of random walks in random potentials")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Step set geometry
    Geometry {
        #[command(subcommand)]
        action: GeometryAction,
    },
    /// Free energy series of the point-to-line or point-to-point partition function
    Dp(Overrides),
    /// Legendre rate table cross-checked against point-to-point free energies
    Duality(Overrides),
    /// Rate function table with sanity checks
    Rate(Overrides),
    /// Weak disorder check against the annealed free energy
    L2(Overrides),
    /// Variational formula on a periodic model
    Entropy(Overrides),
    /// Tail frequencies of the free energy over sampled environments
    Concentration(Overrides),
    /// Point-to-point free energy over a velocity grid
    Continuity(Overrides),
    /// Run the experiment kind named in the config
    Run(Overrides),
    /// Quick built-in consistency checks
    Selftest,
}

#[derive(Subcommand)]
enum GeometryAction {
    /// Hull, faces and directedness as JSON
    Describe(Overrides),
}

/// Every flag overrides the matching config key.
#[derive(Args, Default)]
struct Overrides {
    /// TOML experiment config
    #[arg(short, long)]
    config: Option<PathBuf>,
    #[arg(long)]
    dim: Option<usize>,
    /// Steps as `z;z;...` with comma separated coordinates, e.g. `0,1;1,1`
    #[arg(long, allow_hyphen_values = true)]
    steps: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, allow_hyphen_values = true)]
    beta: Option<f64>,
    #[arg(long)]
    memory_ell: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    n_schedule: Option<Vec<usize>>,
    /// `line` or `point`
    #[arg(long)]
    target: Option<String>,
    /// Velocity, comma separated; `1/2` style fractions are exact
    #[arg(long, allow_hyphen_values = true)]
    zeta: Option<String>,
    /// Several velocities separated by `;`
    #[arg(long, allow_hyphen_values = true, value_delimiter = ';')]
    zetas: Option<Vec<String>>,
    /// Representation coefficients, one per step
    #[arg(long, value_delimiter = ',')]
    representation: Option<Vec<String>>,
    #[arg(long)]
    tilt_radius: Option<f64>,
    #[arg(long)]
    tilt_step: Option<f64>,
    /// `perron` or `estimate`
    #[arg(long)]
    tilt_source: Option<String>,
    #[arg(long)]
    zeta_grid: Option<usize>,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    w_samples: Option<usize>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    gap: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    truncation: Option<f64>,
    #[arg(long)]
    tolerance: Option<f64>,
    /// Drop DP states this many nats below the layer maximum (default 60 decades)
    #[arg(long, num_args = 0..=1, default_missing_value = "default")]
    prune: Option<String>,
    /// Maximum stored DP cells per layer
    #[arg(long)]
    budget: Option<f64>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    #[arg(long)]
    prefix: Option<String>,
    /// Add wall-clock time to the JSON summary (breaks byte reproducibility)
    #[arg(long)]
    timing: bool,
}

fn parse_steps(s: &str) -> Result<Vec<Vec<i64>>, Error> {
    s.split(';')
        .filter(|z| !z.trim().is_empty())
        .map(|z| {
            z.split(',')
                .map(|c| c.trim().parse::<i64>().map_err(|e| Error::Config(format!("bad step '{z}': {e}"))))
                .collect()
        })
        .collect()
}

impl Overrides {
    fn build(&self, kind: Option<ExperimentKind>) -> Result<ExperimentConfig, Error> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => {
                let kind = kind.ok_or_else(|| Error::Config("`run` needs --config".into()))?;
                if self.steps.is_none() {
                    return Err(Error::Config("give --config or --steps".into()));
                }
                ExperimentConfig {
                    schema_version: SCHEMA_VERSION,
                    seed: 0,
                    geometry: GeometryConfig { dim: 0, steps: Vec::new(), weights: None },
                    environment: Default::default(),
                    potential: PotentialConfig::default(),
                    experiment: ExperimentBlock::new(kind),
                    output: OutputConfig::default(),
                }
            }
        };
        if let Some(kind) = kind {
            cfg.experiment.kind = kind;
        }
        if let Some(s) = &self.steps {
            cfg.geometry.steps = parse_steps(s)?;
            cfg.geometry.weights = None;
            cfg.geometry.dim = cfg.geometry.steps.first().map_or(0, Vec::len);
        }
        if let Some(d) = self.dim {
            cfg.geometry.dim = d;
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(b) = self.beta {
            cfg.potential.beta = b;
        }
        if let Some(l) = self.memory_ell {
            cfg.potential.memory_ell = l;
        }
        let e = &mut cfg.experiment;
        macro_rules! set {
            ($($field:ident),*) => {$(
                if let Some(v) = &self.$field {
                    e.$field = Some(v.clone());
                }
            )*};
        }
        set!(n_schedule, zeta, zetas, representation, tilt_radius, tilt_step, zeta_grid, samples, n, w_samples);
        set!(epsilon, gap, truncation, tolerance, budget);
        if let Some(t) = &self.target {
            e.target = Some(match t.as_str() {
                "line" => TargetName::Line,
                "point" => TargetName::Point,
                _ => return Err(Error::Config(format!("unknown target '{t}'"))),
            });
        }
        if let Some(t) = &self.tilt_source {
            e.tilt_source = Some(match t.as_str() {
                "perron" => TiltSourceName::Perron,
                "estimate" => TiltSourceName::Estimate,
                _ => return Err(Error::Config(format!("unknown tilt source '{t}'"))),
            });
        }
        if let Some(p) = &self.prune {
            e.prune = Some(if p == "default" {
                DEFAULT_PRUNE
            } else {
                p.parse().map_err(|_| Error::Config(format!("bad --prune value '{p}'")))?
            });
        }
        if let Some(d) = &self.out_dir {
            cfg.output.dir = d.clone();
        }
        if let Some(p) = &self.prefix {
            cfg.output.prefix = Some(p.clone());
        }
        Ok(cfg)
    }
}

/// 3 for budget and infeasibility failures, 1 for everything else.
fn exit_code(e: &Error) -> u8 {
    match e {
        Error::BudgetExceeded { .. } | Error::GuardExceeded { .. } | Error::Infeasible(_) | Error::NotConverged { .. } => 3,
        _ => 1,
    }
}

fn execute(over: &Overrides, kind: Option<ExperimentKind>) -> Result<u8, Error> {
    let cfg = over.build(kind)?;
    let resolved = cfg.resolved()?;
    let start = Instant::now();
    let out = run(&resolved)?;
    let wall_ms = over.timing.then(|| start.elapsed().as_millis() as u64);
    for path in emit_outputs(&out, &resolved, wall_ms)? {
        println!("wrote {}", path.display());
    }
    for c in &out.checks {
        let verdict = if c.passed { "pass" } else { "FAIL" };
        println!("check {}: {verdict} (value {:e}, threshold {:e})", c.name, c.value, c.threshold);
    }
    Ok(if out.passed() { 0 } else { 2 })
}

fn describe(over: &Overrides) -> Result<u8, Error> {
    let cfg = over.build(Some(ExperimentKind::Geometry))?;
    println!("{}", serde_json::to_string_pretty(&cfg.geometry()?.describe())?);
    if over.out_dir.is_some() {
        execute(over, Some(ExperimentKind::Geometry))?;
    }
    Ok(0)
}

fn run_selftest() -> u8 {
    let checks = selftest();
    for c in &checks {
        let verdict = if c.passed { "pass" } else { "FAIL" };
        println!("{verdict} {} ({:e} <= {:e})", c.name, c.value, c.threshold);
    }
    if checks.iter().all(|c| c.passed) {
        0
    } else {
        2
    }
}

fn init_threads() {
    let Ok(v) = std::env::var("RWRP_THREADS") else { return };
    match v.parse::<usize>() {
        Ok(n) if n > 0 => {
            if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
                log::warn!("RWRP_THREADS ignored: {e}");
            }
        }
        _ => log::warn!("RWRP_THREADS must be a positive integer, got '{v}'"),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    init_threads();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Geometry { action: GeometryAction::Describe(o) } => describe(o),
        Command::Dp(o) => execute(o, Some(ExperimentKind::Dp)),
        Command::Duality(o) => execute(o, Some(ExperimentKind::Duality)),
        Command::Rate(o) => execute(o, Some(ExperimentKind::Rate)),
        Command::L2(o) => execute(o, Some(ExperimentKind::L2)),
        Command::Entropy(o) => execute(o, Some(ExperimentKind::Entropy)),
        Command::Concentration(o) => execute(o, Some(ExperimentKind::Concentration)),
        Command::Continuity(o) => execute(o, Some(ExperimentKind::Continuity)),
        Command::Run(o) => execute(o, None),
        Command::Selftest => Ok(run_selftest()),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
