use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use rayon::prelude::*;
use serde_json::{json, Value};

use delayflock::config::RunConfig;
use delayflock::diagnostics::{
    diagnostics_table, fit_decay_rate, fit_decay_rate_all, flocking_condition, DiagnosticsRow,
};
use delayflock::kernels::{halanay_oracle, halanay_rate};
use delayflock::meanfield::{
    mean_field_experiment, stability_experiment, write_stability_csv, Perturbation,
};
use delayflock::particle::simulate;
use delayflock::Error;

/// Tolerance of the Halanay oracle check.
const ORACLE_SLACK: f64 = 1e-3;

#[derive(Parser)]
#[command(
    name = "delayflock",
    version,
    about = "Cucker-Smale flocking with distributed time delay"
)]
struct Cli {
    /// JSON run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (DELAYFLOCK_OUT takes precedence).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Overrides the seed in the config file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for parallel sweeps.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate the particle system; writes trajectory, diagnostics, report and manifest.
    Simulate,
    /// Evaluate the flocking condition on the initial history (exit 1 if it fails).
    Check,
    /// Mean-field Cauchy experiment over nested samples.
    Meanfield {
        /// Comma-separated nondecreasing agent counts.
        #[arg(long = "N", value_delimiter = ',', required = true)]
        n: Vec<usize>,
        /// Horizon T (defaults to the config's t_end).
        #[arg(long)]
        horizon: Option<f64>,
    },
    /// W1 stability of the empirical solution under perturbed initial data.
    Stability {
        /// Perturbation as JSON, e.g. {"kind":"translate","shift":[0.1,0]}.
        #[arg(long, conflicts_with = "epsilon")]
        perturbation: Option<String>,
        /// Magnitude of random velocity perturbations.
        #[arg(long)]
        epsilon: Option<f64>,
        /// Number of random perturbations.
        #[arg(long, default_value_t = 1)]
        trials: u64,
        #[arg(long)]
        horizon: Option<f64>,
    },
    /// Halanay decay rate for u' <= a sup u - u over a window tau0.
    Halanay {
        #[arg(long = "a", allow_negative_numbers = true)]
        a: f64,
        #[arg(long, allow_negative_numbers = true)]
        tau0: f64,
        /// Also integrate the scalar delayed inequality and check the bound.
        #[arg(long)]
        oracle: bool,
    },
    /// Fit the exponential decay rate of d_V from a diagnostics CSV.
    DecayRate {
        /// Defaults to <out>/diagnostics.csv.
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long, allow_negative_numbers = true)]
        from: Option<f64>,
        #[arg(long, allow_negative_numbers = true)]
        to: Option<f64>,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Check => "check",
            Command::Meanfield { .. } => "meanfield",
            Command::Stability { .. } => "stability",
            Command::Halanay { .. } => "halanay",
            Command::DecayRate { .. } => "decay-rate",
        }
    }
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Failure {
            code: 2,
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::NonFinite { .. } | Error::WeightUnderflow { .. } => 3,
            Error::AssignmentTooLarge { .. } => 4,
            Error::Determinism { .. } => 5,
            _ => 2,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Error::from(e).into()
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Error::from(e).into()
    }
}

type Outcome = Result<u8, Failure>;

struct Context {
    config_path: Option<PathBuf>,
    out: PathBuf,
    seed: Option<u64>,
    started: Instant,
}

impl Context {
    fn config(&self) -> Result<RunConfig, Failure> {
        let path = self
            .config_path
            .as_ref()
            .ok_or_else(|| Failure::usage("--config is required for this subcommand"))?;
        let text = fs::read_to_string(path)
            .map_err(|e| Failure::usage(format!("cannot read config {}: {e}", path.display())))?;
        let cfg = RunConfig::from_json_str(&text)?;
        Ok(match self.seed {
            Some(s) => cfg.with_seed(s),
            None => cfg,
        })
    }

    fn create_out(&self) -> Result<(), Failure> {
        fs::create_dir_all(&self.out).map_err(|e| {
            Failure::usage(format!(
                "cannot create output directory {}: {e}",
                self.out.display()
            ))
        })
    }

    fn create(&self, name: &str) -> Result<BufWriter<File>, Failure> {
        Ok(BufWriter::new(File::create(self.out.join(name))?))
    }

    fn write_json(&self, name: &str, value: &Value) -> Result<(), Failure> {
        fs::write(
            self.out.join(name),
            serde_json::to_string_pretty(value)? + "\n",
        )?;
        Ok(())
    }

    /// Written last: its presence marks a complete run.
    fn write_manifest(&self, subcommand: &str, seed: u64, files: &[&str]) -> Result<(), Failure> {
        let manifest = json!({
            "subcommand": subcommand,
            "config": self.config_path.as_ref().map(|p| p.display().to_string()),
            "out": self.out.display().to_string(),
            "version": env!("CARGO_PKG_VERSION"),
            "wall_clock_seconds": self.started.elapsed().as_secs_f64(),
            "seed": seed,
            "files": files,
        });
        self.write_json("manifest.json", &manifest)
    }
}

fn print_json(value: &Value) -> Result<(), Failure> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn cmd_simulate(ctx: &Context) -> Outcome {
    let cfg = ctx.config()?;
    let sim = cfg.sim_config(None)?;
    let model = sim.model();
    ctx.create_out()?;
    let record = simulate(&sim)?;
    let mut traj = ctx.create("trajectory.csv")?;
    record.write_csv(&mut traj)?;
    let rows = diagnostics_table(&record, model)?;
    DiagnosticsRow::write_csv(&rows, ctx.create("diagnostics.csv")?)?;
    let report = if model.n() <= 2 {
        json!({
            "applicable": false,
            "reason": format!("the flocking condition needs N > 2 agents (got N = {})", model.n()),
        })
    } else {
        let mut r = flocking_condition(&sim.seed_history()?, model)?;
        let series: Vec<(f64, f64)> = rows.iter().map(|r| (r.t, r.d_v)).collect();
        r.gamma_fitted = fit_decay_rate_all(&series);
        serde_json::to_value(r)?
    };
    ctx.write_json("report.json", &report)?;
    ctx.write_manifest(
        "simulate",
        cfg.seed,
        &["trajectory.csv", "diagnostics.csv", "report.json"],
    )?;
    Ok(0)
}

fn cmd_check(ctx: &Context) -> Outcome {
    let cfg = ctx.config()?;
    let sim = cfg.history_config()?;
    let report = flocking_condition(&sim.seed_history()?, sim.model())?;
    print_json(&serde_json::to_value(&report)?)?;
    Ok(if report.holds { 0 } else { 1 })
}

fn horizon_of(cfg: &RunConfig, horizon: Option<f64>) -> Result<f64, Failure> {
    horizon
        .or(cfg.t_end)
        .ok_or_else(|| Failure::usage("no horizon: pass --horizon or set t_end in the config"))
}

fn cmd_meanfield(ctx: &Context, n_list: &[usize], horizon: Option<f64>) -> Outcome {
    let cfg = ctx.config()?;
    let sampler = cfg
        .sampler()
        .ok_or_else(|| Failure::usage("meanfield needs initial.kind = \"random\" or \"nested\""))?;
    let horizon = horizon_of(&cfg, horizon)?;
    let base = cfg.sim_config(Some(horizon))?;
    ctx.create_out()?;
    let table = mean_field_experiment(&base, &sampler, n_list, horizon, cfg.w1_velocity_weight)?;
    table.write_csv(ctx.create("convergence.csv")?)?;
    ctx.write_manifest("meanfield", cfg.seed, &["convergence.csv"])?;
    print_json(&serde_json::to_value(&table)?)?;
    Ok(0)
}

fn cmd_stability(
    ctx: &Context,
    perturbation: Option<&str>,
    epsilon: Option<f64>,
    trials: u64,
    horizon: Option<f64>,
) -> Outcome {
    let cfg = ctx.config()?;
    let perturbations = match (perturbation, epsilon) {
        (Some(text), _) => {
            let de = &mut serde_json::Deserializer::from_str(text);
            let p: Perturbation = serde_path_to_error::deserialize(de).map_err(|e| {
                Failure::usage(format!(
                    "invalid `perturbation{}`: {}",
                    path_suffix(&e.path().to_string()),
                    e.inner()
                ))
            })?;
            vec![p]
        }
        (None, Some(magnitude)) => (0..trials)
            .map(|k| Perturbation::RandomVelocity {
                magnitude,
                seed: cfg.seed.wrapping_add(k),
            })
            .collect(),
        (None, None) => return Err(Failure::usage("pass --perturbation JSON or --epsilon")),
    };
    let horizon = horizon_of(&cfg, horizon)?;
    let base = cfg.sim_config(Some(horizon))?;
    ctx.create_out()?;
    let tables = perturbations
        .par_iter()
        .map(|p| stability_experiment(&base, p, horizon, cfg.w1_velocity_weight))
        .collect::<Result<Vec<_>, Error>>()?;
    write_stability_csv(&tables, ctx.create("stability.csv")?)?;
    ctx.write_manifest("stability", cfg.seed, &["stability.csv"])?;
    let summary: Vec<Value> = tables
        .iter()
        .map(|t| json!({"epsilon": t.epsilon, "initial_w1": t.initial_w1, "sup_w1": t.sup_w1, "ratio": t.ratio}))
        .collect();
    let max_ratio = tables.iter().map(|t| t.ratio).fold(0.0, f64::max);
    print_json(&json!({"trials": summary, "max_ratio": max_ratio}))?;
    Ok(0)
}

fn path_suffix(path: &str) -> String {
    if path == "." {
        String::new()
    } else {
        format!(".{path}")
    }
}

fn cmd_halanay(a: f64, tau0: f64, oracle: bool) -> Outcome {
    let gamma = halanay_rate(a, tau0)?;
    if !oracle {
        print_json(&json!({"a": a, "tau0": tau0, "gamma": gamma}))?;
        return Ok(0);
    }
    let worst = halanay_oracle(a, tau0, gamma)?;
    let pass = worst <= 1.0 + ORACLE_SLACK;
    print_json(&json!({
        "a": a,
        "tau0": tau0,
        "gamma": gamma,
        "oracle_max_u_exp_gamma_t": worst,
        "oracle_pass": pass,
    }))?;
    Ok(if pass { 0 } else { 1 })
}

fn cmd_decay_rate(
    ctx: &Context,
    input: Option<&Path>,
    from: Option<f64>,
    to: Option<f64>,
) -> Outcome {
    let path = input
        .map(Path::to_path_buf)
        .unwrap_or_else(|| ctx.out.join("diagnostics.csv"));
    let file = File::open(&path)
        .map_err(|e| Failure::usage(format!("cannot read {}: {e}", path.display())))?;
    let rows = DiagnosticsRow::read_csv(file)?;
    let series: Vec<(f64, f64)> = rows.iter().map(|r| (r.t, r.d_v)).collect();
    let first = series.first().map_or(0.0, |p| p.0);
    let last = series.last().map_or(0.0, |p| p.0);
    let window = (from.unwrap_or(first), to.unwrap_or(last));
    let rate = fit_decay_rate(&series, window)
        .ok_or_else(|| Failure::usage("fewer than two positive d_V samples in the fit window"))?;
    print_json(&json!({"gamma_fitted": rate, "window": [window.0, window.1]}))?;
    Ok(0)
}

fn run(cli: Cli) -> Outcome {
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            return Err(Failure::usage("--jobs must be >= 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| Failure::usage(format!("cannot configure thread pool: {e}")))?;
    }
    let out = std::env::var_os("DELAYFLOCK_OUT")
        .map(PathBuf::from)
        .or(cli.out)
        .unwrap_or_else(|| PathBuf::from("delayflock-out"));
    let ctx = Context {
        config_path: cli.config,
        out,
        seed: cli.seed,
        started: Instant::now(),
    };
    match &cli.command {
        Command::Simulate => cmd_simulate(&ctx),
        Command::Check => cmd_check(&ctx),
        Command::Meanfield { n, horizon } => cmd_meanfield(&ctx, n, *horizon),
        Command::Stability {
            perturbation,
            epsilon,
            trials,
            horizon,
        } => cmd_stability(&ctx, perturbation.as_deref(), *epsilon, *trials, *horizon),
        Command::Halanay { a, tau0, oracle } => cmd_halanay(*a, *tau0, *oracle),
        Command::DecayRate { input, from, to } => {
            cmd_decay_rate(&ctx, input.as_deref(), *from, *to)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let name = cli.command.name();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("delayflock {name}: error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
