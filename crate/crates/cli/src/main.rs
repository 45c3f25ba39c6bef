//! `demandgym`: baseline generation, training, evaluation, reporting,
//! environment serving and sweeps from one config file.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 usage or config error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use demandgym::building::WORKING_HOURS;
use demandgym::cosim::{self, SessionEnd};
use demandgym::env::{BaselineCache, BuiltinEnv, Environment};
use demandgym::trainer::records::fmt_f64;
use demandgym::trainer::run::{self, format_metrics};
use demandgym::trainer::sweep::{self, Grid};
use demandgym::trainer::{self, AgentArtifact, EnvSource, RunConfig, TrainError};

#[derive(Parser, Debug)]
#[command(name = "demandgym", version, about = "Demand-response cooling control with reinforcement learning")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate the baseline schedule and write its series and summary.
    Baseline {
        #[command(flatten)]
        common: Common,
    },
    /// Train an agent and write the run directory.
    Train {
        #[command(flatten)]
        common: Common,
        /// Override the number of epochs.
        #[arg(long)]
        epochs: Option<usize>,
        /// Drive a remote environment (`host:port` or `exec:<command>`).
        #[arg(long)]
        endpoint: Option<String>,
    },
    /// Evaluate a saved agent over the configured period.
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        agent: PathBuf,
        #[arg(long)]
        endpoint: Option<String>,
    },
    /// Print a run's metrics and write its per-hour profile CSV.
    Report {
        /// Run directory or time-series CSV.
        #[arg(long)]
        run: PathBuf,
    },
    /// Serve the builtin simulator over the environment protocol.
    Serve {
        #[command(flatten)]
        common: Common,
        /// `host:port` to listen on, or `stdio`.
        #[arg(long, default_value = "127.0.0.1:7878")]
        endpoint: String,
    },
    /// Train every combination of a hyperparameter grid.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// `key=v1,v2,...`; repeat for more keys.
        #[arg(long = "grid")]
        grid: Vec<String>,
        #[arg(long, default_value_t = 1)]
        workers: usize,
    },
}

#[derive(Args, Debug)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    /// Output directory (default `./runs/<timestamp>`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Run seed; takes precedence over DEMANDGYM_SEED and the config.
    #[arg(long, env = "DEMANDGYM_SEED")]
    seed: Option<u64>,
    /// `key=value` override; bare keys name hyperparameters.
    #[arg(long = "set")]
    overrides: Vec<String>,
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Runtime(String),
}

impl From<TrainError> for Failure {
    fn from(e: TrainError) -> Self {
        if e.is_config() {
            Failure::Usage(e.to_string())
        } else {
            Failure::Runtime(e.to_string())
        }
    }
}

impl Common {
    /// Loads the config with overrides applied. `quiet` sends the echo to
    /// stderr, for commands whose stdout carries data.
    fn load(&self, quiet: bool) -> Result<RunConfig, Failure> {
        if !self.config.exists() {
            return Err(Failure::Usage(format!("config file `{}` not found", self.config.display())));
        }
        let mut cfg = RunConfig::load(&self.config)?;
        for o in &self.overrides {
            let (k, v) = o
                .split_once('=')
                .ok_or_else(|| Failure::Usage(format!("--set `{o}` is not key=value")))?;
            cfg.set(k.trim(), &sweep::parse_value(v.trim())?)?;
        }
        let source = if let Some(seed) = self.seed {
            cfg.run.seed = seed;
            "command line or DEMANDGYM_SEED"
        } else {
            "config"
        };
        let echo = format!("config: {}\nseed: {} (from {source})", self.config.display(), cfg.run.seed);
        if quiet {
            eprintln!("{echo}");
        } else {
            println!("{echo}");
        }
        Ok(cfg)
    }

    fn out_dir(&self, cfg: &RunConfig) -> PathBuf {
        self.out
            .clone()
            .or_else(|| cfg.run.output_dir.clone())
            .unwrap_or_else(|| PathBuf::from("runs").join(chrono::Local::now().format("%Y%m%d-%H%M%S").to_string()))
    }
}

fn echo_resolved(cfg: &RunConfig) -> Result<(), Failure> {
    println!("{}", cfg.describe());
    println!("--- resolved config ---\n{}-----------------------", cfg.resolved().to_toml()?);
    Ok(())
}

fn builtin_env(cfg: &RunConfig, eval: bool) -> Result<BuiltinEnv, Failure> {
    let cache = BaselineCache::new(cfg.run.baseline_cache_dir.clone());
    Ok(BuiltinEnv::new(cfg.building(eval)?, cfg.task_spec(), cfg.period()?, &cache).map_err(TrainError::from)?)
}

fn baseline(common: &Common) -> Result<(), Failure> {
    let cfg = common.load(false)?;
    let out = common.out_dir(&cfg);
    echo_resolved(&cfg)?;
    let building = cfg.building(false)?;
    let series = building.run_baseline(cfg.period()?).map_err(TrainError::from)?;
    std::fs::create_dir_all(&out).map_err(|e| TrainError::io(&out, e))?;
    let mut text = String::from("timestamp,cooling_w,t_air_c,t_env_c,setpoint_c\n");
    for (state, q) in series.states.iter().zip(&series.cooling_w) {
        text.push_str(&format!(
            "{},{},{},{},{}\n",
            state.time.format("%Y-%m-%dT%H:%M:%S"),
            fmt_f64(*q),
            fmt_f64(state.t_air_c),
            fmt_f64(state.t_env_c),
            fmt_f64(state.setpoint_c)
        ));
    }
    let series_path = out.join("baseline_timeseries.csv");
    std::fs::write(&series_path, text).map_err(|e| TrainError::io(&series_path, e))?;
    let working = series.window_stats(WORKING_HOURS.0, WORKING_HOURS.1);
    let summary = serde_json::json!({
        "period": cfg.period()?,
        "working_hours": [WORKING_HOURS.0, WORKING_HOURS.1],
        "working_hours_stats": working,
        "config_digest": cfg.digest(),
        "seed": cfg.run.seed,
    });
    let summary_path = out.join("baseline_summary.json");
    std::fs::write(&summary_path, serde_json::to_string_pretty(&summary).expect("json"))
        .map_err(|e| TrainError::io(&summary_path, e))?;
    std::fs::write(out.join(run::CONFIG_FILE), cfg.resolved().to_toml()?)
        .map_err(|e| TrainError::io(&out, e))?;
    println!("out: {}", out.display());
    println!(
        "working-hours mean {:.0} W  std {:.0} W  per-hour across-day std {:.0} W",
        working.mean_w, working.std_w, working.mean_per_hour_std_w
    );
    Ok(())
}

fn train(common: &Common, epochs: Option<usize>, endpoint: Option<String>) -> Result<(), Failure> {
    let mut cfg = common.load(false)?;
    if epochs.is_some() {
        cfg.run.epochs = epochs;
    }
    if let Some(e) = endpoint {
        cfg.run.env = EnvSource::Remote(e);
    }
    let out = common.out_dir(&cfg);
    cfg.run.output_dir = Some(out.clone());
    echo_resolved(&cfg)?;
    println!("out: {}", out.display());
    let cache = BaselineCache::new(cfg.run.baseline_cache_dir.clone());
    let mut envs = trainer::open_envs(&cfg, &cache)?;
    let outcome = run::train_to_dir(&cfg, &mut envs, &out)?;
    for row in &outcome.log {
        println!(
            "epoch {:3}  train {:9.3}  eval {:9.3}  median|e| {:6.2}%  %<10 {:5.1}%{}",
            row.epoch,
            row.train_mean_episode_reward,
            row.eval_mean_episode_reward,
            100.0 * row.eval_median_abs_error,
            100.0 * row.eval_frac_within_10,
            if row.best { "  *" } else { "" }
        );
    }
    println!("best agent: epoch {}", outcome.agent.metadata.epoch);
    println!("{}", format_metrics(&outcome.metrics));
    Ok(())
}

fn eval(common: &Common, agent: &Path, endpoint: Option<String>) -> Result<(), Failure> {
    let mut cfg = common.load(false)?;
    if let Some(e) = endpoint {
        cfg.run.env = EnvSource::Remote(e);
    }
    let out = common.out_dir(&cfg);
    echo_resolved(&cfg)?;
    println!("agent: {}", agent.display());
    let artifact = AgentArtifact::load(agent)?;
    let cache = BaselineCache::new(cfg.run.baseline_cache_dir.clone());
    let mut envs = trainer::open_envs(&cfg, &cache)?;
    let env: &mut dyn Environment = match envs.eval.as_mut() {
        Some(e) => e.as_mut(),
        None => envs.train.as_mut(),
    };
    let (records, metrics) = trainer::evaluate(&artifact, &cfg, env)?;
    run::write_eval_outputs(&out, &cfg.task_spec().observation.names(), &records, &metrics)?;
    println!("out: {}", out.display());
    println!("{}", format_metrics(&metrics));
    Ok(())
}

fn report(input: &Path) -> Result<(), Failure> {
    let r = run::report(input)?;
    println!("{}", format_metrics(&r.metrics));
    println!("profile: {}", r.profile_path.display());
    Ok(())
}

fn serve(common: &Common, endpoint: &str) -> Result<(), Failure> {
    let stdio = endpoint == "stdio";
    let cfg = common.load(stdio)?;
    let mut env = builtin_env(&cfg, false)?;
    let end = if stdio {
        // stdout carries the protocol; progress goes to stderr.
        eprintln!("{}", cfg.describe());
        cosim::serve_stdio(&mut env)
    } else {
        echo_resolved(&cfg)?;
        cosim::serve_tcp(&mut env, endpoint, |addr| println!("listening on {addr}"))
    }
    .map_err(|e| Failure::Runtime(format!("serve: {e}")))?;
    match end {
        SessionEnd::Closed | SessionEnd::Disconnected => Ok(()),
        SessionEnd::Malformed => Err(Failure::Runtime("client sent a malformed message".into())),
        SessionEnd::Failed => Err(Failure::Runtime("simulator failed during the session".into())),
    }
}

fn sweep_cmd(common: &Common, entries: &[String], workers: usize) -> Result<(), Failure> {
    let cfg = common.load(false)?;
    let mut grid = Grid::new();
    for entry in entries {
        let (k, v) = sweep::parse_grid_entry(entry)?;
        grid.insert(k, v);
    }
    let out = common.out_dir(&cfg);
    echo_resolved(&cfg)?;
    println!("out: {}", out.display());
    let rows = sweep::sweep(&cfg, &grid, &out, workers)?;
    println!("rank  index  seed  eval_reward  %<10  overrides");
    for r in &rows {
        let o: Vec<String> = r.overrides.iter().map(|(k, v)| format!("{k}={v}")).collect();
        println!(
            "{:4}  {:5}  {:4}  {:11.3}  {:5.1}  {}",
            r.rank,
            r.index,
            r.seed,
            r.eval_mean_episode_reward,
            100.0 * r.frac_within_10,
            o.join(" ")
        );
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let result = match &cli.command {
        Command::Baseline { common } => baseline(common),
        Command::Train {
            common,
            epochs,
            endpoint,
        } => train(common, *epochs, endpoint.clone()),
        Command::Eval {
            common,
            agent,
            endpoint,
        } => eval(common, agent, endpoint.clone()),
        Command::Report { run } => report(run),
        Command::Serve { common, endpoint } => serve(common, endpoint),
        Command::Sweep {
            common,
            grid,
            workers,
        } => sweep_cmd(common, grid, *workers),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
    }
}
