use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Duration;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};

use hamap::bench::{self, Config};
use hamap::cgraph::{extract, read_container, write_container, OperatingPoint};
use hamap::dse::{explore, ParetoArchive};
use hamap::model::{load_architecture, load_taskgraph, Architecture, TaskGraph};
use hamap::rtm::{admit, verify, AppId, AttemptOutcome, IsolationMode, SolverOptions, SystemState};

#[derive(Parser)]
#[command(name = "hamap", version, about = "Hybrid application mapping for mesh NoC MPSoCs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse and validate architecture, task-graph and config files.
    Validate(Inputs),
    /// Explore one application and write its operating points.
    Dse {
        #[command(flatten)]
        inputs: Inputs,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Operating-point container to write.
        #[arg(long)]
        out: PathBuf,
        /// Also write the full Pareto archive as JSON.
        #[arg(long)]
        archive: Option<PathBuf>,
    },
    /// Turn a JSON Pareto archive into an operating-point container.
    Pack {
        #[command(flatten)]
        inputs: Inputs,
        #[arg(long)]
        archive: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Admit applications one after another onto an empty system.
    Admit {
        #[arg(long)]
        arch: PathBuf,
        /// Operating-point containers, one per application, in arrival order.
        #[arg(long = "ops", required = true)]
        ops: Vec<PathBuf>,
        #[arg(long, default_value = "ti")]
        mode: IsolationMode,
        #[arg(long = "timeout-ms")]
        timeout_ms: Option<u64>,
        /// CSV of every solver attempt.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Success of admission against pre-occupied systems, with and without
    /// the communication constraints.
    ExpUtil(Experiment),
    /// Success of application mixes under shrinking PE availability, for
    /// both isolation modes.
    ExpIso(Experiment),
    /// Solver wall times and timeout-induced false negatives.
    ExpTiming {
        #[command(flatten)]
        exp: Experiment,
        /// Timeouts to measure; overrides the config.
        #[arg(long = "timeout-ms")]
        timeout_ms: Vec<u64>,
        /// CDF table of the wall times.
        #[arg(long)]
        cdf: Option<PathBuf>,
    },
}

#[derive(Args)]
struct Inputs {
    #[arg(long)]
    arch: PathBuf,
    /// Task-graph files.
    #[arg(long)]
    app: Vec<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct Experiment {
    #[command(flatten)]
    inputs: Inputs,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Summary CSV.
    #[arg(long)]
    out: PathBuf,
    /// Per-trial CSV.
    #[arg(long)]
    records: Option<PathBuf>,
}

enum Failure {
    Input(anyhow::Error),
    Infeasible(String),
    Timeout(String),
    Other(anyhow::Error),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Other(_) => 1,
            Failure::Input(_) => 2,
            Failure::Infeasible(_) => 3,
            Failure::Timeout(_) => 4,
        }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Other(e)
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display())).map_err(Failure::Input)
}

fn input<T, E: std::error::Error + Send + Sync + 'static>(r: Result<T, E>, path: &Path) -> Result<T, Failure> {
    r.with_context(|| format!("{}", path.display())).map_err(Failure::Input)
}

struct Loaded {
    arch: Architecture,
    apps: Vec<TaskGraph>,
    config: Config,
}

fn load(inputs: &Inputs) -> Result<Loaded, Failure> {
    let arch = input(load_architecture(&read(&inputs.arch)?), &inputs.arch)?;
    let apps = inputs.app.iter().map(|p| input(load_taskgraph(&read(p)?), p)).collect::<Result<Vec<_>, _>>()?;
    let config = match &inputs.config {
        Some(p) => input(Config::from_toml(&read(p)?), p)?,
        None => Config::default(),
    };
    Ok(Loaded { arch, apps, config })
}

fn write(path: &Path, bytes: &[u8]) -> Result<(), Failure> {
    fs::write(path, bytes).with_context(|| format!("writing {}", path.display())).map_err(Failure::Other)
}

fn write_csv<T: serde::Serialize>(path: &Path, rows: &[T]) -> Result<(), Failure> {
    let mut buf = Vec::new();
    bench::write_csv(&mut buf, rows).map_err(|e| Failure::Other(e.into()))?;
    write(path, &buf)
}

fn single_app(l: &Loaded) -> Result<&TaskGraph, Failure> {
    match l.apps.as_slice() {
        [g] => Ok(g),
        _ => Err(Failure::Input(anyhow!("exactly one --app is required"))),
    }
}

/// Operating points per application: the given task graphs, or the
/// configured synthetic benchmark.
fn pool(l: &Loaded, seed: u64) -> Result<Vec<Vec<OperatingPoint>>, Failure> {
    let apps = if l.apps.is_empty() {
        let mut spec = l.config.benchmark.clone();
        if spec.types.is_empty() {
            spec.types = l.arch.types().iter().map(|t| t.name.clone()).collect();
        }
        bench::gen_benchmark(&spec, &l.config.scheduling).map_err(|e| Failure::Input(e.into()))?
    } else {
        l.apps.clone()
    };
    apps.iter()
        .enumerate()
        .map(|(i, g)| {
            let points =
                bench::design_points(g, &l.arch, &l.config.scheduling, &l.config.ea, seed.wrapping_add(i as u64))
                    .map_err(|e| Failure::Other(e.into()))?;
            log::info!("{}: {} operating points", g.name(), points.len());
            Ok(points)
        })
        .collect()
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Validate(inputs) => {
            let l = load(&inputs)?;
            println!(
                "ok: {}x{} mesh, {} types, {} application(s)",
                l.arch.width(),
                l.arch.height(),
                l.arch.types().len(),
                l.apps.len()
            );
            Ok(())
        }
        Command::Dse { inputs, seed, out, archive } => {
            let l = load(&inputs)?;
            let g = single_app(&l)?;
            let a =
                explore(g, &l.arch, &l.config.scheduling, &l.config.ea, seed).map_err(|e| Failure::Other(e.into()))?;
            if let Some(p) = archive {
                write(&p, serde_json::to_string_pretty(&a).context("encoding archive")?.as_bytes())?;
            }
            let points = points_of(g, &l, &a)?;
            write(&out, &write_container(&points).context("encoding operating points")?)?;
            println!("{}: {} operating points", g.name(), points.len());
            if points.is_empty() {
                return Err(Failure::Infeasible(format!("{}: no feasible mapping found", g.name())));
            }
            Ok(())
        }
        Command::Pack { inputs, archive, out } => {
            let l = load(&inputs)?;
            let g = single_app(&l)?;
            let a: ParetoArchive = input(serde_json::from_str(&read(&archive)?), &archive)?;
            let points = points_of(g, &l, &a)?;
            write(&out, &write_container(&points).context("encoding operating points")?)?;
            println!("{}: {} operating points", g.name(), points.len());
            Ok(())
        }
        Command::Admit { arch, ops, mode, timeout_ms, out } => {
            let arch = Arc::new(input(load_architecture(&read(&arch)?), &arch)?);
            let mut state = SystemState::new(Arc::clone(&arch));
            let opts = SolverOptions::new(mode).with_timeout(timeout_ms.map(Duration::from_millis));
            let mut records = Vec::new();
            let (mut rejected, mut timed_out) = (0, 0);
            for (k, path) in ops.iter().enumerate() {
                let bytes =
                    fs::read(path).with_context(|| format!("reading {}", path.display())).map_err(Failure::Input)?;
                let points = input(read_container(&bytes), path)?;
                let app = AppId(k as u32);
                let outcome = admit(app, &points, &state, opts);
                match &outcome.chosen {
                    Some((i, asg)) => {
                        verify(&points[*i].cg, &state, asg, &opts).map_err(|e| anyhow!("unsound assignment: {e}"))?;
                        state.commit(app, &points[*i].cg, asg).context("committing")?;
                        let pes: Vec<String> = asg.bind.iter().flatten().map(|p| arch.coord(*p).to_string()).collect();
                        println!(
                            "{app} {}: op {i} energy {} on {}",
                            path.display(),
                            points[*i].objectives.energy,
                            pes.join(" ")
                        );
                    }
                    None => {
                        if outcome.attempts.iter().any(|a| a.outcome == AttemptOutcome::TimedOut) {
                            timed_out += 1;
                        } else {
                            rejected += 1;
                        }
                        println!("{app} {}: rejected", path.display());
                    }
                }
                records.extend(outcome.attempts);
            }
            if let Some(p) = out {
                write_csv(&p, &records)?;
            }
            if timed_out > 0 {
                Err(Failure::Timeout(format!("{timed_out} application(s) hit the timeout")))
            } else if rejected > 0 {
                Err(Failure::Infeasible(format!("{rejected} application(s) could not be mapped")))
            } else {
                Ok(())
            }
        }
        Command::ExpUtil(exp) => {
            let l = load(&exp.inputs)?;
            let pool = pool(&l, exp.seed)?;
            let arch = Arc::new(l.arch);
            let records = bench::exp_utilization(&pool, arch, &l.config.experiments.utilization(), exp.seed)
                .map_err(|e| Failure::Other(e.into()))?;
            write_csv(&exp.out, &bench::summarize_utilization(&records))?;
            if let Some(p) = exp.records {
                write_csv(&p, &records)?;
            }
            Ok(())
        }
        Command::ExpIso(exp) => {
            let l = load(&exp.inputs)?;
            let pool = pool(&l, exp.seed)?;
            let arch = Arc::new(l.arch);
            let knobs = l.config.experiments.isolation();
            let mut records = Vec::new();
            for (m, mix) in l.config.experiments.mixes.iter().enumerate() {
                let apps = mix
                    .iter()
                    .map(|&i| {
                        pool.get(i).cloned().ok_or_else(|| {
                            Failure::Input(anyhow!("mix {m} names application {i}, only {} exist", pool.len()))
                        })
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                records.extend(
                    bench::exp_isolation(m, &apps, Arc::clone(&arch), &knobs, exp.seed)
                        .map_err(|e| Failure::Other(e.into()))?,
                );
            }
            write_csv(&exp.out, &bench::summarize_isolation(&records))?;
            if let Some(p) = exp.records {
                write_csv(&p, &records)?;
            }
            Ok(())
        }
        Command::ExpTiming { exp, timeout_ms, cdf } => {
            let l = load(&exp.inputs)?;
            let pool = pool(&l, exp.seed)?;
            let arch = Arc::new(l.arch);
            let mut knobs = l.config.experiments.timing();
            if !timeout_ms.is_empty() {
                knobs.timeouts_ms = timeout_ms;
            }
            let records = bench::exp_timing(&pool, arch, &knobs, exp.seed).map_err(|e| Failure::Other(e.into()))?;
            write_csv(&exp.out, &bench::summarize_timing(&records))?;
            if let Some(p) = cdf {
                write_csv(&p, &bench::timing_cdf(&records))?;
            }
            if let Some(p) = exp.records {
                write_csv(&p, &records)?;
            }
            Ok(())
        }
    }
}

fn points_of(g: &TaskGraph, l: &Loaded, a: &ParetoArchive) -> Result<Vec<OperatingPoint>, Failure> {
    a.entries()
        .iter()
        .map(|e| {
            let cg = extract(g, &e.mapping, &l.config.scheduling, &l.arch).context("extracting constraint graph")?;
            Ok(OperatingPoint { cg, objectives: e.objectives.clone() })
        })
        .collect()
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            match &f {
                Failure::Input(e) | Failure::Other(e) => eprintln!("error: {e:#}"),
                Failure::Infeasible(s) | Failure::Timeout(s) => eprintln!("{s}"),
            }
            ExitCode::from(f.code())
        }
    }
}
