//! Command-line front end. Exit codes: 0 ok, 1 runtime error, 2 configuration
//! error, 3 seed fuzzer failure. Log level comes from `ELFZ_LOG`.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};
use fuzzspace::config::EngineConfig;
use fuzzspace::evolution::{self, EvolutionError, ExportedFuzzer, ProduceBudget, RunDir};
use fuzzspace::harness::{self, RunnerInvocation};
use fuzzspace::{report, zest};

#[derive(Parser)]
#[command(name = "fuzzspace", version, about = "Evolve generation-based fuzzers with code-model mutators")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Args)]
struct ConfigArgs {
    /// Engine configuration file (TOML). Defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override a configuration key, e.g. `--set evolution.iterations=5`.
    #[arg(long = "set", value_name = "SECTION.KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run the evolution loop.
    Evolve {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        out_dir: PathBuf,
        /// Continue from the latest checkpoint in the output directory.
        #[arg(long)]
        resume: bool,
        /// Log model request and response bodies.
        #[arg(long)]
        log_llm: bool,
    },
    /// Generate a corpus from exported fuzzers.
    Produce {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Run directory holding `fuzzers.json`.
        #[arg(long, conflicts_with = "fuzzer")]
        run_dir: Option<PathBuf>,
        /// Generator source files.
        #[arg(long)]
        fuzzer: Vec<PathBuf>,
        #[arg(long, conflicts_with = "duration")]
        count: Option<usize>,
        /// Seconds to keep generating.
        #[arg(long)]
        duration: Option<f64>,
        /// Cases per fuzzer per round in duration mode.
        #[arg(long, default_value_t = 100)]
        batch: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Reduce a corpus to cases that keep its total coverage.
    Minimize {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Evolve byte arrays driving one generator.
    Zest {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        fuzzer: PathBuf,
        #[arg(long)]
        population: Option<usize>,
        #[arg(long, default_value_t = 500)]
        budget: usize,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Print a run's coverage trend.
    Report {
        run_dir: PathBuf,
        /// Also write `trend.svg` into the run directory.
        #[arg(long)]
        plot: bool,
    },
    /// Built-in runner: `exec <source_path> <seed> <count> <out_dir> [--bytes <path>]`.
    Exec {
        source_path: PathBuf,
        seed: u64,
        count: usize,
        out_dir: PathBuf,
        #[arg(long)]
        bytes: Option<PathBuf>,
        /// Integer global for the generator, e.g. `--const MAX_LEN=16`.
        #[arg(long = "const", value_name = "NAME=INT")]
        constants: Vec<String>,
    },
}

struct Failure(u8, String);

fn config_err(e: impl std::fmt::Display) -> Failure {
    Failure(2, e.to_string())
}

fn runtime(e: impl std::fmt::Display) -> Failure {
    Failure(1, e.to_string())
}

fn load(args: &ConfigArgs) -> Result<EngineConfig, Failure> {
    match &args.config {
        Some(p) => EngineConfig::load(p, &args.overrides),
        None => EngineConfig::from_toml("", &args.overrides),
    }
    .map_err(config_err)
}

fn evolve(args: &ConfigArgs, out_dir: &Path, resume: bool, log_llm: bool) -> Result<(), Failure> {
    let mut engine = load(args)?;
    engine.llm.log_requests |= log_llm;
    let cfg = engine.evolution().map_err(config_err)?;
    let llm = cfg.llm.build().map_err(config_err)?;
    let dir = RunDir::new(out_dir).map_err(runtime)?;
    let state = evolution::run(&cfg, llm.as_ref(), Some(&dir), resume).map_err(|e| match e {
        EvolutionError::Config(_) | EvolutionError::HashMismatch { .. } => config_err(e),
        EvolutionError::Seed(_) => Failure(3, e.to_string()),
        _ => runtime(e),
    })?;
    println!(
        "{} iterations, {} nodes, survivor union {} ({} units)",
        state.iteration,
        state.space.len(),
        state.survivor_union(),
        state.survivor_union().len()
    );
    Ok(())
}

fn read_fuzzers(run_dir: Option<&Path>, files: &[PathBuf]) -> Result<Vec<(String, String)>, Failure> {
    let read = |p: &Path| fs::read_to_string(p).map_err(|e| runtime(format!("{}: {e}", p.display())));
    match run_dir {
        Some(dir) => {
            let manifest: Vec<ExportedFuzzer> =
                serde_json::from_str(&read(&dir.join("fuzzers.json"))?).map_err(|e| runtime(format!("fuzzers.json: {e}")))?;
            manifest.iter().map(|f| Ok((f.id.to_string(), read(&dir.join(&f.file))?))).collect()
        }
        None => files.iter().map(|p| Ok((p.display().to_string(), read(p)?))).collect(),
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Cmd::Evolve { cfg, out_dir, resume, log_llm } => evolve(&cfg, &out_dir, resume, log_llm),
        Cmd::Produce { cfg, run_dir, fuzzer, count, duration, batch, seed, out_dir } => {
            let engine = load(&cfg)?;
            let fuzzers = read_fuzzers(run_dir.as_deref(), &fuzzer)?;
            if fuzzers.is_empty() {
                return Err(config_err("produce needs --run-dir or at least one --fuzzer"));
            }
            let budget = match (count, duration) {
                (_, Some(secs)) => ProduceBudget::Duration { limit: Duration::from_secs_f64(secs), batch },
                (Some(n), None) => ProduceBudget::Count(n),
                (None, None) => return Err(config_err("produce needs --count or --duration")),
            };
            let r = evolution::produce(&fuzzers, &engine.runner(), budget, seed, &out_dir).map_err(runtime)?;
            println!("{} test cases written to {}", r.entries.len(), out_dir.display());
            if r.failures.len() == fuzzers.len() {
                return Err(runtime("every fuzzer failed"));
            }
            Ok(())
        }
        Cmd::Minimize { cfg, corpus, out_dir } => {
            let engine = load(&cfg)?;
            let kept = evolution::minimize_dir(&corpus, &out_dir, &engine.coverage_backend()).map_err(runtime)?;
            println!("kept {} test cases in {}", kept.len(), out_dir.display());
            Ok(())
        }
        Cmd::Zest { cfg, fuzzer, population, budget, seed, out_dir } => {
            let engine = load(&cfg)?;
            let mut z = engine.zest.clone();
            z.population = population.unwrap_or(z.population);
            z.rng_seed = seed.unwrap_or(z.rng_seed);
            let source = fs::read_to_string(&fuzzer).map_err(|e| runtime(format!("{}: {e}", fuzzer.display())))?;
            let out = zest::zest_loop(&source, &z, &engine.runner(), &engine.coverage_backend(), budget).map_err(|e| match e {
                zest::ZestError::Config(_) => config_err(e),
                _ => runtime(e),
            })?;
            zest::write_corpus(&out.corpus, &out_dir).map_err(runtime)?;
            let covs: Vec<String> = out.covs.iter().map(usize::to_string).collect();
            fs::write(out_dir.join("covs.txt"), covs.join("\n") + "\n").map_err(runtime)?;
            println!(
                "{} rounds, {} admitted, {} failed, final coverage {}",
                budget,
                out.admitted,
                out.failed,
                out.covs.last().copied().unwrap_or(0)
            );
            Ok(())
        }
        Cmd::Report { run_dir, plot } => {
            let path = run_dir.join("trend.csv");
            let text = fs::read_to_string(&path).map_err(|e| runtime(format!("{}: {e}", path.display())))?;
            let rows = evolution::parse_trend_csv(&text).map_err(runtime)?;
            print!("{}", report::trend_table(&rows));
            let drops = report::decreases(&rows);
            if !drops.is_empty() {
                println!("union coverage decreased at iterations {drops:?}");
            }
            if plot {
                let svg = run_dir.join("trend.svg");
                fs::write(&svg, report::trend_svg(&rows)).map_err(runtime)?;
                println!("wrote {}", svg.display());
            }
            Ok(())
        }
        Cmd::Exec { source_path, seed, count, out_dir, bytes, constants } => {
            let constants = constants
                .iter()
                .map(|c| {
                    let (k, v) = c.split_once('=').ok_or_else(|| config_err(format!("bad --const {c:?}")))?;
                    Ok((k.to_string(), v.parse::<i64>().map_err(|_| config_err(format!("bad --const {c:?}")))?))
                })
                .collect::<Result<_, Failure>>()?;
            let inv = RunnerInvocation { source_path, seed, count, out_dir, bytes_path: bytes };
            harness::exec_invocation(&inv, &constants).map_err(|e| runtime(e.detail))
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("ELFZ_LOG", "warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure(code, msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(code)
        }
    }
}
