//! Running candidate generators and measuring what they cover.
//!
//! A [`RunnerConfig`] says how to execute a generator: in process with the
//! built-in interpreter, or as a subprocess following the runner protocol
//!
//! ```text
//! <runner...> {source_path} {seed} {count} {out_dir} [--bytes <bytes_path>]
//! ```
//!
//! where the runner writes `000000.bin`, `000001.bin`, ... into `out_dir` and
//! exits 0. A [`CoverageBackend`] turns test cases into coverage units, either
//! with the built-in toy SUT or an external harness that prints one decimal
//! id per line.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use wait_timeout::ChildExt;

use crate::genlang::{self, ByteChoiceStream, ChoiceSource, ErrorKind, Limits, Session};
use crate::lattice::{CoverSet, CoverageUnit};
use crate::toy;
use crate::util::mix64;

pub const PLACEHOLDERS: [&str; 4] = ["{source_path}", "{seed}", "{count}", "{out_dir}"];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureKind {
    Crash,
    Timeout,
    EmptyOutput,
}

/// A candidate that did not produce test cases. Recorded as data so that
/// exploration can discard the mutant.
#[derive(Clone, Debug, Error, PartialEq, Eq, Serialize, Deserialize)]
#[error("{kind:?}: {detail}")]
pub struct ExecutionFailure {
    pub kind: FailureKind,
    pub detail: String,
}

impl ExecutionFailure {
    fn new(kind: FailureKind, detail: impl Into<String>) -> Self {
        ExecutionFailure { kind, detail: detail.into() }
    }
}

impl From<genlang::GenError> for ExecutionFailure {
    fn from(e: genlang::GenError) -> Self {
        let kind = if e.kind == ErrorKind::Timeout { FailureKind::Timeout } else { FailureKind::Crash };
        ExecutionFailure::new(kind, e.to_string())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunnerKind {
    /// In-process interpreter.
    Builtin,
    /// External command following the runner protocol.
    Command,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunnerConfig {
    pub kind: RunnerKind,
    /// Argv template; must contain every entry of [`PLACEHOLDERS`].
    pub command: Vec<String>,
    pub per_mutant_timeout_secs: f64,
    pub max_testcase_bytes: usize,
    /// Integer globals made visible to generator programs.
    pub constants: BTreeMap<String, i64>,
    /// File name given to the candidate source inside the scratch directory.
    pub source_file_name: String,
}

impl Default for RunnerConfig {
    fn default() -> Self {
        RunnerConfig {
            kind: RunnerKind::Builtin,
            command: Vec::new(),
            per_mutant_timeout_secs: 30.0,
            max_testcase_bytes: 1 << 20,
            constants: BTreeMap::new(),
            source_file_name: "candidate.py".into(),
        }
    }
}

impl RunnerConfig {
    pub fn toy() -> Self {
        RunnerConfig { constants: toy::toy_constants(), ..RunnerConfig::default() }
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.per_mutant_timeout_secs > 0.0) {
            return Err("runner.per_mutant_timeout_secs must be > 0".into());
        }
        if self.max_testcase_bytes == 0 {
            return Err("runner.max_testcase_bytes must be >= 1".into());
        }
        if self.kind == RunnerKind::Command {
            if self.command.is_empty() {
                return Err("runner.command must not be empty".into());
            }
            for p in PLACEHOLDERS {
                if !self.command.iter().any(|a| a.contains(p)) {
                    return Err(format!("runner.command is missing the {p} placeholder"));
                }
            }
        }
        Ok(())
    }

    fn timeout(&self) -> Duration {
        Duration::from_secs_f64(self.per_mutant_timeout_secs)
    }
}

/// Arguments of one runner invocation.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RunnerInvocation {
    pub source_path: PathBuf,
    pub seed: u64,
    pub count: usize,
    pub out_dir: PathBuf,
    pub bytes_path: Option<PathBuf>,
}

impl RunnerInvocation {
    /// Parses `<source_path> <seed> <count> <out_dir> [--bytes <bytes_path>]`.
    pub fn from_args<S: AsRef<str>>(args: &[S]) -> Result<Self, String> {
        let a: Vec<&str> = args.iter().map(AsRef::as_ref).collect();
        let bytes_path = match a.len() {
            4 => None,
            6 if a[4] == "--bytes" => Some(PathBuf::from(a[5])),
            _ => return Err("usage: <source_path> <seed> <count> <out_dir> [--bytes <bytes_path>]".into()),
        };
        Ok(RunnerInvocation {
            source_path: a[0].into(),
            seed: a[1].parse().map_err(|_| format!("bad seed {:?}", a[1]))?,
            count: a[2].parse().map_err(|_| format!("bad count {:?}", a[2]))?,
            out_dir: a[3].into(),
            bytes_path,
        })
    }

    /// Expands an argv template.
    pub fn render(&self, template: &[String]) -> Vec<String> {
        let mut argv: Vec<String> = template
            .iter()
            .map(|t| {
                t.replace("{source_path}", &self.source_path.to_string_lossy())
                    .replace("{seed}", &self.seed.to_string())
                    .replace("{count}", &self.count.to_string())
                    .replace("{out_dir}", &self.out_dir.to_string_lossy())
            })
            .collect();
        if let Some(b) = &self.bytes_path {
            let b = b.to_string_lossy().into_owned();
            if template.iter().any(|t| t.contains("{bytes_path}")) {
                for a in &mut argv {
                    *a = a.replace("{bytes_path}", &b);
                }
            } else {
                argv.push("--bytes".into());
                argv.push(b);
            }
        }
        argv
    }
}

/// Name of the `index`-th test-case file.
pub fn case_file_name(index: usize) -> String {
    format!("{index:06}.bin")
}

/// Seed of the choice stream for case `index` of a run seeded with `seed`.
pub fn case_seed(seed: u64, index: usize) -> u64 {
    mix64(seed, index as u64)
}

/// Where generated choices come from.
#[derive(Clone, Debug)]
pub enum Choices<'a> {
    /// `count` cases, each from an independent stream derived from the seed.
    Seeded { seed: u64, count: usize },
    /// One case driven by a byte array.
    Bytes(&'a [u8]),
}

/// Runs a generator in process. Stops at the first failing case.
pub fn generate_builtin(
    source: &str,
    constants: &BTreeMap<String, i64>,
    choices: Choices<'_>,
    deadline: Option<Instant>,
) -> Result<Vec<Vec<u8>>, ExecutionFailure> {
    let program = genlang::parse(source)?;
    let limits = Limits { deadline, ..Limits::default() };
    let mut session = Session::new(&program, constants, limits)?;
    match choices {
        Choices::Seeded { seed, count } => (0..count)
            .map(|i| {
                let rng = ChaCha8Rng::seed_from_u64(case_seed(seed, i));
                session.generate(ChoiceSource::Seeded(rng)).map_err(Into::into)
            })
            .collect(),
        Choices::Bytes(bytes) => {
            if bytes.is_empty() {
                return Err(ExecutionFailure::new(FailureKind::Crash, "byte array must not be empty"));
            }
            let stream = ByteChoiceStream::new(bytes.to_vec());
            Ok(vec![session.generate(ChoiceSource::Bytes(stream))?])
        }
    }
}

/// The built-in runner behind the `exec` command: reads the source (and byte
/// array), generates the cases and writes them to `out_dir`.
pub fn exec_invocation(inv: &RunnerInvocation, constants: &BTreeMap<String, i64>) -> Result<(), ExecutionFailure> {
    let io = |e: std::io::Error| ExecutionFailure::new(FailureKind::Crash, e.to_string());
    let source = fs::read_to_string(&inv.source_path).map_err(io)?;
    let bytes = match &inv.bytes_path {
        Some(p) => Some(fs::read(p).map_err(io)?),
        None => None,
    };
    let choices = match &bytes {
        Some(b) => Choices::Bytes(b),
        None => Choices::Seeded { seed: inv.seed, count: inv.count },
    };
    let cases = generate_builtin(&source, constants, choices, None)?;
    fs::create_dir_all(&inv.out_dir).map_err(io)?;
    for (i, case) in cases.iter().enumerate() {
        fs::write(inv.out_dir.join(case_file_name(i)), case).map_err(io)?;
    }
    Ok(())
}

fn scratch() -> Result<tempfile::TempDir, ExecutionFailure> {
    tempfile::Builder::new()
        .prefix("fuzzspace-")
        .tempdir()
        .map_err(|e| ExecutionFailure::new(FailureKind::Crash, format!("scratch dir: {e}")))
}

fn tail(text: &str, max_lines: usize) -> String {
    let lines: Vec<&str> = text.lines().collect();
    lines[lines.len().saturating_sub(max_lines)..].join("\n")
}

struct Finished {
    status: std::process::ExitStatus,
    stdout: Vec<u8>,
    stderr: String,
}

/// Runs `argv` to completion or kills it at `timeout`. Output goes through
/// files so that a chatty child can never block on a full pipe.
fn run_with_timeout(argv: &[String], timeout: Duration, dir: &Path) -> Result<Finished, ExecutionFailure> {
    let crash = |e: std::io::Error| ExecutionFailure::new(FailureKind::Crash, format!("{}: {e}", argv[0]));
    let out_path = dir.join(".stdout");
    let err_path = dir.join(".stderr");
    let mut child = Command::new(&argv[0])
        .args(&argv[1..])
        .stdin(Stdio::null())
        .stdout(fs::File::create(&out_path).map_err(crash)?)
        .stderr(fs::File::create(&err_path).map_err(crash)?)
        .spawn()
        .map_err(crash)?;
    let status = match child.wait_timeout(timeout).map_err(crash)? {
        Some(status) => status,
        None => {
            let _ = child.kill();
            let _ = child.wait();
            return Err(ExecutionFailure::new(
                FailureKind::Timeout,
                format!("runner exceeded {:.1}s", timeout.as_secs_f64()),
            ));
        }
    };
    let mut stdout = Vec::new();
    fs::File::open(&out_path).and_then(|mut f| f.read_to_end(&mut stdout)).map_err(crash)?;
    let stderr = fs::read_to_string(&err_path).unwrap_or_default();
    Ok(Finished { status, stdout, stderr })
}

fn run_command(
    source: &str,
    runner: &RunnerConfig,
    seed: u64,
    count: usize,
    bytes: Option<&[u8]>,
    timeout: Duration,
) -> Result<Vec<Vec<u8>>, ExecutionFailure> {
    let dir = scratch()?;
    let io = |e: std::io::Error| ExecutionFailure::new(FailureKind::Crash, format!("scratch dir: {e}"));
    let source_path = dir.path().join(&runner.source_file_name);
    fs::write(&source_path, source).map_err(io)?;
    let out_dir = dir.path().join("out");
    fs::create_dir(&out_dir).map_err(io)?;
    let bytes_path = match bytes {
        Some(b) => {
            let p = dir.path().join("choices.bin");
            fs::write(&p, b).map_err(io)?;
            Some(p)
        }
        None => None,
    };
    let inv = RunnerInvocation { source_path, seed, count, out_dir: out_dir.clone(), bytes_path };
    let done = run_with_timeout(&inv.render(&runner.command), timeout, dir.path())?;
    if !done.status.success() {
        let detail = format!("runner exited with {}: {}", done.status, tail(&done.stderr, 5));
        return Err(ExecutionFailure::new(FailureKind::Crash, detail));
    }
    let mut cases = Vec::new();
    for i in 0..count {
        match fs::read(out_dir.join(case_file_name(i))) {
            Ok(case) => cases.push(case),
            Err(_) => break,
        }
    }
    Ok(cases)
}

fn finish(mut cases: Vec<Vec<u8>>, max_bytes: usize) -> Result<Vec<Vec<u8>>, ExecutionFailure> {
    if cases.is_empty() {
        return Err(ExecutionFailure::new(FailureKind::EmptyOutput, "runner produced no test cases"));
    }
    let mut truncated = 0;
    for c in &mut cases {
        if c.len() > max_bytes {
            c.truncate(max_bytes);
            truncated += 1;
        }
    }
    if truncated > 0 {
        log::warn!("truncated {truncated} test cases to {max_bytes} bytes");
    }
    Ok(cases)
}

fn run_within(
    source: &str,
    runner: &RunnerConfig,
    seed: u64,
    count: usize,
    timeout: Duration,
) -> Result<Vec<Vec<u8>>, ExecutionFailure> {
    let cases = match runner.kind {
        RunnerKind::Builtin => generate_builtin(
            source,
            &runner.constants,
            Choices::Seeded { seed, count },
            Some(Instant::now() + timeout),
        )?,
        RunnerKind::Command => run_command(source, runner, seed, count, None, timeout)?,
    };
    finish(cases, runner.max_testcase_bytes)
}

/// Executes a candidate for `count` test cases.
pub fn run_candidate(source: &str, runner: &RunnerConfig, seed: u64, count: usize) -> Result<Vec<Vec<u8>>, ExecutionFailure> {
    if source.trim().is_empty() {
        return Err(ExecutionFailure::new(FailureKind::Crash, "empty source"));
    }
    run_within(source, runner, seed, count, runner.timeout())
}

/// Executes a candidate once with its choices taken from `bytes`.
pub fn run_candidate_bytes(source: &str, runner: &RunnerConfig, bytes: &[u8]) -> Result<Vec<u8>, ExecutionFailure> {
    if bytes.is_empty() {
        return Err(ExecutionFailure::new(FailureKind::Crash, "byte array must not be empty"));
    }
    let cases = match runner.kind {
        RunnerKind::Builtin => generate_builtin(
            source,
            &runner.constants,
            Choices::Bytes(bytes),
            Some(Instant::now() + runner.timeout()),
        )?,
        RunnerKind::Command => run_command(source, runner, 0, 1, Some(bytes), runner.timeout())?,
    };
    Ok(finish(cases, runner.max_testcase_bytes)?.swap_remove(0))
}

/// Turns test cases into coverage units.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "backend", rename_all = "snake_case", deny_unknown_fields)]
pub enum CoverageBackend {
    /// A system from the built-in registry ([`toy::TOY_SUTS`]).
    Toy { name: String },
    /// Runs `argv` once per test case; `{testcase_path}` is replaced by the
    /// path of the case. Stdout lists covered ids, one per line.
    External { argv: Vec<String>, timeout_secs: f64 },
}

impl Default for CoverageBackend {
    fn default() -> Self {
        CoverageBackend::Toy { name: "balanced_parens".into() }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum HarnessError {
    #[error("unknown toy SUT {0:?}")]
    UnknownToy(String),
    #[error("coverage harness argv must contain {{testcase_path}}")]
    MissingTestcasePath,
    #[error("coverage harness unavailable: {0}")]
    Unavailable(String),
}

impl CoverageBackend {
    pub fn validate(&self) -> Result<(), HarnessError> {
        match self {
            CoverageBackend::Toy { name } if !toy::TOY_SUTS.contains(&name.as_str()) => {
                Err(HarnessError::UnknownToy(name.clone()))
            }
            CoverageBackend::External { argv, .. } if !argv.iter().any(|a| a.contains("{testcase_path}")) => {
                Err(HarnessError::MissingTestcasePath)
            }
            _ => Ok(()),
        }
    }

    /// Coverage of a single test case, or `None` if the harness failed on it.
    pub fn trace(&self, case: &[u8]) -> Result<Option<CoverSet>, HarnessError> {
        match self {
            CoverageBackend::Toy { name } => {
                toy::toy_trace(name, case).map(Some).ok_or_else(|| HarnessError::UnknownToy(name.clone()))
            }
            CoverageBackend::External { argv, timeout_secs } => external_trace(argv, *timeout_secs, case),
        }
    }
}

fn external_trace(argv: &[String], timeout_secs: f64, case: &[u8]) -> Result<Option<CoverSet>, HarnessError> {
    let dir = scratch().map_err(|e| HarnessError::Unavailable(e.detail))?;
    let path = dir.path().join("testcase");
    fs::write(&path, case).map_err(|e| HarnessError::Unavailable(e.to_string()))?;
    let argv: Vec<String> = argv.iter().map(|a| a.replace("{testcase_path}", &path.to_string_lossy())).collect();
    let done = match run_with_timeout(&argv, Duration::from_secs_f64(timeout_secs), dir.path()) {
        Ok(done) => done,
        Err(e) if e.kind == FailureKind::Timeout => return Ok(None),
        Err(e) => return Err(HarnessError::Unavailable(e.detail)),
    };
    if !done.status.success() {
        return Ok(None);
    }
    Ok(parse_unit_list(&String::from_utf8_lossy(&done.stdout)))
}

/// Parses one decimal id per line; blank lines are ignored. `None` if any
/// line is not an id.
pub fn parse_unit_list(text: &str) -> Option<CoverSet> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(|l| l.parse::<CoverageUnit>().ok())
        .collect()
}

/// Union coverage of a batch of test cases, with the number of cases the
/// harness failed on (those are skipped).
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Measurement {
    pub cover: CoverSet,
    pub skipped: usize,
}

pub fn measure_cover_detailed(cases: &[Vec<u8>], backend: &CoverageBackend) -> Result<Measurement, HarnessError> {
    backend.validate()?;
    let distinct: BTreeSet<&[u8]> = cases.iter().map(Vec::as_slice).collect();
    let mut m = Measurement::default();
    for case in distinct {
        match backend.trace(case)? {
            Some(c) => m.cover.union_with(&c),
            None => m.skipped += 1,
        }
    }
    if m.skipped > 0 {
        log::warn!("coverage harness failed on {} test cases", m.skipped);
    }
    Ok(m)
}

/// Union of the per-case covers.
pub fn measure_cover(cases: &[Vec<u8>], backend: &CoverageBackend) -> Result<CoverSet, HarnessError> {
    measure_cover_detailed(cases, backend).map(|m| m.cover)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ApproxCovConfig {
    /// Test cases generated per measurement.
    pub inputs_per_measurement: usize,
    /// Wall-clock cap on generation, in seconds.
    pub time_budget_secs: f64,
}

impl Default for ApproxCovConfig {
    fn default() -> Self {
        ApproxCovConfig { inputs_per_measurement: 1000, time_budget_secs: 60.0 }
    }
}

impl ApproxCovConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.inputs_per_measurement == 0 {
            return Err("approx.inputs_per_measurement must be >= 1".into());
        }
        if !(self.time_budget_secs > 0.0) {
            return Err("approx.time_budget_secs must be > 0".into());
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum ApproxCovError {
    #[error(transparent)]
    Execution(#[from] ExecutionFailure),
    #[error(transparent)]
    Harness(#[from] HarnessError),
}

/// Estimates a generator's cover set from `cfg.inputs_per_measurement`
/// generated cases. Generation is cut off at the smaller of the runner
/// timeout and the time budget; hitting that cap is a timeout failure.
pub fn approx_cov(
    source: &str,
    runner: &RunnerConfig,
    backend: &CoverageBackend,
    cfg: &ApproxCovConfig,
    seed: u64,
) -> Result<CoverSet, ApproxCovError> {
    if source.trim().is_empty() {
        return Err(ExecutionFailure::new(FailureKind::Crash, "empty source").into());
    }
    let timeout = runner.timeout().min(Duration::from_secs_f64(cfg.time_budget_secs));
    let cases = run_within(source, runner, seed, cfg.inputs_per_measurement, timeout)?;
    Ok(measure_cover(&cases, backend)?)
}
