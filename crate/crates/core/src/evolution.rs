//! The evolution loop: mutate the survivors with the code model, measure the
//! mutants, explore them into the fuzzer space and select new survivors.
//!
//! Every iteration draws from its own RNG stream derived from
//! `(rng_seed, iteration)`, so a run resumed from a checkpoint continues
//! exactly as the uninterrupted run would have.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::harness::{self, ApproxCovConfig, CoverageBackend, RunnerConfig};
use crate::lattice::{CoverSet, FuzzerSpace, LatticeError, Mutant, NodeId, Provenance};
use crate::llm::{self, LlmBackend, LlmConfig};
use crate::mutation::{self, MutationKind, MutationRequest, PromptContext};
use crate::selection::{self, SelectionConfig};
use crate::toy;
use crate::util::mix64;

/// Ablation variants. `NoFs` replaces exploration and max-cover selection
/// with keeping the largest covers; the others disable one mutator.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum Ablation {
    #[default]
    #[serde(rename = "none")]
    None,
    #[serde(rename = "noFS")]
    NoFs,
    #[serde(rename = "noSP")]
    NoSp,
    #[serde(rename = "noCP")]
    NoCp,
    #[serde(rename = "noIN")]
    NoIn,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvolutionConfig {
    pub iterations: u32,
    pub mutants_per_iteration: usize,
    pub survivors: usize,
    pub rng_seed: u64,
    pub enabled_mutators: Vec<MutationKind>,
    pub ablation: Ablation,
    /// Longest span removed by infilling.
    pub infill_max_lines: usize,
    /// Random restarts of the survivor search.
    pub selection_restarts: usize,
    /// Replaces `<FORMAT>` in the seed template and names the format in prompts.
    pub format: String,
    pub format_hint: Option<String>,
    pub seed_template: String,
    pub sut: CoverageBackend,
    pub runner: RunnerConfig,
    pub approx: ApproxCovConfig,
    pub llm: LlmConfig,
}

impl Default for EvolutionConfig {
    fn default() -> Self {
        EvolutionConfig {
            iterations: 50,
            mutants_per_iteration: 200,
            survivors: 10,
            rng_seed: 0,
            enabled_mutators: MutationKind::ALL.to_vec(),
            ablation: Ablation::None,
            infill_max_lines: 3,
            selection_restarts: SelectionConfig::default().restarts,
            format: "text".into(),
            format_hint: None,
            seed_template: toy::programs::SEED_TEMPLATE.into(),
            sut: CoverageBackend::default(),
            runner: RunnerConfig::default(),
            approx: ApproxCovConfig::default(),
            llm: LlmConfig::default(),
        }
    }
}

impl EvolutionConfig {
    /// Small settings for the built-in balanced-parenthesis SUT with the mock
    /// model.
    pub fn toy() -> Self {
        EvolutionConfig {
            iterations: 30,
            mutants_per_iteration: 20,
            survivors: 3,
            format: "parens".into(),
            format_hint: Some("Inputs are strings over the characters (, ) and *.".into()),
            runner: RunnerConfig::toy(),
            approx: ApproxCovConfig { inputs_per_measurement: 200, ..ApproxCovConfig::default() },
            ..EvolutionConfig::default()
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.iterations == 0 {
            return Err("evolution.iterations must be >= 1".into());
        }
        if self.survivors == 0 || self.survivors > self.mutants_per_iteration {
            return Err("evolution.survivors must lie in 1..=evolution.mutants_per_iteration".into());
        }
        if self.selection_restarts == 0 {
            return Err("selection.restarts must be >= 1".into());
        }
        if self.infill_max_lines == 0 {
            return Err("evolution.infill_max_lines must be >= 1".into());
        }
        if self.mutators().is_empty() {
            return Err("evolution.enabled_mutators leaves no mutator enabled".into());
        }
        self.sut.validate().map_err(|e| e.to_string())?;
        self.runner.validate()?;
        self.approx.validate()?;
        self.llm.validate()
    }

    /// Enabled mutators in rotation order, after applying the ablation.
    pub fn mutators(&self) -> Vec<MutationKind> {
        let off = match self.ablation {
            Ablation::NoSp => Some(MutationKind::Splicing),
            Ablation::NoCp => Some(MutationKind::Completion),
            Ablation::NoIn => Some(MutationKind::Infilling),
            Ablation::None | Ablation::NoFs => None,
        };
        let on: BTreeSet<MutationKind> = self.enabled_mutators.iter().copied().collect();
        MutationKind::ALL.into_iter().filter(|k| on.contains(k) && Some(*k) != off).collect()
    }

    fn prompt_context(&self) -> PromptContext {
        PromptContext { format: self.format.clone(), format_hint: self.format_hint.clone() }
    }

    /// The seed generator with the format name substituted.
    pub fn seed_source(&self) -> String {
        self.seed_template.replace("<FORMAT>", &self.format)
    }

    /// Hash of everything that affects the trajectory. The iteration count
    /// and logging switches are left out so a run can be extended.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.iterations = 0;
        c.llm.log_requests = false;
        let json = serde_json::to_string(&c).expect("config serializes");
        Sha256::digest(json.as_bytes()).iter().fold(String::new(), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        })
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrendRow {
    pub iteration: u32,
    pub survivor_union_size: usize,
    pub mutants_valid: usize,
    pub mutants_admitted: usize,
    pub mutants_discarded_weak: usize,
    pub mutants_invalid: usize,
}

pub const TREND_HEADER: &str =
    "iteration,survivor_union_size,mutants_valid,mutants_admitted,mutants_discarded_weak,mutants_invalid";

pub fn trend_csv(rows: &[TrendRow]) -> String {
    let mut s = format!("{TREND_HEADER}\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{}",
            r.iteration,
            r.survivor_union_size,
            r.mutants_valid,
            r.mutants_admitted,
            r.mutants_discarded_weak,
            r.mutants_invalid
        );
    }
    s
}

pub fn parse_trend_csv(text: &str) -> Result<Vec<TrendRow>, String> {
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some(TREND_HEADER) {
        return Err("trend.csv: unexpected header".into());
    }
    lines
        .filter(|l| !l.trim().is_empty())
        .enumerate()
        .map(|(i, l)| {
            let f: Vec<usize> = l
                .split(',')
                .map(|x| x.trim().parse())
                .collect::<Result<_, _>>()
                .map_err(|_| format!("trend.csv line {}: not a number", i + 2))?;
            match f[..] {
                [it, u, v, a, w, inv] => Ok(TrendRow {
                    iteration: it as u32,
                    survivor_union_size: u,
                    mutants_valid: v,
                    mutants_admitted: a,
                    mutants_discarded_weak: w,
                    mutants_invalid: inv,
                }),
                _ => Err(format!("trend.csv line {}: expected 6 columns", i + 2)),
            }
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvolutionState {
    pub iteration: u32,
    pub rng_seed: u64,
    pub space: FuzzerSpace,
    pub survivors: Vec<NodeId>,
    pub trend: Vec<TrendRow>,
}

impl EvolutionState {
    pub fn survivor_union(&self) -> CoverSet {
        self.space.union_cover(&self.survivors).expect("survivors are nodes of the space")
    }
}

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Checkpoint {
    version: u32,
    config_hash: String,
    state: EvolutionState,
}

#[derive(Debug, Error)]
pub enum EvolutionError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("seed fuzzer failed: {0}")]
    Seed(String),
    #[error("checkpoint config hash {found} does not match current config hash {expected}")]
    HashMismatch { expected: String, found: String },
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("I/O error on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Lattice(#[from] LatticeError),
    #[error("coverage measurement failed: {0}")]
    Harness(String),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> EvolutionError + '_ {
    move |source| EvolutionError::Io { path: path.to_path_buf(), source }
}

fn measure_seed(source: u64, iteration: u32, index: usize) -> u64 {
    mix64(mix64(source ^ 0x0c07_e5e7, iteration as u64), index as u64)
}

/// Measures the given seed generators and starts a space with them.
pub fn init_with_seeds(seeds: &[String], cfg: &EvolutionConfig) -> Result<EvolutionState, EvolutionError> {
    cfg.validate().map_err(EvolutionError::Config)?;
    let mut space = FuzzerSpace::new();
    let mut survivors = Vec::new();
    for (i, source) in seeds.iter().enumerate() {
        let cover = harness::approx_cov(source, &cfg.runner, &cfg.sut, &cfg.approx, measure_seed(cfg.rng_seed, 0, i))
            .map_err(|e| EvolutionError::Seed(e.to_string()))?;
        let id = space.add_seed(source.clone(), cover);
        if !survivors.contains(&id) {
            survivors.push(id);
        }
    }
    survivors.sort();
    Ok(EvolutionState { iteration: 0, rng_seed: cfg.rng_seed, space, survivors, trend: Vec::new() })
}

/// Starts a run from the configured seed template.
pub fn init(cfg: &EvolutionConfig) -> Result<EvolutionState, EvolutionError> {
    init_with_seeds(&[cfg.seed_source()], cfg)
}

/// Plans this iteration's mutation requests. Index `i` uses mutator
/// `i mod k` over the enabled mutators.
pub fn plan_requests(state: &EvolutionState, cfg: &EvolutionConfig) -> Vec<Result<MutationRequest, String>> {
    let iteration = state.iteration + 1;
    let mut rng = ChaCha8Rng::seed_from_u64(mix64(state.rng_seed, iteration as u64));
    let parents: Vec<_> = state.survivors.iter().filter_map(|id| state.space.get(*id)).collect();
    let kinds = cfg.mutators();
    let ctx = cfg.prompt_context();
    (0..cfg.mutants_per_iteration)
        .map(|i| {
            mutation::plan_mutation(i, &parents, &kinds, cfg.infill_max_lines, &ctx, &mut rng).map_err(|e| e.to_string())
        })
        .collect()
}

/// What happened to each mutant of an iteration.
#[derive(Clone, Debug)]
pub struct StepReport {
    pub row: TrendRow,
    pub mutants: Vec<Mutant>,
    pub admitted: Vec<NodeId>,
}

/// One iteration.
pub fn step(state: &mut EvolutionState, cfg: &EvolutionConfig, backend: &dyn LlmBackend) -> Result<StepReport, EvolutionError> {
    let requests = plan_requests(state, cfg);
    step_with_requests(state, cfg, backend, requests)
}

/// One iteration over explicitly given requests. A request that could not
/// be planned, prompted or answered counts as an invalid mutant.
pub fn step_with_requests(
    state: &mut EvolutionState,
    cfg: &EvolutionConfig,
    backend: &dyn LlmBackend,
    requests: Vec<Result<MutationRequest, String>>,
) -> Result<StepReport, EvolutionError> {
    let iteration = state.iteration + 1;
    let nonce_base = mix64(state.rng_seed ^ 0x11_4d, iteration as u64);
    let budget = cfg.llm.prompt_budget();

    let mut prompts = Vec::new();
    let mut slots: Vec<Result<usize, String>> = Vec::with_capacity(requests.len());
    for (i, req) in requests.iter().enumerate() {
        let slot = req.as_ref().map_err(Clone::clone).and_then(|r| {
            mutation::fit_prompt(r, budget).map_err(|e| e.to_string())
        });
        slots.push(slot.map(|p| {
            prompts.push((p, mix64(nonce_base, i as u64)));
            prompts.len() - 1
        }));
    }
    let answers = llm::query_batch(backend, &prompts, cfg.llm.max_concurrent_requests);

    let candidates: Vec<Result<String, String>> = requests
        .iter()
        .zip(&slots)
        .map(|(req, slot)| {
            let req = req.as_ref().map_err(Clone::clone)?;
            let at = *slot.as_ref().map_err(Clone::clone)?;
            let text = answers[at].as_ref().map_err(|e| format!("llm: {e}"))?;
            if text.trim().is_empty() {
                return Err("llm returned empty text".into());
            }
            Ok(req.assemble(text))
        })
        .collect();

    let covers: Vec<Result<CoverSet, String>> = candidates
        .par_iter()
        .enumerate()
        .map(|(i, c)| {
            let src = c.as_ref().map_err(Clone::clone)?;
            harness::approx_cov(src, &cfg.runner, &cfg.sut, &cfg.approx, measure_seed(state.rng_seed, iteration, i))
                .map_err(|e| e.to_string())
        })
        .collect();

    let mut mutants = Vec::with_capacity(requests.len());
    for ((req, cand), cover) in requests.iter().zip(candidates).zip(covers) {
        let provenance = match req {
            Ok(r) => r.provenance(),
            Err(_) => Provenance::Seed,
        };
        mutants.push(Mutant { source: cand.unwrap_or_default(), provenance, outcome: cover });
    }
    let valid = mutants.iter().filter(|m| m.outcome.is_ok()).count();
    let invalid = mutants.len() - valid;

    let (admitted, weak, pool) = match cfg.ablation {
        Ablation::NoFs => {
            let mut fresh = Vec::new();
            let mut pool = BTreeSet::new();
            for m in &mutants {
                if let Ok(cover) = &m.outcome {
                    let (id, new) = state.space.insert(m.source.clone(), m.provenance.clone(), cover.clone(), iteration)?;
                    if new {
                        fresh.push(id);
                    }
                    pool.insert(id);
                }
            }
            let weak = valid - fresh.len();
            (fresh, weak, pool)
        }
        _ => {
            let report = state.space.explore(mutants.clone(), iteration)?;
            let weak = report.weak_count();
            let pool: BTreeSet<NodeId> = state.survivors.iter().chain(&report.admitted).copied().collect();
            (report.admitted, weak, pool)
        }
    };

    if !pool.is_empty() && (cfg.ablation != Ablation::NoFs || valid > 0) {
        let nodes: Vec<(NodeId, &CoverSet)> = pool
            .iter()
            .map(|id| state.space.node(*id).map(|n| (*id, &n.cover)))
            .collect::<Result<_, _>>()?;
        state.survivors = if cfg.ablation == Ablation::NoFs {
            selection::top_k_by_size(&nodes, cfg.survivors)
        } else if nodes.len() <= cfg.survivors {
            if nodes.len() < cfg.survivors {
                log::warn!("iteration {iteration}: only {} candidates for {} survivor slots", nodes.len(), cfg.survivors);
            }
            pool.into_iter().collect()
        } else {
            let sel = SelectionConfig {
                n_survivors: cfg.survivors,
                restarts: cfg.selection_restarts,
                rng_seed: mix64(state.rng_seed ^ 0x5e_1ec7, iteration as u64),
            };
            selection::approx_max_with_stats(&nodes, &sel, Some(&state.survivors))
                .map_err(|e| EvolutionError::Config(e.to_string()))?
                .0
                .selected
        };
    }

    let row = TrendRow {
        iteration,
        survivor_union_size: state.survivor_union().len(),
        mutants_valid: valid,
        mutants_admitted: admitted.len(),
        mutants_discarded_weak: weak,
        mutants_invalid: invalid,
    };
    log::info!(
        "iteration {iteration}: union {} | valid {valid} admitted {} weak {weak} invalid {invalid}",
        row.survivor_union_size,
        row.mutants_admitted
    );
    state.trend.push(row.clone());
    state.iteration = iteration;
    Ok(StepReport { row, mutants, admitted })
}

/// Output directory of a run.
pub struct RunDir {
    pub path: PathBuf,
}

impl RunDir {
    pub fn new(path: impl Into<PathBuf>) -> Result<Self, EvolutionError> {
        let path = path.into();
        fs::create_dir_all(&path).map_err(io_err(&path))?;
        Ok(RunDir { path })
    }

    pub fn checkpoint_path(&self, iteration: u32) -> PathBuf {
        self.path.join(format!("state_{iteration}.json"))
    }

    pub fn save(&self, state: &EvolutionState, cfg: &EvolutionConfig) -> Result<(), EvolutionError> {
        let cp = Checkpoint { version: CHECKPOINT_VERSION, config_hash: cfg.hash(), state: state.clone() };
        let path = self.checkpoint_path(state.iteration);
        let json = serde_json::to_string_pretty(&cp).map_err(|e| EvolutionError::Checkpoint(e.to_string()))?;
        fs::write(&path, json).map_err(io_err(&path))?;
        let trend = self.path.join("trend.csv");
        fs::write(&trend, trend_csv(&state.trend)).map_err(io_err(&trend))
    }

    /// Highest-numbered checkpoint in the directory.
    pub fn latest(&self) -> Option<u32> {
        fs::read_dir(&self.path)
            .ok()?
            .filter_map(|e| {
                let name = e.ok()?.file_name().into_string().ok()?;
                name.strip_prefix("state_")?.strip_suffix(".json")?.parse().ok()
            })
            .max()
    }

    pub fn load(&self, iteration: u32, cfg: &EvolutionConfig) -> Result<EvolutionState, EvolutionError> {
        let path = self.checkpoint_path(iteration);
        let text = fs::read_to_string(&path).map_err(io_err(&path))?;
        let cp: Checkpoint = serde_json::from_str(&text).map_err(|e| EvolutionError::Checkpoint(e.to_string()))?;
        if cp.version != CHECKPOINT_VERSION {
            return Err(EvolutionError::Checkpoint(format!("unsupported version {}", cp.version)));
        }
        let expected = cfg.hash();
        if cp.config_hash != expected {
            return Err(EvolutionError::HashMismatch { expected, found: cp.config_hash });
        }
        let mut state = cp.state;
        state.space.reindex();
        Ok(state)
    }

    /// Writes the survivors' sources under `fuzzers/` and the manifest
    /// `fuzzers.json`.
    pub fn export(&self, state: &EvolutionState) -> Result<Vec<ExportedFuzzer>, EvolutionError> {
        let dir = self.path.join("fuzzers");
        fs::create_dir_all(&dir).map_err(io_err(&dir))?;
        let mut manifest = Vec::new();
        for id in &state.survivors {
            let node = state.space.node(*id)?;
            let file = format!("fuzzers/{id}.py");
            let path = self.path.join(&file);
            fs::write(&path, &node.source).map_err(io_err(&path))?;
            manifest.push(ExportedFuzzer {
                id: *id,
                file,
                provenance: node.provenance.clone(),
                iteration_born: node.iteration_born,
                cover_size: node.cover.len(),
                cover: node.cover.clone(),
            });
        }
        let path = self.path.join("fuzzers.json");
        let json = serde_json::to_string_pretty(&manifest).map_err(|e| EvolutionError::Checkpoint(e.to_string()))?;
        fs::write(&path, json + "\n").map_err(io_err(&path))?;
        Ok(manifest)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExportedFuzzer {
    pub id: NodeId,
    /// Path relative to the run directory.
    pub file: String,
    pub provenance: Provenance,
    pub iteration_born: u32,
    pub cover_size: usize,
    pub cover: CoverSet,
}

/// Runs (or resumes) the loop up to `cfg.iterations`, checkpointing after
/// every iteration when `out` is given.
pub fn run(
    cfg: &EvolutionConfig,
    backend: &dyn LlmBackend,
    out: Option<&RunDir>,
    resume: bool,
) -> Result<EvolutionState, EvolutionError> {
    cfg.validate().map_err(EvolutionError::Config)?;
    let mut state = match (out, resume) {
        (Some(dir), true) => match dir.latest() {
            Some(k) => {
                log::info!("resuming from {}", dir.checkpoint_path(k).display());
                dir.load(k, cfg)?
            }
            None => return Err(EvolutionError::Checkpoint(format!("no checkpoint in {}", dir.path.display()))),
        },
        _ => {
            let s = init(cfg)?;
            if let Some(dir) = out {
                dir.save(&s, cfg)?;
            }
            s
        }
    };
    while state.iteration < cfg.iterations {
        step(&mut state, cfg, backend)?;
        if let Some(dir) = out {
            dir.save(&state, cfg)?;
        }
    }
    if let Some(dir) = out {
        dir.export(&state)?;
    }
    Ok(state)
}

/// How much [`produce`] should generate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ProduceBudget {
    /// Exactly this many cases in total, split round-robin.
    Count(usize),
    /// Rounds of `batch` cases per fuzzer until the time is up.
    Duration { limit: Duration, batch: usize },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusEntry {
    pub file: String,
    pub fuzzer: String,
    pub seed: u64,
    pub index: usize,
}

#[derive(Clone, Debug, Default)]
pub struct ProduceReport {
    pub entries: Vec<CorpusEntry>,
    /// Fuzzers whose runner failed, with the failure.
    pub failures: Vec<(String, String)>,
}

/// Runs the fuzzers round-robin and writes the cases into `out` with a
/// `manifest.json`. A failing fuzzer is logged and skipped.
pub fn produce(
    fuzzers: &[(String, String)],
    runner: &RunnerConfig,
    budget: ProduceBudget,
    seed: u64,
    out: &Path,
) -> Result<ProduceReport, EvolutionError> {
    fs::create_dir_all(out).map_err(io_err(out))?;
    let mut report = ProduceReport::default();
    let write = |report: &mut ProduceReport, name: &str, seed: u64, cases: Vec<Vec<u8>>| -> Result<(), EvolutionError> {
        for (index, case) in cases.into_iter().enumerate() {
            let file = harness::case_file_name(report.entries.len());
            let path = out.join(&file);
            fs::write(&path, case).map_err(io_err(&path))?;
            report.entries.push(CorpusEntry { file, fuzzer: name.to_string(), seed, index });
        }
        Ok(())
    };
    let n = fuzzers.len().max(1);
    match budget {
        ProduceBudget::Count(total) => {
            let runs: Vec<_> = fuzzers
                .iter()
                .enumerate()
                .map(|(f, (name, src))| {
                    let count = total / n + usize::from(f < total % n);
                    let s = mix64(seed, f as u64);
                    (name, s, if count == 0 { Ok(Vec::new()) } else { harness::run_candidate(src, runner, s, count) })
                })
                .collect();
            // Interleave so that case k comes from fuzzer k mod n.
            let mut queues: Vec<_> = Vec::new();
            for (name, s, r) in runs {
                match r {
                    Ok(cases) => queues.push((name, s, cases.into_iter().enumerate().collect::<Vec<_>>().into_iter())),
                    Err(e) => {
                        log::warn!("fuzzer {name} failed: {e}");
                        report.failures.push((name.clone(), e.to_string()));
                    }
                }
            }
            loop {
                let mut any = false;
                for (name, s, q) in &mut queues {
                    if let Some((index, case)) = q.next() {
                        any = true;
                        let file = harness::case_file_name(report.entries.len());
                        let path = out.join(&file);
                        fs::write(&path, case).map_err(io_err(&path))?;
                        report.entries.push(CorpusEntry { file, fuzzer: name.to_string(), seed: *s, index });
                    }
                }
                if !any {
                    break;
                }
            }
        }
        ProduceBudget::Duration { limit, batch } => {
            let start = Instant::now();
            let mut alive: Vec<bool> = vec![true; fuzzers.len()];
            let mut round = 0u64;
            while start.elapsed() < limit && alive.iter().any(|a| *a) {
                for (f, (name, src)) in fuzzers.iter().enumerate() {
                    if !alive[f] || start.elapsed() >= limit {
                        continue;
                    }
                    let s = mix64(mix64(seed, f as u64), round);
                    match harness::run_candidate(src, runner, s, batch.max(1)) {
                        Ok(cases) => write(&mut report, name, s, cases)?,
                        Err(e) => {
                            log::warn!("fuzzer {name} failed: {e}");
                            report.failures.push((name.clone(), e.to_string()));
                            alive[f] = false;
                        }
                    }
                }
                round += 1;
            }
        }
    }
    let path = out.join("manifest.json");
    let json = serde_json::to_string_pretty(&report.entries).map_err(|e| EvolutionError::Checkpoint(e.to_string()))?;
    fs::write(&path, json + "\n").map_err(io_err(&path))?;
    Ok(report)
}

/// Greedy corpus distillation. Returns the indices of the kept cases in
/// ascending order: repeatedly the case adding the most uncovered units,
/// ties to the smaller case and then the lower index. Identical cases are
/// kept at most once.
pub fn minimize(cases: &[Vec<u8>], backend: &CoverageBackend) -> Result<Vec<usize>, MinimizeError> {
    let mut covers: Vec<(usize, CoverSet)> = Vec::new();
    let mut seen = BTreeSet::new();
    for (i, case) in cases.iter().enumerate() {
        if !seen.insert(case.as_slice()) {
            continue;
        }
        match backend.trace(case) {
            Ok(Some(c)) => covers.push((i, c)),
            Ok(None) => log::warn!("coverage harness failed on case {i}; skipped"),
            Err(e) => return Err(MinimizeError { processed: i, detail: e.to_string() }),
        }
    }
    let mut covered = CoverSet::new();
    let mut kept = Vec::new();
    loop {
        let best = covers
            .iter()
            .map(|(i, c)| (c.difference(&covered).len(), *i, c))
            .filter(|(gain, _, _)| *gain > 0)
            .min_by(|a, b| b.0.cmp(&a.0).then(cases[a.1].len().cmp(&cases[b.1].len())).then(a.1.cmp(&b.1)));
        match best {
            Some((_, i, c)) => {
                covered.union_with(c);
                kept.push(i);
            }
            None => break,
        }
    }
    kept.sort_unstable();
    Ok(kept)
}

#[derive(Debug, Error)]
#[error("coverage backend failed after {processed} cases: {detail}")]
pub struct MinimizeError {
    pub processed: usize,
    pub detail: String,
}

/// Minimizes a corpus directory into `out`, copying the kept files.
pub fn minimize_dir(corpus: &Path, out: &Path, backend: &CoverageBackend) -> Result<Vec<String>, EvolutionError> {
    let mut names: Vec<String> = fs::read_dir(corpus)
        .map_err(io_err(corpus))?
        .filter_map(|e| e.ok())
        .filter(|e| e.path().is_file())
        .filter_map(|e| e.file_name().into_string().ok())
        .filter(|n| n != "manifest.json")
        .collect();
    names.sort();
    let cases: Vec<Vec<u8>> = names
        .iter()
        .map(|n| fs::read(corpus.join(n)).map_err(io_err(&corpus.join(n))))
        .collect::<Result<_, _>>()?;
    let kept = minimize(&cases, backend).map_err(|e| EvolutionError::Harness(e.to_string()))?;
    fs::create_dir_all(out).map_err(io_err(out))?;
    let mut out_names = Vec::new();
    for i in kept {
        let path = out.join(&names[i]);
        fs::write(&path, &cases[i]).map_err(io_err(&path))?;
        out_names.push(names[i].clone());
    }
    Ok(out_names)
}
