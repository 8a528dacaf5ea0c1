//! Byte-array parameterized generation with coverage feedback.
//!
//! A generator's random choices are read from a caller-provided byte array
//! (wrapping around at the end), so a test case is a pure function of the
//! generator and the bytes. [`zest_loop`] evolves a fixed-size population of
//! byte arrays: the oldest survivor is mutated, and a mutant whose case
//! reaches a unit no current survivor reaches replaces the oldest survivor.

use std::collections::VecDeque;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use crate::genlang::ByteChoiceStream;
use crate::harness::{self, CoverageBackend, ExecutionFailure, HarnessError, RunnerConfig};
use crate::lattice::CoverSet;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ByteMutation {
    /// Per-byte flip probability; `None` means `1 / len`.
    pub flip_rate: Option<f64>,
    pub insert_prob: f64,
    pub delete_prob: f64,
    /// Largest chunk inserted or deleted at once.
    pub max_chunk: usize,
    pub max_len: usize,
}

impl Default for ByteMutation {
    fn default() -> Self {
        ByteMutation { flip_rate: None, insert_prob: 0.1, delete_prob: 0.1, max_chunk: 4, max_len: 4096 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ZestConfig {
    pub population: usize,
    /// Length of the initial random byte array.
    pub initial_len: usize,
    pub mutation: ByteMutation,
    pub rng_seed: u64,
}

impl Default for ZestConfig {
    fn default() -> Self {
        ZestConfig { population: 3, initial_len: 64, mutation: ByteMutation::default(), rng_seed: 0 }
    }
}

impl ZestConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.population == 0 {
            return Err("zest.population must be >= 1".into());
        }
        if self.initial_len == 0 || self.initial_len > self.mutation.max_len {
            return Err("zest.initial_len must lie in 1..=zest.mutation.max_len".into());
        }
        let m = &self.mutation;
        let prob = |p: f64| (0.0..=1.0).contains(&p);
        if !prob(m.insert_prob) || !prob(m.delete_prob) || !m.flip_rate.is_none_or(prob) {
            return Err("zest.mutation probabilities must lie in [0, 1]".into());
        }
        if m.max_chunk == 0 || m.max_len == 0 {
            return Err("zest.mutation.max_chunk and max_len must be >= 1".into());
        }
        Ok(())
    }
}

/// Generates the test case selected by `bytes`.
pub fn replay(source: &str, bytes: &[u8], runner: &RunnerConfig) -> Result<Vec<u8>, ExecutionFailure> {
    harness::run_candidate_bytes(source, runner, bytes)
}

/// Flips bytes, then maybe inserts and maybe deletes a chunk. The result
/// has between 1 and `max_len` bytes.
pub fn mutate_bytes<R: Rng>(bytes: &[u8], m: &ByteMutation, rng: &mut R) -> Vec<u8> {
    let mut out = bytes.to_vec();
    if out.is_empty() {
        out.push(rng.gen());
    }
    let rate = m.flip_rate.unwrap_or(1.0 / out.len() as f64);
    for b in &mut out {
        if rng.gen_bool(rate) {
            *b = rng.gen();
        }
    }
    if rng.gen_bool(m.insert_prob) {
        let n = rng.gen_range(1..=m.max_chunk);
        let at = rng.gen_range(0..=out.len());
        let chunk: Vec<u8> = (0..n).map(|_| rng.gen()).collect();
        out.splice(at..at, chunk);
    }
    if rng.gen_bool(m.delete_prob) && out.len() > 1 {
        let n = rng.gen_range(1..=m.max_chunk).min(out.len() - 1);
        let at = rng.gen_range(0..=out.len() - n);
        out.drain(at..at + n);
    }
    out.truncate(m.max_len.max(1));
    out
}

/// Whether `cover` reaches a unit absent from every survivor cover.
pub fn looks_good<'a>(cover: &CoverSet, survivor_covers: impl IntoIterator<Item = &'a CoverSet>) -> bool {
    let mut union = CoverSet::new();
    for c in survivor_covers {
        union.union_with(c);
    }
    cover.has_units_outside(&union)
}

/// A FIFO population of byte arrays with their covers.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Population {
    pub members: VecDeque<(Vec<u8>, CoverSet)>,
}

impl Population {
    pub fn union(&self) -> CoverSet {
        let mut u = CoverSet::new();
        for (_, c) in &self.members {
            u.union_with(c);
        }
        u
    }

    /// Admits the mutant in place of the oldest member when it looks good.
    pub fn offer(&mut self, bytes: Vec<u8>, cover: CoverSet) -> bool {
        if !looks_good(&cover, self.members.iter().map(|(_, c)| c)) {
            return false;
        }
        self.members.pop_front();
        self.members.push_back((bytes, cover));
        true
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ZestOutcome {
    pub survivors: Vec<Vec<u8>>,
    /// After each round, the size of the union of every cover admitted so
    /// far. Evicting the oldest survivor can shrink the live union, so the
    /// record keeps what the population has ever reached.
    pub covs: Vec<usize>,
    /// Every admitted test case, starting with the initial one.
    pub corpus: Vec<Vec<u8>>,
    pub admitted: usize,
    pub failed: usize,
}

#[derive(Debug, Error)]
pub enum ZestError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("initial byte array failed: {0}")]
    Initial(ExecutionFailure),
    #[error(transparent)]
    Harness(#[from] HarnessError),
}

/// Runs `budget` rounds. The population starts as `population` copies of
/// one random byte array.
pub fn zest_loop(
    source: &str,
    cfg: &ZestConfig,
    runner: &RunnerConfig,
    backend: &CoverageBackend,
    budget: usize,
) -> Result<ZestOutcome, ZestError> {
    cfg.validate().map_err(ZestError::Config)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let initial: Vec<u8> = (0..cfg.initial_len).map(|_| rng.gen()).collect();
    let case = replay(source, &initial, runner).map_err(ZestError::Initial)?;
    let cover = harness::measure_cover(std::slice::from_ref(&case), backend)?;
    let mut recorded = cover.clone();
    let mut pop = Population { members: std::iter::repeat_n((initial, cover), cfg.population).collect() };
    let mut out = ZestOutcome { survivors: Vec::new(), covs: Vec::with_capacity(budget), corpus: vec![case], admitted: 0, failed: 0 };

    for _ in 0..budget {
        let selected = &pop.members[0].0;
        let mutant = mutate_bytes(selected, &cfg.mutation, &mut rng);
        match replay(source, &mutant, runner) {
            Ok(case) => {
                let cover = harness::measure_cover(std::slice::from_ref(&case), backend)?;
                if pop.offer(mutant, cover.clone()) {
                    recorded.union_with(&cover);
                    out.admitted += 1;
                    out.corpus.push(case);
                }
            }
            Err(e) => {
                log::debug!("zest mutant failed: {e}");
                out.failed += 1;
            }
        }
        out.covs.push(recorded.len());
    }
    out.survivors = pop.members.into_iter().map(|(b, _)| b).collect();
    Ok(out)
}

/// Writes the corpus as `000000.bin`, ... into `dir`.
pub fn write_corpus(corpus: &[Vec<u8>], dir: &Path) -> std::io::Result<()> {
    fs::create_dir_all(dir)?;
    for (i, case) in corpus.iter().enumerate() {
        fs::write(dir.join(harness::case_file_name(i)), case)?;
    }
    Ok(())
}
