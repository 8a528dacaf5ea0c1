//! Max-cover survivor selection.
//!
//! Picking the `N` candidates whose cover sets have the largest union is a
//! maximum-coverage problem. [`approx_max`] runs a substitution local search
//! ([`greedy_max`]) from several random starts and keeps the best result;
//! [`brute_force_max`] enumerates every `N`-subset and serves as the oracle
//! for small instances.

use std::collections::BTreeMap;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lattice::{CoverSet, CoverageUnit};
use crate::util::mix64;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SelectionConfig {
    pub n_survivors: usize,
    pub restarts: usize,
    pub rng_seed: u64,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        SelectionConfig {
            n_survivors: 10,
            restarts: 10,
            rng_seed: 0,
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SelectionError {
    #[error("pool has {pool} candidates but {wanted} survivors were requested")]
    PoolTooSmall { pool: usize, wanted: usize },
    #[error("n_survivors and restarts must be at least 1")]
    InvalidConfig,
    #[error("exhaustive search over C({m}, {n}) subsets exceeds the 10^6 bound")]
    TooManySubsets { m: usize, n: usize },
    #[error("candidate ids must be unique")]
    DuplicateId,
}

/// Result of a selection: ids in ascending order and the size of the union
/// of their covers.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Selection<K> {
    pub selected: Vec<K>,
    pub union_size: usize,
}

/// Bookkeeping for the number of substitution evaluations performed.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct SearchStats {
    pub evaluations: u64,
    pub substitutions: u64,
    pub attempts: u64,
}

#[derive(Clone, Debug)]
struct Bits(Vec<u64>);

impl Bits {
    fn zeros(width: usize) -> Self {
        Bits(vec![0; width.div_ceil(64)])
    }

    fn set(&mut self, i: usize) {
        self.0[i / 64] |= 1 << (i % 64);
    }
}

/// Pool with cover sets re-indexed onto a dense universe.
struct DensePool<K> {
    ids: Vec<K>,
    sets: Vec<Bits>,
    words: usize,
}

impl<K: Ord + Clone> DensePool<K> {
    fn new(pool: &[(K, &CoverSet)]) -> Result<Self, SelectionError> {
        let mut order: Vec<usize> = (0..pool.len()).collect();
        order.sort_by(|&a, &b| pool[a].0.cmp(&pool[b].0));
        if order.windows(2).any(|w| pool[w[0]].0 == pool[w[1]].0) {
            return Err(SelectionError::DuplicateId);
        }
        let mut universe: BTreeMap<CoverageUnit, usize> = BTreeMap::new();
        for (_, cover) in pool {
            for u in cover.iter() {
                let next = universe.len();
                universe.entry(u).or_insert(next);
            }
        }
        let width = universe.len().max(1);
        let sets = order
            .iter()
            .map(|&i| {
                let mut b = Bits::zeros(width);
                for u in pool[i].1.iter() {
                    b.set(universe[&u]);
                }
                b
            })
            .collect();
        Ok(DensePool {
            ids: order.iter().map(|&i| pool[i].0.clone()).collect(),
            sets,
            words: width.div_ceil(64),
        })
    }

    fn len(&self) -> usize {
        self.ids.len()
    }

    fn union_size(&self, members: &[usize]) -> usize {
        let mut acc = vec![0u64; self.words];
        for &m in members {
            for (a, w) in acc.iter_mut().zip(&self.sets[m].0) {
                *a |= w;
            }
        }
        acc.iter().map(|w| w.count_ones() as usize).sum()
    }

    fn selection(&self, mut members: Vec<usize>) -> Selection<K> {
        members.sort_unstable();
        Selection {
            union_size: self.union_size(&members),
            selected: members.into_iter().map(|m| self.ids[m].clone()).collect(),
        }
    }

    /// First-improvement substitution search from `start` (dense indices).
    ///
    /// Members are scanned in ascending id order, and for each member the
    /// non-members in ascending id order; the first swap that strictly grows
    /// the union is applied and the scan moves on to the next member. Passes
    /// repeat until one completes without a swap.
    fn local_search(&self, start: Vec<usize>, stats: &mut SearchStats) -> Vec<usize> {
        let mut members = start;
        members.sort_unstable();
        let mut in_set = vec![false; self.len()];
        for &m in &members {
            in_set[m] = true;
        }
        stats.attempts += 1;
        loop {
            let mut changed = false;
            for slot in 0..members.len() {
                // Units covered by every other member.
                let mut rest = vec![0u64; self.words];
                for (j, &m) in members.iter().enumerate() {
                    if j != slot {
                        for (a, w) in rest.iter_mut().zip(&self.sets[m].0) {
                            *a |= w;
                        }
                    }
                }
                let rest_size: usize = rest.iter().map(|w| w.count_ones() as usize).sum();
                let current = rest_size + gain(&rest, &self.sets[members[slot]]);
                for cand in 0..self.len() {
                    if in_set[cand] {
                        continue;
                    }
                    stats.evaluations += 1;
                    if rest_size + gain(&rest, &self.sets[cand]) > current {
                        in_set[members[slot]] = false;
                        in_set[cand] = true;
                        members[slot] = cand;
                        stats.substitutions += 1;
                        changed = true;
                        break;
                    }
                }
            }
            if !changed {
                break;
            }
            // Keep the member scan order ascending by id.
            members.sort_unstable();
        }
        members
    }
}

/// Units of `set` not already present in `base`.
fn gain(base: &[u64], set: &Bits) -> usize {
    base.iter()
        .zip(&set.0)
        .map(|(b, s)| (s & !b).count_ones() as usize)
        .sum()
}

fn check(pool_len: usize, n: usize) -> Result<(), SelectionError> {
    if n == 0 {
        return Err(SelectionError::InvalidConfig);
    }
    if pool_len < n {
        return Err(SelectionError::PoolTooSmall {
            pool: pool_len,
            wanted: n,
        });
    }
    Ok(())
}

fn attempt_rng(seed: u64, attempt: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(mix64(seed ^ 0x005e_1ec7_0000, attempt))
}

/// One local-search attempt from a uniformly random `n_survivors`-subset.
pub fn greedy_max<K: Ord + Clone>(
    pool: &[(K, &CoverSet)],
    n_survivors: usize,
    rng: &mut impl rand::Rng,
) -> Result<Selection<K>, SelectionError> {
    check(pool.len(), n_survivors)?;
    let dense = DensePool::new(pool)?;
    let start = index::sample(rng, dense.len(), n_survivors).into_vec();
    let mut stats = SearchStats::default();
    let members = dense.local_search(start, &mut stats);
    Ok(dense.selection(members))
}

/// Best of `cfg.restarts` independent [`greedy_max`] attempts. Attempt `i`
/// draws its start from a stream derived from `(cfg.rng_seed, i)`; ties go to
/// the earliest attempt.
pub fn approx_max<K: Ord + Clone>(
    pool: &[(K, &CoverSet)],
    cfg: &SelectionConfig,
) -> Result<Selection<K>, SelectionError> {
    approx_max_with_stats(pool, cfg, None).map(|(s, _)| s)
}

/// Like [`approx_max`], optionally preceded by one extra attempt that starts
/// from `warm_start` instead of a random subset. The warm attempt counts as
/// attempt zero for tie-breaking, so the result is never worse than the
/// warm start's union.
pub fn approx_max_with_stats<K: Ord + Clone>(
    pool: &[(K, &CoverSet)],
    cfg: &SelectionConfig,
    warm_start: Option<&[K]>,
) -> Result<(Selection<K>, SearchStats), SelectionError> {
    if cfg.restarts == 0 {
        return Err(SelectionError::InvalidConfig);
    }
    check(pool.len(), cfg.n_survivors)?;
    let dense = DensePool::new(pool)?;
    let mut stats = SearchStats::default();
    let mut best: Option<Vec<usize>> = None;
    let mut best_size = 0;

    let mut consider = |members: Vec<usize>, best: &mut Option<Vec<usize>>| {
        let size = dense.union_size(&members);
        if best.is_none() || size > best_size {
            best_size = size;
            *best = Some(members);
        }
    };

    if let Some(warm) = warm_start {
        let mut start: Vec<usize> = warm
            .iter()
            .filter_map(|k| dense.ids.binary_search(k).ok())
            .collect();
        start.sort_unstable();
        start.dedup();
        // Top up (or trim) to exactly n_survivors in id order.
        start.truncate(cfg.n_survivors);
        let mut fill = 0;
        while start.len() < cfg.n_survivors {
            if !start.contains(&fill) {
                start.push(fill);
            }
            fill += 1;
        }
        let members = dense.local_search(start, &mut stats);
        consider(members, &mut best);
    }
    for attempt in 0..cfg.restarts {
        let mut rng = attempt_rng(cfg.rng_seed, attempt as u64);
        let start = index::sample(&mut rng, dense.len(), cfg.n_survivors).into_vec();
        let members = dense.local_search(start, &mut stats);
        consider(members, &mut best);
    }
    let members = best.expect("at least one attempt ran");
    Ok((dense.selection(members), stats))
}

/// Exact maximum over all `n_survivors`-subsets. Ties resolve to the
/// lexicographically smallest id sequence.
pub fn brute_force_max<K: Ord + Clone>(
    pool: &[(K, &CoverSet)],
    n_survivors: usize,
) -> Result<Selection<K>, SelectionError> {
    check(pool.len(), n_survivors)?;
    let m = pool.len();
    if binomial(m, n_survivors).is_none_or(|c| c > 1_000_000) {
        return Err(SelectionError::TooManySubsets { m, n: n_survivors });
    }
    let dense = DensePool::new(pool)?;
    let mut combo: Vec<usize> = (0..n_survivors).collect();
    let mut best = combo.clone();
    let mut best_size = dense.union_size(&combo);
    // Lexicographic enumeration; strict improvement keeps the first optimum.
    loop {
        let mut i = n_survivors;
        while i > 0 && combo[i - 1] == m - n_survivors + i - 1 {
            i -= 1;
        }
        if i == 0 {
            break;
        }
        combo[i - 1] += 1;
        for j in i..n_survivors {
            combo[j] = combo[j - 1] + 1;
        }
        let size = dense.union_size(&combo);
        if size > best_size {
            best_size = size;
            best = combo.clone();
        }
    }
    Ok(dense.selection(best))
}

/// Selection used when fuzzer-space guidance is disabled: the `k` largest
/// covers, ties broken by ascending id.
pub fn top_k_by_size<K: Ord + Clone>(pool: &[(K, &CoverSet)], k: usize) -> Vec<K> {
    let mut order: Vec<&(K, &CoverSet)> = pool.iter().collect();
    order.sort_by(|a, b| b.1.len().cmp(&a.1.len()).then_with(|| a.0.cmp(&b.0)));
    let mut out: Vec<K> = order.into_iter().take(k).map(|(id, _)| id.clone()).collect();
    out.sort();
    out
}

fn binomial(n: usize, k: usize) -> Option<u64> {
    let k = k.min(n - k);
    let mut acc: u64 = 1;
    for i in 0..k {
        acc = acc.checked_mul((n - i) as u64)? / (i as u64 + 1);
    }
    Some(acc)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pool() -> Vec<(&'static str, CoverSet)> {
        vec![
            ("A", CoverSet::from([1, 2, 3])),
            ("B", CoverSet::from([3, 4, 5])),
            ("C", CoverSet::from([1])),
        ]
    }

    fn refs<K: Clone>(p: &[(K, CoverSet)]) -> Vec<(K, &CoverSet)> {
        p.iter().map(|(k, c)| (k.clone(), c)).collect()
    }

    #[test]
    fn greedy_finds_unique_optimum() {
        let p = pool();
        for seed in 0..20 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let s = greedy_max(&refs(&p), 2, &mut rng).unwrap();
            assert_eq!(s.selected, vec!["A", "B"]);
            assert_eq!(s.union_size, 5);
        }
    }

    #[test]
    fn whole_pool_when_n_equals_m() {
        let p = pool();
        let s = approx_max(&refs(&p), &SelectionConfig { n_survivors: 3, restarts: 1, rng_seed: 1 }).unwrap();
        assert_eq!(s.selected, vec!["A", "B", "C"]);
    }

    #[test]
    fn identical_sets_any_pair() {
        let p: Vec<_> = (0..4).map(|i| (i, CoverSet::from([7, 8]))).collect();
        let s = approx_max(&refs(&p), &SelectionConfig { n_survivors: 2, restarts: 3, rng_seed: 9 }).unwrap();
        assert_eq!(s.selected.len(), 2);
        assert_eq!(s.union_size, 2);
    }

    #[test]
    fn restarts_one_equals_single_attempt() {
        let p: Vec<_> = (0..9u32)
            .map(|i| (i, (0..16u64).filter(|u| (u * 7 + i as u64 * 3) % 5 < 2).collect::<CoverSet>()))
            .collect();
        let cfg = SelectionConfig { n_survivors: 3, restarts: 1, rng_seed: 42 };
        let approx = approx_max(&refs(&p), &cfg).unwrap();
        let mut rng = attempt_rng(42, 0);
        let single = greedy_max(&refs(&p), 3, &mut rng).unwrap();
        assert_eq!(approx, single);
    }

    #[test]
    fn errors() {
        let p = pool();
        assert_eq!(
            approx_max(&refs(&p), &SelectionConfig { n_survivors: 4, restarts: 1, rng_seed: 0 }).unwrap_err(),
            SelectionError::PoolTooSmall { pool: 3, wanted: 4 }
        );
        assert_eq!(
            approx_max(&refs(&p), &SelectionConfig { n_survivors: 1, restarts: 0, rng_seed: 0 }).unwrap_err(),
            SelectionError::InvalidConfig
        );
        let dup = vec![("A", CoverSet::from([1])), ("A", CoverSet::from([2]))];
        assert_eq!(brute_force_max(&refs(&dup), 1).unwrap_err(), SelectionError::DuplicateId);
        let big: Vec<_> = (0..60u32).map(|i| (i, CoverSet::from([i as u64]))).collect();
        assert_eq!(
            brute_force_max(&refs(&big), 10).unwrap_err(),
            SelectionError::TooManySubsets { m: 60, n: 10 }
        );
    }

    #[test]
    fn brute_force_examples() {
        let tie = vec![
            ("A", CoverSet::from([1])),
            ("B", CoverSet::from([1])),
            ("C", CoverSet::from([2])),
        ];
        let s = brute_force_max(&refs(&tie), 2).unwrap();
        assert_eq!(s.selected, vec!["A", "C"]);
        let single = vec![("only", CoverSet::from([4, 5]))];
        assert_eq!(brute_force_max(&refs(&single), 1).unwrap().selected, vec!["only"]);
        let s = brute_force_max(&refs(&pool()), 2).unwrap();
        assert_eq!((s.selected, s.union_size), (vec!["A", "B"], 5));
    }

    #[test]
    fn warm_start_never_loses_ground() {
        let p: Vec<_> = (0..10u32)
            .map(|i| (i, (0..20u64).filter(|u| (u + i as u64) % 4 == 0 || *u == i as u64).collect::<CoverSet>()))
            .collect();
        let warm = [0u32, 1, 2];
        let warm_size = {
            let mut acc = CoverSet::new();
            for w in warm {
                acc.union_with(&p[w as usize].1);
            }
            acc.len()
        };
        let cfg = SelectionConfig { n_survivors: 3, restarts: 1, rng_seed: 3 };
        let (s, stats) = approx_max_with_stats(&refs(&p), &cfg, Some(&warm)).unwrap();
        assert!(s.union_size >= warm_size);
        assert_eq!(stats.attempts, 2);
    }

    #[test]
    fn top_k_orders_by_size_then_id() {
        let p = vec![
            (3, CoverSet::from([1, 2])),
            (1, CoverSet::from([1])),
            (2, CoverSet::from([5, 6])),
            (0, CoverSet::from([1, 2, 3])),
        ];
        assert_eq!(top_k_by_size(&refs(&p), 2), vec![0, 2]);
    }

    #[test]
    fn binomial_small() {
        assert_eq!(binomial(12, 4), Some(495));
        assert_eq!(binomial(5, 5), Some(1));
        assert_eq!(binomial(60, 10), Some(75_394_027_566));
    }
}
