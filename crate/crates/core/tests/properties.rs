use std::collections::BTreeSet;

use fuzzspace::evolution::{self, EvolutionConfig};
use fuzzspace::genlang::ByteChoiceStream;
use fuzzspace::harness::{self, ApproxCovConfig, CoverageBackend, RunnerConfig};
use fuzzspace::lattice::{CoverSet, DiscardReason, FuzzerNode, FuzzerSpace, Mutant, NodeId, Provenance};
use fuzzspace::llm::{MockConfig, MockLlm};
use fuzzspace::mutation::{self, split_lines, PromptContext};
use fuzzspace::selection::{self, SelectionConfig};
use fuzzspace::toy::{self, programs};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

fn cover_strategy(universe: u64) -> impl Strategy<Value = CoverSet> {
    prop::collection::btree_set(0..universe, 0..universe as usize).prop_map(|s| s.into_iter().collect())
}

fn pool_of(covers: &[CoverSet]) -> Vec<(usize, &CoverSet)> {
    covers.iter().enumerate().collect()
}

fn union_of(covers: &[CoverSet], ids: &[usize]) -> usize {
    let mut u = CoverSet::new();
    for &i in ids {
        u.union_with(&covers[i]);
    }
    u.len()
}

fn node(id: u64, source: &str) -> FuzzerNode {
    FuzzerNode { id: NodeId(id), source: source.into(), provenance: Provenance::Seed, cover: CoverSet::new(), iteration_born: 0 }
}

proptest! {
    #[test]
    fn insert_arrows_match_proper_subset(covers in prop::collection::vec(cover_strategy(8), 1..12)) {
        let mut space = FuzzerSpace::new();
        for c in &covers {
            space.insert(String::new(), Provenance::Seed, c.clone(), 0).unwrap();
        }
        let nodes = space.nodes();
        let distinct: BTreeSet<&CoverSet> = covers.iter().collect();
        prop_assert_eq!(nodes.len(), distinct.len());
        for a in nodes {
            let expected: BTreeSet<NodeId> =
                nodes.iter().filter(|b| a.cover.is_proper_subset(&b.cover)).map(|b| b.id).collect();
            prop_assert_eq!(space.reachable_from(a.id), expected.clone());
            for b in nodes {
                prop_assert_eq!(space.has_arrow(a.id, b.id), expected.contains(&b.id));
            }
        }
    }

    #[test]
    fn explore_invariants(
        seeds in prop::collection::vec(cover_strategy(8), 1..4),
        outcomes in prop::collection::vec(prop::option::of(cover_strategy(8)), 0..12),
    ) {
        let mut space = FuzzerSpace::new();
        for s in &seeds {
            space.add_seed(String::new(), s.clone());
        }
        let seed_id = space.nodes()[0].id;
        let before = space.len();
        let mutants: Vec<Mutant> = outcomes
            .iter()
            .map(|o| Mutant {
                source: String::new(),
                provenance: Provenance::Completion(seed_id),
                outcome: o.clone().ok_or_else(|| "boom".to_string()),
            })
            .collect();
        let report = space.explore(mutants, 1).unwrap();
        prop_assert_eq!(report.admitted.len() + report.discarded.len(), outcomes.len());
        prop_assert_eq!(space.len(), before + report.admitted.len());
        prop_assert_eq!(report.invalid_count(), outcomes.iter().filter(|o| o.is_none()).count());
        for (i, reason) in &report.discarded {
            if let DiscardReason::WeakerOrEquivalent { dominated_by } = reason {
                let c = outcomes[*i].as_ref().unwrap();
                prop_assert!(c.is_subset(&space.node(*dominated_by).unwrap().cover));
            }
        }
        for &id in &report.admitted {
            let n = space.node(id).unwrap();
            for other in space.nodes().iter().filter(|o| o.id < id) {
                prop_assert!(!n.cover.is_subset(&other.cover));
                prop_assert_eq!(space.has_arrow(other.id, id), other.cover.is_proper_subset(&n.cover));
            }
        }
        for (from, to) in space.arrows() {
            prop_assert!(space.node(from).unwrap().cover.is_proper_subset(&space.node(to).unwrap().cover));
        }
    }

    #[test]
    fn approx_bounded_by_exact(
        covers in prop::collection::vec(cover_strategy(20), 2..10),
        n in 1usize..4,
        seed in any::<u64>(),
    ) {
        let n = n.min(covers.len());
        let pool = pool_of(&covers);
        let exact = selection::brute_force_max(&pool, n).unwrap();
        let cfg = SelectionConfig { n_survivors: n, restarts: 3, rng_seed: seed };
        let warm: Vec<usize> = (0..n).collect();
        let (approx, _) = selection::approx_max_with_stats(&pool, &cfg, Some(&warm)).unwrap();
        prop_assert!(approx.union_size <= exact.union_size);
        prop_assert!(approx.union_size >= union_of(&covers, &warm));
        prop_assert_eq!(approx.union_size, union_of(&covers, &approx.selected));
        prop_assert_eq!(exact.union_size, union_of(&covers, &exact.selected));
    }

    #[test]
    fn greedy_is_locally_optimal(
        covers in prop::collection::vec(cover_strategy(20), 2..10),
        n in 1usize..4,
        seed in any::<u64>(),
    ) {
        let n = n.min(covers.len());
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sel = selection::greedy_max(&pool_of(&covers), n, &mut rng).unwrap();
        prop_assert_eq!(sel.selected.len(), n);
        for out_pos in 0..n {
            for cand in (0..covers.len()).filter(|c| !sel.selected.contains(c)) {
                let mut swapped = sel.selected.clone();
                swapped[out_pos] = cand;
                prop_assert!(union_of(&covers, &swapped) <= sel.union_size);
            }
        }
    }

    #[test]
    fn measure_cover_is_monotone(
        a in prop::collection::vec(prop::collection::vec(prop::sample::select(b"()*x".to_vec()), 0..10), 0..6),
        b in prop::collection::vec(prop::collection::vec(prop::sample::select(b"()*x".to_vec()), 0..10), 0..6),
    ) {
        let backend = CoverageBackend::default();
        let ca = harness::measure_cover(&a, &backend).unwrap();
        let both: Vec<Vec<u8>> = a.iter().chain(&b).cloned().collect();
        let cab = harness::measure_cover(&both, &backend).unwrap();
        prop_assert!(ca.is_subset(&cab));
    }

    #[test]
    fn mutation_preserves_untouched_lines(seed in any::<u64>(), generated in "[a-z =+\n]{0,40}") {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ctx = PromptContext::default();
        let a = node(0, programs::MIXED);
        let b = node(1, programs::CLOSE_OR_STAR);
        let la = split_lines(programs::MIXED);
        let lb = split_lines(programs::CLOSE_OR_STAR);

        let c = mutation::make_completion(&a, &ctx, &mut rng);
        let k = split_lines(&c.prefix).len();
        prop_assert_eq!(c.prefix.clone(), la[..k].concat());
        prop_assert!(c.assemble(&generated).starts_with(&c.prefix));

        let i = mutation::make_infilling(&a, 3, &ctx, &mut rng).unwrap();
        let (p, s) = (split_lines(&i.prefix).len(), split_lines(&i.suffix).len());
        prop_assert!(p + s < la.len() && p + s + 3 >= la.len());
        prop_assert_eq!(i.prefix.clone(), la[..p].concat());
        prop_assert_eq!(i.suffix.clone(), la[la.len() - s..].concat());
        let out = i.assemble(&generated);
        prop_assert!(out.starts_with(&i.prefix) && out.ends_with(&i.suffix));

        let sp = mutation::make_splicing(&a, &b, &ctx, &mut rng);
        let (p, s) = (split_lines(&sp.prefix).len(), split_lines(&sp.suffix).len());
        prop_assert_eq!(sp.prefix.clone(), la[..p].concat());
        prop_assert_eq!(sp.suffix.clone(), lb[lb.len() - s..].concat());
        let out = sp.assemble(&generated);
        prop_assert!(out.starts_with(&sp.prefix) && out.ends_with(&sp.suffix));
    }

    #[test]
    fn byte_stream_wraps(bytes in prop::collection::vec(any::<u8>(), 1..20), reads in 0usize..100) {
        let mut s = ByteChoiceStream::new(bytes.clone());
        for i in 0..reads {
            prop_assert_eq!(s.next_byte(), bytes[i % bytes.len()]);
        }
        prop_assert_eq!(s.consumed(), reads);
    }

    #[test]
    fn minimize_keeps_union(
        cases in prop::collection::vec(prop::collection::vec(prop::sample::select(b"()*".to_vec()), 0..8), 0..30),
    ) {
        let backend = CoverageBackend::default();
        let kept = evolution::minimize(&cases, &backend).unwrap();
        let kept_cases: Vec<Vec<u8>> = kept.iter().map(|&i| cases[i].clone()).collect();
        prop_assert_eq!(harness::measure_cover(&kept_cases, &backend).unwrap(), harness::measure_cover(&cases, &backend).unwrap());
        prop_assert!(kept.len() <= cases.len());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn trend_invariants(seed in any::<u64>(), invalid_rate in 0.0f64..0.6) {
        let llm = MockLlm::new(MockConfig { seed, invalid_rate, ..MockConfig::default() });
        let cfg = EvolutionConfig { iterations: 4, mutants_per_iteration: 8, rng_seed: seed, ..EvolutionConfig::toy() };
        let state = evolution::run(&cfg, &llm, None, false).unwrap();
        prop_assert_eq!(state.trend.len(), 4);
        let mut last = 0;
        for row in &state.trend {
            prop_assert_eq!(row.mutants_valid, row.mutants_admitted + row.mutants_discarded_weak);
            prop_assert_eq!(row.mutants_valid + row.mutants_invalid, cfg.mutants_per_iteration);
            prop_assert!(row.survivor_union_size >= last);
            last = row.survivor_union_size;
        }
        prop_assert!(state.survivors.len() <= cfg.survivors);
        prop_assert_eq!(state.survivor_union().len(), last);
    }
}

fn chi_square_ok(counts: &[u64]) -> (f64, f64) {
    let total: u64 = counts.iter().sum();
    let expected = total as f64 / counts.len() as f64;
    let stat: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
    let p = 1.0 - ChiSquared::new((counts.len() - 1) as f64).unwrap().cdf(stat);
    (stat, p)
}

const DRAWS: usize = 10_000;

#[test]
fn completion_cuts_are_uniform() {
    let a = node(0, programs::MIXED);
    let n = split_lines(programs::MIXED).len();
    let mut counts = vec![0u64; n];
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..DRAWS {
        let r = mutation::make_completion(&a, &PromptContext::default(), &mut rng);
        counts[split_lines(&r.prefix).len() - 1] += 1;
    }
    let (stat, p) = chi_square_ok(&counts);
    assert!(p > 0.01, "chi2 {stat}, p {p}, {counts:?}");
}

#[test]
fn infill_spans_are_uniform() {
    let a = node(0, programs::MIXED);
    let n = split_lines(programs::MIXED).len();
    let pairs: Vec<(usize, usize)> = (1..=3).flat_map(|len| (1..=n - len).map(move |s| (s, len))).collect();
    assert_eq!(pairs.len(), mutation::infill_pairs(n, 0, 3));
    let mut counts = vec![0u64; pairs.len()];
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..DRAWS {
        let r = mutation::make_infilling(&a, 3, &PromptContext::default(), &mut rng).unwrap();
        let start = split_lines(&r.prefix).len();
        let len = n - start - split_lines(&r.suffix).len();
        counts[pairs.iter().position(|&p| p == (start, len)).unwrap()] += 1;
    }
    let (stat, p) = chi_square_ok(&counts);
    assert!(p > 0.01, "chi2 {stat}, p {p}");
}

#[test]
fn splice_cuts_are_uniform() {
    let a = node(0, programs::MIXED);
    let b = node(1, programs::OPEN_ONLY);
    let (na, nb) = (split_lines(programs::MIXED).len(), split_lines(programs::OPEN_ONLY).len());
    let mut ca = vec![0u64; na];
    let mut cb = vec![0u64; nb];
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for _ in 0..DRAWS {
        let r = mutation::make_splicing(&a, &b, &PromptContext::default(), &mut rng);
        ca[split_lines(&r.prefix).len() - 1] += 1;
        cb[nb - split_lines(&r.suffix).len() - 1] += 1;
    }
    for counts in [ca, cb] {
        let (stat, p) = chi_square_ok(&counts);
        assert!(p > 0.01, "chi2 {stat}, p {p}, {counts:?}");
    }
}

/// Independent model of the mixed generator: draws from `0..=3` until a 3 or
/// sixteen characters.
fn simulate_mixed(rng: &mut ChaCha8Rng) -> Vec<u8> {
    let mut s = Vec::new();
    while s.len() < 16 {
        match rng.gen_range(0..=3) {
            0 => s.push(b'('),
            1 => s.push(b')'),
            2 => s.push(b'*'),
            _ => break,
        }
    }
    s
}

#[test]
fn mixed_generator_reaches_every_line_in_1000_inputs() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let mut hits = [0u64; 14];
    for _ in 0..DRAWS {
        for u in toy::trace_balanced_parens(&simulate_mixed(&mut rng)).1.iter() {
            hits[u as usize] += 1;
        }
    }
    // Union bound on missing some line across 1000 independent inputs.
    let miss: f64 = (1..=13).map(|u| (1.0 - hits[u] as f64 / DRAWS as f64).powi(1000)).sum();
    assert!(miss < 1e-9, "estimated miss probability {miss}, hits {hits:?}");

    let cfg = ApproxCovConfig { inputs_per_measurement: 1000, time_budget_secs: 60.0 };
    let cover = harness::approx_cov(programs::MIXED, &RunnerConfig::toy(), &CoverageBackend::default(), &cfg, 0).unwrap();
    assert_eq!(cover, (1..=13).collect::<CoverSet>());
}
