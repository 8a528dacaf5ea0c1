//! One evolution iteration with scripted model answers: two seeds, five
//! mutants covering every outcome (admitted, weak, invalid).

use std::collections::BTreeSet;

use fuzzspace::evolution::{self, EvolutionConfig};
use fuzzspace::lattice::{CoverSet, DiscardReason, NodeId, Provenance};
use fuzzspace::llm::ScriptedLlm;
use fuzzspace::mutation::{self, PromptContext};
use fuzzspace::selection;
use fuzzspace::toy::programs;

const GLUE: &str = "        elif choice == 1:\n";
const H_MIDDLE: &str = "            random_sequence += \"()\"\n        elif choice == 1:\n            random_sequence += \"*\"\n";
const I_MIDDLE: &str = "            random_sequence += \"\"\n";
const J_MIDDLE: &str = "            random_sequence += 1\n";
const K_TAIL: &str = "    # Code re-completed by the LLM\n    return \")\" + random_sequence\n";

fn lines(spec: &[(u64, u64)]) -> CoverSet {
    spec.iter().flat_map(|&(a, b)| a..=b).collect()
}

#[test]
fn scripted_iteration() {
    let cfg = EvolutionConfig { mutants_per_iteration: 5, survivors: 2, ..EvolutionConfig::toy() };
    let mut state = evolution::init_with_seeds(&[programs::OPEN_ONLY.into(), programs::STAR_ONLY.into()], &cfg).unwrap();
    let (b, d) = (NodeId(0), NodeId(1));
    assert_eq!(state.survivors, vec![b, d]);
    assert_eq!(state.space.node(b).unwrap().cover, lines(&[(1, 5), (13, 13)]));
    assert_eq!(state.space.node(d).unwrap().cover, CoverSet::from([1, 2, 3, 4, 6, 11, 12, 13]));

    let ctx = PromptContext { format: "parens".into(), format_hint: None };
    let fb = state.space.node(b).unwrap().clone();
    let fd = state.space.node(d).unwrap().clone();
    let requests = vec![
        mutation::splicing_at(&fb, &fd, 6, 5, &ctx),
        mutation::infilling_at(&fb, 5, 1, 3, &ctx),
        mutation::infilling_at(&fb, 5, 1, 3, &ctx),
        mutation::infilling_at(&fb, 5, 1, 3, &ctx),
        mutation::completion_at(&fd, 8, &ctx),
    ]
    .into_iter()
    .map(|r| r.map_err(|e| e.to_string()))
    .collect();
    let llm = ScriptedLlm::new([GLUE, H_MIDDLE, I_MIDDLE, J_MIDDLE, K_TAIL]);

    let report = evolution::step_with_requests(&mut state, &cfg, &llm, requests).unwrap();
    assert_eq!(llm.calls(), 5);

    assert_eq!(report.mutants[0].source, programs::OPEN_OR_STAR);
    assert_eq!(report.mutants[4].source, programs::CLOSE_PREFIXED);
    let (g, h, k) = (NodeId(2), NodeId(3), NodeId(4));
    assert_eq!(report.admitted, vec![g, h, k]);
    assert_eq!(state.space.node(g).unwrap().cover, lines(&[(1, 6), (11, 13)]));
    assert_eq!(state.space.node(h).unwrap().cover, lines(&[(1, 8), (11, 13)]));
    assert_eq!(state.space.node(k).unwrap().cover, CoverSet::from([1, 2, 3, 4, 6, 7, 9, 10]));
    assert_eq!(state.space.node(g).unwrap().provenance, Provenance::Splicing(b, d));
    assert_eq!(state.space.node(k).unwrap().provenance, Provenance::Completion(d));

    // F_I only ever produces the empty string; F_J adds an int to a str.
    assert_eq!(report.mutants[2].outcome, Ok(lines(&[(1, 3), (13, 13)])));
    assert!(matches!(&report.mutants[3].outcome, Err(e) if e.contains("TypeError")));

    let arrows: BTreeSet<_> = state.space.arrows().collect();
    let expected: BTreeSet<_> = [(b, g), (d, g), (b, h), (d, h), (g, h)].into();
    assert_eq!(arrows, expected);

    let row = &report.row;
    assert_eq!((row.mutants_valid, row.mutants_admitted, row.mutants_discarded_weak, row.mutants_invalid), (4, 3, 1, 1));

    // Best pair over {B, D, G, H, K} by exhaustive search.
    let pool: Vec<_> = state.space.nodes().iter().map(|n| (n.id, &n.cover)).collect();
    let best = selection::brute_force_max(&pool, 2).unwrap();
    assert_eq!(best.selected, vec![h, k]);
    assert_eq!(state.survivors, vec![h, k]);
    assert_eq!(state.survivor_union(), lines(&[(1, 13)]));
}

#[test]
fn weak_and_invalid_reasons() {
    let cfg = EvolutionConfig { mutants_per_iteration: 2, survivors: 1, ..EvolutionConfig::toy() };
    let mut state = evolution::init_with_seeds(&[programs::OPEN_ONLY.into()], &cfg).unwrap();
    let fb = state.space.node(NodeId(0)).unwrap().clone();
    let ctx = PromptContext::default();
    let reqs = vec![
        mutation::infilling_at(&fb, 5, 1, 3, &ctx).map_err(|e| e.to_string()),
        mutation::infilling_at(&fb, 5, 1, 3, &ctx).map_err(|e| e.to_string()),
    ];
    let llm = ScriptedLlm::new([I_MIDDLE, J_MIDDLE]);
    let before = state.survivors.clone();
    evolution::step_with_requests(&mut state, &cfg, &llm, reqs).unwrap();
    assert_eq!(state.survivors, before);
    let mut probe = state.space.clone();
    let mutants = vec![fuzzspace::lattice::Mutant {
        source: String::new(),
        provenance: Provenance::Infilling(NodeId(0)),
        outcome: Ok(lines(&[(1, 3), (13, 13)])),
    }];
    let r = probe.explore(mutants, 2).unwrap();
    assert!(matches!(r.discarded[0].1, DiscardReason::WeakerOrEquivalent { dominated_by } if dominated_by == NodeId(0)));
}
