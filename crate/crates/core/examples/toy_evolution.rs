//! Evolves fuzzers for the balanced-parenthesis checker with the offline mock
//! model and prints the coverage trend.
//!
//! ```text
//! cargo run --example toy_evolution -- [iterations] [seed]
//! ```

use fuzzspace::evolution::{self, EvolutionConfig};
use fuzzspace::llm::MockLlm;

fn main() {
    let mut args = std::env::args().skip(1);
    let iterations = args.next().map_or(30, |a| a.parse().expect("iterations"));
    let seed = args.next().map_or(0, |a| a.parse().expect("seed"));
    let cfg = EvolutionConfig { iterations, rng_seed: seed, ..EvolutionConfig::toy() };
    let mock = MockLlm::new(cfg.llm.mock.clone());

    let state = evolution::run(&cfg, &mock, None, false).expect("evolution run");
    println!("iter  union  valid  admitted  weak  invalid");
    for r in &state.trend {
        println!(
            "{:>4}  {:>5}  {:>5}  {:>8}  {:>4}  {:>7}",
            r.iteration, r.survivor_union_size, r.mutants_valid, r.mutants_admitted, r.mutants_discarded_weak, r.mutants_invalid
        );
    }
    println!("\nspace: {} nodes, {} arrows", state.space.len(), state.space.arrows().count());
    println!("survivor union: {}", state.survivor_union());
    for id in &state.survivors {
        let node = state.space.node(*id).expect("survivor");
        println!("\n# {id} ({}) covers {}\n{}", node.provenance.kind_name(), node.cover, node.source);
    }
}
