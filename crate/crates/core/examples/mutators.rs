//! The three mutation operators on a toy generator: prints each prompt and
//! the mutant assembled from a mock model answer.
//!
//! ```text
//! cargo run --example mutators -- [seed]
//! ```

use fuzzspace::lattice::{CoverSet, FuzzerNode, NodeId, Provenance};
use fuzzspace::llm::{self, LlmBackend, MockConfig, MockLlm};
use fuzzspace::mutation::{self, PromptContext};
use fuzzspace::toy::programs;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn node(id: u64, source: &str) -> FuzzerNode {
    FuzzerNode { id: NodeId(id), source: source.into(), provenance: Provenance::Seed, cover: CoverSet::new(), iteration_born: 0 }
}

fn main() {
    let seed = std::env::args().nth(1).map_or(0, |a| a.parse().expect("seed"));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ctx = PromptContext { format: "parens".into(), format_hint: Some("strings over ( ) and *".into()) };
    let model = MockLlm::new(MockConfig { seed, invalid_rate: 0.0, ..MockConfig::default() });
    let a = node(0, programs::OPEN_ONLY);
    let b = node(1, programs::CLOSE_OR_STAR);

    let requests = [
        mutation::make_completion(&a, &ctx, &mut rng),
        mutation::make_infilling(&a, 3, &ctx, &mut rng).expect("long enough"),
        mutation::make_splicing(&a, &b, &ctx, &mut rng),
    ];
    for (i, req) in requests.iter().enumerate() {
        let prompt = mutation::fit_prompt(req, 4096).expect("fits");
        let answer = llm::query(&model as &dyn LlmBackend, &prompt, i as u64).expect("mock answers");
        println!("==== {} {:?}", req.kind.name(), req.parents);
        println!("---- prefix\n{}", req.prefix);
        if req.is_fill_in_middle() {
            println!("---- suffix\n{}", req.suffix);
        }
        println!("---- model\n{answer}");
        println!("---- mutant\n{}", req.assemble(&answer));
    }
}
