//! Byte-array driven generation: replays one array twice, then evolves a
//! small population against the toy checker.
//!
//! ```text
//! cargo run --example zest_toy -- [rounds] [seed]
//! ```

use fuzzspace::harness::{CoverageBackend, RunnerConfig};
use fuzzspace::toy::programs;
use fuzzspace::zest::{self, ZestConfig};

fn main() {
    let mut args = std::env::args().skip(1);
    let rounds = args.next().map_or(200, |a| a.parse().expect("rounds"));
    let seed = args.next().map_or(0, |a| a.parse().expect("seed"));
    let runner = RunnerConfig::toy();

    let bytes = [0u8, 1, 0, 2, 1, 1, 3];
    let case = zest::replay(programs::MIXED, &bytes, &runner).expect("replay");
    assert_eq!(case, zest::replay(programs::MIXED, &bytes, &runner).expect("replay"));
    println!("{bytes:?} -> {:?}", String::from_utf8_lossy(&case));

    let cfg = ZestConfig { rng_seed: seed, ..ZestConfig::default() };
    let out = zest::zest_loop(programs::MIXED, &cfg, &runner, &CoverageBackend::default(), rounds).expect("zest");
    println!("admitted {} of {rounds}, {} failed", out.admitted, out.failed);
    let steps: Vec<(usize, usize)> =
        out.covs.iter().enumerate().filter(|(i, c)| *i == 0 || out.covs[i - 1] != **c).map(|(i, c)| (i, *c)).collect();
    println!("coverage steps (round, units): {steps:?}");
    for s in &out.survivors {
        let case = zest::replay(programs::MIXED, s, &runner).expect("survivor replays");
        println!("survivor {:?}", String::from_utf8_lossy(&case));
    }
}
