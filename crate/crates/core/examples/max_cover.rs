//! Survivor selection on a random pool: the restarted local search against
//! exhaustive enumeration.
//!
//! ```text
//! cargo run --example max_cover -- [pool] [survivors] [seed]
//! ```

use std::time::Instant;

use fuzzspace::lattice::CoverSet;
use fuzzspace::selection::{self, SelectionConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() {
    let mut args = std::env::args().skip(1);
    let m: usize = args.next().map_or(20, |a| a.parse().expect("pool"));
    let n: usize = args.next().map_or(4, |a| a.parse().expect("survivors"));
    let seed: u64 = args.next().map_or(0, |a| a.parse().expect("seed"));

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let covers: Vec<CoverSet> = (0..m)
        .map(|_| {
            let len = rng.gen_range(1..40);
            (0..len).map(|_| rng.gen_range(0..200u64)).collect()
        })
        .collect();
    let pool: Vec<(usize, &CoverSet)> = covers.iter().enumerate().collect();

    let t = Instant::now();
    let cfg = SelectionConfig { n_survivors: n, restarts: 10, rng_seed: seed };
    let (approx, stats) = selection::approx_max_with_stats(&pool, &cfg, None).expect("pool large enough");
    println!("approx  {:?} union {} ({} evaluations, {:?})", approx.selected, approx.union_size, stats.evaluations, t.elapsed());

    let t = Instant::now();
    match selection::brute_force_max(&pool, n) {
        Ok(exact) => println!("exact   {:?} union {} ({:?})", exact.selected, exact.union_size, t.elapsed()),
        Err(e) => println!("exact   skipped: {e}"),
    }
    println!("top-k   {:?}", selection::top_k_by_size(&pool, n));
}
