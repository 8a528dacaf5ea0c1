//! Builds the lattice of the toy generators from their measured covers and
//! prints the arrows between them.
//!
//! ```text
//! cargo run --example fuzzer_space
//! ```

use fuzzspace::harness::{self, ApproxCovConfig, CoverageBackend, RunnerConfig};
use fuzzspace::lattice::{compare_strength, FuzzerSpace};
use fuzzspace::toy::programs;

fn main() {
    let fuzzers = [
        ("F_A", programs::MIXED),
        ("F_A'", programs::MIXED_FIXED_LEN),
        ("F_B", programs::OPEN_ONLY),
        ("F_C", programs::CLOSE_OR_STAR),
        ("F_D", programs::STAR_ONLY),
        ("F_E", programs::EMPTY),
    ];
    let runner = RunnerConfig::toy();
    let backend = CoverageBackend::default();
    let approx = ApproxCovConfig { inputs_per_measurement: 1000, ..ApproxCovConfig::default() };

    let mut space = FuzzerSpace::new();
    let mut names = Vec::new();
    for (name, src) in fuzzers {
        let cover = harness::approx_cov(src, &runner, &backend, &approx, 0).expect("toy generator runs");
        let id = space.add_seed(src.to_string(), cover.clone());
        println!("{name:<4} {id} covers {cover}");
        names.push((id, name, cover));
    }
    let name = |id| names.iter().filter(|(i, ..)| *i == id).map(|(_, n, _)| *n).collect::<Vec<_>>().join("=");
    let cover = |n: &str| &names.iter().find(|(_, m, _)| *m == n).expect("listed").2;

    println!("\narrows (weaker -> stronger):");
    for (from, to) in space.arrows() {
        println!("  {} -> {}", name(from), name(to));
    }
    println!("\nF_B vs F_C: {:?}", compare_strength(cover("F_B"), cover("F_C")));
    println!("F_D vs F_C: {:?}", compare_strength(cover("F_D"), cover("F_C")));
}
