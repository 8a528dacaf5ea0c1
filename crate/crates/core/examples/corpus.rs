//! Produces a corpus from several generators, then keeps only the cases
//! needed for its total coverage.
//!
//! ```text
//! cargo run --example corpus -- [count]
//! ```

use fuzzspace::evolution::{self, ProduceBudget};
use fuzzspace::harness::{self, CoverageBackend, RunnerConfig};
use fuzzspace::toy::programs;

fn main() {
    let count = std::env::args().nth(1).map_or(300, |a| a.parse().expect("count"));
    let fuzzers: Vec<(String, String)> = [("open", programs::OPEN_ONLY), ("close_star", programs::CLOSE_OR_STAR), ("mixed", programs::MIXED)]
        .iter()
        .map(|(n, s)| (n.to_string(), s.to_string()))
        .collect();
    let dir = tempfile::tempdir().expect("temp dir");
    let corpus = dir.path().join("corpus");
    let report = evolution::produce(&fuzzers, &RunnerConfig::toy(), ProduceBudget::Count(count), 0, &corpus).expect("produce");
    println!("{} cases written, {} fuzzers failed", report.entries.len(), report.failures.len());

    let backend = CoverageBackend::default();
    let kept = evolution::minimize_dir(&corpus, &dir.path().join("min"), &backend).expect("minimize");
    let read = |names: &[String], from: &std::path::Path| -> Vec<Vec<u8>> {
        names.iter().map(|n| std::fs::read(from.join(n)).expect("case")).collect()
    };
    let all: Vec<String> = report.entries.iter().map(|e| e.file.clone()).collect();
    let before = harness::measure_cover(&read(&all, &corpus), &backend).expect("cover");
    let after = harness::measure_cover(&read(&kept, &dir.path().join("min")), &backend).expect("cover");
    println!("kept {} cases: {kept:?}", kept.len());
    println!("cover before {before}, after {after}");
}
