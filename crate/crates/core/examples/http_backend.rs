//! Sends one completion and one fill-in-the-middle request to an
//! OpenAI-style `/v1/completions` server, such as a local code model.
//!
//! ```text
//! cargo run --example http_backend -- http://127.0.0.1:8080/v1/completions
//! ```

use fuzzspace::llm::{BackendKind, HttpBackend, LlmBackend, LlmConfig};
use fuzzspace::toy::programs;

fn main() {
    let url = std::env::args().nth(1).unwrap_or_else(|| LlmConfig::default().endpoint_url);
    let cfg = LlmConfig { backend: BackendKind::Http, endpoint_url: url, retries: 1, request_timeout_secs: 30.0, ..LlmConfig::default() };
    let backend = HttpBackend::new(cfg).expect("client");

    let lines: Vec<&str> = programs::MIXED.split_inclusive('\n').collect();
    match backend.complete(&lines[..5].concat(), 0) {
        Ok(text) => println!("completion:\n{text}"),
        Err(e) => println!("completion failed: {e}"),
    }
    match backend.fill_in_middle(&lines[..5].concat(), &lines[7..].concat(), 1) {
        Ok(text) => println!("infill:\n{text}"),
        Err(e) => println!("infill failed: {e}"),
    }
}
