//! Code-model backends: an HTTP client for OpenAI-compatible completion
//! servers, a deterministic mock for offline runs, and a scripted backend for
//! tests.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::Duration;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mutation::Prompt;
use crate::util::{fnv1a, mix64};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LlmError {
    #[error("request failed after {attempts} attempts: {detail}")]
    Transport { attempts: u32, detail: String },
    #[error("server returned HTTP {status}: {body}")]
    Http { status: u16, body: String },
    #[error("malformed response: {0}")]
    Malformed(String),
    #[error("{0}")]
    PromptTooLong(String),
    #[error("scripted backend ran out of responses")]
    Exhausted,
}

/// A code model that can continue a prompt or fill a hole.
pub trait LlmBackend: Send + Sync {
    /// Continuation of `prompt`. `nonce` identifies the request and seeds any
    /// sampling the backend controls.
    fn complete(&self, prompt: &str, nonce: u64) -> Result<String, LlmError>;

    /// Text for the hole between `prefix` and `suffix`.
    fn fill_in_middle(&self, prefix: &str, suffix: &str, nonce: u64) -> Result<String, LlmError>;

    /// Whether requests may be issued concurrently. Backends answering by
    /// call order return false.
    fn concurrent(&self) -> bool {
        true
    }
}

/// Sends a fitted prompt: completion when the suffix is empty, otherwise
/// fill-in-the-middle.
pub fn query(backend: &dyn LlmBackend, prompt: &Prompt, nonce: u64) -> Result<String, LlmError> {
    if prompt.suffix.is_empty() {
        backend.complete(&prompt.prefix, nonce)
    } else {
        backend.fill_in_middle(&prompt.prefix, &prompt.suffix, nonce)
    }
}

/// Runs many queries with at most `max_concurrent` in flight. Results come
/// back in input order.
pub fn query_batch(
    backend: &dyn LlmBackend,
    queries: &[(Prompt, u64)],
    max_concurrent: usize,
) -> Vec<Result<String, LlmError>> {
    if !backend.concurrent() || max_concurrent <= 1 || queries.len() <= 1 {
        return queries.iter().map(|(p, n)| query(backend, p, *n)).collect();
    }
    let pool = rayon::ThreadPoolBuilder::new().num_threads(max_concurrent).build();
    match pool {
        Ok(pool) => pool.install(|| queries.par_iter().map(|(p, n)| query(backend, p, *n)).collect()),
        Err(_) => queries.iter().map(|(p, n)| query(backend, p, *n)).collect(),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    Http,
    Mock,
}

/// How fill-in-the-middle requests are put on the wire.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FimMode {
    /// `prompt` holds the prefix and the `suffix` field the suffix.
    Suffix,
    /// Prefix and suffix are wrapped in model-specific sentinel tokens.
    Sentinel,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LlmConfig {
    pub backend: BackendKind,
    pub endpoint_url: String,
    pub model_name: String,
    /// Name of an environment variable holding a bearer token.
    pub api_key_env: Option<String>,
    pub temperature: f64,
    pub repetition_penalty: f64,
    pub max_total_tokens: usize,
    pub max_new_tokens: usize,
    pub request_timeout_secs: f64,
    pub retries: u32,
    pub max_concurrent_requests: usize,
    pub fim_mode: FimMode,
    pub fim_prefix: String,
    pub fim_suffix: String,
    pub fim_middle: String,
    pub stop: Vec<String>,
    /// Send the request nonce as the sampling seed.
    pub send_seed: bool,
    /// Log request and response bodies.
    pub log_requests: bool,
    pub mock: MockConfig,
}

impl Default for LlmConfig {
    fn default() -> Self {
        LlmConfig {
            backend: BackendKind::Mock,
            endpoint_url: "http://127.0.0.1:8080/v1/completions".into(),
            model_name: "codellama/CodeLlama-13b-hf".into(),
            api_key_env: None,
            temperature: 0.2,
            repetition_penalty: 1.15,
            max_total_tokens: 8192,
            max_new_tokens: 512,
            request_timeout_secs: 120.0,
            retries: 3,
            max_concurrent_requests: 8,
            fim_mode: FimMode::Sentinel,
            fim_prefix: "<PRE> ".into(),
            fim_suffix: " <SUF>".into(),
            fim_middle: " <MID>".into(),
            stop: vec!["<EOT>".into()],
            send_seed: true,
            log_requests: false,
            mock: MockConfig::default(),
        }
    }
}

impl LlmConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.temperature >= 0.0) {
            return Err("llm.temperature must be >= 0".into());
        }
        if self.max_new_tokens == 0 || self.max_total_tokens <= self.max_new_tokens {
            return Err("llm.max_total_tokens must exceed llm.max_new_tokens, which must be > 0".into());
        }
        if !(self.request_timeout_secs > 0.0) {
            return Err("llm.request_timeout_secs must be > 0".into());
        }
        if self.max_concurrent_requests == 0 {
            return Err("llm.max_concurrent_requests must be >= 1".into());
        }
        if !(0.0..=1.0).contains(&self.mock.invalid_rate) {
            return Err("llm.mock.invalid_rate must lie in [0, 1]".into());
        }
        if self.mock.token_pool.is_empty() {
            return Err("llm.mock.token_pool must not be empty".into());
        }
        Ok(())
    }

    /// Tokens available for the prompt once the reply is reserved.
    pub fn prompt_budget(&self) -> usize {
        self.max_total_tokens.saturating_sub(self.max_new_tokens)
    }

    pub fn build(&self) -> Result<Box<dyn LlmBackend>, LlmError> {
        Ok(match self.backend {
            BackendKind::Http => Box::new(HttpBackend::new(self.clone())?),
            BackendKind::Mock => Box::new(MockLlm::new(self.mock.clone())),
        })
    }
}

pub struct HttpBackend {
    cfg: LlmConfig,
    client: reqwest::blocking::Client,
    api_key: Option<String>,
}

#[derive(Serialize)]
struct CompletionBody<'a> {
    model: &'a str,
    prompt: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    suffix: Option<&'a str>,
    max_tokens: usize,
    temperature: f64,
    repetition_penalty: f64,
    #[serde(skip_serializing_if = "<[String]>::is_empty")]
    stop: &'a [String],
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
}

impl HttpBackend {
    pub fn new(cfg: LlmConfig) -> Result<Self, LlmError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs_f64(cfg.request_timeout_secs))
            .build()
            .map_err(|e| LlmError::Transport { attempts: 0, detail: e.to_string() })?;
        let api_key = cfg.api_key_env.as_deref().and_then(|v| std::env::var(v).ok());
        Ok(HttpBackend { cfg, client, api_key })
    }

    fn post(&self, prompt: &str, suffix: Option<&str>, nonce: u64) -> Result<String, LlmError> {
        let body = CompletionBody {
            model: &self.cfg.model_name,
            prompt,
            suffix,
            max_tokens: self.cfg.max_new_tokens,
            temperature: self.cfg.temperature,
            repetition_penalty: self.cfg.repetition_penalty,
            stop: &self.cfg.stop,
            seed: self.cfg.send_seed.then_some(nonce),
        };
        let json = serde_json::to_string(&body).map_err(|e| LlmError::Malformed(e.to_string()))?;
        if self.cfg.log_requests {
            let auth = if self.api_key.is_some() { "authorization: Bearer [redacted]" } else { "no authorization" };
            log::info!(target: "llm", "POST {} ({auth}) {json}", self.cfg.endpoint_url);
        }
        let attempts = self.cfg.retries + 1;
        let mut last = String::new();
        for attempt in 1..=attempts {
            let mut req = self
                .client
                .post(&self.cfg.endpoint_url)
                .header("content-type", "application/json")
                .body(json.clone());
            if let Some(key) = &self.api_key {
                req = req.bearer_auth(key);
            }
            match req.send() {
                Ok(resp) => {
                    let status = resp.status();
                    let text = resp.text().unwrap_or_default();
                    if self.cfg.log_requests {
                        log::info!(target: "llm", "response {status}: {text}");
                    }
                    if status.is_success() {
                        return extract_text(&text);
                    }
                    let retryable = status.is_server_error() || status.as_u16() == 429;
                    if !retryable {
                        return Err(LlmError::Http { status: status.as_u16(), body: text });
                    }
                    last = format!("HTTP {status}: {text}");
                }
                Err(e) => last = e.to_string(),
            }
            log::warn!("llm request attempt {attempt}/{attempts} failed: {last}");
            if attempt < attempts {
                std::thread::sleep(Duration::from_millis(100 << (attempt - 1).min(5)));
            }
        }
        Err(LlmError::Transport { attempts, detail: last })
    }

    fn clean(&self, text: &str) -> String {
        let mut out = text;
        for s in self.cfg.stop.iter().chain([&self.cfg.fim_middle, &self.cfg.fim_suffix, &self.cfg.fim_prefix]) {
            let s = s.trim();
            if s.is_empty() {
                continue;
            }
            if let Some(i) = out.find(s) {
                out = &out[..i];
            }
        }
        out.to_string()
    }
}

fn extract_text(body: &str) -> Result<String, LlmError> {
    let v: serde_json::Value = serde_json::from_str(body).map_err(|e| LlmError::Malformed(e.to_string()))?;
    let choice = v
        .get("choices")
        .and_then(|c| c.get(0))
        .ok_or_else(|| LlmError::Malformed("missing choices[0]".into()))?;
    choice
        .get("text")
        .and_then(|t| t.as_str())
        .map(str::to_string)
        .ok_or_else(|| LlmError::Malformed("missing choices[0].text".into()))
}

impl LlmBackend for HttpBackend {
    fn complete(&self, prompt: &str, nonce: u64) -> Result<String, LlmError> {
        let text = self.post(prompt, None, nonce)?;
        Ok(self.clean(&text))
    }

    fn fill_in_middle(&self, prefix: &str, suffix: &str, nonce: u64) -> Result<String, LlmError> {
        if suffix.is_empty() {
            return self.complete(prefix, nonce);
        }
        let text = match self.cfg.fim_mode {
            FimMode::Suffix => self.post(prefix, Some(suffix), nonce)?,
            FimMode::Sentinel => {
                let prompt = format!(
                    "{}{}{}{}{}",
                    self.cfg.fim_prefix, prefix, self.cfg.fim_suffix, suffix, self.cfg.fim_middle
                );
                self.post(&prompt, None, nonce)?
            }
        };
        Ok(self.clean(&text))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MockConfig {
    pub seed: u64,
    /// Probability of answering with code that cannot parse.
    pub invalid_rate: f64,
    /// String literals the mock writes into generated code.
    pub token_pool: Vec<String>,
}

impl Default for MockConfig {
    fn default() -> Self {
        MockConfig {
            seed: 0,
            invalid_rate: 0.1,
            token_pool: ["(", ")", "*", "()", ")(", "(()", "())", "**"].iter().map(|s| s.to_string()).collect(),
        }
    }
}

/// Offline stand-in for a code model. Writes a few statements that emit
/// literals from the token pool, indented to fit the hole. Answers depend
/// only on the seed, the nonce and the prompt text.
pub struct MockLlm {
    cfg: MockConfig,
}

struct HoleShape {
    indent: usize,
    rng: String,
    output: Option<String>,
    accumulator: Option<String>,
}

fn indent_of(line: &str) -> usize {
    line.len() - line.trim_start_matches([' ', '\t']).len()
}

fn code_lines(text: &str) -> impl DoubleEndedIterator<Item = &str> {
    text.lines().filter(|l| !l.trim().is_empty() && !l.trim_start().starts_with('#'))
}

impl MockLlm {
    pub fn new(cfg: MockConfig) -> Self {
        MockLlm { cfg }
    }

    fn shape(prefix: &str) -> HoleShape {
        let mut params: Vec<String> = Vec::new();
        let mut accumulator = None;
        for line in code_lines(prefix) {
            let t = line.trim();
            if let Some(rest) = t.strip_prefix("def ") {
                if let (Some(open), Some(close)) = (rest.find('('), rest.rfind(')')) {
                    params = rest[open + 1..close]
                        .split(',')
                        .map(|p| p.split([':', '=']).next().unwrap_or("").trim().to_string())
                        .filter(|p| !p.is_empty())
                        .collect();
                }
            } else if let Some((lhs, rhs)) = t.split_once('=') {
                let lhs = lhs.trim().trim_end_matches('+').trim();
                let rhs = rhs.trim();
                let is_ident = !lhs.is_empty() && lhs.chars().all(|c| c.is_alphanumeric() || c == '_');
                if is_ident && (rhs == "\"\"" || rhs == "''" || t.contains("+=")) {
                    accumulator = Some(lhs.to_string());
                }
            }
        }
        let indent = match code_lines(prefix).next_back() {
            Some(last) if last.trim_end().ends_with(':') => indent_of(last) + 4,
            Some(last) if indent_of(last) > 0 => indent_of(last),
            _ => 4,
        };
        HoleShape {
            indent,
            rng: params.first().cloned().unwrap_or_else(|| "rng".into()),
            output: params.get(1).cloned(),
            accumulator,
        }
    }

    fn emit(&self, shape: &HoleShape, indent: usize, rng: &mut ChaCha8Rng) -> String {
        let tok = &self.cfg.token_pool[rng.gen_range(0..self.cfg.token_pool.len())];
        let lit = format!("{tok:?}");
        let pad = " ".repeat(indent);
        match (&shape.output, &shape.accumulator) {
            (Some(out), _) => format!("{pad}{out}.write({lit})\n"),
            (None, Some(acc)) => format!("{pad}{acc} += {lit}\n"),
            (None, None) => format!("{pad}return {lit}\n"),
        }
    }

    fn statements(&self, shape: &HoleShape, indent: usize, rng: &mut ChaCha8Rng) -> String {
        let pad = " ".repeat(indent);
        let mut out = String::new();
        for _ in 0..rng.gen_range(1..=3) {
            match rng.gen_range(0..4) {
                0 => {
                    out.push_str(&format!("{pad}if {}.randint(0, 3) == 0:\n", shape.rng));
                    out.push_str(&self.emit(shape, indent + 4, rng));
                }
                1 => {
                    out.push_str(&format!("{pad}for _ in range({}.randint(0, 3)):\n", shape.rng));
                    out.push_str(&self.emit(shape, indent + 4, rng));
                }
                _ => out.push_str(&self.emit(shape, indent, rng)),
            }
            if shape.output.is_none() && shape.accumulator.is_none() {
                break;
            }
        }
        out
    }

    fn respond(&self, prefix: &str, suffix: &str, nonce: u64) -> String {
        let mut key = prefix.as_bytes().to_vec();
        key.push(0);
        key.extend_from_slice(suffix.as_bytes());
        let mut rng = ChaCha8Rng::seed_from_u64(mix64(mix64(self.cfg.seed, nonce), fnv1a(&key)));
        if rng.gen_bool(self.cfg.invalid_rate) {
            // A stray closing bracket never lexes.
            return ")(\n".into();
        }
        let shape = Self::shape(prefix);
        let mut out = self.statements(&shape, shape.indent, &mut rng);
        let next = code_lines(suffix).next();
        match next {
            Some(line) => {
                let s_indent = indent_of(line);
                let t = line.trim_start();
                if t.starts_with("elif") || t.starts_with("else") {
                    out.push_str(&format!("{}if {}.randint(0, 3) == 0:\n", " ".repeat(s_indent), shape.rng));
                    out.push_str(&self.emit(&shape, s_indent + 4, &mut rng));
                } else if s_indent > shape.indent {
                    out.push_str(&format!("{}if {}.randint(0, 3) == 0:\n", " ".repeat(shape.indent), shape.rng));
                }
            }
            None if suffix.is_empty() => {
                if let (None, Some(acc)) = (&shape.output, &shape.accumulator) {
                    out.push_str(&format!("    return {acc}\n"));
                }
            }
            None => {}
        }
        out
    }
}

impl LlmBackend for MockLlm {
    fn complete(&self, prompt: &str, nonce: u64) -> Result<String, LlmError> {
        Ok(self.respond(prompt, "", nonce))
    }

    fn fill_in_middle(&self, prefix: &str, suffix: &str, nonce: u64) -> Result<String, LlmError> {
        Ok(self.respond(prefix, suffix, nonce))
    }
}

/// Returns canned responses in call order. Requests are never issued
/// concurrently, so the n-th request gets the n-th response.
pub struct ScriptedLlm {
    responses: Vec<String>,
    next: AtomicUsize,
}

impl ScriptedLlm {
    pub fn new<S: Into<String>>(responses: impl IntoIterator<Item = S>) -> Self {
        ScriptedLlm { responses: responses.into_iter().map(Into::into).collect(), next: AtomicUsize::new(0) }
    }

    pub fn calls(&self) -> usize {
        self.next.load(Ordering::SeqCst)
    }

    fn pop(&self) -> Result<String, LlmError> {
        let i = self.next.fetch_add(1, Ordering::SeqCst);
        self.responses.get(i).cloned().ok_or(LlmError::Exhausted)
    }
}

impl LlmBackend for ScriptedLlm {
    fn complete(&self, _prompt: &str, _nonce: u64) -> Result<String, LlmError> {
        self.pop()
    }

    fn fill_in_middle(&self, _prefix: &str, _suffix: &str, _nonce: u64) -> Result<String, LlmError> {
        self.pop()
    }

    fn concurrent(&self) -> bool {
        false
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::genlang;
    use crate::toy::programs;

    fn mock(rate: f64) -> MockLlm {
        MockLlm::new(MockConfig { invalid_rate: rate, ..MockConfig::default() })
    }

    #[test]
    fn mock_is_deterministic() {
        let m = mock(0.1);
        for n in 0..20 {
            assert_eq!(m.complete("def gen(rng, out):\n", n), m.complete("def gen(rng, out):\n", n));
        }
        let outs: std::collections::BTreeSet<_> = (0..20).map(|n| m.complete("def gen(rng, out):\n", n).unwrap()).collect();
        assert!(outs.len() > 5);
    }

    #[test]
    fn mock_invalid_rate_extremes() {
        let bad = mock(1.0);
        let src = format!("def gen(rng, out):\n{}", bad.complete("def gen(rng, out):\n", 1).unwrap());
        assert!(genlang::parse(&src).is_err());
        let good = mock(0.0);
        for n in 0..50 {
            let src = format!("def gen(rng, out):\n{}", good.complete("def gen(rng, out):\n", n).unwrap());
            assert!(genlang::parse(&src).is_ok(), "{src}");
        }
    }

    #[test]
    fn mock_fits_holes() {
        let m = mock(0.0);
        let lines: Vec<&str> = programs::OPEN_ONLY.split_inclusive('\n').collect();
        let mut parsed = 0;
        for n in 0..40 {
            let prefix = lines[..5].concat();
            let suffix = lines[6..].concat();
            let mid = m.fill_in_middle(&prefix, &suffix, n).unwrap();
            if genlang::parse(&format!("{prefix}{mid}{suffix}")).is_ok() {
                parsed += 1;
            }
            assert!(mid.contains("random_sequence +="), "{mid}");
        }
        assert_eq!(parsed, 40);
        let prefix = lines[..8].concat();
        let done = m.complete(&prefix, 3).unwrap();
        assert!(done.ends_with("    return random_sequence\n"));
    }

    #[test]
    fn scripted_returns_in_order() {
        let s = ScriptedLlm::new(["a", "b"]);
        assert_eq!(s.complete("", 0).unwrap(), "a");
        assert_eq!(s.fill_in_middle("", "x", 0).unwrap(), "b");
        assert_eq!(s.complete("", 0), Err(LlmError::Exhausted));
        assert_eq!(s.calls(), 3);
    }

    #[test]
    fn batch_keeps_order() {
        let m = mock(0.2);
        let qs: Vec<_> = (0..30)
            .map(|i| (Prompt { prefix: format!("def gen(rng, out):\n    x{i} = 1\n"), suffix: String::new(), dropped_lines: 0 }, i as u64))
            .collect();
        let par = query_batch(&m, &qs, 8);
        let seq = query_batch(&m, &qs, 1);
        assert_eq!(par, seq);
    }

    #[test]
    fn config_validation() {
        assert!(LlmConfig::default().validate().is_ok());
        let bad = LlmConfig { max_new_tokens: 9000, ..LlmConfig::default() };
        assert!(bad.validate().is_err());
        let bad = LlmConfig { temperature: -1.0, ..LlmConfig::default() };
        assert!(bad.validate().is_err());
        assert_eq!(LlmConfig::default().prompt_budget(), 8192 - 512);
    }

    #[test]
    fn response_extraction() {
        assert_eq!(extract_text(r#"{"choices":[{"text":"abc"}]}"#).unwrap(), "abc");
        assert!(matches!(extract_text(r#"{"choices":[]}"#), Err(LlmError::Malformed(_))));
        assert!(matches!(extract_text("not json"), Err(LlmError::Malformed(_))));
    }
}
