//! HTTP model backend against a scripted local server.

use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::{Arc, Mutex};
use std::thread;

use fuzzspace::llm::{BackendKind, FimMode, HttpBackend, LlmBackend, LlmConfig, LlmError};

struct Captured {
    headers: Vec<String>,
    body: serde_json::Value,
}

/// Serves one scripted `(status, body)` reply per connection, in order.
fn serve(replies: Vec<(u16, String)>) -> (String, Arc<Mutex<Vec<Captured>>>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/v1/completions", listener.local_addr().unwrap());
    let seen = Arc::new(Mutex::new(Vec::new()));
    let log = seen.clone();
    thread::spawn(move || {
        for (status, reply) in replies {
            let (stream, _) = listener.accept().unwrap();
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut headers = Vec::new();
            let mut len = 0;
            loop {
                let mut line = String::new();
                reader.read_line(&mut line).unwrap();
                let line = line.trim_end().to_string();
                if line.is_empty() {
                    break;
                }
                if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                    len = v.trim().parse().unwrap();
                }
                headers.push(line);
            }
            let mut body = vec![0; len];
            reader.read_exact(&mut body).unwrap();
            log.lock().unwrap().push(Captured { headers, body: serde_json::from_slice(&body).unwrap() });
            let mut stream = stream;
            write!(
                stream,
                "HTTP/1.1 {status} X\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{reply}",
                reply.len()
            )
            .unwrap();
        }
    });
    (url, seen)
}

fn ok(text: &str) -> (u16, String) {
    (200, serde_json::json!({ "choices": [{ "text": text }] }).to_string())
}

fn config(url: &str) -> LlmConfig {
    LlmConfig { backend: BackendKind::Http, endpoint_url: url.into(), retries: 2, request_timeout_secs: 5.0, ..LlmConfig::default() }
}

#[test]
fn completion_request_fields() {
    let (url, seen) = serve(vec![ok("    return x\n<EOT>junk")]);
    let b = HttpBackend::new(config(&url)).unwrap();
    assert_eq!(b.complete("def f():\n", 42).unwrap(), "    return x\n");
    let seen = seen.lock().unwrap();
    let body = &seen[0].body;
    assert_eq!(body["model"], "codellama/CodeLlama-13b-hf");
    assert_eq!(body["prompt"], "def f():\n");
    assert_eq!(body["temperature"], 0.2);
    assert_eq!(body["repetition_penalty"], 1.15);
    assert_eq!(body["max_tokens"], 512);
    assert_eq!(body["seed"], 42);
    assert!(body.get("suffix").is_none());
    assert!(!seen[0].headers.iter().any(|h| h.to_ascii_lowercase().starts_with("authorization")));
}

#[test]
fn sentinel_fill_in_middle() {
    let (url, seen) = serve(vec![ok("mid <EOT>")]);
    let b = HttpBackend::new(config(&url)).unwrap();
    assert_eq!(b.fill_in_middle("a\n", "c\n", 0).unwrap(), "mid ");
    assert_eq!(seen.lock().unwrap()[0].body["prompt"], "<PRE> a\n <SUF>c\n <MID>");
}

#[test]
fn suffix_fill_in_middle() {
    let (url, seen) = serve(vec![ok("mid")]);
    let b = HttpBackend::new(LlmConfig { fim_mode: FimMode::Suffix, ..config(&url) }).unwrap();
    assert_eq!(b.fill_in_middle("a\n", "c\n", 0).unwrap(), "mid");
    let body = &seen.lock().unwrap()[0].body;
    assert_eq!(body["prompt"], "a\n");
    assert_eq!(body["suffix"], "c\n");
}

#[test]
fn retries_server_errors() {
    let (url, seen) = serve(vec![(500, "{}".into()), (429, "{}".into()), ok("fine")]);
    let b = HttpBackend::new(config(&url)).unwrap();
    assert_eq!(b.complete("p", 0).unwrap(), "fine");
    assert_eq!(seen.lock().unwrap().len(), 3);
}

#[test]
fn server_errors_exhaust_retries() {
    let (url, _) = serve(vec![(503, "{}".into()); 3]);
    let b = HttpBackend::new(config(&url)).unwrap();
    assert!(matches!(b.complete("p", 0), Err(LlmError::Transport { attempts: 3, .. })));
}

#[test]
fn client_errors_fail_immediately() {
    let (url, seen) = serve(vec![(400, "bad prompt".into()), ok("unused")]);
    let b = HttpBackend::new(config(&url)).unwrap();
    match b.complete("p", 0) {
        Err(LlmError::Http { status: 400, body }) => assert_eq!(body, "bad prompt"),
        other => panic!("{other:?}"),
    }
    assert_eq!(seen.lock().unwrap().len(), 1);
}

#[test]
fn malformed_response() {
    let (url, _) = serve(vec![(200, "{\"choices\": []}".into()), (200, "not json".into())]);
    let b = HttpBackend::new(config(&url)).unwrap();
    assert!(matches!(b.complete("p", 0), Err(LlmError::Malformed(_))));
    assert!(matches!(b.complete("p", 0), Err(LlmError::Malformed(_))));
}

#[test]
fn bearer_token_from_environment() {
    std::env::set_var("FUZZSPACE_TEST_KEY", "sekrit");
    let (url, seen) = serve(vec![ok("x")]);
    let b = HttpBackend::new(LlmConfig { api_key_env: Some("FUZZSPACE_TEST_KEY".into()), ..config(&url) }).unwrap();
    b.complete("p", 0).unwrap();
    assert!(seen.lock().unwrap()[0].headers.iter().any(|h| h == "authorization: Bearer sekrit"));
}

#[test]
fn unreachable_endpoint() {
    let port = TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let b = HttpBackend::new(LlmConfig { retries: 1, ..config(&format!("http://127.0.0.1:{port}/v1/completions")) }).unwrap();
    assert!(matches!(b.complete("p", 0), Err(LlmError::Transport { attempts: 2, .. })));
}
