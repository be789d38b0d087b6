//! The chat-completion forecaster against a scripted local server.

use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::Duration;

use chrono::{TimeZone, Utc};
use forecheck::forecasters::{Forecaster, HttpConfig, HttpForecaster, PromptStyle};
use forecheck::{CheckKind, CheckTuple, Error, ErrorCategory, ForecastingQuestion};
use serde_json::{json, Value};

struct Request {
    headers: Vec<(String, String)>,
    body: Value,
}

impl Request {
    fn header(&self, name: &str) -> Option<&str> {
        self.headers
            .iter()
            .find(|(k, _)| k.eq_ignore_ascii_case(name))
            .map(|(_, v)| v.as_str())
    }

    fn prompt(&self) -> &str {
        self.body["messages"][0]["content"].as_str().unwrap()
    }
}

/// Serves one scripted `(status, body)` per connection, in order; the last
/// entry repeats once the script runs out.
struct FakeServer {
    url: String,
    requests: Arc<Mutex<Vec<Request>>>,
    max_in_flight: Arc<AtomicUsize>,
}

fn completion(content: &str) -> (u16, String) {
    (200, json!({"choices": [{"message": {"role": "assistant", "content": content}}]}).to_string())
}

fn serve(script: Vec<(u16, String)>, delay: Duration) -> FakeServer {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/v1/chat/completions", listener.local_addr().unwrap());
    let requests = Arc::new(Mutex::new(Vec::new()));
    let max_in_flight = Arc::new(AtomicUsize::new(0));
    let in_flight = Arc::new(AtomicUsize::new(0));
    let next = Arc::new(AtomicUsize::new(0));
    let script = Arc::new(script);
    {
        let requests = requests.clone();
        let max_in_flight = max_in_flight.clone();
        thread::spawn(move || {
            for stream in listener.incoming() {
                let Ok(mut stream) = stream else { continue };
                let (requests, max_in_flight, in_flight, next, script) =
                    (requests.clone(), max_in_flight.clone(), in_flight.clone(), next.clone(), script.clone());
                thread::spawn(move || {
                    let now = in_flight.fetch_add(1, Ordering::SeqCst) + 1;
                    max_in_flight.fetch_max(now, Ordering::SeqCst);
                    let mut reader = BufReader::new(stream.try_clone().unwrap());
                    let mut line = String::new();
                    reader.read_line(&mut line).unwrap();
                    let mut headers = Vec::new();
                    loop {
                        let mut h = String::new();
                        reader.read_line(&mut h).unwrap();
                        let h = h.trim_end();
                        if h.is_empty() {
                            break;
                        }
                        let (k, v) = h.split_once(':').unwrap();
                        headers.push((k.trim().to_string(), v.trim().to_string()));
                    }
                    let len: usize = headers
                        .iter()
                        .find(|(k, _)| k.eq_ignore_ascii_case("content-length"))
                        .map(|(_, v)| v.parse().unwrap())
                        .unwrap_or(0);
                    let mut body = vec![0; len];
                    reader.read_exact(&mut body).unwrap();
                    let i = next.fetch_add(1, Ordering::SeqCst);
                    requests.lock().unwrap().push(Request { headers, body: serde_json::from_slice(&body).unwrap() });
                    thread::sleep(delay);
                    let (status, text) = &script[i.min(script.len() - 1)];
                    let resp = format!(
                        "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{text}",
                        text.len()
                    );
                    in_flight.fetch_sub(1, Ordering::SeqCst);
                    let _ = stream.write_all(resp.as_bytes());
                });
            }
        });
    }
    FakeServer { url, requests, max_in_flight }
}

fn config(url: &str) -> HttpConfig {
    let mut cfg = HttpConfig::new(url, "test-model");
    cfg.backoff_ms = 1;
    cfg.api_key_env = "FORECHECK_TEST_UNSET_KEY".into();
    cfg
}

fn question(id: &str) -> ForecastingQuestion {
    let mut q = ForecastingQuestion::new(id, format!("Will {id} happen by 2030?"), Utc.with_ymd_and_hms(2030, 1, 1, 0, 0, 0).unwrap());
    q.body = "Resolves YES if it happens.".into();
    q
}

#[test]
fn basic_prompt_round_trip() {
    let server = serve(vec![completion("0.42")], Duration::ZERO);
    let mut cfg = config(&server.url);
    cfg.api_key_env = "FORECHECK_TEST_KEY_BASIC".into();
    std::env::set_var("FORECHECK_TEST_KEY_BASIC", "sekret");
    let f = HttpForecaster::new("llm", cfg);
    let out = f.forecast(&question("alpha"), 7).unwrap();
    assert_eq!(out.prob, 0.42);
    let reqs = server.requests.lock().unwrap();
    assert_eq!(reqs.len(), 1);
    let r = &reqs[0];
    assert_eq!(r.body["model"], "test-model");
    assert_eq!(r.body["temperature"], 0.0);
    assert_eq!(r.body["seed"], 7);
    assert!(r.prompt().contains("Will alpha happen by 2030?"));
    assert_eq!(r.header("authorization"), Some("Bearer sekret"));
}

#[test]
fn no_token_no_auth_header() {
    let server = serve(vec![completion("0.5")], Duration::ZERO);
    HttpForecaster::new("llm", config(&server.url)).forecast(&question("a"), 0).unwrap();
    assert!(server.requests.lock().unwrap()[0].header("authorization").is_none());
}

#[test]
fn transient_statuses_are_retried() {
    let server = serve(
        vec![(503, "busy".into()), (429, "slow down".into()), completion("Probability: 0.3")],
        Duration::ZERO,
    );
    let out = HttpForecaster::new("llm", config(&server.url)).forecast(&question("a"), 0).unwrap();
    assert_eq!(out.prob, 0.3);
    assert_eq!(server.requests.lock().unwrap().len(), 3);
}

#[test]
fn retries_exhausted() {
    let server = serve(vec![(500, "boom".into())], Duration::ZERO);
    let mut cfg = config(&server.url);
    cfg.max_retries = 2;
    let err = HttpForecaster::new("llm", cfg).forecast(&question("a"), 0).unwrap_err();
    match &err {
        Error::Http { payload, .. } => assert_eq!(payload.as_deref(), Some("boom")),
        other => panic!("{other:?}"),
    }
    assert_eq!(err.category(), ErrorCategory::Network);
    assert_eq!(server.requests.lock().unwrap().len(), 3);
}

#[test]
fn client_errors_are_not_retried() {
    let server = serve(vec![(400, "bad request".into()), completion("0.5")], Duration::ZERO);
    let err = HttpForecaster::new("llm", config(&server.url)).forecast(&question("a"), 0).unwrap_err();
    assert!(matches!(err, Error::Http { .. }));
    assert_eq!(server.requests.lock().unwrap().len(), 1);
}

#[test]
fn unparseable_answer_keeps_payload() {
    let server = serve(vec![completion("I cannot say.")], Duration::ZERO);
    match HttpForecaster::new("llm", config(&server.url)).forecast(&question("a"), 0) {
        Err(Error::ForecastParse { payload, .. }) => assert_eq!(payload, "I cannot say."),
        other => panic!("{other:?}"),
    }
}

#[test]
fn chain_of_thought_two_steps() {
    let server = serve(
        vec![
            completion("Base rates are low. I'd put this around one in five."),
            completion("not json at all"),
            completion("{\"reasoning\": \"low base rate\", \"prob\": 0.2}"),
        ],
        Duration::ZERO,
    );
    let mut cfg = config(&server.url);
    cfg.prompt_style = PromptStyle::Cot;
    cfg.extraction_model = Some("extractor".into());
    let out = HttpForecaster::new("llm", cfg).forecast(&question("a"), 0).unwrap();
    assert_eq!(out.prob, 0.2);
    let reasoning = out.reasoning.unwrap();
    assert!(reasoning.contains("one in five"));
    assert!(reasoning.contains("low base rate"));
    let reqs = server.requests.lock().unwrap();
    assert_eq!(reqs.len(), 3);
    assert_eq!(reqs[0].body["model"], "test-model");
    assert_eq!(reqs[1].body["model"], "extractor");
    assert!(reqs[1].prompt().contains("one in five"));
}

#[test]
fn concurrency_is_capped() {
    let server = serve(vec![completion("0.5")], Duration::from_millis(40));
    let mut cfg = config(&server.url);
    cfg.concurrency = 2;
    let f = Arc::new(HttpForecaster::new("llm", cfg));
    let handles: Vec<_> = (0..6)
        .map(|i| {
            let f = f.clone();
            thread::spawn(move || f.forecast(&question(&format!("q{i}")), 0).unwrap())
        })
        .collect();
    for h in handles {
        h.join().unwrap();
    }
    assert_eq!(server.requests.lock().unwrap().len(), 6);
    let peak = server.max_in_flight.load(Ordering::SeqCst);
    assert!((1..=2).contains(&peak), "peak {peak}");
}

#[test]
fn tuple_failure_names_coordinate() {
    let server = serve(vec![completion("0.6"), completion("no number here")], Duration::ZERO);
    let mut cfg = config(&server.url);
    cfg.concurrency = 1;
    let f = HttpForecaster::new("llm", cfg);
    let t = CheckTuple::new("t", CheckKind::Negation, vec![question("p"), question("not-p")]);
    match f.forecast_tuple(&t, 0) {
        Err(Error::Coordinate { index, source }) => {
            assert_eq!(index, 1);
            assert!(matches!(*source, Error::ForecastParse { .. }));
        }
        other => panic!("{other:?}"),
    }
}
