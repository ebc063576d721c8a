//! Retry policy with scripted stub backends, and the chat-completion client
//! against a local mock server.

mod common;

use std::io::{BufRead, BufReader, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::thread;

use proptest::prelude::*;
use serde_json::{json, Value};

use townsim::decision::{
    decide_with_retry, validate_plan, AttemptOutcome, BackendError, ConversationContext, DecisionBackend,
    DecisionContext, FailureReason, RemoteBackend, RemoteConfig, ScriptedOracle,
};
use townsim::engine::{self, EventBody, RunError, Simulation};
use townsim::world::{RunMode, Scenario};

const BISTRO: &str = r#"{"time": 12, "action": "eat", "target": "new bistro near Oak View Condos", "description": "try the new place", "energy_considerations": "hungry"}"#;

/// Fails the first `bad` calls with a hallucinated location, then answers
/// like the oracle.
struct Flaky {
    bad: usize,
    calls: AtomicUsize,
    oracle: ScriptedOracle,
}

impl Flaky {
    fn new(sc: &Scenario, bad: usize) -> Self {
        Flaky {
            bad,
            calls: AtomicUsize::new(0),
            oracle: common::oracle_for(sc),
        }
    }
}

impl DecisionBackend for Flaky {
    fn name(&self) -> &str {
        "flaky"
    }
    fn decide(&self, ctx: &DecisionContext, prompt: &str) -> Result<String, BackendError> {
        if self.calls.fetch_add(1, Ordering::SeqCst) < self.bad {
            Ok(BISTRO.to_string())
        } else {
            self.oracle.decide(ctx, prompt)
        }
    }
    fn converse(&self, ctx: &ConversationContext, prompt: &str) -> Result<String, BackendError> {
        self.oracle.converse(ctx, prompt)
    }
}

fn lunch_context(sc: &Scenario) -> DecisionContext {
    let oracle = common::oracle_for(sc);
    let mut sim = Simulation::new(sc, &oracle);
    while sim.now().tick < 12 {
        sim.step();
    }
    sim.decision_context("Rebecca Torres").unwrap()
}

#[test]
fn valid_first_answer_takes_one_attempt() {
    let sc = common::reference();
    let ctx = lunch_context(&sc);
    let d = decide_with_retry(&Flaky::new(&sc, 0), &common::oracle_for(&sc), &ctx, 2).unwrap();
    assert_eq!(d.attempts.len(), 1);
    assert!(!d.fallback);
}

#[test]
fn two_hallucinations_then_valid() {
    let sc = common::reference();
    let ctx = lunch_context(&sc);
    let backend = Flaky::new(&sc, 2);
    let d = decide_with_retry(&backend, &common::oracle_for(&sc), &ctx, 2).unwrap();
    assert_eq!(d.attempts.len(), 3);
    assert!(!d.fallback);
    for a in &d.attempts[..2] {
        match &a.outcome {
            AttemptOutcome::Rejected { failure } => assert_eq!(failure.reason, FailureReason::UnknownLocation),
            other => panic!("expected rejection, got {other:?}"),
        }
    }
    assert_eq!(d.attempts[2].outcome, AttemptOutcome::Accepted);
    // The retry prompt carries the failure back to the backend.
    assert!(d.attempts[2].prompt_chars > d.attempts[0].prompt_chars);
}

#[test]
fn exhausted_retries_fall_back_to_the_oracle() {
    let sc = common::reference();
    let ctx = lunch_context(&sc);
    let oracle = common::oracle_for(&sc);
    let d = decide_with_retry(&Flaky::new(&sc, usize::MAX), &oracle, &ctx, 2).unwrap();
    assert_eq!(d.attempts.len(), 3);
    assert!(d.fallback);
    assert_eq!(d.plan, oracle.plan(&ctx));
}

#[test]
fn fallback_is_logged_in_a_run() {
    let mut sc = common::reference();
    sc.sim.days = 1;
    sc.sim.max_retries = 2;
    let out = engine::run(&sc, &Flaky::new(&sc, usize::MAX), RunMode::Deterministic).unwrap();
    let events = out.log.events();
    let fallbacks = events
        .iter()
        .filter(|e| matches!(e.body, EventBody::BackendFallback { attempts: 3 }))
        .count();
    let failures = events
        .iter()
        .filter(|e| matches!(&e.body, EventBody::ValidationFailure { reason, .. } if reason == "unknown_location"))
        .count();
    assert!(fallbacks > 0);
    assert_eq!(failures, 3 * fallbacks);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]
    #[test]
    fn attempts_bounded_and_plan_valid(bad in 0usize..6, retries in 0u32..4) {
        let sc = common::reference();
        let ctx = lunch_context(&sc);
        let d = decide_with_retry(&Flaky::new(&sc, bad), &common::oracle_for(&sc), &ctx, retries).unwrap();
        prop_assert!(d.attempts.len() <= retries as usize + 1);
        prop_assert_eq!(d.attempts.len(), bad.min(retries as usize) + 1);
        prop_assert_eq!(d.fallback, bad > retries as usize);
        let raw = serde_json::to_string(&d.plan).unwrap();
        prop_assert!(validate_plan(&raw, &ctx).is_ok());
    }
}

// ------------------------------------------------------------------ mock

#[derive(Debug, Clone)]
struct Seen {
    auth: Option<String>,
    body: Value,
}

/// Minimal HTTP/1.1 server: one request per connection, answered by `reply`
/// with `(status, body)`.
fn serve<F>(reply: F) -> (String, Arc<Mutex<Vec<Seen>>>)
where
    F: Fn(usize, &Value) -> (u16, String) + Send + 'static,
{
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/v1/chat/completions", listener.local_addr().unwrap());
    let seen = Arc::new(Mutex::new(Vec::new()));
    let log = seen.clone();
    thread::spawn(move || {
        for (n, stream) in listener.incoming().enumerate() {
            let Ok(stream) = stream else { break };
            let Some(req) = read_request(&stream) else { continue };
            let (status, body) = reply(n, &req.body);
            log.lock().unwrap().push(req);
            let _ = write_response(stream, status, &body);
        }
    });
    (url, seen)
}

fn read_request(stream: &TcpStream) -> Option<Seen> {
    let mut r = BufReader::new(stream);
    let mut line = String::new();
    r.read_line(&mut line).ok()?;
    let (mut len, mut auth) = (0usize, None);
    loop {
        line.clear();
        r.read_line(&mut line).ok()?;
        let l = line.trim_end();
        if l.is_empty() {
            break;
        }
        let (k, v) = l.split_once(':')?;
        match k.to_ascii_lowercase().as_str() {
            "content-length" => len = v.trim().parse().ok()?,
            "authorization" => auth = Some(v.trim().to_string()),
            _ => {}
        }
    }
    let mut body = vec![0; len];
    r.read_exact(&mut body).ok()?;
    Some(Seen {
        auth,
        body: serde_json::from_slice(&body).ok()?,
    })
}

fn write_response(mut s: TcpStream, status: u16, body: &str) -> std::io::Result<()> {
    write!(
        s,
        "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
        body.len()
    )?;
    s.flush()
}

fn completion(content: &str) -> String {
    json!({"choices": [{"message": {"role": "assistant", "content": content}}]}).to_string()
}

fn prompt_of(body: &Value) -> &str {
    body["messages"][1]["content"].as_str().unwrap_or("")
}

#[test]
fn remote_speaks_chat_completion() {
    let (url, seen) = serve(|_, _| (200, completion("```json\n{\"a\": 1}\n```")));
    let mut cfg = RemoteConfig::new(url);
    cfg.api_key = Some("sk-test".into());
    cfg.model = "town-model".into();
    cfg.temperature = 0.2;
    let backend = RemoteBackend::new(cfg);
    assert_eq!(backend.complete("hello there").unwrap(), "```json\n{\"a\": 1}\n```");
    let seen = seen.lock().unwrap();
    assert_eq!(seen.len(), 1);
    assert_eq!(seen[0].auth.as_deref(), Some("Bearer sk-test"));
    assert_eq!(seen[0].body["model"], "town-model");
    assert_eq!(seen[0].body["temperature"], 0.2);
    assert_eq!(seen[0].body["messages"][0]["role"], "system");
    assert_eq!(prompt_of(&seen[0].body), "hello there");
}

#[test]
fn server_errors_are_transient_until_the_budget_runs_out() {
    let (url, seen) = serve(|_, _| (503, "{}".into()));
    let mut cfg = RemoteConfig::new(url);
    cfg.max_consecutive_failures = 2;
    let backend = RemoteBackend::new(cfg);
    assert!(matches!(backend.complete("x"), Err(BackendError::Transient(_))));
    assert!(matches!(backend.complete("x"), Err(BackendError::Fatal(_))));
    // Each call makes one network-level retry.
    assert_eq!(seen.lock().unwrap().len(), 4);
}

#[test]
fn auth_failure_is_fatal_at_once() {
    let (url, _) = serve(|_, _| (401, "{\"error\": \"bad key\"}".into()));
    let backend = RemoteBackend::new(RemoteConfig::new(url));
    assert!(matches!(backend.complete("x"), Err(BackendError::Fatal(_))));
}

#[test]
fn garbled_body_is_transient() {
    let (url, _) = serve(|_, _| (200, "not json".into()));
    let backend = RemoteBackend::new(RemoteConfig::new(url));
    assert!(matches!(backend.complete("x"), Err(BackendError::Transient(_))));
}

const REST: &str = r#"```json
{"time": 0, "action": "rest", "target": "Town Park", "description": "walk in the park", "energy_considerations": "easy", "reasoning": "nice weather"}
```"#;

#[test]
fn remote_run_end_to_end() {
    let (url, seen) = serve(|_, body| {
        let p = prompt_of(body);
        if p.starts_with("Write a short, natural conversation") {
            (
                200,
                completion(r#"{"exchanges": [{"speaker": "A", "text": "Hi"}], "intents": []}"#),
            )
        } else {
            (200, completion(REST))
        }
    });
    let mut sc = common::reference();
    sc.sim.days = 1;
    let backend = RemoteBackend::new(RemoteConfig::new(url));
    let out = engine::run(&sc, &backend, RunMode::Deterministic).unwrap();
    assert!(!out.transcripts.is_empty());
    assert!(out.transcripts.iter().all(|t| !t.prompt.is_empty()));
    // Resting through meal times is fine; emergencies reject it and fall back.
    let plans = out
        .log
        .events()
        .iter()
        .filter(|e| matches!(e.body, EventBody::Plan { .. }))
        .count();
    assert!(plans > 0);
    assert!(seen.lock().unwrap().len() >= plans);
}

#[test]
fn dead_backend_stops_the_run_with_partial_output() {
    let (url, _) = serve(|n, _| {
        if n < 30 {
            (200, completion(REST))
        } else {
            (401, "{}".into())
        }
    });
    let mut sc = common::reference();
    sc.sim.days = 2;
    let backend = RemoteBackend::new(RemoteConfig::new(url));
    match engine::run(&sc, &backend, RunMode::Deterministic) {
        Err(RunError::BackendUnavailable { partial, .. }) => {
            assert!(!partial.log.is_empty());
            let last = partial.log.events().last().unwrap();
            assert_eq!(last.day, 1);
        }
        Ok(_) => panic!("run should stop when the backend dies"),
    }
}
