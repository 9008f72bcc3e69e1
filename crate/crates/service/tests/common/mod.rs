#![allow(dead_code)]

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use chrono::NaiveDate;
use codepace_core::ingest::{ingest_intents, ingest_questions};
use codepace_core::learning::FixedClock;
use codepace_core::provider::testing::SwitchableProvider;
use codepace_core::provider::MockProvider;
use codepace_core::storage::MemoryStore;
use codepace_core::Corpus;
use codepace_service::{AppParts, RunningServer};
use reqwest::blocking::Client;
use serde_json::Value;

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)
}

pub fn fixture_corpus() -> Corpus {
    let provider = MockProvider::default();
    let mut corpus = Corpus::new();
    ingest_questions(fixture("q.jsonl"), &mut corpus, &provider).expect("questions ingest");
    ingest_intents(fixture("intents.json"), &mut corpus, &provider).expect("intents ingest");
    corpus
}

/// A live service on an ephemeral loopback port backed by the mock provider,
/// an in-memory store and a hand-driven clock.
pub struct Harness {
    pub server: RunningServer,
    pub client: Client,
    pub clock: Arc<FixedClock>,
    pub provider: Arc<SwitchableProvider<MockProvider>>,
    pub store: Arc<MemoryStore>,
}

pub struct Reply {
    pub status: u16,
    pub body: Value,
    pub raw: String,
}

pub fn start_day() -> NaiveDate {
    NaiveDate::from_ymd_opt(2025, 9, 1).unwrap()
}

impl Harness {
    pub fn start() -> Self {
        Self::start_with(fixture_corpus())
    }

    pub fn start_with(corpus: Corpus) -> Self {
        let clock = Arc::new(FixedClock::at_date(start_day()));
        let provider = Arc::new(SwitchableProvider::new(MockProvider::default()));
        let store = Arc::new(MemoryStore::new());
        let state = AppParts {
            storage: store.clone(),
            corpus,
            provider: provider.clone(),
            clock: clock.clone(),
            seed: Some(42),
            pbkdf2_rounds: 16,
        }
        .into_state();
        let server = RunningServer::start(state, SocketAddr::from(([127, 0, 0, 1], 0))).expect("server starts");
        Harness {
            server,
            client: Client::new(),
            clock,
            provider,
            store,
        }
    }

    pub fn call(&self, method: &str, path: &str, token: Option<&str>, body: Option<&str>) -> Reply {
        let url = format!("{}{}", self.server.base_url(), path);
        let method = reqwest::Method::from_bytes(method.as_bytes()).unwrap();
        let mut request = self.client.request(method, url);
        if let Some(token) = token {
            request = request.header("Authorization", format!("Bearer {token}"));
        }
        if let Some(body) = body {
            request = request.header("Content-Type", "application/json").body(body.to_string());
        }
        let response = request.send().expect("request completes");
        let status = response.status().as_u16();
        let raw = response.text().unwrap_or_default();
        let body = serde_json::from_str(&raw).unwrap_or(Value::Null);
        Reply { status, body, raw }
    }

    pub fn get(&self, path: &str, token: &str) -> Reply {
        self.call("GET", path, Some(token), None)
    }

    pub fn post(&self, path: &str, token: &str, body: &str) -> Reply {
        self.call("POST", path, Some(token), Some(body))
    }

    pub fn register(&self, user: &str, password: &str) -> Reply {
        let body = serde_json::json!({"username": user, "password": password}).to_string();
        self.call("POST", "/api/auth/register", None, Some(&body))
    }

    pub fn login(&self, user: &str, password: &str) -> Reply {
        let body = serde_json::json!({"username": user, "password": password}).to_string();
        self.call("POST", "/api/auth/login", None, Some(&body))
    }

    /// Registers `user` and returns a fresh bearer token.
    pub fn token_for(&self, user: &str) -> String {
        let password = format!("{user}-password");
        assert_eq!(self.register(user, &password).status, 201);
        let reply = self.login(user, &password);
        assert_eq!(reply.status, 200, "{}", reply.raw);
        reply.body["token"].as_str().unwrap().to_string()
    }
}

/// Validates `value` against `schemas/<name>.json`, returning the errors.
pub fn schema_errors(name: &str, value: &Value) -> Vec<String> {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("schemas").join(format!("{name}.json"));
    let schema: Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    let validator = jsonschema::validator_for(&schema).expect("schema compiles");
    validator.iter_errors(value).map(|e| format!("{} at {}", e, e.instance_path)).collect()
}

pub fn assert_schema(name: &str, value: &Value) {
    let errors = schema_errors(name, value);
    assert!(errors.is_empty(), "{name}: {errors:?}\n{value:#}");
}

/// Every authenticated endpoint with a body that would otherwise be valid.
pub fn protected_endpoints() -> Vec<(&'static str, String, Option<String>)> {
    vec![
        ("GET", "/api/quiz/static?topic=loops&difficulty=beginner&count=2".into(), None),
        (
            "POST",
            "/api/quiz/dynamic".into(),
            Some(r#"{"topic":"loops","difficulty":"beginner","count":1}"#.into()),
        ),
        ("POST", "/api/quiz/some-session/submit".into(), Some(r#"{"answers":{}}"#.into())),
        ("GET", "/api/questions/loop-b01/explain".into(), None),
        ("POST", "/api/chat".into(), Some(r#"{"message":"hello there"}"#.into())),
        (
            "POST",
            "/api/roadmap".into(),
            Some(r#"{"timeline_weeks":2,"topics":["loops"],"language":"python"}"#.into()),
        ),
        ("GET", "/api/tip".into(), None),
        ("GET", "/api/progress".into(), None),
    ]
}
