//! JSON-over-HTTP transport for remote language and vision models, with
//! strict response validation and record/replay fixtures.
//!
//! Replay mode never opens a socket: the HTTP agent is only constructed
//! for live and record endpoints.

use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use base64::Engine as _;
use rand::Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::geometry::Pixel;
use crate::instruction::InstructionBundle;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemaId {
    Decompose,
    Desirability,
    Landmark,
}

impl SchemaId {
    pub fn as_str(self) -> &'static str {
        match self {
            SchemaId::Decompose => "decompose",
            SchemaId::Desirability => "desirability",
            SchemaId::Landmark => "landmark",
        }
    }
}

/// Path to the offending field of a rejected response.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("malformed response at {0}")]
pub struct MalformedResponse(pub String);

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BackendError {
    #[error("backend unavailable: {0}")]
    Unavailable(String),
    #[error("backend call exceeded its deadline")]
    TimedOut,
    #[error("no fixture record for request digest {0}")]
    FixtureMiss(String),
    #[error(transparent)]
    Malformed(#[from] MalformedResponse),
}

/// A schema-checked response.
#[derive(Debug, Clone, PartialEq)]
pub enum Validated {
    Decompose(InstructionBundle),
    Desirability(Vec<f64>),
    /// `None` is an explicit not-found answer.
    Landmark(Option<Pixel>),
}

fn string_list(body: &Value, key: &str) -> Result<Vec<String>, MalformedResponse> {
    let arr = body
        .get(key)
        .ok_or_else(|| MalformedResponse(format!("{key} missing")))?
        .as_array()
        .ok_or_else(|| MalformedResponse(key.to_string()))?;
    arr.iter()
        .enumerate()
        .map(|(i, v)| {
            v.as_str()
                .map(str::to_string)
                .ok_or_else(|| MalformedResponse(format!("{key}[{i}]")))
        })
        .collect()
}

/// Strictly validates a response body against one of the three schemas.
pub fn validate(body: &Value, schema: SchemaId) -> Result<Validated, MalformedResponse> {
    if !body.is_object() {
        return Err(MalformedResponse("$".to_string()));
    }
    match schema {
        SchemaId::Decompose => {
            let lists: Vec<Vec<String>> = ["nav_actions", "nav_landmarks", "behav_actions", "behav_targets"]
                .iter()
                .map(|k| string_list(body, k))
                .collect::<Result<_, _>>()?;
            if lists[2].len() != lists[3].len() {
                return Err(MalformedResponse("behav_targets".to_string()));
            }
            InstructionBundle::from_raw(&lists[0], &lists[1], &lists[2], &lists[3])
                .map(Validated::Decompose)
                .map_err(|e| MalformedResponse(e.to_string()))
        }
        SchemaId::Desirability => {
            let arr = body
                .get("values")
                .ok_or_else(|| MalformedResponse("values missing".to_string()))?
                .as_array()
                .ok_or_else(|| MalformedResponse("values".to_string()))?;
            arr.iter()
                .enumerate()
                .map(|(i, v)| match v.as_f64() {
                    Some(x) if (-0.01..=1.01).contains(&x) => Ok(x),
                    _ => Err(MalformedResponse(format!("values[{i}]"))),
                })
                .collect::<Result<Vec<_>, _>>()
                .map(Validated::Desirability)
        }
        SchemaId::Landmark => {
            if body.get("found") == Some(&Value::Bool(false)) {
                return Ok(Validated::Landmark(None));
            }
            let coord = |k: &str| match body.get(k) {
                None => Err(MalformedResponse(format!("{k} missing"))),
                Some(v) => v
                    .as_f64()
                    .filter(|x| x.is_finite())
                    .ok_or_else(|| MalformedResponse(k.to_string())),
            };
            Ok(Validated::Landmark(Some(Pixel::new(coord("x")?, coord("y")?))))
        }
    }
}

/// Serializes with sorted object keys and shortest round-trip floats, so
/// digests agree across platforms.
pub fn canonical_json(v: &Value) -> String {
    // serde_json's default map is ordered by key.
    serde_json::to_string(v).expect("JSON values always serialize")
}

pub fn request_digest(request: &Value) -> String {
    hex::encode(Sha256::digest(canonical_json(request).as_bytes()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixtureRecord {
    pub digest: String,
    pub request: Value,
    pub response: Value,
    pub latency_s: f64,
}

/// Ordered request/response pairs, keyed by request digest.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Fixture {
    pub records: Vec<FixtureRecord>,
}

#[derive(Debug, Error)]
pub enum FixtureError {
    #[error("fixture io: {0}")]
    Io(#[from] std::io::Error),
    #[error("fixture line {line}: {reason}")]
    Parse { line: usize, reason: String },
}

impl Fixture {
    pub fn load(path: &Path) -> Result<Self, FixtureError> {
        let reader = BufReader::new(File::open(path)?);
        let mut records: Vec<FixtureRecord> = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: FixtureRecord = serde_json::from_str(&line).map_err(|e| FixtureError::Parse {
                line: i + 1,
                reason: e.to_string(),
            })?;
            if records.iter().any(|r| r.digest == rec.digest) {
                return Err(FixtureError::Parse {
                    line: i + 1,
                    reason: format!("duplicate digest {}", rec.digest),
                });
            }
            records.push(rec);
        }
        Ok(Self { records })
    }

    pub fn lookup(&self, digest: &str) -> Option<&FixtureRecord> {
        self.records.iter().find(|r| r.digest == digest)
    }

    /// Adds a record unless its digest is already present.
    pub fn insert(&mut self, request: Value, response: Value, latency_s: f64) -> Option<&FixtureRecord> {
        let digest = request_digest(&request);
        if self.lookup(&digest).is_some() {
            return None;
        }
        self.records.push(FixtureRecord {
            digest,
            request,
            response,
            latency_s,
        });
        self.records.last()
    }

    pub fn save(&self, path: &Path) -> Result<(), FixtureError> {
        let mut f = File::create(path)?;
        for r in &self.records {
            writeln!(f, "{}", serde_json::to_string(r).expect("record serializes"))?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    #[default]
    Live,
    Record,
    Replay,
}

/// Request/response framing of the remote service.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Provider {
    /// `{"schema", "prompt", "image_png_base64"?}` in, schema JSON out.
    #[default]
    Plain,
    /// Chat-completions style API; the schema JSON is the message content.
    OpenAiChat { model: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BackendEndpoint {
    pub base_url: String,
    /// Name of the environment variable holding the bearer token.
    #[serde(default)]
    pub token_env: Option<String>,
    #[serde(default = "default_timeout")]
    pub timeout_s: f64,
    #[serde(default = "default_retries")]
    pub retries: u32,
    #[serde(default)]
    pub mode: Mode,
    #[serde(default)]
    pub fixture: Option<PathBuf>,
    #[serde(default)]
    pub provider: Provider,
}

fn default_timeout() -> f64 {
    20.0
}

fn default_retries() -> u32 {
    2
}

impl BackendEndpoint {
    pub fn replay(fixture: impl Into<PathBuf>) -> Self {
        Self {
            base_url: String::new(),
            token_env: None,
            timeout_s: default_timeout(),
            retries: 0,
            mode: Mode::Replay,
            fixture: Some(fixture.into()),
            provider: Provider::Plain,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.timeout_s > 0.0) {
            return Err("timeout_s must be positive".into());
        }
        if self.mode != Mode::Live && self.fixture.is_none() {
            return Err("record and replay modes need a fixture path".into());
        }
        if self.mode != Mode::Replay && self.base_url.is_empty() {
            return Err("live and record modes need a base_url".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Response {
    pub body: Value,
    /// Live: measured wall time. Replay: the recorded latency, to be
    /// applied in simulated time by the caller.
    pub latency_s: f64,
}

#[derive(Debug, Error)]
pub enum GatewayError {
    #[error("invalid endpoint: {0}")]
    Endpoint(String),
    #[error(transparent)]
    Fixture(#[from] FixtureError),
}

pub struct GatewayClient {
    endpoint: BackendEndpoint,
    fixture: Mutex<Fixture>,
    agent: Option<ureq::Agent>,
}

impl std::fmt::Debug for GatewayClient {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("GatewayClient")
            .field("endpoint", &self.endpoint)
            .finish_non_exhaustive()
    }
}

const BACKOFF_BASE: Duration = Duration::from_millis(100);
const BACKOFF_CAP: Duration = Duration::from_secs(4);

enum Attempt {
    Done(Value),
    Retry(BackendError),
    Fatal(BackendError),
}

impl GatewayClient {
    pub fn new(endpoint: BackendEndpoint) -> Result<Self, GatewayError> {
        endpoint.validate().map_err(GatewayError::Endpoint)?;
        let fixture = match (&endpoint.mode, &endpoint.fixture) {
            (Mode::Replay, Some(p)) => Fixture::load(p)?,
            (Mode::Record, Some(p)) if p.exists() => Fixture::load(p)?,
            _ => Fixture::default(),
        };
        let agent = match endpoint.mode {
            Mode::Replay => None,
            Mode::Live | Mode::Record => Some(
                ureq::Agent::config_builder()
                    .timeout_global(Some(Duration::from_secs_f64(endpoint.timeout_s)))
                    .http_status_as_error(false)
                    .build()
                    .into(),
            ),
        };
        Ok(Self {
            endpoint,
            fixture: Mutex::new(fixture),
            agent,
        })
    }

    pub fn endpoint(&self) -> &BackendEndpoint {
        &self.endpoint
    }

    /// Sends one request according to the endpoint mode.
    pub fn call(&self, request: &Value) -> Result<Response, BackendError> {
        match self.endpoint.mode {
            Mode::Replay => {
                let digest = request_digest(request);
                let fx = self.fixture.lock().expect("fixture lock");
                fx.lookup(&digest)
                    .map(|r| Response {
                        body: r.response.clone(),
                        latency_s: r.latency_s,
                    })
                    .ok_or(BackendError::FixtureMiss(digest))
            }
            Mode::Live => self.post_with_retries(request),
            Mode::Record => {
                let resp = self.post_with_retries(request)?;
                let mut fx = self.fixture.lock().expect("fixture lock");
                if let Some(rec) = fx.insert(request.clone(), resp.body.clone(), resp.latency_s) {
                    let line = serde_json::to_string(rec).expect("record serializes");
                    if let Some(path) = &self.endpoint.fixture {
                        let appended = OpenOptions::new()
                            .create(true)
                            .append(true)
                            .open(path)
                            .and_then(|mut f| writeln!(f, "{line}"));
                        if let Err(e) = appended {
                            log::error!("failed to append fixture {}: {e}", path.display());
                        }
                    }
                }
                Ok(resp)
            }
        }
    }

    fn post_with_retries(&self, request: &Value) -> Result<Response, BackendError> {
        let agent = self.agent.as_ref().expect("live modes construct an agent");
        let deadline = Duration::from_secs_f64(self.endpoint.timeout_s);
        let started = Instant::now();
        let body = canonical_json(request);
        let token = self
            .endpoint
            .token_env
            .as_deref()
            .and_then(|k| std::env::var(k).ok());
        let mut last = BackendError::Unavailable("no attempt made".into());
        for attempt in 0..=self.endpoint.retries {
            if attempt > 0 {
                let exp = BACKOFF_BASE.saturating_mul(1 << (attempt - 1).min(16));
                let jitter = rand::rng().random_range(0.5..1.0);
                std::thread::sleep(exp.min(BACKOFF_CAP).mul_f64(jitter));
                if started.elapsed() >= deadline {
                    return Err(BackendError::TimedOut);
                }
            }
            let t0 = Instant::now();
            match self.attempt(agent, &body, token.as_deref()) {
                Attempt::Done(v) => {
                    return Ok(Response {
                        body: v,
                        latency_s: t0.elapsed().as_secs_f64(),
                    })
                }
                Attempt::Fatal(e) => return Err(e),
                Attempt::Retry(e) => {
                    log::warn!("backend attempt {} failed: {e}", attempt + 1);
                    last = e;
                }
            }
        }
        Err(last)
    }

    fn attempt(&self, agent: &ureq::Agent, body: &str, token: Option<&str>) -> Attempt {
        let mut req = agent
            .post(&self.endpoint.base_url)
            .header("content-type", "application/json");
        if let Some(t) = token {
            req = req.header("authorization", format!("Bearer {t}"));
        }
        let mut resp = match req.send(body) {
            Ok(r) => r,
            Err(ureq::Error::Timeout(_)) => return Attempt::Retry(BackendError::TimedOut),
            Err(e) => return Attempt::Retry(BackendError::Unavailable(e.to_string())),
        };
        let status = resp.status().as_u16();
        let text = match resp.body_mut().read_to_string() {
            Ok(t) => t,
            Err(ureq::Error::Timeout(_)) => return Attempt::Retry(BackendError::TimedOut),
            Err(e) => return Attempt::Retry(BackendError::Unavailable(e.to_string())),
        };
        match status {
            200..=299 => match serde_json::from_str(&text) {
                Ok(v) => Attempt::Done(v),
                Err(_) => Attempt::Fatal(MalformedResponse("$ (not JSON)".into()).into()),
            },
            500..=599 => Attempt::Retry(BackendError::Unavailable(format!("HTTP {status}"))),
            _ => Attempt::Fatal(BackendError::Unavailable(format!("HTTP {status}"))),
        }
    }
}

/// Builds the provider-specific request for a schema query.
pub fn build_request(provider: &Provider, schema: SchemaId, prompt: &str, image_png: Option<&[u8]>) -> Value {
    let image_b64 = image_png.map(|b| base64::engine::general_purpose::STANDARD.encode(b));
    match provider {
        Provider::Plain => {
            let mut req = json!({ "schema": schema.as_str(), "prompt": prompt });
            if let Some(b) = image_b64 {
                req["image_png_base64"] = Value::String(b);
            }
            req
        }
        Provider::OpenAiChat { model } => {
            let mut content = vec![json!({ "type": "text", "text": prompt })];
            if let Some(b) = image_b64 {
                content.push(json!({
                    "type": "image_url",
                    "image_url": { "url": format!("data:image/png;base64,{b}") }
                }));
            }
            json!({
                "model": model,
                "messages": [{ "role": "user", "content": content }],
                "response_format": { "type": "json_object" },
            })
        }
    }
}

/// Extracts the schema JSON from a provider response body.
pub fn extract_payload(provider: &Provider, body: Value) -> Result<Value, MalformedResponse> {
    match provider {
        Provider::Plain => Ok(body),
        Provider::OpenAiChat { .. } => {
            let text = body
                .pointer("/choices/0/message/content")
                .and_then(Value::as_str)
                .ok_or_else(|| MalformedResponse("choices[0].message.content".into()))?;
            serde_json::from_str(text.trim())
                .map_err(|_| MalformedResponse("choices[0].message.content (not JSON)".into()))
        }
    }
}

/// Language backend used for decomposition and desirability scoring.
pub trait LanguageModel: Send + Sync {
    /// Returns the schema payload (not yet validated).
    fn complete(&self, schema: SchemaId, prompt: &str) -> Result<Value, BackendError>;
}

/// A language model behind a [`GatewayClient`].
#[derive(Debug)]
pub struct RemoteLanguageModel {
    client: GatewayClient,
}

impl RemoteLanguageModel {
    pub fn new(client: GatewayClient) -> Self {
        Self { client }
    }

    pub fn request_for(&self, schema: SchemaId, prompt: &str) -> Value {
        build_request(&self.client.endpoint().provider, schema, prompt, None)
    }
}

impl LanguageModel for RemoteLanguageModel {
    fn complete(&self, schema: SchemaId, prompt: &str) -> Result<Value, BackendError> {
        let resp = self.client.call(&self.request_for(schema, prompt))?;
        Ok(extract_payload(&self.client.endpoint().provider, resp.body)?)
    }
}

/// Encodes an 8-bit RGB buffer as PNG.
pub fn encode_png_rgb(width: usize, height: usize, rgb: &[u8]) -> Vec<u8> {
    let mut out = Vec::new();
    {
        let mut enc = png::Encoder::new(&mut out, width as u32, height as u32);
        enc.set_color(png::ColorType::Rgb);
        enc.set_depth(png::BitDepth::Eight);
        let mut w = enc.write_header().expect("in-memory PNG header");
        w.write_image_data(rgb).expect("buffer matches dimensions");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Read;
    use std::net::TcpListener;
    use std::sync::atomic::{AtomicUsize, Ordering};
    use std::sync::Arc;

    #[test]
    fn validate_examples() {
        let ok = json!({
            "nav_actions": ["Go to"], "nav_landmarks": ["the door"],
            "behav_actions": ["stay on"], "behav_targets": ["Grass."],
        });
        match validate(&ok, SchemaId::Decompose).unwrap() {
            Validated::Decompose(b) => {
                assert_eq!(b.nav_actions, vec!["go to"]);
                assert_eq!(b.behav_targets, vec!["grass"]);
            }
            other => panic!("{other:?}"),
        }
        assert_eq!(
            validate(&json!({"values": [0.1, 0.2, 1.7]}), SchemaId::Desirability),
            Err(MalformedResponse("values[2]".into()))
        );
        assert_eq!(
            validate(&json!({"x": 3.0}), SchemaId::Landmark),
            Err(MalformedResponse("y missing".into()))
        );
        assert_eq!(
            validate(&json!({"found": false}), SchemaId::Landmark),
            Ok(Validated::Landmark(None))
        );
        assert!(validate(&json!("free prose"), SchemaId::Decompose).is_err());
        assert!(validate(&json!({"nav_actions": []}), SchemaId::Decompose).is_err());
    }

    #[test]
    fn digest_ignores_key_order() {
        let a: Value = serde_json::from_str(r#"{"b": 1.5, "a": [1, 2]}"#).unwrap();
        let b: Value = serde_json::from_str(r#"{"a": [1, 2], "b": 1.5}"#).unwrap();
        assert_eq!(request_digest(&a), request_digest(&b));
        assert_eq!(canonical_json(&a), r#"{"a":[1,2],"b":1.5}"#);
    }

    fn write_fixture(dir: &Path) -> PathBuf {
        let mut fx = Fixture::default();
        fx.insert(json!({"schema": "landmark", "prompt": "p"}), json!({"x": 1.0, "y": 2.0}), 6.0);
        let path = dir.join("fx.jsonl");
        fx.save(&path).unwrap();
        path
    }

    #[test]
    fn replay_hits_and_misses() {
        let dir = tempfile::tempdir().unwrap();
        let client = GatewayClient::new(BackendEndpoint::replay(write_fixture(dir.path()))).unwrap();
        let r = client.call(&json!({"prompt": "p", "schema": "landmark"})).unwrap();
        assert_eq!(r.body, json!({"x": 1.0, "y": 2.0}));
        assert_eq!(r.latency_s, 6.0);
        assert!(matches!(
            client.call(&json!({"schema": "landmark", "prompt": "q"})),
            Err(BackendError::FixtureMiss(_))
        ));
    }

    #[test]
    fn replay_never_touches_the_network() {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        listener.set_nonblocking(true).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let mut ep = BackendEndpoint::replay(write_fixture(dir.path()));
        ep.base_url = format!("http://{}", listener.local_addr().unwrap());
        let client = GatewayClient::new(ep).unwrap();
        let _ = client.call(&json!({"schema": "landmark", "prompt": "p"}));
        let _ = client.call(&json!({"schema": "landmark", "prompt": "other"}));
        assert!(listener.accept().is_err(), "replay opened a connection");
    }

    /// Minimal HTTP/1.1 responder: answers each connection with the next
    /// status in `statuses`.
    fn stub_server(statuses: Vec<u16>, body: &'static str) -> (String, Arc<AtomicUsize>) {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let url = format!("http://{}/v1", listener.local_addr().unwrap());
        let hits = Arc::new(AtomicUsize::new(0));
        let h = hits.clone();
        std::thread::spawn(move || {
            for stream in listener.incoming() {
                let Ok(mut s) = stream else { break };
                let n = h.fetch_add(1, Ordering::SeqCst);
                let mut buf = [0u8; 8192];
                let mut got = Vec::new();
                // read headers + body (content-length)
                loop {
                    let k = s.read(&mut buf).unwrap_or(0);
                    if k == 0 {
                        break;
                    }
                    got.extend_from_slice(&buf[..k]);
                    let text = String::from_utf8_lossy(&got);
                    if let Some(end) = text.find("\r\n\r\n") {
                        let len = text[..end]
                            .lines()
                            .find_map(|l| l.to_ascii_lowercase().strip_prefix("content-length:").map(|v| v.trim().parse::<usize>().unwrap_or(0)))
                            .unwrap_or(0);
                        if got.len() >= end + 4 + len {
                            break;
                        }
                    }
                }
                let status = *statuses.get(n).unwrap_or(&200);
                let payload = if status == 200 { body } else { "{}" };
                let resp = format!(
                    "HTTP/1.1 {status} X\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{payload}",
                    payload.len()
                );
                let _ = s.write_all(resp.as_bytes());
            }
        });
        (url, hits)
    }

    fn live(url: String, retries: u32) -> BackendEndpoint {
        BackendEndpoint {
            base_url: url,
            token_env: Some("BEHAV_LLM_TOKEN".into()),
            timeout_s: 10.0,
            retries,
            mode: Mode::Live,
            fixture: None,
            provider: Provider::Plain,
        }
    }

    #[test]
    fn live_retries_through_server_errors() {
        let (url, hits) = stub_server(vec![500, 500, 200], r#"{"values": [0.9]}"#);
        let client = GatewayClient::new(live(url, 3)).unwrap();
        let r = client.call(&json!({"schema": "desirability", "prompt": "x"})).unwrap();
        assert_eq!(r.body, json!({"values": [0.9]}));
        assert_eq!(hits.load(Ordering::SeqCst), 3);
    }

    #[test]
    fn live_gives_up_after_retries() {
        let (url, hits) = stub_server(vec![503, 503, 503, 503], "{}");
        let client = GatewayClient::new(live(url, 1)).unwrap();
        assert!(matches!(
            client.call(&json!({"a": 1})),
            Err(BackendError::Unavailable(_))
        ));
        assert_eq!(hits.load(Ordering::SeqCst), 2);
    }

    #[test]
    fn record_then_replay() {
        let (url, _) = stub_server(vec![200], r#"{"found": false}"#);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rec.jsonl");
        let mut ep = live(url, 0);
        ep.mode = Mode::Record;
        ep.fixture = Some(path.clone());
        let req = build_request(&Provider::Plain, SchemaId::Landmark, "find it", Some(&[1, 2, 3]));
        GatewayClient::new(ep).unwrap().call(&req).unwrap();

        let replay = GatewayClient::new(BackendEndpoint::replay(&path)).unwrap();
        assert_eq!(replay.call(&req).unwrap().body, json!({"found": false}));
    }

    #[test]
    fn chat_payload_extraction() {
        let p = Provider::OpenAiChat { model: "m".into() };
        let body = json!({"choices": [{"message": {"content": "{\"x\": 4, \"y\": 5}"}}]});
        assert_eq!(extract_payload(&p, body).unwrap(), json!({"x": 4, "y": 5}));
        assert!(extract_payload(&p, json!({"choices": []})).is_err());
        let req = build_request(&p, SchemaId::Landmark, "hi", Some(&[0u8; 4]));
        assert!(req["messages"][0]["content"][1]["image_url"]["url"]
            .as_str()
            .unwrap()
            .starts_with("data:image/png;base64,"));
    }

    #[test]
    fn endpoint_validation() {
        let mut ep = BackendEndpoint::replay("x");
        ep.fixture = None;
        assert!(ep.validate().is_err());
        let mut ep = BackendEndpoint::replay("x");
        ep.timeout_s = 0.0;
        assert!(ep.validate().is_err());
    }

    #[test]
    fn png_encoding_has_signature() {
        let png = encode_png_rgb(2, 2, &[0u8; 12]);
        assert_eq!(&png[1..4], b"PNG");
    }
}
