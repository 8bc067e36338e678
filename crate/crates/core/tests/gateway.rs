use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use layoutforge::gateway::{
    Cassette, DecodeParams, Gateway, GatewayConfig, GatewayError, HttpResponse, ModelRole, Oracle, OracleRequest,
    RoleConfig, Transport, TransportFailure, UreqTransport,
};
use serde_json::{json, Value};

fn config(endpoint: &str) -> GatewayConfig {
    let mut c = GatewayConfig::default();
    c.retry.base_delay_ms = 0;
    c.retry.max_retries = 3;
    c.api_key_env = "LAYOUTFORGE_TEST_KEY_UNSET".into();
    for role in ModelRole::ALL {
        c.roles.insert(
            role,
            RoleConfig {
                endpoint: endpoint.into(),
                model: "m".into(),
                ..Default::default()
            },
        );
    }
    c
}

fn ok_body(text: &str) -> String {
    json!({"choices": [{"message": {"role": "assistant", "content": text}}]}).to_string()
}

fn request(prompt: &str) -> OracleRequest {
    OracleRequest::new(ModelRole::QuantEvaluator, prompt, None, DecodeParams::default()).unwrap()
}

/// Plays back a fixed list of statuses, then succeeds.
struct Scripted {
    statuses: Mutex<Vec<u16>>,
    calls: Arc<AtomicUsize>,
}

impl Scripted {
    fn new(statuses: &[u16]) -> (Self, Arc<AtomicUsize>) {
        let calls = Arc::new(AtomicUsize::new(0));
        let mut s = statuses.to_vec();
        s.reverse();
        (
            Self {
                statuses: Mutex::new(s),
                calls: calls.clone(),
            },
            calls,
        )
    }
}

impl Transport for Scripted {
    fn post_json(&self, _: &str, _: &[(String, String)], body: &Value) -> Result<HttpResponse, TransportFailure> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        let status = self.statuses.lock().unwrap().pop().unwrap_or(200);
        let text = format!("echo {}", body["messages"][0]["content"].as_str().unwrap_or(""));
        Ok(HttpResponse {
            status,
            body: if status == 200 { ok_body(&text) } else { "{}".into() },
        })
    }
}

#[test]
fn retries_server_errors_then_succeeds() {
    let (t, calls) = Scripted::new(&[500, 503]);
    let g = Gateway::live(config("fake://"), Box::new(t));
    assert_eq!(g.complete(&request("hi")).unwrap(), "echo hi");
    assert_eq!(calls.load(Ordering::SeqCst), 3);
    assert_eq!(g.network_calls(), 3);
}

#[test]
fn rate_limit_exhausts_retry_budget() {
    let (t, calls) = Scripted::new(&[429, 429, 429, 429, 429]);
    let g = Gateway::live(config("fake://"), Box::new(t));
    assert_eq!(g.complete(&request("hi")), Err(GatewayError::RateLimited { attempts: 4 }));
    assert_eq!(calls.load(Ordering::SeqCst), 4);
}

#[test]
fn client_errors_are_not_retried() {
    let (t, calls) = Scripted::new(&[400]);
    let g = Gateway::live(config("fake://"), Box::new(t));
    assert!(matches!(g.complete(&request("hi")), Err(GatewayError::TransportError(_))));
    assert_eq!(calls.load(Ordering::SeqCst), 1);
}

#[test]
fn missing_endpoint_is_config_error() {
    let (t, _) = Scripted::new(&[]);
    let g = Gateway::live(GatewayConfig::default(), Box::new(t));
    assert!(matches!(g.complete(&request("hi")), Err(GatewayError::Config(_))));
}

#[test]
fn replay_miss_names_the_digest() {
    let g = Gateway::replay(Cassette::new());
    let r = request("unseen");
    assert_eq!(g.complete(&r), Err(GatewayError::CassetteMiss(r.digest().to_string())));
}

#[test]
fn record_then_replay_round_trip_on_disk() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.cassette");
    let (t, calls) = Scripted::new(&[]);
    let rec = Gateway::record(config("fake://"), Box::new(t), Cassette::new(), Some(path.clone()));
    assert_eq!(rec.complete(&request("one")).unwrap(), "echo one");
    assert_eq!(rec.complete(&request("two")).unwrap(), "echo two");
    // a repeated request is served from the cassette
    assert_eq!(rec.complete(&request("one")).unwrap(), "echo one");
    assert_eq!(calls.load(Ordering::SeqCst), 2);

    let loaded = Cassette::load(&path).unwrap();
    assert_eq!(loaded.len(), 2);
    let replay = Gateway::replay(loaded.clone());
    assert_eq!(replay.complete(&request("two")).unwrap(), "echo two");
    assert_eq!(replay.network_calls(), 0);
    assert_eq!(Cassette::from_bytes(&loaded.to_bytes()).unwrap(), loaded);
}

/// Counts concurrent calls and remembers the peak.
struct Slow {
    current: AtomicUsize,
    peak: Arc<AtomicUsize>,
}

impl Transport for Slow {
    fn post_json(&self, _: &str, _: &[(String, String)], _: &Value) -> Result<HttpResponse, TransportFailure> {
        let now = self.current.fetch_add(1, Ordering::SeqCst) + 1;
        self.peak.fetch_max(now, Ordering::SeqCst);
        std::thread::sleep(Duration::from_millis(20));
        self.current.fetch_sub(1, Ordering::SeqCst);
        Ok(HttpResponse {
            status: 200,
            body: ok_body("ok"),
        })
    }
}

#[test]
fn in_flight_cap_is_respected() {
    let peak = Arc::new(AtomicUsize::new(0));
    let mut c = config("fake://");
    c.max_in_flight = 2;
    let g = Gateway::live(
        c,
        Box::new(Slow {
            current: AtomicUsize::new(0),
            peak: peak.clone(),
        }),
    );
    std::thread::scope(|s| {
        for i in 0..8 {
            let g = &g;
            s.spawn(move || g.complete(&request(&format!("p{i}"))).unwrap());
        }
    });
    assert_eq!(g.network_calls(), 8);
    assert!(peak.load(Ordering::SeqCst) <= 2);
    assert!(peak.load(Ordering::SeqCst) >= 1);
}

/// Minimal HTTP/1.1 server answering `n` requests on localhost. Returns the
/// URL and a handle yielding the captured request bodies.
fn serve(responses: Vec<(u16, String)>) -> (String, std::thread::JoinHandle<Vec<(String, String)>>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/v1/chat/completions", listener.local_addr().unwrap());
    let handle = std::thread::spawn(move || {
        let mut seen = Vec::new();
        for (status, body) in responses {
            let (stream, _) = listener.accept().unwrap();
            let mut reader = BufReader::new(stream);
            let mut length = 0usize;
            let mut auth = String::new();
            loop {
                let mut line = String::new();
                reader.read_line(&mut line).unwrap();
                let lower = line.to_ascii_lowercase();
                if let Some(v) = lower.strip_prefix("content-length:") {
                    length = v.trim().parse().unwrap();
                }
                if lower.starts_with("authorization:") {
                    auth = line.trim().to_string();
                }
                if line == "\r\n" || line.is_empty() {
                    break;
                }
            }
            let mut buf = vec![0; length];
            reader.read_exact(&mut buf).unwrap();
            seen.push((String::from_utf8(buf).unwrap(), auth));
            let mut stream = reader.into_inner();
            write!(
                stream,
                "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
                body.len()
            )
            .unwrap();
            stream.flush().unwrap();
        }
        seen
    });
    (url, handle)
}

#[test]
fn ureq_transport_against_local_server() {
    let (url, server) = serve(vec![(503, "{}".into()), (200, ok_body("from server"))]);
    let mut c = config(&url);
    c.api_key_env = "LAYOUTFORGE_GATEWAY_TEST_KEY".into();
    // set only for this process; the variable name is unique to this test
    std::env::set_var("LAYOUTFORGE_GATEWAY_TEST_KEY", "sk-test");
    let g = Gateway::live(c, Box::new(UreqTransport::new(Duration::from_secs(5))));
    let r = OracleRequest::new(ModelRole::SpatialEvaluator, "look", Some(vec![1, 2, 3]), DecodeParams::default())
        .unwrap();
    assert_eq!(g.complete(&r).unwrap(), "from server");
    let seen = server.join().unwrap();
    assert_eq!(seen.len(), 2);
    let body: Value = serde_json::from_str(&seen[1].0).unwrap();
    assert_eq!(body["model"], "m");
    assert_eq!(body["messages"][0]["content"][0]["text"], "look");
    assert_eq!(body["messages"][0]["content"][1]["image_url"]["url"], "data:image/png;base64,AQID");
    assert_eq!(seen[1].1.to_ascii_lowercase(), "authorization: bearer sk-test");
}

#[test]
fn ureq_transport_reports_connection_failure() {
    let port = TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let mut c = config(&format!("http://127.0.0.1:{port}/"));
    c.retry.max_retries = 1;
    let g = Gateway::live(c, Box::new(UreqTransport::new(Duration::from_secs(2))));
    assert!(matches!(g.complete(&request("x")), Err(GatewayError::TransportError(_))));
    assert_eq!(g.network_calls(), 2);
}
