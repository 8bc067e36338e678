use std::path::PathBuf;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Condvar, Mutex, RwLock};
use std::time::Duration;

use serde_json::Value;

use super::{wire, Cassette, GatewayConfig, GatewayError, Oracle, OracleRequest};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HttpResponse {
    pub status: u16,
    pub body: String,
}

/// A failure below HTTP: connect errors, timeouts, broken bodies.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransportFailure(pub String);

/// Moves one JSON POST over the network.
pub trait Transport: Send + Sync {
    fn post_json(
        &self,
        url: &str,
        headers: &[(String, String)],
        body: &Value,
    ) -> Result<HttpResponse, TransportFailure>;
}

pub struct UreqTransport {
    agent: ureq::Agent,
}

impl UreqTransport {
    pub fn new(timeout: Duration) -> Self {
        let config = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(timeout))
            .build();
        Self {
            agent: config.into(),
        }
    }
}

impl Transport for UreqTransport {
    fn post_json(
        &self,
        url: &str,
        headers: &[(String, String)],
        body: &Value,
    ) -> Result<HttpResponse, TransportFailure> {
        let mut req = self
            .agent
            .post(url)
            .header("Content-Type", "application/json");
        for (k, v) in headers {
            req = req.header(k.as_str(), v.as_str());
        }
        let mut resp = req
            .send(body.to_string())
            .map_err(|e| TransportFailure(e.to_string()))?;
        let status = resp.status().as_u16();
        let body = resp
            .body_mut()
            .read_to_string()
            .map_err(|e| TransportFailure(e.to_string()))?;
        Ok(HttpResponse { status, body })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Every call goes to the network.
    Live,
    /// Every call is served from the cassette.
    Replay,
    /// Cassette first; misses go to the network and are stored.
    Record,
}

impl std::str::FromStr for Mode {
    type Err = GatewayError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "live" => Ok(Mode::Live),
            "replay" => Ok(Mode::Replay),
            "record" => Ok(Mode::Record),
            _ => Err(GatewayError::Config(format!("unknown mode `{s}`"))),
        }
    }
}

struct Slots {
    free: Mutex<usize>,
    cv: Condvar,
}

struct SlotGuard<'a>(&'a Slots);

impl Slots {
    fn acquire(&self) -> SlotGuard<'_> {
        let mut free = self.free.lock().unwrap_or_else(|e| e.into_inner());
        while *free == 0 {
            free = self.cv.wait(free).unwrap_or_else(|e| e.into_inner());
        }
        *free -= 1;
        SlotGuard(self)
    }
}

impl Drop for SlotGuard<'_> {
    fn drop(&mut self) {
        *self.0.free.lock().unwrap_or_else(|e| e.into_inner()) += 1;
        self.0.cv.notify_one();
    }
}

pub struct Gateway {
    mode: Mode,
    config: GatewayConfig,
    transport: Option<Box<dyn Transport>>,
    cassette: RwLock<Cassette>,
    cassette_path: Option<PathBuf>,
    persist_lock: Mutex<()>,
    slots: Slots,
    network_calls: AtomicUsize,
}

impl Gateway {
    fn build(
        mode: Mode,
        config: GatewayConfig,
        transport: Option<Box<dyn Transport>>,
        cassette: Cassette,
        cassette_path: Option<PathBuf>,
    ) -> Self {
        let cap = config.max_in_flight.max(1);
        Self {
            mode,
            config,
            transport,
            cassette: RwLock::new(cassette),
            cassette_path,
            persist_lock: Mutex::new(()),
            slots: Slots {
                free: Mutex::new(cap),
                cv: Condvar::new(),
            },
            network_calls: AtomicUsize::new(0),
        }
    }

    pub fn replay(cassette: Cassette) -> Self {
        Self::build(Mode::Replay, GatewayConfig::default(), None, cassette, None)
    }

    pub fn live(config: GatewayConfig, transport: Box<dyn Transport>) -> Self {
        Self::build(Mode::Live, config, Some(transport), Cassette::new(), None)
    }

    /// Record mode. New entries are persisted to `path` when given.
    pub fn record(
        config: GatewayConfig,
        transport: Box<dyn Transport>,
        cassette: Cassette,
        path: Option<PathBuf>,
    ) -> Self {
        Self::build(Mode::Record, config, Some(transport), cassette, path)
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn config(&self) -> &GatewayConfig {
        &self.config
    }

    /// Number of requests that reached the transport.
    pub fn network_calls(&self) -> usize {
        self.network_calls.load(Ordering::SeqCst)
    }

    pub fn cassette(&self) -> Cassette {
        self.cassette.read().unwrap_or_else(|e| e.into_inner()).clone()
    }

    fn lookup(&self, request: &OracleRequest) -> Option<String> {
        self.cassette
            .read()
            .unwrap_or_else(|e| e.into_inner())
            .get(&request.digest())
            .map(str::to_string)
    }

    fn store(&self, request: &OracleRequest, response: &str) -> Result<(), GatewayError> {
        let _serial = self.persist_lock.lock().unwrap_or_else(|e| e.into_inner());
        let added = self
            .cassette
            .write()
            .unwrap_or_else(|e| e.into_inner())
            .insert(request.digest(), response);
        if added {
            if let Some(path) = &self.cassette_path {
                let snapshot = self.cassette();
                snapshot.persist(path)?;
            }
        }
        Ok(())
    }

    fn call_network(&self, request: &OracleRequest) -> Result<String, GatewayError> {
        let transport = self
            .transport
            .as_ref()
            .ok_or_else(|| GatewayError::Config("no transport configured".into()))?;
        let role = self.config.role(request.role());
        if role.endpoint.is_empty() {
            return Err(GatewayError::Config(format!(
                "no endpoint configured for role {}",
                request.role()
            )));
        }
        let mut headers = Vec::new();
        if let Some(key) = self.config.api_key() {
            headers.push(("Authorization".to_string(), format!("Bearer {key}")));
        }
        let body = wire::request_body(&role.model, request);
        let policy = &self.config.retry;
        let attempts = policy.max_retries + 1;
        let mut last = GatewayError::TransportError("no attempt made".into());
        let _slot = self.slots.acquire();
        for attempt in 0..attempts {
            if attempt > 0 {
                std::thread::sleep(policy.delay(attempt - 1));
            }
            self.network_calls.fetch_add(1, Ordering::SeqCst);
            match transport.post_json(&role.endpoint, &headers, &body) {
                Ok(resp) if (200..300).contains(&resp.status) => {
                    return wire::response_text(&resp.body);
                }
                Ok(resp) if resp.status == 429 => {
                    log::warn!("{}: rate limited (attempt {})", request.role(), attempt + 1);
                    last = GatewayError::RateLimited { attempts };
                }
                Ok(resp) if resp.status >= 500 => {
                    log::warn!("{}: HTTP {} (attempt {})", request.role(), resp.status, attempt + 1);
                    last = GatewayError::TransportError(format!("HTTP {}", resp.status));
                }
                Ok(resp) => {
                    return Err(GatewayError::TransportError(format!(
                        "HTTP {}: {}",
                        resp.status,
                        resp.body.chars().take(200).collect::<String>()
                    )));
                }
                Err(TransportFailure(msg)) => {
                    log::warn!("{}: {msg} (attempt {})", request.role(), attempt + 1);
                    last = GatewayError::TransportError(msg);
                }
            }
        }
        Err(last)
    }
}

impl Oracle for Gateway {
    fn complete(&self, request: &OracleRequest) -> Result<String, GatewayError> {
        match self.mode {
            Mode::Replay => self
                .lookup(request)
                .ok_or_else(|| GatewayError::CassetteMiss(request.digest().to_string())),
            Mode::Live => self.call_network(request),
            Mode::Record => {
                if let Some(hit) = self.lookup(request) {
                    return Ok(hit);
                }
                let response = self.call_network(request)?;
                self.store(request, &response)?;
                Ok(response)
            }
        }
    }
}
