//! Access to generator and evaluator models: prompt templates, a
//! chat-completion client, JSON extraction from replies, and a
//! content-addressed record/replay store.

mod cassette;
mod client;
mod config;
mod extract;
mod template;
pub mod wire;

use std::fmt;
use std::str::FromStr;
use std::collections::BTreeMap;
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};
use sha2::{Digest as _, Sha256};
use thiserror::Error;

pub use cassette::{Cassette, Digest};
pub use client::{Gateway, HttpResponse, Mode, Transport, TransportFailure, UreqTransport};
pub use config::{GatewayConfig, RetryPolicy, RoleConfig};
pub use extract::extract_json;
pub use template::{render_prompt, PromptTemplate, TemplateId, TEMPLATE_VERSION};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GatewayError {
    #[error("unbound placeholder `{{{0}}}`")]
    UnboundPlaceholder(String),
    #[error("no recorded response for request {0}")]
    CassetteMiss(String),
    #[error("corrupt cassette at byte {offset}: {reason}")]
    CorruptCassette { offset: usize, reason: String },
    #[error("transport error: {0}")]
    TransportError(String),
    #[error("rate limited after {attempts} attempts")]
    RateLimited { attempts: u32 },
    #[error("no JSON object or array found")]
    NoStructureFound,
    #[error("unbalanced JSON structure")]
    UnbalancedStructure,
    #[error("malformed JSON structure: {0}")]
    MalformedStructure(String),
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelRole {
    BevGenerator,
    LayoutLifter,
    SpatialEvaluator,
    QuantEvaluator,
    /// Annotation model: scene descriptions and CoT annotations.
    Descriptor,
}

impl ModelRole {
    pub const ALL: [ModelRole; 5] = [
        ModelRole::BevGenerator,
        ModelRole::LayoutLifter,
        ModelRole::SpatialEvaluator,
        ModelRole::QuantEvaluator,
        ModelRole::Descriptor,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ModelRole::BevGenerator => "bev_generator",
            ModelRole::LayoutLifter => "layout_lifter",
            ModelRole::SpatialEvaluator => "spatial_evaluator",
            ModelRole::QuantEvaluator => "quant_evaluator",
            ModelRole::Descriptor => "descriptor",
        }
    }
}

impl fmt::Display for ModelRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelRole {
    type Err = GatewayError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ModelRole::ALL
            .into_iter()
            .find(|r| r.name() == s)
            .ok_or_else(|| GatewayError::Config(format!("unknown model role `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecodeParams {
    pub temperature: f64,
    pub max_tokens: u32,
    pub seed: u64,
}

impl Default for DecodeParams {
    fn default() -> Self {
        Self {
            temperature: 1.0,
            max_tokens: 4096,
            seed: 0,
        }
    }
}

/// One model call. Only the spatial evaluator receives an image.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleRequest {
    role: ModelRole,
    prompt: String,
    image: Option<Arc<[u8]>>,
    decode: DecodeParams,
}

impl OracleRequest {
    pub fn new(
        role: ModelRole,
        prompt: impl Into<String>,
        image: Option<Vec<u8>>,
        decode: DecodeParams,
    ) -> Result<Self, GatewayError> {
        let needs_image = role == ModelRole::SpatialEvaluator;
        if needs_image != image.is_some() {
            return Err(GatewayError::InvalidRequest(format!(
                "role {role} {} an image",
                if needs_image { "requires" } else { "does not take" }
            )));
        }
        Ok(Self {
            role,
            prompt: prompt.into(),
            image: image.map(Arc::from),
            decode,
        })
    }

    pub fn role(&self) -> ModelRole {
        self.role
    }

    pub fn prompt(&self) -> &str {
        &self.prompt
    }

    pub fn image(&self) -> Option<&[u8]> {
        self.image.as_deref()
    }

    pub fn decode(&self) -> DecodeParams {
        self.decode
    }

    /// SHA-256 over a length-framed encoding of role, prompt, image and
    /// decode parameters.
    pub fn digest(&self) -> Digest {
        fn framed(h: &mut Sha256, bytes: &[u8]) {
            h.update((bytes.len() as u64).to_be_bytes());
            h.update(bytes);
        }
        let mut h = Sha256::new();
        framed(&mut h, b"layoutforge-request-v1");
        framed(&mut h, self.role.name().as_bytes());
        framed(&mut h, self.prompt.as_bytes());
        match &self.image {
            Some(img) => {
                h.update([1u8]);
                framed(&mut h, img);
            }
            None => h.update([0u8]),
        }
        h.update(self.decode.temperature.to_bits().to_be_bytes());
        h.update(self.decode.max_tokens.to_be_bytes());
        h.update(self.decode.seed.to_be_bytes());
        Digest(h.finalize().into())
    }
}

/// Anything that answers model requests: the gateway, or a scripted fake.
pub trait Oracle: Send + Sync {
    fn complete(&self, request: &OracleRequest) -> Result<String, GatewayError>;
}

impl<T: Oracle + ?Sized> Oracle for &T {
    fn complete(&self, request: &OracleRequest) -> Result<String, GatewayError> {
        (**self).complete(request)
    }
}

impl<T: Oracle + ?Sized> Oracle for Arc<T> {
    fn complete(&self, request: &OracleRequest) -> Result<String, GatewayError> {
        (**self).complete(request)
    }
}

impl<T: Oracle + ?Sized> Oracle for Box<T> {
    fn complete(&self, request: &OracleRequest) -> Result<String, GatewayError> {
        (**self).complete(request)
    }
}

/// Wraps an oracle and counts calls per role, including failed ones.
pub struct CountingOracle<O> {
    inner: O,
    counts: Mutex<BTreeMap<ModelRole, usize>>,
}

impl<O: Oracle> CountingOracle<O> {
    pub fn new(inner: O) -> Self {
        Self {
            inner,
            counts: Mutex::new(BTreeMap::new()),
        }
    }

    pub fn counts(&self) -> BTreeMap<ModelRole, usize> {
        self.counts.lock().unwrap_or_else(|e| e.into_inner()).clone()
    }

    pub fn count(&self, role: ModelRole) -> usize {
        self.counts().get(&role).copied().unwrap_or(0)
    }

    pub fn total(&self) -> usize {
        self.counts().values().sum()
    }

    pub fn inner(&self) -> &O {
        &self.inner
    }
}

impl<O: Oracle> Oracle for CountingOracle<O> {
    fn complete(&self, request: &OracleRequest) -> Result<String, GatewayError> {
        *self
            .counts
            .lock()
            .unwrap_or_else(|e| e.into_inner())
            .entry(request.role())
            .or_default() += 1;
        self.inner.complete(request)
    }
}
