use std::collections::BTreeMap;
use std::path::Path;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{DecodeParams, GatewayError, ModelRole};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RetryPolicy {
    pub max_retries: u32,
    pub base_delay_ms: u64,
    pub timeout_secs: u64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_retries: 3,
            base_delay_ms: 500,
            timeout_secs: 120,
        }
    }
}

impl RetryPolicy {
    pub fn delay(&self, attempt: u32) -> Duration {
        Duration::from_millis(self.base_delay_ms.saturating_mul(1u64 << attempt.min(16)))
    }

    pub fn timeout(&self) -> Duration {
        Duration::from_secs(self.timeout_secs)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RoleConfig {
    pub endpoint: String,
    pub model: String,
    pub temperature: f64,
    pub max_tokens: u32,
    pub seed: u64,
}

impl Default for RoleConfig {
    fn default() -> Self {
        let d = DecodeParams::default();
        Self {
            endpoint: String::new(),
            model: String::new(),
            temperature: d.temperature,
            max_tokens: d.max_tokens,
            seed: d.seed,
        }
    }
}

impl RoleConfig {
    pub fn decode(&self) -> DecodeParams {
        DecodeParams {
            temperature: self.temperature,
            max_tokens: self.max_tokens,
            seed: self.seed,
        }
    }
}

/// Gateway settings. API keys are read from the environment variable named
/// by `api_key_env`, never from the file itself.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GatewayConfig {
    pub api_key_env: String,
    pub max_in_flight: usize,
    pub retry: RetryPolicy,
    pub roles: BTreeMap<ModelRole, RoleConfig>,
}

impl Default for GatewayConfig {
    fn default() -> Self {
        Self {
            api_key_env: "LAYOUTFORGE_API_KEY".into(),
            max_in_flight: 8,
            retry: RetryPolicy::default(),
            roles: BTreeMap::new(),
        }
    }
}

impl GatewayConfig {
    pub fn role(&self, role: ModelRole) -> RoleConfig {
        self.roles.get(&role).cloned().unwrap_or_default()
    }

    pub fn decode(&self, role: ModelRole) -> DecodeParams {
        self.role(role).decode()
    }

    pub fn from_toml(text: &str) -> Result<Self, GatewayError> {
        let config: Self = toml::from_str(text).map_err(|e| GatewayError::Config(e.to_string()))?;
        if config.max_in_flight == 0 {
            return Err(GatewayError::Config("max_in_flight must be at least 1".into()));
        }
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, GatewayError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| GatewayError::Io(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn api_key(&self) -> Option<String> {
        std::env::var(&self.api_key_env).ok().filter(|k| !k.is_empty())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_roles() {
        let cfg = GatewayConfig::from_toml(
            r#"
max_in_flight = 4
[retry]
max_retries = 5
[roles.quant_evaluator]
endpoint = "http://localhost:9/v1/chat/completions"
model = "judge"
temperature = 0.0
"#,
        )
        .unwrap();
        assert_eq!(cfg.max_in_flight, 4);
        assert_eq!(cfg.retry.max_retries, 5);
        assert_eq!(cfg.retry.timeout_secs, 120);
        assert_eq!(cfg.role(ModelRole::QuantEvaluator).model, "judge");
        assert_eq!(cfg.decode(ModelRole::QuantEvaluator).temperature, 0.0);
        assert_eq!(cfg.decode(ModelRole::BevGenerator), DecodeParams::default());
        assert_eq!(cfg.api_key_env, "LAYOUTFORGE_API_KEY");
    }

    #[test]
    fn rejects_bad_values() {
        assert!(GatewayConfig::from_toml("max_in_flight = 0").is_err());
        assert!(GatewayConfig::from_toml("[roles.nobody]\nmodel = \"x\"").is_err());
    }

    #[test]
    fn backoff_doubles() {
        let p = RetryPolicy::default();
        assert_eq!(p.delay(0), Duration::from_millis(500));
        assert_eq!(p.delay(2), Duration::from_millis(2000));
    }
}
