use std::fmt;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::mock::MockScript;
use super::GatewayError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProviderKind {
    /// `POST {base_url}/chat/completions` with a bearer key (DeepInfra and similar).
    OpenAiCompatible,
    /// `POST {base_url}/v1/messages` with an `x-api-key` header.
    AnthropicStyle,
    /// Answers locally from a [`MockScript`]; never touches the network.
    Mock,
}

pub const DEEPINFRA_BASE_URL: &str = "https://api.deepinfra.com/v1/openai";
pub const ANTHROPIC_BASE_URL: &str = "https://api.anthropic.com";
pub const DEFAULT_TEMPERATURE: f64 = 0.7;
pub const DEFAULT_PLAYER_MAX_TOKENS: u32 = 2048;
pub const DEFAULT_LESSON_MAX_TOKENS: u32 = 1024;
pub const DEFAULT_TIMEOUT_SECS: u64 = 120;
pub const DEFAULT_MAX_RETRIES: u32 = 3;
pub const DEFAULT_MAX_IN_FLIGHT: usize = 4;

fn default_temperature() -> f64 {
    DEFAULT_TEMPERATURE
}
fn default_max_tokens() -> u32 {
    DEFAULT_PLAYER_MAX_TOKENS
}
fn default_timeout() -> u64 {
    DEFAULT_TIMEOUT_SECS
}
fn default_retries() -> u32 {
    DEFAULT_MAX_RETRIES
}
fn default_in_flight() -> usize {
    DEFAULT_MAX_IN_FLIGHT
}

/// Where and how to reach a chat model. Keys are read from `api_key_env_var` at
/// connection time and are never stored in configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelEndpoint {
    pub provider: ProviderKind,
    #[serde(default)]
    pub base_url: String,
    pub model_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub api_key_env_var: Option<String>,
    #[serde(default = "default_temperature")]
    pub temperature: f64,
    #[serde(default = "default_max_tokens")]
    pub max_tokens: u32,
    #[serde(default = "default_timeout")]
    pub timeout_secs: u64,
    #[serde(default = "default_retries")]
    pub max_retries: u32,
    #[serde(default = "default_in_flight")]
    pub max_in_flight: usize,
    /// Offline behavior. Required for `Mock`; used by live endpoints when a run is forced offline.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mock: Option<MockScript>,
}

impl ModelEndpoint {
    pub fn deepinfra(model_id: &str) -> Self {
        ModelEndpoint {
            provider: ProviderKind::OpenAiCompatible,
            base_url: DEEPINFRA_BASE_URL.into(),
            model_id: model_id.into(),
            api_key_env_var: Some("DEEPINFRA_API_KEY".into()),
            temperature: DEFAULT_TEMPERATURE,
            max_tokens: DEFAULT_PLAYER_MAX_TOKENS,
            timeout_secs: DEFAULT_TIMEOUT_SECS,
            max_retries: DEFAULT_MAX_RETRIES,
            max_in_flight: DEFAULT_MAX_IN_FLIGHT,
            mock: None,
        }
    }

    pub fn anthropic(model_id: &str) -> Self {
        ModelEndpoint {
            provider: ProviderKind::AnthropicStyle,
            base_url: ANTHROPIC_BASE_URL.into(),
            api_key_env_var: Some("ANTHROPIC_API_KEY".into()),
            max_tokens: DEFAULT_LESSON_MAX_TOKENS,
            ..ModelEndpoint::deepinfra(model_id)
        }
    }

    pub fn mock(model_id: &str, script: MockScript) -> Self {
        ModelEndpoint {
            provider: ProviderKind::Mock,
            base_url: String::new(),
            api_key_env_var: None,
            mock: Some(script),
            ..ModelEndpoint::deepinfra(model_id)
        }
    }

    /// A mock endpoint that replays `schedule` in order; running past its end is an error.
    pub fn mock_script(agent_id: &str, schedule: Vec<String>) -> Result<Self, GatewayError> {
        if schedule.is_empty() {
            return Err(GatewayError::Config(format!("mock schedule for {agent_id} is empty")));
        }
        Ok(ModelEndpoint::mock(agent_id, MockScript::Canned { responses: schedule }))
    }

    pub fn is_live(&self) -> bool {
        self.provider != ProviderKind::Mock
    }

    /// The same endpoint answered offline by its mock script (or the default heuristic).
    pub fn offline(&self) -> Self {
        if !self.is_live() {
            return self.clone();
        }
        ModelEndpoint {
            provider: ProviderKind::Mock,
            mock: Some(self.mock.clone().unwrap_or_default()),
            ..self.clone()
        }
    }

    pub fn timeout(&self) -> Duration {
        Duration::from_secs(self.timeout_secs)
    }

    /// Key used to share one concurrency gate among clients of the same endpoint.
    pub fn gate_key(&self) -> String {
        format!("{:?}|{}|{}", self.provider, self.base_url, self.model_id)
    }

    pub fn validate(&self) -> Result<(), GatewayError> {
        if !(self.temperature >= 0.0) {
            return Err(GatewayError::Config(format!("temperature {} must be >= 0", self.temperature)));
        }
        if self.max_in_flight == 0 {
            return Err(GatewayError::Config("max_in_flight must be at least 1".into()));
        }
        match self.provider {
            ProviderKind::Mock => {
                if let Some(MockScript::Canned { responses }) = &self.mock {
                    if responses.is_empty() {
                        return Err(GatewayError::Config(format!("mock schedule for {} is empty", self.model_id)));
                    }
                }
                if self.mock.is_none() {
                    return Err(GatewayError::Config(format!("mock endpoint {} has no script", self.model_id)));
                }
            }
            _ => {
                if self.base_url.is_empty() {
                    return Err(GatewayError::Config(format!("endpoint {} has no base_url", self.model_id)));
                }
                if self.api_key_env_var.as_deref().unwrap_or("").is_empty() {
                    return Err(GatewayError::Config(format!("endpoint {} names no api_key_env_var", self.model_id)));
                }
            }
        }
        Ok(())
    }

    /// Reads the API key from the environment. Fails without any network activity.
    pub fn read_api_key(&self) -> Result<ApiKey, GatewayError> {
        let var = self.api_key_env_var.clone().unwrap_or_default();
        match std::env::var(&var) {
            Ok(v) if !v.trim().is_empty() => Ok(ApiKey(v.trim().to_string())),
            _ => Err(GatewayError::MissingApiKey { var }),
        }
    }
}

/// An API key. Its `Debug` and `Display` never reveal the value.
#[derive(Clone, PartialEq, Eq)]
pub struct ApiKey(String);

impl ApiKey {
    pub fn new(value: impl Into<String>) -> Self {
        ApiKey(value.into())
    }

    pub(crate) fn expose(&self) -> &str {
        &self.0
    }
}

impl fmt::Debug for ApiKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("ApiKey(<redacted>)")
    }
}

impl fmt::Display for ApiKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("<redacted>")
    }
}
