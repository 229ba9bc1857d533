//! Chat-completion clients: OpenAI-compatible players, an Anthropic-style
//! lesson model, and a deterministic offline mock.

mod client;
mod endpoint;
mod gate;
mod mock;
mod transport;

pub use client::{AttemptOutcome, ChatClient, ChatExchange, ChatRequestRecord, RetryPolicy, TokenUsage};
pub use endpoint::{
    ApiKey, ModelEndpoint, ProviderKind, ANTHROPIC_BASE_URL, DEEPINFRA_BASE_URL, DEFAULT_LESSON_MAX_TOKENS,
    DEFAULT_MAX_IN_FLIGHT, DEFAULT_MAX_RETRIES, DEFAULT_PLAYER_MAX_TOKENS, DEFAULT_TEMPERATURE, DEFAULT_TIMEOUT_SECS,
};
pub use gate::{Gate, GatePermit, GateRegistry};
pub use mock::{MockResponder, MockScript, GARBAGE_REPLY};
pub use transport::{HttpRequest, HttpResponse, Transport, TransportError, UreqTransport};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GatewayError {
    #[error("API key environment variable `{var}` is not set")]
    MissingApiKey { var: String },
    #[error("provider rejected credentials (HTTP {status})")]
    Auth { status: u16 },
    #[error("gave up after {attempts} attempts: {last}")]
    RetriesExhausted { attempts: u32, last: String },
    #[error("malformed provider response: {0}")]
    Malformed(String),
    #[error("provider returned HTTP {status}: {body}")]
    Provider { status: u16, body: String },
    #[error("mock schedule exhausted")]
    MockExhausted,
    #[error("endpoint configuration: {0}")]
    Config(String),
}

impl GatewayError {
    /// Credential problems: missing key or rejected key.
    pub fn is_auth(&self) -> bool {
        matches!(self, GatewayError::MissingApiKey { .. } | GatewayError::Auth { .. })
    }
}
