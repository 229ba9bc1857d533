use std::sync::Arc;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tracing::{debug, warn};

use super::endpoint::{ApiKey, ModelEndpoint, ProviderKind};
use super::gate::Gate;
use super::mock::MockResponder;
use super::transport::{HttpRequest, HttpResponse, Transport, TransportError};
use super::GatewayError;

const ANTHROPIC_VERSION: &str = "2023-06-01";

/// Exponential backoff between attempts. Delays never decrease.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RetryPolicy {
    pub base_delay: Duration,
    pub max_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            base_delay: Duration::from_millis(500),
            max_delay: Duration::from_secs(30),
        }
    }
}

impl RetryPolicy {
    pub fn immediate() -> Self {
        RetryPolicy {
            base_delay: Duration::ZERO,
            max_delay: Duration::ZERO,
        }
    }

    /// Delay before retry number `retry` (1-based).
    pub fn delay(&self, retry: u32) -> Duration {
        let factor = 1u32.checked_shl(retry.saturating_sub(1)).unwrap_or(u32::MAX);
        self.base_delay.saturating_mul(factor).min(self.max_delay)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenUsage {
    pub input_tokens: u64,
    pub output_tokens: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChatRequestRecord {
    pub provider: ProviderKind,
    pub model_id: String,
    pub temperature: f64,
    pub system: String,
    pub user: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttemptOutcome {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub status: Option<u16>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub delay_before_ms: u64,
}

/// One logical chat call and every attempt it took. Holds no credentials.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChatExchange {
    pub request: ChatRequestRecord,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub response_text: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    /// Wall-clock time across all attempts; always 0 for mock endpoints.
    pub latency_ms: u64,
    pub attempt_count: u32,
    pub attempts: Vec<AttemptOutcome>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub token_usage: Option<TokenUsage>,
}

enum Backend {
    Mock(MockResponder),
    Live { key: ApiKey, transport: Arc<dyn Transport> },
}

/// A chat-completion client for one endpoint.
pub struct ChatClient {
    endpoint: ModelEndpoint,
    backend: Backend,
    gate: Arc<Gate>,
    policy: RetryPolicy,
    sleep: fn(Duration),
    exchanges: Vec<ChatExchange>,
}

impl std::fmt::Debug for ChatClient {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ChatClient")
            .field("endpoint", &self.endpoint)
            .field("exchanges", &self.exchanges.len())
            .finish_non_exhaustive()
    }
}

enum AttemptError {
    Retryable(String),
    Fatal(GatewayError),
}

impl ChatClient {
    /// Prepares a client. Live endpoints read their key here, so a missing key
    /// fails before any request. Mock endpoints never use `network`.
    pub fn connect(
        endpoint: ModelEndpoint,
        network: Arc<dyn Transport>,
        gate: Arc<Gate>,
        mock_seed: u64,
    ) -> Result<Self, GatewayError> {
        endpoint.validate()?;
        let backend = match endpoint.provider {
            ProviderKind::Mock => Backend::Mock(MockResponder::new(endpoint.mock.clone().unwrap_or_default(), mock_seed)),
            _ => Backend::Live {
                key: endpoint.read_api_key()?,
                transport: network,
            },
        };
        Ok(ChatClient {
            endpoint,
            backend,
            gate,
            policy: RetryPolicy::default(),
            sleep: std::thread::sleep,
            exchanges: Vec::new(),
        })
    }

    /// Live client with an explicit key, for callers that manage credentials themselves.
    pub fn with_key(endpoint: ModelEndpoint, key: ApiKey, network: Arc<dyn Transport>, gate: Arc<Gate>) -> Self {
        ChatClient {
            endpoint,
            backend: Backend::Live { key, transport: network },
            gate,
            policy: RetryPolicy::default(),
            sleep: std::thread::sleep,
            exchanges: Vec::new(),
        }
    }

    pub fn with_retry_policy(mut self, policy: RetryPolicy) -> Self {
        self.policy = policy;
        self
    }

    pub fn with_sleeper(mut self, sleep: fn(Duration)) -> Self {
        self.sleep = sleep;
        self
    }

    pub fn endpoint(&self) -> &ModelEndpoint {
        &self.endpoint
    }

    /// Exchanges recorded since the last call.
    pub fn take_exchanges(&mut self) -> Vec<ChatExchange> {
        std::mem::take(&mut self.exchanges)
    }

    pub fn chat_complete(&mut self, system: &str, user: &str) -> Result<String, GatewayError> {
        let request = ChatRequestRecord {
            provider: self.endpoint.provider,
            model_id: self.endpoint.model_id.clone(),
            temperature: self.endpoint.temperature,
            system: system.to_string(),
            user: user.to_string(),
        };
        let mut exchange = ChatExchange {
            request,
            response_text: None,
            error: None,
            latency_ms: 0,
            attempt_count: 0,
            attempts: Vec::new(),
            token_usage: None,
        };
        let result = match &mut self.backend {
            Backend::Mock(mock) => {
                exchange.attempt_count = 1;
                let r = mock.respond(system, user);
                exchange.attempts.push(AttemptOutcome {
                    status: r.as_ref().ok().map(|_| 200),
                    error: r.as_ref().err().map(ToString::to_string),
                    delay_before_ms: 0,
                });
                r
            }
            Backend::Live { key, transport } => {
                let started = Instant::now();
                let r = live_call(
                    &self.endpoint,
                    key,
                    transport.as_ref(),
                    &self.gate,
                    self.policy,
                    self.sleep,
                    system,
                    user,
                    &mut exchange,
                );
                exchange.latency_ms = started.elapsed().as_millis() as u64;
                r
            }
        };
        match &result {
            Ok(text) => exchange.response_text = Some(text.clone()),
            Err(e) => exchange.error = Some(e.to_string()),
        }
        self.exchanges.push(exchange);
        result
    }
}

#[allow(clippy::too_many_arguments)]
fn live_call(
    endpoint: &ModelEndpoint,
    key: &ApiKey,
    transport: &dyn Transport,
    gate: &Gate,
    policy: RetryPolicy,
    sleep: fn(Duration),
    system: &str,
    user: &str,
    exchange: &mut ChatExchange,
) -> Result<String, GatewayError> {
    let request = build_request(endpoint, key, system, user);
    let mut last = String::new();
    for attempt in 1..=endpoint.max_retries + 1 {
        let delay = if attempt == 1 { Duration::ZERO } else { policy.delay(attempt - 1) };
        if !delay.is_zero() {
            sleep(delay);
        }
        exchange.attempt_count = attempt;
        let outcome = {
            let _permit = gate.acquire();
            transport.post_json(&request)
        };
        let (status, result) = match outcome {
            Ok(resp) => (Some(resp.status), classify(endpoint.provider, resp)),
            Err(TransportError::Timeout(e)) => (None, Err(AttemptError::Retryable(format!("timeout: {e}")))),
            Err(TransportError::Connection(e)) => (None, Err(AttemptError::Retryable(format!("connection: {e}")))),
        };
        let mut record = AttemptOutcome {
            status,
            error: None,
            delay_before_ms: delay.as_millis() as u64,
        };
        match result {
            Ok((text, usage)) => {
                exchange.attempts.push(record);
                exchange.token_usage = usage;
                return Ok(text);
            }
            Err(AttemptError::Fatal(e)) => {
                record.error = Some(e.to_string());
                exchange.attempts.push(record);
                return Err(e);
            }
            Err(AttemptError::Retryable(msg)) => {
                debug!(model = %endpoint.model_id, attempt, "transient failure: {msg}");
                record.error = Some(msg.clone());
                exchange.attempts.push(record);
                last = msg;
            }
        }
    }
    warn!(model = %endpoint.model_id, "giving up after {} attempts", endpoint.max_retries + 1);
    Err(GatewayError::RetriesExhausted {
        attempts: endpoint.max_retries + 1,
        last,
    })
}

fn build_request(endpoint: &ModelEndpoint, key: &ApiKey, system: &str, user: &str) -> HttpRequest {
    let base = endpoint.base_url.trim_end_matches('/');
    match endpoint.provider {
        ProviderKind::AnthropicStyle => HttpRequest {
            url: format!("{base}/v1/messages"),
            headers: vec![
                ("x-api-key".into(), key.expose().to_string()),
                ("anthropic-version".into(), ANTHROPIC_VERSION.into()),
                ("content-type".into(), "application/json".into()),
            ],
            body: json!({
                "model": endpoint.model_id,
                "max_tokens": endpoint.max_tokens,
                "temperature": endpoint.temperature,
                "system": system,
                "messages": [{"role": "user", "content": user}],
            }),
            timeout: endpoint.timeout(),
        },
        _ => {
            let mut messages = Vec::new();
            if !system.is_empty() {
                messages.push(json!({"role": "system", "content": system}));
            }
            messages.push(json!({"role": "user", "content": user}));
            HttpRequest {
                url: format!("{base}/chat/completions"),
                headers: vec![
                    ("authorization".into(), format!("Bearer {}", key.expose())),
                    ("content-type".into(), "application/json".into()),
                ],
                body: json!({
                    "model": endpoint.model_id,
                    "messages": messages,
                    "temperature": endpoint.temperature,
                    "max_tokens": endpoint.max_tokens,
                }),
                timeout: endpoint.timeout(),
            }
        }
    }
}

fn classify(provider: ProviderKind, resp: HttpResponse) -> Result<(String, Option<TokenUsage>), AttemptError> {
    match resp.status {
        200..=299 => parse_body(provider, &resp.body).map_err(AttemptError::Fatal),
        401 | 403 => Err(AttemptError::Fatal(GatewayError::Auth { status: resp.status })),
        408 | 429 | 500..=599 => Err(AttemptError::Retryable(format!("HTTP {}", resp.status))),
        status => Err(AttemptError::Fatal(GatewayError::Provider {
            status,
            body: truncate(&resp.body, 500),
        })),
    }
}

fn truncate(s: &str, max: usize) -> String {
    match s.char_indices().nth(max) {
        Some((i, _)) => format!("{}...", &s[..i]),
        None => s.to_string(),
    }
}

fn parse_body(provider: ProviderKind, body: &str) -> Result<(String, Option<TokenUsage>), GatewayError> {
    let value: Value =
        serde_json::from_str(body).map_err(|e| GatewayError::Malformed(format!("response is not JSON: {e}")))?;
    let usage_of = |input: &str, output: &str| {
        let u = value.get("usage")?;
        Some(TokenUsage {
            input_tokens: u.get(input)?.as_u64()?,
            output_tokens: u.get(output)?.as_u64()?,
        })
    };
    match provider {
        ProviderKind::AnthropicStyle => {
            let blocks = value
                .get("content")
                .and_then(Value::as_array)
                .ok_or_else(|| GatewayError::Malformed("missing content blocks".into()))?;
            let text: String = blocks
                .iter()
                .filter(|b| b.get("type").and_then(Value::as_str) == Some("text"))
                .filter_map(|b| b.get("text").and_then(Value::as_str))
                .collect();
            if text.is_empty() {
                return Err(GatewayError::Malformed("no text content".into()));
            }
            Ok((text, usage_of("input_tokens", "output_tokens")))
        }
        _ => {
            let text = value
                .pointer("/choices/0/message/content")
                .and_then(Value::as_str)
                .ok_or_else(|| GatewayError::Malformed("missing choices[0].message.content".into()))?;
            Ok((text.to_string(), usage_of("prompt_tokens", "completion_tokens")))
        }
    }
}
