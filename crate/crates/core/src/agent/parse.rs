//! Pulling a structured action out of free-form model output.

use serde_json::{json, Map, Value};
use thiserror::Error;

use crate::game::{ActionRecord, BinaryAction, Contribution, GameSpec, Phase, PunishSpend, PunishmentAllocation};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("no JSON object with an \"action\" key found")]
    NoJson,
    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),
    #[error("choice {0:?} is not an allowed option")]
    InvalidChoice(String),
    #[error("{field} = {value} is out of range")]
    OutOfRange { field: &'static str, value: String },
    #[error("unknown player_id {0}")]
    UnknownPlayer(String),
}

impl ParseError {
    /// Stable machine-readable name of the error kind.
    pub fn kind(&self) -> &'static str {
        match self {
            ParseError::NoJson => "no_json",
            ParseError::SchemaMismatch(_) => "schema_mismatch",
            ParseError::InvalidChoice(_) => "invalid_choice",
            ParseError::OutOfRange { .. } => "out_of_range",
            ParseError::UnknownPlayer(_) => "unknown_player",
        }
    }
}

/// Finds the end (exclusive) of the balanced object starting at `start`, honoring strings.
fn balanced_end(bytes: &[u8], start: usize) -> Option<usize> {
    let mut depth = 0usize;
    let mut in_string = false;
    let mut escaped = false;
    for (i, &b) in bytes.iter().enumerate().skip(start) {
        if in_string {
            match b {
                _ if escaped => escaped = false,
                b'\\' => escaped = true,
                b'"' => in_string = false,
                _ => {}
            }
            continue;
        }
        match b {
            b'"' => in_string = true,
            b'{' => depth += 1,
            b'}' => {
                depth -= 1;
                if depth == 0 {
                    return Some(i + 1);
                }
            }
            _ => {}
        }
    }
    None
}

/// Returns the first balanced top-level JSON object that has an `"action"` key.
///
/// Code fences and surrounding prose are skipped because only brace-balanced
/// spans are considered.
pub fn extract_json(raw: &str) -> Result<&str, ParseError> {
    let bytes = raw.as_bytes();
    let mut pos = 0;
    while let Some(offset) = raw[pos..].find('{') {
        let start = pos + offset;
        match balanced_end(bytes, start) {
            Some(end) => {
                let candidate = &raw[start..end];
                match serde_json::from_str::<Value>(candidate) {
                    Ok(Value::Object(map)) if map.contains_key("action") => return Ok(candidate),
                    // a valid object without an action: skip past it entirely
                    Ok(_) => pos = end,
                    Err(_) => pos = start + 1,
                }
            }
            None => pos = start + 1,
        }
    }
    Err(ParseError::NoJson)
}

fn schema(msg: impl Into<String>) -> ParseError {
    ParseError::SchemaMismatch(msg.into())
}

fn normalize(s: &str) -> String {
    s.trim()
        .trim_matches(|c| c == '\'' || c == '"' || c == '<' || c == '>')
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
        .to_lowercase()
}

fn integer_field(obj: &Map<String, Value>, field: &'static str) -> Result<i64, ParseError> {
    let value = obj.get(field).ok_or_else(|| schema(format!("missing \"{field}\"")))?;
    match value {
        Value::Number(n) => {
            if let Some(i) = n.as_i64() {
                return Ok(i);
            }
            match n.as_f64() {
                Some(f) if f.fract() == 0.0 && f.abs() < 1e15 => Ok(f as i64),
                _ => Err(schema(format!("\"{field}\" must be an integer, got {n}"))),
            }
        }
        other => Err(schema(format!("\"{field}\" must be an integer, got {other}"))),
    }
}

fn check_type(obj: &Map<String, Value>, expected: &str, required: bool) -> Result<(), ParseError> {
    match obj.get("type") {
        None if required => Err(schema(format!("missing \"type\": \"{expected}\""))),
        None => Ok(()),
        Some(Value::String(t)) if normalize(t) == expected => Ok(()),
        Some(other) => Err(schema(format!("expected type \"{expected}\", got {other}"))),
    }
}

fn parse_choice(obj: &Map<String, Value>, spec: &GameSpec) -> Result<BinaryAction, ParseError> {
    let raw = match obj.get("choice") {
        Some(Value::String(s)) => s,
        Some(other) => return Err(schema(format!("\"choice\" must be a string, got {other}"))),
        None => return Err(schema("missing \"choice\"")),
    };
    let options: &[BinaryAction] = if spec.kind.is_stag_hunt() {
        &[BinaryAction::HuntStag, BinaryAction::HuntHare]
    } else {
        &[BinaryAction::Cooperate, BinaryAction::Defect]
    };
    let wanted = normalize(raw);
    options
        .iter()
        .copied()
        .find(|o| o.label().to_lowercase() == wanted)
        .ok_or_else(|| ParseError::InvalidChoice(raw.clone()))
}

fn parse_punish(obj: &Map<String, Value>, spec: &GameSpec) -> Result<PunishmentAllocation, ParseError> {
    check_type(obj, "punish", true)?;
    let targets = match obj.get("targets") {
        Some(Value::Array(a)) => a,
        Some(Value::Null) | None => return Err(schema("missing \"targets\" list")),
        Some(other) => return Err(schema(format!("\"targets\" must be a list, got {other}"))),
    };
    let mut spends = Vec::with_capacity(targets.len());
    for t in targets {
        let t = t
            .as_object()
            .ok_or_else(|| schema("each target must be an object"))?;
        let id = integer_field(t, "player_id")?;
        if id < 1 || id as usize > spec.n_players {
            return Err(ParseError::UnknownPlayer(id.to_string()));
        }
        let spend = integer_field(t, "spend_amount")?;
        if spend < 0 || spend > i64::from(u32::MAX) {
            return Err(ParseError::OutOfRange {
                field: "spend_amount",
                value: spend.to_string(),
            });
        }
        if spend > 0 {
            spends.push(PunishSpend {
                target: id as usize - 1,
                spend: spend as u32,
            });
        }
    }
    Ok(PunishmentAllocation { spends })
}

/// Validates the `"action"` object of `json_text` against the schema of `phase`.
pub fn parse_action(json_text: &str, phase: Phase, spec: &GameSpec) -> Result<ActionRecord, ParseError> {
    let value: Value = serde_json::from_str(json_text).map_err(|e| schema(format!("invalid JSON: {e}")))?;
    let action = value
        .get("action")
        .ok_or_else(|| schema("missing \"action\""))?
        .as_object()
        .ok_or_else(|| schema("\"action\" must be an object"))?;
    match phase {
        Phase::Act => Ok(ActionRecord::Choice(parse_choice(action, spec)?)),
        Phase::Contribute => {
            check_type(action, "contribute", false)?;
            let amount = integer_field(action, "amount")?;
            if amount < 0 || amount > i64::from(spec.endowment) {
                return Err(ParseError::OutOfRange {
                    field: "amount",
                    value: amount.to_string(),
                });
            }
            Ok(ActionRecord::Contribute(Contribution(amount as u32)))
        }
        Phase::Punish => Ok(ActionRecord::Punish(parse_punish(action, spec)?)),
        Phase::Communicate => {
            check_type(action, "communicate", false)?;
            let word = match action.get("word") {
                Some(Value::String(w)) => w.split_whitespace().next().unwrap_or(""),
                Some(other) => return Err(schema(format!("\"word\" must be a string, got {other}"))),
                None => return Err(schema("missing \"word\"")),
            };
            if word.is_empty() {
                return Err(schema("\"word\" is empty"));
            }
            Ok(ActionRecord::Communicate(word.to_string()))
        }
    }
}

/// `extract_json` followed by `parse_action`.
pub fn parse_response(raw: &str, phase: Phase, spec: &GameSpec) -> Result<ActionRecord, ParseError> {
    parse_action(extract_json(raw)?, phase, spec)
}

/// The `"reasoning"` string of the extracted object, if present.
pub fn extract_reasoning(raw: &str) -> Option<String> {
    let text = extract_json(raw).ok()?;
    let value: Value = serde_json::from_str(text).ok()?;
    value.get("reasoning")?.as_str().map(str::to_string)
}

/// The action in the JSON shape agents are asked to produce.
pub fn action_json(action: &ActionRecord) -> Value {
    match action {
        ActionRecord::Choice(c) => json!({ "choice": c.label() }),
        ActionRecord::Contribute(c) => json!({ "type": "contribute", "amount": c.0 }),
        ActionRecord::Punish(p) => json!({
            "type": "punish",
            "targets": p.spends.iter().map(|s| json!({
                "player_id": s.target + 1,
                "spend_amount": s.spend,
            })).collect::<Vec<_>>(),
        }),
        ActionRecord::Communicate(w) => json!({ "type": "communicate", "word": w }),
    }
}

/// A full response object with reasoning and action.
pub fn response_json(reasoning: &str, action: &ActionRecord) -> String {
    json!({ "reasoning": reasoning, "action": action_json(action) }).to_string()
}
