//! Observations, prompt rendering, action parsing and scripted strategies.

mod observation;
pub mod parse;
mod strategy;
mod template;

pub use observation::{
    prepend_lessons, render_history, render_observation, render_prompt, Observation, LESSON_HEADER, LESSON_RULE, NO_HISTORY,
};
pub use parse::{action_json, extract_json, extract_reasoning, parse_action, parse_response, response_json, ParseError};
pub use strategy::{scripted_decide, StrategyError, StrategySpec};
pub use template::{PromptTemplate, RenderError, TemplateId};

use serde::{Deserialize, Serialize};

use crate::game::ActionRecord;

/// A model reply together with the action parsed from it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgentResponse {
    pub raw_text: String,
    pub reasoning: String,
    pub action: ActionRecord,
}
