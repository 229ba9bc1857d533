//! Offline stand-in for a chat model.

use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::GatewayError;

fn default_cooperativeness() -> f64 {
    0.6
}

fn default_punish_rate() -> f64 {
    0.2
}

/// How a mock endpoint answers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MockScript {
    /// Replays the responses in order; asking for more is an error.
    Canned { responses: Vec<String> },
    /// Reads the task from the prompt and answers with a well-formed reply,
    /// drawing decisions from a seeded RNG.
    Heuristic {
        /// Probability of a cooperative choice; also the mean contributed fraction.
        #[serde(default = "default_cooperativeness")]
        cooperativeness: f64,
        /// Probability of punishing someone in a punishment phase.
        #[serde(default = "default_punish_rate")]
        punish_rate: f64,
    },
    /// Always answers with unparseable prose.
    Garbage,
}

impl Default for MockScript {
    fn default() -> Self {
        MockScript::Heuristic {
            cooperativeness: default_cooperativeness(),
            punish_rate: default_punish_rate(),
        }
    }
}

pub const GARBAGE_REPLY: &str = "I am not sure what to do here, so I will think about it some more.";

#[derive(Debug)]
pub struct MockResponder {
    script: MockScript,
    queue: VecDeque<String>,
    rng: ChaCha8Rng,
}

impl MockResponder {
    pub fn new(script: MockScript, seed: u64) -> Self {
        let queue = match &script {
            MockScript::Canned { responses } => responses.iter().cloned().collect(),
            _ => VecDeque::new(),
        };
        MockResponder {
            script,
            queue,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn respond(&mut self, _system: &str, user: &str) -> Result<String, GatewayError> {
        match &self.script {
            MockScript::Canned { .. } => self.queue.pop_front().ok_or(GatewayError::MockExhausted),
            MockScript::Garbage => Ok(GARBAGE_REPLY.to_string()),
            MockScript::Heuristic {
                cooperativeness,
                punish_rate,
            } => {
                let (c, p) = (cooperativeness.clamp(0.0, 1.0), punish_rate.clamp(0.0, 1.0));
                Ok(self.heuristic(user, c, p))
            }
        }
    }

    fn heuristic(&mut self, prompt: &str, coop: f64, punish_rate: f64) -> String {
        if prompt.contains("Generate a concise (2-3 sentence) lesson") {
            let game = field_after(prompt, "- Game Type: ").unwrap_or("this game");
            let rate = field_after(prompt, "- Overall cooperation rate: ").unwrap_or("unknown");
            return format!(
                "Lesson from {game}: The group cooperated at a rate of {rate}, so open cooperatively but \
                 respond immediately to defection. Reciprocity only pays when others can observe and answer it."
            );
        }
        let (reasoning, action) = if prompt.contains("\"type\": \"communicate\"") {
            let word = if self.rng.random_bool(coop) {
                "stag"
            } else {
                ["hare", "safe", "careful"][self.rng.random_range(0..3)]
            };
            ("Signal my intended move clearly.", json!({"type": "communicate", "word": word}))
        } else if prompt.contains("This is the **Punishment** stage.") {
            let me = field_after(prompt, "You are Player ")
                .and_then(|s| s.trim_end_matches(|c: char| !c.is_ascii_digit()).parse::<usize>().ok())
                .unwrap_or(1);
            let mut targets = Vec::new();
            if self.rng.random_bool(punish_rate) {
                let others: Vec<usize> = (1..=4).filter(|&p| p != me).collect();
                let target = others[self.rng.random_range(0..others.len())];
                targets.push(json!({"player_id": target, "spend_amount": self.rng.random_range(1..=2)}));
            }
            (
                "Decide whether punishment is worth its cost this round.",
                json!({"type": "punish", "targets": targets}),
            )
        } else if prompt.contains("\"type\": \"contribute\"") {
            let noise: f64 = self.rng.random_range(-4.0..=4.0);
            let amount = (coop * 20.0 + noise).round().clamp(0.0, 20.0) as u32;
            (
                "Balance the public return against keeping my endowment.",
                json!({"type": "contribute", "amount": amount}),
            )
        } else if prompt.contains("'Hunt Stag' or 'Hunt Hare'") {
            let choice = if self.rng.random_bool(coop) { "Hunt Stag" } else { "Hunt Hare" };
            ("Weigh the coordination risk.", json!({"choice": choice}))
        } else {
            let choice = if self.rng.random_bool(coop) { "Cooperate" } else { "Defect" };
            ("Consider reciprocity and the remaining rounds.", json!({"choice": choice}))
        };
        let body = serde_json::to_string_pretty(&json!({"reasoning": reasoning, "action": action}))
            .expect("static JSON");
        match self.rng.random_range(0..3) {
            0 => body,
            1 => format!("```json\n{body}\n```"),
            _ => format!("Let me think this through step by step.\n\n{body}\n\nThat is my final answer."),
        }
    }
}

fn field_after<'a>(text: &'a str, label: &str) -> Option<&'a str> {
    let start = text.find(label)? + label.len();
    let rest = &text[start..];
    let end = rest.find([',', '\n']).unwrap_or(rest.len());
    Some(rest[..end].trim())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canned_replays_then_exhausts() {
        let mut m = MockResponder::new(
            MockScript::Canned {
                responses: vec!["a".into(), "b".into()],
            },
            0,
        );
        assert_eq!(m.respond("", "x").unwrap(), "a");
        assert_eq!(m.respond("", "x").unwrap(), "b");
        assert!(matches!(m.respond("", "x"), Err(GatewayError::MockExhausted)));
    }

    #[test]
    fn heuristic_is_seeded() {
        let prompt = "The history ... \"type\": \"contribute\", ...";
        let run = |seed| {
            let mut m = MockResponder::new(MockScript::default(), seed);
            (0..10).map(|_| m.respond("", prompt).unwrap()).collect::<Vec<_>>()
        };
        assert_eq!(run(3), run(3));
        assert_ne!(run(3), run(4));
    }
}
