//! Inputs shared by the engine benchmarks.

use dilemma_core::agent::response_json;
use dilemma_core::game::{ActionRecord, Contribution, PunishmentAllocation};

/// A reply shaped like a chatty model: prose, a fenced block, trailing notes.
pub fn chatty_reply(reasoning_words: usize) -> String {
    let reasoning = vec!["think"; reasoning_words].join(" ");
    let body = response_json(&reasoning, &ActionRecord::Contribute(Contribution(12)));
    format!("Let me weigh the options {{first}} carefully.\n```json\n{body}\n```\nThat is my answer.")
}

/// Punishment orders where every player targets the next two seats.
pub fn ring_punishment(n_players: usize, spend: u32) -> Vec<PunishmentAllocation> {
    (0..n_players)
        .map(|p| PunishmentAllocation::from_pairs([((p + 1) % n_players, spend), ((p + 2) % n_players, spend)]))
        .collect()
}
