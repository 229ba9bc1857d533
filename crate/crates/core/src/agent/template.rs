use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::game::{GameKind, Phase};

/// Identifies one of the bundled prompt templates.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TemplateId {
    StagHunt,
    StagHuntCommunicate,
    StagHuntAct,
    Ipd2,
    Nipd,
    Pgg,
    IpggPunish,
    Lesson,
}

impl TemplateId {
    pub const ALL: [TemplateId; 8] = [
        TemplateId::StagHunt,
        TemplateId::StagHuntCommunicate,
        TemplateId::StagHuntAct,
        TemplateId::Ipd2,
        TemplateId::Nipd,
        TemplateId::Pgg,
        TemplateId::IpggPunish,
        TemplateId::Lesson,
    ];

    /// The agent-facing template for a phase of a game.
    pub fn for_phase(kind: GameKind, phase: Phase) -> Option<TemplateId> {
        match (kind, phase) {
            (GameKind::StagHunt, Phase::Act) => Some(TemplateId::StagHunt),
            (GameKind::StagHuntComm, Phase::Communicate) => Some(TemplateId::StagHuntCommunicate),
            (GameKind::StagHuntComm, Phase::Act) => Some(TemplateId::StagHuntAct),
            (GameKind::Ipd2, Phase::Act) => Some(TemplateId::Ipd2),
            (GameKind::Nipd, Phase::Act) => Some(TemplateId::Nipd),
            (GameKind::Pgg, Phase::Contribute) => Some(TemplateId::Pgg),
            (GameKind::IpggPunish, Phase::Contribute | Phase::Punish) => Some(TemplateId::IpggPunish),
            _ => None,
        }
    }

    fn body(self) -> &'static str {
        match self {
            TemplateId::StagHunt => include_str!("../../assets/templates/stag_hunt.txt"),
            TemplateId::StagHuntCommunicate => include_str!("../../assets/templates/stag_hunt_comm_communicate.txt"),
            TemplateId::StagHuntAct => include_str!("../../assets/templates/stag_hunt_comm_act.txt"),
            TemplateId::Ipd2 => include_str!("../../assets/templates/ipd2.txt"),
            TemplateId::Nipd => include_str!("../../assets/templates/nipd.txt"),
            TemplateId::Pgg => include_str!("../../assets/templates/pgg.txt"),
            TemplateId::IpggPunish => include_str!("../../assets/templates/ipgg_punish.txt"),
            TemplateId::Lesson => include_str!("../../assets/templates/lesson.txt"),
        }
    }
}

impl fmt::Display for TemplateId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = serde_json::to_value(self).ok();
        f.write_str(s.as_ref().and_then(|v| v.as_str()).unwrap_or("template"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RenderError {
    #[error("template {template} needs a value for placeholder `{placeholder}`")]
    MissingPlaceholder { template: String, placeholder: String },
}

/// A text body with `${name}` placeholders. Every placeholder in the body is required.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PromptTemplate {
    pub id: String,
    pub body: String,
    pub required_placeholders: BTreeSet<String>,
}

impl PromptTemplate {
    pub fn new(id: impl Into<String>, body: impl Into<String>) -> Self {
        let body = body.into();
        let required_placeholders = placeholders(&body).map(|(_, name)| name.to_string()).collect();
        PromptTemplate {
            id: id.into(),
            body,
            required_placeholders,
        }
    }

    pub fn builtin(id: TemplateId) -> Self {
        PromptTemplate::new(id.to_string(), id.body())
    }

    /// Substitutes every placeholder in one pass; values are never re-expanded.
    pub fn render(&self, values: &BTreeMap<&str, String>) -> Result<String, RenderError> {
        let mut out = String::with_capacity(self.body.len() + 256);
        let mut last = 0;
        for (range, name) in placeholders(&self.body) {
            let value = values.get(name).ok_or_else(|| RenderError::MissingPlaceholder {
                template: self.id.clone(),
                placeholder: name.to_string(),
            })?;
            out.push_str(&self.body[last..range.start]);
            out.push_str(value);
            last = range.end;
        }
        out.push_str(&self.body[last..]);
        Ok(out)
    }
}

/// Yields the byte range and inner name of each `${...}` occurrence.
fn placeholders(body: &str) -> impl Iterator<Item = (std::ops::Range<usize>, &str)> {
    let mut pos = 0;
    std::iter::from_fn(move || {
        let start = pos + body[pos..].find("${")?;
        let close = start + body[start..].find('}')?;
        pos = close + 1;
        Some((start..close + 1, &body[start + 2..close]))
    })
}
