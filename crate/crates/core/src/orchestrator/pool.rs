use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::OrchestratorError;
use crate::agent::StrategySpec;
use crate::gateway::{MockScript, ModelEndpoint};

/// How an agent chooses actions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Decider {
    /// The first strategy that applies to a phase decides it.
    Scripted { strategies: Vec<StrategySpec> },
    /// A chat model; mock endpoints answer offline.
    Model { endpoint: ModelEndpoint },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentSpec {
    pub id: String,
    pub family: String,
    pub decider: Decider,
}

impl AgentSpec {
    pub fn scripted(id: &str, strategies: Vec<StrategySpec>) -> Self {
        AgentSpec {
            id: id.into(),
            family: "scripted".into(),
            decider: Decider::Scripted { strategies },
        }
    }

    pub fn model(id: &str, family: &str, endpoint: ModelEndpoint) -> Self {
        AgentSpec {
            id: id.into(),
            family: family.into(),
            decider: Decider::Model { endpoint },
        }
    }

    pub fn endpoint(&self) -> Option<&ModelEndpoint> {
        match &self.decider {
            Decider::Model { endpoint } => Some(endpoint),
            Decider::Scripted { .. } => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AgentPool {
    pub agents: Vec<AgentSpec>,
}

/// The four player models, with offline heuristics of differing cooperativeness.
pub const DEFAULT_MODELS: [(&str, &str, &str, f64); 4] = [
    ("mixtral", "Mixtral", "mistralai/Mixtral-8x22B-Instruct-v0.1", 0.55),
    ("qwen", "Qwen", "Qwen/Qwen2.5-72B-Instruct", 0.7),
    ("llama", "Llama", "meta-llama/Llama-3.3-70B-Instruct", 0.6),
    ("deepseek", "DeepSeek", "deepseek-ai/DeepSeek-V3", 0.45),
];

pub const DEFAULT_LESSON_MODEL: &str = "claude-opus-4-1-20250805";

impl Default for AgentPool {
    fn default() -> Self {
        AgentPool {
            agents: DEFAULT_MODELS
                .iter()
                .map(|&(id, family, model, coop)| {
                    let mut endpoint = ModelEndpoint::deepinfra(model);
                    endpoint.mock = Some(MockScript::Heuristic {
                        cooperativeness: coop,
                        punish_rate: 0.2,
                    });
                    AgentSpec::model(id, family, endpoint)
                })
                .collect(),
        }
    }
}

impl AgentPool {
    pub fn new(agents: Vec<AgentSpec>) -> Result<Self, OrchestratorError> {
        let pool = AgentPool { agents };
        pool.validate()?;
        Ok(pool)
    }

    pub fn validate(&self) -> Result<(), OrchestratorError> {
        if self.agents.is_empty() {
            return Err(OrchestratorError::Config("agent pool is empty".into()));
        }
        let mut seen = BTreeSet::new();
        for a in &self.agents {
            if !seen.insert(a.id.as_str()) {
                return Err(OrchestratorError::Config(format!("duplicate agent id `{}`", a.id)));
            }
            match &a.decider {
                Decider::Scripted { strategies } if strategies.is_empty() => {
                    return Err(OrchestratorError::Config(format!("agent `{}` has no strategies", a.id)));
                }
                Decider::Model { endpoint } => endpoint.validate().map_err(|e| OrchestratorError::Config(e.to_string()))?,
                _ => {}
            }
        }
        Ok(())
    }

    pub fn get(&self, id: &str) -> Option<&AgentSpec> {
        self.agents.iter().find(|a| a.id == id)
    }

    pub fn families(&self) -> BTreeMap<&str, Vec<usize>> {
        let mut out: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
        for (i, a) in self.agents.iter().enumerate() {
            out.entry(a.family.as_str()).or_default().push(i);
        }
        out
    }
}

/// Which agents sit at the table.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Grouping {
    /// Distinct agents drawn at random.
    #[default]
    Heterogeneous,
    /// Two agents from each of two families; a family with one agent fills both of its seats.
    Coalition,
}

/// Pool indices seated in player order: `n` distinct agents chosen uniformly and shuffled.
pub fn assign_roles(pool: &AgentPool, n: usize, rng: &mut impl Rng) -> Result<Vec<usize>, OrchestratorError> {
    if pool.agents.len() < n {
        return Err(OrchestratorError::InsufficientPool {
            have: pool.agents.len(),
            need: n,
        });
    }
    let mut idx: Vec<usize> = (0..pool.agents.len()).collect();
    idx.shuffle(rng);
    idx.truncate(n);
    Ok(idx)
}

/// Two families chosen at random, two seats each, in shuffled order.
pub fn coalition_roles(pool: &AgentPool, rng: &mut impl Rng) -> Result<Vec<usize>, OrchestratorError> {
    let families: Vec<Vec<usize>> = pool.families().into_values().collect();
    if families.len() < 2 {
        return Err(OrchestratorError::InsufficientFamilies { have: families.len() });
    }
    let mut order: Vec<usize> = (0..families.len()).collect();
    order.shuffle(rng);
    let mut seats = Vec::with_capacity(4);
    for &f in &order[..2] {
        let mut members = families[f].clone();
        members.shuffle(rng);
        let second = members.get(1).copied().unwrap_or(members[0]);
        seats.extend([members[0], second]);
    }
    seats.shuffle(rng);
    Ok(seats)
}

pub fn seat_agents(pool: &AgentPool, grouping: Grouping, n: usize, rng: &mut impl Rng) -> Result<Vec<usize>, OrchestratorError> {
    match grouping {
        Grouping::Heterogeneous => assign_roles(pool, n, rng),
        Grouping::Coalition if n == 4 => coalition_roles(pool, rng),
        Grouping::Coalition => Err(OrchestratorError::Config("coalition seating needs 4 players".into())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn permutation_of_full_pool() {
        let pool = AgentPool::default();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut roles = assign_roles(&pool, 4, &mut rng).unwrap();
        let again = assign_roles(&pool, 4, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        assert_eq!(roles, again);
        roles.sort_unstable();
        assert_eq!(roles, [0, 1, 2, 3]);
    }

    #[test]
    fn small_pool_rejected() {
        let mut pool = AgentPool::default();
        pool.agents.pop();
        let err = assign_roles(&pool, 4, &mut ChaCha8Rng::seed_from_u64(0)).unwrap_err();
        assert_eq!(err, OrchestratorError::InsufficientPool { have: 3, need: 4 });
    }

    #[test]
    fn every_agent_gets_every_seat() {
        let pool = AgentPool::default();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut seen = [[0u32; 4]; 4];
        for _ in 0..2000 {
            for (seat, agent) in assign_roles(&pool, 4, &mut rng).unwrap().into_iter().enumerate() {
                seen[agent][seat] += 1;
            }
        }
        assert!(seen.iter().flatten().all(|&c| c > 400), "{seen:?}");
    }

    #[test]
    fn coalition_two_by_two() {
        let pool = AgentPool::default();
        for seed in 0..50 {
            let seats = coalition_roles(&pool, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
            let mut fam: BTreeMap<&str, usize> = BTreeMap::new();
            for &s in &seats {
                *fam.entry(pool.agents[s].family.as_str()).or_default() += 1;
            }
            assert_eq!(fam.len(), 2);
            assert!(fam.values().all(|&c| c == 2));
        }
    }

    #[test]
    fn coalition_needs_two_families() {
        let pool = AgentPool::new(vec![
            AgentSpec::scripted("a", vec![StrategySpec::AlwaysCooperate]),
            AgentSpec::scripted("b", vec![StrategySpec::AlwaysDefect]),
        ])
        .unwrap();
        let err = coalition_roles(&pool, &mut ChaCha8Rng::seed_from_u64(0)).unwrap_err();
        assert_eq!(err, OrchestratorError::InsufficientFamilies { have: 1 });
    }

    #[test]
    fn pool_validation() {
        let dup = vec![
            AgentSpec::scripted("a", vec![StrategySpec::AlwaysCooperate]),
            AgentSpec::scripted("a", vec![StrategySpec::AlwaysDefect]),
        ];
        assert!(AgentPool::new(dup).is_err());
        assert!(AgentPool::new(vec![AgentSpec::scripted("a", vec![])]).is_err());
    }

    #[test]
    fn pool_json_round_trip() {
        let pool = AgentPool::default();
        let text = serde_json::to_string(&pool).unwrap();
        assert_eq!(serde_json::from_str::<AgentPool>(&text).unwrap(), pool);
        let scripted: AgentSpec = serde_json::from_str(
            r#"{"id":"t","family":"x","decider":{"kind":"scripted","strategies":[{"kind":"tit_for_tat"}]}}"#,
        )
        .unwrap();
        assert_eq!(scripted.decider, Decider::Scripted { strategies: vec![StrategySpec::TitForTat] });
    }
}
