//! Actor-critic agent: networks, update rules, training loop, checkpoints.

pub mod checkpoint;
pub mod env;
pub mod network;
pub mod train;

pub use checkpoint::Checkpoint;
pub use env::{BanditEnv, Environment, StreamingEnv, Transition};
pub use network::{advantage, policy_entropy, ActorCritic, Architecture, Mlp};
pub use train::{
    actor_update, critic_update, legal_mask, train, train_from, EpisodeStats, Rollout, TrainConfig,
    TrainOutcome,
};

use crate::error::Result;
use crate::policy::{DecisionContext, Policy};
use crate::sim::Action;

/// Deterministic evaluation policy: argmax over legal actions, lowest index
/// wins ties.
#[derive(Debug, Clone)]
pub struct AgentPolicy {
    name: String,
    params: ActorCritic,
    legal: Vec<bool>,
}

impl AgentPolicy {
    pub fn new(name: impl Into<String>, params: ActorCritic, legal_actions: &[usize]) -> Result<Self> {
        let legal = legal_mask(params.arch.num_actions, legal_actions)?;
        Ok(AgentPolicy {
            name: name.into(),
            params,
            legal,
        })
    }

    pub fn from_checkpoint(name: impl Into<String>, ck: &Checkpoint) -> Result<Self> {
        Self::new(name, ck.params()?, &ck.legal_actions)
    }

    pub fn params(&self) -> &ActorCritic {
        &self.params
    }

    /// Index of the most probable legal action.
    pub fn greedy_action(&self, obs: &[f64]) -> Result<usize> {
        let probs = self.params.policy(obs, Some(&self.legal))?;
        let mut best = None;
        for (k, &p) in probs.iter().enumerate() {
            if self.legal[k] && best.is_none_or(|(_, bp)| p > bp) {
                best = Some((k, p));
            }
        }
        Ok(best.map(|(k, _)| k).expect("legal set is non-empty"))
    }
}

impl Policy for AgentPolicy {
    fn name(&self) -> &str {
        &self.name
    }

    fn decide(&mut self, ctx: &DecisionContext<'_>) -> Result<Action> {
        Ok(Action::from_index(self.greedy_action(ctx.observation.as_slice())?))
    }
}
