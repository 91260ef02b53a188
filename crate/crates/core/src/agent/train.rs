//! Advantage actor-critic updates and the synchronous training loop.
//!
//! Each round, `workers` episodes are rolled out against the same
//! parameters; their gradients are then applied one after another in worker
//! order. With one worker this is plain sequential actor-critic.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::env::Environment;
use super::network::{
    actor_objective, advantage, critic_loss, ActorBatch, ActorCritic, Architecture, Mlp,
};
use crate::error::{Error, Result};
use crate::seed::derive;

/// Consecutive over-bound episodes tolerated before training aborts.
pub const DIVERGENCE_PATIENCE: usize = 50;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub gamma: f64,
    /// Entropy weight at the end of training.
    pub entropy_weight: f64,
    /// Entropy weight of the first episode; decays linearly to
    /// `entropy_weight`. `None` keeps it constant.
    pub entropy_weight_start: Option<f64>,
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub workers: usize,
    pub episodes: usize,
    pub seed: u64,
    pub hidden: Vec<usize>,
    /// Rewards enter the updates as `(r - reward_shift) / reward_scale`.
    pub reward_shift: f64,
    pub reward_scale: f64,
    /// Abort when the mean |advantage| stays above this for
    /// [`DIVERGENCE_PATIENCE`] episodes in a row.
    pub advantage_bound: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            gamma: 0.9,
            entropy_weight: 0.01,
            entropy_weight_start: None,
            actor_lr: 1e-4,
            critic_lr: 1e-3,
            workers: 1,
            episodes: 20_000,
            seed: 0,
            hidden: vec![128, 128],
            reward_shift: 35.0,
            reward_scale: 10.0,
            advantage_bound: 1e6,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(Error::Config(format!("gamma must lie in (0, 1], got {}", self.gamma)));
        }
        if !(self.actor_lr > 0.0 && self.critic_lr > 0.0) {
            return Err(Error::Config("learning rates must be > 0".into()));
        }
        if self.entropy_weight < 0.0 || self.entropy_weight_start.is_some_and(|e| e < 0.0) {
            return Err(Error::Config("entropy weight must be >= 0".into()));
        }
        if self.workers == 0 {
            return Err(Error::Config("need at least one worker".into()));
        }
        if !(self.reward_scale > 0.0) {
            return Err(Error::Config("reward scale must be > 0".into()));
        }
        Ok(())
    }

    /// Entropy weight used for `episode`.
    pub fn entropy_weight_at(&self, episode: usize) -> f64 {
        match self.entropy_weight_start {
            Some(start) if self.episodes > 1 => {
                let frac = (episode as f64 / (self.episodes - 1) as f64).min(1.0);
                start + (self.entropy_weight - start) * frac
            }
            _ => self.entropy_weight,
        }
    }
}

/// One episode of experience.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Rollout {
    pub states: Vec<Vec<f64>>,
    pub actions: Vec<usize>,
    pub rewards: Vec<f64>,
    pub next_states: Vec<Vec<f64>>,
    pub dones: Vec<bool>,
}

impl Rollout {
    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn push(&mut self, state: Vec<f64>, action: usize, reward: f64, next: Vec<f64>, done: bool) {
        self.states.push(state);
        self.actions.push(action);
        self.rewards.push(reward);
        self.next_states.push(next);
        self.dones.push(done);
    }

    fn matrix(rows: &[Vec<f64>]) -> Array2<f64> {
        let cols = rows.first().map_or(0, Vec::len);
        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
        Array2::from_shape_vec((rows.len(), cols), flat).expect("rows share a length")
    }

    pub fn state_matrix(&self) -> Array2<f64> {
        Self::matrix(&self.states)
    }

    pub fn next_state_matrix(&self) -> Array2<f64> {
        Self::matrix(&self.next_states)
    }
}

/// Critic values on a rollout: `V(s_i)` and `V(s_{i+1})`.
#[derive(Debug, Clone, PartialEq)]
pub struct RolloutValues {
    pub current: Vec<f64>,
    pub next: Vec<f64>,
}

pub fn rollout_values(net: &ActorCritic, rollout: &Rollout) -> RolloutValues {
    let eval = |m: Array2<f64>| -> Vec<f64> {
        net.critic.forward_batch(m.view()).output().column(0).to_vec()
    };
    RolloutValues {
        current: eval(rollout.state_matrix()),
        next: eval(rollout.next_state_matrix()),
    }
}

/// Per-step advantages and the bootstrap targets `r + gamma V(s')`.
pub fn advantages_and_targets(
    rollout: &Rollout,
    values: &RolloutValues,
    gamma: f64,
) -> (Vec<f64>, Vec<f64>) {
    (0..rollout.len())
        .map(|i| {
            let adv = advantage(
                rollout.rewards[i],
                values.next[i],
                values.current[i],
                gamma,
                rollout.dones[i],
            );
            (adv, adv + values.current[i])
        })
        .unzip()
}

fn check_rollout(net: &ActorCritic, rollout: &Rollout) -> Result<()> {
    if let Some(bad) = rollout
        .states
        .iter()
        .chain(&rollout.next_states)
        .find(|s| s.len() != net.arch.input_dim)
    {
        return Err(Error::Dimension {
            expected: net.arch.input_dim,
            got: bad.len(),
        });
    }
    if rollout.actions.iter().any(|&a| a >= net.arch.num_actions) {
        return Err(Error::InvalidAction("rollout action out of range".into()));
    }
    Ok(())
}

fn finite_or_err(grad: &Mlp, what: &str, value: f64) -> Result<()> {
    if grad.is_finite() && value.is_finite() {
        Ok(())
    } else {
        Err(Error::Training(format!(
            "non-finite {what} gradient (objective {value})"
        )))
    }
}

/// Gradient-ascent step on the entropy-regularized policy objective, with
/// advantages held constant.
pub fn actor_update(
    net: &mut ActorCritic,
    rollout: &Rollout,
    advantages: &[f64],
    lr: f64,
    entropy_weight: f64,
    legal: Option<&[bool]>,
) -> Result<f64> {
    check_rollout(net, rollout)?;
    let states = rollout.state_matrix();
    let eval = actor_objective(
        &net.actor,
        &ActorBatch {
            states: states.view(),
            actions: &rollout.actions,
            advantages,
            legal,
            entropy_weight,
        },
    );
    finite_or_err(&eval.grad, "actor", eval.objective)?;
    net.actor.add_scaled(lr, &eval.grad);
    Ok(eval.objective)
}

/// Semi-gradient descent step on `1/2 sum (r + gamma V(s') - V(s))^2`.
/// Returns the loss before the step.
pub fn critic_update(net: &mut ActorCritic, rollout: &Rollout, gamma: f64, lr: f64) -> Result<f64> {
    check_rollout(net, rollout)?;
    let values = rollout_values(net, rollout);
    let (_, targets) = advantages_and_targets(rollout, &values, gamma);
    let states = rollout.state_matrix();
    let eval = critic_loss(&net.critic, states.view(), &targets);
    finite_or_err(&eval.grad, "critic", eval.loss)?;
    net.critic.add_scaled(-lr, &eval.grad);
    Ok(eval.loss)
}

/// Per-episode training statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeStats {
    pub episode: usize,
    pub mean_reward: f64,
    pub qoe: Option<f64>,
    pub entropy: f64,
    pub mean_abs_advantage: f64,
    pub critic_loss: f64,
}

pub struct TrainOutcome {
    pub params: ActorCritic,
    pub curve: Vec<EpisodeStats>,
}

struct WorkerResult {
    actor_grad: Mlp,
    critic_grad: Mlp,
    stats: EpisodeStats,
}

/// Boolean legality mask from a list of legal action indices.
pub fn legal_mask(num_actions: usize, legal: &[usize]) -> Result<Vec<bool>> {
    if legal.is_empty() {
        return Err(Error::Config("legal action set is empty".into()));
    }
    let mut mask = vec![false; num_actions];
    for &a in legal {
        *mask
            .get_mut(a)
            .ok_or_else(|| Error::InvalidAction(format!("legal action {a} out of range")))? = true;
    }
    Ok(mask)
}

/// Seed handed to the environment factory for episode `episode`.
pub fn episode_seed(seed: u64, episode: usize) -> u64 {
    derive(seed, 1, episode as u64)
}

/// Fresh parameters for `arch`, seeded from the training seed.
pub fn initial_params(config: &TrainConfig, input_dim: usize, num_actions: usize) -> ActorCritic {
    let mut rng = ChaCha8Rng::seed_from_u64(derive(config.seed, 0, 0));
    ActorCritic::new(
        Architecture::new(input_dim, config.hidden.clone(), num_actions),
        &mut rng,
    )
}

fn sample(probs: &[f64], rng: &mut impl Rng) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last_legal = 0;
    for (k, &p) in probs.iter().enumerate() {
        if p > 0.0 {
            acc += p;
            last_legal = k;
            if u < acc {
                return k;
            }
        }
    }
    last_legal
}

/// Plays one episode by sampling from the current policy.
pub fn collect_rollout<E: Environment>(
    net: &ActorCritic,
    env: &mut E,
    legal: Option<&[bool]>,
    rng: &mut impl Rng,
) -> Result<Rollout> {
    let mut rollout = Rollout::default();
    let mut obs = env.reset();
    loop {
        let probs = net.policy(&obs, legal)?;
        let action = sample(&probs, rng);
        let tr = env.step(action)?;
        let done = tr.done;
        rollout.push(obs, action, tr.reward, tr.observation.clone(), done);
        if done {
            return Ok(rollout);
        }
        obs = tr.observation;
    }
}

fn run_worker<E, F>(
    net: &ActorCritic,
    config: &TrainConfig,
    factory: &F,
    legal: &[bool],
    episode: usize,
) -> Result<WorkerResult>
where
    E: Environment,
    F: Fn(u64) -> Result<E>,
{
    let mut env = factory(episode_seed(config.seed, episode))?;
    let mut rng = ChaCha8Rng::seed_from_u64(derive(config.seed, 2, episode as u64));
    let mut rollout = collect_rollout(net, &mut env, Some(legal), &mut rng)?;
    let raw_mean = rollout.rewards.iter().sum::<f64>() / rollout.len().max(1) as f64;
    rollout
        .rewards
        .iter_mut()
        .for_each(|r| *r = (*r - config.reward_shift) / config.reward_scale);

    let values = rollout_values(net, &rollout);
    let (advantages, targets) = advantages_and_targets(&rollout, &values, config.gamma);
    let states = rollout.state_matrix();
    let actor = actor_objective(
        &net.actor,
        &ActorBatch {
            states: states.view(),
            actions: &rollout.actions,
            advantages: &advantages,
            legal: Some(legal),
            entropy_weight: config.entropy_weight_at(episode),
        },
    );
    finite_or_err(&actor.grad, "actor", actor.objective)?;
    let critic = critic_loss(&net.critic, states.view(), &targets);
    finite_or_err(&critic.grad, "critic", critic.loss)?;

    let mean_abs_advantage =
        advantages.iter().map(|a| a.abs()).sum::<f64>() / advantages.len().max(1) as f64;
    Ok(WorkerResult {
        actor_grad: actor.grad,
        critic_grad: critic.grad,
        stats: EpisodeStats {
            episode,
            mean_reward: raw_mean,
            qoe: env.episode_qoe(),
            entropy: actor.mean_entropy,
            mean_abs_advantage,
            critic_loss: critic.loss,
        },
    })
}

/// Trains from freshly initialized parameters.
pub fn train<E, F>(config: &TrainConfig, factory: F, legal: &[usize]) -> Result<TrainOutcome>
where
    E: Environment,
    F: Fn(u64) -> Result<E> + Sync,
{
    config.validate()?;
    let probe = factory(episode_seed(config.seed, 0))?;
    let params = initial_params(config, probe.observation_dim(), probe.num_actions());
    train_from(config, params, factory, legal)
}

/// Continues training `params`.
pub fn train_from<E, F>(
    config: &TrainConfig,
    mut params: ActorCritic,
    factory: F,
    legal: &[usize],
) -> Result<TrainOutcome>
where
    E: Environment,
    F: Fn(u64) -> Result<E> + Sync,
{
    config.validate()?;
    let mask = legal_mask(params.arch.num_actions, legal)?;
    let mut curve = Vec::with_capacity(config.episodes);
    let mut over_bound = 0usize;
    let mut episode = 0usize;

    while episode < config.episodes {
        let batch = config.workers.min(config.episodes - episode);
        let results: Vec<Result<WorkerResult>> = (episode..episode + batch)
            .into_par_iter()
            .map(|ep| run_worker(&params, config, &factory, &mask, ep))
            .collect();
        for res in results {
            let res = res?;
            params.actor.add_scaled(config.actor_lr, &res.actor_grad);
            params.critic.add_scaled(-config.critic_lr, &res.critic_grad);
            if !params.is_finite() {
                return Err(Error::Training(format!(
                    "parameters became non-finite at episode {}",
                    res.stats.episode
                )));
            }
            if res.stats.mean_abs_advantage > config.advantage_bound {
                over_bound += 1;
                if over_bound >= DIVERGENCE_PATIENCE {
                    return Err(Error::Training(format!(
                        "mean |advantage| above {} for {} consecutive episodes (last {:.3e} at episode {})",
                        config.advantage_bound,
                        DIVERGENCE_PATIENCE,
                        res.stats.mean_abs_advantage,
                        res.stats.episode
                    )));
                }
            } else {
                over_bound = 0;
            }
            curve.push(res.stats);
        }
        episode += batch;
    }
    Ok(TrainOutcome { params, curve })
}

/// Writes the training curve as CSV.
pub fn write_curve<W: std::io::Write>(curve: &[EpisodeStats], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for row in curve {
        w.serialize(row)?;
    }
    w.flush().map_err(|e| Error::io("training curve", e))?;
    Ok(())
}
