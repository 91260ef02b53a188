//! Environments the trainer can roll out in.

use crate::error::{Error, Result};
use crate::qoe::{chunk_reward, episode_qoe, QoeWeights};
use crate::sim::{Action, Simulator, StepOutcome};

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub observation: Vec<f64>,
    pub reward: f64,
    pub done: bool,
}

/// Episodic environment with a flat action index.
pub trait Environment {
    fn observation_dim(&self) -> usize;

    fn num_actions(&self) -> usize;

    fn reset(&mut self) -> Vec<f64>;

    fn step(&mut self, action: usize) -> Result<Transition>;

    /// Episode QoE once the episode is over, when the environment has one.
    fn episode_qoe(&self) -> Option<f64> {
        None
    }
}

/// The streaming simulator scored with the per-chunk QoE reward.
#[derive(Debug, Clone)]
pub struct StreamingEnv {
    sim: Simulator,
    weights: QoeWeights,
    log: Vec<StepOutcome>,
}

impl StreamingEnv {
    pub fn new(sim: Simulator, weights: QoeWeights) -> Self {
        StreamingEnv {
            sim,
            weights,
            log: Vec::new(),
        }
    }

    pub fn simulator(&self) -> &Simulator {
        &self.sim
    }

    pub fn log(&self) -> &[StepOutcome] {
        &self.log
    }
}

impl Environment for StreamingEnv {
    fn observation_dim(&self) -> usize {
        self.sim.config().observation_dim()
    }

    fn num_actions(&self) -> usize {
        self.sim.config().num_actions()
    }

    fn reset(&mut self) -> Vec<f64> {
        self.log.clear();
        self.sim.reset().0
    }

    fn step(&mut self, action: usize) -> Result<Transition> {
        let (out, obs) = self.sim.step(Action::from_index(action))?;
        self.log.push(out);
        Ok(Transition {
            observation: obs.0,
            reward: chunk_reward(&self.weights, &out),
            done: out.done,
        })
    }

    fn episode_qoe(&self) -> Option<f64> {
        if self.sim.is_done() {
            episode_qoe(&self.weights, &self.log)
                .ok()
                .map(|q| q.weighted_total)
        } else {
            None
        }
    }
}

/// One-step bandit: constant observation, reward 1 for `best`, else 0.
#[derive(Debug, Clone)]
pub struct BanditEnv {
    dim: usize,
    actions: usize,
    best: usize,
    finished: bool,
}

impl BanditEnv {
    pub fn new(dim: usize, actions: usize, best: usize) -> Result<Self> {
        if best >= actions {
            return Err(Error::Config(format!(
                "best arm {best} out of range for {actions} actions"
            )));
        }
        Ok(BanditEnv {
            dim,
            actions,
            best,
            finished: false,
        })
    }

    fn observation(&self) -> Vec<f64> {
        vec![1.0; self.dim]
    }
}

impl Environment for BanditEnv {
    fn observation_dim(&self) -> usize {
        self.dim
    }

    fn num_actions(&self) -> usize {
        self.actions
    }

    fn reset(&mut self) -> Vec<f64> {
        self.finished = false;
        self.observation()
    }

    fn step(&mut self, action: usize) -> Result<Transition> {
        if self.finished {
            return Err(Error::EpisodeDone);
        }
        if action >= self.actions {
            return Err(Error::InvalidAction(format!("arm {action}")));
        }
        self.finished = true;
        Ok(Transition {
            observation: self.observation(),
            reward: if action == self.best { 1.0 } else { 0.0 },
            done: true,
        })
    }
}
