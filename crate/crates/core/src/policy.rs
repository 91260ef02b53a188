//! Baseline decision rules behind a common [`Policy`] interface.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::sim::{Action, Observation, PipelineState, SimConfig, Simulator, StepOutcome};

/// Throughput samples averaged by the bandwidth-based rule.
pub const BDASH_WINDOW: usize = 5;

/// Everything a policy may look at when deciding the next chunk.
#[derive(Debug, Clone, Copy)]
pub struct DecisionContext<'a> {
    pub config: &'a SimConfig,
    pub state: &'a PipelineState,
    pub observation: &'a Observation,
}

pub trait Policy {
    fn name(&self) -> &str;

    fn decide(&mut self, ctx: &DecisionContext<'_>) -> Result<Action>;
}

impl<P: Policy + ?Sized> Policy for Box<P> {
    fn name(&self) -> &str {
        (**self).name()
    }

    fn decide(&mut self, ctx: &DecisionContext<'_>) -> Result<Action> {
        (**self).decide(ctx)
    }
}

/// Action indices that remain legal. Without enhancement only the `p = 0`
/// half of the action set survives.
pub fn mask_actions(num_levels: usize, allow_enhance: bool) -> Result<Vec<usize>> {
    if num_levels == 0 {
        return Err(Error::Config("cannot mask an empty action set".into()));
    }
    Ok((0..num_levels * 2)
        .filter(|a| allow_enhance || a % 2 == 0)
        .collect())
}

fn mean(xs: &[f64]) -> Option<f64> {
    (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64)
}

/// Largest ladder rate not above the mean of `history`; lowest rate when
/// the history is empty or the prediction is below the ladder.
pub fn bdash_decide(history: &[f64], ladder: &[f64]) -> Action {
    let index = match mean(history) {
        None => 0,
        Some(pred) => ladder.iter().rposition(|&r| r <= pred).unwrap_or(0),
    };
    Action::new(index, false)
}

/// Inputs to the greedy rule.
#[derive(Debug, Clone, Copy)]
pub struct GreedyView<'a> {
    pub buffer_p: usize,
    pub playback_remaining: f64,
    pub chunk_s: f64,
    pub throughput_history: &'a [f64],
    pub enhance_history: &'a [f64],
    pub ladder: &'a [f64],
    pub psnr_row: &'a [f64],
}

impl GreedyView<'_> {
    /// Playback runway available before a stall.
    pub fn slack(&self) -> f64 {
        self.playback_remaining + self.chunk_s * self.buffer_p as f64
    }

    pub fn predicted_throughput(&self) -> f64 {
        mean(self.throughput_history).unwrap_or(self.ladder[0])
    }

    /// Mean of past enhancement times, one chunk duration if none yet.
    pub fn predicted_enhance_time(&self) -> f64 {
        mean(self.enhance_history).unwrap_or(self.chunk_s)
    }

    /// Actions whose predicted download plus enhancement fits the slack.
    pub fn stall_free(&self) -> Vec<usize> {
        let c = self.predicted_throughput();
        let tau_e = self.predicted_enhance_time();
        let slack = self.slack();
        (0..self.ladder.len() * 2)
            .filter(|&a| {
                let act = Action::from_index(a);
                let cost = self.ladder[act.bitrate_index] * self.chunk_s / c
                    + if act.enhance { tau_e } else { 0.0 };
                cost <= slack
            })
            .collect()
    }
}

/// Highest-PSNR action among those predicted not to stall; ties go to the
/// lower bitrate, then to no enhancement.
pub fn greedy_decide(view: &GreedyView<'_>) -> Action {
    let mut best: Option<usize> = None;
    for a in view.stall_free() {
        if best.is_none_or(|b| view.psnr_row[a] > view.psnr_row[b]) {
            best = Some(a);
        }
    }
    best.map_or(Action::new(0, false), Action::from_index)
}

#[derive(Debug, Clone, Default)]
pub struct BDash;

impl Policy for BDash {
    fn name(&self) -> &str {
        "bdash"
    }

    fn decide(&mut self, ctx: &DecisionContext<'_>) -> Result<Action> {
        let history: Vec<f64> = ctx.state.throughput_history().take(BDASH_WINDOW).collect();
        Ok(bdash_decide(&history, &ctx.config.mpd.ladder_mbps))
    }
}

#[derive(Debug, Clone, Default)]
pub struct Greedy;

impl Policy for Greedy {
    fn name(&self) -> &str {
        "greedy"
    }

    fn decide(&mut self, ctx: &DecisionContext<'_>) -> Result<Action> {
        let cfg = ctx.config;
        let st = ctx.state;
        let throughput: Vec<f64> = st.throughput_history().take(cfg.k1).collect();
        let enhance: Vec<f64> = st.enhance_history().take(cfg.k2).collect();
        let view = GreedyView {
            buffer_p: st.buffer_p(),
            playback_remaining: st.playback_remaining(cfg),
            chunk_s: cfg.chunk_duration(),
            throughput_history: &throughput,
            enhance_history: &enhance,
            ladder: &cfg.mpd.ladder_mbps,
            psnr_row: cfg.mpd.row(st.next_chunk()),
        };
        Ok(greedy_decide(&view))
    }
}

/// Always returns the same action.
#[derive(Debug, Clone)]
pub struct Fixed(pub Action);

impl Policy for Fixed {
    fn name(&self) -> &str {
        "fixed"
    }

    fn decide(&mut self, _ctx: &DecisionContext<'_>) -> Result<Action> {
        Ok(self.0)
    }
}

/// Uniform over the legal actions.
#[derive(Debug, Clone)]
pub struct RandomPolicy {
    rng: ChaCha8Rng,
    allow_enhance: bool,
}

impl RandomPolicy {
    pub fn new(seed: u64, allow_enhance: bool) -> Self {
        RandomPolicy {
            rng: ChaCha8Rng::seed_from_u64(seed),
            allow_enhance,
        }
    }
}

impl Policy for RandomPolicy {
    fn name(&self) -> &str {
        "random"
    }

    fn decide(&mut self, ctx: &DecisionContext<'_>) -> Result<Action> {
        let legal = mask_actions(ctx.config.mpd.ladder_mbps.len(), self.allow_enhance)?;
        Ok(Action::from_index(legal[self.rng.random_range(0..legal.len())]))
    }
}

/// Baseline policies selectable by name.
pub fn baseline_by_name(name: &str, seed: u64) -> Result<Box<dyn Policy + Send>> {
    match name {
        "bdash" => Ok(Box::new(BDash)),
        "greedy" => Ok(Box::new(Greedy)),
        "random" => Ok(Box::new(RandomPolicy::new(seed, true))),
        "lowest" => Ok(Box::new(Fixed(Action::new(0, false)))),
        other => Err(Error::UnknownPolicy(other.to_string())),
    }
}

/// Plays a whole episode from a fresh reset.
pub fn run_episode(sim: &mut Simulator, policy: &mut dyn Policy) -> Result<Vec<StepOutcome>> {
    let mut obs = sim.reset();
    let mut log = Vec::with_capacity(sim.config().num_chunks());
    let config = sim.shared_config();
    loop {
        let ctx = DecisionContext {
            config: &config,
            state: sim.state(),
            observation: &obs,
        };
        let action = policy.decide(&ctx)?;
        let (out, next) = sim.step(action)?;
        log.push(out);
        if out.done {
            return Ok(log);
        }
        obs = next;
    }
}
