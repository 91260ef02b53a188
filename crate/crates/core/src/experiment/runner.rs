//! Training, evaluation, and comparison over a generated corpus.

use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, Split};
use super::corpus::Corpus;
use crate::agent::{train, AgentPolicy, Checkpoint, EpisodeStats, StreamingEnv};
use crate::error::{Error, Result};
use crate::policy::{baseline_by_name, mask_actions, run_episode, Policy};
use crate::qoe::{episode_qoe, QoeBreakdown, QoeWeights};
use crate::quality::{ComputeProfile, MpdManifest};
use crate::seed::derive;
use crate::sim::{SimConfig, Simulator};
use crate::trace::BandwidthTrace;

const STREAM_EVAL: u64 = 20;
const STREAM_EVAL_POLICY: u64 = 21;

/// Simulator settings for one episode.
pub fn episode_config(
    cfg: &ExperimentConfig,
    video: Arc<MpdManifest>,
    trace: Arc<BandwidthTrace>,
    profile: ComputeProfile,
    offset_s: f64,
    seed: u64,
) -> SimConfig {
    SimConfig::new(video, trace, profile)
        .with_caps(cfg.sim.db_cap, cfg.sim.pb_cap)
        .with_history(cfg.sim.k1, cfg.sim.k2)
        .with_offset(offset_s)
        .with_seed(seed)
}

/// Draws a training episode: random train video, train trace, profile, and
/// starting point in the trace.
#[derive(Debug, Clone)]
pub struct TrainingSampler {
    cfg: ExperimentConfig,
    videos: Vec<Arc<MpdManifest>>,
    traces: Vec<Arc<BandwidthTrace>>,
    profiles: Vec<ComputeProfile>,
}

impl TrainingSampler {
    pub fn new(cfg: &ExperimentConfig, corpus: &Corpus) -> Result<Self> {
        let videos = corpus.videos_in(Split::Train);
        let traces = corpus.traces_in(Split::Train);
        if videos.is_empty() || traces.is_empty() {
            return Err(Error::Config("training split has no videos or traces".into()));
        }
        let profiles = cfg
            .train
            .profiles
            .iter()
            .map(|p| cfg.sim.profile(p))
            .collect::<Result<Vec<_>>>()?;
        Ok(TrainingSampler {
            cfg: cfg.clone(),
            videos,
            traces,
            profiles,
        })
    }

    pub fn env(&self, seed: u64) -> Result<StreamingEnv> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let video = &self.videos[rng.random_range(0..self.videos.len())];
        let trace = &self.traces[rng.random_range(0..self.traces.len())];
        let profile = &self.profiles[rng.random_range(0..self.profiles.len())];
        let offset = rng.random_range(0.0..trace.total_duration());
        let sim_cfg = episode_config(
            &self.cfg,
            Arc::clone(video),
            Arc::clone(trace),
            profile.clone(),
            offset,
            seed,
        );
        Ok(StreamingEnv::new(Simulator::new(sim_cfg)?, self.cfg.qoe))
    }
}

/// Legal actions for the configured ladder and enhancement switch.
pub fn legal_actions(cfg: &ExperimentConfig) -> Result<Vec<usize>> {
    mask_actions(cfg.corpus.ladder_mbps.len(), cfg.train.allow_enhance)
}

pub struct TrainingRun {
    pub checkpoint: Checkpoint,
    pub curve: Vec<EpisodeStats>,
}

pub fn run_training(cfg: &ExperimentConfig, corpus: &Corpus) -> Result<TrainingRun> {
    cfg.validate()?;
    let sampler = TrainingSampler::new(cfg, corpus)?;
    let legal = legal_actions(cfg)?;
    let out = train(&cfg.train.agent, |seed| sampler.env(seed), &legal)?;
    Ok(TrainingRun {
        checkpoint: Checkpoint::from_params(&out.params, &legal, &cfg.hash()),
        curve: out.curve,
    })
}

/// What to evaluate: a named baseline or a trained checkpoint.
#[derive(Debug, Clone)]
pub enum PolicySpec {
    Baseline(String),
    Agent { label: String, checkpoint: Checkpoint },
}

impl PolicySpec {
    pub fn label(&self) -> &str {
        match self {
            PolicySpec::Baseline(name) => name,
            PolicySpec::Agent { label, .. } => label,
        }
    }

    fn instantiate(&self, seed: u64) -> Result<Box<dyn Policy + Send>> {
        match self {
            PolicySpec::Baseline(name) => baseline_by_name(name, seed),
            PolicySpec::Agent { label, checkpoint } => {
                Ok(Box::new(AgentPolicy::from_checkpoint(label.clone(), checkpoint)?))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeSummary {
    pub seed: usize,
    pub video: usize,
    pub trace: usize,
    pub offset_s: f64,
    pub chunks: usize,
    pub enhanced: usize,
    pub qoe: QoeBreakdown,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub config_hash: String,
    pub policy: String,
    pub split: Split,
    pub profile: String,
    pub weights: QoeWeights,
    pub seeds: usize,
    pub mean_qoe: f64,
    pub std_qoe: f64,
    pub mean_psnr: f64,
    pub mean_variation: f64,
    pub mean_rebuffer: f64,
    pub enhance_fraction: f64,
    /// Mean episode QoE for each seed.
    pub per_seed: Vec<f64>,
    pub episodes: Vec<EpisodeSummary>,
    /// Every delivered chunk's PSNR, ascending.
    pub psnr_cdf: Vec<f64>,
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len().max(1) as f64
}

fn std_dev(xs: &[f64]) -> f64 {
    let m = mean(xs);
    (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / xs.len().max(1) as f64).sqrt()
}

struct EpisodeJob {
    seed: usize,
    video: usize,
    trace: usize,
    offset_s: f64,
}

/// Plays every video of the evaluation split once per seed. Each seed
/// re-pairs videos with traces and draws fresh trace offsets; agents act by
/// argmax so only the pairing varies for them.
pub fn evaluate(cfg: &ExperimentConfig, corpus: &Corpus, spec: &PolicySpec) -> Result<EvalReport> {
    cfg.validate()?;
    if cfg.eval.seeds == 0 {
        return Err(Error::Config("evaluation needs at least one seed".into()));
    }
    spec.instantiate(0)?;
    let split = cfg.eval.split;
    let profile = cfg.sim.profile(&cfg.eval.profile)?;
    let videos = corpus.videos_in(split);
    let traces = corpus.traces_in(split);
    if videos.is_empty() || traces.is_empty() {
        return Err(Error::Config(format!("{split} split has no videos or traces")));
    }

    let mut jobs = Vec::with_capacity(cfg.eval.seeds * videos.len());
    for seed in 0..cfg.eval.seeds {
        let mut rng = ChaCha8Rng::seed_from_u64(derive(cfg.seed, STREAM_EVAL, seed as u64));
        let mut pairing: Vec<usize> = (0..traces.len()).collect();
        pairing.shuffle(&mut rng);
        for video in 0..videos.len() {
            let trace = pairing[video % traces.len()];
            let offset_s = rng.random_range(0.0..traces[trace].total_duration());
            jobs.push(EpisodeJob {
                seed,
                video,
                trace,
                offset_s,
            });
        }
    }

    let results = jobs
        .par_iter()
        .enumerate()
        .map(|(k, job)| {
            let episode_seed = derive(cfg.seed, STREAM_EVAL_POLICY, k as u64);
            let sim_cfg = episode_config(
                cfg,
                Arc::clone(&videos[job.video]),
                Arc::clone(&traces[job.trace]),
                profile.clone(),
                job.offset_s,
                episode_seed,
            );
            let mut sim = Simulator::new(sim_cfg)?;
            let mut policy = spec.instantiate(episode_seed)?;
            let log = run_episode(&mut sim, &mut policy)?;
            let qoe = episode_qoe(&cfg.qoe, &log)?;
            let psnr: Vec<f64> = log.iter().map(|o| o.psnr).collect();
            let summary = EpisodeSummary {
                seed: job.seed,
                video: job.video,
                trace: job.trace,
                offset_s: job.offset_s,
                chunks: log.len(),
                enhanced: log.iter().filter(|o| o.action.enhance).count(),
                qoe,
            };
            Ok((summary, psnr))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut per_seed = vec![Vec::new(); cfg.eval.seeds];
    let mut psnr_cdf = Vec::new();
    let mut episodes = Vec::with_capacity(results.len());
    for (summary, psnr) in results {
        per_seed[summary.seed].push(summary.qoe.weighted_total);
        psnr_cdf.extend(psnr);
        episodes.push(summary);
    }
    psnr_cdf.sort_by(f64::total_cmp);
    let per_seed: Vec<f64> = per_seed.iter().map(|q| mean(q)).collect();
    let pick = |f: fn(&EpisodeSummary) -> f64| mean(&episodes.iter().map(f).collect::<Vec<_>>());
    let total_chunks: usize = episodes.iter().map(|e| e.chunks).sum();
    let total_enhanced: usize = episodes.iter().map(|e| e.enhanced).sum();

    Ok(EvalReport {
        config_hash: cfg.hash(),
        policy: spec.label().to_string(),
        split,
        profile: cfg.eval.profile.clone(),
        weights: cfg.qoe,
        seeds: cfg.eval.seeds,
        mean_qoe: mean(&per_seed),
        std_qoe: std_dev(&per_seed),
        mean_psnr: pick(|e| e.qoe.avg_psnr),
        mean_variation: pick(|e| e.qoe.avg_variation),
        mean_rebuffer: pick(|e| e.qoe.avg_rebuffer),
        enhance_fraction: total_enhanced as f64 / total_chunks.max(1) as f64,
        per_seed,
        episodes,
        psnr_cdf,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub policy: String,
    pub mean_qoe: f64,
    pub std_qoe: f64,
    pub mean_psnr: f64,
    pub mean_variation: f64,
    pub mean_rebuffer: f64,
    pub enhance_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Improvement {
    pub policy: String,
    pub over: String,
    pub percent: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub split: Split,
    pub profile: String,
    pub weights: QoeWeights,
    pub rows: Vec<ComparisonRow>,
    pub improvements: Vec<Improvement>,
}

/// Relative QoE improvement of `a` over `b`, in percent of `|b|`.
pub fn improvement_percent(a: f64, b: f64) -> f64 {
    (a - b) / b.abs() * 100.0
}

/// Side-by-side table and every ordered pairwise improvement. Reports must
/// share weights, profile, split, and seed count.
pub fn compare(reports: &[EvalReport]) -> Result<Comparison> {
    let [first, rest @ ..] = reports else {
        return Err(Error::Config("nothing to compare".into()));
    };
    if rest.is_empty() {
        return Err(Error::Config("comparison needs at least two reports".into()));
    }
    for r in rest {
        if r.weights != first.weights {
            return Err(Error::Mismatch(format!(
                "weights differ: {:?} vs {:?}",
                first.weights, r.weights
            )));
        }
        if r.profile != first.profile || r.split != first.split || r.seeds != first.seeds {
            return Err(Error::Mismatch(format!(
                "conditions differ: {}/{}/{} seeds vs {}/{}/{} seeds",
                first.profile, first.split, first.seeds, r.profile, r.split, r.seeds
            )));
        }
    }
    let rows = reports
        .iter()
        .map(|r| ComparisonRow {
            policy: r.policy.clone(),
            mean_qoe: r.mean_qoe,
            std_qoe: r.std_qoe,
            mean_psnr: r.mean_psnr,
            mean_variation: r.mean_variation,
            mean_rebuffer: r.mean_rebuffer,
            enhance_fraction: r.enhance_fraction,
        })
        .collect();
    let mut improvements = Vec::new();
    for a in reports {
        for b in reports {
            if !std::ptr::eq(a, b) {
                improvements.push(Improvement {
                    policy: a.policy.clone(),
                    over: b.policy.clone(),
                    percent: improvement_percent(a.mean_qoe, b.mean_qoe),
                });
            }
        }
    }
    Ok(Comparison {
        split: first.split,
        profile: first.profile.clone(),
        weights: first.weights,
        rows,
        improvements,
    })
}

/// First `chunks` chunks of a video, for oracle-sized instances.
pub fn truncate_video(mpd: &MpdManifest, chunks: usize) -> Result<MpdManifest> {
    if chunks == 0 || chunks > mpd.num_chunks {
        return Err(Error::Config(format!(
            "cannot take {chunks} chunks of a {}-chunk video",
            mpd.num_chunks
        )));
    }
    Ok(MpdManifest {
        num_chunks: chunks,
        psnr: mpd.psnr[..chunks].to_vec(),
        ..mpd.clone()
    })
}
