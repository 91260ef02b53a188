use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::agent::TrainConfig;
use crate::error::{Error, Result};
use crate::qoe::QoeWeights;
use crate::quality::{ComputeProfile, RateQualityModel, FRAMES_PER_CHUNK, REFERENCE_FPS};

pub const SCHEMA_VERSION: u32 = 1;

/// Whole-experiment configuration; one JSON file with a section per stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub seed: u64,
    pub corpus: CorpusConfig,
    pub sim: SimSettings,
    pub qoe: QoeWeights,
    pub train: TrainSettings,
    pub eval: EvalSettings,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            schema_version: SCHEMA_VERSION,
            seed: 2022,
            corpus: CorpusConfig::default(),
            sim: SimSettings::default(),
            qoe: QoeWeights::default(),
            train: TrainSettings::default(),
            eval: EvalSettings::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CorpusConfig {
    pub num_videos: usize,
    pub num_traces: usize,
    pub ladder_mbps: Vec<f64>,
    pub chunk_duration_s: f64,
    pub min_chunks: usize,
    pub max_chunks: usize,
    /// Length of each synthetic raw trace, seconds at one sample per second.
    pub trace_duration_s: usize,
    /// Range the scaled traces' mean throughput is drawn from.
    pub target_mean_mbps: [f64; 2],
    pub quality: RateQualityModel,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        CorpusConfig {
            num_videos: 40,
            num_traces: 40,
            ladder_mbps: vec![2.0, 2.5, 3.0, 3.5, 4.0],
            chunk_duration_s: 1.0,
            min_chunks: 60,
            max_chunks: 180,
            trace_duration_s: 600,
            target_mean_mbps: [2.0, 5.0],
            quality: RateQualityModel::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimSettings {
    pub db_cap: usize,
    pub pb_cap: usize,
    pub k1: usize,
    pub k2: usize,
    pub frames_per_chunk: u32,
    pub reference_fps: f64,
    /// Half-width of the uniform multiplicative jitter on enhancement time.
    pub enhance_jitter: f64,
}

impl Default for SimSettings {
    fn default() -> Self {
        SimSettings {
            db_cap: 5,
            pb_cap: 5,
            k1: 8,
            k2: 8,
            frames_per_chunk: FRAMES_PER_CHUNK,
            reference_fps: REFERENCE_FPS,
            enhance_jitter: 0.0,
        }
    }
}

impl SimSettings {
    /// Named profile with this experiment's frame count, FPS, and jitter.
    pub fn profile(&self, name: &str) -> Result<ComputeProfile> {
        let base = ComputeProfile::by_name(name)?;
        let profile = ComputeProfile {
            frames_per_chunk: self.frames_per_chunk,
            reference_fps: self.reference_fps,
            jitter: self.enhance_jitter,
            ..base
        };
        profile.validate()?;
        Ok(profile)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainSettings {
    #[serde(flatten)]
    pub agent: TrainConfig,
    /// False trains the enhancement-disabled variant.
    pub allow_enhance: bool,
    pub profiles: Vec<String>,
}

impl Default for TrainSettings {
    fn default() -> Self {
        // Annealed entropy and a faster actor; the constant 0.01 weight
        // collapses onto the lowest bitrate on this corpus.
        TrainSettings {
            agent: TrainConfig {
                entropy_weight_start: Some(1.0),
                actor_lr: 1e-3,
                hidden: vec![64, 64],
                ..TrainConfig::default()
            },
            allow_enhance: true,
            profiles: ComputeProfile::standard_set()
                .into_iter()
                .map(|p| p.name)
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalSettings {
    pub seeds: usize,
    pub profile: String,
    pub split: Split,
}

impl Default for EvalSettings {
    fn default() -> Self {
        EvalSettings {
            seeds: 20,
            profile: "high".into(),
            split: Split::Test,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

impl std::str::FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "test" => Ok(Split::Test),
            other => Err(Error::Config(format!("unknown split '{other}'"))),
        }
    }
}

impl std::fmt::Display for Split {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Test => "test",
        })
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: ExperimentConfig = serde_json::from_str(&text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "unsupported config schema {} (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        let c = &self.corpus;
        if c.ladder_mbps.is_empty() {
            return Err(Error::Config("bitrate ladder is empty".into()));
        }
        if c.ladder_mbps.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config("bitrate ladder must be strictly ascending".into()));
        }
        if c.num_videos < 2 || c.num_traces < 2 {
            return Err(Error::Config("need at least 2 videos and 2 traces for a split".into()));
        }
        if c.min_chunks == 0 || c.min_chunks > c.max_chunks {
            return Err(Error::Config("chunk count range must satisfy 1 <= min <= max".into()));
        }
        if c.trace_duration_s < 2 {
            return Err(Error::Config("raw traces need at least 2 samples".into()));
        }
        let [lo, hi] = c.target_mean_mbps;
        if !(lo > 0.0 && lo <= hi) {
            return Err(Error::Config("target mean range must satisfy 0 < lo <= hi".into()));
        }
        if self.sim.db_cap == 0 || self.sim.pb_cap == 0 || self.sim.k1 == 0 || self.sim.k2 == 0 {
            return Err(Error::Config("buffer caps and history lengths must be >= 1".into()));
        }
        self.qoe.validate()?;
        self.train.agent.validate()?;
        if self.train.profiles.is_empty() {
            return Err(Error::Config("training needs at least one compute profile".into()));
        }
        for p in &self.train.profiles {
            self.sim.profile(p)?;
        }
        self.sim.profile(&self.eval.profile)?;
        Ok(())
    }

    /// Short content hash identifying this exact configuration.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serializes");
        let digest = Sha256::digest(canonical.as_bytes());
        hex::encode(&digest[..8])
    }
}
