//! Synthetic video and bandwidth-trace corpus with a seeded train/test split.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Normal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::{CorpusConfig, ExperimentConfig, Split};
use crate::error::{Error, Result};
use crate::quality::{generate_mpd, MpdManifest};
use crate::seed::derive;
use crate::trace::{parse_trace, scale_trace_max, scale_trace_mean, BandwidthTrace};

pub const INDEX_FILE: &str = "corpus.json";

const STREAM_VIDEO: u64 = 10;
const STREAM_TRACE: u64 = 11;
const STREAM_SPLIT: u64 = 12;
const STREAM_TARGET: u64 = 13;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScaleMethod {
    Mean,
    Max,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VideoEntry {
    pub path: String,
    pub split: Split,
    pub num_chunks: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub path: String,
    pub scale_method: ScaleMethod,
    pub target_mbps: f64,
    pub seed: u64,
    pub split: Split,
}

/// On-disk index of a generated corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusIndex {
    pub corpus_hash: String,
    pub videos: Vec<VideoEntry>,
    pub traces: Vec<TraceEntry>,
}

#[derive(Debug, Clone)]
pub struct Corpus {
    pub index: CorpusIndex,
    pub videos: Vec<Arc<MpdManifest>>,
    pub traces: Vec<Arc<BandwidthTrace>>,
}

/// Hash of everything the corpus depends on: the master seed and the corpus
/// section. Training and evaluation settings do not affect it.
pub fn corpus_hash(cfg: &ExperimentConfig) -> String {
    let canonical = serde_json::to_string(&(cfg.seed, &cfg.corpus)).expect("corpus config serializes");
    hex::encode(&Sha256::digest(canonical.as_bytes())[..8])
}

/// Raw 4G-like throughput at one sample per second: a log-space AR(1)
/// around a level that jumps at exponentially spaced regime changes, with
/// occasional short deep fades.
pub fn synthetic_raw_trace(duration_s: usize, seed: u64) -> Result<BandwidthTrace> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let innovation = Normal::new(0.0, 0.22).expect("valid sigma");
    let level_draw = Normal::new(3.0_f64.ln(), 0.5).expect("valid sigma");
    let regime_gap = Exp::new(1.0 / 45.0).expect("valid rate");

    let mut level = level_draw.sample(&mut rng);
    let mut next_switch = regime_gap.sample(&mut rng);
    let mut x = 0.0_f64;
    let mut fade_left = 0usize;
    let mut fade_depth = 1.0;
    let mut rates = Vec::with_capacity(duration_s);
    for t in 0..duration_s {
        if t as f64 >= next_switch {
            level = level_draw.sample(&mut rng);
            next_switch += regime_gap.sample(&mut rng).max(1.0);
        }
        x = 0.85 * x + innovation.sample(&mut rng);
        if fade_left == 0 && rng.random::<f64>() < 0.015 {
            fade_left = rng.random_range(1..=5);
            fade_depth = rng.random_range(0.05..0.3);
        }
        let fade = if fade_left > 0 {
            fade_left -= 1;
            fade_depth
        } else {
            1.0
        };
        rates.push(((level + x).exp() * fade).max(0.05));
    }
    BandwidthTrace::from_rates(&rates)
}

fn split_labels(n: usize, rng: &mut ChaCha8Rng) -> Vec<Split> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut labels = vec![Split::Test; n];
    for &i in &order[..n / 2] {
        labels[i] = Split::Train;
    }
    labels
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

impl Corpus {
    /// Builds the corpus in memory; a pure function of the seed and the
    /// corpus section of `cfg`.
    pub fn generate(cfg: &ExperimentConfig) -> Result<Corpus> {
        cfg.validate()?;
        let c: &CorpusConfig = &cfg.corpus;
        let mut split_rng = ChaCha8Rng::seed_from_u64(derive(cfg.seed, STREAM_SPLIT, 0));
        let video_splits = split_labels(c.num_videos, &mut split_rng);
        let trace_splits = split_labels(c.num_traces, &mut split_rng);

        let mut videos = Vec::with_capacity(c.num_videos);
        let mut video_entries = Vec::with_capacity(c.num_videos);
        for (i, &split) in video_splits.iter().enumerate() {
            let seed = derive(cfg.seed, STREAM_VIDEO, i as u64);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = rng.random_range(c.min_chunks..=c.max_chunks);
            let mpd = generate_mpd(&c.quality, n, &c.ladder_mbps, c.chunk_duration_s, seed)?;
            videos.push(Arc::new(mpd));
            video_entries.push(VideoEntry {
                path: format!("videos/video_{i:03}.json"),
                split,
                num_chunks: n,
                seed,
            });
        }

        let raw = (0..c.num_traces)
            .map(|i| synthetic_raw_trace(c.trace_duration_s, derive(cfg.seed, STREAM_TRACE, i as u64)))
            .collect::<Result<Vec<_>>>()?;
        // Max-scaled traces aim at the same mean range: the peak target is
        // the drawn mean times the corpus' typical peak-to-mean ratio.
        let peak_ratio = median(&mut raw.iter().map(|t| t.max() / t.mean()).collect::<Vec<_>>());

        let [lo, hi] = c.target_mean_mbps;
        let mut traces = Vec::with_capacity(c.num_traces);
        let mut trace_entries = Vec::with_capacity(c.num_traces);
        for (i, (trace, &split)) in raw.iter().zip(&trace_splits).enumerate() {
            let seed = derive(cfg.seed, STREAM_TARGET, i as u64);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mean_target = if hi > lo { rng.random_range(lo..hi) } else { lo };
            let (scaled, method, target) = match split {
                Split::Train => {
                    let target = mean_target * peak_ratio;
                    (scale_trace_max(trace, target)?, ScaleMethod::Max, target)
                }
                Split::Test => (scale_trace_mean(trace, mean_target)?, ScaleMethod::Mean, mean_target),
            };
            traces.push(Arc::new(scaled));
            trace_entries.push(TraceEntry {
                path: format!("traces/trace_{i:03}.csv"),
                scale_method: method,
                target_mbps: target,
                seed,
                split,
            });
        }

        Ok(Corpus {
            index: CorpusIndex {
                corpus_hash: corpus_hash(cfg),
                videos: video_entries,
                traces: trace_entries,
            },
            videos,
            traces,
        })
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        for sub in ["videos", "traces"] {
            let p = dir.join(sub);
            std::fs::create_dir_all(&p).map_err(|e| Error::io(&p, e))?;
        }
        for (entry, mpd) in self.index.videos.iter().zip(&self.videos) {
            write_file(&dir.join(&entry.path), &serde_json::to_string(mpd.as_ref())?)?;
        }
        for (entry, trace) in self.index.traces.iter().zip(&self.traces) {
            write_file(&dir.join(&entry.path), &trace.to_csv())?;
        }
        write_file(&dir.join(INDEX_FILE), &serde_json::to_string_pretty(&self.index)?)
    }

    pub fn load(dir: &Path) -> Result<Corpus> {
        let index: CorpusIndex = serde_json::from_str(&read_file(&dir.join(INDEX_FILE))?)?;
        let videos = index
            .videos
            .iter()
            .map(|v| {
                let mpd: MpdManifest = serde_json::from_str(&read_file(&dir.join(&v.path))?)?;
                mpd.validate()?;
                Ok(Arc::new(mpd))
            })
            .collect::<Result<Vec<_>>>()?;
        let traces = index
            .traces
            .iter()
            .map(|t| Ok(Arc::new(parse_trace(&read_file(&dir.join(&t.path))?)?)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Corpus {
            index,
            videos,
            traces,
        })
    }

    /// Loads a corpus and checks it was generated from `cfg`'s corpus settings.
    pub fn load_for(dir: &Path, cfg: &ExperimentConfig) -> Result<Corpus> {
        let corpus = Self::load(dir)?;
        let expected = corpus_hash(cfg);
        if corpus.index.corpus_hash != expected {
            return Err(Error::Mismatch(format!(
                "corpus at {} has hash {}, config expects {expected}; rerun generate",
                dir.display(),
                corpus.index.corpus_hash
            )));
        }
        Ok(corpus)
    }

    pub fn videos_in(&self, split: Split) -> Vec<Arc<MpdManifest>> {
        self.index
            .videos
            .iter()
            .zip(&self.videos)
            .filter(|(e, _)| e.split == split)
            .map(|(_, v)| Arc::clone(v))
            .collect()
    }

    pub fn traces_in(&self, split: Split) -> Vec<Arc<BandwidthTrace>> {
        self.index
            .traces
            .iter()
            .zip(&self.traces)
            .filter(|(e, _)| e.split == split)
            .map(|(_, t)| Arc::clone(t))
            .collect()
    }
}

fn write_file(path: &PathBuf, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn read_file(path: &PathBuf) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}
