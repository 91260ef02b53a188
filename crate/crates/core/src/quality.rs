//! Synthetic rate-quality model, manifest generation, and enhancement timing.
//!
//! PSNR for a chunk at bitrate `R` follows `beta0 + beta1 * ln(R)` plus a
//! per-chunk jitter shared by every action of that chunk. Enhancement adds a
//! gain that decays linearly from `gain_at_min` at the lowest ladder rate to
//! zero at the top rate.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// PSNR anchors measured on 1K video: (bitrate Mbps, PSNR dB).
pub const ANCHOR_POINTS: [(f64, f64); 2] = [(2.0, 35.68), (3.0, 37.76)];
/// PSNR of the 2 Mbps 1K chunk after enhancement.
pub const ANCHOR_ENHANCED_PSNR: f64 = 37.20;
/// Default per-chunk jitter.
pub const DEFAULT_NOISE_SIGMA: f64 = 0.8;
/// Reference enhancer throughput, frames per second.
pub const REFERENCE_FPS: f64 = 98.9;
/// Frames in a one-second chunk.
pub const FRAMES_PER_CHUNK: u32 = 25;

const RANGE_TOL: f64 = 1e-9;
const MAX_JITTER_REDRAWS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateQualityModel {
    pub beta0: f64,
    pub beta1: f64,
    pub gain_at_min: f64,
    pub noise_sigma: f64,
    pub r_min: f64,
    pub r_max: f64,
}

impl Default for RateQualityModel {
    fn default() -> Self {
        Self::calibrated(2.0, 4.0)
    }
}

impl RateQualityModel {
    /// Model fitted to the 1K anchors, with the measured 2 Mbps enhancement
    /// gain and the default chunk jitter, spanning `[r_min, r_max]`.
    pub fn calibrated(r_min: f64, r_max: f64) -> Self {
        let fitted = fit_rate_quality(&ANCHOR_POINTS).expect("anchor points are distinct");
        RateQualityModel {
            gain_at_min: ANCHOR_ENHANCED_PSNR - ANCHOR_POINTS[0].1,
            noise_sigma: DEFAULT_NOISE_SIGMA,
            r_min,
            r_max,
            ..fitted
        }
    }

    pub fn with_gain(mut self, gain_at_min: f64) -> Self {
        self.gain_at_min = gain_at_min;
        self
    }

    pub fn with_noise(mut self, noise_sigma: f64) -> Self {
        self.noise_sigma = noise_sigma;
        self
    }

    pub fn with_range(mut self, r_min: f64, r_max: f64) -> Self {
        self.r_min = r_min;
        self.r_max = r_max;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [
            self.beta0,
            self.beta1,
            self.gain_at_min,
            self.noise_sigma,
            self.r_min,
            self.r_max,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !finite {
            return Err(Error::Config("rate-quality model has non-finite fields".into()));
        }
        if self.beta1 <= 0.0 {
            return Err(Error::Config(format!("beta1 must be > 0, got {}", self.beta1)));
        }
        if self.gain_at_min < 0.0 || self.noise_sigma < 0.0 {
            return Err(Error::Config("gain_at_min and noise_sigma must be >= 0".into()));
        }
        if !(self.r_min > 0.0 && self.r_min <= self.r_max) {
            return Err(Error::Config(format!(
                "ladder range must satisfy 0 < r_min <= r_max, got [{}, {}]",
                self.r_min, self.r_max
            )));
        }
        Ok(())
    }

    fn check_domain(&self, bitrate: f64) -> Result<()> {
        if !bitrate.is_finite()
            || bitrate < self.r_min - RANGE_TOL
            || bitrate > self.r_max + RANGE_TOL
        {
            return Err(Error::Domain(format!(
                "bitrate {bitrate} Mbps outside ladder range [{}, {}]",
                self.r_min, self.r_max
            )));
        }
        Ok(())
    }

    /// Un-enhanced PSNR of a chunk at `bitrate`, shifted by the chunk's jitter.
    pub fn base_psnr(&self, bitrate: f64, chunk_jitter: f64) -> Result<f64> {
        self.check_domain(bitrate)?;
        Ok(self.beta0 + self.beta1 * bitrate.ln() + chunk_jitter)
    }

    /// PSNR gain from enhancing a chunk encoded at `bitrate`.
    pub fn enhancement_gain(&self, bitrate: f64) -> Result<f64> {
        self.check_domain(bitrate)?;
        let span = self.r_max - self.r_min;
        if span <= 0.0 {
            // Single-rate ladder: the only rate is the bottom of the range.
            return Ok(self.gain_at_min);
        }
        let frac = ((self.r_max - bitrate) / span).clamp(0.0, 1.0);
        Ok(self.gain_at_min * frac)
    }
}

/// Least-squares fit of `dB = beta0 + beta1 * ln(Mbps)`.
///
/// The returned model has zero gain and jitter, and its range spans the
/// fitted bitrates.
pub fn fit_rate_quality(points: &[(f64, f64)]) -> Result<RateQualityModel> {
    if points.iter().any(|(r, q)| !(r.is_finite() && *r > 0.0 && q.is_finite())) {
        return Err(Error::Calibration(
            "points must have positive finite bitrate and finite PSNR".into(),
        ));
    }
    let mut distinct: Vec<f64> = points.iter().map(|p| p.0).collect();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct.len() < 2 {
        return Err(Error::Calibration(format!(
            "need at least 2 distinct bitrates, got {}",
            distinct.len()
        )));
    }

    let n = points.len() as f64;
    let mean_x = points.iter().map(|(r, _)| r.ln()).sum::<f64>() / n;
    let mean_y = points.iter().map(|(_, q)| q).sum::<f64>() / n;
    let (sxy, sxx) = points.iter().fold((0.0, 0.0), |(sxy, sxx), (r, q)| {
        let dx = r.ln() - mean_x;
        (sxy + dx * (q - mean_y), sxx + dx * dx)
    });
    let beta1 = sxy / sxx;
    let beta0 = mean_y - beta1 * mean_x;

    Ok(RateQualityModel {
        beta0,
        beta1,
        gain_at_min: 0.0,
        noise_sigma: 0.0,
        r_min: distinct[0],
        r_max: distinct[distinct.len() - 1],
    })
}

/// Client hardware class; scales the reference per-chunk enhancement time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComputeProfile {
    pub name: String,
    pub scale_factor: f64,
    pub frames_per_chunk: u32,
    pub reference_fps: f64,
    /// Half-width of the optional uniform multiplicative jitter on each
    /// enhancement time (0 disables it).
    #[serde(default)]
    pub jitter: f64,
}

impl ComputeProfile {
    pub fn new(name: impl Into<String>, scale_factor: f64) -> Self {
        ComputeProfile {
            name: name.into(),
            scale_factor,
            frames_per_chunk: FRAMES_PER_CHUNK,
            reference_fps: REFERENCE_FPS,
            jitter: 0.0,
        }
    }

    pub fn ultra_high() -> Self {
        Self::new("ultra_high", 4.5)
    }

    pub fn high() -> Self {
        Self::new("high", 5.0)
    }

    pub fn medium() -> Self {
        Self::new("medium", 6.0)
    }

    pub fn low() -> Self {
        Self::new("low", 6.8)
    }

    /// The four hardware classes, fastest first.
    pub fn standard_set() -> Vec<Self> {
        vec![Self::ultra_high(), Self::high(), Self::medium(), Self::low()]
    }

    pub fn by_name(name: &str) -> Result<Self> {
        Self::standard_set()
            .into_iter()
            .find(|p| p.name == name)
            .ok_or_else(|| Error::Config(format!("unknown compute profile '{name}'")))
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.scale_factor > 0.0 && self.scale_factor.is_finite()) {
            return Err(Error::Config(format!(
                "profile '{}': scale_factor must be > 0",
                self.name
            )));
        }
        if self.frames_per_chunk < 1 {
            return Err(Error::Config(format!(
                "profile '{}': frames_per_chunk must be >= 1",
                self.name
            )));
        }
        if !(self.reference_fps > 0.0 && self.reference_fps.is_finite()) {
            return Err(Error::Config(format!(
                "profile '{}': reference_fps must be > 0",
                self.name
            )));
        }
        if !(0.0..1.0).contains(&self.jitter) {
            return Err(Error::Config(format!(
                "profile '{}': jitter must lie in [0, 1)",
                self.name
            )));
        }
        Ok(())
    }
}

/// Seconds needed to enhance one chunk on `profile` (jitter not applied).
pub fn enhancement_time(profile: &ComputeProfile) -> f64 {
    profile.scale_factor * f64::from(profile.frames_per_chunk) / profile.reference_fps
}

/// Per-chunk, per-action PSNR table for one video.
///
/// Action `a` maps to bitrate index `a / 2` and enhance flag `a % 2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MpdManifest {
    pub num_chunks: usize,
    pub chunk_duration_s: f64,
    pub ladder_mbps: Vec<f64>,
    pub psnr: Vec<Vec<f64>>,
}

impl MpdManifest {
    pub fn num_actions(&self) -> usize {
        self.ladder_mbps.len() * 2
    }

    /// PSNR of 1-based chunk `chunk` under action index `action`.
    pub fn psnr(&self, chunk: usize, action: usize) -> f64 {
        self.psnr[chunk - 1][action]
    }

    /// The full row for 1-based chunk `chunk`.
    pub fn row(&self, chunk: usize) -> &[f64] {
        &self.psnr[chunk - 1]
    }

    pub fn max_bitrate(&self) -> f64 {
        self.ladder_mbps.last().copied().unwrap_or(0.0)
    }

    /// Checks shape, ladder order, and the monotone/enhancement invariants.
    pub fn validate(&self) -> Result<()> {
        if self.num_chunks == 0 || self.psnr.len() != self.num_chunks {
            return Err(Error::Config(format!(
                "manifest declares {} chunks but has {} rows",
                self.num_chunks,
                self.psnr.len()
            )));
        }
        if self.ladder_mbps.is_empty() {
            return Err(Error::Config("manifest ladder is empty".into()));
        }
        if self.ladder_mbps.windows(2).any(|w| w[0] >= w[1])
            || self.ladder_mbps.iter().any(|r| !(*r > 0.0))
        {
            return Err(Error::Config(
                "ladder must be positive and strictly ascending".into(),
            ));
        }
        if !(self.chunk_duration_s > 0.0) {
            return Err(Error::Config("chunk duration must be > 0".into()));
        }
        let actions = self.num_actions();
        for (i, row) in self.psnr.iter().enumerate() {
            if row.len() != actions || row.iter().any(|v| !v.is_finite()) {
                return Err(Error::Config(format!("manifest row {} malformed", i + 1)));
            }
            if !row_is_consistent(row) {
                return Err(Error::Config(format!(
                    "manifest row {} violates monotonicity or enhancement gain",
                    i + 1
                )));
            }
        }
        Ok(())
    }
}

fn row_is_consistent(row: &[f64]) -> bool {
    let levels = row.len() / 2;
    (0..levels).all(|k| row[2 * k + 1] >= row[2 * k] && row[2 * k] > 0.0)
        && (1..levels).all(|k| row[2 * k] >= row[2 * (k - 1)] && row[2 * k + 1] >= row[2 * (k - 1) + 1])
}

/// Builds a manifest of `num_chunks` chunks; a pure function of its arguments.
pub fn generate_mpd(
    model: &RateQualityModel,
    num_chunks: usize,
    ladder: &[f64],
    chunk_duration_s: f64,
    seed: u64,
) -> Result<MpdManifest> {
    if ladder.is_empty() {
        return Err(Error::Config("bitrate ladder is empty".into()));
    }
    if num_chunks == 0 {
        return Err(Error::Config("a video needs at least one chunk".into()));
    }
    if ladder.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Config("bitrate ladder must be strictly ascending".into()));
    }
    model.validate()?;

    let base: Vec<f64> = ladder
        .iter()
        .map(|&r| model.base_psnr(r, 0.0))
        .collect::<Result<_>>()?;
    let gain: Vec<f64> = ladder
        .iter()
        .map(|&r| model.enhancement_gain(r))
        .collect::<Result<_>>()?;

    let plain: Vec<f64> = base.iter().zip(&gain).flat_map(|(b, g)| [*b, b + g]).collect();
    if !row_is_consistent(&plain) {
        return Err(Error::Config(format!(
            "ladder {ladder:?}: enhanced PSNR would fall as bitrate rises; reduce the enhancement gain"
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, model.noise_sigma)
        .map_err(|e| Error::Config(format!("noise distribution: {e}")))?;

    let mut psnr = Vec::with_capacity(num_chunks);
    for _ in 0..num_chunks {
        let mut row = Vec::new();
        for attempt in 0.. {
            let jitter = if model.noise_sigma > 0.0 && attempt < MAX_JITTER_REDRAWS {
                noise.sample(&mut rng)
            } else {
                0.0
            };
            row = base
                .iter()
                .zip(&gain)
                .flat_map(|(b, g)| [b + jitter, b + jitter + g])
                .collect();
            if row_is_consistent(&row) {
                break;
            }
        }
        psnr.push(row);
    }

    Ok(MpdManifest {
        num_chunks,
        chunk_duration_s,
        ladder_mbps: ladder.to_vec(),
        psnr,
    })
}
