//! Per-chunk reward and episode-level QoE.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sim::StepOutcome;

/// Weights on quality (per dB), bitrate variation (per Mbps), and
/// re-buffering (per second).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QoeWeights {
    pub alpha1: f64,
    pub alpha2: f64,
    pub alpha3: f64,
}

impl QoeWeights {
    pub const fn new(alpha1: f64, alpha2: f64, alpha3: f64) -> Self {
        QoeWeights {
            alpha1,
            alpha2,
            alpha3,
        }
    }

    /// The three preference triples used in the evaluation.
    pub const STANDARD: [QoeWeights; 3] = [
        QoeWeights::new(1.0, 1.0, 30.0),
        QoeWeights::new(1.0, 1.0, 60.0),
        QoeWeights::new(1.0, 1.0, 90.0),
    ];

    pub fn validate(&self) -> Result<()> {
        if [self.alpha1, self.alpha2, self.alpha3]
            .iter()
            .all(|a| *a >= 0.0 && a.is_finite())
        {
            Ok(())
        } else {
            Err(Error::Config("QoE weights must be finite and >= 0".into()))
        }
    }
}

impl Default for QoeWeights {
    fn default() -> Self {
        QoeWeights::STANDARD[0]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QoeBreakdown {
    pub avg_psnr: f64,
    pub avg_variation: f64,
    pub avg_rebuffer: f64,
    pub weighted_total: f64,
}

/// Reward for one chunk. The first chunk pays no variation penalty, so
/// summed rewards line up with the episode metric.
pub fn chunk_reward(w: &QoeWeights, out: &StepOutcome) -> f64 {
    let variation = if out.chunk_index <= 1 {
        0.0
    } else {
        (out.bitrate - out.prev_bitrate).abs()
    };
    w.alpha1 * out.psnr - w.alpha2 * variation - w.alpha3 * out.rebuffer
}

/// Averages quality, variation, and stalls over a finished episode.
pub fn episode_qoe(w: &QoeWeights, log: &[StepOutcome]) -> Result<QoeBreakdown> {
    if log.is_empty() {
        return Err(Error::Domain("cannot score an empty episode".into()));
    }
    let n = log.len() as f64;
    let avg_psnr = log.iter().map(|o| o.psnr).sum::<f64>() / n;
    let avg_rebuffer = log.iter().map(|o| o.rebuffer).sum::<f64>() / n;
    let avg_variation = if log.len() == 1 {
        0.0
    } else {
        log.windows(2)
            .map(|w| (w[1].bitrate - w[0].bitrate).abs())
            .sum::<f64>()
            / (n - 1.0)
    };
    Ok(QoeBreakdown {
        avg_psnr,
        avg_variation,
        avg_rebuffer,
        weighted_total: w.alpha1 * avg_psnr - w.alpha2 * avg_variation - w.alpha3 * avg_rebuffer,
    })
}
