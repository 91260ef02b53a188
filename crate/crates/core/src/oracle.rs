//! Offline-optimal action sequence by exhaustive enumeration.
//!
//! Every sequence is simulated from a fresh state; nothing is shared
//! between sequences, so the result does not depend on any incremental
//! shortcut inside the simulator.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qoe::{episode_qoe, QoeWeights};
use crate::sim::{Action, PipelineState, SimConfig};

pub const DEFAULT_BUDGET: u128 = 1_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleResult {
    pub best_qoe: f64,
    pub actions: Vec<Action>,
    pub sequences_evaluated: u64,
}

/// QoE of playing `actions` from the start of the episode.
pub fn score_sequence(config: &SimConfig, weights: &QoeWeights, actions: &[Action]) -> Result<f64> {
    let mut state = PipelineState::new(config);
    let log = actions
        .iter()
        .map(|&a| state.step(config, a))
        .collect::<Result<Vec<_>>>()?;
    Ok(episode_qoe(weights, &log)?.weighted_total)
}

fn decode(mut code: u64, base: u64, len: usize) -> Vec<Action> {
    let mut out = vec![Action::from_index(0); len];
    for slot in out.iter_mut().rev() {
        *slot = Action::from_index((code % base) as usize);
        code /= base;
    }
    out
}

/// Best episode QoE over all action sequences for the whole video; ties go
/// to the lexicographically smallest sequence of action indices.
pub fn exhaustive_best(config: &SimConfig, weights: &QoeWeights, budget: u128) -> Result<OracleResult> {
    config.validate()?;
    let base = config.num_actions() as u128;
    let horizon = config.num_chunks();
    let needed = (0..horizon).try_fold(1u128, |acc, _| acc.checked_mul(base));
    let total = match needed {
        Some(n) if n <= budget => n,
        Some(n) => return Err(Error::BudgetExceeded { needed: n, budget }),
        None => {
            return Err(Error::BudgetExceeded {
                needed: u128::MAX,
                budget,
            })
        }
    };
    let total = u64::try_from(total).map_err(|_| Error::BudgetExceeded {
        needed: total,
        budget,
    })?;

    let (code, best_qoe) = (0..total)
        .into_par_iter()
        .map(|code| {
            let seq = decode(code, base as u64, horizon);
            score_sequence(config, weights, &seq).map(|q| (code, q))
        })
        .try_reduce_with(|a, b| {
            Ok(if b.1 > a.1 || (b.1 == a.1 && b.0 < a.0) {
                b
            } else {
                a
            })
        })
        .expect("at least one sequence")?;

    Ok(OracleResult {
        best_qoe,
        actions: decode(code, base as u64, horizon),
        sequences_evaluated: total,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quality::{generate_mpd, ComputeProfile, RateQualityModel};
    use crate::trace::BandwidthTrace;

    fn config(n: usize, ladder: &[f64], mbps: f64) -> SimConfig {
        let m = RateQualityModel::calibrated(ladder[0], *ladder.last().unwrap()).with_noise(0.0);
        SimConfig::new(
            generate_mpd(&m, n, ladder, 1.0, 0).unwrap(),
            BandwidthTrace::constant(mbps).unwrap(),
            ComputeProfile::high(),
        )
    }

    #[test]
    fn single_chunk_fast_network_picks_top_psnr() {
        let cfg = config(1, &[2.0, 2.5, 3.0, 3.5, 4.0], 100.0);
        let res = exhaustive_best(&cfg, &QoeWeights::default(), DEFAULT_BUDGET).unwrap();
        // (4, 0) and (4, 1) tie at the top; the smaller index wins.
        assert_eq!(res.actions, vec![Action::new(4, false)]);
        let row = cfg.mpd.row(1);
        let top = row.iter().copied().fold(f64::MIN, f64::max);
        assert_eq!(res.best_qoe, top);
    }

    #[test]
    fn budget_is_enforced() {
        let cfg = config(7, &[2.0, 2.5, 3.0, 3.5, 4.0], 3.0);
        assert!(matches!(
            exhaustive_best(&cfg, &QoeWeights::default(), DEFAULT_BUDGET),
            Err(Error::BudgetExceeded { .. })
        ));
    }

    #[test]
    fn optimum_dominates_every_sequence() {
        let cfg = config(3, &[2.0, 3.0, 4.0], 2.5);
        let w = QoeWeights::default();
        let res = exhaustive_best(&cfg, &w, DEFAULT_BUDGET).unwrap();
        assert_eq!(res.sequences_evaluated, 216);
        for code in 0..216 {
            let q = score_sequence(&cfg, &w, &decode(code, 6, 3)).unwrap();
            assert!(q <= res.best_qoe);
        }
        assert_eq!(score_sequence(&cfg, &w, &res.actions).unwrap(), res.best_qoe);
    }

    #[test]
    fn decode_is_lexicographic() {
        assert_eq!(
            decode(7, 10, 2),
            vec![Action::from_index(0), Action::from_index(7)]
        );
        assert_eq!(
            decode(31, 10, 2),
            vec![Action::from_index(3), Action::from_index(1)]
        );
    }
}
