//! JSON checkpoints: architecture, legal actions, and flat row-major weights.

use std::path::Path;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use super::network::{ActorCritic, Architecture, Dense, Mlp};
use crate::error::{Error, Result};

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerFile {
    pub rows: usize,
    pub cols: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format_version: u32,
    pub architecture: Architecture,
    pub legal_actions: Vec<usize>,
    /// Hash of the config that produced the weights.
    #[serde(default)]
    pub config_hash: String,
    pub actor: Vec<LayerFile>,
    pub critic: Vec<LayerFile>,
}

fn layers_out(mlp: &Mlp) -> Vec<LayerFile> {
    mlp.layers
        .iter()
        .map(|l| LayerFile {
            rows: l.weight.nrows(),
            cols: l.weight.ncols(),
            weights: l.weight.iter().copied().collect(),
            bias: l.bias.to_vec(),
        })
        .collect()
}

fn layers_in(files: &[LayerFile]) -> Result<Mlp> {
    let layers = files
        .iter()
        .map(|f| {
            if f.bias.len() != f.rows {
                return Err(Error::Dimension {
                    expected: f.rows,
                    got: f.bias.len(),
                });
            }
            let weight = Array2::from_shape_vec((f.rows, f.cols), f.weights.clone()).map_err(|_| {
                Error::Dimension {
                    expected: f.rows * f.cols,
                    got: f.weights.len(),
                }
            })?;
            Ok(Dense {
                weight,
                bias: Array1::from(f.bias.clone()),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Mlp { layers })
}

impl Checkpoint {
    pub fn from_params(params: &ActorCritic, legal_actions: &[usize], config_hash: &str) -> Self {
        Checkpoint {
            format_version: CHECKPOINT_VERSION,
            architecture: params.arch.clone(),
            legal_actions: legal_actions.to_vec(),
            config_hash: config_hash.to_string(),
            actor: layers_out(&params.actor),
            critic: layers_out(&params.critic),
        }
    }

    pub fn params(&self) -> Result<ActorCritic> {
        if self.format_version != CHECKPOINT_VERSION {
            return Err(Error::Config(format!(
                "unsupported checkpoint version {}",
                self.format_version
            )));
        }
        let params = ActorCritic {
            arch: self.architecture.clone(),
            actor: layers_in(&self.actor)?,
            critic: layers_in(&self.critic)?,
        };
        if params.actor.input_dim() != self.architecture.input_dim
            || params.actor.output_dim() != self.architecture.num_actions
            || params.critic.output_dim() != 1
        {
            return Err(Error::Config("checkpoint layers disagree with architecture".into()));
        }
        Ok(params)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}
