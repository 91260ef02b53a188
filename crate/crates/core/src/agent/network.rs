//! Dense tanh networks with hand-written backpropagation.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    /// `out x in`, row-major.
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

impl Dense {
    pub fn zeros(input: usize, output: usize) -> Self {
        Dense {
            weight: Array2::zeros((output, input)),
            bias: Array1::zeros(output),
        }
    }

    /// Weights uniform in `±1/sqrt(fan_in)`, zero bias.
    pub fn fan_in_uniform<R: Rng + ?Sized>(input: usize, output: usize, rng: &mut R) -> Self {
        let bound = 1.0 / (input as f64).sqrt();
        Dense {
            weight: Array2::from_shape_simple_fn((output, input), || {
                rng.random_range(-bound..bound)
            }),
            bias: Array1::zeros(output),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.weight.ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.weight.nrows()
    }
}

/// Tanh on every hidden layer, identity on the output layer.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub layers: Vec<Dense>,
}

/// Activations kept from a batched forward pass.
pub struct ForwardCache {
    /// `acts[0]` is the input, `acts[k]` the output of layer `k - 1`.
    acts: Vec<Array2<f64>>,
}

impl ForwardCache {
    pub fn output(&self) -> &Array2<f64> {
        self.acts.last().expect("cache holds at least the input")
    }
}

impl Mlp {
    /// Hidden layers fan-in uniform, output layer zero.
    pub fn new<R: Rng + ?Sized>(sizes: &[usize], rng: &mut R) -> Self {
        assert!(sizes.len() >= 2, "an MLP needs input and output sizes");
        let last = sizes.len() - 2;
        let layers = sizes
            .windows(2)
            .enumerate()
            .map(|(k, w)| {
                if k == last {
                    Dense::zeros(w[0], w[1])
                } else {
                    Dense::fan_in_uniform(w[0], w[1], rng)
                }
            })
            .collect();
        Mlp { layers }
    }

    /// Same shapes, all zeros; used to accumulate gradients.
    pub fn zeros_like(&self) -> Self {
        Mlp {
            layers: self
                .layers
                .iter()
                .map(|l| Dense::zeros(l.input_dim(), l.output_dim()))
                .collect(),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].input_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].output_dim()
    }

    pub fn forward_one(&self, x: ArrayView1<'_, f64>) -> Array1<f64> {
        let last = self.layers.len() - 1;
        let mut h = x.to_owned();
        for (k, layer) in self.layers.iter().enumerate() {
            h = layer.weight.dot(&h) + &layer.bias;
            if k != last {
                h.mapv_inplace(f64::tanh);
            }
        }
        h
    }

    /// Forward pass over a batch (`rows = samples`).
    pub fn forward_batch(&self, x: ArrayView2<'_, f64>) -> ForwardCache {
        let last = self.layers.len() - 1;
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        acts.push(x.to_owned());
        for (k, layer) in self.layers.iter().enumerate() {
            let mut z = acts[k].dot(&layer.weight.t()) + &layer.bias;
            if k != last {
                z.mapv_inplace(f64::tanh);
            }
            acts.push(z);
        }
        ForwardCache { acts }
    }

    /// Gradient of a scalar objective given its gradient w.r.t. the outputs.
    pub fn backward(&self, cache: &ForwardCache, d_out: Array2<f64>) -> Mlp {
        let mut grads = Vec::with_capacity(self.layers.len());
        let mut delta = d_out;
        for k in (0..self.layers.len()).rev() {
            let input = &cache.acts[k];
            grads.push(Dense {
                weight: delta.t().dot(input),
                bias: delta.sum_axis(Axis(0)),
            });
            if k > 0 {
                let mut back = delta.dot(&self.layers[k].weight);
                back.zip_mut_with(input, |d, h| *d *= 1.0 - h * h);
                delta = back;
            }
        }
        grads.reverse();
        Mlp { layers: grads }
    }

    /// `self += alpha * other`.
    pub fn add_scaled(&mut self, alpha: f64, other: &Mlp) {
        for (l, g) in self.layers.iter_mut().zip(&other.layers) {
            l.weight.scaled_add(alpha, &g.weight);
            l.bias.scaled_add(alpha, &g.bias);
        }
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weight.iter().chain(l.bias.iter()).all(|v| v.is_finite()))
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(|l| l.weight.len() + l.bias.len()).sum()
    }

    /// Weights then bias per layer, row-major.
    pub fn flat_params(&self) -> Vec<f64> {
        self.layers
            .iter()
            .flat_map(|l| l.weight.iter().chain(l.bias.iter()).copied())
            .collect()
    }

    pub fn set_flat_params(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.num_params() {
            return Err(Error::Dimension {
                expected: self.num_params(),
                got: flat.len(),
            });
        }
        let mut it = flat.iter().copied();
        for l in &mut self.layers {
            l.weight.iter_mut().chain(l.bias.iter_mut()).for_each(|v| {
                *v = it.next().expect("length checked above");
            });
        }
        Ok(())
    }
}

/// Shape of the two networks.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Architecture {
    pub input_dim: usize,
    pub hidden: Vec<usize>,
    pub num_actions: usize,
}

impl Architecture {
    pub fn new(input_dim: usize, hidden: Vec<usize>, num_actions: usize) -> Self {
        Architecture {
            input_dim,
            hidden,
            num_actions,
        }
    }

    fn sizes(&self, output: usize) -> Vec<usize> {
        std::iter::once(self.input_dim)
            .chain(self.hidden.iter().copied())
            .chain(std::iter::once(output))
            .collect()
    }
}

/// Actor (policy logits) and critic (state value) sharing one input.
#[derive(Debug, Clone, PartialEq)]
pub struct ActorCritic {
    pub arch: Architecture,
    pub actor: Mlp,
    pub critic: Mlp,
}

impl ActorCritic {
    pub fn new<R: Rng + ?Sized>(arch: Architecture, rng: &mut R) -> Self {
        let actor = Mlp::new(&arch.sizes(arch.num_actions), rng);
        let critic = Mlp::new(&arch.sizes(1), rng);
        ActorCritic {
            arch,
            actor,
            critic,
        }
    }

    fn check_dim(&self, got: usize) -> Result<()> {
        if got != self.arch.input_dim {
            return Err(Error::Dimension {
                expected: self.arch.input_dim,
                got,
            });
        }
        Ok(())
    }

    /// Action probabilities (zero on masked actions) and state value.
    pub fn forward(&self, obs: &[f64], legal: Option<&[bool]>) -> Result<(Vec<f64>, f64)> {
        Ok((self.policy(obs, legal)?, self.value(obs)?))
    }

    pub fn policy(&self, obs: &[f64], legal: Option<&[bool]>) -> Result<Vec<f64>> {
        self.check_dim(obs.len())?;
        let logits = self.actor.forward_one(ArrayView1::from(obs));
        Ok(masked_softmax(logits.as_slice().expect("contiguous"), legal))
    }

    pub fn value(&self, obs: &[f64]) -> Result<f64> {
        self.check_dim(obs.len())?;
        Ok(self.critic.forward_one(ArrayView1::from(obs))[0])
    }

    pub fn is_finite(&self) -> bool {
        self.actor.is_finite() && self.critic.is_finite()
    }
}

/// Softmax restricted to `legal` actions; illegal entries get probability 0.
pub fn masked_softmax(logits: &[f64], legal: Option<&[bool]>) -> Vec<f64> {
    let allowed = |k: usize| legal.is_none_or(|m| m[k]);
    let max = logits
        .iter()
        .enumerate()
        .filter(|(k, _)| allowed(*k))
        .map(|(_, z)| *z)
        .fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = logits
        .iter()
        .enumerate()
        .map(|(k, z)| if allowed(k) { (z - max).exp() } else { 0.0 })
        .collect();
    let sum: f64 = out.iter().sum();
    out.iter_mut().for_each(|p| *p /= sum);
    out
}

/// Shannon entropy in nats, with `0 ln 0 = 0`.
pub fn policy_entropy(probs: &[f64]) -> f64 {
    -probs
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|p| p * p.ln())
        .sum::<f64>()
}

/// One-step advantage `r + gamma * V(s') - V(s)`; no bootstrap past a terminal.
pub fn advantage(reward: f64, v_next: f64, v_cur: f64, gamma: f64, terminal: bool) -> f64 {
    let bootstrap = if terminal { 0.0 } else { gamma * v_next };
    reward + bootstrap - v_cur
}

/// Inputs for the actor objective: `sum A_i ln pi(a_i|s_i) + eta * H(pi(s_i))`.
pub struct ActorBatch<'a> {
    pub states: ArrayView2<'a, f64>,
    pub actions: &'a [usize],
    pub advantages: &'a [f64],
    pub legal: Option<&'a [bool]>,
    pub entropy_weight: f64,
}

pub struct ActorEval {
    pub objective: f64,
    pub mean_entropy: f64,
    pub grad: Mlp,
}

/// Objective value and its gradient (for ascent) w.r.t. the actor weights.
pub fn actor_objective(actor: &Mlp, batch: &ActorBatch<'_>) -> ActorEval {
    let cache = actor.forward_batch(batch.states);
    let logits = cache.output();
    let n = logits.nrows();
    let mut d_logits = Array2::zeros(logits.raw_dim());
    let mut objective = 0.0;
    let mut entropy_sum = 0.0;
    for i in 0..n {
        let row = logits.row(i);
        let probs = masked_softmax(row.as_slice().expect("contiguous"), batch.legal);
        let h = policy_entropy(&probs);
        let a = batch.actions[i];
        let adv = batch.advantages[i];
        objective += adv * probs[a].ln() + batch.entropy_weight * h;
        entropy_sum += h;
        let mut d = d_logits.row_mut(i);
        for (k, &p) in probs.iter().enumerate() {
            let onehot = if k == a { 1.0 } else { 0.0 };
            let d_entropy = if p > 0.0 { -p * (p.ln() + h) } else { 0.0 };
            d[k] = adv * (onehot - p) + batch.entropy_weight * d_entropy;
        }
    }
    ActorEval {
        objective,
        mean_entropy: if n > 0 { entropy_sum / n as f64 } else { 0.0 },
        grad: actor.backward(&cache, d_logits),
    }
}

pub struct CriticEval {
    pub loss: f64,
    pub grad: Mlp,
}

/// `L = 1/2 sum (target_i - V(s_i))^2` with targets held fixed.
pub fn critic_loss(critic: &Mlp, states: ArrayView2<'_, f64>, targets: &[f64]) -> CriticEval {
    let cache = critic.forward_batch(states);
    let values = cache.output();
    let mut d_values = Array2::zeros(values.raw_dim());
    let mut loss = 0.0;
    for (i, &y) in targets.iter().enumerate() {
        let err = values[[i, 0]] - y;
        loss += 0.5 * err * err;
        d_values[[i, 0]] = err;
    }
    CriticEval {
        loss,
        grad: critic.backward(&cache, d_values),
    }
}
