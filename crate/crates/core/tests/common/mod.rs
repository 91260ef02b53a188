//! Helpers shared by the integration tests and the acceptance suite.
#![allow(dead_code)]

use abrsim::agent::network::{actor_objective, critic_loss, ActorBatch, Mlp};
use abrsim::quality::{generate_mpd, ComputeProfile, RateQualityModel};
use abrsim::sim::{Action, ChunkRecord, SimConfig, Simulator};
use abrsim::trace::BandwidthTrace;
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

pub const FD_STEP: f64 = 1e-5;

/// Random simulator setup: ladder, trace, profile, caps, video length.
pub fn random_instance(rng: &mut ChaCha8Rng, max_chunks: usize) -> SimConfig {
    let chunk_s = [0.5, 1.0, 2.0][rng.random_range(0..3)];
    let n = rng.random_range(1..=max_chunks);
    // Some ladders are too narrow for the calibrated gain; draw again.
    let mpd = loop {
        let levels = rng.random_range(1..=6);
        let mut ladder = Vec::with_capacity(levels);
        let mut r = rng.random_range(0.3..2.5);
        for _ in 0..levels {
            ladder.push(r);
            r += rng.random_range(0.2..1.5);
        }
        let model = RateQualityModel::calibrated(ladder[0], *ladder.last().unwrap())
            .with_noise(rng.random_range(0.0..1.5));
        if let Ok(mpd) = generate_mpd(&model, n, &ladder, chunk_s, rng.random()) {
            break mpd;
        }
    };

    let segments = rng.random_range(1..=30);
    let mut t = 0.0;
    let mut samples = Vec::with_capacity(segments);
    for _ in 0..segments {
        samples.push((t, rng.random_range(0.2..12.0)));
        t += rng.random_range(0.1..4.0);
    }
    let trace = BandwidthTrace::from_samples(&samples).unwrap();

    let mut profile = if rng.random_bool(0.5) {
        let set = ComputeProfile::standard_set();
        set[rng.random_range(0..set.len())].clone()
    } else {
        ComputeProfile::new("random", rng.random_range(0.5..10.0))
    };
    if rng.random_bool(0.3) {
        profile.jitter = rng.random_range(0.0..0.5);
    }
    SimConfig::new(mpd, trace, profile)
        .with_caps(rng.random_range(1..=6), rng.random_range(1..=6))
        .with_history(rng.random_range(1..=8), rng.random_range(1..=8))
        .with_offset(rng.random_range(0.0..30.0))
        .with_seed(rng.random())
}

pub fn random_actions(rng: &mut ChaCha8Rng, cfg: &SimConfig) -> Vec<Action> {
    (0..cfg.num_chunks())
        .map(|_| Action::from_index(rng.random_range(0..cfg.num_actions())))
        .collect()
}

/// Chunks whose interval `[start, end)` contains `t`.
fn count_open(records: &[ChunkRecord], t: f64, span: impl Fn(&ChunkRecord) -> (f64, f64)) -> usize {
    records
        .iter()
        .filter(|r| {
            let (a, b) = span(r);
            a <= t && t < b
        })
        .count()
}

/// Plays `actions` and lists every violated pipeline invariant.
pub fn check_episode(cfg: &SimConfig, actions: &[Action]) -> Vec<String> {
    let mut bad = Vec::new();
    let mut sim = Simulator::new(cfg.clone()).unwrap();
    sim.reset();
    let t_chunk = cfg.chunk_duration();
    for (k, &a) in actions.iter().enumerate() {
        let i = k + 1;
        let engine = (sim.state().buffer_d(), sim.state().buffer_p());
        let formula = sim.occupancy_by_formula(i).unwrap();
        if engine != formula {
            bad.push(format!("chunk {i}: engine occupancy {engine:?} != formula {formula:?}"));
        }
        let obs = sim.observe().unwrap();
        if obs.0[0] != engine.0 as f64 / cfg.db_cap as f64
            || obs.0[1] != engine.1 as f64 / cfg.pb_cap as f64
        {
            bad.push(format!("chunk {i}: observation buffers disagree with state"));
        }
        sim.step(a).unwrap();
    }

    let recs = sim.state().records();
    for (k, r) in recs.iter().enumerate() {
        let i = k + 1;
        if !(r.tau_d > 0.0 && r.tau_e >= 0.0) {
            bad.push(format!("chunk {i}: non-positive stage duration"));
        }
        if r.tau_r < 0.0 {
            bad.push(format!("chunk {i}: negative rebuffer {}", r.tau_r));
        }
        // Causality chain, and each start time equals its max expression.
        let mut want_d: f64 = 0.0;
        let mut want_e = r.t_d + r.tau_d;
        let mut want_p = r.t_e + r.tau_e;
        if k > 0 {
            let p = &recs[k - 1];
            want_d = p.t_d + p.tau_d;
            want_e = want_e.max(p.t_e + p.tau_e);
            want_p = want_p.max(p.t_p + t_chunk);
            if r.tau_r != r.t_p - (p.t_p + t_chunk) {
                bad.push(format!("chunk {i}: rebuffer does not match playback gap"));
            }
        } else if r.tau_r != 0.0 {
            bad.push("chunk 1: startup counted as rebuffer".into());
        }
        if i > cfg.db_cap {
            want_d = want_d.max(recs[i - cfg.db_cap - 1].t_e);
        }
        if i > cfg.pb_cap {
            want_e = want_e.max(recs[i - cfg.pb_cap - 1].t_p);
        }
        if r.t_d != want_d || r.t_e != want_e || r.t_p != want_p {
            bad.push(format!(
                "chunk {i}: timeline ({}, {}, {}) != expected ({want_d}, {want_e}, {want_p})",
                r.t_d, r.t_e, r.t_p
            ));
        }
        if r.t_d + r.tau_d > r.t_e || r.t_e + r.tau_e > r.t_p {
            bad.push(format!("chunk {i}: stage starts before its input is ready"));
        }
    }

    // Physical caps at every event instant: a chunk holds a download slot
    // from its request until enhancement starts, and a playback slot from
    // enhancement start until it plays.
    let instants: Vec<f64> = recs
        .iter()
        .flat_map(|r| [r.t_d, r.t_d + r.tau_d, r.t_e, r.t_e + r.tau_e, r.t_p])
        .collect();
    for &t in &instants {
        let d = count_open(recs, t, |r| (r.t_d, r.t_e));
        let p = count_open(recs, t, |r| (r.t_e, r.t_p));
        if d > cfg.db_cap {
            bad.push(format!("t={t}: {d} chunks hold download slots, cap {}", cfg.db_cap));
        }
        if p > cfg.pb_cap {
            bad.push(format!("t={t}: {p} chunks hold playback slots, cap {}", cfg.pb_cap));
        }
    }
    bad
}

/// Random weights everywhere, including the (normally zero) output layer.
pub fn random_mlp(sizes: &[usize], rng: &mut ChaCha8Rng) -> Mlp {
    let mut net = Mlp::new(sizes, rng);
    let normal = Normal::new(0.0, 0.4).unwrap();
    let flat: Vec<f64> = (0..net.num_params()).map(|_| normal.sample(rng)).collect();
    net.set_flat_params(&flat).unwrap();
    net
}

/// `||a - n|| / max(||a||, ||n||)`, zero when both vanish.
pub fn relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let diff: Vec<f64> = analytic.iter().zip(numeric).map(|(a, n)| a - n).collect();
    let scale = norm(analytic).max(norm(numeric));
    if scale == 0.0 {
        0.0
    } else {
        norm(&diff) / scale
    }
}

fn central_difference(net: &Mlp, f: impl Fn(&Mlp) -> f64) -> Vec<f64> {
    let base = net.flat_params();
    let mut probe = net.clone();
    (0..base.len())
        .map(|k| {
            let mut p = base.clone();
            p[k] = base[k] + FD_STEP;
            probe.set_flat_params(&p).unwrap();
            let up = f(&probe);
            p[k] = base[k] - FD_STEP;
            probe.set_flat_params(&p).unwrap();
            let down = f(&probe);
            (up - down) / (2.0 * FD_STEP)
        })
        .collect()
}

/// One gradient-check draw: random actor, critic, and batch with the given
/// shape. Returns the (actor, critic) relative errors.
pub fn gradient_check_draw(seed: u64, input: usize, hidden: usize, actions: usize) -> (f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let actor = random_mlp(&[input, hidden, actions], &mut rng);
    let critic = random_mlp(&[input, hidden, 1], &mut rng);
    let batch = rng.random_range(1..=6);
    let normal = Normal::new(0.0, 1.0).unwrap();
    let states = Array2::from_shape_simple_fn((batch, input), || normal.sample(&mut rng));

    let legal: Vec<bool> = (0..actions).map(|_| rng.random_bool(0.7)).collect();
    let mut legal = legal;
    legal[0] = true;
    let legal_idx: Vec<usize> = (0..actions).filter(|&a| legal[a]).collect();
    let taken: Vec<usize> = (0..batch)
        .map(|_| legal_idx[rng.random_range(0..legal_idx.len())])
        .collect();
    let advantages: Vec<f64> = (0..batch).map(|_| normal.sample(&mut rng)).collect();
    let targets: Vec<f64> = (0..batch).map(|_| 3.0 * normal.sample(&mut rng)).collect();
    let eta = rng.random_range(0.0..0.5);
    let mask = if rng.random_bool(0.5) { Some(legal.as_slice()) } else { None };

    let objective = |net: &Mlp| {
        actor_objective(
            net,
            &ActorBatch {
                states: states.view(),
                actions: &taken,
                advantages: &advantages,
                legal: mask,
                entropy_weight: eta,
            },
        )
    };
    let analytic_actor = objective(&actor).grad.flat_params();
    let numeric_actor = central_difference(&actor, |n| objective(n).objective);

    let analytic_critic = critic_loss(&critic, states.view(), &targets).grad.flat_params();
    let numeric_critic = central_difference(&critic, |n| critic_loss(n, states.view(), &targets).loss);

    (
        relative_error(&analytic_actor, &numeric_actor),
        relative_error(&analytic_critic, &numeric_critic),
    )
}
