//! Two-buffer client pipeline: download buffer -> enhancer -> playback buffer -> player.
//!
//! Every chunk `i` gets a request time `t_d`, download time `tau_d`, enhance
//! start `t_e`, enhance time `tau_e`, playback start `t_p`, and stall
//! `tau_r`. Request and enhance starts are held back while the downstream
//! buffer is full. The next chunk's request time is known as soon as the
//! previous step finishes, so the observation for chunk `i` is taken at
//! `t_d[i]`.

use std::io::Write;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quality::{enhancement_time, ComputeProfile, MpdManifest};
use crate::trace::BandwidthTrace;

/// Joint decision for one chunk: ladder index and enhance flag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Action {
    pub bitrate_index: usize,
    pub enhance: bool,
}

impl Action {
    pub fn new(bitrate_index: usize, enhance: bool) -> Self {
        Action {
            bitrate_index,
            enhance,
        }
    }

    /// Flat index: ladder order, enhance flag 0 before 1.
    pub fn index(self) -> usize {
        self.bitrate_index * 2 + usize::from(self.enhance)
    }

    pub fn from_index(index: usize) -> Self {
        Action {
            bitrate_index: index / 2,
            enhance: index % 2 == 1,
        }
    }
}

/// Divisors that bring observation features to roughly `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub throughput_mbps: f64,
    pub time_s: f64,
    pub psnr_db: f64,
}

impl Default for Normalization {
    fn default() -> Self {
        Normalization {
            throughput_mbps: 10.0,
            time_s: 10.0,
            psnr_db: 50.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub mpd: Arc<MpdManifest>,
    pub trace: Arc<BandwidthTrace>,
    pub profile: ComputeProfile,
    pub db_cap: usize,
    pub pb_cap: usize,
    pub k1: usize,
    pub k2: usize,
    /// Episode time 0 maps to this point of the trace.
    pub trace_offset_s: f64,
    /// Seeds the enhancement-time jitter (unused when the profile has none).
    pub seed: u64,
    pub norm: Normalization,
}

impl SimConfig {
    pub fn new(
        mpd: impl Into<Arc<MpdManifest>>,
        trace: impl Into<Arc<BandwidthTrace>>,
        profile: ComputeProfile,
    ) -> Self {
        SimConfig {
            mpd: mpd.into(),
            trace: trace.into(),
            profile,
            db_cap: 5,
            pb_cap: 5,
            k1: 8,
            k2: 8,
            trace_offset_s: 0.0,
            seed: 0,
            norm: Normalization::default(),
        }
    }

    pub fn with_caps(mut self, db_cap: usize, pb_cap: usize) -> Self {
        self.db_cap = db_cap;
        self.pb_cap = pb_cap;
        self
    }

    pub fn with_history(mut self, k1: usize, k2: usize) -> Self {
        self.k1 = k1;
        self.k2 = k2;
        self
    }

    pub fn with_offset(mut self, offset_s: f64) -> Self {
        self.trace_offset_s = offset_s;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn num_actions(&self) -> usize {
        self.mpd.num_actions()
    }

    pub fn num_chunks(&self) -> usize {
        self.mpd.num_chunks
    }

    pub fn chunk_duration(&self) -> f64 {
        self.mpd.chunk_duration_s
    }

    /// Length of the observation vector.
    pub fn observation_dim(&self) -> usize {
        5 + self.k1 + self.k2 + 1 + self.num_actions()
    }

    pub fn validate(&self) -> Result<()> {
        if self.db_cap < 1 || self.pb_cap < 1 {
            return Err(Error::Config("buffer capacities must be >= 1".into()));
        }
        if self.k1 < 1 || self.k2 < 1 {
            return Err(Error::Config("history lengths must be >= 1".into()));
        }
        if !(self.trace_offset_s >= 0.0 && self.trace_offset_s.is_finite()) {
            return Err(Error::Config("trace offset must be >= 0".into()));
        }
        self.profile.validate()?;
        self.mpd.validate()
    }
}

/// Timeline and outcome of one decided chunk.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChunkRecord {
    pub index: usize,
    pub bitrate_index: usize,
    pub enhance: bool,
    pub bitrate_mbps: f64,
    pub t_d: f64,
    pub tau_d: f64,
    pub t_e: f64,
    pub tau_e: f64,
    pub t_p: f64,
    pub tau_r: f64,
    pub psnr: f64,
    /// Realized average throughput over the download.
    pub throughput_mbps: f64,
    /// Download-buffer occupancy at the request instant.
    pub buffer_d: usize,
    /// Playback-buffer occupancy at the request instant.
    pub buffer_p: usize,
}

/// What the environment reports after deciding one chunk.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepOutcome {
    pub chunk_index: usize,
    pub action: Action,
    pub psnr: f64,
    pub rebuffer: f64,
    pub bitrate: f64,
    pub prev_bitrate: f64,
    pub done: bool,
    pub t_d: f64,
    pub tau_d: f64,
    pub t_e: f64,
    pub tau_e: f64,
    pub t_p: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Observation(pub Vec<f64>);

impl Observation {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Full event timeline of one episode plus the counters the observation
/// needs. Mutated only through [`PipelineState::step`].
#[derive(Debug, Clone)]
pub struct PipelineState {
    records: Vec<ChunkRecord>,
    /// Request time of the next (undecided) chunk.
    next_request: f64,
    /// Chunks whose enhance stage started strictly before `next_request`.
    entered: usize,
    /// Chunks whose enhance stage finished by `next_request`.
    processed: usize,
    /// Chunks whose playback started strictly before `next_request`.
    started: usize,
    /// Number of chunks decided with the enhance flag set.
    enhanced: usize,
    enhance_times: Vec<f64>,
    done: bool,
    rng: ChaCha8Rng,
}

impl PipelineState {
    pub fn new(config: &SimConfig) -> Self {
        PipelineState {
            records: Vec::with_capacity(config.num_chunks()),
            next_request: 0.0,
            entered: 0,
            processed: 0,
            started: 0,
            enhanced: 0,
            enhance_times: Vec::new(),
            done: false,
            rng: ChaCha8Rng::seed_from_u64(config.seed),
        }
    }

    pub fn records(&self) -> &[ChunkRecord] {
        &self.records
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    /// 1-based index of the next chunk to decide.
    pub fn next_chunk(&self) -> usize {
        self.records.len() + 1
    }

    /// Request time of the next chunk (the current decision instant).
    pub fn decision_time(&self) -> f64 {
        self.next_request
    }

    pub fn enhanced_count(&self) -> usize {
        self.enhanced
    }

    pub fn buffer_d(&self) -> usize {
        self.records.len() - self.entered
    }

    pub fn buffer_p(&self) -> usize {
        self.entered.saturating_sub(self.started + 1)
    }

    /// Fraction of the video already requested.
    pub fn download_percent(&self, config: &SimConfig) -> f64 {
        self.records.len() as f64 / config.num_chunks() as f64
    }

    /// Time the chunk currently in the enhancer has spent there (0 if idle).
    pub fn enhance_elapsed(&self) -> f64 {
        let i = self.next_chunk();
        if i - self.buffer_d() == self.processed + 1 {
            0.0
        } else {
            self.next_request - self.records[self.processed].t_e
        }
    }

    /// Playback time left on the chunk currently playing (0 if none).
    pub fn playback_remaining(&self, config: &SimConfig) -> f64 {
        match self.started {
            0 => 0.0,
            n => {
                let t_p = self.records[n - 1].t_p;
                (config.chunk_duration() - (self.next_request - t_p)).max(0.0)
            }
        }
    }

    /// Realized throughputs, most recent first.
    pub fn throughput_history(&self) -> impl Iterator<Item = f64> + '_ {
        self.records.iter().rev().map(|r| r.throughput_mbps)
    }

    /// Enhancement times of enhanced chunks, most recent first.
    pub fn enhance_history(&self) -> impl Iterator<Item = f64> + '_ {
        self.enhance_times.iter().rev().copied()
    }

    pub fn prev_bitrate(&self) -> f64 {
        self.records.last().map_or(0.0, |r| r.bitrate_mbps)
    }

    /// Observation at the current decision instant.
    pub fn observe(&self, config: &SimConfig) -> Result<Observation> {
        if self.done {
            return Err(Error::EpisodeDone);
        }
        let norm = &config.norm;
        let mut v = Vec::with_capacity(config.observation_dim());
        v.push(self.buffer_d() as f64 / config.db_cap as f64);
        v.push(self.buffer_p() as f64 / config.pb_cap as f64);
        v.push(self.download_percent(config));
        v.push(self.enhance_elapsed() / norm.time_s);
        v.push(self.playback_remaining(config) / norm.time_s);
        push_padded(&mut v, self.throughput_history(), config.k1, norm.throughput_mbps);
        push_padded(&mut v, self.enhance_history(), config.k2, norm.time_s);
        v.push(self.prev_bitrate() / config.mpd.max_bitrate());
        v.extend(
            config
                .mpd
                .row(self.next_chunk())
                .iter()
                .map(|p| p / norm.psnr_db),
        );
        Ok(Observation(v))
    }

    /// Decides the next chunk and advances the timeline.
    pub fn step(&mut self, config: &SimConfig, action: Action) -> Result<StepOutcome> {
        if self.done {
            return Err(Error::EpisodeDone);
        }
        let ladder = &config.mpd.ladder_mbps;
        let Some(&bitrate) = ladder.get(action.bitrate_index) else {
            return Err(Error::InvalidAction(format!(
                "bitrate index {} out of range for ladder of {}",
                action.bitrate_index,
                ladder.len()
            )));
        };
        let i = self.next_chunk();
        let chunk_s = config.chunk_duration();

        let t_d = self.next_request;
        let tau_d = config
            .trace
            .download_time(config.trace_offset_s + t_d, bitrate * chunk_s);
        let downloaded = t_d + tau_d;

        let t_e = match self.records.last() {
            None => downloaded,
            Some(prev) => {
                let mut t = (prev.t_e + prev.tau_e).max(downloaded);
                if i > config.pb_cap {
                    t = t.max(self.records[i - config.pb_cap - 1].t_p);
                }
                t
            }
        };
        let tau_e = if action.enhance {
            self.draw_enhance_time(&config.profile)
        } else {
            0.0
        };
        let ready = t_e + tau_e;

        let (t_p, tau_r) = match self.records.last() {
            None => (ready, 0.0),
            Some(prev) => {
                let due = prev.t_p + chunk_s;
                let t_p = due.max(ready);
                (t_p, t_p - due)
            }
        };

        let prev_bitrate = self.prev_bitrate();
        let psnr = config.mpd.psnr(i, action.index());
        self.records.push(ChunkRecord {
            index: i,
            bitrate_index: action.bitrate_index,
            enhance: action.enhance,
            bitrate_mbps: bitrate,
            t_d,
            tau_d,
            t_e,
            tau_e,
            t_p,
            tau_r,
            psnr,
            throughput_mbps: bitrate * chunk_s / tau_d,
            buffer_d: self.buffer_d(),
            buffer_p: self.buffer_p(),
        });
        if action.enhance {
            self.enhanced += 1;
            self.enhance_times.push(tau_e);
        }

        let done = i == config.num_chunks();
        self.done = done;
        if !done {
            let next = i + 1;
            let mut t = downloaded;
            if next > config.db_cap {
                t = t.max(self.records[next - config.db_cap - 1].t_e);
            }
            self.next_request = t;
            self.advance_counters();
        }

        Ok(StepOutcome {
            chunk_index: i,
            action,
            psnr,
            rebuffer: tau_r,
            bitrate,
            prev_bitrate,
            done,
            t_d,
            tau_d,
            t_e,
            tau_e,
            t_p,
        })
    }

    fn draw_enhance_time(&mut self, profile: &ComputeProfile) -> f64 {
        let base = enhancement_time(profile);
        if profile.jitter > 0.0 {
            base * self.rng.random_range(1.0 - profile.jitter..=1.0 + profile.jitter)
        } else {
            base
        }
    }

    // Event times are nondecreasing in chunk index, so each counter is a
    // cursor that only moves forward as the decision instant advances.
    fn advance_counters(&mut self) {
        let t = self.next_request;
        let decided = self.records.len();
        while self.entered < decided && self.records[self.entered].t_e < t {
            self.entered += 1;
        }
        while self.processed < self.entered && {
            let r = &self.records[self.processed];
            r.t_e + r.tau_e <= t
        } {
            self.processed += 1;
        }
        while self.started < decided && self.records[self.started].t_p < t {
            self.started += 1;
        }
    }

    /// Buffer occupancies at the request instant of chunk `i`, evaluated
    /// directly from the argmax expressions over the recorded timeline
    /// (max over an empty set is 0; playback occupancy floors at 0).
    ///
    /// `i` may be any decided chunk or the pending one.
    pub fn occupancy_by_formula(&self, i: usize) -> Result<(usize, usize)> {
        let t_d = match i {
            i if i >= 1 && i <= self.records.len() => self.records[i - 1].t_d,
            i if i == self.next_chunk() && !self.done => self.next_request,
            _ => {
                return Err(Error::Domain(format!("chunk {i} has no request time yet")));
            }
        };
        let last_index = |pred: &dyn Fn(&ChunkRecord) -> bool| {
            self.records
                .iter()
                .filter(|r| pred(r))
                .map(|r| r.index)
                .max()
                .unwrap_or(0)
        };
        let entered = last_index(&|r| r.t_e < t_d);
        let playing = last_index(&|r| r.t_p < t_d);
        let b_d = (i - 1).saturating_sub(entered);
        let b_p = entered.saturating_sub(1 + playing);
        Ok((b_d, b_p))
    }

    /// Delay before the first chunk starts playing.
    pub fn startup_delay(&self) -> Option<f64> {
        self.records.first().map(|r| r.t_p)
    }
}

fn push_padded(out: &mut Vec<f64>, values: impl Iterator<Item = f64>, k: usize, scale: f64) {
    let before = out.len();
    out.extend(values.take(k).map(|x| x / scale));
    out.resize(before + k, 0.0);
}

/// Owns a configuration and the running state of one episode.
#[derive(Debug, Clone)]
pub struct Simulator {
    config: Arc<SimConfig>,
    state: PipelineState,
}

impl Simulator {
    pub fn new(config: impl Into<Arc<SimConfig>>) -> Result<Self> {
        let config = config.into();
        config.validate()?;
        let state = PipelineState::new(&config);
        Ok(Simulator { config, state })
    }

    /// Restarts the episode and returns the first observation.
    pub fn reset(&mut self) -> Observation {
        self.state = PipelineState::new(&self.config);
        self.state
            .observe(&self.config)
            .expect("fresh episode is never done")
    }

    /// Applies `action`; the returned observation is all zeros once done.
    pub fn step(&mut self, action: Action) -> Result<(StepOutcome, Observation)> {
        let outcome = self.state.step(&self.config, action)?;
        let obs = if outcome.done {
            Observation(vec![0.0; self.config.observation_dim()])
        } else {
            self.state.observe(&self.config)?
        };
        Ok((outcome, obs))
    }

    pub fn observe(&self) -> Result<Observation> {
        self.state.observe(&self.config)
    }

    pub fn state(&self) -> &PipelineState {
        &self.state
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    pub fn shared_config(&self) -> Arc<SimConfig> {
        Arc::clone(&self.config)
    }

    pub fn is_done(&self) -> bool {
        self.state.is_done()
    }

    pub fn occupancy_by_formula(&self, i: usize) -> Result<(usize, usize)> {
        self.state.occupancy_by_formula(i)
    }

    /// Runs `actions` from a fresh episode and returns every outcome.
    pub fn run(&mut self, actions: &[Action]) -> Result<Vec<StepOutcome>> {
        self.reset();
        actions.iter().map(|&a| self.step(a).map(|(o, _)| o)).collect()
    }
}

/// Writes one CSV row per decided chunk.
pub fn write_episode_log<W: Write>(records: &[ChunkRecord], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for r in records {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io("episode log", e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quality::{generate_mpd, RateQualityModel};
    use approx::assert_abs_diff_eq;

    fn flat_mpd(n: usize, ladder: &[f64]) -> MpdManifest {
        let model = RateQualityModel::calibrated(ladder[0], *ladder.last().unwrap()).with_noise(0.0);
        generate_mpd(&model, n, ladder, 1.0, 0).unwrap()
    }

    fn config(n: usize, ladder: &[f64], mbps: f64, profile: ComputeProfile) -> SimConfig {
        SimConfig::new(
            flat_mpd(n, ladder),
            BandwidthTrace::constant(mbps).unwrap(),
            profile,
        )
    }

    #[test]
    fn reset_starts_empty() {
        let cfg = config(10, &[2.0, 2.5, 3.0, 3.5, 4.0], 3.0, ComputeProfile::high());
        let mut sim = Simulator::new(cfg).unwrap();
        let obs = sim.reset();
        assert_eq!(obs.len(), 32);
        assert_eq!(&obs.0[..5], &[0.0; 5]);
        assert!(obs.0[5..22].iter().all(|&x| x == 0.0));
        assert_eq!(obs, sim.reset());
        assert_eq!(sim.state().buffer_d(), 0);
        assert_eq!(sim.state().buffer_p(), 0);
        assert_eq!(sim.occupancy_by_formula(1).unwrap(), (0, 0));
    }

    #[test]
    fn first_chunk_base_case() {
        let cfg = config(1, &[2.0, 4.0], 2.0, ComputeProfile::high());
        let mut sim = Simulator::new(cfg).unwrap();
        sim.reset();
        let (o, _) = sim.step(Action::new(0, false)).unwrap();
        assert_eq!(o.t_d, 0.0);
        assert_abs_diff_eq!(o.tau_d, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(o.t_e, 1.0, epsilon = 1e-12);
        assert_eq!(o.tau_e, 0.0);
        assert_abs_diff_eq!(o.t_p, 1.0, epsilon = 1e-12);
        assert_eq!(o.rebuffer, 0.0);
        assert!(o.done);
        assert!(matches!(sim.step(Action::new(0, false)), Err(Error::EpisodeDone)));
    }

    #[test]
    fn two_enhanced_chunks_stall() {
        let cfg = config(2, &[2.0, 4.0], 4.0, ComputeProfile::ultra_high());
        let tau_e = 4.5 * 25.0 / 98.9;
        let mut sim = Simulator::new(cfg).unwrap();
        sim.reset();
        let (a, _) = sim.step(Action::new(0, true)).unwrap();
        assert_abs_diff_eq!(a.tau_d, 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(a.t_e, 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(a.t_p, 0.5 + tau_e, epsilon = 1e-12);
        let (b, _) = sim.step(Action::new(0, true)).unwrap();
        assert_abs_diff_eq!(b.t_d, 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(b.tau_d, 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(b.t_e, 0.5 + tau_e, epsilon = 1e-12);
        assert_abs_diff_eq!(b.t_p, 0.5 + 2.0 * tau_e, epsilon = 1e-12);
        assert_abs_diff_eq!(b.rebuffer, tau_e - 1.0, epsilon = 1e-12);
        // Frozen hand-simulation values.
        assert_abs_diff_eq!(b.t_p, 2.776, epsilon = 1e-3);
        assert_abs_diff_eq!(b.rebuffer, 0.138, epsilon = 1e-3);
    }

    #[test]
    fn full_download_buffer_stalls_requests() {
        let cfg = config(4, &[2.0, 4.0], 1000.0, ComputeProfile::low()).with_caps(1, 5);
        let mut sim = Simulator::new(cfg).unwrap();
        sim.reset();
        let mut outs = Vec::new();
        for _ in 0..3 {
            outs.push(sim.step(Action::new(0, true)).unwrap().0);
        }
        assert_eq!(outs[2].t_d, outs[1].t_e);
        assert!(outs[1].t_e > outs[1].t_d + outs[1].tau_d);
    }

    #[test]
    fn formula_counts_hand_built_timeline() {
        // Slow enhancer, fast network: by the 4th request, 3 chunks are
        // downloaded, only the first has entered the enhancer, none played.
        let cfg = config(6, &[2.0, 4.0], 100.0, ComputeProfile::low());
        let mut sim = Simulator::new(cfg).unwrap();
        sim.reset();
        for _ in 0..3 {
            sim.step(Action::new(0, true)).unwrap();
        }
        assert_eq!(sim.state().next_chunk(), 4);
        assert_eq!(sim.occupancy_by_formula(4).unwrap(), (2, 0));
        assert_eq!(sim.state().buffer_d(), 2);
        assert_eq!(sim.state().buffer_p(), 0);
        let le = sim.state().enhance_elapsed();
        assert_abs_diff_eq!(le, sim.state().decision_time() - 0.02, epsilon = 1e-12);
    }

    #[test]
    fn observation_normalization() {
        let cfg = config(5, &[2.0, 2.5, 3.0, 3.5, 4.0], 4.0, ComputeProfile::high());
        let row: Vec<f64> = cfg.mpd.row(2).to_vec();
        let mut sim = Simulator::new(cfg).unwrap();
        sim.reset();
        let (_, obs) = sim.step(Action::new(0, false)).unwrap();
        assert_abs_diff_eq!(obs.0[5], 0.4, epsilon = 1e-12);
        assert!(obs.0[6..13].iter().all(|&x| x == 0.0));
        assert!(obs.0[13..21].iter().all(|&x| x == 0.0));
        assert_abs_diff_eq!(obs.0[21], 0.5, epsilon = 1e-12);
        for (a, b) in obs.0[22..].iter().zip(&row) {
            assert_abs_diff_eq!(*a, b / 50.0, epsilon = 1e-12);
        }
        assert_abs_diff_eq!(obs.0[2], 0.2, epsilon = 1e-12);
    }

    #[test]
    fn enhance_history_tracks_enhanced_only() {
        let cfg = config(6, &[2.0, 4.0], 4.0, ComputeProfile::high()).with_history(2, 2);
        let tau = enhancement_time(&ComputeProfile::high());
        let mut sim = Simulator::new(cfg).unwrap();
        sim.reset();
        sim.step(Action::new(0, true)).unwrap();
        sim.step(Action::new(0, false)).unwrap();
        let (_, obs) = sim.step(Action::new(1, false)).unwrap();
        // layout: 5 scalars, c-hist(2), tauE-hist(2), prev R, row(4)
        assert_abs_diff_eq!(obs.0[7], tau / 10.0, epsilon = 1e-12);
        assert_eq!(obs.0[8], 0.0);
        assert_eq!(sim.state().enhanced_count(), 1);
    }

    #[test]
    fn rejects_out_of_range_action() {
        let cfg = config(3, &[2.0, 4.0], 4.0, ComputeProfile::high());
        let mut sim = Simulator::new(cfg).unwrap();
        sim.reset();
        assert!(matches!(
            sim.step(Action::new(2, false)),
            Err(Error::InvalidAction(_))
        ));
    }

    #[test]
    fn jitter_is_seeded() {
        let mut profile = ComputeProfile::high();
        profile.jitter = 0.1;
        let base = enhancement_time(&profile);
        let cfg = config(20, &[2.0, 4.0], 4.0, profile).with_seed(9);
        let actions = vec![Action::new(0, true); 20];
        let a = Simulator::new(cfg.clone()).unwrap().run(&actions).unwrap();
        let b = Simulator::new(cfg).unwrap().run(&actions).unwrap();
        assert_eq!(a, b);
        assert!(a.iter().all(|o| (o.tau_e / base - 1.0).abs() <= 0.1 + 1e-12));
        assert!(a.windows(2).any(|w| w[0].tau_e != w[1].tau_e));
    }

    #[test]
    fn episode_log_has_one_row_per_chunk() {
        let cfg = config(3, &[2.0, 4.0], 4.0, ComputeProfile::high());
        let mut sim = Simulator::new(cfg).unwrap();
        sim.run(&[Action::new(0, false); 3]).unwrap();
        let mut buf = Vec::new();
        write_episode_log(sim.state().records(), &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 4);
        assert!(text.starts_with("index,bitrate_index,enhance,bitrate_mbps,t_d,tau_d"));
    }
}
