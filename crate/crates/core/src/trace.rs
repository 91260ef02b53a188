//! Piecewise-constant bandwidth traces.
//!
//! A trace is a list of `(start_time, throughput)` segments. Each segment
//! lasts until the next start; the final segment lasts as long as the one
//! before it (one second for single-sample traces). Queries past the end
//! wrap around to `t = 0`.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandwidthTrace {
    starts: Vec<f64>,
    rates: Vec<f64>,
    total_duration: f64,
}

impl BandwidthTrace {
    /// Builds a trace from `(start_s, mbps)` samples.
    pub fn from_samples(samples: &[(f64, f64)]) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::TraceParse {
                line: 0,
                message: "trace has no samples".into(),
            });
        }
        for (idx, &(t, c)) in samples.iter().enumerate() {
            check_sample(idx + 1, t, c, samples.get(idx.wrapping_sub(1)).map(|p| p.0))?;
        }
        Ok(Self::build(samples))
    }

    fn build(samples: &[(f64, f64)]) -> Self {
        let starts: Vec<f64> = samples.iter().map(|s| s.0).collect();
        let rates: Vec<f64> = samples.iter().map(|s| s.1).collect();
        let last_len = match starts.len() {
            1 => 1.0,
            n => starts[n - 1] - starts[n - 2],
        };
        let total_duration = starts[starts.len() - 1] + last_len;
        BandwidthTrace {
            starts,
            rates,
            total_duration,
        }
    }

    /// Constant-rate trace one second long.
    pub fn constant(mbps: f64) -> Result<Self> {
        Self::from_samples(&[(0.0, mbps)])
    }

    /// One-second segments with the given rates.
    pub fn from_rates(rates: &[f64]) -> Result<Self> {
        let samples: Vec<(f64, f64)> = rates
            .iter()
            .enumerate()
            .map(|(i, &r)| (i as f64, r))
            .collect();
        Self::from_samples(&samples)
    }

    pub fn total_duration(&self) -> f64 {
        self.total_duration
    }

    pub fn len(&self) -> usize {
        self.rates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rates.is_empty()
    }

    pub fn rates(&self) -> &[f64] {
        &self.rates
    }

    pub fn samples(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.starts.iter().copied().zip(self.rates.iter().copied())
    }

    fn segment_end(&self, idx: usize) -> f64 {
        self.starts.get(idx + 1).copied().unwrap_or(self.total_duration)
    }

    fn segment_len(&self, idx: usize) -> f64 {
        self.segment_end(idx) - self.starts[idx]
    }

    /// Megabits delivered over one full pass of the trace.
    pub fn cycle_volume(&self) -> f64 {
        (0..self.len())
            .map(|i| self.segment_len(i) * self.rates[i])
            .sum()
    }

    /// Time-weighted mean throughput.
    pub fn mean(&self) -> f64 {
        self.cycle_volume() / self.total_duration
    }

    pub fn max(&self) -> f64 {
        self.rates.iter().copied().fold(f64::MIN, f64::max)
    }

    /// Throughput at (wrapped) time `t`.
    pub fn rate_at(&self, t: f64) -> f64 {
        self.rates[self.locate(t).0]
    }

    fn locate(&self, t: f64) -> (usize, f64) {
        let local = t.rem_euclid(self.total_duration);
        let idx = self.starts.partition_point(|&s| s <= local).saturating_sub(1);
        (idx, local)
    }

    /// Multiplies every throughput by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        if !(factor > 0.0 && factor.is_finite()) {
            return Err(Error::Config(format!("scale factor must be > 0, got {factor}")));
        }
        Ok(BandwidthTrace {
            starts: self.starts.clone(),
            rates: self.rates.iter().map(|r| r * factor).collect(),
            total_duration: self.total_duration,
        })
    }

    /// Seconds needed to move `size_mbit` starting at `start_s`.
    pub fn download_time(&self, start_s: f64, size_mbit: f64) -> f64 {
        if size_mbit <= 0.0 {
            return 0.0;
        }
        let mut remaining = size_mbit;
        let mut elapsed = 0.0;

        let cycle = self.cycle_volume();
        if remaining > cycle {
            // Whole passes over the trace take exactly `total_duration` each.
            let passes = (remaining / cycle).floor() - 1.0;
            if passes > 0.0 {
                remaining -= passes * cycle;
                elapsed += passes * self.total_duration;
            }
        }

        let (mut idx, mut local) = self.locate(start_s);
        loop {
            let rate = self.rates[idx];
            let seg_end = self.segment_end(idx);
            let avail = (seg_end - local) * rate;
            if avail >= remaining {
                return elapsed + remaining / rate;
            }
            remaining -= avail;
            elapsed += seg_end - local;
            idx += 1;
            if idx == self.len() {
                idx = 0;
            }
            local = self.starts[idx];
        }
    }

    /// Megabits delivered in `[start_s, start_s + duration_s)`.
    pub fn volume(&self, start_s: f64, duration_s: f64) -> f64 {
        let mut left = duration_s;
        let mut total = 0.0;
        let (mut idx, mut local) = self.locate(start_s);
        while left > 0.0 {
            let span = (self.segment_end(idx) - local).min(left);
            total += span * self.rates[idx];
            left -= span;
            idx += 1;
            if idx == self.len() {
                idx = 0;
            }
            local = self.starts[idx];
        }
        total
    }

    /// Serializes as `time_s,throughput_mbps` CSV with a header row.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("time_s,throughput_mbps\n");
        for (t, c) in self.samples() {
            let _ = writeln!(out, "{t},{c}");
        }
        out
    }
}

fn check_sample(line: usize, t: f64, c: f64, prev: Option<f64>) -> Result<()> {
    let fail = |message: String| Err(Error::TraceParse { line, message });
    if !t.is_finite() || !c.is_finite() {
        return fail("non-finite value".into());
    }
    match prev {
        None if t != 0.0 => return fail(format!("first timestamp must be 0, got {t}")),
        Some(p) if t <= p => return fail(format!("timestamp {t} not after previous {p}")),
        _ => {}
    }
    if c <= 0.0 {
        return fail(format!("throughput must be > 0, got {c}"));
    }
    Ok(())
}

/// Parses `time_s,throughput_mbps` CSV. A non-numeric first line is
/// treated as a header; blank lines and `#` comments are skipped.
pub fn parse_trace(text: &str) -> Result<BandwidthTrace> {
    let mut samples: Vec<(f64, f64)> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut fields = line.split(',').map(str::trim);
        let (Some(a), Some(b), None) = (fields.next(), fields.next(), fields.next()) else {
            return Err(Error::TraceParse {
                line: line_no,
                message: format!("expected 2 fields in '{line}'"),
            });
        };
        let parsed = (a.parse::<f64>(), b.parse::<f64>());
        let (t, c) = match parsed {
            (Ok(t), Ok(c)) => (t, c),
            _ if samples.is_empty() && a.parse::<f64>().is_err() => continue,
            _ => {
                return Err(Error::TraceParse {
                    line: line_no,
                    message: format!("non-numeric field in '{line}'"),
                })
            }
        };
        check_sample(line_no, t, c, samples.last().map(|p| p.0))?;
        samples.push((t, c));
    }
    if samples.is_empty() {
        return Err(Error::TraceParse {
            line: 0,
            message: "trace is empty".into(),
        });
    }
    Ok(BandwidthTrace::build(&samples))
}

/// Rescales so the time-weighted mean equals `target_mbps`.
pub fn scale_trace_mean(trace: &BandwidthTrace, target_mbps: f64) -> Result<BandwidthTrace> {
    check_target(target_mbps)?;
    trace.scaled(target_mbps / trace.mean())
}

/// Rescales so the peak throughput equals `target_mbps`.
pub fn scale_trace_max(trace: &BandwidthTrace, target_mbps: f64) -> Result<BandwidthTrace> {
    check_target(target_mbps)?;
    trace.scaled(target_mbps / trace.max())
}

fn check_target(target: f64) -> Result<()> {
    if target > 0.0 && target.is_finite() {
        Ok(())
    } else {
        Err(Error::Config(format!("scaling target must be > 0, got {target}")))
    }
}
