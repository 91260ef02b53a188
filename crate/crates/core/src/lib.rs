//! Trace-driven simulation and reinforcement learning for adaptive video
//! streaming with client-side enhancement.
//!
//! The client downloads chunks into a bounded download buffer, optionally
//! runs each through an enhancement stage, and plays them from a bounded
//! playback buffer. Each chunk decision picks a bitrate and whether to
//! enhance. See [`sim`] for the pipeline, [`qoe`] for scoring, [`policy`]
//! for baselines, [`agent`] for the actor-critic learner, and
//! [`experiment`] for corpus generation, training, and evaluation.

pub mod agent;
pub mod error;
pub mod experiment;
pub mod oracle;
pub mod policy;
pub mod qoe;
pub mod quality;
pub mod seed;
pub mod sim;
pub mod trace;

pub use error::{Error, Result};
