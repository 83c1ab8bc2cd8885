//! System-level simulator comparing LTE and mmWave vehicle-to-infrastructure
//! downlinks.
//!
//! A run drops eNBs as a Poisson point process over a square area, drops
//! vehicles uniformly over it, and then drives a deterministic discrete-event loop:
//! mobility and channel updates every millisecond, MAC slots per technology,
//! constant-bit-rate UDP traffic through an RLC-AM buffer with HARQ, and
//! per-packet latency accounting. Campaigns of independent runs are reduced
//! to throughput, latency, percentile and fairness statistics.
//!
//! Module map:
//! - [`config`]: parameters and validation
//! - [`geometry`]: deployment, mobility, association
//! - [`channel`]: LOS probability, path loss, shadowing, fading
//! - [`radio`]: antenna gains, SINR, link capacity
//! - [`stack`]: traffic, RLC buffer, scheduler, HARQ
//! - [`engine`]: event queue, single runs and campaigns
//! - [`metrics`]: per-run and campaign statistics
//! - [`sweep`]: experiment grids and CSV output
//! - [`trace`]: optional CSV traces

// `!(x > 0.0)` is used on purpose so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod config;
pub mod engine;
pub mod geometry;
pub mod metrics;
pub mod radio;
pub mod rng;
pub mod stack;
pub mod sweep;
pub mod time;
pub mod trace;

pub use config::{ConfigError, ConfigErrors, Scenario, ScenarioConfig, Tech};
pub use engine::{run_campaign, run_once, RunResult};
pub use metrics::MetricsReport;
pub use sweep::{run_sweep, SweepSpec};
pub use time::SimTime;

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
