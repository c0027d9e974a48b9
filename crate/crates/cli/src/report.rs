//! JSON report schema (`report_version` 1).
//!
//! `wall_time_ms` is the only field that may differ between two runs with
//! the same input, seed and parameters.

use disclab::beck_fiala::IterationRecord;
use disclab::experiments::Claim;
use disclab::full_coloring::{PhaseRecord, RoundingRecord};
use serde::Serialize;

pub const REPORT_VERSION: u32 = 1;

#[derive(Debug, Serialize)]
pub struct InstanceInfo {
    pub n: usize,
    pub m: usize,
    pub max_degree: usize,
    pub source: String,
}

#[derive(Debug, Serialize)]
#[serde(tag = "name", rename_all = "kebab-case")]
pub enum AlgorithmInfo {
    Lm {
        seed: u64,
        delta: f64,
        max_restarts: usize,
        phase_retries: usize,
        active_floor: usize,
        k_target: f64,
        /// Per-phase threshold `c`, one entry per phase.
        thresholds: Vec<f64>,
        /// Per-phase step size.
        gammas: Vec<f64>,
        /// Per-phase horizon `T`.
        horizons: Vec<u64>,
    },
    BeckFiala {
        max_degree: usize,
    },
    Brute {
        limit: usize,
    },
}

#[derive(Debug, Serialize)]
pub struct Outcome {
    pub achieved_disc: u64,
    /// `K sqrt(n ln(2m/n))` for lm, `2t - 1` for beck-fiala, the optimum for brute.
    pub bound: f64,
    pub bound_satisfied: bool,
    pub coloring: Vec<i8>,
    pub wall_time_ms: f64,
}

#[derive(Debug, Serialize)]
#[serde(untagged)]
pub enum Details {
    Lm { phases: Vec<PhaseRecord>, rounding: RoundingRecord },
    BeckFiala { iterations: Vec<IterationRecord> },
    Brute { colorings_examined: u64 },
}

#[derive(Debug, Serialize)]
pub struct Verification {
    pub recounted_disc: u64,
    pub matches: bool,
    /// Exact optimum, when the instance is small enough to enumerate.
    pub optimum: Option<u64>,
}

#[derive(Debug, Serialize)]
pub struct RunReport {
    pub report_version: u32,
    pub instance: InstanceInfo,
    pub algorithm: AlgorithmInfo,
    pub outcome: Outcome,
    pub details: Details,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub verification: Option<Verification>,
}

#[derive(Debug, Serialize)]
pub struct BenchReport<T: Serialize> {
    pub report_version: u32,
    pub suite: String,
    pub trials: usize,
    pub seed: u64,
    pub passed: bool,
    pub claims: Vec<Claim>,
    pub wall_time_ms: f64,
    pub results: T,
}
