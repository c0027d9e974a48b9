//! Full colorings from iterated partial colorings.
//!
//! Each phase restricts the system to the points still strictly inside the
//! band `|x_i| < 1 - delta`, runs the partial-coloring walk on them from their
//! current values, and writes the result back. A successful phase freezes at
//! least half of its points, so the active set shrinks geometrically. Once at
//! most [`ACTIVE_FLOOR`] points remain, the near-integral points are rounded
//! at random (toward the nearer sign with probability `(1 + |x_i|)/2`) and the
//! leftover points are colored optimally by exhaustive search.
//!
//! Thresholds are `c = 8 sqrt(ln(2m/n_i))` for a phase with `n_i` active
//! points. With `m >= n_i` this gives `sum_j exp(-c^2/16) = m (n_i/2m)^4 <=
//! n_i/16`, the walk's feasibility condition, including `m = n_i`. Fewer sets
//! than points are treated as if padded with empty sets (`m -> max(m, n_i)`).

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{contract, Error, Result};
use crate::oracle;
use crate::partial_coloring::{self, WalkParams, WalkProblem};
use crate::rng::{self, lane, StreamRng};
use crate::set_system::{Coloring, SetSystem};

/// Phases stop once this many points or fewer are still active.
pub const ACTIVE_FLOOR: usize = 8;
/// Times a phase is rerun with fresh seeds after exhausting its restarts.
pub const PHASE_RETRIES: usize = 3;

/// `min(0.099, 1 / (8 ln max(m, 3)))`.
pub fn default_delta(m: usize) -> f64 {
    (1.0 / (8.0 * (m.max(3) as f64).ln())).min(0.099)
}

/// `8 sqrt(ln(2m / n_active))`.
pub fn threshold_value(n_active: usize, m: usize) -> f64 {
    8.0 * (2.0 * m as f64 / n_active as f64).ln().sqrt()
}

/// `m` copies of [`threshold_value`].
pub fn default_thresholds(n_active: usize, m: usize) -> Vec<f64> {
    vec![threshold_value(n_active, m); m]
}

/// `K sqrt(n ln(2m/n))`, with `m` padded to at least `n`.
pub fn theoretical_bound(k: f64, n: usize, m: usize) -> f64 {
    let m = m.max(n) as f64;
    let n = n as f64;
    k * (n * (2.0 * m / n).ln()).sqrt()
}

/// Most phases the driver will run on an `n`-point system.
pub fn phase_cap(n: usize) -> usize {
    4 * (n.max(1) as f64).log2().ceil() as usize + 10
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FullColoringParams {
    /// Only used to report `K sqrt(n ln(2m/n))`.
    pub k_target: f64,
    pub delta_override: Option<f64>,
    /// Restarts per partial-coloring call.
    pub max_restarts: usize,
    pub seed: u64,
    pub screen_sigmas: Option<f64>,
}

impl Default for FullColoringParams {
    fn default() -> Self {
        Self {
            k_target: 1.0,
            delta_override: None,
            max_restarts: 50,
            seed: 0,
            screen_sigmas: Some(partial_coloring::DEFAULT_SCREEN_SIGMAS),
        }
    }
}

impl FullColoringParams {
    pub fn with_seed(seed: u64) -> Self {
        Self { seed, ..Self::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseRecord {
    pub phase: usize,
    pub active: usize,
    pub constraints: usize,
    pub threshold: f64,
    pub gamma: f64,
    pub steps: u64,
    pub steps_taken: u64,
    pub frozen_var_count: usize,
    pub frozen_disc_count: usize,
    pub restarts: usize,
    pub phase_retries: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundingRecord {
    /// Near-integral points rounded at random.
    pub rounded: usize,
    /// Rounded points that went against the sign of their value.
    pub flipped: usize,
    /// Points colored by exhaustive search.
    pub finished_exactly: usize,
    pub pre_rounding_disc: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FullColoringReport {
    pub coloring: Coloring,
    pub achieved_disc: u64,
    pub iterations: usize,
    pub delta: f64,
    pub bound: f64,
    pub phases: Vec<PhaseRecord>,
    pub rounding: RoundingRecord,
    /// The fractional point before rounding.
    pub fractional: Vec<f64>,
}

/// Rounds every coordinate of a near-integral point to `±1`, keeping the
/// sign of `x_i` with probability `(1 + |x_i|)/2` so that `E[chi_i] = x_i`.
pub fn round_coloring<R: Rng + ?Sized>(x: &[f64], delta: f64, rng: &mut R) -> Result<Coloring> {
    if let Some(i) = x.iter().position(|v| !(v.abs() >= 1.0 - delta)) {
        return Err(contract(format!("coordinate {} = {} is not within {delta} of ±1", i + 1, x[i])));
    }
    Coloring::new(x.iter().map(|&v| round_one(v, rng)).collect())
}

fn round_one<R: Rng + ?Sized>(v: f64, rng: &mut R) -> i8 {
    let sign = if v < 0.0 { -1 } else { 1 };
    let keep = (1.0 + v.abs().min(1.0)) / 2.0;
    if rng.random::<f64>() < keep {
        sign
    } else {
        -sign
    }
}

fn indicator_vectors(sys: &SetSystem) -> Vec<Vec<f64>> {
    (0..sys.m()).filter(|&j| !sys.set(j).is_empty()).map(|j| sys.indicator(j)).collect()
}

/// Colors every point of `sys`. Fails with [`Error::SolverFailure`] when a
/// phase still has no successful walk after all restarts and retries.
pub fn full_color(sys: &SetSystem, params: &FullColoringParams) -> Result<FullColoringReport> {
    let n = sys.n();
    if n == 0 {
        return Err(contract("full coloring needs n >= 1"));
    }
    let delta = params.delta_override.unwrap_or_else(|| default_delta(sys.m()));
    let band = 1.0 - delta;
    let mut x: Vec<f64> = vec![0.0; n];
    let mut phases = Vec::new();

    for phase in 0..phase_cap(n) {
        let active: Vec<usize> = (0..n).filter(|&i| x[i].abs() < band).collect();
        if active.len() <= ACTIVE_FLOOR {
            break;
        }
        let restricted = sys.restrict(&active)?;
        let vectors = indicator_vectors(&restricted.system);
        let threshold = threshold_value(active.len(), sys.m().max(active.len()));
        let x0: Vec<f64> = active.iter().map(|&i| x[i]).collect();

        let mut finished = None;
        for retry in 0..=PHASE_RETRIES {
            let seed = rng::derive(params.seed, &[lane::PHASE, phase as u64, retry as u64]);
            let walk = WalkParams::derive(active.len(), &vectors, delta, vec![threshold; vectors.len()], seed)?
                .with_max_restarts(params.max_restarts)
                .with_screening(params.screen_sigmas);
            let problem = WalkProblem::new(vectors.clone(), &x0, walk.clone())?;
            let mut last = None;
            for attempt in 0..=params.max_restarts {
                let outcome = problem.run_attempt(attempt)?;
                let ok = outcome.success;
                last = Some(outcome);
                if ok {
                    break;
                }
            }
            let outcome = last.expect("at least one attempt");
            if outcome.success {
                finished = Some((outcome, walk, retry));
                break;
            }
        }
        let Some((outcome, walk, retry)) = finished else {
            return Err(Error::SolverFailure(format!(
                "phase {phase}: no successful walk on {} active points after {} retries",
                active.len(),
                PHASE_RETRIES
            )));
        };
        for (k, &i) in active.iter().enumerate() {
            x[i] = outcome.x[k];
        }
        phases.push(PhaseRecord {
            phase,
            active: active.len(),
            constraints: vectors.len(),
            threshold,
            gamma: walk.gamma,
            steps: walk.steps,
            steps_taken: outcome.steps_taken,
            frozen_var_count: outcome.frozen_var_count,
            frozen_disc_count: outcome.frozen_disc_count,
            restarts: outcome.attempt,
            phase_retries: retry,
        });
    }

    let pre_rounding_disc = sys.fractional_discrepancy(&x)?;
    let mut rng: StreamRng = rng::stream(params.seed, &[lane::ROUND]);
    let near: Vec<usize> = (0..n).filter(|&i| x[i].abs() >= band).collect();
    let rest: Vec<usize> = (0..n).filter(|&i| x[i].abs() < band).collect();
    let near_values: Vec<f64> = near.iter().map(|&i| x[i]).collect();
    let rounded = round_coloring(&near_values, delta, &mut rng)?;
    let mut fixed: Vec<Option<i8>> = vec![None; n];
    let mut flipped = 0;
    for (&i, &s) in near.iter().zip(rounded.values()) {
        if (s > 0) != (x[i] >= 0.0) {
            flipped += 1;
        }
        fixed[i] = Some(s);
    }
    let (coloring, finished_exactly) = if rest.len() <= oracle::DEFAULT_LIMIT {
        (oracle::best_completion(sys, &fixed, oracle::DEFAULT_LIMIT)?.0, rest.len())
    } else {
        // Only reachable if the phase cap stops a run early.
        for &i in &rest {
            let plus = (1.0 + x[i]) / 2.0;
            fixed[i] = Some(if rng.random::<f64>() < plus { 1 } else { -1 });
        }
        (Coloring::new(fixed.into_iter().map(|s| s.unwrap_or(1)).collect())?, 0)
    };
    let achieved_disc = sys.discrepancy(&coloring)?;
    Ok(FullColoringReport {
        coloring,
        achieved_disc,
        iterations: phases.len(),
        delta,
        bound: theoretical_bound(params.k_target, n, sys.m()),
        phases,
        rounding: RoundingRecord { rounded: near.len(), flipped, finished_exactly, pre_rounding_disc },
        fractional: x,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::partial_coloring::feasibility_sum;

    #[test]
    fn thresholds_at_m_equal_n() {
        let c = default_thresholds(64, 64);
        assert_eq!(c.len(), 64);
        assert!((c[0] - 6.6604368892615815).abs() < 1e-12);
        // m (n/2m)^4 = n/16 when m = n.
        assert!((feasibility_sum(&c) - 4.0).abs() < 1e-12);
    }

    #[test]
    fn thresholds_at_m_eight_n() {
        let c = threshold_value(10, 80);
        assert!((c - 8.0 * 16f64.ln().sqrt()).abs() < 1e-12);
    }

    #[test]
    fn thresholds_are_feasible_whenever_m_at_least_n() {
        for n in 1..=200usize {
            for m in (n..=4 * n + 3).step_by(1 + n / 16) {
                let c = default_thresholds(n, m);
                let sum = feasibility_sum(&c);
                let closed_form = m as f64 * (n as f64 / (2.0 * m as f64)).powi(4);
                assert!((sum - closed_form).abs() <= 1e-9 * closed_form.max(1.0));
                assert!(sum <= n as f64 / 16.0 * (1.0 + 1e-12), "n={n} m={m}");
            }
        }
    }

    #[test]
    fn default_delta_values() {
        assert_eq!(default_delta(1), 0.099);
        assert!((default_delta(64) - 1.0 / (8.0 * 64f64.ln())).abs() < 1e-15);
    }

    #[test]
    fn rounding_is_deterministic_at_the_faces() {
        let mut r = rng::stream(4, &[]);
        for _ in 0..100 {
            let chi = round_coloring(&[1.0, -1.0], 0.05, &mut r).unwrap();
            assert_eq!(chi.values(), &[1, -1]);
        }
    }

    #[test]
    fn rounding_rejects_interior_points() {
        let mut r = rng::stream(4, &[]);
        assert!(round_coloring(&[0.5], 0.05, &mut r).is_err());
        assert!(round_coloring(&[0.95, -0.96], 0.05, &mut r).is_ok());
    }

    #[test]
    fn rounding_is_unbiased() {
        let mut r = rng::stream(9, &[lane::ROUND]);
        let draws = 10_000;
        let total: i64 = (0..draws).map(|_| round_coloring(&[0.96], 0.05, &mut r).unwrap().values()[0] as i64).sum();
        let mean = total as f64 / draws as f64;
        assert!((mean - 0.96).abs() <= 0.02, "{mean}");
    }

    #[test]
    fn single_point_set() {
        let sys = SetSystem::from_one_based(1, &[&[1]]).unwrap();
        let report = full_color(&sys, &FullColoringParams::with_seed(3)).unwrap();
        assert!(report.achieved_disc <= 1);
        assert_eq!(report.iterations, 0);
    }

    #[test]
    fn small_systems_are_finished_exactly() {
        let sys = SetSystem::from_one_based(3, &[&[1, 2], &[2, 3], &[1, 3]]).unwrap();
        let report = full_color(&sys, &FullColoringParams::with_seed(1)).unwrap();
        assert_eq!(report.achieved_disc, 2);
        assert_eq!(report.rounding.finished_exactly, 3);
    }

    #[test]
    fn medium_instance_runs_phases() {
        let sys = SetSystem::generate_random(24, 30, 0.5, 12).unwrap();
        let report = full_color(&sys, &FullColoringParams::with_seed(5)).unwrap();
        assert!(report.iterations >= 1);
        assert_eq!(report.achieved_disc, sys.discrepancy(&report.coloring).unwrap());
        assert_eq!(report.achieved_disc, oracle::recount_discrepancy(&sys, &report.coloring).unwrap());
        let mut active = 24;
        for phase in &report.phases {
            assert_eq!(phase.active, active);
            assert!(phase.frozen_var_count * 2 >= phase.active);
            active = phase.active - phase.frozen_var_count;
        }
        assert!(report.iterations <= phase_cap(24));
        assert_eq!(report, full_color(&sys, &FullColoringParams::with_seed(5)).unwrap());
    }

    #[test]
    fn fewer_sets_than_points() {
        let sys = SetSystem::generate_random(30, 5, 0.5, 2).unwrap();
        let report = full_color(&sys, &FullColoringParams::with_seed(8)).unwrap();
        assert!(report.phases.iter().all(|p| p.threshold >= threshold_value(p.active, p.active) - 1e-12));
        assert_eq!(report.achieved_disc, sys.discrepancy(&report.coloring).unwrap());
    }
}
