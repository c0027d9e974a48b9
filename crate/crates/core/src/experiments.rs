//! Seeded Monte-Carlo suites.
//!
//! Each suite draws its instances and walks from streams derived from a
//! master seed and the trial index, so trials run in parallel (rayon) and
//! still aggregate to the same report on any thread count. Every suite
//! returns its raw per-trial records together with a list of [`Claim`]s,
//! the measured statistic for each checked property next to its limit.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::beck_fiala;
use crate::error::{contract, Result};
use crate::full_coloring::{self, FullColoringParams};
use crate::oracle;
use crate::partial_coloring::{WalkParams, WalkProblem};
use crate::rng::{self, lane};
use crate::set_system::SetSystem;
use crate::subspace::{self, ConstraintCollection};

/// Regression constant for `disc / sqrt(n ln(2m/n))` of the full coloring.
///
/// Pinned as 1.25 times the largest ratio seen over 50 trials each at
/// `n = m = 64` and `n = m = 128` with master seed [`PILOT_SEED`]
/// (3.00281, reached at `n = 64`).
pub const K_EMP: f64 = 3.7535;
/// Master seed of the run that fixed [`K_EMP`].
pub const PILOT_SEED: u64 = 0;

/// Point counts of the Beck–Fiala suite, crossed with [`BECK_FIALA_DEGREES`].
pub const BECK_FIALA_SIZES: [usize; 4] = [20, 50, 100, 200];
pub const BECK_FIALA_DEGREES: [usize; 4] = [2, 3, 5, 10];

const SUITE_BECK_FIALA: u64 = 1;
const SUITE_ORACLE: u64 = 2;
const SUITE_WALK: u64 = 3;
const SUITE_SAMPLER: u64 = 4;
const SUITE_SPENCER: u64 = 5;
const SUITE_ROUNDING: u64 = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass,
    /// Inside a tolerated band below the target; not a failure.
    Warn,
    Fail,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    AtMost,
    AtLeast,
}

/// One checked property.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Claim {
    pub name: String,
    pub measured: f64,
    pub relation: Relation,
    pub limit: f64,
    pub status: Status,
    pub detail: String,
}

impl Claim {
    fn at_most(name: &str, measured: f64, limit: f64, detail: String) -> Self {
        let status = if measured <= limit { Status::Pass } else { Status::Fail };
        Self { name: name.into(), measured, relation: Relation::AtMost, limit, status, detail }
    }

    fn at_least(name: &str, measured: f64, limit: f64, detail: String) -> Self {
        let status = if measured >= limit { Status::Pass } else { Status::Fail };
        Self { name: name.into(), measured, relation: Relation::AtLeast, limit, status, detail }
    }

    pub fn passed(&self) -> bool {
        self.status != Status::Fail
    }

    /// `PASS name: measured <= limit (detail)`.
    pub fn line(&self) -> String {
        let tag = match self.status {
            Status::Pass => "PASS",
            Status::Warn => "WARN",
            Status::Fail => "FAIL",
        };
        let op = match self.relation {
            Relation::AtMost => "<=",
            Relation::AtLeast => ">=",
        };
        format!("{tag} {}: {:.6} {op} {:.6} ({})", self.name, self.measured, self.limit, self.detail)
    }
}

pub fn all_passed(claims: &[Claim]) -> bool {
    claims.iter().all(Claim::passed)
}

fn trial_seed(seed: u64, suite: u64, trial: usize) -> u64 {
    rng::derive(seed, &[lane::TRIAL, suite, trial as u64])
}

fn mean(xs: impl IntoIterator<Item = f64>) -> f64 {
    let (sum, count) = xs.into_iter().fold((0.0, 0usize), |(s, c), x| (s + x, c + 1));
    if count == 0 {
        0.0
    } else {
        sum / count as f64
    }
}

/// Mean and standard error of the mean.
fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mu = mean(xs.iter().copied());
    if xs.len() < 2 {
        return (mu, 0.0);
    }
    let var = xs.iter().map(|x| (x - mu) * (x - mu)).sum::<f64>() / (n - 1.0);
    (mu, (var / n).sqrt())
}

fn check_trials(trials: usize) -> Result<()> {
    if trials == 0 {
        return Err(contract("a suite needs at least one trial"));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Beck–Fiala

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeckFialaRun {
    pub trial: usize,
    pub n: usize,
    pub m: usize,
    pub t: usize,
    pub instance_seed: u64,
    pub max_degree: usize,
    pub disc: u64,
    pub bound: u64,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeckFialaSuite {
    pub seed: u64,
    pub runs: Vec<BeckFialaRun>,
    pub violations: usize,
    pub claims: Vec<Claim>,
}

/// Bounded-degree instances with `m = n`; trial `k` uses the
/// `(size, degree)` cell `k mod 16`. Each coloring is recounted
/// independently and checked against `2t - 1` and the stable-set drift
/// bound.
pub fn beck_fiala_suite(trials: usize, seed: u64) -> Result<BeckFialaSuite> {
    check_trials(trials)?;
    let cells = BECK_FIALA_SIZES.len() * BECK_FIALA_DEGREES.len();
    let runs = (0..trials)
        .into_par_iter()
        .map(|trial| {
            let cell = trial % cells;
            let n = BECK_FIALA_SIZES[cell / BECK_FIALA_DEGREES.len()];
            let t = BECK_FIALA_DEGREES[cell % BECK_FIALA_DEGREES.len()];
            let instance_seed = trial_seed(seed, SUITE_BECK_FIALA, trial);
            let sys = SetSystem::generate_bounded_degree(n, n, t, instance_seed)?;
            let outcome = beck_fiala::beck_fiala_color(&sys)?;
            beck_fiala::check_stable_drift(&sys, &outcome)?;
            Ok(BeckFialaRun {
                trial,
                n,
                m: n,
                t,
                instance_seed,
                max_degree: sys.max_degree(),
                disc: oracle::recount_discrepancy(&sys, &outcome.coloring)?,
                bound: beck_fiala::degree_bound(sys.max_degree()),
                iterations: outcome.trace.iterations.len(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let violations = runs.iter().filter(|r| r.disc > r.bound || r.max_degree > r.t).count();
    let worst = runs.iter().map(|r| r.disc as f64 / r.bound.max(1) as f64).fold(0.0, f64::max);
    let claims = vec![Claim::at_most(
        "beck-fiala bound violations",
        violations as f64,
        0.0,
        format!("{} instances, worst disc/(2t-1) = {worst:.3}", runs.len()),
    )];
    Ok(BeckFialaSuite { seed, runs, violations, claims })
}

// ---------------------------------------------------------------------------
// Oracle dominance

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleRun {
    pub trial: usize,
    pub n: usize,
    pub m: usize,
    pub max_degree: usize,
    pub instance_seed: u64,
    pub min_disc: u64,
    pub beck_fiala_disc: u64,
    pub full_coloring_disc: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleSuite {
    pub seed: u64,
    pub runs: Vec<OracleRun>,
    pub claims: Vec<Claim>,
}

/// Random instances with `4 <= n <= 14`, `n/2 <= m <= 2n`, `p = 1/2`,
/// solved exactly and by both algorithms.
pub fn oracle_dominance_suite(trials: usize, seed: u64) -> Result<OracleSuite> {
    check_trials(trials)?;
    let runs = (0..trials)
        .into_par_iter()
        .map(|trial| {
            let instance_seed = trial_seed(seed, SUITE_ORACLE, trial);
            let mut pick = rng::stream(instance_seed, &[lane::TRIAL]);
            let n = 4 + trial % 11;
            let m = pick.random_range((n / 2).max(1)..=2 * n);
            let sys = SetSystem::generate_random(n, m, 0.5, instance_seed)?;
            let exact = oracle::min_discrepancy_bruteforce(&sys, oracle::DEFAULT_LIMIT)?;
            let bf = beck_fiala::beck_fiala_color(&sys)?;
            let lm = full_coloring::full_color(&sys, &FullColoringParams::with_seed(instance_seed))?;
            Ok(OracleRun {
                trial,
                n,
                m,
                max_degree: sys.max_degree(),
                instance_seed,
                min_disc: exact.min_disc,
                beck_fiala_disc: oracle::recount_discrepancy(&sys, &bf.coloring)?,
                full_coloring_disc: oracle::recount_discrepancy(&sys, &lm.coloring)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let below = runs
        .iter()
        .filter(|r| r.beck_fiala_disc < r.min_disc || r.full_coloring_disc < r.min_disc)
        .count();
    let excess = runs
        .iter()
        .filter(|r| r.beck_fiala_disc > r.min_disc + beck_fiala::degree_bound(r.max_degree))
        .count();
    let optimal = runs.iter().filter(|r| r.full_coloring_disc == r.min_disc).count();
    let claims = vec![
        Claim::at_most(
            "oracle lower-bounds every algorithm",
            below as f64,
            0.0,
            format!("{} instances, full coloring optimal on {optimal}", runs.len()),
        ),
        Claim::at_most(
            "beck-fiala within 2t-1 of the optimum",
            excess as f64,
            0.0,
            format!("{} instances", runs.len()),
        ),
    ];
    Ok(OracleSuite { seed, runs, claims })
}

// ---------------------------------------------------------------------------
// Single partial-coloring walks

/// Walk-suite instance shape.
pub const WALK_N: usize = 64;
pub const WALK_M: usize = 64;
pub const WALK_DELTA: f64 = 0.05;
pub const WALK_P: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WalkRun {
    pub trial: usize,
    pub instance_seed: u64,
    pub success: bool,
    pub exit_step: Option<u64>,
    pub steps_taken: u64,
    pub norm_sq: f64,
    pub frozen_var_count: usize,
    pub frozen_disc_count: usize,
    /// `sum_t dim(V_t)`.
    pub dim_steps: u128,
    pub subspace_rebuilds: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WalkSuite {
    pub seed: u64,
    pub n: usize,
    pub m: usize,
    pub delta: f64,
    pub gamma: f64,
    pub steps: u64,
    pub threshold: f64,
    pub runs: Vec<WalkRun>,
    pub claims: Vec<Claim>,
}

/// One walk attempt from `x0 = 0` per trial, each on a fresh random
/// instance with `n = m = 64`, `p = 1/2`, `delta = 0.05` and the full
/// coloring's thresholds. Nesting violations abort the suite with
/// [`crate::Error::Invariant`].
pub fn walk_suite(trials: usize, seed: u64) -> Result<WalkSuite> {
    check_trials(trials)?;
    let thresholds = full_coloring::default_thresholds(WALK_N, WALK_M);
    let runs = (0..trials)
        .into_par_iter()
        .map(|trial| {
            let instance_seed = trial_seed(seed, SUITE_WALK, trial);
            let sys = SetSystem::generate_random(WALK_N, WALK_M, WALK_P, instance_seed)?;
            let vectors: Vec<Vec<f64>> = (0..sys.m()).map(|j| sys.indicator(j)).collect();
            let params = WalkParams::derive(WALK_N, &vectors, WALK_DELTA, thresholds.clone(), instance_seed)?;
            let problem = WalkProblem::new(vectors, &vec![0.0; WALK_N], params)?;
            let outcome = problem.run_attempt(0)?;
            Ok(WalkRun {
                trial,
                instance_seed,
                success: outcome.success,
                exit_step: outcome.polytope_exit_step,
                steps_taken: outcome.steps_taken,
                norm_sq: outcome.x.iter().map(|v| v * v).sum(),
                frozen_var_count: outcome.frozen_var_count,
                frozen_disc_count: outcome.frozen_disc_count,
                dim_steps: outcome.dim_steps,
                subspace_rebuilds: outcome.subspace_rebuilds,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let gamma = crate::partial_coloring::step_size(WALK_N, WALK_M, WALK_DELTA);
    let steps = crate::partial_coloring::horizon(gamma);
    let trials_f = runs.len() as f64;
    let n = WALK_N as f64;

    let success = runs.iter().filter(|r| r.success).count() as f64 / trials_f;
    let mut success_claim = Claim::at_least(
        "partial coloring success rate",
        success,
        0.10,
        format!("{} single-attempt walks", runs.len()),
    );
    if (0.05..0.10).contains(&success) {
        success_claim.status = Status::Warn;
    }
    let exits = runs.iter().filter(|r| r.exit_step.is_some()).count() as f64 / trials_f;
    let norm = mean(runs.iter().map(|r| r.norm_sq / n));
    let var_frac = mean(runs.iter().map(|r| r.frozen_var_count as f64 / n));
    let disc_frac = mean(runs.iter().map(|r| r.frozen_disc_count as f64 / WALK_M as f64));

    // ||X_T||^2 - gamma^2 sum_t dim(V_t) is a martingale started at 0.
    let gaps: Vec<f64> = runs.iter().map(|r| r.norm_sq - gamma * gamma * r.dim_steps as f64).collect();
    let (gap, gap_se) = mean_and_se(&gaps);
    let gap_z = if gap_se > 0.0 { gap.abs() / gap_se } else if gap.abs() < 1e-9 { 0.0 } else { f64::INFINITY };

    let claims = vec![
        success_claim,
        Claim::at_most("polytope exit rate", exits, 0.05, format!("{} walks", runs.len())),
        Claim::at_most("mean |X_T|^2 / n", norm, 1.05, format!("{} walks", runs.len())),
        Claim::at_least("mean |C_var| / n", var_frac, 0.5, format!("{} walks", runs.len())),
        Claim::at_most("mean |C_disc| / m", disc_frac, 0.3, format!("{} walks", runs.len())),
        Claim::at_most(
            "energy identity |mean gap| / SE",
            gap_z,
            4.0,
            format!("mean of |X_T|^2 - gamma^2 sum dim = {gap:.4} (SE {gap_se:.4})"),
        ),
    ];
    Ok(WalkSuite {
        seed,
        n: WALK_N,
        m: WALK_M,
        delta: WALK_DELTA,
        gamma,
        steps,
        threshold: thresholds[0],
        runs,
        claims,
    })
}

// ---------------------------------------------------------------------------
// Subspace sampler

pub const SAMPLER_N: usize = 50;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplerRun {
    pub collection: usize,
    pub frozen: usize,
    pub dense: usize,
    pub dim: usize,
    pub max_violation: f64,
    pub mean_energy: f64,
    /// Sample variance of `<U, w>` for a random unit `w`.
    pub projection_variance: f64,
    /// `|P_V w|^2`, the exact variance of `<U, w>`.
    pub projection_norm_sq: f64,
    /// Fraction of samples with `|<U, w>| >= lambda |P_V w|`, lambda = 1, 2, 3.
    pub tail_fractions: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplerSuite {
    pub seed: u64,
    pub samples: usize,
    pub runs: Vec<SamplerRun>,
    pub claims: Vec<Claim>,
}

fn random_collection<R: Rng>(rng: &mut R) -> Result<ConstraintCollection> {
    let n = SAMPLER_N;
    let frozen_count = rng.random_range(0..=20);
    let frozen: Vec<usize> = rand::seq::index::sample(rng, n, frozen_count).into_vec();
    let dense_count = rng.random_range(0..=20);
    let mut dense: Vec<Vec<f64>> = Vec::with_capacity(dense_count + 1);
    for k in 0..dense_count {
        let v = if k % 2 == 0 {
            (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
        } else {
            (0..n).map(|_| if rng.random::<bool>() { 1.0 } else { 0.0 }).collect()
        };
        dense.push(v);
    }
    if dense.len() >= 2 && rng.random::<bool>() {
        // A dependent row, to exercise the rank tolerance.
        let combo: Vec<f64> = dense[0].iter().zip(&dense[1]).map(|(a, b)| 2.0 * a - b).collect();
        dense.push(combo);
    }
    ConstraintCollection::new(n, frozen, dense)
}

/// Random constraint collections in dimension 50 mixing frozen
/// coordinates, Gaussian rows, 0/1 rows and a dependent row.
pub fn sampler_suite(collections: usize, samples: usize, seed: u64) -> Result<SamplerSuite> {
    check_trials(collections)?;
    check_trials(samples)?;
    let runs = (0..collections)
        .into_par_iter()
        .map(|collection| {
            let mut rng = rng::stream(trial_seed(seed, SUITE_SAMPLER, collection), &[lane::GENERATE]);
            let cc = random_collection(&mut rng)?;
            let basis = subspace::build_basis(SAMPLER_N, &cc);
            let w: Vec<f64> = {
                let g: Vec<f64> = (0..SAMPLER_N).map(|_| rng.sample(StandardNormal)).collect();
                let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
                g.into_iter().map(|v| v / norm).collect()
            };
            let projection_norm_sq: f64 = basis
                .vectors()
                .iter()
                .map(|b| b.iter().zip(&w).map(|(x, y)| x * y).sum::<f64>().powi(2))
                .sum();
            let units: Vec<Vec<f64>> = cc
                .dense_constraints()
                .iter()
                .map(|v| {
                    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                    v.iter().map(|x| x / norm).collect()
                })
                .collect();

            let mut walk = rng::stream(trial_seed(seed, SUITE_SAMPLER, collection), &[lane::WALK]);
            let mut max_violation: f64 = 0.0;
            let mut energy = 0.0;
            let mut projections = Vec::with_capacity(samples);
            for _ in 0..samples {
                let u = subspace::sample_gaussian(&basis, &mut walk);
                for &i in cc.frozen_coords() {
                    max_violation = max_violation.max(u[i].abs());
                }
                for v in &units {
                    let d: f64 = v.iter().zip(&u).map(|(a, b)| a * b).sum();
                    max_violation = max_violation.max(d.abs());
                }
                energy += u.iter().map(|x| x * x).sum::<f64>();
                projections.push(w.iter().zip(&u).map(|(a, b)| a * b).sum::<f64>());
            }
            let (mu, _) = mean_and_se(&projections);
            let projection_variance =
                projections.iter().map(|p| (p - mu) * (p - mu)).sum::<f64>() / (samples.max(2) - 1) as f64;
            let scale = projection_norm_sq.sqrt();
            let tail_fractions = [1.0, 2.0, 3.0].map(|lambda| {
                projections.iter().filter(|p| p.abs() >= lambda * scale).count() as f64 / samples as f64
            });
            Ok(SamplerRun {
                collection,
                frozen: cc.frozen_coords().len(),
                dense: cc.dense_constraints().len(),
                dim: basis.dim(),
                max_violation,
                mean_energy: energy / samples as f64,
                projection_variance,
                projection_norm_sq,
                tail_fractions,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let worst_violation = runs.iter().map(|r| r.max_violation).fold(0.0, f64::max);
    let worst_energy = runs
        .iter()
        .filter(|r| r.dim > 0)
        .map(|r| (r.mean_energy / r.dim as f64 - 1.0).abs())
        .fold(0.0, f64::max);
    let worst_variance = runs.iter().map(|r| r.projection_variance).fold(0.0, f64::max);
    // Gaussian tails: Pr[|<U, w>| >= lambda sigma] <= 2 exp(-lambda^2 / 2).
    let worst_tail = runs
        .iter()
        .filter(|r| r.projection_norm_sq > 0.0)
        .flat_map(|r| {
            r.tail_fractions
                .iter()
                .enumerate()
                .map(|(k, f)| f / (2.0 * (-((k + 1) as f64).powi(2) / 2.0).exp()))
                .collect::<Vec<_>>()
        })
        .fold(0.0, f64::max);
    let detail = format!("{} collections x {samples} samples", runs.len());
    let claims = vec![
        Claim::at_most("sample orthogonality to constraints", worst_violation, 1e-8, detail.clone()),
        Claim::at_most("|mean |U|^2 / dim - 1|", worst_energy, 0.05, detail.clone()),
        Claim::at_most("variance of <U, w>", worst_variance, 1.1, detail.clone()),
        Claim::at_most("tail fraction / 2exp(-lambda^2/2)", worst_tail, 1.0, detail),
    ];
    Ok(SamplerSuite { seed, samples, runs, claims })
}

// ---------------------------------------------------------------------------
// Full coloring

pub const SPENCER_SIZES: [usize; 2] = [64, 128];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpencerRun {
    pub trial: usize,
    pub n: usize,
    pub m: usize,
    pub instance_seed: u64,
    pub achieved_disc: u64,
    /// `achieved_disc / sqrt(n ln(2m/n))`.
    pub ratio: f64,
    pub phases: usize,
    pub restarts: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpencerSuite {
    pub seed: u64,
    pub k_emp: f64,
    pub runs: Vec<SpencerRun>,
    pub max_ratio: f64,
    /// Mean achieved discrepancy per entry of [`SPENCER_SIZES`].
    pub mean_disc: Vec<f64>,
    pub claims: Vec<Claim>,
}

pub fn normalized_disc(disc: u64, n: usize, m: usize) -> f64 {
    disc as f64 / full_coloring::theoretical_bound(1.0, n, m)
}

/// `trials` full colorings per size in [`SPENCER_SIZES`] on random
/// `n = m` instances with `p = 1/2`.
pub fn spencer_suite(trials: usize, seed: u64) -> Result<SpencerSuite> {
    check_trials(trials)?;
    let jobs: Vec<(usize, usize)> =
        SPENCER_SIZES.iter().flat_map(|&n| (0..trials).map(move |trial| (n, trial))).collect();
    let runs = jobs
        .into_par_iter()
        .map(|(n, trial)| {
            let instance_seed = rng::derive(seed, &[lane::TRIAL, SUITE_SPENCER, n as u64, trial as u64]);
            let sys = SetSystem::generate_random(n, n, 0.5, instance_seed)?;
            let report = full_coloring::full_color(&sys, &FullColoringParams::with_seed(instance_seed))?;
            let achieved_disc = oracle::recount_discrepancy(&sys, &report.coloring)?;
            Ok(SpencerRun {
                trial,
                n,
                m: n,
                instance_seed,
                achieved_disc,
                ratio: normalized_disc(achieved_disc, n, n),
                phases: report.iterations,
                restarts: report.phases.iter().map(|p| p.restarts + p.phase_retries).sum(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let max_ratio = runs.iter().map(|r| r.ratio).fold(0.0, f64::max);
    let mean_disc: Vec<f64> = SPENCER_SIZES
        .iter()
        .map(|&n| mean(runs.iter().filter(|r| r.n == n).map(|r| r.achieved_disc as f64)))
        .collect();
    let growth = mean_disc[1] / mean_disc[0];
    let claims = vec![
        Claim::at_most(
            "max disc / sqrt(n ln(2m/n))",
            max_ratio,
            K_EMP,
            format!("{trials} trials per size {SPENCER_SIZES:?}"),
        ),
        Claim::at_most(
            "mean disc(128) / mean disc(64)",
            growth,
            1.6,
            format!("means {:.3} and {:.3}", mean_disc[0], mean_disc[1]),
        ),
    ];
    Ok(SpencerSuite { seed, k_emp: K_EMP, runs, max_ratio, mean_disc, claims })
}

// ---------------------------------------------------------------------------
// Randomized rounding

pub const ROUNDING_VALUES: [f64; 3] = [0.92, 0.96, 1.0];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundingMean {
    pub value: f64,
    pub mean: f64,
    pub standard_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundingSuite {
    pub seed: u64,
    pub draws: usize,
    pub means: Vec<RoundingMean>,
    pub tail_trials: usize,
    pub tail_n: usize,
    pub tail_delta: f64,
    pub tail_fraction: f64,
    pub claims: Vec<Claim>,
}

/// Unbiasedness of [`full_coloring::round_coloring`] at fixed values, and
/// the chance that rounding a near-integral point moves some set sum by
/// more than `sqrt(n)`, on random `n = m` instances with
/// `delta = 1/(8 ln m)` and `|x_i|` uniform in `[1 - delta, 1]`.
pub fn rounding_suite(draws: usize, tail_trials: usize, tail_n: usize, seed: u64) -> Result<RoundingSuite> {
    check_trials(draws)?;
    check_trials(tail_trials)?;
    let means = ROUNDING_VALUES
        .iter()
        .enumerate()
        .map(|(k, &value)| {
            let mut rng = rng::stream(trial_seed(seed, SUITE_ROUNDING, k), &[lane::ROUND]);
            let mut total = 0i64;
            for _ in 0..draws {
                total += full_coloring::round_coloring(&[value], 0.1, &mut rng)?.values()[0] as i64;
            }
            Ok(RoundingMean {
                value,
                mean: total as f64 / draws as f64,
                standard_error: ((1.0 - value * value) / draws as f64).sqrt(),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let tail_delta = 1.0 / (8.0 * (tail_n as f64).ln());
    let exceeded = (0..tail_trials)
        .into_par_iter()
        .map(|trial| {
            let instance_seed = rng::derive(seed, &[lane::TRIAL, SUITE_ROUNDING, 1_000_000 + trial as u64]);
            let sys = SetSystem::generate_random(tail_n, tail_n, 0.5, instance_seed)?;
            let mut rng = rng::stream(instance_seed, &[lane::ROUND]);
            let x: Vec<f64> = (0..tail_n)
                .map(|_| {
                    let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
                    sign * (1.0 - tail_delta * rng.random::<f64>())
                })
                .collect();
            let chi = full_coloring::round_coloring(&x, tail_delta, &mut rng)?;
            let y: Vec<f64> = chi.values().iter().zip(&x).map(|(&c, &v)| c as f64 - v).collect();
            let limit = (tail_n as f64).sqrt();
            Ok(sys.set_sums(&y).iter().any(|s| s.abs() > limit))
        })
        .collect::<Result<Vec<bool>>>()?;
    let tail_fraction = exceeded.iter().filter(|&&e| e).count() as f64 / tail_trials as f64;

    let mut claims: Vec<Claim> = means
        .iter()
        .map(|r| {
            let deviation = (r.mean - r.value).abs();
            Claim::at_most(
                &format!("rounding bias at x = {}", r.value),
                deviation,
                3.0 * r.standard_error,
                format!("mean {:.4} over {draws} draws", r.mean),
            )
        })
        .collect();
    claims.push(Claim::at_most(
        "rounding tail Pr[max |<Y, v>| > sqrt(n)]",
        tail_fraction,
        0.5,
        format!("{tail_trials} trials, n = m = {tail_n}, delta = {tail_delta:.4}"),
    ));
    Ok(RoundingSuite { seed, draws, means, tail_trials, tail_n, tail_delta, tail_fraction, claims })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn claims_compare_in_the_right_direction() {
        assert!(Claim::at_most("a", 1.0, 1.0, String::new()).passed());
        assert!(!Claim::at_most("a", 1.1, 1.0, String::new()).passed());
        assert!(Claim::at_least("a", 0.5, 0.5, String::new()).passed());
        assert!(!Claim::at_least("a", 0.4, 0.5, String::new()).passed());
        assert!(Claim::at_most("x", 0.0, 0.0, "d".into()).line().starts_with("PASS x:"));
    }

    #[test]
    fn mean_and_standard_error() {
        let (m, se) = mean_and_se(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        assert!((se - (5.0f64 / 3.0 / 4.0).sqrt()).abs() < 1e-12);
        assert_eq!(mean_and_se(&[]), (0.0, 0.0));
    }

    #[test]
    fn zero_trials_are_rejected() {
        assert!(beck_fiala_suite(0, 1).is_err());
        assert!(walk_suite(0, 1).is_err());
        assert!(sampler_suite(1, 0, 1).is_err());
    }

    #[test]
    fn suites_do_not_depend_on_thread_count() {
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let three = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
        let a = one.install(|| beck_fiala_suite(20, 5).unwrap());
        let b = three.install(|| beck_fiala_suite(20, 5).unwrap());
        assert_eq!(a, b);
        let a = one.install(|| oracle_dominance_suite(6, 5).unwrap());
        let b = three.install(|| oracle_dominance_suite(6, 5).unwrap());
        assert_eq!(a, b);
    }

    #[test]
    fn small_sampler_suite_passes() {
        let suite = sampler_suite(3, 2000, 8).unwrap();
        assert!(suite.runs.iter().all(|r| r.max_violation < 1e-8));
        assert!(suite.runs.iter().all(|r| r.dim + r.frozen >= SAMPLER_N - r.dense));
    }

    #[test]
    fn rounding_at_one_is_exact() {
        let suite = rounding_suite(500, 10, 32, 3).unwrap();
        let at_one = suite.means.iter().find(|r| r.value == 1.0).unwrap();
        assert_eq!(at_one.mean, 1.0);
        assert_eq!(at_one.standard_error, 0.0);
        assert!(suite.claims.iter().all(Claim::passed));
    }

    #[test]
    fn normalization_matches_bound() {
        let r = normalized_disc(10, 64, 64);
        assert!((r - 10.0 / 6.6604368892615815).abs() < 1e-12);
    }
}
