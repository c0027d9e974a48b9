//! Random-walk partial coloring.
//!
//! Starting from `x0`, the walk takes `T` Gaussian steps of size `gamma`
//! inside the polytope
//!
//! ```text
//! P = { x : |x_i| <= 1,  |<x - x0, v_j>| <= c_j * |v_j| }
//! ```
//!
//! Each step is drawn from the subspace orthogonal to every constraint that
//! has come within `delta` of its face (a coordinate with `|x_i| >= 1 - delta`,
//! or a set with `|<x - x0, v_j>| >= (c_j - delta) |v_j|`). Once a constraint
//! is in its band it stays frozen, so the frozen sets only grow. An attempt
//! succeeds when the walk never left `P` and at least half the coordinates
//! ended in their band.
//!
//! [`WalkProblem::step`] is the literal single-step procedure: it rebuilds
//! the subspace every step. [`WalkProblem::run_attempt`] is the production
//! engine and produces the same process with far less work:
//!
//! * the subspace only changes when a constraint freezes, so its basis is
//!   rebuilt only at those events;
//! * between events, every coordinate and constraint value is a fixed linear
//!   functional of the Gaussian draws. Steps run in blocks of [`BLOCK`];
//!   functionals whose band is more than `screen_sigmas` block standard
//!   deviations away are only evaluated at the block end from the summed
//!   draws, the rest are tracked every step;
//! * if a screened functional is found past its band at the block end, the
//!   block is replayed step by step from the stored draws and cut at the
//!   first crossing.
//!
//! Both routes consume exactly `dim(V_t)` normals per step, in basis order,
//! from the same stream, so with the same seed they follow the same path up
//! to floating-point summation order.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{contract, Error, Result};
use crate::rng::{self, lane, StreamRng};
use crate::subspace::{self, axpy, dot, ConstraintCollection};

/// Horizon constant: `T = ceil(K1 / gamma^2)`.
pub const K1: f64 = 16.0 / 3.0;
/// Constant in `gamma = delta / sqrt(C * ln(2 + n m / delta))`.
pub const GAMMA_LOG_CONSTANT: f64 = 40.0;
/// Overshoot past a face tolerated as rounding error.
pub const POLYTOPE_SLACK: f64 = 1e-9;
/// Steps per screening block.
pub const BLOCK: usize = 64;
/// Default screening distance, in block standard deviations.
pub const DEFAULT_SCREEN_SIGMAS: f64 = 12.0;

const NESTING_TOLERANCE: f64 = 1e-9;

/// `gamma` for a walk over `n` coordinates and `m` constraint vectors.
pub fn step_size(n: usize, m: usize, delta: f64) -> f64 {
    let nm = n as f64 * m as f64;
    delta / (GAMMA_LOG_CONSTANT * (2.0 + nm / delta).ln()).sqrt()
}

/// `T = ceil(K1 / gamma^2)`.
pub fn horizon(gamma: f64) -> u64 {
    (K1 / (gamma * gamma)).ceil() as u64
}

/// `sum_j exp(-c_j^2 / 16)`, which must not exceed `n / 16`.
pub fn feasibility_sum(thresholds: &[f64]) -> f64 {
    thresholds.iter().map(|c| (-c * c / 16.0).exp()).sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WalkParams {
    pub delta: f64,
    pub gamma: f64,
    pub steps: u64,
    /// One threshold per constraint vector, in units of that vector's norm.
    pub thresholds: Vec<f64>,
    /// Extra attempts after the first one fails.
    pub max_restarts: usize,
    pub seed: u64,
    /// `None` evaluates every functional at every step.
    pub screen_sigmas: Option<f64>,
}

impl WalkParams {
    /// Derives `gamma` and `T` from `(n, m = vectors.len(), delta)` and
    /// checks the thresholds.
    pub fn derive(n: usize, vectors: &[Vec<f64>], delta: f64, thresholds: Vec<f64>, seed: u64) -> Result<Self> {
        check_delta(delta)?;
        let gamma = step_size(n, vectors.len(), delta);
        let params = Self {
            delta,
            gamma,
            steps: horizon(gamma),
            thresholds,
            max_restarts: 50,
            seed,
            screen_sigmas: Some(DEFAULT_SCREEN_SIGMAS),
        };
        params.validate(n, vectors.len())?;
        Ok(params)
    }

    pub fn with_max_restarts(mut self, max_restarts: usize) -> Self {
        self.max_restarts = max_restarts;
        self
    }

    pub fn with_screening(mut self, screen_sigmas: Option<f64>) -> Self {
        self.screen_sigmas = screen_sigmas;
        self
    }

    pub fn validate(&self, n: usize, m: usize) -> Result<()> {
        check_delta(self.delta)?;
        if !(self.gamma > 0.0) || self.steps == 0 {
            return Err(contract("step size and step count must be positive"));
        }
        if self.thresholds.len() != m {
            return Err(contract(format!("{} thresholds for {m} constraint vectors", self.thresholds.len())));
        }
        if self.thresholds.iter().any(|c| !(*c >= 0.0)) {
            return Err(contract("thresholds must be non-negative"));
        }
        let budget = n as f64 / 16.0;
        let total = feasibility_sum(&self.thresholds);
        if total > budget * (1.0 + 1e-9) {
            return Err(contract(format!("threshold feasibility fails: sum exp(-c^2/16) = {total} > n/16 = {budget}")));
        }
        Ok(())
    }
}

fn check_delta(delta: f64) -> Result<()> {
    if delta > 0.0 && delta < 0.1 {
        Ok(())
    } else {
        Err(contract(format!("delta = {delta} outside (0, 0.1)")))
    }
}

/// Validated walk inputs: constraint vectors with their norms, the start
/// point and the parameters.
#[derive(Debug, Clone)]
pub struct WalkProblem {
    n: usize,
    vectors: Vec<Vec<f64>>,
    norms: Vec<f64>,
    x0: Vec<f64>,
    params: WalkParams,
}

impl WalkProblem {
    pub fn new(vectors: Vec<Vec<f64>>, x0: &[f64], params: WalkParams) -> Result<Self> {
        let n = x0.len();
        if n == 0 {
            return Err(contract("walk needs at least one coordinate"));
        }
        if let Some(i) = x0.iter().position(|x| !(x.abs() <= 1.0)) {
            return Err(contract(format!("start point coordinate {} = {} outside [-1, 1]", i + 1, x0[i])));
        }
        let mut norms = Vec::with_capacity(vectors.len());
        for (j, v) in vectors.iter().enumerate() {
            if v.len() != n {
                return Err(contract(format!("vector {} has length {}, expected {n}", j + 1, v.len())));
            }
            let norm = dot(v, v).sqrt();
            if norm == 0.0 {
                return Err(contract(format!("vector {} is zero", j + 1)));
            }
            norms.push(norm);
        }
        params.validate(n, vectors.len())?;
        Ok(Self { n, vectors, norms, x0: x0.to_vec(), params })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.vectors.len()
    }

    pub fn params(&self) -> &WalkParams {
        &self.params
    }

    pub fn vectors(&self) -> &[Vec<f64>] {
        &self.vectors
    }

    pub fn x0(&self) -> &[f64] {
        &self.x0
    }

    fn var_band(&self) -> f64 {
        1.0 - self.params.delta
    }

    fn disc_band(&self, j: usize) -> f64 {
        (self.params.thresholds[j] - self.params.delta) * self.norms[j]
    }

    fn disc_face(&self, j: usize) -> f64 {
        self.params.thresholds[j] * self.norms[j]
    }

    /// `<x - x0, v_j>` for every constraint.
    pub fn offsets(&self, x: &[f64]) -> Vec<f64> {
        let shift: Vec<f64> = x.iter().zip(&self.x0).map(|(a, b)| a - b).collect();
        self.vectors.iter().map(|v| dot(&shift, v)).collect()
    }

    pub fn start(&self) -> WalkState {
        WalkState {
            t: 0,
            x: self.x0.clone(),
            frozen_vars: Vec::new(),
            frozen_disc: Vec::new(),
            in_polytope: true,
            exit_step: None,
        }
    }

    /// Recomputes the frozen sets from `state.x`, keeping earlier members
    /// and checking that they are still inside their bands.
    fn refresh_frozen(&self, state: &mut WalkState, offsets: &[f64]) -> Result<()> {
        let band = self.var_band();
        let mut vars = vec![false; self.n];
        for &i in &state.frozen_vars {
            if state.x[i].abs() < band - NESTING_TOLERANCE {
                return Err(Error::Invariant(format!(
                    "step {}: frozen coordinate {} left its band (|x| = {})",
                    state.t,
                    i + 1,
                    state.x[i].abs()
                )));
            }
            vars[i] = true;
        }
        for (i, x) in state.x.iter().enumerate() {
            if x.abs() >= band {
                vars[i] = true;
            }
        }
        let mut disc = vec![false; self.m()];
        for &j in &state.frozen_disc {
            if offsets[j].abs() < self.disc_band(j) - NESTING_TOLERANCE {
                return Err(Error::Invariant(format!(
                    "step {}: frozen constraint {} left its band",
                    state.t,
                    j + 1
                )));
            }
            disc[j] = true;
        }
        for (j, f) in offsets.iter().enumerate() {
            if f.abs() >= self.disc_band(j) {
                disc[j] = true;
            }
        }
        state.frozen_vars = (0..self.n).filter(|&i| vars[i]).collect();
        state.frozen_disc = (0..self.m()).filter(|&j| disc[j]).collect();
        Ok(())
    }

    fn constraints(&self, state: &WalkState) -> ConstraintCollection {
        let dense = state.frozen_disc.iter().map(|&j| self.vectors[j].clone()).collect();
        ConstraintCollection::new(self.n, state.frozen_vars.clone(), dense)
            .expect("frozen sets are built from valid indices")
    }

    /// Clamps coordinates within slack of a face; reports whether `x` is
    /// still inside the polytope.
    fn settle(&self, x: &mut [f64], offsets: &[f64]) -> bool {
        let mut inside = true;
        for xi in x.iter_mut() {
            if xi.abs() > 1.0 {
                if xi.abs() <= 1.0 + POLYTOPE_SLACK {
                    *xi = xi.clamp(-1.0, 1.0);
                } else {
                    inside = false;
                }
            }
        }
        for (j, f) in offsets.iter().enumerate() {
            if f.abs() > self.disc_face(j) + POLYTOPE_SLACK {
                inside = false;
            }
        }
        inside
    }

    /// One step of the walk, rebuilding the subspace from scratch. Returns
    /// the dimension of the subspace the step was drawn from.
    pub fn step<R: Rng + ?Sized>(&self, state: &mut WalkState, rng: &mut R) -> Result<usize> {
        if state.t >= self.params.steps || !state.in_polytope {
            return Err(contract("step called on a finished walk"));
        }
        let offsets = self.offsets(&state.x);
        self.refresh_frozen(state, &offsets)?;
        let basis = subspace::build_basis(self.n, &self.constraints(state));
        let u = subspace::sample_gaussian(&basis, rng);
        axpy(self.params.gamma, &u, &mut state.x);
        state.t += 1;
        let offsets = self.offsets(&state.x);
        if !self.settle(&mut state.x, &offsets) {
            state.in_polytope = false;
            state.exit_step = Some(state.t);
        }
        Ok(basis.dim())
    }

    /// One walk from `x0` on the stream of `attempt`.
    pub fn run_attempt(&self, attempt: usize) -> Result<AttemptOutcome> {
        let mut rng = rng::stream(self.params.seed, &[lane::WALK, attempt as u64]);
        Engine::new(self).run(&mut rng, attempt)
    }

    /// The literal walk built from [`WalkProblem::step`]; same stream as
    /// [`WalkProblem::run_attempt`].
    pub fn run_attempt_stepwise(&self, attempt: usize) -> Result<AttemptOutcome> {
        let mut rng = rng::stream(self.params.seed, &[lane::WALK, attempt as u64]);
        let mut state = self.start();
        let mut dim_steps = 0u128;
        let mut events = 0usize;
        let mut last = (0, 0);
        while state.t < self.params.steps && state.in_polytope {
            let dim = self.step(&mut state, &mut rng)?;
            let counts = (state.frozen_vars.len(), state.frozen_disc.len());
            if counts != last {
                events += 1;
                last = counts;
            }
            if dim == 0 {
                break;
            }
            dim_steps += dim as u128;
        }
        let offsets = self.offsets(&state.x);
        if state.in_polytope {
            self.refresh_frozen(&mut state, &offsets)?;
        }
        Ok(self.outcome(attempt, state, dim_steps, events))
    }

    fn outcome(&self, attempt: usize, state: WalkState, dim_steps: u128, rebuilds: usize) -> AttemptOutcome {
        let frozen_var_count = state.frozen_vars.len();
        let success = state.in_polytope && frozen_var_count >= self.n.div_ceil(2);
        AttemptOutcome {
            attempt,
            success,
            frozen_var_count,
            frozen_disc_count: state.frozen_disc.len(),
            steps_taken: state.t,
            polytope_exit_step: state.exit_step,
            subspace_rebuilds: rebuilds,
            dim_steps,
            x: state.x,
        }
    }
}

/// Mutable state of one walk.
#[derive(Debug, Clone, PartialEq)]
pub struct WalkState {
    pub t: u64,
    pub x: Vec<f64>,
    /// Frozen coordinates, sorted, 0-based.
    pub frozen_vars: Vec<usize>,
    /// Frozen constraint indices, sorted.
    pub frozen_disc: Vec<usize>,
    pub in_polytope: bool,
    pub exit_step: Option<u64>,
}

/// Everything one attempt produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttemptOutcome {
    pub attempt: usize,
    pub success: bool,
    pub frozen_var_count: usize,
    pub frozen_disc_count: usize,
    pub steps_taken: u64,
    pub polytope_exit_step: Option<u64>,
    pub subspace_rebuilds: usize,
    /// `sum_t dim(V_t)` over the steps taken.
    pub dim_steps: u128,
    pub x: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartialColoringResult {
    pub x_final: Vec<f64>,
    pub success: bool,
    pub frozen_var_count: usize,
    pub frozen_disc_count: usize,
    pub steps_taken: u64,
    pub polytope_exit_step: Option<u64>,
    pub restarts_used: usize,
}

impl From<&AttemptOutcome> for PartialColoringResult {
    fn from(a: &AttemptOutcome) -> Self {
        Self {
            x_final: a.x.clone(),
            success: a.success,
            frozen_var_count: a.frozen_var_count,
            frozen_disc_count: a.frozen_disc_count,
            steps_taken: a.steps_taken,
            polytope_exit_step: a.polytope_exit_step,
            restarts_used: a.attempt,
        }
    }
}

/// Runs attempts `0, 1, ...` until one succeeds or `1 + max_restarts`
/// attempts have failed; returns the first success or the last failure.
pub fn partial_color(vectors: Vec<Vec<f64>>, x0: &[f64], params: WalkParams) -> Result<PartialColoringResult> {
    let problem = WalkProblem::new(vectors, x0, params)?;
    let mut last = None;
    for attempt in 0..=problem.params.max_restarts {
        let outcome = problem.run_attempt(attempt)?;
        let done = outcome.success;
        last = Some(outcome);
        if done {
            break;
        }
    }
    Ok(PartialColoringResult::from(&last.expect("at least one attempt runs")))
}

#[derive(Clone, Copy, Debug)]
enum Target {
    Coord(usize),
    Disc(usize),
}

/// Linear functionals of the current subspace: one row per free
/// coordinate and per unfrozen constraint.
struct Frame {
    dim: usize,
    rows: Vec<f64>,
    targets: Vec<Target>,
    band: Vec<f64>,
    face: Vec<f64>,
    sigma: Vec<f64>,
    values: Vec<f64>,
}

impl Frame {
    fn row(&self, r: usize) -> &[f64] {
        &self.rows[r * self.dim..(r + 1) * self.dim]
    }

    fn len(&self) -> usize {
        self.targets.len()
    }
}

enum BlockEnd {
    Quiet,
    Event,
    Exit,
}

struct Engine<'a> {
    p: &'a WalkProblem,
    state: WalkState,
    offsets: Vec<f64>,
    dim_steps: u128,
    rebuilds: usize,
}

impl<'a> Engine<'a> {
    fn new(p: &'a WalkProblem) -> Self {
        Self { p, state: p.start(), offsets: vec![0.0; p.m()], dim_steps: 0, rebuilds: 0 }
    }

    fn run(mut self, rng: &mut StreamRng, attempt: usize) -> Result<AttemptOutcome> {
        let steps = self.p.params.steps;
        loop {
            self.offsets = self.p.offsets(&self.state.x);
            self.p.refresh_frozen(&mut self.state, &self.offsets)?;
            if self.state.t >= steps {
                break;
            }
            let mut frame = self.frame();
            if frame.dim == 0 {
                break;
            }
            self.rebuilds += 1;
            let end = loop {
                match self.block(&mut frame, rng)? {
                    BlockEnd::Quiet if self.state.t < steps => continue,
                    other => break other,
                }
            };
            if let BlockEnd::Exit = end {
                self.state.in_polytope = false;
                self.state.exit_step = Some(self.state.t);
                break;
            }
        }
        let Self { p, state, dim_steps, rebuilds, .. } = self;
        Ok(p.outcome(attempt, state, dim_steps, rebuilds))
    }

    fn frame(&self) -> Frame {
        let p = self.p;
        let (free, basis) = subspace::compact_basis(p.n, &p.constraints(&self.state), None);
        let dim = basis.len();
        let mut frame = Frame {
            dim,
            rows: Vec::new(),
            targets: Vec::new(),
            band: Vec::new(),
            face: Vec::new(),
            sigma: Vec::new(),
            values: Vec::new(),
        };
        if dim == 0 {
            return frame;
        }
        for (pos, &i) in free.iter().enumerate() {
            frame.rows.extend(basis.iter().map(|b| b[pos]));
            frame.targets.push(Target::Coord(i));
            frame.band.push(p.var_band());
            frame.face.push(1.0);
            frame.values.push(self.state.x[i]);
        }
        let mut frozen = vec![false; p.m()];
        for &j in &self.state.frozen_disc {
            frozen[j] = true;
        }
        for j in (0..p.m()).filter(|&j| !frozen[j]) {
            let v = &p.vectors[j];
            frame.rows.extend(basis.iter().map(|b| free.iter().zip(b).map(|(&i, bk)| v[i] * bk).sum::<f64>()));
            frame.targets.push(Target::Disc(j));
            frame.band.push(p.disc_band(j));
            frame.face.push(p.disc_face(j));
            frame.values.push(self.offsets[j]);
        }
        frame.sigma = (0..frame.len()).map(|r| dot(frame.row(r), frame.row(r)).sqrt()).collect();
        frame
    }

    /// Runs up to one block of steps in the current subspace and commits
    /// them to the walk state.
    fn block(&mut self, frame: &mut Frame, rng: &mut StreamRng) -> Result<BlockEnd> {
        let gamma = self.p.params.gamma;
        let dim = frame.dim;
        let len = (self.p.params.steps - self.state.t).min(BLOCK as u64) as usize;
        let reach = self.p.params.screen_sigmas.map(|z| z * gamma * (len as f64).sqrt());
        let tracked: Vec<usize> = (0..frame.len())
            .filter(|&r| match reach {
                Some(reach) => frame.band[r] - frame.values[r].abs() < reach * frame.sigma[r],
                None => true,
            })
            .collect();

        let mut draws = vec![0.0; len * dim];
        let mut sum = vec![0.0; dim];
        let mut tracked_values: Vec<f64> = tracked.iter().map(|&r| frame.values[r]).collect();
        let mut taken = len;
        let mut end = BlockEnd::Quiet;
        for s in 0..len {
            let g = &mut draws[s * dim..(s + 1) * dim];
            for gk in g.iter_mut() {
                *gk = rng.sample(StandardNormal);
            }
            axpy(1.0, g, &mut sum);
            for (value, &r) in tracked_values.iter_mut().zip(&tracked) {
                *value += gamma * dot(frame.row(r), g);
                if value.abs() > frame.face[r] + POLYTOPE_SLACK {
                    end = BlockEnd::Exit;
                } else if value.abs() >= frame.band[r] && !matches!(end, BlockEnd::Exit) {
                    end = BlockEnd::Event;
                }
            }
            if !matches!(end, BlockEnd::Quiet) {
                taken = s + 1;
                break;
            }
        }

        let mut next: Vec<f64> = (0..frame.len())
            .map(|r| frame.values[r] + gamma * dot(frame.row(r), &sum))
            .collect();
        for (value, &r) in tracked_values.iter().zip(&tracked) {
            next[r] = *value;
        }
        let missed = matches!(end, BlockEnd::Quiet)
            && (0..frame.len()).any(|r| next[r].abs() >= frame.band[r]);
        if missed {
            let (steps, replay_end, values) = Self::replay(frame, &draws[..taken * dim], gamma);
            taken = steps;
            end = replay_end;
            next = values;
        }

        self.state.t += taken as u64;
        self.dim_steps += (dim * taken) as u128;
        frame.values = next;
        for (r, target) in frame.targets.iter().enumerate() {
            match *target {
                Target::Coord(i) => self.state.x[i] = frame.values[r],
                Target::Disc(j) => self.offsets[j] = frame.values[r],
            }
        }
        if matches!(end, BlockEnd::Exit) {
            return Ok(end);
        }
        for xi in self.state.x.iter_mut() {
            if xi.abs() > 1.0 {
                *xi = xi.clamp(-1.0, 1.0);
            }
        }
        self.check_frozen_constraints()?;
        Ok(end)
    }

    /// Step-by-step evaluation of every row over stored draws, stopping at
    /// the first band crossing or exit.
    fn replay(frame: &Frame, draws: &[f64], gamma: f64) -> (usize, BlockEnd, Vec<f64>) {
        let dim = frame.dim;
        let mut values = frame.values.clone();
        let steps = draws.len() / dim;
        for s in 0..steps {
            let g = &draws[s * dim..(s + 1) * dim];
            let mut end = BlockEnd::Quiet;
            for (r, value) in values.iter_mut().enumerate() {
                *value += gamma * dot(frame.row(r), g);
                if value.abs() > frame.face[r] + POLYTOPE_SLACK {
                    end = BlockEnd::Exit;
                } else if value.abs() >= frame.band[r] && !matches!(end, BlockEnd::Exit) {
                    end = BlockEnd::Event;
                }
            }
            if !matches!(end, BlockEnd::Quiet) {
                return (s + 1, end, values);
            }
        }
        (steps, BlockEnd::Quiet, values)
    }

    /// Frozen constraints must stay in their bands; recomputed from `x`.
    fn check_frozen_constraints(&self) -> Result<()> {
        let p = self.p;
        for &j in &self.state.frozen_disc {
            let f: f64 = p.vectors[j].iter().zip(self.state.x.iter().zip(&p.x0)).map(|(v, (x, x0))| v * (x - x0)).sum();
            if f.abs() < p.disc_band(j) - NESTING_TOLERANCE {
                return Err(Error::Invariant(format!("step {}: frozen constraint {} left its band", self.state.t, j + 1)));
            }
        }
        for &i in &self.state.frozen_vars {
            if self.state.x[i].abs() < p.var_band() {
                return Err(Error::Invariant(format!("step {}: frozen coordinate {} moved", self.state.t, i + 1)));
            }
        }
        Ok(())
    }
}
