//! Exhaustive minimum discrepancy and independent result checkers.
//!
//! Nothing here reuses the solver code paths: sets are turned into bit masks
//! and discrepancies are counted with popcounts, or accumulated point by
//! point, so these routines can serve as oracles for the solvers.

use serde::{Deserialize, Serialize};

use crate::error::{contract, Error, Result};
use crate::partial_coloring::{PartialColoringResult, WalkParams};
use crate::set_system::{Coloring, SetSystem};

pub const DEFAULT_LIMIT: usize = 20;
/// Hard ceiling regardless of the caller's limit; masks are 64-bit.
const MASK_LIMIT: usize = 40;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OracleResult {
    pub min_disc: u64,
    pub witness: Coloring,
    pub colorings_examined: u64,
}

fn masks(sets: impl Iterator<Item = u64>) -> Vec<(u64, i64)> {
    sets.map(|m| (m, m.count_ones() as i64)).collect()
}

/// Discrepancy of the coloring whose `-1` points are `neg`, giving up as
/// soon as it reaches `cutoff`.
#[inline]
fn masked_disc(sets: &[(u64, i64)], offsets: Option<&[i64]>, neg: u64, cutoff: u64) -> u64 {
    let mut worst = 0;
    for (j, &(mask, size)) in sets.iter().enumerate() {
        let base = offsets.map_or(0, |o| o[j]);
        let sum = base + size - 2 * (mask & neg).count_ones() as i64;
        worst = worst.max(sum.unsigned_abs());
        if worst >= cutoff {
            break;
        }
    }
    worst
}

/// Minimum discrepancy over all colorings with `chi_1 = +1` (the global
/// minimum, by sign symmetry).
///
/// Coloring number `c` puts point `i + 1` at `-1` exactly when bit `i` of
/// `c` is set; bit 0 is always clear. The witness is the optimum with the
/// smallest counter.
pub fn min_discrepancy_bruteforce(sys: &SetSystem, limit: usize) -> Result<OracleResult> {
    let n = sys.n();
    if n > limit.min(MASK_LIMIT) {
        return Err(Error::TooLarge { n, limit: limit.min(MASK_LIMIT) });
    }
    let sets = masks(sys.sets().iter().map(|s| s.iter().fold(0u64, |acc, &i| acc | 1 << i)));
    let total: u64 = if n == 0 { 1 } else { 1 << (n - 1) };
    let mut best = u64::MAX;
    let mut best_neg = 0;
    for c in 0..total {
        let neg = c << 1;
        let d = masked_disc(&sets, None, neg, best);
        if d < best {
            best = d;
            best_neg = neg;
            if best == 0 {
                // Nothing can beat zero, and later counters cannot become the
                // smallest-counter witness.
                return Ok(OracleResult { min_disc: 0, witness: from_mask(n, best_neg), colorings_examined: c + 1 });
            }
        }
    }
    Ok(OracleResult { min_disc: best, witness: from_mask(n, best_neg), colorings_examined: total })
}

fn from_mask(n: usize, neg: u64) -> Coloring {
    Coloring::new((0..n).map(|i| if neg >> i & 1 == 1 { -1 } else { 1 }).collect())
        .expect("entries are ±1")
}

/// Completes a partial `±1` assignment optimally: every `None` entry is
/// tried both ways. Returns the completed coloring and its discrepancy.
pub fn best_completion(sys: &SetSystem, fixed: &[Option<i8>], limit: usize) -> Result<(Coloring, u64)> {
    if fixed.len() != sys.n() {
        return Err(contract("partial assignment length differs from n"));
    }
    let free: Vec<usize> = (0..sys.n()).filter(|&i| fixed[i].is_none()).collect();
    if free.len() > limit.min(MASK_LIMIT) {
        return Err(Error::TooLarge { n: free.len(), limit: limit.min(MASK_LIMIT) });
    }
    let mut position = vec![usize::MAX; sys.n()];
    for (k, &i) in free.iter().enumerate() {
        position[i] = k;
    }
    let mut offsets = Vec::with_capacity(sys.m());
    let mut free_masks = Vec::with_capacity(sys.m());
    for set in sys.sets() {
        let mut offset = 0i64;
        let mut mask = 0u64;
        for &i in set {
            match fixed[i] {
                Some(s) => offset += s as i64,
                None => mask |= 1 << position[i],
            }
        }
        offsets.push(offset);
        free_masks.push(mask);
    }
    let sets = masks(free_masks.into_iter());
    let mut best = u64::MAX;
    let mut best_neg = 0u64;
    for neg in 0..(1u64 << free.len()) {
        let d = masked_disc(&sets, Some(&offsets), neg, best);
        if d < best {
            best = d;
            best_neg = neg;
        }
    }
    let mut values: Vec<i8> = fixed.iter().map(|s| s.unwrap_or(1)).collect();
    for (k, &i) in free.iter().enumerate() {
        if best_neg >> k & 1 == 1 {
            values[i] = -1;
        }
    }
    let chi = Coloring::new(values)?;
    Ok((chi, if sys.m() == 0 { 0 } else { best }))
}

/// Discrepancy recomputed point by point (each point adds its sign to every
/// set that contains it), independent of [`SetSystem::discrepancy`].
pub fn recount_discrepancy(sys: &SetSystem, chi: &Coloring) -> Result<u64> {
    if chi.len() != sys.n() {
        return Err(contract("coloring length differs from n"));
    }
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); sys.n()];
    for (j, set) in sys.sets().iter().enumerate() {
        for &i in set {
            members[i].push(j);
        }
    }
    let mut sums = vec![0i64; sys.m()];
    for (i, sets) in members.iter().enumerate() {
        for &j in sets {
            sums[j] += chi.values()[i] as i64;
        }
    }
    Ok(sums.into_iter().map(i64::unsigned_abs).max().unwrap_or(0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartialVerdict {
    pub pass: bool,
    pub frozen_count: usize,
    pub reasons: Vec<String>,
}

/// Rechecks a partial coloring: every `|<x - x0, v_j>| <= c_j |v_j| + 1e-9`,
/// every `|x_i| <= 1 + 1e-9`, and at least `ceil(n/2)` coordinates with
/// `|x_i| >= 1 - delta`.
pub fn verify_partial(
    result: &PartialColoringResult,
    vectors: &[Vec<f64>],
    x0: &[f64],
    params: &WalkParams,
) -> PartialVerdict {
    let x = &result.x_final;
    let mut reasons = Vec::new();
    if x.len() != x0.len() {
        reasons.push(format!("point has length {}, start has length {}", x.len(), x0.len()));
        return PartialVerdict { pass: false, frozen_count: 0, reasons };
    }
    if params.thresholds.len() != vectors.len() {
        reasons.push(format!("{} thresholds for {} vectors", params.thresholds.len(), vectors.len()));
        return PartialVerdict { pass: false, frozen_count: 0, reasons };
    }
    for (i, xi) in x.iter().enumerate() {
        if xi.abs() > 1.0 + 1e-9 {
            reasons.push(format!("coordinate {} = {xi} outside [-1, 1]", i + 1));
        }
    }
    for (j, (v, c)) in vectors.iter().zip(&params.thresholds).enumerate() {
        let mut drift = 0.0;
        let mut norm_sq = 0.0;
        for k in 0..x.len() {
            drift += (x[k] - x0[k]) * v[k];
            norm_sq += v[k] * v[k];
        }
        let limit = c * norm_sq.sqrt();
        if drift.abs() > limit + 1e-9 {
            reasons.push(format!("constraint {} violated: |<x - x0, v>| = {} > {limit}", j + 1, drift.abs()));
        }
    }
    let frozen_count = x.iter().filter(|xi| xi.abs() >= 1.0 - params.delta).count();
    let needed = x.len().div_ceil(2);
    if frozen_count < needed {
        reasons.push(format!("only {frozen_count} coordinates within delta of ±1, need {needed}"));
    }
    PartialVerdict { pass: reasons.is_empty(), frozen_count, reasons }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// All 2^n colorings, no symmetry reduction.
    fn min_over_all(sys: &SetSystem) -> u64 {
        (0..1u64 << sys.n())
            .map(|neg| sys.discrepancy(&from_mask(sys.n(), neg)).unwrap())
            .min()
            .unwrap()
    }

    #[test]
    fn pair_has_zero_discrepancy() {
        let sys = SetSystem::from_one_based(2, &[&[1, 2]]).unwrap();
        let r = min_discrepancy_bruteforce(&sys, DEFAULT_LIMIT).unwrap();
        assert_eq!(r.min_disc, 0);
        assert_eq!(r.witness.values(), &[1, -1]);
    }

    #[test]
    fn triangle_minimum_is_two() {
        let sys = SetSystem::from_one_based(3, &[&[1, 2], &[2, 3], &[1, 3]]).unwrap();
        let r = min_discrepancy_bruteforce(&sys, DEFAULT_LIMIT).unwrap();
        assert_eq!(r.min_disc, 2);
        assert_eq!(sys.discrepancy(&r.witness).unwrap(), 2);
        assert_eq!(min_over_all(&sys), 2);
    }

    #[test]
    fn odd_set_has_minimum_one() {
        for k in [1usize, 3, 5, 7] {
            let set: Vec<usize> = (1..=k).collect();
            let sys = SetSystem::from_one_based(k, &[&set]).unwrap();
            assert_eq!(min_discrepancy_bruteforce(&sys, DEFAULT_LIMIT).unwrap().min_disc, 1);
        }
    }

    #[test]
    fn refuses_large_universes() {
        let sys = SetSystem::new(21, vec![]).unwrap();
        assert_eq!(min_discrepancy_bruteforce(&sys, DEFAULT_LIMIT), Err(Error::TooLarge { n: 21, limit: 20 }));
        assert!(min_discrepancy_bruteforce(&sys, 24).is_ok());
    }

    #[test]
    fn completion_respects_fixed_points() {
        let sys = SetSystem::from_one_based(4, &[&[1, 2, 3], &[3, 4], &[1, 4]]).unwrap();
        let (chi, d) = best_completion(&sys, &[Some(1), Some(1), None, None], 20).unwrap();
        assert_eq!(&chi.values()[..2], &[1, 1]);
        assert_eq!(d, sys.discrepancy(&chi).unwrap());
        let exhaustive = (0..4u64)
            .map(|b| {
                let c = Coloring::new(vec![1, 1, if b & 1 == 1 { -1 } else { 1 }, if b & 2 == 2 { -1 } else { 1 }]).unwrap();
                sys.discrepancy(&c).unwrap()
            })
            .min()
            .unwrap();
        assert_eq!(d, exhaustive);
    }

    #[test]
    fn verify_partial_flags_violations() {
        let vectors = vec![vec![1.0, 1.0, 0.0, 0.0]];
        let params = WalkParams::derive(4, &vectors, 0.05, vec![8.0 * 2f64.ln().sqrt()], 0).unwrap();
        let limit = params.thresholds[0] * 2f64.sqrt();
        let x0 = vec![0.0; 4];

        let good = PartialColoringResult {
            x_final: vec![1.0, -1.0, 0.97, 0.2],
            success: true,
            frozen_var_count: 3,
            frozen_disc_count: 0,
            steps_taken: 10,
            polytope_exit_step: None,
            restarts_used: 0,
        };
        assert!(verify_partial(&good, &vectors, &x0, &params).pass);

        // Shifting x0 pushes the drift 0.1 past the face.
        let a = (limit + 0.1) / 2.0;
        let shifted_x0 = vec![-a, -a, 0.0, 0.0];
        let mut bad = good.clone();
        bad.x_final = vec![0.0, 0.0, 1.0, 1.0];
        let v = verify_partial(&bad, &vectors, &shifted_x0, &params);
        assert!(!v.pass);
        assert!(v.reasons.iter().any(|r| r.starts_with("constraint 1")), "{:?}", v.reasons);

        let mut interior = good.clone();
        interior.x_final = vec![0.1, -0.2, 0.3, 0.0];
        let interior_x0 = interior.x_final.clone();
        let v = verify_partial(&interior, &vectors, &interior_x0, &params);
        assert!(!v.pass);
        assert_eq!(v.frozen_count, 0);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]
        #[test]
        fn symmetry_reduction_finds_global_minimum(
            n in 1usize..10,
            sets in proptest::collection::vec(proptest::collection::vec(0usize..10, 0..7), 0..7),
        ) {
            let sets = sets.into_iter().map(|s| s.into_iter().filter(|&i| i < n).collect()).collect();
            let sys = SetSystem::new(n, sets).unwrap();
            let r = min_discrepancy_bruteforce(&sys, DEFAULT_LIMIT).unwrap();
            prop_assert_eq!(r.min_disc, min_over_all(&sys));
            prop_assert_eq!(sys.discrepancy(&r.witness).unwrap(), r.min_disc);
            prop_assert_eq!(r.witness.values()[0], 1);
        }

        #[test]
        fn recount_agrees_with_discrepancy(
            n in 1usize..30,
            seed in 0u64..1000,
            signs in proptest::collection::vec(proptest::bool::ANY, 30),
        ) {
            let sys = SetSystem::generate_random(n, 12, 0.4, seed).unwrap();
            let chi = Coloring::new(signs[..n].iter().map(|&b| if b { 1 } else { -1 }).collect()).unwrap();
            prop_assert_eq!(recount_discrepancy(&sys, &chi).unwrap(), sys.discrepancy(&chi).unwrap());
            prop_assert_eq!(sys.discrepancy(&chi.negated()).unwrap(), sys.discrepancy(&chi).unwrap());
            let biggest = sys.sets().iter().map(Vec::len).max().unwrap_or(0) as u64;
            prop_assert!(sys.discrepancy(&chi).unwrap() <= biggest);
            let x = chi.to_f64();
            prop_assert_eq!(sys.fractional_discrepancy(&x).unwrap(), sys.discrepancy(&chi).unwrap() as f64);
        }
    }
}
