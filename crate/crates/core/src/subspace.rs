//! Orthonormal bases for the directions left free by a set of linear
//! constraints, and Gaussian sampling inside them.
//!
//! Constraints come in two kinds: frozen coordinates (`u_i = 0`) and dense
//! vectors (`<u, v> = 0`). Frozen coordinates are handled by working in the
//! free coordinates only. Dense vectors, restricted to those coordinates,
//! are orthonormalized with twice-iterated modified Gram-Schmidt; a vector
//! whose residual falls below [`RANK_TOLERANCE`] times its original norm is
//! dependent and dropped. The complement is then completed from the standard
//! basis vectors, always taking the candidate with the largest residual.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{contract, Result};

/// Relative residual below which a constraint counts as dependent.
pub const RANK_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ConstraintCollection {
    frozen_coords: Vec<usize>,
    dense: Vec<Vec<f64>>,
}

impl ConstraintCollection {
    /// `frozen_coords` are 0-based; duplicates are removed.
    pub fn new(n: usize, mut frozen_coords: Vec<usize>, dense: Vec<Vec<f64>>) -> Result<Self> {
        frozen_coords.sort_unstable();
        frozen_coords.dedup();
        if frozen_coords.last().is_some_and(|&i| i >= n) {
            return Err(contract(format!("frozen coordinate outside dimension {n}")));
        }
        if let Some(k) = dense.iter().position(|v| v.len() != n) {
            return Err(contract(format!("dense constraint {} has length {}, expected {n}", k + 1, dense[k].len())));
        }
        Ok(Self { frozen_coords, dense })
    }

    pub fn frozen_coords(&self) -> &[usize] {
        &self.frozen_coords
    }

    pub fn dense_constraints(&self) -> &[Vec<f64>] {
        &self.dense
    }
}

/// Orthonormal vectors `b_1..b_d` of `R^n`.
#[derive(Debug, Clone, PartialEq)]
pub struct OrthonormalBasis {
    n: usize,
    vectors: Vec<Vec<f64>>,
}

impl OrthonormalBasis {
    pub fn ambient_dim(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.vectors.len()
    }

    pub fn vectors(&self) -> &[Vec<f64>] {
        &self.vectors
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub(crate) fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn project_out(v: &mut [f64], against: &[Vec<f64>]) {
    for q in against {
        let c = dot(q, v);
        axpy(-c, q, v);
    }
}

/// Orthonormal basis of the span of `rows`, each given with the norm used
/// for the relative rank test.
pub(crate) fn orthonormalize<I>(rows: I) -> Vec<Vec<f64>>
where
    I: IntoIterator<Item = (Vec<f64>, f64)>,
{
    let mut q: Vec<Vec<f64>> = Vec::new();
    for (mut r, reference_norm) in rows {
        if reference_norm == 0.0 {
            continue;
        }
        project_out(&mut r, &q);
        project_out(&mut r, &q);
        let rn = norm(&r);
        if rn < RANK_TOLERANCE * reference_norm {
            continue;
        }
        r.iter_mut().for_each(|x| *x /= rn);
        q.push(r);
    }
    q
}

/// Up to `limit` orthonormal vectors of `R^dim` orthogonal to the
/// orthonormal set `q`, completed from standard basis vectors by largest
/// residual. With no limit the result spans the whole complement.
pub(crate) fn complete(dim: usize, q: &[Vec<f64>], limit: Option<usize>) -> Vec<Vec<f64>> {
    let target = dim.saturating_sub(q.len()).min(limit.unwrap_or(usize::MAX));
    if target == 0 {
        return Vec::new();
    }
    if target == 1 {
        // Residual norms of e_i are 1 - sum_q q_i^2; only the winner is formed.
        let best = (0..dim)
            .map(|i| (i, 1.0 - q.iter().map(|v| v[i] * v[i]).sum::<f64>()))
            .fold((0, f64::NEG_INFINITY), |acc, (i, r)| if r > acc.1 { (i, r) } else { acc });
        let mut e = vec![0.0; dim];
        e[best.0] = 1.0;
        project_out(&mut e, q);
        project_out(&mut e, q);
        let rn = norm(&e);
        e.iter_mut().for_each(|x| *x /= rn);
        return vec![e];
    }

    let mut candidates: Vec<Vec<f64>> = (0..dim)
        .map(|i| {
            let mut e = vec![0.0; dim];
            e[i] = 1.0;
            for v in q {
                axpy(-v[i], v, &mut e);
            }
            e
        })
        .collect();
    let mut residual: Vec<f64> = candidates.iter().map(|c| dot(c, c)).collect();
    let mut used = vec![false; dim];
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(target);

    while basis.len() < target {
        let mut pick = None;
        let mut best = 0.0;
        for i in 0..dim {
            if !used[i] && residual[i] > best {
                best = residual[i];
                pick = Some(i);
            }
        }
        let Some(i) = pick else { break };
        if best.sqrt() < RANK_TOLERANCE {
            break;
        }
        used[i] = true;
        let mut b = std::mem::take(&mut candidates[i]);
        project_out(&mut b, q);
        project_out(&mut b, &basis);
        let bn = norm(&b);
        b.iter_mut().for_each(|x| *x /= bn);
        for k in 0..dim {
            if !used[k] {
                let c = dot(&b, &candidates[k]);
                axpy(-c, &b, &mut candidates[k]);
                residual[k] = dot(&candidates[k], &candidates[k]);
            }
        }
        basis.push(b);
    }
    basis
}

/// Coordinates of `0..n` not listed in the sorted slice `frozen`.
pub(crate) fn free_coords(n: usize, frozen: &[usize]) -> Vec<usize> {
    let mut out = Vec::with_capacity(n - frozen.len());
    let mut it = frozen.iter().peekable();
    for i in 0..n {
        if it.peek() == Some(&&i) {
            it.next();
        } else {
            out.push(i);
        }
    }
    out
}

/// Orthonormal basis, in free coordinates, of the complement. Returns the
/// free coordinate list alongside.
pub(crate) fn compact_basis(
    n: usize,
    constraints: &ConstraintCollection,
    limit: Option<usize>,
) -> (Vec<usize>, Vec<Vec<f64>>) {
    let free = free_coords(n, &constraints.frozen_coords);
    let rows = constraints.dense.iter().map(|v| {
        let restricted: Vec<f64> = free.iter().map(|&i| v[i]).collect();
        (restricted, norm(v))
    });
    let q = orthonormalize(rows);
    let basis = complete(free.len(), &q, limit);
    (free, basis)
}

fn expand(n: usize, free: &[usize], compact: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
    compact
        .into_iter()
        .map(|c| {
            let mut v = vec![0.0; n];
            for (&i, x) in free.iter().zip(c) {
                v[i] = x;
            }
            v
        })
        .collect()
}

/// Orthonormal basis of `{u : u_i = 0 for frozen i, <u, v> = 0 for dense v}`.
pub fn build_basis(n: usize, constraints: &ConstraintCollection) -> OrthonormalBasis {
    let (free, compact) = compact_basis(n, constraints, None);
    OrthonormalBasis { n, vectors: expand(n, &free, compact) }
}

/// A single unit vector of the complement, or `None` if it is `{0}`.
pub fn complement_direction(n: usize, constraints: &ConstraintCollection) -> Option<Vec<f64>> {
    let (free, compact) = compact_basis(n, constraints, Some(1));
    expand(n, &free, compact).pop()
}

/// `sum_k g_k b_k` with independent standard normals `g_k`, drawn in basis
/// order. The zero vector when the basis is empty.
pub fn sample_gaussian<R: Rng + ?Sized>(basis: &OrthonormalBasis, rng: &mut R) -> Vec<f64> {
    let mut u = vec![0.0; basis.n];
    for b in &basis.vectors {
        let g: f64 = rng.sample(StandardNormal);
        axpy(g, b, &mut u);
    }
    u
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use proptest::prelude::*;
    use rand::Rng;

    fn check_basis(basis: &OrthonormalBasis, c: &ConstraintCollection) {
        let vs = basis.vectors();
        for (a, va) in vs.iter().enumerate() {
            for (b, vb) in vs.iter().enumerate() {
                let expected = if a == b { 1.0 } else { 0.0 };
                assert!((dot(va, vb) - expected).abs() <= 1e-10, "gram[{a}][{b}]");
            }
            for &i in c.frozen_coords() {
                assert!(va[i].abs() <= 1e-10);
            }
            for v in c.dense_constraints() {
                assert!(dot(va, v).abs() <= 1e-8 * norm(v));
            }
        }
    }

    #[test]
    fn unconstrained_is_full_space() {
        let c = ConstraintCollection::default();
        let b = build_basis(3, &c);
        assert_eq!(b.dim(), 3);
        check_basis(&b, &c);
    }

    #[test]
    fn fully_frozen_is_trivial() {
        let c = ConstraintCollection::new(4, (0..4).collect(), vec![vec![1.0; 4]]).unwrap();
        assert_eq!(build_basis(4, &c).dim(), 0);
        assert!(complement_direction(4, &c).is_none());
    }

    #[test]
    fn complement_of_a_line() {
        let c = ConstraintCollection::new(2, vec![], vec![vec![1.0, 1.0]]).unwrap();
        let b = build_basis(2, &c);
        assert_eq!(b.dim(), 1);
        let v = &b.vectors()[0];
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert!((v[0].abs() - h).abs() < 1e-12 && (v[1] + v[0]).abs() < 1e-12);
    }

    #[test]
    fn dependent_constraints_are_absorbed() {
        // v3 = v1 + v2, v4 parallel to v1, v5 supported on frozen coordinate 0.
        let v1 = vec![1.0, 1.0, 0.0, 0.0, 0.0];
        let v2 = vec![0.0, 1.0, 1.0, 1.0, 0.0];
        let v3: Vec<f64> = v1.iter().zip(&v2).map(|(a, b)| a + b).collect();
        let v4: Vec<f64> = v1.iter().map(|a| 1e6 * a).collect();
        let v5 = vec![3.0, 0.0, 0.0, 0.0, 0.0];
        let c = ConstraintCollection::new(5, vec![0], vec![v1, v2, v3, v4, v5]).unwrap();
        let b = build_basis(5, &c);
        assert_eq!(b.dim(), 2);
        check_basis(&b, &c);
    }

    #[test]
    fn rejects_bad_collections() {
        assert!(ConstraintCollection::new(3, vec![3], vec![]).is_err());
        assert!(ConstraintCollection::new(3, vec![], vec![vec![1.0; 2]]).is_err());
    }

    #[test]
    fn zero_dimensional_sample_is_zero() {
        let c = ConstraintCollection::new(3, vec![0, 1, 2], vec![]).unwrap();
        let b = build_basis(3, &c);
        let mut r = rng::stream(1, &[]);
        assert_eq!(sample_gaussian(&b, &mut r), vec![0.0; 3]);
    }

    #[test]
    fn samples_respect_constraints_and_have_expected_energy() {
        let n = 12;
        let mut r = rng::stream(3, &[1]);
        let dense: Vec<Vec<f64>> =
            (0..4).map(|_| (0..n).map(|_| if r.random::<bool>() { 1.0 } else { 0.0 }).collect()).collect();
        let c = ConstraintCollection::new(n, vec![2, 7], dense).unwrap();
        let b = build_basis(n, &c);
        check_basis(&b, &c);
        let samples = 10_000;
        let mut energy = 0.0;
        for _ in 0..samples {
            let u = sample_gaussian(&b, &mut r);
            assert!(u[2].abs() <= 1e-10 && u[7].abs() <= 1e-10);
            for v in c.dense_constraints() {
                assert!(dot(&u, v).abs() <= 1e-8 * norm(v) * norm(&u).max(1.0));
            }
            energy += dot(&u, &u);
        }
        let mean = energy / samples as f64;
        let d = b.dim() as f64;
        assert!((mean - d).abs() <= 0.05 * d, "mean {mean} vs dim {d}");
    }

    #[test]
    fn sampling_is_deterministic_given_rng_state() {
        let c = ConstraintCollection::new(5, vec![1], vec![vec![1.0, 0.0, 1.0, 1.0, 0.0]]).unwrap();
        let b = build_basis(5, &c);
        let u1 = sample_gaussian(&b, &mut rng::stream(11, &[4]));
        let u2 = sample_gaussian(&b, &mut rng::stream(11, &[4]));
        assert_eq!(u1, u2);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn basis_spans_exact_complement(
            n in 1usize..14,
            frozen in proptest::collection::vec(0usize..14, 0..6),
            rows in proptest::collection::vec(proptest::collection::vec(-2i32..3, 14), 0..10),
        ) {
            let frozen: Vec<usize> = frozen.into_iter().filter(|&i| i < n).collect();
            let dense: Vec<Vec<f64>> = rows.iter().map(|r| r[..n].iter().map(|&x| x as f64).collect()).collect();
            let c = ConstraintCollection::new(n, frozen, dense).unwrap();
            let b = build_basis(n, &c);
            check_basis(&b, &c);
            let lower = n.saturating_sub(c.frozen_coords().len() + c.dense_constraints().len());
            prop_assert!(b.dim() >= lower);

            // The basis plus the constraint span must fill R^n: rank check via
            // orthonormalizing everything together.
            let mut all: Vec<(Vec<f64>, f64)> = c.frozen_coords().iter().map(|&i| {
                let mut e = vec![0.0; n]; e[i] = 1.0; (e, 1.0)
            }).collect();
            all.extend(c.dense_constraints().iter().map(|v| (v.clone(), norm(v))));
            let constraint_rank = orthonormalize(all.clone()).len();
            prop_assert_eq!(b.dim() + constraint_rank, n);
            all.extend(b.vectors().iter().map(|v| (v.clone(), 1.0)));
            prop_assert_eq!(orthonormalize(all).len(), n);
        }
    }
}
