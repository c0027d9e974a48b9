//! Set systems, colorings and discrepancy.
//!
//! Points are 0-based inside the crate. The text format and every external
//! report use 1-based indices; [`SetSystem::parse`] and [`SetSystem::to_text`]
//! are the only places that convert.

use std::fmt::Write as _;

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{contract, Error, Result};
use crate::rng::{self, lane};

/// Slack tolerated on fractional coordinates before they are rejected.
pub const FRACTIONAL_SLACK: f64 = 1e-9;

/// A universe `0..n` and a family of subsets, each sorted and duplicate free.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SetSystem {
    n: usize,
    sets: Vec<Vec<usize>>,
}

impl SetSystem {
    /// Builds a system from 0-based index lists. Lists are sorted and
    /// deduplicated; an index outside `0..n` is a contract error.
    pub fn new(n: usize, sets: Vec<Vec<usize>>) -> Result<Self> {
        let mut sets = sets;
        for (j, set) in sets.iter_mut().enumerate() {
            set.sort_unstable();
            set.dedup();
            if let Some(&last) = set.last() {
                if last >= n {
                    return Err(contract(format!(
                        "set {} contains point {} but n = {}",
                        j + 1,
                        last + 1,
                        n
                    )));
                }
            }
        }
        Ok(Self { n, sets })
    }

    /// Convenience constructor taking 1-based indices, as written in files.
    pub fn from_one_based(n: usize, sets: &[&[usize]]) -> Result<Self> {
        let mut zero_based = Vec::with_capacity(sets.len());
        for (j, set) in sets.iter().enumerate() {
            let mut s = Vec::with_capacity(set.len());
            for &i in set.iter() {
                if i == 0 || i > n {
                    return Err(contract(format!("set {}: index {} outside [1, {}]", j + 1, i, n)));
                }
                s.push(i - 1);
            }
            zero_based.push(s);
        }
        Self::new(n, zero_based)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.sets.len()
    }

    pub fn sets(&self) -> &[Vec<usize>] {
        &self.sets
    }

    pub fn set(&self, j: usize) -> &[usize] {
        &self.sets[j]
    }

    /// Parses the text format: a header `n m`, then exactly `m` lines of
    /// 1-based indices (a blank line is an empty set). Lines starting with
    /// `#` are comments.
    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(k, l)| (k + 1, l))
            .filter(|(_, l)| !l.trim_start().starts_with('#'));

        let (n, m) = loop {
            let Some((line_no, line)) = lines.next() else {
                return Err(Error::Parse { line: 0, message: "missing header \"n m\"".into() });
            };
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 2 {
                return Err(Error::Parse {
                    line: line_no,
                    message: format!("malformed header {line:?}, expected \"n m\""),
                });
            }
            let n = parse_count(fields[0], line_no)?;
            let m = parse_count(fields[1], line_no)?;
            break (n, m);
        };

        let mut sets = Vec::with_capacity(m);
        let mut last_line = 0;
        while sets.len() < m {
            let Some((line_no, line)) = lines.next() else {
                return Err(Error::Parse {
                    line: last_line,
                    message: format!("expected {m} sets, found {}", sets.len()),
                });
            };
            last_line = line_no;
            let mut set = Vec::new();
            for token in line.split_whitespace() {
                let value: i64 = token.parse().map_err(|_| Error::Parse {
                    line: line_no,
                    message: format!("non-integer token {token:?}"),
                })?;
                if value < 1 || value as u64 > n as u64 {
                    return Err(Error::Parse {
                        line: line_no,
                        message: format!("index {value} outside [1, {n}]"),
                    });
                }
                set.push(value as usize - 1);
            }
            sets.push(set);
        }
        for (line_no, line) in lines {
            if !line.trim().is_empty() {
                return Err(Error::Parse {
                    line: line_no,
                    message: format!("unexpected content after {m} sets"),
                });
            }
        }
        Self::new(n, sets)
    }

    /// Serializes to the text format accepted by [`SetSystem::parse`].
    pub fn to_text(&self) -> String {
        let mut out = format!("{} {}\n", self.n, self.sets.len());
        for set in &self.sets {
            let mut first = true;
            for &i in set {
                if !first {
                    out.push(' ');
                }
                first = false;
                let _ = write!(out, "{}", i + 1);
            }
            out.push('\n');
        }
        out
    }

    /// `max_j |sum_{i in S_j} chi(i)|`, zero when there are no sets.
    pub fn discrepancy(&self, chi: &Coloring) -> Result<u64> {
        if chi.len() != self.n {
            return Err(contract(format!("coloring has length {}, expected {}", chi.len(), self.n)));
        }
        let signs = chi.values();
        Ok(self
            .sets
            .iter()
            .map(|s| s.iter().map(|&i| signs[i] as i64).sum::<i64>().unsigned_abs())
            .max()
            .unwrap_or(0))
    }

    /// `max_j |sum_{i in S_j} x_i|` for a fractional point.
    pub fn fractional_discrepancy(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.n {
            return Err(contract(format!("point has length {}, expected {}", x.len(), self.n)));
        }
        Ok(self.set_sums(x).into_iter().fold(0.0, |acc, s| acc.max(s.abs())))
    }

    /// Signed sums `sum_{i in S_j} x_i`, one per set.
    pub fn set_sums(&self, x: &[f64]) -> Vec<f64> {
        self.sets.iter().map(|s| s.iter().map(|&i| x[i]).sum()).collect()
    }

    /// Largest number of sets containing a single point.
    pub fn max_degree(&self) -> usize {
        self.degrees().into_iter().max().unwrap_or(0)
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0usize; self.n];
        for set in &self.sets {
            for &i in set {
                deg[i] += 1;
            }
        }
        deg
    }

    /// Dense 0/1 indicator vector of set `j`.
    pub fn indicator(&self, j: usize) -> Vec<f64> {
        let mut v = vec![0.0; self.n];
        for &i in &self.sets[j] {
            v[i] = 1.0;
        }
        v
    }

    /// Intersects every set with `active` and renumbers the survivors to
    /// `0..active.len()` in increasing order of their old index.
    pub fn restrict(&self, active: &[usize]) -> Result<Restriction> {
        if active.is_empty() {
            return Err(contract("restriction to an empty active set"));
        }
        let mut new_to_old = active.to_vec();
        new_to_old.sort_unstable();
        new_to_old.dedup();
        if let Some(&last) = new_to_old.last() {
            if last >= self.n {
                return Err(contract(format!("active point {} outside universe of size {}", last + 1, self.n)));
            }
        }
        let mut old_to_new = vec![None; self.n];
        for (new, &old) in new_to_old.iter().enumerate() {
            old_to_new[old] = Some(new);
        }
        let sets = self
            .sets
            .iter()
            .map(|s| s.iter().filter_map(|&i| old_to_new[i]).collect())
            .collect();
        Ok(Restriction {
            system: SetSystem { n: new_to_old.len(), sets },
            old_to_new,
            new_to_old,
        })
    }

    /// Each point joins each set independently with probability `p`.
    pub fn generate_random(n: usize, m: usize, p: f64, seed: u64) -> Result<Self> {
        if n == 0 || m == 0 {
            return Err(contract("generator needs n >= 1 and m >= 1"));
        }
        if !(p > 0.0 && p < 1.0) {
            return Err(contract(format!("inclusion probability {p} outside (0, 1)")));
        }
        let mut rng = rng::stream(seed, &[lane::GENERATE, 0]);
        let sets = (0..m)
            .map(|_| (0..n).filter(|_| rng.random::<f64>() < p).collect())
            .collect();
        Ok(Self { n, sets })
    }

    /// Each point joins `min(t, m)` distinct sets chosen uniformly at random,
    /// so the maximum degree is at most `t` by construction.
    pub fn generate_bounded_degree(n: usize, m: usize, t: usize, seed: u64) -> Result<Self> {
        if n == 0 || m == 0 || t == 0 {
            return Err(contract("generator needs n, m, t >= 1"));
        }
        let mut rng = rng::stream(seed, &[lane::GENERATE, 1]);
        let mut sets = vec![Vec::new(); m];
        for i in 0..n {
            for j in index::sample(&mut rng, m, t.min(m)) {
                sets[j].push(i);
            }
        }
        Ok(Self { n, sets })
    }
}

fn parse_count(token: &str, line: usize) -> Result<usize> {
    token.parse::<usize>().map_err(|_| Error::Parse {
        line,
        message: format!("header field {token:?} is not a non-negative integer"),
    })
}

/// Result of [`SetSystem::restrict`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Restriction {
    pub system: SetSystem,
    /// `old_to_new[i]` is the new index of old point `i`, if it is active.
    pub old_to_new: Vec<Option<usize>>,
    pub new_to_old: Vec<usize>,
}

/// A full `±1` assignment.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Coloring(Vec<i8>);

impl Coloring {
    pub fn new(values: Vec<i8>) -> Result<Self> {
        if let Some(pos) = values.iter().position(|&v| v != 1 && v != -1) {
            return Err(contract(format!("coloring entry {} is {}, not ±1", pos + 1, values[pos])));
        }
        Ok(Self(values))
    }

    pub fn all_plus(n: usize) -> Self {
        Self(vec![1; n])
    }

    pub fn values(&self) -> &[i8] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn negated(&self) -> Self {
        Self(self.0.iter().map(|v| -v).collect())
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.0.iter().map(|&v| v as f64).collect()
    }
}

/// A point of `[-1, 1]^n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FractionalPoint(Vec<f64>);

impl FractionalPoint {
    /// Accepts entries within [`FRACTIONAL_SLACK`] of the cube and clamps
    /// them into `[-1, 1]`.
    pub fn new(mut values: Vec<f64>) -> Result<Self> {
        for (i, v) in values.iter_mut().enumerate() {
            if !v.is_finite() || v.abs() > 1.0 + FRACTIONAL_SLACK {
                return Err(contract(format!("coordinate {} = {} outside [-1, 1]", i + 1, v)));
            }
            *v = v.clamp(-1.0, 1.0);
        }
        Ok(Self(values))
    }

    pub fn zeros(n: usize) -> Self {
        Self(vec![0.0; n])
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl From<&Coloring> for FractionalPoint {
    fn from(chi: &Coloring) -> Self {
        Self(chi.to_f64())
    }
}
