//! Within-referential ranking under random tie-breaking or midranking, the
//! column-permutation primitive, and the null probability integral transform.

use std::cmp::Ordering;

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::ObservationMatrix;
use crate::error::{Error, Result};
use crate::rng::{tags, RngSeed};
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TiePolicy {
    /// Tied observations receive their integer ranks in uniformly random order.
    RandomTies,
    /// Tied observations share the average of the ranks they occupy.
    Midrank,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RankMatrix {
    n: usize,
    t: usize,
    ranks: Vec<f64>,
    policy: TiePolicy,
}

impl RankMatrix {
    /// Column-major ranks; no validation beyond shape.
    pub fn from_columns_flat(n: usize, t: usize, ranks: Vec<f64>, policy: TiePolicy) -> Result<Self> {
        if ranks.len() != n * t {
            return Err(Error::LengthMismatch {
                expected: n * t,
                found: ranks.len(),
            });
        }
        if n == 0 || t == 0 {
            return Err(Error::Shape(format!("empty rank matrix n={n}, t={t}")));
        }
        Ok(Self { n, t, ranks, policy })
    }

    pub fn from_rows(rows: &[Vec<f64>], policy: TiePolicy) -> Result<Self> {
        let n = rows.len();
        let t = rows.first().map_or(0, Vec::len);
        let mut ranks = Vec::with_capacity(n * t);
        for j in 0..t {
            for r in rows {
                if r.len() != t {
                    return Err(Error::LengthMismatch {
                        expected: t,
                        found: r.len(),
                    });
                }
                ranks.push(r[j]);
            }
        }
        Self::from_columns_flat(n, t, ranks, policy)
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn t(&self) -> usize {
        self.t
    }

    #[inline]
    pub fn policy(&self) -> TiePolicy {
        self.policy
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.ranks[j * self.n + i]
    }

    #[inline]
    pub fn column(&self, j: usize) -> &[f64] {
        &self.ranks[j * self.n..(j + 1) * self.n]
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.ranks
    }

    /// Per-subject rank sums. Ranks are integers or half-integers, so these
    /// sums are exact in f64.
    pub fn row_sums(&self) -> Vec<f64> {
        let mut sums = vec![0.0; self.n];
        for col in self.ranks.chunks_exact(self.n) {
            for (s, r) in sums.iter_mut().zip(col) {
                *s += r;
            }
        }
        sums
    }
}

fn sorted_order<S: Scalar>(col: &[S]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..col.len()).collect();
    // values are finite by construction of ObservationMatrix
    idx.sort_by(|&a, &b| col[a].partial_cmp(&col[b]).unwrap_or(Ordering::Equal));
    idx
}

fn rank_column<S: Scalar>(col: &[S], policy: TiePolicy, seed: RngSeed, out: &mut [f64]) {
    let order = sorted_order(col);
    let mut rng = None;
    let mut start = 0;
    while start < order.len() {
        let v = col[order[start]];
        let mut end = start + 1;
        while end < order.len() && col[order[end]] == v {
            end += 1;
        }
        let group = &order[start..end];
        match policy {
            TiePolicy::Midrank => {
                let mid = (start + 1 + end) as f64 / 2.0;
                for &i in group {
                    out[i] = mid;
                }
            }
            TiePolicy::RandomTies => {
                if group.len() == 1 {
                    out[group[0]] = (start + 1) as f64;
                } else {
                    let rng = rng.get_or_insert_with(|| seed.rng());
                    let mut slots: Vec<usize> = (start + 1..=end).collect();
                    slots.shuffle(rng);
                    for (&i, &r) in group.iter().zip(&slots) {
                        out[i] = r as f64;
                    }
                }
            }
        }
        start = end;
    }
}

/// Ranks every referential independently. Under [`TiePolicy::RandomTies`] the
/// tie-break draws of column `j` come from `seed.derive(TIE_BREAK).derive(j)`
/// and are consumed only inside tied groups, so tie-free columns do not depend
/// on the seed at all.
pub fn compute_ranks<S: Scalar>(m: &ObservationMatrix<S>, policy: TiePolicy, seed: RngSeed) -> RankMatrix {
    let n = m.n();
    let mut ranks = vec![0.0; n * m.t()];
    let base = seed.derive(tags::TIE_BREAK);
    ranks
        .par_chunks_mut(n)
        .enumerate()
        .for_each(|(j, out)| rank_column(m.column(j), policy, base.derive(j as u64), out));
    RankMatrix {
        n,
        t: m.t(),
        ranks,
        policy,
    }
}

/// Independently permutes the entries of every column.
pub fn column_permute(r: &RankMatrix, seed: RngSeed) -> RankMatrix {
    let mut ranks = r.ranks.clone();
    let base = seed.derive(tags::PERMUTE);
    ranks
        .par_chunks_mut(r.n)
        .enumerate()
        .for_each(|(j, col)| col.shuffle(&mut base.derive(j as u64).rng()));
    RankMatrix { ranks, ..r.clone() }
}

/// Null distribution function of one referential.
pub trait NullCdf: Sync {
    /// `P(X <= x)`.
    fn cdf(&self, x: f64) -> f64;

    /// `P(X < x)`. Equal to [`cdf`](Self::cdf) for continuous laws.
    fn cdf_left(&self, x: f64) -> f64 {
        self.cdf(x)
    }
}

impl<F: Fn(f64) -> f64 + Sync> NullCdf for F {
    fn cdf(&self, x: f64) -> f64 {
        self(x)
    }
}

/// Maps each observation through its referential's null CDF. At an atom
/// (`cdf_left < cdf`) the value is spread uniformly over the jump using an
/// independent `Uniform[-1, 1]` draw `W` via `(1 + W) / 2`.
pub fn null_cdf_transform<S: Scalar>(
    m: &ObservationMatrix<S>,
    null_cdfs: &[&dyn NullCdf],
    seed: RngSeed,
) -> Result<Vec<Vec<f64>>> {
    if null_cdfs.len() != m.t() {
        return Err(Error::LengthMismatch {
            expected: m.t(),
            found: null_cdfs.len(),
        });
    }
    let base = seed.derive(tags::CDF_ATOMS);
    let mut out = Vec::with_capacity(m.t());
    for (j, f) in null_cdfs.iter().enumerate() {
        let mut rng = base.derive(j as u64).rng();
        let mut col = Vec::with_capacity(m.n());
        for &x in m.column(j) {
            let x = x.to_f64_lossy();
            let hi = f.cdf(x);
            let lo = f.cdf_left(x);
            for v in [hi, lo] {
                if !(0.0..=1.0).contains(&v) {
                    return Err(Error::CdfRange { col: j, value: v });
                }
            }
            let u = if lo < hi {
                let w: f64 = rng.random_range(-1.0..=1.0);
                lo + (hi - lo) * (1.0 + w) / 2.0
            } else {
                hi
            };
            col.push(u);
        }
        out.push(col);
    }
    Ok(out)
}
