//! Two-phase column-permutation null: exceedance probabilities from one
//! stream of permutations, the null law of `T` from a disjoint one.

use rayon::prelude::*;

use super::engine::ColumnShuffler;
use super::table::isotonic_clamp;
use crate::hc::{counts_at_or_above, max_standardized};
use crate::rng::{tags, RngSeed};

/// Maps a subject sum to the standardized scale: `(s / t - center) / scale`.
#[derive(Clone, Copy, Debug)]
pub(crate) struct Standardizer {
    pub t: usize,
    pub center: f64,
    pub scale: f64,
}

impl Standardizer {
    pub fn apply(&self, sums: &[f64], out: &mut Vec<f64>) {
        let tf = self.t as f64;
        out.clear();
        out.extend(sums.iter().map(|&s| (s / tf - self.center) / self.scale));
    }
}

pub(crate) struct PermutationNull {
    pub pq: Vec<f64>,
    /// Ascending.
    pub t_perm: Vec<f64>,
    /// Histogram of doubled subject sums pooled over the first phase, only
    /// for half-integer sums.
    pub doubled_sums: Option<Vec<u64>>,
    pub pooled: u64,
}

pub(crate) fn permutation_null(
    source: &[f64],
    n: usize,
    thresholds: &[f64],
    st: Standardizer,
    b: usize,
    seed: RngSeed,
    keep_sums: bool,
) -> PermutationNull {
    let width = if keep_sums { 2 * n * st.t + 1 } else { 0 };
    let phase = seed.derive(tags::PHASE_PQ);
    let (exceed, hist) = (0..b as u64)
        .into_par_iter()
        .fold(
            || (ColumnShuffler::new(n, source), Vec::new(), vec![0u64; thresholds.len()], vec![0u64; width]),
            |(mut sh, mut z, mut exceed, mut hist), k| {
                let sums = sh.sample(&mut phase.derive(k).rng());
                if keep_sums {
                    for &s in sums {
                        hist[(2.0 * s) as usize] += 1;
                    }
                }
                st.apply(sums, &mut z);
                for (e, c) in exceed.iter_mut().zip(counts_at_or_above(&mut z, thresholds)) {
                    *e += c;
                }
                (sh, z, exceed, hist)
            },
        )
        .map(|(_, _, e, h)| (e, h))
        .reduce(
            || (vec![0u64; thresholds.len()], vec![0u64; width]),
            |(mut e1, mut h1), (e2, h2)| {
                e1.iter_mut().zip(e2).for_each(|(a, b)| *a += b);
                h1.iter_mut().zip(h2).for_each(|(a, b)| *a += b);
                (e1, h1)
            },
        );
    let pooled = (b * n) as u64;
    let mut pq: Vec<f64> = exceed.iter().map(|&e| e as f64 / pooled as f64).collect();
    isotonic_clamp(&mut pq);

    let phase = seed.derive(tags::PHASE_T);
    let mut t_perm: Vec<f64> = (0..b as u64)
        .into_par_iter()
        .map_init(
            || (ColumnShuffler::new(n, source), Vec::new()),
            |(sh, z), k| {
                let sums = sh.sample(&mut phase.derive(k).rng());
                st.apply(sums, z);
                max_standardized(&counts_at_or_above(z, thresholds), &pq, n)
            },
        )
        .collect();
    t_perm.sort_unstable_by(f64::total_cmp);
    PermutationNull {
        pq,
        t_perm,
        doubled_sums: keep_sums.then_some(hist),
        pooled,
    }
}

impl PermutationNull {
    /// Add-one p-values of subject sums against the pooled first-phase sums.
    pub fn subject_p(&self, sums: &[f64]) -> Option<Vec<f64>> {
        let hist = self.doubled_sums.as_ref()?;
        let mut tail = vec![0u64; hist.len() + 1];
        for i in (0..hist.len()).rev() {
            tail[i] = tail[i + 1] + hist[i];
        }
        Some(
            sums.iter()
                .map(|&s| {
                    let idx = ((2.0 * s).ceil() as usize).min(hist.len());
                    (1.0 + tail[idx] as f64) / (self.pooled as f64 + 1.0)
                })
                .collect(),
        )
    }
}
