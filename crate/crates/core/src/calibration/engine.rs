//! Replicate samplers shared by tabulation and the permutation procedures.
//!
//! Every replicate starts from a fixed arrangement and draws its permutation
//! from its own derived seed, so the output of replicate `r` does not depend
//! on which thread ran it or what ran before it.

use rand::seq::SliceRandom;

use crate::rng::StreamRng;

/// Row sums of a null rank panel: every column an independent uniform
/// permutation of `1..=n`.
pub(crate) struct NullPanelSampler {
    n: usize,
    t: usize,
    perm: Vec<u32>,
    sums: Vec<u32>,
}

impl NullPanelSampler {
    pub fn new(n: usize, t: usize) -> Self {
        assert!(
            (n as u64) * (t as u64) < u32::MAX as u64,
            "rank sums must fit in u32"
        );
        Self {
            n,
            t,
            perm: Vec::with_capacity(n),
            sums: vec![0; n],
        }
    }

    pub fn sample(&mut self, rng: &mut StreamRng) -> &[u32] {
        self.sums.fill(0);
        for _ in 0..self.t {
            self.perm.clear();
            self.perm.extend(1..=self.n as u32);
            self.perm.shuffle(rng);
            for (s, &r) in self.sums.iter_mut().zip(&self.perm) {
                *s += r;
            }
        }
        &self.sums
    }
}

/// Row sums of a fixed column-major matrix after independently permuting
/// every column.
pub(crate) struct ColumnShuffler<'a> {
    n: usize,
    source: &'a [f64],
    work: Vec<f64>,
    sums: Vec<f64>,
}

impl<'a> ColumnShuffler<'a> {
    pub fn new(n: usize, source: &'a [f64]) -> Self {
        debug_assert!(n > 0 && source.len().is_multiple_of(n));
        Self {
            n,
            source,
            work: Vec::with_capacity(n),
            sums: vec![0.0; n],
        }
    }

    pub fn sample(&mut self, rng: &mut StreamRng) -> &[f64] {
        self.sums.fill(0.0);
        for col in self.source.chunks_exact(self.n) {
            self.work.clear();
            self.work.extend_from_slice(col);
            self.work.shuffle(rng);
            for (s, &v) in self.sums.iter_mut().zip(&self.work) {
                *s += v;
            }
        }
        &self.sums
    }
}

/// Exceedance counts of integer rank sums against precomputed minimal sums.
/// `scratch` must have length `max_sum + 1` and be zeroed; it is left zeroed.
pub(crate) fn counts_from_integer_sums(
    sums: &[u32],
    min_sum: &[usize],
    max_sum: usize,
    scratch: &mut [u32],
    out: &mut Vec<u64>,
) {
    out.clear();
    let floor = min_sum.first().copied().unwrap_or(max_sum + 1);
    if floor > max_sum {
        out.resize(min_sum.len(), 0);
        return;
    }
    for &s in sums {
        let s = s as usize;
        if s >= floor {
            scratch[s] += 1;
        }
    }
    out.resize(min_sum.len(), 0);
    let mut acc = 0u64;
    let mut s = max_sum + 1;
    for (qi, &m) in min_sum.iter().enumerate().rev() {
        while s > m {
            s -= 1;
            acc += scratch[s] as u64;
        }
        out[qi] = acc;
    }
    scratch[floor..=max_sum].fill(0);
}
