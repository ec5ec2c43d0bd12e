//! Exact constructions from the appendices, used as regression fixtures.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::ObservationMatrix;
use crate::error::{Error, Result};
use crate::hc::{subject_rank_means, RankMoments};
use crate::ranking::{compute_ranks, TiePolicy};
use crate::rng::{RngSeed, StreamRng};
use crate::theory::{anomaly_characteristics, u_moments, uniform_sampler, AnomalyCharacteristics, UMoments};

/// Monte-Carlo moments of `U` against their closed forms.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentFixture {
    pub name: String,
    pub moments: UMoments,
    pub characteristics: AnomalyCharacteristics,
    pub expected_eu: f64,
    pub expected_eu2: f64,
    pub expected: AnomalyCharacteristics,
}

impl MomentFixture {
    /// Largest deviation from the closed form in units of the MC standard
    /// error.
    pub fn max_z(&self) -> f64 {
        let z = |est: f64, want: f64, se: f64| {
            let d = (est - want).abs();
            if se > 0.0 {
                d / se
            } else if d == 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        };
        z(self.moments.eu, self.expected_eu, self.moments.se_eu).max(z(
            self.moments.eu2,
            self.expected_eu2,
            self.moments.se_eu2,
        ))
    }

    pub fn within(&self, standard_errors: f64) -> bool {
        self.max_z() <= standard_errors
    }
}

/// Null a mixture of `U[0, 1]` (weight `p`) and `U[2, 3]`, anomaly `U[1, 2]`:
/// `E[U] = p`, `E[U²] = p²`, so the rank transform has zero variance.
pub fn zero_variance_fixture(p: f64, mc: usize, seed: RngSeed) -> Result<MomentFixture> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidParameter(format!("p must lie in [0, 1], got {p}")));
    }
    let null = move |rng: &mut StreamRng| {
        let u: f64 = rng.random();
        if rng.random::<f64>() < p {
            u
        } else {
            2.0 + u
        }
    };
    let moments = u_moments(null, uniform_sampler(1.0, 2.0), mc, seed)?;
    Ok(MomentFixture {
        name: format!("zero-variance(p={p})"),
        moments,
        characteristics: anomaly_characteristics(&[moments])?,
        expected_eu: p,
        expected_eu2: p * p,
        expected: anomaly_characteristics(&[UMoments::exact(p, p * p)])?,
    })
}

/// Null `U[-1, 1]`, anomaly `U[-a, a]` with `a = 2 + sin n`:
/// `E[U] = 1/2`, `E[U²] = (5 + 3 sin n) / (12 + 6 sin n)`.
pub fn oscillating_variance_fixture(n: usize, mc: usize, seed: RngSeed) -> Result<MomentFixture> {
    let a = 2.0 + (n as f64).sin();
    let eu2 = (5.0 + 3.0 * (n as f64).sin()) / (12.0 + 6.0 * (n as f64).sin());
    let moments = u_moments(uniform_sampler(-1.0, 1.0), uniform_sampler(-a, a), mc, seed)?;
    Ok(MomentFixture {
        name: format!("oscillating-variance(n={n})"),
        moments,
        characteristics: anomaly_characteristics(&[moments])?,
        expected_eu: 0.5,
        expected_eu2: eu2,
        expected: anomaly_characteristics(&[UMoments::exact(0.5, eu2)])?,
    })
}

/// Indicator moments of `1{Y_i ≥ z}` over the two equally likely datasets.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IndicatorMoments {
    pub z: f64,
    /// Grid point whose rank-mean threshold is `z` when `t = 2`.
    pub q: f64,
    pub indicators: [Vec<bool>; 2],
    pub sum_var: f64,
    pub sum_cov: f64,
}

impl IndicatorMoments {
    fn new(z: f64, n: usize, means: &[Vec<f64>; 2]) -> Self {
        let rm = RankMoments::new(n);
        let q = (z - rm.rbar).powi(2) / (rm.sigma_r_sq * (n as f64).ln());
        let indicators = [0, 1].map(|k| means[k].iter().map(|&y| y >= z).collect::<Vec<bool>>());
        let e: Vec<f64> = (0..n)
            .map(|i| (indicators[0][i] as u8 + indicators[1][i] as u8) as f64 / 2.0)
            .collect();
        let sum_var = e.iter().map(|p| p - p * p).sum();
        let mut sum_cov = 0.0;
        for i in 0..n {
            for k in 0..n {
                if i != k {
                    let both = (0..2)
                        .filter(|&d| indicators[d][i] && indicators[d][k])
                        .count() as f64
                        / 2.0;
                    sum_cov += both - e[i] * e[k];
                }
            }
        }
        Self {
            z,
            q,
            indicators,
            sum_var,
            sum_cov,
        }
    }

    /// `Σ Cov = (s - 2) Σ Var`.
    pub fn identity_holds(&self, s: usize) -> bool {
        self.sum_var > 0.0 && (self.sum_cov - (s as f64 - 2.0) * self.sum_var).abs() < 1e-12
    }
}

/// The degenerate two-outcome construction with `t = 2`, anomalies
/// `S = {0, …, s-1}` and a single fair coin deciding `X₁₂ ∈ {s - 1, -1}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CovarianceCounterexample {
    pub n: usize,
    pub s: usize,
    /// Rows of the two possible panels.
    pub datasets: [Vec<Vec<f64>>; 2],
    pub rank_means: [Vec<f64>; 2],
    /// Threshold `(2n - s) / 2` as printed in the construction.
    pub stated: IndicatorMoments,
    /// Threshold `(2n - s + 2) / 2`, which isolates the `s - 1` subjects
    /// whose rank mean moves with the coin.
    pub corrected: IndicatorMoments,
}

impl CovarianceCounterexample {
    /// `3 (n - s - 1)² / ((n² - 1) ln n)`.
    pub fn stated_q_formula(&self) -> f64 {
        let (n, s) = (self.n as f64, self.s as f64);
        3.0 * (n - s - 1.0).powi(2) / ((n * n - 1.0) * n.ln())
    }
}

pub fn covariance_counterexample(n: usize, s: usize) -> Result<CovarianceCounterexample> {
    if s < 3 || s + 2 > n {
        return Err(Error::InvalidParameter(format!("need 3 <= s <= n - 2, got n={n}, s={s}")));
    }
    let nulls = n - s;
    // any distinct values strictly inside (-2, -1) give the same ranks
    let null_value = |k: usize, j: usize| -2.0 + (((k * 7 + j * 3) % nulls) as f64 + 1.0) / (nulls as f64 + 1.0);
    let build = |first: f64| -> Result<ObservationMatrix> {
        let mut c1 = Vec::with_capacity(n);
        let mut c2 = Vec::with_capacity(n);
        for i in 0..s {
            c1.push((i + 1) as f64);
            c2.push(if i == 0 { first } else { (s - i - 1) as f64 });
        }
        for k in 0..nulls {
            c1.push(null_value(k, 0));
            c2.push(null_value(k, 1));
        }
        ObservationMatrix::from_columns(&[c1, c2])
    };
    let panels = [build((s - 1) as f64)?, build(-1.0)?];
    let rank_means = [0, 1].map(|k| subject_rank_means(&compute_ranks(&panels[k], TiePolicy::Midrank, RngSeed(0))));
    let datasets = [0, 1].map(|k| (0..n).map(|i| panels[k].row(i)).collect::<Vec<_>>());
    let (nf, sf) = (n as f64, s as f64);
    Ok(CovarianceCounterexample {
        n,
        s,
        stated: IndicatorMoments::new((2.0 * nf - sf) / 2.0, n, &rank_means),
        corrected: IndicatorMoments::new((2.0 * nf - sf + 2.0) / 2.0, n, &rank_means),
        datasets,
        rank_means,
    })
}
