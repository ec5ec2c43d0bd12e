//! Mean and heteroskedasticity of an anomalous subject after the rank
//! transform, from the moments of `U = F₀(X)` with randomized atoms.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{RngSeed, StreamRng};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnomalyCharacteristics {
    pub mu: f64,
    pub sigma_sq: f64,
}

/// Monte-Carlo estimates of `E[U]` and `E[U²]` for one referential.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct UMoments {
    pub eu: f64,
    pub eu2: f64,
    pub se_eu: f64,
    pub se_eu2: f64,
}

impl UMoments {
    /// Exact moments, zero standard error.
    pub fn exact(eu: f64, eu2: f64) -> Self {
        Self {
            eu,
            eu2,
            se_eu: 0.0,
            se_eu2: 0.0,
        }
    }
}

const BLOCKS: u64 = 64;

/// Estimates the moments of `U` from fresh triples `(X, Y₁, Y₂)` with `X`
/// anomalous and `Y₁, Y₂` null:
/// `E[U] = P(X > Y₁) + P(X = Y₁) / 2` and
/// `E[U²] = P(X > max(Y₁, Y₂)) + P(X = Y₂ > Y₁) + P(X = Y₁ = Y₂) / 3`.
pub fn u_moments<N, A>(null: N, anomalous: A, mc: usize, seed: RngSeed) -> Result<UMoments>
where
    N: Fn(&mut StreamRng) -> f64 + Sync,
    A: Fn(&mut StreamRng) -> f64 + Sync,
{
    if mc < 2 {
        return Err(Error::InvalidParameter(format!("need at least two samples, got {mc}")));
    }
    let per = (mc as u64).div_ceil(BLOCKS);
    let sums = (0..BLOCKS)
        .into_par_iter()
        .map(|b| {
            let start = b * per;
            let end = ((b + 1) * per).min(mc as u64);
            let mut rng = seed.derive(b).rng();
            let mut acc = [0.0f64; 4];
            for _ in start..end {
                let x = anomalous(&mut rng);
                let y1 = null(&mut rng);
                let y2 = null(&mut rng);
                let a = if x > y1 {
                    1.0
                } else if x == y1 {
                    0.5
                } else {
                    0.0
                };
                let c = if x > y1 && x >= y2 {
                    1.0
                } else if x == y1 && x == y2 {
                    1.0 / 3.0
                } else {
                    0.0
                };
                acc[0] += a;
                acc[1] += a * a;
                acc[2] += c;
                acc[3] += c * c;
            }
            acc
        })
        .collect::<Vec<_>>();
    let mut tot = [0.0f64; 4];
    for s in &sums {
        for k in 0..4 {
            tot[k] += s[k];
        }
    }
    let m = mc as f64;
    let se = |s: f64, s2: f64| {
        let mean = s / m;
        ((s2 / m - mean * mean).max(0.0) / (m - 1.0)).sqrt()
    };
    Ok(UMoments {
        eu: tot[0] / m,
        eu2: tot[2] / m,
        se_eu: se(tot[0], tot[1]),
        se_eu2: se(tot[2], tot[3]),
    })
}

/// `μ = 2√3 (mean_j E[U_j] - 1/2)` and `σ² = (12 / t) Σ_j Var(U_j)`.
pub fn anomaly_characteristics(columns: &[UMoments]) -> Result<AnomalyCharacteristics> {
    if columns.is_empty() {
        return Err(Error::InvalidParameter("need at least one referential".into()));
    }
    let t = columns.len() as f64;
    let mean_eu = columns.iter().map(|c| c.eu).sum::<f64>() / t;
    let var_sum: f64 = columns.iter().map(|c| (c.eu2 - c.eu * c.eu).max(0.0)).sum();
    Ok(AnomalyCharacteristics {
        mu: 2.0 * 3f64.sqrt() * (mean_eu - 0.5),
        sigma_sq: 12.0 / t * var_sum,
    })
}

/// Characteristics of `t` identically distributed referentials, estimated
/// by Monte-Carlo.
pub fn anomaly_characteristics_mc<N, A>(
    null: N,
    anomalous: A,
    t: usize,
    mc: usize,
    seed: RngSeed,
) -> Result<(AnomalyCharacteristics, UMoments)>
where
    N: Fn(&mut StreamRng) -> f64 + Sync,
    A: Fn(&mut StreamRng) -> f64 + Sync,
{
    let m = u_moments(null, anomalous, mc, seed)?;
    let ch = anomaly_characteristics(&vec![m; t.max(1)])?;
    Ok((ch, m))
}

/// Convenience sampler: `Uniform[lo, hi)`.
pub fn uniform_sampler(lo: f64, hi: f64) -> impl Fn(&mut StreamRng) -> f64 + Sync {
    move |rng: &mut StreamRng| lo + (hi - lo) * rng.random::<f64>()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn null_case() {
        let (ch, m) = anomaly_characteristics_mc(uniform_sampler(0.0, 1.0), uniform_sampler(0.0, 1.0), 3, 100_000, RngSeed(1))
            .unwrap();
        assert!((m.eu - 0.5).abs() < 4.0 * m.se_eu);
        assert!((m.eu2 - 1.0 / 3.0).abs() < 4.0 * m.se_eu2);
        assert!(ch.mu.abs() < 0.02 && (ch.sigma_sq - 1.0).abs() < 0.05);
        let exact = anomaly_characteristics(&[UMoments::exact(0.5, 1.0 / 3.0)]).unwrap();
        assert_eq!(exact.mu, 0.0);
        assert!((exact.sigma_sq - 1.0).abs() < 1e-12);
    }

    #[test]
    fn atoms_follow_the_tie_terms() {
        // X = Y = 0 always: U uniform over the single atom's jump
        let m = u_moments(|_: &mut StreamRng| 0.0, |_: &mut StreamRng| 0.0, 100, RngSeed(0)).unwrap();
        assert_eq!(m.eu, 0.5);
        assert!((m.eu2 - 1.0 / 3.0).abs() < 1e-15);
    }
}
