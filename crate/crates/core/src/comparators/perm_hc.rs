use crate::calibration::{add_one_p_value, permutation_null, Method, Replicates, Standardizer, TestResult};
use crate::data::ObservationMatrix;
use crate::error::{Error, Result};
use crate::hc::{counts_at_or_above, hc_statistic, GridSpec};
use crate::rng::RngSeed;
use crate::scalar::Scalar;

/// Higher criticism on raw subject means, standardized by the grand mean and
/// standard deviation, with exceedance probabilities and the null law both
/// estimated from column-wise permutations of the data. Only meaningful when
/// all referentials share the same null law.
pub fn raw_permutation_hc<S: Scalar>(m: &ObservationMatrix<S>, k_n: u32, b: usize, seed: RngSeed) -> Result<TestResult> {
    if b < 99 {
        return Err(Error::InvalidParameter(format!("need at least 99 permutations, got {b}")));
    }
    let (n, t) = (m.n(), m.t());
    let flat: Vec<f64> = m.as_flat().iter().map(|v| v.to_f64_lossy()).collect();
    let (mean, sd) = m.overall_mean_sd();
    let replicates = Replicates {
        seed: Some(seed),
        calibration_seed: None,
        calibration_samples: b,
        pq_samples: b,
    };
    if !(sd > 0.0) {
        // constant panel: every permutation reproduces it
        return Ok(TestResult {
            method: Method::PermHc,
            approximate: false,
            statistic: 0.0,
            p_value: 1.0,
            profile: None,
            subject_p: None,
            replicates,
        });
    }
    let top = flat
        .chunks_exact(n)
        .map(|c| c.iter().cloned().fold(f64::NEG_INFINITY, f64::max))
        .sum::<f64>()
        / t as f64;
    let reach = ((top - mean) / sd).max(0.0);
    let cap = reach * reach * t as f64 / (2.0 * (n as f64).ln());
    let grid = GridSpec::up_to(k_n, cap, n, t)?;
    let thresholds = grid.thresholds();
    let st = Standardizer { t, center: mean, scale: sd };
    let null = permutation_null(&flat, n, &thresholds, st, b, seed, false);

    let sums: Vec<f64> = (0..n).map(|i| m.row(i).iter().map(|v| v.to_f64_lossy()).sum()).collect();
    let mut z = Vec::new();
    st.apply(&sums, &mut z);
    let counts = counts_at_or_above(&mut z, &thresholds);
    let mut profile = hc_statistic(&grid, &counts, &null.pq)?;
    for (p, thr) in profile.per_q.iter_mut().zip(&thresholds) {
        p.z = mean + sd * thr;
    }
    Ok(TestResult {
        method: Method::PermHc,
        approximate: false,
        statistic: profile.statistic,
        p_value: add_one_p_value(&null.t_perm, profile.statistic),
        profile: Some(profile),
        subject_p: None,
        replicates,
    })
}
