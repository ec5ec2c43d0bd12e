use rayon::prelude::*;

use crate::calibration::{add_one_p_value, Method, NullPanelSampler, Replicates, TestResult};
use crate::data::ObservationMatrix;
use crate::error::{Error, Result};
use crate::ranking::{compute_ranks, RankMatrix, TiePolicy};
use crate::rng::{tags, RngSeed};
use crate::scalar::Scalar;

fn friedman_from_sums(sums: impl Iterator<Item = f64>, n: usize, t: usize) -> f64 {
    let (nf, tf) = (n as f64, t as f64);
    let ss: f64 = sums.map(|s| s * s).sum();
    12.0 / (tf * nf * (nf + 1.0)) * ss - 3.0 * tf * (nf + 1.0)
}

/// `12 / (t n (n + 1)) Σ_i S_i² - 3 t (n + 1)` with `S_i` the subject rank
/// sums.
pub fn friedman_statistic(r: &RankMatrix) -> f64 {
    friedman_from_sums(r.row_sums().into_iter(), r.n(), r.t())
}

/// Monte-Carlo null law of the Friedman statistic for an `n x t` panel.
#[derive(Clone, Debug, PartialEq)]
pub struct FriedmanCalibration {
    n: usize,
    t: usize,
    q_null: Vec<f64>,
    seed: RngSeed,
}

impl FriedmanCalibration {
    pub fn simulate(n: usize, t: usize, mc: usize, seed: RngSeed) -> Result<Self> {
        if n < 2 || t < 1 || mc < 1 {
            return Err(Error::InvalidParameter(format!("need n >= 2, t >= 1, mc >= 1; got {n}, {t}, {mc}")));
        }
        let phase = seed.derive(tags::PHASE_T);
        let mut q_null: Vec<f64> = (0..mc as u64)
            .into_par_iter()
            .map_init(
                || NullPanelSampler::new(n, t),
                |s, r| friedman_from_sums(s.sample(&mut phase.derive(r).rng()).iter().map(|&v| v as f64), n, t),
            )
            .collect();
        q_null.sort_unstable_by(f64::total_cmp);
        Ok(Self { n, t, q_null, seed })
    }

    pub fn p_value(&self, q: f64) -> f64 {
        add_one_p_value(&self.q_null, q)
    }

    pub fn samples(&self) -> usize {
        self.q_null.len()
    }
}

pub fn friedman_test<S: Scalar>(m: &ObservationMatrix<S>, mc: usize, seed: RngSeed) -> Result<TestResult> {
    let cal = FriedmanCalibration::simulate(m.n(), m.t(), mc, seed.derive(tags::METHOD))?;
    friedman_test_with(m, &cal, seed)
}

pub fn friedman_test_with<S: Scalar>(m: &ObservationMatrix<S>, cal: &FriedmanCalibration, seed: RngSeed) -> Result<TestResult> {
    if cal.n != m.n() || cal.t != m.t() {
        return Err(Error::TableShape {
            table_n: cal.n,
            table_t: cal.t,
            n: m.n(),
            t: m.t(),
        });
    }
    let q = friedman_statistic(&compute_ranks(m, TiePolicy::RandomTies, seed));
    Ok(TestResult {
        method: Method::Friedman,
        approximate: false,
        statistic: q,
        p_value: cal.p_value(q),
        profile: None,
        subject_p: None,
        replicates: Replicates {
            seed: Some(seed),
            calibration_seed: Some(cal.seed),
            calibration_samples: cal.samples(),
            pq_samples: 0,
        },
    })
}
