//! The three rank-based test procedures and subject-level p-values.

use super::permutation::{permutation_null, Standardizer};
use super::table::{add_one_p_value, p_value_mc, NullTable};
use super::{Method, Replicates, TestResult};
use crate::data::ObservationMatrix;
use crate::error::{Error, Result};
use crate::hc::{counts_at_or_above, hc_statistic, rank_hc_profile, GridSpec, RankMoments};
use crate::ranking::{compute_ranks, RankMatrix, TiePolicy};
use crate::rng::RngSeed;
use crate::scalar::Scalar;

pub const DEFAULT_PERMUTATIONS: usize = 10_000;

fn table_test(r: &RankMatrix, table: &NullTable) -> Result<(crate::hc::HcProfile, f64, Vec<f64>)> {
    table.ensure_shape(r.n(), r.t())?;
    let profile = rank_hc_profile(r, table.grid(), table.pq())?;
    let p = p_value_mc(profile.statistic, table);
    let subject_p = table.subject_p_values(&r.row_sums())?;
    Ok((profile, p, subject_p))
}

/// Random tie-breaking, calibrated against a tabulated null law.
pub fn test_random_ties<S: Scalar>(m: &ObservationMatrix<S>, table: &NullTable, seed: RngSeed) -> Result<TestResult> {
    table.ensure_shape(m.n(), m.t())?;
    let r = compute_ranks(m, TiePolicy::RandomTies, seed);
    let (profile, p_value, subject_p) = table_test(&r, table)?;
    Ok(TestResult {
        method: Method::RandomTiesMc,
        approximate: false,
        statistic: profile.statistic,
        p_value,
        profile: Some(profile),
        subject_p: Some(subject_p),
        replicates: Replicates {
            seed: Some(seed),
            calibration_seed: Some(table.seed()),
            calibration_samples: table.mc_t(),
            pq_samples: table.mc_pq(),
        },
    })
}

/// Midranks calibrated as if ties had been broken at random. Carries no
/// level guarantee when ties are present.
pub fn test_midrank_naive<S: Scalar>(m: &ObservationMatrix<S>, table: &NullTable) -> Result<TestResult> {
    table.ensure_shape(m.n(), m.t())?;
    let r = compute_ranks(m, TiePolicy::Midrank, RngSeed(0));
    let (profile, p_value, subject_p) = table_test(&r, table)?;
    Ok(TestResult {
        method: Method::MidrankNaive,
        approximate: true,
        statistic: profile.statistic,
        p_value,
        profile: Some(profile),
        subject_p: Some(subject_p),
        replicates: Replicates {
            seed: None,
            calibration_seed: Some(table.seed()),
            calibration_samples: table.mc_t(),
            pq_samples: table.mc_pq(),
        },
    })
}

fn rank_standardizer(n: usize, t: usize) -> Standardizer {
    let mom = RankMoments::new(n);
    Standardizer {
        t,
        center: mom.rbar,
        scale: mom.sigma_r(),
    }
}

/// Midranks with both the exceedance probabilities and the null law of `T`
/// estimated from column-wise permutations of the observed midrank matrix.
/// The two phases use disjoint permutation streams.
pub fn test_midrank_permutation<S: Scalar>(
    m: &ObservationMatrix<S>,
    grid: &GridSpec,
    b: usize,
    seed: RngSeed,
) -> Result<TestResult> {
    if b < 99 {
        return Err(Error::InvalidParameter(format!("need at least 99 permutations, got {b}")));
    }
    if grid.n() != m.n() || grid.t() != m.t() {
        return Err(Error::Shape(format!(
            "grid built for {}x{}, data is {}x{}",
            grid.n(),
            grid.t(),
            m.n(),
            m.t()
        )));
    }
    let (n, t) = (m.n(), m.t());
    let r = compute_ranks(m, TiePolicy::Midrank, seed);
    let thresholds = grid.thresholds();
    let st = rank_standardizer(n, t);
    let null = permutation_null(r.as_flat(), n, &thresholds, st, b, seed, true);

    let obs_sums = r.row_sums();
    let mut z = Vec::new();
    st.apply(&obs_sums, &mut z);
    let counts = counts_at_or_above(&mut z, &thresholds);
    let profile = hc_statistic(grid, &counts, &null.pq)?;
    Ok(TestResult {
        method: Method::MidrankPermutation,
        approximate: false,
        statistic: profile.statistic,
        p_value: add_one_p_value(&null.t_perm, profile.statistic),
        subject_p: null.subject_p(&obs_sums),
        profile: Some(profile),
        replicates: Replicates {
            seed: Some(seed),
            calibration_seed: None,
            calibration_samples: b,
            pq_samples: b,
        },
    })
}

/// Where subject-level null rank sums come from.
#[derive(Clone, Copy, Debug)]
pub enum SubjectNull<'a> {
    /// Pooled null rank sums stored in a table.
    Table(&'a NullTable),
    /// Pooled rank sums of `permutations` column permutations of the data.
    Permutation { permutations: usize },
}

/// Add-one estimates of `P(Y_1 >= Y_i)` per subject under the null.
pub fn subject_p_values<S: Scalar>(
    m: &ObservationMatrix<S>,
    source: SubjectNull<'_>,
    policy: TiePolicy,
    seed: RngSeed,
) -> Result<Vec<f64>> {
    let r = compute_ranks(m, policy, seed);
    match source {
        SubjectNull::Table(table) => {
            table.ensure_shape(r.n(), r.t())?;
            table.subject_p_values(&r.row_sums())
        }
        SubjectNull::Permutation { permutations } => subject_p_values_permutation(&r, permutations, seed),
    }
}

/// Subject p-values from column permutations of an existing rank matrix.
pub fn subject_p_values_permutation(r: &RankMatrix, permutations: usize, seed: RngSeed) -> Result<Vec<f64>> {
    if permutations < 1 {
        return Err(Error::InvalidParameter("need at least one permutation".into()));
    }
    let null = permutation_null(r.as_flat(), r.n(), &[], rank_standardizer(r.n(), r.t()), permutations, seed, true);
    Ok(null.subject_p(&r.row_sums()).unwrap_or_default())
}
