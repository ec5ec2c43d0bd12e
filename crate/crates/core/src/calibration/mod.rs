//! Null tables, p-values and the three rank-test calibration modes.

mod engine;
mod permutation;
mod procedures;
mod table;

use serde::{Deserialize, Serialize};

use crate::hc::HcProfile;
use crate::rng::RngSeed;
use crate::serde_ext;

pub(crate) use engine::NullPanelSampler;
pub(crate) use permutation::{permutation_null, Standardizer};
pub use procedures::{
    subject_p_values, subject_p_values_permutation, test_midrank_naive, test_midrank_permutation, test_random_ties,
    SubjectNull, DEFAULT_PERMUTATIONS,
};
pub(crate) use table::add_one_p_value;
pub use table::{
    load_table, load_table_for, p_value_mc, save_table, table_from_json, table_to_json, tabulate_null,
    tabulate_null_with_budget, NullTable, DEFAULT_BUDGET, DEFAULT_MC, TABLE_VERSION,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    RandomTiesMc,
    MidrankPermutation,
    MidrankNaive,
    DistHc,
    Friedman,
    PermHc,
}

impl Method {
    pub fn tag(self) -> &'static str {
        match self {
            Self::RandomTiesMc => "random-ties-mc",
            Self::MidrankPermutation => "midrank-permutation",
            Self::MidrankNaive => "midrank-naive",
            Self::DistHc => "dist-hc",
            Self::Friedman => "friedman",
            Self::PermHc => "perm-hc",
        }
    }
}

/// Seeds and sample counts behind a p-value.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Replicates {
    /// Seed used on the data (tie-breaking or permutations).
    pub seed: Option<RngSeed>,
    /// Seed of the calibration sample, when separate from `seed`.
    pub calibration_seed: Option<RngSeed>,
    /// Samples behind the null law of the statistic.
    pub calibration_samples: usize,
    /// Samples behind the exceedance probabilities, if any.
    pub pq_samples: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub method: Method,
    /// Set when the calibration carries no finite-sample guarantee.
    pub approximate: bool,
    #[serde(with = "serde_ext::float")]
    pub statistic: f64,
    pub p_value: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub profile: Option<HcProfile>,
    #[serde(default, skip_serializing_if = "Option::is_none", with = "serde_ext::opt_float_vec")]
    pub subject_p: Option<Vec<f64>>,
    pub replicates: Replicates,
}

impl TestResult {
    pub fn rejects(&self, alpha: f64) -> bool {
        self.p_value <= alpha
    }
}
