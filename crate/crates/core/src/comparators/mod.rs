//! Benchmark tests: the distribution-aware higher criticism on subject means,
//! the Friedman test, and higher criticism on raw data calibrated by column
//! permutations.

mod dist_hc;
mod friedman;
mod perm_hc;

use rand::Rng;
use rand_distr::{Cauchy, Distribution, Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::StreamRng;

pub use dist_hc::{dist_aware_hc, dist_aware_hc_with, DistAwareCalibration};
pub use friedman::{friedman_statistic, friedman_test, friedman_test_with, FriedmanCalibration};
pub use perm_hc::raw_permutation_hc;

/// Location-scale family of the null observations.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NullFamily {
    Normal,
    Uniform,
    Exponential,
    Cauchy,
}

impl std::str::FromStr for NullFamily {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "normal" => Ok(Self::Normal),
            "uniform" => Ok(Self::Uniform),
            "exponential" => Ok(Self::Exponential),
            "cauchy" => Ok(Self::Cauchy),
            other => Err(Error::Unknown {
                kind: "null family",
                value: other.into(),
            }),
        }
    }
}

impl NullFamily {
    /// Draw with mean 0 and unit variance (location 0, scale 1 for Cauchy).
    pub(crate) fn sample_standard(self, rng: &mut StreamRng) -> f64 {
        match self {
            Self::Normal => rng.sample(StandardNormal),
            Self::Uniform => 3f64.sqrt() * (2.0 * rng.random::<f64>() - 1.0),
            Self::Exponential => rng.sample::<f64, _>(Exp1) - 1.0,
            Self::Cauchy => Cauchy::new(0.0, 1.0).expect("valid scale").sample(rng),
        }
    }
}

/// Known null law: mean and standard deviation, or median and scale for the
/// Cauchy family.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleNullSpec {
    pub family: NullFamily,
    pub mu0: f64,
    pub sigma0: f64,
}

impl OracleNullSpec {
    pub fn new(family: NullFamily, mu0: f64, sigma0: f64) -> Result<Self> {
        if !mu0.is_finite() || !(sigma0 > 0.0) || !sigma0.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "null spec needs finite mu0 and sigma0 > 0, got mu0={mu0}, sigma0={sigma0}"
            )));
        }
        Ok(Self { family, mu0, sigma0 })
    }

    /// Standardized law of the family.
    pub fn standard(family: NullFamily) -> Self {
        Self {
            family,
            mu0: 0.0,
            sigma0: 1.0,
        }
    }

    #[inline]
    pub fn standardize(&self, x: f64) -> f64 {
        (x - self.mu0) / self.sigma0
    }

    pub fn sample(&self, rng: &mut StreamRng) -> f64 {
        self.mu0 + self.sigma0 * self.family.sample_standard(rng)
    }
}
