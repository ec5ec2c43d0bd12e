//! Data generators for the simulation settings, power experiments and the
//! exact moment fixtures.

mod experiment;
mod fixtures;


use rand::Rng;
use rand_distr::{Cauchy, Distribution, Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::comparators::{NullFamily, OracleNullSpec};
use crate::data::ObservationMatrix;
use crate::error::{Error, Result};
use crate::rng::{tags, RngSeed, StreamRng};
use crate::theory::{theta_tau, Mixing, ThetaSetting};

pub use experiment::{
    grid_experiment, power_experiment, stream_length_experiment, write_power_csv, ExperimentConfig, PowerCurve,
    PowerPoint,
};
pub use fixtures::{zero_variance_fixture, oscillating_variance_fixture, covariance_counterexample, CovarianceCounterexample, MomentFixture};

/// Null and anomalous laws of a simulation setting.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Setting {
    /// `N(θ, 1)` against `N(0, 1)`.
    NormalShift,
    /// Exponential with rate `3/2 - θ` against rate `3/2`.
    ExponentialRate,
    /// Density proportional to `e^{θx}` on `[0, 1]` against `U[0, 1]`.
    UniformTilt,
    /// `N(0, σ²) + θ` against `N(0, 1)`.
    ConvolutionNormal { sigma: f64 },
    /// `N(0, σ²) + θ Q` with `Q` triangular on `[0, 1]`, against `N(0, 1)`.
    ConvolutionTriangular { sigma: f64 },
    /// Standard Cauchy shifted by `θ` against standard Cauchy.
    CauchyShift,
}

impl std::str::FromStr for Setting {
    type Err = Error;
    /// `normal-shift`, `exponential-rate`, `uniform-tilt`, `cauchy-shift`,
    /// `convolution-normal:<sigma>` or `convolution-triangular:<sigma>`.
    fn from_str(s: &str) -> Result<Self> {
        let (name, arg) = match s.split_once(':') {
            Some((a, b)) => (a, Some(b)),
            None => (s, None),
        };
        let sigma = || -> Result<f64> {
            let v: f64 = arg
                .ok_or_else(|| Error::InvalidParameter(format!("setting {name} needs ':<sigma>'")))?
                .parse()
                .map_err(|_| Error::InvalidParameter(format!("bad sigma in {s}")))?;
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::InvalidParameter(format!("sigma must be finite and >= 0 in {s}")));
            }
            Ok(v)
        };
        match name {
            "normal-shift" => Ok(Self::NormalShift),
            "exponential-rate" => Ok(Self::ExponentialRate),
            "uniform-tilt" => Ok(Self::UniformTilt),
            "cauchy-shift" => Ok(Self::CauchyShift),
            "convolution-normal" => Ok(Self::ConvolutionNormal { sigma: sigma()? }),
            "convolution-triangular" => Ok(Self::ConvolutionTriangular { sigma: sigma()? }),
            other => Err(Error::Unknown {
                kind: "setting",
                value: other.into(),
            }),
        }
    }
}

impl std::fmt::Display for Setting {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::NormalShift => write!(f, "normal-shift"),
            Self::ExponentialRate => write!(f, "exponential-rate"),
            Self::UniformTilt => write!(f, "uniform-tilt"),
            Self::CauchyShift => write!(f, "cauchy-shift"),
            Self::ConvolutionNormal { sigma } => write!(f, "convolution-normal:{sigma}"),
            Self::ConvolutionTriangular { sigma } => write!(f, "convolution-triangular:{sigma}"),
        }
    }
}

impl Setting {
    pub fn theta_setting(&self) -> ThetaSetting {
        match *self {
            Self::NormalShift => ThetaSetting::ExpFamily { sigma0: 1.0 },
            Self::ExponentialRate => ThetaSetting::ExpFamily { sigma0: 2.0 / 3.0 },
            Self::UniformTilt => ThetaSetting::ExpFamily {
                sigma0: 1.0 / 12f64.sqrt(),
            },
            Self::ConvolutionNormal { sigma } => ThetaSetting::Convolution {
                sigma,
                mixing: Mixing::PointMass,
            },
            Self::ConvolutionTriangular { sigma } => ThetaSetting::Convolution {
                sigma,
                mixing: Mixing::Triangular,
            },
            Self::CauchyShift => ThetaSetting::Cauchy,
        }
    }

    /// The null law as seen by the distribution-aware comparator.
    pub fn oracle_spec(&self) -> OracleNullSpec {
        match self {
            Self::NormalShift | Self::ConvolutionNormal { .. } | Self::ConvolutionTriangular { .. } => {
                OracleNullSpec::standard(NullFamily::Normal)
            }
            Self::ExponentialRate => OracleNullSpec {
                family: NullFamily::Exponential,
                mu0: 2.0 / 3.0,
                sigma0: 2.0 / 3.0,
            },
            Self::UniformTilt => OracleNullSpec {
                family: NullFamily::Uniform,
                mu0: 0.5,
                sigma0: 1.0 / 12f64.sqrt(),
            },
            Self::CauchyShift => OracleNullSpec::standard(NullFamily::Cauchy),
        }
    }

    fn draw_null(&self, rng: &mut StreamRng) -> f64 {
        match self {
            Self::NormalShift | Self::ConvolutionNormal { .. } | Self::ConvolutionTriangular { .. } => {
                rng.sample(StandardNormal)
            }
            Self::ExponentialRate => rng.sample::<f64, _>(Exp1) / 1.5,
            Self::UniformTilt => rng.random::<f64>(),
            Self::CauchyShift => cauchy(rng),
        }
    }

    fn draw_anomalous(&self, theta: f64, rng: &mut StreamRng) -> f64 {
        match *self {
            Self::NormalShift => theta + rng.sample::<f64, _>(StandardNormal),
            Self::ExponentialRate => rng.sample::<f64, _>(Exp1) / (1.5 - theta),
            Self::UniformTilt => tilted_uniform(theta, rng.random::<f64>()),
            Self::ConvolutionNormal { sigma } => sigma * rng.sample::<f64, _>(StandardNormal) + theta,
            Self::ConvolutionTriangular { sigma } => {
                let q = 0.5 * (rng.random::<f64>() + rng.random::<f64>());
                sigma * rng.sample::<f64, _>(StandardNormal) + theta * q
            }
            Self::CauchyShift => theta + cauchy(rng),
        }
    }
}

fn cauchy(rng: &mut StreamRng) -> f64 {
    Cauchy::new(0.0, 1.0).expect("valid scale").sample(rng)
}

/// Inverse of `F_θ(x) = (e^{θx} - 1) / (e^θ - 1)` on `[0, 1]`.
pub fn tilted_uniform(theta: f64, u: f64) -> f64 {
    if theta.abs() < 1e-6 {
        u + theta * u * (1.0 - u) / 2.0
    } else {
        (u * theta.exp_m1()).ln_1p() / theta
    }
}

/// CDF of the tilted uniform law.
pub fn tilted_uniform_cdf(theta: f64, x: f64) -> f64 {
    let x = x.clamp(0.0, 1.0);
    if theta.abs() < 1e-6 {
        x - theta * x * (1.0 - x) / 2.0
    } else {
        (theta * x).exp_m1() / theta.exp_m1()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SignalSpec {
    pub setting: Setting,
    pub tau: f64,
    pub beta: f64,
    pub n: usize,
    pub t: usize,
    /// Overrides `ceil(n^{1-β})` when set.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub anomalies: Option<usize>,
}

impl SignalSpec {
    pub fn new(setting: Setting, tau: f64, beta: f64, n: usize, t: usize) -> Result<Self> {
        let s = Self {
            setting,
            tau,
            beta,
            n,
            t,
            anomalies: None,
        };
        s.validate()?;
        Ok(s)
    }

    /// Fixes the anomaly count and sets `β = 1 - ln(s) / ln(n)` so that
    /// `n^{1-β} = s`.
    pub fn with_anomalies(setting: Setting, tau: f64, s: usize, n: usize, t: usize) -> Result<Self> {
        if s < 1 || s > n || n < 3 {
            return Err(Error::InvalidParameter(format!("need 1 <= s <= n and n >= 3, got s={s}, n={n}")));
        }
        let beta = (1.0 - (s as f64).ln() / (n as f64).ln()).clamp(0.5 + 1e-12, 1.0 - 1e-12);
        let sp = Self {
            setting,
            tau,
            beta,
            n,
            t,
            anomalies: Some(s),
        };
        sp.validate()?;
        Ok(sp)
    }

    pub fn with_tau(&self, tau: f64) -> Result<Self> {
        let s = Self { tau, ..*self };
        s.validate()?;
        Ok(s)
    }

    fn validate(&self) -> Result<()> {
        if self.n < 2 || self.t < 1 {
            return Err(Error::InvalidParameter(format!("need n >= 2, t >= 1, got n={}, t={}", self.n, self.t)));
        }
        if !(self.beta > 0.5 && self.beta < 1.0) {
            return Err(Error::InvalidParameter(format!("beta must lie in (1/2, 1), got {}", self.beta)));
        }
        let th = self.theta()?;
        if !th.is_finite() {
            return Err(Error::InvalidParameter("signal parameter is not finite".into()));
        }
        if self.setting == Setting::ExponentialRate && th >= 1.5 {
            return Err(Error::InvalidParameter(format!(
                "exponential-rate needs theta < 3/2 to keep the rate positive, got {th}"
            )));
        }
        if self.anomaly_count() > self.n {
            return Err(Error::InvalidParameter("more anomalies than subjects".into()));
        }
        Ok(())
    }

    /// `|S|`.
    pub fn anomaly_count(&self) -> usize {
        self.anomalies
            .unwrap_or_else(|| ((self.n as f64).powf(1.0 - self.beta).ceil() as usize).max(1))
    }

    pub fn theta(&self) -> Result<f64> {
        theta_tau(self.setting.theta_setting(), self.tau, self.beta, self.n, self.t)
    }
}

/// Draws a panel whose first `|S|` rows are anomalous. Column `j` uses the
/// stream `seed.derive(DATA).derive(j)`.
pub fn generate(spec: &SignalSpec, seed: RngSeed) -> Result<ObservationMatrix> {
    spec.validate()?;
    let (n, t) = (spec.n, spec.t);
    let s = spec.anomaly_count();
    let theta = spec.theta()?;
    let base = seed.derive(tags::DATA);
    let mut values = Vec::with_capacity(n * t);
    for j in 0..t {
        let mut rng = base.derive(j as u64).rng();
        for i in 0..n {
            let v = if i < s && theta != 0.0 {
                spec.setting.draw_anomalous(theta, &mut rng)
            } else {
                spec.setting.draw_null(&mut rng)
            };
            values.push(v);
        }
    }
    ObservationMatrix::from_columns_flat(n, t, values)
}
