//! Rank-loss constants: `ξ_σ`, `ρ̃`, `Υ₀`, `ζ_G` and the signal
//! parameterization `θ_τ`.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use serde::{Deserialize, Serialize};
use statrs::distribution::{Continuous, ContinuousCDF};
use statrs::function::erf::erf;
use statrs::statistics::Distribution;

use super::boundary::rho;
use super::quad::integrate;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

fn std_normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * PI).sqrt()
}

/// `ξ_σ = sqrt(12 (E[Φ(σZ)²] - 1/4))`, by quadrature. Uses
/// `E[Φ(σZ)²] - 1/4 = E[(Φ(σZ) - 1/2)²]` and symmetry of the integrand.
pub fn xi_sigma(sigma: f64) -> Result<f64> {
    if !(sigma >= 0.0) {
        return Err(Error::InvalidParameter(format!("sigma must be >= 0, got {sigma}")));
    }
    if sigma.is_infinite() {
        return Ok(3f64.sqrt());
    }
    let f = |z: f64| {
        let e = erf(sigma * z * FRAC_1_SQRT_2);
        e * e * std_normal_pdf(z)
    };
    // 12 * 2 * ∫_0^∞ (erf/2)^2 φ
    let xi_sq = 6.0 * integrate(f, 0.0, f64::INFINITY, 1e-13)?;
    Ok(xi_sq.max(0.0).sqrt())
}

/// `sqrt(π (σ² + 1) / 6) ρ(β, ξ_σ)`.
pub fn rho_tilde(beta: f64, sigma: f64) -> Result<f64> {
    let xi = xi_sigma(sigma)?;
    Ok((PI * (sigma * sigma + 1.0) / 6.0).sqrt() * rho(beta, xi)?)
}

/// Base laws with a closed form for `Υ₀`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BaseFamily {
    Uniform,
    Exponential,
    Normal,
}

impl std::str::FromStr for BaseFamily {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(Self::Uniform),
            "exponential" => Ok(Self::Exponential),
            "normal" => Ok(Self::Normal),
            other => Err(Error::Unknown {
                kind: "base family",
                value: other.into(),
            }),
        }
    }
}

/// Closed-form `Υ₀`.
pub fn upsilon0<S: Scalar>(family: BaseFamily) -> S {
    match family {
        BaseFamily::Uniform => S::one(),
        BaseFamily::Exponential => S::lit(2.0) / S::lit(3.0).sqrt(),
        BaseFamily::Normal => (S::lit(PI) / S::lit(3.0)).sqrt(),
    }
}

/// `Υ₀ = (√3 E[max(Z₁, Z₂)])⁻¹` for standardized draws from `d`, using
/// `E[max(X₁, X₂)] = ∫ 2 x f(x) F(x) dx`.
pub fn upsilon0_numeric<D>(d: &D) -> Result<f64>
where
    D: Continuous<f64, f64> + ContinuousCDF<f64, f64> + Distribution<f64>,
{
    let (mean, sd) = match (d.mean(), d.std_dev()) {
        (Some(m), Some(s)) if m.is_finite() && s.is_finite() && s > 0.0 => (m, s),
        _ => return Err(Error::InvalidParameter("base law needs a finite mean and variance".into())),
    };
    // integrate over z = (x - mean) / sd so that location and scale do not
    // move the mass away from where the quadrature nodes sit
    let (lo, hi) = ((d.min() - mean) / sd, (d.max() - mean) / sd);
    let e_max = integrate(
        |z| {
            let x = mean + sd * z;
            2.0 * z * d.pdf(x) * sd * d.cdf(x)
        },
        lo,
        hi,
        1e-12,
    )?;
    Ok(1.0 / (3f64.sqrt() * e_max))
}

/// `Υ₀` from a sample: standardize by the sample moments and estimate
/// `E[max(Z₁, Z₂)]` with the U-statistic `Σ_k z_(k) 2 (k - 1) / (m (m - 1))`.
pub fn upsilon0_from_samples(samples: &[f64]) -> Result<f64> {
    let m = samples.len();
    if m < 2 || samples.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter("need at least two finite samples".into()));
    }
    let mf = m as f64;
    let mean = samples.iter().sum::<f64>() / mf;
    let sd = (samples.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (mf - 1.0)).sqrt();
    if !(sd > 0.0) {
        return Err(Error::InvalidParameter("samples have zero variance".into()));
    }
    let mut z: Vec<f64> = samples.iter().map(|v| (v - mean) / sd).collect();
    z.sort_unstable_by(f64::total_cmp);
    let e_max: f64 = z.iter().enumerate().map(|(k, v)| v * 2.0 * k as f64).sum::<f64>() / (mf * (mf - 1.0));
    Ok(1.0 / (3f64.sqrt() * e_max))
}

/// Mixing law `G` of a convolution signal.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mixing {
    PointMass,
    Triangular,
}

impl Mixing {
    /// `μ(G)`.
    pub fn mean_factor(self) -> f64 {
        match self {
            Self::PointMass => 1.0,
            Self::Triangular => 0.5,
        }
    }

    /// `s(G)`.
    pub fn scale_factor(self) -> f64 {
        1.0
    }
}

/// `ζ_G(β, σ) = sqrt(π (σ² + 1) s² ρ(β, ξ_σ) / (6 μ² ρ(β, σ)))`.
pub fn zeta_g(beta: f64, sigma: f64, g: Mixing) -> Result<f64> {
    let base = rho(beta, sigma)?;
    if base == 0.0 {
        return Err(Error::ZeroBoundary { beta, sigma });
    }
    let (s, mu) = (g.scale_factor(), g.mean_factor());
    let num = PI * (sigma * sigma + 1.0) * s * s * rho(beta, xi_sigma(sigma)?)?;
    Ok((num / (6.0 * mu * mu * base)).sqrt())
}

/// Signal family used to translate `τ` into a parameter `θ`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "setting", rename_all = "kebab-case")]
pub enum ThetaSetting {
    /// One-parameter exponential family with null standard deviation `sigma0`.
    ExpFamily { sigma0: f64 },
    Convolution { sigma: f64, mixing: Mixing },
    Cauchy,
}

pub fn theta_tau(setting: ThetaSetting, tau: f64, beta: f64, n: usize, t: usize) -> Result<f64> {
    if !(tau >= 0.0) || !tau.is_finite() {
        return Err(Error::InvalidParameter(format!("tau must be finite and >= 0, got {tau}")));
    }
    if n < 2 || t < 1 {
        return Err(Error::InvalidParameter(format!("need n >= 2 and t >= 1, got n={n}, t={t}")));
    }
    let c = 2.0 * (n as f64).ln() / t as f64;
    Ok(match setting {
        ThetaSetting::ExpFamily { sigma0 } => {
            if !(sigma0 > 0.0) {
                return Err(Error::InvalidParameter(format!("sigma0 must be > 0, got {sigma0}")));
            }
            tau * (c * rho(beta, 1.0)? / (sigma0 * sigma0)).sqrt()
        }
        ThetaSetting::Convolution { sigma, mixing } => tau / mixing.scale_factor() * (c * rho(beta, sigma)?).sqrt(),
        ThetaSetting::Cauchy => tau * PI * (c * rho(beta, 1.0)? / 3.0).sqrt(),
    })
}
