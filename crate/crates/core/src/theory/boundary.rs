//! Detection boundary of the heteroskedastic normal location model and the
//! inequality system characterizing it.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

fn check_beta<S: Scalar>(beta: S) -> Result<()> {
    let half = S::lit(0.5);
    if !(beta > half && beta < S::one()) {
        return Err(Error::InvalidParameter(format!("beta must lie in (1/2, 1), got {beta}")));
    }
    Ok(())
}

/// Detection boundary `ρ(β, σ)`.
pub fn rho<S: Scalar>(beta: S, sigma: S) -> Result<S> {
    check_beta(beta)?;
    if !(sigma >= S::zero()) || !sigma.is_finite() {
        return Err(Error::InvalidParameter(format!("sigma must be finite and >= 0, got {sigma}")));
    }
    let one = S::one();
    let two = S::lit(2.0);
    let s2 = sigma * sigma;
    let upper = || {
        let d = one - sigma * (one - beta).sqrt();
        d * d
    };
    let v = if s2 < two {
        if beta <= one - s2 / S::lit(4.0) {
            (two - s2) * (beta - S::lit(0.5))
        } else {
            upper()
        }
    } else if beta <= one - one / s2 {
        S::zero()
    } else {
        upper()
    };
    Ok(v)
}

/// Both inequalities of the boundary system at one `(γ, β, r, q)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BoundarySystem {
    pub holds: bool,
    /// `1 - β - (√q - √r)² / γ²`, shared left-hand side.
    pub lhs: f64,
    /// Right-hand side of the first inequality, `(1 - q) / 2`.
    pub rhs_first: f64,
    pub first: bool,
    pub second: bool,
}

pub fn check_boundary_system(gamma: f64, beta: f64, r: f64, q: f64) -> Result<BoundarySystem> {
    if !(gamma > 0.0) {
        return Err(Error::InvalidParameter(format!("gamma must be > 0, got {gamma}")));
    }
    check_beta(beta)?;
    if !(q > 0.0 && q <= 1.0) || !(r >= 0.0) {
        return Err(Error::InvalidParameter(format!("need q in (0, 1] and r >= 0, got q={q}, r={r}")));
    }
    let d = q.sqrt() - r.sqrt();
    let lhs = 1.0 - beta - d * d / (gamma * gamma);
    let rhs_first = (1.0 - q) / 2.0;
    let first = lhs > rhs_first;
    let second = lhs > 0.0;
    Ok(BoundarySystem {
        holds: first && second,
        lhs,
        rhs_first,
        first,
        second,
    })
}

/// Smallest `r` for which some `q` on a uniform grid of `q_points` points in
/// `(0, 1]` satisfies the system, located by bisection on `r ∈ [0, q]`.
/// Returns `None` when no grid `q` admits any `r`.
pub fn boundary_infimum(gamma: f64, beta: f64, q_points: usize) -> Result<Option<f64>> {
    let mut best: Option<f64> = None;
    for k in 1..=q_points {
        let q = k as f64 / q_points as f64;
        // on [0, q] the system gets easier as r grows, and r = q is the easiest point
        if !check_boundary_system(gamma, beta, q, q)?.holds {
            continue;
        }
        if check_boundary_system(gamma, beta, 0.0, q)?.holds {
            return Ok(Some(0.0));
        }
        let (mut lo, mut hi) = (0.0, q);
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if check_boundary_system(gamma, beta, mid, q)?.holds {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        best = Some(best.map_or(hi, |b: f64| b.min(hi)));
    }
    Ok(best)
}
