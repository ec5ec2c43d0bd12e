//! Double-exponential quadrature over possibly infinite intervals.

use crate::error::{Error, Result};

/// `∫_lo^hi f(x) dx`; either endpoint may be infinite.
pub(crate) fn integrate(f: impl Fn(f64) -> f64, lo: f64, hi: f64, tol: f64) -> Result<f64> {
    let out = match (lo.is_finite(), hi.is_finite()) {
        (true, true) => quadrature::integrate(&f, lo, hi, tol),
        (true, false) => quadrature::integrate(
            |u| {
                let w = 1.0 - u;
                f(lo + u / w) / (w * w)
            },
            0.0,
            1.0,
            tol,
        ),
        (false, true) => quadrature::integrate(
            |u| {
                let w = 1.0 - u;
                f(hi - u / w) / (w * w)
            },
            0.0,
            1.0,
            tol,
        ),
        (false, false) => quadrature::integrate(
            |u| {
                let w = 1.0 - u * u;
                f(u / w) * (1.0 + u * u) / (w * w)
            },
            -1.0,
            1.0,
            tol,
        ),
    };
    if !out.integral.is_finite() || out.error_estimate > tol.max(1e-14) * 1e3 {
        return Err(Error::Quadrature(format!(
            "integral {} with error estimate {} after {} evaluations",
            out.integral, out.error_estimate, out.num_function_evaluations
        )));
    }
    Ok(out.integral)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gaussian_mass() {
        let phi = |x: f64| (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
        assert!((integrate(phi, f64::NEG_INFINITY, f64::INFINITY, 1e-12).unwrap() - 1.0).abs() < 1e-10);
        assert!((integrate(phi, 0.0, f64::INFINITY, 1e-12).unwrap() - 0.5).abs() < 1e-10);
        assert!((integrate(|x| x * x, 0.0, 3.0, 1e-12).unwrap() - 9.0).abs() < 1e-10);
    }
}
