use std::f64::consts::PI;

use rankhc::theory::{
    rho, rho_tilde, theta_tau, upsilon0, upsilon0_from_samples, upsilon0_numeric, xi_sigma, zeta_g, BaseFamily,
    Mixing, ThetaSetting,
};
use rankhc::RngSeed;
use rand::Rng;
use statrs::distribution::{Beta, Exp, Normal, Uniform};

#[test]
fn upsilon_numeric_matches_closed_forms() {
    let u = upsilon0_numeric(&Uniform::new(-3.0, 7.0).unwrap()).unwrap();
    assert!((u - 1.0).abs() < 1e-9);
    let e = upsilon0_numeric(&Exp::new(2.5).unwrap()).unwrap();
    assert!((e - upsilon0::<f64>(BaseFamily::Exponential)).abs() < 1e-9);
    let n = upsilon0_numeric(&Normal::new(4.0, 0.3).unwrap()).unwrap();
    assert!((n - upsilon0::<f64>(BaseFamily::Normal)).abs() < 1e-9);
    assert_eq!(upsilon0::<f32>(BaseFamily::Uniform), 1.0f32);
}

#[test]
fn upsilon_is_at_least_one_on_beta_laws() {
    let mut last = f64::INFINITY;
    // symmetric Beta laws flatten towards the uniform as a -> 1
    for a in [6.0, 3.0, 2.0, 1.5, 1.2, 1.05, 1.0] {
        let v = upsilon0_numeric(&Beta::new(a, a).unwrap()).unwrap();
        assert!(v >= 1.0 - 1e-12, "a={a}: {v}");
        assert!(v <= last + 1e-12, "not decreasing towards the uniform at a={a}");
        last = v;
    }
    assert!((last - 1.0).abs() < 1e-9);
    let skew = upsilon0_numeric(&Beta::new(2.0, 5.0).unwrap()).unwrap();
    assert!(skew > 1.0);
}

#[test]
fn upsilon_from_samples_converges() {
    let mut rng = RngSeed(3).rng();
    let xs: Vec<f64> = (0..200_000).map(|_| -rng.random::<f64>().ln()).collect();
    let v = upsilon0_from_samples(&xs).unwrap();
    assert!((v - 2.0 / 3f64.sqrt()).abs() < 0.01, "{v}");
}

#[test]
fn xi_limits() {
    assert_eq!(xi_sigma(0.0).unwrap(), 0.0);
    assert!((xi_sigma(1.0).unwrap() - 1.0).abs() < 1e-10);
    assert!((xi_sigma(1e4).unwrap().powi(2) - 3.0).abs() < 1e-3);
}

#[test]
fn rho_is_continuous_across_seams() {
    for k in 0..1000 {
        let beta = 0.5 + 0.5 * (k as f64 + 0.5) / 1000.0;
        // sigma values where the branch changes at this beta
        let s_lower = (4.0 * (1.0 - beta)).sqrt();
        let s_upper = 1.0 / (1.0 - beta).sqrt();
        for s in [s_lower, s_upper, 2f64.sqrt()] {
            let a: f64 = rho(beta, s * (1.0 - 1e-13)).unwrap();
            let b: f64 = rho(beta, s * (1.0 + 1e-13)).unwrap();
            assert!((a - b).abs() < 1e-9, "beta={beta}, sigma={s}");
        }
    }
}

#[test]
fn rho_generic_precision_agrees() {
    for &(b, s) in &[(0.6, 0.3), (0.75, 1.0), (0.9, 1.7), (0.95, 3.0)] {
        let d: f64 = rho(b, s).unwrap();
        let f: f32 = rho(b as f32, s as f32).unwrap();
        assert!((d - f as f64).abs() < 1e-5);
    }
}

#[test]
fn rho_tilde_reduces_at_unit_sigma() {
    for beta in [0.55, 0.7, 0.85, 0.99] {
        let want = (PI / 3.0).sqrt() * rho(beta, 1.0).unwrap();
        assert!((rho_tilde(beta, 1.0).unwrap() - want).abs() < 1e-9);
    }
}

#[test]
fn zeta_point_mass_at_unit_sigma_is_the_normal_upsilon() {
    for beta in [0.6, 0.8, 0.95] {
        let z = zeta_g(beta, 1.0, Mixing::PointMass).unwrap();
        assert!((z - (PI / 3.0).sqrt()).abs() < 1e-9);
    }
}

#[test]
fn theta_scales_with_tau() {
    let s = ThetaSetting::ExpFamily { sigma0: 1.0 };
    let a = theta_tau(s, 1.0, 0.7, 500, 7).unwrap();
    let b = theta_tau(s, 2.0, 0.7, 500, 7).unwrap();
    assert!((b - 2.0 * a).abs() < 1e-12);
    assert_eq!(theta_tau(s, 0.0, 0.7, 500, 7).unwrap(), 0.0);
    let c = theta_tau(ThetaSetting::Cauchy, 1.0, 0.7, 500, 7).unwrap();
    assert!((c / a - PI / 3f64.sqrt()).abs() < 1e-12);
    assert!(theta_tau(s, -1.0, 0.7, 500, 7).is_err());
}
