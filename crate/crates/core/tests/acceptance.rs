//! Acceptance checks, one line per criterion. Runs without the libtest
//! harness so the summary is always printed.

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::Instant;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use rankhc::calibration::{p_value_mc, tabulate_null};
use rankhc::comparators::{NullFamily, OracleNullSpec};
use rankhc::hc::exceedance_counts;
use rankhc::simgen::{
    zero_variance_fixture, oscillating_variance_fixture, covariance_counterexample, grid_experiment, power_experiment, ExperimentConfig, PowerCurve,
    Setting, SignalSpec,
};
use rankhc::stats::{ks_two_sample, ks_two_sample_p};
use rankhc::theory::{boundary_infimum, rho, upsilon0, upsilon0_numeric, xi_sigma, BaseFamily};
use rankhc::{default_k_n, make_grid, test_random_ties, GridKind, Method, NullTable, Observations, RngSeed};

type Outcome = (bool, String);

const MC_PQ: usize = 20_000;
const MC_T: usize = 10_000;

fn table(kind: GridKind, n: usize, t: usize, k_n: u32, seed: u64) -> NullTable {
    let g = make_grid(kind, n, t, k_n).unwrap();
    tabulate_null(&g, MC_PQ, MC_T, RngSeed(seed)).unwrap()
}

fn null_panel(family: NullFamily, n: usize, t: usize, seed: RngSeed) -> Observations {
    let spec = OracleNullSpec::standard(family);
    let mut rng = seed.rng();
    let v: Vec<f64> = (0..n * t).map(|_| spec.sample(&mut rng)).collect();
    Observations::from_columns_flat(n, t, v).unwrap()
}

fn c1_level(tables: &[&NullTable]) -> Outcome {
    let trials = 2_000u64;
    let alpha = 0.05;
    let tol = 3.0 * (alpha * (1.0 - alpha) / trials as f64).sqrt();
    let mut ok = true;
    let mut parts = Vec::new();
    for tb in tables {
        for fam in [NullFamily::Normal, NullFamily::Uniform, NullFamily::Cauchy] {
            let base = RngSeed(1_000 + tb.n() as u64).derive(fam as u64);
            let rej: u64 = (0..trials)
                .into_par_iter()
                .map(|k| {
                    let m = null_panel(fam, tb.n(), tb.t(), base.derive(k));
                    test_random_ties(&m, tb, base.derive(k).derive(1)).unwrap().rejects(alpha) as u64
                })
                .sum();
            let rate = rej as f64 / trials as f64;
            ok &= (rate - alpha).abs() <= tol;
            parts.push(format!("({},{}) {fam:?}={rate:.4}", tb.n(), tb.t()));
        }
    }
    (ok, format!("{} within ±{tol:.4}", parts.join(" ")))
}

fn c2_distribution_free(tb: &NullTable) -> Outcome {
    let draw = |fam: NullFamily, root: u64| -> Vec<f64> {
        (0..10_000u64)
            .into_par_iter()
            .map(|k| {
                let s = RngSeed(root).derive(k);
                let m = null_panel(fam, tb.n(), tb.t(), s);
                test_random_ties(&m, tb, s.derive(1)).unwrap().statistic
            })
            .collect()
    };
    let a = draw(NullFamily::Normal, 21);
    let b = draw(NullFamily::Cauchy, 22);
    let d = ks_two_sample(&a, &b);
    let p = ks_two_sample_p(d, a.len(), b.len());
    (p > 0.01, format!("KS D={d:.4}, p={p:.3} (need > 0.01)"))
}

fn c3_monotone_invariance(tb: &NullTable) -> Outcome {
    let (n, t) = (tb.n(), tb.t());
    let mut same = 0;
    for k in 0..100u64 {
        let mut rng = RngSeed(31).derive(k).rng();
        // small integer values so that tie-breaking is exercised
        let v: Vec<f64> = (0..n * t).map(|_| rand::Rng::random_range(&mut rng, 0..12) as f64).collect();
        let m = Observations::from_columns_flat(n, t, v).unwrap();
        let mut mapped = m.clone();
        for j in 0..t {
            mapped = match j % 3 {
                0 => mapped.map_column(j, |x| 2.5 * x - 4.0),
                1 => mapped.map_column(j, f64::exp),
                _ => mapped.map_column(j, |x| x * x * x),
            }
            .unwrap();
        }
        let seed = RngSeed(32).derive(k);
        if test_random_ties(&m, tb, seed).unwrap() == test_random_ties(&mapped, tb, seed).unwrap() {
            same += 1;
        }
    }
    (same == 100, format!("{same}/100 results bit-identical"))
}

fn c4_constants() -> Outcome {
    let u: f64 = upsilon0(BaseFamily::Uniform);
    let e = upsilon0_numeric(&statrs::distribution::Exp::new(1.0).unwrap()).unwrap();
    let nm = upsilon0_numeric(&statrs::distribution::Normal::new(0.0, 1.0).unwrap()).unwrap();
    let re = (e / (2.0 / 3f64.sqrt()) - 1.0).abs();
    let rn = (nm / (PI / 3.0).sqrt() - 1.0).abs();
    let xi = (xi_sigma(1.0).unwrap() - 1.0).abs();
    let ok = u == 1.0 && re < 1e-4 && rn < 1e-4 && xi < 1e-8;
    (
        ok,
        format!("Y0(unif)={u}, rel err exp={re:.1e}, normal={rn:.1e}, |xi_1-1|={xi:.1e}"),
    )
}

fn c5_boundary() -> Outcome {
    let mut exact = true;
    for k in 1..=99 {
        let beta = 0.5 + 0.5 * k as f64 / 100.0;
        exact &= rho(beta, 0.0).unwrap() == 2.0 * beta - 1.0;
    }
    // seams: beta = 1 - sigma²/4 for sigma² < 2 and beta = 1 - 1/sigma² beyond
    let mut seam_gap: f64 = 0.0;
    for k in 0..1000 {
        let s2 = 0.01 + 3.98 * k as f64 / 999.0;
        let sigma = s2.sqrt();
        let seam = if s2 < 2.0 { 1.0 - s2 / 4.0 } else { 1.0 - 1.0 / s2 };
        if seam <= 0.5 + 1e-9 || seam >= 1.0 - 1e-9 {
            continue;
        }
        let (a, b): (f64, f64) = (rho(seam - 1e-12, sigma).unwrap(), rho(seam + 1e-12, sigma).unwrap());
        seam_gap = seam_gap.max((a - b).abs());
    }
    let mut worst: f64 = 0.0;
    for i in 0..20 {
        let beta = 0.5 + 0.5 * (i as f64 + 0.5) / 20.0;
        for j in 0..20 {
            let gamma = 0.1 + 2.9 * j as f64 / 19.0;
            let want: f64 = rho(beta, gamma).unwrap();
            let got = boundary_infimum(gamma, beta, 2_000).unwrap().unwrap_or(f64::INFINITY);
            worst = worst.max((got - want).abs());
        }
    }
    let ok = exact && seam_gap < 1e-9 && worst < 1e-3;
    (
        ok,
        format!("rho(b,0)=2b-1 exact: {exact}; seam gap {seam_gap:.1e}; infimum error {worst:.1e}"),
    )
}

fn c6_covariance_counterexample() -> Outcome {
    let start = Instant::now();
    let mut ok = true;
    let mut parts = Vec::new();
    for (n, s) in [(10, 4), (50, 7)] {
        let d = covariance_counterexample(n, s).unwrap();
        ok &= d.corrected.identity_holds(s)
            && d.corrected.sum_var == (s as f64 - 1.0) / 4.0
            && d.corrected.sum_cov == (s as f64 - 1.0) * (s as f64 - 2.0) / 4.0;
        parts.push(format!("(n={n},s={s}) var={} cov={}", d.corrected.sum_var, d.corrected.sum_cov));
    }
    let secs = start.elapsed().as_secs_f64();
    (ok && secs < 1.0, format!("{} in {secs:.3}s", parts.join(", ")))
}

fn c7_moments() -> Outcome {
    let b = zero_variance_fixture(0.7, 100_000, RngSeed(71)).unwrap();
    let c = oscillating_variance_fixture(5, 100_000, RngSeed(72)).unwrap();
    (
        b.within(4.0) && c.within(4.0),
        format!("max |z|: zero-variance {:.2}, oscillating {:.2} (limit 4)", b.max_z(), c.max_z()),
    )
}

/// `p_{k+1} >= p_k` unless the drop fits inside the larger 95% half-width.
fn monotone(c: &PowerCurve) -> bool {
    c.points
        .windows(2)
        .all(|w| w[1].power >= w[0].power - w[0].half_width().max(w[1].half_width()))
}

/// Two-sided 95% noise of a difference of two proportions.
fn diff_noise(a: f64, b: f64, trials: u64) -> f64 {
    1.96 * ((a * (1.0 - a) + b * (1.0 - b)) / trials as f64).sqrt()
}

fn curve(cs: &[PowerCurve], m: Method) -> &PowerCurve {
    cs.iter().find(|c| c.method == m).unwrap()
}

fn fmt_curve(c: &PowerCurve) -> String {
    c.points.iter().map(|p| format!("{:.3}", p.power)).collect::<Vec<_>>().join("/")
}

fn c8_power(tb: &NullTable) -> Vec<(&'static str, Outcome)> {
    let taus = [0.0, 0.5, 1.0, 1.5, 2.0];
    let cfg = ExperimentConfig {
        alpha: 0.05,
        trials: 500,
        permutations: 199,
        oracle_mc: 10_000,
        ..Default::default()
    };
    let run = |setting: Setting, methods: &[Method], seed: u64| {
        let spec = SignalSpec::with_anomalies(setting, 0.0, 3, 500, 7).unwrap();
        power_experiment(&spec, &taus, methods, &cfg, Some(tb), RngSeed(seed)).unwrap()
    };
    let normal = run(Setting::NormalShift, &[Method::RandomTiesMc], 81);
    let uniform = run(Setting::UniformTilt, &[Method::RandomTiesMc, Method::PermHc], 82);
    let cauchy = run(Setting::CauchyShift, &[Method::RandomTiesMc, Method::DistHc, Method::PermHc], 83);
    let conv = run(Setting::ConvolutionNormal { sigma: 0.5 }, &[Method::RandomTiesMc, Method::DistHc], 84);

    let rank_curves = [&normal, &uniform, &cauchy, &conv].map(|cs| curve(cs, Method::RandomTiesMc));
    let a_ok = rank_curves.iter().all(|c| monotone(c));
    let a = (
        a_ok,
        format!(
            "rank power normal {}, uniform {}, cauchy {}, conv {}",
            fmt_curve(rank_curves[0]),
            fmt_curve(rank_curves[1]),
            fmt_curve(rank_curves[2]),
            fmt_curve(rank_curves[3])
        ),
    );

    let (ru, pu) = (curve(&uniform, Method::RandomTiesMc), curve(&uniform, Method::PermHc));
    let b_ok = ru
        .points
        .iter()
        .zip(&pu.points)
        .all(|(r, p)| r.power >= p.power - diff_noise(r.power, p.power, r.trials));
    let b = (b_ok, format!("uniform rank {} vs perm-hc {}", fmt_curve(ru), fmt_curve(pu)));

    let (rc, dc, pc) = (
        curve(&cauchy, Method::RandomTiesMc),
        curve(&cauchy, Method::DistHc),
        curve(&cauchy, Method::PermHc),
    );
    let c_ok = rc.points[4].power > 0.5
        && dc.points.iter().all(|p| p.power < 0.2)
        && pc.points.iter().all(|p| p.power < 0.2);
    let c = (
        c_ok,
        format!(
            "cauchy rank {} (tau=2 > 0.5), dist-hc {}, perm-hc {} (< 0.2)",
            fmt_curve(rc),
            fmt_curve(dc),
            fmt_curve(pc)
        ),
    );

    let (rv, dv) = (curve(&conv, Method::RandomTiesMc), curve(&conv, Method::DistHc));
    let d_ok = rv.points[2].power > dv.points[2].power;
    let d = (
        d_ok,
        format!(
            "conv sigma=1/2 at tau=1: rank {:.3} > dist-hc {:.3}",
            rv.points[2].power, dv.points[2].power
        ),
    );
    vec![("8a", a), ("8b", b), ("8c", c), ("8d", d)]
}

fn c9_grid(tables: &[&NullTable]) -> Outcome {
    let taus = [0.0, 0.5, 1.0, 1.5, 2.0];
    let cfg = ExperimentConfig {
        trials: 1_000,
        ..Default::default()
    };
    let spec = SignalSpec::with_anomalies(Setting::NormalShift, 0.0, 3, 500, 7).unwrap();
    let cs = grid_experiment(&spec, &taus, tables, &cfg, RngSeed(91)).unwrap();
    let ok = cs[0]
        .points
        .iter()
        .zip(&cs[1].points)
        .all(|(a, b)| (a.power - b.power).abs() <= diff_noise(a.power, b.power, a.trials));
    (
        ok,
        format!("{} {} vs {} {}", cs[0].label, fmt_curve(&cs[0]), cs[1].label, fmt_curve(&cs[1])),
    )
}

fn c10_p_bound(tb: &NullTable) -> Outcome {
    // Chebyshev over the grid: the count of grid points plays the role of k_n
    let k = tb.grid().len() as f64;
    let slack = 2.0 / (tb.mc_t() as f64 + 1.0);
    let settings = [Setting::NormalShift, Setting::CauchyShift, Setting::UniformTilt];
    let worst = (0..500u64)
        .into_par_iter()
        .map(|i| {
            let tau = (i % 25) as f64 * 0.1;
            let setting = settings[(i % 3) as usize];
            let spec = SignalSpec::with_anomalies(setting, tau, 1 + (i % 7) as usize, tb.n(), tb.t()).unwrap();
            let m = rankhc::simgen::generate(&spec, RngSeed(101).derive(i)).unwrap();
            let res = test_random_ties(&m, tb, RngSeed(102).derive(i)).unwrap();
            let t = res.statistic;
            let bound = if t <= 0.0 { 1.0 } else { (k / (t * t)).min(1.0) };
            assert_eq!(res.p_value, p_value_mc(t, tb));
            res.p_value - bound - slack
        })
        .reduce(|| f64::NEG_INFINITY, f64::max);
    (
        worst <= 0.0,
        format!("max(p - bound - slack) = {worst:.4} over 500 alternatives, |Q| = {k}"),
    )
}

fn null_rank_means(n: usize, t: usize, seed: RngSeed) -> Vec<f64> {
    let mut rng = seed.rng();
    let mut sums = vec![0.0; n];
    let mut col: Vec<usize> = (1..=n).collect();
    for _ in 0..t {
        col.shuffle(&mut rng);
        for (s, &r) in sums.iter_mut().zip(&col) {
            *s += r as f64;
        }
    }
    sums.iter().map(|s| s / t as f64).collect()
}

fn c11_null_variance() -> Outcome {
    let (n, t, reps) = (50usize, 3usize, 100_000u64);
    let g = make_grid(GridKind::Standard, n, t, default_k_n(n)).unwrap();
    let counts: Vec<Vec<u64>> = (0..reps)
        .into_par_iter()
        .map(|k| exceedance_counts(&null_rank_means(n, t, RngSeed(111).derive(k)), &g).unwrap())
        .collect();
    let mut ok = true;
    let mut worst = f64::NEG_INFINITY;
    for qi in 0..g.len() {
        let x: Vec<f64> = counts.iter().map(|c| c[qi] as f64).collect();
        let m = reps as f64;
        let mean = x.iter().sum::<f64>() / m;
        let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1.0);
        let m4 = x.iter().map(|v| (v - mean).powi(4)).sum::<f64>() / m;
        let se = ((m4 - var * var) / m).max(0.0).sqrt();
        let p = mean / n as f64;
        let bound = n as f64 * p * (1.0 - p);
        ok &= var <= bound + 3.0 * se;
        if se > 0.0 {
            worst = worst.max((var - bound) / se);
        }
    }
    (ok, format!("max (Var - n p(1-p)) / SE = {worst:.2} over {} grid points (limit 3)", g.len()))
}

fn c12_bernstein() -> Outcome {
    let (n, t) = (1000usize, 7usize);
    let g = make_grid(GridKind::Standard, n, t, default_k_n(n)).unwrap();
    let tb = tabulate_null(&g, 10_000, 100, RngSeed(121)).unwrap();
    let samples = (tb.mc_pq() * n) as f64;
    let ln = (n as f64).ln();
    let mut ok = true;
    let mut worst = f64::NEG_INFINITY;
    for (q, &p) in g.q_values().iter().zip(tb.pq()) {
        let env = (n as f64).powf(-q + 6f64.sqrt() / 3.0 * (q.powi(3) * ln / t as f64).sqrt());
        let se = (p * (1.0 - p) / samples).sqrt();
        ok &= p <= env + 3.0 * se;
        worst = worst.max(p - env - 3.0 * se);
    }
    (ok, format!("max(p_q - envelope - 3SE) = {worst:.2e} over {} grid points", g.len()))
}

fn main() -> ExitCode {
    let start = Instant::now();
    let mut lines: Vec<(String, Outcome)> = Vec::new();
    let mut record = |id: &str, name: &str, o: Outcome| {
        println!("criterion {id} ({name}): {} {}", if o.0 { "PASS" } else { "FAIL" }, o.1);
        lines.push((id.to_string(), o));
    };

    let t100 = table(GridKind::Extended, 100, 5, default_k_n(100), 11);
    let t1000 = table(GridKind::Extended, 1000, 7, default_k_n(1000), 12);
    let k500 = default_k_n(500);
    let t500 = table(GridKind::Extended, 500, 7, k500, 13);
    let t500x2 = table(GridKind::Extended, 500, 7, 2 * k500, 14);

    record("1", "level validity", c1_level(&[&t100, &t1000]));
    record("2", "distribution-freeness", c2_distribution_free(&t100));
    let t40 = table(GridKind::Extended, 40, 3, default_k_n(40), 15);
    record("3", "monotone invariance", c3_monotone_invariance(&t40));
    record("4", "closed-form constants", c4_constants());
    record("5", "boundary formula", c5_boundary());
    record("6", "covariance counterexample", c6_covariance_counterexample());
    record("7", "moment fixtures", c7_moments());
    for (id, o) in c8_power(&t500) {
        record(id, "power ordering", o);
    }
    record("9", "grid robustness", c9_grid(&[&t500, &t500x2]));
    record("10", "p-value bound", c10_p_bound(&t500));
    record("11", "null variance bound", c11_null_variance());
    record("12", "Bernstein envelope", c12_bernstein());

    let failed: Vec<&str> = lines.iter().filter(|l| !l.1 .0).map(|l| l.0.as_str()).collect();
    println!(
        "acceptance: {}/{} passed in {:.1}s",
        lines.len() - failed.len(),
        lines.len(),
        start.elapsed().as_secs_f64()
    );
    if failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        println!("failed: {}", failed.join(", "));
        ExitCode::FAILURE
    }
}
