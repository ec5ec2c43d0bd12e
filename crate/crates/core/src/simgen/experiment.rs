use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{generate, SignalSpec};
use crate::calibration::{test_midrank_naive, test_midrank_permutation, test_random_ties, Method, NullTable};
use crate::comparators::{dist_aware_hc_with, friedman_test_with, raw_permutation_hc, DistAwareCalibration, FriedmanCalibration};
use crate::data::ObservationMatrix;
use crate::error::{Error, Result};
use crate::hc::{default_k_n, make_grid, GridKind, GridSpec};
use crate::rng::{tags, RngSeed};
use crate::stats::wilson_interval;

const TRIAL: u64 = 0x0074_7269_616c;
const CALIBRATION: u64 = 0x0063_616c_6962;

/// Knobs shared by every experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub alpha: f64,
    pub trials: usize,
    /// Grid for the midrank permutation test when no table supplies one.
    pub grid_kind: GridKind,
    /// Grid size for the comparators and the permutation test; defaults to
    /// `ceil(ln² n)`.
    pub k_n: Option<u32>,
    /// Permutations per trial for midrank-permutation and perm-hc.
    pub permutations: usize,
    /// Null draws behind the dist-hc and Friedman calibrations.
    pub oracle_mc: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            alpha: 0.05,
            trials: 1_000,
            grid_kind: GridKind::Extended,
            k_n: None,
            permutations: 199,
            oracle_mc: 10_000,
        }
    }
}

impl ExperimentConfig {
    fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidParameter(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        if self.trials < 100 {
            return Err(Error::InvalidParameter(format!("need at least 100 trials, got {}", self.trials)));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerPoint {
    pub tau: f64,
    pub theta: f64,
    pub rejections: u64,
    pub trials: u64,
    pub power: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
}

impl PowerPoint {
    fn new(tau: f64, theta: f64, rejections: u64, trials: u64) -> Self {
        let (ci_lo, ci_hi) = wilson_interval(rejections, trials, 0.95);
        Self {
            tau,
            theta,
            rejections,
            trials,
            power: rejections as f64 / trials as f64,
            ci_lo,
            ci_hi,
        }
    }

    /// Larger of the two distances from the estimate to the interval ends.
    pub fn half_width(&self) -> f64 {
        (self.power - self.ci_lo).max(self.ci_hi - self.power)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerCurve {
    /// Distinguishes curves of one run, e.g. `k_n=39` or `t=12`.
    pub label: String,
    pub method: Method,
    pub spec: SignalSpec,
    pub anomalies: usize,
    pub k_n: Option<u32>,
    pub alpha: f64,
    pub seed: RngSeed,
    pub points: Vec<PowerPoint>,
}

impl PowerCurve {
    pub fn power_at(&self, tau: f64) -> Option<&PowerPoint> {
        self.points.iter().find(|p| p.tau == tau)
    }
}

#[derive(Serialize)]
struct CsvRow<'a> {
    curve: &'a str,
    setting: String,
    n: usize,
    t: usize,
    anomalies: usize,
    k_n: Option<u32>,
    tau: f64,
    method: &'static str,
    power: f64,
    ci_lo: f64,
    ci_hi: f64,
    trials: u64,
    rejections: u64,
}

pub fn write_power_csv<W: Write>(curves: &[PowerCurve], w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    let to_err = |e: csv::Error| Error::InvalidParameter(format!("csv write failed: {e}"));
    for c in curves {
        for p in &c.points {
            wr.serialize(CsvRow {
                curve: &c.label,
                setting: c.spec.setting.to_string(),
                n: c.spec.n,
                t: c.spec.t,
                anomalies: c.anomalies,
                k_n: c.k_n,
                tau: p.tau,
                method: c.method.tag(),
                power: p.power,
                ci_lo: p.ci_lo,
                ci_hi: p.ci_hi,
                trials: p.trials,
                rejections: p.rejections,
            })
            .map_err(to_err)?;
        }
    }
    wr.flush().map_err(|e| Error::InvalidParameter(format!("csv write failed: {e}")))?;
    Ok(())
}

struct Harness<'a> {
    methods: Vec<Method>,
    table: Option<&'a NullTable>,
    perm_grid: Option<GridSpec>,
    k_n: u32,
    friedman: Option<FriedmanCalibration>,
    dist: Option<DistAwareCalibration>,
    spec: SignalSpec,
    permutations: usize,
}

impl<'a> Harness<'a> {
    fn new(
        spec: &SignalSpec,
        methods: &[Method],
        cfg: &ExperimentConfig,
        table: Option<&'a NullTable>,
        seed: RngSeed,
    ) -> Result<Self> {
        let (n, t) = (spec.n, spec.t);
        let needs_table = methods
            .iter()
            .any(|m| matches!(m, Method::RandomTiesMc | Method::MidrankNaive));
        if needs_table {
            match table {
                None => return Err(Error::TableMissing { n, t }),
                Some(tb) => tb.ensure_shape(n, t)?,
            }
        }
        let k_n = cfg.k_n.unwrap_or_else(|| default_k_n(n));
        let perm_grid = if methods.contains(&Method::MidrankPermutation) {
            Some(match table {
                Some(tb) if tb.n() == n && tb.t() == t => tb.grid().clone(),
                _ => make_grid(cfg.grid_kind, n, t, k_n)?,
            })
        } else {
            None
        };
        let cal = seed.derive(CALIBRATION);
        let friedman = if methods.contains(&Method::Friedman) {
            Some(FriedmanCalibration::simulate(n, t, cfg.oracle_mc, cal.derive(0))?)
        } else {
            None
        };
        let dist = if methods.contains(&Method::DistHc) {
            let fam = spec.setting.oracle_spec().family;
            Some(DistAwareCalibration::simulate(fam, n, t, k_n, cfg.oracle_mc, cal.derive(1))?)
        } else {
            None
        };
        Ok(Self {
            methods: methods.to_vec(),
            table,
            perm_grid,
            k_n,
            friedman,
            dist,
            spec: *spec,
            permutations: cfg.permutations,
        })
    }

    fn p_value(&self, method: Method, m: &ObservationMatrix, seed: RngSeed) -> Result<f64> {
        let res = match method {
            Method::RandomTiesMc => test_random_ties(m, self.table.expect("checked"), seed)?,
            Method::MidrankNaive => test_midrank_naive(m, self.table.expect("checked"))?,
            Method::MidrankPermutation => {
                test_midrank_permutation(m, self.perm_grid.as_ref().expect("built"), self.permutations, seed)?
            }
            Method::PermHc => raw_permutation_hc(m, self.k_n, self.permutations, seed)?,
            Method::DistHc => dist_aware_hc_with(m, &self.spec.setting.oracle_spec(), self.dist.as_ref().expect("built"))?,
            Method::Friedman => friedman_test_with(m, self.friedman.as_ref().expect("built"), seed)?,
        };
        Ok(res.p_value)
    }

    /// Rejection counts per method for one signal level. Trial `k` draws its
    /// data from `seed.derive(TRIAL).derive(k)` whatever the level, so curves
    /// share their noise across `τ` and across methods.
    fn run(&self, spec: &SignalSpec, trials: usize, alpha: f64, seed: RngSeed) -> Result<Vec<u64>> {
        let per_trial: Vec<Vec<bool>> = (0..trials)
            .into_par_iter()
            .map(|k| {
                let data = generate(spec, seed.derive(TRIAL).derive(k as u64))?;
                let ms = seed.derive(tags::METHOD).derive(k as u64);
                self.methods
                    .iter()
                    .map(|&m| Ok(self.p_value(m, &data, ms)? <= alpha))
                    .collect::<Result<Vec<bool>>>()
            })
            .collect::<Result<_>>()?;
        let mut counts = vec![0u64; self.methods.len()];
        for row in &per_trial {
            for (c, &r) in counts.iter_mut().zip(row) {
                *c += r as u64;
            }
        }
        Ok(counts)
    }
}

/// Power of each method at each `τ`, with the remaining parameters taken from
/// `spec`. Rank methods calibrated by a table need `table` for `(n, t)`.
pub fn power_experiment(
    spec: &SignalSpec,
    taus: &[f64],
    methods: &[Method],
    cfg: &ExperimentConfig,
    table: Option<&NullTable>,
    seed: RngSeed,
) -> Result<Vec<PowerCurve>> {
    cfg.validate()?;
    if taus.is_empty() || methods.is_empty() {
        return Err(Error::InvalidParameter("need at least one tau and one method".into()));
    }
    let h = Harness::new(spec, methods, cfg, table, seed)?;
    let mut curves: Vec<PowerCurve> = methods
        .iter()
        .map(|&m| PowerCurve {
            label: m.tag().to_string(),
            method: m,
            spec: *spec,
            anomalies: spec.anomaly_count(),
            k_n: match m {
                Method::RandomTiesMc | Method::MidrankNaive => table.map(|tb| tb.grid().k_n()),
                Method::MidrankPermutation => h.perm_grid.as_ref().map(GridSpec::k_n),
                Method::PermHc | Method::DistHc => Some(h.k_n),
                Method::Friedman => None,
            },
            alpha: cfg.alpha,
            seed,
            points: Vec::with_capacity(taus.len()),
        })
        .collect();
    for &tau in taus {
        let sp = spec.with_tau(tau)?;
        let counts = h.run(&sp, cfg.trials, cfg.alpha, seed)?;
        let theta = sp.theta()?;
        for (c, k) in curves.iter_mut().zip(counts) {
            c.points.push(PowerPoint::new(tau, theta, k, cfg.trials as u64));
        }
    }
    Ok(curves)
}

/// Random-ties rank test power for several grid sizes, one table per size.
/// All curves see the same datasets.
pub fn grid_experiment(
    spec: &SignalSpec,
    taus: &[f64],
    tables: &[&NullTable],
    cfg: &ExperimentConfig,
    seed: RngSeed,
) -> Result<Vec<PowerCurve>> {
    if tables.is_empty() {
        return Err(Error::TableMissing { n: spec.n, t: spec.t });
    }
    let mut out = Vec::with_capacity(tables.len());
    for tb in tables {
        let mut c = power_experiment(spec, taus, &[Method::RandomTiesMc], cfg, Some(tb), seed)?
            .pop()
            .expect("one method");
        c.label = format!("k_n={}", tb.grid().k_n());
        out.push(c);
    }
    Ok(out)
}

/// Random-ties rank test power with `s` anomalies for each stream length `t`
/// given by the tables.
pub fn stream_length_experiment(
    setting: super::Setting,
    n: usize,
    s: usize,
    taus: &[f64],
    tables: &[&NullTable],
    cfg: &ExperimentConfig,
    seed: RngSeed,
) -> Result<Vec<PowerCurve>> {
    if tables.is_empty() {
        return Err(Error::InvalidParameter("need at least one stream length".into()));
    }
    let mut out = Vec::with_capacity(tables.len());
    for tb in tables {
        let first = taus.first().copied().unwrap_or(0.0);
        let spec = SignalSpec::with_anomalies(setting, first, s, n, tb.t())?;
        let mut c = power_experiment(&spec, taus, &[Method::RandomTiesMc], cfg, Some(tb), seed)?
            .pop()
            .expect("one method");
        c.label = format!("t={}", tb.t());
        out.push(c);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calibration::tabulate_null;
    use crate::simgen::Setting;

    #[test]
    fn missing_table_is_reported() {
        let sp = SignalSpec::new(Setting::NormalShift, 1.0, 0.7, 30, 3).unwrap();
        let cfg = ExperimentConfig {
            trials: 100,
            ..Default::default()
        };
        let e = power_experiment(&sp, &[0.0], &[Method::RandomTiesMc], &cfg, None, RngSeed(1)).unwrap_err();
        assert!(matches!(e, Error::TableMissing { n: 30, t: 3 }));
    }

    #[test]
    fn curves_are_reproducible_and_bounded() {
        let sp = SignalSpec::new(Setting::NormalShift, 0.0, 0.7, 40, 3).unwrap();
        let grid = make_grid(GridKind::Extended, 40, 3, default_k_n(40)).unwrap();
        let tb = tabulate_null(&grid, 1_000, 1_000, RngSeed(3)).unwrap();
        let cfg = ExperimentConfig {
            trials: 100,
            ..Default::default()
        };
        let methods = [Method::RandomTiesMc, Method::MidrankNaive];
        let a = power_experiment(&sp, &[0.0, 3.0], &methods, &cfg, Some(&tb), RngSeed(5)).unwrap();
        let b = power_experiment(&sp, &[0.0, 3.0], &methods, &cfg, Some(&tb), RngSeed(5)).unwrap();
        assert_eq!(a, b);
        // continuous data: no ties, so both rank procedures agree
        assert_eq!(a[0].points, a[1].points);
        for p in &a[0].points {
            assert!((0.0..=1.0).contains(&p.power));
            assert!(p.ci_lo <= p.power && p.power <= p.ci_hi);
        }
        assert!(a[0].points[1].power > 0.5);
        let mut buf = Vec::new();
        write_power_csv(&a, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("curve,setting,n,t,anomalies,k_n,tau,method,power,ci_lo,ci_hi,trials,rejections\n"));
        assert_eq!(text.lines().count(), 5);
    }
}
