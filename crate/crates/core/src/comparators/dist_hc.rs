//! Higher criticism on subject means under a fully specified null.
//!
//! The grid runs from `1/k_n` up to the first point at which the average of
//! the `t` largest observations could still exceed the threshold, so its
//! length depends on the data and is unbounded for heavy tails. `N_q` and
//! `w_q` are step functions of the grid index; the maximum is taken over the
//! steps instead of over every grid point.

use rayon::prelude::*;

use super::{NullFamily, OracleNullSpec};
use crate::calibration::{add_one_p_value, Method, Replicates, TestResult};
use crate::data::ObservationMatrix;
use crate::error::{Error, Result};
use crate::hc::{cap_numerator, standardized_count, HcProfile, QPoint};
use crate::rng::{tags, RngSeed, StreamRng};
use crate::scalar::Scalar;

/// Numerators beyond this are saturated; thresholds there exceed 10^7
/// standard deviations for any practical `(n, t, k_n)`.
const MAX_NUMERATOR: u64 = 1 << 50;
/// Dense bins cover `q <= DENSE_Q`.
const DENSE_Q: u64 = 64;
/// Profiles are materialized only for grids up to this length.
const PROFILE_LIMIT: u64 = 50_000;

/// Grid geometry: threshold of numerator `m` is `sqrt(c m / k)`.
#[derive(Clone, Copy, Debug, PartialEq)]
struct Geometry {
    c: f64,
    k: f64,
}

impl Geometry {
    fn new(n: usize, t: usize, k_n: u32) -> Self {
        Self {
            c: 2.0 * (n as f64).ln() / t as f64,
            k: k_n as f64,
        }
    }

    #[inline]
    fn threshold(&self, m: u64) -> f64 {
        (self.c * (m as f64 / self.k)).sqrt()
    }

    /// Largest `m` with `threshold(m) <= v`, 0 if none.
    fn max_numerator(&self, v: f64) -> u64 {
        if !(v > 0.0) {
            return 0;
        }
        let est = v * v / self.c * self.k;
        if !(est < MAX_NUMERATOR as f64) {
            return MAX_NUMERATOR;
        }
        let mut m = est.floor() as u64;
        while m < MAX_NUMERATOR && self.threshold(m + 1) <= v {
            m += 1;
        }
        while m > 0 && self.threshold(m) > v {
            m -= 1;
        }
        m
    }

    fn cap(&self, reach: f64) -> Result<u64> {
        let r = reach.max(0.0);
        let cap = r * r / self.c;
        if !cap.is_finite() {
            return Err(Error::InvalidParameter(format!("non-finite grid cap from top mean {reach}")));
        }
        Ok(cap_numerator(self.k as u32, cap).min(MAX_NUMERATOR))
    }
}

/// Null exceedance probabilities `w(m) = P(V >= threshold(m))` from a pooled
/// sample of standardized null subject means, stored by maximal numerator.
#[derive(Clone, Debug, PartialEq)]
struct PooledTail {
    dense_max: u64,
    /// `suffix[m] = #{maxnum in [m, dense_max]}` for `m <= dense_max + 1`.
    suffix: Vec<u64>,
    /// Sorted maximal numerators above `dense_max`.
    tail: Vec<u64>,
    total: u64,
}

impl PooledTail {
    fn count_ge(&self, m: u64) -> u64 {
        if m <= self.dense_max {
            self.suffix[m as usize] + self.tail.len() as u64
        } else {
            (self.tail.len() - self.tail.partition_point(|&x| x < m)) as u64
        }
    }

    fn w(&self, m: u64) -> f64 {
        self.count_ge(m) as f64 / self.total as f64
    }

    /// Grid indices in `(from, to]` at which `w` steps down.
    fn steps(&self, from: u64, to: u64, mut visit: impl FnMut(u64)) {
        let dense_end = to.min(self.dense_max + 1);
        for m in from + 1..=dense_end {
            if self.suffix[(m - 1) as usize] != self.suffix[m as usize] {
                visit(m);
            }
        }
        let lo = from.max(self.dense_max + 1);
        let start = self.tail.partition_point(|&x| x < lo);
        let mut last = None;
        for &p in &self.tail[start..] {
            if p >= to {
                break;
            }
            if last != Some(p) {
                visit(p + 1);
                last = Some(p);
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DistAwareCalibration {
    family: NullFamily,
    n: usize,
    t: usize,
    k_n: u32,
    geometry: Geometry,
    tail: PooledTail,
    t_null: Vec<f64>,
    mc: usize,
    seed: RngSeed,
}

struct PanelScratch {
    cells: Vec<f64>,
    maxnums: Vec<u64>,
}

fn draw_panel(family: NullFamily, n: usize, t: usize, rng: &mut StreamRng, s: &mut PanelScratch) -> (Vec<f64>, f64) {
    s.cells.clear();
    s.cells.extend((0..n * t).map(|_| family.sample_standard(rng)));
    let means: Vec<f64> = (0..n)
        .map(|i| (0..t).map(|j| s.cells[j * n + i]).sum::<f64>() / t as f64)
        .collect();
    (means, top_mean(&mut s.cells, t))
}

/// Average of the `t` largest entries (reorders `cells`).
fn top_mean(cells: &mut [f64], t: usize) -> f64 {
    let len = cells.len();
    let k = t.min(len);
    cells.select_nth_unstable_by(len - k, f64::total_cmp);
    cells[len - k..].iter().sum::<f64>() / k as f64
}

impl DistAwareCalibration {
    /// Pools `mc * n` null subject means for `w_q`, then simulates `mc`
    /// null panels through the full data-dependent statistic.
    pub fn simulate(family: NullFamily, n: usize, t: usize, k_n: u32, mc: usize, seed: RngSeed) -> Result<Self> {
        if n < 2 || t < 1 || k_n < 1 || mc < 1 {
            return Err(Error::InvalidParameter(format!(
                "need n >= 2, t >= 1, k_n >= 1, mc >= 1; got {n}, {t}, {k_n}, {mc}"
            )));
        }
        let geometry = Geometry::new(n, t, k_n);
        let dense_max = DENSE_Q * k_n as u64;
        let width = dense_max as usize + 1;
        let phase = seed.derive(tags::PHASE_PQ);
        let (bins, mut tail) = (0..mc as u64)
            .into_par_iter()
            .fold(
                || (vec![0u64; width], Vec::new()),
                |(mut bins, mut tail), r| {
                    let mut rng = phase.derive(r).rng();
                    for _ in 0..n {
                        let v = (0..t).map(|_| family.sample_standard(&mut rng)).sum::<f64>() / t as f64;
                        let m = geometry.max_numerator(v);
                        if m <= dense_max {
                            bins[m as usize] += 1;
                        } else {
                            tail.push(m);
                        }
                    }
                    (bins, tail)
                },
            )
            .reduce(
                || (vec![0u64; width], Vec::new()),
                |(mut b1, mut t1), (b2, t2)| {
                    b1.iter_mut().zip(b2).for_each(|(a, b)| *a += b);
                    t1.extend(t2);
                    (b1, t1)
                },
            );
        tail.sort_unstable();
        let mut suffix = vec![0u64; width + 1];
        for m in (0..width).rev() {
            suffix[m] = suffix[m + 1] + bins[m];
        }
        let pooled = PooledTail {
            dense_max,
            suffix,
            tail,
            total: (mc * n) as u64,
        };

        let mut cal = Self {
            family,
            n,
            t,
            k_n,
            geometry,
            tail: pooled,
            t_null: Vec::new(),
            mc,
            seed,
        };
        let phase = seed.derive(tags::PHASE_T);
        let cal_ref = &cal;
        let mut t_null: Vec<f64> = (0..mc as u64)
            .into_par_iter()
            .map_init(
                || PanelScratch {
                    cells: Vec::with_capacity(n * t),
                    maxnums: Vec::with_capacity(n),
                },
                |s, r| {
                    let (means, top) = draw_panel(family, n, t, &mut phase.derive(r).rng(), s);
                    let m_cap = cal_ref.geometry.cap(top).unwrap_or(MAX_NUMERATOR);
                    cal_ref.statistic_from_means(&means, m_cap, &mut s.maxnums)
                },
            )
            .collect();
        t_null.sort_unstable_by(f64::total_cmp);
        cal.t_null = t_null;
        Ok(cal)
    }

    pub fn family(&self) -> NullFamily {
        self.family
    }

    pub fn p_value(&self, t_obs: f64) -> f64 {
        add_one_p_value(&self.t_null, t_obs)
    }

    /// Null exceedance probability at grid point `m / k_n`.
    pub fn w(&self, m: u64) -> f64 {
        self.tail.w(m)
    }

    fn statistic_from_means(&self, means: &[f64], m_cap: u64, a: &mut Vec<u64>) -> f64 {
        a.clear();
        a.extend(means.iter().map(|&v| self.geometry.max_numerator(v).min(m_cap)));
        a.sort_unstable_by(|x, y| y.cmp(x));
        let n = a.len();
        let mut best = f64::NEG_INFINITY;
        let (mut hi, mut idx) = (m_cap, 0usize);
        loop {
            while idx < n && a[idx] >= hi {
                idx += 1;
            }
            let lo = if idx < n { a[idx] } else { 0 };
            best = best.max(self.block_max(lo, hi, idx as u64));
            if lo == 0 {
                return best;
            }
            hi = lo;
        }
    }

    /// Maximum of `V` over grid indices `(lo, hi]`, where `N` is constant.
    /// With `N = 0`, or `N >= n w` and `w < 1/2`, `V` only grows as `w`
    /// falls, so the last index is the maximizer.
    fn block_max(&self, lo: u64, hi: u64, count: u64) -> f64 {
        let n = self.n;
        let v_end = standardized_count(count, n, self.tail.w(hi));
        if count == 0 || (v_end >= 0.0 && self.tail.w(lo + 1) < 0.5) {
            return v_end;
        }
        let mut best = v_end.max(standardized_count(count, n, self.tail.w(lo + 1)));
        self.tail.steps(lo + 1, hi, |m| {
            best = best.max(standardized_count(count, n, self.tail.w(m)));
        });
        best
    }

    fn profile(&self, means: &[f64], m_cap: u64, spec: &OracleNullSpec) -> HcProfile {
        let mut v: Vec<f64> = means.to_vec();
        v.sort_unstable_by(f64::total_cmp);
        let per_q: Vec<QPoint> = (1..=m_cap)
            .map(|m| {
                let thr = self.geometry.threshold(m);
                let count = (v.len() - v.partition_point(|&x| x < thr)) as u64;
                let p = self.tail.w(m);
                QPoint {
                    q: m as f64 / self.k_n as f64,
                    z: spec.mu0 + spec.sigma0 * thr,
                    count,
                    p,
                    v: standardized_count(count, self.n, p),
                }
            })
            .collect();
        HcProfile {
            statistic: per_q.iter().map(|p| p.v).fold(f64::NEG_INFINITY, f64::max),
            grid: per_q.iter().map(|p| p.q).collect(),
            per_q,
        }
    }
}

/// Simulates a calibration for `spec.family` and tests `m`.
pub fn dist_aware_hc<S: Scalar>(
    m: &ObservationMatrix<S>,
    spec: &OracleNullSpec,
    k_n: u32,
    mc: usize,
    seed: RngSeed,
) -> Result<TestResult> {
    if mc < 1_000 {
        return Err(Error::InvalidParameter(format!("need mc >= 1000, got {mc}")));
    }
    let cal = DistAwareCalibration::simulate(spec.family, m.n(), m.t(), k_n, mc, seed)?;
    dist_aware_hc_with(m, spec, &cal)
}

pub fn dist_aware_hc_with<S: Scalar>(
    m: &ObservationMatrix<S>,
    spec: &OracleNullSpec,
    cal: &DistAwareCalibration,
) -> Result<TestResult> {
    if spec.family != cal.family {
        return Err(Error::InvalidParameter(format!(
            "calibration simulated for {:?}, spec is {:?}",
            cal.family, spec.family
        )));
    }
    if cal.n != m.n() || cal.t != m.t() {
        return Err(Error::TableShape {
            table_n: cal.n,
            table_t: cal.t,
            n: m.n(),
            t: m.t(),
        });
    }
    let (n, t) = (m.n(), m.t());
    let means: Vec<f64> = (0..n)
        .map(|i| spec.standardize(m.row(i).iter().map(|v| v.to_f64_lossy()).sum::<f64>() / t as f64))
        .collect();
    let mut cells: Vec<f64> = m.as_flat().iter().map(|v| v.to_f64_lossy()).collect();
    let top = spec.standardize(top_mean(&mut cells, t));
    let m_cap = cal.geometry.cap(top)?;
    let statistic = cal.statistic_from_means(&means, m_cap, &mut Vec::with_capacity(n));
    let profile = (m_cap <= PROFILE_LIMIT).then(|| cal.profile(&means, m_cap, spec));
    Ok(TestResult {
        method: Method::DistHc,
        approximate: false,
        statistic,
        p_value: cal.p_value(statistic),
        profile,
        subject_p: None,
        replicates: Replicates {
            seed: None,
            calibration_seed: Some(cal.seed),
            calibration_samples: cal.mc,
            pq_samples: cal.mc,
        },
    })
}
