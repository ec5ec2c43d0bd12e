//! The rank-based higher criticism statistic.
//!
//! A subject's rank mean `Y_i` is standardized with the exact rank moments
//! `(n + 1) / 2` and `(n^2 - 1) / 12`, and compared against
//! `sqrt(2 q ln(n) / t)` for every `q` in a threshold grid. `N_q` counts the
//! exceedances, `V_q` standardizes `N_q` against its null mean `n p_q`, and the
//! statistic `T` is the maximum of `V_q` over the grid.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ranking::RankMatrix;
use crate::serde_ext;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GridKind {
    /// `{2/k, 4/k, ..., 2}`.
    Standard,
    /// `{1/k, 2/k, ...}` up to the first point at which no subject can exceed
    /// the threshold.
    Extended,
}

impl std::str::FromStr for GridKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "standard" => Ok(Self::Standard),
            "extended" => Ok(Self::Extended),
            other => Err(Error::Unknown {
                kind: "grid kind",
                value: other.into(),
            }),
        }
    }
}

/// Threshold grid. Every point is `numerator / k_n`; the float value is
/// produced by a single division so grids built from the same parameters are
/// bit-identical.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct GridSpec {
    kind: GridKind,
    k_n: u32,
    n: usize,
    t: usize,
    numerators: Vec<u64>,
}

/// `ceil(ln(n)^2)`, at least 1.
pub fn default_k_n(n: usize) -> u32 {
    let l = (n as f64).ln();
    ((l * l).ceil() as u32).max(1)
}

/// Largest value the standardized rank mean can take is `sqrt(3)`, so any
/// `q` above `3 t / (2 ln n)` has an empty exceedance set.
pub fn extended_cap(n: usize, t: usize) -> f64 {
    3.0 * t as f64 / (2.0 * (n as f64).ln())
}

/// Builds the grid for a panel of `n` subjects and `t` referentials.
pub fn make_grid(kind: GridKind, n: usize, t: usize, k_n: u32) -> Result<GridSpec> {
    if n < 2 {
        return Err(Error::InvalidParameter(format!("grid needs n >= 2, got {n}")));
    }
    if t < 1 || k_n < 1 {
        return Err(Error::InvalidParameter(format!("grid needs t >= 1 and k_n >= 1, got t={t}, k_n={k_n}")));
    }
    let numerators = match kind {
        GridKind::Standard => (1..=k_n as u64).map(|i| 2 * i).collect(),
        GridKind::Extended => (1..=cap_numerator(k_n, extended_cap(n, t))).collect(),
    };
    Ok(GridSpec {
        kind,
        k_n,
        n,
        t,
        numerators,
    })
}

/// Index of the smallest multiple of `1/k` that is `>= cap` (at least 1).
pub(crate) fn cap_numerator(k_n: u32, cap: f64) -> u64 {
    let k = k_n as f64;
    if !(cap > 0.0) {
        return 1;
    }
    let mut m = (cap * k).ceil().max(1.0) as u64;
    // guard against the product rounding up past an exact multiple
    while m > 1 && (m - 1) as f64 / k >= cap {
        m -= 1;
    }
    while (m as f64) / k < cap {
        m += 1;
    }
    m
}

impl GridSpec {
    /// Grid `{1/k, ..., m/k}` with `m/k` the first point `>= cap`; used by
    /// tests whose grid depends on the observed data.
    pub fn up_to(k_n: u32, cap: f64, n: usize, t: usize) -> Result<Self> {
        if n < 2 || t < 1 || k_n < 1 {
            return Err(Error::InvalidParameter(format!("bad grid shape n={n}, t={t}, k_n={k_n}")));
        }
        if !cap.is_finite() {
            return Err(Error::InvalidParameter(format!("non-finite grid cap {cap}")));
        }
        Ok(Self {
            kind: GridKind::Extended,
            k_n,
            n,
            t,
            numerators: (1..=cap_numerator(k_n, cap)).collect(),
        })
    }

    /// Rebuilds a grid from stored numerators (must be strictly increasing
    /// and positive).
    pub(crate) fn from_numerators(kind: GridKind, k_n: u32, n: usize, t: usize, numerators: Vec<u64>) -> Result<Self> {
        if n < 2 || t < 1 || k_n < 1 || numerators.is_empty() {
            return Err(Error::InvalidParameter(format!("bad grid shape n={n}, t={t}, k_n={k_n}")));
        }
        if numerators[0] == 0 || numerators.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidParameter("grid points must be positive and strictly increasing".into()));
        }
        Ok(Self {
            kind,
            k_n,
            n,
            t,
            numerators,
        })
    }

    pub(crate) fn numerators(&self) -> &[u64] {
        &self.numerators
    }

    pub fn kind(&self) -> GridKind {
        self.kind
    }

    pub fn k_n(&self) -> u32 {
        self.k_n
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn t(&self) -> usize {
        self.t
    }

    pub fn len(&self) -> usize {
        self.numerators.len()
    }

    pub fn is_empty(&self) -> bool {
        self.numerators.is_empty()
    }

    pub fn q_values(&self) -> Vec<f64> {
        let k = self.k_n as f64;
        self.numerators.iter().map(|&m| m as f64 / k).collect()
    }

    /// `sqrt(2 q ln(n) / t)` per grid point, on the standardized scale.
    pub fn thresholds(&self) -> Vec<f64> {
        let c = 2.0 * (self.n as f64).ln() / self.t as f64;
        self.q_values().into_iter().map(|q| (c * q).sqrt()).collect()
    }

    /// Thresholds on the rank-mean scale, `R̄ + σ_R sqrt(2 q ln(n) / t)`.
    pub fn rank_mean_thresholds(&self) -> Vec<f64> {
        let mom = RankMoments::new(self.n);
        self.thresholds()
            .into_iter()
            .map(|s| mom.rbar + mom.sigma_r() * s)
            .collect()
    }
}

/// Exact first two moments of a uniformly random rank in `1..=n`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RankMoments {
    pub rbar: f64,
    pub sigma_r_sq: f64,
}

impl RankMoments {
    pub fn new(n: usize) -> Self {
        let n = n as f64;
        Self {
            rbar: (n + 1.0) / 2.0,
            sigma_r_sq: (n * n - 1.0) / 12.0,
        }
    }

    #[inline]
    pub fn sigma_r(&self) -> f64 {
        self.sigma_r_sq.sqrt()
    }

    #[inline]
    pub fn standardize(&self, y: f64) -> f64 {
        (y - self.rbar) / self.sigma_r()
    }
}

/// `Y_i = (1/t) sum_j R_ij`.
pub fn subject_rank_means(r: &RankMatrix) -> Vec<f64> {
    let t = r.t() as f64;
    r.row_sums().into_iter().map(|s| s / t).collect()
}

/// Standardized rank means `(Y_i - R̄) / σ_R`.
pub fn standardized_means(y: &[f64], n: usize) -> Vec<f64> {
    let mom = RankMoments::new(n);
    y.iter().map(|&v| mom.standardize(v)).collect()
}

/// Counts of values `>= threshold` for every (increasing) threshold.
pub(crate) fn counts_at_or_above(values: &mut [f64], thresholds: &[f64]) -> Vec<u64> {
    values.sort_unstable_by(f64::total_cmp);
    let len = values.len();
    thresholds
        .iter()
        .map(|&z| (len - values.partition_point(|&v| v < z)) as u64)
        .collect()
}

/// `N_q = #{i : (Y_i - R̄)/σ_R >= sqrt(2 q ln(n) / t)}` for every grid point.
pub fn exceedance_counts(y: &[f64], grid: &GridSpec) -> Result<Vec<u64>> {
    if y.len() != grid.n() {
        return Err(Error::LengthMismatch {
            expected: grid.n(),
            found: y.len(),
        });
    }
    let mut z = standardized_means(y, grid.n());
    Ok(counts_at_or_above(&mut z, &grid.thresholds()))
}

/// `(N - n p) / sqrt(n p (1 - p))` with `0/0 = 0`. A zero denominator with a
/// nonzero numerator yields a signed infinity.
#[inline]
pub fn standardized_count(count: u64, n: usize, p: f64) -> f64 {
    let n = n as f64;
    let num = count as f64 - n * p;
    let den = (n * p * (1.0 - p)).sqrt();
    if den > 0.0 {
        num / den
    } else if num > 0.0 {
        f64::INFINITY
    } else if num < 0.0 {
        f64::NEG_INFINITY
    } else {
        0.0
    }
}

/// `max_q V_q` without materializing a profile.
#[inline]
pub(crate) fn max_standardized(counts: &[u64], pq: &[f64], n: usize) -> f64 {
    counts
        .iter()
        .zip(pq)
        .map(|(&c, &p)| standardized_count(c, n, p))
        .fold(f64::NEG_INFINITY, f64::max)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QPoint {
    pub q: f64,
    /// Threshold on the rank-mean scale.
    pub z: f64,
    #[serde(rename = "N")]
    pub count: u64,
    pub p: f64,
    #[serde(rename = "V", with = "serde_ext::float")]
    pub v: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HcProfile {
    #[serde(rename = "T", with = "serde_ext::float")]
    pub statistic: f64,
    pub grid: Vec<f64>,
    pub per_q: Vec<QPoint>,
}

impl HcProfile {
    /// Grid point attaining the maximum (first one on ties).
    pub fn argmax(&self) -> Option<&QPoint> {
        self.per_q.iter().find(|p| p.v == self.statistic)
    }
}

/// Assembles `V_q` and `T` from exceedance counts and null exceedance
/// probabilities aligned with `grid`.
pub fn hc_statistic(grid: &GridSpec, counts: &[u64], pq: &[f64]) -> Result<HcProfile> {
    if counts.len() != grid.len() || pq.len() != grid.len() {
        return Err(Error::LengthMismatch {
            expected: grid.len(),
            found: if counts.len() != grid.len() { counts.len() } else { pq.len() },
        });
    }
    if let Some(&bad) = pq.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(Error::InvalidParameter(format!("p_q = {bad} outside [0, 1]")));
    }
    let n = grid.n();
    let per_q: Vec<QPoint> = grid
        .q_values()
        .into_iter()
        .zip(grid.rank_mean_thresholds())
        .zip(counts.iter().zip(pq))
        .map(|((q, z), (&count, &p))| QPoint {
            q,
            z,
            count,
            p,
            v: standardized_count(count, n, p),
        })
        .collect();
    let statistic = per_q.iter().map(|p| p.v).fold(f64::NEG_INFINITY, f64::max);
    Ok(HcProfile {
        statistic,
        grid: per_q.iter().map(|p| p.q).collect(),
        per_q,
    })
}

/// Full pipeline from a rank matrix to a profile.
pub fn rank_hc_profile(r: &RankMatrix, grid: &GridSpec, pq: &[f64]) -> Result<HcProfile> {
    if r.n() != grid.n() || r.t() != grid.t() {
        return Err(Error::Shape(format!(
            "rank matrix is {}x{}, grid built for {}x{}",
            r.n(),
            r.t(),
            grid.n(),
            grid.t()
        )));
    }
    let counts = exceedance_counts(&subject_rank_means(r), grid)?;
    hc_statistic(grid, &counts, pq)
}

/// Maps integer rank sums to grid indices. For each grid point, `min_sum[q]`
/// is the smallest integer sum `S` whose rank mean `S / t` passes the same
/// floating-point comparison used by [`exceedance_counts`], so the fast path
/// agrees with the general one bit for bit.
#[derive(Clone, Debug)]
pub(crate) struct IntegerSumThresholds {
    pub min_sum: Vec<usize>,
    pub max_sum: usize,
}

impl IntegerSumThresholds {
    pub fn new(grid: &GridSpec) -> Self {
        let (n, t) = (grid.n(), grid.t());
        let mom = RankMoments::new(n);
        let tf = t as f64;
        let passes = |s: usize, z: f64| mom.standardize(s as f64 / tf) >= z;
        let max_sum = n * t;
        let mut min_sum = Vec::with_capacity(grid.len());
        let mut lo = t;
        for z in grid.thresholds() {
            // thresholds increase, so the search can resume from the last hit
            let mut s = lo;
            while s <= max_sum && !passes(s, z) {
                s += 1;
            }
            min_sum.push(s);
            lo = s;
        }
        Self { min_sum, max_sum }
    }
}
