//! Monte-Carlo null tables: exceedance probabilities `p_q` and the null law
//! of `T`, tabulated once per panel shape and reused for any data.

use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::engine::{counts_from_integer_sums, NullPanelSampler};
use crate::error::{Error, Result};
use crate::hc::{max_standardized, GridKind, GridSpec, IntegerSumThresholds};
use crate::rng::{tags, RngSeed};
use crate::serde_ext;

pub const TABLE_VERSION: &str = "rankhc-null-table/1";

/// Default cap on the number of rank draws a single tabulation may perform.
pub const DEFAULT_BUDGET: u128 = 200_000_000_000;

pub const DEFAULT_MC: usize = 100_000;

#[derive(Clone, Debug, PartialEq)]
pub struct NullTable {
    grid: GridSpec,
    pq: Vec<f64>,
    t_null: Vec<f64>,
    /// Pooled histogram of null rank sums, index `s - t` for `s in t..=n t`.
    sum_counts: Vec<u64>,
    seed: RngSeed,
    mc_pq: usize,
    mc_t: usize,
}

/// Tabulates with [`DEFAULT_BUDGET`].
pub fn tabulate_null(grid: &GridSpec, mc_pq: usize, mc_t: usize, seed: RngSeed) -> Result<NullTable> {
    tabulate_null_with_budget(grid, mc_pq, mc_t, seed, DEFAULT_BUDGET)
}

pub fn tabulate_null_with_budget(
    grid: &GridSpec,
    mc_pq: usize,
    mc_t: usize,
    seed: RngSeed,
    budget: u128,
) -> Result<NullTable> {
    if mc_pq < 100 || mc_t < 100 {
        return Err(Error::InvalidParameter(format!(
            "tabulation needs at least 100 samples per phase, got mc_pq={mc_pq}, mc_t={mc_t}"
        )));
    }
    let (n, t) = (grid.n(), grid.t());
    let requested = (n as u128) * (t as u128) * (mc_pq as u128 + mc_t as u128);
    if requested > budget {
        return Err(Error::BudgetExceeded { requested, budget });
    }
    let thr = IntegerSumThresholds::new(grid);
    let max_sum = thr.max_sum;

    let phase = seed.derive(tags::PHASE_PQ);
    let hist = (0..mc_pq as u64)
        .into_par_iter()
        .fold(
            || (NullPanelSampler::new(n, t), vec![0u64; max_sum + 1]),
            |(mut sampler, mut hist), r| {
                for &s in sampler.sample(&mut phase.derive(r).rng()) {
                    hist[s as usize] += 1;
                }
                (sampler, hist)
            },
        )
        .map(|(_, h)| h)
        .reduce(
            || vec![0u64; max_sum + 1],
            |mut a, b| {
                a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                a
            },
        );
    let pooled = (mc_pq as f64) * n as f64;
    let mut tail = vec![0u64; max_sum + 2];
    for s in (0..=max_sum).rev() {
        tail[s] = tail[s + 1] + hist[s];
    }
    let mut pq: Vec<f64> = thr.min_sum.iter().map(|&m| tail[m.min(max_sum + 1)] as f64 / pooled).collect();
    isotonic_clamp(&mut pq);

    let phase = seed.derive(tags::PHASE_T);
    let mut t_null: Vec<f64> = (0..mc_t as u64)
        .into_par_iter()
        .map_init(
            || (NullPanelSampler::new(n, t), vec![0u32; max_sum + 1], Vec::new()),
            |(sampler, scratch, counts), r| {
                let sums = sampler.sample(&mut phase.derive(r).rng());
                counts_from_integer_sums(sums, &thr.min_sum, max_sum, scratch, counts);
                max_standardized(counts, &pq, n)
            },
        )
        .collect();
    t_null.sort_unstable_by(f64::total_cmp);

    Ok(NullTable {
        grid: grid.clone(),
        pq,
        t_null,
        sum_counts: hist[t..].to_vec(),
        seed,
        mc_pq,
        mc_t,
    })
}

/// Running minimum, so estimates never increase along the grid.
pub(crate) fn isotonic_clamp(pq: &mut [f64]) {
    for i in 1..pq.len() {
        if pq[i] > pq[i - 1] {
            pq[i] = pq[i - 1];
        }
    }
}

/// `(1 + #{null >= t_obs}) / (M + 1)` over an ascending sample.
pub(crate) fn add_one_p_value(sorted_null: &[f64], t_obs: f64) -> f64 {
    let ge = sorted_null.len() - sorted_null.partition_point(|&v| v < t_obs);
    (1 + ge) as f64 / (sorted_null.len() + 1) as f64
}

/// Add-one Monte-Carlo p-value of an observed statistic.
pub fn p_value_mc(t_obs: f64, table: &NullTable) -> f64 {
    add_one_p_value(&table.t_null, t_obs)
}

impl NullTable {
    pub fn n(&self) -> usize {
        self.grid.n()
    }

    pub fn t(&self) -> usize {
        self.grid.t()
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn pq(&self) -> &[f64] {
        &self.pq
    }

    pub fn t_null(&self) -> &[f64] {
        &self.t_null
    }

    pub fn sum_counts(&self) -> &[u64] {
        &self.sum_counts
    }

    pub fn seed(&self) -> RngSeed {
        self.seed
    }

    pub fn mc_pq(&self) -> usize {
        self.mc_pq
    }

    pub fn mc_t(&self) -> usize {
        self.mc_t
    }

    pub fn ensure_shape(&self, n: usize, t: usize) -> Result<()> {
        if self.n() != n || self.t() != t {
            return Err(Error::TableShape {
                table_n: self.n(),
                table_t: self.t(),
                n,
                t,
            });
        }
        Ok(())
    }

    /// Add-one p-values `P(S_1 >= s_i)` of subject rank sums against the pooled
    /// null sums. Half-integer sums (midranks) are compared against the next
    /// integer.
    pub fn subject_p_values(&self, rank_sums: &[f64]) -> Result<Vec<f64>> {
        if rank_sums.len() != self.n() {
            return Err(Error::LengthMismatch {
                expected: self.n(),
                found: rank_sums.len(),
            });
        }
        let t = self.t();
        let mut tail = vec![0u64; self.sum_counts.len() + 1];
        for i in (0..self.sum_counts.len()).rev() {
            tail[i] = tail[i + 1] + self.sum_counts[i];
        }
        let total = tail[0] as f64;
        Ok(rank_sums
            .iter()
            .map(|&s| {
                let idx = (s.ceil().max(t as f64) as usize - t).min(self.sum_counts.len());
                (1.0 + tail[idx] as f64) / (total + 1.0)
            })
            .collect())
    }

    /// File name encoding the full cache key.
    pub fn cache_file_name(grid: &GridSpec, mc_pq: usize, mc_t: usize, seed: RngSeed) -> String {
        let kind = match grid.kind() {
            GridKind::Standard => "standard",
            GridKind::Extended => "extended",
        };
        format!(
            "null-n{}-t{}-{kind}-k{}-pq{mc_pq}-T{mc_t}-s{}.json",
            grid.n(),
            grid.t(),
            grid.k_n(),
            seed.0
        )
    }
}

#[derive(Serialize, Deserialize)]
struct GridBody {
    kind: GridKind,
    k_n: u32,
    q: Vec<f64>,
    numerators: Vec<u64>,
}

#[derive(Serialize, Deserialize)]
struct TableBody {
    version: String,
    n: usize,
    t: usize,
    grid: GridBody,
    pq: Vec<f64>,
    #[serde(with = "serde_ext::float_vec")]
    t_null: Vec<f64>,
    sum_counts: Vec<u64>,
    seed: RngSeed,
    mc_pq: usize,
    mc_t: usize,
}

#[derive(Serialize, Deserialize)]
struct Envelope {
    #[serde(flatten)]
    body: TableBody,
    checksum: String,
}

fn checksum(body: &TableBody) -> Result<String> {
    let bytes = serde_json::to_vec(body)?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

impl From<&NullTable> for TableBody {
    fn from(tb: &NullTable) -> Self {
        Self {
            version: TABLE_VERSION.into(),
            n: tb.n(),
            t: tb.t(),
            grid: GridBody {
                kind: tb.grid.kind(),
                k_n: tb.grid.k_n(),
                q: tb.grid.q_values(),
                numerators: tb.grid.numerators().to_vec(),
            },
            pq: tb.pq.clone(),
            t_null: tb.t_null.clone(),
            sum_counts: tb.sum_counts.clone(),
            seed: tb.seed,
            mc_pq: tb.mc_pq,
            mc_t: tb.mc_t,
        }
    }
}

pub fn table_to_json(table: &NullTable) -> Result<String> {
    let body = TableBody::from(table);
    let checksum = checksum(&body)?;
    Ok(serde_json::to_string(&Envelope { body, checksum })?)
}

pub fn table_from_json(text: &str) -> Result<NullTable> {
    let value: serde_json::Value =
        serde_json::from_str(text).map_err(|e| Error::Checksum(format!("unreadable table: {e}")))?;
    let found = value.get("version").and_then(|v| v.as_str()).unwrap_or("<none>");
    if found != TABLE_VERSION {
        return Err(Error::TableVersion {
            expected: TABLE_VERSION.into(),
            found: found.into(),
        });
    }
    let env: Envelope =
        serde_json::from_value(value).map_err(|e| Error::Checksum(format!("malformed table: {e}")))?;
    let expect = checksum(&env.body)?;
    if expect != env.checksum {
        return Err(Error::Checksum(format!("stored {}, computed {expect}", env.checksum)));
    }
    let b = env.body;
    let grid = GridSpec::from_numerators(b.grid.kind, b.grid.k_n, b.n, b.t, b.grid.numerators)?;
    if grid.q_values() != b.grid.q || b.pq.len() != grid.len() || b.t_null.len() != b.mc_t {
        return Err(Error::Checksum("table body is internally inconsistent".into()));
    }
    if b.sum_counts.len() != b.n * b.t - b.t + 1 {
        return Err(Error::Checksum("rank-sum histogram has the wrong length".into()));
    }
    Ok(NullTable {
        grid,
        pq: b.pq,
        t_null: b.t_null,
        sum_counts: b.sum_counts,
        seed: b.seed,
        mc_pq: b.mc_pq,
        mc_t: b.mc_t,
    })
}

pub fn save_table(table: &NullTable, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let text = table_to_json(table)?;
    fs::write(path, text).map_err(|source| Error::Io {
        path: path.into(),
        source,
    })
}

pub fn load_table(path: impl AsRef<Path>) -> Result<NullTable> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.into(),
        source,
    })?;
    table_from_json(&text)
}

/// Loads a table and checks that it was built for an `n x t` panel.
pub fn load_table_for(path: impl AsRef<Path>, n: usize, t: usize) -> Result<NullTable> {
    let table = load_table(path)?;
    table.ensure_shape(n, t)?;
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hc::{default_k_n, make_grid};

    #[test]
    fn n2_t1_exact_pq() {
        let g = GridSpec::from_numerators(GridKind::Standard, 2, 2, 1, vec![1]).unwrap();
        assert_eq!(g.q_values(), vec![0.5]);
        let tb = tabulate_null(&g, 1000, 100, RngSeed(3)).unwrap();
        assert_eq!(tb.pq(), &[0.5]);
    }

    #[test]
    fn pq_vanishes_beyond_cap() {
        let g = make_grid(GridKind::Extended, 20, 3, 4).unwrap();
        let tb = tabulate_null(&g, 500, 100, RngSeed(1)).unwrap();
        assert_eq!(*tb.pq().last().unwrap(), 0.0);
        assert!(tb.pq().windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn deterministic_and_round_trips() {
        let g = make_grid(GridKind::Extended, 30, 4, default_k_n(30)).unwrap();
        let a = tabulate_null(&g, 200, 200, RngSeed(9)).unwrap();
        let b = tabulate_null(&g, 200, 200, RngSeed(9)).unwrap();
        assert_eq!(a, b);
        let text = table_to_json(&a).unwrap();
        assert_eq!(table_from_json(&text).unwrap(), a);
        assert_eq!(text, table_to_json(&b).unwrap());
    }

    #[test]
    fn truncated_json_is_checksum_error() {
        let g = make_grid(GridKind::Standard, 10, 2, 4).unwrap();
        let text = table_to_json(&tabulate_null(&g, 100, 100, RngSeed(0)).unwrap()).unwrap();
        let cut = &text[..text.len() / 2];
        assert!(matches!(table_from_json(cut), Err(Error::Checksum(_))));
        let tampered = text.replacen("\"mc_pq\":100", "\"mc_pq\":101", 1);
        assert!(matches!(table_from_json(&tampered), Err(Error::Checksum(_))));
        let other = text.replacen(TABLE_VERSION, "rankhc-null-table/0", 1);
        assert!(matches!(table_from_json(&other), Err(Error::TableVersion { .. })));
    }

    #[test]
    fn budget_guard() {
        let g = make_grid(GridKind::Standard, 1000, 7, 4).unwrap();
        let e = tabulate_null_with_budget(&g, 1000, 1000, RngSeed(0), 1_000).unwrap_err();
        assert!(matches!(e, Error::BudgetExceeded { .. }));
    }

    #[test]
    fn p_value_boundaries() {
        let null = [0.0, 1.0, 2.0, 3.0];
        assert_eq!(add_one_p_value(&null, -1.0), 1.0);
        assert_eq!(add_one_p_value(&null, f64::INFINITY), 0.2);
        assert_eq!(add_one_p_value(&null, 2.0), 0.6);
    }
}
