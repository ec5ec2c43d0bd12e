//! Rank-based higher criticism for detecting a sparse set of anomalous
//! subjects observed across several independent referentials.
//!
//! ```
//! use rankhc::{make_grid, tabulate_null, test_random_ties, GridKind, Observations, RngSeed};
//!
//! let rows: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64, (i * 7 % 20) as f64, (i * 3 % 20) as f64]).collect();
//! let m = Observations::from_rows(&rows).unwrap();
//! let grid = make_grid(GridKind::Extended, m.n(), m.t(), rankhc::default_k_n(m.n())).unwrap();
//! let table = tabulate_null(&grid, 500, 500, RngSeed(1)).unwrap();
//! let res = test_random_ties(&m, &table, RngSeed(2)).unwrap();
//! assert!(res.p_value > 0.0 && res.p_value <= 1.0);
//! ```

// NaN-rejecting guards are written as `!(x > 0.0)` on purpose
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod calibration;
pub mod comparators;
pub mod data;
pub mod error;
pub mod hc;
pub mod ranking;
pub mod rng;
pub mod scalar;
pub mod simgen;
pub mod stats;
pub mod theory;
mod serde_ext;

pub use calibration::{
    load_table, p_value_mc, save_table, tabulate_null, test_midrank_naive, test_midrank_permutation,
    test_random_ties, Method, NullTable, TestResult,
};
pub use data::{apply_direction, load_csv, ColumnDirection, CsvOptions, Direction, ObservationMatrix};
pub use error::{Error, Result};
pub use hc::{default_k_n, make_grid, GridKind, GridSpec, HcProfile, RankMoments};
pub use ranking::{compute_ranks, RankMatrix, TiePolicy};
pub use rng::RngSeed;
pub use scalar::Scalar;

/// Library version, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Observation panel in double precision.
pub type Observations = ObservationMatrix<f64>;
/// Observation panel in single precision.
pub type Observations32 = ObservationMatrix<f32>;
