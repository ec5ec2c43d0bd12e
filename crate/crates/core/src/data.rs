//! Subject-by-referential observation panels.
//!
//! Rows are subjects, columns are referentials. Values are stored column-major
//! because every downstream consumer (ranking, permutation) works one
//! referential at a time.

use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq)]
pub struct ObservationMatrix<S = f64> {
    n: usize,
    t: usize,
    values: Vec<S>,
}

impl<S: Scalar> ObservationMatrix<S> {
    /// Build from column-major storage (`values[j * n + i]` is subject `i` in
    /// referential `j`).
    pub fn from_columns_flat(n: usize, t: usize, values: Vec<S>) -> Result<Self> {
        if n < 2 {
            return Err(Error::Shape(format!("need at least 2 subjects, got {n}")));
        }
        if t < 1 {
            return Err(Error::Shape("need at least 1 referential".into()));
        }
        if values.len() != n * t {
            return Err(Error::LengthMismatch {
                expected: n * t,
                found: values.len(),
            });
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                row: k % n,
                col: k / n,
            });
        }
        Ok(Self { n, t, values })
    }

    pub fn from_columns(columns: &[Vec<S>]) -> Result<Self> {
        let t = columns.len();
        let n = columns.first().map_or(0, Vec::len);
        let mut values = Vec::with_capacity(n * t);
        for (j, c) in columns.iter().enumerate() {
            if c.len() != n {
                return Err(Error::Ragged {
                    row: j,
                    expected: n,
                    found: c.len(),
                });
            }
            values.extend_from_slice(c);
        }
        Self::from_columns_flat(n, t, values)
    }

    pub fn from_rows(rows: &[Vec<S>]) -> Result<Self> {
        let n = rows.len();
        let t = rows.first().map_or(0, Vec::len);
        for (i, r) in rows.iter().enumerate() {
            if r.len() != t {
                return Err(Error::Ragged {
                    row: i,
                    expected: t,
                    found: r.len(),
                });
            }
        }
        let mut values = Vec::with_capacity(n * t);
        for j in 0..t {
            values.extend(rows.iter().map(|r| r[j]));
        }
        Self::from_columns_flat(n, t, values)
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn t(&self) -> usize {
        self.t
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> S {
        self.values[j * self.n + i]
    }

    #[inline]
    pub fn column(&self, j: usize) -> &[S] {
        &self.values[j * self.n..(j + 1) * self.n]
    }

    pub fn columns(&self) -> impl Iterator<Item = &[S]> + '_ {
        self.values.chunks_exact(self.n)
    }

    pub fn row(&self, i: usize) -> Vec<S> {
        (0..self.t).map(|j| self.get(i, j)).collect()
    }

    pub fn as_flat(&self) -> &[S] {
        &self.values
    }

    /// Applies `f` to every value of column `j`. The result must stay finite.
    pub fn map_column(&self, j: usize, f: impl Fn(S) -> S) -> Result<Self> {
        let mut values = self.values.clone();
        for v in &mut values[j * self.n..(j + 1) * self.n] {
            *v = f(*v);
        }
        Self::from_columns_flat(self.n, self.t, values)
    }

    /// Reorders subjects: row `i` of the result is row `order[i]` of `self`.
    pub fn permute_rows(&self, order: &[usize]) -> Result<Self> {
        if order.len() != self.n {
            return Err(Error::LengthMismatch {
                expected: self.n,
                found: order.len(),
            });
        }
        let mut values = Vec::with_capacity(self.values.len());
        for col in self.columns() {
            values.extend(order.iter().map(|&k| col[k]));
        }
        Self::from_columns_flat(self.n, self.t, values)
    }

    pub fn transpose(&self) -> Result<Self> {
        let rows: Vec<Vec<S>> = self.columns().map(<[S]>::to_vec).collect();
        Self::from_rows(&rows)
    }

    /// Grand mean and population standard deviation over all cells.
    pub fn overall_mean_sd(&self) -> (f64, f64) {
        let m = self.values.len() as f64;
        let mean = self.values.iter().map(|v| v.to_f64_lossy()).sum::<f64>() / m;
        let var = self
            .values
            .iter()
            .map(|v| (v.to_f64_lossy() - mean).powi(2))
            .sum::<f64>()
            / m;
        (mean, var.sqrt())
    }

    pub fn cast<T: Scalar>(&self) -> ObservationMatrix<T> {
        ObservationMatrix {
            n: self.n,
            t: self.t,
            values: self.values.iter().map(|v| T::lit(v.to_f64_lossy())).collect(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Direction {
    /// Large values are evidence of an anomaly.
    MonitorHigh,
    /// Small values are evidence of an anomaly.
    MonitorLow,
}

impl FromStr for Direction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "high" | "monitor-high" | "h" | "+" => Ok(Self::MonitorHigh),
            "low" | "monitor-low" | "l" | "-" => Ok(Self::MonitorLow),
            other => Err(Error::Unknown {
                kind: "direction",
                value: other.to_string(),
            }),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ColumnDirection(pub Vec<Direction>);

impl ColumnDirection {
    pub fn all_high(t: usize) -> Self {
        Self(vec![Direction::MonitorHigh; t])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl FromStr for ColumnDirection {
    type Err = Error;

    /// Comma-separated flags, e.g. `high,low,high`.
    fn from_str(s: &str) -> Result<Self> {
        s.split(',')
            .map(Direction::from_str)
            .collect::<Result<Vec<_>>>()
            .map(Self)
    }
}

/// Negates every monitor-low column so that "anomalous" always means "large".
pub fn apply_direction<S: Scalar>(
    m: &ObservationMatrix<S>,
    d: &ColumnDirection,
) -> Result<ObservationMatrix<S>> {
    if d.len() != m.t() {
        return Err(Error::LengthMismatch {
            expected: m.t(),
            found: d.len(),
        });
    }
    let mut values = m.values.clone();
    for (j, dir) in d.0.iter().enumerate() {
        if *dir == Direction::MonitorLow {
            for v in &mut values[j * m.n..(j + 1) * m.n] {
                *v = -*v;
            }
        }
    }
    ObservationMatrix::from_columns_flat(m.n, m.t, values)
}

#[derive(Clone, Copy, Debug, Default)]
pub struct CsvOptions {
    pub has_header: bool,
    /// Input has referentials in rows and subjects in columns.
    pub transpose: bool,
}

const MISSING_TOKENS: &[&str] = &["", "na", "n/a", "nan", "null", "none", "?", "."];

fn parse_cell(raw: &str, row: usize, col: usize) -> Result<f64> {
    let s = raw.trim();
    if MISSING_TOKENS.contains(&s.to_ascii_lowercase().as_str()) {
        return Err(Error::Missing { row, col });
    }
    let v: f64 = s.parse().map_err(|e: std::num::ParseFloatError| Error::Parse {
        row,
        col,
        reason: format!("{s:?}: {e}"),
    })?;
    if !v.is_finite() {
        return Err(Error::NonFinite { row, col });
    }
    Ok(v)
}

/// Reads a comma-separated panel. Row and column indices in errors are
/// zero-based positions within the data block (the header is not counted).
pub fn read_csv<R: Read>(reader: R, opts: CsvOptions) -> Result<ObservationMatrix> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(opts.has_header)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut width = None;
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::Parse {
            row: i,
            col: 0,
            reason: e.to_string(),
        })?;
        let w = *width.get_or_insert(rec.len());
        if rec.len() != w {
            return Err(Error::Ragged {
                row: i,
                expected: w,
                found: rec.len(),
            });
        }
        let row = rec
            .iter()
            .enumerate()
            .map(|(j, cell)| parse_cell(cell, i, j))
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    let m = ObservationMatrix::from_rows(&rows)?;
    if opts.transpose {
        m.transpose()
    } else {
        Ok(m)
    }
}

pub fn load_csv(path: impl AsRef<Path>, opts: CsvOptions) -> Result<ObservationMatrix> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    read_csv(std::io::BufReader::new(file), opts)
}

/// Writes the panel with shortest round-trip formatting, so re-reading yields
/// bit-identical values.
pub fn write_csv<S: Scalar, W: Write>(m: &ObservationMatrix<S>, mut w: W) -> std::io::Result<()> {
    for i in 0..m.n() {
        let line: Vec<String> = (0..m.t()).map(|j| format!("{}", m.get(i, j))).collect();
        writeln!(w, "{}", line.join(","))?;
    }
    Ok(())
}

impl<S: Scalar> fmt::Display for ObservationMatrix<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ObservationMatrix(n={}, t={})", self.n, self.t)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(s: &str, has_header: bool) -> Result<ObservationMatrix> {
        read_csv(
            s.as_bytes(),
            CsvOptions {
                has_header,
                transpose: false,
            },
        )
    }

    #[test]
    fn parses_plain_panel() {
        let m = parse("1,2\n3,4\n5,6", false).unwrap();
        assert_eq!((m.n(), m.t()), (3, 2));
        assert_eq!(m.column(1), &[2.0, 4.0, 6.0]);
        assert_eq!(m.row(2), vec![5.0, 6.0]);
    }

    #[test]
    fn header_is_not_a_subject() {
        let m = parse("a,b\n1,2\n3,4\n5,6", true).unwrap();
        assert_eq!(m.n(), 3);
    }

    #[test]
    fn scientific_notation() {
        let m = parse("1e3,-2.5E-1\n0.5,7", false).unwrap();
        assert_eq!(m.get(0, 0), 1000.0);
        assert_eq!(m.get(0, 1), -0.25);
    }

    #[test]
    fn na_cell_reports_position() {
        match parse("1,2\n3,NA\n5,6", false) {
            Err(Error::Missing { row: 1, col: 1 }) => {}
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            parse("1,2\n,4", false),
            Err(Error::Missing { row: 1, col: 0 })
        ));
    }

    #[test]
    fn garbage_cell_is_parse_error() {
        assert!(matches!(
            parse("1,2\n3,abc", false),
            Err(Error::Parse { row: 1, col: 1, .. })
        ));
        assert!(matches!(
            parse("1,inf\n3,4", false),
            Err(Error::NonFinite { row: 0, col: 1 })
        ));
    }

    #[test]
    fn ragged_rows_rejected() {
        assert!(matches!(
            parse("1,2\n3\n5,6", false),
            Err(Error::Ragged {
                row: 1,
                expected: 2,
                found: 1
            })
        ));
    }

    #[test]
    fn single_subject_rejected() {
        assert!(matches!(parse("1,2", false), Err(Error::Shape(_))));
    }

    #[test]
    fn transpose_on_load() {
        let m = read_csv(
            "1,3,5\n2,4,6".as_bytes(),
            CsvOptions {
                has_header: false,
                transpose: true,
            },
        )
        .unwrap();
        assert_eq!((m.n(), m.t()), (3, 2));
        assert_eq!(m.column(0), &[1.0, 3.0, 5.0]);
    }

    #[test]
    fn direction_negates_low_columns_only() {
        let m = ObservationMatrix::from_columns(&[vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0]]).unwrap();
        let d: ColumnDirection = "low,high".parse().unwrap();
        let out = apply_direction(&m, &d).unwrap();
        assert_eq!(out.column(0), &[-1.0, -2.0, -3.0]);
        assert_eq!(out.column(1), m.column(1));
        assert_eq!(apply_direction(&m, &ColumnDirection::all_high(2)).unwrap(), m);
        assert_eq!(apply_direction(&out, &d).unwrap(), m);
        assert!(matches!(
            apply_direction(&m, &ColumnDirection::all_high(3)),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn csv_round_trip_is_bit_exact() {
        let m = ObservationMatrix::from_rows(&[
            vec![0.1, 1e-300, -3.75],
            vec![std::f64::consts::PI, 12345.678901234567, 2.0f64.sqrt()],
        ])
        .unwrap();
        let mut buf = Vec::new();
        write_csv(&m, &mut buf).unwrap();
        let back = parse(std::str::from_utf8(&buf).unwrap(), false).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn generic_over_f32() {
        let m = ObservationMatrix::<f32>::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        let d = ColumnDirection(vec![Direction::MonitorLow, Direction::MonitorHigh]);
        assert_eq!(apply_direction(&m, &d).unwrap().column(0), &[-1.0f32, -3.0]);
    }
}
