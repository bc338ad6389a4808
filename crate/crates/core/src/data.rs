//! ±1 sample matrices: storage, pair counting and CSV input/output.
//!
//! Each column is stored as a bit vector (bit set ⇔ spin +1), so joint
//! state counts of a pair reduce to popcounts.

use std::fs::File;
use std::io::{BufReader, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evidence::PairStats;

/// Encoding of spin values in input files.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum Encoding {
    /// Values are `-1` and `1`.
    #[default]
    Pm1,
    /// Values are `0` and `1`, mapped to `-1` and `+1`.
    ZeroOne,
}

/// An `N × n` matrix of ±1 observations, rows are samples.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SampleMatrix {
    n_samples: usize,
    n_nodes: usize,
    words: usize,
    /// `columns[j * words + w]` holds rows `64w .. 64w + 63` of column `j`.
    bits: Vec<u64>,
}

impl SampleMatrix {
    /// Builds a matrix from `f(row, col)`, true meaning `+1`.
    pub fn from_fn(n_samples: usize, n_nodes: usize, mut f: impl FnMut(usize, usize) -> bool) -> Result<Self> {
        if n_samples == 0 || n_nodes == 0 {
            return Err(Error::InvalidInput(format!(
                "sample matrix needs at least one row and one column, got {n_samples} x {n_nodes}"
            )));
        }
        let words = n_samples.div_ceil(64);
        let mut bits = vec![0u64; words * n_nodes];
        for r in 0..n_samples {
            for c in 0..n_nodes {
                if f(r, c) {
                    bits[c * words + r / 64] |= 1u64 << (r % 64);
                }
            }
        }
        Ok(SampleMatrix {
            n_samples,
            n_nodes,
            words,
            bits,
        })
    }

    /// Builds a matrix from rows of ±1 values.
    pub fn from_rows(rows: &[Vec<i8>]) -> Result<Self> {
        let n_nodes = rows.first().map_or(0, |r| r.len());
        for (r, row) in rows.iter().enumerate() {
            if row.len() != n_nodes {
                return Err(Error::Parse {
                    row: r + 1,
                    col: row.len().min(n_nodes) + 1,
                    msg: format!("expected {n_nodes} columns, found {}", row.len()),
                });
            }
            if let Some(c) = row.iter().position(|&v| v != 1 && v != -1) {
                return Err(Error::Parse {
                    row: r + 1,
                    col: c + 1,
                    msg: format!("value {} is not +1 or -1", row[c]),
                });
            }
        }
        Self::from_fn(rows.len(), n_nodes, |r, c| rows[r][c] == 1)
    }

    pub fn n_samples(&self) -> usize {
        self.n_samples
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    fn column(&self, j: usize) -> &[u64] {
        &self.bits[j * self.words..(j + 1) * self.words]
    }

    /// True if `S_j = +1` in row `r`.
    pub fn is_up(&self, r: usize, j: usize) -> bool {
        self.column(j)[r / 64] >> (r % 64) & 1 == 1
    }

    /// Spin value `±1`.
    pub fn get(&self, r: usize, j: usize) -> i8 {
        if self.is_up(r, j) {
            1
        } else {
            -1
        }
    }

    /// One row as ±1 values.
    pub fn row(&self, r: usize) -> Vec<i8> {
        (0..self.n_nodes).map(|j| self.get(r, j)).collect()
    }

    /// Joint state counts of columns `i` and `j`.
    pub fn pair_counts(&self, i: usize, j: usize) -> PairStats {
        let (a, b) = (self.column(i), self.column(j));
        let mut pp = 0u64;
        let mut up_i = 0u64;
        let mut up_j = 0u64;
        for (x, y) in a.iter().zip(b) {
            pp += (x & y).count_ones() as u64;
            up_i += x.count_ones() as u64;
            up_j += y.count_ones() as u64;
        }
        let n = self.n_samples as u64;
        PairStats {
            n_pp: pp,
            n_pm: up_i - pp,
            n_mp: up_j - pp,
            n_mm: n + pp - up_i - up_j,
        }
    }

    /// Joint counts of `i` and `j` restricted to rows where `S_k` equals
    /// `+1` (`up = true`) or `−1`. The total may be zero.
    pub fn pair_counts_given(&self, i: usize, j: usize, k: usize, up: bool) -> [u64; 4] {
        let (a, b, m) = (self.column(i), self.column(j), self.column(k));
        let tail = self.tail_mask();
        let mut pp = 0u64;
        let mut up_i = 0u64;
        let mut up_j = 0u64;
        let mut rows = 0u64;
        for w in 0..self.words {
            let mut mask = if up { m[w] } else { !m[w] };
            if w + 1 == self.words {
                mask &= tail;
            }
            pp += (a[w] & b[w] & mask).count_ones() as u64;
            up_i += (a[w] & mask).count_ones() as u64;
            up_j += (b[w] & mask).count_ones() as u64;
            rows += mask.count_ones() as u64;
        }
        [pp, up_i - pp, up_j - pp, rows + pp - up_i - up_j]
    }

    fn tail_mask(&self) -> u64 {
        match self.n_samples % 64 {
            0 => u64::MAX,
            r => (1u64 << r) - 1,
        }
    }

    /// Number of `+1` entries in column `j`.
    pub fn up_count(&self, j: usize) -> usize {
        self.column(j).iter().map(|w| w.count_ones() as usize).sum()
    }

    /// Mean of column `j`.
    pub fn magnetization(&self, j: usize) -> f64 {
        (2.0 * self.up_count(j) as f64 - self.n_samples as f64) / self.n_samples as f64
    }

    /// Rows `start .. start + len`.
    pub fn row_window(&self, start: usize, len: usize) -> Result<Self> {
        if start + len > self.n_samples {
            return Err(Error::InvalidInput(format!(
                "window {start}..{} exceeds {} samples",
                start + len,
                self.n_samples
            )));
        }
        Self::from_fn(len, self.n_nodes, |r, c| self.is_up(start + r, c))
    }

    /// Rows in the given order (indices may repeat).
    pub fn select_rows(&self, rows: &[usize]) -> Result<Self> {
        if let Some(&bad) = rows.iter().find(|&&r| r >= self.n_samples) {
            return Err(Error::InvalidInput(format!("row {bad} out of range")));
        }
        Self::from_fn(rows.len(), self.n_nodes, |r, c| self.is_up(rows[r], c))
    }

    /// Columns in the given order.
    pub fn select_columns(&self, cols: &[usize]) -> Result<Self> {
        if let Some(&bad) = cols.iter().find(|&&c| c >= self.n_nodes) {
            return Err(Error::InvalidInput(format!("column {bad} out of range")));
        }
        Self::from_fn(self.n_samples, cols.len(), |r, c| self.is_up(r, cols[c]))
    }

    /// Writes the matrix as headerless CSV of ±1.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
        for r in 0..self.n_samples {
            w.write_record(self.row(r).iter().map(|v| v.to_string()))?;
        }
        w.flush()?;
        Ok(())
    }

    /// Parses headerless CSV of integers in the given encoding.
    pub fn read_csv<R: Read>(input: R, encoding: Encoding) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(true)
            .trim(csv::Trim::All)
            .from_reader(input);
        let mut rows: Vec<Vec<i8>> = Vec::new();
        let mut width = None;
        for (r, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let row_no = r + 1;
            let w = *width.get_or_insert(rec.len());
            if rec.len() != w {
                return Err(Error::Parse {
                    row: row_no,
                    col: rec.len().min(w) + 1,
                    msg: format!("ragged row: expected {w} columns, found {}", rec.len()),
                });
            }
            let mut row = Vec::with_capacity(w);
            for (c, field) in rec.iter().enumerate() {
                let v = match (encoding, field) {
                    (Encoding::Pm1, "1" | "+1") => 1,
                    (Encoding::Pm1, "-1") => -1,
                    (Encoding::ZeroOne, "1") => 1,
                    (Encoding::ZeroOne, "0") => -1,
                    _ => {
                        return Err(Error::Parse {
                            row: row_no,
                            col: c + 1,
                            msg: format!("'{field}' is not a valid {encoding:?} spin"),
                        })
                    }
                };
                row.push(v);
            }
            rows.push(row);
        }
        if rows.is_empty() {
            return Err(Error::InvalidInput("input has no rows".into()));
        }
        Self::from_rows(&rows)
    }
}

/// Reads a sample matrix from a CSV file.
pub fn ingest(path: &Path, encoding: Encoding) -> Result<SampleMatrix> {
    SampleMatrix::read_csv(BufReader::new(File::open(path)?), encoding)
}
