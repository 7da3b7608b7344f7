//! Sparse matrices stored in both compressed-row and compressed-column form.
//!
//! Row access drives constraint evaluation (`A z`), column access drives the
//! adjoint product (`A^T lambda`). Keeping both layouts gives every product a
//! fixed summation order, which the deterministic-trace contract depends on:
//! the simulator's per-block products must be bitwise identical to the
//! synchronous solver's full-vector products.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    nrows: usize,
    ncols: usize,
    // CSR
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    csr_vals: Vec<f64>,
    // CSC
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    csc_vals: Vec<f64>,
}

/// Wire form: 0-based triplets plus shape, matching the problem-file schema.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Triplets {
    pub rows: Vec<usize>,
    pub cols: Vec<usize>,
    pub vals: Vec<f64>,
    pub shape: [usize; 2],
}

impl SparseMatrix {
    /// Build from 0-based triplets. Duplicate entries are summed, explicit
    /// zeros are dropped, and entries are sorted so the layout is canonical.
    pub fn from_triplets(
        nrows: usize,
        ncols: usize,
        entries: &[(usize, usize, f64)],
    ) -> Result<Self> {
        let mut items: Vec<(usize, usize, f64)> = Vec::with_capacity(entries.len());
        for &(r, c, v) in entries {
            if r >= nrows || c >= ncols {
                return Err(Error::Invalid(format!(
                    "matrix entry ({r}, {c}) outside shape {nrows}x{ncols}"
                )));
            }
            if !v.is_finite() {
                return Err(Error::Invalid(format!(
                    "matrix entry ({r}, {c}) is not finite"
                )));
            }
            items.push((r, c, v));
        }
        items.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        // Sum duplicates, then drop zeros.
        let mut merged: Vec<(usize, usize, f64)> = Vec::with_capacity(items.len());
        for (r, c, v) in items {
            match merged.last_mut() {
                Some(last) if last.0 == r && last.1 == c => last.2 += v,
                _ => merged.push((r, c, v)),
            }
        }
        merged.retain(|&(_, _, v)| v != 0.0);

        let mut row_ptr = vec![0usize; nrows + 1];
        for &(r, _, _) in &merged {
            row_ptr[r + 1] += 1;
        }
        for i in 0..nrows {
            row_ptr[i + 1] += row_ptr[i];
        }
        let col_idx: Vec<usize> = merged.iter().map(|e| e.1).collect();
        let csr_vals: Vec<f64> = merged.iter().map(|e| e.2).collect();

        // CSC from the same merged list, column-major order.
        let mut by_col: Vec<(usize, usize, f64)> = merged;
        by_col.sort_by(|a, b| (a.1, a.0).cmp(&(b.1, b.0)));
        let mut col_ptr = vec![0usize; ncols + 1];
        for &(_, c, _) in &by_col {
            col_ptr[c + 1] += 1;
        }
        for j in 0..ncols {
            col_ptr[j + 1] += col_ptr[j];
        }
        let row_idx: Vec<usize> = by_col.iter().map(|e| e.0).collect();
        let csc_vals: Vec<f64> = by_col.iter().map(|e| e.2).collect();

        Ok(Self {
            nrows,
            ncols,
            row_ptr,
            col_idx,
            csr_vals,
            col_ptr,
            row_idx,
            csc_vals,
        })
    }

    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self::from_triplets(nrows, ncols, &[]).expect("empty matrix")
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.csr_vals.len()
    }

    /// Column indices and values of row `i`.
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let (a, b) = (self.row_ptr[i], self.row_ptr[i + 1]);
        (&self.col_idx[a..b], &self.csr_vals[a..b])
    }

    /// Row indices and values of column `j`.
    pub fn col(&self, j: usize) -> (&[usize], &[f64]) {
        let (a, b) = (self.col_ptr[j], self.col_ptr[j + 1]);
        (&self.row_idx[a..b], &self.csc_vals[a..b])
    }

    pub fn row_is_zero(&self, i: usize) -> bool {
        self.row_ptr[i] == self.row_ptr[i + 1]
    }

    /// `A_i . z` with the canonical CSR summation order.
    #[inline]
    pub fn row_dot(&self, i: usize, z: &[f64]) -> f64 {
        let (cols, vals) = self.row(i);
        let mut acc = 0.0;
        for (c, v) in cols.iter().zip(vals) {
            acc += v * z[*c];
        }
        acc
    }

    /// `(A^T lam)_j` with the canonical CSC summation order.
    #[inline]
    pub fn col_dot(&self, j: usize, lam: &[f64]) -> f64 {
        let (rows, vals) = self.col(j);
        let mut acc = 0.0;
        for (r, v) in rows.iter().zip(vals) {
            acc += v * lam[*r];
        }
        acc
    }

    /// `out = A z`.
    pub fn matvec(&self, z: &[f64], out: &mut [f64]) {
        debug_assert_eq!(z.len(), self.ncols);
        debug_assert_eq!(out.len(), self.nrows);
        for i in 0..self.nrows {
            out[i] = self.row_dot(i, z);
        }
    }

    /// `out = A^T lam`, column by column so it matches `col_dot` exactly.
    pub fn t_matvec(&self, lam: &[f64], out: &mut [f64]) {
        debug_assert_eq!(lam.len(), self.nrows);
        debug_assert_eq!(out.len(), self.ncols);
        for j in 0..self.ncols {
            out[j] = self.col_dot(j, lam);
        }
    }

    /// Euclidean norms of each row.
    pub fn row_norms(&self) -> Vec<f64> {
        (0..self.nrows)
            .map(|i| {
                let (_, vals) = self.row(i);
                vals.iter().map(|v| v * v).sum::<f64>().sqrt()
            })
            .collect()
    }

    /// Sum of absolute values of each row.
    pub fn row_abs_sums(&self) -> Vec<f64> {
        (0..self.nrows)
            .map(|i| {
                let (_, vals) = self.row(i);
                vals.iter().map(|v| v.abs()).sum::<f64>()
            })
            .collect()
    }

    /// Infinity norm: max row absolute sum.
    pub fn inf_norm(&self) -> f64 {
        self.row_abs_sums().into_iter().fold(0.0, f64::max)
    }

    /// True if every stored value is an integer.
    pub fn is_integer(&self) -> bool {
        self.csr_vals.iter().all(|v| v.fract() == 0.0)
    }

    /// Spectral norm estimate by power iteration on `A^T A` with a
    /// deterministic start vector. Inflated by 1e-6 relative so downstream
    /// step-size bounds stay conservative.
    pub fn spectral_norm(&self) -> f64 {
        if self.nnz() == 0 {
            return 0.0;
        }
        let n = self.ncols;
        let mut v = vec![1.0 / (n as f64).sqrt(); n];
        let mut av = vec![0.0; self.nrows];
        let mut atav = vec![0.0; n];
        let mut est = 0.0f64;
        for _ in 0..300 {
            self.matvec(&v, &mut av);
            self.t_matvec(&av, &mut atav);
            let norm = atav.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm == 0.0 {
                // Start vector in the null space; nudge deterministically.
                for (j, x) in v.iter_mut().enumerate() {
                    *x += ((j % 7) as f64 + 1.0) * 1e-3;
                }
                continue;
            }
            let new_est = norm.sqrt();
            let done = (new_est - est).abs() <= 1e-12 * new_est.max(1.0);
            est = new_est;
            for (x, y) in v.iter_mut().zip(&atav) {
                *x = y / norm;
            }
            if done {
                break;
            }
        }
        est * (1.0 + 1e-6)
    }

    /// Horizontal concatenation `[left right]`.
    pub fn hcat(left: &SparseMatrix, right: &SparseMatrix) -> Result<SparseMatrix> {
        if left.nrows != right.nrows {
            return Err(Error::DimensionMismatch {
                what: "hcat row counts".into(),
                expected: left.nrows,
                found: right.nrows,
            });
        }
        let mut entries = Vec::with_capacity(left.nnz() + right.nnz());
        for i in 0..left.nrows {
            let (cols, vals) = left.row(i);
            for (c, v) in cols.iter().zip(vals) {
                entries.push((i, *c, *v));
            }
            let (cols, vals) = right.row(i);
            for (c, v) in cols.iter().zip(vals) {
                entries.push((i, left.ncols + *c, *v));
            }
        }
        SparseMatrix::from_triplets(left.nrows, left.ncols + right.ncols, &entries)
    }

    pub fn to_triplets(&self) -> Triplets {
        let mut rows = Vec::with_capacity(self.nnz());
        let mut cols = Vec::with_capacity(self.nnz());
        let mut vals = Vec::with_capacity(self.nnz());
        for i in 0..self.nrows {
            let (cs, vs) = self.row(i);
            for (c, v) in cs.iter().zip(vs) {
                rows.push(i);
                cols.push(*c);
                vals.push(*v);
            }
        }
        Triplets {
            rows,
            cols,
            vals,
            shape: [self.nrows, self.ncols],
        }
    }

    pub fn from_triplet_repr(t: &Triplets) -> Result<Self> {
        if t.rows.len() != t.cols.len() || t.rows.len() != t.vals.len() {
            return Err(Error::Invalid(format!(
                "triplet arrays disagree: rows {}, cols {}, vals {}",
                t.rows.len(),
                t.cols.len(),
                t.vals.len()
            )));
        }
        let entries: Vec<(usize, usize, f64)> = t
            .rows
            .iter()
            .zip(&t.cols)
            .zip(&t.vals)
            .map(|((r, c), v)| (*r, *c, *v))
            .collect();
        Self::from_triplets(t.shape[0], t.shape[1], &entries)
    }
}

impl Serialize for SparseMatrix {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_triplets().serialize(s)
    }
}

impl<'de> Deserialize<'de> for SparseMatrix {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let t = Triplets::deserialize(d)?;
        SparseMatrix::from_triplet_repr(&t).map_err(serde::de::Error::custom)
    }
}
