//! Implicit Toeplitz operators with FFT-backed apply/adjoint.
//!
//! The measurement matrix used by all sparse estimators is a tall Toeplitz
//! slice of the known training sequence: entry (i, j) equals
//! `c[L - 1 + i - j]` for a G x L operator built from a length-M sequence.
//! The matrix is never materialized in the hot path; products go through a
//! zero-padded circulant embedding of length >= G + L - 1 (rounded up to a
//! power of two), which costs O((G + L) log(G + L)) per apply.

use std::sync::OnceLock;

use super::fft::{fft, ifft};
use super::{check_finite, C64, CVec, NumericsError, OpCounter};

#[derive(Debug)]
pub struct ToeplitzOperator {
    first_col: CVec,
    first_row: CVec,
    fft_len: usize,
    fwd_spectrum: OnceLock<CVec>,
    adj_spectrum: OnceLock<CVec>,
}

impl ToeplitzOperator {
    /// Build from the first column (length = rows) and first row
    /// (length = cols). The shared corner entry must match exactly.
    pub fn new(first_col: CVec, first_row: CVec) -> Result<Self, NumericsError> {
        if first_col.is_empty() || first_row.is_empty() {
            return Err(NumericsError::EmptyVector);
        }
        check_finite(&first_col)?;
        check_finite(&first_row)?;
        if first_col[0] != first_row[0] {
            return Err(NumericsError::CornerMismatch);
        }
        let fft_len = (first_col.len() + first_row.len() - 1).next_power_of_two();
        Ok(Self {
            first_col,
            first_row,
            fft_len,
            fwd_spectrum: OnceLock::new(),
            adj_spectrum: OnceLock::new(),
        })
    }

    /// The G x L measurement operator of a known real training sequence `c`
    /// (length M): row i, column j holds `c[l - 1 + i - j]`.
    pub fn from_training_sequence(c: &[f64], g: usize, l: usize) -> Result<Self, NumericsError> {
        if g == 0 || l == 0 || c.is_empty() {
            return Err(NumericsError::EmptyVector);
        }
        if l - 1 + g > c.len() {
            return Err(NumericsError::OperatorSize {
                expected: c.len(),
                got: l - 1 + g,
            });
        }
        let first_col: CVec = (0..g).map(|i| C64::new(c[l - 1 + i], 0.0)).collect();
        let first_row: CVec = (0..l).map(|j| C64::new(c[l - 1 - j], 0.0)).collect();
        Self::new(first_col, first_row)
    }

    pub fn rows(&self) -> usize {
        self.first_col.len()
    }

    pub fn cols(&self) -> usize {
        self.first_row.len()
    }

    /// Entry (i, j); used by tests, oracles, and sparse products.
    pub fn entry(&self, i: usize, j: usize) -> C64 {
        if i >= j {
            self.first_col[i - j]
        } else {
            self.first_row[j - i]
        }
    }

    /// Dense copy (row major) for small-instance oracles.
    pub fn materialize(&self) -> Vec<CVec> {
        (0..self.rows())
            .map(|i| (0..self.cols()).map(|j| self.entry(i, j)).collect())
            .collect()
    }

    /// Column j as an owned vector (used by least-squares refits).
    pub fn column(&self, j: usize) -> CVec {
        (0..self.rows()).map(|i| self.entry(i, j)).collect()
    }

    fn fwd_generator(&self) -> CVec {
        let mut e = vec![C64::new(0.0, 0.0); self.fft_len];
        for (i, v) in self.first_col.iter().enumerate() {
            e[i] = *v;
        }
        for (j, v) in self.first_row.iter().enumerate().skip(1) {
            e[self.fft_len - j] = *v;
        }
        e
    }

    fn adj_generator(&self) -> CVec {
        // Adjoint operator is Toeplitz with first column conj(first_row) and
        // first row conj(first_col).
        let mut e = vec![C64::new(0.0, 0.0); self.fft_len];
        for (j, v) in self.first_row.iter().enumerate() {
            e[j] = v.conj();
        }
        for (i, v) in self.first_col.iter().enumerate().skip(1) {
            e[self.fft_len - i] = v.conj();
        }
        e
    }

    fn spectrum(&self, adjoint: bool, ops: &mut OpCounter) -> Result<&CVec, NumericsError> {
        let slot = if adjoint {
            &self.adj_spectrum
        } else {
            &self.fwd_spectrum
        };
        if slot.get().is_none() {
            let gen = if adjoint {
                self.adj_generator()
            } else {
                self.fwd_generator()
            };
            let spec = fft(&gen, ops)?;
            let _ = slot.set(spec);
        }
        Ok(slot.get().expect("spectrum initialized"))
    }

    fn circular_apply(
        &self,
        x: &[C64],
        in_len: usize,
        out_len: usize,
        adjoint: bool,
        ops: &mut OpCounter,
    ) -> Result<CVec, NumericsError> {
        if x.len() != in_len {
            return Err(NumericsError::OperatorSize {
                expected: in_len,
                got: x.len(),
            });
        }
        check_finite(x)?;
        // Spectrum FFT is charged once per operator on first use; the charge
        // lands on whichever counter sees that first apply, keeping per-call
        // totals deterministic for a fresh operator.
        let _ = self.spectrum(adjoint, ops)?;
        let mut pad = vec![C64::new(0.0, 0.0); self.fft_len];
        pad[..x.len()].copy_from_slice(x);
        let xf = fft(&pad, ops)?;
        let spec = if adjoint {
            self.adj_spectrum.get().expect("set above")
        } else {
            self.fwd_spectrum.get().expect("set above")
        };
        let prod: CVec = xf.iter().zip(spec).map(|(a, b)| a * b).collect();
        ops.add_mults(self.fft_len as u64);
        let full = ifft(&prod, ops)?;
        Ok(full[..out_len].to_vec())
    }

    /// y = T x (x has `cols` entries, result has `rows`).
    pub fn apply(&self, x: &[C64], ops: &mut OpCounter) -> Result<CVec, NumericsError> {
        self.circular_apply(x, self.cols(), self.rows(), false, ops)
    }

    /// z = T^H y (y has `rows` entries, result has `cols`).
    pub fn apply_adjoint(&self, y: &[C64], ops: &mut OpCounter) -> Result<CVec, NumericsError> {
        self.circular_apply(y, self.rows(), self.cols(), true, ops)
    }

    /// y = T x for an x supported on few indices: sum of scaled columns,
    /// costing rows * |support| multiplications. `x` is the dense vector of
    /// length `cols`; only the listed entries are read.
    pub fn apply_sparse(
        &self,
        x: &[C64],
        support: &[usize],
        ops: &mut OpCounter,
    ) -> Result<CVec, NumericsError> {
        if x.len() != self.cols() {
            return Err(NumericsError::OperatorSize {
                expected: self.cols(),
                got: x.len(),
            });
        }
        let mut y = vec![C64::new(0.0, 0.0); self.rows()];
        for &j in support {
            if j >= self.cols() {
                return Err(NumericsError::OperatorSize {
                    expected: self.cols(),
                    got: j,
                });
            }
            let xj = x[j];
            if xj == C64::new(0.0, 0.0) {
                continue;
            }
            for i in 0..self.rows() {
                y[i] += self.entry(i, j) * xj;
            }
        }
        ops.add_mults((self.rows() * support.len()) as u64);
        ops.add_adds((self.rows() * support.len()) as u64);
        Ok(y)
    }
}
