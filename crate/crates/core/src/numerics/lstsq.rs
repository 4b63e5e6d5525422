//! Dense complex least squares via Householder QR.
//!
//! Used for the final gain refit on a detected support and for the matching
//! pursuit refits. Sizes are tiny (tens of columns), so a straightforward
//! column-by-column factorization is plenty; the operation counters charge
//! the usual m*k^2 + k^3/3 flop model instead of metering every scalar.

use super::{check_finite, C64, CVec, NumericsError, OpCounter};

/// Relative pivot threshold below which a column is declared dependent.
const PIVOT_RTOL: f64 = 1e-10;

fn charge_ls(m: usize, k: usize, ops: &mut OpCounter) {
    let (m, k) = (m as u64, k as u64);
    let cost = m * k * k + 2 * m * k + k * k * k / 3 + k * k;
    ops.add_mults(cost);
    ops.add_adds(cost);
}

struct QrState {
    m: usize,
    /// Column-major working copy; reflectors overwrite the sub-diagonal.
    a: Vec<CVec>,
    rhs: CVec,
    /// (pivot row, reflector vector, squared norm) per accepted column.
    reflectors: Vec<(usize, CVec, f64)>,
    /// Input indices of accepted (independent) columns, in input order.
    kept: Vec<usize>,
    pivot_tol: f64,
}

impl QrState {
    fn new(cols: &[CVec], y: &[C64]) -> Result<Self, NumericsError> {
        if cols.is_empty() || y.is_empty() {
            return Err(NumericsError::EmptyVector);
        }
        let m = y.len();
        for c in cols {
            if c.len() != m {
                return Err(NumericsError::LengthMismatch {
                    left: m,
                    right: c.len(),
                });
            }
            check_finite(c)?;
        }
        check_finite(y)?;
        let max_norm = cols
            .iter()
            .map(|c| super::norm(c))
            .fold(0.0_f64, f64::max);
        if max_norm == 0.0 {
            return Err(NumericsError::SingularSystem);
        }
        Ok(Self {
            m,
            a: cols.to_vec(),
            rhs: y.to_vec(),
            reflectors: Vec::new(),
            kept: Vec::new(),
            pivot_tol: PIVOT_RTOL * max_norm,
        })
    }

    fn apply_reflector(v: &[C64], vnorm2: f64, target: &mut [C64]) {
        // target -= v * 2 <v, target> / ||v||^2
        let mut w = C64::new(0.0, 0.0);
        for (vi, ti) in v.iter().zip(target.iter()) {
            w += vi.conj() * ti;
        }
        let scale = w * (2.0 / vnorm2);
        for (vi, ti) in v.iter().zip(target.iter_mut()) {
            *ti -= vi * scale;
        }
    }

    /// Try to absorb column `j`; returns false if it is numerically
    /// dependent on the columns accepted so far.
    fn push_column(&mut self, j: usize) -> bool {
        let r = self.kept.len();
        if r >= self.m {
            return false;
        }
        for (row, v, vnorm2) in &self.reflectors {
            Self::apply_reflector(v, *vnorm2, &mut self.a[j][*row..]);
        }
        let tail = &self.a[j][r..];
        let tail_norm = super::norm(tail);
        if tail_norm <= self.pivot_tol {
            return false;
        }
        let x0 = tail[0];
        let phase = if x0 == C64::new(0.0, 0.0) {
            C64::new(1.0, 0.0)
        } else {
            x0 / x0.norm()
        };
        let alpha = -phase * tail_norm;
        let mut v = tail.to_vec();
        v[0] -= alpha;
        let vnorm2 = super::norm_sqr(&v);
        if vnorm2 == 0.0 {
            // Column already of the form alpha * e_1; no reflection needed.
            self.a[j][r] = alpha;
        } else {
            Self::apply_reflector(&v, vnorm2, &mut self.a[j][r..]);
            Self::apply_reflector(&v, vnorm2, &mut self.rhs[r..]);
            self.reflectors.push((r, v, vnorm2));
        }
        self.a[j][r] = alpha;
        for t in self.a[j][r + 1..].iter_mut() {
            *t = C64::new(0.0, 0.0);
        }
        self.kept.push(j);
        true
    }

    /// Back-substitute R x = Q^H y over the accepted columns, scattering the
    /// coefficients into a vector of the original column count.
    fn solve(&self, total_cols: usize) -> CVec {
        let rank = self.kept.len();
        let mut xk = vec![C64::new(0.0, 0.0); rank];
        for t in (0..rank).rev() {
            let mut s = self.rhs[t];
            for t2 in t + 1..rank {
                s -= self.a[self.kept[t2]][t] * xk[t2];
            }
            xk[t] = s / self.a[self.kept[t]][t];
        }
        let mut x = vec![C64::new(0.0, 0.0); total_cols];
        for (t, &j) in self.kept.iter().enumerate() {
            x[j] = xk[t];
        }
        x
    }
}

/// Least-squares coefficients minimizing ||y - sum_j x_j cols_j||. Errors
/// with `SingularSystem` if any column is numerically dependent (or the
/// system is wider than tall).
pub fn least_squares(cols: &[CVec], y: &[C64], ops: &mut OpCounter) -> Result<CVec, NumericsError> {
    let mut st = QrState::new(cols, y)?;
    for j in 0..cols.len() {
        if !st.push_column(j) {
            return Err(NumericsError::SingularSystem);
        }
    }
    charge_ls(st.m, cols.len(), ops);
    Ok(st.solve(cols.len()))
}

/// Like `least_squares`, but dependent columns get a zero coefficient
/// instead of aborting. Returns the coefficients and the input indices of
/// the columns that were dropped (in input order).
pub fn least_squares_dropping(
    cols: &[CVec],
    y: &[C64],
    ops: &mut OpCounter,
) -> Result<(CVec, Vec<usize>), NumericsError> {
    let mut st = QrState::new(cols, y)?;
    let mut dropped = Vec::new();
    for j in 0..cols.len() {
        if !st.push_column(j) {
            dropped.push(j);
        }
    }
    if st.kept.is_empty() {
        return Err(NumericsError::SingularSystem);
    }
    charge_ls(st.m, cols.len(), ops);
    Ok((st.solve(cols.len()), dropped))
}
