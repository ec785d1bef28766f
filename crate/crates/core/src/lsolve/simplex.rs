//! Two-phase revised simplex for `min c^T z  s.t.  E z = b, z >= 0` with the
//! columns of `E` supplied lazily.
//!
//! Pricing follows Bland's rule (lowest eligible index enters, lowest basic
//! index leaves among ratio ties), so the pivot sequence is a deterministic
//! function of the input. The basis matrix is refactored at every pivot,
//! which is cheap because the number of rows is small.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Minimum magnitude of a pivot element.
pub(crate) const PIVOT_TOL: f64 = 1e-10;
/// Reduced costs above `-OPT_TOL` are treated as non-negative.
const OPT_TOL: f64 = 1e-10;
/// Relative tolerance for treating two ratios as tied.
const TIE_TOL: f64 = 1e-12;

/// Column oracle for the constraint matrix. Structural columns are indexed
/// `0..n_structural()`.
pub(crate) trait Columns {
    fn n_rows(&self) -> usize;
    fn n_structural(&self) -> usize;
    fn column(&self, k: usize) -> DVector<f64>;
    fn cost(&self, k: usize) -> f64;
}

pub(crate) enum Outcome {
    Optimal {
        /// `(structural index, value)` for every basic structural variable.
        basic: Vec<(usize, f64)>,
    },
    Infeasible {
        /// Optimal Phase-I objective: the smallest reachable sum of
        /// artificial variables.
        phase_one_residual: f64,
    },
}

struct Basis {
    mat: DMatrix<f64>,
    inv: DMatrix<f64>,
}

struct Tableau<'a, C: Columns> {
    cols: &'a C,
    rhs: DVector<f64>,
    /// Row sign flips that make `rhs` non-negative.
    sign: Vec<f64>,
    basis: Vec<usize>,
    pivots: usize,
    max_pivots: usize,
}

impl<'a, C: Columns> Tableau<'a, C> {
    fn n_struct(&self) -> usize {
        self.cols.n_structural()
    }

    fn is_artificial(&self, k: usize) -> bool {
        k >= self.n_struct()
    }

    fn column(&self, k: usize) -> DVector<f64> {
        let m = self.rhs.len();
        if self.is_artificial(k) {
            let mut e = DVector::zeros(m);
            e[k - self.n_struct()] = 1.0;
            e
        } else {
            let mut c = self.cols.column(k);
            for (v, s) in c.iter_mut().zip(&self.sign) {
                *v *= s;
            }
            c
        }
    }

    /// Basis matrix and its inverse.
    fn factor(&self) -> Result<Basis> {
        let m = self.rhs.len();
        let mut mat = DMatrix::zeros(m, m);
        for (i, &k) in self.basis.iter().enumerate() {
            mat.set_column(i, &self.column(k));
        }
        let inv = mat.clone().try_inverse().ok_or_else(singular_basis)?;
        Ok(Basis { mat, inv })
    }

    fn basic_values(&self, basis: &Basis) -> DVector<f64> {
        let mut x = &basis.inv * &self.rhs;
        // one step of iterative refinement
        x += &basis.inv * (&self.rhs - &basis.mat * &x);
        x
    }

    /// Runs simplex pivots with `cost` until optimal. Only columns with
    /// `eligible(k)` may enter.
    fn optimize(&mut self, cost: impl Fn(&Self, usize) -> f64, n_eligible: usize) -> Result<()> {
        let m = self.rhs.len();
        loop {
            let basis = self.factor()?;
            let c_b = DVector::from_iterator(m, self.basis.iter().map(|&k| cost(self, k)));
            let y = basis.inv.tr_mul(&c_b);

            let entering = (0..n_eligible).find(|&k| {
                if self.basis.contains(&k) {
                    return false;
                }
                let d = cost(self, k) - y.dot(&self.column(k));
                d < -OPT_TOL
            });
            let Some(enter) = entering else {
                return Ok(());
            };

            if self.pivots >= self.max_pivots {
                return Err(Error::PivotLimit(self.max_pivots));
            }

            let x_b = self.basic_values(&basis);
            let dir = &basis.inv * self.column(enter);
            let mut leave: Option<(usize, f64)> = None;
            for i in 0..m {
                if dir[i] <= PIVOT_TOL {
                    continue;
                }
                let t = x_b[i].max(0.0) / dir[i];
                leave = match leave {
                    None => Some((i, t)),
                    Some((bi, bt)) => {
                        let tie = (t - bt).abs() <= TIE_TOL * (1.0 + bt.abs());
                        if (!tie && t < bt) || (tie && self.basis[i] < self.basis[bi]) {
                            Some((i, t))
                        } else {
                            Some((bi, bt))
                        }
                    }
                };
            }
            let Some((row, _)) = leave else {
                // The objectives used here are bounded below by zero.
                return Err(Error::InvalidInput("linear program is unbounded".into()));
            };
            self.basis[row] = enter;
            self.pivots += 1;
        }
    }

    /// Pivots zero-level artificials out of the basis wherever a structural
    /// column can replace them. Artificials left behind sit on redundant rows.
    fn expel_artificials(&mut self) -> Result<()> {
        let m = self.rhs.len();
        for row in 0..m {
            if !self.is_artificial(self.basis[row]) {
                continue;
            }
            let basis = self.factor()?;
            let inv_row = basis.inv.row(row).transpose();
            let replacement = (0..self.n_struct()).find(|&k| {
                !self.basis.contains(&k) && inv_row.dot(&self.column(k)).abs() > PIVOT_TOL
            });
            if let Some(k) = replacement {
                self.basis[row] = k;
                self.pivots += 1;
            }
        }
        Ok(())
    }
}

fn singular_basis() -> Error {
    Error::InvalidInput("simplex basis became singular".into())
}

/// Solves the LP. `feas_tol` is the absolute Phase-I threshold above which
/// the equality system is declared inconsistent.
pub(crate) fn solve<C: Columns>(cols: &C, rhs: &DVector<f64>, feas_tol: f64) -> Result<Outcome> {
    let m = cols.n_rows();
    let n = cols.n_structural();
    let sign: Vec<f64> = rhs.iter().map(|&v| if v < 0.0 { -1.0 } else { 1.0 }).collect();
    let b = DVector::from_iterator(m, rhs.iter().map(|v| v.abs()));
    let mut tab = Tableau {
        cols,
        rhs: b,
        sign,
        basis: (n..n + m).collect(),
        pivots: 0,
        max_pivots: 50 * (m + n) + 1000,
    };

    // Phase I: minimise the sum of artificials.
    let phase_one_cost = |t: &Tableau<C>, k: usize| if t.is_artificial(k) { 1.0 } else { 0.0 };
    tab.optimize(phase_one_cost, n + m)?;
    let x_b = tab.basic_values(&tab.factor()?);
    let infeasibility: f64 = tab
        .basis
        .iter()
        .zip(x_b.iter())
        .filter(|(&k, _)| tab.is_artificial(k))
        .map(|(_, v)| v.abs())
        .sum();
    if infeasibility > feas_tol {
        return Ok(Outcome::Infeasible { phase_one_residual: infeasibility });
    }
    tab.expel_artificials()?;

    // Phase II: artificials are barred from re-entering.
    let phase_two_cost = |t: &Tableau<C>, k: usize| {
        if t.is_artificial(k) {
            0.0
        } else {
            t.cols.cost(k)
        }
    };
    tab.optimize(phase_two_cost, n)?;

    let x_b = tab.basic_values(&tab.factor()?);
    let basic = tab
        .basis
        .iter()
        .zip(x_b.iter())
        .filter(|(&k, _)| !tab.is_artificial(k))
        .map(|(&k, &v)| (k, v))
        .collect();
    Ok(Outcome::Optimal { basic })
}
