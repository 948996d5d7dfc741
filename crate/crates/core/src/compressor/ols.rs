//! Least-squares fit of the output weights, without intercept.
//!
//! Normal equations are solved by a Cholesky factorisation that drops columns
//! which are dead (near-zero Gram diagonal) or numerically dependent on the
//! columns before them; dropped columns get weight zero. One round of
//! iterative refinement restores residual orthogonality lost to the squared
//! condition number.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

use super::network::PayoffMatrix;

/// Relative threshold below which a Gram diagonal or Cholesky pivot is
/// treated as zero.
pub const PRUNE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct OlsFit<T> {
    pub weights: Vec<T>,
    /// `true` for columns excluded from the fit.
    pub pruned: Vec<bool>,
    /// Every column was pruned, so the fit is identically zero.
    pub degenerate: bool,
}

struct Cholesky<T> {
    m: usize,
    l: Vec<T>,
    active: Vec<bool>,
}

impl<T: Scalar> Cholesky<T> {
    fn factor(g: &[T], m: usize) -> Self {
        let max_diag = (0..m).map(|i| g[i * m + i]).fold(T::zero(), T::max);
        let tol = T::lit(PRUNE_TOL);
        let mut l = vec![T::zero(); m * m];
        let mut active = vec![false; m];
        for j in 0..m {
            let gjj = g[j * m + j];
            if !(gjj > tol * max_diag) {
                continue;
            }
            let mut pivot = gjj;
            for k in 0..j {
                pivot = pivot - l[j * m + k] * l[j * m + k];
            }
            if !(pivot > tol * gjj) {
                continue;
            }
            let d = pivot.sqrt();
            l[j * m + j] = d;
            active[j] = true;
            for i in j + 1..m {
                let mut v = g[i * m + j];
                for k in 0..j {
                    v = v - l[i * m + k] * l[j * m + k];
                }
                l[i * m + j] = v / d;
            }
        }
        Self { m, l, active }
    }

    /// Solves `L L^T x = b` on the active columns; inactive entries are 0.
    fn solve(&self, b: &[T]) -> Vec<T> {
        let m = self.m;
        let mut z = vec![T::zero(); m];
        for i in 0..m {
            if !self.active[i] {
                continue;
            }
            let mut v = b[i];
            for k in 0..i {
                v = v - self.l[i * m + k] * z[k];
            }
            z[i] = v / self.l[i * m + i];
        }
        let mut x = vec![T::zero(); m];
        for i in (0..m).rev() {
            if !self.active[i] {
                continue;
            }
            let mut v = z[i];
            for k in i + 1..m {
                v = v - self.l[k * m + i] * x[k];
            }
            x[i] = v / self.l[i * m + i];
        }
        x
    }
}

/// `argmin_W ||Y - X W||^2`.
pub fn fit_weights_ols<T: Scalar>(x: &PayoffMatrix<T>, y: &[T]) -> Result<OlsFit<T>> {
    if x.rows() == 0 {
        return Err(Error::InvalidArgument(
            "least squares needs at least one observation".into(),
        ));
    }
    if y.len() != x.rows() {
        return Err(Error::DimensionMismatch(format!(
            "{} targets for {} rows",
            y.len(),
            x.rows()
        )));
    }
    let m = x.cols();
    let chol = Cholesky::factor(&x.gram(), m);
    let mut w = chol.solve(&x.tr_mul_vec(y));
    // refinement: solve for the correction from the current residual
    let fitted = x.mul_vec(&w);
    let r: Vec<T> = y.iter().zip(&fitted).map(|(a, b)| *a - *b).collect();
    let dw = chol.solve(&x.tr_mul_vec(&r));
    for (wi, d) in w.iter_mut().zip(dw) {
        *wi = *wi + d;
    }
    let pruned: Vec<bool> = chol.active.iter().map(|a| !a).collect();
    let degenerate = pruned.iter().all(|p| *p);
    Ok(OlsFit {
        weights: w,
        pruned,
        degenerate,
    })
}
