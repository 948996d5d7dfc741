//! Forward pass, loss and strike gradient of the two-layer payoff network.
//!
//! The hidden layer has one ReLU node per compressed option with a fixed
//! `+1`/`-1` input weight (call/put) and the strike as bias, so node `i`
//! outputs `max(i_cp * (spot - k_i), 0)`.

use crate::error::{invalid, Error, Result};
use crate::portfolio::equidistant;
use crate::pricing::{intrinsic, OptionKind};
use crate::scalar::{CompensatedSum, Scalar};

/// Dense row-major `rows x cols` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct PayoffMatrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> PayoffMatrix<T> {
    pub fn from_rows(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "{} entries for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> T {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[T] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    /// `X * w`.
    pub fn mul_vec(&self, w: &[T]) -> Vec<T> {
        debug_assert_eq!(w.len(), self.cols);
        (0..self.rows)
            .map(|r| {
                let mut acc = CompensatedSum::new();
                for (x, wi) in self.row(r).iter().zip(w) {
                    acc.add(*x * *wi);
                }
                acc.value()
            })
            .collect()
    }

    /// `X^T v`.
    pub fn tr_mul_vec(&self, v: &[T]) -> Vec<T> {
        debug_assert_eq!(v.len(), self.rows);
        let mut acc = vec![CompensatedSum::new(); self.cols];
        for (r, vr) in v.iter().enumerate() {
            for (a, x) in acc.iter_mut().zip(self.row(r)) {
                a.add(*x * *vr);
            }
        }
        acc.iter().map(CompensatedSum::value).collect()
    }

    /// `X^T X` as a full symmetric row-major matrix.
    pub fn gram(&self) -> Vec<T> {
        let m = self.cols;
        let mut acc = vec![CompensatedSum::new(); m * m];
        for r in 0..self.rows {
            let row = self.row(r);
            for i in 0..m {
                let xi = row[i];
                if xi == T::zero() {
                    continue;
                }
                for j in i..m {
                    acc[i * m + j].add(xi * row[j]);
                }
            }
        }
        let mut g = vec![T::zero(); m * m];
        for i in 0..m {
            for j in i..m {
                let v = acc[i * m + j].value();
                g[i * m + j] = v;
                g[j * m + i] = v;
            }
        }
        g
    }
}

/// Initial strikes: calls then puts, each equidistant on `[0.5 S0, 1.5 S0]`.
/// A single node of either kind sits at `S0`.
pub fn init_strikes<T: Scalar>(n_calls: usize, n_puts: usize, spot: T) -> Result<Vec<T>> {
    if n_calls + n_puts == 0 {
        return invalid("compressed portfolio needs at least one node");
    }
    let lo = T::lit(0.5) * spot;
    let hi = T::lit(1.5) * spot;
    let mut k = equidistant(n_calls, lo, hi);
    k.extend(equidistant(n_puts, lo, hi));
    Ok(k)
}

/// Call/put indicators matching [`init_strikes`] ordering.
pub fn node_kinds(n_calls: usize, n_puts: usize) -> Vec<OptionKind> {
    std::iter::repeat_n(OptionKind::Call, n_calls)
        .chain(std::iter::repeat_n(OptionKind::Put, n_puts))
        .collect()
}

fn check_nodes<T>(strikes: &[T], kinds: &[OptionKind]) -> Result<()> {
    if strikes.len() != kinds.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} strikes for {} node kinds",
            strikes.len(),
            kinds.len()
        )));
    }
    Ok(())
}

/// Hidden-layer outputs `X[j][i] = max(i_cp[i] (spot_j - k_i), 0)`.
pub fn payoff_matrix<T: Scalar>(spots: &[T], strikes: &[T], kinds: &[OptionKind]) -> Result<PayoffMatrix<T>> {
    check_nodes(strikes, kinds)?;
    let m = strikes.len();
    let mut data = Vec::with_capacity(spots.len() * m);
    for &s in spots {
        for (&k, &kind) in strikes.iter().zip(kinds) {
            data.push(intrinsic(s, k, kind));
        }
    }
    PayoffMatrix::from_rows(spots.len(), m, data)
}

fn residuals<T: Scalar>(y: &[T], x: &PayoffMatrix<T>, w: &[T]) -> Result<Vec<T>> {
    if y.len() != x.rows() || w.len() != x.cols() {
        return Err(Error::DimensionMismatch(format!(
            "targets {}, matrix {}x{}, weights {}",
            y.len(),
            x.rows(),
            x.cols(),
            w.len()
        )));
    }
    Ok(y.iter().zip(x.mul_vec(w)).map(|(a, b)| *a - b).collect())
}

/// `1/2 * ||Y - X W||^2`.
pub fn loss<T: Scalar>(y: &[T], x: &PayoffMatrix<T>, w: &[T]) -> Result<T> {
    let r = residuals(y, x, w)?;
    let mut acc = CompensatedSum::new();
    for v in r {
        acc.add(v * v);
    }
    Ok(T::lit(0.5) * acc.value())
}

/// Gradient of [`loss`] with respect to the strikes, holding `W` fixed.
///
/// `dL/dk_i = sum_j r_j * w_i * i_cp[i] * 1{i_cp[i] (s_j - k_i) > 0}` where
/// `r = Y - X W`. The kink itself gets a zero subgradient.
///
/// Entries no larger than the rounding error accumulated in the residuals
/// are returned as exactly zero. Adam normalises the gradient scale away, so
/// without this an exactly fitted book would drift on rounding noise.
pub fn grad_strikes<T: Scalar>(
    y: &[T],
    spots: &[T],
    strikes: &[T],
    weights: &[T],
    kinds: &[OptionKind],
) -> Result<Vec<T>> {
    check_nodes(strikes, kinds)?;
    if y.len() != spots.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} targets for {} spots",
            y.len(),
            spots.len()
        )));
    }
    let x = payoff_matrix(spots, strikes, kinds)?;
    let r = residuals(y, &x, weights)?;
    let fitted = x.mul_vec(weights);
    let m = strikes.len();
    let mut acc = vec![CompensatedSum::new(); m];
    let mut scale = vec![CompensatedSum::new(); m];
    for (j, (&s, &rj)) in spots.iter().zip(&r).enumerate() {
        let mag = y[j].abs() + fitted[j].abs();
        for i in 0..m {
            let sign = kinds[i].sign::<T>();
            if sign * (s - strikes[i]) > T::zero() {
                acc[i].add(rj);
                scale[i].add(mag);
            }
        }
    }
    let eps = T::lit(8.0) * T::epsilon();
    Ok((0..m)
        .map(|i| {
            let sum = acc[i].value();
            if sum.abs() <= eps * scale[i].value() {
                T::zero()
            } else {
                sum * weights[i] * kinds[i].sign::<T>()
            }
        })
        .collect())
}
