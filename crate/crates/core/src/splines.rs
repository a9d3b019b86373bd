//! Cubic B-spline basis for the diurnal pattern.
//!
//! The knot vector is clamped: the end knots `t_open` and `t_close` have
//! multiplicity four and the `M - 2` interior knots are simple and equally
//! spaced, which gives `L = M + 2` basis functions. Clamping makes
//! `m(t_open) = delta_1` and `m(t_close) = delta_L`.

use crate::error::{Error, Result};

const DEGREE: usize = 3;

/// The (at most) four nonzero basis weights at a point.
///
/// `weights[k]` is the value of basis function `first + k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BasisRow {
    pub first: usize,
    pub weights: [f64; 4],
}

impl BasisRow {
    /// Inner product with a coefficient vector of length `L`.
    pub fn dot(&self, coeffs: &[f64]) -> f64 {
        self.weights
            .iter()
            .zip(&coeffs[self.first..self.first + 4])
            .map(|(w, c)| w * c)
            .sum()
    }

    pub fn to_dense(&self, dim: usize) -> Vec<f64> {
        let mut out = vec![0.0; dim];
        out[self.first..self.first + 4].copy_from_slice(&self.weights);
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplineBasis {
    t_open: f64,
    t_close: f64,
    distinct_knots: usize,
    knots: Vec<f64>,
}

impl SplineBasis {
    /// Builds the clamped cubic basis on `distinct_knots` equally spaced knots.
    pub fn new(t_open: f64, t_close: f64, distinct_knots: usize) -> Result<Self> {
        if !(t_open < t_close) || !t_open.is_finite() || !t_close.is_finite() {
            return Err(Error::InvalidRange { t_open, t_close });
        }
        if distinct_knots < 2 {
            return Err(Error::InvalidKnotCount(distinct_knots));
        }
        let step = (t_close - t_open) / (distinct_knots - 1) as f64;
        let mut knots = Vec::with_capacity(distinct_knots + 2 * DEGREE);
        knots.extend(std::iter::repeat_n(t_open, DEGREE));
        for k in 0..distinct_knots {
            let t = if k + 1 == distinct_knots {
                t_close
            } else {
                t_open + step * k as f64
            };
            knots.push(t);
        }
        knots.extend(std::iter::repeat_n(t_close, DEGREE));
        Ok(Self {
            t_open,
            t_close,
            distinct_knots,
            knots,
        })
    }

    pub fn t_open(&self) -> f64 {
        self.t_open
    }

    pub fn t_close(&self) -> f64 {
        self.t_close
    }

    /// Number of distinct knots `M`.
    pub fn distinct_knots(&self) -> usize {
        self.distinct_knots
    }

    /// Basis dimension `L = M + 2`.
    pub fn dim(&self) -> usize {
        self.distinct_knots + 2
    }

    /// Full knot vector, end knots repeated.
    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn contains(&self, t: f64) -> bool {
        t >= self.t_open && t <= self.t_close
    }

    fn check_domain(&self, t: f64) -> Result<()> {
        if self.contains(t) {
            Ok(())
        } else {
            Err(Error::OutOfDomain {
                t,
                lo: self.t_open,
                hi: self.t_close,
            })
        }
    }

    /// Index `i` of the knot span with `knots[i] <= t < knots[i + 1]`;
    /// `t_close` belongs to the last nonempty span.
    fn span(&self, t: f64) -> usize {
        let last = self.dim() - 1;
        if t >= self.t_close {
            return last;
        }
        let h = (self.t_close - self.t_open) / (self.distinct_knots - 1) as f64;
        let guess = ((t - self.t_open) / h).floor() as isize;
        let mut i = (guess.clamp(0, self.distinct_knots as isize - 2) as usize) + DEGREE;
        // correct for rounding in the guess
        while i > DEGREE && t < self.knots[i] {
            i -= 1;
        }
        while i < last && t >= self.knots[i + 1] {
            i += 1;
        }
        i
    }

    /// Nonzero basis weights at `t` by the Cox-de Boor triangular recursion.
    pub fn eval_row(&self, t: f64) -> Result<BasisRow> {
        self.check_domain(t)?;
        let i = self.span(t);
        let k = &self.knots;
        let mut n = [0.0; 4];
        let mut left = [0.0; 4];
        let mut right = [0.0; 4];
        n[0] = 1.0;
        for j in 1..=DEGREE {
            left[j] = t - k[i + 1 - j];
            right[j] = k[i + j] - t;
            let mut saved = 0.0;
            for r in 0..j {
                let temp = n[r] / (right[r + 1] + left[j - r]);
                n[r] = saved + right[r + 1] * temp;
                saved = left[j - r] * temp;
            }
            n[j] = saved;
        }
        Ok(BasisRow {
            first: i - DEGREE,
            weights: n,
        })
    }

    /// Dense weight vector of length `L`.
    pub fn eval(&self, t: f64) -> Result<Vec<f64>> {
        Ok(self.eval_row(t)?.to_dense(self.dim()))
    }

    /// Diurnal level `m(t) = sum_l delta_l B_l(t)`.
    pub fn diurnal(&self, delta: &[f64], t: f64) -> Result<f64> {
        if delta.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: delta.len(),
            });
        }
        Ok(self.eval_row(t)?.dot(delta))
    }
}
