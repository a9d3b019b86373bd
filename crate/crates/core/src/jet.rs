//! Truncated derivative arithmetic through order five.
//!
//! A [`Jet`] holds `f(x), f'(x), ..., f^(5)(x)`. Composition uses Faà di
//! Bruno's formula written with partial Bell polynomials, so derivatives of
//! `exp(h(x))` and `ln(S(x))` follow from derivatives of the primitives.

use std::ops::{Index, IndexMut};

pub const MAX_ORDER: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Jet(pub [f64; MAX_ORDER + 1]);

impl Jet {
    pub fn constant(v: f64) -> Self {
        let mut j = Jet::default();
        j.0[0] = v;
        j
    }

    pub fn value(&self) -> f64 {
        self.0[0]
    }

    /// Derivative of order `r`, `r = 0` being the value.
    pub fn deriv(&self, r: usize) -> f64 {
        self.0[r]
    }

    /// `outer ∘ inner` where `outer[k]` holds `f^(k)` evaluated at `inner.value()`.
    pub fn compose(outer: &Jet, inner: &Jet, order: usize) -> Jet {
        let bell = partial_bell(inner, order);
        let mut out = Jet::default();
        out.0[0] = outer.0[0];
        for n in 1..=order {
            out.0[n] = (1..=n).map(|k| outer.0[k] * bell[n][k]).sum();
        }
        out
    }

    /// `exp(self - shift)` scaled so large exponents do not overflow.
    pub fn exp_shifted(&self, shift: f64, order: usize) -> Jet {
        let e = (self.0[0] - shift).exp();
        let y = complete_bell(self, order);
        let mut out = Jet::default();
        for n in 0..=order {
            out.0[n] = e * y[n];
        }
        out
    }

    pub fn exp(&self, order: usize) -> Jet {
        self.exp_shifted(0.0, order)
    }

    /// `ln(self)`; requires a positive value.
    pub fn ln(&self, order: usize) -> Jet {
        let z = self.0[0];
        // derivatives of ln at z: (-1)^(k-1) (k-1)! z^-k
        let mut outer = Jet::default();
        outer.0[0] = z.ln();
        let mut fact = 1.0;
        let mut zpow = 1.0 / z;
        for k in 1..=order {
            let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
            outer.0[k] = sign * fact * zpow;
            fact *= k as f64;
            zpow /= z;
        }
        Jet::compose(&outer, self, order)
    }

    pub fn scale(&self, c: f64) -> Jet {
        let mut out = *self;
        out.0.iter_mut().for_each(|v| *v *= c);
        out
    }

    pub fn add_assign_scaled(&mut self, other: &Jet, c: f64) {
        for (a, b) in self.0.iter_mut().zip(other.0.iter()) {
            *a += c * b;
        }
    }
}

impl Index<usize> for Jet {
    type Output = f64;
    fn index(&self, r: usize) -> &f64 {
        &self.0[r]
    }
}

impl IndexMut<usize> for Jet {
    fn index_mut(&mut self, r: usize) -> &mut f64 {
        &mut self.0[r]
    }
}

const BINOM: [[f64; 6]; 6] = [
    [1.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [1.0, 1.0, 0.0, 0.0, 0.0, 0.0],
    [1.0, 2.0, 1.0, 0.0, 0.0, 0.0],
    [1.0, 3.0, 3.0, 1.0, 0.0, 0.0],
    [1.0, 4.0, 6.0, 4.0, 1.0, 0.0],
    [1.0, 5.0, 10.0, 10.0, 5.0, 1.0],
];

/// `B[n][k] = B_{n,k}(x_1, ..., x_{n-k+1})` with `x_i = inner.deriv(i)`.
fn partial_bell(inner: &Jet, order: usize) -> [[f64; 6]; 6] {
    let x = &inner.0;
    let mut b = [[0.0; 6]; 6];
    b[0][0] = 1.0;
    for n in 1..=order {
        for k in 1..=n {
            b[n][k] = (1..=n - k + 1)
                .map(|i| BINOM[n - 1][i - 1] * x[i] * b[n - i][k - 1])
                .sum();
        }
    }
    b
}

/// Complete Bell polynomials `Y_n(x_1, ..., x_n)`, so that
/// `d^n/dx^n exp(h) = exp(h) Y_n(h', ..., h^(n))`.
fn complete_bell(inner: &Jet, order: usize) -> [f64; 6] {
    let x = &inner.0;
    let mut y = [0.0; 6];
    y[0] = 1.0;
    for n in 0..order {
        y[n + 1] = (0..=n).map(|i| BINOM[n][i] * y[n - i] * x[i + 1]).sum();
    }
    y
}

#[cfg(test)]
mod tests {
    use super::*;

    fn jet_of(f: impl Fn(f64) -> [f64; 6], x: f64) -> Jet {
        Jet(f(x))
    }

    #[test]
    fn exp_of_polynomial() {
        // h(x) = x^2, exp(h) derivatives at x = 0.7 by direct expansion
        let x: f64 = 0.7;
        let h = jet_of(|x| [x * x, 2.0 * x, 2.0, 0.0, 0.0, 0.0], x);
        let g = h.exp(5);
        let e = (x * x).exp();
        let expected = [
            e,
            2.0 * x * e,
            (2.0 + 4.0 * x * x) * e,
            (12.0 * x + 8.0 * x.powi(3)) * e,
            (12.0 + 48.0 * x * x + 16.0 * x.powi(4)) * e,
            (120.0 * x + 160.0 * x.powi(3) + 32.0 * x.powi(5)) * e,
        ];
        for r in 0..6 {
            assert!((g[r] - expected[r]).abs() < 1e-12 * expected[r].abs().max(1.0), "order {r}");
        }
    }

    #[test]
    fn ln_of_exp_is_identity() {
        let h = Jet([0.3, -1.2, 0.5, 2.0, -0.7, 1.5]);
        let back = h.exp(5).ln(5);
        for r in 0..6 {
            assert!((back[r] - h[r]).abs() < 1e-12, "order {r}: {} vs {}", back[r], h[r]);
        }
    }

    #[test]
    fn ln_of_linear() {
        // ln(a + b x): derivatives (-1)^(r-1) (r-1)! b^r / z^r
        let (a, b, x) = (2.0, 3.0, 0.5);
        let z = a + b * x;
        let s = Jet([z, b, 0.0, 0.0, 0.0, 0.0]);
        let l = s.ln(5);
        let mut fact = 1.0;
        for r in 1..=5 {
            let sign = if r % 2 == 1 { 1.0 } else { -1.0 };
            let expected = sign * fact * (b / z).powi(r as i32);
            assert!((l[r] - expected).abs() < 1e-12);
            fact *= r as f64;
        }
    }

    #[test]
    fn shifted_exp_scales() {
        let h = Jet([700.0, 1.0, 0.0, 0.0, 0.0, 0.0]);
        let g = h.exp_shifted(699.0, 5);
        for r in 0..6 {
            assert!((g[r] - 1f64.exp()).abs() < 1e-12);
        }
    }
}
