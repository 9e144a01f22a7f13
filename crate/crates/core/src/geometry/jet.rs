//! First-order jets: a value together with its gradient with respect to the
//! chart coordinates (or the curve parameter), propagated exactly through
//! arithmetic by forward-mode differentiation.

use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};

/// Largest supported chart dimension.
pub const MAX_DIM: usize = 4;

/// A value with its first partial derivatives.
///
/// Only the first `dim` partials are meaningful; the rest are kept at zero so
/// that jets of different seeds can be combined freely.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jet {
    pub value: f64,
    partials: [f64; MAX_DIM],
    dim: usize,
}

impl Jet {
    #[inline]
    pub fn constant(value: f64, dim: usize) -> Self {
        debug_assert!(dim <= MAX_DIM);
        Self {
            value,
            partials: [0.0; MAX_DIM],
            dim,
        }
    }

    /// The `index`-th coordinate function evaluated at `value`.
    #[inline]
    pub fn variable(value: f64, index: usize, dim: usize) -> Self {
        let mut jet = Self::constant(value, dim);
        jet.partials[index] = 1.0;
        jet
    }

    /// Builds a jet from explicit partials (e.g. from finite differences).
    pub fn from_parts(value: f64, partials: &[f64]) -> Self {
        let dim = partials.len();
        assert!(dim <= MAX_DIM, "jet dimension {dim} exceeds {MAX_DIM}");
        let mut jet = Self::constant(value, dim);
        jet.partials[..dim].copy_from_slice(partials);
        jet
    }

    /// Seeds every coordinate of `coords` as an independent variable.
    pub fn seed(coords: &[f64]) -> Vec<Jet> {
        let dim = coords.len();
        coords
            .iter()
            .enumerate()
            .map(|(i, &c)| Jet::variable(c, i, dim))
            .collect()
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn partials(&self) -> &[f64] {
        &self.partials[..self.dim]
    }

    #[inline]
    pub fn partial(&self, index: usize) -> f64 {
        self.partials[index]
    }

    #[inline]
    fn map(self, value: f64, slope: f64) -> Self {
        let mut partials = [0.0; MAX_DIM];
        for (out, p) in partials.iter_mut().zip(self.partials.iter()) {
            *out = slope * p;
        }
        Self {
            value,
            partials,
            dim: self.dim,
        }
    }

    pub fn sqrt(self) -> Self {
        let s = self.value.sqrt();
        self.map(s, 0.5 / s)
    }

    pub fn exp(self) -> Self {
        let e = self.value.exp();
        self.map(e, e)
    }

    pub fn ln(self) -> Self {
        self.map(self.value.ln(), 1.0 / self.value)
    }

    pub fn sin(self) -> Self {
        self.map(self.value.sin(), self.value.cos())
    }

    pub fn cos(self) -> Self {
        self.map(self.value.cos(), -self.value.sin())
    }

    pub fn tanh(self) -> Self {
        let t = self.value.tanh();
        self.map(t, 1.0 - t * t)
    }

    pub fn abs(self) -> Self {
        self.map(self.value.abs(), self.value.signum())
    }

    pub fn powi(self, n: i32) -> Self {
        if n == 0 {
            return Jet::constant(1.0, self.dim);
        }
        self.map(self.value.powi(n), f64::from(n) * self.value.powi(n - 1))
    }
}

impl Add for Jet {
    type Output = Jet;
    #[inline]
    fn add(mut self, rhs: Jet) -> Jet {
        self.value += rhs.value;
        for i in 0..MAX_DIM {
            self.partials[i] += rhs.partials[i];
        }
        self.dim = self.dim.max(rhs.dim);
        self
    }
}

impl Sub for Jet {
    type Output = Jet;
    #[inline]
    fn sub(mut self, rhs: Jet) -> Jet {
        self.value -= rhs.value;
        for i in 0..MAX_DIM {
            self.partials[i] -= rhs.partials[i];
        }
        self.dim = self.dim.max(rhs.dim);
        self
    }
}

impl Mul for Jet {
    type Output = Jet;
    #[inline]
    fn mul(self, rhs: Jet) -> Jet {
        let mut partials = [0.0; MAX_DIM];
        for (i, out) in partials.iter_mut().enumerate() {
            *out = self.partials[i] * rhs.value + self.value * rhs.partials[i];
        }
        Jet {
            value: self.value * rhs.value,
            partials,
            dim: self.dim.max(rhs.dim),
        }
    }
}

impl Div for Jet {
    type Output = Jet;
    #[inline]
    fn div(self, rhs: Jet) -> Jet {
        let inv = 1.0 / rhs.value;
        let value = self.value * inv;
        let mut partials = [0.0; MAX_DIM];
        for (i, out) in partials.iter_mut().enumerate() {
            *out = (self.partials[i] - value * rhs.partials[i]) * inv;
        }
        Jet {
            value,
            partials,
            dim: self.dim.max(rhs.dim),
        }
    }
}

impl Neg for Jet {
    type Output = Jet;
    #[inline]
    fn neg(self) -> Jet {
        self.map(-self.value, -1.0)
    }
}

impl Add<f64> for Jet {
    type Output = Jet;
    #[inline]
    fn add(mut self, rhs: f64) -> Jet {
        self.value += rhs;
        self
    }
}

impl Sub<f64> for Jet {
    type Output = Jet;
    #[inline]
    fn sub(mut self, rhs: f64) -> Jet {
        self.value -= rhs;
        self
    }
}

impl Mul<f64> for Jet {
    type Output = Jet;
    #[inline]
    fn mul(self, rhs: f64) -> Jet {
        self.map(self.value * rhs, rhs)
    }
}

impl Mul<Jet> for f64 {
    type Output = Jet;
    #[inline]
    fn mul(self, rhs: Jet) -> Jet {
        rhs * self
    }
}

impl AddAssign for Jet {
    #[inline]
    fn add_assign(&mut self, rhs: Jet) {
        *self = *self + rhs;
    }
}

impl SubAssign for Jet {
    #[inline]
    fn sub_assign(&mut self, rhs: Jet) {
        *self = *self - rhs;
    }
}

impl MulAssign for Jet {
    #[inline]
    fn mul_assign(&mut self, rhs: Jet) {
        *self = *self * rhs;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coordinate_function_has_unit_partial() {
        let xs = Jet::seed(&[2.0, -1.0, 0.5]);
        for (i, x) in xs.iter().enumerate() {
            let mut e = [0.0; 3];
            e[i] = 1.0;
            assert_eq!(x.partials(), &e);
        }
    }

    #[test]
    fn product_rule_is_exact() {
        let xs = Jet::seed(&[1.5, 0.25]);
        let f = xs[0] * xs[0] + xs[1];
        let g = xs[0] * xs[1];
        let fg = f * g;
        // f' g + f g'
        for i in 0..2 {
            let expected = f.partial(i) * g.value + f.value * g.partial(i);
            assert_eq!(fg.partial(i), expected);
        }
    }

    #[test]
    fn chain_rule_matches_finite_differences() {
        let h = 1e-5;
        let at = |x: f64, y: f64| {
            let xs = Jet::seed(&[x, y]);
            ((xs[0] * xs[1]).sin() + (xs[0] * xs[0] + 1.0).sqrt() * xs[1].exp()).tanh()
                / (xs[1] * xs[1] + 2.0)
        };
        let (x, y) = (0.3, -0.7);
        let jet = at(x, y);
        let fd_x = (at(x + h, y).value - at(x - h, y).value) / (2.0 * h);
        let fd_y = (at(x, y + h).value - at(x, y - h).value) / (2.0 * h);
        assert!((jet.partial(0) - fd_x).abs() < 1e-8);
        assert!((jet.partial(1) - fd_y).abs() < 1e-8);
    }

    #[test]
    fn quotient_and_powers() {
        let x = Jet::variable(3.0, 0, 1);
        let q = Jet::constant(1.0, 1) / x;
        assert!((q.partial(0) + 1.0 / 9.0).abs() < 1e-15);
        let c = x.powi(3);
        assert_eq!(c.value, 27.0);
        assert_eq!(c.partial(0), 27.0);
        assert_eq!(x.powi(0).partial(0), 0.0);
    }
}
