//! Orthogonal hypergeometric polynomials on `[0, 1]`.
//!
//! `P_{m,n}` is the degree-`n` polynomial orthogonal under the weight `x^m`,
//! generated by the two-parameter Rodrigues formula
//!
//! ```text
//! P_{m,n}(x) = 1/n! * x^{-m} * d^n/dx^n ( x^m (x^2 - x)^n )
//! ```
//!
//! Everything here is exact. The endpoint values follow from the formula:
//! `P_{m,n}(1) = 1` and `P_{m,n}(0) = (-1)^n * C(m+n, n)`; the latter is
//! computed by [`endpoint_at_zero`] rather than taken from any closed form.

use std::fmt;

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};

use crate::rational::{int, Rational, RationalMatrix};

/// Univariate polynomial with exact rational coefficients, `coeffs[k]` multiplying `x^k`.
#[derive(Clone, PartialEq, Eq)]
pub struct RationalPolynomial {
    coeffs: Vec<Rational>,
}

impl RationalPolynomial {
    pub fn zero() -> Self {
        Self { coeffs: Vec::new() }
    }

    pub fn one() -> Self {
        Self::constant(Rational::one())
    }

    pub fn constant(c: Rational) -> Self {
        Self::from_coeffs(vec![c])
    }

    /// `x^k`
    pub fn monomial(k: usize) -> Self {
        let mut coeffs = vec![Rational::zero(); k + 1];
        coeffs[k] = Rational::one();
        Self { coeffs }
    }

    pub fn from_coeffs(mut coeffs: Vec<Rational>) -> Self {
        while coeffs.last().is_some_and(Zero::is_zero) {
            coeffs.pop();
        }
        Self { coeffs }
    }

    pub fn from_integers(coeffs: &[i64]) -> Self {
        Self::from_coeffs(coeffs.iter().map(|&c| int(c)).collect())
    }

    pub fn coeffs(&self) -> &[Rational] {
        &self.coeffs
    }

    /// Coefficient of `x^k`, zero past the degree.
    pub fn coeff(&self, k: usize) -> Rational {
        self.coeffs.get(k).cloned().unwrap_or_else(Rational::zero)
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Degree, `None` for the zero polynomial.
    pub fn degree(&self) -> Option<usize> {
        self.coeffs.len().checked_sub(1)
    }

    pub fn leading_coefficient(&self) -> Option<&Rational> {
        self.coeffs.last()
    }

    pub fn add(&self, other: &Self) -> Self {
        let n = self.coeffs.len().max(other.coeffs.len());
        Self::from_coeffs((0..n).map(|k| self.coeff(k) + other.coeff(k)).collect())
    }

    pub fn scale(&self, c: &Rational) -> Self {
        Self::from_coeffs(self.coeffs.iter().map(|a| a * c).collect())
    }

    pub fn mul(&self, other: &Self) -> Self {
        if self.is_zero() || other.is_zero() {
            return Self::zero();
        }
        let mut out = vec![Rational::zero(); self.coeffs.len() + other.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            for (j, b) in other.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Self::from_coeffs(out)
    }

    pub fn pow(&self, n: u32) -> Self {
        (0..n).fold(Self::one(), |acc, _| acc.mul(self))
    }

    /// Multiply by `x^k`.
    pub fn shift_up(&self, k: usize) -> Self {
        if self.is_zero() {
            return Self::zero();
        }
        let mut coeffs = vec![Rational::zero(); k];
        coeffs.extend(self.coeffs.iter().cloned());
        Self { coeffs }
    }

    /// Divide by `x^k`; `None` unless every monomial below `x^k` vanishes.
    pub fn shift_down(&self, k: usize) -> Option<Self> {
        if self.is_zero() {
            return Some(Self::zero());
        }
        if self.coeffs.len() < k || self.coeffs[..k].iter().any(|c| !c.is_zero()) {
            return None;
        }
        Some(Self::from_coeffs(self.coeffs[k..].to_vec()))
    }

    pub fn derivative(&self) -> Self {
        Self::from_coeffs(
            self.coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(k, c)| c * int(k as i64))
                .collect(),
        )
    }

    pub fn derivative_n(&self, n: usize) -> Self {
        (0..n).fold(self.clone(), |p, _| p.derivative())
    }

    /// Exact Horner evaluation.
    pub fn eval(&self, x: &Rational) -> Rational {
        self.coeffs
            .iter()
            .rev()
            .fold(Rational::zero(), |acc, c| acc * x + c)
    }

    /// Floating-point Horner evaluation.
    pub fn eval_f64(&self, x: f64) -> f64 {
        self.coeffs
            .iter()
            .rev()
            .fold(0.0, |acc, c| acc * x + crate::rational::to_f64(c))
    }
}

impl fmt::Debug for RationalPolynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl fmt::Display for RationalPolynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let mut first = true;
        for (k, c) in self.coeffs.iter().enumerate().rev() {
            if c.is_zero() {
                continue;
            }
            let sign = if c.is_negative() { "-" } else { "+" };
            if first {
                if c.is_negative() {
                    write!(f, "-")?;
                }
            } else {
                write!(f, " {sign} ")?;
            }
            first = false;
            let abs = c.abs();
            match k {
                0 => write!(f, "{abs}")?,
                1 => write!(f, "{abs}*x")?,
                _ => write!(f, "{abs}*x^{k}")?,
            }
        }
        Ok(())
    }
}

/// Weight exponent of the inner product `<g1, g2>_m = ∫_0^1 x^m g1 g2 dx`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WeightedInnerProductSpec {
    pub m: usize,
}

/// `P_{m,n}` via symbolic expansion of the Rodrigues formula.
pub fn rodrigues_poly(m: usize, n: usize) -> RationalPolynomial {
    if n == 0 {
        return RationalPolynomial::one();
    }
    let base = RationalPolynomial::from_integers(&[0, -1, 1]); // x^2 - x
    let differentiated = base.pow(n as u32).shift_up(m).derivative_n(n);
    let reduced = differentiated
        .shift_down(m)
        .expect("every surviving monomial has exponent >= m");
    let n_factorial: BigInt = (1..=n as u64).map(BigInt::from).product();
    reduced.scale(&Rational::new(BigInt::one(), n_factorial))
}

/// Exact `∫_0^1 x^m p(x) q(x) dx`.
pub fn inner_product(
    spec: WeightedInnerProductSpec,
    p: &RationalPolynomial,
    q: &RationalPolynomial,
) -> Rational {
    let mut acc = Rational::zero();
    for (i, a) in p.coeffs().iter().enumerate() {
        if a.is_zero() {
            continue;
        }
        for (j, b) in q.coeffs().iter().enumerate() {
            let denom = (spec.m + i + j + 1) as i64;
            acc += a * b / int(denom);
        }
    }
    acc
}

pub fn eval(p: &RationalPolynomial, x: &Rational) -> Rational {
    p.eval(x)
}

/// `P_{m,n}(0)`, read off the Rodrigues expansion. Equals `(-1)^n C(m+n, n)`.
pub fn endpoint_at_zero(m: usize, n: usize) -> Rational {
    rodrigues_poly(m, n).coeff(0)
}

/// `(K+1) x (K+1)` lower-triangular matrix whose row `l` holds the monomial
/// coefficients of `P_{m,l}`, so that `(P_{m,0}, ..., P_{m,K})^T = G X_K`.
pub fn monomial_to_basis_matrix(m: usize, k_max: usize) -> RationalMatrix {
    let mut g = RationalMatrix::zeros(k_max + 1, k_max + 1);
    for l in 0..=k_max {
        let p = rodrigues_poly(m, l);
        for (k, c) in p.coeffs().iter().enumerate() {
            g[(l, k)] = c.clone();
        }
    }
    g
}
