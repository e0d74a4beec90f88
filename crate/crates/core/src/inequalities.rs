//! Numerical evaluation of the weighted quadratic functionals
//! `J_{W,m,a,b}(f) = ∫_a^b ((s-a)/(b-a))^m f(s)^T W f(s) ds`
//! and of their projection lower bounds.
//!
//! The bounds are quadratic forms in the shifted-Legendre moments
//! `φ_l = ∫_a^b p_{0,l}(s) f(s) ds`, so they can be compared directly against
//! quadrature values of the functional.

use std::io::{self, Write};

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::projection::{xi_matrix, z_matrix};
use crate::quadrature::{gauss_panel, integrate, QuadratureOptions};

type Eval = Box<dyn Fn(f64) -> Vec<f64> + Send + Sync>;

/// A continuous map `[a, b] -> R^n`, optionally with its derivative and with
/// polynomial coefficients that allow closed-form functional values.
pub struct VectorFunction {
    dim: usize,
    value: Eval,
    derivative: Option<Eval>,
    /// `coeffs[k]` multiplies `s^k`.
    polynomial: Option<Vec<DVector<f64>>>,
}

impl std::fmt::Debug for VectorFunction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("VectorFunction")
            .field("dim", &self.dim)
            .field("has_derivative", &self.derivative.is_some())
            .field("polynomial", &self.polynomial)
            .finish()
    }
}

impl VectorFunction {
    pub fn new(dim: usize, value: impl Fn(f64) -> Vec<f64> + Send + Sync + 'static) -> Self {
        Self {
            dim,
            value: Box::new(value),
            derivative: None,
            polynomial: None,
        }
    }

    pub fn with_derivative(mut self, derivative: impl Fn(f64) -> Vec<f64> + Send + Sync + 'static) -> Self {
        self.derivative = Some(Box::new(derivative));
        self
    }

    /// `f(s) = Σ_k coeffs[k] s^k`.
    pub fn polynomial(coeffs: Vec<DVector<f64>>) -> Self {
        let dim = coeffs.first().map_or(0, DVector::len);
        assert!(coeffs.iter().all(|c| c.len() == dim), "coefficient dimensions differ");
        let value_coeffs = coeffs.clone();
        let deriv_coeffs: Vec<DVector<f64>> = coeffs
            .iter()
            .enumerate()
            .skip(1)
            .map(|(k, c)| c * k as f64)
            .collect();
        let deriv_for_eval = deriv_coeffs.clone();
        Self {
            dim,
            value: Box::new(move |s| horner(&value_coeffs, s, dim)),
            derivative: Some(Box::new(move |s| horner(&deriv_for_eval, s, dim))),
            polynomial: Some(coeffs),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn eval(&self, s: f64) -> DVector<f64> {
        DVector::from_vec((self.value)(s))
    }

    pub fn eval_derivative(&self, s: f64) -> Option<DVector<f64>> {
        self.derivative.as_ref().map(|d| DVector::from_vec(d(s)))
    }

    pub fn polynomial_coeffs(&self) -> Option<&[DVector<f64>]> {
        self.polynomial.as_deref()
    }

    /// `f'` as a polynomial function; `None` unless `f` is polynomial.
    pub fn polynomial_derivative(&self) -> Option<VectorFunction> {
        let coeffs = self.polynomial.as_ref()?;
        let d: Vec<DVector<f64>> = coeffs
            .iter()
            .enumerate()
            .skip(1)
            .map(|(k, c)| c * k as f64)
            .collect();
        Some(if d.is_empty() {
            VectorFunction::polynomial(vec![DVector::zeros(self.dim)])
        } else {
            VectorFunction::polynomial(d)
        })
    }
}

fn horner(coeffs: &[DVector<f64>], s: f64, dim: usize) -> Vec<f64> {
    let mut acc = DVector::zeros(dim);
    for c in coeffs.iter().rev() {
        acc = acc * s + c;
    }
    acc.data.into()
}

/// Weight matrix, weight exponent and interval of a functional.
#[derive(Debug, Clone, PartialEq)]
pub struct FunctionalSpec {
    pub w: DMatrix<f64>,
    pub m: usize,
    pub a: f64,
    pub b: f64,
}

impl FunctionalSpec {
    pub fn new(w: DMatrix<f64>, m: usize, a: f64, b: f64) -> Result<Self> {
        if !(b - a > 0.0) || !a.is_finite() || !b.is_finite() {
            return Err(Error::InvalidInput(format!("interval [{a}, {b}] must have b > a")));
        }
        if !w.is_square() {
            return Err(Error::DimensionMismatch(format!("W is {}x{}", w.nrows(), w.ncols())));
        }
        let asym = (&w - w.transpose()).abs().max();
        let norm = w.norm();
        if asym > 1e-12 * norm.max(1.0) {
            return Err(Error::NonSymmetric("W".into()));
        }
        let min_eig = SymmetricEigen::new(w.clone()).eigenvalues.min();
        if min_eig <= 1e-12 * norm {
            return Err(Error::InvalidInput(format!(
                "W must be positive definite (min eigenvalue {min_eig:e})"
            )));
        }
        Ok(Self { w, m, a, b })
    }

    pub fn scalar(m: usize, a: f64, b: f64) -> Self {
        Self::new(DMatrix::identity(1, 1), m, a, b).expect("identity weight is valid")
    }

    pub fn length(&self) -> f64 {
        self.b - self.a
    }

    pub fn dim(&self) -> usize {
        self.w.nrows()
    }

    fn check_dim(&self, n: usize) -> Result<()> {
        if n != self.dim() {
            return Err(Error::DimensionMismatch(format!(
                "function has dimension {n}, W is {0}x{0}",
                self.dim()
            )));
        }
        Ok(())
    }
}

/// Legendre moments `φ_l`, `l = 0..M-1`.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentVector {
    pub phi: Vec<DVector<f64>>,
}

impl MomentVector {
    pub fn len(&self) -> usize {
        self.phi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phi.is_empty()
    }
}

/// Values `P_{0,0}(x), ..., P_{0,count-1}(x)` of the shifted Legendre polynomials.
pub fn shifted_legendre_values(x: f64, count: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(count);
    let t = 2.0 * x - 1.0;
    let (mut p0, mut p1) = (1.0, t);
    for l in 0..count {
        match l {
            0 => out.push(1.0),
            1 => out.push(t),
            _ => {
                let k = (l - 1) as f64;
                let p2 = ((2.0 * k + 1.0) * t * p1 - k * p0) / (k + 1.0);
                p0 = p1;
                p1 = p2;
                out.push(p2);
            }
        }
    }
    out
}

fn quad_form(w: &DMatrix<f64>, v: &DVector<f64>) -> f64 {
    v.dot(&(w * v))
}

/// `J_{W,m,a,b}(f)`. Closed form for polynomial `f`, adaptive quadrature otherwise.
pub fn functional_value(spec: &FunctionalSpec, f: &VectorFunction) -> Result<f64> {
    spec.check_dim(f.dim())?;
    match f.polynomial_coeffs() {
        Some(coeffs) => Ok(polynomial_functional_value(spec, coeffs)),
        None => functional_value_by_quadrature(spec, f),
    }
}

/// `J_{W,m,a,b}(f')`, requiring a known derivative.
pub fn derivative_functional_value(spec: &FunctionalSpec, f: &VectorFunction) -> Result<f64> {
    spec.check_dim(f.dim())?;
    if let Some(df) = f.polynomial_derivative() {
        return functional_value(spec, &df);
    }
    let d = f
        .derivative
        .as_ref()
        .ok_or_else(|| Error::InvalidInput("function has no derivative".into()))?;
    weighted_quadrature(spec, |s| d(s))
}

/// Always by quadrature, regardless of any closed form.
pub fn functional_value_by_quadrature(spec: &FunctionalSpec, f: &VectorFunction) -> Result<f64> {
    spec.check_dim(f.dim())?;
    weighted_quadrature(spec, |s| (f.value)(s))
}

fn weighted_quadrature(spec: &FunctionalSpec, f: impl Fn(f64) -> Vec<f64>) -> Result<f64> {
    let h = spec.length();
    let integrand = |s: f64| {
        let v = DVector::from_vec(f(s));
        vec![((s - spec.a) / h).powi(spec.m as i32) * quad_form(&spec.w, &v)]
    };
    Ok(integrate(&integrand, spec.a, spec.b, 1, QuadratureOptions::default())?[0])
}

fn polynomial_functional_value(spec: &FunctionalSpec, coeffs: &[DVector<f64>]) -> f64 {
    let (a, h) = (spec.a, spec.length());
    let n = coeffs.len();
    // f(a + h x) = Σ_i d_i x^i
    let mut d = vec![DVector::zeros(spec.dim()); n];
    for (k, c) in coeffs.iter().enumerate() {
        let mut binom = 1.0;
        for (i, di) in d.iter_mut().enumerate().take(k + 1) {
            *di += c * (binom * a.powi((k - i) as i32) * h.powi(i as i32));
            binom = binom * (k - i) as f64 / (i + 1) as f64;
        }
    }
    let mut acc = 0.0;
    for (i, di) in d.iter().enumerate() {
        let wdi = &spec.w * di;
        for (j, dj) in d.iter().enumerate() {
            acc += dj.dot(&wdi) / (spec.m + i + j + 1) as f64;
        }
    }
    h * acc
}

/// The m-fold iterated integral
/// `m!/(b-a)^m ∫_a^b ∫_{v_1}^b ... ∫_{v_m}^b f^T W f ds dv_m ... dv_1`,
/// evaluated level by level with two 16-point panels. Limited to `m <= 3`.
pub fn nested_integral_value(spec: &FunctionalSpec, f: &VectorFunction) -> Result<f64> {
    spec.check_dim(f.dim())?;
    if spec.m > 3 {
        return Err(Error::ParameterViolation(format!(
            "nested evaluation supports m <= 3, got {}",
            spec.m
        )));
    }
    fn level(spec: &FunctionalSpec, f: &VectorFunction, depth: usize, lo: f64) -> f64 {
        let b = spec.b;
        let mid = 0.5 * (lo + b);
        let inner = |s: f64| {
            if depth == spec.m {
                vec![quad_form(&spec.w, &f.eval(s))]
            } else {
                vec![level(spec, f, depth + 1, s)]
            }
        };
        gauss_panel(&inner, lo, mid, 1)[0] + gauss_panel(&inner, mid, b, 1)[0]
    }
    let factorial: f64 = (1..=spec.m).map(|k| k as f64).product();
    Ok(factorial / spec.length().powi(spec.m as i32) * level(spec, f, 0, spec.a))
}

/// `φ_l = ∫_a^b P_{0,l}((s-a)/(b-a)) f(s) ds` for `l < M`.
pub fn moments(f: &VectorFunction, a: f64, b: f64, big_m: usize) -> Result<MomentVector> {
    if big_m == 0 {
        return Err(Error::ParameterViolation("moments need M >= 1".into()));
    }
    let n = f.dim();
    let h = b - a;
    let integrand = |s: f64| {
        let p = shifted_legendre_values((s - a) / h, big_m);
        let v = (f.value)(s);
        let mut out = Vec::with_capacity(n * big_m);
        for pl in p {
            out.extend(v.iter().map(|x| pl * x));
        }
        out
    };
    let flat = integrate(&integrand, a, b, n * big_m, QuadratureOptions::default())?;
    Ok(MomentVector {
        phi: flat.chunks(n).map(DVector::from_column_slice).collect(),
    })
}

fn check_moments(spec: &FunctionalSpec, phi: &MomentVector, big_m: usize) -> Result<()> {
    if phi.len() != big_m {
        return Err(Error::DimensionMismatch(format!(
            "expected {big_m} moments, got {}",
            phi.len()
        )));
    }
    for p in &phi.phi {
        spec.check_dim(p.len())?;
    }
    Ok(())
}

/// `w_{m,j} = Σ_l ξ^m_{j,l} φ_l`, `j = 0..=nu`.
pub fn projected_moments(spec: &FunctionalSpec, phi: &MomentVector, nu: usize, big_m: usize) -> Result<Vec<DVector<f64>>> {
    check_moments(spec, phi, big_m)?;
    let xi = xi_matrix(spec.m, nu, big_m)?.entries.to_f64();
    Ok((0..=nu)
        .map(|j| {
            (0..big_m).fold(DVector::zeros(spec.dim()), |acc, l| acc + &phi.phi[l] * xi[(j, l)])
        })
        .collect())
}

/// Lower bound on `J_{W,m,a,b}(f)` from the first `nu + 1` weighted projections:
/// `(1/(b-a)) Σ_j (m+2j+1) w_j^T W w_j`.
pub fn lower_bound_values(spec: &FunctionalSpec, phi: &MomentVector, nu: usize, big_m: usize) -> Result<f64> {
    let w = projected_moments(spec, phi, nu, big_m)?;
    Ok(w.iter()
        .enumerate()
        .map(|(j, wj)| (spec.m + 2 * j + 1) as f64 * quad_form(&spec.w, wj))
        .sum::<f64>()
        / spec.length())
}

/// Lower bound on `J_{W,m,a,b}(f')` built from `f(b)`, `f(a)` and the moments of `f`.
pub fn lower_bound_derivative(
    spec: &FunctionalSpec,
    f_a: &DVector<f64>,
    f_b: &DVector<f64>,
    phi: &MomentVector,
    nu: usize,
    big_m: usize,
) -> Result<f64> {
    check_moments(spec, phi, big_m)?;
    spec.check_dim(f_a.len())?;
    spec.check_dim(f_b.len())?;
    let z = z_matrix(spec.m, nu, big_m)?.entries.to_f64();
    let h = spec.length();
    let mut augmented: Vec<DVector<f64>> = vec![f_b.clone(), f_a.clone()];
    augmented.extend(phi.phi.iter().map(|p| p / h));
    let mut total = 0.0;
    for j in 0..=nu {
        let theta = augmented
            .iter()
            .enumerate()
            .fold(DVector::zeros(spec.dim()), |acc, (c, v)| acc + v * z[(j, c)]);
        total += (spec.m + 2 * j + 1) as f64 * quad_form(&spec.w, &theta);
    }
    Ok(total / h)
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// Statistics `(g_l, Υ_l)` of the earlier Wirtinger-type multiple-integral
/// bound, recovered from the first two weighted projections with `l = spec.m`:
/// `w_{l,0} = l!/(b-a)^l g_l` and `w_{l,1} = -(l+1)!/(b-a)^l Υ_l`.
pub fn lee_park_statistics(
    spec: &FunctionalSpec,
    w0: &DVector<f64>,
    w1: &DVector<f64>,
) -> (DVector<f64>, DVector<f64>) {
    let l = spec.m;
    let hl = spec.length().powi(l as i32);
    (w0 * (hl / factorial(l)), w1 * (-hl / factorial(l + 1)))
}

/// The earlier Wirtinger-type bound, rescaled to the `J` functional:
/// `l!/(b-a)^l * [ (l+1)!/(b-a)^{l+1} g^T W g + l!(l+3)/(b-a)^{l+1} Υ^T W Υ ]`.
/// The projection bound with `nu = 1` has `(l+1)^2` in place of the unit factor on the second term.
pub fn lee_park_bound(spec: &FunctionalSpec, g: &DVector<f64>, upsilon: &DVector<f64>) -> f64 {
    let l = spec.m;
    let h = spec.length();
    let hl1 = h.powi(l as i32 + 1);
    let on_g = factorial(l + 1) / hl1 * quad_form(&spec.w, g);
    let on_upsilon = factorial(l) * (l + 3) as f64 / hl1 * quad_form(&spec.w, upsilon);
    factorial(l) / h.powi(l as i32) * (on_g + on_upsilon)
}

/// One row of a bound-versus-value sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GapRow {
    pub nu: usize,
    pub bound: f64,
    pub value: f64,
}

impl GapRow {
    pub fn gap(&self) -> f64 {
        self.value - self.bound
    }
}

pub fn write_gap_csv<W: Write>(rows: &[GapRow], mut out: W) -> io::Result<()> {
    writeln!(out, "nu,bound,value,gap")?;
    for r in rows {
        writeln!(out, "{},{:.17e},{:.17e},{:.17e}", r.nu, r.bound, r.value, r.gap())?;
    }
    Ok(())
}

/// Projection bound for every `nu` admissible at `(m, M)` against the functional value.
pub fn gap_sweep(spec: &FunctionalSpec, f: &VectorFunction, big_m: usize) -> Result<Vec<GapRow>> {
    if big_m <= spec.m {
        return Err(Error::ParameterViolation(format!(
            "need M > m, got M={big_m}, m={}",
            spec.m
        )));
    }
    let value = functional_value(spec, f)?;
    let phi = moments(f, spec.a, spec.b, big_m)?;
    (0..big_m - spec.m)
        .map(|nu| {
            Ok(GapRow {
                nu,
                bound: lower_bound_values(spec, &phi, nu, big_m)?,
                value,
            })
        })
        .collect()
}
