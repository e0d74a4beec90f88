//! Adaptive composite Gauss–Legendre quadrature for smooth vector integrands.

use std::sync::OnceLock;

use crate::error::{Error, Result};

pub const NODES_PER_PANEL: usize = 16;

#[derive(Debug, Clone, Copy)]
pub struct QuadratureOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_depth: usize,
}

impl Default for QuadratureOptions {
    fn default() -> Self {
        Self {
            abs_tol: 1e-10,
            rel_tol: 1e-10,
            max_depth: 30,
        }
    }
}

/// Nodes and weights of the `n`-point rule on `[-1, 1]`, by Newton iteration
/// on the Legendre three-term recurrence.
pub fn gauss_legendre_rule(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..(n + 1) / 2 {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            // p1 = P_n(x), p0 = P_{n-1}(x)
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn panel_rule() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| gauss_legendre_rule(NODES_PER_PANEL))
}

/// Single 16-point panel over `[a, b]`.
pub fn gauss_panel<F>(f: &F, a: f64, b: f64, dim: usize) -> Vec<f64>
where
    F: Fn(f64) -> Vec<f64> + ?Sized,
{
    let (nodes, weights) = panel_rule();
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let mut acc = vec![0.0; dim];
    for (x, w) in nodes.iter().zip(weights) {
        let v = f(mid + half * x);
        for (a, vi) in acc.iter_mut().zip(v) {
            *a += w * vi;
        }
    }
    acc.iter_mut().for_each(|a| *a *= half);
    acc
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Integrate a `dim`-vector valued function over `[a, b]` by interval halving.
///
/// A panel is accepted when its value agrees with the sum over its two halves
/// to within `max(abs_tol, rel_tol * |whole-interval estimate|)`, with the
/// tolerance split across depth.
pub fn integrate<F>(f: &F, a: f64, b: f64, dim: usize, opts: QuadratureOptions) -> Result<Vec<f64>>
where
    F: Fn(f64) -> Vec<f64> + ?Sized,
{
    if a == b {
        return Ok(vec![0.0; dim]);
    }
    let coarse = gauss_panel(f, a, b, dim);
    let scale = max_abs(&coarse);
    let tol = opts.abs_tol.max(opts.rel_tol * scale);
    let mut out = vec![0.0; dim];
    let mut stack = vec![(a, b, coarse, 0usize)];
    while let Some((lo, hi, whole, depth)) = stack.pop() {
        let mid = 0.5 * (lo + hi);
        let left = gauss_panel(f, lo, mid, dim);
        let right = gauss_panel(f, mid, hi, dim);
        let refined: Vec<f64> = left.iter().zip(&right).map(|(l, r)| l + r).collect();
        let err = refined
            .iter()
            .zip(&whole)
            .fold(0.0f64, |m, (r, w)| m.max((r - w).abs()));
        let local_tol = tol * (hi - lo) / (b - a);
        if err <= local_tol.max(f64::EPSILON * max_abs(&refined)) {
            for (o, r) in out.iter_mut().zip(&refined) {
                *o += r;
            }
        } else if depth + 1 >= opts.max_depth {
            return Err(Error::NonConvergence {
                a: lo,
                b: hi,
                depth: opts.max_depth,
            });
        } else {
            stack.push((lo, mid, left, depth + 1));
            stack.push((mid, hi, right, depth + 1));
        }
    }
    Ok(out)
}

pub fn integrate_scalar<F>(f: F, a: f64, b: f64, opts: QuadratureOptions) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    Ok(integrate(&|s| vec![f(s)], a, b, 1, opts)?[0])
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn rule_integrates_polynomials_exactly() {
        let (x, w) = gauss_legendre_rule(16);
        assert_relative_eq!(w.iter().sum::<f64>(), 2.0, epsilon = 1e-14);
        // ∫ x^30 over [-1,1] = 2/31
        let v: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(30)).sum();
        assert_relative_eq!(v, 2.0 / 31.0, epsilon = 1e-14);
    }

    #[test]
    fn adaptive_handles_oscillation() {
        let v = integrate_scalar(|s| (40.0 * s).sin(), 0.0, 3.0, QuadratureOptions::default()).unwrap();
        assert_relative_eq!(v, (1.0 - (120.0f64).cos()) / 40.0, epsilon = 1e-11);
    }

    #[test]
    fn pathological_integrand_reports_nonconvergence() {
        let opts = QuadratureOptions {
            max_depth: 6,
            ..Default::default()
        };
        let r = integrate_scalar(|s| if s < 0.3333 { 0.0 } else { 1.0 }, 0.0, 1.0, opts);
        assert!(matches!(r, Err(Error::NonConvergence { .. })));
    }
}
