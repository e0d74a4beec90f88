//! Seeded property suites for the polynomial, projection and inequality layers.
//!
//! Every suite returns its case count and the inputs of any failing case, so
//! a failure can be replayed from the seed alone.

use std::f64::consts::PI;
use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::Result;
use crate::inequalities::{
    derivative_functional_value, functional_value, functional_value_by_quadrature, lee_park_bound,
    lee_park_statistics, lower_bound_derivative, lower_bound_values, moments, nested_integral_value,
    projected_moments, FunctionalSpec, MomentVector, VectorFunction,
};
use crate::polynomials::{inner_product, rodrigues_poly, RationalPolynomial, WeightedInnerProductSpec};
use crate::projection::{weighted_poly, xi_matrix, z_matrix};
use crate::rational::{int, rat, Rational, RationalMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VerifyConfig {
    pub seed: u64,
    /// Randomized soundness cases (each checks both bound forms).
    pub soundness_cases: usize,
    /// Largest weight exponent `m` in the randomized suites.
    pub max_m: usize,
    /// Largest `M` in the randomized suites.
    pub max_big_m: usize,
    /// Largest vector dimension `n`.
    pub max_dim: usize,
    /// Fault injection: perturb every `Ξ` used by the suites.
    pub corrupt_xi: bool,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            seed: 2017,
            soundness_cases: 1000,
            max_m: 3,
            max_big_m: 6,
            max_dim: 3,
            corrupt_xi: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteOutcome {
    pub name: String,
    pub cases: usize,
    pub failures: Vec<String>,
}

impl SuiteOutcome {
    fn new(name: &str) -> Self {
        Self {
            name: name.to_string(),
            cases: 0,
            failures: Vec::new(),
        }
    }

    fn check(&mut self, ok: bool, detail: impl FnOnce() -> String) {
        self.cases += 1;
        if !ok {
            self.failures.push(detail());
        }
    }

    fn error(&mut self, detail: String) {
        self.cases += 1;
        self.failures.push(detail);
    }

    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub config: VerifyConfig,
    pub suites: Vec<SuiteOutcome>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.suites.iter().all(SuiteOutcome::passed)
    }

    pub fn suite(&self, name: &str) -> Option<&SuiteOutcome> {
        self.suites.iter().find(|s| s.name == name)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "seed {}", self.config.seed);
        for s in &self.suites {
            let _ = writeln!(
                out,
                "{:<28} {:>6} cases  {}",
                s.name,
                s.cases,
                if s.passed() { "ok".to_string() } else { format!("{} FAILED", s.failures.len()) }
            );
            for f in s.failures.iter().take(10) {
                let _ = writeln!(out, "    {f}");
            }
            if s.failures.len() > 10 {
                let _ = writeln!(out, "    ... {} more", s.failures.len() - 10);
            }
        }
        out
    }
}

/// `Ξ_m`, perturbed in its last entry when fault injection is on.
fn checked_xi(m: usize, nu: usize, big_m: usize, corrupt: bool) -> Result<RationalMatrix> {
    let mut xi = xi_matrix(m, nu, big_m)?.entries;
    if corrupt {
        let (r, c) = (xi.nrows() - 1, xi.ncols() - 1);
        xi[(r, c)] += rat(1, 1000);
    }
    Ok(xi)
}

fn combine(rows: &[Rational], basis: &[RationalPolynomial]) -> RationalPolynomial {
    rows.iter()
        .zip(basis)
        .fold(RationalPolynomial::zero(), |acc, (c, p)| acc.add(&p.scale(c)))
}

/// Orthogonality, norms, `Ξ`/`Z` reconstruction and `Ξ_0 = I`, all in exact arithmetic.
pub fn exact_algebra(corrupt: bool) -> Vec<SuiteOutcome> {
    let mut ortho = SuiteOutcome::new("orthogonality");
    for m in 0..=6 {
        let spec = WeightedInnerProductSpec { m };
        let polys: Vec<_> = (0..=8).map(|n| rodrigues_poly(m, n)).collect();
        for n in 0..=8 {
            for k in 0..=n {
                let got = inner_product(spec, &polys[n], &polys[k]);
                let want = if n == k { rat(1, (m + 2 * n + 1) as i64) } else { int(0) };
                ortho.check(got == want, || format!("m={m}, n={n}, k={k}: got {got}, want {want}"));
            }
        }
    }

    let legendre: Vec<RationalPolynomial> = (0..=8).map(|l| rodrigues_poly(0, l)).collect();
    let mut xi_suite = SuiteOutcome::new("xi-reconstruction");
    let mut z_suite = SuiteOutcome::new("z-reconstruction");
    for big_m in 1..=8 {
        for m in 0..=4 {
            for nu in 0..=4 {
                if m + nu < big_m {
                    match checked_xi(m, nu, big_m, corrupt) {
                        Ok(xi) => {
                            let ok = (0..=nu).all(|j| combine(xi.row(j), &legendre[..big_m]) == weighted_poly(m, j));
                            xi_suite.check(ok, || format!("(m={m}, nu={nu}, M={big_m}): row expansion differs"));
                        }
                        Err(e) => xi_suite.error(format!("(m={m}, nu={nu}, M={big_m}): {e}")),
                    }
                }
                if m + nu <= big_m {
                    match z_matrix(m, nu, big_m) {
                        Ok(z) => {
                            let one = int(1);
                            let zero = int(0);
                            let ok = (0..=nu).all(|j| {
                                let q = weighted_poly(m, j);
                                let row = z.entries.row(j);
                                let zeta: Vec<Rational> = row[2..].iter().map(|v| -v.clone()).collect();
                                row[0] == q.eval(&one)
                                    && row[1] == -q.eval(&zero)
                                    && combine(&zeta, &legendre[..big_m]) == q.derivative()
                            });
                            z_suite.check(ok, || format!("(m={m}, nu={nu}, M={big_m}): Z row differs"));
                        }
                        Err(e) => z_suite.error(format!("(m={m}, nu={nu}, M={big_m}): {e}")),
                    }
                }
            }
        }
    }

    let mut identity = SuiteOutcome::new("xi0-identity");
    for big_m in 1..=8 {
        match checked_xi(0, big_m - 1, big_m, corrupt) {
            Ok(xi) => identity.check(xi == RationalMatrix::identity(big_m), || {
                format!("(m=0, nu={}, M={big_m}): not the identity", big_m - 1)
            }),
            Err(e) => identity.error(e.to_string()),
        }
    }
    vec![ortho, xi_suite, z_suite, identity]
}

fn random_w(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    let l = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
    &l * l.transpose() + DMatrix::identity(n, n) * 0.2
}

fn random_polynomial(rng: &mut ChaCha8Rng, n: usize, degree: usize) -> VectorFunction {
    let coeffs = (0..=degree)
        .map(|_| DVector::from_fn(n, |_, _| rng.gen_range(-2.0..2.0)))
        .collect();
    VectorFunction::polynomial(coeffs)
}

fn random_trig(rng: &mut ChaCha8Rng, n: usize) -> VectorFunction {
    let terms: Vec<(f64, f64, Vec<f64>)> = (0..3)
        .map(|_| {
            (
                rng.gen_range(0.2..3.0),
                rng.gen_range(0.0..2.0 * PI),
                (0..n).map(|_| rng.gen_range(-1.5..1.5)).collect(),
            )
        })
        .collect();
    let t2 = terms.clone();
    VectorFunction::new(n, move |s| {
        (0..n)
            .map(|i| terms.iter().map(|(w, p, a)| a[i] * (w * s + p).sin()).sum())
            .collect()
    })
    .with_derivative(move |s| {
        (0..n)
            .map(|i| t2.iter().map(|(w, p, a)| a[i] * w * (w * s + p).cos()).sum())
            .collect()
    })
}

fn random_function(rng: &mut ChaCha8Rng, n: usize, case: usize) -> (VectorFunction, String) {
    if case % 2 == 0 {
        let deg = rng.gen_range(0..=6);
        (random_polynomial(rng, n, deg), format!("polynomial degree {deg}"))
    } else {
        (random_trig(rng, n), "trigonometric".to_string())
    }
}

fn random_interval(rng: &mut ChaCha8Rng) -> (f64, f64) {
    let a = rng.gen_range(-2.0..2.0);
    (a, a + rng.gen_range(0.1..3.0))
}

fn lemma_bound_with(spec: &FunctionalSpec, phi: &MomentVector, xi: &DMatrix<f64>, nu: usize) -> f64 {
    let h = spec.length();
    (0..=nu)
        .map(|j| {
            let w = phi
                .phi
                .iter()
                .enumerate()
                .fold(DVector::zeros(spec.dim()), |acc, (l, p)| acc + p * xi[(j, l)]);
            (spec.m + 2 * j + 1) as f64 * w.dot(&(&spec.w * &w))
        })
        .sum::<f64>()
        / h
}

/// Projection bounds never exceed the functional they bound.
pub fn soundness(cfg: &VerifyConfig) -> Result<Vec<SuiteOutcome>> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut values = SuiteOutcome::new("soundness-values");
    let mut derivs = SuiteOutcome::new("soundness-derivative");
    let mut mono = SuiteOutcome::new("monotone-in-nu");
    let max_big_m = cfg.max_big_m.max(1);
    let max_m = cfg.max_m.min(max_big_m - 1);
    for case in 0..cfg.soundness_cases {
        let n = rng.gen_range(1..=cfg.max_dim.max(1));
        let m = rng.gen_range(0..=max_m);
        let big_m = rng.gen_range(m + 1..=max_big_m);
        let nu2 = rng.gen_range(0..=big_m - 1 - m);
        let nu3 = rng.gen_range(0..=big_m - m);
        let (a, b) = random_interval(&mut rng);
        let w = random_w(&mut rng, n);
        let (f, kind) = random_function(&mut rng, n, case);
        let spec = FunctionalSpec::new(w, m, a, b)?;
        let label = format!("case {case}: {kind}, n={n}, m={m}, M={big_m}, [a,b]=[{a:.4}, {b:.4}]");

        let phi = moments(&f, a, b, big_m)?;
        let value = functional_value(&spec, &f)?;
        let xi = checked_xi(m, nu2, big_m, cfg.corrupt_xi)?.to_f64();
        let bound = lemma_bound_with(&spec, &phi, &xi, nu2);
        let scale = value.abs().max(1.0);
        values.check(bound <= value + 1e-8 * scale, || {
            format!("{label}, nu={nu2}: bound {bound:.15e} > value {value:.15e}")
        });

        let dvalue = derivative_functional_value(&spec, &f)?;
        let dbound = lower_bound_derivative(&spec, &f.eval(a), &f.eval(b), &phi, nu3, big_m)?;
        let dscale = dvalue.abs().max(1.0);
        derivs.check(dbound <= dvalue + 1e-8 * dscale, || {
            format!("{label}, nu={nu3}: bound {dbound:.15e} > value {dvalue:.15e}")
        });

        if nu2 > 0 {
            let prev = lower_bound_values(&spec, &phi, nu2 - 1, big_m)?;
            let cur = lower_bound_values(&spec, &phi, nu2, big_m)?;
            mono.check(cur >= prev - 1e-12 * scale, || {
                format!("{label}: bound at nu={nu2} ({cur:e}) below nu={} ({prev:e})", nu2 - 1)
            });
        }
    }
    Ok(vec![values, derivs, mono])
}

/// Bounds are exact on the span of the first `ν + 1` weighted polynomials.
pub fn equality_on_span(cfg: &VerifyConfig, cases: usize) -> Result<Vec<SuiteOutcome>> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed);
    let mut span = SuiteOutcome::new("equality-on-span");
    let mut linear = SuiteOutcome::new("equality-linear-derivative");
    let max_big_m = cfg.max_big_m.max(1);
    let max_m = cfg.max_m.min(max_big_m - 1);
    for case in 0..cases {
        let n = rng.gen_range(1..=cfg.max_dim.max(1));
        let m = rng.gen_range(0..=max_m);
        let big_m = rng.gen_range(m + 1..=max_big_m);
        let nu = rng.gen_range(0..=big_m - 1 - m);
        let top = rng.gen_range(0..=nu);
        let (a, b) = random_interval(&mut rng);
        let w = random_w(&mut rng, n);
        let spec = FunctionalSpec::new(w.clone(), m, a, b)?;
        let coeffs: Vec<DVector<f64>> = (0..=top)
            .map(|_| DVector::from_fn(n, |_, _| rng.gen_range(-2.0..2.0)))
            .collect();
        let polys: Vec<RationalPolynomial> = (0..=top).map(|j| rodrigues_poly(m, j)).collect();
        let h = b - a;
        let c2 = coeffs.clone();
        let f = VectorFunction::new(n, move |s| {
            let x = (s - a) / h;
            polys
                .iter()
                .zip(&c2)
                .fold(DVector::zeros(n), |acc: DVector<f64>, (p, c)| acc + c * p.eval_f64(x))
                .as_slice()
                .to_vec()
        });
        let value = functional_value_by_quadrature(&spec, &f)?;
        let phi = moments(&f, a, b, big_m)?;
        let xi = checked_xi(m, nu, big_m, cfg.corrupt_xi)?.to_f64();
        let bound = lemma_bound_with(&spec, &phi, &xi, nu);
        let scale = value.abs().max(1.0);
        span.check((bound - value).abs() <= 1e-9 * scale, || {
            format!("case {case}: m={m}, nu={nu}, M={big_m}, top={top}: bound {bound:e} vs value {value:e}")
        });

        let nu3 = rng.gen_range(0..=big_m - m);
        let lin = random_polynomial(&mut rng, n, 1);
        let spec1 = FunctionalSpec::new(w, m, a, b)?;
        let phi1 = moments(&lin, a, b, big_m)?;
        let dvalue = derivative_functional_value(&spec1, &lin)?;
        let dbound = lower_bound_derivative(&spec1, &lin.eval(a), &lin.eval(b), &phi1, nu3, big_m)?;
        linear.check((dbound - dvalue).abs() <= 1e-9 * dvalue.abs().max(1.0), || {
            format!("case {case}: m={m}, nu={nu3}, M={big_m}: bound {dbound:e} vs value {dvalue:e}")
        });
    }
    Ok(vec![span, linear])
}

/// The `ν = 1` bound against the earlier Wirtinger-type multiple-integral bound.
pub fn competitor_dominance(cfg: &VerifyConfig, cases: usize) -> Result<SuiteOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0xd0d0);
    let mut suite = SuiteOutcome::new("competitor-dominance");
    let max_big_m = cfg.max_big_m.max(2);
    let max_l = cfg.max_m.min(max_big_m - 2);
    for case in 0..cases {
        let n = rng.gen_range(1..=cfg.max_dim.max(1));
        let l = rng.gen_range(0..=max_l);
        let big_m = rng.gen_range(l + 2..=max_big_m);
        let (a, b) = random_interval(&mut rng);
        let spec = FunctionalSpec::new(random_w(&mut rng, n), l, a, b)?;
        let (f, kind) = random_function(&mut rng, n, case);
        let phi = moments(&f, a, b, big_m)?;
        let w = projected_moments(&spec, &phi, 1, big_m)?;
        let (g, upsilon) = lee_park_statistics(&spec, &w[0], &w[1]);
        let theirs = lee_park_bound(&spec, &g, &upsilon);
        let ours = lower_bound_values(&spec, &phi, 1, big_m)?;
        let scale = ours.abs().max(theirs.abs()).max(1.0);
        let label = format!("case {case}: {kind}, n={n}, l={l}, M={big_m}");
        if l == 0 {
            suite.check((ours - theirs).abs() <= 1e-9 * scale, || {
                format!("{label}: expected equality, got {ours:e} vs {theirs:e}")
            });
        } else if w[1].norm() > 1e-6 {
            suite.check(ours > theirs, || format!("{label}: no strict gap, {ours:e} vs {theirs:e}"));
        } else {
            suite.check(ours >= theirs - 1e-9 * scale, || format!("{label}: {ours:e} < {theirs:e}"));
        }
    }
    Ok(suite)
}

/// Single weighted integral against the iterated-integral form, `m <= 3`.
pub fn multiple_integral(cfg: &VerifyConfig, cases: usize) -> Result<SuiteOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0xabcd);
    let mut suite = SuiteOutcome::new("multiple-integral");
    for case in 0..cases {
        let n = rng.gen_range(1..=cfg.max_dim.clamp(1, 2));
        let m = rng.gen_range(0..=cfg.max_m.min(3));
        let deg = rng.gen_range(0..=4);
        let (a, b) = random_interval(&mut rng);
        let spec = FunctionalSpec::new(random_w(&mut rng, n), m, a, b)?;
        let f = random_polynomial(&mut rng, n, deg);
        let single = functional_value(&spec, &f)?;
        let nested = nested_integral_value(&spec, &f)?;
        suite.check((single - nested).abs() <= 1e-8 * single.abs().max(1.0), || {
            format!("case {case}: m={m}, degree {deg}: single {single:e} vs nested {nested:e}")
        });
    }
    Ok(suite)
}

/// `(Ξ ⊗ I) Φ` and the `Z` rows against directly integrated weighted moments.
pub fn moment_identities(cfg: &VerifyConfig, cases: usize) -> Result<Vec<SuiteOutcome>> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x1234);
    let mut xi_suite = SuiteOutcome::new("moment-identity");
    let mut z_suite = SuiteOutcome::new("boundary-identity");
    let max_big_m = cfg.max_big_m.max(1);
    let max_m = cfg.max_m.min(max_big_m - 1);
    for case in 0..cases {
        let n = rng.gen_range(1..=cfg.max_dim.max(1));
        let m = rng.gen_range(0..=max_m);
        let big_m = rng.gen_range(m + 1..=max_big_m);
        let nu = big_m - 1 - m;
        let (a, b) = random_interval(&mut rng);
        let h = b - a;
        let deg = rng.gen_range(0..big_m);
        let f = random_polynomial(&mut rng, n, deg);
        let df = f.polynomial_derivative().expect("polynomial");
        let phi = moments(&f, a, b, big_m)?;
        let xi = checked_xi(m, nu, big_m, cfg.corrupt_xi)?.to_f64();
        let z = z_matrix(m, nu + 1, big_m)?.entries.to_f64();
        for j in 0..=nu + 1 {
            let p = rodrigues_poly(m, j);
            let weight = |s: f64| {
                let x = (s - a) / h;
                x.powi(m as i32) * p.eval_f64(x)
            };
            let direct = |g: &VectorFunction| -> Result<DVector<f64>> {
                let v = crate::quadrature::integrate(
                    &|s| (g.eval(s) * weight(s)).as_slice().to_vec(),
                    a,
                    b,
                    n,
                    crate::quadrature::QuadratureOptions::default(),
                )?;
                Ok(DVector::from_vec(v))
            };
            if j <= nu {
                let want = direct(&f)?;
                let got = (0..big_m).fold(DVector::zeros(n), |acc, l| acc + &phi.phi[l] * xi[(j, l)]);
                let scale = want.norm().max(1.0);
                xi_suite.check((&got - &want).norm() <= 1e-10 * scale, || {
                    format!("case {case}: (m={m}, nu={nu}, M={big_m}) row {j}: error {:e}", (&got - &want).norm())
                });
            }
            let want = direct(&df)?;
            let mut got = f.eval(b) * z[(j, 0)] + f.eval(a) * z[(j, 1)];
            for l in 0..big_m {
                got += &phi.phi[l] * (z[(j, l + 2)] / h);
            }
            let scale = want.norm().max(1.0);
            z_suite.check((&got - &want).norm() <= 1e-10 * scale, || {
                format!("case {case}: (m={m}, nu={}, M={big_m}) row {j}: error {:e}", nu + 1, (&got - &want).norm())
            });
        }
    }
    Ok(vec![xi_suite, z_suite])
}

/// All suites.
pub fn run_all(cfg: &VerifyConfig) -> Result<VerifyReport> {
    let mut suites = exact_algebra(cfg.corrupt_xi);
    suites.extend(soundness(cfg)?);
    suites.extend(equality_on_span(cfg, 200)?);
    suites.push(competitor_dominance(cfg, 300)?);
    suites.push(multiple_integral(cfg, 40)?);
    suites.extend(moment_identities(cfg, 100)?);
    Ok(VerifyReport { config: *cfg, suites })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_run_passes() {
        let cfg = VerifyConfig {
            soundness_cases: 40,
            ..Default::default()
        };
        let report = run_all(&cfg).unwrap();
        assert!(report.passed(), "{}", report.to_text());
    }

    #[test]
    fn corrupted_xi_is_caught_with_its_triple() {
        let cfg = VerifyConfig {
            soundness_cases: 10,
            corrupt_xi: true,
            ..Default::default()
        };
        let report = run_all(&cfg).unwrap();
        assert!(!report.passed());
        let xi = report.suite("xi-reconstruction").unwrap();
        assert!(xi.failures.iter().any(|f| f.contains("(m=1, nu=0, M=2)")));
    }
}
