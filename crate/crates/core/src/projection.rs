//! Change-of-basis matrices between the weighted families `P_{m,j}` and the
//! shifted Legendre basis `P_{0,l}`.
//!
//! * `Ξ_m` row `j`: coefficients of `x^m P_{m,j}(x)` in `{P_{0,l}}_{l<M}`.
//! * `Z_m` row `j`: `(q(1), -q(0), -ζ_{j,0}, ..., -ζ_{j,M-1})` where
//!   `q = x^m P_{m,j}` and `ζ` expands `q'` in the same basis.
//! * `L̃_0` is `Z_0` with `ν = M - 1`; it maps the augmented moment vector
//!   to the time derivative of the Legendre moments.
//!
//! All three are obtained by an exact triangular solve against
//! [`monomial_to_basis_matrix`]. The closed forms printed alongside the
//! original derivation are only evaluated by [`crosscheck_closed_forms`].

use num_traits::{One, Zero};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::polynomials::{monomial_to_basis_matrix, rodrigues_poly, RationalPolynomial};
use crate::rational::{int, Rational, RationalMatrix};

#[derive(Debug, Clone, PartialEq)]
pub struct XiMatrix {
    pub m: usize,
    pub nu: usize,
    pub big_m: usize,
    /// `(nu+1) x M`
    pub entries: RationalMatrix,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ZMatrix {
    pub m: usize,
    pub nu: usize,
    pub big_m: usize,
    /// `(nu+1) x (M+2)`
    pub entries: RationalMatrix,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LTildeMatrix {
    pub big_m: usize,
    /// `M x (M+2)`
    pub entries: RationalMatrix,
}

/// `q_{m,m+j}(x) = x^m P_{m,j}(x)`
pub fn weighted_poly(m: usize, j: usize) -> RationalPolynomial {
    rodrigues_poly(m, j).shift_up(m)
}

/// Coefficients of `p` (degree < `big_m`) in the shifted Legendre basis.
fn legendre_coordinates(p: &RationalPolynomial, legendre_inv: &RationalMatrix) -> Vec<Rational> {
    let size = legendre_inv.nrows();
    debug_assert!(p.degree().map_or(true, |d| d < size.max(1)));
    (0..size)
        .map(|l| {
            (0..size).fold(Rational::zero(), |acc, k| {
                let c = p.coeff(k);
                if c.is_zero() {
                    acc
                } else {
                    acc + c * &legendre_inv[(k, l)]
                }
            })
        })
        .collect()
}

fn legendre_inverse(big_m: usize) -> RationalMatrix {
    if big_m == 0 {
        return RationalMatrix::zeros(0, 0);
    }
    monomial_to_basis_matrix(0, big_m - 1)
        .lower_triangular_inverse()
        .expect("Legendre basis matrix has a nonzero diagonal")
}

/// `Ξ_m` with rows `j = 0..=nu` over `M` columns. Requires `m + nu <= M - 1`.
pub fn xi_matrix(m: usize, nu: usize, big_m: usize) -> Result<XiMatrix> {
    if big_m == 0 || m + nu > big_m - 1 {
        return Err(Error::ParameterViolation(format!(
            "Xi needs m + nu <= M - 1, got m={m}, nu={nu}, M={big_m}"
        )));
    }
    let inv = legendre_inverse(big_m);
    let rows = (0..=nu)
        .map(|j| legendre_coordinates(&weighted_poly(m, j), &inv))
        .collect();
    Ok(XiMatrix {
        m,
        nu,
        big_m,
        entries: RationalMatrix::from_rows(rows),
    })
}

/// `Z_m` with rows `j = 0..=nu` over `M + 2` columns. Requires `m + nu <= M`.
pub fn z_matrix(m: usize, nu: usize, big_m: usize) -> Result<ZMatrix> {
    if m + nu > big_m {
        return Err(Error::ParameterViolation(format!(
            "Z needs m + nu <= M, got m={m}, nu={nu}, M={big_m}"
        )));
    }
    let inv = legendre_inverse(big_m);
    let one = Rational::one();
    let rows = (0..=nu)
        .map(|j| {
            let q = weighted_poly(m, j);
            let mut row = Vec::with_capacity(big_m + 2);
            row.push(q.eval(&one));
            row.push(-q.eval(&Rational::zero()));
            row.extend(
                legendre_coordinates(&q.derivative(), &inv)
                    .into_iter()
                    .map(|z| -z),
            );
            row
        })
        .collect();
    Ok(ZMatrix {
        m,
        nu,
        big_m,
        entries: RationalMatrix::from_rows(rows),
    })
}

/// `L̃_0` for `M >= 1`.
pub fn ltilde0(big_m: usize) -> Result<LTildeMatrix> {
    if big_m == 0 {
        return Err(Error::ParameterViolation("L~0 needs M >= 1".into()));
    }
    let z = z_matrix(0, big_m - 1, big_m)?;
    Ok(LTildeMatrix {
        big_m,
        entries: z.entries,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct CrosscheckEntry {
    pub item: String,
    pub agrees: bool,
    pub detail: String,
}

/// Outcome of comparing the printed closed forms against the basis-change matrices.
#[derive(Debug, Clone, Serialize)]
pub struct CrosscheckReport {
    pub m: usize,
    pub nu: usize,
    pub big_m: usize,
    pub entries: Vec<CrosscheckEntry>,
}

impl CrosscheckReport {
    pub fn disagreements(&self) -> impl Iterator<Item = &CrosscheckEntry> {
        self.entries.iter().filter(|e| !e.agrees)
    }

    fn push(&mut self, item: impl Into<String>, agrees: bool, detail: impl Into<String>) {
        self.entries.push(CrosscheckEntry {
            item: item.into(),
            agrees,
            detail: detail.into(),
        });
    }
}

/// Printed entry formula for `G(m,K)`:
/// `(-1)^{l+k} prod_{j<k} (l-j)/(k-j) prod_{i=1..l} (m+k+i)/i` for `k <= l`.
///
/// `rows` selects which `l` get the formula; row 0 is always `(1, 0, ...)`.
pub fn closed_form_g(m: usize, k_max: usize, rows: impl Iterator<Item = usize>) -> RationalMatrix {
    let mut g = RationalMatrix::zeros(k_max + 1, k_max + 1);
    g[(0, 0)] = Rational::one();
    for l in rows.filter(|&l| l >= 1 && l <= k_max) {
        for k in 0..=l {
            let mut value = if (l + k) % 2 == 0 { int(1) } else { int(-1) };
            for j in 0..k {
                value *= Rational::new(((l - j) as i64).into(), ((k - j) as i64).into());
            }
            for i in 1..=l {
                value *= Rational::new(((m + k + i) as i64).into(), (i as i64).into());
            }
            g[(l, k)] = value;
        }
    }
    g
}

fn diff_entries(label: &str, a: &RationalMatrix, b: &RationalMatrix) -> (bool, String) {
    if a.nrows() != b.nrows() || a.ncols() != b.ncols() {
        return (
            false,
            format!(
                "{label}: shape {}x{} vs {}x{}",
                a.nrows(),
                a.ncols(),
                b.nrows(),
                b.ncols()
            ),
        );
    }
    let mut diffs = Vec::new();
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            if a[(i, j)] != b[(i, j)] {
                diffs.push(format!("({i},{j}): closed form {} vs basis change {}", a[(i, j)], b[(i, j)]));
            }
        }
    }
    if diffs.is_empty() {
        (true, format!("{label}: all entries agree"))
    } else {
        (false, format!("{label}: {}", diffs.join("; ")))
    }
}

/// `big_m x big_m` operator taking monomial coefficient rows to their derivative.
fn derivative_operator(size: usize) -> RationalMatrix {
    let mut d = RationalMatrix::zeros(size, size);
    for k in 1..size {
        d[(k, k - 1)] = int(k as i64);
    }
    d
}

/// Evaluate the printed closed forms for `G(m,K)`, `Ξ_m`, `Z_m` and `L̃_0`
/// under a corrected reading of their index ranges and diff them against the
/// basis-change results. Never alters the basis-change matrices.
pub fn crosscheck_closed_forms(m: usize, nu: usize, big_m: usize) -> Result<CrosscheckReport> {
    let xi = xi_matrix(m, nu, big_m)?;
    let z = z_matrix(m, nu, big_m)?;
    let mut report = CrosscheckReport {
        m,
        nu,
        big_m,
        entries: Vec::new(),
    };

    // G(m,K): literal row range l = 1..K-1 versus the full range l = 1..K.
    let k_max = big_m.max(nu + 1);
    let reference = monomial_to_basis_matrix(m, k_max);
    let literal = closed_form_g(m, k_max, 1..k_max);
    let (ok, detail) = diff_entries(&format!("G({m},{k_max}) literal rows l=1..K-1"), &literal, &reference);
    report.push("G literal", ok, detail);
    let full = closed_form_g(m, k_max, 1..=k_max);
    let (ok, detail) = diff_entries(&format!("G({m},{k_max}) rows l=1..K"), &full, &reference);
    report.push("G corrected", ok, detail);

    let inv = legendre_inverse(big_m);

    // Ξ_m = G(m,ν) [0_{ν+1,m} I_{ν+1} 0] G(0,M-1)^{-1}; the printed G(m,-ν) has negative order.
    report.push(
        "Xi literal",
        false,
        format!("G({m},-{nu}) has negative order and cannot be formed"),
    );
    let g_m = closed_form_g(m, nu, 1..=nu);
    let mut embed = RationalMatrix::zeros(nu + 1, big_m);
    for j in 0..=nu {
        embed[(j, m + j)] = Rational::one();
    }
    let xi_closed = g_m.mul(&embed).mul(&inv);
    let (ok, detail) = diff_entries("Xi with G(m,nu)", &xi_closed, &xi.entries);
    report.push("Xi corrected", ok, detail);
    if m == 0 && nu + 1 == big_m {
        let (ok, detail) = diff_entries("Xi_0 reference", &RationalMatrix::identity(big_m), &xi.entries);
        report.push("Xi_0 identity", ok, detail);
    }

    // L̃_0 = [ones, alternating, -L0],  L0 = G(0,M-1) D G(0,M-1)^{-1}.
    let lt = ltilde0(big_m)?;
    report.push(
        "L0 literal",
        false,
        format!(
            "[I_M 0] G(0,M) diag(0..M) [0; I_(M-1)] is {}x{} times {}x{}: inner sizes differ",
            big_m,
            big_m + 1,
            big_m,
            big_m.saturating_sub(1)
        ),
    );
    let l0 = closed_form_g(0, big_m - 1, 1..big_m)
        .mul(&derivative_operator(big_m))
        .mul(&inv);
    let mut lt_closed = RationalMatrix::zeros(big_m, big_m + 2);
    for j in 0..big_m {
        lt_closed[(j, 0)] = int(1);
        lt_closed[(j, 1)] = if j % 2 == 0 { int(-1) } else { int(1) };
        for l in 0..big_m {
            lt_closed[(j, l + 2)] = -l0[(j, l)].clone();
        }
    }
    let (ok, detail) = diff_entries("L~0 with D = diag(0..M-1) shift", &lt_closed, &lt.entries);
    report.push("L~0 corrected", ok, detail);
    let ones = (0..big_m).all(|j| lt.entries[(j, 0)] == int(1));
    report.push("L~0 column 0", ones, "column 0 of L~0 is all ones");

    // Z_m = [ones, boundary column, -G(m,ν) [0 D_{m,ν}] G(0,M-1)^{-1}]. The printed
    // G(m, ν+1) and D_{m,ν} = diag(m..m+ν+1) are one size too large.
    if m > 0 {
        report.push(
            "Z literal",
            false,
            format!(
                "G({m},{}) is {}x{} but Z_m has {} rows; diag(m..m+nu+1) has {} entries",
                nu + 1,
                nu + 2,
                nu + 2,
                nu + 1,
                nu + 2
            ),
        );
    }
    let mut shift = RationalMatrix::zeros(nu + 1, big_m.max(1));
    for j in 0..=nu {
        if m + j >= 1 {
            // d/dx x^{m+j} = (m+j) x^{m+j-1}
            shift[(j, m + j - 1)] = int((m + j) as i64);
        }
    }
    let z_block = if big_m == 0 {
        RationalMatrix::zeros(nu + 1, 0)
    } else {
        closed_form_g(m, nu, 1..=nu).mul(&shift).mul(&inv)
    };
    let mut z_closed = RationalMatrix::zeros(nu + 1, big_m + 2);
    for j in 0..=nu {
        z_closed[(j, 0)] = int(1);
        z_closed[(j, 1)] = match (m, j % 2) {
            (0, 0) => int(-1),
            (0, _) => int(1),
            _ => int(0),
        };
        for l in 0..big_m {
            z_closed[(j, l + 2)] = -z_block[(j, l)].clone();
        }
    }
    let (ok, detail) = diff_entries("Z_m with G(m,nu), D = diag(m..m+nu)", &z_closed, &z.entries);
    report.push("Z corrected", ok, detail);
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::rat;

    fn expand_legendre(coords: &[Rational]) -> RationalPolynomial {
        coords
            .iter()
            .enumerate()
            .fold(RationalPolynomial::zero(), |acc, (l, c)| {
                acc.add(&rodrigues_poly(0, l).scale(c))
            })
    }

    #[test]
    fn xi_zero_is_identity() {
        for big_m in 1..=7 {
            let xi = xi_matrix(0, big_m - 1, big_m).unwrap();
            assert_eq!(xi.entries, RationalMatrix::identity(big_m));
        }
    }

    #[test]
    fn xi_small_example() {
        let xi = xi_matrix(1, 0, 2).unwrap();
        assert_eq!(xi.entries, RationalMatrix::from_rows(vec![vec![rat(1, 2), rat(1, 2)]]));
    }

    #[test]
    fn xi_rejects_violations() {
        assert!(matches!(xi_matrix(2, 2, 4), Err(Error::ParameterViolation(_))));
        assert!(xi_matrix(0, 0, 0).is_err());
        assert!(matches!(z_matrix(2, 3, 4), Err(Error::ParameterViolation(_))));
    }

    #[test]
    fn xi_zero_fill_and_reconstruction() {
        for m in 0..=4 {
            for nu in 0..=4 {
                for big_m in (m + nu + 1)..=8 {
                    let xi = xi_matrix(m, nu, big_m).unwrap();
                    for j in 0..=nu {
                        let row = xi.entries.row(j);
                        for l in (m + j + 1)..big_m {
                            assert!(row[l].is_zero());
                        }
                        assert_eq!(expand_legendre(row), weighted_poly(m, j));
                    }
                }
            }
        }
    }

    #[test]
    fn z_rows_and_derivative_reconstruction() {
        for m in 0..=4 {
            for nu in 0..=4 {
                for big_m in (m + nu).max(1)..=8 {
                    let z = z_matrix(m, nu, big_m).unwrap();
                    for j in 0..=nu {
                        let row = z.entries.row(j);
                        assert_eq!(row[0], int(1));
                        let expected = if m > 0 {
                            int(0)
                        } else if j % 2 == 0 {
                            int(-1)
                        } else {
                            int(1)
                        };
                        assert_eq!(row[1], expected);
                        let zeta: Vec<Rational> = row[2..].iter().map(|v| -v.clone()).collect();
                        for l in (m + j)..big_m {
                            assert!(zeta[l].is_zero());
                        }
                        assert_eq!(expand_legendre(&zeta), weighted_poly(m, j).derivative());
                    }
                }
            }
        }
    }

    #[test]
    fn z_examples() {
        let z = z_matrix(0, 1, 3).unwrap();
        assert_eq!(z.entries.row(0), &[int(1), int(-1), int(0), int(0), int(0)]);
        assert_eq!(z.entries.row(1), &[int(1), int(1), int(-2), int(0), int(0)]);
        let z = z_matrix(1, 0, 1).unwrap();
        assert_eq!(z.entries.row(0), &[int(1), int(0), int(-1)]);
        let z = z_matrix(0, 0, 0).unwrap();
        assert_eq!(z.entries.row(0), &[int(1), int(-1)]);
    }

    #[test]
    fn ltilde_examples() {
        let lt = ltilde0(1).unwrap();
        assert_eq!(lt.entries, RationalMatrix::from_rows(vec![vec![int(1), int(-1), int(0)]]));
        let lt = ltilde0(2).unwrap();
        assert_eq!(lt.entries.row(0), &[int(1), int(-1), int(0), int(0)]);
        assert_eq!(lt.entries.row(1), &[int(1), int(1), int(-2), int(0)]);
        let lt = ltilde0(6).unwrap();
        for j in 0..6 {
            let expected = if j % 2 == 0 { int(-1) } else { int(1) };
            assert_eq!(lt.entries[(j, 1)], expected);
        }
        assert!(ltilde0(0).is_err());
    }

    #[test]
    fn crosscheck_corrected_readings_agree() {
        for (m, nu, big_m) in [(0, 3, 4), (1, 2, 4), (2, 1, 4), (3, 0, 4), (1, 0, 2), (0, 1, 5)] {
            let report = crosscheck_closed_forms(m, nu, big_m).unwrap();
            for e in &report.entries {
                if e.item.ends_with("corrected") || e.item.contains("identity") || e.item.contains("column") {
                    assert!(e.agrees, "{m} {nu} {big_m}: {}", e.detail);
                }
            }
            let literal_g = report.entries.iter().find(|e| e.item == "G literal").unwrap();
            assert!(!literal_g.agrees, "literal range leaves the last row empty");
        }
    }
}
