//! Assembly of the delay-dependent LMI stability conditions.
//!
//! The conditions live on two augmented spaces:
//!
//! * `x̃ = (x, φ_0, ..., φ_{M-1})`, dimension `n(M+1)`, for positivity of the
//!   Lyapunov–Krasovskii functional (`Ψ⁰ ≻ 0`);
//! * `Φ̃ = (x, x(t-τ), φ_0/τ, ..., φ_{M-1}/τ)`, dimension `n(M+2)`, for the
//!   negativity of its derivative (`Ψ¹ + Ψ² + Ψ³¹ - Ψ³² ≺ 0`).
//!
//! Decision variables are `P` (symmetric, size `n(M+1)`, sign-indefinite),
//! `Q_0..Q_{m1}` and `R_1..R_{m2}` (symmetric `n x n`, constrained positive
//! definite). Every constraint is affine in the variables; [`LmiProblem`]
//! stores each one as a constant block plus one coefficient block per
//! scalar variable that actually enters it.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::projection::{ltilde0, xi_matrix, z_matrix};

#[derive(Debug, Clone, PartialEq)]
pub struct DelaySystem {
    pub a: DMatrix<f64>,
    pub a_d1: DMatrix<f64>,
    pub a_d2: DMatrix<f64>,
}

impl DelaySystem {
    /// `a_d2 = None` means no distributed-delay term.
    pub fn new(a: DMatrix<f64>, a_d1: DMatrix<f64>, a_d2: Option<DMatrix<f64>>) -> Result<Self> {
        let n = a.nrows();
        let a_d2 = a_d2.unwrap_or_else(|| DMatrix::zeros(n, n));
        for (name, mat) in [("A", &a), ("A_d1", &a_d1), ("A_d2", &a_d2)] {
            if mat.nrows() != n || mat.ncols() != n {
                return Err(Error::DimensionMismatch(format!(
                    "{name} is {}x{}, expected {n}x{n}",
                    mat.nrows(),
                    mat.ncols()
                )));
            }
            if mat.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidInput(format!("{name} has non-finite entries")));
            }
        }
        if n == 0 {
            return Err(Error::InvalidInput("state dimension must be positive".into()));
        }
        Ok(Self { a, a_d1, a_d2 })
    }

    pub fn n_x(&self) -> usize {
        self.a.nrows()
    }

    pub fn has_distributed_term(&self) -> bool {
        self.a_d2.iter().any(|&v| v != 0.0)
    }
}

/// Hierarchy parameters `(M, m)` with the derived choices
/// `m1 = m`, `m2 = m + 1`, `ν_{1,j} = M - j - 1`, `ν_{2,j} = ν_{1,j} + 1`.
///
/// A negative `ν` means the corresponding projection has no rows and its
/// term drops out of the conditions; the variables `Q_j`, `R_j` still exist.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct HierarchyParams {
    #[serde(rename = "M")]
    pub big_m: usize,
    pub m: usize,
}

impl HierarchyParams {
    pub fn new(big_m: usize, m: usize) -> Result<Self> {
        if big_m == 0 {
            return Err(Error::ParameterViolation("M must be at least 1".into()));
        }
        Ok(Self { big_m, m })
    }

    pub fn m1(&self) -> usize {
        self.m
    }

    pub fn m2(&self) -> usize {
        self.m + 1
    }

    /// `ν_{1,j}` for `j = 0..=m`; `None` when negative.
    pub fn nu1(&self, j: usize) -> Option<usize> {
        (self.big_m as isize - j as isize - 1).try_into().ok()
    }

    /// `ν_{2,j} = ν_{1,j} + 1`; `None` when negative.
    pub fn nu2(&self, j: usize) -> Option<usize> {
        (self.big_m as isize - j as isize).try_into().ok()
    }
}

/// How `Ψ³²` enters the derivative condition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Psi32Scaling {
    /// Multiply by `1/τ`, as produced by the derivative bound of the functional.
    #[default]
    InverseTau,
    /// No factor.
    Unit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Sense {
    PositiveDefinite,
    NegativeDefinite,
}

/// Sizes of the symmetric decision blocks `P, Q_0..Q_{m1}, R_1..R_{m2}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct VariableLayout {
    pub n_x: usize,
    pub big_m: usize,
    pub m1: usize,
    pub m2: usize,
}

impl VariableLayout {
    pub fn new(params: &HierarchyParams, n_x: usize) -> Self {
        Self {
            n_x,
            big_m: params.big_m,
            m1: params.m1(),
            m2: params.m2(),
        }
    }

    pub fn p_size(&self) -> usize {
        self.n_x * (self.big_m + 1)
    }

    fn block_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![self.p_size()];
        sizes.extend(std::iter::repeat(self.n_x).take(self.m1 + 1 + self.m2));
        sizes
    }

    /// Number of free scalars (upper triangles of every block).
    pub fn num_scalars(&self) -> usize {
        self.block_sizes().iter().map(|k| k * (k + 1) / 2).sum()
    }

    /// `(block, row, col)` of every flat index, `row <= col`.
    fn scalar_positions(&self) -> Vec<(usize, usize, usize)> {
        let mut out = Vec::with_capacity(self.num_scalars());
        for (b, &k) in self.block_sizes().iter().enumerate() {
            for i in 0..k {
                for j in i..k {
                    out.push((b, i, j));
                }
            }
        }
        out
    }
}

/// Symmetric decision matrices. `r[0]` is `R_1`.
#[derive(Debug, Clone, PartialEq)]
pub struct DecisionVariables {
    pub p: DMatrix<f64>,
    pub q: Vec<DMatrix<f64>>,
    pub r: Vec<DMatrix<f64>>,
}

impl DecisionVariables {
    pub fn zeros(layout: &VariableLayout) -> Self {
        let n = layout.n_x;
        Self {
            p: DMatrix::zeros(layout.p_size(), layout.p_size()),
            q: vec![DMatrix::zeros(n, n); layout.m1 + 1],
            r: vec![DMatrix::zeros(n, n); layout.m2],
        }
    }

    fn block_mut(&mut self, b: usize) -> &mut DMatrix<f64> {
        if b == 0 {
            &mut self.p
        } else if b <= self.q.len() {
            &mut self.q[b - 1]
        } else {
            let off = 1 + self.q.len();
            &mut self.r[b - off]
        }
    }

    fn block(&self, b: usize) -> &DMatrix<f64> {
        if b == 0 {
            &self.p
        } else if b <= self.q.len() {
            &self.q[b - 1]
        } else {
            &self.r[b - 1 - self.q.len()]
        }
    }

    pub fn from_flat(layout: &VariableLayout, y: &[f64]) -> Result<Self> {
        if y.len() != layout.num_scalars() {
            return Err(Error::DimensionMismatch(format!(
                "expected {} scalars, got {}",
                layout.num_scalars(),
                y.len()
            )));
        }
        let mut vars = Self::zeros(layout);
        for (&(b, i, j), &v) in layout.scalar_positions().iter().zip(y) {
            let blk = vars.block_mut(b);
            blk[(i, j)] = v;
            blk[(j, i)] = v;
        }
        Ok(vars)
    }

    pub fn to_flat(&self, layout: &VariableLayout) -> Result<Vec<f64>> {
        self.check(layout)?;
        Ok(layout
            .scalar_positions()
            .iter()
            .map(|&(b, i, j)| self.block(b)[(i, j)])
            .collect())
    }

    fn check(&self, layout: &VariableLayout) -> Result<()> {
        let n = layout.n_x;
        let ok = self.p.shape() == (layout.p_size(), layout.p_size())
            && self.q.len() == layout.m1 + 1
            && self.r.len() == layout.m2
            && self.q.iter().chain(&self.r).all(|m| m.shape() == (n, n));
        if ok {
            Ok(())
        } else {
            Err(Error::DimensionMismatch("decision variables do not match the layout".into()))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum ProblemKind {
    /// Pointwise conditions at a single delay.
    Pointwise { tau: f64 },
    /// Delay-range conditions on `[low, high]`.
    DelayRange { low: f64, high: f64 },
}

/// One affine constraint `constant + Σ_i y_i coeff_i` with a definiteness sense.
#[derive(Debug, Clone)]
pub struct LmiConstraint {
    pub name: String,
    pub sense: Sense,
    pub constant: DMatrix<f64>,
    /// `(flat variable index, coefficient block)`, only nonzero blocks.
    pub coeffs: Vec<(usize, DMatrix<f64>)>,
}

impl LmiConstraint {
    pub fn size(&self) -> usize {
        self.constant.nrows()
    }
}

#[derive(Debug, Clone)]
pub struct LmiProblem {
    pub kind: ProblemKind,
    pub params: HierarchyParams,
    pub layout: VariableLayout,
    pub constraints: Vec<LmiConstraint>,
}

#[derive(Debug, Clone)]
pub struct EvaluatedConstraint {
    pub name: String,
    pub sense: Sense,
    pub value: DMatrix<f64>,
}

impl EvaluatedConstraint {
    /// Smallest eigenvalue of `value` (for `≻ 0`) or of `-value` (for `≺ 0`).
    pub fn margin(&self) -> f64 {
        let m = match self.sense {
            Sense::PositiveDefinite => self.value.clone(),
            Sense::NegativeDefinite => -&self.value,
        };
        m.symmetric_eigenvalues().min()
    }
}

fn symmetrize(m: DMatrix<f64>) -> DMatrix<f64> {
    (&m + m.transpose()) * 0.5
}

/// `K^T diag(w_0 V, w_1 V, ...) K` where `K` has `n * weights.len()` rows.
fn weighted_gram(k: &DMatrix<f64>, weights: &[f64], v: &DMatrix<f64>) -> DMatrix<f64> {
    let n = v.nrows();
    let mut out = DMatrix::zeros(k.ncols(), k.ncols());
    for (i, &w) in weights.iter().enumerate() {
        let ki = k.rows(i * n, n);
        out += (ki.transpose() * v * ki) * w;
    }
    out
}

fn kron_identity(m: &DMatrix<f64>, n: usize) -> DMatrix<f64> {
    m.kronecker(&DMatrix::<f64>::identity(n, n))
}

/// Structural matrices of one `(system, params)` pair, independent of `τ` and the variables.
#[derive(Debug, Clone)]
pub struct Assembler {
    sys: DelaySystem,
    params: HierarchyParams,
    scaling: Psi32Scaling,
    n: usize,
    /// `(Ξ_j ⊗ I)` for `j = 0..=m1`, `None` when `ν_{1,j} < 0`.
    xi: Vec<Option<DMatrix<f64>>>,
    /// `(Z_j ⊗ I)` for `j = 0..m2`, `None` when `ν_{2,j} < 0`.
    z: Vec<Option<DMatrix<f64>>>,
    ltilde: DMatrix<f64>,
}

impl Assembler {
    pub fn new(sys: &DelaySystem, params: HierarchyParams, scaling: Psi32Scaling) -> Result<Self> {
        let n = sys.n_x();
        let big_m = params.big_m;
        let xi = (0..=params.m1())
            .map(|j| {
                params
                    .nu1(j)
                    .map(|nu| xi_matrix(j, nu, big_m).map(|x| kron_identity(&x.entries.to_f64(), n)))
                    .transpose()
            })
            .collect::<Result<Vec<_>>>()?;
        let z = (0..params.m2())
            .map(|j| {
                params
                    .nu2(j)
                    .map(|nu| z_matrix(j, nu, big_m).map(|x| kron_identity(&x.entries.to_f64(), n)))
                    .transpose()
            })
            .collect::<Result<Vec<_>>>()?;
        let ltilde = kron_identity(&ltilde0(big_m)?.entries.to_f64(), n);
        Ok(Self {
            sys: sys.clone(),
            params,
            scaling,
            n,
            xi,
            z,
            ltilde,
        })
    }

    pub fn layout(&self) -> VariableLayout {
        VariableLayout::new(&self.params, self.n)
    }

    fn big_m(&self) -> usize {
        self.params.big_m
    }

    /// `𝒜 = (A, A_d1, τ A_d2, 0, ..., 0)`, `n x n(M+2)`.
    pub fn a_row(&self, tau: f64) -> DMatrix<f64> {
        let n = self.n;
        let mut out = DMatrix::zeros(n, n * (self.big_m() + 2));
        out.view_mut((0, 0), (n, n)).copy_from(&self.sys.a);
        out.view_mut((0, n), (n, n)).copy_from(&self.sys.a_d1);
        out.view_mut((0, 2 * n), (n, n)).copy_from(&(&self.sys.a_d2 * tau));
        out
    }

    /// `Γ_M`: `x̃ = Γ Φ̃`.
    pub fn gamma(&self, tau: f64) -> DMatrix<f64> {
        let n = self.n;
        let big_m = self.big_m();
        let mut out = DMatrix::zeros(n * (big_m + 1), n * (big_m + 2));
        out.view_mut((0, 0), (n, n)).fill_with_identity();
        for i in 0..n * big_m {
            out[(n + i, 2 * n + i)] = tau;
        }
        out
    }

    /// `Λ_M = [𝒜; L̃_0 ⊗ I]`: `d/dt x̃ = Λ Φ̃`.
    pub fn lambda(&self, tau: f64) -> DMatrix<f64> {
        let n = self.n;
        let big_m = self.big_m();
        let mut out = DMatrix::zeros(n * (big_m + 1), n * (big_m + 2));
        out.view_mut((0, 0), (n, n * (big_m + 2))).copy_from(&self.a_row(tau));
        out.view_mut((n, 0), (n * big_m, n * (big_m + 2))).copy_from(&self.ltilde);
        out
    }

    fn rows_of(k: &DMatrix<f64>, n: usize) -> usize {
        k.nrows() / n
    }

    /// `Ψ⁰(τ) = τP + Σ_j diag(0, (Ξ_j⊗I)^T diag((j+1+2i) Q_j) (Ξ_j⊗I))`.
    pub fn psi0(&self, vars: &DecisionVariables, tau: f64) -> DMatrix<f64> {
        let n = self.n;
        let mut out = &vars.p * tau;
        let tail = n * self.big_m();
        for (j, k) in self.xi.iter().enumerate() {
            if let Some(k) = k {
                let weights: Vec<f64> = (0..Self::rows_of(k, n)).map(|i| (j + 1 + 2 * i) as f64).collect();
                let g = weighted_gram(k, &weights, &vars.q[j]);
                let mut v = out.view_mut((n, n), (tail, tail));
                v += g;
            }
        }
        symmetrize(out)
    }

    /// `Ψ¹(τ) = Γ^T P Λ + Λ^T P Γ`.
    pub fn psi1(&self, vars: &DecisionVariables, tau: f64) -> DMatrix<f64> {
        let g = self.gamma(tau);
        let l = self.lambda(tau);
        let gpl = g.transpose() * &vars.p * l;
        symmetrize(&gpl + gpl.transpose())
    }

    /// `Ψ² = diag(Σ_j Q_j, -Q_0, -Σ_{j≥1} j (Ξ_{j-1}⊗I)^T diag((j+2i) Q_j) (Ξ_{j-1}⊗I))`.
    pub fn psi2(&self, vars: &DecisionVariables) -> DMatrix<f64> {
        let n = self.n;
        let big_m = self.big_m();
        let mut out = DMatrix::zeros(n * (big_m + 2), n * (big_m + 2));
        let q_sum = vars.q.iter().fold(DMatrix::zeros(n, n), |acc, q| acc + q);
        out.view_mut((0, 0), (n, n)).copy_from(&q_sum);
        out.view_mut((n, n), (n, n)).copy_from(&(-&vars.q[0]));
        for j in 1..=self.params.m1() {
            if let Some(k) = &self.xi[j - 1] {
                let weights: Vec<f64> = (0..Self::rows_of(k, n)).map(|i| (j + 2 * i) as f64).collect();
                let g = weighted_gram(k, &weights, &vars.q[j]) * (j as f64);
                let mut v = out.view_mut((2 * n, 2 * n), (n * big_m, n * big_m));
                v -= g;
            }
        }
        symmetrize(out)
    }

    /// `Σ_j R_j`
    fn r_sum(&self, vars: &DecisionVariables) -> DMatrix<f64> {
        vars.r.iter().fold(DMatrix::zeros(self.n, self.n), |acc, r| acc + r)
    }

    /// `Ψ³¹(τ) = τ 𝒜^T (Σ_j R_j) 𝒜`.
    pub fn psi31(&self, vars: &DecisionVariables, tau: f64) -> DMatrix<f64> {
        let a = self.a_row(tau);
        symmetrize(a.transpose() * self.r_sum(vars) * a * tau)
    }

    /// `Σ_j j (Z_{j-1}⊗I)^T diag((j+2i) R_j) (Z_{j-1}⊗I)` without any `τ` factor.
    pub fn psi32_unscaled(&self, vars: &DecisionVariables) -> DMatrix<f64> {
        let n = self.n;
        let dim = n * (self.big_m() + 2);
        let mut out = DMatrix::zeros(dim, dim);
        for j in 1..=self.params.m2() {
            if let Some(k) = &self.z[j - 1] {
                let weights: Vec<f64> = (0..Self::rows_of(k, n)).map(|i| (j + 2 * i) as f64).collect();
                out += weighted_gram(k, &weights, &vars.r[j - 1]) * (j as f64);
            }
        }
        symmetrize(out)
    }

    pub fn psi32(&self, vars: &DecisionVariables, tau: f64) -> DMatrix<f64> {
        let base = self.psi32_unscaled(vars);
        match self.scaling {
            Psi32Scaling::InverseTau => base / tau,
            Psi32Scaling::Unit => base,
        }
    }

    /// `Ψ¹ + Ψ² + Ψ³¹ - Ψ³²`.
    pub fn derivative_condition(&self, vars: &DecisionVariables, tau: f64) -> DMatrix<f64> {
        symmetrize(self.psi1(vars, tau) + self.psi2(vars) + self.psi31(vars, tau) - self.psi32(vars, tau))
    }

    /// Schur form used for delay ranges (functional with `τ²` in front of the
    /// derivative terms, so `Ψ³²` carries no `τ` factor):
    /// `[[Ψ¹ + Ψ² - Ψ³², τ 𝒜^T ΣR], [τ ΣR 𝒜, -ΣR]]`.
    pub fn psi_bar(&self, vars: &DecisionVariables, tau: f64) -> DMatrix<f64> {
        let n = self.n;
        let dim = n * (self.big_m() + 2);
        let r_sum = self.r_sum(vars);
        let top = self.psi1(vars, tau) + self.psi2(vars) - self.psi32_unscaled(vars);
        let off = self.a_row(tau).transpose() * &r_sum * tau;
        let mut out = DMatrix::zeros(dim + n, dim + n);
        out.view_mut((0, 0), (dim, dim)).copy_from(&top);
        out.view_mut((0, dim), (dim, n)).copy_from(&off);
        out.view_mut((dim, 0), (n, dim)).copy_from(&off.transpose());
        out.view_mut((dim, dim), (n, n)).copy_from(&(-r_sum));
        symmetrize(out)
    }

    fn positivity_values(&self, vars: &DecisionVariables) -> Vec<(String, Sense, DMatrix<f64>)> {
        let mut out = Vec::new();
        for (j, q) in vars.q.iter().enumerate() {
            out.push((format!("Q_{j}"), Sense::PositiveDefinite, q.clone()));
        }
        for (j, r) in vars.r.iter().enumerate() {
            out.push((format!("R_{}", j + 1), Sense::PositiveDefinite, r.clone()));
        }
        out
    }

    /// Constraint values at a single delay, computed directly from the variables.
    pub fn pointwise_values(&self, vars: &DecisionVariables, tau: f64) -> Vec<(String, Sense, DMatrix<f64>)> {
        let mut out = vec![
            ("psi0".to_string(), Sense::PositiveDefinite, self.psi0(vars, tau)),
            ("derivative".to_string(), Sense::NegativeDefinite, self.derivative_condition(vars, tau)),
        ];
        out.extend(self.positivity_values(vars));
        out
    }

    /// Delay-range constraint values, computed directly from the variables.
    pub fn range_values(&self, vars: &DecisionVariables, low: f64, high: f64) -> Vec<(String, Sense, DMatrix<f64>)> {
        let mut out = vec![
            ("psi0(high)".to_string(), Sense::PositiveDefinite, self.psi0(vars, high)),
            ("psi_bar(low)".to_string(), Sense::NegativeDefinite, self.psi_bar(vars, low)),
            ("psi_bar(high)".to_string(), Sense::NegativeDefinite, self.psi_bar(vars, high)),
        ];
        out.extend(self.positivity_values(vars));
        out
    }

    /// Turn an affine evaluator into stored constant and coefficient blocks by
    /// probing each scalar variable in turn.
    fn tabulate<F>(&self, kind: ProblemKind, eval: F) -> LmiProblem
    where
        F: Fn(&DecisionVariables) -> Vec<(String, Sense, DMatrix<f64>)>,
    {
        let layout = self.layout();
        let zero = DecisionVariables::zeros(&layout);
        let base = eval(&zero);
        let mut constraints: Vec<LmiConstraint> = base
            .into_iter()
            .map(|(name, sense, constant)| LmiConstraint {
                name,
                sense,
                constant,
                coeffs: Vec::new(),
            })
            .collect();
        let mut y = vec![0.0; layout.num_scalars()];
        for idx in 0..y.len() {
            y[idx] = 1.0;
            let vars = DecisionVariables::from_flat(&layout, &y).expect("layout-sized vector");
            y[idx] = 0.0;
            for (c, (_, _, value)) in constraints.iter_mut().zip(eval(&vars)) {
                let coeff = value - &c.constant;
                if coeff.iter().any(|&v| v != 0.0) {
                    c.coeffs.push((idx, coeff));
                }
            }
        }
        LmiProblem {
            kind,
            params: self.params,
            layout,
            constraints,
        }
    }
}

/// Pointwise stability conditions at delay `tau`.
pub fn assemble_theorem1(sys: &DelaySystem, params: HierarchyParams, tau: f64) -> Result<LmiProblem> {
    assemble_theorem1_with(sys, params, tau, Psi32Scaling::default())
}

pub fn assemble_theorem1_with(
    sys: &DelaySystem,
    params: HierarchyParams,
    tau: f64,
    scaling: Psi32Scaling,
) -> Result<LmiProblem> {
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::InvalidInput(format!("delay must be positive, got {tau}")));
    }
    let asm = Assembler::new(sys, params, scaling)?;
    Ok(asm.tabulate(ProblemKind::Pointwise { tau }, |v| asm.pointwise_values(v, tau)))
}

/// Conditions guaranteeing stability for every constant delay in `[low, high]`.
///
/// The Schur form is affine in `τ` only when `A_d2 = 0`; for systems with a
/// distributed term the endpoint conditions are still assembled but no longer
/// cover the interior of the range.
pub fn assemble_delay_range(sys: &DelaySystem, params: HierarchyParams, low: f64, high: f64) -> Result<LmiProblem> {
    if !(low > 0.0 && low <= high && high.is_finite()) {
        return Err(Error::InvalidInput(format!("need 0 < low <= high, got [{low}, {high}]")));
    }
    let asm = Assembler::new(sys, params, Psi32Scaling::Unit)?;
    Ok(asm.tabulate(ProblemKind::DelayRange { low, high }, |v| asm.range_values(v, low, high)))
}

/// Number of free scalar decision variables.
pub fn nodv(params: &HierarchyParams, n_x: usize) -> usize {
    VariableLayout::new(params, n_x).num_scalars()
}

/// Constraint values at `vars` from the stored affine data.
pub fn evaluate_at(problem: &LmiProblem, vars: &DecisionVariables) -> Result<Vec<EvaluatedConstraint>> {
    let y = vars.to_flat(&problem.layout)?;
    evaluate_flat(problem, &y)
}

pub fn evaluate_flat(problem: &LmiProblem, y: &[f64]) -> Result<Vec<EvaluatedConstraint>> {
    if y.len() != problem.layout.num_scalars() {
        return Err(Error::DimensionMismatch(format!(
            "expected {} scalars, got {}",
            problem.layout.num_scalars(),
            y.len()
        )));
    }
    Ok(problem
        .constraints
        .iter()
        .map(|c| {
            let mut value = c.constant.clone();
            for (idx, coeff) in &c.coeffs {
                if y[*idx] != 0.0 {
                    value += coeff * y[*idx];
                }
            }
            EvaluatedConstraint {
                name: c.name.clone(),
                sense: c.sense,
                value: symmetrize(value),
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn example1() -> DelaySystem {
        DelaySystem::new(
            DMatrix::from_row_slice(2, 2, &[-2.0, 0.0, 0.0, -0.9]),
            DMatrix::from_row_slice(2, 2, &[-1.0, 0.0, -1.0, -1.0]),
            None,
        )
        .unwrap()
    }

    fn example2() -> DelaySystem {
        DelaySystem::new(
            DMatrix::from_row_slice(2, 2, &[0.2, 0.0, 0.2, 0.1]),
            DMatrix::zeros(2, 2),
            Some(DMatrix::from_row_slice(2, 2, &[-1.0, 0.0, -1.0, -1.0])),
        )
        .unwrap()
    }

    fn pseudo_random_vars(layout: &VariableLayout, seed: u64) -> DecisionVariables {
        let mut state = seed;
        let y: Vec<f64> = (0..layout.num_scalars())
            .map(|_| {
                state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                ((state >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
            })
            .collect();
        DecisionVariables::from_flat(layout, &y).unwrap()
    }

    #[test]
    fn nodv_counts() {
        assert_eq!(nodv(&HierarchyParams::new(3, 1).unwrap(), 2), 48);
        assert_eq!(nodv(&HierarchyParams::new(1, 0).unwrap(), 1), 5);
        assert_eq!(nodv(&HierarchyParams::new(1, 1).unwrap(), 2), 22);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(HierarchyParams::new(0, 1).is_err());
        let bad = DelaySystem::new(DMatrix::zeros(2, 2), DMatrix::zeros(3, 3), None);
        assert!(matches!(bad, Err(Error::DimensionMismatch(_))));
        let p = HierarchyParams::new(1, 1).unwrap();
        assert!(assemble_theorem1(&example1(), p, 0.0).is_err());
        assert!(assemble_delay_range(&example1(), p, 2.0, 1.0).is_err());
    }

    #[test]
    fn block_dimensions() {
        for (big_m, m) in [(1, 0), (1, 1), (2, 1), (3, 2), (4, 4)] {
            let p = HierarchyParams::new(big_m, m).unwrap();
            let prob = assemble_theorem1(&example1(), p, 1.0).unwrap();
            assert_eq!(prob.constraints[0].size(), 2 * (big_m + 1));
            assert_eq!(prob.constraints[1].size(), 2 * (big_m + 2));
            assert_eq!(prob.constraints.len(), 2 + (m + 1) + (m + 1));
            let asm = Assembler::new(&example1(), p, Psi32Scaling::InverseTau).unwrap();
            assert_eq!(asm.gamma(1.0).ncols(), 2 * (big_m + 2));
        }
    }

    #[test]
    fn xi0_is_identity_inside_psi0() {
        // With only Q_0 = I and P = 0, Ψ⁰ = diag(0, diag(1, 3, ..., 2M-1) ⊗ I).
        let p = HierarchyParams::new(3, 0).unwrap();
        let asm = Assembler::new(&example1(), p, Psi32Scaling::InverseTau).unwrap();
        let mut vars = DecisionVariables::zeros(&asm.layout());
        vars.q[0] = DMatrix::identity(2, 2);
        let psi0 = asm.psi0(&vars, 2.0);
        let mut expected = DMatrix::zeros(8, 8);
        for l in 0..3 {
            for i in 0..2 {
                expected[(2 + 2 * l + i, 2 + 2 * l + i)] = (2 * l + 1) as f64;
            }
        }
        assert_relative_eq!(psi0, expected, epsilon = 1e-14);
    }

    #[test]
    fn psi2_leading_blocks() {
        let p = HierarchyParams::new(2, 2).unwrap();
        let asm = Assembler::new(&example1(), p, Psi32Scaling::InverseTau).unwrap();
        let vars = pseudo_random_vars(&asm.layout(), 3);
        let psi2 = asm.psi2(&vars);
        let q_sum = &vars.q[0] + &vars.q[1] + &vars.q[2];
        assert_relative_eq!(psi2.view((0, 0), (2, 2)).clone_owned(), q_sum, epsilon = 1e-14);
        assert_relative_eq!(psi2.view((2, 2), (2, 2)).clone_owned(), -&vars.q[0], epsilon = 1e-14);
    }

    #[test]
    fn specialization_has_expected_sizes() {
        let p = HierarchyParams::new(1, 0).unwrap();
        let prob = assemble_theorem1(&example1(), p, 1.0).unwrap();
        assert_eq!(prob.constraints[0].size(), 4);
        assert_eq!(prob.constraints[1].size(), 6);
    }

    #[test]
    fn a_row_distributed_column() {
        let asm = Assembler::new(&example1(), HierarchyParams::new(2, 1).unwrap(), Psi32Scaling::InverseTau).unwrap();
        let a = asm.a_row(3.0);
        assert!(a.view((0, 4), (2, 2)).iter().all(|&v| v == 0.0));
        let explicit = DelaySystem::new(example1().a, example1().a_d1, Some(DMatrix::zeros(2, 2))).unwrap();
        assert_eq!(explicit, example1());
        let asm2 = Assembler::new(&example2(), HierarchyParams::new(2, 1).unwrap(), Psi32Scaling::InverseTau).unwrap();
        assert_relative_eq!(asm2.a_row(3.0).view((0, 4), (2, 2)).clone_owned(), &example2().a_d2 * 3.0);
    }

    #[test]
    fn tabulated_matches_direct_and_is_symmetric() {
        for sys in [example1(), example2()] {
            let p = HierarchyParams::new(2, 1).unwrap();
            let prob = assemble_theorem1(&sys, p, 1.7).unwrap();
            let asm = Assembler::new(&sys, p, Psi32Scaling::InverseTau).unwrap();
            let vars = pseudo_random_vars(&prob.layout, 11);
            let via_table = evaluate_at(&prob, &vars).unwrap();
            let direct = asm.pointwise_values(&vars, 1.7);
            for (t, (_, _, d)) in via_table.iter().zip(direct) {
                assert_eq!(t.value, t.value.transpose());
                assert_relative_eq!(t.value, d, epsilon = 1e-11);
            }
        }
    }

    #[test]
    fn evaluation_is_affine() {
        let p = HierarchyParams::new(2, 1).unwrap();
        let prob = assemble_theorem1(&example2(), p, 0.9).unwrap();
        let u = pseudo_random_vars(&prob.layout, 1);
        let v = pseudo_random_vars(&prob.layout, 2);
        let lam = 0.3;
        let yu = u.to_flat(&prob.layout).unwrap();
        let yv = v.to_flat(&prob.layout).unwrap();
        let mix: Vec<f64> = yu.iter().zip(&yv).map(|(a, b)| lam * a + (1.0 - lam) * b).collect();
        let em = evaluate_flat(&prob, &mix).unwrap();
        let eu = evaluate_flat(&prob, &yu).unwrap();
        let ev = evaluate_flat(&prob, &yv).unwrap();
        for ((m, a), b) in em.iter().zip(&eu).zip(&ev) {
            let expected = &a.value * lam + &b.value * (1.0 - lam);
            assert!((&m.value - expected).abs().max() <= 1e-12);
        }
        let zero = evaluate_at(&prob, &DecisionVariables::zeros(&prob.layout)).unwrap();
        assert!(zero.iter().all(|c| c.value.iter().all(|&x| x == 0.0)));
    }

    #[test]
    fn psi_bar_is_affine_in_tau_without_distributed_term() {
        let p = HierarchyParams::new(2, 1).unwrap();
        let asm = Assembler::new(&example1(), p, Psi32Scaling::Unit).unwrap();
        let vars = pseudo_random_vars(&asm.layout(), 5);
        let (lo, hi) = (0.4, 2.6);
        let mid = asm.psi_bar(&vars, 0.5 * (lo + hi));
        let avg = (asm.psi_bar(&vars, lo) + asm.psi_bar(&vars, hi)) * 0.5;
        assert_relative_eq!(mid, avg, epsilon = 1e-12);
    }

    #[test]
    fn flat_roundtrip() {
        let layout = VariableLayout::new(&HierarchyParams::new(2, 2).unwrap(), 2);
        let vars = pseudo_random_vars(&layout, 9);
        let y = vars.to_flat(&layout).unwrap();
        assert_eq!(DecisionVariables::from_flat(&layout, &y).unwrap(), vars);
        assert!(DecisionVariables::from_flat(&layout, &y[1..]).is_err());
    }
}
