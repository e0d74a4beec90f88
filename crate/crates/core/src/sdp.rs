//! Margin-maximization semidefinite programs and a dense primal-dual solver.
//!
//! A strict LMI system `G_k(y) ≻ 0` is decided through
//!
//! ```text
//! maximize t  subject to  G_k(y) - t I ⪰ 0,  |y_i| <= B.
//! ```
//!
//! The program is solved in the standard dual form
//! `max b^T z  s.t.  C - Σ z_i A_i ⪰ 0` with `z = (y, t)` by an
//! infeasible-start path-following method (HKM search direction,
//! Mehrotra predictor-corrector). Symmetric matrices are handled through
//! `svec` with `√2`-scaled off-diagonals, so Euclidean inner products of
//! vectors match trace inner products of matrices.

use nalgebra::{Cholesky, DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::lmi::{evaluate_flat, DecisionVariables, LmiProblem, Sense};

/// `constant + Σ_i y_i coeff_i - t I ⪰ 0`.
#[derive(Debug, Clone)]
pub struct MarginBlock {
    pub name: String,
    pub constant: DMatrix<f64>,
    pub coeffs: Vec<(usize, DMatrix<f64>)>,
}

impl MarginBlock {
    pub fn size(&self) -> usize {
        self.constant.nrows()
    }

    pub fn value(&self, y: &[f64]) -> DMatrix<f64> {
        let mut v = self.constant.clone();
        for (i, c) in &self.coeffs {
            v += c * y[*i];
        }
        v
    }
}

#[derive(Debug, Clone)]
pub struct ConeProgram {
    pub num_vars: usize,
    pub blocks: Vec<MarginBlock>,
    /// Box bound on `‖y‖_∞`.
    pub bound: f64,
}

impl ConeProgram {
    pub fn new(num_vars: usize, blocks: Vec<MarginBlock>, bound: f64) -> Result<Self> {
        if blocks.is_empty() {
            return Err(Error::InvalidInput("program needs at least one block".into()));
        }
        if !(bound > 0.0 && bound.is_finite()) {
            return Err(Error::InvalidInput(format!("box bound must be positive and finite, got {bound}")));
        }
        for b in &blocks {
            let n = b.size();
            let sym_ok = |m: &DMatrix<f64>| {
                m.shape() == (n, n) && (m - m.transpose()).abs().max() <= 1e-12 * (1.0 + m.abs().max())
            };
            if !sym_ok(&b.constant) {
                return Err(Error::NonSymmetric(b.name.clone()));
            }
            for (i, c) in &b.coeffs {
                if *i >= num_vars {
                    return Err(Error::DimensionMismatch(format!("variable index {i} out of range in {}", b.name)));
                }
                if !sym_ok(c) {
                    return Err(Error::NonSymmetric(format!("{} (coefficient {i})", b.name)));
                }
            }
        }
        Ok(Self { num_vars, blocks, bound })
    }

    /// `max(1, largest constant-block norm)`.
    pub fn scale(&self) -> f64 {
        self.blocks.iter().map(|b| b.constant.norm()).fold(1.0, f64::max)
    }

    /// Scale for recognising convergence to a zero margin: `max(scale, B)`
    /// for homogeneous programs, whose optimal margin is proportional to `B`.
    fn zero_margin_scale(&self) -> f64 {
        if self.is_homogeneous() {
            self.scale().max(self.bound)
        } else {
            self.scale()
        }
    }

    pub fn is_homogeneous(&self) -> bool {
        self.blocks.iter().all(|b| b.constant.iter().all(|&v| v == 0.0))
    }

    /// `min_k λ_min(G_k(y))`.
    pub fn margin_at(&self, y: &[f64]) -> f64 {
        self.blocks
            .iter()
            .map(|b| min_eigenvalue(&b.value(y)))
            .fold(f64::INFINITY, f64::min)
    }
}

/// Turn strict LMIs into a margin program: `≻ 0` blocks stay, `≺ 0` blocks are negated.
pub fn to_margin_program(problem: &LmiProblem, bound: f64) -> Result<ConeProgram> {
    let blocks = problem
        .constraints
        .iter()
        .map(|c| {
            let sign = match c.sense {
                Sense::PositiveDefinite => 1.0,
                Sense::NegativeDefinite => -1.0,
            };
            MarginBlock {
                name: c.name.clone(),
                constant: &c.constant * sign,
                coeffs: c.coeffs.iter().map(|(i, m)| (*i, m * sign)).collect(),
            }
        })
        .collect();
    ConeProgram::new(problem.layout.num_scalars(), blocks, bound)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SolverOptions {
    /// Feasibility threshold, relative to the program scale.
    pub feas_threshold: f64,
    /// Duality-gap tolerance, relative to `max(scale, |t|)`.
    pub gap_tol: f64,
    /// Relative primal/dual residual tolerance.
    pub residual_tol: f64,
    /// Box bound `B`.
    pub bound: f64,
    pub max_iterations: usize,
    /// Fraction of the distance to the cone boundary taken per step.
    pub step_factor: f64,
    /// Print one line per iteration to stderr.
    pub log: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            feas_threshold: 1e-7,
            gap_tol: 1e-8,
            residual_tol: 1e-9,
            bound: 1e4,
            max_iterations: 120,
            step_factor: 0.98,
            log: false,
        }
    }
}

impl SolverOptions {
    /// Defaults overridden by `DELAYBOUND_FEAS_THRESHOLD`, `DELAYBOUND_GAP_TOL`,
    /// `DELAYBOUND_BOX_BOUND`, `DELAYBOUND_MAX_ITER` and `DELAYBOUND_SOLVER_LOG`.
    pub fn from_env() -> Result<Self> {
        let mut opts = Self::default();
        let read = |key: &str| -> Result<Option<f64>> {
            match std::env::var(key) {
                Ok(v) => v
                    .trim()
                    .parse::<f64>()
                    .map(Some)
                    .map_err(|_| Error::InvalidInput(format!("{key}: cannot parse {v:?} as a number"))),
                Err(_) => Ok(None),
            }
        };
        if let Some(v) = read("DELAYBOUND_FEAS_THRESHOLD")? {
            opts.feas_threshold = v;
        }
        if let Some(v) = read("DELAYBOUND_GAP_TOL")? {
            opts.gap_tol = v;
        }
        if let Some(v) = read("DELAYBOUND_BOX_BOUND")? {
            opts.bound = v;
        }
        if let Some(v) = read("DELAYBOUND_MAX_ITER")? {
            opts.max_iterations = v as usize;
        }
        if std::env::var("DELAYBOUND_SOLVER_LOG").is_ok_and(|v| v != "0") {
            opts.log = true;
        }
        opts.validate()?;
        Ok(opts)
    }

    pub fn validate(&self) -> Result<()> {
        let pos = |v: f64| v > 0.0 && v.is_finite();
        if !(pos(self.feas_threshold) && pos(self.gap_tol) && pos(self.residual_tol) && pos(self.bound)) {
            return Err(Error::InvalidInput("solver thresholds must be positive and finite".into()));
        }
        if !(self.step_factor > 0.0 && self.step_factor < 1.0) {
            return Err(Error::InvalidInput("step factor must lie in (0, 1)".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Feasible,
    Infeasible,
    NumericallyInconclusive,
}

impl std::fmt::Display for Status {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Status::Feasible => "feasible",
            Status::Infeasible => "infeasible",
            Status::NumericallyInconclusive => "numerically-inconclusive",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeasibilityResult {
    pub status: Status,
    /// `min_k λ_min(G_k(y))` at the returned `y`.
    pub margin: f64,
    /// Best upper bound on the optimal margin seen at termination.
    pub upper_bound: f64,
    /// Decision scalars `y`.
    pub y: Vec<f64>,
    pub iterations: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub gap: f64,
    pub converged: bool,
}

impl FeasibilityResult {
    pub fn certificate(&self, problem: &LmiProblem) -> Result<DecisionVariables> {
        DecisionVariables::from_flat(&problem.layout, &self.y)
    }
}

/// Solve an assembled LMI problem with the given options.
pub fn solve_problem(problem: &LmiProblem, opts: &SolverOptions) -> Result<FeasibilityResult> {
    solve(&to_margin_program(problem, opts.bound)?, opts)
}

/// Re-evaluate the constraints at the certificate and check every margin is strictly positive.
pub fn verify_certificate(problem: &LmiProblem, result: &FeasibilityResult) -> bool {
    if result.status != Status::Feasible {
        return false;
    }
    match evaluate_flat(problem, &result.y) {
        Ok(values) => values.iter().all(|c| c.margin() > 0.0),
        Err(_) => false,
    }
}

pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return f64::INFINITY;
    }
    m.clone().symmetric_eigenvalues().min()
}

fn svec_len(n: usize) -> usize {
    n * (n + 1) / 2
}

/// Upper triangle, column by column, off-diagonals scaled by `√2`.
pub fn svec(m: &DMatrix<f64>) -> DVector<f64> {
    let n = m.nrows();
    let mut v = DVector::zeros(svec_len(n));
    let mut k = 0;
    for j in 0..n {
        for i in 0..=j {
            v[k] = if i == j { m[(i, j)] } else { std::f64::consts::SQRT_2 * 0.5 * (m[(i, j)] + m[(j, i)]) };
            k += 1;
        }
    }
    v
}

pub fn smat(v: &[f64], n: usize) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(n, n);
    let mut k = 0;
    for j in 0..n {
        for i in 0..=j {
            if i == j {
                m[(i, i)] = v[k];
            } else {
                let x = v[k] / std::f64::consts::SQRT_2;
                m[(i, j)] = x;
                m[(j, i)] = x;
            }
            k += 1;
        }
    }
    m
}

fn sym(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

fn inner(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.dot(b)
}

/// One semidefinite block of the standard form `C - Σ z_i A_i ⪰ 0`.
struct PsdBlock {
    n: usize,
    c: DMatrix<f64>,
    /// `A_i` for every `z` index where it is nonzero.
    a: Vec<(usize, DMatrix<f64>)>,
    /// Rows `svec(A_i)^T`, one per `z` index.
    sa: DMatrix<f64>,
}

struct StandardForm {
    nz: usize,
    b: DVector<f64>,
    psd: Vec<PsdBlock>,
    /// Linear block `c - al^T z ≥ 0`.
    lp_c: DVector<f64>,
    lp_a: DMatrix<f64>,
}

impl StandardForm {
    fn from_program(prog: &ConeProgram) -> Self {
        let p = prog.num_vars;
        let nz = p + 1;
        let mut b = DVector::zeros(nz);
        b[p] = 1.0;
        let psd = prog
            .blocks
            .iter()
            .map(|blk| {
                let n = blk.size();
                let mut a: Vec<(usize, DMatrix<f64>)> = blk
                    .coeffs
                    .iter()
                    .filter(|(_, m)| m.iter().any(|&v| v != 0.0))
                    .map(|(i, m)| (*i, -sym(m)))
                    .collect();
                a.push((p, DMatrix::identity(n, n)));
                let mut sa = DMatrix::zeros(nz, svec_len(n));
                for (i, m) in &a {
                    let row = svec(m);
                    for (k, v) in row.iter().enumerate() {
                        sa[(*i, k)] += v;
                    }
                }
                PsdBlock {
                    n,
                    c: sym(&blk.constant),
                    a,
                    sa,
                }
            })
            .collect();
        let mut lp_a = DMatrix::zeros(nz, 2 * p);
        for i in 0..p {
            lp_a[(i, i)] = 1.0;
            lp_a[(i, p + i)] = -1.0;
        }
        Self {
            nz,
            b,
            psd,
            lp_c: DVector::from_element(2 * p, prog.bound),
            lp_a,
        }
    }

    fn total_dim(&self) -> usize {
        self.psd.iter().map(|b| b.n).sum::<usize>() + self.lp_c.len()
    }

    /// `𝒜(X, x)`
    fn op(&self, xs: &[DMatrix<f64>], x: &DVector<f64>) -> DVector<f64> {
        let mut out = &self.lp_a * x;
        for (blk, xm) in self.psd.iter().zip(xs) {
            out += &blk.sa * svec(xm);
        }
        out
    }

    /// `𝒜^T z` for block `k`.
    fn adj_block(&self, k: usize, z: &DVector<f64>) -> DMatrix<f64> {
        let blk = &self.psd[k];
        let v = blk.sa.transpose() * z;
        smat(v.as_slice(), blk.n)
    }
}

struct Iterate {
    z: DVector<f64>,
    xs: Vec<DMatrix<f64>>,
    ss: Vec<DMatrix<f64>>,
    x: DVector<f64>,
    s: DVector<f64>,
}

/// Largest `α` with `X + α ΔX ⪰ 0`, or infinity.
fn max_step_psd(x: &DMatrix<f64>, dx: &DMatrix<f64>) -> f64 {
    let chol = match Cholesky::new(x.clone()) {
        Some(c) => c,
        None => return 0.0,
    };
    let l = chol.l();
    let n = x.nrows();
    let linv = match l.solve_lower_triangular(&DMatrix::identity(n, n)) {
        Some(m) => m,
        None => return 0.0,
    };
    let m = sym(&(&linv * dx * linv.transpose()));
    let lam = min_eigenvalue(&m);
    if lam >= 0.0 {
        f64::INFINITY
    } else {
        -1.0 / lam
    }
}

fn max_step_lp(x: &DVector<f64>, dx: &DVector<f64>) -> f64 {
    x.iter()
        .zip(dx.iter())
        .filter(|(_, d)| **d < 0.0)
        .map(|(v, d)| -v / d)
        .fold(f64::INFINITY, f64::min)
}

struct Direction {
    dz: DVector<f64>,
    dxs: Vec<DMatrix<f64>>,
    dss: Vec<DMatrix<f64>>,
    dx: DVector<f64>,
    ds: DVector<f64>,
}

fn solve_spd(m: &DMatrix<f64>, rhs: &DVector<f64>) -> Option<DVector<f64>> {
    let diag_max = m.diagonal().iter().fold(0.0f64, |a, v| a.max(v.abs())).max(1e-300);
    let mut reg = 0.0;
    for _ in 0..6 {
        let mut mm = m.clone();
        for i in 0..mm.nrows() {
            mm[(i, i)] += reg;
        }
        if let Some(ch) = Cholesky::new(mm) {
            let sol = ch.solve(rhs);
            if sol.iter().all(|v| v.is_finite()) {
                return Some(sol);
            }
        }
        reg = if reg == 0.0 { 1e-14 * diag_max } else { reg * 100.0 };
    }
    m.clone().lu().solve(rhs).filter(|v| v.iter().all(|x| x.is_finite()))
}

/// Solve a margin program.
pub fn solve(prog: &ConeProgram, opts: &SolverOptions) -> Result<FeasibilityResult> {
    opts.validate()?;
    let sf = StandardForm::from_program(prog);
    let p = prog.num_vars;
    let nz = sf.nz;
    let scale = prog.scale();
    let loose_scale = prog.zero_margin_scale();
    let threshold = opts.feas_threshold * scale;
    let homogeneous = prog.is_homogeneous();
    // For homogeneous programs, upper bounds below this are indistinguishable from a zero margin.
    let zero_band = threshold.max(opts.gap_tol * loose_scale);
    let total = sf.total_dim() as f64;

    // Starting point: dual feasible with y = 0 and t chosen so that every
    // `S_k = C_k - t I` is at least `η_k I`.
    let it = {
        let mut xs = Vec::new();
        let mut etas = Vec::new();
        for blk in &sf.psd {
            let nn = blk.n as f64;
            let mut xi = 10.0f64.max(nn.sqrt());
            let mut eta = 10.0f64.max(nn.sqrt()).max(blk.c.norm());
            for (i, a) in &blk.a {
                let an = a.norm();
                xi = xi.max(nn * (1.0 + sf.b[*i].abs()) / (1.0 + an));
                eta = eta.max(an);
            }
            eta = (eta / nn.sqrt()).max(1.0);
            xs.push(DMatrix::identity(blk.n, blk.n) * xi);
            etas.push(eta);
        }
        let shift = sf
            .psd
            .iter()
            .zip(&etas)
            .map(|(blk, eta)| eta - min_eigenvalue(&blk.c))
            .fold(f64::NEG_INFINITY, f64::max);
        let mut z = DVector::zeros(nz);
        z[p] = -shift;
        let ss = sf
            .psd
            .iter()
            .map(|blk| &blk.c + DMatrix::identity(blk.n, blk.n) * shift)
            .collect();
        Iterate {
            z,
            xs,
            ss,
            x: DVector::from_element(2 * p, 1.0),
            s: sf.lp_c.clone(),
        }
    };
    let mut it = it;

    let b_norm = 1.0 + sf.b.norm();
    let c_norm = 1.0 + sf.psd.iter().map(|b| b.c.norm_squared()).sum::<f64>().sqrt() + sf.lp_c.norm();

    let mut iterations = 0;
    let mut converged = false;
    let mut pinf;
    let mut dinf;
    let mut gap;
    let mut pobj;
    let mut dobj;
    let mut best: Option<(f64, DVector<f64>)> = None;
    let mut stall = 0;
    let mut best_merit = f64::INFINITY;
    let mut since_best = 0;
    let mut loose = false;

    loop {
        // Residuals.
        let rp = &sf.b - sf.op(&it.xs, &it.x);
        let rds: Vec<DMatrix<f64>> = (0..sf.psd.len())
            .map(|k| &sf.psd[k].c - &it.ss[k] - sf.adj_block(k, &it.z))
            .collect();
        let rd_lp = &sf.lp_c - &it.s - sf.lp_a.transpose() * &it.z;
        pinf = rp.norm() / b_norm;
        dinf = (rds.iter().map(|m| m.norm_squared()).sum::<f64>() + rd_lp.norm_squared()).sqrt() / c_norm;
        let xs_dot: f64 = it.xs.iter().zip(&it.ss).map(|(x, s)| inner(x, s)).sum::<f64>() + it.x.dot(&it.s);
        pobj = sf.psd.iter().zip(&it.xs).map(|(b, x)| inner(&b.c, x)).sum::<f64>() + sf.lp_c.dot(&it.x);
        dobj = sf.b.dot(&it.z);
        gap = xs_dot.max((pobj - dobj).abs());
        let mu = xs_dot / total;
        let gap_scale = scale.max(dobj.abs());

        // Track the best certified margin seen.
        let y: Vec<f64> = it.z.iter().take(p).copied().collect();
        if pinf < 1e-3 || dinf < 1e-3 || iterations > 0 {
            let m = prog.margin_at(&y);
            if best.as_ref().map_or(true, |(bm, _)| m > *bm) {
                best = Some((m, it.z.clone()));
            }
        }

        if opts.log {
            eprintln!(
                "iter {iterations:3}  t {dobj:+.10e}  pobj {pobj:+.10e}  pinf {pinf:.2e}  dinf {dinf:.2e}  gap {gap:.2e}"
            );
        }

        let within = |s: f64| {
            gap <= opts.gap_tol * gap_scale.max(s) && pinf <= opts.residual_tol * s && dinf <= opts.residual_tol * s
        };
        if within(scale) {
            converged = true;
            break;
        }
        loose = within(loose_scale);
        if homogeneous && loose && pobj.max(dobj) < zero_band {
            break;
        }
        let merit = gap / gap_scale.max(1.0) + pinf + dinf;
        if merit < 0.99 * best_merit {
            best_merit = merit;
            since_best = 0;
        } else {
            since_best += 1;
        }
        let stalled = since_best >= 10;
        if iterations >= opts.max_iterations || stall >= 5 || stalled {
            break;
        }
        iterations += 1;

        // Factorizations.
        let mut sinvs = Vec::with_capacity(sf.psd.len());
        let mut ok = true;
        for s in &it.ss {
            match Cholesky::new(s.clone()) {
                Some(ch) => sinvs.push(sym(&ch.inverse())),
                None => {
                    ok = false;
                    break;
                }
            }
        }
        if !ok {
            break;
        }

        // Schur complement matrix.
        let mut schur = DMatrix::zeros(nz, nz);
        for (k, blk) in sf.psd.iter().enumerate() {
            let x = &it.xs[k];
            let sinv = &sinvs[k];
            let mut cols = DMatrix::zeros(svec_len(blk.n), nz);
            for (j, a) in &blk.a {
                let w = sym(&(x * a * sinv));
                cols.set_column(*j, &svec(&w));
            }
            schur += &blk.sa * cols;
        }
        if p > 0 {
            let d = it.x.component_div(&it.s);
            let scaled = DMatrix::from_fn(nz, 2 * p, |i, j| sf.lp_a[(i, j)] * d[j]);
            schur += scaled * sf.lp_a.transpose();
        }
        let schur = sym(&schur);

        let direction = |sigma_mu: f64, corr: Option<(&[DMatrix<f64>], &DVector<f64>)>| -> Option<Direction> {
            // R = σμ S⁻¹ - X - sym(X Rd S⁻¹) - corr
            let mut rhs = rp.clone();
            let mut rs = Vec::with_capacity(sf.psd.len());
            for k in 0..sf.psd.len() {
                let x = &it.xs[k];
                let sinv = &sinvs[k];
                let mut r = sinv * sigma_mu - x - sym(&(x * &rds[k] * sinv));
                if let Some((c, _)) = corr {
                    r -= &c[k];
                }
                rhs -= &sf.psd[k].sa * svec(&r);
                rs.push(r);
            }
            let mut r_lp = DVector::zeros(2 * p);
            for i in 0..2 * p {
                r_lp[i] = sigma_mu / it.s[i] - it.x[i] - it.x[i] * rd_lp[i] / it.s[i];
                if let Some((_, c)) = corr {
                    r_lp[i] -= c[i];
                }
            }
            rhs -= &sf.lp_a * &r_lp;
            let dz = solve_spd(&schur, &rhs)?;
            let mut dxs = Vec::new();
            let mut dss = Vec::new();
            for k in 0..sf.psd.len() {
                let ds = &rds[k] - sf.adj_block(k, &dz);
                let dx = &rs[k] + sym(&(&it.xs[k] * (sf.adj_block(k, &dz)) * &sinvs[k]));
                dxs.push(sym(&dx));
                dss.push(sym(&ds));
            }
            let at_dz = sf.lp_a.transpose() * &dz;
            let ds_lp = &rd_lp - &at_dz;
            let dx_lp = DVector::from_fn(2 * p, |i, _| r_lp[i] + it.x[i] * at_dz[i] / it.s[i]);
            Some(Direction {
                dz,
                dxs,
                dss,
                dx: dx_lp,
                ds: ds_lp,
            })
        };

        let step_lengths = |d: &Direction| -> (f64, f64) {
            let mut ap = max_step_lp(&it.x, &d.dx);
            let mut ad = max_step_lp(&it.s, &d.ds);
            for k in 0..sf.psd.len() {
                ap = ap.min(max_step_psd(&it.xs[k], &d.dxs[k]));
                ad = ad.min(max_step_psd(&it.ss[k], &d.dss[k]));
            }
            (ap, ad)
        };

        // Predictor.
        let Some(pred) = direction(0.0, None) else { break };
        let (ap, ad) = step_lengths(&pred);
        let (ap, ad) = (ap.min(1.0), ad.min(1.0));
        let mut mu_aff = 0.0;
        for k in 0..sf.psd.len() {
            let xn = &it.xs[k] + &pred.dxs[k] * ap;
            let sn = &it.ss[k] + &pred.dss[k] * ad;
            mu_aff += inner(&xn, &sn);
        }
        mu_aff += (&it.x + &pred.dx * ap).dot(&(&it.s + &pred.ds * ad));
        mu_aff /= total;
        let sigma = if mu > 0.0 { (mu_aff / mu).clamp(0.0, 1.0).powi(3) } else { 0.0 };

        // Corrector.
        let corr_psd: Vec<DMatrix<f64>> = (0..sf.psd.len())
            .map(|k| sym(&(&pred.dxs[k] * &pred.dss[k] * &sinvs[k])))
            .collect();
        let corr_lp = pred.dx.component_mul(&pred.ds).component_div(&it.s);
        let Some(dir) = direction(sigma * mu, Some((&corr_psd, &corr_lp))) else { break };
        let (ap, ad) = step_lengths(&dir);
        let ap = (opts.step_factor * ap).min(1.0);
        let ad = (opts.step_factor * ad).min(1.0);
        if ap < 1e-10 && ad < 1e-10 {
            stall += 1;
        } else {
            stall = 0;
        }

        it.z += &dir.dz * ad;
        for k in 0..sf.psd.len() {
            it.xs[k] = sym(&(&it.xs[k] + &dir.dxs[k] * ap));
            it.ss[k] = sym(&(&it.ss[k] + &dir.dss[k] * ad));
        }
        it.x += &dir.dx * ap;
        it.s += &dir.ds * ad;
    }

    // Final certificate: the final iterate if it certifies at least as well as the best seen.
    let y_final: Vec<f64> = it.z.iter().take(p).copied().collect();
    let mut margin = prog.margin_at(&y_final);
    let mut y = y_final;
    if let Some((bm, bz)) = best {
        if bm > margin {
            margin = bm;
            y = bz.iter().take(p).copied().collect();
        }
    }
    let converged = converged || loose;
    let upper_bound = if converged { pobj.max(dobj) } else { f64::INFINITY };
    let status = if margin >= threshold {
        Status::Feasible
    } else if converged && ((homogeneous && upper_bound < zero_band) || upper_bound <= -threshold) {
        Status::Infeasible
    } else {
        Status::NumericallyInconclusive
    };
    Ok(FeasibilityResult {
        status,
        margin,
        upper_bound,
        y,
        iterations,
        primal_residual: pinf,
        dual_residual: dinf,
        gap,
        converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn d(rows: usize, v: &[f64]) -> DMatrix<f64> {
        DMatrix::from_row_slice(rows, rows, v)
    }

    fn block(name: &str, constant: DMatrix<f64>, coeffs: Vec<(usize, DMatrix<f64>)>) -> MarginBlock {
        MarginBlock {
            name: name.into(),
            constant,
            coeffs,
        }
    }

    #[test]
    fn svec_matches_trace_inner_product() {
        let a = d(3, &[1.0, 2.0, 3.0, 2.0, 5.0, -1.0, 3.0, -1.0, 4.0]);
        let b = d(3, &[0.5, -1.0, 0.0, -1.0, 2.0, 7.0, 0.0, 7.0, -3.0]);
        assert_relative_eq!(svec(&a).dot(&svec(&b)), (&a * &b).trace(), epsilon = 1e-12);
        assert_eq!(smat(svec(&a).as_slice(), 3), a);
    }

    #[test]
    fn identity_scaled_variable() {
        let prog = ConeProgram::new(1, vec![block("y I", DMatrix::zeros(2, 2), vec![(0, DMatrix::identity(2, 2))])], 1.0)
            .unwrap();
        let r = solve(&prog, &SolverOptions::default()).unwrap();
        assert_eq!(r.status, Status::Feasible);
        assert!((r.margin - 1.0).abs() <= 1e-7);
    }

    #[test]
    fn contradictory_signs_are_infeasible() {
        let prog = ConeProgram::new(1, vec![block("diag", DMatrix::zeros(2, 2), vec![(0, d(2, &[1.0, 0.0, 0.0, -1.0]))])], 1e4)
            .unwrap();
        let r = solve(&prog, &SolverOptions::default()).unwrap();
        assert_eq!(r.status, Status::Infeasible);
        assert!(r.margin <= 1e-9);
    }

    #[test]
    fn constant_block_gives_smallest_eigenvalue() {
        let prog = ConeProgram::new(0, vec![block("c", d(2, &[2.0, 0.0, 0.0, 5.0]), vec![])], 1.0).unwrap();
        let r = solve(&prog, &SolverOptions::default()).unwrap();
        assert_eq!(r.status, Status::Feasible);
        assert!((r.margin - 2.0).abs() <= 1e-7);
    }

    #[test]
    fn rejects_nonsymmetric_input() {
        let r = ConeProgram::new(0, vec![block("c", d(2, &[1.0, 1.0, 0.0, 1.0]), vec![])], 1.0);
        assert!(matches!(r, Err(Error::NonSymmetric(_))));
        assert!(ConeProgram::new(0, vec![], 1.0).is_err());
    }

    fn example1() -> crate::lmi::DelaySystem {
        crate::lmi::DelaySystem::new(
            d(2, &[-2.0, 0.0, 0.0, -0.9]),
            d(2, &[-1.0, 0.0, -1.0, -1.0]),
            None,
        )
        .unwrap()
    }

    #[test]
    fn example1_first_level() {
        let params = crate::lmi::HierarchyParams::new(1, 1).unwrap();
        let opts = SolverOptions::default();
        let feasible = crate::lmi::assemble_theorem1(&example1(), params, 6.0).unwrap();
        let r = solve_problem(&feasible, &opts).unwrap();
        assert_eq!(r.status, Status::Feasible, "{r:?}");
        assert!(verify_certificate(&feasible, &r));
        let infeasible = crate::lmi::assemble_theorem1(&example1(), params, 6.2).unwrap();
        let r = solve_problem(&infeasible, &opts).unwrap();
        assert_eq!(r.status, Status::Infeasible, "{r:?}");
    }

    #[test]
    fn deterministic() {
        let prog = ConeProgram::new(
            2,
            vec![
                block("a", d(2, &[1.0, 0.0, 0.0, 1.0]), vec![(0, d(2, &[1.0, 0.5, 0.5, 0.0])), (1, d(2, &[0.0, 0.0, 0.0, 1.0]))]),
                block("b", d(1, &[1.0]), vec![(0, d(1, &[-1.0])), (1, d(1, &[-1.0]))]),
            ],
            10.0,
        )
        .unwrap();
        let a = solve(&prog, &SolverOptions::default()).unwrap();
        let b = solve(&prog, &SolverOptions::default()).unwrap();
        assert_eq!(a, b);
    }
}
