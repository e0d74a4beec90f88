//! Delay-bound discovery: bisection on the pointwise conditions, delay-range
//! certification and `(M, m)` hierarchy sweeps.

use std::fmt::Write as _;
use std::time::Instant;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::lmi::{assemble_delay_range, assemble_theorem1, nodv, DelaySystem, HierarchyParams};
use crate::sdp::{solve_problem, verify_certificate, SolverOptions, Status};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SearchOptions {
    /// Bisection tolerance on `τ`.
    pub tol: f64,
    /// Probing starts at `sqrt(hint_low * hint_high)`; `hint_low` is also the
    /// floor below which no lower bound is sought.
    pub hint_low: f64,
    pub hint_high: f64,
    /// Probes go out to `hint · 2^{±max_exponent}`.
    pub max_exponent: u32,
    pub solver: SolverOptions,
}

impl Default for SearchOptions {
    fn default() -> Self {
        Self {
            tol: 1e-5,
            hint_low: 1e-3,
            hint_high: 10.0,
            max_exponent: 30,
            solver: SolverOptions::default(),
        }
    }
}

impl SearchOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(Error::InvalidInput(format!("tolerance must be positive, got {}", self.tol)));
        }
        if !(self.hint_low > 0.0 && self.hint_low <= self.hint_high && self.hint_high.is_finite()) {
            return Err(Error::InvalidInput("bracket hints must satisfy 0 < low <= high".into()));
        }
        self.solver.validate()
    }

    fn hint(&self) -> f64 {
        (self.hint_low * self.hint_high).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Probe {
    pub tau: f64,
    pub status: Status,
    pub margin: f64,
    /// Feasible and the certificate re-evaluates with positive margins.
    pub certified: bool,
}

impl Probe {
    pub fn feasible(&self) -> bool {
        self.certified
    }
}

/// Runs and logs pointwise feasibility probes.
pub struct Prober<'a> {
    sys: &'a DelaySystem,
    params: HierarchyParams,
    opts: &'a SearchOptions,
    pub probes: Vec<Probe>,
}

impl<'a> Prober<'a> {
    pub fn new(sys: &'a DelaySystem, params: HierarchyParams, opts: &'a SearchOptions) -> Self {
        Self {
            sys,
            params,
            opts,
            probes: Vec::new(),
        }
    }

    /// Inconclusive solves and unverifiable certificates count as infeasible.
    pub fn probe(&mut self, tau: f64) -> Result<bool> {
        let problem = assemble_theorem1(self.sys, self.params, tau)?;
        let result = solve_problem(&problem, &self.opts.solver)?;
        let certified = result.status == Status::Feasible && verify_certificate(&problem, &result);
        self.probes.push(Probe {
            tau,
            status: result.status,
            margin: result.margin,
            certified,
        });
        Ok(certified)
    }

    pub fn inconclusive(&self) -> usize {
        self.probes
            .iter()
            .filter(|p| p.status == Status::NumericallyInconclusive || (p.status == Status::Feasible && !p.certified))
            .count()
    }

    /// Geometric probing `hint · 2^{±k}`, interleaved, for a feasible delay.
    pub fn find_feasible(&mut self) -> Result<f64> {
        let hint = self.opts.hint();
        if self.probe(hint)? {
            return Ok(hint);
        }
        for k in 1..=self.opts.max_exponent as i32 {
            for tau in [hint * 2f64.powi(k), hint * 2f64.powi(-k)] {
                if self.probe(tau)? {
                    return Ok(tau);
                }
            }
        }
        Err(Error::NoFeasiblePoint {
            probes: self.probes.len(),
            low: hint * 2f64.powi(-(self.opts.max_exponent as i32)),
            high: hint * 2f64.powi(self.opts.max_exponent as i32),
        })
    }

    /// Largest feasible delay above the feasible `start`.
    /// Returns `(feasible, Some(infeasible))`, or `(feasible, None)` if no
    /// infeasible delay was found within the probing range.
    pub fn upper_from(&mut self, start: f64) -> Result<(f64, Option<f64>)> {
        let ceiling = self.opts.hint() * 2f64.powi(self.opts.max_exponent as i32);
        let mut lo = start;
        let mut hi = loop {
            let next = lo * 2.0;
            if next > ceiling {
                return Ok((lo, None));
            }
            if self.probe(next)? {
                lo = next;
            } else {
                break next;
            }
        };
        while hi - lo > self.opts.tol {
            let mid = 0.5 * (lo + hi);
            if self.probe(mid)? {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok((lo, Some(hi)))
    }

    /// Smallest feasible delay below the feasible `start`.
    /// Returns `(feasible, None)` when feasibility holds down to the floor.
    pub fn lower_from(&mut self, start: f64) -> Result<(f64, Option<f64>)> {
        let floor = self.opts.hint_low;
        let mut hi = start;
        let mut lo = loop {
            if hi <= floor {
                return Ok((hi, None));
            }
            let next = (hi * 0.5).max(floor);
            if self.probe(next)? {
                hi = next;
            } else {
                break next;
            }
        };
        while hi - lo > self.opts.tol {
            let mid = 0.5 * (lo + hi);
            if self.probe(mid)? {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Ok((hi, Some(lo)))
    }
}

/// A bound together with the infeasible probe that brackets it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundSearch {
    pub bound: f64,
    /// `None` when no infeasible delay exists within the probing range.
    pub infeasible_side: Option<f64>,
    pub probes: Vec<Probe>,
}

/// Largest delay at which the pointwise conditions are feasible.
pub fn max_delay(sys: &DelaySystem, params: HierarchyParams, opts: &SearchOptions) -> Result<BoundSearch> {
    opts.validate()?;
    let mut prober = Prober::new(sys, params, opts);
    let start = prober.find_feasible()?;
    let (bound, infeasible_side) = prober.upper_from(start)?;
    Ok(BoundSearch {
        bound,
        infeasible_side,
        probes: prober.probes,
    })
}

/// Smallest delay at which the pointwise conditions are feasible.
/// `infeasible_side = None` means feasibility down to the probe floor.
pub fn min_delay(sys: &DelaySystem, params: HierarchyParams, opts: &SearchOptions) -> Result<BoundSearch> {
    opts.validate()?;
    let mut prober = Prober::new(sys, params, opts);
    let start = prober.find_feasible()?;
    let (bound, infeasible_side) = prober.lower_from(start)?;
    Ok(BoundSearch {
        bound,
        infeasible_side,
        probes: prober.probes,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityInterval {
    /// `None`: feasible down to the probe floor, interval open at zero.
    pub lower: Option<f64>,
    pub upper: f64,
    /// `None` when the search found no infeasible delay above `upper`.
    pub upper_closed: bool,
    pub probes: Vec<Probe>,
}

/// Pointwise endpoint search followed by delay-range certification of the
/// whole interval (from the probe floor when the interval is open at zero).
pub fn stability_interval(sys: &DelaySystem, params: HierarchyParams, opts: &SearchOptions) -> Result<StabilityInterval> {
    let interval = pointwise_interval(sys, params, opts)?;
    let low = interval.lower.unwrap_or(opts.hint_low);
    if !certify_range(sys, params, low, interval.upper, &opts.solver)? {
        return Err(Error::CertificationFailure {
            low,
            high: interval.upper,
        });
    }
    Ok(interval)
}

/// Both pointwise endpoints, without range certification.
pub fn pointwise_interval(sys: &DelaySystem, params: HierarchyParams, opts: &SearchOptions) -> Result<StabilityInterval> {
    opts.validate()?;
    let mut prober = Prober::new(sys, params, opts);
    let start = prober.find_feasible()?;
    let (lower, below) = prober.lower_from(start)?;
    let (upper, above) = prober.upper_from(start)?;
    Ok(StabilityInterval {
        lower: below.map(|_| lower),
        upper,
        upper_closed: above.is_some(),
        probes: prober.probes,
    })
}

/// Whether the delay-range conditions hold on `[low, high]` with a verified certificate.
pub fn certify_range(sys: &DelaySystem, params: HierarchyParams, low: f64, high: f64, solver: &SolverOptions) -> Result<bool> {
    let problem = assemble_delay_range(sys, params, low, high)?;
    let result = solve_problem(&problem, solver)?;
    Ok(result.status == Status::Feasible && verify_certificate(&problem, &result))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Upper,
    Lower,
    Interval,
}

impl std::fmt::Display for Direction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Direction::Upper => "upper",
            Direction::Lower => "lower",
            Direction::Interval => "interval",
        })
    }
}

impl std::str::FromStr for Direction {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "upper" => Ok(Direction::Upper),
            "lower" => Ok(Direction::Lower),
            "interval" => Ok(Direction::Interval),
            other => Err(Error::InvalidInput(format!("unknown direction {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DelayBoundsReport {
    pub schema_version: u32,
    pub system: String,
    pub params: HierarchyParams,
    pub direction: Direction,
    pub tau_lower: Option<f64>,
    pub tau_upper: Option<f64>,
    /// Feasible down to the probe floor.
    pub lower_open_at_zero: bool,
    /// Feasible up to the probe ceiling.
    pub upper_unbounded: bool,
    /// Outcome of the delay-range check for interval requests.
    pub range_certified: Option<bool>,
    pub nodv: usize,
    pub tol: f64,
    pub probes: Vec<Probe>,
    pub inconclusive_probes: usize,
    pub wall_time_s: f64,
}

/// Run a bound search and package the result.
///
/// For `Direction::Interval` a failed range certification is recorded in
/// `range_certified` rather than raised.
pub fn bounds_report(
    name: &str,
    sys: &DelaySystem,
    params: HierarchyParams,
    direction: Direction,
    opts: &SearchOptions,
) -> Result<DelayBoundsReport> {
    let started = Instant::now();
    let mut report = DelayBoundsReport {
        schema_version: SCHEMA_VERSION,
        system: name.to_string(),
        params,
        direction,
        tau_lower: None,
        tau_upper: None,
        lower_open_at_zero: false,
        upper_unbounded: false,
        range_certified: None,
        nodv: nodv(&params, sys.n_x()),
        tol: opts.tol,
        probes: Vec::new(),
        inconclusive_probes: 0,
        wall_time_s: 0.0,
    };
    match direction {
        Direction::Upper => {
            let r = max_delay(sys, params, opts)?;
            report.tau_upper = Some(r.bound);
            report.upper_unbounded = r.infeasible_side.is_none();
            report.probes = r.probes;
        }
        Direction::Lower => {
            let r = min_delay(sys, params, opts)?;
            report.tau_lower = r.infeasible_side.map(|_| r.bound);
            report.lower_open_at_zero = r.infeasible_side.is_none();
            report.probes = r.probes;
        }
        Direction::Interval => {
            let r = pointwise_interval(sys, params, opts)?;
            report.tau_lower = r.lower;
            report.lower_open_at_zero = r.lower.is_none();
            report.tau_upper = Some(r.upper);
            report.upper_unbounded = !r.upper_closed;
            let low = r.lower.unwrap_or(opts.hint_low);
            report.range_certified = Some(certify_range(sys, params, low, r.upper, &opts.solver)?);
            report.probes = r.probes;
        }
    }
    report.inconclusive_probes = report
        .probes
        .iter()
        .filter(|p| p.status == Status::NumericallyInconclusive || (p.status == Status::Feasible && !p.certified))
        .count();
    report.wall_time_s = started.elapsed().as_secs_f64();
    Ok(report)
}

fn fmt_opt(v: Option<f64>, none: &str) -> String {
    v.map_or_else(|| none.to_string(), |x| format!("{x:.5}"))
}

impl DelayBoundsReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports serialize")
    }

    pub fn to_text(&self) -> String {
        let lower = if self.lower_open_at_zero {
            "0 (open)".to_string()
        } else {
            fmt_opt(self.tau_lower, "-")
        };
        let upper = if self.upper_unbounded {
            format!("{} (no infeasible probe above)", fmt_opt(self.tau_upper, "-"))
        } else {
            fmt_opt(self.tau_upper, "-")
        };
        let mut out = String::new();
        let _ = writeln!(out, "system     {}", self.system);
        let _ = writeln!(out, "M, m       {}, {}", self.params.big_m, self.params.m);
        let _ = writeln!(out, "NoDV       {}", self.nodv);
        if self.direction != Direction::Upper {
            let _ = writeln!(out, "tau_lower  {lower}");
        }
        if self.direction != Direction::Lower {
            let _ = writeln!(out, "tau_upper  {upper}");
        }
        if let Some(c) = self.range_certified {
            let _ = writeln!(out, "range      {}", if c { "certified" } else { "NOT certified by the delay-range conditions" });
        }
        let _ = writeln!(
            out,
            "probes     {} ({} inconclusive), {:.2} s",
            self.probes.len(),
            self.inconclusive_probes,
            self.wall_time_s
        );
        out
    }

    pub fn to_csv(&self) -> String {
        let f = |v: Option<f64>| v.map_or_else(String::new, |x| format!("{x:.10}"));
        format!(
            "system,M,m,direction,tau_lower,tau_upper,lower_open_at_zero,range_certified,nodv,probes,inconclusive\n{},{},{},{},{},{},{},{},{},{},{}\n",
            self.system,
            self.params.big_m,
            self.params.m,
            self.direction,
            f(self.tau_lower),
            f(self.tau_upper),
            self.lower_open_at_zero,
            self.range_certified.map_or_else(String::new, |c| c.to_string()),
            self.nodv,
            self.probes.len(),
            self.inconclusive_probes
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepCell {
    #[serde(rename = "M")]
    pub big_m: usize,
    pub m: usize,
    pub tau_upper: Option<f64>,
    pub nodv: usize,
    pub probes: usize,
    pub inconclusive_probes: usize,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonotonicityViolation {
    pub from: (usize, usize),
    pub to: (usize, usize),
    pub from_value: f64,
    pub to_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepResult {
    pub schema_version: u32,
    pub system: String,
    pub tol: f64,
    /// Row-major over `M`, then `m`.
    pub cells: Vec<SweepCell>,
    pub violations: Vec<MonotonicityViolation>,
}

fn sweep_cell(sys: &DelaySystem, big_m: usize, m: usize, opts: &SearchOptions) -> SweepCell {
    let mut cell = SweepCell {
        big_m,
        m,
        tau_upper: None,
        nodv: 0,
        probes: 0,
        inconclusive_probes: 0,
        error: None,
    };
    let params = match HierarchyParams::new(big_m, m) {
        Ok(p) => p,
        Err(e) => {
            cell.error = Some(e.to_string());
            return cell;
        }
    };
    cell.nodv = nodv(&params, sys.n_x());
    match max_delay(sys, params, opts) {
        Ok(r) => {
            cell.tau_upper = Some(r.bound);
            cell.probes = r.probes.len();
            cell.inconclusive_probes = r
                .probes
                .iter()
                .filter(|p| p.status == Status::NumericallyInconclusive || (p.status == Status::Feasible && !p.certified))
                .count();
        }
        Err(e) => cell.error = Some(e.to_string()),
    }
    cell
}

/// Upper bounds over the `(M, m)` grid, with monotonicity checks in each direction.
pub fn hierarchy_sweep(
    name: &str,
    sys: &DelaySystem,
    big_m_range: std::ops::RangeInclusive<usize>,
    m_range: std::ops::RangeInclusive<usize>,
    opts: &SearchOptions,
) -> Result<SweepResult> {
    opts.validate()?;
    if big_m_range.is_empty() || m_range.is_empty() {
        return Err(Error::InvalidInput("sweep ranges must be nonempty".into()));
    }
    let grid: Vec<(usize, usize)> = big_m_range
        .clone()
        .flat_map(|bm| m_range.clone().map(move |m| (bm, m)))
        .collect();

    #[cfg(feature = "parallel")]
    let cells: Vec<SweepCell> = {
        use rayon::prelude::*;
        grid.par_iter().map(|&(bm, m)| sweep_cell(sys, bm, m, opts)).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let cells: Vec<SweepCell> = grid.iter().map(|&(bm, m)| sweep_cell(sys, bm, m, opts)).collect();

    let lookup = |bm: usize, m: usize| cells.iter().find(|c| c.big_m == bm && c.m == m).and_then(|c| c.tau_upper);
    let mut violations = Vec::new();
    for c in &cells {
        let Some(v) = c.tau_upper else { continue };
        for (nbm, nm) in [(c.big_m + 1, c.m), (c.big_m, c.m + 1)] {
            if let Some(w) = lookup(nbm, nm) {
                if w < v - opts.tol {
                    violations.push(MonotonicityViolation {
                        from: (c.big_m, c.m),
                        to: (nbm, nm),
                        from_value: v,
                        to_value: w,
                    });
                }
            }
        }
    }
    Ok(SweepResult {
        schema_version: SCHEMA_VERSION,
        system: name.to_string(),
        tol: opts.tol,
        cells,
        violations,
    })
}

impl SweepResult {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports serialize")
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{}", self.system);
        let _ = writeln!(out, "{:>4} {:>4} {:>12} {:>6} {:>7}", "M", "m", "tau_upper", "NoDV", "probes");
        for c in &self.cells {
            let v = match (&c.tau_upper, &c.error) {
                (Some(v), _) => format!("{v:.5}"),
                (None, Some(_)) => "error".to_string(),
                _ => "-".to_string(),
            };
            let _ = writeln!(out, "{:>4} {:>4} {:>12} {:>6} {:>7}", c.big_m, c.m, v, c.nodv, c.probes);
        }
        for c in self.cells.iter().filter(|c| c.error.is_some()) {
            let _ = writeln!(out, "(M={}, m={}): {}", c.big_m, c.m, c.error.as_deref().unwrap_or(""));
        }
        if self.violations.is_empty() {
            let _ = writeln!(out, "monotonicity: no violations");
        } else {
            for v in &self.violations {
                let _ = writeln!(
                    out,
                    "monotonicity violation: (M={}, m={}) {:.5} > (M={}, m={}) {:.5}",
                    v.from.0, v.from.1, v.from_value, v.to.0, v.to.1, v.to_value
                );
            }
        }
        out
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("M,m,tau_upper,nodv,probes,inconclusive,error\n");
        for c in &self.cells {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                c.big_m,
                c.m,
                c.tau_upper.map_or_else(String::new, |v| format!("{v:.10}")),
                c.nodv,
                c.probes,
                c.inconclusive_probes,
                c.error.as_deref().unwrap_or("").replace(',', ";")
            );
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::system::bundled;

    fn quick() -> SearchOptions {
        SearchOptions {
            tol: 1e-3,
            ..Default::default()
        }
    }

    #[test]
    fn bracketing_is_sound() {
        let sys = bundled("example1").unwrap().to_system().unwrap();
        let params = HierarchyParams::new(1, 1).unwrap();
        let r = max_delay(&sys, params, &quick()).unwrap();
        let hi = r.infeasible_side.unwrap();
        assert!(hi - r.bound <= 1e-3);
        assert!(r.probes.iter().any(|p| p.tau == r.bound && p.feasible()));
        assert!(r.probes.iter().any(|p| p.tau == hi && !p.feasible()));
    }

    #[test]
    fn lower_bound_open_at_zero() {
        let sys = bundled("example1").unwrap().to_system().unwrap();
        let r = min_delay(&sys, HierarchyParams::new(1, 1).unwrap(), &quick()).unwrap();
        assert!(r.infeasible_side.is_none());
    }

    #[test]
    fn single_cell_sweep_has_no_comparisons() {
        let sys = bundled("example1").unwrap().to_system().unwrap();
        let r = hierarchy_sweep("example1", &sys, 1..=1, 0..=0, &quick()).unwrap();
        assert_eq!(r.cells.len(), 1);
        assert!(r.violations.is_empty());
    }

    #[test]
    fn direction_parsing() {
        assert_eq!("upper".parse::<Direction>().unwrap(), Direction::Upper);
        assert!("sideways".parse::<Direction>().is_err());
    }
}
