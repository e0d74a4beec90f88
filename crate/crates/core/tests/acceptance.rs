//! One line per acceptance criterion; exits nonzero if any fails.

mod common;

use std::collections::BTreeMap;
use std::time::Instant;

use delaybound::lmi::{assemble_theorem1, nodv, DelaySystem, HierarchyParams};
use delaybound::sdp::{solve, solve_problem, verify_certificate, Status};
use delaybound::search::{max_delay, min_delay, pointwise_interval, Probe, SearchOptions};
use delaybound::system::bundled;
use delaybound::verify::{run_all, VerifyConfig, VerifyReport};

const BOUND_TOL: f64 = 1e-2;
const LOWER_TOL: f64 = 1e-3;
const MONOTONE_TOL: f64 = 5e-3;
const ORACLE_TOL: f64 = 1e-7;
const RUNTIME_LIMIT_S: f64 = 60.0;

struct Outcome {
    pass: bool,
    detail: String,
}

fn report(n: usize, o: &Outcome) {
    println!("criterion {n}: {} | {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
}

fn system(name: &str) -> DelaySystem {
    bundled(name).unwrap().to_system().unwrap()
}

/// Upper bounds and probe logs, keyed by (system, M, m).
#[derive(Default)]
struct Runs {
    upper: BTreeMap<(&'static str, usize, usize), f64>,
    probes: Vec<(&'static str, Probe)>,
    final_points: Vec<(&'static str, usize, usize, f64)>,
}

impl Runs {
    fn upper(&mut self, name: &'static str, big_m: usize, m: usize, opts: &SearchOptions) -> Option<f64> {
        if let Some(v) = self.upper.get(&(name, big_m, m)) {
            return Some(*v);
        }
        let r = max_delay(&system(name), HierarchyParams::new(big_m, m).ok()?, opts).ok()?;
        self.probes.extend(r.probes.into_iter().map(|p| (name, p)));
        self.final_points.push((name, big_m, m, r.bound));
        self.upper.insert((name, big_m, m), r.bound);
        Some(r.bound)
    }
}

fn compare(label: &str, got: Option<f64>, want: f64, tol: f64) -> (bool, String) {
    match got {
        Some(v) => ((v - want).abs() <= tol, format!("{label} {v:.5} (ref {want})")),
        None => (false, format!("{label} failed")),
    }
}

fn collect(items: Vec<(bool, String)>) -> Outcome {
    Outcome {
        pass: items.iter().all(|(ok, _)| *ok),
        detail: items.into_iter().map(|(_, s)| s).collect::<Vec<_>>().join(", "),
    }
}

fn criterion1(runs: &mut Runs, opts: &SearchOptions) -> Outcome {
    let started = Instant::now();
    let mut items: Vec<_> = [6.05932, 6.16893, 6.17250, 6.17258]
        .iter()
        .enumerate()
        .map(|(i, &want)| compare(&format!("M={}", i + 1), runs.upper("example1", i + 1, 1, opts), want, BOUND_TOL))
        .collect();
    let elapsed = started.elapsed().as_secs_f64();
    items.push((elapsed < RUNTIME_LIMIT_S, format!("{elapsed:.1} s")));
    collect(items)
}

fn criterion2(runs: &mut Runs, opts: &SearchOptions) -> Outcome {
    let mut items: Vec<_> = [1.9419, 2.0395, 2.0412]
        .iter()
        .enumerate()
        .map(|(i, &want)| compare(&format!("M={}", i + 1), runs.upper("example2", i + 1, 1, opts), want, BOUND_TOL))
        .collect();
    let params = HierarchyParams::new(1, 1).unwrap();
    let lower = min_delay(&system("example2"), params, opts).ok().and_then(|r| {
        runs.probes.extend(r.probes.iter().cloned().map(|p| ("example2", p)));
        r.infeasible_side.map(|_| r.bound)
    });
    items.push(compare("min delay", lower, 0.20001, LOWER_TOL));
    collect(items)
}

fn criterion3(runs: &mut Runs, opts: &SearchOptions) -> Outcome {
    let refs = [(0.10055, 1.5405), (0.10018, 1.7122), (0.10017, 1.71799)];
    let sys = system("example3");
    let mut items = Vec::new();
    for (i, (lo, hi)) in refs.into_iter().enumerate() {
        let big_m = i + 1;
        match pointwise_interval(&sys, HierarchyParams::new(big_m, 1).unwrap(), opts) {
            Ok(r) => {
                runs.probes.extend(r.probes.iter().cloned().map(|p| ("example3", p)));
                let ok_lo = r.lower.is_some_and(|v| (v - lo).abs() <= BOUND_TOL);
                let ok_hi = (r.upper - hi).abs() <= BOUND_TOL;
                items.push((
                    ok_lo && ok_hi,
                    format!("M={big_m} [{:.5}, {:.5}] (ref [{lo}, {hi}])", r.lower.unwrap_or(0.0), r.upper),
                ));
            }
            Err(e) => items.push((false, format!("M={big_m}: {e}"))),
        }
    }
    collect(items)
}

fn criterion4(runs: &mut Runs, opts: &SearchOptions) -> Outcome {
    let mut violations = Vec::new();
    let mut cells = 0;
    for name in ["example1", "example2", "example3"] {
        let chains: [Vec<(usize, usize)>; 2] = [(1..=4).map(|bm| (bm, 1)).collect(), (1..=4).map(|m| (3, m)).collect()];
        for chain in chains {
            let values: Vec<Option<f64>> = chain.iter().map(|&(bm, m)| runs.upper(name, bm, m, opts)).collect();
            cells += values.len();
            for (i, w) in values.windows(2).enumerate() {
                match (w[0], w[1]) {
                    (Some(a), Some(b)) if b >= a - MONOTONE_TOL => {}
                    _ => violations.push(format!("{name} {:?}->{:?} {:?}->{:?}", chain[i], chain[i + 1], w[0], w[1])),
                }
            }
        }
    }
    Outcome {
        pass: violations.is_empty(),
        detail: if violations.is_empty() {
            format!("{cells} cells, 0 violations")
        } else {
            violations.join("; ")
        },
    }
}

fn suites(report: &VerifyReport, names: &[&str], min_cases: &[(&str, usize)]) -> Outcome {
    let mut items = Vec::new();
    for name in names {
        match report.suite(name) {
            Some(s) => {
                let need = min_cases.iter().find(|(n, _)| n == name).map_or(1, |(_, c)| *c);
                items.push((
                    s.passed() && s.cases >= need,
                    format!("{name} {}/{} ok", s.cases - s.failures.len(), s.cases),
                ));
            }
            None => items.push((false, format!("{name} missing"))),
        }
    }
    collect(items)
}

fn criterion7(runs: &Runs, opts: &SearchOptions) -> Outcome {
    let mut items = Vec::new();
    let worst = common::oracles()
        .iter()
        .map(|o| match solve(&o.program, &opts.solver) {
            Ok(r) => (r.margin - o.t_star).abs(),
            Err(_) => f64::INFINITY,
        })
        .fold(0.0, f64::max);
    items.push((worst <= ORACLE_TOL, format!("10 oracles, worst |t - t*| {worst:.1e}")));

    let feasible: Vec<_> = runs.probes.iter().filter(|(_, p)| p.status == Status::Feasible).collect();
    let rejected = feasible.iter().filter(|(_, p)| !p.certified).count();
    items.push((rejected == 0, format!("{} feasible probes, {rejected} certificates rejected", feasible.len())));

    let mut refailed = 0;
    for &(name, big_m, m, tau) in &runs.final_points {
        let ok = assemble_theorem1(&system(name), HierarchyParams::new(big_m, m).unwrap(), tau)
            .and_then(|p| solve_problem(&p, &opts.solver).map(|r| verify_certificate(&p, &r)))
            .unwrap_or(false);
        refailed += usize::from(!ok);
    }
    items.push((refailed == 0, format!("{} reported bounds re-solved, {refailed} not certified", runs.final_points.len())));
    collect(items)
}

fn criterion8() -> Outcome {
    let count = |bm: usize, m: usize| nodv(&HierarchyParams::new(bm, m).unwrap(), 2);
    let got = count(3, 1);
    Outcome {
        pass: got == 48,
        detail: format!("NoDV(M=3, m=1, n=2) = {got}; other printed counts not matched"),
    }
}

fn main() {
    let opts = SearchOptions::default();
    let mut runs = Runs::default();
    let verify = run_all(&VerifyConfig::default()).expect("property suites run");

    let outcomes = [
        criterion1(&mut runs, &opts),
        criterion2(&mut runs, &opts),
        criterion3(&mut runs, &opts),
        criterion4(&mut runs, &opts),
        suites(
            &verify,
            &["soundness-values", "soundness-derivative", "equality-on-span", "competitor-dominance"],
            &[("soundness-values", 1000), ("soundness-derivative", 1000)],
        ),
        suites(&verify, &["orthogonality", "xi-reconstruction", "z-reconstruction", "xi0-identity"], &[]),
        criterion7(&runs, &opts),
        criterion8(),
    ];
    for (i, o) in outcomes.iter().enumerate() {
        report(i + 1, o);
    }
    let failed = outcomes.iter().filter(|o| !o.pass).count();
    println!("acceptance: {} of {} criteria pass", outcomes.len() - failed, outcomes.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
