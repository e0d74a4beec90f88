mod common;

use common::{block, mat, oracles};
use delaybound::lmi::{assemble_theorem1, DecisionVariables, HierarchyParams};
use delaybound::sdp::{solve, solve_problem, verify_certificate, ConeProgram, SolverOptions, Status};
use delaybound::system::bundled;
use nalgebra::DMatrix;

#[test]
fn oracle_programs_reach_their_optimum() {
    let opts = SolverOptions::default();
    for o in oracles() {
        let r = solve(&o.program, &opts).unwrap();
        assert!((r.margin - o.t_star).abs() <= 1e-7, "{}: {} vs {}", o.name, r.margin, o.t_star);
        let expected = if o.t_star > 0.0 { Status::Feasible } else { Status::Infeasible };
        assert_eq!(r.status, expected, "{}", o.name);
    }
}

#[test]
fn homogeneous_zero_optimum_is_infeasible() {
    let prog = ConeProgram::new(1, vec![block(DMatrix::zeros(2, 2), vec![(0, mat(2, &[1.0, 0.0, 0.0, -1.0]))])], 1e4).unwrap();
    let r = solve(&prog, &SolverOptions::default()).unwrap();
    assert_eq!(r.status, Status::Infeasible);
    let zero_band = 1e-8 * 1e4;
    assert!(r.upper_bound < zero_band && r.margin.abs() < 1e-9, "{r:?}");
}

#[test]
fn redundant_block_leaves_the_optimum_unchanged() {
    let opts = SolverOptions::default();
    for o in oracles() {
        let mut blocks = o.program.blocks.clone();
        let mut loose = blocks[0].clone();
        loose.constant += DMatrix::identity(loose.size(), loose.size()) * 10.0;
        blocks.push(loose);
        let prog = ConeProgram::new(o.program.num_vars, blocks, o.program.bound).unwrap();
        let r = solve(&prog, &opts).unwrap();
        assert!((r.margin - o.t_star).abs() <= 1e-7, "{}: {}", o.name, r.margin);
    }
}

#[test]
fn repeated_lmi_constraint_keeps_the_decision() {
    let sys = bundled("example1").unwrap().to_system().unwrap();
    let params = HierarchyParams::new(2, 1).unwrap();
    let opts = SolverOptions::default();
    for (tau, feasible) in [(5.0, true), (6.5, false)] {
        let mut problem = assemble_theorem1(&sys, params, tau).unwrap();
        let base = solve_problem(&problem, &opts).unwrap().status;
        let copy = problem.constraints[1].clone();
        problem.constraints.push(copy);
        let again = solve_problem(&problem, &opts).unwrap().status;
        assert_eq!(base, again);
        assert_eq!(base == Status::Feasible, feasible);
    }
}

#[test]
fn scaling_the_constraints_scales_the_margin() {
    let opts = SolverOptions::default();
    for o in oracles().into_iter().filter(|o| o.t_star > 0.0) {
        let scaled: Vec<_> = o
            .program
            .blocks
            .iter()
            .map(|b| block(&b.constant * 4.0, b.coeffs.iter().map(|(i, c)| (*i, c * 4.0)).collect()))
            .collect();
        let prog = ConeProgram::new(o.program.num_vars, scaled, o.program.bound).unwrap();
        let r = solve(&prog, &opts).unwrap();
        assert!((r.margin - 4.0 * o.t_star).abs() <= 4e-7, "{}: {}", o.name, r.margin);
    }
}

#[test]
fn certificate_with_zeroed_lyapunov_matrix_is_rejected() {
    let sys = bundled("example1").unwrap().to_system().unwrap();
    let problem = assemble_theorem1(&sys, HierarchyParams::new(2, 1).unwrap(), 3.0).unwrap();
    let mut r = solve_problem(&problem, &SolverOptions::default()).unwrap();
    assert!(verify_certificate(&problem, &r));
    let mut vars = DecisionVariables::from_flat(&problem.layout, &r.y).unwrap();
    vars.p.fill(0.0);
    r.y = vars.to_flat(&problem.layout).unwrap();
    assert!(!verify_certificate(&problem, &r));
}

#[test]
fn solver_is_deterministic() {
    let sys = bundled("example2").unwrap().to_system().unwrap();
    let problem = assemble_theorem1(&sys, HierarchyParams::new(2, 1).unwrap(), 1.5).unwrap();
    let opts = SolverOptions::default();
    assert_eq!(solve_problem(&problem, &opts).unwrap(), solve_problem(&problem, &opts).unwrap());
}
