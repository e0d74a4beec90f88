#![allow(dead_code)]

use delaybound::sdp::{ConeProgram, MarginBlock};
use nalgebra::DMatrix;

pub fn mat(rows: usize, v: &[f64]) -> DMatrix<f64> {
    DMatrix::from_row_slice(rows, v.len() / rows, v)
}

pub fn block(constant: DMatrix<f64>, coeffs: Vec<(usize, DMatrix<f64>)>) -> MarginBlock {
    MarginBlock {
        name: "oracle".into(),
        constant,
        coeffs,
    }
}

/// Margin programs whose optimal value follows by hand.
pub struct Oracle {
    pub name: &'static str,
    pub program: ConeProgram,
    pub t_star: f64,
}

fn oracle(name: &'static str, num_vars: usize, blocks: Vec<MarginBlock>, bound: f64, t_star: f64) -> Oracle {
    Oracle {
        name,
        program: ConeProgram::new(num_vars, blocks, bound).expect("oracle programs are well formed"),
        t_star,
    }
}

pub fn oracles() -> Vec<Oracle> {
    let one = |v: f64| mat(1, &[v]);
    vec![
        // no variables: smallest eigenvalue of diag(2, 5)
        oracle("constant diagonal", 0, vec![block(mat(2, &[2.0, 0.0, 0.0, 5.0]), vec![])], 1.0, 2.0),
        // eigenvalues 1 and 3
        oracle("constant coupled", 0, vec![block(mat(2, &[2.0, 1.0, 1.0, 2.0]), vec![])], 1.0, 1.0),
        // y I with |y| <= 1
        oracle("box limited", 1, vec![block(DMatrix::zeros(2, 2), vec![(0, DMatrix::identity(2, 2))])], 1.0, 1.0),
        // 1 - |y| is largest at y = 0
        oracle(
            "off-diagonal",
            1,
            vec![block(DMatrix::identity(2, 2), vec![(0, mat(2, &[0.0, 1.0, 1.0, 0.0]))])],
            1e4,
            1.0,
        ),
        // min(y, 1 - y)
        oracle(
            "two scalars",
            1,
            vec![block(one(0.0), vec![(0, one(1.0))]), block(one(1.0), vec![(0, one(-1.0))])],
            1e4,
            0.5,
        ),
        // min(y1, y2, 1 - y1 - y2)
        oracle(
            "simplex",
            2,
            vec![
                block(DMatrix::zeros(2, 2), vec![(0, mat(2, &[1.0, 0.0, 0.0, 0.0])), (1, mat(2, &[0.0, 0.0, 0.0, 1.0]))]),
                block(one(1.0), vec![(0, one(-1.0)), (1, one(-1.0))]),
            ],
            1e4,
            1.0 / 3.0,
        ),
        // min(y - 1, 3 - y)
        oracle(
            "shifted pair",
            1,
            vec![
                block(mat(2, &[0.0, 1.0, 1.0, 0.0]), vec![(0, DMatrix::identity(2, 2))]),
                block(one(3.0), vec![(0, one(-1.0))]),
            ],
            1e4,
            1.0,
        ),
        // min(y, 6 - y) over a 3x3 diagonal scaling
        oracle(
            "graded diagonal",
            1,
            vec![
                block(DMatrix::zeros(3, 3), vec![(0, DMatrix::from_diagonal(&nalgebra::dvector![1.0, 2.0, 3.0]))]),
                block(one(6.0), vec![(0, one(-1.0))]),
            ],
            1e4,
            3.0,
        ),
        // min(1 - |y|, y - 0.5)
        oracle(
            "coupled with floor",
            1,
            vec![
                block(DMatrix::identity(2, 2), vec![(0, mat(2, &[0.0, 1.0, 1.0, 0.0]))]),
                block(one(-0.5), vec![(0, one(1.0))]),
            ],
            1e4,
            0.25,
        ),
        // constant negative block
        oracle("strictly infeasible", 1, vec![block(one(-1.0), vec![]), block(one(0.0), vec![(0, one(1.0))])], 1e4, -1.0),
    ]
}
