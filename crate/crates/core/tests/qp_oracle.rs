mod common;

use common::{active_set_solve, random_qp};
use nalgebra::DVector;
use retarget_core::qp::{self, ConvexProgram, Status};

fn to_program(qp: &common::DenseQp) -> ConvexProgram {
    ConvexProgram::new(
        qp.p.nrows(),
        &qp.p_upper_triplets(),
        qp.q.iter().copied().collect(),
        &qp.a_triplets(),
        qp.lower.clone(),
        qp.upper.clone(),
    )
    .unwrap()
}

fn check(seed: u64, n: usize, m: usize, band: Option<usize>) {
    let dense = random_qp(seed, n, m, band);
    let reference = active_set_solve(&dense);
    let f_ref = dense.objective(&reference);
    let sol = qp::solve(&to_program(&dense), 1e-6, 20_000);
    assert_eq!(sol.status, Status::Solved, "seed {seed}: {:?}", sol.status);
    let f = dense.objective(&DVector::from_vec(sol.x.clone()));
    assert!(
        (f - f_ref).abs() <= 1e-5 * f_ref.abs().max(1.0),
        "seed {seed}: objective {f} vs oracle {f_ref}"
    );
    assert!(sol.primal_residual <= 1e-6, "seed {seed}: violation {}", sol.primal_residual);
}

#[test]
fn random_dense_qp_matches_active_set_oracle() {
    for seed in 0..10 {
        check(seed, 50, 80, None);
    }
}

#[test]
fn random_banded_qps_match_active_set_oracle() {
    for seed in 0..40 {
        let n = 10 + (seed as usize * 37) % 190;
        let m = n + n / 2;
        check(1000 + seed, n, m, Some(2));
    }
}

fn scaled(prog: &ConvexProgram, c: f64) -> ConvexProgram {
    let p: Vec<(usize, usize, f64)> = prog.p().iter().filter(|&(i, j, _)| i <= j).map(|(i, j, v)| (i, j, c * v)).collect();
    let a: Vec<(usize, usize, f64)> = prog.a().iter().collect();
    ConvexProgram::new(
        prog.num_variables(),
        &p,
        prog.q().iter().map(|v| c * v).collect(),
        &a,
        prog.lower().to_vec(),
        prog.upper().to_vec(),
    )
    .unwrap()
}

#[test]
fn argmin_is_invariant_to_objective_scaling() {
    for seed in 0..5 {
        let prog = to_program(&random_qp(500 + seed, 30, 45, Some(2)));
        let base = qp::solve(&prog, 1e-6, 20_000);
        for c in [1e-3, 7.0, 1e4] {
            let sol = qp::solve(&scaled(&prog, c), 1e-6, 20_000);
            assert_eq!(sol.status, Status::Solved);
            let diff = sol.x.iter().zip(&base.x).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            assert!(diff <= 1e-5, "seed {seed}, scale {c}: {diff}");
        }
    }
}

#[test]
fn no_worse_than_a_known_feasible_point() {
    for seed in 0..10 {
        let dense = random_qp(700 + seed, 40, 60, None);
        let sol = qp::solve(&to_program(&dense), 1e-6, 20_000);
        let f = dense.objective(&DVector::from_vec(sol.x.clone()));
        assert!(f <= dense.objective(&dense.feasible) + 1e-6);
    }
}

#[test]
fn scalar_examples() {
    let interior = ConvexProgram::new(1, &[(0, 0, 2.0)], vec![-6.0], &[(0, 0, 1.0)], vec![0.0], vec![10.0]).unwrap();
    let sol = qp::solve(&interior, 1e-6, 100);
    assert!((sol.x[0] - 3.0).abs() < 1e-5);
    let active = ConvexProgram::new(1, &[(0, 0, 2.0)], vec![-6.0], &[(0, 0, 1.0)], vec![f64::NEG_INFINITY], vec![1.0]).unwrap();
    let sol = qp::solve(&active, 1e-6, 100);
    assert!((sol.x[0] - 1.0).abs() < 1e-5);
    assert!(sol.y[0] > 0.0);
}

#[test]
fn detects_infeasibility() {
    // x ≥ 1 and x ≤ 0
    let prog = ConvexProgram::new(
        1,
        &[(0, 0, 1.0)],
        vec![0.0],
        &[(0, 0, 1.0), (1, 0, 1.0)],
        vec![1.0, f64::NEG_INFINITY],
        vec![f64::INFINITY, 0.0],
    )
    .unwrap();
    assert_eq!(qp::solve(&prog, 1e-6, 500).status, Status::Infeasible);
}

#[test]
fn iteration_cap_returns_best_iterate() {
    let prog = to_program(&random_qp(42, 60, 90, Some(2)));
    let sol = qp::solve(&prog, 1e-6, 4);
    assert_eq!(sol.status, Status::MaxIters);
    assert_eq!(sol.x.len(), 60);
    assert!(sol.primal_residual.is_finite());
    eprintln!("violation after 4 iterations: {}", sol.primal_residual);
}
