use std::sync::Arc;

use num_complex::Complex64 as C64;
use rotorflow::linear_solver::{apply_s_mu, boundary_inverse, LinearSolveInput, TraceData};
use rotorflow::mode_algebra::{compute_zeta, BoundaryCoeffs, SpectralField};
use rotorflow::solver::{assemble_phi, match_mu_star, solve_kappa_solution, SolverConfig};
use rotorflow::Error;

fn config(eps: f64) -> SolverConfig {
    let n_max = 6;
    let mut b = TraceData::zeros(n_max);
    b.v_theta = BoundaryCoeffs::from_fn(n_max, |n| C64::new(if n.abs() == 1 { eps } else { 0.0 }, 0.0)).unwrap();
    b.v_r = BoundaryCoeffs::from_fn(n_max, |n| match n {
        2 => C64::new(0.0, 0.3 * eps),
        -2 => C64::new(0.0, -0.3 * eps),
        _ => C64::new(0.0, 0.0),
    })
    .unwrap();
    let mut cfg = SolverConfig::new(10.0, b);
    cfg.r_max = 1e4;
    cfg.cells = 400;
    cfg
}

fn linear(cfg: &SolverConfig, mu: f64) -> SpectralField {
    let zeta = Arc::new(compute_zeta(mu, cfg.n_max).unwrap());
    let (g, w) = boundary_inverse(&cfg.boundary.v_r, &cfg.boundary.v_theta, &zeta).unwrap();
    apply_s_mu(&LinearSolveInput::homogeneous(cfg.grid().unwrap(), g, w, zeta).unwrap()).unwrap()
}

#[test]
fn first_iterate_is_linear_solution() {
    let cfg = config(1e-3);
    let zeta = Arc::new(compute_zeta(10.0, cfg.n_max).unwrap());
    let x_star = boundary_inverse(&cfg.boundary.v_r, &cfg.boundary.v_theta, &zeta).unwrap();
    let phi = assemble_phi(&SpectralField::zeros(cfg.grid().unwrap(), cfg.n_max), &x_star, &zeta, 0.05).unwrap();
    let lin = linear(&cfg, 10.0);
    assert_eq!(phi.image.difference(&lin).unwrap().norm(0.05, 2.0).unwrap(), 0.0);
    assert!(phi.trace.max_gap(&cfg.boundary).unwrap() <= 1e-15);
}

#[test]
fn correction_is_second_order() {
    let ratio = |eps: f64| {
        let cfg = config(eps);
        let rep = solve_kappa_solution(&cfg, 10.0).unwrap();
        let d = rep.field.difference(&linear(&cfg, 10.0)).unwrap();
        d.norm(rep.params.alpha, cfg.kappa).unwrap() / (eps * eps)
    };
    let (a, b) = (ratio(1e-3), ratio(1e-4));
    assert!((a / b - 1.0).abs() < 0.05, "{a} vs {b}");
}

#[test]
fn converged_solution_is_fixed_point() {
    let cfg = config(1e-3);
    let rep = solve_kappa_solution(&cfg, 10.0).unwrap();
    assert!(rep.phi_residual <= cfg.tol_fixed_point);
    assert!(rep.trace_mismatch <= cfg.tol_fixed_point);
    let h = &rep.contraction_history;
    assert!(h.windows(2).all(|w| w[1] < w[0]), "{h:?}");
    assert!(rep.last_contraction().unwrap() < 1.0);
    let lin_norm = linear(&cfg, 10.0).norm(rep.params.alpha, cfg.kappa).unwrap();
    assert!(rep.norms.field() <= 2.0 * lin_norm);
}

#[test]
fn continuity_in_mu() {
    let cfg = config(1e-3);
    let a = solve_kappa_solution(&cfg, 10.0).unwrap();
    let b = solve_kappa_solution(&cfg, 10.0 + 1e-3).unwrap();
    let d = b.field.difference(&a.field).unwrap().norm(a.params.alpha, cfg.kappa).unwrap();
    assert!(d <= 1e-2 * a.norms.field(), "{d}");
}

#[test]
fn relaxation_reaches_same_solution() {
    let cfg = config(1e-3);
    let a = solve_kappa_solution(&cfg, 10.0).unwrap();
    let mut relaxed = cfg.clone();
    relaxed.relaxation = 0.7;
    relaxed.max_iter = 200;
    let b = solve_kappa_solution(&relaxed, 10.0).unwrap();
    assert!(b.iterations > a.iterations);
    let d = b.field.difference(&a.field).unwrap().norm(a.params.alpha, cfg.kappa).unwrap();
    assert!(d <= 1e-10, "{d}");
}

#[test]
fn large_data_blows_up() {
    let cfg = config(1e3);
    match solve_kappa_solution(&cfg, 10.0) {
        Err(Error::BlowUp { .. }) => {}
        other => panic!("expected blow-up, got {:?}", other.map(|r| r.iterations)),
    }
}

#[test]
fn iteration_cap_reports_contraction() {
    let mut cfg = config(1e-2);
    cfg.max_iter = 2;
    match solve_kappa_solution(&cfg, 10.0) {
        Err(Error::NotConverged { iterations: 2, last_ratio, .. }) => assert!(last_ratio < 1.0),
        other => panic!("{:?}", other.map(|r| r.iterations)),
    }
}

#[test]
fn matching_hits_target_rotation() {
    let mut cfg = config(1e-3);
    cfg.mu_star = 10.5;
    let rep = match_mu_star(&cfg).unwrap();
    let realized = rep.mu - rep.field.gamma.get(0).d1[0].re;
    assert!((realized - 10.5).abs() <= cfg.tol_mu);
    assert!((rep.mu_star_realized - 10.5).abs() <= cfg.tol_mu);
    let (lo, hi) = rep.params.interval();
    assert!(rep.mu_evaluations.iter().any(|(m, _)| *m == lo));
    assert!(rep.mu_evaluations.iter().any(|(m, _)| *m == hi));
}

#[test]
fn unreachable_target_is_not_bracketed() {
    let mut cfg = config(1e-3);
    cfg.mu_star = 40.0;
    assert!(matches!(match_mu_star(&cfg), Err(Error::NotBracketed { .. })));
}
