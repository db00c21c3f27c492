use num_complex::Complex64 as C64;
use rotorflow::field_eval::{boundary_flux, boundary_mismatch, decay_report, eval_fields, residual_check};
use rotorflow::linear_solver::TraceData;
use rotorflow::mode_algebra::BoundaryCoeffs;
use rotorflow::nonlinearity::compute_nl;
use rotorflow::solver::{solve_kappa_solution, SolverConfig};

fn solved() -> (SolverConfig, rotorflow::solver::SolveReport) {
    let n_max = 5;
    let mut b = TraceData::zeros(n_max);
    b.v_theta = BoundaryCoeffs::from_fn(n_max, |n| match n {
        1 => C64::new(1e-3, 2e-4),
        -1 => C64::new(1e-3, -2e-4),
        _ => C64::new(0.0, 0.0),
    })
    .unwrap();
    b.v_r = BoundaryCoeffs::from_fn(n_max, |n| match n {
        3 => C64::new(1e-4, -1e-4),
        -3 => C64::new(1e-4, 1e-4),
        _ => C64::new(0.0, 0.0),
    })
    .unwrap();
    let cfg = SolverConfig::new(10.0, b);
    let rep = solve_kappa_solution(&cfg, 10.0).unwrap();
    (cfg, rep)
}

#[test]
fn converged_solution_invariants() {
    let (cfg, rep) = solved();
    let f = eval_fields(&rep.field, rep.mu, 20).unwrap();
    assert!(boundary_flux(&f).abs() <= 1e-12);
    let dr0 = rep.field.gamma.get(0).d1[0].re;
    assert!(boundary_mismatch(&f, &cfg.boundary, dr0) <= cfg.tol_fixed_point);

    let nl = compute_nl(&rep.field, &rep.field, rep.params.alpha).unwrap();
    let res = residual_check(&f, &rep.field, &nl).unwrap();
    assert!(res.aggregate <= 1e-6);

    let decay = decay_report(&f, rep.params.alpha);
    assert!(decay.passed(), "{decay:?}");
    let last = decay.rows.last().unwrap();
    assert!(decay.asymptotic_deviation <= last.r_sup_v * (1.0 + 1e-12));
}

#[test]
fn perturbed_coefficient_breaks_residual() {
    let (_, rep) = solved();
    let mut x = rep.field.clone();
    let nl = compute_nl(&x, &x, rep.params.alpha).unwrap();
    let mut vals = x.gamma.get(0).values().to_vec();
    vals[100] += C64::new(1e-3, 0.0);
    x.gamma.get_mut(0).value = rotorflow::grid_quadrature::RadialFunction::new(x.grid().clone(), vals).unwrap();
    let f = eval_fields(&x, rep.mu, 20).unwrap();
    let res = residual_check(&f, &x, &nl).unwrap();
    assert!(res.aggregate_fd > 1.0);
}
