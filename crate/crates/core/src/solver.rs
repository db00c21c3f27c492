//! Fixed-point driver for `Phi_mu`, the kappa-solution search and the
//! secant matching of the asymptotic rotation `mu*`.

use std::sync::Arc;

use log::{debug, info};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::grid_quadrature::{RadialFunction, RadialGrid};
use crate::linear_solver::{apply_s_mu, boundary_inverse, trace_boundary, LinearSolveInput, TraceData};
use crate::mode_algebra::{compute_zeta, critical_params, BoundaryCoeffs, CriticalParams, Modes, SpectralField, ZetaTable};
use crate::nonlinearity::compute_nl;

/// Any monitored norm beyond this multiple of the first one aborts the solve.
pub const BLOW_UP_FACTOR: f64 = 1e6;

const MAX_MU_EVALUATIONS: usize = 60;

#[derive(Debug, Clone)]
pub struct SolverConfig {
    pub mu0: f64,
    pub mu_star: f64,
    pub boundary: TraceData,
    pub kappa: f64,
    pub n_max: usize,
    pub r_max: f64,
    pub cells: usize,
    pub tol_fixed_point: f64,
    pub tol_mu: f64,
    pub max_iter: usize,
    pub relaxation: f64,
}

impl SolverConfig {
    /// Defaults for everything but `mu0` and the boundary data; `mu_star`
    /// starts at `mu0`.
    pub fn new(mu0: f64, boundary: TraceData) -> Self {
        Self {
            mu0,
            mu_star: mu0,
            n_max: boundary.v_r.n_max(),
            boundary,
            kappa: 2.0,
            r_max: 1e4,
            cells: 600,
            tol_fixed_point: 1e-12,
            tol_mu: 1e-10,
            max_iter: 50,
            relaxation: 1.0,
        }
    }

    pub fn validate(&self) -> Result<CriticalParams> {
        let params = critical_params(self.mu0)?;
        let b = &self.boundary;
        if b.v_r.n_max() != self.n_max || b.v_theta.n_max() != self.n_max {
            return Err(Error::CutoffMismatch(self.n_max, b.v_r.n_max()));
        }
        for (what, c) in [("v_r", b.v_r.get(0)), ("v_theta", b.v_theta.get(0))] {
            if c != C64::new(0.0, 0.0) {
                return Err(Error::NonzeroZeroMode {
                    what: format!("boundary {what}"),
                    value: c.to_string(),
                });
            }
        }
        if !(self.relaxation > 0.0 && self.relaxation <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "relaxation must lie in (0, 1], got {}",
                self.relaxation
            )));
        }
        if self.kappa.is_nan() || self.kappa <= 0.0 {
            return Err(Error::InvalidParameter(format!("kappa must be positive, got {}", self.kappa)));
        }
        if !(self.tol_fixed_point > 0.0 && self.tol_mu > 0.0) || self.max_iter == 0 {
            return Err(Error::InvalidParameter("tolerances and max_iter must be positive".into()));
        }
        if !self.mu_star.is_finite() {
            return Err(Error::InvalidParameter("mu_star must be finite".into()));
        }
        Ok(params)
    }

    pub fn grid(&self) -> Result<Arc<RadialGrid>> {
        Ok(Arc::new(RadialGrid::new(self.r_max, self.cells)?))
    }
}

/// `mu` values at which `Re zeta_{+-1} > 2 + 2 alpha`, so that sources with
/// the assumed decay produce decaying modes.
pub fn admissible_mu(params: &CriticalParams, mu: f64) -> bool {
    mu.is_finite() && mu > params.mu_crit && crate::mode_algebra::rho_mu(mu) > 2.0 + 2.0 * params.alpha
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolutionNorms {
    /// `U^2_{alpha, kappa+4}` norm of `gamma`.
    pub gamma: f64,
    /// `U^2_{alpha+2, kappa+2}` norm of `w`.
    pub w: f64,
    pub gamma_star: f64,
    pub w_star: f64,
}

impl SolutionNorms {
    pub fn field(&self) -> f64 {
        self.gamma + self.w
    }
}

#[derive(Debug, Clone)]
pub struct SolveReport {
    pub field: SpectralField,
    /// Source `NL(x, x)` that produced `field` through `S_mu`.
    pub source: Modes<RadialFunction>,
    pub x_star: (BoundaryCoeffs, BoundaryCoeffs),
    pub mu: f64,
    pub mu_star_realized: f64,
    pub iterations: usize,
    pub contraction_history: Vec<f64>,
    pub phi_residual: f64,
    pub trace_mismatch: f64,
    pub norms: SolutionNorms,
    pub params: CriticalParams,
    pub kappa: f64,
    /// `(mu, g(mu))` pairs visited by the matching, in order.
    pub mu_evaluations: Vec<(f64, f64)>,
}

impl SolveReport {
    /// Ratio of the last two update norms, if both exist.
    pub fn last_contraction(&self) -> Option<f64> {
        let h = &self.contraction_history;
        (h.len() >= 2 && h[h.len() - 2] > 0.0).then(|| h[h.len() - 1] / h[h.len() - 2])
    }
}

/// One evaluation of `Phi_mu`.
#[derive(Debug, Clone)]
pub struct PhiValue {
    /// `S_mu(NL(x,x), x*) - x`.
    pub residual: SpectralField,
    /// `Gamma_1 S_mu(NL(x,x), x*)`.
    pub trace: TraceData,
    /// `S_mu(NL(x,x), x*)` itself.
    pub image: SpectralField,
    pub source: Modes<RadialFunction>,
}

pub fn assemble_phi(
    x: &SpectralField,
    x_star: &(BoundaryCoeffs, BoundaryCoeffs),
    zeta: &Arc<ZetaTable>,
    alpha: f64,
) -> Result<PhiValue> {
    let source = compute_nl(x, x, alpha)?;
    let input = LinearSolveInput::new(source.clone(), x_star.0.clone(), x_star.1.clone(), zeta.clone())?;
    let image = apply_s_mu(&input)?;
    let trace = trace_boundary(&image);
    let residual = image.difference(x)?;
    Ok(PhiValue {
        residual,
        trace,
        image,
        source,
    })
}

fn solution_norms(x: &SpectralField, x_star: &(BoundaryCoeffs, BoundaryCoeffs), alpha: f64, kappa: f64) -> Result<SolutionNorms> {
    Ok(SolutionNorms {
        gamma: x.gamma_norm(alpha, kappa)?,
        w: x.w_norm(alpha, kappa)?,
        gamma_star: x_star.0.norm(kappa + 4.0),
        w_star: x_star.1.norm(kappa + 2.0),
    })
}

/// Picard iteration for `Phi_mu(x, x*) = (0, v*)` at fixed `mu`.
pub fn solve_kappa_solution(cfg: &SolverConfig, mu: f64) -> Result<SolveReport> {
    let params = cfg.validate()?;
    if !admissible_mu(&params, mu) {
        return Err(Error::InvalidParameter(format!(
            "mu = {mu} is outside the admissible range: Re zeta_1 must exceed 2 + 2 alpha = {}",
            2.0 + 2.0 * params.alpha
        )));
    }
    let alpha = params.alpha;
    let kappa = cfg.kappa;
    let grid = cfg.grid()?;
    let zeta = Arc::new(compute_zeta(mu, cfg.n_max)?);
    let target = &cfg.boundary;

    let mut x = SpectralField::zeros(grid, cfg.n_max);
    let mut x_star = boundary_inverse(&target.v_r, &target.v_theta, &zeta)?;
    let mut history = Vec::new();
    let mut initial: Option<f64> = None;

    for iteration in 1..=cfg.max_iter {
        let phi = assemble_phi(&x, &x_star, &zeta, alpha)?;
        let image_norm = phi.image.norm(alpha, kappa)?;
        let res = phi.residual.norm(alpha, kappa)?;
        let mismatch = phi.trace.max_gap(target)?;
        let base = *initial.get_or_insert(image_norm.max(f64::MIN_POSITIVE));
        if !(image_norm.is_finite() && res.is_finite()) || image_norm > BLOW_UP_FACTOR * base {
            return Err(Error::BlowUp {
                iteration,
                norm: image_norm,
                initial: base,
            });
        }
        history.push(res);
        debug!("mu = {mu}: iteration {iteration}, update {res:.3e}, trace mismatch {mismatch:.3e}");

        if res <= cfg.tol_fixed_point && mismatch <= cfg.tol_fixed_point {
            let norms = solution_norms(&phi.image, &x_star, alpha, kappa)?;
            let dr0 = phi.trace.dr_gamma0_at_1;
            info!("mu = {mu}: converged in {iteration} iterations, d_r gamma_0(1) = {dr0:.6e}");
            return Ok(SolveReport {
                field: phi.image,
                source: phi.source,
                x_star,
                mu,
                mu_star_realized: mu - dr0,
                iterations: iteration,
                contraction_history: history,
                phi_residual: res,
                trace_mismatch: mismatch,
                norms,
                params,
                kappa,
                mu_evaluations: Vec::new(),
            });
        }

        let rho = cfg.relaxation;
        x = if rho == 1.0 { phi.image } else { x.lin_comb(1.0 - rho, &phi.image, rho)? };
        let gap_r = target.v_r.sub(&phi.trace.v_r)?;
        let gap_t = target.v_theta.sub(&phi.trace.v_theta)?;
        let (dg, dw) = boundary_inverse(&gap_r, &gap_t, &zeta)?;
        x_star = (x_star.0.add(&dg)?, x_star.1.add(&dw)?);
    }

    let h = &history;
    let last_ratio = if h.len() >= 2 && h[h.len() - 2] > 0.0 {
        h[h.len() - 1] / h[h.len() - 2]
    } else {
        f64::NAN
    };
    Err(Error::NotConverged {
        iterations: cfg.max_iter,
        last_ratio,
        residual: h.last().copied().unwrap_or(f64::NAN),
    })
}

/// Find `mu` with `mu - d_r gamma_0(1) = mu*`.
///
/// `g` is tried at `mu*` first; otherwise the root is bracketed by `mu_-` and
/// `mu_+` and refined by secant steps, bisecting whenever a step leaves the
/// current bracket.
pub fn match_mu_star(cfg: &SolverConfig) -> Result<SolveReport> {
    let params = cfg.validate()?;
    let mut evaluations = Vec::new();
    let eval = |mu: f64, evals: &mut Vec<(f64, f64)>| -> Result<(f64, SolveReport)> {
        let report = solve_kappa_solution(cfg, mu)?;
        let g = report.mu_star_realized - cfg.mu_star;
        debug!("g({mu}) = {g:.6e}");
        evals.push((mu, g));
        Ok((g, report))
    };
    let finish = |mut report: SolveReport, evals: Vec<(f64, f64)>| {
        report.mu_evaluations = evals;
        report
    };

    let mut first = None;
    if admissible_mu(&params, cfg.mu_star) {
        let (g, report) = eval(cfg.mu_star, &mut evaluations)?;
        if g.abs() <= cfg.tol_mu {
            return Ok(finish(report, evaluations));
        }
        first = Some((cfg.mu_star, g));
    }

    let (mut lo, mut hi) = params.interval();
    let (mut g_lo, lo_report) = eval(lo, &mut evaluations)?;
    if g_lo.abs() <= cfg.tol_mu {
        return Ok(finish(lo_report, evaluations));
    }
    let (mut g_hi, hi_report) = eval(hi, &mut evaluations)?;
    if g_hi.abs() <= cfg.tol_mu {
        return Ok(finish(hi_report, evaluations));
    }
    if g_lo.signum() == g_hi.signum() {
        return Err(Error::NotBracketed { lo, hi, g_lo, g_hi });
    }
    if let Some((m, g)) = first {
        if m > lo && m < hi {
            if g.signum() == g_lo.signum() {
                (lo, g_lo) = (m, g);
            } else {
                (hi, g_hi) = (m, g);
            }
        }
    }

    // secant on the two most recent points
    let mut prev = (lo, g_lo);
    let mut last = (hi, g_hi);
    if let Some(p) = first.filter(|(m, _)| *m > params.mu_minus && *m < params.mu_plus) {
        last = p;
        prev = if (p.0 - lo).abs() < (p.0 - hi).abs() { (lo, g_lo) } else { (hi, g_hi) };
    }
    let mut best_residual = g_lo.abs().min(g_hi.abs());
    for _ in 0..MAX_MU_EVALUATIONS {
        let denom = last.1 - prev.1;
        let mut mu = if denom != 0.0 {
            last.0 - last.1 * (last.0 - prev.0) / denom
        } else {
            f64::NAN
        };
        if !(mu > lo && mu < hi) {
            mu = 0.5 * (lo + hi);
        }
        let (g, report) = eval(mu, &mut evaluations)?;
        best_residual = best_residual.min(g.abs());
        if g.abs() <= cfg.tol_mu {
            info!("matched mu = {mu} after {} evaluations", evaluations.len());
            return Ok(finish(report, evaluations));
        }
        if g.signum() == g_lo.signum() {
            (lo, g_lo) = (mu, g);
        } else {
            hi = mu;
        }
        prev = last;
        last = (mu, g);
        if hi - lo <= f64::EPSILON * hi {
            break;
        }
    }
    Err(Error::MatchNotConverged {
        iterations: evaluations.len(),
        residual: best_residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_cfg(eps: f64) -> SolverConfig {
        let n_max = 4;
        let mut b = TraceData::zeros(n_max);
        b.v_theta = BoundaryCoeffs::from_fn(n_max, |n| C64::new(if n.abs() == 1 { eps } else { 0.0 }, 0.0)).unwrap();
        let mut cfg = SolverConfig::new(10.0, b);
        cfg.r_max = 1e3;
        cfg.cells = 300;
        cfg
    }

    #[test]
    fn zero_data_converges_immediately() {
        let cfg = small_cfg(0.0);
        let rep = solve_kappa_solution(&cfg, 10.0).unwrap();
        assert_eq!(rep.iterations, 1);
        assert_eq!(rep.norms.field(), 0.0);
        assert!(rep.x_star.0.is_zero() && rep.x_star.1.is_zero());

        let rep = match_mu_star(&cfg).unwrap();
        assert_eq!(rep.mu, 10.0);
        assert_eq!(rep.mu_evaluations.len(), 1);
    }

    #[test]
    fn phi_at_origin_vanishes() {
        let cfg = small_cfg(0.0);
        let grid = cfg.grid().unwrap();
        let zeta = Arc::new(compute_zeta(10.0, 4).unwrap());
        let x = SpectralField::zeros(grid, 4);
        let phi = assemble_phi(&x, &(BoundaryCoeffs::zeros(4), BoundaryCoeffs::zeros(4)), &zeta, 0.05).unwrap();
        assert_eq!(phi.residual.norm(0.05, 2.0).unwrap(), 0.0);
        assert!(phi.trace.v_r.is_zero() && phi.trace.v_theta.is_zero());
    }

    #[test]
    fn subcritical_rejected() {
        let cfg = SolverConfig::new(6.0, TraceData::zeros(2));
        assert!(matches!(solve_kappa_solution(&cfg, 6.0), Err(Error::Subcritical { .. })));
    }

    #[test]
    fn small_data_matches_trace() {
        let cfg = small_cfg(1e-3);
        let rep = solve_kappa_solution(&cfg, 10.0).unwrap();
        assert!(rep.phi_residual <= 1e-12 && rep.trace_mismatch <= 1e-12);
        let tr = trace_boundary(&rep.field);
        assert!(tr.max_gap(&cfg.boundary).unwrap() <= 1e-12);
    }
}
