//! Physical-space synthesis of the spectral solution, PDE residuals and
//! decay diagnostics.

use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid_quadrature::RadialFunction;
use crate::linear_solver::TraceData;
use crate::mode_algebra::{Modes, SpectralField};

/// Largest tolerated `|c_{-n} - conj(c_n)|` before synthesis.
pub const IMAGINARY_TOL: f64 = 1e-12;

/// Fields sampled on the radial grid times a uniform `theta` grid.
#[derive(Debug, Clone)]
pub struct PhysicalField {
    pub radii: Vec<f64>,
    pub theta: Vec<f64>,
    pub mu: f64,
    /// Row-major, `theta` index first.
    pub u_r: Vec<f64>,
    pub u_theta: Vec<f64>,
    pub omega: Vec<f64>,
    pub psi: Vec<f64>,
}

impl PhysicalField {
    pub fn m(&self) -> usize {
        self.theta.len()
    }

    pub fn index(&self, i_theta: usize, j: usize) -> usize {
        i_theta * self.radii.len() + j
    }

    /// Perturbation velocity magnitude `|u - mu e_theta / r|` at a sample.
    pub fn perturbation_speed(&self, i_theta: usize, j: usize) -> f64 {
        let k = self.index(i_theta, j);
        let vt = self.u_theta[k] - self.mu / self.radii[j];
        self.u_r[k].hypot(vt)
    }

    /// `sup_theta |u - mu e_theta / r|` at radius index `j`.
    pub fn sup_perturbation(&self, j: usize) -> f64 {
        (0..self.m()).map(|i| self.perturbation_speed(i, j)).fold(0.0, f64::max)
    }
}

/// Default theta resolution `4N`, raised to `2N + 1` when needed.
pub fn default_theta_points(n_max: usize) -> usize {
    (4 * n_max).max(2 * n_max + 1)
}

fn check_symmetry(modes: &Modes<Vec<C64>>) -> Result<()> {
    for (n, values) in modes.iter().filter(|(n, _)| *n >= 0) {
        let mirror = modes.get(-n);
        let residue = values
            .iter()
            .zip(mirror)
            .map(|(a, b)| (b - a.conj()).norm())
            .fold(0.0, f64::max);
        if residue > IMAGINARY_TOL {
            return Err(Error::Asymmetric { mode: n, residue });
        }
    }
    Ok(())
}

/// Real synthesis `sum_n c_n(r_j) e^{i n theta}` of a symmetric mode map.
fn synthesize(modes: &Modes<Vec<C64>>, theta: &[f64], len: usize) -> Vec<f64> {
    let n_max = modes.n_max() as i64;
    theta
        .par_iter()
        .flat_map_iter(|&th| {
            let phases: Vec<C64> = (0..=n_max).map(|n| C64::from_polar(1.0, n as f64 * th)).collect();
            (0..len).map(move |j| {
                let mut acc = modes.get(0)[j].re;
                for n in 1..=n_max {
                    // average with the mirror so that rounding asymmetry cancels
                    let c = 0.5 * (modes.get(n)[j] + modes.get(-n)[j].conj());
                    acc += 2.0 * (c * phases[n as usize]).re;
                }
                acc
            })
            .collect::<Vec<_>>()
        })
        .collect()
}

pub fn eval_fields(x: &SpectralField, mu: f64, m: usize) -> Result<PhysicalField> {
    let n_max = x.n_max();
    if m < 2 * n_max + 1 {
        return Err(Error::InsufficientSampling { m, n_max });
    }
    let grid = x.grid();
    let radii = grid.nodes().to_vec();
    let len = radii.len();
    let theta: Vec<f64> = (0..m).map(|i| 2.0 * PI * i as f64 / m as f64).collect();
    let i = C64::new(0.0, 1.0);

    let gamma = x.gamma.map(|_, p| p.values().to_vec());
    let dgamma = x.gamma.map(|_, p| p.d1.clone());
    let w = x.w.map(|_, p| p.values().to_vec());
    for modes in [&gamma, &dgamma, &w] {
        check_symmetry(modes)?;
    }
    let ur_modes = gamma.map(|n, g| g.iter().zip(&radii).map(|(v, r)| i * n as f64 / r * v).collect());

    let gamma_sum = synthesize(&gamma, &theta, len);
    let ur = synthesize(&ur_modes, &theta, len);
    let dgamma_sum = synthesize(&dgamma, &theta, len);
    let omega = synthesize(&w, &theta, len);

    let mut psi = gamma_sum;
    let mut u_theta = dgamma_sum;
    for k in 0..m * len {
        let r = radii[k % len];
        psi[k] -= mu * r.ln();
        u_theta[k] = mu / r - u_theta[k];
    }
    Ok(PhysicalField {
        radii,
        theta,
        mu,
        u_r: ur,
        u_theta,
        omega,
        psi,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeResidual {
    pub n: i64,
    /// `sup r^2 |gamma'' + gamma'/r - n^2 gamma / r^2 + w|` from stored derivatives.
    pub poisson: f64,
    /// `sup r^2 |w'' + w'/r - (n^2 + i mu n) w / r^2 - F|` from stored derivatives.
    pub vorticity: f64,
    /// The same two residuals with centered second differences in `ln r`.
    pub poisson_fd: f64,
    pub vorticity_fd: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResidualReport {
    pub modes: Vec<ModeResidual>,
    pub aggregate: f64,
    pub aggregate_fd: f64,
}

/// Mode-wise residuals of both perturbation equations over interior nodes.
pub fn residual_check(f: &PhysicalField, x: &SpectralField, f_used: &Modes<RadialFunction>) -> Result<ResidualReport> {
    if f_used.n_max() != x.n_max() {
        return Err(Error::CutoffMismatch(x.n_max(), f_used.n_max()));
    }
    let grid = x.grid();
    let r = grid.nodes();
    let h = grid.log_step();
    let mu = f.mu;
    let modes: Vec<ModeResidual> = x
        .gamma
        .indices()
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|n| {
            let g = x.gamma.get(n);
            let w = x.w.get(n);
            let src = f_used.get(n);
            let nf = n as f64;
            let lam_g = C64::new(nf * nf, 0.0);
            let lam_w = C64::new(nf * nf, mu * nf);
            let (gv, wv) = (g.values(), w.values());
            let mut out = ModeResidual {
                n,
                poisson: 0.0,
                vorticity: 0.0,
                poisson_fd: 0.0,
                vorticity_fd: 0.0,
            };
            for j in 1..r.len() - 1 {
                let rr = r[j] * r[j];
                let p = rr * g.d2[j] + r[j] * g.d1[j] - lam_g * gv[j] + rr * wv[j];
                let v = rr * w.d2[j] + r[j] * w.d1[j] - lam_w * wv[j] - rr * src.at(j);
                let gtt = (gv[j + 1] - 2.0 * gv[j] + gv[j - 1]) / (h * h);
                let wtt = (wv[j + 1] - 2.0 * wv[j] + wv[j - 1]) / (h * h);
                let pf = gtt - lam_g * gv[j] + rr * wv[j];
                let vf = wtt - lam_w * wv[j] - rr * src.at(j);
                out.poisson = out.poisson.max(p.norm());
                out.vorticity = out.vorticity.max(v.norm());
                out.poisson_fd = out.poisson_fd.max(pf.norm());
                out.vorticity_fd = out.vorticity_fd.max(vf.norm());
            }
            out
        })
        .collect();
    let aggregate = modes.iter().map(|m| m.poisson.max(m.vorticity)).fold(0.0, f64::max);
    let aggregate_fd = modes.iter().map(|m| m.poisson_fd.max(m.vorticity_fd)).fold(0.0, f64::max);
    Ok(ResidualReport {
        modes,
        aggregate,
        aggregate_fd,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayRow {
    pub r: f64,
    pub sup_v: f64,
    pub r_sup_v: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecayReport {
    /// Every node in `[R_max / 100, R_max]`; empty when the perturbation vanishes.
    pub rows: Vec<DecayRow>,
    pub identically_zero: bool,
    /// Least-squares slope of `ln sup_v` against `ln r`.
    pub slope: Option<f64>,
    /// `-(1 + alpha) + 0.05`.
    pub slope_bound: f64,
    pub slope_ok: bool,
    /// `r sup_v` decreases across the outer decade.
    pub decreasing_ok: bool,
    /// `sup_theta |r u_theta - mu|` at `R_max`.
    pub asymptotic_deviation: f64,
}

impl DecayReport {
    pub fn passed(&self) -> bool {
        self.identically_zero || (self.slope_ok && self.decreasing_ok)
    }
}

const DECAY_ROWS_PER_DECADE: f64 = 20.0;

fn ls_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

pub fn decay_report(f: &PhysicalField, alpha: f64) -> DecayReport {
    let r_max = *f.radii.last().expect("grid has nodes");
    let last = f.radii.len() - 1;
    let slope_bound = -(1.0 + alpha) + 0.05;
    let asymptotic_deviation = (0..f.m())
        .map(|i| (r_max * f.u_theta[f.index(i, last)] - f.mu).abs())
        .fold(0.0, f64::max);

    let rows: Vec<DecayRow> = f
        .radii
        .iter()
        .enumerate()
        .filter(|(_, &r)| r >= r_max / 100.0 * (1.0 - 1e-12))
        .map(|(j, &r)| {
            let sup_v = f.sup_perturbation(j);
            DecayRow { r, sup_v, r_sup_v: r * sup_v }
        })
        .collect();
    if rows.iter().all(|row| row.sup_v == 0.0) {
        return DecayReport {
            rows: Vec::new(),
            identically_zero: true,
            slope: None,
            slope_bound,
            slope_ok: true,
            decreasing_ok: true,
            asymptotic_deviation,
        };
    }
    let (xs, ys): (Vec<f64>, Vec<f64>) = rows
        .iter()
        .filter(|row| row.sup_v > 0.0)
        .map(|row| (row.r.ln(), row.sup_v.ln()))
        .unzip();
    let slope = (xs.len() >= 2).then(|| ls_slope(&xs, &ys));

    let outer: Vec<&DecayRow> = rows.iter().filter(|row| row.r >= r_max / 10.0 * (1.0 - 1e-12)).collect();
    let stride = ((outer.len() as f64 / DECAY_ROWS_PER_DECADE).floor() as usize).max(1);
    let mut thinned: Vec<&DecayRow> = outer.iter().copied().step_by(stride).collect();
    if let Some(end) = outer.last() {
        if thinned.last().map(|t| t.r) != Some(end.r) {
            thinned.push(end);
        }
    }
    let decreasing_ok = thinned.windows(2).all(|w| w[1].r_sup_v < w[0].r_sup_v);
    DecayReport {
        slope_ok: slope.is_some_and(|s| s <= slope_bound),
        rows,
        identically_zero: false,
        slope,
        slope_bound,
        decreasing_ok,
        asymptotic_deviation,
    }
}

/// `int_0^{2 pi} u_r(1, theta) d theta` by the rectangle rule (exact for the
/// truncated series).
pub fn boundary_flux(f: &PhysicalField) -> f64 {
    let m = f.m();
    (0..m).map(|i| f.u_r[f.index(i, 0)]).sum::<f64>() * 2.0 * PI / m as f64
}

/// Sup-distance on `r = 1` between the synthesized velocity and the boundary
/// data `v*` plus the realized rotation `mu - d_r gamma_0(1)`.
pub fn boundary_mismatch(f: &PhysicalField, data: &TraceData, dr_gamma0_at_1: f64) -> f64 {
    let n_max = data.v_r.n_max() as i64;
    let mu_realized = f.mu - dr_gamma0_at_1;
    (0..f.m())
        .map(|i| {
            let th = f.theta[i];
            let (mut vr, mut vt) = (0.0, mu_realized);
            for n in -n_max..=n_max {
                let e = C64::from_polar(1.0, n as f64 * th);
                vr += (data.v_r.get(n) * e).re;
                vt += (data.v_theta.get(n) * e).re;
            }
            let k = f.index(i, 0);
            (f.u_r[k] - vr).abs().max((f.u_theta[k] - vt).abs())
        })
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid_quadrature::RadialGrid;
    use crate::mode_algebra::ModeProfile;
    use std::sync::Arc;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn single_gamma(grid: &Arc<RadialGrid>) -> SpectralField {
        let mut x = SpectralField::zeros(grid.clone(), 2);
        for n in [1, -1] {
            let nodes = grid.nodes();
            *x.gamma.get_mut(n) = ModeProfile::new(
                RadialFunction::power(grid.clone(), c(1.0, 0.0), c(1.0, 0.0)).unwrap(),
                nodes.iter().map(|r| c(-1.0 / (r * r), 0.0)).collect(),
                nodes.iter().map(|r| c(2.0 / (r * r * r), 0.0)).collect(),
            )
            .unwrap();
        }
        x
    }

    #[test]
    fn background_flow() {
        let grid = Arc::new(RadialGrid::new(100.0, 40).unwrap());
        let x = SpectralField::zeros(grid.clone(), 2);
        let f = eval_fields(&x, 10.0, 8).unwrap();
        for i in 0..8 {
            for (j, &r) in grid.nodes().iter().enumerate() {
                let k = f.index(i, j);
                assert!((f.u_theta[k] - 10.0 / r).abs() < 1e-15 * 10.0 / r);
                assert_eq!(f.u_r[k], 0.0);
                assert_eq!(f.omega[k], 0.0);
            }
        }
        let rep = decay_report(&f, 0.05);
        assert!(rep.identically_zero && rep.rows.is_empty());
        assert!(matches!(eval_fields(&x, 10.0, 4), Err(Error::InsufficientSampling { .. })));
    }

    #[test]
    fn single_mode_synthesis_and_decay() {
        let grid = Arc::new(RadialGrid::new(1e4, 400).unwrap());
        let x = single_gamma(&grid);
        let f = eval_fields(&x, 10.0, 8).unwrap();
        for i in 0..8 {
            let th = f.theta[i];
            for (j, &r) in grid.nodes().iter().enumerate() {
                let expect = -2.0 * th.sin() / (r * r);
                assert!((f.u_r[f.index(i, j)] - expect).abs() < 1e-14 / (r * r));
            }
        }
        let rep = decay_report(&f, 0.05);
        assert!((rep.slope.unwrap() + 2.0).abs() < 1e-9);
        assert!(rep.passed());
        assert!(boundary_flux(&f).abs() < 1e-14);
    }

    #[test]
    fn asymmetric_input_rejected() {
        let grid = Arc::new(RadialGrid::new(100.0, 40).unwrap());
        let mut x = single_gamma(&grid);
        *x.gamma.get_mut(-1) = ModeProfile::zeros(grid.clone());
        assert!(matches!(eval_fields(&x, 10.0, 8), Err(Error::Asymmetric { mode: 1, .. })));
    }

    #[test]
    fn zero_residual_for_zero_solution() {
        let grid = Arc::new(RadialGrid::new(100.0, 40).unwrap());
        let x = SpectralField::zeros(grid.clone(), 2);
        let f = eval_fields(&x, 10.0, 8).unwrap();
        let src = Modes::from_fn(2, |_| RadialFunction::zeros(grid.clone()));
        let rep = residual_check(&f, &x, &src).unwrap();
        assert_eq!(rep.aggregate, 0.0);
        assert_eq!(rep.aggregate_fd, 0.0);
    }
}
