//! The linear solution operator `S_mu`: mode-wise Green's-function integrals
//! for the vorticity and stream-function ODEs, the boundary trace `Gamma_1`
//! and the inverse boundary map.

use std::sync::Arc;

use num_complex::Complex64 as C64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid_quadrature::{
    double_tail_profile, inward_profile, outward_profile, RadialFunction, RadialGrid, TailModel, TailTerm,
};
use crate::mode_algebra::{BoundaryCoeffs, ModeProfile, Modes, SpectralField, ZetaTable};

/// Sources whose last sample is below this are treated as compactly supported.
pub const DEFAULT_DECAY_FLOOR: f64 = 1e-14;

const RESONANCE_TOL: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct LinearSolveInput {
    pub f: Modes<RadialFunction>,
    pub gamma_star: BoundaryCoeffs,
    pub w_star: BoundaryCoeffs,
    pub zeta: Arc<ZetaTable>,
    pub decay_floor: f64,
}

impl LinearSolveInput {
    pub fn new(
        f: Modes<RadialFunction>,
        gamma_star: BoundaryCoeffs,
        w_star: BoundaryCoeffs,
        zeta: Arc<ZetaTable>,
    ) -> Result<Self> {
        let n_max = f.n_max();
        for (what, b) in [("gamma*", &gamma_star), ("w*", &w_star)] {
            if b.n_max() != n_max {
                return Err(Error::CutoffMismatch(n_max, b.n_max()));
            }
            let c0 = b.get(0);
            if c0 != C64::new(0.0, 0.0) {
                return Err(Error::NonzeroZeroMode {
                    what: format!("{what} (the zero mode is fixed by the source)"),
                    value: c0.to_string(),
                });
            }
        }
        if zeta.n_max() < n_max {
            return Err(Error::CutoffMismatch(n_max, zeta.n_max()));
        }
        let grid = f.get(0).grid().clone();
        if f.values().iter().any(|fn_| !fn_.grid().same_as(&grid)) {
            return Err(Error::GridMismatch);
        }
        Ok(Self {
            f,
            gamma_star,
            w_star,
            zeta,
            decay_floor: DEFAULT_DECAY_FLOOR,
        })
    }

    /// Input with vanishing source, so that only the boundary data act.
    pub fn homogeneous(
        grid: Arc<RadialGrid>,
        gamma_star: BoundaryCoeffs,
        w_star: BoundaryCoeffs,
        zeta: Arc<ZetaTable>,
    ) -> Result<Self> {
        let f = Modes::from_fn(gamma_star.n_max(), |_| RadialFunction::zeros(grid.clone()));
        Self::new(f, gamma_star, w_star, zeta)
    }

    pub fn grid(&self) -> &Arc<RadialGrid> {
        self.f.get(0).grid()
    }
}

/// Boundary traces of a spectral field on `r = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceData {
    pub v_r: BoundaryCoeffs,
    pub v_theta: BoundaryCoeffs,
    pub dr_gamma0_at_1: f64,
}

impl TraceData {
    pub fn zeros(n_max: usize) -> Self {
        Self {
            v_r: BoundaryCoeffs::zeros(n_max),
            v_theta: BoundaryCoeffs::zeros(n_max),
            dr_gamma0_at_1: 0.0,
        }
    }

    /// Largest coefficient gap to `other`, ignoring `dr_gamma0_at_1`.
    pub fn max_gap(&self, other: &TraceData) -> Result<f64> {
        let dr = self.v_r.sub(&other.v_r)?;
        let dt = self.v_theta.sub(&other.v_theta)?;
        Ok(dr.norm(0.0).max(dt.norm(0.0)))
    }
}

fn resonance_check(n: i64, a: C64, b: C64) -> Result<C64> {
    let d = a * a - b * b;
    if d.norm() <= RESONANCE_TOL * (a.norm() * a.norm()).max(1.0) {
        return Err(Error::InvalidParameter(format!(
            "tail exponent {a} resonates with the homogeneous exponent {b} in mode n = {n}"
        )));
    }
    Ok(d)
}

fn build_tail(grid: &RadialGrid, mut terms: Vec<TailTerm>, homogeneous: C64, edge: C64) -> TailModel {
    let r_max = grid.r_max();
    let particular: C64 = terms.iter().map(|t| t.value).sum();
    terms.push(TailTerm {
        exponent: homogeneous,
        value: edge - particular,
    });
    terms.retain(|t| t.value != C64::new(0.0, 0.0));
    TailModel::anchored(r_max, terms)
}

fn source_terms(f: &RadialFunction) -> Vec<TailTerm> {
    f.tail()
        .map(|t| t.rebased(f.grid().r_max()).terms().to_vec())
        .unwrap_or_default()
}

/// Vorticity mode `w_n` for `n != 0` with `w_n(1) = w_star` and source `f`.
pub fn solve_vorticity_mode(n: i64, f: &RadialFunction, w_star: C64, zeta: C64) -> Result<ModeProfile> {
    solve_vorticity_mode_with_floor(n, f, w_star, zeta, DEFAULT_DECAY_FLOOR)
}

pub fn solve_vorticity_mode_with_floor(
    n: i64,
    f: &RadialFunction,
    w_star: C64,
    zeta: C64,
    decay_floor: f64,
) -> Result<ModeProfile> {
    if n == 0 {
        return Err(Error::InvalidParameter("mode solver called with n = 0".into()));
    }
    if zeta.re <= 0.0 {
        return Err(Error::InvalidParameter(format!("zeta_{n} = {zeta} has non-positive real part")));
    }
    let grid = f.grid().clone();
    let inward = inward_profile(f, zeta).map_err(|e| e.in_mode(n))?;
    let outward = outward_profile(f, zeta, decay_floor).map_err(|e| e.in_mode(n))?;
    let two_zeta = 2.0 * zeta;
    let w_bar = w_star + outward[0] / two_zeta;

    let len = grid.len();
    let (mut value, mut d1, mut d2) = (Vec::with_capacity(len), Vec::with_capacity(len), Vec::with_capacity(len));
    for (j, &r) in grid.nodes().iter().enumerate() {
        let hom = w_bar * (-zeta * r.ln()).exp();
        let p = outward[j] / two_zeta;
        let q = inward[j] / two_zeta;
        let w = hom - p - q;
        let dw = -zeta / r * (hom + p - q);
        value.push(w);
        d1.push(dw);
        d2.push(-dw / r + zeta * zeta * w / (r * r) + f.at(j));
    }
    value[0] = w_star;

    let r_max = grid.r_max();
    let mut terms = Vec::new();
    for t in source_terms(f) {
        let p = t.exponent - 2.0;
        let d = resonance_check(n, p, zeta)?;
        terms.push(TailTerm {
            exponent: p,
            value: t.value * r_max * r_max / d,
        });
    }
    let tail = build_tail(&grid, terms, zeta, value[grid.cells()]);
    let value = RadialFunction::new(grid, value)?.with_tail(tail)?;
    ModeProfile::new(value, d1, d2)
}

/// Zero vorticity mode, fixed entirely by `F_0` and decaying at infinity.
pub fn solve_vorticity_zero(f: &RadialFunction) -> Result<ModeProfile> {
    solve_vorticity_zero_with_floor(f, DEFAULT_DECAY_FLOOR)
}

pub fn solve_vorticity_zero_with_floor(f: &RadialFunction, decay_floor: f64) -> Result<ModeProfile> {
    let grid = f.grid().clone();
    let dt = double_tail_profile(f, decay_floor).map_err(|e| e.in_mode(0))?;
    let d1: Vec<C64> = dt.inner.iter().zip(grid.nodes()).map(|(i, r)| -i / r).collect();
    let d2 = d1
        .iter()
        .zip(grid.nodes())
        .enumerate()
        .map(|(j, (d, r))| f.at(j) - d / r)
        .collect();
    let value = RadialFunction::new(grid, dt.outer)?;
    let value = match dt.tail {
        Some(t) => value.with_tail(t)?,
        None => value,
    };
    ModeProfile::new(value, d1, d2)
}

/// Stream-function mode `gamma_n` for `n != 0` with `gamma_n(1) = gamma_star`.
pub fn solve_stream_mode(n: i64, w: &RadialFunction, gamma_star: C64) -> Result<ModeProfile> {
    solve_stream_mode_with_floor(n, w, gamma_star, DEFAULT_DECAY_FLOOR)
}

pub fn solve_stream_mode_with_floor(n: i64, w: &RadialFunction, gamma_star: C64, decay_floor: f64) -> Result<ModeProfile> {
    if n == 0 {
        return Err(Error::InvalidParameter("mode solver called with n = 0".into()));
    }
    let grid = w.grid().clone();
    let k = C64::new(n.unsigned_abs() as f64, 0.0);
    let inward = inward_profile(w, k).map_err(|e| e.in_mode(n))?;
    let outward = outward_profile(w, k, decay_floor).map_err(|e| e.in_mode(n))?;
    let two_k = 2.0 * k;
    let g_bar = gamma_star - outward[0] / two_k;

    let len = grid.len();
    let (mut value, mut d1, mut d2) = (Vec::with_capacity(len), Vec::with_capacity(len), Vec::with_capacity(len));
    for (j, &r) in grid.nodes().iter().enumerate() {
        let hom = g_bar * r.powf(-k.re);
        let p = outward[j] / two_k;
        let q = inward[j] / two_k;
        let g = hom + p + q;
        let dg = k / r * (-hom + p - q);
        value.push(g);
        d1.push(dg);
        d2.push(-dg / r + k * k * g / (r * r) - w.at(j));
    }
    value[0] = gamma_star;

    let r_max = grid.r_max();
    let mut terms = Vec::new();
    for t in source_terms(w) {
        let p = t.exponent - 2.0;
        let d = resonance_check(n, p, k)?;
        terms.push(TailTerm {
            exponent: p,
            value: -t.value * r_max * r_max / d,
        });
    }
    let tail = build_tail(&grid, terms, k, value[grid.cells()]);
    let value = RadialFunction::new(grid, value)?.with_tail(tail)?;
    ModeProfile::new(value, d1, d2)
}

/// Zero stream-function mode, decaying at infinity. `d1[0]` is `d_r gamma_0(1)`.
pub fn solve_stream_zero(w: &RadialFunction) -> Result<ModeProfile> {
    solve_stream_zero_with_floor(w, DEFAULT_DECAY_FLOOR)
}

pub fn solve_stream_zero_with_floor(w: &RadialFunction, decay_floor: f64) -> Result<ModeProfile> {
    let grid = w.grid().clone();
    let dt = double_tail_profile(w, decay_floor).map_err(|e| e.in_mode(0))?;
    let d1: Vec<C64> = dt.inner.iter().zip(grid.nodes()).map(|(i, r)| i / r).collect();
    let d2 = d1
        .iter()
        .zip(grid.nodes())
        .enumerate()
        .map(|(j, (d, r))| -w.at(j) - d / r)
        .collect();
    let value = RadialFunction::new(grid, dt.outer.iter().map(|v| -v).collect())?;
    let value = match dt.tail {
        Some(t) => value.with_tail(t.scaled(C64::new(-1.0, 0.0)))?,
        None => value,
    };
    ModeProfile::new(value, d1, d2)
}

/// Apply `S_mu` to `(F, gamma*, w*)`; modes are solved in parallel.
pub fn apply_s_mu(input: &LinearSolveInput) -> Result<SpectralField> {
    let n_max = input.f.n_max();
    let floor = input.decay_floor;
    let pairs = input
        .f
        .indices()
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|n| {
            let f = input.f.get(n);
            if n == 0 {
                let w = solve_vorticity_zero_with_floor(f, floor)?;
                let g = solve_stream_zero_with_floor(&w.value, floor)?;
                Ok((g, w))
            } else {
                let w = solve_vorticity_mode_with_floor(n, f, input.w_star.get(n), input.zeta.zeta(n), floor)?;
                let g = solve_stream_mode_with_floor(n, &w.value, input.gamma_star.get(n), floor)?;
                Ok((g, w))
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let (gamma, w): (Vec<_>, Vec<_>) = pairs.into_iter().unzip();
    SpectralField::new(
        input.grid().clone(),
        Modes::from_vec(n_max, gamma)?,
        Modes::from_vec(n_max, w)?,
    )
}

/// `Gamma_1`: `v_r,n = i n gamma_n(1)`, `v_theta,n = -d_r gamma_n(1)` for
/// `n != 0`; the masked zero mode is reported as `dr_gamma0_at_1`.
pub fn trace_boundary(x: &SpectralField) -> TraceData {
    let n_max = x.n_max();
    let i = C64::new(0.0, 1.0);
    let zero = C64::new(0.0, 0.0);
    let v_r = Modes::from_fn(n_max, |n| if n == 0 { zero } else { i * n as f64 * x.gamma.get(n).values()[0] });
    let v_theta = Modes::from_fn(n_max, |n| if n == 0 { zero } else { -x.gamma.get(n).d1[0] });
    TraceData {
        v_r: BoundaryCoeffs::constrained(v_r).expect("zero mode cleared"),
        v_theta: BoundaryCoeffs::constrained(v_theta).expect("zero mode cleared"),
        dr_gamma0_at_1: x.gamma.get(0).d1[0].re,
    }
}

/// `T_mu^{-1}`: boundary coefficients `(gamma*, w*)` whose homogeneous
/// solution has traces `(v_r, v_theta)`.
pub fn boundary_inverse(
    v_r: &BoundaryCoeffs,
    v_theta: &BoundaryCoeffs,
    zeta: &ZetaTable,
) -> Result<(BoundaryCoeffs, BoundaryCoeffs)> {
    let n_max = v_r.n_max();
    if v_theta.n_max() != n_max {
        return Err(Error::CutoffMismatch(n_max, v_theta.n_max()));
    }
    if zeta.n_max() < n_max {
        return Err(Error::CutoffMismatch(n_max, zeta.n_max()));
    }
    for (what, b) in [("v_r", v_r), ("v_theta", v_theta)] {
        if b.get(0) != C64::new(0.0, 0.0) {
            return Err(Error::NonzeroZeroMode {
                what: what.into(),
                value: b.get(0).to_string(),
            });
        }
    }
    let i = C64::new(0.0, 1.0);
    let gamma = BoundaryCoeffs::from_fn(n_max, |n| v_r.get(n) / (i * n as f64))?;
    let w = BoundaryCoeffs::from_fn(n_max, |n| {
        let k = n.unsigned_abs() as f64;
        (2.0 - k - zeta.zeta(n)) * (v_theta.get(n) - k * gamma.get(n))
    })?;
    Ok((gamma, w))
}
