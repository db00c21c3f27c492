//! The bilinear convection term: a truncated mode convolution of stream
//! function and vorticity.

use num_complex::Complex64 as C64;
use rayon::prelude::*;

use crate::error::Result;
use crate::grid_quadrature::{RadialFunction, TailModel, TailTerm};
use crate::mode_algebra::{Modes, SpectralField};

/// Tail exponent assigned to the convection term, `4 + 2 alpha`.
pub fn nl_tail_exponent(alpha: f64) -> f64 {
    4.0 + 2.0 * alpha
}

/// `F_n = -(i/r) sum_{k+l=n} (k w^a_k d_r gamma^b_l - l gamma^a_l d_r w^b_k)`
/// for `|n| <= N`; pairs outside the cutoff are dropped. Each output carries
/// a single power tail `r^-(4+2 alpha)` matched at `R_max`.
pub fn compute_nl(xa: &SpectralField, xb: &SpectralField, alpha: f64) -> Result<Modes<RadialFunction>> {
    xa.check_compatible(xb)?;
    let grid = xa.grid().clone();
    let n_max = xa.n_max() as i64;
    let exponent = C64::new(nl_tail_exponent(alpha), 0.0);
    let r_max = grid.r_max();
    let modes = (-n_max..=n_max)
        .into_par_iter()
        .map(|n| {
            let lo = (-n_max).max(n - n_max);
            let hi = n_max.min(n + n_max);
            let mut values = vec![C64::new(0.0, 0.0); grid.len()];
            for k in lo..=hi {
                let l = n - k;
                let wa = xa.w.get(k).values();
                let dgb = &xb.gamma.get(l).d1;
                let ga = xa.gamma.get(l).values();
                let dwb = &xb.w.get(k).d1;
                let (kf, lf) = (k as f64, l as f64);
                for (j, v) in values.iter_mut().enumerate() {
                    *v += kf * wa[j] * dgb[j] - lf * ga[j] * dwb[j];
                }
            }
            let minus_i = C64::new(0.0, -1.0);
            for (v, r) in values.iter_mut().zip(grid.nodes()) {
                *v *= minus_i / r;
            }
            let edge = values[grid.cells()];
            let f = RadialFunction::new(grid.clone(), values)?;
            if edge == C64::new(0.0, 0.0) {
                Ok(f)
            } else {
                f.with_tail(TailModel::anchored(r_max, vec![TailTerm { exponent, value: edge }]))
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Modes::from_vec(xa.n_max(), modes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mode_algebra::ModeProfile;
    use crate::grid_quadrature::RadialGrid;
    use std::sync::Arc;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn power(grid: &Arc<RadialGrid>, p: f64) -> ModeProfile {
        let nodes = grid.nodes();
        ModeProfile::new(
            RadialFunction::power(grid.clone(), c(1.0, 0.0), c(p, 0.0)).unwrap(),
            nodes.iter().map(|r| c(-p * r.powf(-p - 1.0), 0.0)).collect(),
            nodes.iter().map(|r| c(p * (p + 1.0) * r.powf(-p - 2.0), 0.0)).collect(),
        )
        .unwrap()
    }

    #[test]
    fn nl_examples() {
        let grid = Arc::new(RadialGrid::new(100.0, 50).unwrap());
        let mut xa = SpectralField::zeros(grid.clone(), 2);
        *xa.w.get_mut(1) = power(&grid, 3.0);
        let mut xb = SpectralField::zeros(grid.clone(), 2);
        *xb.gamma.get_mut(1) = power(&grid, 2.0);
        let f = compute_nl(&xa, &xb, 0.1).unwrap();
        for (j, &r) in grid.nodes().iter().enumerate() {
            assert!((f.get(2).at(j) - c(0.0, 2.0 * r.powi(-7))).norm() < 1e-13 * r.powi(-7));
            assert_eq!(f.get(0).at(j), c(0.0, 0.0));
        }

        let mut x = SpectralField::zeros(grid.clone(), 2);
        *x.w.get_mut(1) = power(&grid, 3.0);
        *x.gamma.get_mut(1) = power(&grid, 2.0);
        let f = compute_nl(&x, &x, 0.1).unwrap();
        for (j, &r) in grid.nodes().iter().enumerate() {
            assert!((f.get(2).at(j) - c(0.0, -r.powi(-7))).norm() < 1e-13 * r.powi(-7));
        }
        assert_eq!(f.get(2).tail().unwrap().leading_exponent(), Some(c(4.2, 0.0)));

        let zero = SpectralField::zeros(grid.clone(), 2);
        for f in [compute_nl(&zero, &x, 0.1).unwrap(), compute_nl(&x, &zero, 0.1).unwrap()] {
            assert!(f.values().iter().all(|m| m.is_zero()));
        }
    }
}
