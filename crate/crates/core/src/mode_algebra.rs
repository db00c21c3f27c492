//! Mode-indexed bookkeeping: decay exponents `zeta_n`, the critical
//! parameters of the rotating background, weighted sup-norms and conjugate
//! symmetry.

use std::ops::RangeInclusive;
use std::sync::Arc;

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::grid_quadrature::{check_finite, RadialFunction, RadialGrid};

/// Critical angular velocity `sqrt(48)`; above it `Re zeta_{+-1} > 2`.
pub const MU_CRIT: f64 = 6.928_203_230_275_509;

/// Values indexed by the Fourier mode `n` in `-N..=N`.
#[derive(Debug, Clone, PartialEq)]
pub struct Modes<T> {
    n_max: usize,
    items: Vec<T>,
}

impl<T> Modes<T> {
    pub fn from_fn(n_max: usize, mut f: impl FnMut(i64) -> T) -> Self {
        let n = n_max as i64;
        Self {
            n_max,
            items: (-n..=n).map(&mut f).collect(),
        }
    }

    pub fn try_from_fn<E>(n_max: usize, mut f: impl FnMut(i64) -> std::result::Result<T, E>) -> std::result::Result<Self, E> {
        let n = n_max as i64;
        let items = (-n..=n).map(&mut f).collect::<std::result::Result<_, _>>()?;
        Ok(Self { n_max, items })
    }

    /// Items ordered from `n = -N` to `n = N`.
    pub fn from_vec(n_max: usize, items: Vec<T>) -> Result<Self> {
        if items.len() != 2 * n_max + 1 {
            return Err(Error::LengthMismatch {
                what: "mode list".into(),
                expected: 2 * n_max + 1,
                got: items.len(),
            });
        }
        Ok(Self { n_max, items })
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn indices(&self) -> RangeInclusive<i64> {
        -(self.n_max as i64)..=self.n_max as i64
    }

    pub fn contains(&self, n: i64) -> bool {
        n.unsigned_abs() as usize <= self.n_max
    }

    pub fn get(&self, n: i64) -> &T {
        &self.items[(n + self.n_max as i64) as usize]
    }

    pub fn get_mut(&mut self, n: i64) -> &mut T {
        &mut self.items[(n + self.n_max as i64) as usize]
    }

    pub fn iter(&self) -> impl Iterator<Item = (i64, &T)> {
        self.indices().zip(self.items.iter())
    }

    pub fn values(&self) -> &[T] {
        &self.items
    }

    pub fn map<U>(&self, mut f: impl FnMut(i64, &T) -> U) -> Modes<U> {
        Modes {
            n_max: self.n_max,
            items: self.iter().map(|(n, x)| f(n, x)).collect(),
        }
    }

    pub fn into_values(self) -> Vec<T> {
        self.items
    }
}

/// `zeta_n = sqrt(n^2 + i mu n)` (principal branch) for `|n| <= N`.
#[derive(Debug, Clone)]
pub struct ZetaTable {
    mu: f64,
    zeta: Modes<C64>,
}

impl ZetaTable {
    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn n_max(&self) -> usize {
        self.zeta.n_max()
    }

    pub fn zeta(&self, n: i64) -> C64 {
        *self.zeta.get(n)
    }

    pub fn xi(&self, n: i64) -> f64 {
        self.zeta(n).re
    }
}

/// Closed-form real and imaginary parts of `zeta_n`.
pub fn zeta_explicit(mu: f64, n: i64) -> C64 {
    if n == 0 {
        return C64::new(0.0, 0.0);
    }
    let abs_n = n.unsigned_abs() as f64;
    let ratio = mu / n as f64;
    let root = (1.0 + ratio * ratio).sqrt();
    let re = abs_n / std::f64::consts::SQRT_2 * (root + 1.0).sqrt();
    let im = (n as f64 * mu).signum() * abs_n / std::f64::consts::SQRT_2 * (root - 1.0).sqrt();
    C64::new(re, if mu == 0.0 { 0.0 } else { im })
}

pub fn compute_zeta(mu: f64, n_max: usize) -> Result<ZetaTable> {
    if n_max < 1 {
        return Err(Error::InvalidParameter("mode cutoff N must be at least 1".into()));
    }
    if !mu.is_finite() {
        return Err(Error::InvalidParameter(format!("mu must be finite, got {mu}")));
    }
    let zeta = Modes::from_fn(n_max, |n| {
        let nf = n as f64;
        let z = C64::new(nf * nf, mu * nf).sqrt();
        debug_assert!(
            (z - zeta_explicit(mu, n)).norm() <= 1e-12 * z.norm().max(1.0),
            "principal root disagrees with closed form at n = {n}"
        );
        z
    });
    Ok(ZetaTable { mu, zeta })
}

/// `rho_mu = min_{n != 0} Re zeta_n`, attained at `n = +-1`.
pub fn rho_mu(mu: f64) -> f64 {
    (((1.0 + mu * mu).sqrt() + 1.0) / 2.0).sqrt()
}

/// `alpha_mu = min(rho_mu - 2, 1) / 2`.
pub fn alpha_mu(mu: f64) -> f64 {
    0.5 * (rho_mu(mu) - 2.0).min(1.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CriticalParams {
    pub mu0: f64,
    pub mu_crit: f64,
    /// `rho` and `alpha_mu` at `mu0`.
    pub rho_mu: f64,
    pub alpha_mu: f64,
    pub mu_minus: f64,
    pub mu_plus: f64,
    /// Radial decay weight, fixed from `mu_minus`.
    pub alpha: f64,
}

impl CriticalParams {
    pub fn interval(&self) -> (f64, f64) {
        (self.mu_minus, self.mu_plus)
    }
}

pub fn critical_params(mu0: f64) -> Result<CriticalParams> {
    if !(mu0.is_finite() && mu0 > MU_CRIT) {
        return Err(Error::Subcritical { mu0 });
    }
    let mu_minus = (mu0 + MU_CRIT) / 2.0;
    let mu_plus = (2.0 * mu0 + MU_CRIT) / 2.0;
    let alpha = 0.25 * (rho_mu(mu_minus) - 2.0).min(1.0);
    Ok(CriticalParams {
        mu0,
        mu_crit: MU_CRIT,
        rho_mu: rho_mu(mu0),
        alpha_mu: alpha_mu(mu0),
        mu_minus,
        mu_plus,
        alpha,
    })
}

/// Samples of one mode together with its first two radial derivatives.
#[derive(Debug, Clone)]
pub struct ModeProfile {
    pub value: RadialFunction,
    pub d1: Vec<C64>,
    pub d2: Vec<C64>,
}

impl ModeProfile {
    pub fn zeros(grid: Arc<RadialGrid>) -> Self {
        let len = grid.len();
        Self {
            value: RadialFunction::zeros(grid),
            d1: vec![C64::new(0.0, 0.0); len],
            d2: vec![C64::new(0.0, 0.0); len],
        }
    }

    pub fn new(value: RadialFunction, d1: Vec<C64>, d2: Vec<C64>) -> Result<Self> {
        let len = value.grid().len();
        for (what, d) in [("first derivative", &d1), ("second derivative", &d2)] {
            if d.len() != len {
                return Err(Error::LengthMismatch {
                    what: what.into(),
                    expected: len,
                    got: d.len(),
                });
            }
            check_finite(what, d)?;
        }
        Ok(Self { value, d1, d2 })
    }

    pub fn values(&self) -> &[C64] {
        self.value.values()
    }

    /// Samples of the `order`-th derivative.
    pub fn derivative(&self, order: usize) -> &[C64] {
        match order {
            0 => self.value.values(),
            1 => &self.d1,
            2 => &self.d2,
            _ => panic!("derivatives above second order are not stored"),
        }
    }

    pub fn lin_comb(&self, a: C64, other: &ModeProfile, b: C64) -> Result<Self> {
        let comb = |x: &[C64], y: &[C64]| x.iter().zip(y).map(|(p, q)| a * p + b * q).collect();
        Ok(Self {
            value: self.value.lin_comb(a, &other.value, b)?,
            d1: comb(&self.d1, &other.d1),
            d2: comb(&self.d2, &other.d2),
        })
    }

    pub fn conj(&self) -> Self {
        Self {
            value: self.value.conj(),
            d1: self.d1.iter().map(|v| v.conj()).collect(),
            d2: self.d2.iter().map(|v| v.conj()).collect(),
        }
    }
}

/// Stream-function coefficients `gamma_n` and vorticity coefficients `w_n`
/// for `|n| <= N` on one grid.
#[derive(Debug, Clone)]
pub struct SpectralField {
    grid: Arc<RadialGrid>,
    pub gamma: Modes<ModeProfile>,
    pub w: Modes<ModeProfile>,
}

impl SpectralField {
    pub fn zeros(grid: Arc<RadialGrid>, n_max: usize) -> Self {
        let zero = ModeProfile::zeros(grid.clone());
        Self {
            gamma: Modes::from_fn(n_max, |_| zero.clone()),
            w: Modes::from_fn(n_max, |_| zero.clone()),
            grid,
        }
    }

    pub fn new(grid: Arc<RadialGrid>, gamma: Modes<ModeProfile>, w: Modes<ModeProfile>) -> Result<Self> {
        if gamma.n_max() != w.n_max() {
            return Err(Error::CutoffMismatch(gamma.n_max(), w.n_max()));
        }
        let shared = gamma
            .values()
            .iter()
            .chain(w.values())
            .all(|p| p.value.grid().same_as(&grid));
        if !shared {
            return Err(Error::GridMismatch);
        }
        Ok(Self { grid, gamma, w })
    }

    pub fn grid(&self) -> &Arc<RadialGrid> {
        &self.grid
    }

    pub fn n_max(&self) -> usize {
        self.gamma.n_max()
    }

    pub fn check_compatible(&self, other: &SpectralField) -> Result<()> {
        if self.n_max() != other.n_max() {
            return Err(Error::CutoffMismatch(self.n_max(), other.n_max()));
        }
        if !self.grid.same_as(&other.grid) {
            return Err(Error::GridMismatch);
        }
        Ok(())
    }

    /// `a * self + b * other`.
    pub fn lin_comb(&self, a: f64, other: &SpectralField, b: f64) -> Result<Self> {
        self.check_compatible(other)?;
        let (a, b) = (C64::new(a, 0.0), C64::new(b, 0.0));
        let comb = |x: &Modes<ModeProfile>, y: &Modes<ModeProfile>| {
            Modes::try_from_fn(x.n_max(), |n| x.get(n).lin_comb(a, y.get(n), b))
        };
        Ok(Self {
            grid: self.grid.clone(),
            gamma: comb(&self.gamma, &other.gamma)?,
            w: comb(&self.w, &other.w)?,
        })
    }

    pub fn difference(&self, other: &SpectralField) -> Result<Self> {
        self.lin_comb(1.0, other, -1.0)
    }

    pub fn scaled(&self, factor: f64) -> Self {
        let zero = self.clone();
        self.lin_comb(factor, &zero, 0.0).expect("same field")
    }

    /// Sum of the `U^2_{alpha, kappa+4}` norm of `gamma` and the
    /// `U^2_{alpha+2, kappa+2}` norm of `w`.
    pub fn norm(&self, alpha: f64, kappa: f64) -> Result<f64> {
        Ok(self.gamma_norm(alpha, kappa)? + self.w_norm(alpha, kappa)?)
    }

    pub fn gamma_norm(&self, alpha: f64, kappa: f64) -> Result<f64> {
        weighted_norm(&self.gamma, NormParams::new(alpha, kappa + 4.0, 2)?, NormKind::U)
    }

    pub fn w_norm(&self, alpha: f64, kappa: f64) -> Result<f64> {
        weighted_norm(&self.w, NormParams::new(alpha + 2.0, kappa + 2.0, 2)?, NormKind::U)
    }
}

/// Mode sequence of boundary or internal data.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryCoeffs {
    coeffs: Modes<C64>,
    zero_mode_constraint: bool,
}

impl BoundaryCoeffs {
    /// Zero sequence in the constrained space (`coeffs[0] = 0`).
    pub fn zeros(n_max: usize) -> Self {
        Self {
            coeffs: Modes::from_fn(n_max, |_| C64::new(0.0, 0.0)),
            zero_mode_constraint: true,
        }
    }

    pub fn unconstrained(coeffs: Modes<C64>) -> Self {
        Self {
            coeffs,
            zero_mode_constraint: false,
        }
    }

    /// Sequence with vanishing zero mode; rejects a nonzero `coeffs[0]`.
    pub fn constrained(coeffs: Modes<C64>) -> Result<Self> {
        let c0 = *coeffs.get(0);
        if c0 != C64::new(0.0, 0.0) {
            return Err(Error::NonzeroZeroMode {
                what: "boundary coefficients".into(),
                value: c0.to_string(),
            });
        }
        Ok(Self {
            coeffs,
            zero_mode_constraint: true,
        })
    }

    pub fn from_fn(n_max: usize, mut f: impl FnMut(i64) -> C64) -> Result<Self> {
        Self::constrained(Modes::from_fn(n_max, |n| if n == 0 { C64::new(0.0, 0.0) } else { f(n) }))
    }

    pub fn n_max(&self) -> usize {
        self.coeffs.n_max()
    }

    pub fn get(&self, n: i64) -> C64 {
        *self.coeffs.get(n)
    }

    pub fn coeffs(&self) -> &Modes<C64> {
        &self.coeffs
    }

    pub fn zero_mode_constraint(&self) -> bool {
        self.zero_mode_constraint
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.values().iter().all(|c| *c == C64::new(0.0, 0.0))
    }

    /// `sup_n (1+|n|)^kappa |c_n|`.
    pub fn norm(&self, kappa: f64) -> f64 {
        self.coeffs
            .iter()
            .map(|(n, c)| (1.0 + n.unsigned_abs() as f64).powf(kappa) * c.norm())
            .fold(0.0, f64::max)
    }

    pub fn lin_comb(&self, a: C64, other: &BoundaryCoeffs, b: C64) -> Result<Self> {
        if self.n_max() != other.n_max() {
            return Err(Error::CutoffMismatch(self.n_max(), other.n_max()));
        }
        Ok(Self {
            coeffs: Modes::from_fn(self.n_max(), |n| a * self.get(n) + b * other.get(n)),
            zero_mode_constraint: self.zero_mode_constraint && other.zero_mode_constraint,
        })
    }

    pub fn sub(&self, other: &BoundaryCoeffs) -> Result<Self> {
        self.lin_comb(C64::new(1.0, 0.0), other, C64::new(-1.0, 0.0))
    }

    pub fn add(&self, other: &BoundaryCoeffs) -> Result<Self> {
        self.lin_comb(C64::new(1.0, 0.0), other, C64::new(1.0, 0.0))
    }

    /// Largest `|c_{-n} - conj(c_n)|`.
    pub fn asymmetry(&self) -> f64 {
        self.coeffs
            .iter()
            .map(|(n, c)| (self.get(-n) - c.conj()).norm())
            .fold(0.0, f64::max)
    }
}

/// Weights of a `B_{alpha,kappa}` norm, or of a `U^m_{alpha,kappa}` norm when
/// paired with [`NormKind::U`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormParams {
    pub alpha: f64,
    pub kappa: f64,
    pub m: usize,
}

impl NormParams {
    pub fn new(alpha: f64, kappa: f64, m: usize) -> Result<Self> {
        if !(alpha > 0.0 && kappa > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "norm weights must be positive (alpha = {alpha}, kappa = {kappa})"
            )));
        }
        if m > 2 || (m as f64) >= kappa {
            return Err(Error::InvalidParameter(format!(
                "derivative order {m} must be at most 2 and below kappa = {kappa}"
            )));
        }
        Ok(Self { alpha, kappa, m })
    }

    pub fn b(alpha: f64, kappa: f64) -> Result<Self> {
        Self::new(alpha, kappa, 0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormKind {
    B,
    U,
}

/// `sup_n sup_j r_j^alpha (1+|n|)^kappa |phi_n(r_j)|` over the stored nodes.
pub fn b_norm<'a>(
    grid: &RadialGrid,
    modes: impl IntoIterator<Item = (i64, &'a [C64])>,
    alpha: f64,
    kappa: f64,
) -> Result<f64> {
    let weights: Vec<f64> = grid.nodes().iter().map(|r| r.powf(alpha)).collect();
    let mut sup: f64 = 0.0;
    for (n, values) in modes {
        check_finite("normed samples", values)?;
        let mode_weight = (1.0 + n.unsigned_abs() as f64).powf(kappa);
        let local = values
            .iter()
            .zip(&weights)
            .map(|(v, w)| w * v.norm())
            .fold(0.0, f64::max);
        sup = sup.max(mode_weight * local);
    }
    Ok(sup)
}

/// Weighted norm of a mode map of profiles; the `U` variant sums the
/// `B_{alpha+l, kappa-l}` norms of the derivatives `l <= m`.
pub fn weighted_norm(x: &Modes<ModeProfile>, p: NormParams, which: NormKind) -> Result<f64> {
    let Some((_, first)) = x.iter().next() else {
        return Ok(0.0);
    };
    let grid = first.value.grid().clone();
    let orders = match which {
        NormKind::B => 0..=0,
        NormKind::U => 0..=p.m,
    };
    let mut total = 0.0;
    for l in orders {
        let lf = l as f64;
        total += b_norm(
            &grid,
            x.iter().map(|(n, prof)| (n, prof.derivative(l))),
            p.alpha + lf,
            p.kappa - lf,
        )?;
    }
    Ok(total)
}

fn symmetrize(x: &Modes<ModeProfile>) -> Result<Modes<ModeProfile>> {
    let half = C64::new(0.5, 0.0);
    Modes::try_from_fn(x.n_max(), |n| {
        if n >= 0 {
            x.get(n).lin_comb(half, &x.get(-n).conj(), half)
        } else {
            Ok(x.get(-n).lin_comb(half, &x.get(n).conj(), half)?.conj())
        }
    })
}

/// Average each coefficient with the conjugate of its mirror mode, so that
/// the synthesized physical fields are real. Idempotent.
pub fn enforce_reality(x: &SpectralField) -> Result<SpectralField> {
    SpectralField::new(x.grid.clone(), symmetrize(&x.gamma)?, symmetrize(&x.w)?)
}

/// Largest `|x_{-n} - conj(x_n)|` over values and stored derivatives.
pub fn reality_defect(x: &SpectralField) -> f64 {
    let mut worst: f64 = 0.0;
    for modes in [&x.gamma, &x.w] {
        for (n, prof) in modes.iter() {
            let mirror = modes.get(-n);
            for l in 0..=2 {
                for (a, b) in prof.derivative(l).iter().zip(mirror.derivative(l)) {
                    worst = worst.max((b - a.conj()).norm());
                }
            }
        }
    }
    worst
}
