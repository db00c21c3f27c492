//! Graded radial grid on `[1, R_max]` and product quadrature for integrals
//! whose kernels are complex powers of the radius.
//!
//! All integrals are evaluated in the logarithmic variable `t = ln s`, where
//! the grid is uniform with step `h = ln(R_max) / J`. On every cell the data
//! is replaced by a Lagrange interpolant in `t` through (up to) twelve nearby
//! nodes, and the product `e^{c t} * P(t)` is integrated exactly through the
//! moments `int_0^1 e^{z u} u^k du`. The scheme is linear in the data and
//! reproduces power laws `s^{-beta}` to near machine precision as long as
//! `|beta| h` stays well below one.
//!
//! Beyond `R_max` a function is represented by an explicit [`TailModel`], a
//! finite sum of power laws, so that semi-infinite integrals pick up a
//! closed-form tail contribution.

use std::sync::Arc;

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

/// Stencil width of the Lagrange interpolant used on each cell.
pub const STENCIL_POINTS: usize = 12;

/// Relative tolerance for continuity between grid samples and tail model at `R_max`.
pub const TAIL_MATCH_TOL: f64 = 1e-9;

/// Below this modulus of `beta + 1` the power moment switches to its logarithmic limit.
pub const LOG_BRANCH_SWITCH: f64 = 1e-8;

const SERIES_RADIUS: f64 = 6.0;

/// Geometric grid `r_j = q^j`, `j = 0..=J`, with `r_0 = 1` and `r_J = R_max`.
#[derive(Debug)]
pub struct RadialGrid {
    nodes: Vec<f64>,
    log_step: f64,
    ratio: f64,
    stencil: Stencil,
}

impl RadialGrid {
    pub fn new(r_max: f64, cells: usize) -> Result<Self> {
        if !(r_max.is_finite() && r_max > 1.0) {
            return Err(Error::InvalidGrid(format!("R_max must exceed 1, got {r_max}")));
        }
        if cells < 2 {
            return Err(Error::InvalidGrid(format!(
                "at least 2 cells are required, got {cells}"
            )));
        }
        let log_step = r_max.ln() / cells as f64;
        let mut nodes: Vec<f64> = (0..=cells).map(|j| (j as f64 * log_step).exp()).collect();
        nodes[0] = 1.0;
        nodes[cells] = r_max;
        Ok(Self {
            nodes,
            log_step,
            ratio: log_step.exp(),
            stencil: Stencil::new(STENCIL_POINTS.min(cells + 1)),
        })
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn cells(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Geometric ratio `q = r_{j+1} / r_j`.
    pub fn ratio(&self) -> f64 {
        self.ratio
    }

    /// Uniform step in `ln r`.
    pub fn log_step(&self) -> f64 {
        self.log_step
    }

    pub fn r_max(&self) -> f64 {
        self.nodes[self.cells()]
    }

    /// Index of the node equal to `r` (to 1e-12 relative), if any.
    pub fn node_index(&self, r: f64) -> Option<usize> {
        let guess = (r.ln() / self.log_step).round();
        if !(0.0..=self.cells() as f64).contains(&guess) {
            return None;
        }
        let j = guess as usize;
        ((self.nodes[j] - r).abs() <= 1e-12 * r).then_some(j)
    }

    pub fn same_as(&self, other: &RadialGrid) -> bool {
        std::ptr::eq(self, other) || self.nodes == other.nodes
    }
}

/// Lagrange basis on `points` consecutive nodes, expanded in monomials of the
/// local cell coordinate `u = (t - t_j) / h` for every possible position of
/// the cell inside the stencil.
#[derive(Debug)]
struct Stencil {
    points: usize,
    // basis[offset][i][k]: coefficient of u^k in the i-th cardinal polynomial,
    // for a cell lying between stencil nodes `offset` and `offset + 1`.
    basis: Vec<Vec<Vec<f64>>>,
}

impl Stencil {
    fn new(points: usize) -> Self {
        let basis = (0..points - 1)
            .map(|offset| {
                (0..points)
                    .map(|i| {
                        let ui = i as f64 - offset as f64;
                        let mut poly = vec![1.0];
                        let mut denom = 1.0;
                        for m in (0..points).filter(|&m| m != i) {
                            let um = m as f64 - offset as f64;
                            poly = mul_linear(&poly, -um);
                            denom *= ui - um;
                        }
                        poly.iter().map(|c| c / denom).collect()
                    })
                    .collect()
            })
            .collect();
        Self { points, basis }
    }

    /// Start node and in-stencil offset for cell `j` of a grid with `cells` cells.
    fn placement(&self, j: usize, cells: usize) -> (usize, usize) {
        let back = self.points / 2 - 1;
        let start = j.saturating_sub(back).min(cells + 1 - self.points);
        (start, j - start)
    }
}

// (sum_k p_k u^k) * (u + c)
fn mul_linear(p: &[f64], c: f64) -> Vec<f64> {
    let mut out = vec![0.0; p.len() + 1];
    for (k, &pk) in p.iter().enumerate() {
        out[k] += c * pk;
        out[k + 1] += pk;
    }
    out
}

/// `e^z - 1` without cancellation for small `|z|`.
pub fn expm1c(z: C64) -> C64 {
    let (s, c) = z.im.sin_cos();
    let half = (0.5 * z.im).sin();
    let em1 = z.re.exp_m1();
    C64::new(em1 * c - 2.0 * half * half, z.re.exp() * s)
}

/// Moments `m_k(z) = int_0^1 e^{z u} u^k du` for `k < count`.
fn exp_moments(z: C64, count: usize) -> Vec<C64> {
    if z.norm() <= SERIES_RADIUS {
        moments_series(z, count)
    } else {
        moments_recurrence(z, count)
    }
}

fn moments_series(z: C64, count: usize) -> Vec<C64> {
    if z.re >= 0.0 {
        // m_k = sum_j z^j / (j! (j + k + 1))
        let mut m = vec![C64::new(0.0, 0.0); count];
        let mut term = C64::new(1.0, 0.0);
        for j in 0..400 {
            for (k, mk) in m.iter_mut().enumerate() {
                *mk += term / (j + k + 1) as f64;
            }
            term *= z / (j + 1) as f64;
            if j as f64 > z.norm() && term.norm() < 1e-18 * m[0].norm().max(1e-300) {
                break;
            }
        }
        m
    } else {
        // m_k = e^z sum_j (-z)^j k! / (j + k + 1)!, free of cancellation for Re z < 0
        let w = -z;
        let ez = z.exp();
        (0..count)
            .map(|k| {
                let mut term = C64::new(1.0 / (k + 1) as f64, 0.0);
                let mut sum = term;
                for j in 0..400 {
                    term *= w / (j + k + 2) as f64;
                    sum += term;
                    if j as f64 > w.norm() && term.norm() < 1e-18 * sum.norm() {
                        break;
                    }
                }
                ez * sum
            })
            .collect()
    }
}

fn moments_recurrence(z: C64, count: usize) -> Vec<C64> {
    let mut m = vec![C64::new(0.0, 0.0); count];
    let ez = z.exp();
    m[0] = expm1c(z) / z;
    for k in 1..count {
        m[k] = (ez - k as f64 * m[k - 1]) / z;
    }
    m
}

/// `int_a^b s^beta ds`, exact up to rounding; the `beta = -1` limit gives `ln(b/a)`.
pub fn cell_power_moment(a: f64, b: f64, beta: C64) -> C64 {
    let len = (b / a).ln();
    let z = (beta + 1.0) * len;
    let scale = ((beta + 1.0) * a.ln()).exp();
    let m0 = if z.norm() < LOG_BRANCH_SWITCH {
        C64::new(1.0, 0.0) + 0.5 * z
    } else {
        expm1c(z) / z
    };
    scale * len * m0
}

/// `int_a^b s^beta ln(s/a) ds`, the derivative of [`cell_power_moment`] in `beta`
/// up to the `ln a` shift. Integrates data that is linear in `ln s`.
pub fn cell_log_moment(a: f64, b: f64, beta: C64) -> C64 {
    let len = (b / a).ln();
    let z = (beta + 1.0) * len;
    let scale = ((beta + 1.0) * a.ln()).exp();
    scale * len * len * exp_moments(z, 2)[1]
}

/// One power-law term of a tail, `value * (s / anchor)^(-exponent)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailTerm {
    pub exponent: C64,
    pub value: C64,
}

/// Representation of a function beyond the last grid node as a finite sum of
/// power laws anchored at a common radius.
#[derive(Debug, Clone, PartialEq)]
pub struct TailModel {
    anchor: f64,
    terms: Vec<TailTerm>,
}

impl TailModel {
    /// Single power law `coefficient * s^(-exponent)`.
    pub fn power(exponent: C64, coefficient: C64) -> Self {
        Self {
            anchor: 1.0,
            terms: vec![TailTerm {
                exponent,
                value: coefficient,
            }],
        }
    }

    pub fn anchored(anchor: f64, terms: Vec<TailTerm>) -> Self {
        let mut tail = Self {
            anchor,
            terms: Vec::with_capacity(terms.len()),
        };
        for t in terms {
            tail.push(t);
        }
        tail
    }

    fn push(&mut self, term: TailTerm) {
        if let Some(existing) = self.terms.iter_mut().find(|t| t.exponent == term.exponent) {
            existing.value += term.value;
        } else {
            self.terms.push(term);
        }
    }

    pub fn anchor(&self) -> f64 {
        self.anchor
    }

    pub fn terms(&self) -> &[TailTerm] {
        &self.terms
    }

    /// Exponent of the slowest-decaying term.
    pub fn leading_exponent(&self) -> Option<C64> {
        self.terms
            .iter()
            .map(|t| t.exponent)
            .min_by(|a, b| a.re.total_cmp(&b.re))
    }

    /// Coefficient `C` of the single-term form `C s^(-beta)`; sums over terms
    /// sharing the leading exponent.
    pub fn coefficient(&self) -> C64 {
        let lead = self.leading_exponent().unwrap_or_default();
        self.terms
            .iter()
            .filter(|t| t.exponent == lead)
            .map(|t| t.value * (t.exponent * self.anchor.ln()).exp())
            .sum()
    }

    pub fn eval(&self, s: f64) -> C64 {
        let x = (s / self.anchor).ln();
        self.terms.iter().map(|t| t.value * (-t.exponent * x).exp()).sum()
    }

    pub fn rebased(&self, anchor: f64) -> Self {
        let shift = (anchor / self.anchor).ln();
        Self {
            anchor,
            terms: self
                .terms
                .iter()
                .map(|t| TailTerm {
                    exponent: t.exponent,
                    value: t.value * (-t.exponent * shift).exp(),
                })
                .collect(),
        }
    }

    pub fn scaled(&self, factor: C64) -> Self {
        Self {
            anchor: self.anchor,
            terms: self
                .terms
                .iter()
                .map(|t| TailTerm {
                    exponent: t.exponent,
                    value: t.value * factor,
                })
                .collect(),
        }
    }

    /// `a * self + b * other`, both rebased to the anchor of `self`.
    pub fn combined(&self, a: C64, other: &TailModel, b: C64) -> Self {
        let other = other.rebased(self.anchor);
        let mut out = self.scaled(a);
        for t in other.terms {
            out.push(TailTerm {
                exponent: t.exponent,
                value: t.value * b,
            });
        }
        out
    }

    pub fn conj(&self) -> Self {
        Self {
            anchor: self.anchor,
            terms: self
                .terms
                .iter()
                .map(|t| TailTerm {
                    exponent: t.exponent.conj(),
                    value: t.value.conj(),
                })
                .collect(),
        }
    }
}

/// Complex samples of one Fourier coefficient on a [`RadialGrid`], with an
/// optional power-law tail beyond `R_max`.
#[derive(Debug, Clone)]
pub struct RadialFunction {
    grid: Arc<RadialGrid>,
    values: Vec<C64>,
    tail: Option<TailModel>,
}

impl RadialFunction {
    pub fn new(grid: Arc<RadialGrid>, values: Vec<C64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::LengthMismatch {
                what: "radial samples".into(),
                expected: grid.len(),
                got: values.len(),
            });
        }
        check_finite("radial samples", &values)?;
        Ok(Self {
            grid,
            values,
            tail: None,
        })
    }

    pub fn zeros(grid: Arc<RadialGrid>) -> Self {
        let values = vec![C64::new(0.0, 0.0); grid.len()];
        Self {
            grid,
            values,
            tail: None,
        }
    }

    pub fn from_fn(grid: Arc<RadialGrid>, f: impl Fn(f64) -> C64) -> Result<Self> {
        let values = grid.nodes().iter().map(|&r| f(r)).collect();
        Self::new(grid, values)
    }

    /// `coefficient * s^(-exponent)` with a matching tail.
    pub fn power(grid: Arc<RadialGrid>, coefficient: C64, exponent: C64) -> Result<Self> {
        let tail = TailModel::power(exponent, coefficient);
        let f = Self::from_fn(grid, |r| coefficient * (-exponent * r.ln()).exp())?;
        f.with_tail(tail)
    }

    /// Attach a tail; it must agree with the last sample to [`TAIL_MATCH_TOL`].
    pub fn with_tail(mut self, tail: TailModel) -> Result<Self> {
        let r_max = self.grid.r_max();
        let tail = tail.rebased(r_max);
        let last = self.values[self.grid.cells()];
        let at_edge = tail.eval(r_max);
        let scale = last.norm().max(tail.terms.iter().map(|t| t.value.norm()).sum());
        let gap = (last - at_edge).norm();
        if gap > TAIL_MATCH_TOL * scale {
            return Err(Error::TailMismatch {
                gap: gap / scale.max(f64::MIN_POSITIVE),
            });
        }
        if tail.terms.iter().any(|t| !(t.exponent.re.is_finite() && t.value.re.is_finite() && t.value.im.is_finite())) {
            return Err(Error::NonFinite {
                what: "tail model".into(),
                index: self.grid.cells(),
            });
        }
        self.tail = Some(tail);
        Ok(self)
    }

    pub(crate) fn from_parts(grid: Arc<RadialGrid>, values: Vec<C64>, tail: Option<TailModel>) -> Self {
        Self { grid, values, tail }
    }

    pub fn grid(&self) -> &Arc<RadialGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[C64] {
        &self.values
    }

    pub fn tail(&self) -> Option<&TailModel> {
        self.tail.as_ref()
    }

    pub fn at(&self, j: usize) -> C64 {
        self.values[j]
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|v| *v == C64::new(0.0, 0.0))
            && self
                .tail
                .as_ref()
                .is_none_or(|t| t.terms.iter().all(|x| x.value == C64::new(0.0, 0.0)))
    }

    pub fn scaled(&self, factor: C64) -> Self {
        Self {
            grid: self.grid.clone(),
            values: self.values.iter().map(|v| v * factor).collect(),
            tail: self.tail.as_ref().map(|t| t.scaled(factor)),
        }
    }

    /// `a * self + b * other` on a shared grid.
    pub fn lin_comb(&self, a: C64, other: &RadialFunction, b: C64) -> Result<Self> {
        if !self.grid.same_as(&other.grid) {
            return Err(Error::GridMismatch);
        }
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(x, y)| a * x + b * y)
            .collect();
        let tail = match (&self.tail, &other.tail) {
            (Some(s), Some(o)) => Some(s.combined(a, o, b)),
            (Some(s), None) => Some(s.scaled(a)),
            (None, Some(o)) => Some(o.scaled(b)),
            (None, None) => None,
        };
        Ok(Self {
            grid: self.grid.clone(),
            values,
            tail,
        })
    }

    pub fn conj(&self) -> Self {
        Self {
            grid: self.grid.clone(),
            values: self.values.iter().map(|v| v.conj()).collect(),
            tail: self.tail.as_ref().map(TailModel::conj),
        }
    }
}

pub(crate) fn check_finite(what: &str, values: &[C64]) -> Result<()> {
    match values.iter().position(|v| !(v.re.is_finite() && v.im.is_finite())) {
        Some(index) => Err(Error::NonFinite {
            what: what.into(),
            index,
        }),
        None => Ok(()),
    }
}

/// Exact cell integrals `int_{t_j}^{t_{j+1}} e^{c (t - t_j)} P_j(t) dt` of the
/// interpolated data against one exponential kernel.
struct CellIntegrator<'g> {
    grid: &'g RadialGrid,
    // weights[offset][i]
    weights: Vec<Vec<C64>>,
}

impl<'g> CellIntegrator<'g> {
    fn new(grid: &'g RadialGrid, c: C64) -> Self {
        let h = grid.log_step();
        let st = &grid.stencil;
        let moments = exp_moments(c * h, st.points);
        let weights = st
            .basis
            .iter()
            .map(|cardinals| {
                cardinals
                    .iter()
                    .map(|coeffs| {
                        h * coeffs
                            .iter()
                            .zip(&moments)
                            .map(|(a, m)| *a * m)
                            .sum::<C64>()
                    })
                    .collect()
            })
            .collect();
        Self { grid, weights }
    }

    /// `values` may extend past `R_max` with ghost samples.
    fn cell(&self, values: &[C64], j: usize) -> C64 {
        let (start, offset) = self.grid.stencil.placement(j, values.len() - 1);
        self.weights[offset]
            .iter()
            .zip(&values[start..])
            .map(|(w, f)| w * f)
            .sum()
    }
}

/// Samples of `f` followed by ghost samples of its tail beyond `R_max`, so
/// that the stencils of the outermost cells stay centered.
fn with_ghosts(f: &RadialFunction) -> Vec<C64> {
    let mut ext = f.values.clone();
    if let Some(tail) = &f.tail {
        let grid = f.grid.as_ref();
        let ghosts = grid.stencil.points / 2;
        ext.extend((1..=ghosts).map(|k| tail.eval(grid.r_max() * (k as f64 * grid.log_step()).exp())));
    }
    ext
}

/// `int_{R_max}^inf s f(s) (R_max/s)^zeta ds` from the tail model.
fn outward_tail(f: &RadialFunction, zeta: C64, decay_floor: f64) -> Result<C64> {
    let r_max = f.grid.r_max();
    match &f.tail {
        Some(tail) => {
            let mut acc = C64::new(0.0, 0.0);
            for t in &tail.rebased(r_max).terms {
                let s = t.exponent + zeta;
                if s.re <= 2.0 {
                    return Err(Error::TailDivergence {
                        mode: None,
                        exponent_sum: s.re,
                    });
                }
                acc += t.value * r_max * r_max / (s - 2.0);
            }
            Ok(acc)
        }
        None => {
            let last = f.values[f.grid.cells()].norm();
            if last <= decay_floor {
                Ok(C64::new(0.0, 0.0))
            } else {
                Err(Error::MissingTail {
                    mode: None,
                    last_value: last,
                })
            }
        }
    }
}

/// `A_j = int_1^{r_j} s f(s) (s / r_j)^zeta ds` at every node.
pub fn inward_profile(f: &RadialFunction, zeta: C64) -> Result<Vec<C64>> {
    let grid = f.grid.as_ref();
    let integ = CellIntegrator::new(grid, 2.0 + zeta);
    let decay = (-zeta * grid.log_step()).exp();
    let values = with_ghosts(f);
    let mut out = Vec::with_capacity(grid.len());
    let mut acc = C64::new(0.0, 0.0);
    out.push(acc);
    for (j, &r) in grid.nodes()[..grid.cells()].iter().enumerate() {
        acc = decay * (acc + r * r * integ.cell(&values, j));
        out.push(acc);
    }
    Ok(out)
}

/// `B_j = int_{r_j}^inf s f(s) (r_j / s)^zeta ds` at every node, including
/// the closed-form tail beyond `R_max`.
pub fn outward_profile(f: &RadialFunction, zeta: C64, decay_floor: f64) -> Result<Vec<C64>> {
    let grid = f.grid.as_ref();
    let integ = CellIntegrator::new(grid, 2.0 - zeta);
    let decay = (-zeta * grid.log_step()).exp();
    let mut out = vec![C64::new(0.0, 0.0); grid.len()];
    let values = with_ghosts(f);
    let mut acc = outward_tail(f, zeta, decay_floor)?;
    out[grid.cells()] = acc;
    for j in (0..grid.cells()).rev() {
        let r = grid.nodes()[j];
        acc = decay * acc + r * r * integ.cell(&values, j);
        out[j] = acc;
    }
    Ok(out)
}

fn check_node(f: &RadialFunction, node: usize) -> Result<()> {
    if node > f.grid.cells() {
        return Err(Error::InvalidParameter(format!(
            "node index {node} outside grid of {} cells",
            f.grid.cells()
        )));
    }
    Ok(())
}

fn check_kernel(zeta: C64) -> Result<()> {
    if zeta.re > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "kernel exponent must have positive real part, got {zeta}"
        )))
    }
}

/// `int_1^r s f(s) (s/r)^zeta ds` at grid node `node`.
pub fn integral_inward(f: &RadialFunction, zeta: C64, node: usize) -> Result<C64> {
    check_kernel(zeta)?;
    check_node(f, node)?;
    check_finite("integrand", &f.values)?;
    Ok(inward_profile(f, zeta)?[node])
}

/// `int_r^inf s f(s) (r/s)^zeta ds` at grid node `node`.
pub fn integral_outward(f: &RadialFunction, zeta: C64, node: usize, decay_floor: f64) -> Result<C64> {
    check_kernel(zeta)?;
    check_node(f, node)?;
    check_finite("integrand", &f.values)?;
    Ok(outward_profile(f, zeta, decay_floor)?[node])
}

/// Nested tail integral `g(r) = int_r^inf (1/s) int_s^inf t f(t) dt ds`.
#[derive(Debug, Clone)]
pub struct DoubleTail {
    /// `g` at every node.
    pub outer: Vec<C64>,
    /// `I(r) = int_r^inf t f(t) dt` at every node; `g'(r) = -I(r)/r`.
    pub inner: Vec<C64>,
    /// Tail of `g` beyond `R_max`.
    pub tail: Option<TailModel>,
}

pub fn double_tail_profile(f: &RadialFunction, decay_floor: f64) -> Result<DoubleTail> {
    let grid = f.grid.clone();
    let zero = C64::new(0.0, 0.0);
    let inner = outward_profile(f, zero, decay_floor)?;
    let r_max = grid.r_max();
    // I(s)/s^2 has the tail exponents of f; I(R) distributes over the terms.
    let (h_tail, g_tail) = match f.tail.as_ref().map(|t| t.rebased(r_max)) {
        Some(t) => {
            let h_terms: Vec<TailTerm> = t
                .terms
                .iter()
                .map(|x| TailTerm {
                    exponent: x.exponent,
                    value: x.value / (x.exponent - 2.0),
                })
                .collect();
            let g_terms = t
                .terms
                .iter()
                .map(|x| TailTerm {
                    exponent: x.exponent - 2.0,
                    value: x.value * r_max * r_max / ((x.exponent - 2.0) * (x.exponent - 2.0)),
                })
                .collect();
            (
                Some(TailModel::anchored(r_max, h_terms)),
                Some(TailModel::anchored(r_max, g_terms)),
            )
        }
        None => (None, None),
    };
    let h_values = inner
        .iter()
        .zip(grid.nodes())
        .map(|(i, r)| i / (r * r))
        .collect();
    let h = RadialFunction::from_parts(grid, h_values, h_tail);
    let outer = outward_profile(&h, zero, decay_floor)?;
    Ok(DoubleTail {
        outer,
        inner,
        tail: g_tail,
    })
}

/// `int_r^inf (1/s) int_s^inf t f(t) dt ds` at grid node `node`.
pub fn double_tail_integral(f: &RadialFunction, node: usize) -> Result<C64> {
    check_node(f, node)?;
    check_finite("integrand", &f.values)?;
    Ok(double_tail_profile(f, 0.0)?.outer[node])
}
