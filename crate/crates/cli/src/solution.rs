//! `solution.json`: everything `verify` needs to re-check a solve.
//!
//! Floats are written with 17 significant digits so that reading the file
//! back reproduces every double exactly. Object keys are sorted, and the file
//! holds no timestamps, so identical runs give identical bytes.

use std::sync::Arc;

use num_complex::Complex64 as C64;
use rotorflow::grid_quadrature::{RadialFunction, RadialGrid};
use rotorflow::linear_solver::TraceData;
use rotorflow::mode_algebra::{BoundaryCoeffs, ModeProfile, Modes, SpectralField};
use rotorflow::solver::SolveReport;
use serde_json::{Map, Number, Value};

use crate::config::RunConfig;
use crate::error::CliError;

pub const FORMAT: &str = "rotorflow-solution";
pub const VERSION: u64 = 1;

pub fn num(x: f64) -> Value {
    // 17 significant digits; JSON has no NaN or infinity
    if x.is_finite() {
        Value::Number(format!("{x:.16e}").parse::<Number>().expect("formatted float is valid JSON"))
    } else {
        Value::Null
    }
}

fn complex(z: C64) -> Value {
    Value::Array(vec![num(z.re), num(z.im)])
}

fn complex_list(zs: &[C64]) -> Value {
    Value::Array(zs.iter().map(|&z| complex(z)).collect())
}

fn coeff_list(b: &BoundaryCoeffs) -> Value {
    Value::Array(b.coeffs().values().iter().map(|&z| complex(z)).collect())
}

fn obj(entries: Vec<(&str, Value)>) -> Value {
    Value::Object(entries.into_iter().map(|(k, v)| (k.to_string(), v)).collect::<Map<_, _>>())
}

fn modes_json(m: &Modes<ModeProfile>) -> Value {
    Value::Array(
        m.iter()
            .map(|(n, p)| {
                obj(vec![
                    ("n", Value::from(n)),
                    ("value", complex_list(p.values())),
                    ("d1", complex_list(&p.d1)),
                    ("d2", complex_list(&p.d2)),
                ])
            })
            .collect(),
    )
}

pub fn to_json(cfg: &RunConfig, rep: &SolveReport) -> Value {
    let s = &cfg.solver;
    let grid = rep.field.grid();
    let x = &rep.field;
    obj(vec![
        ("format", Value::from(FORMAT)),
        ("version", Value::from(VERSION)),
        (
            "config",
            obj(vec![
                ("mu0", num(s.mu0)),
                ("mu_star", num(s.mu_star)),
                ("mu", cfg.pinned_mu.map_or(Value::Null, num)),
                ("kappa", num(s.kappa)),
                ("n_max", Value::from(s.n_max)),
                ("r_max", num(s.r_max)),
                ("cells", Value::from(s.cells)),
                ("tol_fixed_point", num(s.tol_fixed_point)),
                ("tol_mu", num(s.tol_mu)),
                ("max_iter", Value::from(s.max_iter)),
                ("relaxation", num(s.relaxation)),
                ("theta_points", Value::from(cfg.theta_points)),
                ("seed", Value::from(cfg.seed)),
            ]),
        ),
        (
            "boundary",
            obj(vec![
                ("v_r", coeff_list(&s.boundary.v_r)),
                ("v_theta", coeff_list(&s.boundary.v_theta)),
            ]),
        ),
        (
            "grid",
            obj(vec![
                ("r_max", num(grid.r_max())),
                ("cells", Value::from(grid.cells())),
                ("nodes", Value::Array(grid.nodes().iter().map(|&r| num(r)).collect())),
            ]),
        ),
        ("mu", num(rep.mu)),
        ("mu_star_realized", num(rep.mu_star_realized)),
        ("dr_gamma0_at_1", num(x.gamma.get(0).d1[0].re)),
        ("alpha", num(rep.params.alpha)),
        (
            "norms",
            obj(vec![
                ("gamma", num(rep.norms.gamma)),
                ("w", num(rep.norms.w)),
                ("gamma_star", num(rep.norms.gamma_star)),
                ("w_star", num(rep.norms.w_star)),
            ]),
        ),
        (
            "history",
            obj(vec![
                ("iterations", Value::from(rep.iterations)),
                ("contraction", Value::Array(rep.contraction_history.iter().map(|&c| num(c)).collect())),
                ("phi_residual", num(rep.phi_residual)),
                ("trace_mismatch", num(rep.trace_mismatch)),
                (
                    "mu_evaluations",
                    Value::Array(
                        rep.mu_evaluations
                            .iter()
                            .map(|&(m, g)| Value::Array(vec![num(m), num(g)]))
                            .collect(),
                    ),
                ),
            ]),
        ),
        ("gamma", modes_json(&x.gamma)),
        ("w", modes_json(&x.w)),
    ])
}

/// The parts of a stored solution that `verify` re-checks.
#[derive(Debug, Clone)]
pub struct StoredSolution {
    pub mu0: f64,
    pub mu_star: f64,
    pub pinned: bool,
    pub tol_fixed_point: f64,
    pub tol_mu: f64,
    pub theta_points: usize,
    pub boundary: TraceData,
    pub mu: f64,
    pub mu_star_realized: f64,
    pub field: SpectralField,
}

struct Reader<'a> {
    path: Vec<String>,
    root: &'a Value,
}

fn bad(path: &str, what: &str) -> CliError {
    CliError::Input(format!("malformed solution: `{path}` {what}"))
}

impl<'a> Reader<'a> {
    fn at(&self, key: &str) -> Result<&'a Value, CliError> {
        let mut v = self.root;
        for p in &self.path {
            v = &v[p.as_str()];
        }
        v.get(key).ok_or_else(|| bad(&self.name(key), "is missing"))
    }

    fn name(&self, key: &str) -> String {
        let mut s = self.path.join(".");
        if !s.is_empty() {
            s.push('.');
        }
        s + key
    }

    fn child(&self, key: &str) -> Reader<'a> {
        let mut path = self.path.clone();
        path.push(key.into());
        Reader { path, root: self.root }
    }

    fn f64(&self, key: &str) -> Result<f64, CliError> {
        as_f64(self.at(key)?).ok_or_else(|| bad(&self.name(key), "is not a finite number"))
    }

    fn usize(&self, key: &str) -> Result<usize, CliError> {
        self.at(key)?
            .as_u64()
            .map(|u| u as usize)
            .ok_or_else(|| bad(&self.name(key), "is not a non-negative integer"))
    }
}

fn as_f64(v: &Value) -> Option<f64> {
    v.as_f64().filter(|x| x.is_finite())
}

fn parse_complex_list(v: &Value, name: &str, len: usize) -> Result<Vec<C64>, CliError> {
    let items = v.as_array().ok_or_else(|| bad(name, "is not an array"))?;
    if items.len() != len {
        return Err(bad(name, &format!("has {} entries, expected {len}", items.len())));
    }
    items
        .iter()
        .map(|z| match z.as_array().map(|a| a.as_slice()) {
            Some([re, im]) => match (as_f64(re), as_f64(im)) {
                (Some(re), Some(im)) => Ok(C64::new(re, im)),
                _ => Err(bad(name, "holds a non-finite entry")),
            },
            _ => Err(bad(name, "holds an entry that is not [re, im]")),
        })
        .collect()
}

fn parse_modes(v: &Value, name: &str, n_max: usize, grid: &Arc<RadialGrid>) -> Result<Modes<ModeProfile>, CliError> {
    let items = v.as_array().ok_or_else(|| bad(name, "is not an array"))?;
    if items.len() != 2 * n_max + 1 {
        return Err(bad(name, &format!("has {} modes, expected {}", items.len(), 2 * n_max + 1)));
    }
    let len = grid.len();
    let profiles = items
        .iter()
        .zip(-(n_max as i64)..)
        .map(|(m, n)| {
            let label = format!("{name}[{n}]");
            if m.get("n").and_then(Value::as_i64) != Some(n) {
                return Err(bad(&label, "has the wrong mode index"));
            }
            let field = |k: &str| {
                let v = m.get(k).ok_or_else(|| bad(&format!("{label}.{k}"), "is missing"))?;
                parse_complex_list(v, &format!("{label}.{k}"), len)
            };
            let value = RadialFunction::new(grid.clone(), field("value")?).map_err(|e| bad(&label, &e.to_string()))?;
            ModeProfile::new(value, field("d1")?, field("d2")?).map_err(|e| bad(&label, &e.to_string()))
        })
        .collect::<Result<Vec<_>, _>>()?;
    Modes::from_vec(n_max, profiles).map_err(|e| bad(name, &e.to_string()))
}

pub fn from_json(root: &Value) -> Result<StoredSolution, CliError> {
    let top = Reader { path: Vec::new(), root };
    if top.at("format")?.as_str() != Some(FORMAT) {
        return Err(bad("format", &format!("is not `{FORMAT}`")));
    }
    if top.at("version")?.as_u64() != Some(VERSION) {
        return Err(bad("version", &format!("is not {VERSION}")));
    }
    let cfg = top.child("config");
    let n_max = cfg.usize("n_max")?;
    if n_max == 0 {
        return Err(bad("config.n_max", "must be at least 1"));
    }

    let g = top.child("grid");
    let grid = Arc::new(
        RadialGrid::new(g.f64("r_max")?, g.usize("cells")?).map_err(|e| bad("grid", &e.to_string()))?,
    );
    let nodes = g.at("nodes")?.as_array().ok_or_else(|| bad("grid.nodes", "is not an array"))?;
    if nodes.len() != grid.len() || nodes.iter().zip(grid.nodes()).any(|(a, &b)| as_f64(a) != Some(b)) {
        return Err(bad("grid.nodes", "does not match the grid rebuilt from r_max and cells"));
    }

    let b = top.child("boundary");
    let coeffs = |key: &str| -> Result<BoundaryCoeffs, CliError> {
        let list = parse_complex_list(b.at(key)?, &b.name(key), 2 * n_max + 1)?;
        let modes = Modes::from_vec(n_max, list).map_err(|e| bad(key, &e.to_string()))?;
        BoundaryCoeffs::constrained(modes).map_err(|e| bad(&b.name(key), &e.to_string()))
    };
    let boundary = TraceData {
        v_r: coeffs("v_r")?,
        v_theta: coeffs("v_theta")?,
        dr_gamma0_at_1: 0.0,
    };

    let gamma = parse_modes(top.at("gamma")?, "gamma", n_max, &grid)?;
    let w = parse_modes(top.at("w")?, "w", n_max, &grid)?;
    let field = SpectralField::new(grid, gamma, w).map_err(|e| bad("modes", &e.to_string()))?;

    Ok(StoredSolution {
        mu0: cfg.f64("mu0")?,
        mu_star: cfg.f64("mu_star")?,
        pinned: !cfg.at("mu")?.is_null(),
        tol_fixed_point: cfg.f64("tol_fixed_point")?,
        tol_mu: cfg.f64("tol_mu")?,
        theta_points: cfg.usize("theta_points")?,
        boundary,
        mu: top.f64("mu")?,
        mu_star_realized: top.f64("mu_star_realized")?,
        field,
    })
}
