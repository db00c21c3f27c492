//! Run configuration: flat `key = value` lines plus repeated `mode` entries.
//!
//! ```text
//! # rotating cylinder, single mode forcing
//! mu0 = 10
//! n_max = 4
//! mode = 1  0.0 0.0  1e-3 0.0
//! ```
//!
//! A `mode` line carries `n re(v_r) im(v_r) re(v_theta) im(v_theta)`; the
//! coefficient of `-n` is filled in as the complex conjugate.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use num_complex::Complex64 as C64;
use rotorflow::linear_solver::TraceData;
use rotorflow::mode_algebra::BoundaryCoeffs;
use rotorflow::solver::SolverConfig;

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Exports {
    pub decay_csv: bool,
    pub residual_json: bool,
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub solver: SolverConfig,
    /// Solve at this `mu` instead of matching `mu_star`.
    pub pinned_mu: Option<f64>,
    pub theta_points: usize,
    pub output_dir: PathBuf,
    pub exports: Exports,
    pub seed: u64,
}

const KEYS: &[&str] = &[
    "mu0",
    "mu_star",
    "mu",
    "kappa",
    "n_max",
    "r_max",
    "cells",
    "tol_fixed_point",
    "tol_mu",
    "max_iter",
    "relaxation",
    "theta_points",
    "output_dir",
    "export",
    "seed",
];

pub const DEFAULT_N_MAX: usize = 16;
const MIN_THETA_POINTS: usize = 64;

fn parse_num<T: std::str::FromStr>(key: &str, v: &str, line: usize) -> Result<T, CliError> {
    v.parse()
        .map_err(|_| CliError::Input(format!("line {line}: `{key}` expects a number, got `{v}`")))
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, base)
    }

    /// Relative `output_dir` values resolve against `base`.
    pub fn parse(text: &str, base: &Path) -> Result<Self, CliError> {
        let mut kv: BTreeMap<&str, (&str, usize)> = BTreeMap::new();
        let mut modes: BTreeMap<i64, (C64, C64, usize)> = BTreeMap::new();

        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let (key, value) = body
                .split_once('=')
                .ok_or_else(|| CliError::Input(format!("line {line}: expected `key = value`, got `{body}`")))?;
            let (key, value) = (key.trim(), value.trim());
            if key == "mode" {
                let f: Vec<&str> = value.split_whitespace().collect();
                if f.len() != 5 {
                    return Err(CliError::Input(format!(
                        "line {line}: `mode` expects `n re_vr im_vr re_vt im_vt`, got {} fields",
                        f.len()
                    )));
                }
                let n: i64 = parse_num("mode", f[0], line)?;
                if n == 0 {
                    return Err(CliError::Input(format!(
                        "line {line}: mode n = 0 is not allowed; the boundary data must have zero mean"
                    )));
                }
                let mut x = [0.0f64; 4];
                for (k, s) in f[1..].iter().enumerate() {
                    x[k] = parse_num("mode", s, line)?;
                    if !x[k].is_finite() {
                        return Err(CliError::Input(format!("line {line}: mode {n} has a non-finite coefficient")));
                    }
                }
                let (mut vr, mut vt) = (C64::new(x[0], x[1]), C64::new(x[2], x[3]));
                if n < 0 {
                    vr = vr.conj();
                    vt = vt.conj();
                }
                if let Some((_, _, prev)) = modes.insert(n.abs(), (vr, vt, line)) {
                    return Err(CliError::Input(format!(
                        "line {line}: mode {} already given on line {prev}",
                        n.abs()
                    )));
                }
            } else {
                if !KEYS.contains(&key) {
                    return Err(CliError::Input(format!("line {line}: unknown key `{key}`")));
                }
                if let Some((_, prev)) = kv.insert(key, (value, line)) {
                    return Err(CliError::Input(format!("line {line}: `{key}` already set on line {prev}")));
                }
            }
        }

        let get = |k: &str| kv.get(k).copied();
        let (mu0_s, mu0_line) = get("mu0").ok_or_else(|| CliError::Input("missing required key `mu0`".into()))?;
        let mu0: f64 = parse_num("mu0", mu0_s, mu0_line)?;

        let highest = modes.keys().next_back().copied().unwrap_or(1) as usize;
        let n_max = match get("n_max") {
            Some((v, l)) => parse_num::<usize>("n_max", v, l)?,
            None => highest.max(DEFAULT_N_MAX),
        };
        if n_max == 0 {
            return Err(CliError::Input("n_max must be at least 1".into()));
        }
        if let Some((&n, &(_, _, line))) = modes.iter().find(|(&n, _)| n as usize > n_max) {
            return Err(CliError::Input(format!("line {line}: mode {n} exceeds n_max = {n_max}")));
        }

        let coeffs = |pick: fn(&(C64, C64, usize)) -> C64| {
            BoundaryCoeffs::from_fn(n_max, |n| match modes.get(&n.abs()) {
                Some(e) if n > 0 => pick(e),
                Some(e) => pick(e).conj(),
                None => C64::new(0.0, 0.0),
            })
            .map_err(|e| CliError::Input(e.to_string()))
        };
        let boundary = TraceData {
            v_r: coeffs(|e| e.0)?,
            v_theta: coeffs(|e| e.1)?,
            dr_gamma0_at_1: 0.0,
        };

        let mut solver = SolverConfig::new(mu0, boundary);
        solver.n_max = n_max;
        macro_rules! set {
            ($field:ident) => {
                if let Some((v, l)) = get(stringify!($field)) {
                    solver.$field = parse_num(stringify!($field), v, l)?;
                }
            };
        }
        set!(mu_star);
        set!(kappa);
        set!(r_max);
        set!(cells);
        set!(tol_fixed_point);
        set!(tol_mu);
        set!(max_iter);
        set!(relaxation);

        let pinned_mu = get("mu").map(|(v, l)| parse_num("mu", v, l)).transpose()?;
        let theta_points = match get("theta_points") {
            Some((v, l)) => parse_num("theta_points", v, l)?,
            // the modes spiral in ln r, so a coarse angular grid makes the
            // sampled sup wobble; decay monitoring wants a finer one
            None => rotorflow::field_eval::default_theta_points(n_max).max(MIN_THETA_POINTS),
        };
        let seed = get("seed").map(|(v, l)| parse_num("seed", v, l)).transpose()?.unwrap_or(0);
        let output_dir = base.join(get("output_dir").map_or(".", |(v, _)| v));

        let mut exports = Exports {
            decay_csv: true,
            residual_json: true,
        };
        if let Some((v, l)) = get("export") {
            exports = Exports {
                decay_csv: false,
                residual_json: false,
            };
            for item in v.split(',').map(str::trim).filter(|s| !s.is_empty()) {
                match item {
                    "csv" => exports.decay_csv = true,
                    "json" => exports.residual_json = true,
                    other => {
                        return Err(CliError::Input(format!(
                            "line {l}: unknown export format `{other}` (expected csv, json)"
                        )))
                    }
                }
            }
        }

        Ok(Self {
            solver,
            pinned_mu,
            theta_points,
            output_dir,
            exports,
            seed,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<RunConfig, CliError> {
        RunConfig::parse(text, Path::new("/tmp"))
    }

    #[test]
    fn conjugate_completion() {
        let c = parse("mu0 = 10\nmode = 2  0.1 0.2  0.3 -0.4\n").unwrap();
        let b = &c.solver.boundary;
        assert_eq!(c.solver.n_max, DEFAULT_N_MAX);
        assert_eq!(b.v_r.get(2), C64::new(0.1, 0.2));
        assert_eq!(b.v_r.get(-2), C64::new(0.1, -0.2));
        assert_eq!(b.v_theta.get(-2), C64::new(0.3, 0.4));
        assert_eq!(b.v_r.get(1), C64::new(0.0, 0.0));
    }

    #[test]
    fn negative_index_is_conjugated() {
        let a = parse("mu0 = 10\nmode = -1 0.1 0.2 0.3 0.4\n").unwrap();
        let b = parse("mu0 = 10\nmode = 1 0.1 -0.2 0.3 -0.4\n").unwrap();
        assert_eq!(a.solver.boundary.v_r.get(1), b.solver.boundary.v_r.get(1));
        assert_eq!(a.solver.boundary.v_theta.get(-1), b.solver.boundary.v_theta.get(-1));
    }

    #[test]
    fn rejects_bad_input() {
        for (text, needle) in [
            ("mu0 = 10\nmode = 0 1 0 0 0\n", "n = 0"),
            ("mu0 = 10\nn_max = 2\nmode = 3 1 0 0 0\n", "exceeds n_max"),
            ("mu0 = 10\nmode = 1 1 0 0\n", "fields"),
            ("mu0 = 10\nmode = 1 1 0 0 0\nmode = -1 1 0 0 0\n", "already given"),
            ("mu0 = ten\n", "expects a number"),
            ("mu0 = 10\nspeed = 3\n", "unknown key"),
            ("mu0 = 10\nmu0 = 11\n", "already set"),
            ("kappa = 2\n", "mu0"),
            ("mu0 = 10\nexport = xml\n", "export"),
        ] {
            let err = parse(text).unwrap_err().to_string();
            assert!(err.contains(needle), "{text:?}: {err}");
        }
    }

    #[test]
    fn keys_and_defaults() {
        let c = parse(
            "# comment\nmu0 = 12.5 # trailing\nmu_star = 12\nmu = 12.25\nkappa = 1.5\nr_max = 1e3\ncells = 200\n\
             tol_fixed_point = 1e-11\ntol_mu = 1e-9\nmax_iter = 30\nrelaxation = 0.8\ntheta_points = 64\n\
             output_dir = out\nexport = csv\nseed = 7\n",
        )
        .unwrap();
        let s = &c.solver;
        assert_eq!((s.mu0, s.mu_star, s.kappa, s.r_max, s.cells), (12.5, 12.0, 1.5, 1e3, 200));
        assert_eq!((s.tol_fixed_point, s.tol_mu, s.max_iter, s.relaxation), (1e-11, 1e-9, 30, 0.8));
        assert_eq!((c.pinned_mu, c.theta_points, c.seed), (Some(12.25), 64, 7));
        assert_eq!(c.output_dir, Path::new("/tmp/out"));
        assert!(c.exports.decay_csv && !c.exports.residual_json);

        let d = parse("mu0 = 10\n").unwrap();
        assert_eq!(d.solver.n_max, DEFAULT_N_MAX);
        assert_eq!(parse("mu0 = 10\nmode = 20 0 0 1e-9 0\n").unwrap().solver.n_max, 20);
        assert_eq!(d.solver.mu_star, 10.0);
        assert_eq!(d.theta_points, MIN_THETA_POINTS);
        assert!(d.exports.decay_csv && d.exports.residual_json);
    }
}
