//! System descriptions and numerical audits of the structural hypotheses
//! placed on the nonlinearity:
//!
//! * C1 — each `f_i` is nondecreasing in every variable and `f_i(0) = 0`;
//! * C2 — the own-variable slope of `f_i` blows up at the origin;
//! * C3 — `f_i(s, ..., s) / s -> 0` as `s -> infinity` (sublinearity);
//! * C4 — a two-constant gap `0 < a < b` separating the small-barrier and
//!   large-barrier thresholds.
//!
//! C2 and C3 are asymptotic, so the audits evaluate finite geometric
//! sequences and report the raw measurements alongside the verdict; the
//! verdict is a heuristic and the sequences let users override it.

use std::collections::BTreeMap;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exprlang::{pow_checked, Expr, ExprError};
use crate::grid2d::Grid2D;
use crate::pucci::EllipticityPair;

#[derive(Debug, Error)]
pub enum SystemError {
    #[error("component count {got} does not match n = {n}")]
    ComponentCount { got: usize, n: usize },
    #[error("ellipticity pair count {got} does not match n = {n}")]
    PairCount { got: usize, n: usize },
    #[error("combustion parameter tau must be positive, got {0}")]
    BadTau(f64),
    #[error("combustion exponent alpha_{index} must lie in (0, 1), got {value}")]
    BadAlpha { index: usize, value: f64 },
    #[error("alpha count {got} does not match n = {n}")]
    AlphaCount { got: usize, n: usize },
    #[error("ball radius must be positive, got {0}")]
    BadRadius(f64),
    #[error("space dimension {0} outside the supported range 1..=8")]
    BadDimension(usize),
    #[error("n must be at least 1")]
    BadN,
    #[error("audit requires {what} > 0, got {value}")]
    BadAuditParameter { what: &'static str, value: f64 },
    #[error("check_c4 requires 0 < a < b, got a = {a}, b = {b}")]
    BadInterval { a: f64, b: f64 },
    #[error("expression error: {0}")]
    Expr(#[from] ExprError),
}

/// One equation's right-hand side: a parsed expression or a member of the
/// builtin combustion family.
#[derive(Debug, Clone)]
pub enum Component {
    Expr(Expr),
    Combustion {
        tau: f64,
        alphas: Vec<f64>,
        index: usize,
    },
}

impl Component {
    fn eval(&self, x: &[f64]) -> Result<f64, ExprError> {
        match self {
            Component::Expr(e) => e.eval(x),
            Component::Combustion { tau, alphas, index } => {
                let xi = x[*index];
                let mut v = (tau * xi / (tau + xi)).exp() - 1.0;
                for (j, alpha) in alphas.iter().enumerate() {
                    if j != *index {
                        v += pow_checked(x[j], *alpha)?;
                    }
                }
                Ok(v)
            }
        }
    }
}

/// The map `f = (f_1, ..., f_n) : [0, inf)^n -> R^n`.
#[derive(Debug, Clone)]
pub struct Nonlinearity {
    n: usize,
    components: Vec<Component>,
}

impl Nonlinearity {
    pub fn new(n: usize, components: Vec<Component>) -> Result<Self, SystemError> {
        if n == 0 {
            return Err(SystemError::BadN);
        }
        if components.len() != n {
            return Err(SystemError::ComponentCount {
                got: components.len(),
                n,
            });
        }
        Ok(Nonlinearity { n, components })
    }

    /// Parses `texts[i]` as component `i`; all may reference `u1 ... un`.
    pub fn from_expressions(texts: &[String]) -> Result<Self, SystemError> {
        let n = texts.len();
        let components = texts
            .iter()
            .map(|t| crate::exprlang::parse(t, n).map(Component::Expr))
            .collect::<Result<Vec<_>, _>>()?;
        Nonlinearity::new(n, components)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Evaluates component `i` with the tiny-negative clamp: values in
    /// `[-1e-12, 0)` are treated as exact zeros, anything more negative is
    /// returned as-is for the audits to flag.
    pub fn eval_component(&self, i: usize, x: &[f64]) -> Result<f64, ExprError> {
        let v = self.components[i].eval(x)?;
        if v < 0.0 && v >= -1e-12 {
            Ok(0.0)
        } else {
            Ok(v)
        }
    }

    /// All components at once.
    pub fn eval(&self, x: &[f64]) -> Result<Vec<f64>, ExprError> {
        (0..self.n).map(|i| self.eval_component(i, x)).collect()
    }
}

/// The builtin combustion family: component `i` is
/// `exp(tau * x_i / (tau + x_i)) - 1 + sum_{j != i} x_j^{alpha_j}`.
pub fn builtin_combustion(n: usize, tau: f64, alphas: &[f64]) -> Result<Nonlinearity, SystemError> {
    if n == 0 {
        return Err(SystemError::BadN);
    }
    if !(tau > 0.0) || !tau.is_finite() {
        return Err(SystemError::BadTau(tau));
    }
    if alphas.len() != n {
        return Err(SystemError::AlphaCount {
            got: alphas.len(),
            n,
        });
    }
    for (j, alpha) in alphas.iter().enumerate() {
        if !(*alpha > 0.0 && *alpha < 1.0) {
            return Err(SystemError::BadAlpha {
                index: j + 1,
                value: *alpha,
            });
        }
    }
    let components = (0..n)
        .map(|index| Component::Combustion {
            tau,
            alphas: alphas.to_vec(),
            index,
        })
        .collect();
    Nonlinearity::new(n, components)
}

/// Domain descriptor of the system.
#[derive(Debug, Clone)]
pub enum Domain {
    /// Ball of radius `r` in dimension `dim`; the radial pipeline runs here.
    Ball { r: f64, dim: usize },
    /// A masked 2D grid; the radial pipeline runs on its inscribed ball and
    /// fields extend by zero.
    Grid2d(Grid2D),
}

/// Full description of one system instance.
#[derive(Debug, Clone)]
pub struct SystemSpec {
    pub n: usize,
    pub pairs: Vec<EllipticityPair>,
    pub f: Nonlinearity,
    pub domain: Domain,
}

impl SystemSpec {
    pub fn new(
        pairs: Vec<EllipticityPair>,
        f: Nonlinearity,
        domain: Domain,
    ) -> Result<Self, SystemError> {
        let n = f.n();
        if pairs.len() != n {
            return Err(SystemError::PairCount { got: pairs.len(), n });
        }
        if let Domain::Ball { r, dim } = &domain {
            if !(*r > 0.0) || !r.is_finite() {
                return Err(SystemError::BadRadius(*r));
            }
            if *dim == 0 || *dim > crate::pucci::MAX_DIM {
                return Err(SystemError::BadDimension(*dim));
            }
        }
        Ok(SystemSpec { n, pairs, f, domain })
    }

    /// Radius of the ball the radial pipeline runs on: the ball's own radius,
    /// or the inradius of the 2D mask.
    pub fn ball_radius(&self) -> f64 {
        match &self.domain {
            Domain::Ball { r, .. } => *r,
            Domain::Grid2d(grid) => crate::grid2d::inscribed_ball(grid)
                .map(|(_, r)| r)
                .unwrap_or(0.0),
        }
    }

    /// Space dimension seen by the radial pipeline (2 for grid domains).
    pub fn ball_dim(&self) -> usize {
        match &self.domain {
            Domain::Ball { dim, .. } => *dim,
            Domain::Grid2d(_) => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Condition {
    C1,
    C2,
    C3,
    C4,
}

/// A sample point together with what was measured there.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Witness {
    pub point: Vec<f64>,
    pub measured: Vec<f64>,
    pub note: String,
}

/// Outcome of one audit. A failed audit always carries at least one witness;
/// passing audits keep the raw sequences so the verdict can be reviewed.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AuditReport {
    pub condition: Condition,
    pub pass: bool,
    pub witnesses: Vec<Witness>,
    pub params: BTreeMap<String, f64>,
}

/// C1: `f_i(0) = 0` and componentwise monotonicity on sampled ordered pairs
/// in `[0, box_size]^n`.
pub fn audit_c1(
    f: &Nonlinearity,
    box_size: f64,
    samples: usize,
    seed: u64,
) -> Result<AuditReport, SystemError> {
    if !(box_size > 0.0) {
        return Err(SystemError::BadAuditParameter {
            what: "box",
            value: box_size,
        });
    }
    let n = f.n();
    let mut params = BTreeMap::new();
    params.insert("box".into(), box_size);
    params.insert("samples".into(), samples as f64);
    params.insert("seed".into(), seed as f64);
    let mut witnesses = Vec::new();
    let mut pass = true;

    let origin = vec![0.0; n];
    for i in 0..n {
        match f.eval_component(i, &origin) {
            Ok(v) if v.abs() <= 1e-10 => {}
            Ok(v) => {
                pass = false;
                witnesses.push(Witness {
                    point: origin.clone(),
                    measured: vec![v],
                    note: format!("f_{}(0,...,0) = {v}, expected 0", i + 1),
                });
            }
            Err(e) => {
                pass = false;
                witnesses.push(Witness {
                    point: origin.clone(),
                    measured: vec![],
                    note: format!("f_{} failed at the origin: {e}", i + 1),
                });
            }
        }
    }

    let mut rng = StdRng::seed_from_u64(seed);
    for _ in 0..samples {
        let p: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..box_size)).collect();
        let q: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..box_size)).collect();
        let x: Vec<f64> = p.iter().zip(&q).map(|(a, b)| a.min(*b)).collect();
        let y: Vec<f64> = p.iter().zip(&q).map(|(a, b)| a.max(*b)).collect();
        for i in 0..n {
            let fx = match f.eval_component(i, &x) {
                Ok(v) => v,
                Err(e) => {
                    pass = false;
                    witnesses.push(Witness {
                        point: x.clone(),
                        measured: vec![],
                        note: format!("f_{} evaluation failed: {e}", i + 1),
                    });
                    continue;
                }
            };
            let fy = match f.eval_component(i, &y) {
                Ok(v) => v,
                Err(e) => {
                    pass = false;
                    witnesses.push(Witness {
                        point: y.clone(),
                        measured: vec![],
                        note: format!("f_{} evaluation failed: {e}", i + 1),
                    });
                    continue;
                }
            };
            if fx > fy + 1e-10 {
                pass = false;
                witnesses.push(Witness {
                    point: x.iter().chain(y.iter()).copied().collect(),
                    measured: vec![fx, fy],
                    note: format!("f_{} decreases from x to y >= x", i + 1),
                });
            }
        }
        if witnesses.len() > 32 {
            break; // enough evidence
        }
    }

    Ok(AuditReport {
        condition: Condition::C1,
        pass,
        witnesses,
        params,
    })
}

const C2_STEPS: usize = 20;
const C2_SLOPE_THRESHOLD: f64 = 1e3;
/// Length of the tail of the slope sequence that must be strictly increasing.
const C2_TAIL: usize = 5;

/// C2: own-variable difference quotients along `s = s_min * 2^{-k}`.
/// Passes for component `i` when the slope sequence is increasing over its
/// final stretch and its last value exceeds `1e3`. The full sequence is
/// recorded as a witness either way.
pub fn audit_c2(f: &Nonlinearity, s_min: f64, seed: u64) -> Result<AuditReport, SystemError> {
    if !(s_min > 0.0 && s_min < 1.0) {
        return Err(SystemError::BadAuditParameter {
            what: "s_min",
            value: s_min,
        });
    }
    let n = f.n();
    let mut params = BTreeMap::new();
    params.insert("s_min".into(), s_min);
    params.insert("slope_threshold".into(), C2_SLOPE_THRESHOLD);
    params.insert("seed".into(), seed as f64);
    let mut witnesses = Vec::new();
    let mut pass = true;

    let origin = vec![0.0; n];
    for i in 0..n {
        let f0 = f.eval_component(i, &origin)?;
        let mut slopes = Vec::with_capacity(C2_STEPS + 1);
        let mut point = vec![0.0; n];
        for k in 0..=C2_STEPS {
            let s = s_min * 0.5f64.powi(k as i32);
            point[i] = s;
            let v = f.eval_component(i, &point)?;
            slopes.push((v - f0) / s);
        }
        let tail_increasing = slopes
            .windows(2)
            .skip(slopes.len() - 1 - C2_TAIL)
            .all(|w| w[1] > w[0]);
        let last = *slopes.last().unwrap();
        let ok = tail_increasing && last > C2_SLOPE_THRESHOLD;
        if !ok {
            pass = false;
        }
        witnesses.push(Witness {
            point: vec![i as f64 + 1.0],
            measured: slopes,
            note: format!(
                "component {}: slope sequence along its own axis ({})",
                i + 1,
                if ok { "diverges" } else { "stays bounded or non-increasing" }
            ),
        });
    }

    Ok(AuditReport {
        condition: Condition::C2,
        pass,
        witnesses,
        params,
    })
}

const C3_STEPS: usize = 10;
const C3_RATIO_THRESHOLD: f64 = 0.1;

/// C3: diagonal ratios `f_i(s, ..., s) / s` along `s = s_max * 2^k`.
/// Passes for component `i` when the ratio sequence is strictly decreasing
/// and has either dropped below `0.1` or shrunk to under `0.1x` its starting
/// value by the end of the scan.
pub fn audit_c3(f: &Nonlinearity, s_max: f64, seed: u64) -> Result<AuditReport, SystemError> {
    if !(s_max >= 1.0) {
        return Err(SystemError::BadAuditParameter {
            what: "s_max",
            value: s_max,
        });
    }
    let n = f.n();
    let mut params = BTreeMap::new();
    params.insert("s_max".into(), s_max);
    params.insert("ratio_threshold".into(), C3_RATIO_THRESHOLD);
    params.insert("seed".into(), seed as f64);
    let mut witnesses = Vec::new();
    let mut pass = true;

    for i in 0..n {
        let mut ratios = Vec::with_capacity(C3_STEPS + 1);
        let mut overflowed = false;
        for k in 0..=C3_STEPS {
            let s = s_max * 2.0f64.powi(k as i32);
            let point = vec![s; n];
            match f.eval_component(i, &point) {
                Ok(v) => ratios.push(v / s),
                Err(_) => {
                    overflowed = true;
                    break;
                }
            }
        }
        let decreasing = ratios.windows(2).all(|w| w[1] < w[0]);
        let ok = if overflowed || ratios.len() < 2 {
            false
        } else {
            let first = ratios[0];
            let last = *ratios.last().unwrap();
            decreasing && (last < C3_RATIO_THRESHOLD || last <= C3_RATIO_THRESHOLD * first)
        };
        if !ok {
            pass = false;
        }
        witnesses.push(Witness {
            point: vec![i as f64 + 1.0],
            measured: ratios,
            note: format!(
                "component {}: diagonal ratio sequence ({})",
                i + 1,
                if overflowed {
                    "overflowed"
                } else if ok {
                    "decays"
                } else {
                    "fails to decay"
                }
            ),
        });
    }

    Ok(AuditReport {
        condition: Condition::C3,
        pass,
        witnesses,
        params,
    })
}

/// C4: with torsion norms and the geometric constants supplied by the
/// barrier machinery, checks
///
/// ```text
/// min_i (1 / ||e_i||) * a / f_i(a, ..., a)  >  max_i A_i * b / f_i(b, ..., b)
/// ```
///
/// and that neither diagonal value vanishes. The two sides are recorded in
/// the report (`measured = [lhs, rhs]` of the summary witness).
pub fn check_c4(
    spec: &SystemSpec,
    a: f64,
    b: f64,
    norms_e: &[f64],
    a_consts: &[f64],
) -> Result<AuditReport, SystemError> {
    if !(a > 0.0 && a < b) {
        return Err(SystemError::BadInterval { a, b });
    }
    let n = spec.n;
    let mut params = BTreeMap::new();
    params.insert("a".into(), a);
    params.insert("b".into(), b);
    let mut witnesses = Vec::new();
    let mut pass = true;

    let pa = vec![a; n];
    let pb = vec![b; n];
    let mut lhs = f64::INFINITY;
    let mut rhs = f64::NEG_INFINITY;
    for i in 0..n {
        let fa = spec.f.eval_component(i, &pa)?;
        let fb = spec.f.eval_component(i, &pb)?;
        if fa == 0.0 || fb == 0.0 {
            pass = false;
            witnesses.push(Witness {
                point: vec![if fa == 0.0 { a } else { b }],
                measured: vec![fa, fb],
                note: format!("f_{}(s,...,s) vanishes on a diagonal point", i + 1),
            });
            continue;
        }
        let l = a / (norms_e[i] * fa);
        let r = a_consts[i] * b / fb;
        lhs = lhs.min(l);
        rhs = rhs.max(r);
        witnesses.push(Witness {
            point: vec![i as f64 + 1.0],
            measured: vec![l, r],
            note: format!("component {}: small-side and large-side values", i + 1),
        });
    }
    if pass {
        pass = lhs > rhs;
    }
    witnesses.push(Witness {
        point: vec![],
        measured: vec![lhs, rhs],
        note: "summary: min small-side vs max large-side".into(),
    });

    Ok(AuditReport {
        condition: Condition::C4,
        pass,
        witnesses,
        params,
    })
}
