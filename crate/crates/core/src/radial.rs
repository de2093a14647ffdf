//! Radial solver on the ball `B_R`.
//!
//! For a radial function `u(r)` the Hessian eigenvalues are `u''(r)` once and
//! `u'(r)/r` with multiplicity `N - 1`, so
//!
//! ```text
//! -M^+(D^2 u) = -theta(u'') u'' - (N-1)/r * theta(u') u' = g(r)
//! ```
//!
//! with `u'(0) = 0` and `u(R) = 0`. Because `s -> theta(s) s` is a strictly
//! increasing bijection, the equation resolves for `u''` pointwise:
//! `u'' = theta_solve(-g(r) - (N-1)/r * theta(u') u')`. The solver marches
//! `u'` outward from the center with a midpoint (RK2) rule — the center uses
//! the isotropic-Hessian limit `D^2 u(0) = u''(0) I` and a half-step Taylor
//! start — then integrates `u(r) = -int_r^R u'` by the trapezoid rule so the
//! boundary value is exactly zero. Everything downstream (torsion function,
//! principal eigenpair, loaded system solves) is built on this march.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::nonlinearity::SystemSpec;
use crate::pucci::{theta, theta_solve, EllipticityPair};

#[derive(Debug, Error)]
pub enum RadialError {
    #[error("radial grid needs at least 16 segments, got {0}")]
    TooCoarse(usize),
    #[error("radial grid radius must be positive and finite, got {0}")]
    BadRadius(f64),
    #[error("space dimension {0} outside the supported range 1..=8")]
    BadDimension(usize),
    #[error("load must be nonnegative; g(r_{node}) = {value}")]
    NegativeLoad { node: usize, value: f64 },
    #[error("non-finite value encountered at node {node} during the {stage}")]
    NonFinite { node: usize, stage: &'static str },
    #[error("field does not live on the expected grid")]
    GridMismatch,
    #[error("field has {got} values, grid has {expected} nodes")]
    LengthMismatch { got: usize, expected: usize },
    #[error(
        "inverse power iteration did not converge within {iterations} iterations \
         (last relative eigenvalue gap {last_gap:.3e})"
    )]
    EigenNoConvergence { iterations: usize, last_gap: f64 },
    #[error("eigenfunction lost positivity at node {0}")]
    PositivityLost(usize),
    #[error("tolerance must be positive, got {0}")]
    BadTolerance(f64),
    #[error("state has {got} components, system has {expected}")]
    ComponentMismatch { got: usize, expected: usize },
    #[error("nonlinearity evaluation failed at radius {radius}: {source}")]
    Nonlinearity {
        radius: f64,
        source: crate::exprlang::ExprError,
    },
}

/// Uniform mesh `r_k = k h`, `h = R / m`, on `[0, R]` in dimension `dim`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadialGrid {
    r_max: f64,
    dim: usize,
    segments: usize,
}

impl RadialGrid {
    pub fn new(r_max: f64, dim: usize, segments: usize) -> Result<Self, RadialError> {
        if !(r_max > 0.0) || !r_max.is_finite() {
            return Err(RadialError::BadRadius(r_max));
        }
        if dim == 0 || dim > crate::pucci::MAX_DIM {
            return Err(RadialError::BadDimension(dim));
        }
        if segments < 16 {
            return Err(RadialError::TooCoarse(segments));
        }
        Ok(RadialGrid { r_max, dim, segments })
    }

    pub fn r_max(&self) -> f64 {
        self.r_max
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn segments(&self) -> usize {
        self.segments
    }

    pub fn len(&self) -> usize {
        self.segments + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn h(&self) -> f64 {
        self.r_max / self.segments as f64
    }

    pub fn node(&self, k: usize) -> f64 {
        self.r_max * k as f64 / self.segments as f64
    }
}

/// A sampled scalar function on a radial grid, optionally with first
/// derivative samples from the march.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RadialField {
    grid: Option<RadialGrid>,
    values: Vec<f64>,
    deriv: Option<Vec<f64>>,
}

impl RadialField {
    pub fn from_values(grid: RadialGrid, values: Vec<f64>) -> Result<Self, RadialError> {
        if values.len() != grid.len() {
            return Err(RadialError::LengthMismatch {
                got: values.len(),
                expected: grid.len(),
            });
        }
        Ok(RadialField {
            grid: Some(grid),
            values,
            deriv: None,
        })
    }

    pub fn from_fn(grid: RadialGrid, f: impl Fn(f64) -> f64) -> Self {
        let values = (0..grid.len()).map(|k| f(grid.node(k))).collect();
        RadialField {
            grid: Some(grid),
            values,
            deriv: None,
        }
    }

    pub fn constant(grid: RadialGrid, c: f64) -> Self {
        RadialField {
            grid: Some(grid),
            values: vec![c; grid.len()],
            deriv: None,
        }
    }

    pub fn grid(&self) -> RadialGrid {
        self.grid.expect("empty RadialField has no grid")
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn deriv(&self) -> Option<&[f64]> {
        self.deriv.as_deref()
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Scales values (and derivative samples) by `c >= 0`.
    pub fn scale(&self, c: f64) -> RadialField {
        RadialField {
            grid: self.grid,
            values: self.values.iter().map(|v| c * v).collect(),
            deriv: self
                .deriv
                .as_ref()
                .map(|d| d.iter().map(|v| c * v).collect()),
        }
    }

    pub fn sup_distance(&self, other: &RadialField) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    /// Writes `r,value,derivative` rows with 17 significant digits.
    pub fn write_csv<W: std::io::Write>(&self, w: &mut W) -> std::io::Result<()> {
        let grid = self.grid();
        writeln!(w, "r,value,derivative")?;
        for k in 0..grid.len() {
            let d = self.deriv.as_ref().map(|d| d[k]);
            match d {
                Some(d) => writeln!(
                    w,
                    "{:.16e},{:.16e},{:.16e}",
                    grid.node(k),
                    self.values[k],
                    d
                )?,
                None => writeln!(w, "{:.16e},{:.16e},", grid.node(k), self.values[k])?,
            }
        }
        Ok(())
    }
}

/// A vector of `n` radial fields, one per equation.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SystemState {
    pub fields: Vec<RadialField>,
}

impl SystemState {
    pub fn new(fields: Vec<RadialField>) -> Self {
        SystemState { fields }
    }

    pub fn n(&self) -> usize {
        self.fields.len()
    }

    pub fn sup_norms(&self) -> Vec<f64> {
        self.fields.iter().map(|f| f.sup_norm()).collect()
    }

    pub fn max_sup_norm(&self) -> f64 {
        self.sup_norms().into_iter().fold(0.0, f64::max)
    }

    pub fn sup_distance(&self, other: &SystemState) -> f64 {
        self.fields
            .iter()
            .zip(&other.fields)
            .map(|(a, b)| a.sup_distance(b))
            .fold(0.0, f64::max)
    }

    /// Component values at node `k`, clamped to the admissible cone
    /// `[0, inf)^n` (tiny negative rounding is flattened).
    pub fn point_at(&self, k: usize) -> Vec<f64> {
        self.fields.iter().map(|f| f.values()[k].max(0.0)).collect()
    }

    pub fn grid(&self) -> Option<RadialGrid> {
        self.fields.first().map(|f| f.grid())
    }

    pub fn same_grid(&self, other: &SystemState) -> bool {
        self.n() == other.n()
            && self
                .fields
                .iter()
                .zip(&other.fields)
                .all(|(a, b)| a.grid() == b.grid())
    }
}

/// Right-hand side of the marched ODE for `w = u'`:
/// `w' = theta_solve(-g(r) - (N-1)/r * theta(w) w)`.
#[inline]
fn slope_rhs(r: f64, w: f64, g_r: f64, dim_m1: f64, pair: &EllipticityPair) -> f64 {
    theta_solve(-g_r - dim_m1 * theta(w, pair) * w / r, pair)
}

/// Solves `-M^+(D^2 u) = g(r)` on the grid of `g` with `u'(0) = 0`,
/// `u(R) = 0`, for nonnegative loads. Returns the solution with derivative
/// samples attached.
pub fn solve_radial(g: &RadialField, pair: &EllipticityPair) -> Result<RadialField, RadialError> {
    let grid = g.grid();
    let m = grid.segments();
    let h = grid.h();
    let dim = grid.dim() as f64;
    let dim_m1 = dim - 1.0;
    let gv = g.values();

    for (k, v) in gv.iter().enumerate() {
        if !v.is_finite() {
            return Err(RadialError::NonFinite { node: k, stage: "load" });
        }
        if *v < -1e-12 {
            return Err(RadialError::NegativeLoad { node: k, value: *v });
        }
    }
    let load = |k: usize| gv[k].max(0.0);

    let mut w = vec![0.0; m + 1];
    // center: D^2 u(0) = u''(0) I, so N * theta(s) s = -g(0)
    let s0 = theta_solve(-load(0) / dim, pair);
    // half-step Taylor start u'(h/2) = s0 h/2, then one midpoint evaluation
    let g_half = 0.5 * (load(0) + load(1));
    w[1] = h * slope_rhs(0.5 * h, 0.5 * h * s0, g_half, dim_m1, pair);
    for k in 1..m {
        let r = grid.node(k);
        let f1 = slope_rhs(r, w[k], load(k), dim_m1, pair);
        let w_mid = w[k] + 0.5 * h * f1;
        let g_mid = 0.5 * (load(k) + load(k + 1));
        let f2 = slope_rhs(r + 0.5 * h, w_mid, g_mid, dim_m1, pair);
        w[k + 1] = w[k] + h * f2;
        if !w[k + 1].is_finite() {
            return Err(RadialError::NonFinite {
                node: k + 1,
                stage: "slope march",
            });
        }
    }

    // u(r) = -int_r^R u'(s) ds via the trapezoid rule; u(R) = 0 exactly
    let mut u = vec![0.0; m + 1];
    for k in (0..m).rev() {
        u[k] = u[k + 1] - 0.5 * h * (w[k] + w[k + 1]);
        if !u[k].is_finite() {
            return Err(RadialError::NonFinite {
                node: k,
                stage: "quadrature",
            });
        }
    }

    Ok(RadialField {
        grid: Some(grid),
        values: u,
        deriv: Some(w),
    })
}

/// The torsion function: unique solution of `-M^+(D^2 e) = 1`, `e(R) = 0`.
/// Its sup norm `e(0)` calibrates every supersolution scaling.
pub fn torsion(pair: &EllipticityPair, grid: RadialGrid) -> Result<RadialField, RadialError> {
    solve_radial(&RadialField::constant(grid, 1.0), pair)
}

/// Principal eigenpair of `-M^+` on the ball by inverse power iteration:
/// returns `(mu, phi)` with `-M^+(D^2 phi) = mu phi`, `phi > 0` on `[0, R)`
/// and `||phi||_inf = 1`.
pub fn principal_eigenpair(
    pair: &EllipticityPair,
    grid: RadialGrid,
    tol: f64,
) -> Result<(f64, RadialField), RadialError> {
    const MAX_ITER: usize = 500;
    if !(tol > 0.0) {
        return Err(RadialError::BadTolerance(tol));
    }
    let r_max = grid.r_max();
    let mut phi = RadialField::from_fn(grid, |r| 1.0 - (r / r_max) * (r / r_max));
    let mut mu_prev: Option<f64> = None;
    let mut last_gap = f64::INFINITY;
    for _ in 0..MAX_ITER {
        let sup = phi.sup_norm();
        if sup == 0.0 || !sup.is_finite() {
            return Err(RadialError::NonFinite { node: 0, stage: "eigen iterate" });
        }
        let normalized = phi.scale(1.0 / sup);
        let next = solve_radial(&normalized, pair)?;
        let sup_next = next.sup_norm();
        let mu = 1.0 / sup_next;
        if let Some(prev) = mu_prev {
            last_gap = (mu - prev).abs() / mu;
            if (mu - prev).abs() < tol * mu {
                let eigenfunction = next.scale(1.0 / sup_next);
                for (k, v) in eigenfunction.values()[..grid.segments()].iter().enumerate() {
                    if *v <= 0.0 {
                        return Err(RadialError::PositivityLost(k));
                    }
                }
                return Ok((mu, eigenfunction));
            }
        }
        mu_prev = Some(mu);
        phi = next;
    }
    Err(RadialError::EigenNoConvergence {
        iterations: MAX_ITER,
        last_gap,
    })
}

/// Solves the decoupled auxiliary system: component `i` solves
/// `-M^+_i(D^2 psi_i) = mu * f_i(d(r), ..., d(r))`.
pub fn solve_auxiliary_system(
    spec: &SystemSpec,
    mu: f64,
    d: &RadialField,
) -> Result<SystemState, RadialError> {
    let grid = d.grid();
    let mut fields = Vec::with_capacity(spec.n);
    for i in 0..spec.n {
        let mut load = Vec::with_capacity(grid.len());
        for k in 0..grid.len() {
            let s = d.values()[k].max(0.0);
            let point = vec![s; spec.n];
            let v = spec
                .f
                .eval_component(i, &point)
                .map_err(|source| RadialError::Nonlinearity {
                    radius: grid.node(k),
                    source,
                })?;
            load.push(mu * v.max(0.0));
        }
        let g = RadialField::from_values(grid, load)?;
        fields.push(solve_radial(&g, &spec.pairs[i])?);
    }
    Ok(SystemState::new(fields))
}
