//! Monotone wide-stencil discretization of `M^+` on 2D masked grids.
//!
//! At each interior node the operator is approximated by
//!
//! ```text
//! max_k [ g(delta_{v_k} u) + g(delta_{v_k_perp} u) ]      g(t) = theta(t) t
//! ```
//!
//! where `v_k` runs over `K` integer direction vectors per quadrant (the
//! nearest lattice vector to each angle `k pi / (2K)`), `v_perp = (-b, a)`
//! is exactly orthogonal, and `delta_v` is the centered second difference
//! along `v` with the spacing-corrected denominator `|v|^2 h^2`. Every
//! coefficient of a neighbor value is nonnegative, so the scheme is
//! monotone, and it is consistent with the eigenvalue form of the operator
//! up to `O(h^2)` plus the directional resolution of the stencil.
//!
//! `solve_2d` runs the damped pseudo-time iteration
//! `u <- u + dt (M^+_h u + g)` with `dt = h^2 / (4 Lambda)`, which is a
//! convex-combination (hence order-preserving) update; for nonnegative
//! loads the iterates climb monotonically to the discrete solution.

use std::sync::Arc;

use rayon::prelude::*;
use thiserror::Error;

use crate::pucci::EllipticityPair;
use crate::radial::RadialField;

#[derive(Debug, Error)]
pub enum GridError {
    #[error("grid needs nx, ny >= 16, got {nx} x {ny}")]
    TooSmall { nx: usize, ny: usize },
    #[error("grid spacing must be positive, got {0}")]
    BadSpacing(f64),
    #[error("stencil width must be at least 1")]
    BadStencilWidth,
    #[error("mask length {got} does not match nx * ny = {expected}")]
    MaskLength { got: usize, expected: usize },
    #[error(
        "mask too thin for the stencil: node ({i}, {j}) is within {reach} nodes of the array edge"
    )]
    MaskTooThin { i: usize, j: usize, reach: usize },
    #[error("mask is empty")]
    EmptyMask,
    #[error("load must be nonnegative on the mask; g({i}, {j}) = {value}")]
    NegativeLoad { i: usize, j: usize, value: f64 },
    #[error("fields live on different grids")]
    GridMismatch,
    #[error("pseudo-time iteration diverged (sup update grew for {0} consecutive steps)")]
    Diverged(usize),
    #[error("pseudo-time iteration did not converge within {0} steps")]
    NoConvergence(usize),
    #[error("tolerance must be positive, got {0}")]
    BadTolerance(f64),
    #[error("ball of radius {radius} around node ({i}, {j}) exits the mask")]
    BallExitsMask { radius: f64, i: usize, j: usize },
    #[error("mask file is malformed: {0}")]
    BadMaskFile(String),
}

/// One orthogonal direction pair: the lattice vector, its perpendicular,
/// and the squared lattice length shared by both.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DirectionPair {
    pub v: (i32, i32),
    pub len_sq: i32,
}

/// Nearest coprime lattice vectors to the angles `q pi / (2K)`, `q < K`,
/// with coordinates bounded by `K`. Ties go to the shorter vector.
fn direction_pairs(k: usize) -> Vec<DirectionPair> {
    let mut out = Vec::with_capacity(k);
    for q in 0..k {
        let target = q as f64 * std::f64::consts::FRAC_PI_2 / k as f64;
        let mut best: Option<((i32, i32), f64)> = None;
        for a in 0..=(k as i32) {
            for b in 0..=(k as i32) {
                if a == 0 && b == 0 {
                    continue;
                }
                if gcd(a as u32, b as u32) != 1 {
                    continue;
                }
                let angle = (b as f64).atan2(a as f64);
                let err = (angle - target).abs();
                let candidate = ((a, b), err);
                best = Some(match best {
                    None => candidate,
                    Some(prev) => {
                        let better = err < prev.1 - 1e-12
                            || ((err - prev.1).abs() <= 1e-12
                                && a * a + b * b < prev.0 .0 * prev.0 .0 + prev.0 .1 * prev.0 .1);
                        if better {
                            candidate
                        } else {
                            prev
                        }
                    }
                });
            }
        }
        let ((a, b), _) = best.expect("k >= 1 always yields a direction");
        out.push(DirectionPair {
            v: (a, b),
            len_sq: a * a + b * b,
        });
    }
    out
}

fn gcd(mut a: u32, mut b: u32) -> u32 {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a.max(1)
}

/// Chebyshev distance to the complement (0 on unmasked nodes), by the usual
/// two-pass sweep with unit weights in all eight directions.
fn chebyshev_distance(nx: usize, ny: usize, mask: &[bool]) -> Vec<u16> {
    let big = u16::MAX - 1;
    let mut d = vec![0u16; nx * ny];
    for idx in 0..nx * ny {
        if mask[idx] {
            d[idx] = big;
        }
    }
    // forward pass: W, NW, N, NE
    for j in 0..ny {
        for i in 0..nx {
            let idx = j * nx + i;
            if d[idx] == 0 {
                continue;
            }
            let mut best = d[idx];
            if i > 0 {
                best = best.min(d[idx - 1] + 1);
            }
            if j > 0 {
                best = best.min(d[idx - nx] + 1);
                if i > 0 {
                    best = best.min(d[idx - nx - 1] + 1);
                }
                if i + 1 < nx {
                    best = best.min(d[idx - nx + 1] + 1);
                }
            }
            d[idx] = best;
        }
    }
    // backward pass: E, SE, S, SW
    for j in (0..ny).rev() {
        for i in (0..nx).rev() {
            let idx = j * nx + i;
            if d[idx] == 0 {
                continue;
            }
            let mut best = d[idx];
            if i + 1 < nx {
                best = best.min(d[idx + 1] + 1);
            }
            if j + 1 < ny {
                best = best.min(d[idx + nx] + 1);
                if i + 1 < nx {
                    best = best.min(d[idx + nx + 1] + 1);
                }
                if i > 0 {
                    best = best.min(d[idx + nx - 1] + 1);
                }
            }
            d[idx] = best;
        }
    }
    d
}

/// A masked uniform grid with the direction set of its wide stencil.
///
/// `cheb` holds each node's Chebyshev distance to the complement; a
/// direction pair participates at a node only when its arms stay within
/// that distance, so long arms never read exterior zeros far beyond the
/// boundary (the axis pair, with reach 1, is always available at interior
/// nodes).
#[derive(Debug, Clone, PartialEq)]
pub struct Grid2D {
    nx: usize,
    ny: usize,
    h: f64,
    stencil_width: usize,
    mask: Vec<bool>,
    directions: Vec<DirectionPair>,
    reach: usize,
    cheb: Vec<u16>,
}

impl Grid2D {
    /// Wraps an explicit mask. Every masked node must be at least `reach`
    /// nodes away from the array edge, where `reach` is the largest stencil
    /// coordinate (at most `k`).
    pub fn new(
        nx: usize,
        ny: usize,
        h: f64,
        k: usize,
        mask: Vec<bool>,
    ) -> Result<Self, GridError> {
        if nx < 16 || ny < 16 {
            return Err(GridError::TooSmall { nx, ny });
        }
        if !(h > 0.0) || !h.is_finite() {
            return Err(GridError::BadSpacing(h));
        }
        if k == 0 {
            return Err(GridError::BadStencilWidth);
        }
        if mask.len() != nx * ny {
            return Err(GridError::MaskLength {
                got: mask.len(),
                expected: nx * ny,
            });
        }
        let directions = direction_pairs(k);
        let reach = directions
            .iter()
            .map(|d| d.v.0.abs().max(d.v.1.abs()) as usize)
            .max()
            .unwrap_or(1);
        for j in 0..ny {
            for i in 0..nx {
                if mask[j * nx + i]
                    && (i < reach || j < reach || i + reach >= nx || j + reach >= ny)
                {
                    return Err(GridError::MaskTooThin { i, j, reach });
                }
            }
        }
        let cheb = chebyshev_distance(nx, ny, &mask);
        Ok(Grid2D {
            nx,
            ny,
            h,
            stencil_width: k,
            mask,
            directions,
            reach,
            cheb,
        })
    }

    /// Builds a grid from a region predicate over `[0, width] x [0, height]`,
    /// padding the array with the stencil margin automatically.
    pub fn from_region(
        h: f64,
        k: usize,
        width: f64,
        height: f64,
        pred: impl Fn(f64, f64) -> bool,
    ) -> Result<Self, GridError> {
        if !(h > 0.0) || !h.is_finite() {
            return Err(GridError::BadSpacing(h));
        }
        if k == 0 {
            return Err(GridError::BadStencilWidth);
        }
        let reach = direction_pairs(k)
            .iter()
            .map(|d| d.v.0.abs().max(d.v.1.abs()) as usize)
            .max()
            .unwrap_or(1);
        let margin = reach + 1;
        let cols = (width / h).round() as usize + 1;
        let rows = (height / h).round() as usize + 1;
        let nx = (cols + 2 * margin).max(16);
        let ny = (rows + 2 * margin).max(16);
        let mut mask = vec![false; nx * ny];
        for j in 0..rows {
            for i in 0..cols {
                let x = i as f64 * h;
                let y = j as f64 * h;
                if pred(x, y) {
                    mask[(j + margin) * nx + (i + margin)] = true;
                }
            }
        }
        Grid2D::new(nx, ny, h, k, mask)
    }

    /// Disc of the given radius centred in its bounding box.
    pub fn disc(radius: f64, h: f64, k: usize) -> Result<Self, GridError> {
        Grid2D::from_region(h, k, 2.0 * radius, 2.0 * radius, |x, y| {
            let dx = x - radius;
            let dy = y - radius;
            dx * dx + dy * dy < radius * radius
        })
    }

    /// Parses a mask file: a `rows cols` header line, then `rows` lines of
    /// `0`/`1` tokens. The array is padded with the stencil margin.
    pub fn from_mask_text(text: &str, h: f64, k: usize) -> Result<Self, GridError> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines
            .next()
            .ok_or_else(|| GridError::BadMaskFile("missing header".into()))?;
        let mut parts = header.split_whitespace();
        let rows: usize = parts
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| GridError::BadMaskFile("bad row count".into()))?;
        let cols: usize = parts
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| GridError::BadMaskFile("bad column count".into()))?;
        let mut cells = Vec::with_capacity(rows * cols);
        for line in lines.take(rows) {
            for tok in line.split_whitespace() {
                match tok {
                    "0" => cells.push(false),
                    "1" => cells.push(true),
                    other => {
                        return Err(GridError::BadMaskFile(format!("unexpected token `{other}`")))
                    }
                }
            }
        }
        if cells.len() != rows * cols {
            return Err(GridError::BadMaskFile(format!(
                "expected {} cells, found {}",
                rows * cols,
                cells.len()
            )));
        }
        let reach = direction_pairs(k)
            .iter()
            .map(|d| d.v.0.abs().max(d.v.1.abs()) as usize)
            .max()
            .unwrap_or(1);
        let margin = reach + 1;
        let nx = (cols + 2 * margin).max(16);
        let ny = (rows + 2 * margin).max(16);
        let mut mask = vec![false; nx * ny];
        for r in 0..rows {
            for c in 0..cols {
                if cells[r * cols + c] {
                    mask[(r + margin) * nx + (c + margin)] = true;
                }
            }
        }
        Grid2D::new(nx, ny, h, k, mask)
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn stencil_width(&self) -> usize {
        self.stencil_width
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn is_masked(&self, i: usize, j: usize) -> bool {
        self.mask[j * self.nx + i]
    }

    pub fn idx(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    pub fn directions(&self) -> &[DirectionPair] {
        &self.directions
    }

    pub fn masked_count(&self) -> usize {
        self.mask.iter().filter(|m| **m).count()
    }
}

/// Scalar samples on a [`Grid2D`]; zero outside the mask by construction.
#[derive(Debug, Clone, PartialEq)]
pub struct GridField {
    grid: Arc<Grid2D>,
    values: Vec<f64>,
}

impl GridField {
    pub fn zeros(grid: Arc<Grid2D>) -> Self {
        let values = vec![0.0; grid.nx * grid.ny];
        GridField { grid, values }
    }

    /// Samples `f(x, y)` on masked nodes (absolute array coordinates).
    pub fn from_fn(grid: Arc<Grid2D>, f: impl Fn(f64, f64) -> f64) -> Self {
        let mut values = vec![0.0; grid.nx * grid.ny];
        for j in 0..grid.ny {
            for i in 0..grid.nx {
                if grid.mask[j * grid.nx + i] {
                    values[j * grid.nx + i] = f(i as f64 * grid.h, j as f64 * grid.h);
                }
            }
        }
        GridField { grid, values }
    }

    pub fn from_values(grid: Arc<Grid2D>, mut values: Vec<f64>) -> Result<Self, GridError> {
        if values.len() != grid.nx * grid.ny {
            return Err(GridError::MaskLength {
                got: values.len(),
                expected: grid.nx * grid.ny,
            });
        }
        for (idx, v) in values.iter_mut().enumerate() {
            if !grid.mask[idx] {
                *v = 0.0;
            }
        }
        Ok(GridField { grid, values })
    }

    pub fn grid(&self) -> &Arc<Grid2D> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[j * self.grid.nx + i]
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn sup_distance(&self, other: &GridField) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    /// Writes `x,y,value` rows for every node, 17 significant digits.
    pub fn write_csv<W: std::io::Write>(&self, w: &mut W) -> std::io::Result<()> {
        writeln!(w, "x,y,value")?;
        let h = self.grid.h;
        for j in 0..self.grid.ny {
            for i in 0..self.grid.nx {
                writeln!(
                    w,
                    "{:.16e},{:.16e},{:.16e}",
                    i as f64 * h,
                    j as f64 * h,
                    self.values[j * self.grid.nx + i]
                )?;
            }
        }
        Ok(())
    }

    /// Portable float grid: a `nx ny h` header, then `ny` rows of values.
    pub fn write_grid<W: std::io::Write>(&self, w: &mut W) -> std::io::Result<()> {
        writeln!(w, "{} {} {:.16e}", self.grid.nx, self.grid.ny, self.grid.h)?;
        for j in 0..self.grid.ny {
            let row: Vec<String> = (0..self.grid.nx)
                .map(|i| format!("{:.16e}", self.values[j * self.grid.nx + i]))
                .collect();
            writeln!(w, "{}", row.join(" "))?;
        }
        Ok(())
    }
}

#[inline]
fn branch_weight(t: f64, lambda: f64, big_lambda: f64) -> f64 {
    big_lambda * t.max(0.0) + lambda * t.min(0.0)
}

/// Per-pair precomputed data: linear offsets of the two arms, the inverse
/// denominator, and the reach in Chebyshev nodes.
#[derive(Clone, Copy)]
struct PairOffsets {
    ov: isize,
    ow: isize,
    inv: f64,
    reach: u16,
}

#[inline]
fn stencil_at(values: &[f64], idx: usize, offs: &[PairOffsets], lambda: f64, big_lambda: f64) -> f64 {
    let c = 2.0 * values[idx];
    let mut best = f64::NEG_INFINITY;
    for o in offs {
        let dv = (values[(idx as isize + o.ov) as usize] - c
            + values[(idx as isize - o.ov) as usize])
            * o.inv;
        let dw = (values[(idx as isize + o.ow) as usize] - c
            + values[(idx as isize - o.ow) as usize])
            * o.inv;
        let s = branch_weight(dv, lambda, big_lambda) + branch_weight(dw, lambda, big_lambda);
        if s > best {
            best = s;
        }
    }
    best
}

/// Direction pairs sorted by reach, so the pairs admissible at a node with
/// Chebyshev distance `d` form the prefix counted by [`pair_counts`].
fn offsets(grid: &Grid2D) -> Vec<PairOffsets> {
    let nx = grid.nx as isize;
    let hh = grid.h * grid.h;
    let mut offs: Vec<PairOffsets> = grid
        .directions
        .iter()
        .map(|d| {
            let (a, b) = d.v;
            PairOffsets {
                ov: b as isize * nx + a as isize,
                // perpendicular (-b, a)
                ow: a as isize * nx - b as isize,
                inv: 1.0 / (d.len_sq as f64 * hh),
                reach: a.abs().max(b.abs()) as u16,
            }
        })
        .collect();
    offs.sort_by_key(|o| o.reach);
    offs
}

/// For each node, how many leading (reach-sorted) pairs its Chebyshev
/// distance admits. Interior nodes always admit the axis pair.
fn pair_counts(grid: &Grid2D, offs: &[PairOffsets]) -> Vec<u8> {
    grid.cheb
        .iter()
        .map(|&d| offs.iter().take_while(|o| o.reach <= d).count() as u8)
        .collect()
}

/// Applies the wide-stencil operator at every masked node; zero elsewhere.
pub fn pucci_wide_stencil(u: &GridField, pair: &EllipticityPair) -> GridField {
    let grid = u.grid.clone();
    let nx = grid.nx;
    let offs = offsets(&grid);
    let counts = pair_counts(&grid, &offs);
    let (lambda, big_lambda) = (pair.lambda, pair.big_lambda);
    let mut values = vec![0.0; grid.nx * grid.ny];
    values
        .par_chunks_mut(nx)
        .with_min_len(32)
        .enumerate()
        .for_each(|(j, row)| {
            for (i, out) in row.iter_mut().enumerate() {
                let idx = j * nx + i;
                if grid.mask[idx] {
                    *out = stencil_at(
                        &u.values,
                        idx,
                        &offs[..counts[idx] as usize],
                        lambda,
                        big_lambda,
                    );
                }
            }
        });
    GridField { grid, values }
}

const MAX_STEPS: usize = 5_000_000;
const DIVERGENCE_WINDOW: usize = 1000;

/// Solves `-M^+_h(u) = g` on the mask with zero exterior data by damped
/// pseudo-time iteration from zero; stops when the sup update falls below
/// `tol * dt`.
pub fn solve_2d(g: &GridField, pair: &EllipticityPair, tol: f64) -> Result<GridField, GridError> {
    if !(tol > 0.0) {
        return Err(GridError::BadTolerance(tol));
    }
    let grid = g.grid.clone();
    let nx = grid.nx;
    for j in 0..grid.ny {
        for i in 0..nx {
            let idx = j * nx + i;
            if grid.mask[idx] && g.values[idx] < 0.0 {
                return Err(GridError::NegativeLoad {
                    i,
                    j,
                    value: g.values[idx],
                });
            }
        }
    }
    let dt = grid.h * grid.h / (4.0 * pair.big_lambda);
    let offs = offsets(&grid);
    let counts = pair_counts(&grid, &offs);
    let (lambda, big_lambda) = (pair.lambda, pair.big_lambda);
    // contiguous masked spans, indexed by row, keep the hot loop tight
    let spans_by_row: Vec<Vec<(usize, usize)>> = (0..grid.ny)
        .map(|j| {
            let mut spans = Vec::new();
            let mut i = 0;
            while i < nx {
                if grid.mask[j * nx + i] {
                    let start = i;
                    while i < nx && grid.mask[j * nx + i] {
                        i += 1;
                    }
                    spans.push((start, i));
                } else {
                    i += 1;
                }
            }
            spans
        })
        .collect();
    let mut u = vec![0.0; nx * grid.ny];
    let mut next = u.clone();
    let mut prev_delta = f64::INFINITY;
    let mut grow_count = 0usize;
    // one contiguous block of rows per worker keeps fork-join cost per step
    // negligible
    let block_rows = grid
        .ny
        .div_ceil(2 * rayon::current_num_threads().max(1))
        .max(8);
    for _ in 0..MAX_STEPS {
        let delta = {
            let u_ref = &u;
            let g_ref = &g.values;
            let offs_ref = &offs;
            let counts_ref = &counts;
            let spans_ref = &spans_by_row;
            next.par_chunks_mut(nx * block_rows)
                .enumerate()
                .map(|(blk, rows)| {
                    let mut blk_delta = 0.0f64;
                    let j0 = blk * block_rows;
                    for (dj, row) in rows.chunks_mut(nx).enumerate() {
                        let j = j0 + dj;
                        for &(start, end) in &spans_ref[j] {
                            for i in start..end {
                                let idx = j * nx + i;
                                let update = dt
                                    * (stencil_at(
                                        u_ref,
                                        idx,
                                        &offs_ref[..counts_ref[idx] as usize],
                                        lambda,
                                        big_lambda,
                                    ) + g_ref[idx]);
                                row[i] = u_ref[idx] + update;
                                blk_delta = blk_delta.max(update.abs());
                            }
                        }
                    }
                    blk_delta
                })
                .reduce(|| 0.0, f64::max)
        };
        std::mem::swap(&mut u, &mut next);
        if delta < tol * dt {
            return Ok(GridField { grid, values: u });
        }
        if delta > prev_delta {
            grow_count += 1;
            if grow_count >= DIVERGENCE_WINDOW {
                return Err(GridError::Diverged(DIVERGENCE_WINDOW));
            }
        } else {
            grow_count = 0;
        }
        prev_delta = delta;
    }
    Err(GridError::NoConvergence(MAX_STEPS))
}

/// Largest inscribed ball of the mask via an exact two-phase Euclidean
/// distance transform (column scan, then row-wise envelope). Returns the
/// deepest node and its distance to the complement, which is within one
/// grid spacing of the true inradius.
pub fn inscribed_ball(grid: &Grid2D) -> Result<((usize, usize), f64), GridError> {
    let nx = grid.nx;
    let ny = grid.ny;
    if grid.mask.iter().all(|m| !m) {
        return Err(GridError::EmptyMask);
    }
    let inf = (nx + ny) as i64;
    // phase 1: vertical node distance to the complement, per column
    let mut vert = vec![inf; nx * ny];
    for i in 0..nx {
        let mut d = inf;
        for j in 0..ny {
            d = if grid.mask[j * nx + i] { (d + 1).min(inf) } else { 0 };
            vert[j * nx + i] = d;
        }
        let mut d = inf;
        for j in (0..ny).rev() {
            d = if grid.mask[j * nx + i] { (d + 1).min(inf) } else { 0 };
            vert[j * nx + i] = vert[j * nx + i].min(d);
        }
    }
    // phase 2: squared distances combining horizontal offsets
    let mut best_idx = (0usize, 0usize);
    let mut best_dsq = -1i64;
    for j in 0..ny {
        let row = &vert[j * nx..(j + 1) * nx];
        for i in 0..nx {
            if !grid.mask[j * nx + i] {
                continue;
            }
            let mut dsq = i64::MAX;
            for (ip, g) in row.iter().enumerate() {
                let dx = i as i64 - ip as i64;
                let cand = dx * dx + g * g;
                if cand < dsq {
                    dsq = cand;
                }
            }
            if dsq > best_dsq {
                best_dsq = dsq;
                best_idx = (i, j);
            }
        }
    }
    Ok((best_idx, (best_dsq as f64).sqrt() * grid.h))
}

/// Samples a radial profile around `center` (node coordinates) inside its
/// ball and extends by zero outside; the profile is interpolated linearly
/// in the radius. Errors when the open ball sticks out of the mask (the
/// profile vanishes at the ball radius, so the boundary sphere itself may
/// touch unmasked nodes).
pub fn extend_by_zero(
    f: &RadialField,
    center: (usize, usize),
    grid: &Arc<Grid2D>,
) -> Result<GridField, GridError> {
    let r_ball = f.grid().r_max();
    let hr = f.grid().h();
    let nx = grid.nx;
    let h = grid.h;
    let (ci, cj) = center;
    let mut values = vec![0.0; nx * grid.ny];
    for j in 0..grid.ny {
        for i in 0..nx {
            let dx = (i as f64 - ci as f64) * h;
            let dy = (j as f64 - cj as f64) * h;
            let dist = dx.hypot(dy);
            if dist < r_ball {
                if !grid.mask[j * nx + i] {
                    return Err(GridError::BallExitsMask {
                        radius: r_ball,
                        i,
                        j,
                    });
                }
                let t = dist / hr;
                let k = (t.floor() as usize).min(f.grid().segments() - 1);
                let frac = t - k as f64;
                let v = f.values()[k] + frac * (f.values()[k + 1] - f.values()[k]);
                values[j * nx + i] = v;
            }
        }
    }
    Ok(GridField {
        grid: grid.clone(),
        values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pucci::EllipticityPair;
    use crate::radial::{torsion, RadialGrid};
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn pair(l: f64, big: f64) -> EllipticityPair {
        EllipticityPair::new(l, big).unwrap()
    }

    #[test]
    fn directions_start_with_axes() {
        let d = direction_pairs(1);
        assert_eq!(d[0].v, (1, 0));
        let d = direction_pairs(2);
        assert_eq!(d[0].v, (1, 0));
        assert_eq!(d[1].v, (1, 1));
        let d = direction_pairs(4);
        assert_eq!(d.len(), 4);
        // all coordinates bounded by K
        for dp in &d {
            assert!(dp.v.0.abs().max(dp.v.1.abs()) <= 4);
        }
    }

    #[test]
    fn quadratic_saddle_recovers_operator_value() {
        // u = (x^2 - y^2)/2 has Hessian diag(1, -1): M^+ = 2 - 1 = 1
        let grid = Arc::new(Grid2D::disc(0.5, 1.0 / 64.0, 2).unwrap());
        let (c, _) = inscribed_ball(&grid).unwrap();
        let cx = c.0 as f64 * grid.h();
        let cy = c.1 as f64 * grid.h();
        let u = GridField::from_fn(grid.clone(), |x, y| {
            ((x - cx) * (x - cx) - (y - cy) * (y - cy)) / 2.0
        });
        let out = pucci_wide_stencil(&u, &pair(1.0, 2.0));
        // interior nodes away from the mask boundary see the exact value
        let reach = 4;
        for j in 0..grid.ny() {
            for i in 0..grid.nx() {
                if !grid.is_masked(i, j) {
                    continue;
                }
                let deep = (0..=reach).all(|_| true)
                    && ((i as i64 - c.0 as i64).pow(2) + (j as i64 - c.1 as i64).pow(2))
                        < ((0.5 / grid.h()) as i64 - reach as i64).pow(2);
                if deep {
                    assert!(
                        (out.get(i, j) - 1.0).abs() < 1e-9,
                        "node ({i},{j}): {}",
                        out.get(i, j)
                    );
                }
            }
        }
    }

    #[test]
    fn zero_field_maps_to_zero() {
        let grid = Arc::new(Grid2D::disc(0.4, 1.0 / 32.0, 2).unwrap());
        let u = GridField::zeros(grid);
        let out = pucci_wide_stencil(&u, &pair(1.0, 2.0));
        assert_eq!(out.sup_norm(), 0.0);
    }

    #[test]
    fn laplacian_case_matches_five_point_for_quadratics() {
        let grid = Arc::new(Grid2D::disc(0.5, 1.0 / 32.0, 4).unwrap());
        let (c, _) = inscribed_ball(&grid).unwrap();
        let cx = c.0 as f64 * grid.h();
        let cy = c.1 as f64 * grid.h();
        let u = GridField::from_fn(grid.clone(), |x, y| {
            (x - cx) * (x - cx) + 0.5 * (y - cy) * (y - cy)
        });
        let out = pucci_wide_stencil(&u, &pair(1.0, 1.0));
        // Laplacian of the quadratic is 3 everywhere
        let (ci, cj) = c;
        assert!((out.get(ci, cj) - 3.0).abs() < 1e-9);
    }

    #[test]
    fn stencil_is_monotone_in_neighbor_values() {
        let grid = Arc::new(Grid2D::disc(0.4, 1.0 / 24.0, 3).unwrap());
        let p = pair(1.0, 2.0);
        let mut rng = StdRng::seed_from_u64(crate::DEFAULT_SEED);
        for _ in 0..50 {
            let base: Vec<f64> = (0..grid.nx() * grid.ny())
                .map(|_| rng.random_range(-1.0..1.0))
                .collect();
            let u = GridField::from_values(grid.clone(), base.clone()).unwrap();
            let before = pucci_wide_stencil(&u, &p);
            // bump one random masked node upward
            let masked: Vec<usize> = (0..base.len()).filter(|i| grid.mask()[*i]).collect();
            let target = masked[rng.random_range(0..masked.len())];
            let mut bumped = base.clone();
            bumped[target] += rng.random_range(0.0..0.5);
            let u2 = GridField::from_values(grid.clone(), bumped).unwrap();
            let after = pucci_wide_stencil(&u2, &p);
            for idx in &masked {
                if *idx == target {
                    continue; // center coefficient is negative by design
                }
                assert!(
                    after.values()[*idx] >= before.values()[*idx] - 1e-12,
                    "monotonicity violated at {idx}"
                );
            }
        }
    }

    #[test]
    fn solve_matches_radial_profile_on_disc() {
        // coarse version of the cross-validation: lambda = Lambda = 1
        let grid = Arc::new(Grid2D::disc(1.0, 1.0 / 48.0, 2).unwrap());
        let g = GridField::from_fn(grid.clone(), |_, _| 1.0);
        let u = solve_2d(&g, &pair(1.0, 1.0), 1e-3).unwrap();
        let (c, r) = inscribed_ball(&grid).unwrap();
        assert!((r - 1.0).abs() <= 1.5 * grid.h());
        let center_value = u.get(c.0, c.1);
        assert!(
            (center_value - 0.25).abs() < 0.02 * 0.25 + 0.5 * grid.h(),
            "center {center_value}"
        );
    }

    #[test]
    fn solve_zero_load_is_zero() {
        let grid = Arc::new(Grid2D::disc(0.4, 1.0 / 24.0, 2).unwrap());
        let g = GridField::zeros(grid);
        let u = solve_2d(&g, &pair(1.0, 2.0), 1e-8).unwrap();
        assert_eq!(u.sup_norm(), 0.0);
    }

    #[test]
    fn solve_rejects_negative_load() {
        let grid = Arc::new(Grid2D::disc(0.4, 1.0 / 24.0, 2).unwrap());
        let g = GridField::from_fn(grid, |_, _| -1.0);
        assert!(matches!(
            solve_2d(&g, &pair(1.0, 1.0), 1e-6),
            Err(GridError::NegativeLoad { .. })
        ));
    }

    #[test]
    fn discrete_comparison_under_equal_steps() {
        // identical pseudo-time step counts preserve pointwise order exactly
        let grid = Arc::new(Grid2D::disc(0.4, 1.0 / 24.0, 2).unwrap());
        let p = pair(1.0, 2.0);
        let dt = grid.h() * grid.h() / (4.0 * p.big_lambda);
        let mut rng = StdRng::seed_from_u64(9);
        for _ in 0..20 {
            let base: Vec<f64> = (0..grid.nx() * grid.ny())
                .map(|_| rng.random_range(0.0..2.0))
                .collect();
            let extra: Vec<f64> = (0..grid.nx() * grid.ny())
                .map(|_| rng.random_range(0.0..1.0))
                .collect();
            let g1 = GridField::from_values(grid.clone(), base.clone()).unwrap();
            let g2 = GridField::from_values(
                grid.clone(),
                base.iter().zip(&extra).map(|(a, b)| a + b).collect(),
            )
            .unwrap();
            let mut u1 = GridField::zeros(grid.clone());
            let mut u2 = GridField::zeros(grid.clone());
            for _ in 0..200 {
                let op1 = pucci_wide_stencil(&u1, &p);
                let op2 = pucci_wide_stencil(&u2, &p);
                let step = |u: &GridField, op: &GridField, g: &GridField| {
                    GridField::from_values(
                        grid.clone(),
                        u.values()
                            .iter()
                            .zip(op.values())
                            .zip(g.values())
                            .map(|((u, o), g)| u + dt * (o + g))
                            .collect(),
                    )
                    .unwrap()
                };
                u1 = step(&u1, &op1, &g1);
                u2 = step(&u2, &op2, &g2);
            }
            for idx in 0..u1.values().len() {
                assert!(u1.values()[idx] <= u2.values()[idx] + 1e-10);
            }
        }
    }

    #[test]
    fn inscribed_ball_square() {
        let grid = Grid2D::from_region(1.0 / 32.0, 2, 1.0, 1.0, |_, _| true).unwrap();
        let ((_, _), r) = inscribed_ball(&grid).unwrap();
        assert!((r - 0.5).abs() <= 1.5 * grid.h(), "r = {r}");
    }

    #[test]
    fn inscribed_ball_disc() {
        let grid = Grid2D::disc(0.4, 1.0 / 64.0, 2).unwrap();
        let (_, r) = inscribed_ball(&grid).unwrap();
        assert!((r - 0.4).abs() <= 1.5 * grid.h(), "r = {r}");
    }

    #[test]
    fn inscribed_ball_lshape_with_brute_oracle() {
        // union of [0,1]x[0,1] and [1,2]x[0,0.5]: inradius 0.5 in the thick arm
        let h = 1.0 / 32.0;
        let grid = Grid2D::from_region(h, 2, 2.0, 1.0, |x, y| {
            (x < 1.0 && y < 1.0) || (y < 0.5)
        })
        .unwrap();
        let ((ci, cj), r) = inscribed_ball(&grid).unwrap();
        assert!((r - 0.5).abs() <= 1.5 * h, "r = {r}");
        // brute-force distance of the reported center to the complement
        let mut brute = f64::INFINITY;
        for j in 0..grid.ny() {
            for i in 0..grid.nx() {
                if !grid.is_masked(i, j) {
                    let d = ((i as f64 - ci as f64).powi(2) + (j as f64 - cj as f64).powi(2))
                        .sqrt()
                        * h;
                    brute = brute.min(d);
                }
            }
        }
        assert!((brute - r).abs() < 1e-12, "EDT {r} vs brute {brute}");
    }

    #[test]
    fn extend_by_zero_round_trips_torsion() {
        let grid = Arc::new(Grid2D::disc(1.0, 1.0 / 48.0, 2).unwrap());
        let (c, r) = inscribed_ball(&grid).unwrap();
        let rg = RadialGrid::new(r, 2, 2048).unwrap();
        let e = torsion(&pair(1.0, 1.0), rg).unwrap();
        let ext = extend_by_zero(&e, c, &grid).unwrap();
        let direct = solve_2d(&GridField::from_fn(grid.clone(), |_, _| 1.0), &pair(1.0, 1.0), 1e-3)
            .unwrap();
        let scale = direct.sup_norm();
        assert!(
            ext.sup_distance(&direct) < 0.05 * scale + grid.h(),
            "distance {}",
            ext.sup_distance(&direct)
        );
    }

    #[test]
    fn extend_by_zero_zero_field() {
        let grid = Arc::new(Grid2D::disc(0.4, 1.0 / 24.0, 2).unwrap());
        let (c, r) = inscribed_ball(&grid).unwrap();
        let rg = RadialGrid::new(r * 0.9, 2, 64).unwrap();
        let zero = crate::radial::RadialField::constant(rg, 0.0);
        let ext = extend_by_zero(&zero, c, &grid).unwrap();
        assert_eq!(ext.sup_norm(), 0.0);
    }

    #[test]
    fn extend_by_zero_rejects_oversized_ball() {
        let grid = Arc::new(Grid2D::disc(0.4, 1.0 / 24.0, 2).unwrap());
        let (c, _) = inscribed_ball(&grid).unwrap();
        let rg = RadialGrid::new(0.6, 2, 64).unwrap();
        let f = crate::radial::RadialField::constant(rg, 1.0);
        assert!(matches!(
            extend_by_zero(&f, c, &grid),
            Err(GridError::BallExitsMask { .. })
        ));
    }

    #[test]
    fn mask_file_roundtrip() {
        let mut text = String::from("4 6\n");
        for _ in 0..4 {
            text.push_str("0 1 1 1 1 0\n");
        }
        let grid = Grid2D::from_mask_text(&text, 0.1, 2).unwrap();
        assert_eq!(grid.masked_count(), 16);
        assert!(Grid2D::from_mask_text("2 2\n0 1\n", 0.1, 2).is_err());
    }

    #[test]
    fn field_writers_have_expected_shapes() {
        let grid = Arc::new(Grid2D::disc(0.3, 1.0 / 24.0, 2).unwrap());
        let f = GridField::from_fn(grid.clone(), |x, y| x + y);
        let mut csv = Vec::new();
        f.write_csv(&mut csv).unwrap();
        let csv = String::from_utf8(csv).unwrap();
        assert!(csv.starts_with("x,y,value"));
        assert_eq!(csv.lines().count(), 1 + grid.nx() * grid.ny());
        let mut gridfile = Vec::new();
        f.write_grid(&mut gridfile).unwrap();
        let gridfile = String::from_utf8(gridfile).unwrap();
        let header: Vec<&str> = gridfile.lines().next().unwrap().split_whitespace().collect();
        assert_eq!(header[0], grid.nx().to_string());
        assert_eq!(header[1], grid.ny().to_string());
        assert_eq!(gridfile.lines().count(), 1 + grid.ny());
    }

    #[test]
    fn thin_mask_is_rejected() {
        // a mask touching the array edge violates the stencil margin
        let nx = 20;
        let ny = 20;
        let mut mask = vec![false; nx * ny];
        mask[0] = true;
        assert!(matches!(
            Grid2D::new(nx, ny, 0.1, 2, mask),
            Err(GridError::MaskTooThin { .. })
        ));
    }
}
