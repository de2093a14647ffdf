//! Solvers and certification tools for weakly coupled systems of fully
//! nonlinear elliptic equations driven by Pucci extremal operators,
//!
//! ```text
//! -M^+_{lambda_i, Lambda_i}(D^2 u_i) = mu * f_i(u_1, ..., u_n)   in Omega,
//!  u_1 = ... = u_n = 0                                           on the boundary,
//! ```
//!
//! with nonnegative, componentwise nondecreasing right-hand sides.
//!
//! The crate is organised around the workflow used to certify solution
//! multiplicity for such systems:
//!
//! * [`pucci`] — exact evaluation of the extremal operators on small
//!   symmetric matrices, plus the scalar branch-switch helpers used by the
//!   radial reduction.
//! * [`exprlang`] — a tiny deterministic expression language so nonlinear
//!   terms can be supplied in configuration files.
//! * [`nonlinearity`] — system descriptions and numerical audits of the
//!   structural hypotheses (monotonicity, infinite slope at zero,
//!   sublinearity, the two-constant gap condition).
//! * [`radial`] — an outward-marching radial solver on balls: torsion
//!   function, principal eigenpair, and loaded solves.
//! * [`subsuper`] — barrier families (small and large supersolutions, strict
//!   barriers built from a bump profile), threshold constants, and discrete
//!   residual certificates.
//! * [`iterate`] — monotone iteration between ordered barriers and the
//!   multiplicity workflow that certifies a third solution.
//! * [`grid2d`] — a monotone wide-stencil discretization on 2D masks for
//!   cross-validation and extension-by-zero of radial barriers.

pub mod exprlang;
pub mod grid2d;
pub mod iterate;
pub mod nonlinearity;
pub mod pucci;
pub mod radial;
pub mod subsuper;

/// Default deterministic seed used by sampling audits.
pub const DEFAULT_SEED: u64 = 0x5EED;

/// Numerical parameters shared by the radial pipeline.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Numerics {
    /// Number of radial mesh segments (the grid has `m + 1` nodes).
    pub m: usize,
    /// Sup-norm tolerance for fixed-point iterations.
    pub tol: f64,
    /// Iteration cap for monotone iteration.
    pub max_iter: usize,
    /// Seed for sampling audits.
    pub seed: u64,
    /// Scale factor of the non-strict certificate tolerance
    /// `cert_scale * (1 + ||mu f||_inf)`.
    pub cert_scale: f64,
}

impl Default for Numerics {
    fn default() -> Self {
        Numerics {
            m: 4096,
            tol: 1e-8,
            max_iter: 10_000,
            seed: DEFAULT_SEED,
            cert_scale: 1e-6,
        }
    }
}
