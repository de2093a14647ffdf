//! Pucci extremal operators on small symmetric matrices.
//!
//! For a symmetric matrix `M` with eigenvalues `e_1, ..., e_N`,
//!
//! ```text
//! M^+(M) = Lambda * sum(e_i > 0) + lambda * sum(e_i < 0)
//! M^-(M) = lambda * sum(e_i > 0) + Lambda * sum(e_i < 0)
//! ```
//!
//! `theta` and `theta_solve` are the scalar branch helpers of the radial
//! reduction, where the Hessian of a radial function has eigenvalues `u''`
//! and `N - 1` copies of `u'/r`: `theta(s)` is the weight applied to an
//! eigenvalue of sign `s`, and `theta_solve` inverts `s -> theta(s) * s`.
//!
//! Eigenvalues are computed in closed form for `N <= 2` and by cyclic Jacobi
//! sweeps for `N <= 8`; larger matrices are rejected.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Largest supported matrix dimension.
pub const MAX_DIM: usize = 8;

#[derive(Debug, Error)]
pub enum PucciError {
    #[error("ellipticity constants must satisfy 0 < lambda <= Lambda, got ({lambda}, {big_lambda})")]
    InvalidPair { lambda: f64, big_lambda: f64 },
    #[error("matrix is not symmetric: a[{i}][{j}] = {aij} but a[{j}][{i}] = {aji}")]
    NotSymmetric { i: usize, j: usize, aij: f64, aji: f64 },
    #[error("dimension {0} outside the supported range 1..={MAX_DIM}")]
    BadDimension(usize),
    #[error("matrix entries must be finite")]
    NonFinite,
    #[error("entry vector has length {got}, expected {expected}")]
    BadLength { got: usize, expected: usize },
    #[error("Jacobi eigenvalue iteration did not converge after {0} sweeps")]
    EigenNoConvergence(usize),
}

/// The constants `(lambda, Lambda)` of one equation's extremal operator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EllipticityPair {
    pub lambda: f64,
    #[serde(rename = "Lambda")]
    pub big_lambda: f64,
}

impl EllipticityPair {
    pub fn new(lambda: f64, big_lambda: f64) -> Result<Self, PucciError> {
        if !(lambda > 0.0 && big_lambda >= lambda) || !lambda.is_finite() || !big_lambda.is_finite()
        {
            return Err(PucciError::InvalidPair { lambda, big_lambda });
        }
        Ok(EllipticityPair { lambda, big_lambda })
    }

    /// `lambda == Lambda`, i.e. the operator degenerates to `lambda * trace`.
    pub fn is_isotropic(&self) -> bool {
        self.lambda == self.big_lambda
    }
}

/// Branch weight applied to a Hessian eigenvalue of sign `s` by `M^+`.
///
/// `s >= 0` takes the `Lambda` branch (including `s = 0`, where the value is
/// irrelevant because the eigenvalue contributes nothing).
pub fn theta(s: f64, pair: &EllipticityPair) -> f64 {
    if s >= 0.0 {
        pair.big_lambda
    } else {
        pair.lambda
    }
}

/// Inverts the strictly increasing map `s -> theta(s) * s`.
///
/// Returns the unique `s` with `theta(s) * s = t`, i.e. `t / Lambda` for
/// `t >= 0` and `t / lambda` for `t < 0`.
pub fn theta_solve(t: f64, pair: &EllipticityPair) -> f64 {
    if t >= 0.0 {
        t / pair.big_lambda
    } else {
        t / pair.lambda
    }
}

/// A dense symmetric matrix of dimension at most [`MAX_DIM`].
///
/// Symmetry is required to hold exactly; constructors reject anything else.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    dim: usize,
    entries: Vec<f64>,
}

impl SymMatrix {
    /// Builds a matrix from row-major entries, checking shape and symmetry.
    pub fn new(dim: usize, entries: Vec<f64>) -> Result<Self, PucciError> {
        if dim == 0 || dim > MAX_DIM {
            return Err(PucciError::BadDimension(dim));
        }
        if entries.len() != dim * dim {
            return Err(PucciError::BadLength {
                got: entries.len(),
                expected: dim * dim,
            });
        }
        if entries.iter().any(|v| !v.is_finite()) {
            return Err(PucciError::NonFinite);
        }
        for i in 0..dim {
            for j in (i + 1)..dim {
                let aij = entries[i * dim + j];
                let aji = entries[j * dim + i];
                if aij != aji {
                    return Err(PucciError::NotSymmetric { i, j, aij, aji });
                }
            }
        }
        Ok(SymMatrix { dim, entries })
    }

    /// Diagonal matrix with the given entries.
    pub fn diag(d: &[f64]) -> Result<Self, PucciError> {
        let n = d.len();
        let mut entries = vec![0.0; n * n];
        for (i, v) in d.iter().enumerate() {
            entries[i * n + i] = *v;
        }
        SymMatrix::new(n, entries)
    }

    /// Symmetric matrix from the upper triangle (including the diagonal),
    /// mirrored to the lower one.
    pub fn from_upper(dim: usize, upper: &[f64]) -> Result<Self, PucciError> {
        if dim == 0 || dim > MAX_DIM {
            return Err(PucciError::BadDimension(dim));
        }
        let expected = dim * (dim + 1) / 2;
        if upper.len() != expected {
            return Err(PucciError::BadLength {
                got: upper.len(),
                expected,
            });
        }
        let mut entries = vec![0.0; dim * dim];
        let mut it = upper.iter();
        for i in 0..dim {
            for j in i..dim {
                let v = *it.next().unwrap();
                entries[i * dim + j] = v;
                entries[j * dim + i] = v;
            }
        }
        SymMatrix::new(dim, entries)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.dim + j]
    }

    /// Negated matrix (used by the duality identity `M^-(M) = -M^+(-M)`).
    pub fn neg(&self) -> SymMatrix {
        SymMatrix {
            dim: self.dim,
            entries: self.entries.iter().map(|v| -v).collect(),
        }
    }

    pub fn scale(&self, c: f64) -> SymMatrix {
        SymMatrix {
            dim: self.dim,
            entries: self.entries.iter().map(|v| c * v).collect(),
        }
    }

    pub fn add(&self, other: &SymMatrix) -> Result<SymMatrix, PucciError> {
        if self.dim != other.dim {
            return Err(PucciError::BadDimension(other.dim));
        }
        Ok(SymMatrix {
            dim: self.dim,
            entries: self
                .entries
                .iter()
                .zip(&other.entries)
                .map(|(a, b)| a + b)
                .collect(),
        })
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|i| self.get(i, i)).sum()
    }

    /// All eigenvalues, in no particular order.
    pub fn eigenvalues(&self) -> Result<Vec<f64>, PucciError> {
        match self.dim {
            1 => Ok(vec![self.entries[0]]),
            2 => {
                let a = self.get(0, 0);
                let b = self.get(0, 1);
                let d = self.get(1, 1);
                let mean = 0.5 * (a + d);
                let disc = (0.5 * (a - d)).hypot(b);
                Ok(vec![mean + disc, mean - disc])
            }
            _ => self.jacobi_eigenvalues(),
        }
    }

    /// Cyclic Jacobi sweeps; quadratically convergent for symmetric input.
    fn jacobi_eigenvalues(&self) -> Result<Vec<f64>, PucciError> {
        const MAX_SWEEPS: usize = 64;
        let n = self.dim;
        let mut a = self.entries.clone();
        let frob: f64 = a.iter().map(|v| v * v).sum::<f64>().sqrt();
        if frob == 0.0 {
            return Ok(vec![0.0; n]);
        }
        let stop = 1e-14 * frob;
        for _ in 0..MAX_SWEEPS {
            let mut off = 0.0f64;
            for i in 0..n {
                for j in (i + 1)..n {
                    off += 2.0 * a[i * n + j] * a[i * n + j];
                }
            }
            if off.sqrt() <= stop {
                return Ok((0..n).map(|i| a[i * n + i]).collect());
            }
            for p in 0..n {
                for q in (p + 1)..n {
                    let apq = a[p * n + q];
                    if apq == 0.0 {
                        continue;
                    }
                    let app = a[p * n + p];
                    let aqq = a[q * n + q];
                    let tau = (aqq - app) / (2.0 * apq);
                    let t = if tau >= 0.0 {
                        1.0 / (tau + (1.0 + tau * tau).sqrt())
                    } else {
                        -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                    };
                    let c = 1.0 / (1.0 + t * t).sqrt();
                    let s = t * c;
                    for k in 0..n {
                        let akp = a[k * n + p];
                        let akq = a[k * n + q];
                        a[k * n + p] = c * akp - s * akq;
                        a[k * n + q] = s * akp + c * akq;
                    }
                    for k in 0..n {
                        let apk = a[p * n + k];
                        let aqk = a[q * n + k];
                        a[p * n + k] = c * apk - s * aqk;
                        a[q * n + k] = s * apk + c * aqk;
                    }
                }
            }
        }
        Err(PucciError::EigenNoConvergence(MAX_SWEEPS))
    }
}

/// `M^+_{lambda,Lambda}(M)`: `Lambda` weights the positive eigenvalues,
/// `lambda` the negative ones.
pub fn pucci_plus(m: &SymMatrix, pair: &EllipticityPair) -> Result<f64, PucciError> {
    let eig = m.eigenvalues()?;
    Ok(eig
        .iter()
        .map(|&e| if e > 0.0 { pair.big_lambda * e } else { pair.lambda * e })
        .sum())
}

/// `M^-_{lambda,Lambda}(M)`: `lambda` weights the positive eigenvalues,
/// `Lambda` the negative ones.
pub fn pucci_minus(m: &SymMatrix, pair: &EllipticityPair) -> Result<f64, PucciError> {
    let eig = m.eigenvalues()?;
    Ok(eig
        .iter()
        .map(|&e| if e > 0.0 { pair.lambda * e } else { pair.big_lambda * e })
        .sum())
}
