//! Monotone iteration between ordered barriers and the multiplicity
//! workflow.
//!
//! The iteration is plain Picard: `u^{k+1}_i = solve_radial(mu f_i(u^k))`.
//! Componentwise monotonicity of `f` makes the solve map order-preserving,
//! so starting from a certified subsolution the iterates climb to the
//! minimal solution of the order interval, and starting from a certified
//! supersolution they descend to the maximal one. Both directions assert
//! the expected monotonicity and interval containment at every step and
//! abort loudly when a barrier certificate turns out to be wrong.
//!
//! `find_multiplicity` assembles the two ordered barrier pairs, checks the
//! non-ordering of the inner pair, computes the two extremal solutions in
//! the side intervals, and reports whether every hypothesis needed for a
//! third solution has been verified. The third solution itself is never
//! computed — it is located by degree-type arguments, not by iteration —
//! so its existence is certified exactly when all hypotheses hold.

use serde::Serialize;
use thiserror::Error;

use crate::nonlinearity::{audit_c1, check_c4, SystemError, SystemSpec};
use crate::radial::{solve_radial, RadialError, RadialField, SystemState};
use crate::subsuper::{
    certify, check_ordering, residual_sup, BarrierError, BarrierWorkspace, BumpProfile,
    CertificateKind, CertificateReport, OrderingVerdict, ThresholdReport,
};
use crate::Numerics;

#[derive(Debug, Error)]
pub enum IterateError {
    #[error(transparent)]
    Radial(#[from] RadialError),
    #[error(transparent)]
    Barrier(#[from] BarrierError),
    #[error(transparent)]
    System(#[from] SystemError),
    #[error("interval is not ordered: sub exceeds sup at equation {equation}, node {node}")]
    IntervalNotOrdered { equation: usize, node: usize },
    #[error(
        "iterate lost monotonicity at iteration {iteration} (equation {equation}, node {node}); \
         the starting barrier certificate is suspect"
    )]
    MonotonicityLost {
        iteration: usize,
        equation: usize,
        node: usize,
    },
    #[error(
        "iterate escaped the order interval at iteration {iteration} (equation {equation}, \
         node {node}) by {amount:.3e}; the bounding barrier certificate is suspect"
    )]
    IntervalEscape {
        iteration: usize,
        equation: usize,
        node: usize,
        amount: f64,
    },
    #[error("monotone iteration did not converge in {max_iter} iterations (last delta {last_delta:.3e})")]
    MaxIterExceeded { max_iter: usize, last_delta: f64 },
    #[error("mu = {mu} outside the certified window ({lo}, {hi})")]
    MuOutOfRange { mu: f64, lo: f64, hi: f64 },
    #[error("mandatory audit {name} failed")]
    AuditFailed { name: &'static str },
}

/// Which barrier the iteration starts from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Direction {
    FromSub,
    FromSup,
}

/// An order interval `[sub, sup]` of system states on a common grid.
#[derive(Debug, Clone)]
pub struct OrderInterval {
    pub sub: SystemState,
    pub sup: SystemState,
}

impl OrderInterval {
    pub fn new(sub: SystemState, sup: SystemState) -> Result<Self, IterateError> {
        let verdict = check_ordering(&sub, &sup)?;
        if let Some(w) = verdict.witness {
            return Err(IterateError::IntervalNotOrdered {
                equation: w.equation,
                node: w.node,
            });
        }
        Ok(OrderInterval { sub, sup })
    }
}

/// Outcome of one monotone iteration run. The solution profiles are kept in
/// memory; serialization carries the summary (norms, iteration count,
/// residual, per-step deltas).
#[derive(Debug, Clone, Serialize)]
pub struct SolveReport {
    #[serde(skip)]
    pub solution: SystemState,
    pub norms: Vec<f64>,
    pub iterations: usize,
    /// Sup norm of the reapplied-operator residual over equations and
    /// interior nodes.
    pub residual: f64,
    pub direction: Direction,
    /// Per-iteration sup-norm deltas.
    pub history: Vec<f64>,
}

fn picard_step(
    u: &SystemState,
    spec: &SystemSpec,
    mu: f64,
) -> Result<SystemState, IterateError> {
    let grid = u.grid().expect("state has at least one component");
    let mut fields = Vec::with_capacity(spec.n);
    for i in 0..spec.n {
        let mut load = Vec::with_capacity(grid.len());
        for k in 0..grid.len() {
            let x = u.point_at(k);
            let v = spec
                .f
                .eval_component(i, &x)
                .map_err(|source| RadialError::Nonlinearity {
                    radius: grid.node(k),
                    source,
                })?;
            load.push(mu * v.max(0.0));
        }
        let g = RadialField::from_values(grid, load).map_err(IterateError::Radial)?;
        fields.push(solve_radial(&g, &spec.pairs[i])?);
    }
    Ok(SystemState::new(fields))
}

/// Monotone Picard iteration inside `interval` starting from the designated
/// barrier. Stops when the sup-norm delta drops below
/// `tol * (1 + max_i ||u_i||)`; the final residual is recomputed
/// independently through the certificate machinery.
pub fn monotone_solve(
    interval: &OrderInterval,
    spec: &SystemSpec,
    mu: f64,
    direction: Direction,
    tol: f64,
    max_iter: usize,
) -> Result<SolveReport, IterateError> {
    let mut u = match direction {
        Direction::FromSub => interval.sub.clone(),
        Direction::FromSup => interval.sup.clone(),
    };
    let mut history = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    let mut last_delta = f64::INFINITY;
    while iterations < max_iter {
        iterations += 1;
        let next = picard_step(&u, spec, mu)?;
        let scale = 1.0 + u.max_sup_norm().max(next.max_sup_norm());
        let step_tol = 1e-9 * scale;
        // monotonicity of the sweep and containment in the interval
        for i in 0..spec.n {
            let nv = next.fields[i].values();
            let uv = u.fields[i].values();
            let (bound, bound_is_upper) = match direction {
                Direction::FromSub => (interval.sup.fields[i].values(), true),
                Direction::FromSup => (interval.sub.fields[i].values(), false),
            };
            for k in 0..nv.len() {
                let drift = match direction {
                    Direction::FromSub => uv[k] - nv[k],
                    Direction::FromSup => nv[k] - uv[k],
                };
                if drift > step_tol {
                    return Err(IterateError::MonotonicityLost {
                        iteration: iterations,
                        equation: i,
                        node: k,
                    });
                }
                let escape = if bound_is_upper {
                    nv[k] - bound[k]
                } else {
                    bound[k] - nv[k]
                };
                if escape > tol.max(step_tol) {
                    return Err(IterateError::IntervalEscape {
                        iteration: iterations,
                        equation: i,
                        node: k,
                        amount: escape,
                    });
                }
            }
        }
        let delta = next.sup_distance(&u);
        history.push(delta);
        last_delta = delta;
        u = next;
        if delta < tol * (1.0 + u.max_sup_norm()) {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(IterateError::MaxIterExceeded {
            max_iter,
            last_delta,
        });
    }
    let residual = residual_sup(&u, spec, mu)?;
    Ok(SolveReport {
        norms: u.sup_norms(),
        solution: u,
        iterations,
        residual,
        direction,
        history,
    })
}

/// Verdicts for the order hypotheses of the two barrier pairs.
#[derive(Debug, Clone, Serialize)]
pub struct OrderingChecks {
    pub psi_le_psi_tilde: OrderingVerdict,
    pub psi_tilde_le_phi: OrderingVerdict,
    pub psi_le_phi_tilde: OrderingVerdict,
    pub phi_tilde_le_phi: OrderingVerdict,
    /// Expected to FAIL (the inner barriers must not be ordered); the
    /// witness is the center node where `psi_tilde(0) > b > a >= phi_tilde(0)`.
    pub psi_tilde_vs_phi_tilde: OrderingVerdict,
}

impl OrderingChecks {
    pub fn all_hold(&self) -> bool {
        self.psi_le_psi_tilde.leq
            && self.psi_tilde_le_phi.leq
            && self.psi_le_phi_tilde.leq
            && self.phi_tilde_le_phi.leq
            && !self.psi_tilde_vs_phi_tilde.leq
    }
}

/// Norm-based distinctness of the two computed solutions.
#[derive(Debug, Clone, Serialize)]
pub struct Distinctness {
    pub sup_distance: f64,
    pub u1_max_norm: f64,
    pub u2_min_norm: f64,
    pub a: f64,
    pub b: f64,
    pub holds: bool,
}

/// Summary of the four barriers (profiles stay in memory; JSON carries
/// scalars and norms).
#[derive(Debug, Clone, Serialize)]
pub struct BarrierSummary {
    pub m_mu: f64,
    pub m_tilde: f64,
    pub bump: BumpProfile,
    pub psi_norms: Vec<f64>,
    pub psi_tilde_norms: Vec<f64>,
    pub psi_tilde_center: Vec<f64>,
    pub phi_tilde_norms: Vec<f64>,
    pub phi_norms: Vec<f64>,
}

/// The four barrier fields of a multiplicity run.
#[derive(Debug, Clone)]
pub struct BarrierSet {
    pub psi: SystemState,
    pub psi_tilde: SystemState,
    pub phi_tilde: SystemState,
    pub phi: SystemState,
    pub m_mu: f64,
    pub m_tilde: f64,
    pub bump: BumpProfile,
}

/// Everything `find_multiplicity` establishes. `third_solution_certified`
/// is true exactly when the strict certificates, the orderings, the
/// non-ordering of the inner pair, and the norm separation all hold.
#[derive(Debug, Clone, Serialize)]
pub struct MultiplicityReport {
    pub thresholds: ThresholdReport,
    #[serde(skip)]
    pub barriers: BarrierSet,
    pub barrier_summary: BarrierSummary,
    /// psi sub, phi sup, psi_tilde strict-sub, phi_tilde strict-sup.
    pub certificates: [CertificateReport; 4],
    pub orderings: OrderingChecks,
    pub u1: SolveReport,
    pub u2: SolveReport,
    pub distinctness: Distinctness,
    pub third_solution_certified: bool,
}

/// Builds the two ordered barrier pairs for `mu` in the certified window
/// `(mu_lower_proof, mu_star)`, certifies all hypotheses, and computes the
/// extremal solutions `u1 in [psi, phi_tilde]` and `u2 in [psi_tilde, phi]`.
pub fn find_multiplicity(
    spec: &SystemSpec,
    mu: f64,
    a: f64,
    b: f64,
    numerics: &Numerics,
) -> Result<MultiplicityReport, IterateError> {
    let ws = BarrierWorkspace::new(spec, *numerics)?;
    find_multiplicity_with(&ws, mu, a, b)
}

/// Same as [`find_multiplicity`] but reuses a prebuilt workspace.
pub fn find_multiplicity_with(
    ws: &BarrierWorkspace<'_>,
    mu: f64,
    a: f64,
    b: f64,
) -> Result<MultiplicityReport, IterateError> {
    let spec = ws.spec();
    let numerics = *ws.numerics();
    let thresholds = ws.thresholds(a, b)?;
    if !(mu > thresholds.mu_lower_proof && mu < thresholds.mu_star) {
        return Err(IterateError::MuOutOfRange {
            mu,
            lo: thresholds.mu_lower_proof,
            hi: thresholds.mu_star,
        });
    }

    // mandatory structural audits: monotonicity and the two-constant gap
    let c1 = audit_c1(&spec.f, 2.0 * b, 256, numerics.seed)?;
    if !c1.pass {
        return Err(IterateError::AuditFailed { name: "C1" });
    }
    let norms: Vec<f64> = thresholds.per_equation.iter().map(|e| e.norm_e).collect();
    let a_consts: Vec<f64> = thresholds.per_equation.iter().map(|e| e.a_const).collect();
    let c4 = check_c4(spec, a, b, &norms, &a_consts)?;
    if !c4.pass {
        return Err(IterateError::AuditFailed { name: "C4" });
    }

    let strict_sub = ws.build_strict_subsolution(mu, b, None)?;
    let strict_sup = ws.build_strict_supersolution(a, mu)?;

    // psi: shrink until it sits below both inner barriers
    let (mut psi, mut m_mu) = ws.build_subsolution(mu)?;
    let mut ok = false;
    for _ in 0..200 {
        if check_ordering(&psi, &strict_sub.psi_tilde)?.leq
            && check_ordering(&psi, &strict_sup.phi_tilde)?.leq
        {
            ok = true;
            break;
        }
        m_mu *= 0.5;
        psi = SystemState::new(psi.fields.iter().map(|f| f.scale(0.5)).collect());
    }
    if !ok {
        return Err(BarrierError::ShrinkExhausted {
            what: "psi below the inner barriers",
        }
        .into());
    }
    let psi_certificate = certify(
        &psi,
        spec,
        mu,
        CertificateKind::Sub,
        numerics.cert_scale,
        None,
    )?;

    // phi: grow until it sits above both inner barriers. Growing the scale
    // can leave the defining inequality m_tilde >= mu f_i(m_tilde ||e||)
    // (the nonlinearity may be superlinear in the middle range before
    // sublinearity kicks in), so it is re-checked at every scale and the
    // loop continues until both hold together.
    let large = ws.build_large_supersolution(mu)?;
    let mut m_tilde = large.m_tilde;
    let mut phi = large.phi;
    let mut ok = false;
    for _ in 0..=120 {
        let mut sup_inequality = true;
        let point: Vec<f64> = ws.norm_e().iter().map(|e| m_tilde * e).collect();
        for i in 0..spec.n {
            match spec.f.eval_component(i, &point) {
                Ok(v) => {
                    if m_tilde < mu * v {
                        sup_inequality = false;
                        break;
                    }
                }
                Err(crate::exprlang::ExprError::NonFinite) => {
                    sup_inequality = false;
                    break;
                }
                Err(e) => return Err(BarrierError::from(e).into()),
            }
        }
        if sup_inequality
            && check_ordering(&strict_sup.phi_tilde, &phi)?.leq
            && check_ordering(&strict_sub.psi_tilde, &phi)?.leq
        {
            ok = true;
            break;
        }
        m_tilde *= 2.0;
        phi = SystemState::new(phi.fields.iter().map(|f| f.scale(2.0)).collect());
    }
    if !ok {
        return Err(BarrierError::GrowExhausted.into());
    }
    let phi_certificate = certify(
        &phi,
        spec,
        mu,
        CertificateKind::Sup,
        numerics.cert_scale,
        None,
    )?;

    let orderings = OrderingChecks {
        psi_le_psi_tilde: check_ordering(&psi, &strict_sub.psi_tilde)?,
        psi_tilde_le_phi: check_ordering(&strict_sub.psi_tilde, &phi)?,
        psi_le_phi_tilde: check_ordering(&psi, &strict_sup.phi_tilde)?,
        phi_tilde_le_phi: check_ordering(&strict_sup.phi_tilde, &phi)?,
        psi_tilde_vs_phi_tilde: check_ordering(&strict_sub.psi_tilde, &strict_sup.phi_tilde)?,
    };

    // the two extremal solves are independent
    let interval1 = OrderInterval::new(psi.clone(), strict_sup.phi_tilde.clone())?;
    let interval2 = OrderInterval::new(strict_sub.psi_tilde.clone(), phi.clone())?;
    let (r1, r2) = rayon::join(
        || {
            monotone_solve(
                &interval1,
                spec,
                mu,
                Direction::FromSub,
                numerics.tol,
                numerics.max_iter,
            )
        },
        || {
            monotone_solve(
                &interval2,
                spec,
                mu,
                Direction::FromSub,
                numerics.tol,
                numerics.max_iter,
            )
        },
    );
    let u1 = r1?;
    let u2 = r2?;

    let sup_distance = u1.solution.sup_distance(&u2.solution);
    let u1_max_norm = u1.norms.iter().cloned().fold(0.0, f64::max);
    let u2_min_norm = u2.norms.iter().cloned().fold(f64::INFINITY, f64::min);
    let tiny = 1e-9 * (1.0 + b);
    let distinctness = Distinctness {
        sup_distance,
        u1_max_norm,
        u2_min_norm,
        a,
        b,
        holds: u1_max_norm <= a + tiny && u2_min_norm >= b - tiny,
    };

    let certificates = [
        psi_certificate,
        phi_certificate,
        strict_sub.certificate.clone(),
        strict_sup.certificate.clone(),
    ];
    let third_solution_certified = certificates.iter().all(|c| c.pass)
        && orderings.all_hold()
        && distinctness.holds;

    let barrier_summary = BarrierSummary {
        m_mu,
        m_tilde,
        bump: strict_sub.bump,
        psi_norms: psi.sup_norms(),
        psi_tilde_norms: strict_sub.psi_tilde.sup_norms(),
        psi_tilde_center: strict_sub.center_values.clone(),
        phi_tilde_norms: strict_sup.phi_tilde.sup_norms(),
        phi_norms: phi.sup_norms(),
    };
    let barriers = BarrierSet {
        psi,
        psi_tilde: strict_sub.psi_tilde,
        phi_tilde: strict_sup.phi_tilde,
        phi,
        m_mu,
        m_tilde,
        bump: strict_sub.bump,
    };

    Ok(MultiplicityReport {
        thresholds,
        barriers,
        barrier_summary,
        certificates,
        orderings,
        u1,
        u2,
        distinctness,
        third_solution_certified,
    })
}
