//! Eigenvalues of the finite-interval operator through the matching
//! determinant, and the all-or-nothing classifier for a fixed energy.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{CouplingVector, InteractionKind, Problem};
use crate::propagate::{pruefer_zero_count, shoot_with, wronskian_scaled, ShootDirection, ShootOptions, SolutionTrace};
use crate::tolerances::Tolerances;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MatchingValue {
    pub e: f64,
    /// Mantissa of `W(u_a, u_b)`; the Wronskian is `d · exp(scale_log)`.
    pub d: f64,
    pub scale_log: f64,
    /// `|W| / (‖u_a‖ ‖u_b‖)` with sup-norms over `(u, u')`; compared against the eigenvalue tolerance.
    pub normalized: f64,
}

impl MatchingValue {
    pub fn value(&self) -> f64 {
        self.d * self.scale_log.exp()
    }

    pub fn is_root(&self, tol: &Tolerances) -> bool {
        self.normalized < tol.eigen
    }
}

fn real(e: f64) -> Complex64 {
    Complex64::new(e, 0.0)
}

fn log_norm(t: &SolutionTrace) -> f64 {
    t.log_sup(false).max(t.log_sup(true))
}

pub fn matching_determinant(
    problem: &Problem,
    omega: &CouplingVector,
    e: f64,
    tol: &Tolerances,
) -> Result<MatchingValue> {
    let iv = problem.interval;
    let mid = 0.5 * (iv.a + iv.b);
    let opts = ShootOptions::new(tol).with_stops([mid]);
    let left = shoot_with(problem, omega, real(e), ShootDirection::FromLeft, &opts)?;
    let right = shoot_with(problem, omega, real(e), ShootDirection::FromRight, &opts)?;
    let (w, sa, sb) = wronskian_scaled(&left, &right, mid)?;
    let scale_log = sa.log_scale + sb.log_scale;
    let normalized = w.re.abs() * (scale_log - log_norm(&left) - log_norm(&right)).exp();
    Ok(MatchingValue { e, d: w.re, scale_log, normalized })
}

/// Left shoot at a real energy together with `(φ(b) + γ)/π`, where `φ` is the
/// unwrapped angle `atan2(u, u')`; eigenvalues sit where this is an integer.
fn phase_index(problem: &Problem, omega: &CouplingVector, e: f64, tol: &Tolerances) -> Result<(f64, SolutionTrace)> {
    let t = shoot_with(problem, omega, real(e), ShootDirection::FromLeft, &ShootOptions::new(tol))?;
    Ok(((t.terminal_phase() + problem.bc.gamma) / PI, t))
}

/// Root of the increasing function `f - target` on `[lo, hi]` with
/// `f(lo) <= target <= f(hi)`: Illinois steps with a bisection fallback.
fn solve_phase(
    problem: &Problem,
    omega: &CouplingVector,
    target: f64,
    (mut lo, mut flo): (f64, f64),
    (mut hi, mut fhi): (f64, f64),
    tol: &Tolerances,
) -> Result<f64> {
    let (mut glo, mut ghi) = (flo - target, fhi - target);
    if glo == 0.0 {
        return Ok(lo);
    }
    if ghi == 0.0 {
        return Ok(hi);
    }
    let mut side = 0i8;
    for iter in 0..200 {
        let width = hi - lo;
        if width <= tol.bracket * lo.abs().max(hi.abs()).max(1.0) {
            break;
        }
        let secant = lo - glo * width / (ghi - glo);
        let mut e = if iter % 4 == 3 || !(secant > lo && secant < hi) { 0.5 * (lo + hi) } else { secant };
        if e <= lo || e >= hi {
            e = 0.5 * (lo + hi);
        }
        let (f, _) = phase_index(problem, omega, e, tol)?;
        let g = f - target;
        if g == 0.0 {
            return Ok(e);
        }
        if g < 0.0 {
            lo = e;
            glo = g;
            flo = f;
            if side == -1 {
                ghi *= 0.5;
            }
            side = -1;
        } else {
            hi = e;
            ghi = g;
            fhi = f;
            if side == 1 {
                glo *= 0.5;
            }
            side = 1;
        }
    }
    let _ = (flo, fhi);
    Ok(lo - glo * (hi - lo) / (ghi - glo))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Eigenpair {
    pub e: f64,
    /// Normalized matching determinant at `e`.
    pub residual: f64,
    /// Zeros of the eigenfunction in the open interval.
    pub zero_count: usize,
}

/// Where to resume a search cut short by `max_count`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Continuation {
    /// Lies strictly between the last reported eigenvalue and the next one.
    pub e_lo: f64,
    pub e_hi: f64,
    pub remaining: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectralReport {
    pub eigenvalues: Vec<Eigenpair>,
    pub search_window: (f64, f64),
    /// Number of eigenvalues in the window predicted by the phase count.
    pub expected_count: usize,
    pub continuation: Option<Continuation>,
}

impl SpectralReport {
    pub fn energies(&self) -> Vec<f64> {
        self.eigenvalues.iter().map(|p| p.e).collect()
    }

    pub fn contains(&self, e: f64, within: f64) -> bool {
        self.eigenvalues.iter().any(|p| (p.e - e).abs() <= within)
    }
}

/// All eigenvalues in `[e_lo, e_hi]`, at most `max_count` of them.
pub fn find_eigenvalues(
    problem: &Problem,
    omega: &CouplingVector,
    e_lo: f64,
    e_hi: f64,
    max_count: usize,
    tol: &Tolerances,
) -> Result<SpectralReport> {
    if !(e_lo < e_hi) || !e_lo.is_finite() || !e_hi.is_finite() {
        return Err(Error::domain(format!("empty search window [{e_lo}, {e_hi}]")));
    }
    problem.check_coupling(omega)?;
    let (f_lo, _) = phase_index(problem, omega, e_lo, tol)?;
    let (f_hi, _) = phase_index(problem, omega, e_hi, tol)?;
    let first = f_lo.ceil() as i64;
    let last = f_hi.floor() as i64;
    let expected = (last - first + 1).max(0) as usize;
    let take = expected.min(max_count);
    let targets: Vec<i64> = (first..first + take as i64).collect();

    let eigenvalues = targets
        .par_iter()
        .map(|&k| {
            let e = solve_phase(problem, omega, k as f64, (e_lo, f_lo), (e_hi, f_hi), tol)?;
            let m = matching_determinant(problem, omega, e, tol)?;
            let (_, trace) = phase_index(problem, omega, e, tol)?;
            let iv = problem.interval;
            Ok(Eigenpair { e, residual: m.normalized, zero_count: pruefer_zero_count(&trace, iv.a, iv.b)? })
        })
        .collect::<Result<Vec<_>>>()?;

    let continuation = if take < expected {
        let half = (first + take as i64) as f64 - 0.5;
        let e = solve_phase(problem, omega, half, (e_lo, f_lo), (e_hi, f_hi), tol)?;
        Some(Continuation { e_lo: e, e_hi, remaining: expected - take })
    } else {
        None
    };
    Ok(SpectralReport { eigenvalues, search_window: (e_lo, e_hi), expected_count: expected, continuation })
}

/// Relative size of the node quantity at one site of the eigenfunction of `H`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NodeResidual {
    pub site: usize,
    pub x: f64,
    pub kind: InteractionKind,
    /// `|u(x)|/‖u‖∞` for δ, `|u'(x)|/‖u'‖∞` for δ′.
    pub residual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum VerdictTag {
    AllOmega,
    MeasureZero,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "reason", rename_all = "kebab-case")]
pub enum Witness {
    /// `E` is not an eigenvalue of the interaction-free operator.
    NotEigenvalue { residual: f64 },
    /// Every site satisfies the node condition.
    Nodes { eigenvalue: f64, residuals: Vec<NodeResidual> },
    /// The first site violating the node condition.
    OffendingSite { eigenvalue: f64, site: NodeResidual, residuals: Vec<NodeResidual> },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DichotomyVerdict {
    pub e: f64,
    pub tag: VerdictTag,
    pub witness: Witness,
}

/// Decides whether `E` is an eigenvalue for every coupling vector or for a
/// null set of them, from the eigenfunction of the operator with all couplings
/// switched off.
pub fn classify_ae(problem: &Problem, e: f64, node_tol: f64, tol: &Tolerances) -> Result<DichotomyVerdict> {
    if !(node_tol > 0.0) {
        return Err(Error::domain("node_tol must be positive"));
    }
    problem.validated()?;
    let zero = CouplingVector::zeros(problem.interactions.len());
    let m = matching_determinant(problem, &zero, e, tol)?;
    if !m.is_root(tol) {
        return Ok(DichotomyVerdict {
            e,
            tag: VerdictTag::MeasureZero,
            witness: Witness::NotEigenvalue { residual: m.normalized },
        });
    }

    let eigenvalue = refine_near(problem, &zero, e, tol)?;
    let (_, u) = phase_index(problem, &zero, eigenvalue, tol)?;
    let (sup_u, sup_du) = (u.log_sup(false), u.log_sup(true));
    let residuals = problem
        .interactions
        .sites()
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let st = u.state_at(s.x)?;
            let (v, sup) = match s.kind {
                InteractionKind::Delta => (st.u, sup_u),
                InteractionKind::DeltaPrime => (st.du, sup_du),
            };
            Ok(NodeResidual { site: i, x: s.x, kind: s.kind, residual: (v.norm().ln() + st.log_scale - sup).exp() })
        })
        .collect::<Result<Vec<_>>>()?;

    let witness = match residuals.iter().find(|r| !(r.residual < node_tol)) {
        Some(bad) => Witness::OffendingSite { eigenvalue, site: *bad, residuals: residuals.clone() },
        None => Witness::Nodes { eigenvalue, residuals },
    };
    let tag = match witness {
        Witness::Nodes { .. } => VerdictTag::AllOmega,
        _ => VerdictTag::MeasureZero,
    };
    Ok(DichotomyVerdict { e, tag, witness })
}

/// Eigenvalue closest to `e`, which must already pass the determinant test.
fn refine_near(problem: &Problem, omega: &CouplingVector, e: f64, tol: &Tolerances) -> Result<f64> {
    let (f, _) = phase_index(problem, omega, e, tol)?;
    let k = f.round();
    let mut w = 1e-8 * e.abs().max(1.0);
    for _ in 0..6 {
        let (lo, hi) = (e - w, e + w);
        let (flo, _) = phase_index(problem, omega, lo, tol)?;
        let (fhi, _) = phase_index(problem, omega, hi, tol)?;
        if flo <= k && k <= fhi {
            return solve_phase(problem, omega, k, (lo, flo), (hi, fhi), tol);
        }
        w *= 10.0;
    }
    Err(Error::AmbiguousEigenvalue(e))
}

/// Coupling at `site` (others as in `omega`) for which `E` is an eigenvalue,
/// by secant iteration on the matching determinant; `None` if `D` does not
/// depend on that coupling at `E`.
pub fn coupling_for_eigenvalue(
    problem: &Problem,
    omega: &CouplingVector,
    site: usize,
    e: f64,
    tol: &Tolerances,
) -> Result<Option<f64>> {
    problem.check_coupling(omega)?;
    if site >= problem.interactions.len() {
        return Err(Error::domain(format!("no interaction site {site}")));
    }
    let d = |alpha: f64| -> Result<MatchingValue> {
        let mut w = omega.clone();
        w.values[site] = alpha;
        matching_determinant(problem, &w, e, tol)
    };
    let (mut a0, mut a1) = (omega.values[site], omega.values[site] + 1.0);
    let (mut d0, mut d1) = (d(a0)?.value(), d(a1)?.value());
    for _ in 0..50 {
        if d1 == d0 {
            return Ok(None);
        }
        let a2 = a1 - d1 * (a1 - a0) / (d1 - d0);
        let m = d(a2)?;
        if m.is_root(tol) {
            return Ok(Some(a2));
        }
        (a0, d0, a1, d1) = (a1, d1, a2, m.value());
    }
    Err(Error::AmbiguousEigenvalue(e))
}
