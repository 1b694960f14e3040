//! Sufficient conditions, from oscillation theory, under which the energy `E`
//! cannot be an eigenvalue for all coupling vectors at once.
//!
//! Every certificate here is positive-only: `Inconclusive` says nothing about
//! oscillation. Only δ sites enter the Lyapunov and zero-count certificates,
//! since those bound zeros of `u`; the δ′ node condition concerns `u'`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{AnalyticTail, InteractionKind, PotentialSpec, Problem};
use crate::spectra::{classify_ae, DichotomyVerdict, VerdictTag};
use crate::tolerances::Tolerances;

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "tag", rename_all = "kebab-case")]
pub enum Certificate {
    /// Two δ sites closer than the Lyapunov window: no solution vanishes at both.
    LyapunovDisconjugate {
        window: f64,
        k: f64,
        sites: (usize, usize),
        gap: f64,
    },
    /// More δ sites than any solution can have zeros on the interval.
    ZeroCountBound {
        bound: f64,
        site_count: usize,
        k: f64,
        length: f64,
    },
    /// `x ∫_x^∞ (E - V)` stays below 1/4 on the truncated grid and in the tail.
    Nonoscillatory {
        method: String,
        sup: f64,
        a: f64,
        x_max: f64,
        tail_grid: usize,
        tail: AnalyticTail,
    },
    Inconclusive {
        reason: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OscillationCertificate {
    pub e: f64,
    #[serde(flatten)]
    pub certificate: Certificate,
}

impl OscillationCertificate {
    fn inconclusive(e: f64, reason: impl Into<String>) -> Self {
        OscillationCertificate { e, certificate: Certificate::Inconclusive { reason: reason.into() } }
    }

    /// True for the certificates that exclude the all-couplings branch.
    pub fn excludes_all_omega(&self) -> bool {
        matches!(self.certificate, Certificate::LyapunovDisconjugate { .. } | Certificate::ZeroCountBound { .. })
    }

    pub fn is_inconclusive(&self) -> bool {
        matches!(self.certificate, Certificate::Inconclusive { .. })
    }
}

/// Shortest interval on which a solution of `-u'' + Vu = Eu`, `|V| ≤ K`, can
/// vanish twice: `2/√(K + |E|)`.
pub fn lyapunov_window(k: f64, e: f64) -> Result<f64> {
    if !(k >= 0.0) || !e.is_finite() {
        return Err(Error::domain(format!("potential bound must be non-negative, got {k}")));
    }
    let s = k + e.abs();
    Ok(if s == 0.0 { f64::INFINITY } else { 2.0 / s.sqrt() })
}

fn delta_sites(problem: &Problem) -> Vec<(usize, f64)> {
    problem
        .interactions
        .sites()
        .iter()
        .enumerate()
        .filter(|(_, s)| s.kind == InteractionKind::Delta)
        .map(|(i, s)| (i, s.x))
        .collect()
}

pub fn lyapunov_certificate(problem: &Problem, e: f64) -> Result<OscillationCertificate> {
    let k = problem.potential.bound_on(&problem.interval)?;
    let window = lyapunov_window(k, e)?;
    let sites = delta_sites(problem);
    if sites.len() < 2 {
        return Ok(OscillationCertificate::inconclusive(e, "needs two δ sites"));
    }
    let closest = sites
        .windows(2)
        .map(|w| (w[0].0, w[1].0, w[1].1 - w[0].1))
        .min_by(|p, q| p.2.total_cmp(&q.2))
        .expect("at least one pair");
    if closest.2 <= window {
        Ok(OscillationCertificate {
            e,
            certificate: Certificate::LyapunovDisconjugate { window, k, sites: (closest.0, closest.1), gap: closest.2 },
        })
    } else {
        Ok(OscillationCertificate::inconclusive(
            e,
            format!("closest δ sites are {} apart, window is {window}", closest.2),
        ))
    }
}

/// `T √(|E| + K) / 2 + 1`: any solution has fewer zeros than this on an
/// interval of length `T`, as soon as it has at least two.
pub fn zero_count_bound(t: f64, k: f64, e: f64) -> Result<f64> {
    if !(t >= 0.0) || !(k >= 0.0) || !e.is_finite() {
        return Err(Error::domain(format!("zero_count_bound needs T ≥ 0 and K ≥ 0, got T = {t}, K = {k}")));
    }
    Ok(t * (e.abs() + k).sqrt() / 2.0 + 1.0)
}

/// Fires when the δ sites outnumber the possible zeros. At least two sites are
/// required: the bound is only strict for solutions with two or more zeros
/// (`u = x - p` solves `u'' = 0` and vanishes at one site).
pub fn measure_zero_by_interaction_count(problem: &Problem, e: f64) -> Result<OscillationCertificate> {
    let k = problem.potential.bound_on(&problem.interval)?;
    let length = problem.interval.length();
    let bound = zero_count_bound(length, k, e)?;
    let site_count = delta_sites(problem).len();
    if site_count >= 2 && site_count as f64 >= bound {
        Ok(OscillationCertificate { e, certificate: Certificate::ZeroCountBound { bound, site_count, k, length } })
    } else if site_count < 2 {
        Ok(OscillationCertificate::inconclusive(e, format!("{site_count} δ site(s); at least two are needed")))
    } else {
        Ok(OscillationCertificate::inconclusive(e, format!("{site_count} δ sites < bound {bound}")))
    }
}

/// Hille's test for `-u'' + Vu = Eu` on `[a, ∞)`, with `V` as given up to
/// `x_max` and its declared analytic tail beyond.
pub fn hille_nonoscillatory(
    potential: &PotentialSpec,
    e: f64,
    a: f64,
    x_max: f64,
    tail_grid: usize,
) -> Result<OscillationCertificate> {
    if !(a < x_max) || tail_grid < 2 {
        return Err(Error::domain(format!(
            "Hille grid needs a < x_max and at least 2 points (a = {a}, x_max = {x_max})"
        )));
    }
    let tail = potential.analytic_tail().ok_or_else(|| Error::domain("potential declares no analytic tail"))?;
    let slack = 1e-12 * e.abs().max(1.0);
    if (tail.limit() - e).abs() > slack {
        return Err(Error::Hypothesis(format!(
            "∫(E - V) over the tail diverges: V tends to {} but E = {e}",
            tail.limit()
        )));
    }
    let (_, sup_v) = potential.range_on(a, x_max)?;
    if sup_v > e + slack {
        return Err(Error::Hypothesis(format!("V reaches {sup_v} > E = {e} on [{a}, {x_max}]")));
    }
    if let AnalyticTail::InverseSquare { c, .. } = tail {
        if c < 0.0 {
            return Err(Error::Hypothesis(format!("tail V = E - c/x² exceeds E for c = {c}")));
        }
    }

    let remainder = tail.remainder(e, x_max);
    let geometric = a > 0.0;
    let mut sup = f64::NEG_INFINITY;
    for i in 0..tail_grid {
        let s = i as f64 / (tail_grid - 1) as f64;
        let x = if geometric { a * (x_max / a).powf(s) } else { a + (x_max - a) * s };
        let x = x.min(x_max);
        let inner = e * (x_max - x) - potential.integral(x, x_max)?;
        sup = sup.max(x * (inner + remainder));
    }
    // beyond x_max, x ∫_x^∞ (E - V) is constant for both tail forms
    sup = sup.max(x_max * remainder);

    if sup < 0.25 {
        Ok(OscillationCertificate {
            e,
            certificate: Certificate::Nonoscillatory { method: "hille".into(), sup, a, x_max, tail_grid, tail },
        })
    } else {
        Ok(OscillationCertificate::inconclusive(e, format!("sup of x∫(E - V) is {sup} ≥ 1/4")))
    }
}

/// The Lyapunov and zero-count certificates for `problem` at `E`.
pub fn certify(problem: &Problem, e: f64) -> Result<Vec<OscillationCertificate>> {
    Ok(vec![lyapunov_certificate(problem, e)?, measure_zero_by_interaction_count(problem, e)?])
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "outcome", rename_all = "kebab-case")]
pub enum Consistency {
    /// The classifier agrees that not every coupling makes `E` an eigenvalue.
    Agreement {
        verdict: DichotomyVerdict,
    },
    Counterexample {
        verdict: DichotomyVerdict,
    },
    /// The certificate makes no claim about the dichotomy.
    Vacuous {
        reason: String,
    },
    Failed {
        error: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConsistencyReport {
    pub certificate: OscillationCertificate,
    #[serde(flatten)]
    pub consistency: Consistency,
}

impl ConsistencyReport {
    pub fn is_consistent(&self) -> bool {
        !matches!(self.consistency, Consistency::Counterexample { .. } | Consistency::Failed { .. })
    }
}

/// Checks the certificate's promise against the spectral classifier.
pub fn cross_check_certificate(
    problem: &Problem,
    certificate: &OscillationCertificate,
    tol: &Tolerances,
) -> ConsistencyReport {
    let consistency = if !certificate.excludes_all_omega() {
        Consistency::Vacuous { reason: "certificate does not address the dichotomy".into() }
    } else {
        match classify_ae(problem, certificate.e, tol.node, tol) {
            Ok(v) if v.tag == VerdictTag::AllOmega => Consistency::Counterexample { verdict: v },
            Ok(v) => Consistency::Agreement { verdict: v },
            Err(err) => Consistency::Failed { error: err.to_string() },
        }
    };
    ConsistencyReport { certificate: certificate.clone(), consistency }
}

#[cfg(test)]
mod tests {
    use std::f64::consts::{FRAC_PI_2, PI};

    use super::*;
    use crate::model::{BuiltinPotential, InteractionSet, Site};

    fn boxed(xs: &[f64]) -> Problem {
        Problem::dirichlet_box(InteractionSet::new(
            xs.iter().map(|&x| Site { x, kind: InteractionKind::Delta }).collect(),
        ))
    }

    #[test]
    fn window_examples() {
        assert_eq!(lyapunov_window(0.0, 4.0).unwrap(), 1.0);
        assert_eq!(lyapunov_window(0.0, 0.0).unwrap(), f64::INFINITY);
        assert_eq!(lyapunov_window(3.0, -1.0).unwrap(), 1.0);
        assert!(lyapunov_window(-1.0, 0.0).is_err());
        let mut prev = f64::INFINITY;
        for i in 0..50 {
            let w = lyapunov_window(0.3 * i as f64, -(i as f64)).unwrap();
            assert!(w <= prev);
            prev = w;
        }
    }

    #[test]
    fn lyapunov_examples() {
        let c = lyapunov_certificate(&boxed(&[1.0, 1.5]), 4.0).unwrap();
        assert!(matches!(c.certificate, Certificate::LyapunovDisconjugate { gap, .. } if gap == 0.5));
        assert!(lyapunov_certificate(&boxed(&[0.5, 2.5]), 4.0).unwrap().is_inconclusive());
        assert!(lyapunov_certificate(&boxed(&[1.0]), 4.0).unwrap().is_inconclusive());
        let primes = Problem::dirichlet_box(InteractionSet::new(vec![
            Site { x: 1.0, kind: InteractionKind::DeltaPrime },
            Site { x: 1.5, kind: InteractionKind::DeltaPrime },
        ]));
        assert!(lyapunov_certificate(&primes, 4.0).unwrap().is_inconclusive());
    }

    #[test]
    fn bound_examples() {
        assert_eq!(zero_count_bound(0.0, 0.0, 7.0).unwrap(), 1.0);
        assert!((zero_count_bound(PI, 0.0, 4.0).unwrap() - (PI + 1.0)).abs() < 1e-15);
        assert!((zero_count_bound(PI, 0.0, 100.0).unwrap() - (5.0 * PI + 1.0)).abs() < 1e-13);
        assert!(zero_count_bound(-1.0, 0.0, 0.0).is_err());
        assert!(zero_count_bound(1.0, -1.0, 0.0).is_err());
    }

    #[test]
    fn interaction_count_examples() {
        let five = boxed(&[0.5, 1.0, 1.5, 2.0, 2.5]);
        assert!(measure_zero_by_interaction_count(&five, 4.0).unwrap().excludes_all_omega());
        let four = boxed(&[0.5, 1.0, 1.5, 2.0]);
        assert!(measure_zero_by_interaction_count(&four, 4.0).unwrap().is_inconclusive());
        // a lone site can be a zero of u = x - p even though the bound is 1
        assert!(measure_zero_by_interaction_count(&boxed(&[1.0]), 0.0).unwrap().is_inconclusive());
        let two = Problem::new(
            crate::model::Interval::new(0.0, 1.0),
            PotentialSpec::constant(0.0),
            InteractionSet::new(vec![
                Site { x: 0.3, kind: InteractionKind::Delta },
                Site { x: 0.6, kind: InteractionKind::Delta },
            ]),
            crate::model::BoundaryCondition::dirichlet(),
        );
        assert!(measure_zero_by_interaction_count(&two, 0.0).unwrap().excludes_all_omega());
    }

    fn inverse_square(e: f64, c: f64) -> PotentialSpec {
        PotentialSpec::Builtin { name: BuiltinPotential::InverseSquareTail, params: vec![e, c] }
    }

    #[test]
    fn hille_examples() {
        let flat = hille_nonoscillatory(&PotentialSpec::constant(2.0), 2.0, 1.0, 50.0, 100).unwrap();
        assert!(matches!(flat.certificate, Certificate::Nonoscillatory { sup, .. } if sup.abs() < 1e-12));
        for x_max in [50.0, 100.0, 200.0] {
            let c2 = hille_nonoscillatory(&inverse_square(1.0, 0.2), 1.0, 1.0, x_max, 200).unwrap();
            match c2.certificate {
                Certificate::Nonoscillatory { sup, .. } => assert!((sup - 0.2).abs() < 1e-10),
                other => panic!("{other:?}"),
            }
            assert!(hille_nonoscillatory(&inverse_square(1.0, 0.5), 1.0, 1.0, x_max, 200).unwrap().is_inconclusive());
        }
    }

    #[test]
    fn hille_hypotheses() {
        assert!(matches!(
            hille_nonoscillatory(&PotentialSpec::constant(2.0), 1.0, 1.0, 10.0, 10),
            Err(Error::Hypothesis(_))
        ));
        assert!(matches!(
            hille_nonoscillatory(&PotentialSpec::constant(2.0), 3.0, 1.0, 10.0, 10),
            Err(Error::Hypothesis(_))
        ));
        let bump = PotentialSpec::PiecewiseConstant { breakpoints: vec![3.0], values: vec![5.0, 2.0] };
        assert!(matches!(hille_nonoscillatory(&bump, 2.0, 1.0, 10.0, 10), Err(Error::Hypothesis(_))));
        assert!(hille_nonoscillatory(&inverse_square(1.0, -0.1), 1.0, 1.0, 10.0, 10).is_err());
        let harmonic = PotentialSpec::Builtin { name: BuiltinPotential::Harmonic, params: vec![1.0] };
        assert!(hille_nonoscillatory(&harmonic, 0.0, 1.0, 10.0, 10).is_err());
    }

    #[test]
    fn cross_check_examples() {
        let tol = Tolerances::default();
        let p = boxed(&[1.0, 1.5]);
        let c = lyapunov_certificate(&p, 4.0).unwrap();
        assert!(matches!(cross_check_certificate(&p, &c, &tol).consistency, Consistency::Agreement { .. }));
        let p = boxed(&[0.5, 1.0, 1.5, 2.0, 2.5]);
        let c = measure_zero_by_interaction_count(&p, 4.0).unwrap();
        assert!(cross_check_certificate(&p, &c, &tol).is_consistent());
        let p = boxed(&[FRAC_PI_2]);
        for c in certify(&p, 4.0).unwrap() {
            assert!(c.is_inconclusive());
            assert!(matches!(cross_check_certificate(&p, &c, &tol).consistency, Consistency::Vacuous { .. }));
        }
    }
}
