//! Problem description: interval, potential, interaction sites, boundary
//! angles, coupling vectors and random coupling ensembles.

mod potential;

use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub(crate) use potential::Piece;
pub use potential::{AnalyticTail, BuiltinPotential, Interpolation, PotentialSpec};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Interval {
    pub a: f64,
    pub b: f64,
}

impl Interval {
    pub fn new(a: f64, b: f64) -> Self {
        Interval { a, b }
    }

    pub fn length(&self) -> f64 {
        self.b - self.a
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.a && x <= self.b
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InteractionKind {
    /// u continuous, u' jumps by ω·u.
    Delta,
    /// u' continuous, u jumps by ω·u'.
    DeltaPrime,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Site {
    pub x: f64,
    pub kind: InteractionKind,
}

/// Interaction sites sorted by position; the position in the list is the site index.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct InteractionSet {
    sites: Vec<Site>,
}

impl<'de> Deserialize<'de> for InteractionSet {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(deny_unknown_fields)]
        struct Raw {
            #[serde(default)]
            sites: Vec<Site>,
        }
        Ok(InteractionSet::new(Raw::deserialize(d)?.sites))
    }
}

impl InteractionSet {
    pub fn new(mut sites: Vec<Site>) -> Self {
        sites.sort_by(|l, r| l.x.total_cmp(&r.x));
        InteractionSet { sites }
    }

    pub fn empty() -> Self {
        InteractionSet::default()
    }

    pub fn single(x: f64, kind: InteractionKind) -> Self {
        InteractionSet { sites: vec![Site { x, kind }] }
    }

    pub fn sites(&self) -> &[Site] {
        &self.sites
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    /// Index of the site located at `x` within `tol`.
    pub fn site_at(&self, x: f64, tol: f64) -> Option<usize> {
        self.sites.iter().position(|s| (s.x - x).abs() <= tol)
    }
}

/// Boundary angles: `u(a)cos θ + u'(a)sin θ = 0`, `u(b)cos γ + u'(b)sin γ = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundaryCondition {
    pub theta: f64,
    pub gamma: f64,
}

impl BoundaryCondition {
    pub fn dirichlet() -> Self {
        BoundaryCondition { theta: 0.0, gamma: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Problem {
    pub interval: Interval,
    pub potential: PotentialSpec,
    #[serde(default)]
    pub interactions: InteractionSet,
    pub bc: BoundaryCondition,
}

impl Problem {
    pub fn new(
        interval: Interval,
        potential: PotentialSpec,
        interactions: InteractionSet,
        bc: BoundaryCondition,
    ) -> Self {
        Problem { interval, potential, interactions, bc }
    }

    /// `[0, π]`, `V = 0`, Dirichlet at both ends.
    pub fn dirichlet_box(interactions: InteractionSet) -> Self {
        Problem::new(Interval::new(0.0, PI), PotentialSpec::constant(0.0), interactions, BoundaryCondition::dirichlet())
    }

    pub fn with_interactions(&self, interactions: InteractionSet) -> Self {
        Problem { interactions, ..self.clone() }
    }

    /// Tolerance used to decide whether a point coincides with a site.
    pub fn site_tolerance(&self) -> f64 {
        1e-12 * self.interval.a.abs().max(self.interval.b.abs()).max(1.0)
    }

    pub fn validated(&self) -> Result<&Self> {
        let report = validate(self);
        if report.ok {
            Ok(self)
        } else {
            Err(Error::Invalid(report))
        }
    }

    /// Like [`Problem::validated`], additionally checking `omega` against the site set.
    pub fn check_coupling(&self, omega: &CouplingVector) -> Result<()> {
        self.validated()?;
        if omega.values.len() != self.interactions.len() {
            return Err(Error::domain(format!(
                "coupling vector has {} entries for {} sites",
                omega.values.len(),
                self.interactions.len()
            )));
        }
        if let Some(i) = omega.values.iter().position(|w| !w.is_finite()) {
            return Err(Error::domain(format!("coupling for site {i} is not finite")));
        }
        Ok(())
    }
}

/// Coupling strength ω(n) per site, indexed like [`InteractionSet::sites`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CouplingVector {
    pub values: Vec<f64>,
}

impl CouplingVector {
    pub fn new(values: Vec<f64>) -> Self {
        CouplingVector { values }
    }

    pub fn zeros(n: usize) -> Self {
        CouplingVector { values: vec![0.0; n] }
    }

    pub fn uniform(n: usize, value: f64) -> Self {
        CouplingVector { values: vec![value; n] }
    }
}

/// Atomless single-site coupling distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "dist", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Distribution {
    Uniform { lo: f64, hi: f64 },
    Normal { mu: f64, sigma: f64 },
    Exponential { rate: f64 },
}

impl Distribution {
    fn violation(&self) -> Option<String> {
        match *self {
            Distribution::Uniform { lo, hi } if !(lo.is_finite() && hi.is_finite() && lo < hi) => {
                Some(format!("uniform needs finite lo < hi, got [{lo}, {hi}]"))
            }
            Distribution::Normal { mu, sigma } if !(mu.is_finite() && sigma.is_finite() && sigma > 0.0) => {
                Some(format!("normal needs finite mu and sigma > 0, got sigma = {sigma}"))
            }
            Distribution::Exponential { rate } if !(rate.is_finite() && rate > 0.0) => {
                Some(format!("exponential needs rate > 0, got {rate}"))
            }
            _ => None,
        }
    }
}

/// Product ensemble of independent per-site distributions with a master seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleSpec {
    pub per_site: Vec<Distribution>,
    pub master_seed: u64,
}

impl EnsembleSpec {
    pub fn iid(n_sites: usize, dist: Distribution, master_seed: u64) -> Self {
        EnsembleSpec { per_site: vec![dist; n_sites], master_seed }
    }

    pub fn check(&self, n_sites: usize) -> Result<()> {
        if self.per_site.len() != n_sites {
            return Err(Error::domain(format!(
                "ensemble declares {} distributions for {} sites",
                self.per_site.len(),
                n_sites
            )));
        }
        for (i, d) in self.per_site.iter().enumerate() {
            if let Some(msg) = d.violation() {
                return Err(Error::domain(format!("site {i}: {msg}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub field: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub site: Option<usize>,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub ok: bool,
    pub violations: Vec<Violation>,
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.ok {
            return write!(f, "ok");
        }
        let parts: Vec<String> = self
            .violations
            .iter()
            .map(|v| match v.site {
                Some(i) => format!("{}[{}]: {}", v.field, i, v.message),
                None => format!("{}: {}", v.field, v.message),
            })
            .collect();
        write!(f, "{}", parts.join("; "))
    }
}

/// Checks every structural invariant of `problem`; never fails, the report carries the findings.
pub fn validate(problem: &Problem) -> ValidationReport {
    let mut violations = Vec::new();
    let mut push = |field: &str, site: Option<usize>, message: String| {
        violations.push(Violation { field: field.to_string(), site, message })
    };

    let Interval { a, b } = problem.interval;
    let interval_ok = a.is_finite() && b.is_finite() && a < b;
    if !(a.is_finite() && b.is_finite()) {
        push("interval", None, "endpoints must be finite".into());
    } else if a >= b {
        push("interval", None, "a<b fails".into());
    }

    if interval_ok {
        for msg in problem.potential.violations(&problem.interval) {
            push("potential", None, msg);
        }
    }

    let sites = problem.interactions.sites();
    for (i, s) in sites.iter().enumerate() {
        if !s.x.is_finite() {
            push("interactions", Some(i), "site position is not finite".into());
        } else if interval_ok && !(s.x > a && s.x < b) {
            push("interactions", Some(i), "site not interior".into());
        }
        if i > 0 && sites[i - 1].x >= s.x {
            push("interactions", Some(i), "duplicate site".into());
        }
    }

    let BoundaryCondition { theta, gamma } = problem.bc;
    for (name, angle) in [("bc.theta", theta), ("bc.gamma", gamma)] {
        if !(angle.is_finite() && (0.0..PI).contains(&angle)) {
            push(name, None, format!("angle {angle} outside [0, π)"));
        }
    }

    ValidationReport { ok: violations.is_empty(), violations }
}

/// `K = sup |V|` on the interval.
pub fn potential_bound(potential: &PotentialSpec, interval: &Interval) -> Result<f64> {
    potential.bound_on(interval)
}
