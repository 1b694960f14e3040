//! Diagonal Green functions, the Krein maps between couplings at one site,
//! and the λ-derivative identity for `u/u'` along a left shoot.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{CouplingVector, InteractionKind, Problem};
use crate::propagate::{product_integral, shoot_with, wronskian_scaled, ShootDirection, ShootOptions};
use crate::tolerances::Tolerances;

/// Which product enters the numerator of the Green value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GreenKind {
    /// `u_a(x) u_b(x) / W`, the natural quantity at a δ site.
    Value,
    /// `u_a'(x) u_b'(x) / W`, the natural quantity at a δ′ site.
    Derivative,
}

impl From<InteractionKind> for GreenKind {
    fn from(kind: InteractionKind) -> Self {
        match kind {
            InteractionKind::Delta => GreenKind::Value,
            InteractionKind::DeltaPrime => GreenKind::Derivative,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GreenValue {
    pub z: Complex64,
    pub x: f64,
    pub kind: GreenKind,
    /// `None` when the pole flag is set.
    pub value: Option<Complex64>,
    pub pole: bool,
    /// Sum of the log-scales of both shoots at `x`; cancels in `value`.
    pub scale_log: f64,
}

/// Green value at `x`, with the kind taken from the site at `x` (δ when `x` is not a site).
pub fn green_diag(
    problem: &Problem,
    omega: &CouplingVector,
    z: Complex64,
    x: f64,
    tol: &Tolerances,
) -> Result<GreenValue> {
    let kind = problem
        .interactions
        .site_at(x, problem.site_tolerance())
        .map(|i| GreenKind::from(problem.interactions.sites()[i].kind))
        .unwrap_or(GreenKind::Value);
    green_diag_kind(problem, omega, z, x, kind, tol)
}

pub fn green_diag_kind(
    problem: &Problem,
    omega: &CouplingVector,
    z: Complex64,
    x: f64,
    kind: GreenKind,
    tol: &Tolerances,
) -> Result<GreenValue> {
    let iv = problem.interval;
    if !(x > iv.a && x < iv.b) {
        return Err(Error::domain(format!("green_diag needs x in ({}, {}), got {x}", iv.a, iv.b)));
    }
    let opts = ShootOptions::new(tol).with_stops([x]);
    let left = shoot_with(problem, omega, z, ShootDirection::FromLeft, &opts)?;
    let right = shoot_with(problem, omega, z, ShootDirection::FromRight, &opts)?;
    let (w, sa, sb) = wronskian_scaled(&left, &right, x)?;
    let num = match kind {
        GreenKind::Value => sa.u * sb.u,
        GreenKind::Derivative => sa.du * sb.du,
    };
    let pole = w.norm() < tol.pole * sa.mantissa_norm() * sb.mantissa_norm();
    Ok(GreenValue {
        z,
        x,
        kind,
        value: if pole { None } else { Some(num / w) },
        pole,
        scale_log: sa.log_scale + sb.log_scale,
    })
}

/// Green values over a grid of spectral parameters, in grid order.
pub fn green_sweep(
    problem: &Problem,
    omega: &CouplingVector,
    zs: &[Complex64],
    x: f64,
    tol: &Tolerances,
) -> Result<Vec<GreenValue>> {
    zs.par_iter().map(|&z| green_diag(problem, omega, z, x, tol)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "type", content = "value", rename_all = "kebab-case")]
pub enum KreinValue {
    Finite(Complex64),
    Pole,
}

impl KreinValue {
    pub fn finite(self) -> Option<Complex64> {
        match self {
            KreinValue::Finite(g) => Some(g),
            KreinValue::Pole => None,
        }
    }
}

/// Green value at a site after adding coupling `alpha`:
/// `g0 / (1 - α g0)` for δ, `g0 / (1 + α g0)` for δ′.
pub fn krein_transform(g0: Complex64, alpha: f64, kind: InteractionKind) -> KreinValue {
    let shift = match kind {
        InteractionKind::Delta => -alpha * g0,
        InteractionKind::DeltaPrime => alpha * g0,
    };
    let den = Complex64::new(1.0, 0.0) + shift;
    if den.norm() <= 8.0 * f64::EPSILON * (1.0 + shift.norm()) {
        KreinValue::Pole
    } else {
        KreinValue::Finite(g0 / den)
    }
}

fn single_coupling(problem: &Problem, site: usize, value: f64) -> CouplingVector {
    let mut w = CouplingVector::zeros(problem.interactions.len());
    w.values[site] = value;
    w
}

/// `|G_β - G_α / (1 + (α - β) G_α)|` at site `site` (sign of the correction
/// flipped for δ′), with `G_α`, `G_β` from independent shoots and every other
/// coupling set to zero.
pub fn krein_relation_residual(
    problem: &Problem,
    site: usize,
    z: Complex64,
    alpha: f64,
    beta: f64,
    tol: &Tolerances,
) -> Result<f64> {
    let s =
        *problem.interactions.sites().get(site).ok_or_else(|| Error::domain(format!("no interaction site {site}")))?;
    let untestable = || Error::Untestable(format!("{z}"));
    let ga = green_diag(problem, &single_coupling(problem, site, alpha), z, s.x, tol)?.value.ok_or_else(untestable)?;
    let gb = green_diag(problem, &single_coupling(problem, site, beta), z, s.x, tol)?.value.ok_or_else(untestable)?;
    let predicted = krein_transform(ga, beta - alpha, s.kind).finite().ok_or_else(untestable)?;
    Ok((gb - predicted).norm())
}

/// Behaviour of `|G(E + iε)|` as `ε → 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Approach {
    Pole,
    Zero,
    Regular,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ApproachReport {
    pub e: f64,
    pub x: f64,
    pub epsilons: Vec<f64>,
    pub magnitudes: Vec<f64>,
    /// Fitted exponent `p` in `|G| ~ ε^p`.
    pub slope: f64,
    pub behavior: Approach,
}

/// Classifies the Green value at `x` along `z = E + iε`, `ε = 10^-2 … 10^-5`:
/// slope near -1 is a pole, near +1 a zero.
pub fn approach_behavior(
    problem: &Problem,
    omega: &CouplingVector,
    x: f64,
    e: f64,
    tol: &Tolerances,
) -> Result<ApproachReport> {
    let epsilons: Vec<f64> = (2..=5).map(|k| 10f64.powi(-k)).collect();
    let mut magnitudes = Vec::with_capacity(epsilons.len());
    for &eps in &epsilons {
        let g = green_diag(problem, omega, Complex64::new(e, eps), x, tol)?;
        magnitudes.push(g.value.map_or(f64::INFINITY, |v| v.norm()));
    }
    let (m0, m1) = (magnitudes[0], magnitudes[magnitudes.len() - 1]);
    let slope = if m1.is_infinite() {
        f64::NEG_INFINITY
    } else if m1 == 0.0 {
        f64::INFINITY
    } else {
        (m1.ln() - m0.ln()) / (epsilons[epsilons.len() - 1].ln() - epsilons[0].ln())
    };
    let behavior = if slope < -0.5 {
        Approach::Pole
    } else if slope > 0.5 {
        Approach::Zero
    } else {
        Approach::Regular
    };
    Ok(ApproachReport { e, x, epsilons, magnitudes, slope, behavior })
}

/// Selects which of the two λ-derivative identities to check.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AtkinForm {
    /// `d/dλ (u/u') = (1/u'²) ∫_a^x u²`
    #[default]
    UOverDu,
    /// `d/dλ (u'/u) = -(1/u²) ∫_a^x u²`
    DuOverU,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AtkinCheck {
    pub lambda: f64,
    pub x: f64,
    pub h: f64,
    pub form: AtkinForm,
    /// Central difference in λ (truncation error O(h²)).
    pub finite_difference: f64,
    pub quadrature: f64,
    pub residual: f64,
}

pub fn default_atkin_step(lambda: f64) -> f64 {
    1e-4 * lambda.abs().max(1.0)
}

/// Central-difference check of the λ-derivative of `u/u'` (or `u'/u`) for
/// the left solution, against the quadrature side of the identity.
pub fn atkin_check(
    problem: &Problem,
    omega: &CouplingVector,
    lambda: f64,
    x: f64,
    h: f64,
    form: AtkinForm,
    tol: &Tolerances,
) -> Result<AtkinCheck> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::domain("finite-difference step must be positive"));
    }
    if let Some(i) = problem.interactions.site_at(x, problem.site_tolerance()) {
        return Err(Error::domain(format!("x = {x} coincides with interaction site {i}")));
    }
    let opts = ShootOptions::new(tol).with_stops([x]);
    let re = |v: f64| Complex64::new(v, 0.0);
    let reference = shoot_with(problem, omega, re(lambda), ShootDirection::FromLeft, &opts)?;
    let s = reference.state_at(x)?;
    let denom = match form {
        AtkinForm::UOverDu => s.du.re,
        AtkinForm::DuOverU => s.u.re,
    };
    if denom.abs() < 1e-8 * s.mantissa_norm() {
        return Err(Error::IdentityInapplicable(x));
    }

    // reuse the reference abscissae so the shifted shoots are smooth functions of λ
    let mesh_opts = ShootOptions { mesh: Some(reference.samples.iter().map(|p| p.x).collect()), ..opts };
    let ratio = |lam: f64| -> Result<f64> {
        let t = shoot_with(problem, omega, re(lam), ShootDirection::FromLeft, &mesh_opts)?;
        let st = t.state_at(x)?;
        Ok(match form {
            AtkinForm::UOverDu => st.u.re / st.du.re,
            AtkinForm::DuOverU => st.du.re / st.u.re,
        })
    };
    let finite_difference = (ratio(lambda + h)? - ratio(lambda - h)?) / (2.0 * h);

    let mass = product_integral(&reference, &reference, problem.interval.a, x)?.re;
    let scale = (2.0 * s.log_scale).exp();
    let quadrature = match form {
        AtkinForm::UOverDu => mass / (s.du.re * s.du.re * scale),
        AtkinForm::DuOverU => -mass / (s.u.re * s.u.re * scale),
    };
    Ok(AtkinCheck {
        lambda,
        x,
        h,
        form,
        finite_difference,
        quadrature,
        residual: (finite_difference - quadrature).abs(),
    })
}

pub fn atkin_residual(
    problem: &Problem,
    omega: &CouplingVector,
    lambda: f64,
    x: f64,
    h: f64,
    form: AtkinForm,
    tol: &Tolerances,
) -> Result<f64> {
    atkin_check(problem, omega, lambda, x, h, form, tol).map(|c| c.residual)
}
