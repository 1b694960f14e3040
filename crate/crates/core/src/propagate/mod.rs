//! Shooting engine: integrates `-u'' + V u = z u` between interaction sites
//! and applies the exact δ / δ′ interface maps at each site.
//!
//! Traces store solution values as mantissas with an accumulated log-scale,
//! so `u(x) = sample.u * exp(sample.log_scale)`. At an interaction site the
//! stored sample holds the left limit and the jump record holds both limits.

mod quad;
pub(crate) mod rk;

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{CouplingVector, InteractionKind, Problem};
use crate::tolerances::Tolerances;
use quad::{gauss_legendre, Jet, QuinticCell};
use rk::{integrate_adaptive, integrate_on_mesh, Node, State, StepControl};

/// Phase margin inside which a zero is attributed to an endpoint or a site.
const PHASE_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ShootDirection {
    /// Start at `a` from `(u, u') = (-sin θ, cos θ)`.
    FromLeft,
    /// Start at `b` from `(u, u') = (-sin γ, cos γ)`.
    FromRight,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Sample {
    pub x: f64,
    pub u: Complex64,
    pub du: Complex64,
    pub log_scale: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct JumpRecord {
    pub site_index: usize,
    pub x: f64,
    pub kind: InteractionKind,
    pub coupling: f64,
    pub u_minus: Complex64,
    pub du_minus: Complex64,
    pub u_plus: Complex64,
    pub du_plus: Complex64,
    pub log_scale: f64,
}

/// `(u, u')` at a point in mantissa/log-scale form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaledState {
    pub u: Complex64,
    pub du: Complex64,
    pub log_scale: f64,
}

impl ScaledState {
    pub fn u(&self) -> Complex64 {
        self.u * self.log_scale.exp()
    }

    pub fn du(&self) -> Complex64 {
        self.du * self.log_scale.exp()
    }

    /// Euclidean norm of the mantissa pair.
    pub fn mantissa_norm(&self) -> f64 {
        (self.u.norm_sqr() + self.du.norm_sqr()).sqrt()
    }

    fn from_sample(s: &Sample) -> Self {
        ScaledState { u: s.u, du: s.du, log_scale: s.log_scale }
    }
}

struct TraceContext {
    problem: Problem,
    couplings: Vec<f64>,
    ctl: StepControl,
}

#[derive(Clone, Serialize)]
pub struct SolutionTrace {
    pub z: Complex64,
    pub direction: ShootDirection,
    pub samples: Vec<Sample>,
    pub jumps: Vec<JumpRecord>,
    #[serde(skip)]
    ctx: Arc<TraceContext>,
}

impl std::fmt::Debug for SolutionTrace {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SolutionTrace")
            .field("z", &self.z)
            .field("direction", &self.direction)
            .field("samples", &self.samples.len())
            .field("jumps", &self.jumps)
            .finish()
    }
}

/// Knobs beyond the defaults of [`shoot`].
#[derive(Debug, Clone, Default)]
pub struct ShootOptions {
    pub tolerances: Tolerances,
    /// Extra abscissae that must be sample points.
    pub stops: Vec<f64>,
    /// Integrate through exactly these abscissae (plus knots) instead of adapting the step.
    pub mesh: Option<Vec<f64>>,
    /// Initial `(u, u')` replacing the boundary-angle data.
    pub initial: Option<(Complex64, Complex64)>,
}

impl ShootOptions {
    pub fn new(tolerances: &Tolerances) -> Self {
        ShootOptions { tolerances: *tolerances, ..Default::default() }
    }

    pub fn with_stops(mut self, stops: impl IntoIterator<Item = f64>) -> Self {
        self.stops.extend(stops);
        self
    }
}

/// Boundary data `(-sin φ, cos φ)` satisfying `u cos φ + u' sin φ = 0`.
pub fn boundary_data(angle: f64) -> (Complex64, Complex64) {
    (Complex64::new(-angle.sin(), 0.0), Complex64::new(angle.cos(), 0.0))
}

fn apply_jump(kind: InteractionKind, w: f64, y: &State) -> State {
    match kind {
        InteractionKind::Delta => [y[0], y[1] + y[0] * w],
        InteractionKind::DeltaPrime => [y[0] + y[1] * w, y[1]],
    }
}

fn invert_jump(kind: InteractionKind, w: f64, y: &State) -> State {
    match kind {
        InteractionKind::Delta => [y[0], y[1] - y[0] * w],
        InteractionKind::DeltaPrime => [y[0] - y[1] * w, y[1]],
    }
}

pub fn shoot(
    problem: &Problem,
    omega: &CouplingVector,
    z: Complex64,
    dir: ShootDirection,
    tol: &Tolerances,
) -> Result<SolutionTrace> {
    shoot_with(problem, omega, z, dir, &ShootOptions::new(tol))
}

pub fn shoot_with(
    problem: &Problem,
    omega: &CouplingVector,
    z: Complex64,
    dir: ShootDirection,
    opts: &ShootOptions,
) -> Result<SolutionTrace> {
    problem.check_coupling(omega)?;
    if !(z.re.is_finite() && z.im.is_finite()) {
        return Err(Error::domain("spectral parameter is not finite"));
    }
    let (a, b) = (problem.interval.a, problem.interval.b);
    let sites = problem.interactions.sites();

    let mut knots = vec![a, b];
    knots.extend(sites.iter().map(|s| s.x));
    knots.extend(problem.potential.knots_in(a, b));
    knots.extend(opts.stops.iter().copied().filter(|&x| x > a && x < b));
    knots.sort_by(f64::total_cmp);
    knots.dedup();

    let mesh: Option<Vec<f64>> = opts.mesh.as_ref().map(|m| {
        let mut m: Vec<f64> = m.iter().copied().filter(|&x| x > a && x < b).collect();
        m.extend(knots.iter().copied());
        m.sort_by(f64::total_cmp);
        m.dedup();
        m
    });

    let t = &opts.tolerances;
    let ctl = StepControl { rtol: t.ode_rtol, atol: t.ode_atol, max_step: t.max_step };
    let site_at = |x: f64| sites.iter().position(|s| s.x == x);

    let init = opts.initial.unwrap_or_else(|| match dir {
        ShootDirection::FromLeft => boundary_data(problem.bc.theta),
        ShootDirection::FromRight => boundary_data(problem.bc.gamma),
    });
    let mut y: State = [init.0, init.1];
    let n0 = rk::state_norm(&y);
    if !(n0.is_finite() && n0 > 0.0) {
        return Err(Error::domain("initial data must be finite and nonzero"));
    }
    y[0] /= n0;
    y[1] /= n0;
    let mut log_scale = n0.ln();

    let mut samples: Vec<Sample> = Vec::with_capacity(256);
    let mut jumps: Vec<JumpRecord> = Vec::new();
    let push = |samples: &mut Vec<Sample>, n: Node| {
        samples.push(Sample { x: n.x, u: n.y[0], du: n.y[1], log_scale: n.log_scale })
    };

    let span = b - a;
    let mut h = 0.05 * span.min(1.0);
    let ordered: Vec<f64> = match dir {
        ShootDirection::FromLeft => knots.clone(),
        ShootDirection::FromRight => knots.iter().rev().copied().collect(),
    };
    push(&mut samples, Node { x: ordered[0], y, log_scale });

    for w in ordered.windows(2) {
        let (k0, k1) = (w[0], w[1]);
        if dir == ShootDirection::FromLeft {
            if let Some(j) = site_at(k0) {
                let kind = sites[j].kind;
                let coupling = omega.values[j];
                let plus = apply_jump(kind, coupling, &y);
                jumps.push(JumpRecord {
                    site_index: j,
                    x: k0,
                    kind,
                    coupling,
                    u_minus: y[0],
                    du_minus: y[1],
                    u_plus: plus[0],
                    du_plus: plus[1],
                    log_scale,
                });
                y = plus;
            }
        }
        let piece = problem.potential.piece(k0.min(k1), k0.max(k1));
        match &mesh {
            Some(m) => {
                let (lo, hi) = (k0.min(k1), k0.max(k1));
                let mut nodes: Vec<f64> = m.iter().copied().filter(|&x| x > lo && x < hi).collect();
                if k1 < k0 {
                    nodes.reverse();
                }
                nodes.push(k1);
                integrate_on_mesh(&piece, z, k0, &nodes, &mut y, &mut log_scale, |n| push(&mut samples, n));
            }
            None => {
                integrate_adaptive(&piece, z, k0, k1, &mut y, &mut log_scale, &mut h, &ctl, |n| push(&mut samples, n))?;
            }
        }
        if dir == ShootDirection::FromRight {
            if let Some(j) = site_at(k1) {
                let kind = sites[j].kind;
                let coupling = omega.values[j];
                let minus = invert_jump(kind, coupling, &y);
                jumps.push(JumpRecord {
                    site_index: j,
                    x: k1,
                    kind,
                    coupling,
                    u_minus: minus[0],
                    du_minus: minus[1],
                    u_plus: y[0],
                    du_plus: y[1],
                    log_scale,
                });
                let last = samples.last_mut().expect("segment produced a sample");
                last.u = minus[0];
                last.du = minus[1];
                y = minus;
            }
        }
    }

    if dir == ShootDirection::FromRight {
        samples.reverse();
        jumps.reverse();
    }

    Ok(SolutionTrace {
        z,
        direction: dir,
        samples,
        jumps,
        ctx: Arc::new(TraceContext { problem: problem.clone(), couplings: omega.values.clone(), ctl }),
    })
}

impl SolutionTrace {
    pub fn problem(&self) -> &Problem {
        &self.ctx.problem
    }

    pub fn couplings(&self) -> &[f64] {
        &self.ctx.couplings
    }

    pub fn is_real(&self) -> bool {
        self.z.im == 0.0 && self.samples.iter().all(|s| s.u.im == 0.0 && s.du.im == 0.0)
    }

    fn jump_at(&self, x: f64) -> Option<&JumpRecord> {
        self.jumps.binary_search_by(|j| j.x.total_cmp(&x)).ok().map(|i| &self.jumps[i])
    }

    fn check_inside(&self, x: f64) -> Result<()> {
        if !self.ctx.problem.interval.contains(x) {
            let iv = self.ctx.problem.interval;
            return Err(Error::domain(format!("x = {x} outside [{}, {}]", iv.a, iv.b)));
        }
        Ok(())
    }

    /// State just to the right of sample `i` (the jump's right limit at a site).
    fn start_state(&self, i: usize) -> ScaledState {
        let s = &self.samples[i];
        match self.jump_at(s.x) {
            Some(j) => ScaledState { u: j.u_plus, du: j.du_plus, log_scale: j.log_scale },
            None => ScaledState::from_sample(s),
        }
    }

    fn advance(&self, from: f64, start: ScaledState, to: f64) -> Result<ScaledState> {
        if from == to {
            return Ok(start);
        }
        let piece = self.ctx.problem.potential.piece(from.min(to), from.max(to));
        let mut y = [start.u, start.du];
        let mut log = start.log_scale;
        let mut h = (to - from).abs();
        integrate_adaptive(&piece, self.z, from, to, &mut y, &mut log, &mut h, &self.ctx.ctl, |_| {})?;
        Ok(ScaledState { u: y[0], du: y[1], log_scale: log })
    }

    /// `(u, u')` at `x` using right limits at interaction sites.
    pub fn state_at(&self, x: f64) -> Result<ScaledState> {
        self.check_inside(x)?;
        let i = self.samples.partition_point(|s| s.x <= x).max(1) - 1;
        let s = &self.samples[i];
        if s.x == x && i + 1 == self.samples.len() {
            return Ok(ScaledState::from_sample(s));
        }
        self.advance(s.x, self.start_state(i), x)
    }

    /// `(u, u')` at `x` using left limits at interaction sites.
    pub fn state_left_at(&self, x: f64) -> Result<ScaledState> {
        self.check_inside(x)?;
        let i = self.samples.partition_point(|s| s.x < x);
        if i < self.samples.len() && self.samples[i].x == x {
            return Ok(ScaledState::from_sample(&self.samples[i]));
        }
        let i = i.max(1) - 1;
        self.advance(self.samples[i].x, self.start_state(i), x)
    }

    /// Natural log of `sup |u|` (or `sup |u'|`) over the samples and jump limits.
    pub fn log_sup(&self, derivative: bool) -> f64 {
        let pick = |u: Complex64, du: Complex64| if derivative { du } else { u };
        let from_samples = self.samples.iter().map(|s| pick(s.u, s.du).norm().ln() + s.log_scale);
        let from_jumps = self.jumps.iter().map(|j| pick(j.u_plus, j.du_plus).norm().ln() + j.log_scale);
        from_samples.chain(from_jumps).fold(f64::NEG_INFINITY, f64::max)
    }

    /// Accumulated log-scale at the end of the shoot.
    pub fn final_log_scale(&self) -> f64 {
        match self.direction {
            ShootDirection::FromLeft => self.samples.last().map_or(0.0, |s| s.log_scale),
            ShootDirection::FromRight => self.samples.first().map_or(0.0, |s| s.log_scale),
        }
    }

    /// Hermite cell covering `[lo, hi]`, which must not straddle a sample.
    fn cell(&self, lo: f64, hi: f64) -> (QuinticCell, f64) {
        let n = self.samples.len();
        let i = (self.samples.partition_point(|s| s.x <= lo).max(1) - 1).min(n - 2);
        let left = self.start_state(i);
        let r = &self.samples[i + 1];
        let x0 = self.samples[i].x;
        let piece = self.ctx.problem.potential.piece(x0, r.x);
        let rescale = (r.log_scale - left.log_scale).exp();
        let jet = |x: f64, u: Complex64, du: Complex64| Jet { y: u, dy: du, ddy: (piece.eval(x) - self.z) * u };
        let _ = hi;
        (
            QuinticCell { x0, x1: r.x, left: jet(x0, left.u, left.du), right: jet(r.x, r.u * rescale, r.du * rescale) },
            left.log_scale,
        )
    }

    /// Unwrapped Prüfer angle `atan2(u, u')` at the far end of a real left shoot.
    pub(crate) fn terminal_phase(&self) -> f64 {
        let mut it = self.samples.iter();
        let first = it.next().expect("trace has samples");
        let mut prev = first.u.re.atan2(first.du.re);
        let mut phase = prev;
        let mut advance = |u: f64, du: f64| {
            let a = u.atan2(du);
            phase += wrap(a - prev);
            prev = a;
        };
        let ordered: Vec<&Sample> = match self.direction {
            ShootDirection::FromLeft => self.samples.iter().collect(),
            ShootDirection::FromRight => self.samples.iter().rev().collect(),
        };
        for (k, s) in ordered.iter().enumerate() {
            if k > 0 {
                advance(s.u.re, s.du.re);
            }
            if let Some(j) = self.jump_at(s.x) {
                match self.direction {
                    ShootDirection::FromLeft => advance(j.u_plus.re, j.du_plus.re),
                    ShootDirection::FromRight => advance(j.u_minus.re, j.du_minus.re),
                }
            }
        }
        phase
    }

    /// CSV with columns `x,u,du` (real traces) or real/imaginary column pairs,
    /// plus a `log_scale` column when renormalization occurred.
    pub fn to_csv(&self) -> String {
        let real = self.is_real();
        let scaled = self.samples.iter().any(|s| s.log_scale != 0.0);
        let mut out = String::new();
        out.push_str(if real { "x,u,du" } else { "x,u_re,u_im,du_re,du_im" });
        out.push_str(if scaled { ",log_scale\n" } else { "\n" });
        let num = |v: f64| serde_json::to_string(&v).unwrap_or_else(|_| "NaN".into());
        for s in &self.samples {
            if real {
                let _ = write!(out, "{},{},{}", num(s.x), num(s.u.re), num(s.du.re));
            } else {
                let _ = write!(out, "{},{},{},{},{}", num(s.x), num(s.u.re), num(s.u.im), num(s.du.re), num(s.du.im));
            }
            if scaled {
                let _ = write!(out, ",{}", num(s.log_scale));
            }
            out.push('\n');
        }
        out
    }
}

/// Wraps an angle difference into `(-π, π]`.
fn wrap(d: f64) -> f64 {
    let mut d = d % (2.0 * PI);
    if d > PI {
        d -= 2.0 * PI;
    } else if d <= -PI {
        d += 2.0 * PI;
    }
    d
}

fn check_same_problem(t1: &SolutionTrace, t2: &SolutionTrace) -> Result<()> {
    if Arc::ptr_eq(&t1.ctx, &t2.ctx) {
        return Ok(());
    }
    if t1.ctx.problem != t2.ctx.problem || t1.ctx.couplings != t2.ctx.couplings {
        return Err(Error::domain("traces belong to different problems or couplings"));
    }
    Ok(())
}

/// Wronskian in mantissa/log form: `(u1 u2' - u1' u2)` at `x` (right limits).
pub(crate) fn wronskian_scaled(
    t1: &SolutionTrace,
    t2: &SolutionTrace,
    x: f64,
) -> Result<(Complex64, ScaledState, ScaledState)> {
    check_same_problem(t1, t2)?;
    let s1 = t1.state_at(x)?;
    let s2 = t2.state_at(x)?;
    Ok((s1.u * s2.du - s1.du * s2.u, s1, s2))
}

/// `W_x(u1, u2) = u1(x+) u2'(x+) - u1'(x+) u2(x+)`.
pub fn wronskian(t1: &SolutionTrace, t2: &SolutionTrace, x: f64) -> Result<Complex64> {
    let (w, s1, s2) = wronskian_scaled(t1, t2, x)?;
    Ok(w * (s1.log_scale + s2.log_scale).exp())
}

/// `∫_lo^hi u1 u2 dx` (no conjugation) from the Hermite cells of both traces.
pub fn product_integral(t1: &SolutionTrace, t2: &SolutionTrace, lo: f64, hi: f64) -> Result<Complex64> {
    check_same_problem(t1, t2)?;
    t1.check_inside(lo)?;
    t1.check_inside(hi)?;
    if hi < lo {
        return Ok(-product_integral(t1, t2, hi, lo)?);
    }
    let mut cuts: Vec<f64> = vec![lo, hi];
    cuts.extend(t1.samples.iter().chain(t2.samples.iter()).map(|s| s.x).filter(|&x| x > lo && x < hi));
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let mut total = Complex64::new(0.0, 0.0);
    for w in cuts.windows(2) {
        let (p, q) = (w[0], w[1]);
        let (c1, l1) = t1.cell(p, q);
        let (c2, l2) = t2.cell(p, q);
        total += gauss_legendre(p, q, |x| c1.eval(x) * c2.eval(x)) * (l1 + l2).exp();
    }
    if !(total.re.is_finite() && total.im.is_finite()) {
        return Err(Error::domain("product integral overflowed"));
    }
    Ok(total)
}

/// `|W_d - W_c - (λ0 - λ) ∫_c^d u v|` for `u` at `λ0 = t_u.z` and `v` at `λ = t_v.z`.
pub fn lagrange_identity_residual(t_u: &SolutionTrace, t_v: &SolutionTrace, c: f64, d: f64) -> Result<f64> {
    check_same_problem(t_u, t_v)?;
    let problem = t_u.problem();
    let tol = problem.site_tolerance();
    for x in [c, d] {
        t_u.check_inside(x)?;
        if let Some(i) = problem.interactions.site_at(x, tol) {
            return Err(Error::domain(format!("x = {x} coincides with interaction site {i}")));
        }
    }
    let wc = wronskian(t_u, t_v, c)?;
    let wd = wronskian(t_u, t_v, d)?;
    let integral = product_integral(t_u, t_v, c, d)?;
    Ok((wd - wc - (t_u.z - t_v.z) * integral).norm())
}

fn count_multiples_between(lo: f64, hi: f64) -> usize {
    if hi <= lo {
        return 0;
    }
    let n = (hi / PI).ceil() - 1.0 - (lo / PI).floor();
    n.max(0.0) as usize
}

/// Number of zeros of `u` in the open interval `(lo, hi)`.
///
/// Zeros inside smooth stretches are counted by Prüfer phase unwrapping; at an
/// interaction site a zero is counted once when either one-sided value
/// vanishes or `u` changes sign across the site.
pub fn pruefer_zero_count(trace: &SolutionTrace, lo: f64, hi: f64) -> Result<usize> {
    if !trace.is_real() {
        return Err(Error::domain("zero counting needs a real-valued trace"));
    }
    trace.check_inside(lo)?;
    trace.check_inside(hi)?;
    if !(lo < hi) {
        return Err(Error::domain(format!("empty window ({lo}, {hi})")));
    }

    let near_zero = |u: f64, du: f64| u.abs() <= PHASE_EPS * u.hypot(du);
    let mut count = 0usize;
    let start = trace.state_at(lo)?;
    let mut run_first = start.u.re.atan2(start.du.re);
    let mut prev = run_first;
    let mut phase = run_first;
    let close_run = |phase: f64, first: f64, count: &mut usize| {
        *count += count_multiples_between(first + PHASE_EPS, phase - PHASE_EPS);
    };

    let inner = trace.samples.iter().filter(|s| s.x > lo && s.x < hi);
    for s in inner {
        let a = s.u.re.atan2(s.du.re);
        phase += wrap(a - prev);
        prev = a;
        if let Some(j) = trace.jump_at(s.x) {
            close_run(phase, run_first, &mut count);
            let (um, dm, up, dp) = (j.u_minus.re, j.du_minus.re, j.u_plus.re, j.du_plus.re);
            if near_zero(um, dm) || near_zero(up, dp) || um * up < 0.0 {
                count += 1;
            }
            let a = up.atan2(dp);
            prev = a;
            phase = a;
            run_first = a;
        }
    }
    let end = trace.state_left_at(hi)?;
    let a = end.u.re.atan2(end.du.re);
    phase += wrap(a - prev);
    close_run(phase, run_first, &mut count);
    Ok(count)
}

#[cfg(test)]
mod tests;
