use serde::{Deserialize, Serialize};

use super::Interval;
use crate::error::{Error, Result};

/// Named analytic potentials.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BuiltinPotential {
    /// `k (x - x0)^2`, params `[k]` or `[k, x0]`.
    Harmonic,
    /// `v_inf - c / x^2`, params `[v_inf, c]`.
    InverseSquareTail,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Interpolation {
    #[default]
    Linear,
}

/// Real potential V on the interval, restricted to a closed, serializable family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum PotentialSpec {
    Constant {
        c: f64,
    },
    /// `values[i]` holds on `[breakpoints[i-1], breakpoints[i])`; one more value than breakpoints.
    PiecewiseConstant {
        breakpoints: Vec<f64>,
        values: Vec<f64>,
    },
    Tabulated {
        grid: Vec<f64>,
        values: Vec<f64>,
        #[serde(default)]
        interpolation: Interpolation,
    },
    Builtin {
        name: BuiltinPotential,
        #[serde(default)]
        params: Vec<f64>,
    },
}

/// Form of the potential beyond a truncation point, used by the Hille test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "kebab-case")]
pub enum AnalyticTail {
    Constant { c: f64 },
    InverseSquare { v_inf: f64, c: f64 },
}

/// The potential restricted to one integration segment: a smooth closed form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Piece {
    Const(f64),
    Linear { x0: f64, v0: f64, slope: f64 },
    Harmonic { k: f64, center: f64 },
    InverseSquare { v_inf: f64, c: f64 },
}

impl Piece {
    #[inline]
    pub(crate) fn eval(&self, x: f64) -> f64 {
        match *self {
            Piece::Const(c) => c,
            Piece::Linear { x0, v0, slope } => v0 + slope * (x - x0),
            Piece::Harmonic { k, center } => k * (x - center) * (x - center),
            Piece::InverseSquare { v_inf, c } => v_inf - c / (x * x),
        }
    }
}

impl PotentialSpec {
    pub fn constant(c: f64) -> Self {
        PotentialSpec::Constant { c }
    }

    fn harmonic_params(params: &[f64]) -> (f64, f64) {
        (params.first().copied().unwrap_or(1.0), params.get(1).copied().unwrap_or(0.0))
    }

    fn inverse_square_params(params: &[f64]) -> (f64, f64) {
        (params.first().copied().unwrap_or(0.0), params.get(1).copied().unwrap_or(0.0))
    }

    /// Structural problems with this potential on `interval`, as human-readable messages.
    pub fn violations(&self, interval: &Interval) -> Vec<String> {
        let mut out = Vec::new();
        let all_finite = |v: &[f64]| v.iter().all(|x| x.is_finite());
        let strictly_increasing = |v: &[f64]| v.windows(2).all(|w| w[0] < w[1]);
        match self {
            PotentialSpec::Constant { c } => {
                if !c.is_finite() {
                    out.push("constant value is not finite".into());
                }
            }
            PotentialSpec::PiecewiseConstant { breakpoints, values } => {
                if values.len() != breakpoints.len() + 1 {
                    out.push(format!(
                        "piecewise-constant needs {} values for {} breakpoints, got {}",
                        breakpoints.len() + 1,
                        breakpoints.len(),
                        values.len()
                    ));
                }
                if !all_finite(breakpoints) || !all_finite(values) {
                    out.push("piecewise-constant entries must be finite".into());
                }
                if !strictly_increasing(breakpoints) {
                    out.push("breakpoints must be strictly increasing".into());
                }
            }
            PotentialSpec::Tabulated { grid, values, .. } => {
                if grid.len() < 2 || grid.len() != values.len() {
                    out.push("tabulated potential needs matching grid/values with >= 2 nodes".into());
                } else {
                    if !all_finite(grid) || !all_finite(values) {
                        out.push("tabulated entries must be finite".into());
                    }
                    if !strictly_increasing(grid) {
                        out.push("tabulated grid must be strictly increasing".into());
                    }
                    if grid[0] > interval.a || grid[grid.len() - 1] < interval.b {
                        out.push("tabulated grid does not cover the interval".into());
                    }
                }
            }
            PotentialSpec::Builtin { name, params } => {
                if !all_finite(params) {
                    out.push("builtin params must be finite".into());
                }
                match name {
                    BuiltinPotential::Harmonic => {
                        if params.is_empty() || params.len() > 2 {
                            out.push("harmonic takes params [k] or [k, x0]".into());
                        }
                    }
                    BuiltinPotential::InverseSquareTail => {
                        if params.len() != 2 {
                            out.push("inverse-square-tail takes params [v_inf, c]".into());
                        } else if params[1] != 0.0 && interval.a <= 0.0 && interval.b >= 0.0 {
                            out.push("inverse-square-tail is not integrable across x = 0".into());
                        }
                    }
                }
            }
        }
        out
    }

    /// Points strictly inside `(a, b)` where V is not smooth; integration steps must land on them.
    pub fn knots_in(&self, a: f64, b: f64) -> Vec<f64> {
        let inside = |xs: &[f64]| xs.iter().copied().filter(|&x| x > a && x < b).collect();
        match self {
            PotentialSpec::PiecewiseConstant { breakpoints, .. } => inside(breakpoints),
            PotentialSpec::Tabulated { grid, .. } => inside(grid),
            _ => Vec::new(),
        }
    }

    /// Closed form of V on a segment `[lo, hi]` that contains no knot in its interior.
    pub(crate) fn piece(&self, lo: f64, hi: f64) -> Piece {
        let mid = 0.5 * (lo + hi);
        match self {
            PotentialSpec::Constant { c } => Piece::Const(*c),
            PotentialSpec::PiecewiseConstant { breakpoints, values } => {
                let idx = breakpoints.partition_point(|&bp| bp <= mid);
                Piece::Const(values[idx])
            }
            PotentialSpec::Tabulated { grid, values, .. } => {
                let n = grid.len();
                let hi_idx = grid.partition_point(|&g| g <= mid).clamp(1, n - 1);
                let (x0, x1) = (grid[hi_idx - 1], grid[hi_idx]);
                let (v0, v1) = (values[hi_idx - 1], values[hi_idx]);
                Piece::Linear { x0, v0, slope: (v1 - v0) / (x1 - x0) }
            }
            PotentialSpec::Builtin { name, params } => match name {
                BuiltinPotential::Harmonic => {
                    let (k, center) = Self::harmonic_params(params);
                    Piece::Harmonic { k, center }
                }
                BuiltinPotential::InverseSquareTail => {
                    let (v_inf, c) = Self::inverse_square_params(params);
                    Piece::InverseSquare { v_inf, c }
                }
            },
        }
    }

    /// V(x), right-continuous at breakpoints.
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            PotentialSpec::PiecewiseConstant { breakpoints, values } => {
                values[breakpoints.partition_point(|&bp| bp <= x)]
            }
            PotentialSpec::Tabulated { grid, values, .. } => {
                let n = grid.len();
                let i = grid.partition_point(|&g| g <= x).clamp(1, n - 1);
                let t = (x - grid[i - 1]) / (grid[i] - grid[i - 1]);
                values[i - 1] + t * (values[i] - values[i - 1])
            }
            _ => self.piece(x, x).eval(x),
        }
    }

    /// Segments of `[a, b]` on which V has a single closed form.
    fn segments(&self, a: f64, b: f64) -> Vec<(f64, f64, Piece)> {
        let mut cuts = vec![a];
        cuts.extend(self.knots_in(a, b));
        cuts.push(b);
        cuts.windows(2).map(|w| (w[0], w[1], self.piece(w[0], w[1]))).collect()
    }

    /// `(inf V, sup V)` over `[a, b]`.
    pub fn range_on(&self, a: f64, b: f64) -> Result<(f64, f64)> {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for (s0, s1, piece) in self.segments(a, b) {
            let mut candidates = vec![piece.eval(s0), piece.eval(s1)];
            match piece {
                Piece::Harmonic { center, .. } if center > s0 && center < s1 => candidates.push(0.0),
                Piece::InverseSquare { c, .. } if c != 0.0 && s0 <= 0.0 && s1 >= 0.0 => {
                    return Err(Error::NoFiniteBound(format!(
                        "inverse-square potential is singular at x = 0 inside [{a}, {b}]"
                    )));
                }
                _ => {}
            }
            for v in candidates {
                lo = lo.min(v);
                hi = hi.max(v);
            }
        }
        Ok((lo, hi))
    }

    /// `K = sup |V|` over the interval.
    pub fn bound_on(&self, interval: &Interval) -> Result<f64> {
        let (lo, hi) = self.range_on(interval.a, interval.b)?;
        Ok(lo.abs().max(hi.abs()))
    }

    /// Exact `∫_lo^hi V(t) dt` for every variant.
    pub fn integral(&self, lo: f64, hi: f64) -> Result<f64> {
        if hi < lo {
            return Ok(-self.integral(hi, lo)?);
        }
        let mut total = 0.0;
        for (s0, s1, piece) in self.segments(lo, hi) {
            total += match piece {
                Piece::Const(c) => c * (s1 - s0),
                Piece::Linear { .. } => 0.5 * (piece.eval(s0) + piece.eval(s1)) * (s1 - s0),
                Piece::Harmonic { k, center } => k * ((s1 - center).powi(3) - (s0 - center).powi(3)) / 3.0,
                Piece::InverseSquare { v_inf, c } => {
                    if c != 0.0 && s0 <= 0.0 && s1 >= 0.0 {
                        return Err(Error::NoFiniteBound(
                            "inverse-square potential is not integrable across x = 0".into(),
                        ));
                    }
                    v_inf * (s1 - s0) + c * (1.0 / s1 - 1.0 / s0)
                }
            };
        }
        Ok(total)
    }

    /// The closed form V takes for large x, when one is declared.
    pub fn analytic_tail(&self) -> Option<AnalyticTail> {
        match self {
            PotentialSpec::Constant { c } => Some(AnalyticTail::Constant { c: *c }),
            PotentialSpec::PiecewiseConstant { values, .. } => values.last().map(|&c| AnalyticTail::Constant { c }),
            PotentialSpec::Builtin { name: BuiltinPotential::InverseSquareTail, params } => {
                let (v_inf, c) = Self::inverse_square_params(params);
                Some(AnalyticTail::InverseSquare { v_inf, c })
            }
            _ => None,
        }
    }
}

impl AnalyticTail {
    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            AnalyticTail::Constant { c } => c,
            AnalyticTail::InverseSquare { v_inf, c } => v_inf - c / (x * x),
        }
    }

    /// Value of V at infinity.
    pub fn limit(&self) -> f64 {
        match *self {
            AnalyticTail::Constant { c } => c,
            AnalyticTail::InverseSquare { v_inf, .. } => v_inf,
        }
    }

    /// `∫_x^∞ (e - V(t)) dt`, provided `e` equals the limit of V (otherwise the integral diverges).
    pub fn remainder(&self, e: f64, x: f64) -> f64 {
        match *self {
            AnalyticTail::Constant { c } => {
                debug_assert!((e - c).abs() <= 1e-12 * e.abs().max(1.0));
                0.0
            }
            AnalyticTail::InverseSquare { c, .. } => c / x,
        }
    }
}
