use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Environment variable selecting the default tolerance profile
/// (`default`, `strict` or `fast`).
pub const PROFILE_ENV: &str = "DELTASL_TOLERANCE_PROFILE";

/// Every numerical threshold used by the library, in one place.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Relative tolerance of the embedded Runge-Kutta pair.
    pub ode_rtol: f64,
    /// Absolute tolerance of the embedded Runge-Kutta pair.
    pub ode_atol: f64,
    /// Upper bound on a single integration step (0 disables it).
    pub max_step: f64,
    /// Threshold on the normalized matching determinant below which E counts as an eigenvalue.
    pub eigen: f64,
    /// Relative eigenvalue bracket width at which refinement stops.
    pub bracket: f64,
    /// Node condition threshold relative to the eigenfunction sup-norm.
    pub node: f64,
    /// Relative Wronskian threshold for flagging a Green-function pole.
    pub pole: f64,
    /// Width of the Bernoulli-degenerate band for dichotomy scans.
    pub band: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            ode_rtol: 1e-10,
            ode_atol: 1e-12,
            max_step: 0.0,
            eigen: 1e-9,
            bracket: 1e-10,
            node: 1e-7,
            pole: 1e-10,
            band: 0.05,
        }
    }
}

impl Tolerances {
    pub fn profile(name: &str) -> Result<Self> {
        let base = Tolerances::default();
        match name {
            "default" => Ok(base),
            "strict" => Ok(Tolerances { ode_rtol: 1e-12, ode_atol: 1e-14, bracket: 1e-12, ..base }),
            "fast" => {
                Ok(Tolerances { ode_rtol: 1e-8, ode_atol: 1e-10, eigen: 1e-7, bracket: 1e-8, node: 1e-5, ..base })
            }
            other => {
                Err(Error::Config(format!("unknown tolerance profile `{other}` (expected default, strict or fast)")))
            }
        }
    }

    /// Profile named by the environment, falling back to the built-in defaults.
    pub fn from_env() -> Result<Self> {
        match std::env::var(PROFILE_ENV) {
            Ok(name) if !name.trim().is_empty() => Self::profile(name.trim()),
            _ => Ok(Tolerances::default()),
        }
    }

    pub fn check(&self) -> Result<()> {
        let positive = [
            ("ode_rtol", self.ode_rtol),
            ("ode_atol", self.ode_atol),
            ("eigen", self.eigen),
            ("bracket", self.bracket),
            ("node", self.node),
            ("pole", self.pole),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("tolerances.{name} must be positive, got {v}")));
            }
        }
        if !(self.max_step.is_finite() && self.max_step >= 0.0) {
            return Err(Error::Config("tolerances.max_step must be >= 0".into()));
        }
        if !(0.0..0.5).contains(&self.band) {
            return Err(Error::Config("tolerances.band must lie in [0, 0.5)".into()));
        }
        Ok(())
    }
}
