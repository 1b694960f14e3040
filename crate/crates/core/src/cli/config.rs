//! Run configuration: TOML (or the equivalent JSON) describing the problem,
//! the task parameters, tolerances, the coupling ensemble and the output.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    BoundaryCondition, CouplingVector, Distribution, EnsembleSpec, InteractionKind, InteractionSet, Interval,
    PotentialSpec, Problem, Site,
};
use crate::tolerances::Tolerances;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Task {
    Shoot,
    GreenSweep,
    KreinCheck,
    Spectrum,
    Classify,
    Certify,
    Montecarlo,
    Scan,
    Truncate,
}

impl Task {
    pub fn name(self) -> &'static str {
        match self {
            Task::Shoot => "shoot",
            Task::GreenSweep => "green-sweep",
            Task::KreinCheck => "krein-check",
            Task::Spectrum => "spectrum",
            Task::Classify => "classify",
            Task::Certify => "certify",
            Task::Montecarlo => "montecarlo",
            Task::Scan => "scan",
            Task::Truncate => "truncate",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Format {
    #[default]
    Json,
    Csv,
}

/// A site as written in a config: the problem data plus optional per-site
/// coupling and ensemble distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SiteConfig {
    pub x: f64,
    pub kind: InteractionKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coupling: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub distribution: Option<Distribution>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InteractionsConfig {
    #[serde(default)]
    pub sites: Vec<SiteConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    pub interval: Interval,
    pub potential: PotentialSpec,
    #[serde(default)]
    pub interactions: InteractionsConfig,
    #[serde(default = "BoundaryCondition::dirichlet")]
    pub bc: BoundaryCondition,
}

impl ProblemConfig {
    /// Sites in ascending order, as the problem will index them.
    fn sorted_sites(&self) -> Vec<SiteConfig> {
        let mut sites = self.interactions.sites.clone();
        sites.sort_by(|p, q| p.x.total_cmp(&q.x));
        sites
    }

    pub fn problem(&self) -> Problem {
        let sites = self.sorted_sites().iter().map(|s| Site { x: s.x, kind: s.kind }).collect();
        Problem::new(self.interval, self.potential.clone(), InteractionSet::new(sites), self.bc)
    }

    pub fn couplings(&self) -> CouplingVector {
        CouplingVector::new(self.sorted_sites().iter().map(|s| s.coupling.unwrap_or(0.0)).collect())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleConfig {
    /// Applied to every site without its own `distribution`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub distribution: Option<Distribution>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub master_seed: Option<u64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    #[serde(default)]
    pub format: Format,
}

/// A line of real energies `e_lo..=e_hi` with `n` points, shifted by `i·eta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnergyLine {
    pub e_lo: f64,
    pub e_hi: f64,
    pub n: usize,
    #[serde(default)]
    pub eta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HilleParams {
    pub a: f64,
    pub x_max: f64,
    #[serde(default = "default_tail_grid")]
    pub tail_grid: usize,
}

fn default_tail_grid() -> usize {
    200
}

/// Parameters of every task; each task reads the fields it needs.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskParams {
    /// Spectral parameter `[re, im]` (shoot).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub z: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub direction: Option<crate::propagate::ShootDirection>,
    /// Coupling per site, overriding the `coupling` entries of the sites.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub couplings: Option<Vec<f64>>,
    /// Evaluation point (green-sweep).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x: Option<f64>,
    /// Explicit spectral parameters `[[re, im], ...]` (green-sweep, krein-check).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub zs: Option<Vec<[f64; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub line: Option<EnergyLine>,
    /// Site index (krein-check).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub site: Option<usize>,
    /// Coupling pairs `[[α, β], ...]` (krein-check).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pairs: Option<Vec<[f64; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub e_lo: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub e_hi: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_count: Option<usize>,
    /// Energy (classify, certify, montecarlo).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub e: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub node_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hille: Option<HilleParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_samples: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eigen_tol: Option<f64>,
    /// Energy grid (scan).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub energies: Option<Vec<f64>>,
    /// Truncation points (truncate).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x_max: Option<Vec<f64>>,
    /// Task run at each truncation: `spectrum` or `certify`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inner: Option<Task>,
}

fn missing(task: Task, field: &str) -> Error {
    Error::Config(format!("task `{}` needs params.{field}", task.name()))
}

impl TaskParams {
    pub fn need<T: Clone>(&self, task: Task, field: &str, value: &Option<T>) -> Result<T> {
        value.clone().ok_or_else(|| missing(task, field))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub task: Option<Task>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub problem: ProblemConfig,
    /// Overrides on top of the tolerance profile; fully resolved after [`RunConfig::resolve`].
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerances: Option<serde_json::Map<String, serde_json::Value>>,
    #[serde(default)]
    pub params: TaskParams,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ensemble: Option<EnsembleConfig>,
    #[serde(default)]
    pub output: OutputConfig,
}

impl RunConfig {
    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let json =
            path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json")) || text.trim_start().starts_with('{');
        if json {
            serde_json::from_str(text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
        } else {
            toml::from_str(text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text, path)
    }

    /// Tolerances from `base` with the config's overrides applied.
    pub fn tolerances(&self, base: Tolerances) -> Result<Tolerances> {
        let mut merged = match serde_json::to_value(base)? {
            serde_json::Value::Object(m) => m,
            _ => unreachable!("tolerances serialize to an object"),
        };
        for (k, v) in self.tolerances.iter().flatten() {
            merged.insert(k.clone(), v.clone());
        }
        let tol: Tolerances = serde_json::from_value(serde_json::Value::Object(merged))
            .map_err(|e| Error::Config(format!("tolerances: {e}")))?;
        tol.check()?;
        Ok(tol)
    }

    /// Pins the tolerances and seed so that the embedded config reruns identically.
    pub fn resolve(&mut self, base: Tolerances, seed: Option<u64>) -> Result<Tolerances> {
        let tol = self.tolerances(base)?;
        self.tolerances = match serde_json::to_value(tol)? {
            serde_json::Value::Object(m) => Some(m),
            _ => unreachable!(),
        };
        if seed.is_some() {
            self.seed = seed;
        }
        Ok(tol)
    }

    pub fn couplings(&self) -> Result<CouplingVector> {
        match &self.params.couplings {
            Some(v) => Ok(CouplingVector::new(v.clone())),
            None => Ok(self.problem.couplings()),
        }
    }

    /// Ensemble from the per-site and default distributions; the seed is
    /// `seed`, else `ensemble.master_seed`, else 0.
    pub fn ensemble(&self) -> Result<EnsembleSpec> {
        let cfg = self.ensemble.clone().unwrap_or_default();
        let per_site = self
            .problem
            .sorted_sites()
            .iter()
            .enumerate()
            .map(|(i, s)| {
                s.distribution.or(cfg.distribution).ok_or_else(|| {
                    Error::Config(format!("site {i} has no distribution and [ensemble] declares no default"))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let master_seed = self.seed.or(cfg.master_seed).unwrap_or(0);
        Ok(EnsembleSpec { per_site, master_seed })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BOX: &str = r#"
task = "spectrum"

[problem]
interval = { a = 0.0, b = 3.141592653589793 }
potential = { type = "constant", c = 0.0 }

[[problem.interactions.sites]]
x = 2.0
kind = "delta-prime"
coupling = -1.5

[[problem.interactions.sites]]
x = 1.0
kind = "delta"
distribution = { dist = "normal", mu = 0.0, sigma = 2.0 }

[params]
e_lo = 0.5
e_hi = 10.0

[tolerances]
eigen = 1e-8

[ensemble]
distribution = { dist = "uniform", lo = -5.0, hi = 5.0 }
master_seed = 9
"#;

    #[test]
    fn parses_toml() {
        let c = RunConfig::parse(BOX, Path::new("box.toml")).unwrap();
        assert_eq!(c.task, Some(Task::Spectrum));
        let p = c.problem.problem();
        assert_eq!(p.interactions.sites()[0].x, 1.0);
        assert_eq!(c.couplings().unwrap().values, [0.0, -1.5]);
        let ens = c.ensemble().unwrap();
        assert_eq!(ens.master_seed, 9);
        assert_eq!(ens.per_site[0], Distribution::Normal { mu: 0.0, sigma: 2.0 });
        assert_eq!(ens.per_site[1], Distribution::Uniform { lo: -5.0, hi: 5.0 });
        let tol = c.tolerances(Tolerances::default()).unwrap();
        assert_eq!(tol.eigen, 1e-8);
        assert_eq!(tol.node, 1e-7);
    }

    #[test]
    fn json_round_trip() {
        let mut c = RunConfig::parse(BOX, Path::new("box.toml")).unwrap();
        c.resolve(Tolerances::default(), Some(3)).unwrap();
        let text = serde_json::to_string_pretty(&c).unwrap();
        let back = RunConfig::parse(&text, Path::new("box.json")).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.ensemble().unwrap().master_seed, 3);
    }

    #[test]
    fn diagnostics_name_the_field() {
        let err = RunConfig::parse("[problem]\npotential = { type = \"constant\", c = 0.0 }\n", Path::new("x.toml"))
            .unwrap_err()
            .to_string();
        assert!(err.contains("interval"), "{err}");
        let err = RunConfig::parse(&BOX.replace("eigen = 1e-8", "eigen = -1.0"), Path::new("x.toml"))
            .unwrap()
            .tolerances(Tolerances::default())
            .unwrap_err()
            .to_string();
        assert!(err.contains("eigen"), "{err}");
        let err = RunConfig::parse(&BOX.replace("eigen = 1e-8", "eigne = 1.0"), Path::new("x.toml"))
            .unwrap()
            .tolerances(Tolerances::default())
            .unwrap_err()
            .to_string();
        assert!(err.contains("eigne"), "{err}");
    }
}
