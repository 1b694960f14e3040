//! One function per task: compute, then render the result as JSON and CSV.

use std::fmt::Write as _;

use num_complex::Complex64;
use serde::Serialize;
use serde_json::{json, Value};

use super::config::{RunConfig, Task, TaskParams};
use crate::error::{Error, Result};
use crate::green::{green_sweep, krein_relation_residual};
use crate::model::{BuiltinPotential, Interval, PotentialSpec};
use crate::oscillation::{certify, cross_check_certificate, hille_nonoscillatory, Certificate};
use crate::propagate::{shoot, ShootDirection};
use crate::random::{dichotomy_scan, estimate_eigenvalue_probability, MonteCarloResult};
use crate::spectra::{classify_ae, find_eigenvalues, SpectralReport, Witness};
use crate::tolerances::Tolerances;

pub struct TaskOutput {
    pub result: Value,
    pub csv: String,
}

/// Numbers in CSV use the JSON spelling, so both outputs carry identical digits.
pub(crate) fn num(v: f64) -> String {
    if v.is_finite() {
        serde_json::to_string(&v).expect("finite floats serialize")
    } else {
        String::new()
    }
}

fn to_value<T: Serialize>(v: &T) -> Result<Value> {
    Ok(serde_json::to_value(v)?)
}

fn spectral_grid(task: Task, p: &TaskParams) -> Result<Vec<Complex64>> {
    if let Some(zs) = &p.zs {
        return Ok(zs.iter().map(|&[re, im]| Complex64::new(re, im)).collect());
    }
    let line = p.line.ok_or_else(|| Error::Config(format!("task `{}` needs params.zs or params.line", task.name())))?;
    if line.n == 0 {
        return Err(Error::Config("params.line.n must be positive".into()));
    }
    Ok((0..line.n)
        .map(|i| {
            let s = if line.n == 1 { 0.0 } else { i as f64 / (line.n - 1) as f64 };
            Complex64::new(line.e_lo + (line.e_hi - line.e_lo) * s, line.eta)
        })
        .collect())
}

pub fn run_task(task: Task, cfg: &RunConfig, tol: &Tolerances) -> Result<TaskOutput> {
    let problem = cfg.problem.problem();
    problem.validated()?;
    let p = &cfg.params;
    match task {
        Task::Shoot => {
            let [re, im] = p.need(task, "z", &p.z)?;
            let omega = cfg.couplings()?;
            let dir = p.direction.unwrap_or(ShootDirection::FromLeft);
            let trace = shoot(&problem, &omega, Complex64::new(re, im), dir, tol)?;
            Ok(TaskOutput { result: json!({ "trace": to_value(&trace)? }), csv: trace.to_csv() })
        }
        Task::GreenSweep => {
            let x = p.need(task, "x", &p.x)?;
            let zs = spectral_grid(task, p)?;
            let values = green_sweep(&problem, &cfg.couplings()?, &zs, x, tol)?;
            let mut csv = String::from("z_re,z_im,x,kind,value_re,value_im,pole,scale_log\n");
            for g in &values {
                let (vr, vi) = g.value.map_or((f64::NAN, f64::NAN), |v| (v.re, v.im));
                let kind = serde_json::to_value(g.kind)?;
                let _ = writeln!(
                    csv,
                    "{},{},{},{},{},{},{},{}",
                    num(g.z.re),
                    num(g.z.im),
                    num(g.x),
                    kind.as_str().unwrap_or_default(),
                    num(vr),
                    num(vi),
                    g.pole,
                    num(g.scale_log)
                );
            }
            Ok(TaskOutput { result: json!({ "x": x, "values": to_value(&values)? }), csv })
        }
        Task::KreinCheck => {
            let site = p.site.unwrap_or(0);
            let zs = spectral_grid(task, p)?;
            let pairs = p.need(task, "pairs", &p.pairs)?;
            #[derive(Serialize)]
            struct Row {
                z: Complex64,
                alpha: f64,
                beta: f64,
                residual: Option<f64>,
                #[serde(skip_serializing_if = "Option::is_none")]
                skipped: Option<String>,
            }
            let mut rows = Vec::new();
            for &z in &zs {
                for &[alpha, beta] in &pairs {
                    let row = match krein_relation_residual(&problem, site, z, alpha, beta, tol) {
                        Ok(r) => Row { z, alpha, beta, residual: Some(r), skipped: None },
                        Err(e @ Error::Untestable(_)) => {
                            Row { z, alpha, beta, residual: None, skipped: Some(e.to_string()) }
                        }
                        Err(e) => return Err(e),
                    };
                    rows.push(row);
                }
            }
            let max = rows.iter().filter_map(|r| r.residual).fold(0.0, f64::max);
            let mut csv = String::from("z_re,z_im,alpha,beta,residual\n");
            for r in &rows {
                let _ = writeln!(
                    csv,
                    "{},{},{},{},{}",
                    num(r.z.re),
                    num(r.z.im),
                    num(r.alpha),
                    num(r.beta),
                    r.residual.map(num).unwrap_or_default()
                );
            }
            Ok(TaskOutput { result: json!({ "site": site, "max_residual": max, "rows": to_value(&rows)? }), csv })
        }
        Task::Spectrum => {
            let report = spectrum(cfg, &problem, tol)?;
            Ok(TaskOutput { result: to_value(&report)?, csv: spectrum_csv(&report) })
        }
        Task::Classify => {
            let e = p.need(task, "e", &p.e)?;
            let v = classify_ae(&problem, e, p.node_tol.unwrap_or(tol.node), tol)?;
            let tag = serde_json::to_value(v.tag)?;
            let tag = tag.as_str().unwrap_or_default();
            let mut csv = String::from("e,tag,site,x,kind,residual\n");
            match &v.witness {
                Witness::NotEigenvalue { residual } => {
                    let _ = writeln!(csv, "{},{tag},,,,{}", num(e), num(*residual));
                }
                Witness::Nodes { residuals, .. } | Witness::OffendingSite { residuals, .. } => {
                    for r in residuals {
                        let kind = serde_json::to_value(r.kind)?;
                        let _ = writeln!(
                            csv,
                            "{},{tag},{},{},{},{}",
                            num(e),
                            r.site,
                            num(r.x),
                            kind.as_str().unwrap_or_default(),
                            num(r.residual)
                        );
                    }
                }
            }
            Ok(TaskOutput { result: to_value(&v)?, csv })
        }
        Task::Certify => {
            let e = p.need(task, "e", &p.e)?;
            let mut certificates = certify(&problem, e)?;
            if let Some(h) = p.hille {
                certificates.push(hille_nonoscillatory(&problem.potential, e, h.a, h.x_max, h.tail_grid)?);
            }
            let checks: Vec<_> = certificates.iter().map(|c| cross_check_certificate(&problem, c, tol)).collect();
            let mut csv = String::from("e,certificate,consistency\n");
            for r in &checks {
                let c = serde_json::to_value(&r.certificate.certificate)?;
                let k = serde_json::to_value(&r.consistency)?;
                let _ = writeln!(
                    csv,
                    "{},{},{}",
                    num(e),
                    c["tag"].as_str().unwrap_or_default(),
                    k["outcome"].as_str().unwrap_or_default()
                );
            }
            let consistent = checks.iter().all(|c| c.is_consistent());
            Ok(TaskOutput { result: json!({ "e": e, "consistent": consistent, "checks": to_value(&checks)? }), csv })
        }
        Task::Montecarlo => {
            let e = p.need(task, "e", &p.e)?;
            let n = p.need(task, "n_samples", &p.n_samples)?;
            let ens = cfg.ensemble()?;
            let r = estimate_eigenvalue_probability(&problem, &ens, e, n, p.eigen_tol.unwrap_or(tol.eigen), tol)?;
            let csv = montecarlo_csv(std::slice::from_ref(&r));
            Ok(TaskOutput { result: to_value(&r)?, csv })
        }
        Task::Scan => {
            let grid = p.need(task, "energies", &p.energies)?;
            let n = p.need(task, "n_samples", &p.n_samples)?;
            let ens = cfg.ensemble()?;
            let s = dichotomy_scan(&problem, &ens, &grid, n, p.eigen_tol.unwrap_or(tol.eigen), tol)?;
            Ok(TaskOutput { result: to_value(&s)?, csv: montecarlo_csv(&s.results) })
        }
        Task::Truncate => truncate_halfline(cfg, tol),
    }
}

fn spectrum(cfg: &RunConfig, problem: &crate::model::Problem, tol: &Tolerances) -> Result<SpectralReport> {
    let p = &cfg.params;
    let e_lo = p.need(Task::Spectrum, "e_lo", &p.e_lo)?;
    let e_hi = p.need(Task::Spectrum, "e_hi", &p.e_hi)?;
    find_eigenvalues(problem, &cfg.couplings()?, e_lo, e_hi, p.max_count.unwrap_or(100), tol)
}

fn spectrum_csv(r: &SpectralReport) -> String {
    let mut csv = String::from("index,e,residual,zero_count\n");
    for (i, p) in r.eigenvalues.iter().enumerate() {
        let _ = writeln!(csv, "{i},{},{},{}", num(p.e), num(p.residual), p.zero_count);
    }
    csv
}

fn montecarlo_csv(results: &[MonteCarloResult]) -> String {
    let mut csv = String::from("e,n_samples,n_failed,hits,hit_fraction,eigen_tol,seed,bin_lo,bin_hi,count\n");
    for r in results {
        let head = format!(
            "{},{},{},{},{},{},{}",
            num(r.e),
            r.n_samples,
            r.n_failed,
            r.hits,
            num(r.hit_fraction),
            num(r.eigen_tol),
            r.seed
        );
        if r.residual_histogram.is_empty() {
            let _ = writeln!(csv, "{head},,,");
        }
        for b in &r.residual_histogram {
            let _ = writeln!(csv, "{head},{},{},{}", num(b.lo), num(b.hi), b.count);
        }
    }
    csv
}

#[derive(Debug, Clone, Serialize)]
pub struct TruncationEntry {
    pub x_max: f64,
    /// The compared quantities: eigenvalues, or the Hille supremum.
    pub values: Vec<f64>,
    pub result: Value,
}

#[derive(Debug, Clone, Serialize)]
pub struct TruncationReport {
    pub inner: Task,
    pub entries: Vec<TruncationEntry>,
    /// `differences[k]` compares entry `k + 1` against entry `k`.
    pub differences: Vec<Vec<f64>>,
    pub findings: Vec<String>,
}

fn is_confining(potential: &PotentialSpec) -> bool {
    matches!(potential, PotentialSpec::Builtin { name: BuiltinPotential::Harmonic, params }
        if params.first().copied().unwrap_or(1.0) > 0.0)
}

/// Reruns the inner task with the right endpoint moved to each `x_max` and
/// reports how the results move.
pub fn truncate_halfline(cfg: &RunConfig, tol: &Tolerances) -> Result<TaskOutput> {
    let p = &cfg.params;
    let inner = p.need(Task::Truncate, "inner", &p.inner)?;
    let mut cuts = p.need(Task::Truncate, "x_max", &p.x_max)?;
    let potential = &cfg.problem.potential;
    if potential.analytic_tail().is_none() && !is_confining(potential) {
        return Err(Error::Config(
            "truncate needs a potential with a declared analytic tail or a confining builtin".into(),
        ));
    }
    if cuts.is_empty() {
        return Err(Error::Config("params.x_max must list at least one truncation point".into()));
    }
    cuts.sort_by(f64::total_cmp);

    let mut entries = Vec::with_capacity(cuts.len());
    for &x_max in &cuts {
        let mut problem = cfg.problem.problem();
        problem.interval = Interval::new(problem.interval.a, x_max);
        problem.validated()?;
        let (values, result) = match inner {
            Task::Spectrum => {
                let r = spectrum(cfg, &problem, tol)?;
                (r.energies(), to_value(&r)?)
            }
            Task::Certify => {
                let e = p.need(inner, "e", &p.e)?;
                let a = p.hille.map_or(problem.interval.a, |h| h.a);
                let grid = p.hille.map_or(200, |h| h.tail_grid);
                let c = hille_nonoscillatory(potential, e, a, x_max, grid)?;
                let sup = match c.certificate {
                    Certificate::Nonoscillatory { sup, .. } => vec![sup],
                    _ => Vec::new(),
                };
                (sup, to_value(&c)?)
            }
            other => return Err(Error::Config(format!("truncate cannot run `{}`", other.name()))),
        };
        entries.push(TruncationEntry { x_max, values, result });
    }

    let mut findings = Vec::new();
    let differences: Vec<Vec<f64>> = entries
        .windows(2)
        .map(|w| {
            if w[0].values.len() != w[1].values.len() {
                findings.push(format!(
                    "x_max {} → {}: {} vs {} values",
                    w[0].x_max,
                    w[1].x_max,
                    w[0].values.len(),
                    w[1].values.len()
                ));
            }
            w[0].values.iter().zip(&w[1].values).map(|(a, b)| b - a).collect()
        })
        .collect();
    let size = |d: &Vec<f64>| d.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    for (k, w) in differences.windows(2).enumerate() {
        let (prev, next) = (size(&w[0]), size(&w[1]));
        let scale = entries[k + 2].values.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        if next > prev && next > 1e-8 * scale {
            findings.push(format!(
                "differences grow from {prev:e} to {next:e} at x_max = {}: truncation is not converging",
                entries[k + 2].x_max
            ));
        }
    }
    if inner == Task::Certify {
        let tags: Vec<&str> = entries.iter().map(|e| e.result["tag"].as_str().unwrap_or_default()).collect();
        if tags.windows(2).any(|t| t[0] != t[1]) {
            findings.push(format!("certificate changes across truncations: {tags:?}"));
        }
    }

    let mut csv = String::from("x_max,index,value,difference\n");
    for (k, e) in entries.iter().enumerate() {
        for (i, v) in e.values.iter().enumerate() {
            let d = k.checked_sub(1).and_then(|j| differences[j].get(i)).copied();
            let _ = writeln!(csv, "{},{i},{},{}", num(e.x_max), num(*v), d.map(num).unwrap_or_default());
        }
    }
    let report = TruncationReport { inner, entries, differences, findings };
    Ok(TaskOutput { result: to_value(&report)?, csv })
}
