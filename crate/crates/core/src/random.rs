//! Seeded coupling ensembles and the Monte-Carlo estimate of
//! `P(E is an eigenvalue)`, which the theory forces to be 0 or 1.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution as _, Exp, Normal, Uniform};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{CouplingVector, Distribution, EnsembleSpec, Problem};
use crate::spectra::matching_determinant;
use crate::tolerances::Tolerances;

/// Coupling vector number `index` of the ensemble. Each index owns its own
/// ChaCha stream, so the result does not depend on evaluation order.
pub fn sample_couplings(ensemble: &EnsembleSpec, index: u64) -> Result<CouplingVector> {
    let mut rng = ChaCha20Rng::seed_from_u64(ensemble.master_seed);
    rng.set_stream(index);
    let values = ensemble
        .per_site
        .iter()
        .map(|d| {
            let bad = |e: &dyn std::fmt::Display| Error::domain(format!("{d:?}: {e}"));
            Ok(match *d {
                Distribution::Uniform { lo, hi } => Uniform::new(lo, hi).map_err(|e| bad(&e))?.sample(&mut rng),
                Distribution::Normal { mu, sigma } => Normal::new(mu, sigma).map_err(|e| bad(&e))?.sample(&mut rng),
                Distribution::Exponential { rate } => Exp::new(rate).map_err(|e| bad(&e))?.sample(&mut rng),
            })
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(CouplingVector::new(values))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HistogramBin {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampleFailure {
    pub index: u64,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonteCarloResult {
    pub e: f64,
    /// Samples that produced a determinant; failures are excluded.
    pub n_samples: usize,
    pub n_requested: usize,
    pub n_failed: usize,
    pub hits: usize,
    /// `hits / n_samples`; null when every sample failed.
    pub hit_fraction: f64,
    /// Decade bins of the normalized determinant; a residual of exactly 0 lands in the first bin.
    pub residual_histogram: Vec<HistogramBin>,
    pub seed: u64,
    pub eigen_tol: f64,
    pub failures: Vec<SampleFailure>,
}

/// Counts of `values` in decade bins `[10^k, 10^(k+1))` spanning the data.
fn decade_histogram(values: &[f64]) -> Vec<HistogramBin> {
    let positive = values.iter().copied().filter(|&v| v > 0.0);
    let (lo, hi) = positive.fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), v| (l.min(v), h.max(v)));
    if values.is_empty() {
        return Vec::new();
    }
    if !lo.is_finite() {
        return vec![HistogramBin { lo: 0.0, hi: 0.0, count: values.len() }];
    }
    let k0 = lo.log10().floor() as i32;
    let k1 = hi.log10().floor() as i32;
    let mut bins: Vec<HistogramBin> =
        (k0..=k1).map(|k| HistogramBin { lo: 10f64.powi(k), hi: 10f64.powi(k + 1), count: 0 }).collect();
    bins[0].lo = bins[0].lo.min(0.0);
    for &v in values {
        let k = if v > 0.0 { (v.log10().floor() as i32).clamp(k0, k1) } else { k0 };
        bins[(k - k0) as usize].count += 1;
    }
    bins
}

/// Fraction of sampled couplings for which the normalized matching
/// determinant at `E` falls below `eigen_tol`.
pub fn estimate_eigenvalue_probability(
    problem: &Problem,
    ensemble: &EnsembleSpec,
    e: f64,
    n_samples: usize,
    eigen_tol: f64,
    tol: &Tolerances,
) -> Result<MonteCarloResult> {
    if n_samples == 0 {
        return Err(Error::domain("n_samples must be at least 1"));
    }
    if !(eigen_tol > 0.0) {
        return Err(Error::domain("eigen_tol must be positive"));
    }
    problem.validated()?;
    ensemble.check(problem.interactions.len())?;
    let tol = Tolerances { eigen: eigen_tol, ..*tol };

    let outcomes: Vec<std::result::Result<f64, String>> = (0..n_samples as u64)
        .into_par_iter()
        .map(|i| {
            sample_couplings(ensemble, i)
                .and_then(|w| matching_determinant(problem, &w, e, &tol))
                .map(|m| m.normalized)
                .map_err(|err| err.to_string())
        })
        .collect();

    let mut residuals = Vec::with_capacity(n_samples);
    let mut failures = Vec::new();
    for (i, o) in outcomes.into_iter().enumerate() {
        match o {
            Ok(r) if r.is_finite() => residuals.push(r),
            Ok(r) => failures.push(SampleFailure { index: i as u64, error: format!("non-finite determinant {r}") }),
            Err(error) => failures.push(SampleFailure { index: i as u64, error }),
        }
    }
    let hits = residuals.iter().filter(|&&r| r < eigen_tol).count();
    let n_ok = residuals.len();
    Ok(MonteCarloResult {
        e,
        n_samples: n_ok,
        n_requested: n_samples,
        n_failed: failures.len(),
        hits,
        hit_fraction: if n_ok == 0 { f64::NAN } else { hits as f64 / n_ok as f64 },
        residual_histogram: decade_histogram(&residuals),
        seed: ensemble.master_seed,
        eigen_tol,
        failures,
    })
}

/// A grid point whose hit fraction is neither near 0 nor near 1.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Finding {
    pub e: f64,
    pub hit_fraction: f64,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanReport {
    pub results: Vec<MonteCarloResult>,
    pub band_tol: f64,
    pub findings: Vec<Finding>,
}

pub fn dichotomy_scan(
    problem: &Problem,
    ensemble: &EnsembleSpec,
    grid: &[f64],
    n_samples: usize,
    eigen_tol: f64,
    tol: &Tolerances,
) -> Result<ScanReport> {
    let results = grid
        .iter()
        .map(|&e| estimate_eigenvalue_probability(problem, ensemble, e, n_samples, eigen_tol, tol))
        .collect::<Result<Vec<_>>>()?;
    let band = tol.band;
    let findings = results
        .iter()
        .filter(|r| !(r.hit_fraction <= band || r.hit_fraction >= 1.0 - band))
        .map(|r| Finding {
            e: r.e,
            hit_fraction: r.hit_fraction,
            message: format!("hit fraction {} outside the degenerate band (tolerance {band})", r.hit_fraction),
        })
        .collect();
    Ok(ScanReport { results, band_tol: band, findings })
}

#[cfg(test)]
mod tests {
    use std::f64::consts::FRAC_PI_2;

    use super::*;
    use crate::model::{InteractionKind, InteractionSet};
    use crate::spectra::{classify_ae, VerdictTag};

    fn uniform(lo: f64, hi: f64) -> Distribution {
        Distribution::Uniform { lo, hi }
    }

    #[test]
    fn sampling_is_deterministic_per_index() {
        let ens = EnsembleSpec::iid(3, Distribution::Normal { mu: 0.0, sigma: 1.0 }, 42);
        assert_eq!(sample_couplings(&ens, 7).unwrap(), sample_couplings(&ens, 7).unwrap());
        assert_ne!(sample_couplings(&ens, 7).unwrap(), sample_couplings(&ens, 8).unwrap());
        let other = EnsembleSpec { master_seed: 43, ..ens.clone() };
        assert_ne!(sample_couplings(&ens, 7).unwrap(), sample_couplings(&other, 7).unwrap());
    }

    #[test]
    fn marginal_moments() {
        let n = 10_000;
        let ens = EnsembleSpec::iid(1, uniform(0.0, 1.0), 1);
        let mean = (0..n).map(|i| sample_couplings(&ens, i).unwrap().values[0]).sum::<f64>() / n as f64;
        assert!((mean - 0.5).abs() < 0.02, "{mean}");
        let ens = EnsembleSpec::iid(1, Distribution::Normal { mu: 0.0, sigma: 1.0 }, 2);
        let xs: Vec<f64> = (0..n).map(|i| sample_couplings(&ens, i).unwrap().values[0]).collect();
        let m = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1) as f64;
        assert!((0.94..=1.06).contains(&var), "{var}");
        let ens = EnsembleSpec::iid(1, Distribution::Exponential { rate: 2.0 }, 3);
        let mean = (0..n).map(|i| sample_couplings(&ens, i).unwrap().values[0]).sum::<f64>() / n as f64;
        assert!((mean - 0.5).abs() < 0.02, "{mean}");
    }

    #[test]
    fn histogram_counts_everything() {
        let h = decade_histogram(&[0.0, 3e-12, 5e-12, 0.2, 1.5]);
        assert_eq!(h.iter().map(|b| b.count).sum::<usize>(), 5);
        assert_eq!(h[0].lo, 0.0);
        assert_eq!(h[0].count, 3);
        assert_eq!(h.last().unwrap().count, 1);
        assert!(decade_histogram(&[]).is_empty());
    }

    fn midpoint_box(kind: InteractionKind) -> Problem {
        Problem::dirichlet_box(InteractionSet::single(FRAC_PI_2, kind))
    }

    #[test]
    fn dichotomy_examples() {
        let tol = Tolerances::default();
        let ens = EnsembleSpec::iid(1, uniform(-5.0, 5.0), 11);
        let p = midpoint_box(InteractionKind::Delta);
        let r = estimate_eigenvalue_probability(&p, &ens, 4.0, 200, 1e-9, &tol).unwrap();
        assert_eq!((r.hit_fraction, r.n_samples, r.n_failed), (1.0, 200, 0));
        assert_eq!(r.residual_histogram.iter().map(|b| b.count).sum::<usize>(), 200);
        let r = estimate_eigenvalue_probability(&p, &ens, 1.0, 200, 1e-9, &tol).unwrap();
        assert_eq!(r.hit_fraction, 0.0);
        let free = Problem::dirichlet_box(InteractionSet::empty());
        let r =
            estimate_eigenvalue_probability(&free, &EnsembleSpec::iid(0, uniform(0.0, 1.0), 0), 1.0, 10, 1e-9, &tol)
                .unwrap();
        assert_eq!(r.hit_fraction, 1.0);
    }

    #[test]
    fn scan_and_agreement_with_classifier() {
        let tol = Tolerances::default();
        let p = midpoint_box(InteractionKind::Delta);
        let ens = EnsembleSpec::iid(1, uniform(-5.0, 5.0), 5);
        let s = dichotomy_scan(&p, &ens, &[1.0, 4.0, 9.0], 50, 1e-9, &tol).unwrap();
        let fractions: Vec<f64> = s.results.iter().map(|r| r.hit_fraction).collect();
        assert_eq!(fractions, [0.0, 1.0, 0.0]);
        assert!(s.findings.is_empty());
        for (r, e) in s.results.iter().zip([1.0, 4.0, 9.0]) {
            let v = classify_ae(&p, e, tol.node, &tol).unwrap();
            assert_eq!(r.hit_fraction == 1.0, v.tag == VerdictTag::AllOmega);
        }
        let off: Vec<f64> = (0..10).map(|i| 1.5 + i as f64 * 2.3).collect();
        let s = dichotomy_scan(&p, &ens, &off, 20, 1e-9, &tol).unwrap();
        assert!(s.results.iter().all(|r| r.hit_fraction == 0.0));
        assert!(dichotomy_scan(&p, &ens, &[], 20, 1e-9, &tol).unwrap().results.is_empty());
    }

    #[test]
    fn results_do_not_depend_on_thread_count() {
        let tol = Tolerances::default();
        let p = midpoint_box(InteractionKind::DeltaPrime);
        let ens = EnsembleSpec::iid(1, Distribution::Normal { mu: 0.0, sigma: 2.0 }, 99);
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| estimate_eigenvalue_probability(&p, &ens, 2.7, 64, 1e-9, &tol).unwrap())
        };
        let (a, b) = (run(1), run(4));
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    }
}
