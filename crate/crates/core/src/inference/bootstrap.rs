//! Monte-Carlo confidence bands: Poisson resampling around a fitted model,
//! refitting, and recomputing the Fisher curve for every simulated set.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::Serialize;

use super::fit::{fit_rates, param_value, FitOptions, FitResult, PreparedData, PARAM_NAMES};
use crate::error::{Error, Result};
use crate::fisher::{fisher_per_photon_curve, FisherCurve, FisherOptions};
use crate::rates::{fringe_table, Provenance, RateTable};
use crate::sources::ExperimentParams;

/// Random stream for one simulated data set. Stream 0 is reserved for
/// [`synthetic_counts`].
pub fn set_rng(seed: u64, set: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(set as u64 + 1);
    rng
}

fn draw_count(mean: f64, rng: &mut ChaCha8Rng) -> u64 {
    if mean <= 0.0 || !mean.is_finite() {
        return 0;
    }
    // Poisson::new only rejects non-positive or non-finite means
    Poisson::new(mean).expect("positive finite mean").sample(rng) as u64
}

/// Replaces every count in `template` by a Poisson draw with mean
/// `trials * prob[i]`.
pub fn resample(template: &RateTable, probs: &[f64], rng: &mut ChaCha8Rng) -> Result<RateTable> {
    let mut points = template.points.clone();
    for (p, &prob) in points.iter_mut().zip(probs) {
        let trials = p
            .trials
            .ok_or_else(|| Error::Invalid(format!("point at phi={} has no trial count to resample", p.phi)))?;
        p.prob = prob;
        p.count = Some(draw_count(trials as f64 * prob, rng));
    }
    Ok(RateTable {
        points,
        provenance: Provenance::Synthetic,
    })
}

/// Counted synthetic data: every outcome with `s1 + s2 <= max_outcome` for
/// each herald outcome and phase, `trials` pulses per phase setting.
pub fn synthetic_counts(
    params: &ExperimentParams,
    heralds: &[(usize, usize)],
    phi_grid: &[f64],
    max_outcome: usize,
    trials: u64,
    distinguishable: bool,
    seed: u64,
) -> Result<RateTable> {
    let mut points = Vec::new();
    for &(h1, h2) in heralds {
        let t = fringe_table(h1, h2, phi_grid, params, distinguishable, Some(max_outcome))?;
        points.extend(t.points.into_iter().map(|mut p| {
            p.trials = Some(trials);
            p
        }));
    }
    let template = RateTable {
        points,
        provenance: Provenance::Synthetic,
    };
    let probs: Vec<f64> = template.points.iter().map(|p| p.prob).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    resample(&template, &probs, &mut rng)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BootstrapOptions {
    pub n_sets: usize,
    pub seed: u64,
    /// Herald outcome whose Fisher curve is banded.
    pub probe: (usize, usize),
    pub phi_grid: Vec<f64>,
    pub fisher: FisherOptions,
    pub fit: FitOptions,
    /// Worker threads; `None` uses the available parallelism.
    pub threads: Option<usize>,
}

impl BootstrapOptions {
    pub fn new(seed: u64, probe: (usize, usize), phi_grid: Vec<f64>) -> Self {
        Self {
            n_sets: 50,
            seed,
            probe,
            phi_grid,
            fisher: FisherOptions::default(),
            fit: FitOptions::default(),
            threads: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BootstrapResult {
    pub seed: u64,
    pub n_sets: usize,
    pub probe: (usize, usize),
    /// Fisher curve of the original fit with the pointwise mean +/- one
    /// standard deviation over the refitted sets as its band.
    pub curve: FisherCurve,
    /// Sets whose refit did not converge.
    pub dropped: Vec<usize>,
    pub parameter_mean: BTreeMap<String, f64>,
    pub parameter_std: BTreeMap<String, f64>,
    /// Fewer than two usable sets: the band has zero width.
    pub degenerate_band: bool,
}

struct SetOutcome {
    params: ExperimentParams,
    f_tilde: Vec<f64>,
}

fn run_set(
    fit: &FitResult,
    template: &RateTable,
    probs: &[f64],
    options: &BootstrapOptions,
    set: usize,
) -> Result<Option<SetOutcome>> {
    let mut rng = set_rng(options.seed, set);
    let data = resample(template, probs, &mut rng)?;
    let refit = match fit_rates(&data, &fit.params, fit.fixed_mask, fit.distinguishable, options.fit) {
        Ok(r) if r.converged => r,
        _ => return Ok(None),
    };
    let fisher = FisherOptions {
        distinguishable: fit.distinguishable,
        ..options.fisher
    };
    let curve = fisher_per_photon_curve(
        options.probe.0,
        options.probe.1,
        &options.phi_grid,
        &refit.params,
        fisher,
    )?;
    Ok(Some(SetOutcome {
        params: refit.params,
        f_tilde: curve.f_tilde,
    }))
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Draws `n_sets` Poisson data sets around the fitted model (same points and
/// trials as `data`), refits each, and bands the probe's `F_tilde` curve.
/// Each set uses its own random stream, so the result does not depend on the
/// number of threads.
pub fn bootstrap_fisher(fit: &FitResult, data: &RateTable, options: &BootstrapOptions) -> Result<BootstrapResult> {
    if !fit.converged {
        return Err(Error::Invalid("bootstrap needs a converged fit".into()));
    }
    if options.n_sets == 0 {
        return Err(Error::Invalid("n_sets must be at least 1".into()));
    }
    if options.phi_grid.is_empty() {
        return Err(Error::Invalid("empty phase grid".into()));
    }
    let prepared = PreparedData::new(data)?;
    let probs = prepared.predict(&fit.params, options.fit.rate, fit.distinguishable)?;

    let threads = options
        .threads
        .unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1))
        .clamp(1, options.n_sets);
    let mut outcomes: Vec<Option<Result<Option<SetOutcome>>>> = (0..options.n_sets).map(|_| None).collect();
    std::thread::scope(|scope| {
        let handles: Vec<_> = (0..threads)
            .map(|w| {
                let probs = &probs;
                scope.spawn(move || {
                    (w..options.n_sets)
                        .step_by(threads)
                        .map(|set| (set, run_set(fit, data, probs, options, set)))
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        for h in handles {
            for (set, r) in h.join().expect("bootstrap worker panicked") {
                outcomes[set] = Some(r);
            }
        }
    });

    let mut kept = Vec::new();
    let mut dropped = Vec::new();
    for (set, r) in outcomes.into_iter().enumerate() {
        match r.expect("every set is evaluated")? {
            Some(o) => kept.push(o),
            None => dropped.push(set),
        }
    }
    if kept.is_empty() {
        return Err(Error::Invalid("no bootstrap refit converged".into()));
    }

    let fisher = FisherOptions {
        distinguishable: fit.distinguishable,
        ..options.fisher
    };
    let mut curve = fisher_per_photon_curve(options.probe.0, options.probe.1, &options.phi_grid, &fit.params, fisher)?;
    let mut lo = Vec::with_capacity(curve.len());
    let mut hi = Vec::with_capacity(curve.len());
    for k in 0..curve.len() {
        let column: Vec<f64> = kept.iter().map(|o| o.f_tilde[k]).collect();
        let (m, s) = mean_std(&column);
        lo.push(m - s);
        hi.push(m + s);
    }
    curve.band_lo = Some(lo);
    curve.band_hi = Some(hi);

    let mut parameter_mean = BTreeMap::new();
    let mut parameter_std = BTreeMap::new();
    for i in fit.fixed_mask.free_indices() {
        let column: Vec<f64> = kept.iter().map(|o| param_value(&o.params, i)).collect();
        let (m, s) = mean_std(&column);
        parameter_mean.insert(PARAM_NAMES[i].to_string(), m);
        parameter_std.insert(PARAM_NAMES[i].to_string(), s);
    }

    Ok(BootstrapResult {
        seed: options.seed,
        n_sets: options.n_sets,
        probe: options.probe,
        curve,
        dropped,
        parameter_mean,
        parameter_std,
        degenerate_band: kept.len() < 2,
    })
}
