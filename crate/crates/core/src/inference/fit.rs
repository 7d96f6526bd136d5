//! Weighted least-squares fit of the rate model to counted data.

use serde::{Deserialize, Serialize};

use super::lm::{levenberg_marquardt, LmOptions};
use crate::error::{Error, Result};
use crate::rates::{RateModel, RateOptions, RateTable};
use crate::sources::{ExperimentParams, MAX_TRUNCATION_LEAKAGE};

/// Field names of the fittable entries of [`ExperimentParams`].
pub const PARAM_NAMES: [&str; 9] = [
    "lambda1", "lambda2", "eta_h1", "eta_h2", "eta_s1", "eta_s2", "eta_d1", "eta_d2", "overlap",
];

pub fn param_value(params: &ExperimentParams, index: usize) -> f64 {
    match index {
        0 => params.lambda1,
        1 => params.lambda2,
        2 => params.eta_h1,
        3 => params.eta_h2,
        4 => params.eta_s1,
        5 => params.eta_s2,
        6 => params.eta_d1,
        7 => params.eta_d2,
        8 => params.overlap,
        _ => panic!("parameter index {index} out of range"),
    }
}

pub fn set_param_value(params: &mut ExperimentParams, index: usize, value: f64) {
    let slot = match index {
        0 => &mut params.lambda1,
        1 => &mut params.lambda2,
        2 => &mut params.eta_h1,
        3 => &mut params.eta_h2,
        4 => &mut params.eta_s1,
        5 => &mut params.eta_s2,
        6 => &mut params.eta_d1,
        7 => &mut params.eta_d2,
        8 => &mut params.overlap,
        _ => panic!("parameter index {index} out of range"),
    };
    *slot = value;
}

/// Which parameters are held at their initial values during a fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FixedMask {
    pub lambda1: bool,
    pub lambda2: bool,
    pub eta_h1: bool,
    pub eta_h2: bool,
    pub eta_s1: bool,
    pub eta_s2: bool,
    pub eta_d1: bool,
    pub eta_d2: bool,
    pub overlap: bool,
}

impl Default for FixedMask {
    /// Detector efficiencies held, everything else free.
    fn default() -> Self {
        Self {
            eta_d1: true,
            eta_d2: true,
            ..Self::none()
        }
    }
}

impl FixedMask {
    pub fn none() -> Self {
        Self {
            lambda1: false,
            lambda2: false,
            eta_h1: false,
            eta_h2: false,
            eta_s1: false,
            eta_s2: false,
            eta_d1: false,
            eta_d2: false,
            overlap: false,
        }
    }

    pub fn is_fixed(&self, index: usize) -> bool {
        [
            self.lambda1,
            self.lambda2,
            self.eta_h1,
            self.eta_h2,
            self.eta_s1,
            self.eta_s2,
            self.eta_d1,
            self.eta_d2,
            self.overlap,
        ][index]
    }

    pub fn free_indices(&self) -> Vec<usize> {
        (0..PARAM_NAMES.len()).filter(|&i| !self.is_fixed(i)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub params: ExperimentParams,
    pub fixed_mask: FixedMask,
    /// Sum of squared normalized residuals.
    pub residual: f64,
    pub converged: bool,
    pub iterations: usize,
    /// Condition number of the Gauss-Newton Hessian in the transformed
    /// coordinates; large values flag confounded parameters.
    pub hessian_condition: f64,
    pub distinguishable: bool,
    pub points: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FitOptions {
    pub lm: LmOptions,
    pub rate: RateOptions,
}

/// Largest gain whose thermal tail beyond `cutoff` stays within the
/// truncation-leakage limit.
pub fn max_lambda(cutoff: usize) -> f64 {
    (MAX_TRUNCATION_LEAKAGE.ln() / (2.0 * (cutoff + 1) as f64)).exp() * (1.0 - 1e-12)
}

fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

fn logit(p: f64) -> f64 {
    let p = p.clamp(1e-9, 1.0 - 1e-9);
    (p / (1.0 - p)).ln()
}

/// Observed value and standard deviation of one data point.
fn observation(point: &crate::rates::RatePoint) -> Result<(f64, f64)> {
    match (point.count, point.trials) {
        (Some(count), Some(trials)) if trials > 0 => {
            let n = trials as f64;
            Ok((count as f64 / n, (count.max(1) as f64).sqrt() / n))
        }
        (Some(_), _) => Err(Error::Invalid(format!(
            "point at phi={} has a count but no trials",
            point.phi
        ))),
        (None, Some(trials)) if trials > 0 => {
            let n = trials as f64;
            Ok((point.prob, (point.prob * n).max(1.0).sqrt() / n))
        }
        _ => Ok((point.prob, 1.0)),
    }
}

/// Data grouped by herald outcome and phase so each model table is built once.
pub(crate) struct PreparedData {
    groups: Vec<Group>,
    observed: Vec<f64>,
    sigma: Vec<f64>,
}

struct Group {
    h1: usize,
    h2: usize,
    max_outcome: usize,
    phi: f64,
    /// `(point index, s1, s2)`.
    members: Vec<(usize, usize, usize)>,
}

impl PreparedData {
    pub(crate) fn new(data: &RateTable) -> Result<Self> {
        let mut groups: Vec<Group> = Vec::new();
        let mut observed = Vec::with_capacity(data.points.len());
        let mut sigma = Vec::with_capacity(data.points.len());
        for (i, p) in data.points.iter().enumerate() {
            if !p.phi.is_finite() {
                return Err(Error::Invalid(format!("non-finite phase in point {i}")));
            }
            let (obs, sd) = observation(p)?;
            observed.push(obs);
            sigma.push(sd);
            match groups
                .iter_mut()
                .find(|g| g.h1 == p.h1 && g.h2 == p.h2 && g.phi == p.phi)
            {
                Some(g) => g.members.push((i, p.s1, p.s2)),
                None => groups.push(Group {
                    h1: p.h1,
                    h2: p.h2,
                    max_outcome: 0,
                    phi: p.phi,
                    members: vec![(i, p.s1, p.s2)],
                }),
            }
        }
        // one outcome extent per herald so every phase shares signal weights
        let extents: Vec<((usize, usize), usize)> = {
            let mut out: Vec<((usize, usize), usize)> = Vec::new();
            for g in &groups {
                let m = g.members.iter().map(|&(_, a, b)| a + b).max().unwrap_or(0);
                match out.iter_mut().find(|(k, _)| *k == (g.h1, g.h2)) {
                    Some((_, e)) => *e = (*e).max(m),
                    None => out.push(((g.h1, g.h2), m)),
                }
            }
            out
        };
        for g in &mut groups {
            g.max_outcome = extents.iter().find(|(k, _)| *k == (g.h1, g.h2)).unwrap().1;
        }
        Ok(Self {
            groups,
            observed,
            sigma,
        })
    }

    pub(crate) fn len(&self) -> usize {
        self.observed.len()
    }

    /// Model probability for every data point, in data order.
    pub(crate) fn predict(
        &self,
        params: &ExperimentParams,
        rate: RateOptions,
        distinguishable: bool,
    ) -> Result<Vec<f64>> {
        let model = RateModel::new(*params, rate, distinguishable)?;
        let mut out = vec![0.0; self.len()];
        let mut weights: Vec<((usize, usize), crate::rates::SignalWeights)> = Vec::new();
        for g in &self.groups {
            let key = (g.h1, g.h2);
            let idx = match weights.iter().position(|(k, _)| *k == key) {
                Some(i) => i,
                None => {
                    weights.push((key, model.signal_weights(g.h1, g.h2, g.max_outcome)));
                    weights.len() - 1
                }
            };
            let table = model.outcome_table(&weights[idx].1, g.max_outcome, g.phi);
            for &(i, s1, s2) in &g.members {
                out[i] = table.get(s1, s2);
            }
        }
        Ok(out)
    }

    fn residuals(&self, params: &ExperimentParams, rate: RateOptions, distinguishable: bool) -> Result<Vec<f64>> {
        let pred = self.predict(params, rate, distinguishable)?;
        Ok(pred
            .iter()
            .zip(&self.observed)
            .zip(&self.sigma)
            .map(|((m, o), s)| (o - m) / s)
            .collect())
    }
}

/// Maps unconstrained coordinates to bounded parameters.
struct Transform {
    template: ExperimentParams,
    free: Vec<usize>,
    lambda_max: f64,
}

impl Transform {
    fn to_params(&self, theta: &[f64]) -> ExperimentParams {
        let mut p = self.template;
        for (&i, &t) in self.free.iter().zip(theta) {
            let v = if i < 2 {
                self.lambda_max * sigmoid(t)
            } else {
                sigmoid(t)
            };
            set_param_value(&mut p, i, v);
        }
        p
    }

    fn to_theta(&self, params: &ExperimentParams) -> Vec<f64> {
        self.free
            .iter()
            .map(|&i| {
                let v = param_value(params, i);
                if i < 2 {
                    logit(v / self.lambda_max)
                } else {
                    logit(v)
                }
            })
            .collect()
    }
}

/// Fits the rate model to `data`, starting from `initial` and holding the
/// parameters flagged in `fixed_mask`.
///
/// The cost is `sum ((count/trials - model) / sigma)^2` with the Poisson
/// variance `sigma^2 = max(count, 1) / trials^2`. Points without counts use
/// `prob` as the observation. Bounded parameters are optimized through a
/// logit transform; gains are bounded by [`max_lambda`] for the configured
/// pair cutoff. Without `distinguishable` the overlap is held at its initial
/// value.
pub fn fit_rates(
    data: &RateTable,
    initial: &ExperimentParams,
    fixed_mask: FixedMask,
    distinguishable: bool,
    options: FitOptions,
) -> Result<FitResult> {
    initial.validate()?;
    let mut mask = fixed_mask;
    if !distinguishable {
        mask.overlap = true;
    }
    let prepared = PreparedData::new(data)?;
    let free = mask.free_indices();
    if prepared.len() < free.len() {
        return Err(Error::DegenerateData(format!(
            "{} data points for {} free parameters",
            prepared.len(),
            free.len()
        )));
    }
    let transform = Transform {
        template: *initial,
        free,
        lambda_max: max_lambda(initial.cutoff),
    };
    let theta0 = transform.to_theta(initial);
    let objective = |theta: &[f64]| prepared.residuals(&transform.to_params(theta), options.rate, distinguishable);
    let outcome = levenberg_marquardt(objective, &theta0, options.lm)?;
    Ok(FitResult {
        params: transform.to_params(&outcome.x),
        fixed_mask: mask,
        residual: outcome.cost,
        converged: outcome.converged,
        iterations: outcome.iterations,
        hessian_condition: outcome.condition_number,
        distinguishable,
        points: prepared.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rates::{fringe_table, Provenance};

    fn noiseless(params: &ExperimentParams, heralds: &[(usize, usize)], trials: u64) -> RateTable {
        let grid: Vec<f64> = (0..9).map(|i| -1.6 + 0.4 * i as f64).collect();
        let mut points = Vec::new();
        for &(h1, h2) in heralds {
            let t = fringe_table(h1, h2, &grid, params, true, Some(3)).unwrap();
            points.extend(t.points.into_iter().map(|mut p| {
                p.trials = Some(trials);
                p
            }));
        }
        RateTable {
            points,
            provenance: Provenance::Modeled,
        }
    }

    fn truth() -> ExperimentParams {
        ExperimentParams {
            lambda1: 0.4,
            lambda2: 0.35,
            eta_h1: 0.6,
            eta_h2: 0.55,
            eta_s1: 0.7,
            eta_s2: 0.65,
            eta_d1: 0.95,
            eta_d2: 0.95,
            overlap: 0.8,
            cutoff: 40,
        }
    }

    #[test]
    fn noiseless_data_is_recovered_exactly() {
        let truth = truth();
        let data = noiseless(&truth, &[(0, 0), (1, 0), (0, 1), (1, 1), (2, 1)], 1_000_000_000);
        let start = ExperimentParams {
            lambda1: 0.3,
            lambda2: 0.3,
            eta_h1: 0.5,
            eta_h2: 0.5,
            eta_s1: 0.5,
            eta_s2: 0.5,
            overlap: 0.6,
            ..truth
        };
        let fit = fit_rates(&data, &start, FixedMask::default(), true, FitOptions::default()).unwrap();
        assert!(fit.converged);
        assert!(fit.residual < 1e-12, "residual {}", fit.residual);
        for i in FixedMask::default().free_indices() {
            let (a, b) = (param_value(&fit.params, i), param_value(&truth, i));
            assert!((a - b).abs() < 1e-6, "{}: {a} vs {b}", PARAM_NAMES[i]);
        }
        assert_eq!(fit.params.eta_d1, 0.95);
    }

    #[test]
    fn fixed_parameters_stay_put() {
        let truth = truth();
        let data = noiseless(&truth, &[(1, 1)], 1_000_000);
        let mask = FixedMask {
            lambda1: true,
            lambda2: true,
            eta_h1: true,
            eta_h2: true,
            eta_s2: true,
            overlap: true,
            ..FixedMask::default()
        };
        let start = ExperimentParams { eta_s1: 0.4, ..truth };
        let fit = fit_rates(&data, &start, mask, true, FitOptions::default()).unwrap();
        assert_eq!(fit.params.lambda1, truth.lambda1);
        assert_eq!(fit.params.overlap, truth.overlap);
        assert!((fit.params.eta_s1 - truth.eta_s1).abs() < 1e-6);
    }

    #[test]
    fn too_few_points_is_degenerate() {
        let data = RateTable {
            points: noiseless(&truth(), &[(1, 1)], 100).points.into_iter().take(3).collect(),
            provenance: Provenance::Synthetic,
        };
        let err = fit_rates(&data, &truth(), FixedMask::default(), true, FitOptions::default()).unwrap_err();
        assert!(matches!(err, Error::DegenerateData(_)));
    }

    #[test]
    fn indistinguishable_fit_holds_overlap() {
        let data = noiseless(&truth(), &[(1, 1)], 1_000_000);
        let fit = fit_rates(&data, &truth(), FixedMask::default(), false, FitOptions::default()).unwrap();
        assert!(fit.fixed_mask.overlap);
        assert_eq!(fit.params.overlap, truth().overlap);
    }

    #[test]
    fn gain_bound_respects_leakage_limit() {
        let l = max_lambda(50);
        assert!(crate::sources::thermal_tail(l, 50) <= MAX_TRUNCATION_LEAKAGE);
    }
}
