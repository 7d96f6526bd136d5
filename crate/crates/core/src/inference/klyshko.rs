//! Efficiency calibration from herald/signal photon-number correlations of
//! a single source, repeated over several pump powers.

use serde::{Deserialize, Serialize};

use super::fit::max_lambda;
use super::lm::{levenberg_marquardt, LmOptions};
use crate::error::{Error, Result};
use crate::sources::tmsv_joint_prob;

/// Pair cutoff used when evaluating the model during calibration.
pub const CALIBRATION_CUTOFF: usize = 60;

/// One cell `(x, y)` of a measured joint distribution: `x` herald photons
/// and `y` signal photons.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JointCell {
    pub x: usize,
    pub y: usize,
    pub prob: f64,
    pub trials: Option<u64>,
    pub count: Option<u64>,
}

/// Joint distribution measured at one pump power.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointDistribution {
    pub power: f64,
    pub cells: Vec<JointCell>,
}

impl JointDistribution {
    /// Model distribution over `x, y <= max_photons`, optionally with Poisson
    /// counts filled in by the caller.
    pub fn model(power: f64, lambda: f64, eta_h: f64, eta_sd: f64, max_photons: usize) -> Self {
        let mut cells = Vec::new();
        for x in 0..=max_photons {
            for y in 0..=max_photons {
                cells.push(JointCell {
                    x,
                    y,
                    prob: tmsv_joint_prob(lambda, eta_h, eta_sd, x, y, CALIBRATION_CUTOFF),
                    trials: None,
                    count: None,
                });
            }
        }
        Self { power, cells }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SourceFit {
    pub power: f64,
    pub lambda: f64,
    pub eta_h: f64,
    /// Signal-arm efficiency including the detector.
    pub eta_sd: f64,
    pub residual: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    /// Sample standard deviation across pump powers.
    pub std: f64,
}

impl Estimate {
    fn from(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = if values.len() > 1 {
            values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        Self { mean, std: var.sqrt() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationResult {
    pub per_power: Vec<SourceFit>,
    pub eta_h: Estimate,
    pub eta_sd: Estimate,
}

fn observed(cell: &JointCell) -> Result<(f64, f64)> {
    if !(cell.prob.is_finite() && cell.prob >= 0.0) {
        return Err(Error::Domain {
            name: "prob",
            value: cell.prob,
            reason: "must be a finite non-negative probability",
        });
    }
    match (cell.count, cell.trials) {
        (Some(c), Some(t)) if t > 0 => {
            let n = t as f64;
            Ok((c as f64 / n, (c.max(1) as f64).sqrt() / n))
        }
        (Some(_), _) => Err(Error::Invalid(format!(
            "cell ({}, {}) has a count but no trials",
            cell.x, cell.y
        ))),
        _ => Ok((cell.prob, 1.0)),
    }
}

fn sigmoid(t: f64) -> f64 {
    1.0 / (1.0 + (-t).exp())
}

fn logit(p: f64) -> f64 {
    let p = p.clamp(1e-6, 1.0 - 1e-6);
    (p / (1.0 - p)).ln()
}

/// Starting point from the first moments and the thermal relation
/// `<xy> / (<x><y>) = 2 + 1/n` for a squeezed vacuum with mean pair number `n`.
fn moment_guess(obs: &[(usize, usize, f64)]) -> Result<(f64, f64, f64)> {
    let total: f64 = obs.iter().map(|o| o.2).sum();
    let nonvacuum: f64 = obs.iter().filter(|o| o.0 + o.1 > 0).map(|o| o.2).sum();
    if total <= 0.0 || nonvacuum <= 0.0 {
        return Err(Error::DegenerateData(
            "joint distribution has no mass outside vacuum".into(),
        ));
    }
    let mx = obs.iter().map(|o| o.0 as f64 * o.2).sum::<f64>() / total;
    let my = obs.iter().map(|o| o.1 as f64 * o.2).sum::<f64>() / total;
    if mx <= 0.0 || my <= 0.0 {
        return Err(Error::DegenerateData(
            "no photons in one arm; its efficiency is not identifiable".into(),
        ));
    }
    let mxy = obs.iter().map(|o| (o.0 * o.1) as f64 * o.2).sum::<f64>() / total;
    let ratio = mxy / (mx * my);
    let mean_pairs = if ratio > 2.0 + 1e-6 {
        1.0 / (ratio - 2.0)
    } else {
        mx.max(my)
    };
    let mean_pairs = mean_pairs.max(mx).max(my);
    let lambda = (mean_pairs / (1.0 + mean_pairs)).sqrt();
    Ok((lambda, mx / mean_pairs, my / mean_pairs))
}

/// Three-parameter fit `(lambda, eta_h, eta_sd)` of one joint distribution.
pub fn fit_joint_distribution(dist: &JointDistribution, options: LmOptions) -> Result<SourceFit> {
    if dist.cells.len() < 3 {
        return Err(Error::DegenerateData(format!(
            "{} cells for three parameters",
            dist.cells.len()
        )));
    }
    let mut obs = Vec::with_capacity(dist.cells.len());
    let mut sigma = Vec::with_capacity(dist.cells.len());
    for cell in &dist.cells {
        let (o, s) = observed(cell)?;
        obs.push((cell.x, cell.y, o));
        sigma.push(s);
    }
    let (l0, h0, s0) = moment_guess(&obs)?;
    let lambda_max = max_lambda(CALIBRATION_CUTOFF);
    let unpack = |t: &[f64]| (lambda_max * sigmoid(t[0]), sigmoid(t[1]), sigmoid(t[2]));
    let residuals = |t: &[f64]| -> Result<Vec<f64>> {
        let (l, h, s) = unpack(t);
        Ok(obs
            .iter()
            .zip(&sigma)
            .map(|(&(x, y, o), sd)| (o - tmsv_joint_prob(l, h, s, x, y, CALIBRATION_CUTOFF)) / sd)
            .collect())
    };
    let theta0 = [logit(l0 / lambda_max), logit(h0), logit(s0)];
    let out = levenberg_marquardt(residuals, &theta0, options)?;
    let (lambda, eta_h, eta_sd) = unpack(&out.x);
    Ok(SourceFit {
        power: dist.power,
        lambda,
        eta_h,
        eta_sd,
        residual: out.cost,
        converged: out.converged,
    })
}

/// Fits every pump power separately and aggregates the efficiencies.
pub fn klyshko_calibrate(dists: &[JointDistribution]) -> Result<CalibrationResult> {
    if dists.len() < 2 {
        return Err(Error::Invalid(format!(
            "calibration needs at least two pump powers, got {}",
            dists.len()
        )));
    }
    let per_power = dists
        .iter()
        .map(|d| fit_joint_distribution(d, LmOptions::default()))
        .collect::<Result<Vec<_>>>()?;
    let eta_h: Vec<f64> = per_power.iter().map(|f| f.eta_h).collect();
    let eta_sd: Vec<f64> = per_power.iter().map(|f| f.eta_sd).collect();
    Ok(CalibrationResult {
        eta_h: Estimate::from(&eta_h),
        eta_sd: Estimate::from(&eta_sd),
        per_power,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn noiseless_distribution_round_trips() {
        let dist = JointDistribution::model(1.0, 0.45, 0.47, 0.56, 8);
        let fit = fit_joint_distribution(&dist, LmOptions::default()).unwrap();
        assert!(fit.converged);
        assert!((fit.lambda - 0.45).abs() < 1e-6);
        assert!((fit.eta_h - 0.47).abs() < 1e-6);
        assert!((fit.eta_sd - 0.56).abs() < 1e-6);
    }

    #[test]
    fn lossless_source_calibrates_to_unity() {
        let dists: Vec<_> = [0.2, 0.4]
            .iter()
            .map(|&l| JointDistribution::model(l, l, 1.0, 1.0, 8))
            .collect();
        let cal = klyshko_calibrate(&dists).unwrap();
        assert!((cal.eta_h.mean - 1.0).abs() < 0.01);
        assert!((cal.eta_sd.mean - 1.0).abs() < 0.01);
    }

    #[test]
    fn vacuum_only_data_is_degenerate() {
        let cells = vec![
            JointCell {
                x: 0,
                y: 0,
                prob: 1.0,
                trials: None,
                count: None,
            },
            JointCell {
                x: 1,
                y: 0,
                prob: 0.0,
                trials: None,
                count: None,
            },
            JointCell {
                x: 0,
                y: 1,
                prob: 0.0,
                trials: None,
                count: None,
            },
        ];
        let dist = JointDistribution { power: 1.0, cells };
        assert!(matches!(
            klyshko_calibrate(&[dist.clone(), dist]),
            Err(Error::DegenerateData(_))
        ));
    }

    #[test]
    fn single_power_is_rejected() {
        let dist = JointDistribution::model(1.0, 0.3, 0.5, 0.5, 5);
        assert!(klyshko_calibrate(&[dist]).is_err());
    }
}
