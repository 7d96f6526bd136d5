//! Classical Fisher information of photon counting on the heralded rates.
//!
//! Without post-selection the probabilities are conditioned on the herald
//! outcome only. With post-selection only outcomes with `s1 + s2 = h1 + h2`
//! are kept and renormalized among themselves. Phase derivatives are
//! evaluated analytically from the trigonometric powers of the transition
//! amplitudes and agree with central differences of step [`FD_STEP`].
//! Outcomes whose probability falls below [`PROBABILITY_FLOOR`] are left out
//! of the sum, which can only lower `F`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qfi::probe_qfi_with_loss;
use crate::rates::{auto_outcome_cutoff, RateModel, RateOptions, SignalWeights};
use crate::sources::{ExperimentParams, Source};

pub const FD_STEP: f64 = 1e-5;
pub const PROBABILITY_FLOOR: f64 = 1e-14;
/// Tail of the herald-conditioned photon distribution left outside the
/// outcome table when the cutoff is chosen automatically.
pub const AUTO_CUTOFF_TAIL: f64 = 1e-12;

/// What the Fisher information is divided by to form `F_tilde`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PhotonReference {
    /// Mean number of detected signal photons.
    #[default]
    Detected,
    /// Detected photons scaled back by the mean detector efficiency.
    InsideInterferometer,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FisherOptions {
    pub postselect: bool,
    pub distinguishable: bool,
    pub reference: PhotonReference,
    pub max_outcome: Option<usize>,
    pub rate: RateOptions,
}

impl Default for FisherOptions {
    fn default() -> Self {
        Self {
            postselect: false,
            distinguishable: true,
            reference: PhotonReference::Detected,
            max_outcome: None,
            rate: RateOptions::default(),
        }
    }
}

impl FisherOptions {
    pub fn postselected(mut self, on: bool) -> Self {
        self.postselect = on;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FisherPoint {
    pub phi: f64,
    pub fisher: f64,
    pub mean_detected: f64,
    pub f_tilde: f64,
}

/// Fisher information evaluator for one herald outcome and parameter set.
pub struct FisherEvaluator {
    model: RateModel,
    h1: usize,
    h2: usize,
    max_outcome: usize,
    weights: SignalWeights,
    herald_probability: f64,
    options: FisherOptions,
}

impl FisherEvaluator {
    pub fn new(h1: usize, h2: usize, params: &ExperimentParams, options: FisherOptions) -> Result<Self> {
        let model = RateModel::new(*params, options.rate, options.distinguishable)?;
        let max_outcome = options
            .max_outcome
            .unwrap_or_else(|| auto_outcome_cutoff(params, h1, h2, AUTO_CUTOFF_TAIL))
            .max(h1 + h2);
        let weights = model.signal_weights(h1, h2, max_outcome);
        let herald_probability =
            params.source(Source::One).herald_marginal(h1) * params.source(Source::Two).herald_marginal(h2);
        Ok(Self {
            model,
            h1,
            h2,
            max_outcome,
            weights,
            herald_probability,
            options,
        })
    }

    pub fn max_outcome(&self) -> usize {
        self.max_outcome
    }

    pub fn herald_probability(&self) -> f64 {
        self.herald_probability
    }

    /// Included outcomes `(s1, s2, p)` with `p` conditioned per the options.
    /// Empty when the herald outcome has no support.
    pub fn conditional_probabilities(&self, phi: f64) -> Vec<(usize, usize, f64)> {
        self.conditional_with_derivative(phi)
            .into_iter()
            .map(|(a, b, p, _)| (a, b, p))
            .collect()
    }

    /// Included outcomes `(s1, s2, p, dp/dphi)`.
    pub fn conditional_with_derivative(&self, phi: f64) -> Vec<(usize, usize, f64, f64)> {
        let table = self.model.outcome_table(&self.weights, self.max_outcome, phi);
        if self.options.postselect {
            let n = self.h1 + self.h2;
            let included: Vec<(usize, usize, f64, f64)> = (0..=n)
                .map(|s1| (s1, n - s1, table.get(s1, n - s1), table.derivative(s1, n - s1)))
                .collect();
            let norm: f64 = included.iter().map(|x| x.2).sum();
            let dnorm: f64 = included.iter().map(|x| x.3).sum();
            if norm <= 0.0 {
                return Vec::new();
            }
            included
                .into_iter()
                .map(|(a, b, p, dp)| (a, b, p / norm, (dp * norm - p * dnorm) / (norm * norm)))
                .collect()
        } else {
            if self.herald_probability <= 0.0 {
                return Vec::new();
            }
            let z = self.herald_probability;
            table
                .iter()
                .map(|(a, b, p)| (a, b, p / z, table.derivative(a, b) / z))
                .collect()
        }
    }

    /// Central-difference derivatives of [`FisherEvaluator::conditional_probabilities`].
    pub fn finite_difference_derivatives(&self, phi: f64) -> Vec<f64> {
        let plus = self.conditional_probabilities(phi + FD_STEP);
        let minus = self.conditional_probabilities(phi - FD_STEP);
        plus.iter()
            .zip(&minus)
            .map(|(a, b)| (a.2 - b.2) / (2.0 * FD_STEP))
            .collect()
    }

    pub fn point(&self, phi: f64) -> FisherPoint {
        let center = self.conditional_with_derivative(phi);
        if center.is_empty() {
            return FisherPoint {
                phi,
                fisher: 0.0,
                mean_detected: 0.0,
                f_tilde: 0.0,
            };
        }
        let mut fisher = 0.0;
        let mut mean = 0.0;
        for &(s1, s2, p, dp) in &center {
            mean += (s1 + s2) as f64 * p;
            if p < PROBABILITY_FLOOR {
                continue;
            }
            fisher += dp * dp / p;
        }
        let reference = match self.options.reference {
            PhotonReference::Detected => mean,
            PhotonReference::InsideInterferometer => {
                let p = self.model.params();
                mean / (0.5 * (p.eta_d1 + p.eta_d2))
            }
        };
        let f_tilde = if reference > 0.0 { fisher / reference } else { 0.0 };
        FisherPoint {
            phi,
            fisher,
            mean_detected: mean,
            f_tilde,
        }
    }

    /// Maximum of `F_tilde` over `phi in [0, pi]` (the curves are even):
    /// grid search followed by golden-section refinement.
    pub fn max_f_tilde(&self, grid_points: usize) -> (f64, f64) {
        let grid: Vec<f64> = (0..grid_points)
            .map(|i| std::f64::consts::PI * i as f64 / (grid_points - 1) as f64)
            .collect();
        let values: Vec<f64> = grid.iter().map(|&phi| self.point(phi).f_tilde).collect();
        let (best, _) = values.iter().enumerate().fold(
            (0, f64::MIN),
            |(bi, bv), (i, &v)| if v > bv { (i, v) } else { (bi, bv) },
        );
        let lo = grid[best.saturating_sub(1)];
        let hi = grid[(best + 1).min(grid.len() - 1)];
        let f = |phi: f64| self.point(phi).f_tilde;
        let (phi, value) = golden_section_max(f, lo, hi, 1e-7);
        if value >= values[best] {
            (phi, value)
        } else {
            (grid[best], values[best])
        }
    }
}

fn golden_section_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let ratio = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - ratio * (b - a);
    let mut d = a + ratio * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while (b - a).abs() > tol {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - ratio * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + ratio * (b - a);
            fd = f(d);
        }
    }
    let x = 0.5 * (a + b);
    (x, f(x))
}

/// Fisher information of photon counting for herald `(h1, h2)` at `phi`.
pub fn cfi(h1: usize, h2: usize, phi: f64, params: &ExperimentParams, options: FisherOptions) -> Result<f64> {
    Ok(FisherEvaluator::new(h1, h2, params, options)?.point(phi).fisher)
}

/// Mean number of detected signal photons over the included outcomes.
pub fn mean_detected(h1: usize, h2: usize, phi: f64, params: &ExperimentParams, options: FisherOptions) -> Result<f64> {
    let eval = FisherEvaluator::new(h1, h2, params, options)?;
    Ok(eval
        .conditional_probabilities(phi)
        .iter()
        .map(|&(s1, s2, p)| (s1 + s2) as f64 * p)
        .sum())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FisherCurve {
    pub phi: Vec<f64>,
    pub fisher: Vec<f64>,
    pub f_tilde: Vec<f64>,
    pub band_lo: Option<Vec<f64>>,
    pub band_hi: Option<Vec<f64>>,
    pub postselected: bool,
}

impl FisherCurve {
    pub fn len(&self) -> usize {
        self.phi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phi.is_empty()
    }
}

pub fn fisher_per_photon_curve(
    h1: usize,
    h2: usize,
    phi_grid: &[f64],
    params: &ExperimentParams,
    options: FisherOptions,
) -> Result<FisherCurve> {
    let eval = FisherEvaluator::new(h1, h2, params, options)?;
    let points: Vec<FisherPoint> = phi_grid.iter().map(|&phi| eval.point(phi)).collect();
    Ok(FisherCurve {
        phi: phi_grid.to_vec(),
        fisher: points.iter().map(|p| p.fisher).collect(),
        f_tilde: points.iter().map(|p| p.f_tilde).collect(),
        band_lo: None,
        band_hi: None,
        postselected: options.postselect,
    })
}

/// Grid argmax of `F_tilde` with a parabolic refinement through the
/// neighbours. Ties go to the smallest `phi >= 0`, then to the `phi < 0`
/// closest to zero.
pub fn max_fisher_over_phase(curve: &FisherCurve) -> Result<(f64, f64)> {
    if curve.is_empty() {
        return Err(Error::Invalid("empty Fisher curve".into()));
    }
    let values = &curve.f_tilde;
    let top = values.iter().cloned().fold(f64::MIN, f64::max);
    let tie = 1e-12 * top.abs().max(1.0);
    let best = (0..values.len())
        .filter(|&i| values[i] >= top - tie)
        .min_by(|&a, &b| {
            let key = |i: usize| {
                let phi = curve.phi[i];
                if phi >= 0.0 {
                    (0, phi)
                } else {
                    (1, -phi)
                }
            };
            let (ka, kb) = (key(a), key(b));
            ka.0.cmp(&kb.0)
                .then(ka.1.partial_cmp(&kb.1).unwrap_or(std::cmp::Ordering::Equal))
        })
        .expect("nonempty");
    if best == 0 || best + 1 == values.len() {
        return Ok((curve.phi[best], values[best]));
    }
    let (x0, x1, x2) = (curve.phi[best - 1], curve.phi[best], curve.phi[best + 1]);
    let (y0, y1, y2) = (values[best - 1], values[best], values[best + 1]);
    let d01 = (y1 - y0) / (x1 - x0);
    let d12 = (y2 - y1) / (x2 - x1);
    let curvature = (d12 - d01) / (x2 - x0);
    if curvature >= 0.0 {
        return Ok((x1, y1));
    }
    // vertex of the interpolating parabola
    let slope_at_x1 = d01 + curvature * (x1 - x0);
    let step = -slope_at_x1 / (2.0 * curvature);
    let x = (x1 + step).clamp(x0, x2);
    let y = y1 + slope_at_x1 * (x - x1) + curvature * (x - x1) * (x - x1);
    Ok((x, y.max(y1)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ComparisonRow {
    pub delta: usize,
    pub h1: usize,
    pub h2: usize,
    pub eta_s: f64,
    pub max_f_tilde: f64,
    pub phi_at_max: f64,
    pub qfi_per_photon: f64,
}

/// Parameters with ideal heralding and detection, equal signal loss.
pub fn ideal_heralding_params(eta_s: f64, max_herald: usize) -> ExperimentParams {
    ExperimentParams {
        eta_s1: eta_s,
        eta_s2: eta_s,
        ..ExperimentParams::ideal(0.5)
    }
    .with_cutoff(max_herald.max(40))
}

/// Photon counting against the QFI for every `N`-photon heralded probe.
pub fn cfi_vs_qfi_comparison(photons: usize, eta_grid: &[f64]) -> Result<Vec<ComparisonRow>> {
    let mut rows = Vec::new();
    for &eta_s in eta_grid {
        let params = ideal_heralding_params(eta_s, photons);
        for h2 in 0..=photons / 2 {
            let h1 = photons - h2;
            let eval = FisherEvaluator::new(h1, h2, &params, FisherOptions::default())?;
            let (phi_at_max, max_f_tilde) = eval.max_f_tilde(61);
            let q = probe_qfi_with_loss(h1, h2, eta_s)?;
            rows.push(ComparisonRow {
                delta: h1 - h2,
                h1,
                h2,
                eta_s,
                max_f_tilde,
                phi_at_max,
                qfi_per_photon: q / (eta_s * photons as f64),
            });
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ThresholdRow {
    pub eta: f64,
    pub overlap: f64,
    pub max_f_tilde: f64,
}

/// Maximum `F_tilde` without post-selection for efficiency `eta` in herald
/// and signal modes of both sources, ideal detectors.
pub fn max_f_tilde_uniform(h1: usize, h2: usize, lambda: f64, eta: f64, overlap: f64) -> Result<f64> {
    let params = ExperimentParams::uniform(lambda, eta, overlap);
    let eval = FisherEvaluator::new(h1, h2, &params, FisherOptions::default())?;
    Ok(eval.max_f_tilde(31).1)
}

pub fn threshold_map(
    h1: usize,
    h2: usize,
    lambda: f64,
    eta_grid: &[f64],
    overlap_grid: &[f64],
) -> Result<Vec<ThresholdRow>> {
    let mut rows = Vec::with_capacity(eta_grid.len() * overlap_grid.len());
    for &overlap in overlap_grid {
        for &eta in eta_grid {
            rows.push(ThresholdRow {
                eta,
                overlap,
                max_f_tilde: max_f_tilde_uniform(h1, h2, lambda, eta, overlap)?,
            });
        }
    }
    Ok(rows)
}

/// Efficiency at which the maximum `F_tilde` reaches the shot-noise limit,
/// by bisection on `[lo, hi]`. `None` when the limit is not crossed there.
pub fn shot_noise_crossing(
    h1: usize,
    h2: usize,
    lambda: f64,
    overlap: f64,
    lo: f64,
    hi: f64,
    tol: f64,
) -> Result<Option<f64>> {
    let f = |eta: f64| max_f_tilde_uniform(h1, h2, lambda, eta, overlap).map(|v| v - 1.0);
    let (mut a, mut b) = (lo, hi);
    let (fa, fb) = (f(a)?, f(b)?);
    if fa.signum() == fb.signum() {
        return Ok(None);
    }
    let rising = fb > fa;
    while b - a > tol {
        let mid = 0.5 * (a + b);
        let fm = f(mid)?;
        if (fm < 0.0) == rising {
            a = mid;
        } else {
            b = mid;
        }
    }
    Ok(Some(0.5 * (a + b)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ideal_lossless() -> ExperimentParams {
        ideal_heralding_params(1.0, 8)
    }

    #[test]
    fn analytic_derivatives_match_central_differences() {
        let params = ExperimentParams {
            lambda1: 0.4,
            lambda2: 0.35,
            eta_h1: 0.7,
            eta_h2: 0.6,
            eta_s1: 0.8,
            eta_s2: 0.75,
            eta_d1: 0.95,
            eta_d2: 0.9,
            overlap: 0.8,
            cutoff: 40,
        };
        for post in [false, true] {
            let ev = FisherEvaluator::new(2, 1, &params, FisherOptions::default().postselected(post)).unwrap();
            for phi in [0.37, 1.3, 2.2] {
                let an = ev.conditional_with_derivative(phi);
                let fd = ev.finite_difference_derivatives(phi);
                let scale = an.iter().map(|x| x.3.abs()).fold(0.0, f64::max);
                for (a, f) in an.iter().zip(&fd) {
                    assert!((a.3 - f).abs() <= 1e-6 * scale, "{post} {phi}: {} vs {f}", a.3);
                }
            }
        }
    }

    #[test]
    fn hom_probe_saturates_qfi() {
        let f = cfi(1, 1, 0.7, &ideal_lossless(), FisherOptions::default()).unwrap();
        assert!((f - 4.0).abs() < 1e-6, "{f}");
    }

    #[test]
    fn single_source_probe_is_shot_noise_limited() {
        let params = ideal_heralding_params(0.6, 8);
        let eval = FisherEvaluator::new(8, 0, &params, FisherOptions::default()).unwrap();
        for phi in [0.4, 1.3, 2.2] {
            let pt = eval.point(phi);
            assert!((pt.f_tilde - 1.0).abs() < 1e-6, "{pt:?}");
        }
    }

    #[test]
    fn common_turning_point_at_zero() {
        let params = ideal_heralding_params(0.7, 8);
        let pt = FisherEvaluator::new(3, 2, &params, FisherOptions::default())
            .unwrap()
            .point(0.0);
        assert!(pt.f_tilde < 1e-6, "{pt:?}");
    }

    #[test]
    fn mean_detected_scales_with_loss() {
        let lossless = mean_detected(1, 1, 0.3, &ideal_lossless(), FisherOptions::default()).unwrap();
        assert!((lossless - 2.0).abs() < 1e-10);
        let lossy = mean_detected(3, 2, 0.3, &ideal_heralding_params(0.6, 8), FisherOptions::default()).unwrap();
        assert!((lossy - 3.0).abs() < 1e-10);
    }

    #[test]
    fn monotone_curve_returns_endpoint() {
        let curve = FisherCurve {
            phi: vec![0.0, 0.1, 0.2, 0.3],
            fisher: vec![1.0; 4],
            f_tilde: vec![0.1, 0.2, 0.3, 0.4],
            band_lo: None,
            band_hi: None,
            postselected: false,
        };
        assert_eq!(max_fisher_over_phase(&curve).unwrap(), (0.3, 0.4));
    }

    #[test]
    fn ties_prefer_smallest_nonnegative_phase() {
        let curve = FisherCurve {
            phi: vec![-0.2, -0.1, 0.0, 0.1, 0.2],
            fisher: vec![1.0; 5],
            f_tilde: vec![1.0; 5],
            band_lo: None,
            band_hi: None,
            postselected: false,
        };
        assert_eq!(max_fisher_over_phase(&curve).unwrap().0, 0.0);
    }

    #[test]
    fn parabolic_refinement_finds_vertex() {
        let phi: Vec<f64> = (0..11).map(|i| i as f64 * 0.1).collect();
        let f_tilde: Vec<f64> = phi.iter().map(|x| 2.0 - (x - 0.43f64).powi(2)).collect();
        let curve = FisherCurve {
            fisher: f_tilde.clone(),
            phi,
            f_tilde,
            band_lo: None,
            band_hi: None,
            postselected: false,
        };
        let (x, y) = max_fisher_over_phase(&curve).unwrap();
        assert!((x - 0.43).abs() < 1e-12 && (y - 2.0).abs() < 1e-12);
    }
}
