//! Two-mode squeezed vacuum sources, binomial loss channels and the heralded
//! probe they produce.

use serde::{Deserialize, Serialize};

use crate::combinatorics::{binomial_pmf, ln_binomial};
use crate::density::TwoModeMixedState;
use crate::error::{check_squeezing, check_unit_interval, Error, Result};

/// Default pair-number truncation of the squeezed-vacuum sums.
pub const DEFAULT_PAIR_CUTOFF: usize = 50;
/// Largest acceptable thermal tail beyond the pair cutoff.
pub const MAX_TRUNCATION_LEAKAGE: f64 = 1e-8;
const HERALD_UNDERFLOW: f64 = 1e-300;

/// `<n> = lambda^2 / (1 - lambda^2)` photons in each beam.
pub fn mean_photons(lambda: f64) -> Result<f64> {
    check_squeezing("lambda", lambda)?;
    let l2 = lambda * lambda;
    Ok(l2 / (1.0 - l2))
}

/// Probability mass of the pair-number distribution above `cutoff`.
pub fn thermal_tail(lambda: f64, cutoff: usize) -> f64 {
    (lambda * lambda).powi(cutoff as i32 + 1)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TmsvParams {
    pub lambda: f64,
}

impl TmsvParams {
    pub fn new(lambda: f64) -> Result<Self> {
        check_squeezing("lambda", lambda)?;
        Ok(Self { lambda })
    }

    pub fn mean_photons(&self) -> f64 {
        let l2 = self.lambda * self.lambda;
        l2 / (1.0 - l2)
    }

    /// `(1 - lambda^2) lambda^(2n)`.
    pub fn pair_probability(&self, n: usize) -> f64 {
        let l2 = self.lambda * self.lambda;
        (1.0 - l2) * l2.powi(n as i32)
    }
}

/// Gains, transmissivities and source overlap of the whole setup.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentParams {
    pub lambda1: f64,
    pub lambda2: f64,
    pub eta_h1: f64,
    pub eta_h2: f64,
    pub eta_s1: f64,
    pub eta_s2: f64,
    pub eta_d1: f64,
    pub eta_d2: f64,
    /// Mode overlap between the two sources' signal photons.
    pub overlap: f64,
    #[serde(default = "default_cutoff")]
    pub cutoff: usize,
}

fn default_cutoff() -> usize {
    DEFAULT_PAIR_CUTOFF
}

impl Default for ExperimentParams {
    fn default() -> Self {
        Self::ideal(0.25)
    }
}

impl ExperimentParams {
    /// Lossless, perfectly overlapping sources with equal gain.
    pub fn ideal(lambda: f64) -> Self {
        Self {
            lambda1: lambda,
            lambda2: lambda,
            eta_h1: 1.0,
            eta_h2: 1.0,
            eta_s1: 1.0,
            eta_s2: 1.0,
            eta_d1: 1.0,
            eta_d2: 1.0,
            overlap: 1.0,
            cutoff: DEFAULT_PAIR_CUTOFF,
        }
    }

    /// Same efficiency in herald and signal modes of both sources, ideal
    /// detection.
    pub fn uniform(lambda: f64, eta: f64, overlap: f64) -> Self {
        Self {
            eta_h1: eta,
            eta_h2: eta,
            eta_s1: eta,
            eta_s2: eta,
            overlap,
            ..Self::ideal(lambda)
        }
    }

    pub fn with_cutoff(mut self, cutoff: usize) -> Self {
        self.cutoff = cutoff;
        self
    }

    /// Range checks plus the truncation-leakage bound on both sources.
    pub fn validate(&self) -> Result<()> {
        self.validate_ranges()?;
        let leakage = thermal_tail(self.lambda1.max(self.lambda2), self.cutoff);
        if leakage > MAX_TRUNCATION_LEAKAGE {
            return Err(Error::TruncationLeakage {
                cutoff: self.cutoff,
                leakage,
                limit: MAX_TRUNCATION_LEAKAGE,
            });
        }
        Ok(())
    }

    /// Range checks only.
    pub fn validate_ranges(&self) -> Result<()> {
        check_squeezing("lambda1", self.lambda1)?;
        check_squeezing("lambda2", self.lambda2)?;
        check_unit_interval("eta_h1", self.eta_h1)?;
        check_unit_interval("eta_h2", self.eta_h2)?;
        check_unit_interval("eta_s1", self.eta_s1)?;
        check_unit_interval("eta_s2", self.eta_s2)?;
        check_unit_interval("eta_d1", self.eta_d1)?;
        check_unit_interval("eta_d2", self.eta_d2)?;
        check_unit_interval("overlap", self.overlap)?;
        Ok(())
    }

    pub fn source(&self, which: Source) -> LossyTmsv {
        match which {
            Source::One => LossyTmsv {
                lambda: self.lambda1,
                eta_h: self.eta_h1,
                eta_s: self.eta_s1,
                cutoff: self.cutoff,
            },
            Source::Two => LossyTmsv {
                lambda: self.lambda2,
                eta_h: self.eta_h2,
                eta_s: self.eta_s2,
                cutoff: self.cutoff,
            },
        }
    }

    /// Exchanges everything attached to source 1 with source 2, including
    /// the detector that sits on the same side of the interferometer.
    pub fn swapped_sources(&self) -> Self {
        Self {
            lambda1: self.lambda2,
            lambda2: self.lambda1,
            eta_h1: self.eta_h2,
            eta_h2: self.eta_h1,
            eta_s1: self.eta_s2,
            eta_s2: self.eta_s1,
            eta_d1: self.eta_d2,
            eta_d2: self.eta_d1,
            ..*self
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Source {
    One,
    Two,
}

/// One squeezed-vacuum source followed by herald and signal loss.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossyTmsv {
    pub lambda: f64,
    pub eta_h: f64,
    pub eta_s: f64,
    pub cutoff: usize,
}

impl LossyTmsv {
    pub fn joint_prob(&self, herald: usize, signal: usize) -> f64 {
        tmsv_joint_prob(self.lambda, self.eta_h, self.eta_s, herald, signal, self.cutoff)
    }

    /// `pr(herald, y)` for `y = 0..=max_signal`.
    pub fn signal_given_herald(&self, herald: usize, max_signal: usize) -> Vec<f64> {
        (0..=max_signal).map(|y| self.joint_prob(herald, y)).collect()
    }

    /// Marginal probability of the herald outcome.
    pub fn herald_marginal(&self, herald: usize) -> f64 {
        let thermal: Vec<f64> = (0..=self.cutoff)
            .map(|n| TmsvParams { lambda: self.lambda }.pair_probability(n))
            .collect();
        binomial_loss(&thermal, self.eta_h).get(herald).copied().unwrap_or(0.0)
    }
}

/// Joint photon-number distribution of a lossy squeezed-vacuum source,
/// summed over pair numbers up to `cutoff`.
pub fn tmsv_joint_prob(lambda: f64, eta_h: f64, eta_s: f64, x: usize, y: usize, cutoff: usize) -> f64 {
    let start = x.max(y);
    if start > cutoff {
        return 0.0;
    }
    let l2 = lambda * lambda;
    if lambda == 0.0 {
        return if x == 0 && y == 0 { 1.0 } else { 0.0 };
    }
    if lambda > 0.6 && start > 20 {
        return tmsv_joint_prob_log(lambda, eta_h, eta_s, x, y, cutoff);
    }
    let mut sum = 0.0;
    for n in start..=cutoff {
        let w = l2.powi(n as i32);
        if w == 0.0 {
            break;
        }
        sum += w * binomial_pmf(n, x, eta_h) * binomial_pmf(n, y, eta_s);
    }
    (1.0 - l2) * sum
}

fn tmsv_joint_prob_log(lambda: f64, eta_h: f64, eta_s: f64, x: usize, y: usize, cutoff: usize) -> f64 {
    let ln_l2 = 2.0 * lambda.ln();
    let ln_pmf = |n: usize, k: usize, p: f64| -> f64 {
        if p == 0.0 {
            return if k == 0 { 0.0 } else { f64::NEG_INFINITY };
        }
        if p == 1.0 {
            return if k == n { 0.0 } else { f64::NEG_INFINITY };
        }
        ln_binomial(n, k) + k as f64 * p.ln() + (n - k) as f64 * (1.0 - p).ln()
    };
    let terms: Vec<f64> = (x.max(y)..=cutoff)
        .map(|n| n as f64 * ln_l2 + ln_pmf(n, x, eta_h) + ln_pmf(n, y, eta_s))
        .collect();
    let max = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return 0.0;
    }
    let sum: f64 = terms.iter().map(|t| (t - max).exp()).sum();
    (1.0 - lambda * lambda) * (max + sum.ln()).exp()
}

/// Binomial loss channel on a photon-number distribution:
/// `out_k = sum_{j >= k} C(j, k) eta^k (1 - eta)^(j - k) dist_j`.
pub fn binomial_loss(dist: &[f64], eta: f64) -> Vec<f64> {
    let mut out = vec![0.0; dist.len()];
    for (j, &pj) in dist.iter().enumerate() {
        if pj == 0.0 {
            continue;
        }
        for (k, slot) in out.iter_mut().enumerate().take(j + 1) {
            *slot += binomial_pmf(j, k, eta) * pj;
        }
    }
    out
}

/// The diagonal, unnormalized probe injected into the interferometer after
/// the herald outcome `(h1, h2)`.
#[derive(Debug, Clone)]
pub struct HeraldedInput {
    pub h1: usize,
    pub h2: usize,
    /// `pr_1(h1, m)` for `m = 0..=total_cutoff`.
    pub signal1: Vec<f64>,
    /// `pr_2(h2, n)` for `n = 0..=total_cutoff`.
    pub signal2: Vec<f64>,
    pub total_cutoff: usize,
    /// Sum of the weights within the total cutoff.
    pub herald_probability: f64,
}

impl HeraldedInput {
    pub fn weight(&self, m: usize, n: usize) -> f64 {
        if m + n > self.total_cutoff {
            return 0.0;
        }
        self.signal1[m] * self.signal2[n]
    }

    /// The unnormalized diagonal state.
    pub fn to_mixed_state(&self) -> TwoModeMixedState {
        TwoModeMixedState::diagonal(self.total_cutoff, |m, n| self.weight(m, n))
    }

    /// Probe state conditioned on the herald outcome.
    pub fn conditional_state(&self) -> TwoModeMixedState {
        let norm = self.herald_probability;
        TwoModeMixedState::diagonal(self.total_cutoff, |m, n| self.weight(m, n) / norm)
    }

    /// Conditional probability of `|m, n>` in the probe.
    pub fn conditional_weight(&self, m: usize, n: usize) -> f64 {
        self.weight(m, n) / self.herald_probability
    }
}

pub fn heralded_input_state(
    h1: usize,
    h2: usize,
    params: &ExperimentParams,
    total_cutoff: usize,
) -> Result<HeraldedInput> {
    params.validate()?;
    if h1 > params.cutoff || h2 > params.cutoff {
        return Err(Error::Invalid(format!(
            "herald ({h1}, {h2}) exceeds pair cutoff {}",
            params.cutoff
        )));
    }
    let signal1 = params.source(Source::One).signal_given_herald(h1, total_cutoff);
    let signal2 = params.source(Source::Two).signal_given_herald(h2, total_cutoff);
    let mut herald_probability = 0.0;
    for (m, w1) in signal1.iter().enumerate() {
        for w2 in signal2.iter().take(total_cutoff - m + 1) {
            herald_probability += w1 * w2;
        }
    }
    if herald_probability < HERALD_UNDERFLOW {
        return Err(Error::ZeroSupport {
            h1,
            h2,
            prob: herald_probability,
        });
    }
    Ok(HeraldedInput {
        h1,
        h2,
        signal1,
        signal2,
        total_cutoff,
        herald_probability,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_photon_number() {
        assert_eq!(mean_photons(0.0).unwrap(), 0.0);
        assert!((mean_photons(0.75).unwrap() - 0.5625 / 0.4375).abs() < 1e-15);
        assert!((mean_photons(0.25).unwrap() - 0.0625 / 0.9375).abs() < 1e-15);
        assert!(matches!(mean_photons(1.0), Err(Error::Domain { .. })));
    }

    #[test]
    fn vacuum_source() {
        assert_eq!(tmsv_joint_prob(0.0, 0.3, 0.7, 0, 0, 50), 1.0);
        assert_eq!(tmsv_joint_prob(0.0, 0.3, 0.7, 1, 0, 50), 0.0);
    }

    #[test]
    fn lossless_source_is_number_correlated() {
        let lambda = 0.6f64;
        for n in 0..6 {
            let want = (1.0 - lambda * lambda) * lambda.powi(2 * n as i32);
            assert!((tmsv_joint_prob(lambda, 1.0, 1.0, n, n, 50) - want).abs() < 1e-15);
            assert_eq!(tmsv_joint_prob(lambda, 1.0, 1.0, n, n + 1, 50), 0.0);
        }
    }

    #[test]
    fn log_space_branch_agrees() {
        let direct = {
            let l2: f64 = 0.7 * 0.7;
            (22..=50)
                .map(|n| l2.powi(n) * binomial_pmf(n as usize, 22, 0.6) * binomial_pmf(n as usize, 21, 0.5))
                .sum::<f64>()
                * (1.0 - l2)
        };
        let logged = tmsv_joint_prob(0.7, 0.6, 0.5, 22, 21, 50);
        assert!((direct - logged).abs() <= 1e-12 * direct);
    }

    #[test]
    fn loss_examples() {
        assert_eq!(binomial_loss(&[0.0, 1.0], 1.0), vec![0.0, 1.0]);
        let out = binomial_loss(&[0.0, 0.0, 1.0], 0.5);
        assert_eq!(out, vec![0.25, 0.5, 0.25]);
    }

    #[test]
    fn lossless_heralding_is_projective() {
        let params = ExperimentParams::ideal(0.1);
        let input = heralded_input_state(1, 1, &params, 6).unwrap();
        assert!((input.conditional_weight(1, 1) - 1.0).abs() < 1e-15);
        assert_eq!(input.conditional_weight(2, 1), 0.0);
    }

    #[test]
    fn herald_loss_admits_extra_photons() {
        let params = ExperimentParams::uniform(0.5, 0.6, 1.0);
        let input = heralded_input_state(7, 1, &params, 14).unwrap();
        assert!(input.weight(9, 1) > 0.0);
        assert!(input.weight(8, 2) > 0.0);
    }

    #[test]
    fn truncation_leakage_is_rejected() {
        let params = ExperimentParams::ideal(0.95);
        assert!(matches!(params.validate(), Err(Error::TruncationLeakage { .. })));
        assert!(params.with_cutoff(400).validate().is_ok());
    }

    #[test]
    fn underflowing_herald_is_an_error() {
        let params = ExperimentParams::ideal(0.0);
        assert!(matches!(
            heralded_input_state(1, 0, &params, 4),
            Err(Error::ZeroSupport { .. })
        ));
    }

    #[test]
    fn herald_marginal_matches_joint_sum() {
        let src = ExperimentParams::uniform(0.5, 0.7, 1.0).source(Source::One);
        let joint: f64 = (0..=50).map(|y| src.joint_prob(2, y)).sum();
        assert!((joint - src.herald_marginal(2)).abs() < 1e-14);
    }
}
