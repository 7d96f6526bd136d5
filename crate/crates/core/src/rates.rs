//! Forward model of heralded coincidence rates `pr(s1, s2, h1, h2, phi)`.
//!
//! The heralded input is diagonal in the Fock basis, so every outcome is a
//! classical mixture of beam-splitter transition probabilities. With partial
//! distinguishability, source 1's photons split binomially into a component
//! that interferes with source 2 and one that passes the interferometer
//! independently; the detectors cannot tell the two apart. Detector loss is a
//! binomial convolution truncated at a fixed number of lost photons.

use serde::{Deserialize, Serialize};

use crate::combinatorics::binomial_pmf;
use crate::error::Result;
use crate::fock::{folded_amplitude_and_derivative, powers};
use crate::sources::{ExperimentParams, Source};

pub const DEFAULT_DETECTOR_LOSS_DEPTH: usize = 4;
/// Excluded-mass estimates above this are reported as leaky.
pub const LEAKAGE_WARNING: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateOptions {
    /// Largest number of photons lost at the detectors that is accounted for.
    pub detector_loss_depth: usize,
}

impl Default for RateOptions {
    fn default() -> Self {
        Self {
            detector_loss_depth: DEFAULT_DETECTOR_LOSS_DEPTH,
        }
    }
}

/// Index into a triangular `(a, b)` table with `a + b <= max`.
fn tri_index(a: usize, b: usize) -> usize {
    let total = a + b;
    total * (total + 1) / 2 + a
}

/// `|<s1, s2|U(phi)|m, total-m>|^2` and its phase derivative for all
/// `s1 + s2 = total <= max_total`.
pub struct TransitionCache {
    max_total: usize,
    offsets: Vec<usize>,
    data: Vec<f64>,
    deriv: Vec<f64>,
}

impl TransitionCache {
    pub fn new(phi: f64, max_total: usize) -> Self {
        let (sh, ch) = (0.5 * phi).sin_cos();
        let sin_pows = powers(sh, 2 * max_total + 1);
        let cos_pows = powers(ch, 2 * max_total + 1);
        let mut offsets = Vec::with_capacity(max_total + 1);
        let mut data = Vec::new();
        let mut deriv = Vec::new();
        for total in 0..=max_total {
            offsets.push(data.len());
            for s1 in 0..=total {
                for m in 0..=total {
                    let (a, da) = folded_amplitude_and_derivative(s1, total - s1, m, total - m, &sin_pows, &cos_pows);
                    data.push(a * a);
                    deriv.push(2.0 * a * da);
                }
            }
        }
        Self {
            max_total,
            offsets,
            data,
            deriv,
        }
    }

    #[inline]
    fn index(&self, s1: usize, total: usize, m: usize) -> usize {
        debug_assert!(total <= self.max_total && s1 <= total && m <= total);
        self.offsets[total] + s1 * (total + 1) + m
    }

    #[inline]
    pub fn derivative(&self, s1: usize, total: usize, m: usize) -> f64 {
        self.deriv[self.index(s1, total, m)]
    }

    #[inline]
    pub fn get(&self, s1: usize, total: usize, m: usize) -> f64 {
        self.data[self.index(s1, total, m)]
    }
}

/// Probabilities of signal-photon numbers entering the interferometer for a
/// given herald outcome, unnormalized (they include the herald probability).
#[derive(Debug, Clone)]
pub struct SignalWeights {
    pub h1: usize,
    pub h2: usize,
    pub source1: Vec<f64>,
    pub source2: Vec<f64>,
}

impl SignalWeights {
    pub fn new(params: &ExperimentParams, h1: usize, h2: usize, max_total: usize) -> Self {
        let max = max_total.min(params.cutoff);
        let mut source1 = params.source(Source::One).signal_given_herald(h1, max);
        let mut source2 = params.source(Source::Two).signal_given_herald(h2, max);
        source1.resize(max_total + 1, 0.0);
        source2.resize(max_total + 1, 0.0);
        Self {
            h1,
            h2,
            source1,
            source2,
        }
    }

    pub fn max_total(&self) -> usize {
        self.source1.len() - 1
    }

    /// Probability of the herald outcome restricted to the table.
    pub fn herald_probability(&self) -> f64 {
        let max = self.max_total();
        let mut total = 0.0;
        for (m, w1) in self.source1.iter().enumerate() {
            total += w1 * self.source2[..=max - m].iter().sum::<f64>();
        }
        total
    }

    /// Joint probability of the herald and `total` photons entering.
    pub fn total_photon_distribution(&self) -> Vec<f64> {
        let max = self.max_total();
        let mut out = vec![0.0; max + 1];
        for (m, w1) in self.source1.iter().enumerate() {
            for (n, w2) in self.source2.iter().enumerate().take(max - m + 1) {
                out[m + n] += w1 * w2;
            }
        }
        out
    }
}

/// Probability over `(j, k)` at the detectors' input, before detector loss,
/// together with its phase derivative.
fn pre_detection(
    weights: &SignalWeights,
    cache: &TransitionCache,
    overlap: f64,
    max_total: usize,
) -> (Vec<f64>, Vec<f64>) {
    let size = tri_index(0, max_total + 1);
    let mut table = vec![0.0; size];
    let mut dtable = vec![0.0; size];
    let w1 = &weights.source1;
    let w2 = &weights.source2;
    for total in 0..=max_total {
        for m in 0..=total {
            let base = w1[m] * w2[total - m];
            if base == 0.0 {
                continue;
            }
            let n = total - m;
            if overlap == 1.0 {
                for j in 0..=total {
                    let idx = tri_index(j, total - j);
                    table[idx] += base * cache.get(j, total, m);
                    dtable[idx] += base * cache.derivative(j, total, m);
                }
                continue;
            }
            // l of source 1's m photons overlap with source 2
            for l in 0..=m {
                let split = binomial_pmf(m, l, overlap) * base;
                if split == 0.0 {
                    continue;
                }
                let par_total = l + n;
                let perp = m - l;
                for a in 0..=par_total {
                    let p_par = cache.get(a, par_total, l);
                    let d_par = cache.derivative(a, par_total, l);
                    if p_par == 0.0 && d_par == 0.0 {
                        continue;
                    }
                    for x in 0..=perp {
                        let p_perp = cache.get(x, perp, perp);
                        let d_perp = cache.derivative(x, perp, perp);
                        let idx = tri_index(a + x, total - a - x);
                        table[idx] += split * p_par * p_perp;
                        dtable[idx] += split * (d_par * p_perp + p_par * d_perp);
                    }
                }
            }
        }
    }
    (table, dtable)
}

/// Outcome probabilities at one phase for one herald outcome.
#[derive(Debug, Clone)]
pub struct OutcomeTable {
    pub phi: f64,
    pub h1: usize,
    pub h2: usize,
    pub max_outcome: usize,
    probs: Vec<f64>,
    derivs: Vec<f64>,
    excluded: Vec<f64>,
}

impl OutcomeTable {
    pub fn get(&self, s1: usize, s2: usize) -> f64 {
        if s1 + s2 > self.max_outcome {
            return 0.0;
        }
        self.probs[tri_index(s1, s2)]
    }

    /// `d/dphi` of [`OutcomeTable::get`].
    pub fn derivative(&self, s1: usize, s2: usize) -> f64 {
        if s1 + s2 > self.max_outcome {
            return 0.0;
        }
        self.derivs[tri_index(s1, s2)]
    }

    /// Mass of the first shell of detector-loss terms beyond the truncation.
    pub fn excluded_mass(&self, s1: usize, s2: usize) -> f64 {
        if s1 + s2 > self.max_outcome {
            return 0.0;
        }
        self.excluded[tri_index(s1, s2)]
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..=self.max_outcome)
            .flat_map(|t| (0..=t).map(move |s1| (s1, t - s1)))
            .map(|(s1, s2)| (s1, s2, self.probs[tri_index(s1, s2)]))
    }

    pub fn total(&self) -> f64 {
        self.probs.iter().sum()
    }
}

/// Rate model for fixed parameters.
#[derive(Debug, Clone)]
pub struct RateModel {
    params: ExperimentParams,
    options: RateOptions,
    distinguishable: bool,
}

impl RateModel {
    /// `distinguishable = false` ignores `params.overlap` and treats the
    /// sources as perfectly overlapping.
    pub fn new(params: ExperimentParams, options: RateOptions, distinguishable: bool) -> Result<Self> {
        params.validate()?;
        Ok(Self {
            params,
            options,
            distinguishable,
        })
    }

    /// Like [`RateModel::new`] but without the truncation-leakage bound: the
    /// pair cutoff is taken as an exact truncation of both sources. Used to
    /// compare against references truncated the same way.
    pub fn with_exact_truncation(
        params: ExperimentParams,
        options: RateOptions,
        distinguishable: bool,
    ) -> Result<Self> {
        params.validate_ranges()?;
        Ok(Self {
            params,
            options,
            distinguishable,
        })
    }

    pub fn params(&self) -> &ExperimentParams {
        &self.params
    }

    pub fn options(&self) -> &RateOptions {
        &self.options
    }

    fn overlap(&self) -> f64 {
        if self.distinguishable {
            self.params.overlap
        } else {
            1.0
        }
    }

    /// Largest total photon number that has to be tabulated for outcomes up
    /// to `max_outcome` (one extra shell feeds the leakage estimate).
    pub fn table_extent(&self, max_outcome: usize) -> usize {
        max_outcome + self.options.detector_loss_depth + 1
    }

    pub fn signal_weights(&self, h1: usize, h2: usize, max_outcome: usize) -> SignalWeights {
        SignalWeights::new(&self.params, h1, h2, self.table_extent(max_outcome))
    }

    pub fn outcome_table(&self, weights: &SignalWeights, max_outcome: usize, phi: f64) -> OutcomeTable {
        let extent = self.table_extent(max_outcome);
        debug_assert!(weights.max_total() >= extent);
        let cache = TransitionCache::new(phi, extent);
        self.outcome_table_cached(weights, max_outcome, &cache, phi)
    }

    pub fn outcome_table_cached(
        &self,
        weights: &SignalWeights,
        max_outcome: usize,
        cache: &TransitionCache,
        phi: f64,
    ) -> OutcomeTable {
        let extent = self.table_extent(max_outcome);
        let (pre, dpre) = pre_detection(weights, cache, self.overlap(), extent);
        let depth = self.options.detector_loss_depth;
        let (eta1, eta2) = (self.params.eta_d1, self.params.eta_d2);
        let size = tri_index(0, max_outcome + 1);
        let mut probs = vec![0.0; size];
        let mut derivs = vec![0.0; size];
        let mut excluded = vec![0.0; size];
        for s_total in 0..=max_outcome {
            for s1 in 0..=s_total {
                let s2 = s_total - s1;
                let mut acc = 0.0;
                let mut dacc = 0.0;
                let mut shell = 0.0;
                for lost in 0..=depth + 1 {
                    debug_assert!(s_total + lost <= extent);
                    let mut part = 0.0;
                    let mut dpart = 0.0;
                    for lost1 in 0..=lost {
                        let (j, k) = (s1 + lost1, s2 + lost - lost1);
                        let idx = tri_index(j, k);
                        let (p, dp) = (pre[idx], dpre[idx]);
                        if p == 0.0 && dp == 0.0 {
                            continue;
                        }
                        let kernel = binomial_pmf(j, s1, eta1) * binomial_pmf(k, s2, eta2);
                        part += kernel * p;
                        dpart += kernel * dp;
                    }
                    if lost <= depth {
                        acc += part;
                        dacc += dpart;
                    } else {
                        shell = part;
                    }
                }
                probs[tri_index(s1, s2)] = acc;
                derivs[tri_index(s1, s2)] = dacc;
                excluded[tri_index(s1, s2)] = shell;
            }
        }
        OutcomeTable {
            phi,
            h1: weights.h1,
            h2: weights.h2,
            max_outcome,
            probs,
            derivs,
            excluded,
        }
    }

    /// Single joint probability per pump pulse.
    pub fn rate(&self, s1: usize, s2: usize, h1: usize, h2: usize, phi: f64) -> RatePrediction {
        let max_outcome = s1 + s2;
        let weights = self.signal_weights(h1, h2, max_outcome);
        let table = self.outcome_table(&weights, max_outcome, phi);
        RatePrediction {
            prob: table.get(s1, s2),
            excluded_mass: table.excluded_mass(s1, s2),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatePrediction {
    pub prob: f64,
    pub excluded_mass: f64,
}

impl RatePrediction {
    pub fn is_leaky(&self) -> bool {
        self.excluded_mass > LEAKAGE_WARNING
    }
}

/// Joint probability of `(s1, s2, h1, h2)` at phase `phi` for perfectly
/// overlapping sources.
pub fn rate(s1: usize, s2: usize, h1: usize, h2: usize, phi: f64, params: &ExperimentParams) -> Result<f64> {
    Ok(RateModel::new(*params, RateOptions::default(), false)?
        .rate(s1, s2, h1, h2, phi)
        .prob)
}

/// As [`rate`], with the sources' mode overlap taken from `params.overlap`.
pub fn rate_distinguishable(
    s1: usize,
    s2: usize,
    h1: usize,
    h2: usize,
    phi: f64,
    params: &ExperimentParams,
) -> Result<f64> {
    Ok(RateModel::new(*params, RateOptions::default(), true)?
        .rate(s1, s2, h1, h2, phi)
        .prob)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Measured,
    Modeled,
    Synthetic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatePoint {
    pub phi: f64,
    pub s1: usize,
    pub s2: usize,
    pub h1: usize,
    pub h2: usize,
    pub prob: f64,
    /// Pump pulses at this phase setting, for counted data.
    pub trials: Option<u64>,
    pub count: Option<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateTable {
    pub points: Vec<RatePoint>,
    pub provenance: Provenance,
}

impl RateTable {
    /// Distinct phases in first-appearance order.
    pub fn phases(&self) -> Vec<f64> {
        let mut out: Vec<f64> = Vec::new();
        for p in &self.points {
            if !out.contains(&p.phi) {
                out.push(p.phi);
            }
        }
        out
    }

    /// Distinct herald outcomes in first-appearance order.
    pub fn heralds(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for p in &self.points {
            if !out.contains(&(p.h1, p.h2)) {
                out.push((p.h1, p.h2));
            }
        }
        out
    }
}

/// Smallest outcome cutoff holding all but `tol` of the herald-conditioned
/// input photon distribution, capped at the pair cutoff.
pub fn auto_outcome_cutoff(params: &ExperimentParams, h1: usize, h2: usize, tol: f64) -> usize {
    let cap = 2 * params.cutoff;
    let weights = SignalWeights::new(params, h1, h2, cap);
    let dist = weights.total_photon_distribution();
    let norm: f64 = dist.iter().sum();
    if norm <= 0.0 {
        return h1 + h2;
    }
    let mut tail = 1.0;
    for (total, p) in dist.iter().enumerate() {
        tail -= p / norm;
        if tail < tol && total >= h1 + h2 {
            return total;
        }
    }
    cap
}

/// Model fringes for one herald outcome over a phase grid, with every outcome
/// `s1 + s2 <= max_outcome`.
pub fn fringe_table(
    h1: usize,
    h2: usize,
    phi_grid: &[f64],
    params: &ExperimentParams,
    distinguishable: bool,
    max_outcome: Option<usize>,
) -> Result<RateTable> {
    if phi_grid.is_empty() {
        return Err(crate::Error::Invalid("empty phase grid".into()));
    }
    let model = RateModel::new(*params, RateOptions::default(), distinguishable)?;
    let max_outcome = max_outcome.unwrap_or_else(|| auto_outcome_cutoff(params, h1, h2, 1e-10));
    let weights = model.signal_weights(h1, h2, max_outcome);
    let mut points = Vec::new();
    for &phi in phi_grid {
        let table = model.outcome_table(&weights, max_outcome, phi);
        points.extend(table.iter().map(|(s1, s2, prob)| RatePoint {
            phi,
            s1,
            s2,
            h1,
            h2,
            prob,
            trials: None,
            count: None,
        }));
    }
    Ok(RateTable {
        points,
        provenance: Provenance::Modeled,
    })
}
