//! Two-mode Fock-space primitives.
//!
//! Phase convention: the interferometer `U(phi)` acts as a variable beam
//! splitter with transmission amplitude `cos(phi/2)`, so a single photon
//! entering mode 1 leaves in mode 1 with probability `cos^2(phi/2)`.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;

use crate::combinatorics::{binomial_cached, ln_binomial, ln_factorial};

/// Interferometer phase difference, stored in the canonical range `[-pi, pi]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct BeamSplitterPhase(f64);

impl BeamSplitterPhase {
    pub fn new(phi: f64) -> Self {
        if (-PI..=PI).contains(&phi) {
            return Self(phi);
        }
        let mut reduced = (phi + PI).rem_euclid(TAU) - PI;
        if reduced < -PI {
            reduced = -PI;
        }
        Self(reduced)
    }

    pub fn radians(self) -> f64 {
        self.0
    }
}

impl From<f64> for BeamSplitterPhase {
    fn from(phi: f64) -> Self {
        Self::new(phi)
    }
}

/// `|<s1, s2| U(phi) |m, n>|^2`.
///
/// The tangent powers of the textbook expression are folded into each term,
/// so every term is `sin(phi/2)^(s1+m-2k) cos(phi/2)^(s2-m+2k)` with
/// `max(0, m-s2) <= k <= min(s1, m)`; both exponents are nonnegative on that
/// range and the function is finite everywhere, including `phi = 0, +-pi`.
pub fn bs_transition_prob(s1: usize, s2: usize, m: usize, n: usize, phi: f64) -> f64 {
    let amp = bs_transition_amplitude(s1, s2, m, n, phi);
    amp * amp
}

/// Real amplitude whose square is [`bs_transition_prob`]. Its overall sign is
/// convention dependent; only the square is physical.
pub fn bs_transition_amplitude(s1: usize, s2: usize, m: usize, n: usize, phi: f64) -> f64 {
    if m + n != s1 + s2 {
        return 0.0;
    }
    let (sh, ch) = (0.5 * phi).sin_cos();
    let total = m + n;
    let sin_pows: Vec<f64> = powers(sh, 2 * total);
    let cos_pows: Vec<f64> = powers(ch, 2 * total);
    folded_amplitude(s1, s2, m, n, &sin_pows, &cos_pows)
}

pub(crate) fn powers(base: f64, max: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(max + 1);
    let mut acc = 1.0;
    for _ in 0..=max {
        out.push(acc);
        acc *= base;
    }
    out
}

/// Folded closed-form amplitude given precomputed powers of `sin(phi/2)` and
/// `cos(phi/2)` (at least up to `s1 + s2 + m + n`).
#[inline]
pub(crate) fn folded_amplitude(s1: usize, s2: usize, m: usize, n: usize, sin_pows: &[f64], cos_pows: &[f64]) -> f64 {
    let pref = (0.5 * (ln_factorial(m) + ln_factorial(n) - ln_factorial(s1) - ln_factorial(s2))).exp();
    let k_min = m.saturating_sub(s2);
    let k_max = s1.min(m);
    let mut sum = 0.0;
    for k in k_min..=k_max {
        let trig = sin_pows[s1 + m - 2 * k] * cos_pows[s2 + 2 * k - m];
        let term = binomial_cached(s1, k) * binomial_cached(s2, s2 + k - m) * trig;
        if k % 2 == 0 {
            sum += term;
        } else {
            sum -= term;
        }
    }
    pref * sum
}

/// Folded amplitude and its derivative with respect to `phi`.
#[inline]
pub(crate) fn folded_amplitude_and_derivative(
    s1: usize,
    s2: usize,
    m: usize,
    n: usize,
    sin_pows: &[f64],
    cos_pows: &[f64],
) -> (f64, f64) {
    let pref = (0.5 * (ln_factorial(m) + ln_factorial(n) - ln_factorial(s1) - ln_factorial(s2))).exp();
    let k_min = m.saturating_sub(s2);
    let k_max = s1.min(m);
    let mut sum = 0.0;
    let mut dsum = 0.0;
    for k in k_min..=k_max {
        let p = s1 + m - 2 * k;
        let q = s2 + 2 * k - m;
        let coef = binomial_cached(s1, k) * binomial_cached(s2, s2 + k - m);
        let trig = sin_pows[p] * cos_pows[q];
        // d/dphi sin^p(phi/2) cos^q(phi/2)
        let mut dtrig = 0.0;
        if p > 0 {
            dtrig += p as f64 * sin_pows[p - 1] * cos_pows[q + 1];
        }
        if q > 0 {
            dtrig -= q as f64 * sin_pows[p + 1] * cos_pows[q - 1];
        }
        dtrig *= 0.5;
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        sum += sign * coef * trig;
        dsum += sign * coef * dtrig;
    }
    (pref * sum, pref * dsum)
}

/// `d/dphi |<s1, s2| U(phi) |m, n>|^2`.
pub fn bs_transition_prob_derivative(s1: usize, s2: usize, m: usize, n: usize, phi: f64) -> f64 {
    if m + n != s1 + s2 {
        return 0.0;
    }
    let (sh, ch) = (0.5 * phi).sin_cos();
    let total = m + n;
    let sin_pows = powers(sh, 2 * total + 1);
    let cos_pows = powers(ch, 2 * total + 1);
    let (a, da) = folded_amplitude_and_derivative(s1, s2, m, n, &sin_pows, &cos_pows);
    2.0 * a * da
}

/// Amplitude `<s, N-s| U_BS |m, n>` of the balanced beam splitter
/// `a+ -> (a+ + b+)/sqrt2`, `b+ -> (a+ - b+)/sqrt2`, with `N = m + n`.
pub fn balanced_bs_amplitude(s: usize, m: usize, n: usize) -> f64 {
    let total = m + n;
    if s > total {
        return 0.0;
    }
    // (a+ + b+)^m (a+ - b+)^n: choose i creators of a+ from the first factor
    // and s - i from the second.
    let i_min = s.saturating_sub(n);
    let i_max = m.min(s);
    let ln_norm = 0.5 * (ln_factorial(s) + ln_factorial(total - s) - ln_factorial(m) - ln_factorial(n))
        - 0.5 * total as f64 * std::f64::consts::LN_2;
    let mut sum = 0.0;
    for i in i_min..=i_max {
        let j = s - i;
        let coef = (ln_norm + ln_binomial(m, i) + ln_binomial(n, j)).exp();
        // b+ taken n - j times from (a+ - b+)
        if (n - j).is_multiple_of(2) {
            sum += coef;
        } else {
            sum -= coef;
        }
    }
    sum
}

/// Pure state of two bosonic modes truncated at a total photon number.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoModePureState {
    cutoff: usize,
    amps: Vec<Complex64>,
}

impl TwoModePureState {
    pub fn vacuum_space(cutoff: usize) -> Self {
        Self {
            cutoff,
            amps: vec![Complex64::new(0.0, 0.0); (cutoff + 1) * (cutoff + 1)],
        }
    }

    /// The Fock state `|m, n>` with cutoff `m + n`.
    pub fn fock(m: usize, n: usize) -> Self {
        let mut state = Self::vacuum_space(m + n);
        state.set(m, n, Complex64::new(1.0, 0.0));
        state
    }

    /// `|m, n>` embedded in a space with a larger cutoff.
    pub fn fock_in(m: usize, n: usize, cutoff: usize) -> Self {
        let mut state = Self::vacuum_space(cutoff.max(m + n));
        state.set(m, n, Complex64::new(1.0, 0.0));
        state
    }

    /// `(|N,0> + |0,N>)/sqrt2`.
    pub fn noon(photons: usize) -> Self {
        let mut state = Self::vacuum_space(photons);
        let a = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        if photons == 0 {
            state.set(0, 0, Complex64::new(1.0, 0.0));
        } else {
            state.set(photons, 0, a);
            state.set(0, photons, a);
        }
        state
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    fn index(&self, m: usize, n: usize) -> usize {
        m * (self.cutoff + 1) + n
    }

    pub fn amplitude(&self, m: usize, n: usize) -> Complex64 {
        if m + n > self.cutoff {
            return Complex64::new(0.0, 0.0);
        }
        self.amps[self.index(m, n)]
    }

    /// Panics if `m + n` exceeds the cutoff.
    pub fn set(&mut self, m: usize, n: usize, amp: Complex64) {
        assert!(m + n <= self.cutoff, "|{m},{n}> beyond cutoff {}", self.cutoff);
        let idx = self.index(m, n);
        self.amps[idx] = amp;
    }

    /// Iterates `(m, n, amplitude)` over every basis state within the cutoff.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, Complex64)> + '_ {
        (0..=self.cutoff).flat_map(move |m| (0..=self.cutoff - m).map(move |n| (m, n, self.amps[self.index(m, n)])))
    }

    pub fn norm_sqr(&self) -> f64 {
        self.iter().map(|(_, _, a)| a.norm_sqr()).sum()
    }

    pub fn is_normalized(&self) -> bool {
        (self.norm_sqr() - 1.0).abs() <= 1e-12
    }

    pub fn normalize(&mut self) {
        let norm = self.norm_sqr().sqrt();
        if norm > 0.0 {
            for a in &mut self.amps {
                *a /= norm;
            }
        }
    }

    pub fn inner(&self, other: &Self) -> Complex64 {
        self.iter().map(|(m, n, a)| a.conj() * other.amplitude(m, n)).sum()
    }

    /// Applies `exp(i phi c+c)` with `c` the first mode.
    pub fn phase_shifted(&self, phi: f64) -> Self {
        let mut out = self.clone();
        for m in 0..=self.cutoff {
            let phase = Complex64::from_polar(1.0, m as f64 * phi);
            for n in 0..=self.cutoff - m {
                let idx = out.index(m, n);
                out.amps[idx] *= phase;
            }
        }
        out
    }
}

/// Balanced beam splitter applied sector by sector; photon number is
/// conserved so the cutoff never changes.
pub fn apply_balanced_bs(state: &TwoModePureState) -> TwoModePureState {
    let cutoff = state.cutoff();
    let mut out = TwoModePureState::vacuum_space(cutoff);
    for total in 0..=cutoff {
        for s in 0..=total {
            let mut acc = Complex64::new(0.0, 0.0);
            for m in 0..=total {
                let a = state.amplitude(m, total - m);
                if a.norm_sqr() == 0.0 {
                    continue;
                }
                acc += a * balanced_bs_amplitude(s, m, total - m);
            }
            out.set(s, total - s, acc);
        }
    }
    out
}

/// `(<c+c>, <(c+c)^2>)` for the first mode of a normalized state.
pub fn number_moments_mode_c(state: &TwoModePureState) -> (f64, f64) {
    state.iter().fold((0.0, 0.0), |(mean, second), (m, _, a)| {
        let p = a.norm_sqr();
        let m = m as f64;
        (mean + p * m, second + p * m * m)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2};

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn hom_suppression() {
        assert!(bs_transition_prob(1, 1, 1, 1, FRAC_PI_2).abs() < 1e-15);
        assert!(close(bs_transition_prob(2, 0, 1, 1, FRAC_PI_2), 0.5, 1e-14));
        assert!(close(bs_transition_prob(0, 2, 1, 1, FRAC_PI_2), 0.5, 1e-14));
    }

    #[test]
    fn single_photon_transmission_is_cos_squared() {
        for i in 0..=16 {
            let phi = -PI + i as f64 * PI / 8.0;
            let want = (phi / 2.0).cos().powi(2);
            assert!(close(bs_transition_prob(1, 0, 1, 0, phi), want, 1e-14));
            assert!(close(bs_transition_prob(0, 1, 1, 0, phi), 1.0 - want, 1e-14));
        }
    }

    #[test]
    fn number_conservation() {
        assert_eq!(bs_transition_prob(2, 1, 1, 1, 0.3), 0.0);
    }

    #[test]
    fn finite_at_singular_points() {
        for &phi in &[0.0, PI, -PI] {
            for s1 in 0..=6 {
                let p = bs_transition_prob(s1, 6 - s1, 4, 2, phi);
                assert!(p.is_finite());
            }
        }
        // phi = 0 is the identity, phi = pi swaps the modes
        assert!(close(bs_transition_prob(4, 2, 4, 2, 0.0), 1.0, 1e-14));
        assert!(close(bs_transition_prob(2, 4, 4, 2, PI), 1.0, 1e-14));
    }

    #[test]
    fn analytic_derivative_matches_central_difference() {
        let h = 1e-5;
        for (s1, s2, m, n) in [(1, 0, 1, 0), (2, 0, 1, 1), (3, 2, 4, 1), (4, 4, 6, 2)] {
            for phi in [-2.1, -0.4, 0.3, 1.1, 2.9] {
                let fd =
                    (bs_transition_prob(s1, s2, m, n, phi + h) - bs_transition_prob(s1, s2, m, n, phi - h)) / (2.0 * h);
                let an = bs_transition_prob_derivative(s1, s2, m, n, phi);
                assert!(
                    (fd - an).abs() <= 1e-6 * an.abs().max(1e-3),
                    "{s1}{s2}{m}{n} {phi}: {fd} {an}"
                );
            }
        }
    }

    #[test]
    fn phase_canonicalization() {
        assert!(close(
            BeamSplitterPhase::new(3.0 * PI / 2.0).radians(),
            -FRAC_PI_2,
            1e-12
        ));
        assert!(close(
            BeamSplitterPhase::new(-5.0 * PI / 2.0).radians(),
            -FRAC_PI_2,
            1e-12
        ));
        assert_eq!(BeamSplitterPhase::new(PI).radians(), PI);
    }

    #[test]
    fn balanced_bs_examples() {
        let out = apply_balanced_bs(&TwoModePureState::fock(1, 0));
        assert!(close(out.amplitude(1, 0).re, FRAC_1_SQRT_2, 1e-15));
        assert!(close(out.amplitude(0, 1).re, FRAC_1_SQRT_2, 1e-15));

        let hom = apply_balanced_bs(&TwoModePureState::fock(1, 1));
        assert!(close(hom.amplitude(2, 0).re, FRAC_1_SQRT_2, 1e-15));
        assert!(close(hom.amplitude(0, 2).re, -FRAC_1_SQRT_2, 1e-15));
        assert!(hom.amplitude(1, 1).norm() < 1e-15);

        let big = apply_balanced_bs(&TwoModePureState::fock(4, 3));
        assert!(close(big.norm_sqr(), 1.0, 1e-12));
    }

    #[test]
    fn moments_of_heralded_probes() {
        let (mean, second) = number_moments_mode_c(&TwoModePureState::fock(0, 0));
        assert_eq!((mean, second), (0.0, 0.0));

        let (mean, second) = number_moments_mode_c(&apply_balanced_bs(&TwoModePureState::fock(2, 2)));
        assert!(close(mean, 2.0, 1e-12));
        // (h1^2 + h2^2 + 4 h1 h2 + h1 + h2) / 4 at h1 = h2 = 2
        assert!(close(second, 7.0, 1e-12));

        for (h1, h2) in [(3usize, 1usize), (5, 0), (2, 6)] {
            let psi = apply_balanced_bs(&TwoModePureState::fock(h1, h2));
            let (mean, _) = number_moments_mode_c(&psi);
            assert!(close(mean, 0.5 * (h1 + h2) as f64, 1e-12));
        }
    }

    #[test]
    fn phase_shift_is_unitary() {
        let psi = apply_balanced_bs(&TwoModePureState::fock(3, 2));
        let shifted = psi.phase_shifted(0.37);
        assert!(close(shifted.norm_sqr(), 1.0, 1e-12));
        assert!(close(psi.inner(&psi).re, 1.0, 1e-12));
    }
}
