//! Quantum Fisher information of interferometer probes for a phase imprinted
//! on the first interferometer mode `c`.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::combinatorics::binomial_pmf;
use crate::density::TwoModeMixedState;
use crate::error::{Error, Result};
use crate::fock::{apply_balanced_bs, number_moments_mode_c, TwoModePureState};

/// Pairs of eigenvalues whose sum falls below this are skipped.
pub const DENOMINATOR_FLOOR: f64 = 1e-12;

/// `4 (<(c+c)^2> - <c+c>^2)`.
pub fn qfi_pure(state: &TwoModePureState) -> f64 {
    let (mean, second) = number_moments_mode_c(state);
    (4.0 * (second - mean * mean)).max(0.0)
}

/// Lossless QFI of the balanced-beam-splitter probe built from `|h1, h2>`.
pub fn qfi_closed_form(h1: u64, h2: u64) -> u64 {
    2 * h1 * h2 + h1 + h2
}

/// `sum_ij 2 |<e_i|c+c|e_j>|^2 (p_i - p_j)^2 / (p_i + p_j)` over the
/// eigendecomposition of a normalized state.
pub fn qfi_mixed(rho: &TwoModeMixedState) -> Result<f64> {
    let trace = rho.trace();
    if (trace - 1.0).abs() > 1e-8 {
        return Err(Error::Invalid(format!(
            "QFI needs a normalized state, trace is {trace}"
        )));
    }
    let spectrum = rho.spectrum()?;
    let generator = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
        rho.basis().len(),
        rho.basis().iter().map(|&(m, _)| Complex64::new(m as f64, 0.0)),
    ));
    let v = &spectrum.vectors;
    let in_eigenbasis = v.adjoint() * generator * v;
    let p = &spectrum.values;
    let mut q = 0.0;
    for i in 0..p.len() {
        for j in 0..p.len() {
            let denom = p[i] + p[j];
            if denom < DENOMINATOR_FLOOR {
                continue;
            }
            let diff = p[i] - p[j];
            q += 2.0 * in_eigenbasis[(i, j)].norm_sqr() * diff * diff / denom;
        }
    }
    Ok(q)
}

/// The lossy probe: `|h1, h2>` sent through binomial loss in each signal
/// mode and then through the balanced beam splitter.
pub fn lossy_probe(h1: usize, h2: usize, eta_s1: f64, eta_s2: f64) -> TwoModeMixedState {
    let cutoff = h1 + h2;
    let members: Vec<(f64, TwoModePureState)> = (0..=h1)
        .flat_map(|m| (0..=h2).map(move |n| (m, n)))
        .filter_map(|(m, n)| {
            let w = binomial_pmf(h1, m, eta_s1) * binomial_pmf(h2, n, eta_s2);
            (w > 0.0).then(|| (w, apply_balanced_bs(&TwoModePureState::fock_in(m, n, cutoff))))
        })
        .collect();
    TwoModeMixedState::from_ensemble(cutoff, members.iter().map(|(w, psi)| (*w, psi)))
}

/// QFI of the heralded probe with equal signal transmissivity in both modes
/// and ideal heralding.
pub fn probe_qfi_with_loss(h1: usize, h2: usize, eta_s: f64) -> Result<f64> {
    if eta_s == 1.0 {
        let psi = apply_balanced_bs(&TwoModePureState::fock(h1, h2));
        return qfi_mixed(&TwoModeMixedState::from_pure(&psi));
    }
    qfi_mixed(&lossy_probe(h1, h2, eta_s, eta_s))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_form_values() {
        assert_eq!(qfi_closed_form(4, 4), 40);
        assert_eq!(qfi_closed_form(0, 0), 0);
        assert_eq!(qfi_closed_form(8, 0), 8);
    }

    #[test]
    fn pure_examples() {
        let hom = apply_balanced_bs(&TwoModePureState::fock(1, 1));
        assert!((qfi_pure(&hom) - 4.0).abs() < 1e-12);
        assert!((qfi_pure(&TwoModePureState::noon(8)) - 64.0).abs() < 1e-12);
        let single_source = apply_balanced_bs(&TwoModePureState::fock(8, 0));
        assert!((qfi_pure(&single_source) - 8.0).abs() < 1e-10);
    }

    #[test]
    fn mixed_matches_pure_limit() {
        let psi = apply_balanced_bs(&TwoModePureState::fock(3, 2));
        let q = qfi_mixed(&TwoModeMixedState::from_pure(&psi)).unwrap();
        assert!((q - qfi_pure(&psi)).abs() < 1e-9);
    }

    #[test]
    fn number_diagonal_states_carry_no_information() {
        let rho = TwoModeMixedState::diagonal(3, |m, n| if m + n == 3 { 0.25 } else { 0.0 });
        assert!(qfi_mixed(&rho).unwrap().abs() < 1e-12);
    }

    #[test]
    fn single_source_probe_is_shot_noise_limited() {
        for eta in [0.2, 0.5, 0.9] {
            let q = probe_qfi_with_loss(8, 0, eta).unwrap();
            assert!((q / (8.0 * eta) - 1.0).abs() < 1e-9, "eta {eta}: {q}");
        }
    }

    #[test]
    fn small_imbalance_is_more_fragile() {
        let q44 = probe_qfi_with_loss(4, 4, 0.5).unwrap();
        let q53 = probe_qfi_with_loss(5, 3, 0.5).unwrap();
        let q62 = probe_qfi_with_loss(6, 2, 0.5).unwrap();
        assert!(q62 > q53 && q53 > q44, "{q44} {q53} {q62}");
    }

    #[test]
    fn unnormalized_input_is_rejected() {
        let rho = TwoModeMixedState::diagonal(1, |_, _| 0.5);
        assert!(qfi_mixed(&rho).is_err());
    }
}
