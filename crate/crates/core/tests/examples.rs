use std::f64::consts::{FRAC_PI_2, PI};

use ghb_core::fisher::{fisher_per_photon_curve, max_fisher_over_phase, mean_detected, FisherEvaluator, FisherOptions};
use ghb_core::inference::{
    bootstrap_fisher, fit_rates, klyshko_calibrate, phase_from_coupler, synthetic_counts, BootstrapOptions,
    CouplerSample, FitOptions, FixedMask, JointDistribution,
};
use ghb_core::oracle::{brute_force_distribution, brute_force_qfi};
use ghb_core::qfi::probe_qfi_with_loss;
use ghb_core::rates::{fringe_table, RateModel, RateOptions};
use ghb_core::sources::{heralded_input_state, tmsv_joint_prob, ExperimentParams};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};

fn grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

fn high_gain_lossy(overlap: f64) -> ExperimentParams {
    ExperimentParams {
        lambda1: 0.75,
        lambda2: 0.75,
        eta_h1: 0.5,
        eta_h2: 0.5,
        eta_s1: 0.5,
        eta_s2: 0.5,
        eta_d1: 1.0,
        eta_d2: 1.0,
        overlap,
        cutoff: 50,
    }
}

#[test]
fn heralded_weights_match_ancilla_simulation() {
    let params = ExperimentParams {
        cutoff: 6,
        ..ExperimentParams::uniform(0.25, 0.5, 1.0)
    };
    // At phi = 0 the interferometer is the identity, so the detected pattern
    // is the injected one.
    let brute = brute_force_distribution(0.0, &params, 6).unwrap();
    for m in 0..=6 {
        for n in 0..=6 {
            let direct = tmsv_joint_prob(0.25, 0.5, 0.5, 2, m, 6) * tmsv_joint_prob(0.25, 0.5, 0.5, 1, n, 6);
            let b = brute.get(&[m, n, 2, 1]).copied().unwrap_or(0.0);
            assert!((direct - b).abs() < 1e-12, "({m},{n}): {direct} vs {b}");
        }
    }
}

#[test]
fn herald_loss_admits_extra_signal_photons() {
    let params = ExperimentParams::uniform(0.5, 0.6, 1.0);
    let input = heralded_input_state(7, 1, &params, 14).unwrap();
    let extra: f64 = (8..=13).map(|m| input.conditional_weight(m, 1)).sum();
    assert!(extra > 1e-3, "{extra}");
}

#[test]
fn oracle_qfi_matches_closed_form_values() {
    assert!((brute_force_qfi(1, 1, 1.0, 2).unwrap() - 4.0).abs() < 1e-9);
    assert!((brute_force_qfi(2, 1, 1.0, 3).unwrap() - 7.0).abs() < 1e-9);
    let pipeline = probe_qfi_with_loss(1, 1, 0.5).unwrap();
    assert!((brute_force_qfi(1, 1, 0.5, 2).unwrap() - pipeline).abs() < 1e-9);
}

#[test]
fn blocked_source_is_shot_noise_limited() {
    let params = ExperimentParams {
        lambda2: 0.0,
        eta_d1: 0.9,
        eta_d2: 0.9,
        ..ExperimentParams::uniform(0.5, 0.6, 0.8)
    };
    let eval = FisherEvaluator::new(5, 0, &params, FisherOptions::default()).unwrap();
    for phi in [0.4, 1.0, 1.9, 2.7] {
        let p = eval.point(phi);
        assert!((p.f_tilde - 1.0).abs() < 1e-9, "phi {phi}: {}", p.f_tilde);
    }
}

#[test]
fn overlap_raises_fringe_contrast() {
    let visibility = |overlap: f64, s1: usize, s2: usize| {
        let params = ExperimentParams::uniform(0.3, 0.5, overlap);
        let table = fringe_table(3, 2, &grid(0.0, PI, 41), &params, true, Some(5)).unwrap();
        let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
        for p in table.points.iter().filter(|p| p.s1 == s1 && p.s2 == s2) {
            lo = lo.min(p.prob);
            hi = hi.max(p.prob);
        }
        (hi - lo) / (hi + lo)
    };
    for (s1, s2) in [(3, 2), (2, 2)] {
        let (indist, dist) = (visibility(1.0, s1, s2), visibility(0.0, s1, s2));
        assert!(indist > dist + 0.1, "({s1},{s2}): {indist} vs {dist}");
    }
}

#[test]
fn vacuum_herald_without_gain_is_vacuum() {
    let params = ExperimentParams::ideal(0.0);
    let table = fringe_table(0, 0, &[0.0, 1.0], &params, true, Some(2)).unwrap();
    for p in &table.points {
        let expected = if p.s1 == 0 && p.s2 == 0 { 1.0 } else { 0.0 };
        assert!((p.prob - expected).abs() < 1e-15);
    }
}

#[test]
fn distinguishable_photons_coincide_half_the_time() {
    let params = ExperimentParams {
        overlap: 0.0,
        ..ExperimentParams::ideal(0.01)
    };
    let model = RateModel::new(params, RateOptions::default(), true).unwrap();
    let herald = model.signal_weights(1, 1, 2).herald_probability();
    let r = model.rate(1, 1, 1, 1, FRAC_PI_2).prob;
    assert!((r / herald - 0.5).abs() < 1e-3, "{}", r / herald);
}

#[test]
fn herald_loss_lifts_detected_photon_number() {
    let n = mean_detected(4, 4, 1.0, &high_gain_lossy(0.73), FisherOptions::default()).unwrap();
    assert!(n > 4.0, "{n}");
}

#[test]
fn larger_imbalance_gives_more_information_per_photon() {
    let params = high_gain_lossy(0.73);
    let phis = grid(0.05, PI - 0.05, 31);
    let mut best = Vec::new();
    for (h1, h2) in [(8, 0), (6, 2), (4, 4)] {
        let curve = fisher_per_photon_curve(h1, h2, &phis, &params, FisherOptions::default()).unwrap();
        best.push(max_fisher_over_phase(&curve).unwrap().1);
    }
    assert!(best[0] > best[1] && best[1] > best[2], "{best:?}");
}

#[test]
fn balanced_probe_dips_at_quarter_wave() {
    let eval = FisherEvaluator::new(4, 4, &high_gain_lossy(0.73), FisherOptions::default()).unwrap();
    let at = |phi: f64| eval.point(phi).f_tilde;
    assert!(at(FRAC_PI_2) < at(FRAC_PI_2 - 0.5));
    assert!(at(FRAC_PI_2) < at(FRAC_PI_2 + 0.5));
}

#[test]
fn fit_detects_distinguishable_sources() {
    let truth = ExperimentParams {
        lambda1: 0.4,
        lambda2: 0.4,
        eta_h1: 0.6,
        eta_h2: 0.6,
        eta_s1: 0.7,
        eta_s2: 0.7,
        eta_d1: 1.0,
        eta_d2: 1.0,
        overlap: 0.0,
        cutoff: 40,
    };
    let heralds = [(1, 0), (0, 1), (1, 1), (2, 0), (0, 2)];
    let data = synthetic_counts(&truth, &heralds, &grid(0.0, PI, 11), 3, 1_000_000, true, 11).unwrap();
    let start = ExperimentParams { overlap: 0.5, ..truth };
    let fit = fit_rates(&data, &start, FixedMask::default(), true, FitOptions::default()).unwrap();
    assert!(fit.converged);
    assert!(fit.params.overlap < 0.1, "{}", fit.params.overlap);
}

fn noisy(dist: &JointDistribution, trials: u64, rng: &mut ChaCha8Rng) -> JointDistribution {
    let mut out = dist.clone();
    for cell in &mut out.cells {
        let count = Binomial::new(trials, cell.prob.clamp(0.0, 1.0)).unwrap().sample(rng);
        cell.trials = Some(trials);
        cell.count = Some(count);
        cell.prob = count as f64 / trials as f64;
    }
    out
}

#[test]
fn calibration_recovers_noisy_efficiencies() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let dists: Vec<JointDistribution> = [0.2, 0.3, 0.4, 0.5, 0.6]
        .iter()
        .map(|&l| noisy(&JointDistribution::model(l * l, l, 0.47, 0.56, 8), 1_000_000, &mut rng))
        .collect();
    let cal = klyshko_calibrate(&dists).unwrap();
    assert!((cal.eta_h.mean - 0.47).abs() < 0.02, "{:?}", cal.eta_h);
    assert!((cal.eta_sd.mean - 0.56).abs() < 0.02, "{:?}", cal.eta_sd);
    assert!(cal.eta_h.std < 0.03 && cal.eta_sd.std < 0.03);
}

#[test]
fn calibration_of_lossless_source() {
    let dists: Vec<JointDistribution> = [0.3, 0.5]
        .iter()
        .map(|&l| JointDistribution::model(l, l, 1.0, 1.0, 6))
        .collect();
    let cal = klyshko_calibrate(&dists).unwrap();
    assert!((cal.eta_h.mean - 1.0).abs() < 0.01);
    assert!((cal.eta_sd.mean - 1.0).abs() < 0.01);
}

#[test]
fn coupler_scan_covers_the_full_phase_range() {
    let samples: Vec<CouplerSample> = (0..=50)
        .map(|i| {
            let x = i as f64 / 50.0;
            let t = 0.02 + 0.96 * (1.0 + (PI * x).cos()) / 2.0;
            CouplerSample {
                x,
                r10: 1e4 * t,
                r01: 1e4 * (1.0 - t),
            }
        })
        .collect();
    let map = phase_from_coupler(&samples).unwrap();
    let phis: Vec<f64> = map.iter().map(|p| p.phi.unwrap()).collect();
    assert!(phis[0].abs() < 1e-9);
    assert!((phis[50] - PI).abs() < 1e-6);
    for (p, s) in phis.iter().zip(&samples) {
        assert!((p - PI * s.x).abs() < 1e-6);
    }
}

#[test]
fn weak_gain_band_is_a_few_percent() {
    let truth = ExperimentParams {
        lambda1: 0.25,
        lambda2: 0.25,
        eta_h1: 0.5,
        eta_h2: 0.5,
        eta_s1: 0.55,
        eta_s2: 0.55,
        eta_d1: 0.95,
        eta_d2: 0.95,
        overlap: 0.9,
        cutoff: 30,
    };
    let heralds = [(1, 0), (0, 1), (1, 1)];
    let data = synthetic_counts(&truth, &heralds, &grid(0.1, PI - 0.1, 9), 2, 1_000_000, true, 3).unwrap();
    let fit = fit_rates(&data, &truth, FixedMask::default(), true, FitOptions::default()).unwrap();
    let mut options = BootstrapOptions::new(9, (1, 1), vec![0.8, 1.2]);
    options.n_sets = 8;
    options.fisher = options.fisher.postselected(true);
    let result = bootstrap_fisher(&fit, &data, &options).unwrap();
    let curve = &result.curve;
    let (lo, hi) = (curve.band_lo.as_ref().unwrap(), curve.band_hi.as_ref().unwrap());
    for i in 0..curve.len() {
        let rel = (hi[i] - lo[i]) / (2.0 * curve.f_tilde[i]);
        assert!(rel > 1e-4 && rel < 0.2, "relative half-width {rel}");
    }
}
