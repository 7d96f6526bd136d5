//! Brute-force reference: explicit multimode pure states with loss ancillas.
//!
//! Sources, losses, distinguishability and the interferometer are built from
//! creation-operator algebra on a sparse Fock-space vector. Nothing here
//! calls into the factorized rate or QFI code beyond the factorial table, so
//! agreement between the two is a meaningful check.

use std::collections::{BTreeMap, HashMap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::combinatorics::factorial;
use crate::error::{Error, Result};
use crate::qfi::probe_qfi_with_loss;
use crate::rates::{RateModel, RateOptions};
use crate::sources::ExperimentParams;

/// Largest number of populated basis states a simulation may hold.
pub const MAX_BASIS_STATES: usize = 1 << 21;

/// Largest pair cutoff accepted by [`brute_force_rate`].
pub const MAX_ORACLE_PAIRS: usize = 6;

/// Real amplitudes over occupation tuples. Every operation used here is a
/// real orthogonal map, so complex amplitudes are never needed.
#[derive(Debug, Clone)]
pub struct MultiModePureState {
    labels: Vec<String>,
    amplitudes: HashMap<Vec<u8>, f64>,
    limit: usize,
}

impl MultiModePureState {
    pub fn vacuum(labels: &[&str]) -> Self {
        let mut amplitudes = HashMap::new();
        amplitudes.insert(vec![0; labels.len()], 1.0);
        Self {
            labels: labels.iter().map(|s| s.to_string()).collect(),
            amplitudes,
            limit: MAX_BASIS_STATES,
        }
    }

    /// Fock state with the given occupation of each labelled mode.
    pub fn fock(labels: &[&str], occupations: &[u8]) -> Self {
        assert_eq!(labels.len(), occupations.len(), "one occupation per mode");
        let mut state = Self::vacuum(labels);
        state.amplitudes = HashMap::from([(occupations.to_vec(), 1.0)]);
        state
    }

    pub fn with_limit(mut self, limit: usize) -> Self {
        self.limit = limit;
        self
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn mode(&self, label: &str) -> usize {
        self.labels
            .iter()
            .position(|l| l == label)
            .unwrap_or_else(|| panic!("no mode labelled {label}"))
    }

    pub fn len(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.amplitudes.is_empty()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.values().map(|a| a * a).sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[u8], f64)> {
        self.amplitudes.iter().map(|(k, &v)| (k.as_slice(), v))
    }

    /// Appends a vacuum mode and returns its index.
    pub fn add_mode(&mut self, label: &str) -> usize {
        self.labels.push(label.to_string());
        let old = std::mem::take(&mut self.amplitudes);
        self.amplitudes = old
            .into_iter()
            .map(|(mut k, v)| {
                k.push(0);
                (k, v)
            })
            .collect();
        self.labels.len() - 1
    }

    /// Replaces the state by `sum_n c_n |n, n>` on modes `(a, b)`, which must
    /// currently be empty.
    pub fn prepare_pairs(&mut self, a: usize, b: usize, coefficients: &[f64]) -> Result<()> {
        let mut out = HashMap::new();
        for (key, amp) in &self.amplitudes {
            assert!(key[a] == 0 && key[b] == 0, "pair modes must start empty");
            for (n, c) in coefficients.iter().enumerate() {
                if *c == 0.0 {
                    continue;
                }
                let mut k = key.clone();
                k[a] = n as u8;
                k[b] = n as u8;
                *out.entry(k).or_insert(0.0) += amp * c;
            }
        }
        self.replace(out)
    }

    fn replace(&mut self, amplitudes: HashMap<Vec<u8>, f64>) -> Result<()> {
        if amplitudes.len() > self.limit {
            return Err(Error::StateSpaceOverflow {
                size: amplitudes.len(),
                limit: self.limit,
            });
        }
        self.amplitudes = amplitudes;
        Ok(())
    }

    /// Two-mode beam splitter `a† -> t a† + r b†`, `b† -> -r a† + t b†`
    /// with `t^2 + r^2 = 1`.
    pub fn beam_splitter(&mut self, a: usize, b: usize, t: f64, r: f64) -> Result<()> {
        let mut out: HashMap<Vec<u8>, f64> = HashMap::with_capacity(self.amplitudes.len());
        for (key, amp) in &self.amplitudes {
            let (p, q) = (key[a] as usize, key[b] as usize);
            let norm = 1.0 / (factorial(p) * factorial(q)).sqrt();
            // (t a† + r b†)^p (-r a† + t b†)^q |0,0>
            for k in 0..=p {
                let ck = choose(p, k) * t.powi(k as i32) * r.powi((p - k) as i32);
                if ck == 0.0 {
                    continue;
                }
                for l in 0..=q {
                    let cl = choose(q, l) * (-r).powi(l as i32) * t.powi((q - l) as i32);
                    if cl == 0.0 {
                        continue;
                    }
                    let na = k + l;
                    let nb = p + q - na;
                    let c = ck * cl * norm * (factorial(na) * factorial(nb)).sqrt();
                    let mut nk = key.clone();
                    nk[a] = na as u8;
                    nk[b] = nb as u8;
                    *out.entry(nk).or_insert(0.0) += amp * c;
                }
            }
        }
        out.retain(|_, v| *v != 0.0);
        self.replace(out)
    }

    /// Loss channel of transmissivity `eta` on `mode`, dilated with a fresh
    /// ancilla mode.
    pub fn lose(&mut self, mode: usize, eta: f64, ancilla: &str) -> Result<usize> {
        let anc = self.add_mode(ancilla);
        self.beam_splitter(mode, anc, eta.sqrt(), (1.0 - eta).sqrt())?;
        Ok(anc)
    }

    /// Probability of each joint outcome on `modes`; every other mode is
    /// traced out.
    pub fn marginal(&self, modes: &[usize]) -> BTreeMap<Vec<usize>, f64> {
        let mut out = BTreeMap::new();
        for (key, amp) in &self.amplitudes {
            let outcome: Vec<usize> = modes.iter().map(|&m| key[m] as usize).collect();
            *out.entry(outcome).or_insert(0.0) += amp * amp;
        }
        out
    }
}

fn choose(n: usize, k: usize) -> f64 {
    (factorial(n) / (factorial(k) * factorial(n - k))).round()
}

/// Joint distribution of `(s1, s2, h1, h2)` per pulse, built as the full
/// pure state of sources, losses and interferometer with `pairs` as the
/// pair cutoff of each source. The signal of source 1 is split into an
/// overlapping and an orthogonal mode with transmissivity `overlap`; each
/// detector counts both.
pub fn brute_force_distribution(
    phi: f64,
    params: &ExperimentParams,
    pairs: usize,
) -> Result<BTreeMap<[usize; 4], f64>> {
    if pairs > MAX_ORACLE_PAIRS {
        return Err(Error::StateSpaceOverflow {
            size: pairs,
            limit: MAX_ORACLE_PAIRS,
        });
    }
    params.validate_ranges()?;
    let mut st = MultiModePureState::vacuum(&["h1", "s1", "h2", "s2", "s1_perp", "s2_perp"]);
    let (h1, s1, h2, s2, p1, p2) = (0, 1, 2, 3, 4, 5);
    for (lambda, a, b) in [(params.lambda1, h1, s1), (params.lambda2, h2, s2)] {
        let c: Vec<f64> = (0..=pairs)
            .map(|n| (1.0 - lambda * lambda).sqrt() * lambda.powi(n as i32))
            .collect();
        st.prepare_pairs(a, b, &c)?;
    }
    st.lose(h1, params.eta_h1, "loss_h1")?;
    st.lose(s1, params.eta_s1, "loss_s1")?;
    st.lose(h2, params.eta_h2, "loss_h2")?;
    st.lose(s2, params.eta_s2, "loss_s2")?;
    st.beam_splitter(s1, p1, params.overlap.sqrt(), (1.0 - params.overlap).sqrt())?;
    let (t, r) = ((0.5 * phi).cos(), (0.5 * phi).sin());
    st.beam_splitter(s1, s2, t, r)?;
    st.beam_splitter(p1, p2, t, r)?;
    st.lose(s1, params.eta_d1, "loss_d1")?;
    st.lose(p1, params.eta_d1, "loss_d1_perp")?;
    st.lose(s2, params.eta_d2, "loss_d2")?;
    st.lose(p2, params.eta_d2, "loss_d2_perp")?;
    let marginal = st.marginal(&[s1, p1, s2, p2, h1, h2]);
    let mut out = BTreeMap::new();
    for (k, p) in marginal {
        *out.entry([k[0] + k[1], k[2] + k[3], k[4], k[5]]).or_insert(0.0) += p;
    }
    Ok(out)
}

/// Probability of the `(s1, s2, h1, h2)` outcome from [`brute_force_distribution`].
pub fn brute_force_rate(
    s1: usize,
    s2: usize,
    h1: usize,
    h2: usize,
    phi: f64,
    params: &ExperimentParams,
    pairs: usize,
) -> Result<f64> {
    let dist = brute_force_distribution(phi, params, pairs)?;
    Ok(dist.get(&[s1, s2, h1, h2]).copied().unwrap_or(0.0))
}

/// Eigen-decomposition of a real symmetric matrix by cyclic Jacobi rotations.
/// Returns eigenvalues and eigenvectors as columns of a row-major matrix.
#[allow(clippy::needless_range_loop)]
pub fn jacobi_eigen(matrix: &[Vec<f64>]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = matrix.len();
    let mut a: Vec<Vec<f64>> = matrix.to_vec();
    let mut v: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();
    let scale: f64 = a
        .iter()
        .flatten()
        .map(|x| x * x)
        .sum::<f64>()
        .sqrt()
        .max(f64::MIN_POSITIVE);
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i][j] * a[i][j])
            .sum::<f64>()
            .sqrt();
        if off <= 1e-15 * scale {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q].abs() <= 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[k][p], a[k][q]);
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for row in v.iter_mut() {
                    let (vp, vq) = (row[p], row[q]);
                    row[p] = c * vp - s * vq;
                    row[q] = s * vp + c * vq;
                }
            }
        }
    }
    ((0..n).map(|i| a[i][i]).collect(), v)
}

/// QFI of the lossy generalized Holland-Burnett probe: `|h1, h2>` through
/// the balanced beam splitter, then loss `eta_s` in both arms via ancillas,
/// then the reduced state diagonalized by Jacobi rotations. Generator is the
/// photon number of the first arm.
pub fn brute_force_qfi(h1: usize, h2: usize, eta_s: f64, cutoff: usize) -> Result<f64> {
    if h1 + h2 > cutoff {
        return Err(Error::StateSpaceOverflow {
            size: h1 + h2,
            limit: cutoff,
        });
    }
    crate::error::check_unit_interval("eta_s", eta_s)?;
    let mut st = MultiModePureState::vacuum(&["a", "b"]);
    st.amplitudes = HashMap::from([(vec![h1 as u8, h2 as u8], 1.0)]);
    let h = std::f64::consts::FRAC_1_SQRT_2;
    st.beam_splitter(0, 1, h, h)?;
    st.lose(0, eta_s, "loss_a")?;
    st.lose(1, eta_s, "loss_b")?;

    // reduced density matrix on (a, b), ancillas traced out
    let mut basis: Vec<(u8, u8)> = st.iter().map(|(k, _)| (k[0], k[1])).collect();
    basis.sort_unstable();
    basis.dedup();
    let index: HashMap<(u8, u8), usize> = basis.iter().enumerate().map(|(i, &b)| (b, i)).collect();
    let mut by_ancilla: HashMap<(u8, u8), Vec<(usize, f64)>> = HashMap::new();
    for (k, amp) in st.iter() {
        by_ancilla
            .entry((k[2], k[3]))
            .or_default()
            .push((index[&(k[0], k[1])], amp));
    }
    let n = basis.len();
    let mut rho = vec![vec![0.0; n]; n];
    for vec in by_ancilla.values() {
        for &(i, a) in vec {
            for &(j, b) in vec {
                rho[i][j] += a * b;
            }
        }
    }
    let (values, vectors) = jacobi_eigen(&rho);
    let number: Vec<f64> = basis.iter().map(|&(a, _)| a as f64).collect();
    let mut q = 0.0;
    for i in 0..n {
        for j in 0..n {
            let (pi, pj) = (values[i].max(0.0), values[j].max(0.0));
            if pi + pj < 1e-12 {
                continue;
            }
            // generator is diagonal in the Fock basis
            let g: f64 = (0..n).map(|k| vectors[k][i] * number[k] * vectors[k][j]).sum();
            q += 2.0 * (pi - pj).powi(2) / (pi + pj) * g * g;
        }
    }
    Ok(q)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleReport {
    pub seed: u64,
    pub cases: usize,
    pub max_rate_deviation: f64,
    pub max_qfi_deviation: f64,
    /// `(s1, s2, h1, h2, phi)` of the worst rate case.
    pub worst_rate_case: Option<(usize, usize, usize, usize, f64)>,
    pub worst_qfi_case: Option<(usize, usize, f64)>,
}

impl OracleReport {
    pub fn passes(&self, tol: f64) -> bool {
        self.max_rate_deviation <= tol && self.max_qfi_deviation <= tol
    }
}

/// Seeded comparison of the factorized rate and QFI pipelines against the
/// brute-force constructions. Each case draws a pair cutoff of at most three
/// per source (at most six photons in the interferometer), gains, losses,
/// overlap, phase and outcome; the rate model runs with the same exact
/// truncation and enough detector-loss depth to be exact.
pub fn oracle_check(seed: u64, cases: usize) -> Result<OracleReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = OracleReport {
        seed,
        cases,
        max_rate_deviation: 0.0,
        max_qfi_deviation: 0.0,
        worst_rate_case: None,
        worst_qfi_case: None,
    };
    for _ in 0..cases {
        let pairs = rng.random_range(1..=3usize);
        let eta = |rng: &mut ChaCha8Rng| rng.random_range(0.3..=1.0);
        let overlap = match rng.random_range(0..3) {
            0 => 0.0,
            1 => 1.0,
            _ => rng.random_range(0.0..=1.0),
        };
        let params = ExperimentParams {
            lambda1: rng.random_range(0.0..0.7),
            lambda2: rng.random_range(0.0..0.7),
            eta_h1: eta(&mut rng),
            eta_h2: eta(&mut rng),
            eta_s1: eta(&mut rng),
            eta_s2: eta(&mut rng),
            eta_d1: eta(&mut rng),
            eta_d2: eta(&mut rng),
            overlap,
            cutoff: pairs,
        };
        let phi = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
        let h1 = rng.random_range(0..=pairs);
        let h2 = rng.random_range(0..=pairs);
        let s1 = rng.random_range(0..=2 * pairs);
        let s2 = rng.random_range(0..=2 * pairs - s1);

        let options = RateOptions {
            detector_loss_depth: 2 * pairs,
        };
        let model = RateModel::with_exact_truncation(params, options, true)?;
        let factorized = model.rate(s1, s2, h1, h2, phi).prob;
        let brute = brute_force_rate(s1, s2, h1, h2, phi, &params, pairs)?;
        let dev = (factorized - brute).abs();
        if dev >= report.max_rate_deviation {
            report.max_rate_deviation = dev;
            report.worst_rate_case = Some((s1, s2, h1, h2, phi));
        }

        let total = rng.random_range(0..=6usize);
        let a = rng.random_range(0..=total);
        let eta_s = rng.random_range(0.0..=1.0);
        let dev = (probe_qfi_with_loss(a, total - a, eta_s)? - brute_force_qfi(a, total - a, eta_s, 6)?).abs();
        if dev >= report.max_qfi_deviation {
            report.max_qfi_deviation = dev;
            report.worst_qfi_case = Some((a, total - a, eta_s));
        }
    }
    Ok(report)
}
