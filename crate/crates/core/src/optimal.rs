//! Loss-optimal N-photon probes.
//!
//! A pure state `sum_n alpha_n |n, N-n>` inside the interferometer degrades
//! under loss into a mixture of the branches where `l` photons were lost from
//! mode `c` and `m` from mode `d`. The QFI of that mixture is bounded above by
//! the weighted branch variances, which depends only on `x_n = |alpha_n|^2`
//! and is concave in `x`. The bound is maximized over the probability simplex
//! by projected-gradient ascent.
//!
//! The bound is attained when the branches are orthogonal (one lossy mode, or
//! N00N states). With loss in both modes it slightly over-estimates the true
//! QFI, whereas [`crate::qfi::probe_qfi_with_loss`] is exact.

use serde::Serialize;

use crate::combinatorics::binomial_pmf;
use crate::error::{check_unit_interval, Error, Result};
use crate::fock::{apply_balanced_bs, TwoModePureState};
use crate::qfi::probe_qfi_with_loss;

const CONVERGENCE_TOL: f64 = 1e-10;
const MAX_ITERATIONS: usize = 200_000;
const ARMIJO: f64 = 1e-4;

#[derive(Debug, Clone, Serialize)]
pub struct OptimalStateResult {
    /// `x_n` for `n = 0..=N` photons in mode `c`.
    pub x: Vec<f64>,
    pub qfi: f64,
    pub photons: usize,
    pub eta_s1: f64,
    pub eta_s2: f64,
    pub iterations: usize,
}

/// Branch weights `B[l][m][n]` for `n` photons in mode `c`, `N - n` in `d`.
struct BranchTable {
    photons: usize,
    branches: Vec<Branch>,
}

/// Photons lost from `c` and `d`, with the nonzero `(n, B)` entries.
type Branch = (usize, usize, Vec<(usize, f64)>);

impl BranchTable {
    fn new(photons: usize, eta1: f64, eta2: f64) -> Self {
        let mut branches = Vec::new();
        for l in 0..=photons {
            for m in 0..=photons - l {
                let entries: Vec<(usize, f64)> = (l..=photons - m)
                    .filter_map(|n| {
                        let b = binomial_pmf(n, n - l, eta1) * binomial_pmf(photons - n, photons - n - m, eta2);
                        (b > 0.0).then_some((n, b))
                    })
                    .collect();
                if !entries.is_empty() {
                    branches.push((l, m, entries));
                }
            }
        }
        Self { photons, branches }
    }

    fn value(&self, x: &[f64]) -> f64 {
        let second: f64 = x.iter().enumerate().map(|(n, &xn)| (n * n) as f64 * xn).sum();
        let mut penalty = 0.0;
        for (_, _, entries) in &self.branches {
            let (a, d) = entries
                .iter()
                .fold((0.0, 0.0), |(a, d), &(n, b)| (a + x[n] * n as f64 * b, d + x[n] * b));
            if d > 0.0 {
                penalty += a * a / d;
            }
        }
        4.0 * (second - penalty)
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let mut g: Vec<f64> = (0..=self.photons).map(|n| (n * n) as f64).collect();
        for (_, _, entries) in &self.branches {
            let (a, d) = entries
                .iter()
                .fold((0.0, 0.0), |(a, d), &(n, b)| (a + x[n] * n as f64 * b, d + x[n] * b));
            for &(n, b) in entries {
                // empty branch: directional derivative along e_n
                let ratio = if d > 0.0 { a / d } else { n as f64 };
                g[n] -= b * (2.0 * ratio * n as f64 - ratio * ratio);
            }
        }
        g.iter_mut().for_each(|v| *v *= 4.0);
        g
    }
}

/// Euclidean projection onto the probability simplex.
pub fn project_to_simplex(v: &[f64]) -> Vec<f64> {
    let mut sorted = v.to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    let mut cumulative = 0.0;
    let mut theta = 0.0;
    for (i, &u) in sorted.iter().enumerate() {
        cumulative += u;
        let t = (cumulative - 1.0) / (i + 1) as f64;
        if u - t > 0.0 {
            theta = t;
        }
    }
    v.iter().map(|&vi| (vi - theta).max(0.0)).collect()
}

/// Concave QFI bound of a probe with photon distribution `x` over `|n, N-n>`.
pub fn qfi_bound(x: &[f64], eta_s1: f64, eta_s2: f64) -> f64 {
    let photons = x.len().saturating_sub(1);
    BranchTable::new(photons, eta_s1, eta_s2).value(x)
}

/// Photon distribution `|<n, N-n| U_BS |h1, h2>|^2` of a heralded probe.
pub fn probe_distribution(h1: usize, h2: usize) -> Vec<f64> {
    let psi = apply_balanced_bs(&TwoModePureState::fock(h1, h2));
    let total = h1 + h2;
    (0..=total).map(|n| psi.amplitude(n, total - n).norm_sqr()).collect()
}

fn ascend(table: &BranchTable, start: Vec<f64>) -> (Vec<f64>, f64, usize) {
    let mut x = project_to_simplex(&start);
    let mut value = table.value(&x);
    let mut step = 1e-2;
    for iter in 1..=MAX_ITERATIONS {
        let g = table.gradient(&x);
        let mut accepted = None;
        let mut t = step * 2.0;
        for _ in 0..60 {
            let trial: Vec<f64> = x.iter().zip(&g).map(|(xi, gi)| xi + t * gi).collect();
            let candidate = project_to_simplex(&trial);
            let predicted: f64 = g
                .iter()
                .zip(candidate.iter().zip(&x))
                .map(|(gi, (c, xi))| gi * (c - xi))
                .sum();
            let cand_value = table.value(&candidate);
            if cand_value >= value + ARMIJO * predicted {
                accepted = Some((candidate, cand_value));
                break;
            }
            t *= 0.5;
        }
        let Some((next, next_value)) = accepted else {
            return (x, value, iter);
        };
        step = t;
        let improvement = next_value - value;
        x = next;
        value = next_value;
        if improvement < CONVERGENCE_TOL {
            return (x, value, iter);
        }
    }
    (x, value, MAX_ITERATIONS)
}

/// Maximizes the QFI bound over all `N`-photon probes, restarting from a
/// uniform, a N00N-like and a Holland-Burnett-like distribution.
pub fn optimal_state(photons: usize, eta_s1: f64, eta_s2: f64) -> Result<OptimalStateResult> {
    check_unit_interval("eta_s1", eta_s1)?;
    check_unit_interval("eta_s2", eta_s2)?;
    if eta_s1 == 0.0 || eta_s2 == 0.0 {
        return Err(Error::Domain {
            name: "eta_s",
            value: 0.0,
            reason: "must be positive",
        });
    }
    let table = BranchTable::new(photons, eta_s1, eta_s2);
    let dim = photons + 1;
    let uniform = vec![1.0 / dim as f64; dim];
    let mut noon = vec![0.0; dim];
    noon[0] += 0.5;
    noon[photons] += 0.5;
    let holland_burnett = probe_distribution(photons - photons / 2, photons / 2);

    let mut best: Option<(Vec<f64>, f64, usize)> = None;
    let mut total_iterations = 0;
    for start in [uniform, noon, holland_burnett] {
        let (x, value, iters) = ascend(&table, start);
        total_iterations += iters;
        if best.as_ref().is_none_or(|(_, v, _)| value > *v) {
            best = Some((x, value, iters));
        }
    }
    let (x, qfi, _) = best.expect("at least one restart");
    Ok(OptimalStateResult {
        x,
        qfi,
        photons,
        eta_s1,
        eta_s2,
        iterations: total_iterations,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QfiCurveRow {
    pub eta_s: f64,
    /// `None` for the optimal-state envelope.
    pub delta: Option<usize>,
    pub h1: Option<usize>,
    pub h2: Option<usize>,
    pub qfi: f64,
    /// `Q / (eta_s N)`; `None` at `eta_s = 0`.
    pub qfi_per_detected_photon: Option<f64>,
}

/// QFI against balanced signal loss for every `N`-photon heralded probe,
/// optionally followed by the optimal-state envelope at each `eta_s`.
pub fn qfi_curve(photons: usize, eta_grid: &[f64], envelope: bool) -> Result<Vec<QfiCurveRow>> {
    let mut rows = Vec::new();
    for &eta in eta_grid {
        check_unit_interval("eta_s", eta)?;
        let per_photon = |q: f64| (eta > 0.0).then(|| q / (eta * photons as f64));
        for h2 in 0..=photons / 2 {
            let h1 = photons - h2;
            let q = probe_qfi_with_loss(h1, h2, eta)?;
            rows.push(QfiCurveRow {
                eta_s: eta,
                delta: Some(h1 - h2),
                h1: Some(h1),
                h2: Some(h2),
                qfi: q,
                qfi_per_detected_photon: per_photon(q),
            });
        }
        if envelope && eta > 0.0 {
            let q = optimal_state(photons, eta, eta)?.qfi;
            rows.push(QfiCurveRow {
                eta_s: eta,
                delta: None,
                h1: None,
                h2: None,
                qfi: q,
                qfi_per_detected_photon: per_photon(q),
            });
        }
    }
    Ok(rows)
}

/// Grid range over which one imbalance has the largest QFI.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DeltaInterval {
    pub delta: usize,
    /// First and last grid points where `delta` is best.
    pub eta_first: f64,
    pub eta_last: f64,
}

/// Best imbalance at every positive grid point, merged into runs. Ties go
/// to the larger imbalance.
pub fn best_delta_intervals(photons: usize, eta_grid: &[f64]) -> Result<Vec<DeltaInterval>> {
    let mut out: Vec<DeltaInterval> = Vec::new();
    for &eta in eta_grid.iter().filter(|&&e| e > 0.0) {
        let mut best = (0, f64::MIN);
        for h2 in 0..=photons / 2 {
            let q = probe_qfi_with_loss(photons - h2, h2, eta)?;
            if q > best.1 {
                best = (photons - 2 * h2, q);
            }
        }
        match out.last_mut() {
            Some(last) if last.delta == best.0 => last.eta_last = eta,
            _ => out.push(DeltaInterval {
                delta: best.0,
                eta_first: eta,
                eta_last: eta,
            }),
        }
    }
    Ok(out)
}
