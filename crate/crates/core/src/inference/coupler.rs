//! Interferometer phase from the single-photon splitting ratio of the
//! variable coupler.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Measured `(1,0,1,0)` and `(0,1,1,0)` rates at coupler position `x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CouplerSample {
    pub x: f64,
    pub r10: f64,
    pub r01: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhasePoint {
    pub x: f64,
    /// `None` where both rates vanish.
    pub t: Option<f64>,
    pub t_corr: Option<f64>,
    pub phi: Option<f64>,
}

/// `phi = arccos(2 T_corr - 1)`, clamped to `[0, pi]`.
pub fn phase_from_transmission(t_corr: f64) -> f64 {
    (2.0 * t_corr - 1.0).clamp(-1.0, 1.0).acos()
}

/// Splitting ratio `T = r10 / (r10 + r01)`, rescaled to `[0, 1]` over the
/// scan to remove the finite visibility, then mapped to a phase.
pub fn phase_from_coupler(samples: &[CouplerSample]) -> Result<Vec<PhasePoint>> {
    for s in samples {
        for (name, v) in [("r10", s.r10), ("r01", s.r01)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Domain {
                    name,
                    value: v,
                    reason: "rates must be finite and non-negative",
                });
            }
        }
    }
    let ts: Vec<Option<f64>> = samples
        .iter()
        .map(|s| {
            let sum = s.r10 + s.r01;
            (sum > 0.0).then(|| s.r10 / sum)
        })
        .collect();
    let valid: Vec<f64> = ts.iter().flatten().copied().collect();
    if valid.is_empty() {
        return Err(Error::DegenerateData("no coupler position with a nonzero rate".into()));
    }
    let min = valid.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = valid.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if max <= min {
        return Err(Error::DegenerateData(
            "splitting ratio does not vary over the scan".into(),
        ));
    }
    Ok(samples
        .iter()
        .zip(ts)
        .map(|(s, t)| {
            let t_corr = t.map(|t| (t - min) / (max - min));
            PhasePoint {
                x: s.x,
                t,
                t_corr,
                phi: t_corr.map(phase_from_transmission),
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    #[test]
    fn transmission_endpoints() {
        assert!((phase_from_transmission(0.5) - FRAC_PI_2).abs() < 1e-15);
        assert_eq!(phase_from_transmission(1.0), 0.0);
        assert!((phase_from_transmission(0.0) - PI).abs() < 1e-15);
    }

    #[test]
    fn visibility_correction_restores_full_range() {
        let samples: Vec<CouplerSample> = (0..=20)
            .map(|i| {
                let phi = PI * i as f64 / 20.0;
                let t = 0.02 + 0.96 * 0.5 * (1.0 + phi.cos());
                CouplerSample {
                    x: i as f64,
                    r10: 1000.0 * t,
                    r01: 1000.0 * (1.0 - t),
                }
            })
            .collect();
        let out = phase_from_coupler(&samples).unwrap();
        for (i, p) in out.iter().enumerate() {
            let expected = PI * i as f64 / 20.0;
            assert!((p.phi.unwrap() - expected).abs() < 1e-6, "{i}");
        }
        assert!((out[0].t.unwrap() - 0.98).abs() < 1e-12);
    }

    #[test]
    fn dark_positions_are_marked_invalid() {
        let samples = [
            CouplerSample {
                x: 0.0,
                r10: 1.0,
                r01: 0.0,
            },
            CouplerSample {
                x: 1.0,
                r10: 0.0,
                r01: 0.0,
            },
            CouplerSample {
                x: 2.0,
                r10: 0.0,
                r01: 1.0,
            },
        ];
        let out = phase_from_coupler(&samples).unwrap();
        assert!(out[1].phi.is_none());
        assert_eq!(out[2].phi, Some(PI));
    }

    #[test]
    fn flat_scan_is_rejected() {
        let samples = [
            CouplerSample {
                x: 0.0,
                r10: 1.0,
                r01: 1.0,
            },
            CouplerSample {
                x: 1.0,
                r10: 2.0,
                r01: 2.0,
            },
        ];
        assert!(phase_from_coupler(&samples).is_err());
    }
}
