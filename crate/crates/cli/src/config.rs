//! Run configuration: JSON file values, overridden by command-line flags,
//! falling back to per-command defaults.

use std::path::PathBuf;

use ghb_core::fisher::PhotonReference;
use ghb_core::inference::FixedMask;
use ghb_core::io::parse_grid;
use ghb_core::sources::ExperimentParams;
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Every field is optional; unset fields take the command's default.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub params: Option<ExperimentParams>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub photons: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub probe: Option<[usize; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub overlap_grid: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub postselect: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub distinguishable: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reference: Option<PhotonReference>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_outcome: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_sets: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cases: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fixed: Option<FixedMask>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub data: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fit: Option<PathBuf>,
}

pub const MAX_PHOTONS: usize = 40;
pub const MAX_SETS: usize = 10_000;

fn invalid(field: &str, reason: impl std::fmt::Display) -> CliError {
    CliError::Validation(format!("field `{field}`: {reason}"))
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Validation(format!("config: {e}")))
    }

    /// Fields set in `over` replace those in `self`.
    pub fn merged(self, over: RunConfig) -> RunConfig {
        RunConfig {
            params: over.params.or(self.params),
            photons: over.photons.or(self.photons),
            probe: over.probe.or(self.probe),
            grid: over.grid.or(self.grid),
            overlap_grid: over.overlap_grid.or(self.overlap_grid),
            eta: over.eta.or(self.eta),
            lambda: over.lambda.or(self.lambda),
            postselect: over.postselect.or(self.postselect),
            distinguishable: over.distinguishable.or(self.distinguishable),
            reference: over.reference.or(self.reference),
            max_outcome: over.max_outcome.or(self.max_outcome),
            seed: over.seed.or(self.seed),
            n_sets: over.n_sets.or(self.n_sets),
            cases: over.cases.or(self.cases),
            fixed: over.fixed.or(self.fixed),
            data: over.data.or(self.data),
            fit: over.fit.or(self.fit),
        }
    }

    /// Checks every set field, naming the first offending one.
    pub fn validate(&self) -> Result<(), CliError> {
        if let Some(p) = &self.params {
            p.validate().map_err(|e| invalid("params", e))?;
        }
        if let Some(n) = self.photons {
            if n == 0 || n > MAX_PHOTONS {
                return Err(invalid("photons", format!("must be in 1..={MAX_PHOTONS}, got {n}")));
            }
        }
        if let Some([a, b]) = self.probe {
            if a + b > MAX_PHOTONS {
                return Err(invalid("probe", format!("at most {MAX_PHOTONS} photons in total")));
            }
        }
        for (name, grid) in [("grid", &self.grid), ("overlap_grid", &self.overlap_grid)] {
            if let Some(g) = grid {
                parse_grid(g).map_err(|e| invalid(name, e))?;
            }
        }
        if let Some(e) = self.eta {
            if !(e > 0.0 && e <= 1.0) {
                return Err(invalid("eta", format!("must be in (0, 1], got {e}")));
            }
        }
        if let Some(l) = self.lambda {
            if !(0.0..1.0).contains(&l) {
                return Err(invalid("lambda", format!("must be in [0, 1), got {l}")));
            }
        }
        if let Some(n) = self.n_sets {
            if n == 0 || n > MAX_SETS {
                return Err(invalid("n_sets", format!("must be in 1..={MAX_SETS}, got {n}")));
            }
        }
        if let Some(0) = self.cases {
            return Err(invalid("cases", "must be positive"));
        }
        Ok(())
    }

    pub fn params(&self) -> ExperimentParams {
        self.params.unwrap_or_default()
    }

    pub fn photons(&self) -> usize {
        self.photons.unwrap_or(8)
    }

    pub fn probe(&self) -> (usize, usize) {
        let [a, b] = self.probe.unwrap_or([1, 1]);
        (a, b)
    }

    pub fn grid_or(&self, default: &str) -> Result<Vec<f64>, CliError> {
        let spec = self.grid.as_deref().unwrap_or(default);
        parse_grid(spec).map_err(|e| invalid("grid", e))
    }

    pub fn overlap_grid(&self) -> Result<Vec<f64>, CliError> {
        let spec = self.overlap_grid.as_deref().unwrap_or("0.7:1:0.05");
        let grid = parse_grid(spec).map_err(|e| invalid("overlap_grid", e))?;
        if grid.iter().any(|m| !(0.0..=1.0 + 1e-12).contains(m)) {
            return Err(invalid("overlap_grid", "values must lie in [0, 1]"));
        }
        Ok(grid.into_iter().map(|m| m.min(1.0)).collect())
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    pub fn required_path(&self, field: &str) -> Result<PathBuf, CliError> {
        let p = match field {
            "data" => &self.data,
            "fit" => &self.fit,
            _ => unreachable!("no path field {field}"),
        };
        p.clone().ok_or_else(|| invalid(field, "is required for this command"))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }
}
