use std::path::Path;

use serde::{Deserialize, Serialize};

use super::perturb::Perturbation;
use crate::error::{Error, Result};
use crate::flow::FlowMode;
use crate::spectral_sets::IntervalSystem;

/// Which implementation of the flow step to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum FlowPath {
    #[default]
    Fast,
    Reference,
    /// Both paths, compared at every step.
    Dual,
}

/// A single self-describing experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub intervals: IntervalSystem,
    pub potential_tol: f64,
    pub potential_max_iter: usize,
    pub iso_tol: f64,
    pub torus_samples: usize,
    /// Seed for torus sampling and perturbations without their own seed.
    pub seed: u64,
    /// Torus point used as the flow start (0 is the `q = 0` point).
    pub torus_point: usize,
    /// First stored block of the flow window.
    pub window_lo: i64,
    /// Stored blocks beyond the number of flow steps.
    pub window_margin: usize,
    pub flow_steps: usize,
    pub flow_path: FlowPath,
    pub dual_tol: f64,
    pub perturbation: Perturbation,
    /// Truncation sizes for the spectral side.
    pub truncations: Vec<usize>,
    pub eta: f64,
    /// Smoothing width; `5 / N` when absent.
    pub eps: Option<f64>,
    /// Band-edge exclusion; `N^{-1/2}` when absent.
    pub edge_delta: Option<f64>,
    pub out_dir: String,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            intervals: IntervalSystem::new(-2.0, 2.0, &[(-1.0, 1.0)]).expect("valid default set"),
            potential_tol: 1e-13,
            potential_max_iter: 200,
            iso_tol: 1e-13,
            torus_samples: 8,
            seed: 1,
            torus_point: 0,
            window_lo: -8,
            window_margin: 30,
            flow_steps: 200,
            flow_path: FlowPath::Fast,
            dual_tol: 1e-10,
            perturbation: Perturbation::None,
            truncations: vec![250, 500, 1000],
            eta: 0.5,
            eps: None,
            edge_delta: None,
            out_dir: "gsmp-out".into(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let c: ExperimentConfig = serde_json::from_str(text)?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn flow_mode(&self) -> FlowMode {
        match self.flow_path {
            FlowPath::Fast => FlowMode::Fast,
            FlowPath::Reference => FlowMode::Reference,
            FlowPath::Dual => FlowMode::Dual { tol: self.dual_tol },
        }
    }

    pub fn eps_for(&self, n: usize) -> f64 {
        self.eps.unwrap_or(5.0 / n as f64)
    }

    pub fn edge_delta_for(&self, n: usize) -> f64 {
        self.edge_delta.unwrap_or((n as f64).powf(-0.5))
    }

    /// Checks tolerances, window geometry and ranges. Class membership of
    /// the perturbed start is checked when the window is built.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        for (name, x) in [("potential_tol", self.potential_tol), ("iso_tol", self.iso_tol), ("dual_tol", self.dual_tol)] {
            if !(x > 0.0 && x.is_finite()) {
                return bad(format!("{name} must be positive, got {x}"));
            }
        }
        if self.torus_samples == 0 {
            return bad("torus_samples must be positive".into());
        }
        if self.potential_max_iter == 0 {
            return bad("potential_max_iter must be positive".into());
        }
        if !(self.eta > 0.0 && self.eta < 1.0) {
            return bad(format!("eta must lie in (0, 1), got {}", self.eta));
        }
        for (name, x) in [("eps", self.eps), ("edge_delta", self.edge_delta)] {
            if let Some(x) = x {
                if !(x > 0.0 && x.is_finite()) {
                    return bad(format!("{name} must be positive, got {x}"));
                }
            }
        }
        if self.window_lo > -2 {
            return bad(format!("window_lo must be at most -2, got {}", self.window_lo));
        }
        // the flow loses one trusted block per step from the top and the
        // report reads blocks up to 2 above block 0 of the last iterate
        let hi = self.window_lo + (self.flow_steps + self.window_margin) as i64;
        if hi - (self.flow_steps as i64) < 3 {
            return bad(format!(
                "{} flow steps need window_lo + window_margin >= 3 (got {})",
                self.flow_steps,
                self.window_lo + self.window_margin as i64
            ));
        }
        if self.truncations.iter().any(|&n| n < 2) {
            return bad("truncation sizes must be at least 2".into());
        }
        if self.torus_point > 0 && self.torus_point >= self.torus_samples {
            return bad(format!("torus_point {} needs at least {} samples", self.torus_point, self.torus_point + 1));
        }
        Ok(())
    }
}
