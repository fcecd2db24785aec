//! Experiment configuration: a TOML file with flag overrides on top.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Deserialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    /// Convergence of `P_h` and `tilde R_h` for a smooth and a discontinuous target.
    Project,
    /// Deterministic Barenblatt error tables.
    ConvergeDet,
    /// Monte-Carlo error tables for linear multiplicative noise.
    ConvergeStoch,
    /// Trajectories and supports under discrete space-time noise.
    Spacetime,
    /// Discrete vs analytic support per time step.
    Support,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::Project => "project",
            Self::ConvergeDet => "converge-det",
            Self::ConvergeStoch => "converge-stoch",
            Self::Spacetime => "spacetime",
            Self::Support => "support",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    #[serde(rename = "J")]
    pub j_list: Vec<usize>,
    #[serde(rename = "N")]
    pub n_list: Vec<usize>,
    /// Run only the pairs `(J[k], N[k])` instead of the full cross product.
    pub paired: bool,
    pub p: f64,
    pub d: usize,
    #[serde(rename = "L")]
    pub half_width: f64,
    #[serde(rename = "T")]
    pub final_time: f64,
    pub t_lo: f64,
    /// Amplitude of the linear noise `σ(u) = sigma u`.
    pub sigma: f64,
    /// Amplitude of the space-time noise.
    pub sigma0: f64,
    /// Declared `λ_B` for the space-time model.
    pub lambda_b: Option<f64>,
    pub samples: usize,
    pub seed: u64,
    pub out: PathBuf,
    pub quad_order: usize,
    /// Exponent of the error norm in the projection study; `p` if unset.
    pub norm_exponent: Option<f64>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            experiment: ExperimentKind::ConvergeDet,
            j_list: vec![8, 16, 32, 64, 128, 256],
            n_list: vec![8, 16, 32, 64, 128, 256, 512, 1024],
            paired: false,
            p: 3.0,
            d: 1,
            half_width: 1.5,
            final_time: 0.1,
            t_lo: 0.01,
            sigma: 1.0,
            sigma0: 1.0 / 64.0,
            lambda_b: None,
            samples: 1000,
            seed: 0,
            out: PathBuf::from("out"),
            quad_order: 3,
            norm_exponent: None,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).context("invalid experiment configuration")
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::from_toml_str(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.j_list.is_empty() || self.n_list.is_empty() {
            bail!("grid and step lists must be nonempty");
        }
        if self.paired && self.j_list.len() != self.n_list.len() {
            bail!("paired runs need J and N lists of equal length");
        }
        if !(self.final_time > self.t_lo && self.t_lo > 0.0) {
            bail!("need T > t_lo > 0");
        }
        if !(self.d == 1 || self.d == 2) {
            bail!("dimension must be 1 or 2");
        }
        if !(self.half_width > 0.0) {
            bail!("L must be positive");
        }
        if self.quad_order == 0 {
            bail!("quadrature order must be positive");
        }
        if self.norm_exponent.is_some_and(|q| !(q >= 1.0)) {
            bail!("norm exponent must be at least 1");
        }
        if self.samples == 0 {
            bail!("need at least one sample");
        }
        Ok(())
    }

    /// `(J, N)` pairs in run order: N-major, J-minor.
    pub fn pairs(&self) -> Vec<(usize, usize)> {
        if self.paired {
            self.j_list.iter().copied().zip(self.n_list.iter().copied()).collect()
        } else {
            self.n_list.iter().flat_map(|&n| self.j_list.iter().map(move |&j| (j, n))).collect()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_partial_toml() {
        let c = ExperimentConfig::from_toml_str(
            "experiment = \"converge-stoch\"\nJ = [16, 32]\nN = [32, 64]\npaired = true\nsamples = 10\n",
        )
        .unwrap();
        assert_eq!(c.experiment, ExperimentKind::ConvergeStoch);
        assert_eq!(c.pairs(), vec![(16, 32), (32, 64)]);
        assert_eq!(c.p, 3.0);
        c.validate().unwrap();
    }

    #[test]
    fn rejects_unknown_keys_and_bad_times() {
        assert!(ExperimentConfig::from_toml_str("bogus = 1").is_err());
        let c = ExperimentConfig { t_lo: 0.2, ..Default::default() };
        assert!(c.validate().is_err());
    }

    #[test]
    fn cross_product_order() {
        let c = ExperimentConfig { j_list: vec![8, 16], n_list: vec![4, 8], ..Default::default() };
        assert_eq!(c.pairs(), vec![(8, 4), (16, 4), (8, 8), (16, 8)]);
    }
}
