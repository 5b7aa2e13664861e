//! Experiment configuration: defaults mirror the reference setup (SNR 10-30
//! dB in 5 dB steps, alphabet exponents 2-14, 10^4 coherence blocks, one-bit
//! keys at a 1e-2 mismatch bound), all overridable by flags or a TOML/JSON
//! config file.

use anyhow::{bail, Context, Result};
use ringkey_core::protocol::ProtocolKind;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
pub enum DesignPair {
    #[serde(rename = "12")]
    #[value(name = "12")]
    Nodes12,
    #[serde(rename = "13")]
    #[value(name = "13")]
    Nodes13,
    #[serde(rename = "23")]
    #[value(name = "23")]
    Nodes23,
}

impl fmt::Display for DesignPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            DesignPair::Nodes12 => "12",
            DesignPair::Nodes13 => "13",
            DesignPair::Nodes23 => "23",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ConstellationMode {
    /// Quantile regions and centroid levels: uniform quantizer output.
    Uniform,
    /// Regular square QAM at unit average energy, nearest-neighbor regions.
    Qam,
}

impl fmt::Display for ConstellationMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ConstellationMode::Uniform => "uniform",
            ConstellationMode::Qam => "qam",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub protocol: ProtocolKind,
    pub snr_db: Vec<f64>,
    pub m: Vec<u32>,
    pub b: u32,
    pub beta: f64,
    /// Fixed confusion budget; `None` searches the default grid.
    pub eta: Option<f64>,
    pub blocks: u64,
    pub e_max: u32,
    pub seed: u64,
    pub design_pair: DesignPair,
    pub constellation: ConstellationMode,
    pub workers: Option<usize>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            protocol: ProtocolKind::Asqgsk,
            snr_db: vec![10.0, 15.0, 20.0, 25.0, 30.0],
            m: vec![2, 4, 6, 8, 10, 12, 14],
            b: 1,
            beta: 1e-2,
            eta: None,
            blocks: 10_000,
            e_max: 8,
            seed: 1,
            design_pair: DesignPair::Nodes23,
            constellation: ConstellationMode::Uniform,
            workers: None,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.blocks == 0 {
            bail!("blocks must be at least 1");
        }
        if !(self.beta > 0.0) {
            bail!("beta must be positive, got {}", self.beta);
        }
        if self.b == 0 || self.b > 8 {
            bail!("b must be in 1..=8, got {}", self.b);
        }
        if self.snr_db.is_empty() || self.m.is_empty() {
            bail!("snr_db and m grids must be nonempty");
        }
        for &m in &self.m {
            if m == 0 || m % 2 != 0 || m > 20 {
                bail!("alphabet exponent m must be even and in 2..=20, got {m}");
            }
        }
        if let Some(eta) = self.eta {
            if !(eta > 0.0) {
                bail!("eta must be positive, got {eta}");
            }
        }
        Ok(())
    }

    /// Reads a TOML or JSON config file (decided by extension, with a
    /// fallback attempt on the other format).
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let by_ext = path.extension().and_then(|e| e.to_str()).unwrap_or("");
        let cfg: Self = match by_ext {
            "json" => serde_json::from_str(&text)
                .with_context(|| format!("parsing JSON config {}", path.display()))?,
            "toml" => toml::from_str(&text)
                .with_context(|| format!("parsing TOML config {}", path.display()))?,
            _ => toml::from_str(&text)
                .or_else(|_| serde_json::from_str(&text))
                .with_context(|| format!("parsing config {}", path.display()))?,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Common output-directory argument shared by subcommands.
pub fn prepare_out_dir(dir: &PathBuf) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}
