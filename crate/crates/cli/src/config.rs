//! Layered run configuration: defaults, then an optional TOML or JSON
//! file, then command-line flags, each layer overriding the previous.

use std::path::Path;

use serde::Deserialize;

use areamatch::geometry::{ImageDims, LevelThresholds};
use areamatch::pipeline::PipelineConfig;

use crate::CmdError;

/// File-level mirror of the pipeline configuration. Every field is
/// optional; absent ones keep their defaults. Unknown keys are rejected
/// so typos fail loudly instead of silently running with defaults.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub graph: Option<GraphSection>,
    pub energy: Option<EnergySection>,
    pub lambda: Option<f64>,
    pub source_level: Option<usize>,
    pub t_as: Option<f64>,
    pub pruning: Option<bool>,
    pub crop: Option<CropSection>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphSection {
    pub t_s: Option<f64>,
    pub t_r: Option<f64>,
    /// Size-level ladder, strictly increasing, at least two entries.
    pub thresholds: Option<Vec<f64>>,
    pub delta_l: Option<f64>,
    pub delta_h: Option<f64>,
    pub work_dims: Option<DimsSection>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DimsSection {
    pub width: u32,
    pub height: u32,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnergySection {
    pub mu: Option<f64>,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub gamma: Option<f64>,
    pub t_e_max: Option<f64>,
    pub t_er: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CropSection {
    pub aspect: Option<f64>,
    pub spread: Option<f64>,
}

impl RunConfig {
    /// Parses a config file, dispatching on the `.toml` / `.json`
    /// extension.
    pub fn load(path: &Path) -> Result<RunConfig, CmdError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CmdError::input(format!("{}: {e}", path.display())))?;
        match path.extension().and_then(|e| e.to_str()) {
            Some("toml") => toml::from_str(&text)
                .map_err(|e| CmdError::input(format!("{}: {e}", path.display()))),
            Some("json") => serde_json::from_str(&text)
                .map_err(|e| CmdError::input(format!("{}: {e}", path.display()))),
            _ => Err(CmdError::input(format!(
                "{}: config file must end in .toml or .json",
                path.display()
            ))),
        }
    }

    /// Overlays this file config onto `cfg`.
    pub fn apply(&self, cfg: &mut PipelineConfig) -> Result<(), CmdError> {
        if let Some(g) = &self.graph {
            if let Some(v) = g.t_s {
                cfg.graph.t_s = v;
            }
            if let Some(v) = g.t_r {
                cfg.graph.t_r = v;
            }
            if let Some(tl) = &g.thresholds {
                cfg.graph.thresholds = LevelThresholds::new(tl.clone()).map_err(CmdError::input)?;
                // The smallest-area cutoff and the ladder's base coincide
                // by definition; follow a replaced ladder unless the file
                // also pins t_s explicitly.
                if g.t_s.is_none() {
                    cfg.graph.t_s = cfg.graph.thresholds.lower_bound(0);
                }
            }
            if let Some(v) = g.delta_l {
                cfg.graph.delta_l = v;
            }
            if let Some(v) = g.delta_h {
                cfg.graph.delta_h = v;
            }
            if let Some(d) = &g.work_dims {
                cfg.graph.work_dims = ImageDims { width: d.width, height: d.height };
            }
        }
        if let Some(e) = &self.energy {
            if let Some(v) = e.mu {
                cfg.energy.mu = v;
            }
            if let Some(v) = e.alpha {
                cfg.energy.alpha = v;
            }
            if let Some(v) = e.beta {
                cfg.energy.beta = v;
            }
            if let Some(v) = e.gamma {
                cfg.energy.gamma = v;
            }
            if let Some(v) = e.t_e_max {
                cfg.energy.t_e_max = v;
            }
            if let Some(v) = e.t_er {
                cfg.energy.t_er = v;
            }
        }
        if let Some(v) = self.lambda {
            cfg.lambda = v;
        }
        if let Some(v) = self.source_level {
            cfg.source_level = v;
        }
        if let Some(v) = self.t_as {
            cfg.t_as = v;
        }
        if let Some(v) = self.pruning {
            cfg.pruning = v;
        }
        if let Some(c) = &self.crop {
            if let Some(v) = c.aspect {
                cfg.crop.aspect = v;
            }
            if let Some(v) = c.spread {
                cfg.crop.spread = v;
            }
        }
        Ok(())
    }
}

/// Command-line overrides shared by the commands that run the pipeline.
/// Precedence: flag > config file > default.
#[derive(Debug, Clone, clap::Args)]
pub struct ConfigArgs {
    /// Configuration file (.toml or .json); flags still win.
    #[arg(long, value_name = "FILE")]
    pub config: Option<std::path::PathBuf>,

    /// Pairwise coupling strength of the labeling energy.
    #[arg(long, value_name = "NUM")]
    pub lambda: Option<f64>,

    /// Size level whose areas act as match sources.
    #[arg(long, value_name = "LEVEL")]
    pub source_level: Option<usize>,

    /// Similarity threshold under which children pairs are pruned.
    #[arg(long, value_name = "NUM")]
    pub t_as: Option<f64>,

    /// Enable or disable similarity pruning.
    #[arg(long, value_name = "BOOL")]
    pub pruning: Option<bool>,

    /// Maximum aspect ratio accepted by graph preprocessing.
    #[arg(long, value_name = "NUM")]
    pub t_r: Option<f64>,
}

impl ConfigArgs {
    /// Resolves the effective pipeline configuration from all layers and
    /// validates it.
    pub fn resolve(&self) -> Result<PipelineConfig, CmdError> {
        let mut cfg = PipelineConfig::default();
        if let Some(path) = &self.config {
            RunConfig::load(path)?.apply(&mut cfg)?;
        }
        if let Some(v) = self.lambda {
            cfg.lambda = v;
        }
        if let Some(v) = self.source_level {
            cfg.source_level = v;
        }
        if let Some(v) = self.t_as {
            cfg.t_as = v;
        }
        if let Some(v) = self.pruning {
            cfg.pruning = v;
        }
        if let Some(v) = self.t_r {
            cfg.graph.t_r = v;
        }
        cfg.validate().map_err(|e| CmdError::input(e.to_string()))?;
        Ok(cfg)
    }
}
