use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use dyadnet::estimator::{NewtonConfig, OptimizerConfig};
use dyadnet::features::FeatureSpec;
use dyadnet::graph::{LoadOptions, MissingNumeric, NetworkView};
use dyadnet::netstats::PowerLawOptions;
use dyadnet::synth::SynthConfig;
use dyadnet::tetrad::{BootstrapConfig, TetradConfig};
use serde::Deserialize;

/// A problem with the run configuration (exit code 2).
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct ConfigError(pub String);

pub fn config_error(msg: impl Into<String>) -> anyhow::Error {
    ConfigError(msg.into()).into()
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Required by every stochastic command.
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub out: Option<PathBuf>,
    pub input: InputSection,
    pub features: FeatureSpec,
    pub optimizer: OptimizerConfig,
    pub fit: FitSection,
    pub fe: FeSection,
    pub stats: StatsSection,
    pub synth: Option<SynthConfig>,
}

#[derive(Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InputSection {
    pub vertices: Option<PathBuf>,
    pub edges: Option<PathBuf>,
    pub delimiter: char,
    pub missing_numeric: MissingNumeric,
}

impl Default for InputSection {
    fn default() -> Self {
        let d = LoadOptions::default();
        InputSection {
            vertices: None,
            edges: None,
            delimiter: d.delimiter,
            missing_numeric: d.missing_numeric,
        }
    }
}

impl InputSection {
    pub fn load_options(&self) -> LoadOptions {
        LoadOptions {
            delimiter: self.delimiter,
            missing_numeric: self.missing_numeric,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Estimator {
    #[default]
    Streaming,
    Newton,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitSection {
    /// Sender countries fitted separately after the world fit.
    pub countries: Vec<String>,
    pub estimator: Estimator,
    pub margins: bool,
    pub newton: NewtonConfig,
}

#[derive(Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeSection {
    pub tetrad: TetradConfig,
    /// `replicates = 0` skips the bootstrap.
    pub bootstrap: BootstrapConfig,
}

impl Default for FeSection {
    fn default() -> Self {
        FeSection {
            tetrad: TetradConfig::default(),
            bootstrap: BootstrapConfig {
                replicates: 0,
                ..BootstrapConfig::default()
            },
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StatsSection {
    pub degree: PowerLawOptions,
    pub histogram_bins: usize,
    pub top_countries: usize,
}

impl Default for StatsSection {
    fn default() -> Self {
        StatsSection {
            degree: PowerLawOptions::default(),
            histogram_bins: 40,
            top_countries: 10,
        }
    }
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Default, Clone)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub out: Option<PathBuf>,
    pub view: Option<NetworkView>,
}

impl RunConfig {
    pub fn load(path: &Path, ov: &Overrides) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("cannot read config {}", path.display()))?;
        let mut cfg: RunConfig = toml::from_str(&text)
            .map_err(|e| config_error(format!("{}: {}", path.display(), e.to_string().trim_end())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let resolve = |p: &mut Option<PathBuf>| {
            if let Some(q) = p.as_mut() {
                if q.is_relative() {
                    *q = base.join(&*q);
                }
            }
        };
        resolve(&mut cfg.input.vertices);
        resolve(&mut cfg.input.edges);
        resolve(&mut cfg.out);
        cfg.apply(ov);
        Ok(cfg)
    }

    fn apply(&mut self, ov: &Overrides) {
        if ov.seed.is_some() {
            self.seed = ov.seed;
        }
        if ov.workers.is_some() {
            self.workers = ov.workers;
        }
        if ov.out.is_some() {
            self.out.clone_from(&ov.out);
        }
        if let Some(v) = ov.view {
            self.features.view = v;
        }
        if let Some(seed) = self.seed {
            self.optimizer.seed = seed;
            self.fe.tetrad.seed = seed;
            self.fe.bootstrap.seed = seed;
            if let Some(s) = self.synth.as_mut() {
                s.seed = seed;
            }
        }
        let workers = self.workers.unwrap_or(1);
        self.optimizer.workers = workers;
        self.fit.newton.workers = workers;
        self.fe.tetrad.workers = workers;
        self.fe.bootstrap.workers = workers;
        if let Some(s) = self.synth.as_mut() {
            s.workers = workers;
            s.features.view = self.features.view;
        }
    }

    pub fn require_seed(&self, command: &str) -> Result<u64> {
        self.seed.ok_or_else(|| {
            config_error(format!(
                "`{command}` is stochastic: set `seed` in the config or pass --seed"
            ))
        })
    }

    pub fn out_dir(&self) -> Result<PathBuf> {
        let dir = self.out.clone().unwrap_or_else(|| PathBuf::from("out"));
        fs::create_dir_all(&dir).with_context(|| format!("cannot create output directory {}", dir.display()))?;
        Ok(dir)
    }

    /// Both input files, checked to exist.
    pub fn inputs(&self) -> Result<(PathBuf, PathBuf)> {
        let get = |p: &Option<PathBuf>, key: &str| -> Result<PathBuf> {
            let p = p
                .clone()
                .ok_or_else(|| config_error(format!("input.{key} is not set")))?;
            if !p.exists() {
                return Err(config_error(format!("input.{key}: {} does not exist", p.display())));
            }
            Ok(p)
        };
        Ok((get(&self.input.vertices, "vertices")?, get(&self.input.edges, "edges")?))
    }
}
