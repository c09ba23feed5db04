//! Experiment configuration: a flat key-value file layered under CLI flags.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::HarnessError;
use crate::samplers::{Family, SamplerModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    EdgesMc,
    WalkLower,
    WalkUpper,
    TailStp,
    TailWtpa,
    Decoupling,
    MpCompare,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 7] = [
        ExperimentKind::EdgesMc,
        ExperimentKind::WalkLower,
        ExperimentKind::WalkUpper,
        ExperimentKind::TailStp,
        ExperimentKind::TailWtpa,
        ExperimentKind::Decoupling,
        ExperimentKind::MpCompare,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::EdgesMc => "edges-mc",
            ExperimentKind::WalkLower => "walk-lower",
            ExperimentKind::WalkUpper => "walk-upper",
            ExperimentKind::TailStp => "tail-stp",
            ExperimentKind::TailWtpa => "tail-wtpa",
            ExperimentKind::Decoupling => "decoupling",
            ExperimentKind::MpCompare => "mp-compare",
        }
    }

    /// Whether the experiment draws Gram matrices and so needs m.
    pub fn needs_samples(self) -> bool {
        matches!(
            self,
            ExperimentKind::EdgesMc
                | ExperimentKind::WalkLower
                | ExperimentKind::WalkUpper
                | ExperimentKind::MpCompare
        )
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentKind {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, HarnessError> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| HarnessError::Config(format!("unknown experiment `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

impl FromStr for OutputFormat {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, HarnessError> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            other => Err(HarnessError::Config(format!("unknown format `{other}` (csv|json)"))),
        }
    }
}

/// One layer of settings. Every key is optional; later layers win.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigLayer {
    pub experiment: Option<ExperimentKind>,
    pub model: Option<String>,
    pub n: Option<usize>,
    pub m: Option<usize>,
    pub rho: Option<f64>,
    pub eps: Option<f64>,
    pub trials: Option<usize>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub format: Option<OutputFormat>,
    pub threads: Option<usize>,
    pub ranks: Option<Vec<usize>>,
    pub t_factors: Option<Vec<f64>>,
    pub n_grid: Option<Vec<usize>>,
    pub levels: Option<Vec<f64>>,
    pub directions: Option<usize>,
    pub rank: Option<usize>,
}

macro_rules! overlay {
    ($base:ident, $top:ident; $($field:ident),*) => {
        $( if $top.$field.is_some() { $base.$field = $top.$field; } )*
    };
}

impl ConfigLayer {
    pub fn from_toml(text: &str) -> Result<Self, HarnessError> {
        toml::from_str(text).map_err(|e| HarnessError::Config(format!("config file: {e}")))
    }

    pub fn from_file(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| HarnessError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    /// `self` with every key set in `top` replaced.
    pub fn overlay(mut self, top: ConfigLayer) -> Self {
        overlay!(self, top; experiment, model, n, m, rho, eps, trials, seed, out, format,
            threads, ranks, t_factors, n_grid, levels, directions, rank);
        self
    }
}

/// A validated experiment description.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub model: String,
    pub n: usize,
    /// 0 for experiments that do not draw Gram matrices.
    pub m: usize,
    pub rho: f64,
    pub eps: f64,
    pub trials: usize,
    pub seed: u64,
    pub out: PathBuf,
    pub format: OutputFormat,
    /// 0 means one per available core.
    pub threads: usize,
    pub ranks: Vec<usize>,
    pub t_factors: Vec<f64>,
    pub n_grid: Vec<usize>,
    pub levels: Vec<f64>,
    pub directions: usize,
    pub rank: usize,
}

fn config_err(msg: impl Into<String>) -> HarnessError {
    HarnessError::Config(msg.into())
}

impl ExperimentConfig {
    /// Fills defaults, derives m from ρ (or ρ from m) and validates.
    ///
    /// A `experiment` key in the layer must agree with `kind`.
    pub fn resolve(kind: ExperimentKind, layer: ConfigLayer) -> Result<Self, HarnessError> {
        if let Some(named) = layer.experiment {
            if named != kind {
                return Err(config_err(format!("config is for `{named}`, not `{kind}`")));
            }
        }
        let model = layer.model.unwrap_or_else(|| "gaussian".into());
        let family: Family = model.parse().map_err(|e| config_err(format!("model: {e}")))?;
        let n = layer.n.unwrap_or(64);
        if n == 0 {
            return Err(config_err("n must be positive"));
        }
        let (m, rho) = match (layer.m, layer.rho) {
            (Some(m), Some(rho)) => {
                check_rho(rho)?;
                if m != m_from_rho(n, rho) {
                    return Err(config_err(format!(
                        "m = {m} inconsistent with rho = {rho} (round(n/rho) = {})",
                        m_from_rho(n, rho)
                    )));
                }
                (m, rho)
            }
            (Some(m), None) => (m, n as f64 / m as f64),
            (None, Some(rho)) => {
                check_rho(rho)?;
                (m_from_rho(n, rho), rho)
            }
            (None, None) if kind.needs_samples() => (4 * n, 0.25),
            (None, None) => (0, 0.0),
        };
        if kind.needs_samples() && m == 0 {
            return Err(config_err("m must be positive"));
        }
        let trials = layer.trials.unwrap_or(1);
        if trials == 0 {
            return Err(config_err("trials must be at least 1"));
        }
        let eps = layer.eps.unwrap_or(0.1);
        if !(eps > 0.0 && eps < 1.0) {
            return Err(config_err(format!("eps must lie in (0, 1) (got {eps})")));
        }
        let ranks = layer.ranks.unwrap_or_else(|| vec![(n / 8).max(1), (n / 2).max(1)]);
        if ranks.iter().any(|&r| r == 0 || r > n) {
            return Err(config_err(format!("ranks must lie in [1, {n}]")));
        }
        let t_factors = layer.t_factors.unwrap_or_else(|| vec![0.5, 1.0, 2.0]);
        if t_factors.iter().any(|t| !(*t > 0.0 && t.is_finite())) {
            return Err(config_err("t_factors must be positive"));
        }
        let n_grid = layer.n_grid.unwrap_or_default();
        if n_grid.windows(2).any(|w| w[0] >= w[1]) || n_grid.contains(&0) {
            return Err(config_err("n_grid must be positive and increasing"));
        }
        let levels = layer.levels.unwrap_or_else(|| vec![10.0, 100.0, 1000.0]);
        if levels.windows(2).any(|w| !(w[0] < w[1])) || levels.iter().any(|l| !(*l > 0.0)) {
            return Err(config_err("levels must be positive and increasing"));
        }
        let rank = layer.rank.unwrap_or((n / 4).max(1));
        if rank == 0 || rank > n {
            return Err(config_err(format!("rank must lie in [1, {n}]")));
        }
        Ok(Self {
            experiment: kind,
            model: family.to_string(),
            n,
            m,
            rho,
            eps,
            trials,
            seed: layer.seed.unwrap_or(0),
            out: layer.out.unwrap_or_else(|| PathBuf::from("out")),
            format: layer.format.unwrap_or_default(),
            threads: layer.threads.unwrap_or(0),
            ranks,
            t_factors,
            n_grid,
            levels,
            directions: layer.directions.unwrap_or(4),
            rank,
        })
    }

    pub fn family(&self) -> Family {
        self.model.parse().expect("validated on resolve")
    }

    pub fn sampler_model(&self) -> Result<SamplerModel, HarnessError> {
        Ok(SamplerModel::new(self.family(), self.n, self.seed)?)
    }

    /// The resolved config as a flat key-value document.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Git-style object hash of [`Self::to_toml`]: sha256 of
    /// `"blob <len>\0" + content`, hex encoded.
    pub fn content_hash(&self) -> String {
        let body = self.to_toml();
        let mut hasher = Sha256::new();
        hasher.update(format!("blob {}\0", body.len()).as_bytes());
        hasher.update(body.as_bytes());
        hex::encode(hasher.finalize())
    }
}

/// round(n/ρ).
pub fn m_from_rho(n: usize, rho: f64) -> usize {
    (n as f64 / rho).round() as usize
}

fn check_rho(rho: f64) -> Result<(), HarnessError> {
    if rho > 0.0 && rho.is_finite() {
        Ok(())
    } else {
        Err(config_err(format!("rho must be positive (got {rho})")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn m_follows_rho() {
        let layer = ConfigLayer {
            n: Some(256),
            rho: Some(1.0 / 9.0),
            ..Default::default()
        };
        let cfg = ExperimentConfig::resolve(ExperimentKind::EdgesMc, layer).unwrap();
        assert_eq!(cfg.m, 2304);
    }

    #[test]
    fn inconsistent_m_and_rho_rejected() {
        let layer = ConfigLayer {
            n: Some(100),
            m: Some(300),
            rho: Some(0.25),
            ..Default::default()
        };
        let err = ExperimentConfig::resolve(ExperimentKind::EdgesMc, layer).unwrap_err();
        assert_eq!(err.exit_code(), 1);
    }

    #[test]
    fn flags_override_file() {
        let file = ConfigLayer::from_toml("model = \"rademacher\"\nn = 32\ntrials = 5\n").unwrap();
        let flags = ConfigLayer {
            n: Some(16),
            ..Default::default()
        };
        let cfg = ExperimentConfig::resolve(ExperimentKind::EdgesMc, file.overlay(flags)).unwrap();
        assert_eq!((cfg.model.as_str(), cfg.n, cfg.trials), ("rademacher", 16, 5));
    }

    #[test]
    fn unknown_keys_and_bad_values_rejected() {
        assert!(ConfigLayer::from_toml("bogus = 1\n").is_err());
        for layer in [
            ConfigLayer { trials: Some(0), ..Default::default() },
            ConfigLayer { model: Some("student_t:1".into()), ..Default::default() },
            ConfigLayer { rho: Some(-1.0), ..Default::default() },
            ConfigLayer { eps: Some(1.5), ..Default::default() },
        ] {
            assert!(ExperimentConfig::resolve(ExperimentKind::WalkLower, layer).is_err());
        }
        let named = ConfigLayer::from_toml("experiment = \"walk-upper\"\n").unwrap();
        assert!(ExperimentConfig::resolve(ExperimentKind::WalkLower, named).is_err());
    }

    #[test]
    fn hash_tracks_content() {
        let a = ExperimentConfig::resolve(ExperimentKind::EdgesMc, ConfigLayer::default()).unwrap();
        let mut b = a.clone();
        assert_eq!(a.content_hash(), b.content_hash());
        b.seed = 1;
        assert_ne!(a.content_hash(), b.content_hash());
        assert_eq!(a.content_hash().len(), 64);
    }

    #[test]
    fn empty_blob_hash_matches_git_sha256() {
        // `git hash-object --object-format=sha256` of an empty file.
        let mut hasher = Sha256::new();
        hasher.update(b"blob 0\0");
        assert_eq!(
            hex::encode(hasher.finalize()),
            "473a0f4c3be8a93681a267e3b1e9a7dcda1185436fe141f7749120a303721813"
        );
    }
}
