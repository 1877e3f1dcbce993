//! Layered run configuration: built-in defaults, then a TOML file, then command-line flags.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use wac::analysis::{ClusterConfig, HueSweep, TsneConfig};
use wac::classifiers::{Backend, TrainConfig};
use wac::composition::StrategySpec;
use wac::data::Split;
use wac::scenegen::GenConfig;
use wac::wac::SamplingConfig;

use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    /// Directory written by `gen`: split files, `lexicon.txt`, `generator.toml`.
    pub data: Option<PathBuf>,
    pub model: Option<PathBuf>,
    pub lexicon: Option<PathBuf>,
    /// Word-pair similarity judgements (`word_a<TAB>word_b<TAB>score`).
    pub pairs: Option<PathBuf>,
    /// Pretrained vectors in the `word v1 ... vd` text format.
    pub external: Option<PathBuf>,
    pub out: Option<PathBuf>,
}

/// Train and dev fractions; the test split gets the rest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitConfig {
    pub train: f64,
    pub dev: f64,
}

impl Default for SplitConfig {
    fn default() -> Self {
        SplitConfig { train: 0.8, dev: 0.1 }
    }
}

impl SplitConfig {
    /// Scene counts for train, dev and test.
    pub fn counts(&self, n: usize) -> Result<[usize; 3]> {
        let ok = |f: f64| (0.0..=1.0).contains(&f);
        if !ok(self.train) || !ok(self.dev) || self.train + self.dev > 1.0 {
            return Err(CliError::Usage(
                "split fractions must lie in [0, 1] and sum to at most 1".into(),
            ));
        }
        let train = (n as f64 * self.train).round() as usize;
        let dev = ((n as f64 * self.dev).round() as usize).min(n - train);
        Ok([train, dev, n - train - dev])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WarmStartConfig {
    /// Epochs of continued training for each adjective-noun pair.
    pub max_epochs: usize,
}

impl Default for WarmStartConfig {
    fn default() -> Self {
        WarmStartConfig { max_epochs: 500 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub split: Split,
    /// Strategy names to report; empty means every strategy the model's backend supports.
    pub strategies: Vec<String>,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            split: Split::Test,
            strategies: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Overrides every component seed when set.
    pub seed: Option<u64>,
    pub backend: Option<Backend>,
    pub strategy: Option<String>,
    pub paths: Paths,
    pub gen: GenConfig,
    pub split: SplitConfig,
    pub sampling: SamplingConfig,
    pub train: TrainConfig,
    pub warm_start: WarmStartConfig,
    pub eval: EvalConfig,
    pub tsne: TsneConfig,
    pub cluster: ClusterConfig,
    pub probe: HueSweep,
}

/// Values given as command-line flags; each one wins over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub backend: Option<Backend>,
    pub strategy: Option<String>,
    pub out: Option<PathBuf>,
}

impl RunConfig {
    pub fn from_toml(text: &str, path: &Path) -> Result<Self> {
        toml::from_str(text).map_err(|source| CliError::ConfigParse {
            path: path.to_path_buf(),
            source,
        })
    }

    /// Defaults, overlaid with the file when one is given, then with the flags.
    pub fn resolve(path: Option<&Path>, overrides: &Overrides) -> Result<Self> {
        let mut cfg = match path {
            Some(p) => {
                let text = fs::read_to_string(p).map_err(|e| CliError::io(p, e))?;
                Self::from_toml(&text, p)?
            }
            None => RunConfig::default(),
        };
        cfg.apply(overrides);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn apply(&mut self, o: &Overrides) {
        if o.seed.is_some() {
            self.seed = o.seed;
        }
        if o.backend.is_some() {
            self.backend = o.backend;
        }
        if o.strategy.is_some() {
            self.strategy = o.strategy.clone();
        }
        if o.out.is_some() {
            self.paths.out = o.out.clone();
        }
        if let Some(seed) = self.seed {
            self.gen.seed = seed;
            self.sampling.seed = seed;
            self.train.seed = seed;
            self.tsne.seed = seed;
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.sampling.validate()?;
        self.train.validate()?;
        self.cluster.validate()?;
        self.strategy_spec()?;
        for name in &self.eval.strategies {
            name.parse::<StrategySpec>()?;
        }
        Ok(())
    }

    /// The requested strategy, checked against the requested backend. A bare `relational`
    /// follows the backend.
    pub fn strategy_spec(&self) -> Result<Option<StrategySpec>> {
        let Some(name) = &self.strategy else {
            return Ok(None);
        };
        let spec = match (name.as_str(), self.backend) {
            ("relational", Some(b)) => StrategySpec::relational_for(b),
            _ => name.parse::<StrategySpec>()?,
        };
        if let Some(b) = self.backend {
            StrategySpec::new(spec.strategy.clone(), b)?;
            if spec.backend != b {
                return Err(wac::Error::BackendMismatch {
                    operation: format!("strategy {name}"),
                    required: spec.backend.to_string(),
                    found: b.to_string(),
                }
                .into());
            }
        }
        Ok(Some(spec))
    }

    /// The backend to train with: the flag, else the strategy's, else MLP.
    pub fn training_backend(&self) -> Result<Backend> {
        Ok(match (self.backend, self.strategy_spec()?) {
            (Some(b), _) => b,
            (None, Some(spec)) => spec.backend,
            (None, None) => Backend::Mlp,
        })
    }

    pub fn warm_start_train(&self) -> TrainConfig {
        TrainConfig {
            max_epochs: self.warm_start.max_epochs,
            ..self.train.clone()
        }
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    /// Hex SHA-256 of the resolved configuration. The output path is left out, so a report
    /// hashes the same wherever it is written.
    pub fn hash(&self) -> Result<String> {
        let mut identity = self.clone();
        identity.paths.out = None;
        Ok(hex::encode(Sha256::digest(identity.to_toml()?.as_bytes())))
    }

    /// Provenance lines that open every report.
    pub fn report_header(&self) -> Result<String> {
        Ok(format!(
            "# wac {} (model format {})\n# config sha256 {}\n",
            env!("CARGO_PKG_VERSION"),
            wac::wac::MODEL_VERSION,
            self.hash()?
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_keys_are_rejected() {
        let p = Path::new("x.toml");
        assert!(RunConfig::from_toml("colour = 1\n", p).is_err());
        assert!(RunConfig::from_toml("[train]\nepochs = 3\n", p).is_err());
        let cfg = RunConfig::from_toml("[train]\nmax_epochs = 3\n", p).unwrap();
        assert_eq!(cfg.train.max_epochs, 3);
    }

    #[test]
    fn resolved_config_roundtrips() {
        let mut cfg = RunConfig::default();
        cfg.apply(&Overrides {
            seed: Some(7),
            backend: Some(Backend::Tree),
            ..Overrides::default()
        });
        let text = cfg.to_toml().unwrap();
        assert_eq!(RunConfig::from_toml(&text, Path::new("r.toml")).unwrap(), cfg);
        assert_eq!(cfg.train.seed, 7);
        assert_eq!(cfg.tsne.seed, 7);
    }

    #[test]
    fn flags_win_and_change_the_hash() {
        let base = RunConfig::default();
        let mut other = base.clone();
        other.apply(&Overrides {
            seed: Some(1),
            ..Overrides::default()
        });
        assert_ne!(base.hash().unwrap(), other.hash().unwrap());
        assert_eq!(base.hash().unwrap(), RunConfig::default().hash().unwrap());
        let mut moved = base.clone();
        moved.paths.out = Some("elsewhere.tsv".into());
        assert_eq!(base.hash().unwrap(), moved.hash().unwrap());
    }

    #[test]
    fn strategy_backend_checks() {
        let mut cfg = RunConfig {
            backend: Some(Backend::Tree),
            strategy: Some("mlp-extended".into()),
            ..RunConfig::default()
        };
        assert!(matches!(
            cfg.validate(),
            Err(CliError::Core(wac::Error::BackendMismatch { .. }))
        ));
        cfg.strategy = Some("logreg-summed".into());
        assert!(cfg.validate().is_err());
        cfg.strategy = Some("relational".into());
        assert_eq!(
            cfg.strategy_spec().unwrap().unwrap().to_string(),
            "relational(tree-summed)"
        );
        cfg.backend = None;
        assert_eq!(cfg.training_backend().unwrap(), Backend::Mlp);
    }

    #[test]
    fn split_counts() {
        assert_eq!(SplitConfig::default().counts(1000).unwrap(), [800, 100, 100]);
        assert_eq!(SplitConfig::default().counts(7).unwrap(), [6, 1, 0]);
        assert!(SplitConfig { train: 0.9, dev: 0.2 }.counts(10).is_err());
    }
}
