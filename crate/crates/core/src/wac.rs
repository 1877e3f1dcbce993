//! The words-as-classifiers model: one binary classifier per vocabulary word.
//!
//! A word's positives are the gold targets of every training expression that uses it. Its
//! negatives are drawn from the targets of expressions that do not use it, excluding any
//! entity that is also a positive for the word.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fs;
use std::path::Path;

use rand::seq::index;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classifiers::{Backend, TrainConfig, WordClassifier};
use crate::data::{Dataset, Entity, Split};
use crate::error::{Error, Result};
use crate::seed;

pub const MODEL_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplingConfig {
    /// Negatives drawn per positive.
    pub neg_ratio: usize,
    /// Words with fewer positives are left out of the vocabulary.
    pub min_positives: usize,
    pub seed: u64,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        SamplingConfig {
            neg_ratio: 5,
            min_positives: 5,
            seed: 0,
        }
    }
}

impl SamplingConfig {
    pub fn validate(&self) -> Result<()> {
        if self.neg_ratio < 1 {
            return Err(Error::Config("neg_ratio must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WordMeta {
    pub positives: usize,
    pub negatives: usize,
    /// Distinct candidate negatives before sampling.
    pub pool: usize,
    pub with_replacement: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "reason", rename_all = "kebab-case")]
pub enum Exclusion {
    TooFewPositives { positives: usize },
    NoNegatives { positives: usize },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainMeta {
    pub words: BTreeMap<String, WordMeta>,
    pub relational: BTreeMap<String, WordMeta>,
    pub excluded: BTreeMap<String, Exclusion>,
    pub excluded_relational: BTreeMap<String, Exclusion>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub sampling: SamplingConfig,
    pub train: TrainConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WacModel {
    pub version: u32,
    pub backend: Backend,
    pub feature_dim: usize,
    pub config: ModelConfig,
    pub classifiers: BTreeMap<String, WordClassifier>,
    /// Relational-phrase classifiers over feature differences `x(R1) - x(R2)`.
    pub relational: BTreeMap<String, WordClassifier>,
    pub train_meta: TrainMeta,
}

impl WacModel {
    pub fn vocabulary(&self) -> impl Iterator<Item = &str> {
        self.classifiers.keys().map(String::as_str)
    }

    pub fn contains(&self, word: &str) -> bool {
        self.classifiers.contains_key(word)
    }

    pub fn classifier(&self, word: &str) -> Option<&WordClassifier> {
        self.classifiers.get(word)
    }

    pub fn require_backend(&self, required: Backend, operation: &str) -> Result<()> {
        if self.backend != required {
            return Err(Error::BackendMismatch {
                operation: operation.to_string(),
                required: required.to_string(),
                found: self.backend.to_string(),
            });
        }
        Ok(())
    }

    /// Checks the persisted invariants: version, backend tags and dimensions.
    pub fn validate(&self) -> Result<()> {
        if self.version != MODEL_VERSION {
            return Err(Error::UnsupportedVersion {
                expected: MODEL_VERSION,
                found: self.version,
            });
        }
        for (word, c) in self.classifiers.iter().chain(&self.relational) {
            if c.backend() != self.backend {
                return Err(Error::BackendMismatch {
                    operation: format!("classifier for {word:?}"),
                    required: self.backend.to_string(),
                    found: c.backend().to_string(),
                });
            }
            if c.dim() != self.feature_dim {
                return Err(Error::DimensionMismatch {
                    expected: self.feature_dim,
                    found: c.dim(),
                });
            }
        }
        Ok(())
    }
}

/// Positives and the candidate negative pool for one word.
#[derive(Debug, Clone, PartialEq)]
pub struct Examples {
    pub positives: Vec<Vec<f64>>,
    pub negative_pool: Vec<Vec<f64>>,
}

type EntityKey<'a> = (&'a str, &'a str);

/// Target entities grouped by whether their expression contains the word.
struct ExampleRefs<'a> {
    positives: Vec<&'a Entity>,
    pool: Vec<&'a Entity>,
}

fn example_refs<'a>(dataset: &'a Dataset, contains: impl Fn(&[String]) -> bool) -> ExampleRefs<'a> {
    let mut positives = Vec::new();
    let mut positive_keys: HashSet<EntityKey> = HashSet::new();
    let mut others = Vec::new();
    for r in &dataset.refexps {
        let (_, target) = dataset.target(r);
        let key = (r.scene_id.as_str(), r.target_object_id.as_str());
        if contains(&r.tokens) {
            positives.push(target);
            positive_keys.insert(key);
        } else {
            others.push((key, target));
        }
    }
    let mut seen = HashSet::new();
    let pool = others
        .into_iter()
        .filter(|(key, _)| !positive_keys.contains(key) && seen.insert(*key))
        .map(|(_, e)| e)
        .collect();
    ExampleRefs { positives, pool }
}

/// Positives: targets of every expression containing `word`. Negative pool: the distinct
/// targets of expressions without it, minus any entity that is also a positive.
pub fn collect_examples(dataset: &Dataset, word: &str) -> Examples {
    let refs = example_refs(dataset, |tokens| tokens.iter().any(|t| t == word));
    Examples {
        positives: refs.positives.iter().map(|e| e.features.clone()).collect(),
        negative_pool: refs.pool.iter().map(|e| e.features.clone()).collect(),
    }
}

/// Draws `count` pool indices: without replacement when the pool is large enough,
/// otherwise with replacement. Returns the indices and whether replacement was needed.
pub(crate) fn sample_indices(pool: usize, count: usize, rng: &mut impl Rng) -> (Vec<usize>, bool) {
    if pool >= count {
        (index::sample(rng, pool, count).into_vec(), false)
    } else {
        ((0..count).map(|_| rng.random_range(0..pool)).collect(), true)
    }
}

/// Everything needed to train one word's classifier.
#[derive(Debug, Clone, PartialEq)]
pub struct WordTrainingSet {
    pub positives: Vec<Vec<f64>>,
    pub negatives: Vec<Vec<f64>>,
    pub meta: WordMeta,
}

/// Applies the vocabulary filter and negative sampling for `word`. The sampling stream
/// depends only on `(sampling.seed, word)`.
pub fn sample_training_set(
    dataset: &Dataset,
    word: &str,
    sampling: &SamplingConfig,
) -> std::result::Result<WordTrainingSet, Exclusion> {
    let refs = example_refs(dataset, |tokens| tokens.iter().any(|t| t == word));
    sample_from_refs(refs, word, sampling, "word")
}

fn sample_from_refs(
    refs: ExampleRefs,
    word: &str,
    sampling: &SamplingConfig,
    stream: &str,
) -> std::result::Result<WordTrainingSet, Exclusion> {
    let n_pos = refs.positives.len();
    if n_pos < sampling.min_positives {
        return Err(Exclusion::TooFewPositives { positives: n_pos });
    }
    if refs.pool.is_empty() {
        return Err(Exclusion::NoNegatives { positives: n_pos });
    }
    let mut rng = seed::stream(sampling.seed, &format!("{stream}:{word}"));
    let (picked, with_replacement) = sample_indices(refs.pool.len(), n_pos * sampling.neg_ratio, &mut rng);
    if with_replacement {
        log::warn!(
            "{word:?}: pool of {} negatives is smaller than {}; sampling with replacement",
            refs.pool.len(),
            n_pos * sampling.neg_ratio
        );
    }
    Ok(WordTrainingSet {
        positives: refs.positives.iter().map(|e| e.features.clone()).collect(),
        negatives: picked.iter().map(|&i| refs.pool[i].features.clone()).collect(),
        meta: WordMeta {
            positives: n_pos,
            negatives: picked.len(),
            pool: refs.pool.len(),
            with_replacement,
        },
    })
}

/// Every distinct token of the training expressions, sorted.
pub fn corpus_words(dataset: &Dataset) -> BTreeSet<String> {
    dataset.refexps.iter().flat_map(|r| r.tokens.iter().cloned()).collect()
}

/// A trained classifier with its sampling record, or why the word was left out.
pub(crate) type TrainOutcome = std::result::Result<(WordClassifier, WordMeta), Exclusion>;

/// Trains one classifier per word that passes the vocabulary filter. Words are trained in
/// parallel; each word's sampling stream is independent, so the result does not depend on
/// scheduling.
pub fn train_model(
    dataset: &Dataset,
    backend: Backend,
    sampling: &SamplingConfig,
    train: &TrainConfig,
) -> Result<WacModel> {
    if dataset.split != Split::Train {
        return Err(Error::InvalidInput(format!(
            "training requires the train split, got {}",
            dataset.split
        )));
    }
    sampling.validate()?;
    train.validate()?;
    let words: Vec<String> = corpus_words(dataset).into_iter().collect();
    let outcomes: Vec<(String, TrainOutcome)> = words
        .into_par_iter()
        .map(|word| {
            let outcome = match sample_training_set(dataset, &word, sampling) {
                Ok(set) => {
                    WordClassifier::train(backend, &set.positives, &set.negatives, train).map(|c| Ok((c, set.meta)))
                }
                Err(excl) => Ok(Err(excl)),
            };
            outcome.map(|o| (word, o))
        })
        .collect::<Result<_>>()?;

    let mut classifiers = BTreeMap::new();
    let mut meta = TrainMeta::default();
    for (word, outcome) in outcomes {
        match outcome {
            Ok((c, m)) => {
                classifiers.insert(word.clone(), c);
                meta.words.insert(word, m);
            }
            Err(excl) => {
                meta.excluded.insert(word, excl);
            }
        }
    }
    if classifiers.is_empty() {
        return Err(Error::EmptyVocabulary);
    }
    Ok(WacModel {
        version: MODEL_VERSION,
        backend,
        feature_dim: dataset.feature_dim,
        config: ModelConfig {
            sampling: sampling.clone(),
            train: train.clone(),
        },
        classifiers,
        relational: BTreeMap::new(),
        train_meta: meta,
    })
}

/// `p_w(x)` for the entity, or `Ok(None)` when the word is out of vocabulary.
pub fn word_fitness(model: &WacModel, word: &str, entity: &Entity) -> Result<Option<f64>> {
    match model.classifiers.get(word) {
        None => Ok(None),
        Some(c) => c.predict(&entity.features).map(Some),
    }
}

pub fn save_model(model: &WacModel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let json = serde_json::to_string_pretty(model)
        .map_err(|e| Error::InvalidInput(format!("model does not serialize: {e}")))?;
    fs::write(path, json + "\n").map_err(|e| Error::io(path, e))
}

pub fn load_model(path: impl AsRef<Path>) -> Result<WacModel> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    model_from_json(&text).map_err(|e| match e {
        Error::Parse { line, message, .. } => Error::parse(path, line, message),
        other => other,
    })
}

pub fn model_from_json(text: &str) -> Result<WacModel> {
    let value: serde_json::Value = serde_json::from_str(text).map_err(|e| Error::parse("<model>", e.line(), e))?;
    let version = value
        .get("version")
        .and_then(|v| v.as_u64())
        .ok_or_else(|| Error::parse("<model>", 1, "missing or non-integer \"version\""))?;
    if version != MODEL_VERSION as u64 {
        return Err(Error::UnsupportedVersion {
            expected: MODEL_VERSION,
            found: version as u32,
        });
    }
    let model: WacModel = serde_json::from_value(value).map_err(|e| Error::parse("<model>", 0, e))?;
    model.validate()?;
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{RefExpInstance, Scene};

    fn ent(id: &str, v: f64) -> Entity {
        Entity {
            object_id: id.into(),
            features: vec![v],
            bbox: None,
            attributes: Default::default(),
        }
    }

    fn refexp(scene: &str, text: &str, target: &str) -> RefExpInstance {
        RefExpInstance {
            scene_id: scene.into(),
            tokens: text.split_whitespace().map(str::to_owned).collect(),
            target_object_id: target.into(),
        }
    }

    /// Three expressions over two scenes:
    ///   s1/a "the red ball", s1/b "the blue ball", s2/c "the red box", s2/d "the box"
    fn fixture() -> Dataset {
        let scenes = vec![
            Scene {
                scene_id: "s1".into(),
                entities: vec![ent("a", 1.0), ent("b", 2.0)],
            },
            Scene {
                scene_id: "s2".into(),
                entities: vec![ent("c", 3.0), ent("d", 4.0)],
            },
        ];
        let refexps = vec![
            refexp("s1", "the red ball", "a"),
            refexp("s1", "the blue ball", "b"),
            refexp("s2", "the red box", "c"),
            refexp("s2", "the box", "d"),
        ];
        Dataset::from_raw(scenes, refexps, Split::Train).unwrap()
    }

    #[test]
    fn hand_enumerated_counts() {
        let ds = fixture();
        let red = collect_examples(&ds, "red");
        assert_eq!(red.positives, vec![vec![1.0], vec![3.0]]);
        assert_eq!(red.negative_pool, vec![vec![2.0], vec![4.0]]);
        let ball = collect_examples(&ds, "ball");
        assert_eq!(ball.positives.len(), 2);
        assert_eq!(ball.negative_pool, vec![vec![3.0], vec![4.0]]);
    }

    #[test]
    fn absent_word_and_universal_word() {
        let ds = fixture();
        let none = collect_examples(&ds, "zebra");
        assert!(none.positives.is_empty());
        assert_eq!(none.negative_pool.len(), 4);
        let the = collect_examples(&ds, "the");
        assert_eq!(the.positives.len(), 4);
        assert!(the.negative_pool.is_empty());
    }

    #[test]
    fn positives_never_sampled_as_negatives() {
        // entity a is referred to with and without "red"
        let scenes = vec![Scene {
            scene_id: "s".into(),
            entities: vec![ent("a", 1.0), ent("b", 2.0)],
        }];
        let refexps = vec![
            refexp("s", "red thing", "a"),
            refexp("s", "thing", "a"),
            refexp("s", "thing", "b"),
            refexp("s", "other", "b"),
        ];
        let ds = Dataset::from_raw(scenes, refexps, Split::Train).unwrap();
        let ex = collect_examples(&ds, "red");
        assert_eq!(ex.negative_pool, vec![vec![2.0]]);
    }

    #[test]
    fn replacement_only_when_pool_small() {
        let mut rng = seed::stream(0, "t");
        let (idx, repl) = sample_indices(10, 4, &mut rng);
        assert!(!repl);
        let distinct: HashSet<_> = idx.iter().collect();
        assert_eq!(distinct.len(), 4);
        let (idx, repl) = sample_indices(2, 5, &mut rng);
        assert!(repl);
        assert_eq!(idx.len(), 5);
        assert!(idx.iter().all(|&i| i < 2));
    }

    #[test]
    fn oov_is_not_a_probability() {
        let ds = fixture();
        let sampling = SamplingConfig {
            min_positives: 1,
            ..SamplingConfig::default()
        };
        let train = TrainConfig {
            max_epochs: 50,
            ..TrainConfig::default()
        };
        let model = train_model(&ds, Backend::LogReg, &sampling, &train).unwrap();
        let e = ent("z", 1.0);
        assert_eq!(word_fitness(&model, "zebra", &e).unwrap(), None);
        let p = word_fitness(&model, "red", &e).unwrap().unwrap();
        assert_eq!(word_fitness(&model, "red", &e).unwrap(), Some(p));
        assert!(matches!(
            word_fitness(
                &model,
                "red",
                &Entity {
                    features: vec![1.0, 2.0],
                    ..e
                }
            ),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(matches!(
            model.train_meta.excluded["the"],
            Exclusion::NoNegatives { .. }
        ));
    }

    #[test]
    fn non_train_split_rejected() {
        let mut ds = fixture();
        ds.split = Split::Test;
        let err = train_model(&ds, Backend::Tree, &SamplingConfig::default(), &TrainConfig::default());
        assert!(matches!(err, Err(Error::InvalidInput(_))));
    }

    #[test]
    fn empty_vocabulary_is_an_error() {
        let err = train_model(
            &fixture(),
            Backend::Tree,
            &SamplingConfig::default(),
            &TrainConfig::default(),
        );
        assert!(matches!(err, Err(Error::EmptyVocabulary)));
    }
}
