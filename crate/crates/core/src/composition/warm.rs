use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use crate::classifiers::mlp::{continue_training, MlpParams};
use crate::classifiers::{Backend, TrainConfig, TrainingSet};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::wac::{sample_training_set, WacModel};

/// Continues training the noun's MLP on the adjective's training examples (its positives
/// and the same sampled negatives it was trained on), with fresh optimizer moments.
pub fn warm_start_pair(
    model: &WacModel,
    adj: &str,
    noun: &str,
    dataset: &Dataset,
    config: &TrainConfig,
) -> Result<MlpParams> {
    model.require_backend(Backend::Mlp, "warm-start composition")?;
    let noun_params = model
        .classifier(noun)
        .ok_or_else(|| Error::OutOfVocabulary(noun.to_string()))?
        .as_mlp()
        .expect("backend checked");
    if !model.contains(adj) {
        return Err(Error::OutOfVocabulary(adj.to_string()));
    }
    let set = sample_training_set(dataset, adj, &model.config.sampling).map_err(|excl| {
        Error::InsufficientData(format!(
            "adjective {adj:?} has no training set in this dataset: {excl:?}"
        ))
    })?;
    let data = TrainingSet::from_classes(&set.positives, &set.negatives)?;
    continue_training(noun_params, &data, config)
}

type Slot = Arc<Mutex<Option<Arc<MlpParams>>>>;

/// Trains each (adjective, noun) pair at most once, even under concurrent lookups.
#[derive(Debug, Default)]
pub struct WarmStartCache {
    slots: Mutex<HashMap<(String, String), Slot>>,
}

impl WarmStartCache {
    pub fn get_or_train(
        &self,
        model: &WacModel,
        adj: &str,
        noun: &str,
        dataset: &Dataset,
        config: &TrainConfig,
    ) -> Result<Arc<MlpParams>> {
        let slot = {
            let mut slots = self.slots.lock().expect("cache lock poisoned");
            slots.entry((adj.to_string(), noun.to_string())).or_default().clone()
        };
        let mut guard = slot.lock().expect("cache slot poisoned");
        if let Some(p) = guard.as_ref() {
            return Ok(p.clone());
        }
        let trained = Arc::new(warm_start_pair(model, adj, noun, dataset, config)?);
        *guard = Some(trained.clone());
        Ok(trained)
    }

    pub fn len(&self) -> usize {
        self.slots
            .lock()
            .expect("cache lock poisoned")
            .values()
            .filter(|s| s.lock().map(|g| g.is_some()).unwrap_or(false))
            .count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}
