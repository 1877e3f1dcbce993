use super::ObjectScores;
use crate::data::Scene;
use crate::error::Result;
use crate::wac::WacModel;

/// Adds the word's fitness to each score. Returns false, leaving scores untouched, for
/// out-of-vocabulary words.
pub(crate) fn add_word(model: &WacModel, word: &str, scene: &Scene, scores: &mut [f64]) -> Result<bool> {
    let Some(c) = model.classifier(word) else {
        return Ok(false);
    };
    for (s, e) in scores.iter_mut().zip(&scene.entities) {
        *s += c.predict(&e.features)?;
    }
    Ok(true)
}

/// Sum of word fitnesses over the in-vocabulary words. With no such word the scores are
/// uniform.
pub fn compose_summed<S: AsRef<str>>(model: &WacModel, words: &[S], scene: &Scene) -> Result<ObjectScores> {
    let mut inc = IncrementalResolver::new(model, scene);
    for w in words {
        inc.push(w.as_ref())?;
    }
    Ok(inc.scores())
}

/// Word-by-word accumulation of fitness scores, as words arrive.
#[derive(Debug, Clone)]
pub struct IncrementalResolver<'a> {
    model: &'a WacModel,
    scene: &'a Scene,
    state: ObjectScores,
    words_used: usize,
}

impl<'a> IncrementalResolver<'a> {
    pub fn new(model: &'a WacModel, scene: &'a Scene) -> Self {
        IncrementalResolver {
            model,
            scene,
            state: ObjectScores::zeros(scene),
            words_used: 0,
        }
    }

    /// Out-of-vocabulary words leave the state unchanged.
    pub fn push(&mut self, word: &str) -> Result<()> {
        if add_word(self.model, word, self.scene, &mut self.state.scores)? {
            self.words_used += 1;
        }
        Ok(())
    }

    pub fn words_used(&self) -> usize {
        self.words_used
    }

    /// The raw accumulated sums.
    pub fn state(&self) -> &ObjectScores {
        &self.state
    }

    /// Current scores: the accumulated sums, or uniform before any known word arrived.
    pub fn scores(&self) -> ObjectScores {
        if self.words_used == 0 {
            ObjectScores::uniform(self.scene)
        } else {
            self.state.clone()
        }
    }
}
