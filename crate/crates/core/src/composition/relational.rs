//! Relational phrases as classifiers over feature differences between two objects.

use std::collections::BTreeMap;

use rand::Rng;
use rayon::prelude::*;

use super::{ObjectScores, Resolver, Strategy};
use crate::classifiers::{TrainConfig, WordClassifier};
use crate::data::{Dataset, Scene};
use crate::error::{Error, Result};
use crate::parser::{self, RelationalView};
use crate::seed;
use crate::wac::{Exclusion, SamplingConfig, TrainOutcome, WacModel, WordMeta};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RelationalTraining {
    pub classifiers: BTreeMap<String, WordClassifier>,
    pub meta: BTreeMap<String, WordMeta>,
    pub excluded: BTreeMap<String, Exclusion>,
}

impl RelationalTraining {
    /// Stores the classifiers and their bookkeeping in `model`, replacing earlier ones.
    pub fn attach(self, model: &mut WacModel) {
        model.relational = self.classifiers;
        model.train_meta.relational = self.meta;
        model.train_meta.excluded_relational = self.excluded;
    }
}

fn difference(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

fn contains_phrase(tokens: &[String], phrase: &[&str]) -> bool {
    !phrase.is_empty()
        && tokens
            .windows(phrase.len())
            .any(|w| w.iter().zip(phrase).all(|(t, p)| t == p))
}

/// Fits one classifier per relational phrase. For an expression `NP1 r NP2` the positive
/// example is `x(target) - x(landmark)`, where the landmark is the entity other than the
/// target that best matches `NP2` under `np_strategy`. Negatives are differences between
/// random ordered pairs of distinct entities from scenes of expressions without `r`.
pub fn train_relational(
    resolver: &Resolver,
    dataset: &Dataset,
    np_strategy: &Strategy,
    sampling: &SamplingConfig,
    train: &TrainConfig,
) -> Result<RelationalTraining> {
    if np_strategy.is_relational() {
        return Err(Error::Config(
            "the noun-phrase strategy cannot itself be relational".into(),
        ));
    }
    np_strategy.check_backend(resolver.model.backend)?;
    sampling.validate()?;
    train.validate()?;
    let lexicons = resolver.lexicons;

    let positives: Vec<Option<(String, Vec<f64>)>> = dataset
        .refexps
        .par_iter()
        .map(|r| -> Result<_> {
            let parsed = parser::parse(&r.tokens, lexicons);
            let Some(view) = parsed.relational_view(lexicons) else {
                return Ok(None);
            };
            let (scene, target) = dataset.target(r);
            if scene.entities.len() < 2 {
                return Ok(None);
            }
            let np2 = resolver.compose(&view.np2, scene, np_strategy)?;
            let landmark = np2
                .scores
                .iter()
                .enumerate()
                .filter(|(i, _)| scene.entities[*i].object_id != target.object_id)
                .fold(None::<(usize, f64)>, |best, (i, &s)| match best {
                    Some((_, b)) if b >= s => best,
                    _ => Some((i, s)),
                })
                .map(|(i, _)| &scene.entities[i])
                .expect("at least two entities");
            Ok(Some((view.relation, difference(&target.features, &landmark.features))))
        })
        .collect::<Result<_>>()?;

    let mut by_relation: BTreeMap<String, Vec<Vec<f64>>> = BTreeMap::new();
    for (rel, diff) in positives.into_iter().flatten() {
        by_relation.entry(rel).or_default().push(diff);
    }

    let outcomes: Vec<(String, TrainOutcome)> = by_relation
        .into_par_iter()
        .map(|(rel, pos)| -> Result<_> {
            if pos.len() < sampling.min_positives {
                return Ok((rel, Err(Exclusion::TooFewPositives { positives: pos.len() })));
            }
            let phrase: Vec<&str> = rel.split(' ').collect();
            let pool: Vec<&Scene> = dataset
                .refexps
                .iter()
                .filter(|r| !contains_phrase(&r.tokens, &phrase))
                .map(|r| dataset.target(r).0)
                .filter(|s| s.entities.len() >= 2)
                .collect();
            if pool.is_empty() {
                return Ok((rel, Err(Exclusion::NoNegatives { positives: pos.len() })));
            }
            let mut rng = seed::stream(sampling.seed, &format!("relational:{rel}"));
            let count = pos.len() * sampling.neg_ratio;
            let neg: Vec<Vec<f64>> = (0..count)
                .map(|_| {
                    let scene = pool[rng.random_range(0..pool.len())];
                    let n = scene.entities.len();
                    let i = rng.random_range(0..n);
                    let j = (i + rng.random_range(1..n)) % n;
                    difference(&scene.entities[i].features, &scene.entities[j].features)
                })
                .collect();
            let classifier = WordClassifier::train(resolver.model.backend, &pos, &neg, train)?;
            let meta = WordMeta {
                positives: pos.len(),
                negatives: neg.len(),
                pool: pool.len(),
                with_replacement: true,
            };
            Ok((rel, Ok((classifier, meta))))
        })
        .collect::<Result<_>>()?;

    let mut out = RelationalTraining::default();
    for (rel, outcome) in outcomes {
        match outcome {
            Ok((c, m)) => {
                out.classifiers.insert(rel.clone(), c);
                out.meta.insert(rel, m);
            }
            Err(e) => {
                out.excluded.insert(rel, e);
            }
        }
    }
    Ok(out)
}

/// Scores each candidate `i` by its best partner: `max_{j != i} P1(i) * p_r(x_i - x_j) * P2(j)`
/// with `P1`, `P2` the normalized noun-phrase scores. Without a classifier for the relation
/// the whole expression is composed instead; with fewer than two entities only `NP1` is.
pub fn resolve_relational(
    resolver: &Resolver,
    view: &RelationalView,
    scene: &Scene,
    np_strategy: &Strategy,
) -> Result<ObjectScores> {
    let p1 = resolver.compose(&view.np1, scene, np_strategy)?;
    if scene.entities.len() < 2 {
        return Ok(p1);
    }
    let Some(rel) = resolver.model.relational.get(&view.relation) else {
        let mut tokens = view.np1.tokens.clone();
        tokens.extend(view.relation.split(' ').map(str::to_owned));
        tokens.extend(view.np2.tokens.iter().cloned());
        return resolver.compose(&resolver.whole_expression(&tokens), scene, np_strategy);
    };
    let p1 = p1.normalize();
    let p2 = resolver.compose(&view.np2, scene, np_strategy)?.normalize();
    let n = scene.entities.len();
    let mut scores = ObjectScores::zeros(scene);
    for i in 0..n {
        let xi = &scene.entities[i].features;
        let mut best = 0.0f64;
        for j in (0..n).filter(|&j| j != i) {
            let pr = rel.predict(&difference(xi, &scene.entities[j].features))?;
            best = best.max(p1.scores[i] * pr * p2.scores[j]);
        }
        scores.scores[i] = best;
    }
    Ok(scores)
}
