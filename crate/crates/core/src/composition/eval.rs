use rayon::prelude::*;
use serde::Serialize;

use super::{Resolver, Strategy};
use crate::data::Dataset;
use crate::error::Result;
use crate::parser::{self, Lexicons};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct Tally {
    pub correct: usize,
    pub total: usize,
}

impl Tally {
    /// `None` when nothing was counted.
    pub fn accuracy(&self) -> Option<f64> {
        (self.total > 0).then(|| self.correct as f64 / self.total as f64)
    }

    fn add(&mut self, correct: bool) {
        self.total += 1;
        self.correct += correct as usize;
    }
}

/// Accuracy over all expressions and over the simple and relational subsets.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct Accuracy {
    pub overall: Tally,
    pub simple: Tally,
    pub relational: Tally,
}

impl Accuracy {
    pub fn record(&mut self, relational: bool, correct: bool) {
        self.overall.add(correct);
        if relational {
            self.relational.add(correct);
        } else {
            self.simple.add(correct);
        }
    }
}

/// Whether the expression contains a known relational phrase.
pub fn is_relational_expression(tokens: &[String], lexicons: &Lexicons) -> bool {
    parser::parse(tokens, lexicons).has_relation()
}

/// Resolves every expression of `dataset` and counts top-1 hits against the annotated
/// target. Expressions are resolved in parallel; the tally does not depend on scheduling.
pub fn evaluate(resolver: &Resolver, dataset: &Dataset, strategy: &Strategy) -> Result<Accuracy> {
    strategy.check_backend(resolver.model.backend)?;
    let outcomes: Vec<(bool, bool)> = dataset
        .refexps
        .par_iter()
        .map(|r| {
            let (scene, _) = dataset.target(r);
            let res = resolver.resolve(&r.tokens, scene, strategy)?;
            Ok((
                is_relational_expression(&r.tokens, resolver.lexicons),
                res.predicted == r.target_object_id,
            ))
        })
        .collect::<Result<_>>()?;
    let mut acc = Accuracy::default();
    for (rel, hit) in outcomes {
        acc.record(rel, hit);
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tallies_split_by_subset() {
        let mut a = Accuracy::default();
        a.record(false, true);
        a.record(false, false);
        a.record(true, true);
        assert_eq!(a.overall, Tally { correct: 2, total: 3 });
        assert_eq!(a.simple.accuracy(), Some(0.5));
        assert_eq!(a.relational.accuracy(), Some(1.0));
        assert_eq!(Tally::default().accuracy(), None);
    }
}
