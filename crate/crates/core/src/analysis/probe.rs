use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::data::POSITIONAL_FEATURES;
use crate::error::{Error, Result};
use crate::scenegen::FeatureLayout;
use crate::wac::WacModel;

/// Evenly spaced hues over the full circle, starting at 0°. Everything except the color
/// is held at a neutral value: zero category prototype, a fixed size and a centered box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HueSweep {
    pub samples: usize,
    pub size_value: f64,
}

impl Default for HueSweep {
    fn default() -> Self {
        HueSweep {
            samples: 360,
            size_value: 0.5,
        }
    }
}

impl HueSweep {
    pub fn hues(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.samples).map(|i| 360.0 * i as f64 / self.samples as f64)
    }
}

/// `(hue, p_word(patch))` for each hue of the sweep.
pub fn probe_classifier(
    model: &WacModel,
    word: &str,
    layout: FeatureLayout,
    sweep: &HueSweep,
) -> Result<Vec<(f64, f64)>> {
    let c = model
        .classifier(word)
        .ok_or_else(|| Error::OutOfVocabulary(word.to_string()))?;
    let dim = layout.raw_dim() + POSITIONAL_FEATURES;
    if dim != model.feature_dim {
        return Err(Error::DimensionMismatch {
            expected: model.feature_dim,
            found: dim,
        });
    }
    sweep
        .hues()
        .map(|h| Ok((h, c.predict(&layout.color_patch(h, sweep.size_value))?)))
        .collect()
}

pub fn probe_to_tsv(word: &str, curve: &[(f64, f64)]) -> String {
    let mut out = String::from("word\thue\tprobability\n");
    for (h, p) in curve {
        writeln!(out, "{word}\t{h}\t{p}").expect("write to string");
    }
    out
}
