//! Entities, scenes, referring expressions and the JSONL dataset format.
//!
//! Feature vectors read from disk are the raw (opaque) features. When an entity carries a
//! bounding box, the seven positional features are appended at load time, so every
//! downstream consumer sees `feature_dim = raw_dim + 7`. Saving strips them again.

use std::collections::{BTreeMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of positional features appended for entities with a bounding box.
pub const POSITIONAL_FEATURES: usize = 7;

/// Axis-aligned rectangle in relative image coordinates (y grows downward).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 4]", into = "[f64; 4]")]
pub struct BBox {
    pub x1: f64,
    pub y1: f64,
    pub x2: f64,
    pub y2: f64,
}

impl BBox {
    pub fn new(x1: f64, y1: f64, x2: f64, y2: f64) -> Result<Self> {
        let bbox = BBox { x1, y1, x2, y2 };
        bbox.validate()?;
        Ok(bbox)
    }

    pub fn validate(&self) -> Result<()> {
        let BBox { x1, y1, x2, y2 } = *self;
        let finite = [x1, y1, x2, y2].iter().all(|v| v.is_finite());
        if !finite || !(0.0 <= x1 && x1 < x2 && x2 <= 1.0 && 0.0 <= y1 && y1 < y2 && y2 <= 1.0) {
            return Err(Error::InvalidInput(format!(
                "bbox ({x1}, {y1}, {x2}, {y2}) is degenerate or outside [0,1]"
            )));
        }
        Ok(())
    }

    pub fn width(&self) -> f64 {
        self.x2 - self.x1
    }

    pub fn height(&self) -> f64 {
        self.y2 - self.y1
    }

    pub fn center(&self) -> (f64, f64) {
        ((self.x1 + self.x2) / 2.0, (self.y1 + self.y2) / 2.0)
    }
}

impl TryFrom<[f64; 4]> for BBox {
    type Error = Error;

    fn try_from(v: [f64; 4]) -> Result<Self> {
        BBox::new(v[0], v[1], v[2], v[3])
    }
}

impl From<BBox> for [f64; 4] {
    fn from(b: BBox) -> Self {
        [b.x1, b.y1, b.x2, b.y2]
    }
}

/// `[x1, y1, x2, y2, area, dist_center, orientation]` for a bounding box.
///
/// Orientation is the normalized width/height difference `(w - h) / (w + h)`, which lies in
/// `[-1, 1]` and is zero for squares.
pub fn positional_features(bbox: &BBox) -> Result<[f64; POSITIONAL_FEATURES]> {
    bbox.validate()?;
    let (w, h) = (bbox.width(), bbox.height());
    let (cx, cy) = bbox.center();
    let dist_center = ((cx - 0.5).powi(2) + (cy - 0.5).powi(2)).sqrt();
    Ok([
        bbox.x1,
        bbox.y1,
        bbox.x2,
        bbox.y2,
        w * h,
        dist_center,
        (w - h) / (w + h),
    ])
}

/// One candidate referent.
#[derive(Debug, Clone, PartialEq)]
pub struct Entity {
    pub object_id: String,
    pub features: Vec<f64>,
    pub bbox: Option<BBox>,
    /// Ground-truth attributes; only synthetic data carries these.
    pub attributes: BTreeMap<String, serde_json::Value>,
}

impl Entity {
    pub fn attr_str(&self, key: &str) -> Option<&str> {
        self.attributes.get(key).and_then(|v| v.as_str())
    }

    pub fn attr_f64(&self, key: &str) -> Option<f64> {
        self.attributes.get(key).and_then(|v| v.as_f64())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub scene_id: String,
    pub entities: Vec<Entity>,
}

impl Scene {
    pub fn entity(&self, object_id: &str) -> Option<&Entity> {
        self.entities.iter().find(|e| e.object_id == object_id)
    }

    pub fn position(&self, object_id: &str) -> Option<usize> {
        self.entities.iter().position(|e| e.object_id == object_id)
    }

    fn validate_ids(&self) -> Result<()> {
        if self.entities.len() < 2 {
            return Err(Error::InvalidInput(format!(
                "scene {} has {} entities; at least 2 are required",
                self.scene_id,
                self.entities.len()
            )));
        }
        let mut seen = HashSet::new();
        for e in &self.entities {
            if !seen.insert(e.object_id.as_str()) {
                return Err(Error::InvalidInput(format!(
                    "scene {} repeats object id {}",
                    self.scene_id, e.object_id
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RefExpInstance {
    pub scene_id: String,
    pub tokens: Vec<String>,
    pub target_object_id: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Dev,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Dev => "dev",
            Split::Test => "test",
        }
    }
}

impl std::fmt::Display for Split {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "dev" => Ok(Split::Dev),
            "test" => Ok(Split::Test),
            other => Err(Error::InvalidInput(format!("unknown split {other:?}"))),
        }
    }
}

/// A validated collection of scenes and referring expressions.
///
/// Entity features already include the positional block when bounding boxes are present.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub scenes: IndexMap<String, Scene>,
    pub refexps: Vec<RefExpInstance>,
    pub split: Split,
    /// Length of every entity feature vector (raw + positional).
    pub feature_dim: usize,
    /// Length of the feature vectors as stored on disk.
    pub raw_dim: usize,
}

impl Dataset {
    /// Validates raw scenes and expressions and appends positional features.
    ///
    /// All entities must share the raw feature length and either all or none carry a bbox,
    /// otherwise the resulting feature dimensions would differ.
    pub fn from_raw(scenes: Vec<Scene>, refexps: Vec<RefExpInstance>, split: Split) -> Result<Self> {
        let mut raw_dim: Option<usize> = None;
        let mut with_bbox: Option<bool> = None;
        let mut map = IndexMap::with_capacity(scenes.len());
        for mut scene in scenes {
            scene.validate_ids()?;
            for e in &mut scene.entities {
                let d = e.features.len();
                match raw_dim {
                    None => raw_dim = Some(d),
                    Some(expected) if expected != d => return Err(Error::DimensionMismatch { expected, found: d }),
                    _ => {}
                }
                let has_bbox = e.bbox.is_some();
                match with_bbox {
                    None => with_bbox = Some(has_bbox),
                    Some(prev) if prev != has_bbox => {
                        let (expected, found) = if prev {
                            (d + POSITIONAL_FEATURES, d)
                        } else {
                            (d, d + POSITIONAL_FEATURES)
                        };
                        return Err(Error::DimensionMismatch { expected, found });
                    }
                    _ => {}
                }
                append_positional(e)?;
            }
            let id = scene.scene_id.clone();
            if map.insert(id.clone(), scene).is_some() {
                return Err(Error::InvalidInput(format!("duplicate scene id {id}")));
            }
        }
        for r in &refexps {
            validate_refexp(r, &map)?;
        }
        let raw_dim = raw_dim.unwrap_or(0);
        let feature_dim = raw_dim
            + if with_bbox.unwrap_or(false) {
                POSITIONAL_FEATURES
            } else {
                0
            };
        Ok(Dataset {
            scenes: map,
            refexps,
            split,
            feature_dim,
            raw_dim,
        })
    }

    pub fn scene(&self, scene_id: &str) -> Option<&Scene> {
        self.scenes.get(scene_id)
    }

    /// The scene and gold target entity of an expression. Both exist by construction.
    pub fn target(&self, r: &RefExpInstance) -> (&Scene, &Entity) {
        let scene = &self.scenes[&r.scene_id];
        let entity = scene.entity(&r.target_object_id).expect("validated at construction");
        (scene, entity)
    }
}

fn validate_refexp(r: &RefExpInstance, scenes: &IndexMap<String, Scene>) -> Result<()> {
    let scene = scenes
        .get(&r.scene_id)
        .ok_or_else(|| Error::ReferentialIntegrity(format!("expression refers to unknown scene {}", r.scene_id)))?;
    if scene.entity(&r.target_object_id).is_none() {
        return Err(Error::ReferentialIntegrity(format!(
            "target {} not found in scene {}",
            r.target_object_id, r.scene_id
        )));
    }
    if r.tokens.is_empty() {
        return Err(Error::InvalidInput(format!(
            "empty expression for target {} in scene {}",
            r.target_object_id, r.scene_id
        )));
    }
    Ok(())
}

fn append_positional(e: &mut Entity) -> Result<()> {
    if let Some(bbox) = &e.bbox {
        e.features.extend_from_slice(&positional_features(bbox)?);
    }
    if let Some(i) = e.features.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("feature {i} of entity {}", e.object_id)));
    }
    Ok(())
}

/// Validates a single raw scene (e.g. one supplied on the command line) and appends the
/// positional features. `feature_dim` is the expected total length, when known.
pub fn prepare_scene(mut scene: Scene, feature_dim: Option<usize>) -> Result<Scene> {
    scene.validate_ids()?;
    for e in &mut scene.entities {
        append_positional(e)?;
        if let Some(expected) = feature_dim {
            if e.features.len() != expected {
                return Err(Error::DimensionMismatch {
                    expected,
                    found: e.features.len(),
                });
            }
        }
    }
    Ok(scene)
}

/// Lowercase, strip punctuation, split on whitespace.
pub fn tokenize(expression: &str) -> Vec<String> {
    expression
        .chars()
        .filter(|c| c.is_alphanumeric() || c.is_whitespace())
        .collect::<String>()
        .to_lowercase()
        .split_whitespace()
        .map(str::to_owned)
        .collect()
}

#[derive(Serialize, Deserialize)]
struct EntityRecord {
    object_id: String,
    features: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    bbox: Option<BBox>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    attributes: BTreeMap<String, serde_json::Value>,
}

#[derive(Serialize, Deserialize)]
pub(crate) struct SceneRecord {
    scene_id: String,
    entities: Vec<EntityRecord>,
}

impl From<SceneRecord> for Scene {
    fn from(r: SceneRecord) -> Self {
        Scene {
            scene_id: r.scene_id,
            entities: r
                .entities
                .into_iter()
                .map(|e| Entity {
                    object_id: e.object_id,
                    features: e.features,
                    bbox: e.bbox,
                    attributes: e.attributes,
                })
                .collect(),
        }
    }
}

#[derive(Serialize, Deserialize)]
struct RefExpRecord {
    scene_id: String,
    expression: String,
    target_object_id: String,
}

/// Parses one scene in the scenes-JSONL line format, without appending positional features.
pub fn parse_raw_scene(json: &str) -> Result<Scene> {
    let record: SceneRecord = serde_json::from_str(json).map_err(|e| Error::InvalidInput(format!("scene: {e}")))?;
    Ok(record.into())
}

fn read_jsonl<T, P>(path: P) -> Result<Vec<T>>
where
    T: for<'de> Deserialize<'de>,
    P: AsRef<Path>,
{
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let record = serde_json::from_str(&line).map_err(|e| Error::parse(path, i + 1, e))?;
        out.push(record);
    }
    Ok(out)
}

pub fn load_dataset(scenes_path: impl AsRef<Path>, refexps_path: impl AsRef<Path>, split: Split) -> Result<Dataset> {
    let scenes: Vec<SceneRecord> = read_jsonl(&scenes_path)?;
    let refexps_path = refexps_path.as_ref();
    let records: Vec<RefExpRecord> = read_jsonl(refexps_path)?;
    let mut refexps = Vec::with_capacity(records.len());
    for (i, r) in records.into_iter().enumerate() {
        let tokens = tokenize(&r.expression);
        if tokens.is_empty() {
            return Err(Error::parse(refexps_path, i + 1, "expression has no tokens"));
        }
        refexps.push(RefExpInstance {
            scene_id: r.scene_id,
            tokens,
            target_object_id: r.target_object_id,
        });
    }
    Dataset::from_raw(scenes.into_iter().map(Scene::from).collect(), refexps, split)
}

fn raw_record(scene: &Scene, raw_dim: usize) -> SceneRecord {
    SceneRecord {
        scene_id: scene.scene_id.clone(),
        entities: scene
            .entities
            .iter()
            .map(|e| EntityRecord {
                object_id: e.object_id.clone(),
                features: e.features[..raw_dim].to_vec(),
                bbox: e.bbox,
                attributes: e.attributes.clone(),
            })
            .collect(),
    }
}

/// Serializes a scene back to the JSONL line format with positional features stripped.
pub fn scene_to_json(scene: &Scene, raw_dim: usize) -> String {
    serde_json::to_string(&raw_record(scene, raw_dim)).expect("scene records always serialize")
}

pub fn save_dataset(dataset: &Dataset, scenes_path: impl AsRef<Path>, refexps_path: impl AsRef<Path>) -> Result<()> {
    let scenes_path = scenes_path.as_ref();
    let lines = dataset.scenes.values().map(|s| scene_to_json(s, dataset.raw_dim));
    write_lines(scenes_path, lines)?;

    let lines = dataset.refexps.iter().map(|r| {
        serde_json::to_string(&RefExpRecord {
            scene_id: r.scene_id.clone(),
            expression: r.tokens.join(" "),
            target_object_id: r.target_object_id.clone(),
        })
        .expect("refexp records always serialize")
    });
    write_lines(refexps_path.as_ref(), lines)
}

fn write_lines(path: &Path, lines: impl Iterator<Item = String>) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for line in lines {
        writeln!(w, "{line}").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
