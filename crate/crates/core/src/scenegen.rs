//! Deterministic synthetic scenes with unambiguous referring expressions.
//!
//! Each entity is one object placed in a cell of a square grid. Its raw feature vector is
//! `[category prototype ‖ RGB ‖ size]` plus Gaussian noise; the positional block is appended
//! from the bounding box when the dataset is assembled. Expressions follow the template
//! `the [size]? [color]? noun ( REL the [size]? [color]? noun )?` and are checked to pick out
//! exactly one entity before they are emitted.

use std::collections::BTreeMap;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{positional_features, BBox, Dataset, Entity, RefExpInstance, Scene, Split};
use crate::error::{Error, Result};
use crate::parser::Lexicons;
use crate::seed;

const MAX_SCENE_RETRIES: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Relation {
    LeftOf,
    RightOf,
    Above,
    Below,
    NextTo,
}

impl Relation {
    pub const ALL: [Relation; 5] = [
        Relation::LeftOf,
        Relation::RightOf,
        Relation::Above,
        Relation::Below,
        Relation::NextTo,
    ];

    pub fn phrase(self) -> &'static str {
        match self {
            Relation::LeftOf => "left of",
            Relation::RightOf => "right of",
            Relation::Above => "above",
            Relation::Below => "below",
            Relation::NextTo => "next to",
        }
    }

    pub fn from_phrase(phrase: &str) -> Option<Relation> {
        Relation::ALL.into_iter().find(|r| r.phrase() == phrase)
    }

    /// Whether `subject REL landmark` holds for the bbox centers (y grows downward).
    pub fn holds(self, subject: &BBox, landmark: &BBox, next_to_threshold: f64) -> bool {
        let (sx, sy) = subject.center();
        let (lx, ly) = landmark.center();
        match self {
            Relation::LeftOf => sx < lx,
            Relation::RightOf => sx > lx,
            Relation::Above => sy < ly,
            Relation::Below => sy > ly,
            Relation::NextTo => ((sx - lx).powi(2) + (sy - ly).powi(2)).sqrt() < next_to_threshold,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ColorTerm {
    pub name: String,
    /// Hue in degrees.
    pub hue: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SizeTerm {
    pub name: String,
    /// Bounding-box extent as a fraction of the grid cell.
    pub extent: f64,
    /// Value of the size feature.
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenLexicon {
    pub nouns: Vec<String>,
    pub colors: Vec<ColorTerm>,
    pub sizes: Vec<SizeTerm>,
    pub relations: Vec<Relation>,
}

impl Default for GenLexicon {
    fn default() -> Self {
        let colors = [
            ("red", 0.0),
            ("yellow", 60.0),
            ("green", 120.0),
            ("cyan", 180.0),
            ("blue", 240.0),
            ("purple", 300.0),
        ];
        GenLexicon {
            nouns: ["ball", "box", "cup", "book", "chair", "lamp", "vase", "shoe"]
                .iter()
                .map(|s| s.to_string())
                .collect(),
            colors: colors
                .iter()
                .map(|&(name, hue)| ColorTerm { name: name.into(), hue })
                .collect(),
            sizes: vec![
                SizeTerm {
                    name: "small".into(),
                    extent: 0.45,
                    value: 0.25,
                },
                SizeTerm {
                    name: "large".into(),
                    extent: 0.9,
                    value: 0.75,
                },
            ],
            relations: Relation::ALL.to_vec(),
        }
    }
}

impl GenLexicon {
    /// Parser lexicons matching this vocabulary: colors and sizes are adjectives.
    pub fn to_lexicons(&self) -> Lexicons {
        Lexicons {
            adjectives: self
                .colors
                .iter()
                .map(|c| c.name.clone())
                .chain(self.sizes.iter().map(|s| s.name.clone()))
                .collect(),
            nouns: self.nouns.iter().cloned().collect(),
            ..Lexicons::default()
        }
    }

    pub fn color(&self, name: &str) -> Option<&ColorTerm> {
        self.colors.iter().find(|c| c.name == name)
    }

    fn validate(&self) -> Result<()> {
        if self.nouns.is_empty() || self.colors.is_empty() || self.sizes.is_empty() {
            return Err(Error::Config("lexicon needs at least one noun, color and size".into()));
        }
        let mut all: Vec<&str> = self.nouns.iter().map(String::as_str).collect();
        all.extend(self.colors.iter().map(|c| c.name.as_str()));
        all.extend(self.sizes.iter().map(|s| s.name.as_str()));
        let n = all.len();
        all.sort_unstable();
        all.dedup();
        if all.len() != n {
            return Err(Error::Config("lexicon words must be distinct".into()));
        }
        if self.sizes.iter().any(|s| !(s.extent > 0.0 && s.extent <= 1.0)) {
            return Err(Error::Config("size extent must be in (0, 1]".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenConfig {
    pub n_scenes: usize,
    pub objects_per_scene: usize,
    pub noise_sigma: f64,
    pub seed: u64,
    pub lexicon: GenLexicon,
    /// Fraction of expressions that contain a relational phrase.
    pub relation_fraction: f64,
    /// Width of the category prototype vectors.
    pub prototype_dim: usize,
    /// Center distance below which two objects are "next to" each other.
    pub next_to_threshold: f64,
    /// Objects sit in distinct cells of a `grid_size × grid_size` grid.
    pub grid_size: usize,
    /// Half-width (degrees) of the hue band around each color term.
    pub hue_band: f64,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            n_scenes: 1000,
            objects_per_scene: 8,
            noise_sigma: 0.05,
            seed: 0,
            lexicon: GenLexicon::default(),
            relation_fraction: 0.3,
            prototype_dim: 32,
            next_to_threshold: 0.25,
            grid_size: 5,
            hue_band: 12.0,
        }
    }
}

impl GenConfig {
    pub fn validate(&self) -> Result<()> {
        if self.objects_per_scene < 2 {
            return Err(Error::Config("objects_per_scene must be at least 2".into()));
        }
        if self.objects_per_scene > self.grid_size * self.grid_size {
            return Err(Error::Config(format!(
                "{} objects do not fit a {}x{} grid",
                self.objects_per_scene, self.grid_size, self.grid_size
            )));
        }
        if !(0.0..=1.0).contains(&self.relation_fraction) {
            return Err(Error::Config("relation_fraction must be in [0, 1]".into()));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(Error::Config("noise_sigma must be a finite value >= 0".into()));
        }
        if self.prototype_dim == 0 {
            return Err(Error::Config("prototype_dim must be positive".into()));
        }
        if !(0.0..180.0).contains(&self.hue_band) {
            return Err(Error::Config("hue_band must be in [0, 180)".into()));
        }
        self.lexicon.validate()
    }

    pub fn layout(&self) -> FeatureLayout {
        FeatureLayout {
            prototype_dim: self.prototype_dim,
        }
    }

    pub fn geometry(&self) -> Geometry {
        Geometry {
            next_to_threshold: self.next_to_threshold,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Geometry {
    pub next_to_threshold: f64,
}

/// Where each attribute lives inside a synthetic feature vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FeatureLayout {
    pub prototype_dim: usize,
}

impl FeatureLayout {
    pub fn rgb_offset(&self) -> usize {
        self.prototype_dim
    }

    pub fn size_offset(&self) -> usize {
        self.prototype_dim + 3
    }

    pub fn raw_dim(&self) -> usize {
        self.prototype_dim + 4
    }

    /// Full feature vector for a pure color patch: zero prototype, the given hue, the given
    /// size value, and the positional block of a small centered box.
    pub fn color_patch(&self, hue: f64, size_value: f64) -> Vec<f64> {
        let mut v = vec![0.0; self.prototype_dim];
        v.extend_from_slice(&hue_to_rgb(hue));
        v.push(size_value);
        let centered = BBox {
            x1: 0.4,
            y1: 0.4,
            x2: 0.6,
            y2: 0.6,
        };
        v.extend_from_slice(&positional_features(&centered).expect("valid box"));
        v
    }
}

/// RGB on a cosine color wheel: each channel peaks at its primary hue (0°, 120°, 240°) and
/// varies smoothly with hue, so every hue maps to a distinct point.
pub fn hue_to_rgb(hue: f64) -> [f64; 3] {
    let channel = |primary: f64| 0.5 + 0.5 * (hue - primary).to_radians().cos();
    [channel(0.0), channel(120.0), channel(240.0)]
}

/// Smallest angular distance between two hues, in degrees.
pub fn hue_distance(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(360.0);
    d.min(360.0 - d)
}

/// Seeded unit vectors, one per noun; keyed by the noun itself.
pub fn category_prototypes(config: &GenConfig) -> BTreeMap<String, Vec<f64>> {
    config
        .lexicon
        .nouns
        .iter()
        .map(|noun| {
            let mut rng = seed::stream(config.seed, &format!("prototype:{noun}"));
            let mut v: Vec<f64> = (0..config.prototype_dim)
                .map(|_| StandardNormal.sample(&mut rng))
                .collect();
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            v.iter_mut().for_each(|x| *x /= norm);
            (noun.clone(), v)
        })
        .collect()
}

/// Which optional attributes a noun phrase mentions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Form {
    size: bool,
    color: bool,
}

const FORMS: [Form; 4] = [
    Form {
        size: false,
        color: false,
    },
    Form {
        size: false,
        color: true,
    },
    Form {
        size: true,
        color: false,
    },
    Form {
        size: true,
        color: true,
    },
];

/// Attribute constraints of one noun phrase.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
struct Description {
    noun: Option<String>,
    color: Option<String>,
    size: Option<String>,
}

impl Description {
    fn of(e: &Entity, form: Form) -> Self {
        Description {
            noun: e.attr_str("category").map(str::to_owned),
            color: form.color.then(|| e.attr_str("color").map(str::to_owned)).flatten(),
            size: form.size.then(|| e.attr_str("size").map(str::to_owned)).flatten(),
        }
    }

    fn matches(&self, e: &Entity) -> bool {
        let eq = |want: &Option<String>, key: &str| want.as_deref().is_none_or(|w| e.attr_str(key) == Some(w));
        self.noun.is_some() && eq(&self.noun, "category") && eq(&self.color, "color") && eq(&self.size, "size")
    }

    fn tokens(&self) -> Vec<String> {
        let mut out = vec!["the".to_string()];
        out.extend(self.size.iter().cloned());
        out.extend(self.color.iter().cloned());
        out.extend(self.noun.iter().cloned());
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExpressionMode {
    AttributeOnly,
    Relational,
    /// Attribute-only when possible, relational otherwise.
    Auto,
}

/// No expression in the requested mode singles out the target.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NoDiscriminatingExpression;

fn matching<'a>(scene: &'a Scene, d: &'a Description) -> impl Iterator<Item = usize> + 'a {
    scene
        .entities
        .iter()
        .enumerate()
        .filter(move |(_, e)| d.matches(e))
        .map(|(i, _)| i)
}

/// Renders a referring expression that picks out `scene.entities[target]` and nothing else.
pub fn render_expression(
    target: usize,
    scene: &Scene,
    geometry: Geometry,
    relations: &[Relation],
    mode: ExpressionMode,
    rng: &mut ChaCha8Rng,
) -> std::result::Result<Vec<String>, NoDiscriminatingExpression> {
    let t = &scene.entities[target];
    let unique = |d: &Description| matching(scene, d).eq(std::iter::once(target));

    if mode != ExpressionMode::Relational {
        let forms: Vec<Description> = FORMS
            .iter()
            .map(|&f| Description::of(t, f))
            .filter(|d| unique(d))
            .collect();
        if let Some(d) = forms.choose(rng) {
            return Ok(d.tokens());
        }
        if mode == ExpressionMode::AttributeOnly {
            return Err(NoDiscriminatingExpression);
        }
    }

    let mut options = Vec::new();
    for &rel in relations {
        for (l, landmark) in scene.entities.iter().enumerate() {
            if l == target || !rel.holds(bbox(t), bbox(landmark), geometry.next_to_threshold) {
                continue;
            }
            for &f2 in &FORMS {
                let np2 = Description::of(landmark, f2);
                if !matching(scene, &np2).eq(std::iter::once(l)) {
                    continue;
                }
                for &f1 in &FORMS {
                    let np1 = Description::of(t, f1);
                    let mut hits = matching(scene, &np1).filter(|&e| {
                        e != l && rel.holds(bbox(&scene.entities[e]), bbox(landmark), geometry.next_to_threshold)
                    });
                    if hits.next() == Some(target) && hits.next().is_none() {
                        options.push((np1.clone(), rel, np2.clone()));
                    }
                }
            }
        }
    }
    let (np1, rel, np2) = options.choose(rng).ok_or(NoDiscriminatingExpression)?;
    let mut tokens = np1.tokens();
    tokens.extend(rel.phrase().split_whitespace().map(str::to_owned));
    tokens.extend(np2.tokens());
    Ok(tokens)
}

fn bbox(e: &Entity) -> &BBox {
    e.bbox.as_ref().expect("synthetic entities always carry a bbox")
}

fn sample_scene(
    config: &GenConfig,
    prototypes: &BTreeMap<String, Vec<f64>>,
    scene_id: &str,
    rng: &mut ChaCha8Rng,
) -> Scene {
    let lex = &config.lexicon;
    let g = config.grid_size;
    let cell = 1.0 / g as f64;
    let mut cells: Vec<usize> = (0..g * g).collect();
    cells.shuffle(rng);
    let noise = Normal::new(0.0, config.noise_sigma).expect("validated sigma");

    let entities = cells[..config.objects_per_scene]
        .iter()
        .enumerate()
        .map(|(k, &c)| {
            let (row, col) = (c / g, c % g);
            let noun = lex.nouns.choose(rng).expect("non-empty");
            let color = lex.colors.choose(rng).expect("non-empty");
            let size = lex.sizes.choose(rng).expect("non-empty");
            let hue = (color.hue + rng.random_range(-1.0..=1.0) * config.hue_band).rem_euclid(360.0);

            let (cx, cy) = ((col as f64 + 0.5) * cell, (row as f64 + 0.5) * cell);
            let half_w = 0.5 * cell * size.extent * rng.random_range(0.75..=1.0);
            let half_h = 0.5 * cell * size.extent * rng.random_range(0.75..=1.0);
            let bbox = BBox {
                x1: cx - half_w,
                y1: cy - half_h,
                x2: cx + half_w,
                y2: cy + half_h,
            };

            let mut features = prototypes[noun].clone();
            features.extend_from_slice(&hue_to_rgb(hue));
            features.push(size.value);
            if config.noise_sigma > 0.0 {
                features.iter_mut().for_each(|f| *f += noise.sample(rng));
            }

            let attributes = BTreeMap::from([
                ("category".to_string(), noun.as_str().into()),
                ("color".to_string(), color.name.as_str().into()),
                ("size".to_string(), size.name.as_str().into()),
                ("hue".to_string(), hue.into()),
                ("row".to_string(), row.into()),
                ("col".to_string(), col.into()),
            ]);
            Entity {
                object_id: format!("o{k}"),
                features,
                bbox: Some(bbox),
                attributes,
            }
        })
        .collect();
    Scene {
        scene_id: scene_id.to_string(),
        entities,
    }
}

fn generate_one(
    config: &GenConfig,
    prototypes: &BTreeMap<String, Vec<f64>>,
    index: usize,
) -> Result<(Scene, RefExpInstance)> {
    let scene_id = format!("s{index:06}");
    let mut rng = seed::stream(config.seed, &format!("scene:{index}"));
    let geometry = config.geometry();
    for _ in 0..MAX_SCENE_RETRIES {
        let scene = sample_scene(config, prototypes, &scene_id, &mut rng);
        let mode = if rng.random_bool(config.relation_fraction) {
            ExpressionMode::Relational
        } else {
            ExpressionMode::AttributeOnly
        };
        let mut order: Vec<usize> = (0..scene.entities.len()).collect();
        order.shuffle(&mut rng);
        for target in order {
            if let Ok(tokens) = render_expression(target, &scene, geometry, &config.lexicon.relations, mode, &mut rng) {
                let refexp = RefExpInstance {
                    scene_id: scene_id.clone(),
                    tokens,
                    target_object_id: scene.entities[target].object_id.clone(),
                };
                return Ok((scene, refexp));
            }
        }
    }
    Err(Error::GenerationFailure {
        scene: scene_id,
        reason: format!("no unambiguous expression after {MAX_SCENE_RETRIES} attempts"),
    })
}

/// Generates scenes `start..start + count` of the stream defined by `config`.
///
/// Scene `i` depends only on `(config, i)`, so splits drawn from disjoint index ranges are
/// independent and parallel generation matches serial generation.
pub fn generate_split(config: &GenConfig, start: usize, count: usize, split: Split) -> Result<Dataset> {
    config.validate()?;
    let prototypes = category_prototypes(config);
    let pairs: Vec<(Scene, RefExpInstance)> = (start..start + count)
        .into_par_iter()
        .map(|i| generate_one(config, &prototypes, i))
        .collect::<Result<_>>()?;
    let (scenes, refexps) = pairs.into_iter().unzip();
    Dataset::from_raw(scenes, refexps, split)
}

pub fn generate_dataset(config: &GenConfig) -> Result<Dataset> {
    generate_split(config, 0, config.n_scenes, Split::Train)
}

/// Parses the template grammar back into attribute constraints.
fn parse_description(tokens: &[String], lex: &GenLexicon) -> Description {
    let mut d = Description::default();
    for t in tokens {
        if lex.nouns.contains(t) {
            d.noun = Some(t.clone());
        } else if lex.color(t).is_some() {
            d.color = Some(t.clone());
        } else if lex.sizes.iter().any(|s| &s.name == t) {
            d.size = Some(t.clone());
        }
    }
    d
}

/// Ground-truth resolver: interprets an expression against the entity attributes.
///
/// Returns every entity consistent with the expression, in scene order.
pub fn attribute_candidates(tokens: &[String], scene: &Scene, lex: &GenLexicon, geometry: Geometry) -> Vec<String> {
    let rel_at = (0..tokens.len()).find_map(|i| {
        lex.relations.iter().find_map(|&r| {
            let p: Vec<&str> = r.phrase().split_whitespace().collect();
            (tokens.len() >= i + p.len() && tokens[i..i + p.len()].iter().zip(&p).all(|(a, b)| a == b)).then_some((
                i,
                r,
                p.len(),
            ))
        })
    });
    let ids = |it: Vec<usize>| -> Vec<String> { it.into_iter().map(|i| scene.entities[i].object_id.clone()).collect() };
    match rel_at {
        None => {
            let d = parse_description(tokens, lex);
            ids(matching(scene, &d).collect())
        }
        Some((i, rel, n)) => {
            let np1 = parse_description(&tokens[..i], lex);
            let np2 = parse_description(&tokens[i + n..], lex);
            let landmarks: Vec<usize> = matching(scene, &np2).collect();
            ids(matching(scene, &np1)
                .filter(|&e| {
                    landmarks.iter().any(|&l| {
                        l != e
                            && rel.holds(
                                bbox(&scene.entities[e]),
                                bbox(&scene.entities[l]),
                                geometry.next_to_threshold,
                            )
                    })
                })
                .collect())
        }
    }
}

/// First attribute-consistent entity, falling back to the first entity of the scene.
pub fn attribute_match(tokens: &[String], scene: &Scene, lex: &GenLexicon, geometry: Geometry) -> String {
    attribute_candidates(tokens, scene, lex, geometry)
        .into_iter()
        .next()
        .unwrap_or_else(|| scene.entities[0].object_id.clone())
}
