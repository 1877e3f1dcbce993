#![allow(dead_code)]

use std::sync::OnceLock;

use wac::classifiers::{Backend, TrainConfig};
use wac::composition::{train_relational, Resolver, Strategy};
use wac::data::{Dataset, Entity, Split};
use wac::parser::Lexicons;
use wac::scenegen::{generate_split, GenConfig};
use wac::wac::{train_model, SamplingConfig, WacModel};

pub const TRAIN_SCENES: usize = 400;
pub const TEST_SCENES: usize = 100;

pub fn gen_config() -> GenConfig {
    GenConfig {
        seed: 5,
        relation_fraction: 0.5,
        ..GenConfig::default()
    }
}

pub fn lexicons() -> Lexicons {
    gen_config().lexicon.to_lexicons()
}

pub fn train_set() -> &'static Dataset {
    static D: OnceLock<Dataset> = OnceLock::new();
    D.get_or_init(|| generate_split(&gen_config(), 0, TRAIN_SCENES, Split::Train).unwrap())
}

pub fn test_set() -> &'static Dataset {
    static D: OnceLock<Dataset> = OnceLock::new();
    D.get_or_init(|| generate_split(&gen_config(), TRAIN_SCENES, TEST_SCENES, Split::Test).unwrap())
}

fn train(backend: Backend) -> WacModel {
    let sampling = SamplingConfig::default();
    let config = TrainConfig::default();
    let mut model = train_model(train_set(), backend, &sampling, &config).unwrap();
    let lex = lexicons();
    let np = match backend {
        Backend::Mlp => Strategy::MlpExtended,
        _ => Strategy::SummedPredictions,
    };
    let rel = train_relational(&Resolver::new(&model, &lex), train_set(), &np, &sampling, &config).unwrap();
    rel.attach(&mut model);
    model
}

/// Word and relational classifiers trained on [`train_set`].
pub fn model(backend: Backend) -> &'static WacModel {
    static LOGREG: OnceLock<WacModel> = OnceLock::new();
    static MLP: OnceLock<WacModel> = OnceLock::new();
    static TREE: OnceLock<WacModel> = OnceLock::new();
    let cell = match backend {
        Backend::LogReg => &LOGREG,
        Backend::Mlp => &MLP,
        Backend::Tree => &TREE,
    };
    cell.get_or_init(|| train(backend))
}

pub fn attr<'a>(e: &'a Entity, key: &str) -> &'a str {
    e.attr_str(key).unwrap()
}

pub fn tokens(s: &str) -> Vec<String> {
    s.split_whitespace().map(str::to_owned).collect()
}
