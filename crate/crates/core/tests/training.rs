use std::fs;

use wac::classifiers::{Backend, TrainConfig};
use wac::data::{Dataset, Split};
use wac::scenegen::{generate_split, GenConfig};
use wac::wac::{load_model, model_from_json, save_model, train_model, Exclusion, SamplingConfig, WacModel};

fn dataset() -> Dataset {
    let cfg = GenConfig {
        seed: 21,
        relation_fraction: 0.0,
        ..GenConfig::default()
    };
    let mut d = generate_split(&cfg, 0, 120, Split::Train).unwrap();
    for (i, r) in d.refexps.iter_mut().enumerate() {
        if i < 4 {
            r.tokens.push("rare".into());
        }
        if (10..15).contains(&i) {
            r.tokens.push("often".into());
        }
    }
    d
}

fn quick() -> TrainConfig {
    TrainConfig {
        max_epochs: 200,
        ..TrainConfig::default()
    }
}

fn train_in_pool(threads: usize, d: &Dataset, backend: Backend) -> WacModel {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .unwrap()
        .install(|| train_model(d, backend, &SamplingConfig::default(), &quick()).unwrap())
}

#[test]
fn positive_threshold_and_negative_ratio() {
    let d = dataset();
    let m = train_model(&d, Backend::LogReg, &SamplingConfig::default(), &quick()).unwrap();
    assert!(!m.contains("rare"));
    assert_eq!(
        m.train_meta.excluded["rare"],
        Exclusion::TooFewPositives { positives: 4 }
    );
    assert!(m.contains("often"));
    assert_eq!(m.train_meta.words["often"].positives, 5);
    for (word, meta) in &m.train_meta.words {
        assert!(meta.positives >= 5, "{word}");
        assert_eq!(meta.negatives, 5 * meta.positives, "{word}");
    }
    // every expression contains "the", so no negatives exist for it
    assert!(matches!(m.train_meta.excluded["the"], Exclusion::NoNegatives { .. }));
}

#[test]
fn model_files_are_bit_identical_across_thread_counts() {
    let d = dataset();
    let dir = tempfile::tempdir().unwrap();
    for backend in [Backend::LogReg, Backend::Mlp, Backend::Tree] {
        let a = dir.path().join(format!("{backend}-1.json"));
        let b = dir.path().join(format!("{backend}-4.json"));
        save_model(&train_in_pool(1, &d, backend), &a).unwrap();
        save_model(&train_in_pool(4, &d, backend), &b).unwrap();
        assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap(), "{backend}");
        let loaded = load_model(&a).unwrap();
        let c = dir.path().join(format!("{backend}-again.json"));
        save_model(&loaded, &c).unwrap();
        assert_eq!(fs::read(&a).unwrap(), fs::read(&c).unwrap(), "{backend}");
    }
}

#[test]
fn sampling_seed_changes_the_model() {
    let d = dataset();
    let a = train_model(&d, Backend::LogReg, &SamplingConfig::default(), &quick()).unwrap();
    let other = SamplingConfig {
        seed: 1,
        ..SamplingConfig::default()
    };
    let b = train_model(&d, Backend::LogReg, &other, &quick()).unwrap();
    assert_ne!(a.classifiers, b.classifiers);
}

#[test]
fn model_files_are_checked_on_load() {
    let d = dataset();
    let m = train_model(&d, Backend::Tree, &SamplingConfig::default(), &quick()).unwrap();
    let text = serde_json::to_string(&m).unwrap();
    assert_eq!(model_from_json(&text).unwrap(), m);

    let future = text.replacen("\"version\":1", "\"version\":2", 1);
    assert!(matches!(
        model_from_json(&future),
        Err(wac::Error::UnsupportedVersion { expected: 1, found: 2 })
    ));

    let mut wrong_dim = serde_json::to_value(&m).unwrap();
    wrong_dim["feature_dim"] = 3.into();
    assert!(model_from_json(&wrong_dim.to_string()).is_err());
}

#[test]
fn only_the_train_split_trains() {
    let mut d = dataset();
    d.split = Split::Dev;
    assert!(train_model(&d, Backend::LogReg, &SamplingConfig::default(), &quick()).is_err());
}
