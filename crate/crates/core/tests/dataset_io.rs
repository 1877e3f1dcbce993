use std::fs;

use wac::data::{load_dataset, save_dataset, BBox, Dataset, Entity, RefExpInstance, Scene, Split};
use wac::scenegen::{generate_split, GenConfig};

fn roundtrip(d: &Dataset) -> Dataset {
    let dir = tempfile::tempdir().unwrap();
    let (s, r) = (dir.path().join("s.jsonl"), dir.path().join("r.jsonl"));
    save_dataset(d, &s, &r).unwrap();
    let back = load_dataset(&s, &r, d.split).unwrap();

    // saving the loaded copy reproduces the files byte for byte
    let (s2, r2) = (dir.path().join("s2.jsonl"), dir.path().join("r2.jsonl"));
    save_dataset(&back, &s2, &r2).unwrap();
    assert_eq!(fs::read(&s).unwrap(), fs::read(&s2).unwrap());
    assert_eq!(fs::read(&r).unwrap(), fs::read(&r2).unwrap());
    back
}

#[test]
fn generated_dataset_roundtrips() {
    let cfg = GenConfig {
        seed: 9,
        ..GenConfig::default()
    };
    let d = generate_split(&cfg, 0, 50, Split::Dev).unwrap();
    assert_eq!(roundtrip(&d), d);
}

#[test]
fn dataset_without_boxes_roundtrips() {
    let entity = |id: &str, f: [f64; 2]| Entity {
        object_id: id.into(),
        features: f.to_vec(),
        bbox: None,
        attributes: Default::default(),
    };
    let scene = Scene {
        scene_id: "s0".into(),
        entities: vec![entity("a", [0.1, 1.0 / 3.0]), entity("b", [-2.5, 1e-17])],
    };
    let r = RefExpInstance {
        scene_id: "s0".into(),
        tokens: vec!["left".into(), "one".into()],
        target_object_id: "a".into(),
    };
    let d = Dataset::from_raw(vec![scene], vec![r], Split::Train).unwrap();
    assert_eq!(d.feature_dim, 2);
    assert_eq!(roundtrip(&d), d);
}

#[test]
fn boxes_extend_features_on_load() {
    let scene = Scene {
        scene_id: "s".into(),
        entities: vec![
            Entity {
                object_id: "o".into(),
                features: vec![0.5],
                bbox: Some(BBox::new(0.0, 0.0, 0.5, 0.25).unwrap()),
                attributes: Default::default(),
            },
            Entity {
                object_id: "p".into(),
                features: vec![0.0],
                bbox: Some(BBox::new(0.5, 0.5, 1.0, 1.0).unwrap()),
                attributes: Default::default(),
            },
        ],
    };
    let r = RefExpInstance {
        scene_id: "s".into(),
        tokens: vec!["it".into()],
        target_object_id: "o".into(),
    };
    let d = Dataset::from_raw(vec![scene], vec![r], Split::Test).unwrap();
    let back = roundtrip(&d);
    assert_eq!(back.raw_dim, 1);
    assert_eq!(back.feature_dim, 8);
    let f = &back.scenes["s"].entities[0].features;
    // area, then distance of the box center (0.25, 0.125) to the image center
    assert_eq!(f[5], 0.125);
    assert!((f[6] - (0.25f64.powi(2) + 0.375f64.powi(2)).sqrt()).abs() < 1e-15);
}

#[test]
fn malformed_lines_report_their_position() {
    let dir = tempfile::tempdir().unwrap();
    let (s, r) = (dir.path().join("s.jsonl"), dir.path().join("r.jsonl"));
    fs::write(
        &s,
        "{\"scene_id\":\"s\",\"entities\":[{\"object_id\":\"o\",\"features\":[1.0]}]}\n{oops\n",
    )
    .unwrap();
    fs::write(&r, "").unwrap();
    match load_dataset(&s, &r, Split::Train) {
        Err(wac::Error::Parse { line, .. }) => assert_eq!(line, 2),
        other => panic!("expected a parse error, got {other:?}"),
    }
}
