mod common;

use std::fs;

use common::{gen_config, model};
use wac::analysis::{
    cluster_embeddings, eval_similarity, load_external_embeddings, load_similarity_pairs, probe_classifier,
    save_embeddings, wac_embeddings, ClusterConfig, EmbeddingSource, HueSweep, TsneConfig,
};
use wac::classifiers::Backend;
use wac::scenegen::hue_distance;

/// With this little training data the peak is only required to sit nearer the word's own
/// hue than any other color term's.
#[test]
fn color_probes_peak_nearest_their_own_hue() {
    let m = model(Backend::Mlp);
    let cfg = gen_config();
    let sweep = HueSweep::default();
    for color in &cfg.lexicon.colors {
        let curve = probe_classifier(m, &color.name, cfg.layout(), &sweep).unwrap();
        assert_eq!(curve.len(), sweep.samples);
        let (peak, p) = curve
            .iter()
            .copied()
            .fold((0.0, f64::NEG_INFINITY), |a, b| if b.1 > a.1 { b } else { a });
        let nearest = cfg
            .lexicon
            .colors
            .iter()
            .min_by(|a, b| hue_distance(peak, a.hue).total_cmp(&hue_distance(peak, b.hue)))
            .unwrap();
        assert_eq!(nearest.name, color.name, "{} peaks at {peak}", color.name);
        let opposite = curve
            .iter()
            .min_by(|a, b| hue_distance(a.0, color.hue + 180.0).total_cmp(&hue_distance(b.0, color.hue + 180.0)))
            .unwrap();
        assert!(p > opposite.1, "{}", color.name);
    }
}

#[test]
fn probe_needs_a_matching_layout() {
    let m = model(Backend::Mlp);
    let mut layout = gen_config().layout();
    layout.prototype_dim += 1;
    assert!(probe_classifier(m, "red", layout, &HueSweep::default()).is_err());
    assert!(probe_classifier(m, "zebra", gen_config().layout(), &HueSweep::default()).is_err());
}

#[test]
fn embeddings_need_the_mlp_backend() {
    assert!(matches!(
        wac_embeddings(model(Backend::Tree)),
        Err(wac::Error::BackendMismatch { .. })
    ));
    let t = wac_embeddings(model(Backend::Mlp)).unwrap();
    assert_eq!(t.dim, 3 * model(Backend::Mlp).feature_dim);
    assert_eq!(t.len(), model(Backend::Mlp).vocabulary().count());
}

#[test]
fn similarity_pipeline_through_files() {
    let table = wac_embeddings(model(Backend::Mlp)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let emb = dir.path().join("emb.txt");
    save_embeddings(&table, &emb).unwrap();
    let external = load_external_embeddings(&emb).unwrap();
    assert_eq!(external.source, EmbeddingSource::External);
    assert_eq!(external.vectors, table.vectors);

    let pairs_path = dir.path().join("pairs.tsv");
    fs::write(
        &pairs_path,
        "w1\tw2\tscore\nred\tpurple\t8\nred\tgreen\t3\nball\tbox\t2\nsmall\tlarge\t5\nred\tzebra\t4\n",
    )
    .unwrap();
    let pairs = load_similarity_pairs(&pairs_path).unwrap();
    let alone = eval_similarity(&[&table], &pairs).unwrap();
    assert_eq!(alone.total_pairs, 5);
    assert_eq!(alone.tables[0].coverage, 4);
    assert!(alone.combined.is_none());

    let both = eval_similarity(&[&table, &external], &pairs).unwrap();
    assert_eq!(both.tables[0].rho, both.tables[1].rho);
    let combined = both.combined.unwrap();
    assert_eq!(combined.coverage, 4);
    assert!((combined.rho - alone.tables[0].rho).abs() < 1e-12);
}

#[test]
fn clustering_is_reproducible() {
    let t = wac_embeddings(model(Backend::Mlp)).unwrap();
    let tsne = TsneConfig::default();
    let a = cluster_embeddings(&t, &tsne, &ClusterConfig::default()).unwrap();
    let b = cluster_embeddings(&t, &tsne, &ClusterConfig::default()).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.words.len(), t.len());
    assert!(a.tsne.final_kl < a.tsne.initial_kl);
    let listed: usize = a.clusters().values().map(Vec::len).sum::<usize>() + a.noise().len();
    assert_eq!(listed, t.len());
}
