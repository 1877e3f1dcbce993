use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use log::{info, warn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wac::analysis::{
    cluster_embeddings, embeddings_to_text, eval_similarity, load_external_embeddings, load_similarity_pairs,
    probe_classifier, probe_to_tsv, wac_embeddings, HueSweep,
};
use wac::classifiers::Backend;
use wac::composition::{
    evaluate, is_relational_expression, train_relational, Accuracy, Resolver, Strategy, StrategySpec,
};
use wac::data::{load_dataset, parse_raw_scene, prepare_scene, save_dataset, tokenize, Dataset, Split};
use wac::parser::Lexicons;
use wac::scenegen::{attribute_match, generate_split, GenConfig};
use wac::wac::{corpus_words, load_model, save_model, train_model, WacModel};

use crate::config::RunConfig;
use crate::error::{CliError, Result};

pub const LEXICON_FILE: &str = "lexicon.txt";
pub const GENERATOR_FILE: &str = "generator.toml";

pub fn split_paths(dir: &Path, split: Split) -> (PathBuf, PathBuf) {
    (
        dir.join(format!("{split}.scenes.jsonl")),
        dir.join(format!("{split}.refexps.jsonl")),
    )
}

pub fn load_split(dir: &Path, split: Split) -> Result<Dataset> {
    let (s, r) = split_paths(dir, split);
    Ok(load_dataset(s, r, split)?)
}

fn require<'a>(value: &'a Option<PathBuf>, what: &str, flag: &str) -> Result<&'a Path> {
    value
        .as_deref()
        .ok_or_else(|| CliError::Usage(format!("no {what} given (use {flag} or the [paths] section)")))
}

/// The explicit lexicon file, else the dataset's, else the built-in phrase lists with no
/// adjective or noun classes.
pub fn load_lexicons(explicit: Option<&Path>, data: Option<&Path>) -> Result<Lexicons> {
    if let Some(p) = explicit {
        return Ok(Lexicons::load(p)?);
    }
    if let Some(p) = data.map(|d| d.join(LEXICON_FILE)).filter(|p| p.exists()) {
        return Ok(Lexicons::load(p)?);
    }
    warn!("no lexicon file; adjective-noun pairs will not be detected");
    Ok(Lexicons::default())
}

/// Generator settings saved next to a generated dataset.
pub fn load_generator(data: &Path) -> Result<Option<GenConfig>> {
    let p = data.join(GENERATOR_FILE);
    if !p.exists() {
        return Ok(None);
    }
    let text = fs::read_to_string(&p).map_err(|e| CliError::io(&p, e))?;
    toml::from_str(&text)
        .map(Some)
        .map_err(|source| CliError::ConfigParse { path: p, source })
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
    }
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

/// Writes to `path` when given, else to `stdout`.
fn emit(path: Option<&Path>, text: &str, stdout: &mut dyn Write) -> Result<()> {
    match path {
        Some(p) => {
            write_file(p, text)?;
            info!("wrote {}", p.display());
            Ok(())
        }
        None => stdout
            .write_all(text.as_bytes())
            .map_err(|e| CliError::io("<stdout>", e)),
    }
}

fn print(stdout: &mut dyn Write, text: &str) -> Result<()> {
    stdout
        .write_all(text.as_bytes())
        .map_err(|e| CliError::io("<stdout>", e))
}

pub fn cmd_gen(cfg: &RunConfig, stdout: &mut dyn Write) -> Result<()> {
    let dir = require(&cfg.paths.out, "output directory", "--out")
        .or_else(|_| require(&cfg.paths.data, "output directory", "--out"))?;
    cfg.gen.validate()?;
    let counts = cfg.split.counts(cfg.gen.n_scenes)?;
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let lexicons = cfg.gen.lexicon.to_lexicons();

    let mut start = 0;
    let mut vocab = BTreeSet::new();
    let (mut expressions, mut relational) = (0usize, 0usize);
    let mut sizes = Vec::new();
    for (split, count) in [Split::Train, Split::Dev, Split::Test].into_iter().zip(counts) {
        sizes.push(format!("{split} {count}"));
        if count == 0 {
            warn!("{split} split is empty; no files written for it");
            continue;
        }
        let d = generate_split(&cfg.gen, start, count, split)?;
        start += count;
        let (s, r) = split_paths(dir, split);
        save_dataset(&d, &s, &r)?;
        vocab.extend(corpus_words(&d));
        expressions += d.refexps.len();
        relational += d
            .refexps
            .iter()
            .filter(|r| is_relational_expression(&r.tokens, &lexicons))
            .count();
    }
    lexicons.save(dir.join(LEXICON_FILE))?;
    write_file(&dir.join(GENERATOR_FILE), &toml::to_string(&cfg.gen)?)?;

    let mut out = cfg.report_header()?;
    writeln!(out, "directory\t{}", dir.display()).unwrap();
    writeln!(out, "scenes\t{} ({})", cfg.gen.n_scenes, sizes.join(", ")).unwrap();
    writeln!(out, "vocabulary\t{}", vocab.len()).unwrap();
    writeln!(
        out,
        "relational expressions\t{relational}/{expressions} ({:.3})",
        relational as f64 / expressions.max(1) as f64
    )
    .unwrap();
    print(stdout, &out)
}

pub fn cmd_train(cfg: &RunConfig, data: Option<&Path>, lexicon: Option<&Path>, stdout: &mut dyn Write) -> Result<()> {
    let backend = cfg.training_backend()?;
    let spec = cfg.strategy_spec()?;
    if let Some(spec) = &spec {
        spec.strategy.check_backend(backend)?;
    }
    let data = data.or(cfg.paths.data.as_deref());
    let data = data.ok_or_else(|| CliError::Usage("no dataset directory given (use --data)".into()))?;
    let out =
        require(&cfg.paths.out, "model path", "--out").or_else(|_| require(&cfg.paths.model, "model path", "--out"))?;
    let lexicons = load_lexicons(lexicon.or(cfg.paths.lexicon.as_deref()), Some(data))?;
    let train = load_split(data, Split::Train)?;

    let mut model = train_model(&train, backend, &cfg.sampling, &cfg.train)?;
    let mut relational_note = String::new();
    if let Some(Strategy::Relational(np)) = spec.as_ref().map(|s| &s.strategy) {
        let resolver = Resolver::new(&model, &lexicons).with_warm_start(&train, cfg.warm_start_train());
        let rel = train_relational(&resolver, &train, np, &cfg.sampling, &cfg.train)?;
        relational_note = format!(
            "relational classifiers\t{}\t{}\n",
            rel.classifiers.len(),
            rel.classifiers.keys().cloned().collect::<Vec<_>>().join(", ")
        );
        rel.attach(&mut model);
    }
    save_model(&model, out)?;

    let mut report = cfg.report_header()?;
    writeln!(report, "model\t{}", out.display()).unwrap();
    writeln!(report, "backend\t{backend}").unwrap();
    writeln!(report, "vocabulary\t{}", model.classifiers.len()).unwrap();
    report.push_str(&relational_note);
    writeln!(report, "excluded\t{}", model.train_meta.excluded.len()).unwrap();
    for (word, why) in &model.train_meta.excluded {
        writeln!(report, "  {word}\t{why:?}").unwrap();
    }
    for (phrase, why) in &model.train_meta.excluded_relational {
        writeln!(report, "  {phrase} (relational)\t{why:?}").unwrap();
    }
    print(stdout, &report)
}

/// Strategies reported for a backend when none are configured.
pub fn default_strategies(backend: Backend) -> Vec<StrategySpec> {
    let names: &[&str] = match backend {
        Backend::LogReg => &["logreg-summed"],
        Backend::Mlp => &[
            "mlp-summed",
            "mlp-adjnoun-extended",
            "mlp-adjnoun-warmstart",
            "mlp-extended",
        ],
        Backend::Tree => &["tree-summed", "tree-graft"],
    };
    let mut out: Vec<StrategySpec> = names.iter().map(|n| n.parse().expect("known name")).collect();
    out.push(StrategySpec::relational_for(backend));
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub name: String,
    pub accuracy: Accuracy,
}

/// Accuracy of the attribute matcher, which reads the ground-truth attributes.
pub fn oracle_accuracy(data: &Dataset, gen: &GenConfig, lexicons: &Lexicons) -> Accuracy {
    let mut acc = Accuracy::default();
    for r in &data.refexps {
        let (scene, _) = data.target(r);
        let pick = attribute_match(&r.tokens, scene, &gen.lexicon, gen.geometry());
        acc.record(
            is_relational_expression(&r.tokens, lexicons),
            pick == r.target_object_id,
        );
    }
    acc
}

/// Accuracy of a uniformly random pick among the scene's entities.
pub fn random_accuracy(data: &Dataset, seed: u64, lexicons: &Lexicons) -> Accuracy {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut acc = Accuracy::default();
    for r in &data.refexps {
        let (scene, _) = data.target(r);
        let pick = &scene.entities[rng.random_range(0..scene.entities.len())];
        acc.record(
            is_relational_expression(&r.tokens, lexicons),
            pick.object_id == r.target_object_id,
        );
    }
    acc
}

fn fmt_acc(a: Option<f64>) -> String {
    a.map_or_else(|| "-".to_string(), |v| format!("{v:.4}"))
}

pub fn rows_to_tsv(rows: &[ReportRow]) -> String {
    let mut out = String::from("strategy\toverall\tsimple\trelational\tn_overall\tn_simple\tn_relational\n");
    for r in rows {
        let a = &r.accuracy;
        writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}",
            r.name,
            fmt_acc(a.overall.accuracy()),
            fmt_acc(a.simple.accuracy()),
            fmt_acc(a.relational.accuracy()),
            a.overall.total,
            a.simple.total,
            a.relational.total
        )
        .unwrap();
    }
    out
}

pub fn rows_to_table(rows: &[ReportRow]) -> String {
    let width = rows
        .iter()
        .map(|r| r.name.len())
        .max()
        .unwrap_or(0)
        .max("strategy".len());
    let mut out = format!(
        "{:<width$}  {:>8}  {:>8}  {:>10}\n",
        "strategy", "overall", "simple", "relational"
    );
    for r in rows {
        let a = &r.accuracy;
        writeln!(
            out,
            "{:<width$}  {:>8}  {:>8}  {:>10}",
            r.name,
            fmt_acc(a.overall.accuracy()),
            fmt_acc(a.simple.accuracy()),
            fmt_acc(a.relational.accuracy())
        )
        .unwrap();
    }
    out
}

/// Baseline rows followed by one row per strategy.
pub fn eval_rows(
    cfg: &RunConfig,
    model: &WacModel,
    lexicons: &Lexicons,
    data: &Dataset,
    train: Option<&Dataset>,
    gen: Option<&GenConfig>,
    strategies: &[StrategySpec],
) -> Result<Vec<ReportRow>> {
    let mut rows = Vec::new();
    if let Some(gen) = gen {
        rows.push(ReportRow {
            name: "attribute-oracle".into(),
            accuracy: oracle_accuracy(data, gen, lexicons),
        });
    }
    rows.push(ReportRow {
        name: "random".into(),
        accuracy: random_accuracy(data, cfg.seed.unwrap_or(0), lexicons),
    });
    let mut resolver = Resolver::new(model, lexicons);
    if let Some(train) = train {
        resolver = resolver.with_warm_start(train, cfg.warm_start_train());
    }
    for spec in strategies {
        if spec.backend != model.backend {
            return Err(wac::Error::BackendMismatch {
                operation: format!("strategy {spec}"),
                required: spec.backend.to_string(),
                found: model.backend.to_string(),
            }
            .into());
        }
        if spec.strategy.is_relational() && model.relational.is_empty() {
            warn!("{spec}: the model has no relational classifiers; whole expressions are composed instead");
        }
        info!("evaluating {spec}");
        rows.push(ReportRow {
            name: spec.to_string(),
            accuracy: evaluate(&resolver, data, &spec.strategy)?,
        });
    }
    Ok(rows)
}

pub fn cmd_eval(
    cfg: &RunConfig,
    model: Option<&Path>,
    data: Option<&Path>,
    lexicon: Option<&Path>,
    split: Option<Split>,
    stdout: &mut dyn Write,
) -> Result<()> {
    let model_path = model.or(cfg.paths.model.as_deref());
    let model_path = model_path.ok_or_else(|| CliError::Usage("no model given (use --model)".into()))?;
    let data = data.or(cfg.paths.data.as_deref());
    let data = data.ok_or_else(|| CliError::Usage("no dataset directory given (use --data)".into()))?;
    let model = load_model(model_path)?;
    let lexicons = load_lexicons(lexicon.or(cfg.paths.lexicon.as_deref()), Some(data))?;
    let split = split.unwrap_or(cfg.eval.split);
    let dataset = load_split(data, split)?;
    let gen = load_generator(data)?;
    if gen.is_none() {
        warn!(
            "no {GENERATOR_FILE} in {}; the attribute-oracle row is left out",
            data.display()
        );
    }

    let strategies: Vec<StrategySpec> = if let Some(spec) = cfg.strategy_spec()? {
        vec![spec]
    } else if !cfg.eval.strategies.is_empty() {
        cfg.eval
            .strategies
            .iter()
            .map(|n| match n.as_str() {
                "relational" => Ok(StrategySpec::relational_for(model.backend)),
                _ => n.parse(),
            })
            .collect::<wac::Result<_>>()?
    } else {
        default_strategies(model.backend)
    };
    let needs_train = strategies.iter().any(|s| {
        matches!(&s.strategy, Strategy::MlpAdjNounWarmStart)
            || matches!(&s.strategy, Strategy::Relational(np) if **np == Strategy::MlpAdjNounWarmStart)
    });
    let train = if needs_train {
        Some(load_split(data, Split::Train)?)
    } else {
        None
    };
    let rows = eval_rows(
        cfg,
        &model,
        &lexicons,
        &dataset,
        train.as_ref(),
        gen.as_ref(),
        &strategies,
    )?;

    let header = cfg.report_header()?;
    let acc_counts = rows.last().map(|r| r.accuracy).unwrap_or_default();
    let mut human = header.clone();
    writeln!(
        human,
        "model {} ({}), split {split}: {} expressions, {} simple, {} relational\n",
        model_path.display(),
        model.backend,
        acc_counts.overall.total,
        acc_counts.simple.total,
        acc_counts.relational.total
    )
    .unwrap();
    human.push_str(&rows_to_table(&rows));
    print(stdout, &human)?;
    if let Some(out) = &cfg.paths.out {
        write_file(out, &(header + &rows_to_tsv(&rows)))?;
        info!("wrote {}", out.display());
    }
    Ok(())
}

pub fn cmd_resolve(
    cfg: &RunConfig,
    model: Option<&Path>,
    lexicon: Option<&Path>,
    scene: &Path,
    expression: &str,
    data: Option<&Path>,
    stdout: &mut dyn Write,
) -> Result<()> {
    let model_path = model.or(cfg.paths.model.as_deref());
    let model_path = model_path.ok_or_else(|| CliError::Usage("no model given (use --model)".into()))?;
    let model = load_model(model_path)?;
    let data = data.or(cfg.paths.data.as_deref());
    let lexicons = load_lexicons(lexicon.or(cfg.paths.lexicon.as_deref()), data)?;

    let text = if scene == Path::new("-") {
        let mut s = String::new();
        std::io::stdin()
            .read_to_string(&mut s)
            .map_err(|e| CliError::io("<stdin>", e))?;
        s
    } else {
        fs::read_to_string(scene).map_err(|e| CliError::io(scene, e))?
    };
    let scene = prepare_scene(parse_raw_scene(text.trim())?, Some(model.feature_dim))?;
    let tokens = tokenize(expression);
    if tokens.is_empty() {
        return Err(CliError::Usage("the expression has no tokens".into()));
    }

    let spec = match cfg.strategy_spec()? {
        Some(s) => s,
        None => StrategySpec::new(Strategy::SummedPredictions, model.backend)?,
    };
    spec.strategy.check_backend(model.backend)?;
    let train = match (&spec.strategy, data) {
        (Strategy::MlpAdjNounWarmStart, Some(d)) => Some(load_split(d, Split::Train)?),
        _ => None,
    };
    let mut resolver = Resolver::new(&model, &lexicons);
    if let Some(t) = &train {
        resolver = resolver.with_warm_start(t, cfg.warm_start_train());
    }
    let res = resolver.resolve(&tokens, &scene, &spec.strategy)?;

    let mut out = cfg.report_header()?;
    writeln!(out, "strategy\t{spec}").unwrap();
    writeln!(out, "predicted\t{}", res.predicted).unwrap();
    out.push_str("object_id\tscore\n");
    for (id, s) in res.scores.object_ids.iter().zip(&res.scores.scores) {
        writeln!(out, "{id}\t{s}").unwrap();
    }
    emit(cfg.paths.out.as_deref(), &out, stdout)
}

fn mlp_model(cfg: &RunConfig, model: Option<&Path>) -> Result<WacModel> {
    let path = model.or(cfg.paths.model.as_deref());
    let path = path.ok_or_else(|| CliError::Usage("no model given (use --model)".into()))?;
    let model = load_model(path)?;
    model.require_backend(Backend::Mlp, "embedding analysis")?;
    Ok(model)
}

pub fn cmd_embed(cfg: &RunConfig, model: Option<&Path>, stdout: &mut dyn Write) -> Result<()> {
    let table = wac_embeddings(&mlp_model(cfg, model)?)?;
    info!("{} words, {} dimensions", table.len(), table.dim);
    emit(cfg.paths.out.as_deref(), &embeddings_to_text(&table), stdout)
}

pub fn cmd_sim(
    cfg: &RunConfig,
    model: Option<&Path>,
    pairs: Option<&Path>,
    external: Option<&Path>,
    stdout: &mut dyn Write,
) -> Result<()> {
    let wac_table = wac_embeddings(&mlp_model(cfg, model)?)?;
    let pairs_path = pairs.or(cfg.paths.pairs.as_deref());
    let pairs_path = pairs_path.ok_or_else(|| CliError::Usage("no word pairs given (use --pairs)".into()))?;
    let pairs = load_similarity_pairs(pairs_path)?;
    let ext = external
        .or(cfg.paths.external.as_deref())
        .map(load_external_embeddings)
        .transpose()?;
    let mut tables = vec![&wac_table];
    tables.extend(ext.as_ref());
    let report = eval_similarity(&tables, &pairs)?;

    let mut out = cfg.report_header()?;
    out.push_str("table\trho\tcoverage\tpairs\n");
    let name = |s: wac::analysis::EmbeddingSource| match s {
        wac::analysis::EmbeddingSource::WacHidden => "wac",
        wac::analysis::EmbeddingSource::External => "external",
        wac::analysis::EmbeddingSource::Combined => "combined",
    };
    for t in report.tables.iter().chain(&report.combined) {
        writeln!(
            out,
            "{}\t{:.4}\t{}\t{}",
            name(t.source),
            t.rho,
            t.coverage,
            report.total_pairs
        )
        .unwrap();
    }
    emit(cfg.paths.out.as_deref(), &out, stdout)
}

pub fn cmd_cluster(cfg: &RunConfig, model: Option<&Path>, stdout: &mut dyn Write) -> Result<()> {
    let table = wac_embeddings(&mlp_model(cfg, model)?)?;
    let clusters = cluster_embeddings(&table, &cfg.tsne, &cfg.cluster)?;
    let mut out = cfg.report_header()?;
    writeln!(
        out,
        "# t-SNE perplexity {:.3}, KL {:.4} -> {:.4}",
        clusters.tsne.perplexity, clusters.tsne.initial_kl, clusters.tsne.final_kl
    )
    .unwrap();
    for (id, words) in clusters.clusters() {
        writeln!(out, "cluster {id}\t{}", words.join(" ")).unwrap();
    }
    writeln!(out, "noise\t{}", clusters.noise().join(" ")).unwrap();
    print(stdout, &out)?;
    if let Some(p) = &cfg.paths.out {
        write_file(p, &(cfg.report_header()? + &clusters.to_tsv()))?;
        info!("wrote {}", p.display());
    }
    Ok(())
}

pub fn cmd_probe(
    cfg: &RunConfig,
    model: Option<&Path>,
    words: &[String],
    samples: Option<usize>,
    data: Option<&Path>,
    stdout: &mut dyn Write,
) -> Result<()> {
    let model = mlp_model(cfg, model)?;
    let gen = match data.or(cfg.paths.data.as_deref()) {
        Some(d) => load_generator(d)?.unwrap_or_else(|| cfg.gen.clone()),
        None => cfg.gen.clone(),
    };
    let sweep = HueSweep {
        samples: samples.unwrap_or(cfg.probe.samples),
        ..cfg.probe.clone()
    };
    if sweep.samples == 0 {
        return Err(CliError::Usage("--samples must be positive".into()));
    }
    let words: Vec<String> = if words.is_empty() {
        gen.lexicon.colors.iter().map(|c| c.name.clone()).collect()
    } else {
        words.to_vec()
    };
    let mut out = cfg.report_header()?;
    for (i, w) in words.iter().enumerate() {
        let curve = probe_classifier(&model, w, gen.layout(), &sweep)?;
        let tsv = probe_to_tsv(w, &curve);
        // one column header for the whole file
        out.push_str(if i == 0 {
            &tsv
        } else {
            tsv.split_once('\n').map_or("", |x| x.1)
        });
    }
    emit(cfg.paths.out.as_deref(), &out, stdout)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_strategy_rows_match_backends() {
        for b in [Backend::LogReg, Backend::Mlp, Backend::Tree] {
            for s in default_strategies(b) {
                assert_eq!(s.backend, b);
                s.strategy.check_backend(b).unwrap();
            }
        }
        let names: Vec<String> = default_strategies(Backend::Mlp).iter().map(|s| s.to_string()).collect();
        assert_eq!(names.last().unwrap(), "relational");
    }

    #[test]
    fn table_formats() {
        let mut a = Accuracy::default();
        a.record(false, true);
        a.record(false, false);
        let rows = [ReportRow {
            name: "mlp-summed".into(),
            accuracy: a,
        }];
        let tsv = rows_to_tsv(&rows);
        assert_eq!(tsv.lines().nth(1).unwrap(), "mlp-summed\t0.5000\t0.5000\t-\t2\t2\t0");
        assert!(rows_to_table(&rows).contains("mlp-summed"));
    }
}
