//! Subcommand implementations. Every command is a pure function of its
//! inputs, flags and seed; artifacts are byte-reproducible and each primary
//! output gets a manifest written alongside.

use std::collections::BTreeSet;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use setembed::benchmark::{
    estimate_completeness, generate_queries, BenchHeader, GenCriteria, QueryBenchmark, TaskKind,
};
use setembed::checkpoint::{self, CheckpointFormat};
use setembed::error::{Error, Result};
use setembed::eval::{evaluate, Method};
use setembed::hierarchy::{expand_with_hierarchy, HierarchyEdges};
use setembed::observations::{ingest_pairs, BuildOutcome, MatrixKind, ObservationMatrix};
use setembed::query::parse_query;
use setembed::training::{fit, random_search, HyperGrid, Model, ModelKind, TrainConfig};
use setembed::vecmodel::{Transform, VecStrategy};
use setembed::{EntityCatalog, Query};

use crate::manifest::ManifestBuilder;

pub fn ingest(
    observations: &Path,
    hierarchy: Option<&Path>,
    kind: MatrixKind,
    out_prefix: &Path,
    seed: u64,
) -> Result<()> {
    let mut manifest = ManifestBuilder::new("ingest", seed);
    manifest.input(observations)?;
    manifest.arg("observations", observations.display());
    manifest.arg("kind", kind.as_str());

    let pairs = ObservationMatrix::read_pairs_tsv(observations)?;
    let mut extra_attrs: Vec<String> = Vec::new();
    let name_edges = match hierarchy {
        Some(path) => {
            if kind != MatrixKind::GroundTruth {
                return Err(Error::InvalidConfig(
                    "hierarchy expansion applies to ground-truth ingests only".into(),
                ));
            }
            manifest.input(path)?;
            manifest.arg("hierarchy", path.display());
            let edges = HierarchyEdges::read_name_pairs(path)?;
            for (child, parent) in &edges {
                extra_attrs.push(child.clone());
                extra_attrs.push(parent.clone());
            }
            edges
        }
        None => Vec::new(),
    };

    let (catalog, BuildOutcome { matrix, duplicates }) = ingest_pairs(kind, &pairs, &extra_attrs)?;
    if duplicates > 0 {
        eprintln!("warning: {duplicates} duplicate pairs merged");
    }
    let matrix = if name_edges.is_empty() {
        matrix
    } else {
        let edges = name_edges
            .iter()
            .map(|(c, p)| Ok((catalog.attribute(c)?, catalog.attribute(p)?)))
            .collect::<Result<Vec<_>>>()?;
        expand_with_hierarchy(&matrix, &HierarchyEdges::new(edges)?)?
    };

    let catalog_path = prefixed(out_prefix, "catalog.tsv");
    let matrix_path = prefixed(out_prefix, "matrix.tsv");
    write_file(&catalog_path, |w| catalog.write_tsv(w))?;
    write_file(&matrix_path, |w| matrix.write_internal(w))?;
    manifest.write_for(&matrix_path)?;

    println!("items={}", catalog.num_items());
    println!("attributes={}", catalog.num_attributes());
    println!("nnz={}", matrix.nnz());
    Ok(())
}

pub fn train(
    matrix_path: &Path,
    catalog_path: &Path,
    config_path: &Path,
    kind: ModelKind,
    out: &Path,
    format: CheckpointFormat,
    seed_override: Option<u64>,
) -> Result<()> {
    let matrix = ObservationMatrix::load_internal(matrix_path)?;
    let catalog = EntityCatalog::load_tsv(catalog_path)?;
    check_shapes(&matrix, &catalog)?;
    let mut cfg = TrainConfig::from_kv_str(&std::fs::read_to_string(config_path)?)?;
    if let Some(seed) = seed_override {
        cfg.seed = seed;
    }
    if cfg.learning_rate == 0.0 {
        eprintln!("warning: learning_rate is 0, parameters will not move");
    }

    let mut manifest = ManifestBuilder::new("train", cfg.seed);
    manifest.input(matrix_path)?;
    manifest.input(catalog_path)?;
    manifest.input(config_path)?;
    manifest.arg("kind", kind.as_str());
    manifest.arg("format", format.as_str());
    manifest.arg("config", cfg.to_kv_string().replace('\n', " "));

    let outcome = fit(&matrix, &cfg, kind)?;
    write_file(out, |w| {
        checkpoint::save(w, &outcome.model, &catalog.content_hash(), format)
    })?;
    let log_path = suffixed(out, ".log.tsv");
    write_file(&log_path, |w| {
        writeln!(w, "epoch\tmeanLoss")?;
        for (epoch, loss) in outcome.epoch_losses.iter().enumerate() {
            writeln!(w, "{epoch}\t{loss}")?;
        }
        Ok(())
    })?;
    manifest.write_for(out)?;
    println!(
        "trained kind={} epochs={} finalLoss={}",
        kind.as_str(),
        outcome.epoch_losses.len(),
        outcome.epoch_losses.last().copied().unwrap_or(f64::NAN)
    );
    Ok(())
}

#[allow(clippy::too_many_arguments)]
pub fn search(
    matrix_path: &Path,
    catalog_path: &Path,
    grid_path: &Path,
    kind: ModelKind,
    val_benchmark: &Path,
    val_split: f64,
    val_all: bool,
    out_prefix: &Path,
    format: CheckpointFormat,
    seed: u64,
) -> Result<()> {
    let matrix = ObservationMatrix::load_internal(matrix_path)?;
    let catalog = EntityCatalog::load_tsv(catalog_path)?;
    check_shapes(&matrix, &catalog)?;
    let grid = HyperGrid::from_kv_str(&std::fs::read_to_string(grid_path)?)?;
    let bench = QueryBenchmark::load_jsonl(val_benchmark)?;
    let val_queries = validation_queries(&bench, &catalog, val_split, val_all, seed)?;

    let mut manifest = ManifestBuilder::new("search", seed);
    manifest.input(matrix_path)?;
    manifest.input(catalog_path)?;
    manifest.input(grid_path)?;
    manifest.input(val_benchmark)?;
    manifest.arg("kind", kind.as_str());
    manifest.arg("val_split", val_split);
    manifest.arg("val_all", val_all);
    manifest.arg("val_queries", val_queries.len());

    let outcome = random_search(&matrix, &grid, kind, &val_queries, seed)?;

    let ckpt_path = prefixed(out_prefix, "ckpt");
    write_file(&ckpt_path, |w| {
        checkpoint::save(w, &outcome.best_model, &catalog.content_hash(), format)
    })?;
    let config_path = prefixed(out_prefix, "config");
    std::fs::write(&config_path, outcome.best_config.to_kv_string())?;
    let trials_path = prefixed(out_prefix, "trials.tsv");
    write_file(&trials_path, |w| {
        writeln!(w, "trial\tprecisionAt1\terror\tconfig")?;
        for t in &outcome.trials {
            writeln!(
                w,
                "{}\t{}\t{}\t{}",
                t.index,
                t.precision_at_1
                    .map(|p| format!("{p:.6}"))
                    .unwrap_or_else(|| "-".into()),
                t.error.as_deref().unwrap_or("-"),
                t.config.to_kv_string().trim_end().replace('\n', " ")
            )?;
        }
        Ok(())
    })?;
    manifest.write_for(&ckpt_path)?;
    println!(
        "best trial precisionAt1={:.6} over {} validation queries",
        outcome.best_precision,
        val_queries.len()
    );
    print!("{}", outcome.best_config.to_kv_string());
    Ok(())
}

fn validation_queries(
    bench: &QueryBenchmark,
    catalog: &EntityCatalog,
    val_split: f64,
    val_all: bool,
    seed: u64,
) -> Result<Vec<(Query, BTreeSet<usize>)>> {
    let singletons = bench
        .task(TaskKind::Singleton)
        .ok_or_else(|| Error::InvalidData("benchmark has no singleton queries".into()))?;
    let mut parsed = Vec::with_capacity(singletons.len());
    let mut unknown_items = 0usize;
    for entry in singletons {
        let query = parse_query(&entry.query, catalog)?;
        let mut truth = BTreeSet::new();
        for id in &entry.items {
            match catalog.lookup_item(id) {
                Some(i) => {
                    truth.insert(i);
                }
                None => unknown_items += 1,
            }
        }
        parsed.push((query, truth));
    }
    if unknown_items > 0 {
        eprintln!("warning: {unknown_items} ground-truth items not in catalog");
    }
    if val_all {
        return Ok(parsed);
    }
    if !(val_split > 0.0 && val_split < 1.0) {
        return Err(Error::InvalidConfig(
            "val-split must lie strictly between 0 and 1".into(),
        ));
    }
    let mut order: Vec<usize> = (0..parsed.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);
    let take = ((parsed.len() as f64 * val_split).ceil() as usize).max(1);
    let mut chosen: Vec<usize> = order.into_iter().take(take).collect();
    chosen.sort_unstable();
    let mut out = Vec::with_capacity(chosen.len());
    let mut parsed_opt: Vec<Option<(Query, BTreeSet<usize>)>> =
        parsed.into_iter().map(Some).collect();
    for idx in chosen {
        out.push(parsed_opt[idx].take().expect("unique index"));
    }
    Ok(out)
}

pub fn query(
    checkpoint_path: &Path,
    catalog_path: &Path,
    text: &str,
    k: usize,
    strategy: &str,
) -> Result<()> {
    let catalog = EntityCatalog::load_tsv(catalog_path)?;
    let (model, hash) = checkpoint::load_from_path(checkpoint_path)?;
    if hash != catalog.content_hash() {
        return Err(Error::CatalogMismatch(format!(
            "checkpoint was trained against catalog {hash}, got {}",
            catalog.content_hash()
        )));
    }
    let query = parse_query(text, &catalog)?;
    let scored: Vec<(usize, f64)> = match (&model, strategy) {
        (Model::Vector(vm), "probabilistic") => vm
            .rank_items(&query, VecStrategy::Probabilistic, k)?
            .into_iter()
            .map(|i| Ok((i, vm.score_probabilistic(&query, i)?)))
            .collect::<Result<_>>()?,
        (Model::Vector(vm), "algebraic") => vm
            .rank_items(&query, VecStrategy::Algebraic, k)?
            .into_iter()
            .map(|i| (i, vm.score_algebraic(&query, i)))
            .collect(),
        (Model::Box(bm), "box") => bm
            .rank_items(&query, k)?
            .into_iter()
            .map(|i| Ok((i, bm.score_compositional(&query, i)?)))
            .collect::<Result<_>>()?,
        (model, strategy) => {
            return Err(Error::InvalidConfig(format!(
                "strategy `{strategy}` does not apply to a {} checkpoint",
                model.kind().as_str()
            )))
        }
    };
    let mut stdout = std::io::stdout().lock();
    for (rank, (item, score)) in scored.iter().enumerate() {
        writeln!(stdout, "{}\t{}\t{:.6}", rank + 1, catalog.item_id(*item), score)?;
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
pub fn genbench(
    matrix_path: &Path,
    catalog_path: &Path,
    out: &Path,
    lift_min: f64,
    contain_max: f64,
    min_result: usize,
    max_result: Option<usize>,
    seed: u64,
) -> Result<()> {
    let matrix = ObservationMatrix::load_internal(matrix_path)?;
    let catalog = EntityCatalog::load_tsv(catalog_path)?;
    check_shapes(&matrix, &catalog)?;
    let criteria = GenCriteria {
        lift_min,
        contain_max,
        min_result,
        max_result: max_result
            .unwrap_or_else(|| GenCriteria::default_for(matrix.num_items()).max_result),
    };
    let mut manifest = ManifestBuilder::new("genbench", seed);
    manifest.input(matrix_path)?;
    manifest.input(catalog_path)?;
    manifest.arg("lift_min", criteria.lift_min);
    manifest.arg("contain_max", criteria.contain_max);
    manifest.arg("min_result", criteria.min_result);
    manifest.arg("max_result", criteria.max_result);

    let bench = generate_queries(&matrix, &catalog, &criteria)?;
    write_file(out, |w| bench.write_jsonl(w))?;
    manifest.write_for(out)?;
    for (task, count) in bench.task_counts() {
        println!("{}={count}", task.as_str());
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
pub fn eval(
    benchmark_path: &Path,
    catalog_path: &Path,
    lookup_matrix: Option<&Path>,
    vector_checkpoint: Option<&Path>,
    box_checkpoint: Option<&Path>,
    ks: &[usize],
    details: bool,
    out: &Path,
    seed: u64,
) -> Result<()> {
    let catalog = EntityCatalog::load_tsv(catalog_path)?;
    let bench = QueryBenchmark::load_jsonl(benchmark_path)?;

    let mut manifest = ManifestBuilder::new("eval", seed);
    manifest.input(benchmark_path)?;
    manifest.input(catalog_path)?;

    let lookup = match lookup_matrix {
        Some(path) => {
            manifest.input(path)?;
            let matrix = ObservationMatrix::load_internal(path)?;
            check_shapes(&matrix, &catalog)?;
            Some(matrix)
        }
        None => None,
    };
    let vector_model = match vector_checkpoint {
        Some(path) => {
            manifest.input(path)?;
            let (model, hash) = checkpoint::load_from_path(path)?;
            check_hash(&hash, &catalog)?;
            match model {
                Model::Vector(vm) => Some(vm),
                Model::Box(_) => {
                    return Err(Error::InvalidConfig(
                        "--vector-checkpoint points at a box checkpoint".into(),
                    ))
                }
            }
        }
        None => None,
    };
    let box_model = match box_checkpoint {
        Some(path) => {
            manifest.input(path)?;
            let (model, hash) = checkpoint::load_from_path(path)?;
            check_hash(&hash, &catalog)?;
            match model {
                Model::Box(bm) => Some(bm),
                Model::Vector(_) => {
                    return Err(Error::InvalidConfig(
                        "--box-checkpoint points at a vector checkpoint".into(),
                    ))
                }
            }
        }
        None => None,
    };

    let mut methods: Vec<Method> = Vec::new();
    if let Some(matrix) = &lookup {
        methods.push(Method::Lookup(matrix));
    }
    if let Some(vm) = &vector_model {
        if vm.transform == Transform::Sigmoid {
            methods.push(Method::Vector {
                model: vm,
                strategy: VecStrategy::Probabilistic,
            });
        } else {
            eprintln!("warning: identity-transform vector model, skipping probabilistic scoring");
        }
        methods.push(Method::Vector {
            model: vm,
            strategy: VecStrategy::Algebraic,
        });
    }
    if let Some(bm) = &box_model {
        methods.push(Method::Box(bm));
    }
    if methods.is_empty() {
        return Err(Error::InvalidConfig(
            "no methods: pass --lookup-matrix, --vector-checkpoint or --box-checkpoint".into(),
        ));
    }

    let report = evaluate(&methods, &bench, &catalog, ks, details)?;
    write_file(out, |w| {
        w.write_all(report.to_tsv().as_bytes())?;
        Ok(())
    })?;
    if let Some(detail_rows) = &report.details {
        let detail_path = suffixed(out, ".details.tsv");
        write_file(&detail_path, |w| {
            writeln!(w, "task\tmethod\tquery\tk\tprecision")?;
            for d in detail_rows {
                writeln!(
                    w,
                    "{}\t{}\t{}\t{}\t{:.6}",
                    d.task.as_str(),
                    d.method,
                    d.query,
                    d.k,
                    d.precision
                )?;
            }
            Ok(())
        })?;
    }
    manifest.write_for(out)?;
    print!("{}", report.render_table());
    Ok(())
}

pub fn completeness(
    ground_truth: &Path,
    hierarchy: Option<&Path>,
    noisy: &Path,
    min_overlap: usize,
    out: &Path,
    seed: u64,
) -> Result<()> {
    let mut manifest = ManifestBuilder::new("completeness", seed);
    manifest.input(ground_truth)?;
    manifest.input(noisy)?;
    manifest.arg("min_overlap", min_overlap);

    let gt_pairs = ObservationMatrix::read_pairs_tsv(ground_truth)?;
    let noisy_pairs = ObservationMatrix::read_pairs_tsv(noisy)?;
    let name_edges = match hierarchy {
        Some(path) => {
            manifest.input(path)?;
            HierarchyEdges::read_name_pairs(path)?
        }
        None => Vec::new(),
    };

    // one shared catalog spanning both sources
    let mut items: Vec<String> = Vec::new();
    let mut attrs: Vec<String> = Vec::new();
    let mut item_seen = std::collections::HashSet::new();
    let mut attr_seen = std::collections::HashSet::new();
    for (item, attr, _) in gt_pairs.iter().chain(noisy_pairs.iter()) {
        if item_seen.insert(item.clone()) {
            items.push(item.clone());
        }
        if attr_seen.insert(attr.clone()) {
            attrs.push(attr.clone());
        }
    }
    for (child, parent) in &name_edges {
        for name in [child, parent] {
            if attr_seen.insert(name.clone()) {
                attrs.push(name.clone());
            }
        }
    }
    let catalog = EntityCatalog::new(items, attrs)?;

    let to_triples = |pairs: &[(String, String, f64)]| -> Result<Vec<(usize, usize, f64)>> {
        pairs
            .iter()
            .map(|(i, a, w)| Ok((catalog.item(i)?, catalog.attribute(a)?, *w)))
            .collect()
    };
    let gt = ObservationMatrix::from_triples(
        MatrixKind::GroundTruth,
        catalog.num_items(),
        catalog.num_attributes(),
        to_triples(&gt_pairs)?,
    )?
    .matrix;
    let gt = if name_edges.is_empty() {
        gt
    } else {
        let edges = name_edges
            .iter()
            .map(|(c, p)| Ok((catalog.attribute(c)?, catalog.attribute(p)?)))
            .collect::<Result<Vec<_>>>()?;
        expand_with_hierarchy(&gt, &HierarchyEdges::new(edges)?)?
    };
    let noisy_matrix = ObservationMatrix::from_triples(
        MatrixKind::Noisy,
        catalog.num_items(),
        catalog.num_attributes(),
        to_triples(&noisy_pairs)?,
    )?
    .matrix;

    let report = estimate_completeness(&gt, &noisy_matrix, min_overlap)?;
    write_file(out, |w| {
        w.write_all(report.to_tsv(&catalog).as_bytes())?;
        Ok(())
    })?;
    manifest.write_for(out)?;
    println!(
        "aggregateCompletenessO={:.6}\naggregateCompletenessOPrime={:.6}",
        report.aggregate_o, report.aggregate_oprime
    );
    println!(
        "attributeCoverage={:.6}\npairCoverage={:.6}\nincludedAttributes={}",
        report.attribute_coverage,
        report.pair_coverage,
        report.rows.len()
    );
    Ok(())
}

/// Loads a benchmark file and reports per-task query counts and, when a
/// ground-truth matrix is supplied, the recomputed mean result ratio.
pub fn benchstats(
    benchmark_path: &Path,
    matrix_path: Option<&Path>,
    catalog_path: Option<&Path>,
) -> Result<()> {
    let mut bench = QueryBenchmark::load_jsonl(benchmark_path)?;
    if let Some(BenchHeader { criteria, .. }) = &bench.header {
        println!(
            "criteria: lift_min={} contain_max={} min_result={} max_result={}",
            criteria.lift_min, criteria.contain_max, criteria.min_result, criteria.max_result
        );
    }
    let with_rho = match (matrix_path, catalog_path) {
        (Some(m), Some(c)) => {
            let matrix = ObservationMatrix::load_internal(m)?;
            let catalog = EntityCatalog::load_tsv(c)?;
            check_shapes(&matrix, &catalog)?;
            bench.verify_against(&matrix, &catalog)?;
            bench.recompute_rho(&matrix, &catalog)?;
            true
        }
        (None, None) => false,
        _ => {
            return Err(Error::InvalidConfig(
                "--matrix and --catalog go together".into(),
            ))
        }
    };
    for task in TaskKind::ALL {
        if let Some(entries) = bench.task(task) {
            if with_rho {
                println!(
                    "{}\t{}\t{:.3}",
                    task.as_str(),
                    entries.len(),
                    bench.mean_rho(task).unwrap_or(f64::NAN)
                );
            } else {
                println!("{}\t{}", task.as_str(), entries.len());
            }
        }
    }
    Ok(())
}

fn check_shapes(matrix: &ObservationMatrix, catalog: &EntityCatalog) -> Result<()> {
    if matrix.num_items() != catalog.num_items()
        || matrix.num_attributes() != catalog.num_attributes()
    {
        return Err(Error::CatalogMismatch(format!(
            "matrix is {}x{} but catalog is {}x{}",
            matrix.num_items(),
            matrix.num_attributes(),
            catalog.num_items(),
            catalog.num_attributes()
        )));
    }
    Ok(())
}

fn check_hash(hash: &str, catalog: &EntityCatalog) -> Result<()> {
    if hash != catalog.content_hash() {
        return Err(Error::CatalogMismatch(format!(
            "checkpoint was trained against catalog {hash}"
        )));
    }
    Ok(())
}

fn prefixed(prefix: &Path, suffix: &str) -> PathBuf {
    let mut name = prefix
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    name.push('.');
    name.push_str(suffix);
    prefix.with_file_name(name)
}

fn suffixed(path: &Path, suffix: &str) -> PathBuf {
    let mut name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    name.push_str(suffix);
    path.with_file_name(name)
}

fn write_file<F>(path: &Path, write: F) -> Result<()>
where
    F: FnOnce(&mut std::io::BufWriter<std::fs::File>) -> Result<()>,
{
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    write(&mut w)?;
    w.flush()?;
    Ok(())
}
