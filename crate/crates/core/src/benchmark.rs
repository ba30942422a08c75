//! Compositional-query benchmark generation from co-occurrence statistics,
//! the JSON-lines benchmark container, and the capture-recapture annotation
//! completeness estimator.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::io::{BufRead, BufReader, Read, Write};

use serde::{Deserialize, Serialize};

use crate::catalog::EntityCatalog;
use crate::error::{Error, Result};
use crate::observations::{MatrixKind, ObservationMatrix};
use crate::query::{format_query, ground_truth_match, parse_query, rho, Literal, Query};

/// The five evaluated query shapes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum TaskKind {
    Singleton,
    Intersection,
    Difference,
    TripleIntersection,
    TripleDifference,
}

impl TaskKind {
    pub const ALL: [TaskKind; 5] = [
        TaskKind::Singleton,
        TaskKind::Intersection,
        TaskKind::Difference,
        TaskKind::TripleIntersection,
        TaskKind::TripleDifference,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TaskKind::Singleton => "singleton",
            TaskKind::Intersection => "intersection",
            TaskKind::Difference => "difference",
            TaskKind::TripleIntersection => "tripleIntersection",
            TaskKind::TripleDifference => "tripleDifference",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| Error::InvalidData(format!("unknown task kind `{s}`")))
    }

    /// Classifies a textual query by its positive/negated literal counts.
    pub fn classify_text(text: &str) -> Result<Self> {
        let mut pos = 0usize;
        let mut neg = 0usize;
        for token in text.split('&') {
            if token.trim().starts_with('!') {
                neg += 1;
            } else {
                pos += 1;
            }
        }
        Self::classify_counts(pos, neg).ok_or_else(|| {
            Error::InvalidData(format!(
                "query `{text}` ({pos} positive, {neg} negated) fits no benchmark task"
            ))
        })
    }

    pub fn classify(query: &Query) -> Option<Self> {
        Self::classify_counts(query.num_positive(), query.num_negated())
    }

    fn classify_counts(pos: usize, neg: usize) -> Option<Self> {
        match (pos, neg) {
            (1, 0) => Some(TaskKind::Singleton),
            (2, 0) => Some(TaskKind::Intersection),
            (1, 1) => Some(TaskKind::Difference),
            (3, 0) => Some(TaskKind::TripleIntersection),
            (2, 1) => Some(TaskKind::TripleDifference),
            _ => None,
        }
    }
}

/// One benchmark query: its text form, ground-truth item identifiers, and
/// the result ratio when known.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchEntry {
    pub query: String,
    pub items: Vec<String>,
    pub rho: Option<f64>,
}

/// Generation thresholds.
///
/// A composite query is kept when it is meaningful (its result is at least
/// `lift_min` times the independence expectation of its atoms), non-trivial
/// (at most `contain_max` of its most restrictive atom), and its result size
/// lies in `[min_result, max_result]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenCriteria {
    pub lift_min: f64,
    pub contain_max: f64,
    pub min_result: usize,
    pub max_result: usize,
}

impl GenCriteria {
    /// Defaults for a catalog of `m` items: lift 1.5, containment 0.8,
    /// result size in `[10, m/4]`.
    pub fn default_for(m: usize) -> Self {
        Self {
            lift_min: 1.5,
            contain_max: 0.8,
            min_result: 10,
            max_result: (m / 4).max(1),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.lift_min.is_nan() || self.lift_min <= 0.0 {
            return Err(Error::InvalidConfig("lift_min must be positive".into()));
        }
        if !(self.contain_max > 0.0 && self.contain_max < 1.0) {
            return Err(Error::InvalidConfig("contain_max must lie in (0, 1)".into()));
        }
        if self.min_result < 1 {
            return Err(Error::InvalidConfig("min_result must be at least 1".into()));
        }
        if self.max_result < self.min_result {
            return Err(Error::InvalidConfig(
                "max_result must be at least min_result".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchHeader {
    pub criteria: GenCriteria,
    pub source_hash: String,
}

/// Benchmark queries grouped by task, in deterministic generation order.
#[derive(Debug, Clone, Default)]
pub struct QueryBenchmark {
    pub header: Option<BenchHeader>,
    tasks: BTreeMap<TaskKind, Vec<BenchEntry>>,
}

#[derive(Serialize, Deserialize)]
struct JsonEntry {
    query: String,
    items: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct JsonHeader {
    criteria: GenCriteria,
    source_hash: String,
}

impl QueryBenchmark {
    pub fn push(&mut self, entry: BenchEntry) -> Result<()> {
        let task = TaskKind::classify_text(&entry.query)?;
        self.tasks.entry(task).or_default().push(entry);
        Ok(())
    }

    pub fn task(&self, task: TaskKind) -> Option<&[BenchEntry]> {
        self.tasks.get(&task).map(Vec::as_slice)
    }

    pub fn task_counts(&self) -> BTreeMap<TaskKind, usize> {
        self.tasks.iter().map(|(&t, v)| (t, v.len())).collect()
    }

    pub fn num_queries(&self) -> usize {
        self.tasks.values().map(Vec::len).sum()
    }

    pub fn mean_rho(&self, task: TaskKind) -> Option<f64> {
        let entries = self.tasks.get(&task)?;
        let rhos: Vec<f64> = entries.iter().filter_map(|e| e.rho).collect();
        if rhos.len() != entries.len() || rhos.is_empty() {
            return None;
        }
        Some(rhos.iter().sum::<f64>() / rhos.len() as f64)
    }

    /// Recomputes every entry's result ratio from a ground-truth matrix.
    pub fn recompute_rho(&mut self, o: &ObservationMatrix, catalog: &EntityCatalog) -> Result<()> {
        for entries in self.tasks.values_mut() {
            for entry in entries.iter_mut() {
                let q = parse_query(&entry.query, catalog)?;
                entry.rho = Some(rho(&q, o)?);
            }
        }
        Ok(())
    }

    /// Checks that every entry's item set equals the ground-truth match
    /// recomputed from `o`.
    pub fn verify_against(&self, o: &ObservationMatrix, catalog: &EntityCatalog) -> Result<()> {
        for entries in self.tasks.values() {
            for entry in entries {
                let q = parse_query(&entry.query, catalog)?;
                let expected: BTreeSet<String> = ground_truth_match(&q, o)?
                    .into_iter()
                    .map(|i| catalog.item_id(i).to_string())
                    .collect();
                let stored: BTreeSet<String> = entry.items.iter().cloned().collect();
                if expected != stored {
                    return Err(Error::InvalidData(format!(
                        "ground truth mismatch for `{}`",
                        entry.query
                    )));
                }
            }
        }
        Ok(())
    }

    /// JSON lines: an optional header object followed by one
    /// `{"query": ..., "items": [...]}` object per query.
    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<()> {
        if let Some(header) = &self.header {
            let line = serde_json::to_string(&JsonHeader {
                criteria: header.criteria,
                source_hash: header.source_hash.clone(),
            })
            .map_err(|e| Error::InvalidData(e.to_string()))?;
            writeln!(w, "{line}")?;
        }
        for task in TaskKind::ALL {
            if let Some(entries) = self.tasks.get(&task) {
                for entry in entries {
                    let line = serde_json::to_string(&JsonEntry {
                        query: entry.query.clone(),
                        items: entry.items.clone(),
                    })
                    .map_err(|e| Error::InvalidData(e.to_string()))?;
                    writeln!(w, "{line}")?;
                }
            }
        }
        Ok(())
    }

    pub fn read_jsonl<R: Read>(reader: BufReader<R>, source: &str) -> Result<Self> {
        let mut bench = QueryBenchmark::default();
        for (lineno, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let parse_err = |msg: String| Error::Parse {
                path: source.to_string(),
                line: lineno + 1,
                msg,
            };
            if lineno == 0 {
                if let Ok(header) = serde_json::from_str::<JsonHeader>(&line) {
                    bench.header = Some(BenchHeader {
                        criteria: header.criteria,
                        source_hash: header.source_hash,
                    });
                    continue;
                }
            }
            let entry: JsonEntry =
                serde_json::from_str(&line).map_err(|e| parse_err(e.to_string()))?;
            bench.push(BenchEntry {
                query: entry.query,
                items: entry.items,
                rho: None,
            })?;
        }
        if bench.num_queries() == 0 {
            return Err(Error::EmptyInput(source.to_string()));
        }
        Ok(bench)
    }

    pub fn load_jsonl(path: &std::path::Path) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::read_jsonl(BufReader::new(file), &path.display().to_string())
    }
}

/// Symmetric attribute co-occurrence counts; the diagonal holds `|I(a)|`.
#[derive(Debug)]
pub struct CooccurrenceStats {
    n: usize,
    counts: Vec<u32>,
}

impl CooccurrenceStats {
    pub fn count(&self, a: usize, b: usize) -> u32 {
        self.counts[a * self.n + b]
    }

    pub fn size(&self, a: usize) -> u32 {
        self.count(a, a)
    }
}

/// Counts `|I(a) ∩ I(b)|` for every attribute pair of a ground-truth matrix.
pub fn cooccurrence_stats(o: &ObservationMatrix) -> Result<CooccurrenceStats> {
    if o.kind() != MatrixKind::GroundTruth {
        return Err(Error::InvalidData(
            "co-occurrence statistics require a ground-truth matrix".into(),
        ));
    }
    let n = o.num_attributes();
    let mut counts = vec![0u32; n * n];
    for i in 0..o.num_items() {
        let row = o.row(i);
        for (pos, &(a, _)) in row.iter().enumerate() {
            counts[a * n + a] += 1;
            for &(b, _) in &row[pos + 1..] {
                counts[a * n + b] += 1;
                counts[b * n + a] += 1;
            }
        }
    }
    Ok(CooccurrenceStats { n, counts })
}

/// Checks the three generation criteria for a candidate whose atoms have the
/// given sizes. `joint` is the exact result size, `m` the number of items.
fn passes(criteria: &GenCriteria, atom_sizes: &[usize], joint: usize, m: usize) -> bool {
    if joint < criteria.min_result || joint > criteria.max_result {
        return false;
    }
    // expected size under independence: prod(atom sizes) / m^(k-1)
    let mut expected = atom_sizes[0] as f64;
    for &s in &atom_sizes[1..] {
        expected *= s as f64 / m as f64;
    }
    if (joint as f64) < criteria.lift_min * expected {
        return false;
    }
    let min_atom = *atom_sizes.iter().min().expect("at least one atom");
    joint as f64 <= criteria.contain_max * min_atom as f64
}

fn emit(
    bench: &mut QueryBenchmark,
    query: Query,
    o: &ObservationMatrix,
    catalog: &EntityCatalog,
) -> Result<()> {
    let matched = ground_truth_match(&query, o)?;
    let entry = BenchEntry {
        query: format_query(&query, catalog),
        items: matched
            .iter()
            .map(|&i| catalog.item_id(i).to_string())
            .collect(),
        rho: Some(rho(&query, o)?),
    };
    bench.push(entry)
}

fn sorted_intersection(a: &[usize], b: &[usize]) -> Vec<usize> {
    let mut out = Vec::new();
    let (mut x, mut y) = (0, 0);
    while x < a.len() && y < b.len() {
        match a[x].cmp(&b[y]) {
            std::cmp::Ordering::Less => x += 1,
            std::cmp::Ordering::Greater => y += 1,
            std::cmp::Ordering::Equal => {
                out.push(a[x]);
                x += 1;
                y += 1;
            }
        }
    }
    out
}

/// Generates the benchmark from co-occurrence statistics.
///
/// All singleton queries with at least `min_result` items are emitted.
/// Pair queries are screened by the three criteria; triples only extend
/// intersection pairs that passed. Output order is lexicographic by
/// attribute indices within each task, so identical inputs produce
/// byte-identical files.
pub fn generate_queries(
    o: &ObservationMatrix,
    catalog: &EntityCatalog,
    criteria: &GenCriteria,
) -> Result<QueryBenchmark> {
    criteria.validate()?;
    let stats = cooccurrence_stats(o)?;
    let m = o.num_items();
    let n = o.num_attributes();
    let pos = |a: usize| Literal {
        attribute: a,
        negated: false,
    };
    let neg = |a: usize| Literal {
        attribute: a,
        negated: true,
    };

    let mut bench = QueryBenchmark {
        header: Some(BenchHeader {
            criteria: *criteria,
            source_hash: matrix_hash(o),
        }),
        ..Default::default()
    };

    for a in 0..n {
        if (stats.size(a) as usize) >= criteria.min_result {
            emit(&mut bench, Query::singleton(a), o, catalog)?;
        }
    }

    let mut passed_pairs: Vec<(usize, usize)> = Vec::new();
    for a in 0..n {
        let size_a = stats.size(a) as usize;
        for b in (a + 1)..n {
            let joint = stats.count(a, b) as usize;
            if passes(criteria, &[size_a, stats.size(b) as usize], joint, m) {
                passed_pairs.push((a, b));
                emit(&mut bench, Query::new(vec![pos(a), pos(b)])?, o, catalog)?;
            }
        }
    }

    for a in 0..n {
        let size_a = stats.size(a) as usize;
        for b in 0..n {
            if a == b {
                continue;
            }
            let joint = size_a - stats.count(a, b) as usize;
            let atom_b = m - stats.size(b) as usize;
            if passes(criteria, &[size_a, atom_b], joint, m) {
                emit(&mut bench, Query::new(vec![pos(a), neg(b)])?, o, catalog)?;
            }
        }
    }

    // triple candidates: a passed pair extended by any third attribute
    let mut triples: BTreeSet<(usize, usize, usize)> = BTreeSet::new();
    let mut triple_diffs: BTreeSet<(usize, usize, usize)> = BTreeSet::new();
    for &(a, b) in &passed_pairs {
        for c in 0..n {
            if c == a || c == b {
                continue;
            }
            let mut key = [a, b, c];
            key.sort_unstable();
            triples.insert((key[0], key[1], key[2]));
            triple_diffs.insert((a, b, c));
        }
    }

    for (a, b, c) in triples {
        let ab = sorted_intersection(
            &o.column(a).iter().map(|&(i, _)| i).collect::<Vec<_>>(),
            &o.column(b).iter().map(|&(i, _)| i).collect::<Vec<_>>(),
        );
        let abc = sorted_intersection(
            &ab,
            &o.column(c).iter().map(|&(i, _)| i).collect::<Vec<_>>(),
        );
        let atoms = [
            stats.size(a) as usize,
            stats.size(b) as usize,
            stats.size(c) as usize,
        ];
        if passes(criteria, &atoms, abc.len(), m) {
            emit(
                &mut bench,
                Query::new(vec![pos(a), pos(b), pos(c)])?,
                o,
                catalog,
            )?;
        }
    }

    for (a, b, c) in triple_diffs {
        let ab = sorted_intersection(
            &o.column(a).iter().map(|&(i, _)| i).collect::<Vec<_>>(),
            &o.column(b).iter().map(|&(i, _)| i).collect::<Vec<_>>(),
        );
        let abc = sorted_intersection(
            &ab,
            &o.column(c).iter().map(|&(i, _)| i).collect::<Vec<_>>(),
        );
        let joint = ab.len() - abc.len();
        let atoms = [
            stats.size(a) as usize,
            stats.size(b) as usize,
            m - stats.size(c) as usize,
        ];
        if passes(criteria, &atoms, joint, m) {
            emit(
                &mut bench,
                Query::new(vec![pos(a), pos(b), neg(c)])?,
                o,
                catalog,
            )?;
        }
    }

    Ok(bench)
}

/// Content hash of a matrix's canonical serialization.
pub fn matrix_hash(o: &ObservationMatrix) -> String {
    use sha2::{Digest, Sha256};
    let mut buf = Vec::new();
    o.write_internal(&mut buf).expect("in-memory write");
    let digest = Sha256::digest(&buf);
    let mut out = String::with_capacity(64);
    for byte in digest {
        let _ = write!(out, "{byte:02x}");
    }
    out
}

/// Capture-recapture completeness estimate for one attribute.
#[derive(Debug, Clone, PartialEq)]
pub struct CompletenessRow {
    pub attribute: usize,
    pub count_o: usize,
    pub count_oprime: usize,
    pub overlap: usize,
    pub estimated_true: f64,
    pub completeness_o: f64,
    pub completeness_oprime: f64,
}

/// Per-attribute completeness rows plus corpus-level aggregates.
#[derive(Debug)]
pub struct CompletenessReport {
    pub min_overlap: usize,
    pub rows: Vec<CompletenessRow>,
    /// `sum(count_o) / sum(estimated_true)` over included attributes.
    pub aggregate_o: f64,
    pub aggregate_oprime: f64,
    /// Included attributes over attributes annotated in `o`.
    pub attribute_coverage: f64,
    /// `o` pairs under included attributes over all `o` pairs.
    pub pair_coverage: f64,
}

impl CompletenessReport {
    /// TSV: one row per included attribute, aggregates as `#` comments.
    pub fn to_tsv(&self, catalog: &EntityCatalog) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# minOverlap={}", self.min_overlap);
        let _ = writeln!(
            out,
            "# aggregateCompletenessO={:.6}\taggregateCompletenessOPrime={:.6}",
            self.aggregate_o, self.aggregate_oprime
        );
        let _ = writeln!(
            out,
            "# attributeCoverage={:.6}\tpairCoverage={:.6}",
            self.attribute_coverage, self.pair_coverage
        );
        let _ = writeln!(
            out,
            "attribute\tcountO\tcountOPrime\toverlap\testTrue\tcomplO\tcomplOPrime"
        );
        for row in &self.rows {
            let _ = writeln!(
                out,
                "{}\t{}\t{}\t{}\t{:.6}\t{:.6}\t{:.6}",
                catalog.attribute_id(row.attribute),
                row.count_o,
                row.count_oprime,
                row.overlap,
                row.estimated_true,
                row.completeness_o,
                row.completeness_oprime
            );
        }
        out
    }
}

/// Estimates annotation completeness by comparing two independent sources
/// over a shared catalog: the hidden per-attribute annotation count is
/// `count_o * count_oprime / overlap`, computed only where the overlap
/// reaches `min_overlap` items.
pub fn estimate_completeness(
    o: &ObservationMatrix,
    o_prime: &ObservationMatrix,
    min_overlap: usize,
) -> Result<CompletenessReport> {
    if o.kind() != MatrixKind::GroundTruth {
        return Err(Error::InvalidData(
            "completeness estimation expects a ground-truth first matrix".into(),
        ));
    }
    if o.num_items() != o_prime.num_items() || o.num_attributes() != o_prime.num_attributes() {
        return Err(Error::CatalogMismatch(format!(
            "matrices are {}x{} vs {}x{}",
            o.num_items(),
            o.num_attributes(),
            o_prime.num_items(),
            o_prime.num_attributes()
        )));
    }
    let mut rows = Vec::new();
    let mut annotated_attrs = 0usize;
    let mut sum_count_o = 0.0;
    let mut sum_count_op = 0.0;
    let mut sum_est = 0.0;
    let mut included_pairs = 0usize;
    for a in 0..o.num_attributes() {
        let count_o = o.column_count(a);
        if count_o > 0 {
            annotated_attrs += 1;
        }
        let count_op = o_prime.column_count(a);
        let col_o: Vec<usize> = o.column(a).iter().map(|&(i, _)| i).collect();
        let col_op: Vec<usize> = o_prime.column(a).iter().map(|&(i, _)| i).collect();
        let overlap = sorted_intersection(&col_o, &col_op).len();
        // the estimate divides by the overlap, so zero overlap always skips
        if overlap < min_overlap.max(1) {
            continue;
        }
        let estimated_true = (count_o as f64) * (count_op as f64) / overlap as f64;
        rows.push(CompletenessRow {
            attribute: a,
            count_o,
            count_oprime: count_op,
            overlap,
            estimated_true,
            completeness_o: overlap as f64 / count_op as f64,
            completeness_oprime: overlap as f64 / count_o as f64,
        });
        sum_count_o += count_o as f64;
        sum_count_op += count_op as f64;
        sum_est += estimated_true;
        included_pairs += count_o;
    }
    let (aggregate_o, aggregate_oprime) = if sum_est > 0.0 {
        (sum_count_o / sum_est, sum_count_op / sum_est)
    } else {
        (0.0, 0.0)
    };
    let attribute_coverage = if annotated_attrs > 0 {
        rows.len() as f64 / annotated_attrs as f64
    } else {
        0.0
    };
    let pair_coverage = if o.nnz() > 0 {
        included_pairs as f64 / o.nnz() as f64
    } else {
        0.0
    };
    Ok(CompletenessReport {
        min_overlap,
        rows,
        aggregate_o,
        aggregate_oprime,
        attribute_coverage,
        pair_coverage,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Cursor;

    fn gt(m: usize, n: usize, pairs: &[(usize, usize)]) -> ObservationMatrix {
        ObservationMatrix::from_triples(
            MatrixKind::GroundTruth,
            m,
            n,
            pairs.iter().map(|&(i, a)| (i, a, 1.0)),
        )
        .unwrap()
        .matrix
    }

    fn noisy(m: usize, n: usize, pairs: &[(usize, usize)]) -> ObservationMatrix {
        ObservationMatrix::from_triples(
            MatrixKind::Noisy,
            m,
            n,
            pairs.iter().map(|&(i, a)| (i, a, 1.0)),
        )
        .unwrap()
        .matrix
    }

    #[test]
    fn cooccurrence_hand_counts() {
        // I(a) = {1, 2}, I(b) = {2}
        let o = gt(3, 2, &[(1, 0), (2, 0), (2, 1)]);
        let stats = cooccurrence_stats(&o).unwrap();
        assert_eq!(stats.count(0, 1), 1);
        assert_eq!(stats.count(1, 0), 1);
        assert_eq!(stats.size(0), 2);
        // disjoint attributes co-occur zero times
        let o = gt(4, 2, &[(0, 0), (1, 1)]);
        let stats = cooccurrence_stats(&o).unwrap();
        assert_eq!(stats.count(0, 1), 0);
    }

    /// 100-item world: |I(a)| = |I(b)| = 50 overlapping in 40 items.
    fn overlap_world() -> (ObservationMatrix, EntityCatalog) {
        let mut pairs = Vec::new();
        for i in 0..50 {
            pairs.push((i, 0));
        }
        for i in 10..60 {
            pairs.push((i, 1));
        }
        let items: Vec<String> = (0..100).map(|i| format!("m{i}")).collect();
        let catalog = EntityCatalog::new(items, ["a".to_string(), "b".to_string()]).unwrap();
        (gt(100, 2, &pairs), catalog)
    }

    #[test]
    fn pair_acceptance_on_toy_world() {
        let (o, catalog) = overlap_world();
        // lift = 40 / (50*50/100) = 1.6, containment = 40/50 = 0.8, size 40
        let criteria = GenCriteria {
            lift_min: 1.5,
            contain_max: 0.8,
            min_result: 10,
            max_result: 100,
        };
        let bench = generate_queries(&o, &catalog, &criteria).unwrap();
        let pairs = bench.task(TaskKind::Intersection).unwrap();
        assert_eq!(pairs.len(), 1);
        assert_eq!(pairs[0].query, "a & b");
        assert_eq!(pairs[0].items.len(), 40);
        // tighter lift rejects it
        let bench = generate_queries(
            &o,
            &catalog,
            &GenCriteria {
                lift_min: 1.7,
                ..criteria
            },
        )
        .unwrap();
        assert!(bench.task(TaskKind::Intersection).is_none());
    }

    #[test]
    fn containment_criterion_rejects_nested_attributes() {
        // a strictly inside b
        let mut pairs = Vec::new();
        for i in 0..20 {
            pairs.push((i, 0));
        }
        for i in 0..80 {
            pairs.push((i, 1));
        }
        let items: Vec<String> = (0..100).map(|i| format!("m{i}")).collect();
        let catalog = EntityCatalog::new(items, ["sci-fi".to_string(), "fiction".to_string()])
            .unwrap();
        let o = gt(100, 2, &pairs);
        let criteria = GenCriteria {
            lift_min: 1.0,
            contain_max: 0.8,
            min_result: 5,
            max_result: 100,
        };
        let bench = generate_queries(&o, &catalog, &criteria).unwrap();
        // sci-fi & fiction has |I(q)| = 20 = |I(sci-fi)|: rejected as trivial
        assert!(bench.task(TaskKind::Intersection).is_none());
    }

    #[test]
    fn emitted_queries_carry_consistent_ground_truth_and_rho() {
        let (o, catalog) = overlap_world();
        let criteria = GenCriteria {
            lift_min: 1.0,
            contain_max: 0.9,
            min_result: 5,
            max_result: 100,
        };
        let bench = generate_queries(&o, &catalog, &criteria).unwrap();
        bench.verify_against(&o, &catalog).unwrap();
        for task in TaskKind::ALL {
            if let Some(entries) = bench.task(task) {
                for e in entries {
                    let q = parse_query(&e.query, &catalog).unwrap();
                    assert_eq!(e.rho.unwrap(), rho(&q, &o).unwrap());
                }
            }
        }
        // singletons always emitted when large enough
        assert_eq!(bench.task(TaskKind::Singleton).unwrap().len(), 2);
    }

    #[test]
    fn generation_is_byte_deterministic() {
        let (o, catalog) = overlap_world();
        let criteria = GenCriteria::default_for(o.num_items());
        let a = generate_queries(&o, &catalog, &criteria).unwrap();
        let b = generate_queries(&o, &catalog, &criteria).unwrap();
        let mut buf_a = Vec::new();
        a.write_jsonl(&mut buf_a).unwrap();
        let mut buf_b = Vec::new();
        b.write_jsonl(&mut buf_b).unwrap();
        assert_eq!(buf_a, buf_b);
        assert!(!buf_a.is_empty());
    }

    #[test]
    fn jsonl_round_trip_preserves_entries() {
        let (o, catalog) = overlap_world();
        let criteria = GenCriteria {
            lift_min: 1.0,
            contain_max: 0.9,
            min_result: 5,
            max_result: 100,
        };
        let bench = generate_queries(&o, &catalog, &criteria).unwrap();
        let mut buf = Vec::new();
        bench.write_jsonl(&mut buf).unwrap();
        let loaded =
            QueryBenchmark::read_jsonl(BufReader::new(Cursor::new(&buf[..])), "mem").unwrap();
        assert_eq!(loaded.task_counts(), bench.task_counts());
        assert_eq!(loaded.header.as_ref().unwrap().criteria, criteria);
        for task in TaskKind::ALL {
            match (bench.task(task), loaded.task(task)) {
                (Some(x), Some(y)) => {
                    assert_eq!(x.len(), y.len());
                    for (a, b) in x.iter().zip(y) {
                        assert_eq!(a.query, b.query);
                        assert_eq!(a.items, b.items);
                    }
                }
                (None, None) => {}
                other => panic!("task presence mismatch: {other:?}"),
            }
        }
    }

    #[test]
    fn classify_text_covers_the_five_shapes() {
        assert_eq!(TaskKind::classify_text("a").unwrap(), TaskKind::Singleton);
        assert_eq!(
            TaskKind::classify_text("a & b").unwrap(),
            TaskKind::Intersection
        );
        assert_eq!(
            TaskKind::classify_text("a & !b").unwrap(),
            TaskKind::Difference
        );
        assert_eq!(
            TaskKind::classify_text("a & b & c").unwrap(),
            TaskKind::TripleIntersection
        );
        assert_eq!(
            TaskKind::classify_text("a & b & !c").unwrap(),
            TaskKind::TripleDifference
        );
        assert!(TaskKind::classify_text("a & !b & !c").is_err());
    }

    #[test]
    fn completeness_hand_fixtures() {
        // attribute 0: countO = 10, countO' = 6, overlap = 4
        let o_pairs: Vec<(usize, usize)> = (0..10).map(|i| (i, 0)).collect();
        let op_pairs: Vec<(usize, usize)> = (6..12).map(|i| (i, 0)).collect();
        let o = gt(20, 1, &o_pairs);
        let op = noisy(20, 1, &op_pairs);
        let report = estimate_completeness(&o, &op, 1).unwrap();
        assert_eq!(report.rows.len(), 1);
        let row = &report.rows[0];
        assert_eq!(row.overlap, 4);
        assert_eq!(row.estimated_true, 15.0);
        assert!((row.completeness_o - 2.0 / 3.0).abs() < 1e-12);

        // overlap = countO = 5, countO' = 10: estTrue = 10, complO = 0.5
        let o_pairs: Vec<(usize, usize)> = (0..5).map(|i| (i, 0)).collect();
        let op_pairs: Vec<(usize, usize)> = (0..10).map(|i| (i, 0)).collect();
        let o = gt(20, 1, &o_pairs);
        let op = noisy(20, 1, &op_pairs);
        let report = estimate_completeness(&o, &op, 5).unwrap();
        let row = &report.rows[0];
        assert_eq!(row.estimated_true, 10.0);
        assert_eq!(row.completeness_o, 0.5);
        assert_eq!(row.completeness_oprime, 1.0);
        assert_eq!(report.aggregate_o, 0.5);
    }

    #[test]
    fn zero_overlap_is_always_excluded() {
        let o = gt(10, 1, &[(0, 0), (1, 0)]);
        let op = noisy(10, 1, &[(5, 0), (6, 0)]);
        let report = estimate_completeness(&o, &op, 0).unwrap();
        assert!(report.rows.is_empty());
        assert_eq!(report.aggregate_o, 0.0);
    }

    #[test]
    fn completeness_skips_attributes_below_min_overlap() {
        // attribute 1 has zero overlap and is excluded
        let o = gt(10, 2, &[(0, 0), (1, 0), (2, 0), (3, 0), (4, 0), (5, 1)]);
        let op = noisy(10, 2, &[(0, 0), (1, 0), (2, 0), (3, 0), (4, 0), (6, 1)]);
        let report = estimate_completeness(&o, &op, 5).unwrap();
        assert_eq!(report.rows.len(), 1);
        assert_eq!(report.rows[0].attribute, 0);
        assert_eq!(report.attribute_coverage, 0.5);
        assert!((report.pair_coverage - 5.0 / 6.0).abs() < 1e-12);
        // completeness within (0, 1] whenever included
        for row in &report.rows {
            assert!(row.completeness_o > 0.0 && row.completeness_o <= 1.0);
            assert!(row.completeness_oprime > 0.0 && row.completeness_oprime <= 1.0);
        }
    }
}
