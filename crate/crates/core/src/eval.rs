//! Precision@k evaluation of ranking methods over a query benchmark, plus
//! the frequency-sorted lookup baseline.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt::Write as _;

use rayon::prelude::*;

use crate::benchmark::{QueryBenchmark, TaskKind};
use crate::boxmodel::BoxModel;
use crate::catalog::EntityCatalog;
use crate::error::{Error, Result};
use crate::observations::ObservationMatrix;
use crate::query::{parse_query, Query};
use crate::rank::top_k;
use crate::vecmodel::{VecStrategy, VectorModel};

/// `|top-min(k, len) ∩ truth| / k`; the denominator stays `k` even when the
/// ranking returns fewer items, so sparse methods pay for empty slots.
pub fn precision_at_k<T: Eq + std::hash::Hash>(
    ranked: &[T],
    truth: &HashSet<T>,
    k: usize,
) -> Result<f64> {
    assert!(k >= 1, "k must be at least 1");
    let top = &ranked[..ranked.len().min(k)];
    let mut seen = HashSet::with_capacity(top.len());
    let mut hits = 0usize;
    for item in top {
        if !seen.insert(item) {
            return Err(Error::InvalidData("duplicate item in ranking".into()));
        }
        if truth.contains(item) {
            hits += 1;
        }
    }
    Ok(hits as f64 / k as f64)
}

/// Lookup baseline over the noisy matrix: candidates must have a nonzero
/// entry for every positive literal and a zero entry for every negated one;
/// ranked by the summed weights of the positive literals, ties by index.
pub fn lookup_rank(o_prime: &ObservationMatrix, query: &Query, k: usize) -> Vec<usize> {
    let mut positives = query.positives();
    let first = positives.next().expect("query has a positive literal");
    let mut weights: BTreeMap<usize, f64> =
        o_prime.column(first).iter().copied().collect();
    for a in positives {
        let col: BTreeMap<usize, f64> = o_prime.column(a).iter().copied().collect();
        weights = weights
            .into_iter()
            .filter_map(|(i, w)| col.get(&i).map(|&wc| (i, w + wc)))
            .collect();
    }
    for a in query.negated() {
        for &(i, _) in o_prime.column(a) {
            weights.remove(&i);
        }
    }
    let (indices, scores): (Vec<usize>, Vec<f64>) = weights.into_iter().unzip();
    top_k(&scores, k).into_iter().map(|p| indices[p]).collect()
}

/// One rankable method; all variants share the catalog of the benchmark.
pub enum Method<'a> {
    Lookup(&'a ObservationMatrix),
    Vector {
        model: &'a VectorModel,
        strategy: VecStrategy,
    },
    Box(&'a BoxModel),
}

impl Method<'_> {
    pub fn name(&self) -> String {
        match self {
            Method::Lookup(_) => "lookup".into(),
            Method::Vector { strategy, .. } => format!("vector-{}", strategy.as_str()),
            Method::Box(_) => "box".into(),
        }
    }

    pub fn rank(&self, query: &Query, k: usize) -> Result<Vec<usize>> {
        match self {
            Method::Lookup(o) => Ok(lookup_rank(o, query, k)),
            Method::Vector { model, strategy } => model.rank_items(query, *strategy, k),
            Method::Box(model) => model.rank_items(query, k),
        }
    }
}

/// Mean precision of one method on one task at one cutoff.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalCell {
    pub task: TaskKind,
    pub method: String,
    pub k: usize,
    pub mean_precision: f64,
    pub num_queries: usize,
}

/// Per-query precision detail, emitted only on request.
#[derive(Debug, Clone)]
pub struct EvalDetail {
    pub task: TaskKind,
    pub method: String,
    pub query: String,
    pub k: usize,
    pub precision: f64,
}

/// Aggregated precision@k table over every task and method.
#[derive(Debug)]
pub struct EvalReport {
    pub ks: Vec<usize>,
    pub cells: Vec<EvalCell>,
    pub details: Option<Vec<EvalDetail>>,
}

impl EvalReport {
    pub fn cell(&self, task: TaskKind, method: &str, k: usize) -> Option<&EvalCell> {
        self.cells
            .iter()
            .find(|c| c.task == task && c.method == method && c.k == k)
    }

    /// Machine-readable rows: `task<TAB>method<TAB>k<TAB>meanPrecision<TAB>numQueries`.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("task\tmethod\tk\tmeanPrecision\tnumQueries\n");
        for c in &self.cells {
            let _ = writeln!(
                out,
                "{}\t{}\t{}\t{:.6}\t{}",
                c.task.as_str(),
                c.method,
                c.k,
                c.mean_precision,
                c.num_queries
            );
        }
        out
    }

    /// Aligned per-task tables, methods as rows and cutoffs as columns.
    pub fn render_table(&self) -> String {
        let mut out = String::new();
        let methods: Vec<String> = {
            let mut seen = Vec::new();
            for c in &self.cells {
                if !seen.contains(&c.method) {
                    seen.push(c.method.clone());
                }
            }
            seen
        };
        let width = methods.iter().map(|m| m.len()).max().unwrap_or(6).max(6);
        for task in TaskKind::ALL {
            let task_cells: Vec<&EvalCell> = self.cells.iter().filter(|c| c.task == task).collect();
            if task_cells.is_empty() {
                continue;
            }
            let n = task_cells[0].num_queries;
            let _ = writeln!(out, "{} ({} queries)", task.as_str(), n);
            let _ = write!(out, "  {:width$}", "method");
            for k in &self.ks {
                let _ = write!(out, "  {:>8}", format!("P@{k}"));
            }
            out.push('\n');
            for m in &methods {
                let _ = write!(out, "  {:width$}", m);
                for &k in &self.ks {
                    match self.cell(task, m, k) {
                        Some(c) => {
                            let _ = write!(out, "  {:>8.4}", c.mean_precision);
                        }
                        None => {
                            let _ = write!(out, "  {:>8}", "-");
                        }
                    }
                }
                out.push('\n');
            }
            out.push('\n');
        }
        out
    }
}

/// Runs every method over every benchmark query and averages precision@k per
/// task. Queries evaluate in parallel with a deterministic reduction order.
pub fn evaluate(
    methods: &[Method<'_>],
    benchmark: &QueryBenchmark,
    catalog: &EntityCatalog,
    ks: &[usize],
    with_details: bool,
) -> Result<EvalReport> {
    let max_k = ks.iter().copied().max().unwrap_or(0);
    if max_k == 0 {
        return Err(Error::InvalidConfig("no cutoffs requested".into()));
    }
    let mut cells = Vec::new();
    let mut details = Vec::new();
    for task in TaskKind::ALL {
        let Some(entries) = benchmark.task(task) else {
            continue;
        };
        if entries.is_empty() {
            continue;
        }
        // resolve queries once per task
        let parsed: Vec<(Query, HashSet<&str>)> = entries
            .iter()
            .map(|e| {
                let q = parse_query(&e.query, catalog)?;
                let truth: HashSet<&str> = e.items.iter().map(String::as_str).collect();
                Ok((q, truth))
            })
            .collect::<Result<_>>()?;
        for method in methods {
            let per_query: Vec<Vec<f64>> = parsed
                .par_iter()
                .map(|(q, truth)| {
                    let ranked_ids: Vec<&str> = method
                        .rank(q, max_k)?
                        .into_iter()
                        .map(|i| catalog.item_id(i))
                        .collect();
                    ks.iter()
                        .map(|&k| {
                            precision_at_k(&ranked_ids, truth, k)
                        })
                        .collect::<Result<Vec<f64>>>()
                })
                .collect::<Result<_>>()?;
            for (ki, &k) in ks.iter().enumerate() {
                let sum: f64 = per_query.iter().map(|ps| ps[ki]).sum();
                cells.push(EvalCell {
                    task,
                    method: method.name(),
                    k,
                    mean_precision: sum / per_query.len() as f64,
                    num_queries: per_query.len(),
                });
            }
            if with_details {
                for (entry, ps) in entries.iter().zip(&per_query) {
                    for (ki, &k) in ks.iter().enumerate() {
                        details.push(EvalDetail {
                            task,
                            method: method.name(),
                            query: entry.query.clone(),
                            k,
                            precision: ps[ki],
                        });
                    }
                }
            }
        }
    }
    Ok(EvalReport {
        ks: ks.to_vec(),
        cells,
        details: if with_details { Some(details) } else { None },
    })
}

/// Mean precision@1 of ranking `rank_fn` over singleton validation queries;
/// the model-selection metric of the hyperparameter search.
pub fn precision_at_1<F>(val: &[(Query, BTreeSet<usize>)], mut rank_fn: F) -> Result<f64>
where
    F: FnMut(&Query, usize) -> Result<Vec<usize>>,
{
    if val.is_empty() {
        return Err(Error::InvalidData("no validation queries".into()));
    }
    let mut sum = 0.0;
    for (query, truth) in val {
        let ranked = rank_fn(query, 1)?;
        let truth: HashSet<usize> = truth.iter().copied().collect();
        sum += precision_at_k(&ranked, &truth, 1)?;
    }
    Ok(sum / val.len() as f64)
}
