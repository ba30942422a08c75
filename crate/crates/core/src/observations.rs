//! Sparse item-attribute observation matrices.
//!
//! Two kinds share one type: boolean ground-truth annotations (all weights 1)
//! and noisy real-valued observations such as tag counts. Ground-truth access
//! is dominated by per-attribute item sets, noisy access by per-item rows, so
//! both adjacencies are kept; at the sparsity levels this crate targets the
//! duplication is cheap.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use crate::catalog::EntityCatalog;
use crate::error::{Error, Result};

/// Whether a matrix holds boolean ground truth or noisy real-valued weights.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatrixKind {
    GroundTruth,
    Noisy,
}

impl MatrixKind {
    pub fn as_str(self) -> &'static str {
        match self {
            MatrixKind::GroundTruth => "groundTruth",
            MatrixKind::Noisy => "noisy",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "groundTruth" => Ok(MatrixKind::GroundTruth),
            "noisy" => Ok(MatrixKind::Noisy),
            other => Err(Error::InvalidData(format!("unknown matrix kind `{other}`"))),
        }
    }
}

/// Sparse `m x n` item-attribute matrix. No zero entries are stored.
#[derive(Debug, Clone)]
pub struct ObservationMatrix {
    kind: MatrixKind,
    num_items: usize,
    num_attributes: usize,
    /// Per item: sorted `(attribute, weight)` pairs.
    rows: Vec<Vec<(usize, f64)>>,
    /// Per attribute: sorted `(item, weight)` pairs.
    cols: Vec<Vec<(usize, f64)>>,
    nnz: usize,
}

/// Outcome of building a matrix, with the duplicate count for caller warnings.
#[derive(Debug)]
pub struct BuildOutcome {
    pub matrix: ObservationMatrix,
    pub duplicates: usize,
}

impl ObservationMatrix {
    /// Builds a matrix from `(item, attribute, weight)` triples.
    ///
    /// Duplicate pairs have their weights summed (ground truth: collapsed back
    /// to 1). Zero or negative weights are rejected; ground truth requires
    /// every stated weight to be exactly 1.
    pub fn from_triples(
        kind: MatrixKind,
        num_items: usize,
        num_attributes: usize,
        triples: impl IntoIterator<Item = (usize, usize, f64)>,
    ) -> Result<BuildOutcome> {
        let mut merged: BTreeMap<(usize, usize), f64> = BTreeMap::new();
        let mut duplicates = 0usize;
        for (i, a, w) in triples {
            if i >= num_items {
                return Err(Error::IndexOutOfRange {
                    what: "items",
                    index: i,
                    size: num_items,
                });
            }
            if a >= num_attributes {
                return Err(Error::IndexOutOfRange {
                    what: "attributes",
                    index: a,
                    size: num_attributes,
                });
            }
            if !w.is_finite() || w <= 0.0 {
                return Err(Error::InvalidData(format!(
                    "weight {w} for pair ({i}, {a}) must be finite and positive"
                )));
            }
            if kind == MatrixKind::GroundTruth && w != 1.0 {
                return Err(Error::InvalidData(format!(
                    "ground-truth weight for pair ({i}, {a}) is {w}, expected 1"
                )));
            }
            match merged.entry((i, a)) {
                std::collections::btree_map::Entry::Vacant(e) => {
                    e.insert(w);
                }
                std::collections::btree_map::Entry::Occupied(mut e) => {
                    duplicates += 1;
                    if kind == MatrixKind::GroundTruth {
                        *e.get_mut() = 1.0;
                    } else {
                        *e.get_mut() += w;
                    }
                }
            }
        }

        let mut rows = vec![Vec::new(); num_items];
        let mut cols = vec![Vec::new(); num_attributes];
        let nnz = merged.len();
        for ((i, a), w) in merged {
            rows[i].push((a, w));
            cols[a].push((i, w));
        }
        Ok(BuildOutcome {
            matrix: Self {
                kind,
                num_items,
                num_attributes,
                rows,
                cols,
                nnz,
            },
            duplicates,
        })
    }

    pub fn kind(&self) -> MatrixKind {
        self.kind
    }

    pub fn num_items(&self) -> usize {
        self.num_items
    }

    pub fn num_attributes(&self) -> usize {
        self.num_attributes
    }

    pub fn nnz(&self) -> usize {
        self.nnz
    }

    /// Sorted `(attribute, weight)` pairs for one item.
    pub fn row(&self, item: usize) -> &[(usize, f64)] {
        &self.rows[item]
    }

    /// Sorted `(item, weight)` pairs for one attribute.
    pub fn column(&self, attribute: usize) -> &[(usize, f64)] {
        &self.cols[attribute]
    }

    /// Number of items with a nonzero entry for `attribute`.
    pub fn column_count(&self, attribute: usize) -> usize {
        self.cols[attribute].len()
    }

    pub fn get(&self, item: usize, attribute: usize) -> f64 {
        self.rows[item]
            .binary_search_by_key(&attribute, |&(a, _)| a)
            .map(|pos| self.rows[item][pos].1)
            .unwrap_or(0.0)
    }

    /// All stored entries in `(item, attribute)` order.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.rows
            .iter()
            .enumerate()
            .flat_map(|(i, row)| row.iter().map(move |&(a, w)| (i, a, w)))
    }

    /// Reads the raw pair TSV: `item<TAB>attribute[<TAB>weight]`, weight 1
    /// when omitted. Returns identifier triples; catalog construction is the
    /// caller's job.
    pub fn read_pairs_tsv(path: &Path) -> Result<Vec<(String, String, f64)>> {
        let file = std::fs::File::open(path)?;
        Self::read_pairs_from(BufReader::new(file), &path.display().to_string())
    }

    pub fn read_pairs_from<R: Read>(
        reader: BufReader<R>,
        source: &str,
    ) -> Result<Vec<(String, String, f64)>> {
        let mut out = Vec::new();
        for (lineno, line) in reader.lines().enumerate() {
            let line = line?;
            let lineno = lineno + 1;
            if line.is_empty() {
                continue;
            }
            let mut fields = line.split('\t');
            let item = fields.next().unwrap_or("");
            let attr = fields.next().ok_or_else(|| Error::Parse {
                path: source.to_string(),
                line: lineno,
                msg: "expected `item<TAB>attribute[<TAB>weight]`".to_string(),
            })?;
            if item.is_empty() || attr.is_empty() {
                return Err(Error::Parse {
                    path: source.to_string(),
                    line: lineno,
                    msg: "empty item or attribute identifier".to_string(),
                });
            }
            let weight = match fields.next() {
                None | Some("") => 1.0,
                Some(w) => w.parse::<f64>().map_err(|_| Error::Parse {
                    path: source.to_string(),
                    line: lineno,
                    msg: format!("bad weight `{w}`"),
                })?,
            };
            if fields.next().is_some() {
                return Err(Error::Parse {
                    path: source.to_string(),
                    line: lineno,
                    msg: "too many fields".to_string(),
                });
            }
            out.push((item.to_string(), attr.to_string(), weight));
        }
        if out.is_empty() {
            return Err(Error::EmptyInput(source.to_string()));
        }
        Ok(out)
    }

    /// Writes the internal matrix format: a header line then one
    /// `item_index<TAB>attribute_index<TAB>weight` line per entry in
    /// `(item, attribute)` order. Byte-deterministic.
    pub fn write_internal<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(
            w,
            "#matrix\tkind={}\tm={}\tn={}\tnnz={}",
            self.kind.as_str(),
            self.num_items,
            self.num_attributes,
            self.nnz
        )?;
        for (i, a, weight) in self.entries() {
            writeln!(w, "{i}\t{a}\t{weight}")?;
        }
        Ok(())
    }

    pub fn read_internal<R: Read>(reader: BufReader<R>, source: &str) -> Result<Self> {
        let mut lines = reader.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::EmptyInput(source.to_string()))??;
        let mut kind = None;
        let mut m = None;
        let mut n = None;
        let rest = header
            .strip_prefix("#matrix\t")
            .ok_or_else(|| Error::Parse {
                path: source.to_string(),
                line: 1,
                msg: "missing #matrix header".to_string(),
            })?;
        for field in rest.split('\t') {
            match field.split_once('=') {
                Some(("kind", v)) => kind = Some(MatrixKind::parse(v)?),
                Some(("m", v)) => m = v.parse::<usize>().ok(),
                Some(("n", v)) => n = v.parse::<usize>().ok(),
                Some(("nnz", _)) => {}
                _ => {
                    return Err(Error::Parse {
                        path: source.to_string(),
                        line: 1,
                        msg: format!("bad header field `{field}`"),
                    })
                }
            }
        }
        let (kind, m, n) = match (kind, m, n) {
            (Some(k), Some(m), Some(n)) => (k, m, n),
            _ => {
                return Err(Error::Parse {
                    path: source.to_string(),
                    line: 1,
                    msg: "header must carry kind, m and n".to_string(),
                })
            }
        };
        let mut triples = Vec::new();
        for (lineno, line) in lines.enumerate() {
            let line = line?;
            let lineno = lineno + 2;
            if line.is_empty() {
                continue;
            }
            let mut fields = line.split('\t');
            let parse_err = |msg: String| Error::Parse {
                path: source.to_string(),
                line: lineno,
                msg,
            };
            let i = fields
                .next()
                .and_then(|s| s.parse::<usize>().ok())
                .ok_or_else(|| parse_err("bad item index".to_string()))?;
            let a = fields
                .next()
                .and_then(|s| s.parse::<usize>().ok())
                .ok_or_else(|| parse_err("bad attribute index".to_string()))?;
            let w = fields
                .next()
                .and_then(|s| s.parse::<f64>().ok())
                .ok_or_else(|| parse_err("bad weight".to_string()))?;
            triples.push((i, a, w));
        }
        Ok(Self::from_triples(kind, m, n, triples)?.matrix)
    }

    pub fn load_internal(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::read_internal(BufReader::new(file), &path.display().to_string())
    }
}

/// Builds a catalog from identifier triples (first occurrence order) and the
/// matrix over it in one step. Extra attribute names (e.g. hierarchy parents
/// that never occur in the pairs) can be appended to the attribute namespace.
pub fn ingest_pairs(
    kind: MatrixKind,
    pairs: &[(String, String, f64)],
    extra_attributes: &[String],
) -> Result<(EntityCatalog, BuildOutcome)> {
    let mut items: Vec<String> = Vec::new();
    let mut attrs: Vec<String> = Vec::new();
    let mut item_index = std::collections::HashMap::new();
    let mut attr_index = std::collections::HashMap::new();
    let mut triples = Vec::with_capacity(pairs.len());
    for (item, attr, w) in pairs {
        let i = *item_index.entry(item.clone()).or_insert_with(|| {
            items.push(item.clone());
            items.len() - 1
        });
        let a = *attr_index.entry(attr.clone()).or_insert_with(|| {
            attrs.push(attr.clone());
            attrs.len() - 1
        });
        triples.push((i, a, *w));
    }
    for attr in extra_attributes {
        attr_index.entry(attr.clone()).or_insert_with(|| {
            attrs.push(attr.clone());
            attrs.len() - 1
        });
    }
    let catalog = EntityCatalog::new(items, attrs)?;
    let outcome = ObservationMatrix::from_triples(
        kind,
        catalog.num_items(),
        catalog.num_attributes(),
        triples,
    )?;
    Ok((catalog, outcome))
}
