//! Attribute is-a hierarchy and transitive annotation expansion.

use std::collections::{BTreeSet, HashMap};
use std::io::{BufRead, BufReader, Read};
use std::path::Path;

use crate::catalog::EntityCatalog;
use crate::error::{Error, Result};
use crate::observations::{MatrixKind, ObservationMatrix};

/// A set of `(child, parent)` is-a edges over attribute indices. Acyclic by
/// construction; cyclic input is rejected.
#[derive(Debug, Clone, Default)]
pub struct HierarchyEdges {
    edges: BTreeSet<(usize, usize)>,
    parents: HashMap<usize, Vec<usize>>,
}

impl HierarchyEdges {
    pub fn new(edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let edges: BTreeSet<(usize, usize)> = edges.into_iter().collect();
        let mut parents: HashMap<usize, Vec<usize>> = HashMap::new();
        for &(child, parent) in &edges {
            parents.entry(child).or_default().push(parent);
        }
        let h = Self { edges, parents };
        if let Some(node) = h.find_cycle() {
            return Err(Error::HierarchyCycle(format!("#{node}")));
        }
        Ok(h)
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges.iter().copied()
    }

    /// Iterative three-color DFS; returns a node on a cycle if one exists.
    fn find_cycle(&self) -> Option<usize> {
        const WHITE: u8 = 0;
        const GRAY: u8 = 1;
        const BLACK: u8 = 2;
        let mut color: HashMap<usize, u8> = HashMap::new();
        for &start in self.parents.keys() {
            if color.get(&start).copied().unwrap_or(WHITE) != WHITE {
                continue;
            }
            // stack of (node, next-parent-offset)
            let mut stack = vec![(start, 0usize)];
            color.insert(start, GRAY);
            while let Some(&mut (node, ref mut idx)) = stack.last_mut() {
                let next = self.parents.get(&node).and_then(|p| p.get(*idx)).copied();
                *idx += 1;
                match next {
                    Some(parent) => match color.get(&parent).copied().unwrap_or(WHITE) {
                        GRAY => return Some(parent),
                        WHITE => {
                            color.insert(parent, GRAY);
                            stack.push((parent, 0));
                        }
                        _ => {}
                    },
                    None => {
                        color.insert(node, BLACK);
                        stack.pop();
                    }
                }
            }
        }
        None
    }

    /// All ancestors of `attribute` under the transitive closure of is-a.
    pub fn ancestors(&self, attribute: usize) -> BTreeSet<usize> {
        let mut out = BTreeSet::new();
        let mut stack: Vec<usize> = self.parents.get(&attribute).cloned().unwrap_or_default();
        while let Some(a) = stack.pop() {
            if out.insert(a) {
                if let Some(ps) = self.parents.get(&a) {
                    stack.extend(ps.iter().copied());
                }
            }
        }
        out
    }

    /// Parses the hierarchy TSV `child<TAB>parent`, resolving names in the
    /// catalog and validating acyclicity.
    pub fn read_tsv(path: &Path, catalog: &EntityCatalog) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::read_from(
            BufReader::new(file),
            &path.display().to_string(),
            catalog,
        )
    }

    pub fn read_from<R: Read>(
        reader: BufReader<R>,
        source: &str,
        catalog: &EntityCatalog,
    ) -> Result<Self> {
        let mut edges = Vec::new();
        for (lineno, line) in reader.lines().enumerate() {
            let line = line?;
            if line.is_empty() {
                continue;
            }
            let (child, parent) = line.split_once('\t').ok_or_else(|| Error::Parse {
                path: source.to_string(),
                line: lineno + 1,
                msg: "expected `child<TAB>parent`".to_string(),
            })?;
            edges.push((catalog.attribute(child)?, catalog.attribute(parent)?));
        }
        Self::new(edges)
    }

    /// Raw name pairs from a hierarchy TSV, for catalog construction before
    /// indices exist.
    pub fn read_name_pairs(path: &Path) -> Result<Vec<(String, String)>> {
        let file = std::fs::File::open(path)?;
        let mut out = Vec::new();
        for (lineno, line) in BufReader::new(file).lines().enumerate() {
            let line = line?;
            if line.is_empty() {
                continue;
            }
            let (child, parent) = line.split_once('\t').ok_or_else(|| Error::Parse {
                path: path.display().to_string(),
                line: lineno + 1,
                msg: "expected `child<TAB>parent`".to_string(),
            })?;
            out.push((child.to_string(), parent.to_string()));
        }
        Ok(out)
    }
}

/// Adds, for every stored pair `(i, a)` and every ancestor `a'` of `a`, the
/// pair `(i, a')`. Monotone and idempotent.
pub fn expand_with_hierarchy(
    o: &ObservationMatrix,
    h: &HierarchyEdges,
) -> Result<ObservationMatrix> {
    if o.kind() != MatrixKind::GroundTruth {
        return Err(Error::InvalidData(
            "hierarchy expansion requires a ground-truth matrix".to_string(),
        ));
    }
    let mut triples: Vec<(usize, usize, f64)> = Vec::with_capacity(o.nnz());
    for (i, a, w) in o.entries() {
        triples.push((i, a, w));
        for ancestor in h.ancestors(a) {
            triples.push((i, ancestor, 1.0));
        }
    }
    Ok(ObservationMatrix::from_triples(
        MatrixKind::GroundTruth,
        o.num_items(),
        o.num_attributes(),
        triples,
    )?
    .matrix)
}
