//! Box embedding model: per-entity Gumbel boxes, containment-based singleton
//! scoring, and inclusion-exclusion scoring for queries with negations.

use rayon::prelude::*;

use crate::boxgeom::{
    containment_prob, ln_softplus, smooth_max, smooth_min, BoxTensor, GumbelParams,
};
use crate::error::{Error, Result};
use crate::query::Query;
use crate::rank::top_k;
use crate::table::EmbeddingTable;

/// Parallel min/max corner tables for one entity namespace.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxTable {
    pub mins: EmbeddingTable,
    pub maxs: EmbeddingTable,
}

impl BoxTable {
    pub fn zeros(rows: usize, dim: usize) -> Self {
        Self {
            mins: EmbeddingTable::zeros(rows, dim),
            maxs: EmbeddingTable::zeros(rows, dim),
        }
    }

    pub fn rows(&self) -> usize {
        self.mins.rows()
    }

    pub fn dim(&self) -> usize {
        self.mins.dim()
    }

    pub fn box_at(&self, r: usize) -> BoxTensor {
        BoxTensor::new(self.mins.row(r).to_vec(), self.maxs.row(r).to_vec())
    }
}

/// Item and attribute boxes plus the model temperatures.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxModel {
    pub item_boxes: BoxTable,
    pub attr_boxes: BoxTable,
    pub temps: GumbelParams,
}

impl BoxModel {
    pub fn new(item_boxes: BoxTable, attr_boxes: BoxTable, temps: GumbelParams) -> Self {
        assert_eq!(item_boxes.dim(), attr_boxes.dim(), "box dims differ");
        Self {
            item_boxes,
            attr_boxes,
            temps,
        }
    }

    pub fn dim(&self) -> usize {
        self.item_boxes.dim()
    }

    pub fn num_items(&self) -> usize {
        self.item_boxes.rows()
    }

    pub fn num_attributes(&self) -> usize {
        self.attr_boxes.rows()
    }

    /// Singleton score: containment of the item box in the attribute box,
    /// clamped like every probability used in logarithms.
    pub fn score_single(&self, attribute: usize, item: usize) -> f64 {
        containment_prob(
            &self.attr_boxes.box_at(attribute),
            &self.item_boxes.box_at(item),
            &self.temps,
        )
    }

    /// Signed intersection terms for a query: the fold of the sorted positive
    /// attribute boxes, extended by every subset of the negated boxes.
    /// Term `S` carries sign `(-1)^|S|`; the item box joins per item.
    fn compose(&self, query: &Query) -> Result<Vec<(f64, BoxTensor)>> {
        let mut positives: Vec<usize> = query.positives().collect();
        positives.sort_unstable();
        let mut negated: Vec<usize> = query.negated().collect();
        negated.sort_unstable();
        if negated.len() > 12 {
            return Err(Error::TooManyNegations(negated.len()));
        }

        let mut base = self.attr_boxes.box_at(positives[0]);
        for &a in &positives[1..] {
            base = base.intersect_gumbel(&self.attr_boxes.box_at(a), &self.temps);
        }

        // subset `mask` extends `mask` minus its lowest bit by one intersection
        let count = 1usize << negated.len();
        let mut terms: Vec<(f64, BoxTensor)> = Vec::with_capacity(count);
        terms.push((1.0, base));
        for mask in 1..count {
            let low = mask.trailing_zeros() as usize;
            let parent = mask & (mask - 1);
            let sign = -terms[parent].0;
            let grown = terms[parent]
                .1
                .intersect_gumbel(&self.attr_boxes.box_at(negated[low]), &self.temps);
            terms.push((sign, grown));
        }
        Ok(terms)
    }

    fn score_terms(&self, terms: &[(f64, BoxTensor)], item: usize) -> f64 {
        let imins = self.item_boxes.mins.row(item);
        let imaxs = self.item_boxes.maxs.row(item);
        let ln_item: f64 = imins
            .iter()
            .zip(imaxs)
            .map(|(&lo, &hi)| ln_softplus(hi - lo, self.temps.tau))
            .sum();
        terms
            .iter()
            .map(|(sign, term)| {
                let mut ln_inter = 0.0;
                for j in 0..imins.len() {
                    let cmin = smooth_max(term.mins[j], imins[j], self.temps.beta);
                    let cmax = smooth_min(term.maxs[j], imaxs[j], self.temps.beta);
                    ln_inter += ln_softplus(cmax - cmin, self.temps.tau);
                }
                sign * (ln_inter - ln_item).exp()
            })
            .sum()
    }

    /// Inclusion-exclusion score before the final `[0, 1]` clamp; smoothing
    /// can push it slightly outside the unit interval.
    pub fn score_compositional_raw(&self, query: &Query, item: usize) -> Result<f64> {
        let terms = self.compose(query)?;
        Ok(self.score_terms(&terms, item))
    }

    /// Inclusion-exclusion score clamped into `[0, 1]`.
    pub fn score_compositional(&self, query: &Query, item: usize) -> Result<f64> {
        Ok(self.score_compositional_raw(query, item)?.clamp(0.0, 1.0))
    }

    /// Top-`k` items by descending compositional score, ties broken by
    /// ascending item index.
    pub fn rank_items(&self, query: &Query, k: usize) -> Result<Vec<usize>> {
        let terms = self.compose(query)?;
        let scores: Vec<f64> = (0..self.num_items())
            .into_par_iter()
            .map(|i| self.score_terms(&terms, i).clamp(0.0, 1.0))
            .collect();
        Ok(top_k(&scores, k))
    }
}
