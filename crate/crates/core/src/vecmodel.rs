//! Vector embedding model: factorized item/attribute vectors, singleton
//! scoring, and the two compositional heuristics (multiplying per-attribute
//! probabilities vs. adding/subtracting attribute vectors before scoring).

use rayon::prelude::*;

use crate::boxgeom::sigmoid;
use crate::error::{Error, Result};
use crate::query::Query;
use crate::table::{dot, EmbeddingTable};

/// Transformation applied to the raw dot product.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Transform {
    Identity,
    Sigmoid,
}

impl Transform {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Transform::Identity => x,
            Transform::Sigmoid => sigmoid(x),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Transform::Identity => "identity",
            Transform::Sigmoid => "sigmoid",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "identity" => Ok(Transform::Identity),
            "sigmoid" => Ok(Transform::Sigmoid),
            other => Err(Error::InvalidData(format!("unknown transform `{other}`"))),
        }
    }
}

/// How a compositional query is scored against a vector model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VecStrategy {
    /// Multiply per-literal probabilities, `1 - p` for negations.
    Probabilistic,
    /// Sum positive attribute vectors, subtract negated ones, then score.
    Algebraic,
}

impl VecStrategy {
    pub fn as_str(self) -> &'static str {
        match self {
            VecStrategy::Probabilistic => "probabilistic",
            VecStrategy::Algebraic => "algebraic",
        }
    }
}

/// Item vectors `U`, attribute vectors `V`, and the score transform.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorModel {
    pub item_vecs: EmbeddingTable,
    pub attr_vecs: EmbeddingTable,
    pub transform: Transform,
}

impl VectorModel {
    pub fn new(item_vecs: EmbeddingTable, attr_vecs: EmbeddingTable, transform: Transform) -> Self {
        assert_eq!(item_vecs.dim(), attr_vecs.dim(), "U and V dims differ");
        Self {
            item_vecs,
            attr_vecs,
            transform,
        }
    }

    pub fn dim(&self) -> usize {
        self.item_vecs.dim()
    }

    pub fn num_items(&self) -> usize {
        self.item_vecs.rows()
    }

    pub fn num_attributes(&self) -> usize {
        self.attr_vecs.rows()
    }

    /// Singleton score `Phi(<u_i, v_a>)`.
    pub fn score_single(&self, attribute: usize, item: usize) -> f64 {
        self.transform
            .apply(dot(self.item_vecs.row(item), self.attr_vecs.row(attribute)))
    }

    /// Product over literals of the per-attribute probability, using the
    /// complement for negations. Requires the sigmoid transform.
    pub fn score_probabilistic(&self, query: &Query, item: usize) -> Result<f64> {
        if self.transform != Transform::Sigmoid {
            return Err(Error::UnsupportedTransform {
                strategy: "probabilistic",
                required: "sigmoid",
            });
        }
        let mut score = 1.0;
        for literal in query.literals() {
            let p = self.score_single(literal.attribute, item);
            score *= if literal.negated { 1.0 - p } else { p };
        }
        Ok(score)
    }

    /// `Phi(<u_i, sum of positive v - sum of negated v>)`.
    pub fn score_algebraic(&self, query: &Query, item: usize) -> f64 {
        let mut composed = vec![0.0; self.dim()];
        for literal in query.literals() {
            let v = self.attr_vecs.row(literal.attribute);
            let sign = if literal.negated { -1.0 } else { 1.0 };
            for (c, &x) in composed.iter_mut().zip(v) {
                *c += sign * x;
            }
        }
        self.transform
            .apply(dot(self.item_vecs.row(item), &composed))
    }

    pub fn score(&self, query: &Query, item: usize, strategy: VecStrategy) -> Result<f64> {
        match strategy {
            VecStrategy::Probabilistic => self.score_probabilistic(query, item),
            VecStrategy::Algebraic => Ok(self.score_algebraic(query, item)),
        }
    }

    /// Top-`k` items by descending score, ties broken by ascending index.
    pub fn rank_items(&self, query: &Query, strategy: VecStrategy, k: usize) -> Result<Vec<usize>> {
        if strategy == VecStrategy::Probabilistic && self.transform != Transform::Sigmoid {
            return Err(Error::UnsupportedTransform {
                strategy: "probabilistic",
                required: "sigmoid",
            });
        }
        let scores: Vec<f64> = (0..self.num_items())
            .into_par_iter()
            .map(|i| self.score(query, i, strategy).expect("transform checked"))
            .collect();
        Ok(crate::rank::top_k(&scores, k))
    }

    /// Boolean set prediction: items whose score clears the threshold, in
    /// descending-score order. The threshold defaults to 0.5 under the
    /// sigmoid transform and 0 under identity. Evaluation uses pure ranking;
    /// this is for callers that want a set rather than a list.
    pub fn predict_items(
        &self,
        query: &Query,
        strategy: VecStrategy,
        threshold: Option<f64>,
    ) -> Result<Vec<usize>> {
        let threshold = threshold.unwrap_or(match self.transform {
            Transform::Sigmoid => 0.5,
            Transform::Identity => 0.0,
        });
        let ranked = self.rank_items(query, strategy, self.num_items())?;
        let mut out = Vec::new();
        for i in ranked {
            if self.score(query, i, strategy)? > threshold {
                out.push(i);
            } else {
                break;
            }
        }
        Ok(out)
    }
}
