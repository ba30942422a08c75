//! Compositional query algebra: conjunctions of signed attribute literals,
//! their ground-truth set semantics, and the result-ratio difficulty measure.

use std::collections::BTreeSet;

use crate::catalog::EntityCatalog;
use crate::error::{Error, Result};
use crate::observations::{MatrixKind, ObservationMatrix};

/// One possibly negated attribute.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Literal {
    pub attribute: usize,
    pub negated: bool,
}

/// Conjunction of literals with at least one positive literal and no
/// repeated attribute.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Query {
    literals: Vec<Literal>,
}

impl Query {
    pub fn new(literals: Vec<Literal>) -> Result<Self> {
        if literals.is_empty() {
            return Err(Error::EmptyQuery);
        }
        if !literals.iter().any(|l| !l.negated) {
            return Err(Error::NoPositiveLiteral);
        }
        let mut seen = BTreeSet::new();
        for l in &literals {
            if !seen.insert(l.attribute) {
                return Err(Error::DuplicateAttribute(format!("#{}", l.attribute)));
            }
        }
        Ok(Self { literals })
    }

    pub fn singleton(attribute: usize) -> Self {
        Self {
            literals: vec![Literal {
                attribute,
                negated: false,
            }],
        }
    }

    pub fn literals(&self) -> &[Literal] {
        &self.literals
    }

    pub fn positives(&self) -> impl Iterator<Item = usize> + '_ {
        self.literals
            .iter()
            .filter(|l| !l.negated)
            .map(|l| l.attribute)
    }

    pub fn negated(&self) -> impl Iterator<Item = usize> + '_ {
        self.literals
            .iter()
            .filter(|l| l.negated)
            .map(|l| l.attribute)
    }

    pub fn num_positive(&self) -> usize {
        self.literals.iter().filter(|l| !l.negated).count()
    }

    pub fn num_negated(&self) -> usize {
        self.literals.iter().filter(|l| l.negated).count()
    }
}

/// Parses the textual query grammar `lit ( '&' lit )*` with
/// `lit := ['!'] name`. Names are trimmed and may contain inner spaces.
pub fn parse_query(text: &str, catalog: &EntityCatalog) -> Result<Query> {
    if text.trim().is_empty() {
        return Err(Error::EmptyQuery);
    }
    let mut literals = Vec::new();
    for raw in text.split('&') {
        let token = raw.trim();
        if token.is_empty() {
            return Err(Error::InvalidData(format!("empty literal in `{text}`")));
        }
        let (negated, name) = match token.strip_prefix('!') {
            Some(rest) => (true, rest.trim_start()),
            None => (false, token),
        };
        if name.is_empty() {
            return Err(Error::InvalidData(format!("bare `!` in `{text}`")));
        }
        let attribute = catalog.attribute(name)?;
        literals.push(Literal { attribute, negated });
    }
    // re-check duplicates with names for a readable error
    let mut seen = BTreeSet::new();
    for l in &literals {
        if !seen.insert(l.attribute) {
            return Err(Error::DuplicateAttribute(
                catalog.attribute_id(l.attribute).to_string(),
            ));
        }
    }
    Query::new(literals)
}

/// Renders a query back to the textual grammar; inverse of [`parse_query`].
pub fn format_query(query: &Query, catalog: &EntityCatalog) -> String {
    query
        .literals
        .iter()
        .map(|l| {
            let name = catalog.attribute_id(l.attribute);
            if l.negated {
                format!("!{name}")
            } else {
                name.to_string()
            }
        })
        .collect::<Vec<_>>()
        .join(" & ")
}

fn require_ground_truth(o: &ObservationMatrix) -> Result<()> {
    if o.kind() != MatrixKind::GroundTruth {
        return Err(Error::InvalidData(
            "operation requires a ground-truth matrix".to_string(),
        ));
    }
    Ok(())
}

/// Item set of a single attribute.
pub fn item_set(o: &ObservationMatrix, attribute: usize) -> BTreeSet<usize> {
    o.column(attribute).iter().map(|&(i, _)| i).collect()
}

/// Items matching the query: intersection of the positive literals' item
/// sets minus the union of the negated literals' sets.
pub fn ground_truth_match(query: &Query, o: &ObservationMatrix) -> Result<BTreeSet<usize>> {
    require_ground_truth(o)?;
    let mut positives = query.positives();
    let first = positives.next().expect("query has a positive literal");
    let mut result = item_set(o, first);
    for a in positives {
        let set = item_set(o, a);
        result = result.intersection(&set).copied().collect();
    }
    for a in query.negated() {
        for &(i, _) in o.column(a) {
            result.remove(&i);
        }
    }
    Ok(result)
}

/// Size of the item set of a single atom: `|I(a)|` for a positive atom,
/// `m - |I(a)|` for a negated one.
pub fn atom_size(o: &ObservationMatrix, literal: Literal) -> usize {
    if literal.negated {
        o.num_items() - o.column_count(literal.attribute)
    } else {
        o.column_count(literal.attribute)
    }
}

/// Result ratio: `|I(q)|` over the size of the most restrictive atom.
///
/// Always in `[0, 1]`; exactly 1 for singleton queries. Undefined (error)
/// when the most restrictive atom matches no items.
pub fn rho(query: &Query, o: &ObservationMatrix) -> Result<f64> {
    require_ground_truth(o)?;
    let min_atom = query
        .literals()
        .iter()
        .map(|&l| atom_size(o, l))
        .min()
        .expect("query is nonempty");
    if min_atom == 0 {
        return Err(Error::UndefinedRho);
    }
    let matched = ground_truth_match(query, o)?.len();
    Ok(matched as f64 / min_atom as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn catalog() -> EntityCatalog {
        EntityCatalog::new(
            ["m0", "m1", "m2", "m3", "m4"],
            ["comedy", "romance", "film noir"],
        )
        .unwrap()
    }

    /// I(comedy) = {1,2,3}, I(romance) = {2,3,4}, m = 5.
    fn matrix() -> ObservationMatrix {
        ObservationMatrix::from_triples(
            MatrixKind::GroundTruth,
            5,
            3,
            vec![
                (1, 0, 1.0),
                (2, 0, 1.0),
                (3, 0, 1.0),
                (2, 1, 1.0),
                (3, 1, 1.0),
                (4, 1, 1.0),
            ],
        )
        .unwrap()
        .matrix
    }

    #[test]
    fn parse_single_literal() {
        let q = parse_query("comedy", &catalog()).unwrap();
        assert_eq!(
            q.literals(),
            &[Literal {
                attribute: 0,
                negated: false
            }]
        );
    }

    #[test]
    fn parse_negated_and_multiword_names() {
        let q = parse_query("comedy & !romance", &catalog()).unwrap();
        assert_eq!(q.literals().len(), 2);
        assert!(q.literals()[1].negated);
        let q = parse_query("film noir & comedy", &catalog()).unwrap();
        assert_eq!(q.literals()[0].attribute, 2);
    }

    #[test]
    fn parse_rejects_invalid_queries() {
        assert!(matches!(
            parse_query("!comedy", &catalog()),
            Err(Error::NoPositiveLiteral)
        ));
        assert!(matches!(
            parse_query("", &catalog()),
            Err(Error::EmptyQuery)
        ));
        assert!(matches!(
            parse_query("comedy & sports", &catalog()),
            Err(Error::UnknownAttribute(t)) if t == "sports"
        ));
        assert!(matches!(
            parse_query("comedy & !comedy", &catalog()),
            Err(Error::DuplicateAttribute(t)) if t == "comedy"
        ));
    }

    #[test]
    fn format_round_trips() {
        let cat = catalog();
        for text in ["comedy", "comedy & !romance", "film noir & comedy & !romance"] {
            let q = parse_query(text, &cat).unwrap();
            assert_eq!(format_query(&q, &cat), text);
            assert_eq!(parse_query(&format_query(&q, &cat), &cat).unwrap(), q);
        }
    }

    #[test]
    fn match_intersection_and_difference() {
        let cat = catalog();
        let o = matrix();
        let and = ground_truth_match(&parse_query("comedy & romance", &cat).unwrap(), &o).unwrap();
        assert_eq!(and.into_iter().collect::<Vec<_>>(), vec![2, 3]);
        let diff =
            ground_truth_match(&parse_query("comedy & !romance", &cat).unwrap(), &o).unwrap();
        assert_eq!(diff.into_iter().collect::<Vec<_>>(), vec![1]);
        let empty = ground_truth_match(&parse_query("film noir", &cat).unwrap(), &o).unwrap();
        assert!(empty.is_empty());
    }

    #[test]
    fn rho_matches_hand_computation() {
        let cat = catalog();
        let o = matrix();
        let q = parse_query("comedy & romance", &cat).unwrap();
        assert!((rho(&q, &o).unwrap() - 2.0 / 3.0).abs() < 1e-12);
        let singleton = parse_query("comedy", &cat).unwrap();
        assert_eq!(rho(&singleton, &o).unwrap(), 1.0);
    }

    #[test]
    fn rho_undefined_on_empty_atom() {
        let cat = catalog();
        let o = matrix();
        let q = parse_query("film noir", &cat).unwrap();
        assert!(matches!(rho(&q, &o), Err(Error::UndefinedRho)));
    }
}
