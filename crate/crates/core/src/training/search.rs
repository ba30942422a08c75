//! Seeded random hyperparameter search selected by precision@1 on singleton
//! validation queries.

use std::collections::BTreeSet;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{fit, LossKind, Model, ModelKind, TrainConfig};
use crate::boxgeom::GumbelParams;
use crate::error::{Error, Result};
use crate::eval::precision_at_1;
use crate::observations::ObservationMatrix;
use crate::query::Query;
use crate::vecmodel::VecStrategy;

/// Candidate lists for every searched parameter. Lists irrelevant to the
/// model kind (losses for boxes, temperatures for vectors) are ignored.
#[derive(Debug, Clone, PartialEq)]
pub struct HyperGrid {
    pub trials: usize,
    pub batch_sizes: Vec<usize>,
    pub learning_rates: Vec<f64>,
    pub reg_coeffs: Vec<f64>,
    pub neg_items: Vec<usize>,
    pub neg_attrs: Vec<usize>,
    pub losses: Vec<LossKind>,
    pub margins: Vec<f64>,
    pub dims: Vec<usize>,
    pub epochs: Vec<usize>,
    pub betas: Vec<f64>,
    pub taus: Vec<f64>,
}

impl HyperGrid {
    /// The stock search space for vector models: batch sizes 128-1024,
    /// learning rates 1e-5..1, regularization 1e-4..1e-2, 100 dimensions.
    pub fn default_vector() -> Self {
        Self {
            trials: 20,
            batch_sizes: vec![128, 256, 512, 1024],
            learning_rates: vec![1e-5, 1e-4, 1e-3, 1e-2, 1e-1, 1.0],
            reg_coeffs: vec![1e-4, 1e-3, 1e-2],
            neg_items: vec![50],
            neg_attrs: vec![20],
            losses: vec![LossKind::Hinge, LossKind::CrossEntropy],
            margins: vec![1.0],
            dims: vec![100],
            epochs: vec![10],
            betas: vec![0.01],
            taus: vec![1.0],
        }
    }

    /// The stock search space for box models adds the intersection
    /// temperatures 1e-4..1 and volume temperatures 0.1..1.
    pub fn default_box() -> Self {
        Self {
            losses: vec![LossKind::BoxBce],
            betas: vec![1e-4, 1e-3, 1e-2, 1.0],
            taus: vec![0.1, 0.5, 1.0],
            reg_coeffs: vec![0.0],
            ..Self::default_vector()
        }
    }

    pub fn validate(&self, kind: ModelKind) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::InvalidConfig("trials must be at least 1".into()));
        }
        let mut required: Vec<(&str, bool)> = vec![
            ("batch_size", self.batch_sizes.is_empty()),
            ("learning_rate", self.learning_rates.is_empty()),
            ("reg_coeff", self.reg_coeffs.is_empty()),
            ("neg_items", self.neg_items.is_empty()),
            ("neg_attrs", self.neg_attrs.is_empty()),
            ("dims", self.dims.is_empty()),
            ("epochs", self.epochs.is_empty()),
        ];
        match kind {
            ModelKind::Vector => {
                required.push(("loss", self.losses.is_empty()));
            }
            ModelKind::Box => {
                required.push(("beta", self.betas.is_empty()));
                required.push(("tau", self.taus.is_empty()));
            }
        }
        for (name, empty) in required {
            if empty {
                return Err(Error::InvalidConfig(format!(
                    "grid has no candidates for `{name}`"
                )));
            }
        }
        if kind == ModelKind::Vector && self.losses.contains(&LossKind::BoxBce) {
            return Err(Error::InvalidConfig(
                "vector grids cannot list the boxBce loss".into(),
            ));
        }
        Ok(())
    }

    /// One uniform draw per candidate list. Lists the model kind does not
    /// use may be empty and fall back to inert defaults.
    pub fn sample(&self, kind: ModelKind, seed: u64, rng: &mut impl Rng) -> TrainConfig {
        fn pick<T: Copy>(list: &[T], rng: &mut impl Rng) -> T {
            list[rng.gen_range(0..list.len())]
        }
        fn pick_or<T: Copy>(list: &[T], fallback: T, rng: &mut impl Rng) -> T {
            if list.is_empty() {
                fallback
            } else {
                pick(list, rng)
            }
        }
        let loss = match kind {
            ModelKind::Vector => pick(&self.losses, rng),
            ModelKind::Box => LossKind::BoxBce,
        };
        TrainConfig {
            batch_size: pick(&self.batch_sizes, rng),
            learning_rate: pick(&self.learning_rates, rng),
            reg_coeff: pick(&self.reg_coeffs, rng),
            neg_items: pick(&self.neg_items, rng),
            neg_attrs: pick(&self.neg_attrs, rng),
            epochs: pick(&self.epochs, rng),
            loss,
            margin: pick_or(&self.margins, 1.0, rng),
            seed,
            dims: pick(&self.dims, rng),
            temps: GumbelParams {
                beta: pick_or(&self.betas, 0.01, rng),
                tau: pick_or(&self.taus, 1.0, rng),
            },
        }
    }

    /// Renders the grid file: `key=v1,v2,...` lines plus `trials=N`.
    pub fn to_kv_string(&self) -> String {
        fn join<T: std::fmt::Display>(v: &[T]) -> String {
            v.iter()
                .map(|x| x.to_string())
                .collect::<Vec<_>>()
                .join(",")
        }
        format!(
            "trials={}\nbatch_size={}\nlearning_rate={}\nreg_coeff={}\nneg_items={}\nneg_attrs={}\nloss={}\nmargin={}\ndims={}\nepochs={}\nbeta={}\ntau={}\n",
            self.trials,
            join(&self.batch_sizes),
            join(&self.learning_rates),
            join(&self.reg_coeffs),
            join(&self.neg_items),
            join(&self.neg_attrs),
            self.losses
                .iter()
                .map(|l| l.as_str().to_string())
                .collect::<Vec<_>>()
                .join(","),
            join(&self.margins),
            join(&self.dims),
            join(&self.epochs),
            join(&self.betas),
            join(&self.taus),
        )
    }

    pub fn from_kv_str(text: &str) -> Result<Self> {
        fn list<T: std::str::FromStr>(value: &str, what: &str) -> Result<Vec<T>> {
            value
                .split(',')
                .map(|tok| {
                    tok.trim()
                        .parse::<T>()
                        .map_err(|_| Error::InvalidConfig(format!("bad {what} `{tok}`")))
                })
                .collect()
        }
        let mut grid = HyperGrid {
            trials: 0,
            batch_sizes: vec![],
            learning_rates: vec![],
            reg_coeffs: vec![],
            neg_items: vec![],
            neg_attrs: vec![],
            losses: vec![],
            margins: vec![],
            dims: vec![],
            epochs: vec![],
            betas: vec![],
            taus: vec![],
        };
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::InvalidConfig(
                format!("line {}: expected key=value", lineno + 1),
            ))?;
            match key.trim() {
                "trials" => {
                    grid.trials = value
                        .trim()
                        .parse()
                        .map_err(|_| Error::InvalidConfig("bad trials".into()))?
                }
                "batch_size" => grid.batch_sizes = list(value, "batch_size")?,
                "learning_rate" => grid.learning_rates = list(value, "learning_rate")?,
                "reg_coeff" => grid.reg_coeffs = list(value, "reg_coeff")?,
                "neg_items" => grid.neg_items = list(value, "neg_items")?,
                "neg_attrs" => grid.neg_attrs = list(value, "neg_attrs")?,
                "loss" => {
                    grid.losses = value
                        .split(',')
                        .map(|tok| LossKind::parse(tok.trim()))
                        .collect::<Result<_>>()?
                }
                "margin" => grid.margins = list(value, "margin")?,
                "dims" => grid.dims = list(value, "dims")?,
                "epochs" => grid.epochs = list(value, "epochs")?,
                "beta" => grid.betas = list(value, "beta")?,
                "tau" => grid.taus = list(value, "tau")?,
                other => {
                    return Err(Error::InvalidConfig(format!(
                        "line {}: unknown key `{other}`",
                        lineno + 1
                    )))
                }
            }
        }
        Ok(grid)
    }
}

/// What happened in one search trial.
#[derive(Debug)]
pub struct TrialRecord {
    pub index: usize,
    pub config: TrainConfig,
    pub precision_at_1: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug)]
pub struct SearchOutcome {
    pub best_config: TrainConfig,
    pub best_model: Model,
    pub best_precision: f64,
    pub trials: Vec<TrialRecord>,
}

/// Trains `grid.trials` uniformly sampled configurations and keeps the one
/// with the best precision@1 on the singleton validation queries. Ties keep
/// the earlier trial; failed trials are recorded and skipped.
pub fn random_search(
    data: &ObservationMatrix,
    grid: &HyperGrid,
    kind: ModelKind,
    val_queries: &[(Query, BTreeSet<usize>)],
    seed: u64,
) -> Result<SearchOutcome> {
    grid.validate(kind)?;
    if val_queries.is_empty() {
        return Err(Error::InvalidData("no validation queries".into()));
    }
    if let Some(q) = val_queries.iter().find(|(q, _)| q.literals().len() != 1) {
        return Err(Error::InvalidData(format!(
            "validation queries must be singletons, got one with {} literals",
            q.0.literals().len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut trials = Vec::with_capacity(grid.trials);
    let mut best: Option<(f64, TrainConfig, Model)> = None;
    for index in 0..grid.trials {
        let trial_seed = seed.wrapping_add(index as u64 + 1);
        let config = grid.sample(kind, trial_seed, &mut rng);
        match fit(data, &config, kind) {
            Ok(outcome) => {
                let p1 = match &outcome.model {
                    Model::Vector(vm) => precision_at_1(val_queries, |q, k| {
                        vm.rank_items(q, VecStrategy::Algebraic, k)
                    })?,
                    Model::Box(bm) => precision_at_1(val_queries, |q, k| bm.rank_items(q, k))?,
                };
                if best.as_ref().is_none_or(|(b, _, _)| p1 > *b) {
                    best = Some((p1, config.clone(), outcome.model));
                }
                trials.push(TrialRecord {
                    index,
                    config,
                    precision_at_1: Some(p1),
                    error: None,
                });
            }
            Err(err) => {
                trials.push(TrialRecord {
                    index,
                    config,
                    precision_at_1: None,
                    error: Some(err.to_string()),
                });
            }
        }
    }
    let (best_precision, best_config, best_model) = best.ok_or_else(|| {
        Error::InvalidData("every search trial failed".into())
    })?;
    Ok(SearchOutcome {
        best_config,
        best_model,
        best_precision,
        trials,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::observations::MatrixKind;

    fn toy_data() -> ObservationMatrix {
        ObservationMatrix::from_triples(
            MatrixKind::Noisy,
            4,
            2,
            [(0, 0, 1.0), (1, 0, 1.0), (2, 1, 1.0), (3, 1, 1.0)],
        )
        .unwrap()
        .matrix
    }

    fn val_queries() -> Vec<(Query, BTreeSet<usize>)> {
        vec![
            (Query::singleton(0), BTreeSet::from([0, 1])),
            (Query::singleton(1), BTreeSet::from([2, 3])),
        ]
    }

    fn tiny_grid() -> HyperGrid {
        HyperGrid {
            trials: 1,
            batch_sizes: vec![2],
            learning_rates: vec![0.5],
            reg_coeffs: vec![0.0],
            neg_items: vec![1],
            neg_attrs: vec![1],
            losses: vec![LossKind::CrossEntropy],
            margins: vec![1.0],
            dims: vec![4],
            epochs: vec![30],
            betas: vec![0.01],
            taus: vec![1.0],
        }
    }

    #[test]
    fn single_trial_returns_that_config() {
        let out = random_search(&toy_data(), &tiny_grid(), ModelKind::Vector, &val_queries(), 7)
            .unwrap();
        assert_eq!(out.trials.len(), 1);
        assert_eq!(out.best_config, out.trials[0].config);
        assert!(out.trials[0].precision_at_1.is_some());
    }

    #[test]
    fn singleton_grid_is_deterministic() {
        let grid = tiny_grid();
        let a = random_search(&toy_data(), &grid, ModelKind::Vector, &val_queries(), 1).unwrap();
        let b = random_search(&toy_data(), &grid, ModelKind::Vector, &val_queries(), 1).unwrap();
        assert_eq!(a.best_config, b.best_config);
        assert_eq!(a.best_precision, b.best_precision);
    }

    #[test]
    fn box_kind_search_works() {
        let mut grid = tiny_grid();
        grid.losses = vec![LossKind::BoxBce];
        grid.trials = 2;
        grid.epochs = vec![50];
        let out =
            random_search(&toy_data(), &grid, ModelKind::Box, &val_queries(), 3).unwrap();
        assert!(matches!(out.best_model, Model::Box(_)));
        assert_eq!(out.trials.len(), 2);
    }

    #[test]
    fn stock_grids_round_trip_and_validate() {
        for (grid, kind) in [
            (HyperGrid::default_vector(), ModelKind::Vector),
            (HyperGrid::default_box(), ModelKind::Box),
        ] {
            grid.validate(kind).unwrap();
            let parsed = HyperGrid::from_kv_str(&grid.to_kv_string()).unwrap();
            assert_eq!(parsed, grid);
        }
        let v = HyperGrid::default_vector();
        assert_eq!(v.learning_rates, vec![1e-5, 1e-4, 1e-3, 1e-2, 1e-1, 1.0]);
        assert_eq!(v.batch_sizes, vec![128, 256, 512, 1024]);
        assert_eq!(v.reg_coeffs, vec![1e-4, 1e-3, 1e-2]);
        let b = HyperGrid::default_box();
        assert_eq!(b.betas, vec![1e-4, 1e-3, 1e-2, 1.0]);
        assert_eq!(b.taus, vec![0.1, 0.5, 1.0]);
    }

    #[test]
    fn kind_irrelevant_lists_may_be_empty() {
        let mut grid = tiny_grid();
        grid.margins = vec![];
        grid.betas = vec![];
        grid.taus = vec![];
        grid.validate(ModelKind::Vector).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let cfg = grid.sample(ModelKind::Vector, 1, &mut rng);
        assert_eq!(cfg.margin, 1.0);
        // the temperature lists are required for box kind
        assert!(grid.validate(ModelKind::Box).is_err());
    }

    #[test]
    fn non_singleton_validation_queries_rejected() {
        let q = Query::new(vec![
            crate::query::Literal { attribute: 0, negated: false },
            crate::query::Literal { attribute: 1, negated: false },
        ])
        .unwrap();
        let err = random_search(
            &toy_data(),
            &tiny_grid(),
            ModelKind::Vector,
            &[(q, BTreeSet::new())],
            0,
        );
        assert!(err.is_err());
    }
}
