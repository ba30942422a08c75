//! Loss functions with hand-derived sparse gradients, negative sampling, and
//! plain-SGD training for both model families.
//!
//! Training is deliberately sequential and seed-deterministic: one pass over
//! the shuffled positives per epoch, negatives drawn per positive, one
//! gradient step per batch. The same seed reproduces checkpoints bit for bit.

mod search;

pub use search::{random_search, HyperGrid, SearchOutcome, TrialRecord};

use std::collections::BTreeMap;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::boxgeom::{containment_prob_grad, sigmoid, softplus, GumbelParams};
use crate::boxmodel::{BoxModel, BoxTable};
use crate::error::{Error, Result};
use crate::observations::ObservationMatrix;
use crate::table::{dot, EmbeddingTable};
use crate::vecmodel::{Transform, VectorModel};

/// Which loss drives training; each pairs with one score transform.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossKind {
    /// Max-margin on raw dot products (identity transform).
    Hinge,
    /// Binary cross entropy on sigmoid dot products.
    CrossEntropy,
    /// Binary cross entropy on box containment probabilities.
    BoxBce,
}

impl LossKind {
    pub fn as_str(self) -> &'static str {
        match self {
            LossKind::Hinge => "hinge",
            LossKind::CrossEntropy => "crossEntropy",
            LossKind::BoxBce => "boxBce",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "hinge" => Ok(LossKind::Hinge),
            "crossEntropy" => Ok(LossKind::CrossEntropy),
            "boxBce" => Ok(LossKind::BoxBce),
            other => Err(Error::InvalidConfig(format!("unknown loss `{other}`"))),
        }
    }
}

/// Which model family to train.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    Vector,
    Box,
}

impl ModelKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Vector => "vector",
            ModelKind::Box => "box",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "vector" => Ok(ModelKind::Vector),
            "box" => Ok(ModelKind::Box),
            other => Err(Error::InvalidData(format!("unknown model kind `{other}`"))),
        }
    }
}

/// A trained model of either family.
#[derive(Debug, Clone)]
pub enum Model {
    Vector(VectorModel),
    Box(BoxModel),
}

impl Model {
    pub fn kind(&self) -> ModelKind {
        match self {
            Model::Vector(_) => ModelKind::Vector,
            Model::Box(_) => ModelKind::Box,
        }
    }
}

/// All knobs of one training run.
///
/// `dims` is the vector embedding dimension; a box model trained from the
/// same config uses `dims / 2` box dimensions so that both families carry
/// the same parameter count.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub learning_rate: f64,
    pub reg_coeff: f64,
    pub neg_items: usize,
    pub neg_attrs: usize,
    pub epochs: usize,
    pub loss: LossKind,
    pub margin: f64,
    pub seed: u64,
    pub dims: usize,
    pub temps: GumbelParams,
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig("batch_size must be positive".into()));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "learning_rate must be finite and non-negative, got {}",
                self.learning_rate
            )));
        }
        if !(self.reg_coeff >= 0.0 && self.reg_coeff.is_finite()) {
            return Err(Error::InvalidConfig("reg_coeff must be non-negative".into()));
        }
        if self.dims == 0 {
            return Err(Error::InvalidConfig("dims must be positive".into()));
        }
        GumbelParams::new(self.temps.beta, self.temps.tau)?;
        Ok(())
    }

    /// The score transform implied by the loss.
    pub fn transform(&self) -> Result<Transform> {
        match self.loss {
            LossKind::Hinge => Ok(Transform::Identity),
            LossKind::CrossEntropy => Ok(Transform::Sigmoid),
            LossKind::BoxBce => Err(Error::InvalidConfig(
                "boxBce has no vector transform".into(),
            )),
        }
    }

    /// Box dimension with parameter parity to a `dims`-dimensional vector
    /// model: half the dimensions, twice the corners.
    pub fn box_dims(&self) -> usize {
        (self.dims / 2).max(1)
    }

    /// Flat `key=value` rendering, one pair per line, fixed key order.
    pub fn to_kv_string(&self) -> String {
        format!(
            "batch_size={}\nlearning_rate={}\nreg_coeff={}\nneg_items={}\nneg_attrs={}\nepochs={}\nloss={}\nmargin={}\nseed={}\ndims={}\nbeta={}\ntau={}\n",
            self.batch_size,
            self.learning_rate,
            self.reg_coeff,
            self.neg_items,
            self.neg_attrs,
            self.epochs,
            self.loss.as_str(),
            self.margin,
            self.seed,
            self.dims,
            self.temps.beta,
            self.temps.tau,
        )
    }

    /// Parses the flat `key=value` format. `loss`, `dims`, `epochs` and
    /// `learning_rate` are required; the rest fall back to defaults.
    pub fn from_kv_str(text: &str) -> Result<Self> {
        let mut cfg = TrainConfig {
            batch_size: 256,
            learning_rate: f64::NAN,
            reg_coeff: 0.0,
            neg_items: 5,
            neg_attrs: 5,
            epochs: 0,
            loss: LossKind::Hinge,
            margin: 1.0,
            seed: 0,
            dims: 0,
            temps: GumbelParams { beta: 0.01, tau: 1.0 },
        };
        let mut saw_loss = false;
        let mut saw_epochs = false;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::InvalidConfig(
                format!("line {}: expected key=value, got `{line}`", lineno + 1),
            ))?;
            let (key, value) = (key.trim(), value.trim());
            let bad = |what: &str| {
                Error::InvalidConfig(format!("line {}: bad {what} `{value}`", lineno + 1))
            };
            match key {
                "batch_size" => cfg.batch_size = value.parse().map_err(|_| bad("batch_size"))?,
                "learning_rate" => {
                    cfg.learning_rate = value.parse().map_err(|_| bad("learning_rate"))?
                }
                "reg_coeff" => cfg.reg_coeff = value.parse().map_err(|_| bad("reg_coeff"))?,
                "neg_items" => cfg.neg_items = value.parse().map_err(|_| bad("neg_items"))?,
                "neg_attrs" => cfg.neg_attrs = value.parse().map_err(|_| bad("neg_attrs"))?,
                "epochs" => {
                    cfg.epochs = value.parse().map_err(|_| bad("epochs"))?;
                    saw_epochs = true;
                }
                "loss" => {
                    cfg.loss = LossKind::parse(value)?;
                    saw_loss = true;
                }
                "margin" => cfg.margin = value.parse().map_err(|_| bad("margin"))?,
                "seed" => cfg.seed = value.parse().map_err(|_| bad("seed"))?,
                "dims" => cfg.dims = value.parse().map_err(|_| bad("dims"))?,
                "beta" => cfg.temps.beta = value.parse().map_err(|_| bad("beta"))?,
                "tau" => cfg.temps.tau = value.parse().map_err(|_| bad("tau"))?,
                other => {
                    return Err(Error::InvalidConfig(format!(
                        "line {}: unknown key `{other}`",
                        lineno + 1
                    )))
                }
            }
        }
        if !saw_loss {
            return Err(Error::InvalidConfig("missing required key `loss`".into()));
        }
        if !saw_epochs {
            return Err(Error::InvalidConfig("missing required key `epochs`".into()));
        }
        if cfg.dims == 0 {
            return Err(Error::InvalidConfig("missing required key `dims`".into()));
        }
        if cfg.learning_rate.is_nan() {
            return Err(Error::InvalidConfig(
                "missing required key `learning_rate`".into(),
            ));
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// One labeled `(item, attribute)` cell. Negatives carry label 0 and weight 1;
/// positives keep their observed weight, though the losses only read labels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainingExample {
    pub item: usize,
    pub attribute: usize,
    pub label: u8,
    pub weight: f64,
}

fn uniform_except(bound: usize, exclude: usize, rng: &mut impl Rng) -> usize {
    debug_assert!(bound >= 2);
    let raw = rng.gen_range(0..bound - 1);
    if raw >= exclude {
        raw + 1
    } else {
        raw
    }
}

/// Draws `neg_items` corrupted-item and `neg_attrs` corrupted-attribute
/// negatives for one positive, with replacement, never reproducing the
/// positive cell itself. Collisions with other observed positives are kept:
/// zeros are weak negatives.
pub fn sample_negatives(
    positive: (usize, usize),
    cfg: &TrainConfig,
    num_items: usize,
    num_attributes: usize,
    rng: &mut impl Rng,
) -> Vec<TrainingExample> {
    let (item, attribute) = positive;
    let mut out = Vec::with_capacity(cfg.neg_items + cfg.neg_attrs);
    for _ in 0..cfg.neg_items {
        out.push(TrainingExample {
            item: uniform_except(num_items, item, rng),
            attribute,
            label: 0,
            weight: 1.0,
        });
    }
    for _ in 0..cfg.neg_attrs {
        out.push(TrainingExample {
            item,
            attribute: uniform_except(num_attributes, attribute, rng),
            label: 0,
            weight: 1.0,
        });
    }
    out
}

/// Sparse gradients for the touched rows of `U` and `V`.
#[derive(Debug, Default)]
pub struct VectorGrads {
    pub item_rows: BTreeMap<usize, Vec<f64>>,
    pub attr_rows: BTreeMap<usize, Vec<f64>>,
}

/// Sparse gradients for the touched box corners.
#[derive(Debug, Default)]
pub struct BoxGrads {
    pub item_mins: BTreeMap<usize, Vec<f64>>,
    pub item_maxs: BTreeMap<usize, Vec<f64>>,
    pub attr_mins: BTreeMap<usize, Vec<f64>>,
    pub attr_maxs: BTreeMap<usize, Vec<f64>>,
}

fn accumulate(map: &mut BTreeMap<usize, Vec<f64>>, row: usize, dim: usize) -> &mut Vec<f64> {
    map.entry(row).or_insert_with(|| vec![0.0; dim])
}

/// Mean per-example loss over the batch plus L2 on the touched rows, with
/// the matching analytic gradients.
///
/// Hinge (identity transform): `max(0, margin - s * <u, v>)` with `s = +1`
/// for positives and `-1` for negatives. Cross entropy (sigmoid transform):
/// `-[y ln p + (1 - y) ln(1 - p)]` with `p = sigmoid(<u, v>)`.
pub fn loss_and_grads_vector(
    model: &VectorModel,
    batch: &[TrainingExample],
    cfg: &TrainConfig,
) -> Result<(f64, VectorGrads)> {
    let required = match cfg.loss {
        LossKind::Hinge => Transform::Identity,
        LossKind::CrossEntropy => Transform::Sigmoid,
        LossKind::BoxBce => {
            return Err(Error::LossTransformMismatch {
                loss: "boxBce",
                required: "box model",
            })
        }
    };
    if model.transform != required {
        return Err(Error::LossTransformMismatch {
            loss: cfg.loss.as_str(),
            required: required.as_str(),
        });
    }

    let dim = model.dim();
    let inv_b = 1.0 / batch.len().max(1) as f64;
    let mut grads = VectorGrads::default();
    let mut loss = 0.0;
    for ex in batch {
        let u = model.item_vecs.row(ex.item);
        let v = model.attr_vecs.row(ex.attribute);
        let d = dot(u, v);
        // d(term)/d(dot)
        let slope = match cfg.loss {
            LossKind::Hinge => {
                let sign = if ex.label == 1 { 1.0 } else { -1.0 };
                let term = (cfg.margin - sign * d).max(0.0);
                loss += term * inv_b;
                if term > 0.0 {
                    -sign
                } else {
                    0.0
                }
            }
            LossKind::CrossEntropy => {
                let y = ex.label as f64;
                // -ln sigmoid(d) = softplus(-d); -ln(1 - sigmoid(d)) = softplus(d)
                let term = if ex.label == 1 {
                    softplus(-d, 1.0)
                } else {
                    softplus(d, 1.0)
                };
                loss += term * inv_b;
                sigmoid(d) - y
            }
            LossKind::BoxBce => unreachable!(),
        };
        if slope != 0.0 {
            let gu = accumulate(&mut grads.item_rows, ex.item, dim);
            for (g, &x) in gu.iter_mut().zip(v) {
                *g += inv_b * slope * x;
            }
            let gv = accumulate(&mut grads.attr_rows, ex.attribute, dim);
            for (g, &x) in gv.iter_mut().zip(u) {
                *g += inv_b * slope * x;
            }
        } else {
            // still marks the rows as touched for regularization
            accumulate(&mut grads.item_rows, ex.item, dim);
            accumulate(&mut grads.attr_rows, ex.attribute, dim);
        }
    }
    if cfg.reg_coeff > 0.0 {
        for (&row, grad) in grads.item_rows.iter_mut() {
            let u = model.item_vecs.row(row);
            loss += cfg.reg_coeff * dot(u, u);
            for (g, &x) in grad.iter_mut().zip(u) {
                *g += 2.0 * cfg.reg_coeff * x;
            }
        }
        for (&row, grad) in grads.attr_rows.iter_mut() {
            let v = model.attr_vecs.row(row);
            loss += cfg.reg_coeff * dot(v, v);
            for (g, &x) in grad.iter_mut().zip(v) {
                *g += 2.0 * cfg.reg_coeff * x;
            }
        }
    }
    Ok((loss, grads))
}

/// Binary cross entropy between labels and clamped containment
/// probabilities, with gradients chained through the softplus volumes, the
/// logsumexp intersection and the volume quotient. Saturated clamps
/// contribute zero gradient.
pub fn loss_and_grads_box(
    model: &BoxModel,
    batch: &[TrainingExample],
    cfg: &TrainConfig,
) -> Result<(f64, BoxGrads)> {
    if cfg.loss != LossKind::BoxBce {
        return Err(Error::LossTransformMismatch {
            loss: cfg.loss.as_str(),
            required: "vector model",
        });
    }
    let dim = model.dim();
    let inv_b = 1.0 / batch.len().max(1) as f64;
    let mut grads = BoxGrads::default();
    let mut loss = 0.0;
    for ex in batch {
        let attr_box = model.attr_boxes.box_at(ex.attribute);
        let item_box = model.item_boxes.box_at(ex.item);
        let g = containment_prob_grad(&attr_box, &item_box, &model.temps);
        let p = g.clamped;
        let y = ex.label as f64;
        loss += -(y * p.ln() + (1.0 - y) * (1.0 - p).ln()) * inv_b;
        if g.clamp_active {
            continue;
        }
        let dl_dp = (p - y) / (p * (1.0 - p));
        let scale = inv_b * dl_dp;
        let am = accumulate(&mut grads.attr_mins, ex.attribute, dim);
        for (t, &s) in am.iter_mut().zip(&g.d_outer_mins) {
            *t += scale * s;
        }
        let ax = accumulate(&mut grads.attr_maxs, ex.attribute, dim);
        for (t, &s) in ax.iter_mut().zip(&g.d_outer_maxs) {
            *t += scale * s;
        }
        let im = accumulate(&mut grads.item_mins, ex.item, dim);
        for (t, &s) in im.iter_mut().zip(&g.d_inner_mins) {
            *t += scale * s;
        }
        let ix = accumulate(&mut grads.item_maxs, ex.item, dim);
        for (t, &s) in ix.iter_mut().zip(&g.d_inner_maxs) {
            *t += scale * s;
        }
    }
    Ok((loss, grads))
}

fn init_vector(cfg: &TrainConfig, m: usize, n: usize, rng: &mut ChaCha8Rng) -> Result<VectorModel> {
    let d = cfg.dims;
    let scale = 0.5 / (d as f64).sqrt();
    let mut fill = |rows: usize| {
        let mut t = EmbeddingTable::zeros(rows, d);
        for r in 0..rows {
            for v in t.row_mut(r) {
                *v = rng.gen_range(-scale..scale);
            }
        }
        t
    };
    let items = fill(m);
    let attrs = fill(n);
    Ok(VectorModel::new(items, attrs, cfg.transform()?))
}

fn init_box(cfg: &TrainConfig, m: usize, n: usize, rng: &mut ChaCha8Rng) -> Result<BoxModel> {
    let d = cfg.box_dims();
    // small overlapping boxes so that intersections start with signal
    let mut fill = |rows: usize| {
        let mut t = BoxTable::zeros(rows, d);
        for r in 0..rows {
            for j in 0..d {
                let lo = rng.gen_range(-0.4..0.1);
                let hi = lo + rng.gen_range(0.2..0.6);
                t.mins.row_mut(r)[j] = lo;
                t.maxs.row_mut(r)[j] = hi;
            }
        }
        t
    };
    let items = fill(m);
    let attrs = fill(n);
    Ok(BoxModel::new(items, attrs, GumbelParams::new(cfg.temps.beta, cfg.temps.tau)?))
}

fn sgd_step(table: &mut EmbeddingTable, rows: &BTreeMap<usize, Vec<f64>>, lr: f64) {
    for (&row, grad) in rows {
        for (p, &g) in table.row_mut(row).iter_mut().zip(grad) {
            *p -= lr * g;
        }
    }
}

/// A trained model plus its per-epoch mean training losses.
#[derive(Debug)]
pub struct FitOutcome {
    pub model: Model,
    pub epoch_losses: Vec<f64>,
}

/// Trains a model from scratch on the nonzero entries of `data`.
///
/// Every epoch shuffles the positives, draws negatives per positive, and
/// applies one plain SGD step per batch. Aborts with an error as soon as a
/// batch loss turns non-finite.
pub fn fit(data: &ObservationMatrix, cfg: &TrainConfig, kind: ModelKind) -> Result<FitOutcome> {
    cfg.validate()?;
    if data.nnz() == 0 {
        return Err(Error::InvalidData("training data has no entries".into()));
    }
    let (m, n) = (data.num_items(), data.num_attributes());
    if cfg.neg_items > 0 && m < 2 {
        return Err(Error::InvalidConfig(
            "neg_items > 0 needs at least two items".into(),
        ));
    }
    if cfg.neg_attrs > 0 && n < 2 {
        return Err(Error::InvalidConfig(
            "neg_attrs > 0 needs at least two attributes".into(),
        ));
    }
    match (kind, cfg.loss) {
        (ModelKind::Vector, LossKind::Hinge | LossKind::CrossEntropy) => {}
        (ModelKind::Box, LossKind::BoxBce) => {}
        (kind, loss) => {
            return Err(Error::InvalidConfig(format!(
                "loss `{}` cannot train a {} model",
                loss.as_str(),
                kind.as_str()
            )))
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut model = match kind {
        ModelKind::Vector => Model::Vector(init_vector(cfg, m, n, &mut rng)?),
        ModelKind::Box => Model::Box(init_box(cfg, m, n, &mut rng)?),
    };

    let positives: Vec<(usize, usize, f64)> = data.entries().collect();
    let mut order: Vec<usize> = (0..positives.len()).collect();
    let mut epoch_losses = Vec::with_capacity(cfg.epochs);
    let mut batch: Vec<TrainingExample> = Vec::new();

    for epoch in 0..cfg.epochs {
        // Fisher-Yates via the seeded stream
        for i in (1..order.len()).rev() {
            let j = rng.gen_range(0..=i);
            order.swap(i, j);
        }
        let mut loss_sum = 0.0;
        let mut example_count = 0usize;
        for chunk in order.chunks(cfg.batch_size) {
            batch.clear();
            for &idx in chunk {
                let (i, a, w) = positives[idx];
                batch.push(TrainingExample {
                    item: i,
                    attribute: a,
                    label: 1,
                    weight: w,
                });
                batch.extend(sample_negatives((i, a), cfg, m, n, &mut rng));
            }
            let batch_loss = match &mut model {
                Model::Vector(vm) => {
                    let (loss, grads) = loss_and_grads_vector(vm, &batch, cfg)?;
                    sgd_step(&mut vm.item_vecs, &grads.item_rows, cfg.learning_rate);
                    sgd_step(&mut vm.attr_vecs, &grads.attr_rows, cfg.learning_rate);
                    loss
                }
                Model::Box(bm) => {
                    let (loss, grads) = loss_and_grads_box(bm, &batch, cfg)?;
                    sgd_step(&mut bm.item_boxes.mins, &grads.item_mins, cfg.learning_rate);
                    sgd_step(&mut bm.item_boxes.maxs, &grads.item_maxs, cfg.learning_rate);
                    sgd_step(&mut bm.attr_boxes.mins, &grads.attr_mins, cfg.learning_rate);
                    sgd_step(&mut bm.attr_boxes.maxs, &grads.attr_maxs, cfg.learning_rate);
                    loss
                }
            };
            if !batch_loss.is_finite() {
                return Err(Error::Diverged(epoch));
            }
            loss_sum += batch_loss * batch.len() as f64;
            example_count += batch.len();
        }
        epoch_losses.push(loss_sum / example_count.max(1) as f64);
    }
    Ok(FitOutcome {
        model,
        epoch_losses,
    })
}
