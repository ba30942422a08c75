//! Hard and Gumbel box geometry.
//!
//! A box is an axis-aligned hyperrectangle stored as free `(min, max)` corner
//! vectors; sides may be inverted, the softplus volume tolerates that. The
//! Gumbel variants replace hard min/max/volume with smooth surrogates:
//! corner intersection becomes a temperature-`beta` logsumexp and side length
//! becomes a temperature-`tau` softplus, so every quantity here is a smooth
//! function of the corners with the analytic gradients exposed alongside.

use crate::error::{Error, Result};

/// Probabilities are clamped into `[PROB_EPS, 1 - PROB_EPS]` before any use
/// in logarithms.
pub const PROB_EPS: f64 = 1e-6;

/// Temperatures of the smooth surrogates: `beta` scales the corner
/// logsumexp (and the membership CDFs), `tau` the volume softplus.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GumbelParams {
    pub beta: f64,
    pub tau: f64,
}

impl GumbelParams {
    pub fn new(beta: f64, tau: f64) -> Result<Self> {
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "intersection temperature beta must be positive, got {beta}"
            )));
        }
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "volume temperature tau must be positive, got {tau}"
            )));
        }
        Ok(Self { beta, tau })
    }
}

/// Axis-aligned box given by lower and upper corner vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxTensor {
    pub mins: Vec<f64>,
    pub maxs: Vec<f64>,
}

impl BoxTensor {
    /// Panics on length mismatch or non-finite entries; corners are free
    /// parameters, `min <= max` is not required.
    pub fn new(mins: Vec<f64>, maxs: Vec<f64>) -> Self {
        assert_eq!(mins.len(), maxs.len(), "corner vectors differ in length");
        assert!(
            mins.iter().chain(maxs.iter()).all(|v| v.is_finite()),
            "box corners must be finite"
        );
        Self { mins, maxs }
    }

    pub fn dim(&self) -> usize {
        self.mins.len()
    }

    pub fn hard_volume(&self) -> f64 {
        hard_volume(&self.mins, &self.maxs)
    }

    pub fn gumbel_volume(&self, p: &GumbelParams) -> f64 {
        gumbel_volume(&self.mins, &self.maxs, p)
    }

    pub fn intersect_hard(&self, other: &BoxTensor) -> BoxTensor {
        assert_eq!(self.dim(), other.dim(), "dimension mismatch");
        let mins = self
            .mins
            .iter()
            .zip(&other.mins)
            .map(|(&a, &b)| a.max(b))
            .collect();
        let maxs = self
            .maxs
            .iter()
            .zip(&other.maxs)
            .map(|(&a, &b)| a.min(b))
            .collect();
        BoxTensor { mins, maxs }
    }

    /// Smooth intersection: per dimension the lower corner is a logsumexp
    /// (smooth max) of the lower corners and the upper corner a negated
    /// logsumexp (smooth min). Associative and commutative up to rounding.
    pub fn intersect_gumbel(&self, other: &BoxTensor, p: &GumbelParams) -> BoxTensor {
        assert_eq!(self.dim(), other.dim(), "dimension mismatch");
        let mins = self
            .mins
            .iter()
            .zip(&other.mins)
            .map(|(&a, &b)| smooth_max(a, b, p.beta))
            .collect();
        let maxs = self
            .maxs
            .iter()
            .zip(&other.maxs)
            .map(|(&a, &b)| smooth_min(a, b, p.beta))
            .collect();
        BoxTensor { mins, maxs }
    }
}

/// Numerically stable `tau * ln(1 + exp(x / tau))`.
pub fn softplus(x: f64, tau: f64) -> f64 {
    let z = x / tau;
    if z > 0.0 {
        x + tau * (-z).exp().ln_1p()
    } else {
        tau * z.exp().ln_1p()
    }
}

/// `ln softplus(x, tau)`, finite even where the softplus underflows.
pub fn ln_softplus(x: f64, tau: f64) -> f64 {
    let sp = softplus(x, tau);
    if sp > 0.0 {
        sp.ln()
    } else {
        // softplus ~ tau * exp(x/tau) deep in the left tail
        tau.ln() + x / tau
    }
}

/// Derivative of `softplus(x, tau)` w.r.t. `x`: the logistic `sigmoid(x/tau)`.
pub fn softplus_deriv(x: f64, tau: f64) -> f64 {
    sigmoid(x / tau)
}

/// Derivative of `ln softplus(x, tau)` w.r.t. `x`; stable in both tails.
pub fn ln_softplus_deriv(x: f64, tau: f64) -> f64 {
    let z = x / tau;
    if z < -30.0 {
        // sigmoid(z)/softplus -> (e^z)/(tau e^z)
        1.0 / tau
    } else {
        sigmoid(z) / softplus(x, tau)
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Smooth maximum `beta * ln(exp(a/beta) + exp(b/beta))`, max-shifted.
pub fn smooth_max(a: f64, b: f64, beta: f64) -> f64 {
    let hi = a.max(b);
    let lo = a.min(b);
    hi + beta * ((lo - hi) / beta).exp().ln_1p()
}

/// Smooth minimum `-beta * ln(exp(-a/beta) + exp(-b/beta))`.
pub fn smooth_min(a: f64, b: f64, beta: f64) -> f64 {
    -smooth_max(-a, -b, beta)
}

/// Weight of `a` in `smooth_max(a, b, beta)`; the weight of `b` is its
/// complement.
pub fn smooth_max_weight(a: f64, b: f64, beta: f64) -> f64 {
    sigmoid((a - b) / beta)
}

/// Weight of `a` in `smooth_min(a, b, beta)`.
pub fn smooth_min_weight(a: f64, b: f64, beta: f64) -> f64 {
    sigmoid((b - a) / beta)
}

/// Product of clamped side lengths.
pub fn hard_volume(mins: &[f64], maxs: &[f64]) -> f64 {
    mins.iter()
        .zip(maxs)
        .map(|(&lo, &hi)| (hi - lo).max(0.0))
        .product()
}

/// Product of softplus side lengths; strictly positive.
pub fn gumbel_volume(mins: &[f64], maxs: &[f64], p: &GumbelParams) -> f64 {
    mins.iter()
        .zip(maxs)
        .map(|(&lo, &hi)| softplus(hi - lo, p.tau))
        .product()
}

/// `ln` of the Gumbel volume, robust to side-length underflow.
pub fn ln_gumbel_volume(mins: &[f64], maxs: &[f64], p: &GumbelParams) -> f64 {
    mins.iter()
        .zip(maxs)
        .map(|(&lo, &hi)| ln_softplus(hi - lo, p.tau))
        .sum()
}

/// Gumbel volume with its gradient w.r.t. every corner.
pub fn gumbel_volume_grad(
    mins: &[f64],
    maxs: &[f64],
    p: &GumbelParams,
) -> (f64, Vec<f64>, Vec<f64>) {
    let d = mins.len();
    let sides: Vec<f64> = mins
        .iter()
        .zip(maxs)
        .map(|(&lo, &hi)| softplus(hi - lo, p.tau))
        .collect();
    // prefix/suffix products, so zero side lengths never divide
    let mut prefix = vec![1.0; d + 1];
    for j in 0..d {
        prefix[j + 1] = prefix[j] * sides[j];
    }
    let mut suffix = vec![1.0; d + 1];
    for j in (0..d).rev() {
        suffix[j] = suffix[j + 1] * sides[j];
    }
    let volume = prefix[d];
    let mut d_mins = vec![0.0; d];
    let mut d_maxs = vec![0.0; d];
    for j in 0..d {
        let others = prefix[j] * suffix[j + 1];
        let slope = softplus_deriv(maxs[j] - mins[j], p.tau);
        d_maxs[j] = others * slope;
        d_mins[j] = -others * slope;
    }
    (volume, d_mins, d_maxs)
}

/// Per-dimension mixing weights of the smooth intersection: entry `j` is the
/// sensitivity of the result corner to box `a`'s corner; box `b` gets the
/// complement.
pub struct IntersectionWeights {
    pub min_weight_a: Vec<f64>,
    pub max_weight_a: Vec<f64>,
}

pub fn intersect_gumbel_grad(
    a: &BoxTensor,
    b: &BoxTensor,
    p: &GumbelParams,
) -> (BoxTensor, IntersectionWeights) {
    let result = a.intersect_gumbel(b, p);
    let min_weight_a = a
        .mins
        .iter()
        .zip(&b.mins)
        .map(|(&x, &y)| smooth_max_weight(x, y, p.beta))
        .collect();
    let max_weight_a = a
        .maxs
        .iter()
        .zip(&b.maxs)
        .map(|(&x, &y)| smooth_min_weight(x, y, p.beta))
        .collect();
    (
        result,
        IntersectionWeights {
            min_weight_a,
            max_weight_a,
        },
    )
}

/// Raw (pre-clamp) containment probability
/// `|outer ∩ inner| / |inner|` under the Gumbel surrogates; always in `[0, 1]`.
pub fn containment_prob_raw(outer: &BoxTensor, inner: &BoxTensor, p: &GumbelParams) -> f64 {
    assert_eq!(outer.dim(), inner.dim(), "dimension mismatch");
    let mut log_ratio = 0.0;
    for j in 0..inner.dim() {
        let cmin = smooth_max(outer.mins[j], inner.mins[j], p.beta);
        let cmax = smooth_min(outer.maxs[j], inner.maxs[j], p.beta);
        log_ratio += ln_softplus(cmax - cmin, p.tau) - ln_softplus(inner.maxs[j] - inner.mins[j], p.tau);
    }
    log_ratio.exp()
}

/// Containment probability clamped into `[PROB_EPS, 1 - PROB_EPS]`.
pub fn containment_prob(outer: &BoxTensor, inner: &BoxTensor, p: &GumbelParams) -> f64 {
    containment_prob_raw(outer, inner, p).clamp(PROB_EPS, 1.0 - PROB_EPS)
}

/// Containment probability together with the gradient of the raw value
/// w.r.t. all four corner vectors. `clamped_active` is false when the clamp
/// saturates, in which case downstream gradients must be zeroed.
pub struct ContainmentGrad {
    pub raw: f64,
    pub clamped: f64,
    pub clamp_active: bool,
    pub d_outer_mins: Vec<f64>,
    pub d_outer_maxs: Vec<f64>,
    pub d_inner_mins: Vec<f64>,
    pub d_inner_maxs: Vec<f64>,
}

pub fn containment_prob_grad(
    outer: &BoxTensor,
    inner: &BoxTensor,
    p: &GumbelParams,
) -> ContainmentGrad {
    assert_eq!(outer.dim(), inner.dim(), "dimension mismatch");
    let d = inner.dim();
    let mut log_ratio = 0.0;
    // d ln(raw) / d corner, assembled per dimension
    let mut dl_outer_mins = vec![0.0; d];
    let mut dl_outer_maxs = vec![0.0; d];
    let mut dl_inner_mins = vec![0.0; d];
    let mut dl_inner_maxs = vec![0.0; d];
    for j in 0..d {
        let (om, im) = (outer.mins[j], inner.mins[j]);
        let (hi_o, hi_i) = (outer.maxs[j], inner.maxs[j]);
        let cmin = smooth_max(om, im, p.beta);
        let cmax = smooth_min(hi_o, hi_i, p.beta);
        let inter_side = cmax - cmin;
        let inner_side = hi_i - im;
        log_ratio += ln_softplus(inter_side, p.tau) - ln_softplus(inner_side, p.tau);

        let lsp_inter = ln_softplus_deriv(inter_side, p.tau);
        let lsp_inner = ln_softplus_deriv(inner_side, p.tau);
        let w_om = smooth_max_weight(om, im, p.beta);
        let w_im = 1.0 - w_om;
        let w_omax = smooth_min_weight(hi_o, hi_i, p.beta);
        let w_imax = 1.0 - w_omax;

        dl_outer_mins[j] = -lsp_inter * w_om;
        dl_outer_maxs[j] = lsp_inter * w_omax;
        dl_inner_mins[j] = -lsp_inter * w_im + lsp_inner;
        dl_inner_maxs[j] = lsp_inter * w_imax - lsp_inner;
    }
    let raw = log_ratio.exp();
    let clamped = raw.clamp(PROB_EPS, 1.0 - PROB_EPS);
    let clamp_active = raw <= PROB_EPS || raw >= 1.0 - PROB_EPS;
    let scale = |v: Vec<f64>| v.into_iter().map(|g| g * raw).collect::<Vec<_>>();
    ContainmentGrad {
        raw,
        clamped,
        clamp_active,
        d_outer_mins: scale(dl_outer_mins),
        d_outer_maxs: scale(dl_outer_maxs),
        d_inner_mins: scale(dl_inner_mins),
        d_inner_maxs: scale(dl_inner_maxs),
    }
}

/// Probability that point `z` falls inside the Gumbel box: per dimension the
/// max-Gumbel CDF at the lower corner times the min-Gumbel survival at the
/// upper corner, both at scale `beta`.
pub fn membership_prob(z: &[f64], b: &BoxTensor, p: &GumbelParams) -> f64 {
    assert_eq!(z.len(), b.dim(), "dimension mismatch");
    let mut log_prob = 0.0;
    for ((&zj, &lo), &hi) in z.iter().zip(&b.mins).zip(&b.maxs) {
        log_prob -= (-(zj - lo) / p.beta).exp();
        log_prob -= (-(hi - zj) / p.beta).exp();
    }
    log_prob.exp()
}
