//! Deterministic top-k selection shared by all ranking paths.

/// Indices of the `k` highest scores, descending; equal scores resolve to the
/// lower index. Total over NaN-free input by `f64::total_cmp`.
pub fn top_k(scores: &[f64], k: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    order.truncate(k);
    order
}
