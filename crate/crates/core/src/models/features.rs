pub const FEATURE_NAMES: [&str; 5] = ["mean", "variance", "max", "min", "norm"];

/// `[mean, population variance, max, min, Euclidean norm]` of one window.
/// An empty window yields zeros.
pub fn sliding_window_features(w: &[f64]) -> [f64; 5] {
    if w.is_empty() {
        return [0.0; 5];
    }
    let n = w.len() as f64;
    let mean = w.iter().sum::<f64>() / n;
    let var = w.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let max = w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = w.iter().copied().fold(f64::INFINITY, f64::min);
    let norm = w.iter().map(|v| v * v).sum::<f64>().sqrt();
    [mean, var, max, min, norm]
}
