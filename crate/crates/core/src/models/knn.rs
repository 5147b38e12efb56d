use serde::{Deserialize, Serialize};

use super::ModelError;

/// Majority label among the `k` nearest training rows by Euclidean distance.
/// Equal distances keep the earlier training row; tied votes go to the
/// smallest label.
pub fn knn_classify(train_x: &[Vec<f64>], train_y: &[usize], query: &[f64], k: usize) -> Result<usize, ModelError> {
    if train_x.is_empty() {
        return Err(ModelError::Empty("training set"));
    }
    if k == 0 || k > train_x.len() {
        return Err(ModelError::Config(format!("k = {k} with {} training rows", train_x.len())));
    }
    let mut d: Vec<(f64, usize)> = train_x
        .iter()
        .enumerate()
        .map(|(i, x)| (x.iter().zip(query).map(|(a, b)| (a - b) * (a - b)).sum(), i))
        .collect();
    // Index breaks distance ties toward earlier rows.
    d.select_nth_unstable_by(k - 1, |a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let classes = train_y.iter().max().map_or(0, |m| m + 1);
    let mut votes = vec![0usize; classes];
    for &(_, i) in &d[..k] {
        votes[train_y[i]] += 1;
    }
    // First maximum, i.e. the smallest label among tied votes.
    let mut best = 0;
    for (c, &v) in votes.iter().enumerate() {
        if v > votes[best] {
            best = c;
        }
    }
    Ok(best)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Knn {
    pub k: usize,
    pub x: Vec<Vec<f64>>,
    pub y: Vec<usize>,
}

impl Knn {
    pub fn fit(x: Vec<Vec<f64>>, y: Vec<usize>, k: usize) -> Result<Self, ModelError> {
        if x.is_empty() {
            return Err(ModelError::Empty("training set"));
        }
        if k == 0 || k > x.len() {
            return Err(ModelError::Config(format!("k = {k} with {} training rows", x.len())));
        }
        Ok(Self { k, x, y })
    }

    pub fn predict(&self, query: &[f64]) -> usize {
        knn_classify(&self.x, &self.y, query, self.k).expect("validated at fit")
    }
}
