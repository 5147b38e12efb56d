//! Random forest of CART trees split on Gini impurity.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::ModelError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForestConfig {
    pub trees: usize,
    /// Features examined per split; `None` is `⌊√d⌋` (at least 1).
    pub max_features: Option<usize>,
    pub max_depth: Option<usize>,
    pub min_samples_split: usize,
    pub bootstrap: bool,
}

impl Default for ForestConfig {
    fn default() -> Self {
        Self {
            trees: 100,
            max_features: None,
            max_depth: None,
            min_samples_split: 2,
            bootstrap: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
enum Node {
    Leaf(usize),
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Tree {
    nodes: Vec<Node>,
}

impl Tree {
    fn predict(&self, x: &[f64]) -> usize {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf(c) => return c,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if x[feature] <= threshold { left } else { right },
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomForest {
    classes: usize,
    trees: Vec<Tree>,
}

/// Gini impurity `1 − Σ p²` of a class histogram.
pub fn gini(counts: &[usize]) -> f64 {
    let n: usize = counts.iter().sum();
    if n == 0 {
        return 0.0;
    }
    let n = n as f64;
    1.0 - counts.iter().map(|&c| (c as f64 / n).powi(2)).sum::<f64>()
}

fn majority(counts: &[usize]) -> usize {
    let mut best = 0;
    for (c, &v) in counts.iter().enumerate() {
        if v > counts[best] {
            best = c;
        }
    }
    best
}

struct Builder<'a> {
    x: &'a [Vec<f64>],
    y: &'a [usize],
    classes: usize,
    max_features: usize,
    cfg: &'a ForestConfig,
    nodes: Vec<Node>,
}

impl Builder<'_> {
    fn counts(&self, idx: &[usize]) -> Vec<usize> {
        let mut c = vec![0; self.classes];
        for &i in idx {
            c[self.y[i]] += 1;
        }
        c
    }

    /// Lowest weighted child impurity over one feature: `(score, threshold)`.
    fn best_threshold(&self, idx: &mut [usize], f: usize) -> Option<(f64, f64)> {
        idx.sort_by(|&a, &b| self.x[a][f].total_cmp(&self.x[b][f]).then(a.cmp(&b)));
        let total = self.counts(idx);
        let mut left = vec![0; self.classes];
        let n = idx.len() as f64;
        let mut best: Option<(f64, f64)> = None;
        for s in 1..idx.len() {
            left[self.y[idx[s - 1]]] += 1;
            let (lo, hi) = (self.x[idx[s - 1]][f], self.x[idx[s]][f]);
            if lo == hi {
                continue;
            }
            let right: Vec<usize> = total.iter().zip(&left).map(|(t, l)| t - l).collect();
            let score = (s as f64 * gini(&left) + (n - s as f64) * gini(&right)) / n;
            if best.is_none_or(|(b, _)| score < b) {
                best = Some((score, lo + (hi - lo) / 2.0));
            }
        }
        best
    }

    fn grow(&mut self, idx: &mut [usize], depth: usize, rng: &mut ChaCha8Rng) -> usize {
        let counts = self.counts(idx);
        let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
        let depth_capped = self.cfg.max_depth.is_some_and(|d| depth >= d);
        let me = self.nodes.len();
        self.nodes.push(Node::Leaf(majority(&counts)));
        if pure || depth_capped || idx.len() < self.cfg.min_samples_split {
            return me;
        }
        // Draw features in random order until `max_features` usable ones
        // (non-constant on this node) have been scored.
        let d = self.x[0].len();
        let mut order: Vec<usize> = (0..d).collect();
        order.shuffle(rng);
        let mut best: Option<(f64, usize, f64)> = None;
        let mut scored = 0;
        for f in order {
            if scored >= self.max_features {
                break;
            }
            if let Some((score, thr)) = self.best_threshold(idx, f) {
                scored += 1;
                if best.is_none_or(|(b, _, _)| score < b) {
                    best = Some((score, f, thr));
                }
            }
        }
        let Some((_, feature, threshold)) = best else {
            return me;
        };
        idx.sort_by(|&a, &b| {
            (self.x[a][feature] > threshold)
                .cmp(&(self.x[b][feature] > threshold))
                .then(a.cmp(&b))
        });
        let split = idx.partition_point(|&i| self.x[i][feature] <= threshold);
        let (l, r) = idx.split_at_mut(split);
        let left = self.grow(l, depth + 1, rng);
        let right = self.grow(r, depth + 1, rng);
        self.nodes[me] = Node::Split {
            feature,
            threshold,
            left,
            right,
        };
        me
    }
}

impl RandomForest {
    /// Trees are grown in parallel; tree `t` draws from stream `t` of `seed`,
    /// so the forest depends only on the seed and data.
    pub fn fit(x: &[Vec<f64>], y: &[usize], cfg: &ForestConfig, seed: u64) -> Result<Self, ModelError> {
        if x.is_empty() {
            return Err(ModelError::Empty("training set"));
        }
        if x.len() != y.len() {
            return Err(ModelError::Config(format!("{} rows, {} labels", x.len(), y.len())));
        }
        if cfg.trees == 0 {
            return Err(ModelError::Config("trees must be ≥ 1".into()));
        }
        let d = x[0].len();
        if d == 0 || x.iter().any(|r| r.len() != d) {
            return Err(ModelError::Config("rows must share a non-zero width".into()));
        }
        let classes = y.iter().max().unwrap() + 1;
        let max_features = cfg
            .max_features
            .unwrap_or_else(|| ((d as f64).sqrt().floor() as usize).max(1))
            .clamp(1, d);
        let trees = (0..cfg.trees)
            .into_par_iter()
            .map(|t| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(t as u64);
                let mut idx: Vec<usize> = if cfg.bootstrap {
                    (0..x.len()).map(|_| rng.random_range(0..x.len())).collect()
                } else {
                    (0..x.len()).collect()
                };
                let mut b = Builder {
                    x,
                    y,
                    classes,
                    max_features,
                    cfg,
                    nodes: Vec::new(),
                };
                b.grow(&mut idx, 0, &mut rng);
                Tree { nodes: b.nodes }
            })
            .collect();
        Ok(Self { classes, trees })
    }

    /// Majority vote; tied votes go to the smallest label.
    pub fn predict(&self, x: &[f64]) -> usize {
        let mut votes = vec![0; self.classes];
        for t in &self.trees {
            votes[t.predict(x)] += 1;
        }
        majority(&votes)
    }

    pub fn tree_count(&self) -> usize {
        self.trees.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gini_examples() {
        assert!((gini(&[2, 2]) - 0.5).abs() < 1e-15);
        assert_eq!(gini(&[4, 0, 0]), 0.0);
        assert!((gini(&[1, 1, 1]) - 2.0 / 3.0).abs() < 1e-15);
    }

    fn toy(seed: u64, n: usize) -> (Vec<Vec<f64>>, Vec<usize>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x: Vec<Vec<f64>> = (0..n).map(|_| (0..4).map(|_| rng.random::<f64>()).collect()).collect();
        let y = (0..n).map(|_| rng.random_range(0..3)).collect();
        (x, y)
    }

    #[test]
    fn single_tree_memorizes() {
        let (x, y) = toy(1, 60);
        let cfg = ForestConfig {
            trees: 1,
            bootstrap: false,
            max_features: Some(4),
            ..Default::default()
        };
        let f = RandomForest::fit(&x, &y, &cfg, 0).unwrap();
        assert!(x.iter().zip(&y).all(|(r, &l)| f.predict(r) == l));
    }

    #[test]
    fn single_class_is_constant() {
        let (x, _) = toy(2, 20);
        let f = RandomForest::fit(&x, &[1; 20], &ForestConfig::default(), 3).unwrap();
        assert!(toy(5, 30).0.iter().all(|r| f.predict(r) == 1));
    }

    #[test]
    fn deterministic_per_seed() {
        let (x, y) = toy(3, 80);
        let cfg = ForestConfig {
            trees: 10,
            ..Default::default()
        };
        let a = RandomForest::fit(&x, &y, &cfg, 7).unwrap();
        assert_eq!(a, RandomForest::fit(&x, &y, &cfg, 7).unwrap());
        assert_ne!(a, RandomForest::fit(&x, &y, &cfg, 8).unwrap());
        assert!(RandomForest::fit(&[], &[], &cfg, 0).is_err());
    }

    #[test]
    fn separable_data() {
        let x: Vec<Vec<f64>> = (0..90).map(|i| vec![(i / 30) as f64 + (i % 30) as f64 * 0.01, 0.5]).collect();
        let y: Vec<usize> = (0..90).map(|i| i / 30).collect();
        let f = RandomForest::fit(&x, &y, &ForestConfig::default(), 1).unwrap();
        assert_eq!(f.predict(&[0.1, 0.5]), 0);
        assert_eq!(f.predict(&[1.1, 0.5]), 1);
        assert_eq!(f.predict(&[2.2, 0.5]), 2);
    }
}
