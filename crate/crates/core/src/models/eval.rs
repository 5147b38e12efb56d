use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{HazardLabel, History, ModelError};

/// Accuracy, confusion matrix (rows true, columns predicted) and per-class
/// recall.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub accuracy: f64,
    pub total: usize,
    pub confusion: Vec<Vec<usize>>,
    /// `None` for classes absent from the test set.
    pub recall: Vec<Option<f64>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub history: Option<History>,
}

impl EvalReport {
    pub fn from_predictions(truth: &[usize], predicted: &[usize], classes: usize) -> Result<Self, ModelError> {
        if truth.is_empty() {
            return Err(ModelError::Empty("test set"));
        }
        if truth.len() != predicted.len() {
            return Err(ModelError::Config(format!(
                "{} labels, {} predictions",
                truth.len(),
                predicted.len()
            )));
        }
        let mut confusion = vec![vec![0usize; classes]; classes];
        for (&t, &p) in truth.iter().zip(predicted) {
            if t >= classes || p >= classes {
                return Err(ModelError::Config(format!("label {} outside {classes} classes", t.max(p))));
            }
            confusion[t][p] += 1;
        }
        let correct: usize = (0..classes).map(|c| confusion[c][c]).sum();
        let recall = confusion
            .iter()
            .enumerate()
            .map(|(c, row)| {
                let n: usize = row.iter().sum();
                (n > 0).then(|| row[c] as f64 / n as f64)
            })
            .collect();
        Ok(Self {
            accuracy: correct as f64 / truth.len() as f64,
            total: truth.len(),
            confusion,
            recall,
            history: None,
        })
    }

    pub fn trace(&self) -> usize {
        (0..self.confusion.len()).map(|c| self.confusion[c][c]).sum()
    }

    /// Plain-text confusion matrix with row and column labels.
    pub fn to_table(&self) -> String {
        let name = |c: usize| HazardLabel::from_index(c).map_or_else(|| format!("class_{c}"), |l| l.name().to_string());
        let names: Vec<String> = (0..self.confusion.len()).map(name).collect();
        let w = names.iter().map(String::len).max().unwrap_or(0).max(6);
        let mut s = String::new();
        let _ = write!(s, "{:w$}", "true\\pred");
        for n in &names {
            let _ = write!(s, "  {n:>w$}");
        }
        let _ = writeln!(s, "  {:>8}", "recall");
        for (i, row) in self.confusion.iter().enumerate() {
            let _ = write!(s, "{:w$}", names[i]);
            for v in row {
                let _ = write!(s, "  {v:>w$}");
            }
            match self.recall[i] {
                Some(r) => {
                    let _ = writeln!(s, "  {r:>8.4}");
                }
                None => {
                    let _ = writeln!(s, "  {:>8}", "-");
                }
            }
        }
        let _ = writeln!(s, "accuracy {:.4} ({} / {})", self.accuracy, self.trace(), self.total);
        s
    }
}

/// Score a predictor over labelled rows.
pub fn evaluate<X>(predict: impl Fn(&X) -> Result<usize, ModelError>, xs: &[X], truth: &[usize], classes: usize) -> Result<EvalReport, ModelError> {
    let predicted = xs.iter().map(predict).collect::<Result<Vec<_>, _>>()?;
    EvalReport::from_predictions(truth, &predicted, classes)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_and_constant_predictors() {
        let truth = [0, 1, 2, 0, 1, 2];
        let r = EvalReport::from_predictions(&truth, &truth, 3).unwrap();
        assert_eq!(r.accuracy, 1.0);
        assert_eq!(r.confusion, vec![vec![2, 0, 0], vec![0, 2, 0], vec![0, 0, 2]]);
        let r = EvalReport::from_predictions(&truth, &[1; 6], 3).unwrap();
        assert!((r.accuracy - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(r.recall, vec![Some(0.0), Some(1.0), Some(0.0)]);
        assert!(EvalReport::from_predictions(&[], &[], 3).is_err());
    }

    #[test]
    fn table_mentions_every_class() {
        let r = EvalReport::from_predictions(&[0, 2], &[0, 1], 3).unwrap();
        let t = r.to_table();
        for l in HazardLabel::ALL {
            assert!(t.contains(l.name()));
        }
        assert!(t.contains("accuracy 0.5000 (1 / 2)"));
    }
}
