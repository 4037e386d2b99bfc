use ndarray::Array2;

use crate::error::{Error, Result};
use crate::graph::Target;
use crate::model::forward::Prediction;
use crate::model::params::Task;

/// Loss value and its gradient with respect to the prediction.
#[derive(Debug, Clone, PartialEq)]
pub struct LossGrad {
    pub value: f64,
    pub d_pred: Prediction,
}

/// Absolute error for graph regression; mean cross-entropy over node tokens
/// for node classification.
pub fn loss(pred: &Prediction, target: &Target, task: Task) -> Result<LossGrad> {
    match (task, pred, target) {
        (Task::GraphRegression, Prediction::Scalar(p), Target::Scalar(t)) => {
            let diff = p - t;
            Ok(LossGrad {
                value: diff.abs(),
                d_pred: Prediction::Scalar(if diff > 0.0 {
                    1.0
                } else if diff < 0.0 {
                    -1.0
                } else {
                    0.0
                }),
            })
        }
        (
            Task::NodeClassification { classes },
            Prediction::Logits(z),
            Target::NodeLabels(labels),
        ) => {
            if z.nrows() != labels.len() || z.ncols() != classes {
                return Err(Error::Shape(format!(
                    "logits {:?} for {} labels and {classes} classes",
                    z.dim(),
                    labels.len()
                )));
            }
            if let Some(&label) = labels.iter().find(|&&l| l >= classes) {
                return Err(Error::LabelOutOfRange { label, classes });
            }
            let n = labels.len() as f64;
            let mut grad = Array2::zeros(z.dim());
            let mut total = 0.0;
            for ((row, mut g), &label) in z.rows().into_iter().zip(grad.rows_mut()).zip(labels) {
                let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let sum: f64 = row.iter().map(|v| (v - max).exp()).sum();
                let log_z = max + sum.ln();
                total += log_z - row[label];
                for (c, gv) in g.iter_mut().enumerate() {
                    *gv = (row[c] - log_z).exp() / n;
                }
                g[label] -= 1.0 / n;
            }
            Ok(LossGrad {
                value: total / n,
                d_pred: Prediction::Logits(grad),
            })
        }
        _ => Err(Error::Shape("prediction, target and task disagree".into())),
    }
}

/// Fraction of nodes whose arg-max logit equals the label.
pub fn accuracy(logits: &Array2<f64>, labels: &[usize]) -> f64 {
    let hits = logits
        .rows()
        .into_iter()
        .zip(labels)
        .filter(|(row, &label)| {
            let best = row
                .iter()
                .enumerate()
                .fold(
                    (0, f64::NEG_INFINITY),
                    |acc, (c, &v)| if v > acc.1 { (c, v) } else { acc },
                );
            best.0 == label
        })
        .count();
    hits as f64 / labels.len().max(1) as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn regression_examples() {
        let zero = loss(
            &Prediction::Scalar(0.3),
            &Target::Scalar(0.3),
            Task::GraphRegression,
        )
        .unwrap();
        assert_eq!(zero.value, 0.0);
        let one = loss(
            &Prediction::Scalar(0.0),
            &Target::Scalar(1.0),
            Task::GraphRegression,
        )
        .unwrap();
        assert_eq!(one.value, 1.0);
        assert_eq!(one.d_pred, Prediction::Scalar(-1.0));
    }

    #[test]
    fn uniform_logits_give_log_classes() {
        let task = Task::NodeClassification { classes: 5 };
        let out = loss(
            &Prediction::Logits(Array2::zeros((3, 5))),
            &Target::NodeLabels(vec![0, 4, 2]),
            task,
        )
        .unwrap();
        assert!((out.value - 5f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn labels_out_of_range_are_rejected() {
        let task = Task::NodeClassification { classes: 2 };
        let err = loss(
            &Prediction::Logits(Array2::zeros((2, 2))),
            &Target::NodeLabels(vec![0, 2]),
            task,
        );
        assert!(matches!(
            err,
            Err(Error::LabelOutOfRange {
                label: 2,
                classes: 2
            })
        ));
    }

    #[test]
    fn accuracy_counts_argmax() {
        let z = ndarray::array![[0.1, 0.9], [2.0, -1.0], [0.0, 0.5]];
        assert!((accuracy(&z, &[1, 0, 0]) - 2.0 / 3.0).abs() < 1e-15);
    }
}
