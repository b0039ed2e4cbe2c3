//! Classification as multi-output regression.

use alloc::vec::Vec;

use crate::error::{NngpError, Result};
use crate::gp::PosteriorPredictive;
use crate::matrix::Matrix;

pub const POSITIVE: f64 = 0.9;
pub const NEGATIVE: f64 = -0.1;

#[derive(Debug, Clone, PartialEq)]
pub struct ClassTargets {
    labels: Vec<usize>,
    encoded: Matrix,
}

impl ClassTargets {
    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    /// `N x C`.
    pub fn encoded(&self) -> &Matrix {
        &self.encoded
    }

    pub fn num_classes(&self) -> usize {
        self.encoded.cols()
    }

    pub fn into_encoded(self) -> Matrix {
        self.encoded
    }
}

/// Rows of 0.9 at the label index and -0.1 elsewhere.
pub fn encode_labels(labels: &[usize], num_classes: usize) -> Result<ClassTargets> {
    if num_classes == 0 {
        return Err(NngpError::InvalidParams("need at least one class".into()));
    }
    let mut encoded = Matrix::zeros(labels.len(), num_classes);
    for (i, &l) in labels.iter().enumerate() {
        if l >= num_classes {
            return Err(NngpError::LabelOutOfRange {
                label: l,
                classes: num_classes,
            });
        }
        let row = encoded.row_mut(i);
        row.fill(NEGATIVE);
        row[l] = POSITIVE;
    }
    Ok(ClassTargets {
        labels: labels.to_vec(),
        encoded,
    })
}

/// Argmax with ties going to the lowest index. Empty input decodes to 0.
pub fn decode_prediction(mean: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in mean.iter().enumerate().skip(1) {
        if v > mean[best] {
            best = i;
        }
    }
    best
}

/// Fraction of positions where the two label vectors agree.
pub fn accuracy(predicted: &[usize], truth: &[usize]) -> Result<f64> {
    if predicted.len() != truth.len() {
        return Err(NngpError::DimensionMismatch {
            expected: truth.len(),
            found: predicted.len(),
        });
    }
    if truth.is_empty() {
        return Err(NngpError::EmptyDataset);
    }
    let hits = predicted.iter().zip(truth).filter(|(a, b)| a == b).count();
    Ok(hits as f64 / truth.len() as f64)
}

pub fn mean_predictive_variance(preds: &[PosteriorPredictive]) -> Result<f64> {
    if preds.is_empty() {
        return Err(NngpError::EmptyDataset);
    }
    Ok(preds.iter().map(|p| p.variance).sum::<f64>() / preds.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn encode_examples() {
        let t = encode_labels(&[2], 4).unwrap();
        assert_eq!(t.encoded().row(0), &[-0.1, -0.1, 0.9, -0.1]);
        let t = encode_labels(&[0], 1).unwrap();
        assert_eq!(t.encoded().row(0), &[0.9]);
        assert!(matches!(
            encode_labels(&[3], 3),
            Err(NngpError::LabelOutOfRange {
                label: 3,
                classes: 3
            })
        ));
    }

    #[test]
    fn round_trip() {
        let labels: Vec<usize> = (0..10).collect();
        let t = encode_labels(&labels, 10).unwrap();
        for (i, &l) in labels.iter().enumerate() {
            assert_eq!(decode_prediction(t.encoded().row(i)), l);
        }
    }

    #[test]
    fn decode_examples() {
        assert_eq!(decode_prediction(&[0.1, 0.8, -0.1]), 1);
        assert_eq!(decode_prediction(&[0.5, 0.5]), 0);
    }

    #[test]
    fn accuracy_examples() {
        assert_eq!(accuracy(&[1, 2, 3], &[1, 2, 3]).unwrap(), 1.0);
        assert_eq!(accuracy(&[0, 0], &[1, 1]).unwrap(), 0.0);
        let p = vec![0, 1, 0, 1, 0, 1, 0, 1, 0, 1];
        assert_eq!(accuracy(&p, &[0; 10]).unwrap(), 0.5);
    }

    #[test]
    fn mean_variance_examples() {
        let pp = |v| PosteriorPredictive {
            mean: vec![0.0],
            variance: v,
        };
        assert_eq!(
            mean_predictive_variance(&[pp(2.0), pp(2.0), pp(2.0)]).unwrap(),
            2.0
        );
        assert_eq!(mean_predictive_variance(&[pp(1.0), pp(3.0)]).unwrap(), 2.0);
        assert!(mean_predictive_variance(&[]).is_err());
    }
}
