//! Shared ordinal-domain types.
//!
//! Labels are stored 0-based: class `C_1` is index 0 and `C_J` is index `J - 1`.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Tolerance used when checking that a probability vector sums to one.
pub const SUM_TOLERANCE: f64 = 1e-9;

/// A class rank in `0..J`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct OrdinalLabel(pub usize);

impl OrdinalLabel {
    pub fn new(index: usize, classes: usize) -> Result<Self> {
        if index >= classes {
            return Err(Error::LabelOutOfRange {
                label: index,
                classes,
            });
        }
        Ok(Self(index))
    }

    #[inline]
    pub fn index(self) -> usize {
        self.0
    }

    /// Ordinal distance `|O(a) - O(b)|`.
    #[inline]
    pub fn distance(self, other: OrdinalLabel) -> usize {
        self.0.abs_diff(other.0)
    }
}

impl From<usize> for OrdinalLabel {
    fn from(value: usize) -> Self {
        Self(value)
    }
}

/// A distribution over `J` ordered classes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbabilityVector(Vec<f64>);

impl ProbabilityVector {
    /// Validates nonnegativity and unit sum (within [`SUM_TOLERANCE`]).
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::Empty("probability vector"));
        }
        if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(invalid("probs", "entries must be finite and nonnegative"));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > SUM_TOLERANCE {
            return Err(invalid("probs", format!("entries sum to {sum}, not 1")));
        }
        Ok(Self(probs))
    }

    /// Rescales nonnegative weights so they sum to one.
    pub fn from_weights(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::Empty("probability vector"));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(invalid("weights", "entries must be finite and nonnegative"));
        }
        let sum: f64 = weights.iter().sum();
        if sum <= 0.0 {
            return Err(invalid("weights", "total mass is zero"));
        }
        Ok(Self(weights.into_iter().map(|w| w / sum).collect()))
    }

    /// Point mass at `label`.
    pub fn one_hot(label: OrdinalLabel, classes: usize) -> Result<Self> {
        let label = OrdinalLabel::new(label.0, classes)?;
        let mut v = vec![0.0; classes];
        v[label.0] = 1.0;
        Ok(Self(v))
    }

    pub fn uniform(classes: usize) -> Result<Self> {
        if classes == 0 {
            return Err(Error::Empty("probability vector"));
        }
        Ok(Self(vec![1.0 / classes as f64; classes]))
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.0.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    #[inline]
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    /// Most probable class; ties go to the lowest index.
    pub fn argmax(&self) -> OrdinalLabel {
        OrdinalLabel(argmax_index(&self.0).expect("probability vectors are nonempty"))
    }
}

impl std::ops::Index<usize> for ProbabilityVector {
    type Output = f64;

    fn index(&self, index: usize) -> &f64 {
        &self.0[index]
    }
}

/// Index of the largest entry, lowest index on ties.
pub fn argmax_index(values: &[f64]) -> Result<usize> {
    let (first, rest) = values
        .split_first()
        .ok_or(Error::Empty("argmax over empty vector"))?;
    let mut best = 0;
    let mut best_value = *first;
    for (i, &v) in rest.iter().enumerate() {
        if v > best_value {
            best = i + 1;
            best_value = v;
        }
    }
    Ok(best)
}

/// Class with the highest probability (lowest index on ties).
pub fn argmax_label(p: &ProbabilityVector) -> OrdinalLabel {
    p.argmax()
}

/// `counts[i][j]` is the number of samples of true class `i` predicted as `j`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    classes: usize,
    counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn zeros(classes: usize) -> Self {
        Self {
            classes,
            counts: vec![0; classes * classes],
        }
    }

    /// Builds a matrix from row-major nested counts.
    pub fn from_rows(rows: &[Vec<u64>]) -> Result<Self> {
        let classes = rows.len();
        if classes == 0 {
            return Err(Error::Empty("confusion matrix"));
        }
        let mut counts = Vec::with_capacity(classes * classes);
        for row in rows {
            if row.len() != classes {
                return Err(Error::LengthMismatch {
                    expected: classes,
                    actual: row.len(),
                });
            }
            counts.extend_from_slice(row);
        }
        Ok(Self { classes, counts })
    }

    #[inline]
    pub fn classes(&self) -> usize {
        self.classes
    }

    #[inline]
    pub fn get(&self, truth: usize, predicted: usize) -> u64 {
        self.counts[truth * self.classes + predicted]
    }

    #[inline]
    fn add(&mut self, truth: usize, predicted: usize) {
        self.counts[truth * self.classes + predicted] += 1;
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// `O_{i•}`.
    pub fn row_sums(&self) -> Vec<u64> {
        self.counts
            .chunks(self.classes)
            .map(|row| row.iter().sum())
            .collect()
    }

    /// `O_{•j}`.
    pub fn col_sums(&self) -> Vec<u64> {
        let mut sums = vec![0; self.classes];
        for row in self.counts.chunks(self.classes) {
            for (s, c) in sums.iter_mut().zip(row) {
                *s += c;
            }
        }
        sums
    }

    pub fn trace(&self) -> u64 {
        (0..self.classes).map(|i| self.get(i, i)).sum()
    }

    pub fn rows(&self) -> Vec<Vec<u64>> {
        self.counts
            .chunks(self.classes)
            .map(<[u64]>::to_vec)
            .collect()
    }
}

/// Counts (true, predicted) pairs into a `classes × classes` matrix.
pub fn confusion_matrix(
    y_true: &[OrdinalLabel],
    y_pred: &[OrdinalLabel],
    classes: usize,
) -> Result<ConfusionMatrix> {
    if y_true.len() != y_pred.len() {
        return Err(Error::LengthMismatch {
            expected: y_true.len(),
            actual: y_pred.len(),
        });
    }
    if y_true.is_empty() {
        return Err(Error::Empty("label lists"));
    }
    let mut matrix = ConfusionMatrix::zeros(classes);
    for (&t, &p) in y_true.iter().zip(y_pred) {
        for label in [t, p] {
            if label.0 >= classes {
                return Err(Error::LabelOutOfRange {
                    label: label.0,
                    classes,
                });
            }
        }
        matrix.add(t.0, p.0);
    }
    Ok(matrix)
}

/// Converts raw indices into labels.
pub fn labels(indices: &[usize]) -> Vec<OrdinalLabel> {
    indices.iter().copied().map(OrdinalLabel).collect()
}
