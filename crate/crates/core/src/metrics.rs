//! Ordinal and nominal evaluation metrics.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::types::{confusion_matrix, ConfusionMatrix, OrdinalLabel};

/// Denominator of the chance-agreement matrix `E_ij = O_i• O_•j / D`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExpectedNormalization {
    /// `D = N`, the number of samples (Cohen's kappa).
    #[default]
    SampleTotal,
    /// `D = J`, the number of classes. Kept for auditing the alternative form.
    ClassCount,
}

/// `ω_ij = |i - j|^n / (J - 1)^n`.
#[derive(Debug, Clone, PartialEq)]
pub struct PenaltyMatrix {
    classes: usize,
    n_exponent: u32,
    omega: Vec<f64>,
}

impl PenaltyMatrix {
    pub fn new(classes: usize, n_exponent: u32) -> Result<Self> {
        if classes < 2 {
            return Err(invalid("classes", "penalties need at least two classes"));
        }
        if n_exponent == 0 {
            return Err(invalid("n_exponent", "must be at least 1"));
        }
        let scale = ((classes - 1) as f64).powi(n_exponent as i32);
        let mut omega = Vec::with_capacity(classes * classes);
        for i in 0..classes {
            for j in 0..classes {
                omega.push((i.abs_diff(j) as f64).powi(n_exponent as i32) / scale);
            }
        }
        Ok(Self {
            classes,
            n_exponent,
            omega,
        })
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.omega[i * self.classes + j]
    }

    pub fn n_exponent(&self) -> u32 {
        self.n_exponent
    }
}

/// Weighted kappa with `E_ij = O_i• O_•j / N`.
pub fn qwk(matrix: &ConfusionMatrix, n_exponent: u32) -> Result<f64> {
    qwk_with(matrix, n_exponent, ExpectedNormalization::SampleTotal)
}

/// Weighted kappa with an explicit chance-matrix normalisation.
pub fn qwk_with(
    matrix: &ConfusionMatrix,
    n_exponent: u32,
    normalization: ExpectedNormalization,
) -> Result<f64> {
    let classes = matrix.classes();
    let total = matrix.total();
    if total == 0 {
        return Err(Error::Empty("confusion matrix"));
    }
    let penalty = PenaltyMatrix::new(classes, n_exponent)?;
    let rows = matrix.row_sums();
    let cols = matrix.col_sums();
    let denom = match normalization {
        ExpectedNormalization::SampleTotal => total as f64,
        ExpectedNormalization::ClassCount => classes as f64,
    };
    let mut observed = 0.0;
    let mut expected = 0.0;
    for (i, &row) in rows.iter().enumerate() {
        for (j, &col) in cols.iter().enumerate() {
            let w = penalty.get(i, j);
            observed += w * matrix.get(i, j) as f64;
            expected += w * (row as f64 * col as f64) / denom;
        }
    }
    if expected == 0.0 {
        return Err(Error::DegenerateAgreement);
    }
    Ok(1.0 - observed / expected)
}

/// Average of per-class mean absolute errors over the classes present in `y_true`.
pub fn amae(y_true: &[OrdinalLabel], y_pred: &[OrdinalLabel]) -> Result<f64> {
    if y_true.len() != y_pred.len() {
        return Err(Error::LengthMismatch {
            expected: y_true.len(),
            actual: y_pred.len(),
        });
    }
    if y_true.is_empty() {
        return Err(Error::Empty("label lists"));
    }
    let mut per_class: BTreeMap<usize, (f64, usize)> = BTreeMap::new();
    for (t, p) in y_true.iter().zip(y_pred) {
        let e = per_class.entry(t.0).or_insert((0.0, 0));
        e.0 += t.distance(*p) as f64;
        e.1 += 1;
    }
    let max_class = y_true.iter().chain(y_pred).map(|l| l.0).max().unwrap_or(0);
    if per_class.len() < max_class + 1 {
        log::warn!(
            "AMAE averaged over {} of {} classes; absent classes skipped",
            per_class.len(),
            max_class + 1
        );
    }
    let sum: f64 = per_class.values().map(|(err, n)| err / *n as f64).sum();
    Ok(sum / per_class.len() as f64)
}

/// `trace(O) / N`.
pub fn accuracy(matrix: &ConfusionMatrix) -> Result<f64> {
    let total = matrix.total();
    if total == 0 {
        return Err(Error::Empty("confusion matrix"));
    }
    Ok(matrix.trace() as f64 / total as f64)
}

/// `O_qq / O_q•`; `None` for classes without support.
pub fn per_class_sensitivity(matrix: &ConfusionMatrix) -> Vec<Option<f64>> {
    matrix
        .row_sums()
        .into_iter()
        .enumerate()
        .map(|(q, n)| (n > 0).then(|| matrix.get(q, q) as f64 / n as f64))
        .collect()
}

/// Mean absolute error of the samples whose true class is `q`; `None` without support.
pub fn per_class_mae(
    y_true: &[OrdinalLabel],
    y_pred: &[OrdinalLabel],
    classes: usize,
) -> Result<Vec<Option<f64>>> {
    if y_true.len() != y_pred.len() {
        return Err(Error::LengthMismatch {
            expected: y_true.len(),
            actual: y_pred.len(),
        });
    }
    let mut sums = vec![(0.0, 0usize); classes];
    for (t, p) in y_true.iter().zip(y_pred) {
        let slot = sums.get_mut(t.0).ok_or(Error::LabelOutOfRange {
            label: t.0,
            classes,
        })?;
        slot.0 += t.distance(*p) as f64;
        slot.1 += 1;
    }
    Ok(sums
        .into_iter()
        .map(|(err, n)| (n > 0).then(|| err / n as f64))
        .collect())
}

/// Imbalance ratio: `(1/Q) Σ_q Σ_{i≠q} N_i / ((Q - 1) N_q)`. Equals 1 when balanced.
pub fn imbalance_ratio(counts: &[usize]) -> Result<f64> {
    let q = counts.len();
    if q < 2 {
        return Err(invalid("counts", "need at least two classes"));
    }
    if let Some(class) = counts.iter().position(|&c| c == 0) {
        return Err(Error::ClassTooSmall {
            class,
            count: 0,
            needed: 1,
        });
    }
    let total: usize = counts.iter().sum();
    let sum: f64 = counts
        .iter()
        .map(|&n| (total - n) as f64 / ((q - 1) as f64 * n as f64))
        .sum();
    Ok(sum / q as f64)
}

/// Scores for one prediction set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub qwk: f64,
    pub amae: f64,
    pub accuracy: f64,
    pub sens: Vec<Option<f64>>,
    pub mae_per_class: Vec<Option<f64>>,
}

/// Options for [`evaluate`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MetricOptions {
    pub qwk_exponent: u32,
    pub normalization: ExpectedNormalization,
}

impl Default for MetricOptions {
    fn default() -> Self {
        Self {
            qwk_exponent: 2,
            normalization: ExpectedNormalization::SampleTotal,
        }
    }
}

pub fn evaluate(
    y_true: &[OrdinalLabel],
    y_pred: &[OrdinalLabel],
    classes: usize,
    options: MetricOptions,
) -> Result<MetricReport> {
    let matrix = confusion_matrix(y_true, y_pred, classes)?;
    Ok(MetricReport {
        qwk: qwk_with(&matrix, options.qwk_exponent, options.normalization)?,
        amae: amae(y_true, y_pred)?,
        accuracy: accuracy(&matrix)?,
        sens: per_class_sensitivity(&matrix),
        mae_per_class: per_class_mae(y_true, y_pred, classes)?,
    })
}
