//! Decision-level fusion of per-view classifiers through a convex weight vector.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::metrics::amae;
use crate::model::TrainedModel;
use crate::types::{OrdinalLabel, ProbabilityVector, SUM_TOLERANCE};

/// Class probabilities of every view for one sample (`V × J`).
#[derive(Debug, Clone, PartialEq)]
pub struct ViewProbMatrix {
    rows: Vec<ProbabilityVector>,
}

impl ViewProbMatrix {
    pub fn new(rows: Vec<ProbabilityVector>) -> Result<Self> {
        let first = rows.first().ok_or(Error::Empty("view probabilities"))?;
        if let Some(bad) = rows.iter().find(|r| r.len() != first.len()) {
            return Err(Error::DimensionMismatch {
                expected: first.len(),
                actual: bad.len(),
            });
        }
        Ok(Self { rows })
    }

    pub fn views(&self) -> usize {
        self.rows.len()
    }

    pub fn classes(&self) -> usize {
        self.rows[0].len()
    }

    pub fn row(&self, view: usize) -> &ProbabilityVector {
        &self.rows[view]
    }
}

/// Nonnegative view weights summing to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightVector(Vec<f64>);

impl WeightVector {
    pub fn new(w: Vec<f64>) -> Result<Self> {
        if w.is_empty() {
            return Err(Error::Empty("weight vector"));
        }
        if w.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(invalid("weights", "entries must be finite and nonnegative"));
        }
        let sum: f64 = w.iter().sum();
        if (sum - 1.0).abs() > SUM_TOLERANCE {
            return Err(invalid("weights", format!("sum to {sum}, not 1")));
        }
        Ok(Self(w))
    }

    /// Normalises nonnegative raw weights onto the simplex.
    pub fn from_raw(raw: Vec<f64>) -> Result<Self> {
        let sum: f64 = raw.iter().sum();
        if !(sum > 0.0 && sum.is_finite()) {
            return Err(invalid("weights", "need a positive finite total"));
        }
        Self::new(raw.into_iter().map(|v| v / sum).collect())
    }

    pub fn one_hot(views: usize, view: usize) -> Result<Self> {
        if view >= views {
            return Err(invalid("view", format!("{view} out of {views} views")));
        }
        let mut w = vec![0.0; views];
        w[view] = 1.0;
        Self::new(w)
    }

    pub fn uniform(views: usize) -> Result<Self> {
        Self::from_raw(vec![1.0; views])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// `out[j] = Σ_i w[i]·P[i][j]`.
pub fn aggregate(p: &ViewProbMatrix, w: &WeightVector) -> Result<ProbabilityVector> {
    if p.views() != w.len() {
        return Err(Error::DimensionMismatch {
            expected: p.views(),
            actual: w.len(),
        });
    }
    let mut out = vec![0.0; p.classes()];
    for (row, &wi) in p.rows.iter().zip(w.as_slice()) {
        for (o, v) in out.iter_mut().zip(row.as_slice()) {
            *o += wi * v;
        }
    }
    ProbabilityVector::from_weights(out)
}

/// Default number of random candidates drawn by [`optimize_weights`].
pub const DEFAULT_CANDIDATES: usize = 1000;

#[derive(Debug, Clone, PartialEq)]
pub struct WeightSearch {
    pub weights: WeightVector,
    pub amae: f64,
    pub evaluated: usize,
}

fn ensemble_amae(probs: &[ViewProbMatrix], y: &[OrdinalLabel], w: &WeightVector) -> Result<f64> {
    let pred = probs
        .iter()
        .map(|p| Ok(aggregate(p, w)?.argmax()))
        .collect::<Result<Vec<_>>>()?;
    amae(y, &pred)
}

/// Random search for view weights minimising validation AMAE.
///
/// The `V` one-hot vectors and the uniform vector are scored first, followed
/// by `n_candidates` normalised uniform(0, 1) draws. Ties keep the earlier
/// candidate.
pub fn optimize_weights(
    probs: &[ViewProbMatrix],
    y: &[OrdinalLabel],
    n_candidates: usize,
    seed: u64,
) -> Result<WeightSearch> {
    if n_candidates == 0 {
        return Err(invalid("n_candidates", "must be at least 1"));
    }
    if probs.is_empty() || y.is_empty() {
        return Err(Error::Empty("validation set"));
    }
    if probs.len() != y.len() {
        return Err(Error::LengthMismatch {
            expected: probs.len(),
            actual: y.len(),
        });
    }
    let views = probs[0].views();
    if let Some(bad) = probs.iter().find(|p| p.views() != views) {
        return Err(Error::DimensionMismatch {
            expected: views,
            actual: bad.views(),
        });
    }

    let mut candidates = Vec::with_capacity(views + 1 + n_candidates);
    for v in 0..views {
        candidates.push(WeightVector::one_hot(views, v)?);
    }
    candidates.push(WeightVector::uniform(views)?);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..n_candidates {
        // Open interval keeps the total positive.
        let raw: Vec<f64> = (0..views)
            .map(|_| rng.random::<f64>().max(f64::MIN_POSITIVE))
            .collect();
        candidates.push(WeightVector::from_raw(raw)?);
    }

    let mut best: Option<(usize, f64)> = None;
    for (i, w) in candidates.iter().enumerate() {
        let score = ensemble_amae(probs, y, w)?;
        if best.is_none_or(|(_, b)| score < b) {
            best = Some((i, score));
        }
    }
    let (i, score) = best.expect("candidates are nonempty");
    Ok(WeightSearch {
        weights: candidates.swap_remove(i),
        amae: score,
        evaluated: views + 1 + n_candidates,
    })
}

/// Label chosen by the weighted ensemble for one sample.
pub fn ensemble_predict(
    models: &[&TrainedModel],
    sample: &[&[f64]],
    w: &WeightVector,
) -> Result<OrdinalLabel> {
    if models.len() != sample.len() {
        return Err(Error::MissingView(format!(
            "{} models but {} feature views",
            models.len(),
            sample.len()
        )));
    }
    let rows = models
        .iter()
        .zip(sample)
        .map(|(m, x)| m.predict_proba(x))
        .collect::<Result<Vec<_>>>()?;
    Ok(aggregate(&ViewProbMatrix::new(rows)?, w)?.argmax())
}
