//! Trainable classifiers: a linear or one-hidden-layer backbone over numeric
//! features, topped by a softmax or cumulative link head, fitted with plain
//! mini-batch SGD.

mod network;
pub mod tune;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::clm::{ClmParams, Link};
use crate::data::FeatureMatrix;
use crate::error::{invalid, Error, Result};
use crate::losses::LossKind;
use crate::types::{argmax_index, OrdinalLabel, ProbabilityVector};

pub use network::{Activations, Dense, HeadParams, Network};
pub use tune::{tune, Method, SearchSpace, TrainSettings, TuneOutcome};

pub const DEFAULT_EPOCHS: usize = 200;
pub const DEFAULT_BATCH_SIZE: usize = 32;
pub const DEFAULT_LEARNING_RATE: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Backbone {
    #[default]
    Linear,
    OneHidden {
        width: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Head {
    #[default]
    Softmax,
    Clm {
        link: Link,
        d_min: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub backbone: Backbone,
    pub head: Head,
    pub loss: LossKind,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            backbone: Backbone::Linear,
            head: Head::Softmax,
            loss: LossKind::Cce,
            learning_rate: DEFAULT_LEARNING_RATE,
            epochs: DEFAULT_EPOCHS,
            batch_size: DEFAULT_BATCH_SIZE,
            seed: 0,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(invalid("epochs", "must be at least 1"));
        }
        if self.batch_size == 0 {
            return Err(invalid("batch_size", "must be at least 1"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(invalid(
                "learning_rate",
                format!("{} must be positive", self.learning_rate),
            ));
        }
        if let Backbone::OneHidden { width: 0 } = self.backbone {
            return Err(invalid("width", "hidden layer needs at least one unit"));
        }
        Ok(())
    }
}

/// Per-feature z-scoring fitted on the training rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub means: Vec<f64>,
    pub scales: Vec<f64>,
}

impl Standardizer {
    pub fn fit(x: &FeatureMatrix) -> Self {
        let n = x.rows() as f64;
        let mut means = vec![0.0; x.cols()];
        for i in 0..x.rows() {
            for (m, v) in means.iter_mut().zip(x.row(i)) {
                *m += v / n;
            }
        }
        let mut vars = vec![0.0; x.cols()];
        for i in 0..x.rows() {
            for ((s, v), m) in vars.iter_mut().zip(x.row(i)).zip(&means) {
                *s += (v - m).powi(2) / n;
            }
        }
        let scales = vars
            .into_iter()
            .map(|v| if v > 1e-24 { v.sqrt() } else { 1.0 })
            .collect();
        Self { means, scales }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(&self.means)
            .zip(&self.scales)
            .map(|((v, m), s)| (v - m) / s)
            .collect()
    }
}

/// Per-epoch mean training loss.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingLog {
    pub raw: Vec<f64>,
    /// Running minimum of `raw`.
    pub smoothed: Vec<f64>,
}

impl TrainingLog {
    fn push(&mut self, loss: f64) {
        let best = self.smoothed.last().map_or(loss, |b| b.min(loss));
        self.raw.push(loss);
        self.smoothed.push(best);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub config: ModelConfig,
    pub classes: usize,
    pub standardizer: Standardizer,
    pub network: Network,
    pub training_log: TrainingLog,
}

fn check_training_data(x: &FeatureMatrix, y: &[OrdinalLabel], classes: usize) -> Result<()> {
    if x.rows() == 0 {
        return Err(Error::Empty("training data"));
    }
    if x.rows() != y.len() {
        return Err(Error::LengthMismatch {
            expected: x.rows(),
            actual: y.len(),
        });
    }
    if classes < 2 {
        return Err(invalid("classes", "need at least two classes"));
    }
    if let Some(l) = y.iter().find(|l| l.0 >= classes) {
        return Err(Error::LabelOutOfRange {
            label: l.0,
            classes,
        });
    }
    Ok(())
}

/// Fits a model with mini-batch SGD. The same config, data and seed always
/// give bit-identical parameters.
pub fn train(
    config: &ModelConfig,
    x: &FeatureMatrix,
    y: &[OrdinalLabel],
    classes: usize,
) -> Result<TrainedModel> {
    config.validate()?;
    check_training_data(x, y, classes)?;
    let loss = config.loss.prepare(classes)?;
    let standardizer = Standardizer::fit(x);
    let inputs: Vec<Vec<f64>> = (0..x.rows())
        .map(|i| standardizer.apply(x.row(i)))
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let hidden = match config.backbone {
        Backbone::Linear => None,
        Backbone::OneHidden { width } => Some(width),
    };
    let clm = match config.head {
        Head::Softmax => None,
        Head::Clm { link, d_min } => Some(ClmParams::initial(classes, link, d_min)?),
    };
    let mut network = Network::random(x.cols(), hidden, classes, clm, &mut rng);
    let mut grad = network.zeros_like();
    let mut order: Vec<usize> = (0..x.rows()).collect();
    let mut log = TrainingLog {
        raw: Vec::with_capacity(config.epochs),
        smoothed: Vec::with_capacity(config.epochs),
    };

    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(config.batch_size) {
            grad.reset();
            for &i in batch {
                let act = network.forward(&inputs[i])?;
                let lv = loss.evaluate(&act.probs, y[i])?;
                epoch_loss += lv.value;
                network.backward(&inputs[i], &act, &lv.grad, &mut grad)?;
            }
            network.add_scaled(-config.learning_rate / batch.len() as f64, &grad);
            if !network.is_finite() {
                return Err(Error::NonFiniteLoss { epoch });
            }
        }
        let mean = epoch_loss / x.rows() as f64;
        if !mean.is_finite() {
            return Err(Error::NonFiniteLoss { epoch });
        }
        log.push(mean);
    }
    log::debug!(
        "trained {:?}/{:?} for {} epochs, final loss {:.5}",
        config.backbone,
        config.head,
        config.epochs,
        log.raw.last().copied().unwrap_or(f64::NAN)
    );
    Ok(TrainedModel {
        config: config.clone(),
        classes,
        standardizer,
        network,
        training_log: log,
    })
}

impl TrainedModel {
    pub fn inputs(&self) -> usize {
        self.network.inputs()
    }

    pub fn predict_proba(&self, x: &[f64]) -> Result<ProbabilityVector> {
        if x.len() != self.inputs() {
            return Err(Error::DimensionMismatch {
                expected: self.inputs(),
                actual: x.len(),
            });
        }
        let act = self.network.forward(&self.standardizer.apply(x))?;
        ProbabilityVector::from_weights(act.probs)
    }

    pub fn predict(&self, x: &[f64]) -> Result<OrdinalLabel> {
        Ok(self.predict_proba(x)?.argmax())
    }

    pub fn predict_proba_all(&self, x: &FeatureMatrix) -> Result<Vec<ProbabilityVector>> {
        (0..x.rows())
            .map(|i| self.predict_proba(x.row(i)))
            .collect()
    }

    pub fn predict_all(&self, x: &FeatureMatrix) -> Result<Vec<OrdinalLabel>> {
        (0..x.rows())
            .map(|i| {
                Ok(OrdinalLabel(argmax_index(
                    self.predict_proba(x.row(i))?.as_slice(),
                )?))
            })
            .collect()
    }

    /// Mean loss of the configured objective on `(x, y)`.
    pub fn mean_loss(&self, x: &FeatureMatrix, y: &[OrdinalLabel]) -> Result<f64> {
        check_training_data(x, y, self.classes)?;
        let loss = self.config.loss.prepare(self.classes)?;
        let mut total = 0.0;
        for (i, &label) in y.iter().enumerate() {
            let act = self.network.forward(&self.standardizer.apply(x.row(i)))?;
            total += loss.evaluate(&act.probs, label)?.value;
        }
        Ok(total / y.len() as f64)
    }
}
