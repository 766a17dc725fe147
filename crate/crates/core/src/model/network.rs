//! Parameters, forward pass and reverse-mode gradients of the small networks.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::clm::{clm_backward, clm_forward, ClmParams};
use crate::error::{Error, Result};
use crate::losses::{softmax, softmax_backward};

/// Fully connected layer, `out = W·x + b` with `W` stored row-major (`outputs × inputs`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Dense {
    fn random<R: Rng>(inputs: usize, outputs: usize, rng: &mut R) -> Self {
        let normal = Normal::new(0.0, 1.0 / (inputs.max(1) as f64).sqrt())
            .expect("finite positive standard deviation");
        Self {
            inputs,
            outputs,
            weights: (0..inputs * outputs).map(|_| normal.sample(rng)).collect(),
            bias: vec![0.0; outputs],
        }
    }

    fn zeros_like(&self) -> Self {
        Self {
            inputs: self.inputs,
            outputs: self.outputs,
            weights: vec![0.0; self.weights.len()],
            bias: vec![0.0; self.bias.len()],
        }
    }

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.weights
            .chunks_exact(self.inputs)
            .zip(&self.bias)
            .map(|(row, b)| dot(row, x) + b)
            .collect()
    }

    /// Accumulates parameter gradients into `acc` and returns `∂L/∂x`.
    fn backward(&self, x: &[f64], grad_out: &[f64], acc: &mut Dense) -> Vec<f64> {
        let mut grad_in = vec![0.0; self.inputs];
        for (o, &g) in grad_out.iter().enumerate() {
            if g == 0.0 {
                continue;
            }
            let row = &self.weights[o * self.inputs..(o + 1) * self.inputs];
            let acc_row = &mut acc.weights[o * self.inputs..(o + 1) * self.inputs];
            for i in 0..self.inputs {
                acc_row[i] += g * x[i];
                grad_in[i] += g * row[i];
            }
            acc.bias[o] += g;
        }
        grad_in
    }
}

/// Output layer parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum HeadParams {
    Softmax(Dense),
    /// Scalar projection `f = w·h` followed by ordered thresholds.
    Clm {
        projection: Vec<f64>,
        thresholds: ClmParams,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Network {
    /// Optional `tanh` hidden layer.
    pub hidden: Option<Dense>,
    pub head: HeadParams,
}

/// Intermediate values kept for the backward pass.
#[derive(Debug, Clone)]
pub struct Activations {
    pub hidden: Option<Vec<f64>>,
    pub latent: f64,
    pub probs: Vec<f64>,
}

impl Network {
    pub(crate) fn random<R: Rng>(
        inputs: usize,
        hidden_width: Option<usize>,
        classes: usize,
        clm: Option<ClmParams>,
        rng: &mut R,
    ) -> Self {
        let hidden = hidden_width.map(|w| Dense::random(inputs, w, rng));
        let width = hidden_width.unwrap_or(inputs);
        let head = match clm {
            None => HeadParams::Softmax(Dense::random(width, classes, rng)),
            Some(thresholds) => {
                let normal = Normal::new(0.0, 1.0 / (width.max(1) as f64).sqrt())
                    .expect("finite positive standard deviation");
                HeadParams::Clm {
                    projection: (0..width).map(|_| normal.sample(rng)).collect(),
                    thresholds,
                }
            }
        };
        Self { hidden, head }
    }

    pub fn inputs(&self) -> usize {
        match (&self.hidden, &self.head) {
            (Some(h), _) => h.inputs,
            (None, HeadParams::Softmax(d)) => d.inputs,
            (None, HeadParams::Clm { projection, .. }) => projection.len(),
        }
    }

    pub(crate) fn zeros_like(&self) -> Self {
        Self {
            hidden: self.hidden.as_ref().map(Dense::zeros_like),
            head: match &self.head {
                HeadParams::Softmax(d) => HeadParams::Softmax(d.zeros_like()),
                HeadParams::Clm {
                    projection,
                    thresholds,
                } => HeadParams::Clm {
                    projection: vec![0.0; projection.len()],
                    thresholds: ClmParams {
                        b1: 0.0,
                        deltas: vec![0.0; thresholds.deltas.len()],
                        ..thresholds.clone()
                    },
                },
            },
        }
    }

    fn slices_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = Vec::new();
        if let Some(h) = &mut self.hidden {
            out.push(&mut h.weights);
            out.push(&mut h.bias);
        }
        match &mut self.head {
            HeadParams::Softmax(d) => {
                out.push(&mut d.weights);
                out.push(&mut d.bias);
            }
            HeadParams::Clm {
                projection,
                thresholds,
            } => {
                out.push(projection);
                out.push(std::slice::from_mut(&mut thresholds.b1));
                out.push(&mut thresholds.deltas);
            }
        }
        out
    }

    /// Flattened parameters, in a fixed order.
    pub fn parameters(&self) -> Vec<f64> {
        let mut copy = self.clone();
        copy.slices_mut()
            .into_iter()
            .flat_map(|s| s.to_vec())
            .collect()
    }

    /// `self += scale · other` over all trainable parameters.
    pub(crate) fn add_scaled(&mut self, scale: f64, other: &Network) {
        let mut other = other.clone();
        for (dst, src) in self.slices_mut().into_iter().zip(other.slices_mut()) {
            for (d, s) in dst.iter_mut().zip(src.iter()) {
                *d += scale * s;
            }
        }
    }

    pub(crate) fn reset(&mut self) {
        for s in self.slices_mut() {
            s.fill(0.0);
        }
    }

    pub fn is_finite(&self) -> bool {
        self.parameters().iter().all(|p| p.is_finite())
    }

    pub fn forward(&self, x: &[f64]) -> Result<Activations> {
        if x.len() != self.inputs() {
            return Err(Error::DimensionMismatch {
                expected: self.inputs(),
                actual: x.len(),
            });
        }
        let hidden = self
            .hidden
            .as_ref()
            .map(|h| h.apply(x).into_iter().map(f64::tanh).collect::<Vec<_>>());
        let features = hidden.as_deref().unwrap_or(x);
        let (latent, probs) = match &self.head {
            HeadParams::Softmax(d) => (0.0, softmax(&d.apply(features))),
            HeadParams::Clm {
                projection,
                thresholds,
            } => {
                let f = dot(projection, features);
                (f, clm_forward(f, thresholds)?.probs.into_inner())
            }
        };
        Ok(Activations {
            hidden,
            latent,
            probs,
        })
    }

    /// Adds the gradient of a loss with `∂L/∂probs = grad_probs` to `acc`.
    pub fn backward(
        &self,
        x: &[f64],
        act: &Activations,
        grad_probs: &[f64],
        acc: &mut Network,
    ) -> Result<()> {
        let features = act.hidden.as_deref().unwrap_or(x);
        let grad_features = match (&self.head, &mut acc.head) {
            (HeadParams::Softmax(d), HeadParams::Softmax(acc_d)) => {
                let gz = softmax_backward(&act.probs, grad_probs);
                d.backward(features, &gz, acc_d)
            }
            (
                HeadParams::Clm {
                    projection,
                    thresholds,
                },
                HeadParams::Clm {
                    projection: acc_w,
                    thresholds: acc_t,
                },
            ) => {
                let g = clm_backward(act.latent, thresholds, grad_probs)?;
                acc_t.b1 += g.db1;
                for (a, d) in acc_t.deltas.iter_mut().zip(&g.ddeltas) {
                    *a += d;
                }
                for (a, h) in acc_w.iter_mut().zip(features) {
                    *a += g.df * h;
                }
                projection.iter().map(|w| g.df * w).collect()
            }
            _ => unreachable!("accumulator built with zeros_like"),
        };
        if let (Some(h), Some(acc_h), Some(out)) = (&self.hidden, &mut acc.hidden, &act.hidden) {
            let pre: Vec<f64> = grad_features
                .iter()
                .zip(out)
                .map(|(g, t)| g * (1.0 - t * t))
                .collect();
            h.backward(x, &pre, acc_h);
        }
        Ok(())
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
