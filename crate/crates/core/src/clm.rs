//! Cumulative link model output layer.
//!
//! A scalar projection `f` is compared against `J - 1` ordered thresholds
//! `b_0 < … < b_{J-2}`. The cumulative probabilities are
//! `P(y ≤ j) = F(b_j - f)` for an inverse link `F`, and class probabilities
//! are their successive differences.

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{invalid, Error, Result};
use crate::types::ProbabilityVector;

/// Gap added between consecutive thresholds when `d_min` is zero.
pub const THRESHOLD_EPSILON: f64 = 1e-6;

/// Bound on the inner exponent of the cloglog link.
pub const CLOGLOG_CLAMP: f64 = 30.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Link {
    #[default]
    Logit,
    Probit,
    Cloglog,
}

impl Link {
    pub const ALL: [Link; 3] = [Link::Logit, Link::Probit, Link::Cloglog];

    /// Inverse link `F(z)`.
    pub fn cdf(self, z: f64) -> f64 {
        match self {
            Link::Logit => sigmoid(z),
            Link::Probit => 0.5 * erfc(-z / std::f64::consts::SQRT_2),
            Link::Cloglog => {
                let z = z.clamp(-CLOGLOG_CLAMP, CLOGLOG_CLAMP);
                -(-z.exp()).exp_m1()
            }
        }
    }

    /// Derivative `F'(z)`.
    pub fn density(self, z: f64) -> f64 {
        match self {
            Link::Logit => {
                let s = sigmoid(z);
                s * (1.0 - s)
            }
            Link::Probit => {
                const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;
                INV_SQRT_2PI * (-0.5 * z * z).exp()
            }
            Link::Cloglog => {
                if z.abs() > CLOGLOG_CLAMP {
                    0.0
                } else {
                    (z - z.exp()).exp()
                }
            }
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Link::Logit => "logit",
            Link::Probit => "probit",
            Link::Cloglog => "cloglog",
        }
    }
}

impl std::str::FromStr for Link {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Link::ALL
            .into_iter()
            .find(|l| l.name() == s)
            .ok_or_else(|| invalid("link", format!("unknown link `{s}`")))
    }
}

#[inline]
fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Unconstrained threshold parameters.
///
/// Thresholds are `b_0 = b1` and `b_j = b_{j-1} + d_min + δ_{j-1}² (+ ε)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClmParams {
    pub b1: f64,
    pub deltas: Vec<f64>,
    pub link: Link,
    pub d_min: f64,
}

impl ClmParams {
    /// Evenly spaced starting thresholds for a `classes`-way problem.
    pub fn initial(classes: usize, link: Link, d_min: f64) -> Result<Self> {
        if classes < 2 {
            return Err(invalid("classes", "need at least two classes"));
        }
        if !(d_min >= 0.0 && d_min.is_finite()) {
            return Err(invalid("d_min", format!("{d_min} must be nonnegative")));
        }
        // Roughly unit spacing; increments stay away from the δ = 0 saddle.
        let spread = (1.0 - d_min).max(0.25).sqrt();
        Ok(Self {
            b1: -0.5 * (classes as f64 - 2.0),
            deltas: vec![spread; classes - 2],
            link,
            d_min,
        })
    }

    #[inline]
    pub fn classes(&self) -> usize {
        self.deltas.len() + 2
    }

    fn gap(&self) -> f64 {
        if self.d_min == 0.0 {
            THRESHOLD_EPSILON
        } else {
            self.d_min
        }
    }

    pub fn is_finite(&self) -> bool {
        self.b1.is_finite() && self.deltas.iter().all(|d| d.is_finite())
    }
}

/// Strictly increasing thresholds.
pub fn materialize_thresholds(params: &ClmParams) -> Vec<f64> {
    let gap = params.gap();
    let mut b = Vec::with_capacity(params.deltas.len() + 1);
    b.push(params.b1);
    for (j, d) in params.deltas.iter().enumerate() {
        b.push(b[j] + gap + d * d);
    }
    b
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClmOutput {
    /// `P(y ≤ j)` for `j = 0..J-1`.
    pub cumulative: Vec<f64>,
    pub probs: ProbabilityVector,
}

pub fn clm_forward(f: f64, params: &ClmParams) -> Result<ClmOutput> {
    if !f.is_finite() {
        return Err(invalid("f", "latent projection must be finite"));
    }
    let thresholds = materialize_thresholds(params);
    let cumulative: Vec<f64> = thresholds.iter().map(|b| params.link.cdf(b - f)).collect();
    let mut probs = Vec::with_capacity(cumulative.len() + 1);
    let mut prev = 0.0;
    for &c in &cumulative {
        probs.push((c - prev).max(0.0));
        prev = c;
    }
    probs.push((1.0 - prev).max(0.0));
    Ok(ClmOutput {
        cumulative,
        probs: ProbabilityVector::from_weights(probs)?,
    })
}

/// Gradients of a scalar objective with respect to the CLM inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct ClmGrad {
    pub df: f64,
    pub db1: f64,
    pub ddeltas: Vec<f64>,
}

/// Chains `upstream = ∂L/∂probs` back to `f`, `b1` and the increments.
pub fn clm_backward(f: f64, params: &ClmParams, upstream: &[f64]) -> Result<ClmGrad> {
    let classes = params.classes();
    if upstream.len() != classes {
        return Err(Error::LengthMismatch {
            expected: classes,
            actual: upstream.len(),
        });
    }
    if !f.is_finite() {
        return Err(invalid("f", "latent projection must be finite"));
    }
    let thresholds = materialize_thresholds(params);
    // probs_j = cum_j - cum_{j-1}, so ∂L/∂cum_j = g_j - g_{j+1}.
    let db: Vec<f64> = thresholds
        .iter()
        .enumerate()
        .map(|(j, b)| (upstream[j] - upstream[j + 1]) * params.link.density(b - f))
        .collect();
    let df = -db.iter().sum::<f64>();
    let db1 = db.iter().sum();
    let mut ddeltas = vec![0.0; params.deltas.len()];
    let mut tail = 0.0;
    for i in (0..params.deltas.len()).rev() {
        tail += db[i + 1];
        ddeltas[i] = 2.0 * params.deltas[i] * tail;
    }
    Ok(ClmGrad { df, db1, ddeltas })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::losses::relative_error;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn params(b1: f64, deltas: Vec<f64>, link: Link, d_min: f64) -> ClmParams {
        ClmParams {
            b1,
            deltas,
            link,
            d_min,
        }
    }

    #[test]
    fn thresholds_formula() {
        let b = materialize_thresholds(&params(0.0, vec![1.0, 1.0], Link::Logit, 0.5));
        assert_eq!(b, vec![0.0, 1.5, 3.0]);
        let b = materialize_thresholds(&params(0.3, vec![], Link::Logit, 0.0));
        assert_eq!(b, vec![0.3]);
        let b = materialize_thresholds(&params(0.0, vec![0.0, 0.0], Link::Logit, 0.0));
        assert!(b[1] > b[0] && b[2] > b[1]);
    }

    #[test]
    fn forward_reference_probabilities() {
        // thresholds (-1, 0, 1): d_min = 1, deltas = 0
        let p = params(-1.0, vec![0.0, 0.0], Link::Logit, 1.0);
        let out = clm_forward(0.0, &p).unwrap();
        let s = |z: f64| 1.0 / (1.0 + (-z).exp());
        let expected = [s(-1.0), 0.5 - s(-1.0), s(1.0) - 0.5, 1.0 - s(1.0)];
        for (a, b) in out.probs.as_slice().iter().zip(expected) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-15);
        }
        assert_abs_diff_eq!(out.probs[0], 0.2689, epsilon = 5e-5);
        assert_abs_diff_eq!(out.probs[1], 0.2311, epsilon = 5e-5);
    }

    #[test]
    fn forward_limits() {
        for link in Link::ALL {
            let p = params(-1.0, vec![0.5, 0.7], link, 0.5);
            let hi = clm_forward(1e3, &p).unwrap();
            assert_abs_diff_eq!(hi.probs[3], 1.0, epsilon = 1e-12);
            let lo = clm_forward(-1e3, &p).unwrap();
            assert_abs_diff_eq!(lo.probs[0], 1.0, epsilon = 1e-12);
            assert!(clm_forward(f64::NAN, &p).is_err());
        }
    }

    #[test]
    fn probit_cdf_accuracy() {
        // Φ(1.96) and Φ(-3).
        assert_abs_diff_eq!(
            Link::Probit.cdf(1.96),
            0.975_002_104_851_780,
            epsilon = 1e-11
        );
        assert_abs_diff_eq!(
            Link::Probit.cdf(-3.0),
            0.001_349_898_031_630_095,
            epsilon = 1e-13
        );
    }

    #[test]
    fn backward_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let h = 1e-5;
        for link in Link::ALL {
            for _ in 0..50 {
                let classes = rng.random_range(2..=6);
                let mut p = params(
                    rng.random_range(-2.0..0.0),
                    (0..classes - 2)
                        .map(|_| rng.random_range(-1.2..1.2))
                        .collect(),
                    link,
                    [0.0, 0.5, 1.0][rng.random_range(0..3)],
                );
                let f = rng.random_range(-2.0..2.0);
                let g: Vec<f64> = (0..classes).map(|_| rng.random_range(-1.0..1.0)).collect();
                let objective = |f: f64, p: &ClmParams| -> f64 {
                    let out = clm_forward(f, p).unwrap();
                    out.probs
                        .as_slice()
                        .iter()
                        .zip(&g)
                        .map(|(a, b)| a * b)
                        .sum()
                };
                let grad = clm_backward(f, &p, &g).unwrap();
                let num_f = (objective(f + h, &p) - objective(f - h, &p)) / (2.0 * h);
                assert!(relative_error(grad.df, num_f) < 1e-4);
                let b1 = p.b1;
                p.b1 = b1 + h;
                let up = objective(f, &p);
                p.b1 = b1 - h;
                let down = objective(f, &p);
                p.b1 = b1;
                assert!(relative_error(grad.db1, (up - down) / (2.0 * h)) < 1e-4);
                for i in 0..p.deltas.len() {
                    let d = p.deltas[i];
                    p.deltas[i] = d + h;
                    let up = objective(f, &p);
                    p.deltas[i] = d - h;
                    let down = objective(f, &p);
                    p.deltas[i] = d;
                    assert!(relative_error(grad.ddeltas[i], (up - down) / (2.0 * h)) < 1e-4);
                }
            }
        }
    }

    #[test]
    fn zero_upstream_gives_zero_gradients() {
        let p = params(-0.5, vec![0.3, -0.8], Link::Probit, 0.0);
        let g = clm_backward(0.4, &p, &[0.0; 4]).unwrap();
        assert_eq!(g.df, 0.0);
        assert_eq!(g.db1, 0.0);
        assert!(g.ddeltas.iter().all(|d| *d == 0.0));
    }

    #[test]
    fn translation_invariance() {
        let p = params(-0.7, vec![0.4, 0.9, -0.2], Link::Cloglog, 0.5);
        let shifted = ClmParams {
            b1: p.b1 + 2.5,
            ..p.clone()
        };
        let a = clm_forward(0.3, &p).unwrap();
        let b = clm_forward(2.8, &shifted).unwrap();
        for (x, y) in a.probs.as_slice().iter().zip(b.probs.as_slice()) {
            assert_abs_diff_eq!(x, y, epsilon = 1e-12);
        }
    }

    #[test]
    fn initial_params_are_ordered() {
        for classes in 2..=8 {
            for d_min in [0.0, 0.5, 1.0] {
                let p = ClmParams::initial(classes, Link::Logit, d_min).unwrap();
                let b = materialize_thresholds(&p);
                assert_eq!(b.len(), classes - 1);
                assert!(b.windows(2).all(|w| w[1] > w[0]));
            }
        }
        assert!(ClmParams::initial(1, Link::Logit, 0.0).is_err());
    }
}
