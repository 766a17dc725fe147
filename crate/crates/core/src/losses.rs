//! Classification losses with analytic gradients.
//!
//! Every loss here is a function of the predicted class probabilities and
//! returns its gradient with respect to those probabilities. Use
//! [`softmax_backward`] (or the CLM head's backward pass) to chain into the
//! parameters that produced them.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::softlabel::SoftLabelConfig;
use crate::types::{OrdinalLabel, ProbabilityVector};

/// Probabilities are clamped to `[PROB_CLAMP, 1 - PROB_CLAMP]` inside logs.
pub const PROB_CLAMP: f64 = 1e-12;

/// Loss value and gradient with respect to the class probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct LossValueGrad {
    pub value: f64,
    pub grad: Vec<f64>,
}

/// Transformation applied to the proximity `φ(j, k) = |j - k|` before the
/// SORD softmax.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProximityTransform {
    /// `φ / max φ`.
    Max,
    /// `φ / max φ`, renormalised after the softmax.
    NormMax,
    /// `ln(1 + φ) / ln(1 + max φ)`.
    NormLog,
    /// `ln(1 + φ)`.
    Log,
    /// Similarity `1 / (1 + φ)` normalised to sum to one, entered with a negated sign.
    NormDivision,
    /// Similarity `1 / (1 + φ)`, entered with a negated sign.
    Division,
}

impl ProximityTransform {
    pub const ALL: [ProximityTransform; 6] = [
        ProximityTransform::Max,
        ProximityTransform::NormMax,
        ProximityTransform::NormLog,
        ProximityTransform::Log,
        ProximityTransform::NormDivision,
        ProximityTransform::Division,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ProximityTransform::Max => "max",
            ProximityTransform::NormMax => "norm_max",
            ProximityTransform::NormLog => "norm_log",
            ProximityTransform::Log => "log",
            ProximityTransform::NormDivision => "norm_division",
            ProximityTransform::Division => "division",
        }
    }
}

impl std::str::FromStr for ProximityTransform {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ProximityTransform::ALL
            .into_iter()
            .find(|t| t.name() == s)
            .ok_or_else(|| invalid("transform", format!("unknown proximity transform `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SordConfig {
    pub beta: f64,
    pub transform: ProximityTransform,
}

#[inline]
fn clamp(p: f64) -> f64 {
    p.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP)
}

fn check_len(p: &[f64], expected: usize) -> Result<()> {
    if p.len() != expected {
        return Err(Error::LengthMismatch {
            expected,
            actual: p.len(),
        });
    }
    Ok(())
}

/// Cross-entropy `-Σ t_j ln p_j` against a (possibly soft) target.
pub fn cce(p: &[f64], target: &ProbabilityVector) -> Result<LossValueGrad> {
    check_len(p, target.len())?;
    let mut value = 0.0;
    let grad = p
        .iter()
        .zip(target.as_slice())
        .map(|(&pj, &tj)| {
            let c = clamp(pj);
            value -= tj * c.ln();
            -tj / c
        })
        .collect();
    Ok(LossValueGrad { value, grad })
}

/// Class-distance weighted cross-entropy:
/// `-Σ_{j≠k} |j - k|^α ln(1 - p_j)`.
pub fn cdwce(p: &[f64], k: OrdinalLabel, alpha: f64) -> Result<LossValueGrad> {
    let k = OrdinalLabel::new(k.0, p.len())?;
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(invalid("alpha", format!("{alpha} must be positive")));
    }
    let mut value = 0.0;
    let grad = p
        .iter()
        .enumerate()
        .map(|(j, &pj)| {
            if j == k.0 {
                return 0.0;
            }
            let w = (j.abs_diff(k.0) as f64).powf(alpha);
            let q = clamp(1.0 - pj);
            value -= w * q.ln();
            w / q
        })
        .collect();
    Ok(LossValueGrad { value, grad })
}

/// SORD soft targets: softmax of `-β·φ'(j, k)` for the transformed proximity `φ'`.
pub fn sord_targets(
    k: OrdinalLabel,
    classes: usize,
    cfg: &SordConfig,
) -> Result<ProbabilityVector> {
    let k = OrdinalLabel::new(k.0, classes)?;
    if classes < 2 {
        return Err(invalid("classes", "need at least two classes"));
    }
    if !(cfg.beta > 0.0 && cfg.beta.is_finite()) {
        return Err(invalid("beta", format!("{} must be positive", cfg.beta)));
    }
    let phi: Vec<f64> = (0..classes).map(|j| j.abs_diff(k.0) as f64).collect();
    let max = phi.iter().copied().fold(0.0, f64::max);
    let cost: Vec<f64> = match cfg.transform {
        ProximityTransform::Max | ProximityTransform::NormMax => {
            phi.iter().map(|d| d / max).collect()
        }
        ProximityTransform::Log => phi.iter().map(|d| d.ln_1p()).collect(),
        ProximityTransform::NormLog => phi.iter().map(|d| d.ln_1p() / max.ln_1p()).collect(),
        ProximityTransform::Division => phi.iter().map(|d| -1.0 / (1.0 + d)).collect(),
        ProximityTransform::NormDivision => {
            let sim: Vec<f64> = phi.iter().map(|d| 1.0 / (1.0 + d)).collect();
            let total: f64 = sim.iter().sum();
            sim.iter().map(|s| -s / total).collect()
        }
    };
    let logits: Vec<f64> = cost.iter().map(|c| -cfg.beta * c).collect();
    let mut targets = softmax(&logits);
    if cfg.transform == ProximityTransform::NormMax {
        let total: f64 = targets.iter().sum();
        targets.iter_mut().for_each(|t| *t /= total);
    }
    ProbabilityVector::from_weights(targets)
}

/// Cross-entropy against SORD soft targets.
pub fn sord(p: &[f64], k: OrdinalLabel, cfg: &SordConfig) -> Result<LossValueGrad> {
    cce(p, &sord_targets(k, p.len(), cfg)?)
}

/// Cumulative binary cross-entropy against SORD (`max`) soft targets.
///
/// With prefix sums `P_j = Σ_{m<j} p_m` and `T_j` likewise over the targets,
/// the value is `-Σ_{j=1}^{J-1} [T_j ln P_j + (1 - T_j) ln(1 - P_j)]`.
pub fn slace(p: &[f64], k: OrdinalLabel, beta: f64) -> Result<LossValueGrad> {
    let cfg = SordConfig {
        beta,
        transform: ProximityTransform::Max,
    };
    let targets = sord_targets(k, p.len(), &cfg)?;
    Ok(cumulative_cross_entropy(p, targets.as_slice()))
}

fn cumulative_cross_entropy(p: &[f64], targets: &[f64]) -> LossValueGrad {
    let classes = p.len();
    let mut value = 0.0;
    // d value / d P_j for j = 1..J-1
    let mut d_cum = vec![0.0; classes];
    let (mut pc, mut tc) = (0.0, 0.0);
    for j in 1..classes {
        pc += p[j - 1];
        tc += targets[j - 1];
        let c = clamp(pc);
        value -= tc * c.ln() + (1.0 - tc) * (1.0 - c).ln();
        d_cum[j] = -tc / c + (1.0 - tc) / (1.0 - c);
    }
    // p_m contributes to every P_j with j > m.
    let mut grad = vec![0.0; classes];
    let mut acc = 0.0;
    for m in (0..classes).rev() {
        grad[m] = acc;
        acc += d_cum[m];
    }
    LossValueGrad { value, grad }
}

/// Loss selected for training.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "loss", rename_all = "snake_case")]
pub enum LossKind {
    Cce,
    CceSoft(SoftLabelConfig),
    Cdwce { alpha: f64 },
    Sord(SordConfig),
    Slace { beta: f64 },
}

impl LossKind {
    /// Precomputes per-class targets for a `classes`-way problem.
    pub fn prepare(&self, classes: usize) -> Result<PreparedLoss> {
        let targets = match self {
            LossKind::Cce => (0..classes)
                .map(|k| ProbabilityVector::one_hot(OrdinalLabel(k), classes))
                .collect::<Result<Vec<_>>>()?,
            LossKind::CceSoft(cfg) => cfg.target_table(classes)?,
            LossKind::Sord(cfg) => (0..classes)
                .map(|k| sord_targets(OrdinalLabel(k), classes, cfg))
                .collect::<Result<Vec<_>>>()?,
            LossKind::Slace { beta } => (0..classes)
                .map(|k| {
                    sord_targets(
                        OrdinalLabel(k),
                        classes,
                        &SordConfig {
                            beta: *beta,
                            transform: ProximityTransform::Max,
                        },
                    )
                })
                .collect::<Result<Vec<_>>>()?,
            LossKind::Cdwce { alpha } => {
                if !(*alpha > 0.0 && alpha.is_finite()) {
                    return Err(invalid("alpha", format!("{alpha} must be positive")));
                }
                Vec::new()
            }
        };
        Ok(PreparedLoss {
            kind: *self,
            classes,
            targets,
        })
    }

    /// Evaluates the loss directly, without caching targets.
    pub fn evaluate(&self, p: &[f64], k: OrdinalLabel) -> Result<LossValueGrad> {
        self.prepare(p.len())?.evaluate(p, k)
    }
}

/// A loss with its per-class targets materialised.
#[derive(Debug, Clone)]
pub struct PreparedLoss {
    kind: LossKind,
    classes: usize,
    targets: Vec<ProbabilityVector>,
}

impl PreparedLoss {
    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn evaluate(&self, p: &[f64], k: OrdinalLabel) -> Result<LossValueGrad> {
        check_len(p, self.classes)?;
        let k = OrdinalLabel::new(k.0, self.classes)?;
        match self.kind {
            LossKind::Cdwce { alpha } => cdwce(p, k, alpha),
            LossKind::Slace { .. } => Ok(cumulative_cross_entropy(p, self.targets[k.0].as_slice())),
            LossKind::Cce | LossKind::CceSoft(_) | LossKind::Sord(_) => cce(p, &self.targets[k.0]),
        }
    }
}

/// Numerically stable softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// Chains a probability gradient through softmax: `g_z = p ⊙ (g_p - ⟨g_p, p⟩)`.
pub fn softmax_backward(probs: &[f64], grad_probs: &[f64]) -> Vec<f64> {
    let dot: f64 = probs.iter().zip(grad_probs).map(|(p, g)| p * g).sum();
    probs
        .iter()
        .zip(grad_probs)
        .map(|(p, g)| p * (g - dot))
        .collect()
}

/// Finite-difference step used by [`grad_check`].
pub const FD_STEP: f64 = 1e-5;

/// Denominator floor of the relative error: below it the comparison is
/// effectively absolute.
pub const REL_ERROR_FLOOR: f64 = 1e-3;

/// Relative discrepancy between an analytic and a numeric derivative.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_ERROR_FLOOR)
}

/// Where a gradient is checked.
#[derive(Debug, Clone, PartialEq)]
pub enum GradPoint {
    /// Raw probabilities; each coordinate is perturbed independently.
    Probs(Vec<f64>),
    /// Logits passed through softmax before the loss.
    Logits(Vec<f64>),
}

/// Max relative error between the analytic gradient and central differences.
pub fn grad_check(loss: &LossKind, point: &GradPoint, k: OrdinalLabel) -> Result<f64> {
    let (x, through_softmax) = match point {
        GradPoint::Probs(p) => (p.clone(), false),
        GradPoint::Logits(z) => (z.clone(), true),
    };
    let prepared = loss.prepare(x.len())?;
    let value_grad = |x: &[f64]| -> Result<(f64, Vec<f64>)> {
        if through_softmax {
            let p = softmax(x);
            let lg = prepared.evaluate(&p, k)?;
            Ok((lg.value, softmax_backward(&p, &lg.grad)))
        } else {
            let lg = prepared.evaluate(x, k)?;
            Ok((lg.value, lg.grad))
        }
    };
    let (_, analytic) = value_grad(&x)?;
    let mut worst: f64 = 0.0;
    let mut probe = x.clone();
    for i in 0..x.len() {
        probe[i] = x[i] + FD_STEP;
        let up = value_grad(&probe)?.0;
        probe[i] = x[i] - FD_STEP;
        let down = value_grad(&probe)?.0;
        probe[i] = x[i];
        let numeric = (up - down) / (2.0 * FD_STEP);
        worst = worst.max(relative_error(analytic[i], numeric));
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::softlabel::{uniform_smooth, SoftLabelKind};
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const P: [f64; 4] = [0.1, 0.2, 0.6, 0.1];

    fn one_hot(k: usize, classes: usize) -> Vec<f64> {
        ProbabilityVector::one_hot(OrdinalLabel(k), classes)
            .unwrap()
            .into_inner()
    }

    fn random_interior(rng: &mut ChaCha8Rng, classes: usize) -> Vec<f64> {
        let w: Vec<f64> = (0..classes).map(|_| rng.random_range(0.05..1.0)).collect();
        ProbabilityVector::from_weights(w).unwrap().into_inner()
    }

    #[test]
    fn cce_reference_values() {
        let t = ProbabilityVector::one_hot(OrdinalLabel(2), 4).unwrap();
        assert_abs_diff_eq!(cce(&P, &t).unwrap().value, -(0.6f64.ln()), epsilon = 1e-15);
        assert_abs_diff_eq!(cce(&P, &t).unwrap().value, 0.5108, epsilon = 5e-5);
        assert!(cce(&one_hot(2, 4), &t).unwrap().value <= 1e-9);
        assert!(cce(&P[..3], &t).is_err());
    }

    #[test]
    fn cce_with_uniform_smoothing_matches_direct_sum() {
        let t = uniform_smooth(OrdinalLabel(1), 4, 0.3).unwrap().dist;
        let direct: f64 = (0..4)
            .map(|j| {
                let h = if j == 1 { 0.7 + 0.3 / 4.0 } else { 0.3 / 4.0 };
                -h * P[j].ln()
            })
            .sum();
        assert_abs_diff_eq!(cce(&P, &t).unwrap().value, direct, epsilon = 1e-14);
    }

    #[test]
    fn cdwce_reference_values() {
        let v = cdwce(&P, OrdinalLabel(2), 1.0).unwrap().value;
        let expected = -(2.0 * 0.9f64.ln() + 0.8f64.ln() + 0.9f64.ln());
        assert_abs_diff_eq!(v, expected, epsilon = 1e-14);
        assert_abs_diff_eq!(v, 0.5392, epsilon = 5e-5);
        assert!(cdwce(&one_hot(2, 4), OrdinalLabel(2), 0.5).unwrap().value <= 1e-9);
        assert!(cdwce(&P, OrdinalLabel(4), 1.0).is_err());
    }

    #[test]
    fn cdwce_penalises_farther_mass() {
        let base = cdwce(&P, OrdinalLabel(2), 1.0).unwrap().value;
        // 0.05 from class 1 (distance 1) to class 0 (distance 2).
        let moved = cdwce(&[0.15, 0.15, 0.6, 0.1], OrdinalLabel(2), 1.0)
            .unwrap()
            .value;
        assert!(moved > base);
    }

    #[test]
    fn sord_reference_targets() {
        let cfg = SordConfig {
            beta: 1.0,
            transform: ProximityTransform::Max,
        };
        let t = sord_targets(OrdinalLabel(1), 3, &cfg).unwrap();
        let e = (-1.0f64).exp();
        let z = 1.0 + 2.0 * e;
        assert_abs_diff_eq!(t[0], e / z, epsilon = 1e-15);
        assert_abs_diff_eq!(t[1], 1.0 / z, epsilon = 1e-15);
        assert_abs_diff_eq!(t[0], 0.2119, epsilon = 5e-5);
        assert_abs_diff_eq!(t[1], 0.5761, epsilon = 5e-5);
        let sharp = sord_targets(
            OrdinalLabel(2),
            5,
            &SordConfig {
                beta: 500.0,
                transform: ProximityTransform::Log,
            },
        )
        .unwrap();
        assert_abs_diff_eq!(sharp[2], 1.0, epsilon = 1e-12);
        assert!("bogus".parse::<ProximityTransform>().is_err());
    }

    #[test]
    fn sord_targets_are_unimodal() {
        let betas = [
            0.3, 0.5, 0.8, 1.0, 2.0, 3.0, 4.0, 7.0, 10.0, 15.0, 20.0, 25.0,
        ];
        for classes in 2..=6 {
            for k in 0..classes {
                for &beta in &betas {
                    for transform in ProximityTransform::ALL {
                        let t =
                            sord_targets(OrdinalLabel(k), classes, &SordConfig { beta, transform })
                                .unwrap();
                        assert_eq!(t.argmax(), OrdinalLabel(k));
                        assert!(crate::softlabel::is_unimodal_at(t.as_slice(), k));
                    }
                }
            }
        }
    }

    #[test]
    fn slace_is_minimised_at_targets() {
        let beta = 2.0;
        let t = sord_targets(
            OrdinalLabel(1),
            3,
            &SordConfig {
                beta,
                transform: ProximityTransform::Max,
            },
        )
        .unwrap();
        let at_target = slace(t.as_slice(), OrdinalLabel(1), beta).unwrap().value;
        let mut best = f64::INFINITY;
        for a in 0..=100 {
            for b in 0..=(100 - a) {
                let p = [
                    a as f64 / 100.0,
                    b as f64 / 100.0,
                    (100 - a - b) as f64 / 100.0,
                ];
                best = best.min(slace(&p, OrdinalLabel(1), beta).unwrap().value);
            }
        }
        assert!(at_target <= best + 1e-12);
        assert!(slace(&one_hot(1, 3), OrdinalLabel(1), 200.0).unwrap().value < 1e-9);
    }

    #[test]
    fn slace_depends_only_on_prefix_sums() {
        // Swapping classes 2 and 3 (k = 0) changes P_3 and hence the value;
        // re-distributing mass without touching any prefix sum does not.
        let p = [0.4, 0.1, 0.3, 0.2];
        let swapped = [0.4, 0.1, 0.2, 0.3];
        let a = slace(&p, OrdinalLabel(0), 1.0).unwrap().value;
        let b = slace(&swapped, OrdinalLabel(0), 1.0).unwrap().value;
        assert!((a - b).abs() > 1e-6);
        let same = [0.4, 0.1, 0.3, 0.2];
        assert_eq!(a, slace(&same, OrdinalLabel(0), 1.0).unwrap().value);
    }

    #[test]
    fn one_hot_predictions_are_distance_monotone() {
        for classes in 2..=6 {
            for k in 0..classes {
                let k = OrdinalLabel(k);
                let values: Vec<(usize, f64, f64)> = (0..classes)
                    .map(|m| {
                        let p = one_hot(m, classes);
                        (
                            m,
                            cdwce(&p, k, 0.5).unwrap().value,
                            slace(&p, k, 20.0).unwrap().value,
                        )
                    })
                    .collect();
                for a in &values {
                    for b in &values {
                        if a.0.abs_diff(k.0) < b.0.abs_diff(k.0) {
                            assert!(a.1 <= b.1 + 1e-9);
                        }
                        // Cumulative losses only order predictions on the same side of k.
                        let same_side = (a.0 <= k.0) == (b.0 <= k.0) || a.0 == k.0;
                        if same_side && a.0.abs_diff(k.0) < b.0.abs_diff(k.0) {
                            assert!(a.2 <= b.2 + 1e-9, "J={classes} k={} {a:?} {b:?}", k.0);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let losses = [
            LossKind::Cce,
            LossKind::CceSoft(SoftLabelConfig {
                kind: SoftLabelKind::Beta {
                    concentration: 10.0,
                },
                lambda: 0.8,
            }),
            LossKind::Cdwce { alpha: 0.5 },
            LossKind::Sord(SordConfig {
                beta: 2.0,
                transform: ProximityTransform::NormLog,
            }),
            LossKind::Slace { beta: 3.0 },
        ];
        for loss in &losses {
            for _ in 0..20 {
                let classes = rng.random_range(2..=6);
                let k = OrdinalLabel(rng.random_range(0..classes));
                let p = random_interior(&mut rng, classes);
                assert!(grad_check(loss, &GradPoint::Probs(p), k).unwrap() < 1e-4);
                let z: Vec<f64> = (0..classes).map(|_| rng.random_range(-3.0..3.0)).collect();
                assert!(grad_check(loss, &GradPoint::Logits(z), k).unwrap() < 1e-4);
            }
        }
    }
}
