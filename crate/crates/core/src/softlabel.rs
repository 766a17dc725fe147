//! Soft ordinal targets.
//!
//! Two smoothing schemes are provided. [`uniform_smooth`] mixes the one-hot
//! label with a uniform distribution; [`ordinal_smooth`] mixes it with a
//! unimodal base distribution centred on the true class. The unimodal bases
//! come from a triangular density, a beta density (both integrated over the
//! `J` equal-width segments of `[0, 1]`) or a discrete exponential decay.

use serde::{Deserialize, Serialize};
use statrs::function::beta::ln_beta;

use crate::error::{invalid, Result};
use crate::quadrature::adaptive_simpson;
use crate::types::{OrdinalLabel, ProbabilityVector};

/// Absolute tolerance of the per-segment quadrature.
pub const QUADRATURE_TOLERANCE: f64 = 1e-9;

/// Concentration used for beta targets when none is tuned.
pub const DEFAULT_BETA_CONCENTRATION: f64 = 10.0;

/// Decay rate used for exponential targets when none is tuned.
pub const DEFAULT_EXPONENTIAL_TAU: f64 = 1.0;

/// Shape of the soft distribution mixed into the one-hot label.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SoftLabelKind {
    Uniform,
    /// `alpha_adjacent` is the mass a neighbouring class receives.
    Triangular {
        alpha_adjacent: f64,
    },
    Beta {
        concentration: f64,
    },
    Exponential {
        tau: f64,
        p_exponent: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SoftLabelConfig {
    pub kind: SoftLabelKind,
    /// Smoothing factor in `[0, 1]`; 0 keeps the hard label.
    pub lambda: f64,
}

/// A soft target together with the class it encodes.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftTarget {
    pub dist: ProbabilityVector,
    pub true_class: OrdinalLabel,
}

impl SoftLabelConfig {
    pub fn validate(&self) -> Result<()> {
        check_lambda(self.lambda)?;
        match self.kind {
            SoftLabelKind::Uniform => Ok(()),
            SoftLabelKind::Triangular { alpha_adjacent } => check_alpha(alpha_adjacent),
            SoftLabelKind::Beta { concentration } => check_concentration(concentration),
            SoftLabelKind::Exponential { tau, p_exponent } => check_exponential(tau, p_exponent),
        }
    }

    /// Soft target for true class `k` among `classes`.
    pub fn target(&self, k: OrdinalLabel, classes: usize) -> Result<SoftTarget> {
        self.validate()?;
        let base = match self.kind {
            SoftLabelKind::Uniform => return uniform_smooth(k, classes, self.lambda),
            SoftLabelKind::Triangular { alpha_adjacent } => {
                triangular_target(k, classes, alpha_adjacent)?
            }
            SoftLabelKind::Beta { concentration } => beta_target(k, classes, concentration)?,
            SoftLabelKind::Exponential { tau, p_exponent } => {
                exponential_target(k, classes, tau, p_exponent)?
            }
        };
        ordinal_smooth(k, classes, self.lambda, &base)
    }

    /// Targets for every class, indexed by the true class.
    pub fn target_table(&self, classes: usize) -> Result<Vec<ProbabilityVector>> {
        (0..classes)
            .map(|k| self.target(OrdinalLabel(k), classes).map(|t| t.dist))
            .collect()
    }
}

/// `h'(j, k) = (1 - λ)·1{j = k} + λ / J`.
pub fn uniform_smooth(k: OrdinalLabel, classes: usize, lambda: f64) -> Result<SoftTarget> {
    check_lambda(lambda)?;
    let k = OrdinalLabel::new(k.0, classes)?;
    let uniform = lambda / classes as f64;
    let dist = (0..classes)
        .map(|j| {
            if j == k.0 {
                1.0 - lambda + uniform
            } else {
                uniform
            }
        })
        .collect();
    Ok(SoftTarget {
        dist: ProbabilityVector::new(dist)?,
        true_class: k,
    })
}

/// `h''(j, k) = (1 - λ)·1{j = k} + λ·base[j]`, where `base` peaks at `k`.
pub fn ordinal_smooth(
    k: OrdinalLabel,
    classes: usize,
    lambda: f64,
    base: &ProbabilityVector,
) -> Result<SoftTarget> {
    check_lambda(lambda)?;
    let k = OrdinalLabel::new(k.0, classes)?;
    if base.len() != classes {
        return Err(crate::Error::LengthMismatch {
            expected: classes,
            actual: base.len(),
        });
    }
    if base.argmax() != k {
        return Err(invalid(
            "base",
            format!(
                "mode at class {} but true class is {}",
                base.argmax().0,
                k.0
            ),
        ));
    }
    let dist = base
        .as_slice()
        .iter()
        .enumerate()
        .map(|(j, &b)| {
            let hard = if j == k.0 { 1.0 - lambda } else { 0.0 };
            hard + lambda * b
        })
        .collect();
    Ok(SoftTarget {
        dist: ProbabilityVector::new(dist)?,
        true_class: k,
    })
}

/// Triangular density on `[0, 1]` whose adjacent-class mass is `alpha_adjacent`.
///
/// Interior classes use a symmetric triangle centred on the class segment;
/// the first and last classes use a one-sided triangle with its peak on the
/// boundary. Mass falling outside `[0, 1]` is discarded and the result
/// renormalised.
pub fn triangular_target(
    k: OrdinalLabel,
    classes: usize,
    alpha_adjacent: f64,
) -> Result<ProbabilityVector> {
    check_alpha(alpha_adjacent)?;
    let tri = Triangle::for_class(k, classes, alpha_adjacent)?;
    integrate_segments(classes, |lo, hi| tri.cdf(hi) - tri.cdf(lo))
}

/// Beta density with its mode at the centre of class `k`'s segment.
///
/// With mode `m = (2k + 1) / 2J` and concentration `c`, the shapes are
/// `a = m(c - 2) + 1` and `b = (1 - m)(c - 2) + 1`.
pub fn beta_target(
    k: OrdinalLabel,
    classes: usize,
    concentration: f64,
) -> Result<ProbabilityVector> {
    check_concentration(concentration)?;
    let (a, b) = beta_shapes(k, classes, concentration)?;
    let log_norm = ln_beta(a, b);
    let pdf = move |u: f64| {
        if u <= 0.0 || u >= 1.0 {
            // a, b >= 1, so the boundary density is finite.
            return if (u <= 0.0 && a == 1.0) || (u >= 1.0 && b == 1.0) {
                (-log_norm).exp()
            } else {
                0.0
            };
        }
        ((a - 1.0) * u.ln() + (b - 1.0) * (1.0 - u).ln() - log_norm).exp()
    };
    integrate_segments(classes, |lo, hi| {
        // Subdivide so that narrow peaks are not missed by the first Simpson panel.
        const PANELS: usize = 8;
        let step = (hi - lo) / PANELS as f64;
        (0..PANELS)
            .map(|p| {
                let x0 = lo + p as f64 * step;
                adaptive_simpson(&pdf, x0, x0 + step, QUADRATURE_TOLERANCE / PANELS as f64)
            })
            .sum()
    })
}

/// Shape parameters `(a, b)` used by [`beta_target`].
pub fn beta_shapes(k: OrdinalLabel, classes: usize, concentration: f64) -> Result<(f64, f64)> {
    check_concentration(concentration)?;
    let k = OrdinalLabel::new(k.0, classes)?;
    let mode = (2 * k.0 + 1) as f64 / (2 * classes) as f64;
    Ok((
        mode * (concentration - 2.0) + 1.0,
        (1.0 - mode) * (concentration - 2.0) + 1.0,
    ))
}

/// `dist[j] ∝ exp(-τ·|j - k|^p)`.
pub fn exponential_target(
    k: OrdinalLabel,
    classes: usize,
    tau: f64,
    p_exponent: f64,
) -> Result<ProbabilityVector> {
    check_exponential(tau, p_exponent)?;
    let k = OrdinalLabel::new(k.0, classes)?;
    let weights = (0..classes)
        .map(|j| (-tau * (j.abs_diff(k.0) as f64).powf(p_exponent)).exp())
        .collect();
    ProbabilityVector::from_weights(weights)
}

/// True when `dist` never increases while moving away from `k`.
pub fn is_unimodal_at(dist: &[f64], k: usize) -> bool {
    let left = dist[..=k].windows(2).all(|w| w[0] <= w[1]);
    let right = dist[k..].windows(2).all(|w| w[0] >= w[1]);
    left && right
}

#[derive(Debug, Clone, Copy)]
struct Triangle {
    lo: f64,
    peak: f64,
    hi: f64,
}

impl Triangle {
    fn for_class(k: OrdinalLabel, classes: usize, alpha: f64) -> Result<Self> {
        let k = OrdinalLabel::new(k.0, classes)?;
        if classes < 2 {
            return Err(invalid("classes", "need at least two classes"));
        }
        let width = 1.0 / classes as f64;
        let tri = if k.0 == 0 {
            let reach = width / (1.0 - alpha.sqrt());
            Triangle {
                lo: 0.0,
                peak: 0.0,
                hi: reach,
            }
        } else if k.0 == classes - 1 {
            let reach = width / (1.0 - alpha.sqrt());
            Triangle {
                lo: 1.0 - reach,
                peak: 1.0,
                hi: 1.0,
            }
        } else {
            let centre = (k.0 as f64 + 0.5) * width;
            let half = 0.5 * width / (1.0 - (2.0 * alpha).sqrt());
            Triangle {
                lo: centre - half,
                peak: centre,
                hi: centre + half,
            }
        };
        Ok(tri)
    }

    fn cdf(&self, x: f64) -> f64 {
        let Triangle { lo, peak, hi } = *self;
        if x <= lo {
            0.0
        } else if x >= hi {
            1.0
        } else if x <= peak {
            (x - lo).powi(2) / ((hi - lo) * (peak - lo))
        } else {
            1.0 - (hi - x).powi(2) / ((hi - lo) * (hi - peak))
        }
    }
}

fn integrate_segments<F: Fn(f64, f64) -> f64>(
    classes: usize,
    mass: F,
) -> Result<ProbabilityVector> {
    let width = 1.0 / classes as f64;
    let masses = (0..classes)
        .map(|j| {
            let lo = j as f64 * width;
            let hi = if j + 1 == classes {
                1.0
            } else {
                (j + 1) as f64 * width
            };
            mass(lo, hi).max(0.0)
        })
        .collect();
    ProbabilityVector::from_weights(masses)
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(invalid("lambda", format!("{lambda} is outside [0, 1]")));
    }
    Ok(())
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 0.5) {
        return Err(invalid(
            "alpha_adjacent",
            format!("{alpha} is outside (0, 0.5)"),
        ));
    }
    Ok(())
}

fn check_concentration(c: f64) -> Result<()> {
    if !(c > 2.0 && c.is_finite()) {
        return Err(invalid("concentration", format!("{c} must exceed 2")));
    }
    Ok(())
}

fn check_exponential(tau: f64, p: f64) -> Result<()> {
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(invalid("tau", format!("{tau} must be positive")));
    }
    if !(p >= 1.0 && p.is_finite()) {
        return Err(invalid("p_exponent", format!("{p} must be at least 1")));
    }
    Ok(())
}
