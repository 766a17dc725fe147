//! Distribution of the studentized range.

use std::sync::OnceLock;

use statrs::function::erf::erfc;
use statrs::function::gamma::ln_gamma;

use crate::error::{invalid, Error, Result};
use crate::quadrature::CompositeRule;

/// Absolute tolerance of [`studentized_range_quantile`].
pub const QUANTILE_TOLERANCE: f64 = 1e-6;
const MAX_BISECTIONS: usize = 200;
/// Above this many degrees of freedom the variance estimate is treated as exact.
const LARGE_DF: f64 = 1e6;

const Z_LIMIT: f64 = 8.5;

fn inner_rule() -> &'static CompositeRule {
    static RULE: OnceLock<CompositeRule> = OnceLock::new();
    RULE.get_or_init(|| CompositeRule::new(-Z_LIMIT, Z_LIMIT, 48, 16))
}

#[inline]
fn phi(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

#[inline]
fn big_phi(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

/// `P(range of k standard normals ≤ w)`.
fn normal_range_cdf(w: f64, k: usize) -> f64 {
    if w <= 0.0 {
        return 0.0;
    }
    let rule = inner_rule();
    let v = k as f64
        * rule.integrate(|z| {
            let d = (big_phi(z) - big_phi(z - w)).max(0.0);
            phi(z) * d.powi(k as i32 - 1)
        });
    v.clamp(0.0, 1.0)
}

/// `P(Q ≤ q)` for `k` groups and `df` error degrees of freedom.
///
/// Integrates the normal-range CDF against the density of `s = χ_df / √df`.
pub fn studentized_range_cdf(q: f64, k: usize, df: f64) -> Result<f64> {
    check(k, df)?;
    if q.is_nan() {
        return Err(invalid("q", "must not be NaN"));
    }
    if q <= 0.0 {
        return Ok(0.0);
    }
    if q.is_infinite() {
        return Ok(1.0);
    }
    if df >= LARGE_DF {
        return Ok(normal_range_cdf(q, k));
    }
    let sd = 1.0 / (2.0 * df).sqrt();
    let lo = (1.0 - 14.0 * sd).max(0.0);
    let hi = 1.0 + 14.0 * sd + 2.0 * sd * sd;
    let half = 0.5 * df;
    let log_norm = half * df.ln() - ln_gamma(half) - (half - 1.0) * std::f64::consts::LN_2;
    let rule = CompositeRule::new(lo, hi, 32, 16);
    let v = rule.integrate(|s| {
        if s <= 0.0 {
            return 0.0;
        }
        let log_density = log_norm + (df - 1.0) * s.ln() - half * s * s;
        log_density.exp() * normal_range_cdf(q * s, k)
    });
    Ok(v.clamp(0.0, 1.0))
}

/// Quantile of the studentized range by bisection on its CDF.
pub fn studentized_range_quantile(k: usize, df: f64, p: f64) -> Result<f64> {
    check(k, df)?;
    if !(p > 0.0 && p < 1.0) {
        return Err(invalid("p", format!("{p} must lie in (0, 1)")));
    }
    let mut lo = 0.0;
    let mut hi = 4.0;
    let mut expansions = 0;
    while studentized_range_cdf(hi, k, df)? < p {
        lo = hi;
        hi *= 2.0;
        expansions += 1;
        if expansions > 60 {
            return Err(Error::NoConvergence {
                what: "studentized range quantile bracket",
                iterations: expansions,
            });
        }
    }
    for _ in 0..MAX_BISECTIONS {
        let mid = 0.5 * (lo + hi);
        if studentized_range_cdf(mid, k, df)? < p {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < QUANTILE_TOLERANCE {
            return Ok(0.5 * (lo + hi));
        }
    }
    Err(Error::NoConvergence {
        what: "studentized range quantile",
        iterations: MAX_BISECTIONS,
    })
}

fn check(k: usize, df: f64) -> Result<()> {
    if k < 2 {
        return Err(invalid("k", "need at least two groups"));
    }
    if df.is_nan() || df < 1.0 {
        return Err(invalid("df", format!("{df} must be at least 1")));
    }
    Ok(())
}
