//! Independent oracles shared by the integration suites.
#![allow(dead_code)]

use ordinal_core::model::tune::{ADJACENT_PROBABILITIES, EXPONENTIAL_EXPONENTS, SMOOTHING_FACTORS};
use ordinal_core::softlabel::{beta_target, triangular_target, SoftLabelConfig, SoftLabelKind};
use ordinal_core::OrdinalLabel;
use statrs::distribution::{Beta, Continuous};

pub const CLASS_COUNTS: [usize; 4] = [3, 4, 5, 10];
pub const FD_STEP: f64 = 1e-5;

/// Composite Simpson over `[a, b]` with `n` (even) panels.
pub fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(a + i as f64 * h);
    }
    s * h / 3.0
}

/// Simpson after `u = a + (b - a)(3s² - 2s³)`, which clusters nodes at both
/// ends and tames the `u^(a-1)` behaviour of beta densities at 0 and 1.
pub fn graded(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    let g = |s: f64| f(a + (b - a) * s * s * (3.0 - 2.0 * s)) * 6.0 * s * (1.0 - s) * (b - a);
    simpson(&g, 0.0, 1.0, 4000)
}

/// Mass of `density` on each of the `classes` equal segments of `[0, 1]`, normalised.
pub fn segment_masses(density: &dyn Fn(f64) -> f64, classes: usize, kinks: &[f64]) -> Vec<f64> {
    let mut masses = Vec::with_capacity(classes);
    for j in 0..classes {
        let (lo, hi) = (j as f64 / classes as f64, (j + 1) as f64 / classes as f64);
        // Split at kinks so each piece is smooth.
        let mut cuts = vec![lo, hi];
        cuts.extend(kinks.iter().copied().filter(|&x| x > lo && x < hi));
        cuts.sort_by(f64::total_cmp);
        masses.push(
            cuts.windows(2)
                .map(|w| graded(density, w[0], w[1]))
                .sum::<f64>(),
        );
    }
    let total: f64 = masses.iter().sum();
    masses.iter().map(|m| m / total).collect()
}

pub fn tent(lo: f64, peak: f64, hi: f64) -> impl Fn(f64) -> f64 {
    move |x| {
        if x < lo || x > hi {
            0.0
        } else if x <= peak {
            if peak == lo {
                2.0 / (hi - lo)
            } else {
                2.0 * (x - lo) / ((hi - lo) * (peak - lo))
            }
        } else if hi == peak {
            2.0 / (hi - lo)
        } else {
            2.0 * (hi - x) / ((hi - lo) * (hi - peak))
        }
    }
}

/// Finds the tent whose mass on the neighbouring segment equals `alpha`,
/// by bisection on the support width.
pub fn oracle_tent(k: usize, classes: usize, alpha: f64) -> (f64, f64, f64) {
    let w = 1.0 / classes as f64;
    let shape = |reach: f64| -> (f64, f64, f64) {
        if k == 0 {
            (0.0, 0.0, reach)
        } else if k == classes - 1 {
            (1.0 - reach, 1.0, 1.0)
        } else {
            let c = (k as f64 + 0.5) * w;
            (c - reach, c, c + reach)
        }
    };
    let neighbour = if k == 0 { 1 } else { k - 1 };
    let adjacent_mass = |reach: f64| {
        let (lo, peak, hi) = shape(reach);
        let f = tent(lo, peak, hi);
        let (a, b) = (neighbour as f64 * w, (neighbour + 1) as f64 * w);
        simpson(&f, a, b, 4000)
    };
    let (mut lo, mut hi) = if k == 0 || k == classes - 1 {
        (w, 2.0 * w)
    } else {
        (0.5 * w, 1.5 * w)
    };
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if adjacent_mass(mid) < alpha {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    shape(0.5 * (lo + hi))
}

fn compare(got: &[f64], want: &[f64], tol: f64, what: &str) -> Result<(), String> {
    for (j, (g, w)) in got.iter().zip(want).enumerate() {
        if (g - w).abs() > tol {
            return Err(format!("{what}: class {j}: {g} vs oracle {w}"));
        }
    }
    Ok(())
}

/// Triangular targets for every grid α against the tent oracle.
pub fn check_triangular_integrals() -> Result<usize, String> {
    let mut cases = 0;
    for &classes in &CLASS_COUNTS {
        for &alpha in &ADJACENT_PROBABILITIES {
            for k in 0..classes {
                let (lo, peak, hi) = oracle_tent(k, classes, alpha);
                let want = segment_masses(&tent(lo, peak, hi), classes, &[lo, peak, hi]);
                let got = triangular_target(OrdinalLabel(k), classes, alpha)
                    .map_err(|e| e.to_string())?;
                compare(
                    got.as_slice(),
                    &want,
                    1e-6,
                    &format!("triangular J={classes} k={k} α={alpha}"),
                )?;
                cases += 1;
            }
        }
    }
    Ok(cases)
}

/// Beta targets against a fine-grid integral of the beta density.
pub fn check_beta_integrals(concentrations: &[f64]) -> Result<usize, String> {
    let mut cases = 0;
    for &classes in &CLASS_COUNTS {
        for &c in concentrations {
            for k in 0..classes {
                let m = (2 * k + 1) as f64 / (2 * classes) as f64;
                let dist = Beta::new(m * (c - 2.0) + 1.0, (1.0 - m) * (c - 2.0) + 1.0)
                    .map_err(|e| e.to_string())?;
                let want = segment_masses(&|u| dist.pdf(u), classes, &[]);
                let got = beta_target(OrdinalLabel(k), classes, c).map_err(|e| e.to_string())?;
                compare(
                    got.as_slice(),
                    &want,
                    1e-6,
                    &format!("beta J={classes} k={k} c={c}"),
                )?;
                cases += 1;
            }
        }
    }
    Ok(cases)
}

pub fn soft_label_grid() -> Vec<(String, SoftLabelKind)> {
    let mut out = vec![("uniform".to_string(), SoftLabelKind::Uniform)];
    for &alpha_adjacent in &ADJACENT_PROBABILITIES {
        out.push((
            format!("triangular α={alpha_adjacent}"),
            SoftLabelKind::Triangular { alpha_adjacent },
        ));
    }
    out.push((
        "beta c=10".into(),
        SoftLabelKind::Beta {
            concentration: 10.0,
        },
    ));
    for &p_exponent in &EXPONENTIAL_EXPONENTS {
        out.push((
            format!("exponential p={p_exponent}"),
            SoftLabelKind::Exponential {
                tau: 1.0,
                p_exponent,
            },
        ));
    }
    out
}

/// Nonnegativity, unit sum, mode at the true class and monotone decay on
/// either side for every encoder, smoothing factor and class count.
pub fn check_soft_label_shapes() -> Result<usize, String> {
    let mut cases = 0;
    for (name, kind) in soft_label_grid() {
        for &lambda in &SMOOTHING_FACTORS {
            // A fully uniform target has no mode.
            if kind == SoftLabelKind::Uniform && lambda == 1.0 {
                continue;
            }
            let cfg = SoftLabelConfig { kind, lambda };
            for &classes in &CLASS_COUNTS {
                for k in 0..classes {
                    let t = cfg
                        .target(OrdinalLabel(k), classes)
                        .map_err(|e| e.to_string())?;
                    let d = t.dist.as_slice();
                    let what = format!("{name} λ={lambda} J={classes} k={k}: {d:?}");
                    let tol = if matches!(kind, SoftLabelKind::Beta { .. }) {
                        1e-6
                    } else {
                        1e-9
                    };
                    if d.iter().any(|&x| x < 0.0) {
                        return Err(format!("negative mass, {what}"));
                    }
                    if (d.iter().sum::<f64>() - 1.0).abs() >= tol {
                        return Err(format!("sum off, {what}"));
                    }
                    if d[k] != d.iter().cloned().fold(f64::MIN, f64::max) {
                        return Err(format!("mode off the true class, {what}"));
                    }
                    for j in 0..classes {
                        for i in 0..classes {
                            if j.abs_diff(k) < i.abs_diff(k) && (i < k) == (j < k) && d[j] < d[i] {
                                return Err(format!("not unimodal, {what}"));
                            }
                        }
                    }
                    cases += 1;
                }
            }
        }
    }
    Ok(cases)
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-3)
}

/// Central differences at `FD_STEP` and `FD_STEP / 2`, combined by Richardson
/// extrapolation. Cumulative losses have large third derivatives near a
/// prefix sum of 1, where the plain central difference is off by about 1e-4.
pub fn central_gradient(f: &dyn Fn(&[f64]) -> f64, x: &[f64]) -> Vec<f64> {
    let mut probe = x.to_vec();
    let mut diff = |i: usize, h: f64| {
        probe[i] = x[i] + h;
        let up = f(&probe);
        probe[i] = x[i] - h;
        let down = f(&probe);
        probe[i] = x[i];
        (up - down) / (2.0 * h)
    };
    (0..x.len())
        .map(|i| {
            let coarse = diff(i, FD_STEP);
            let fine = diff(i, 0.5 * FD_STEP);
            (4.0 * fine - coarse) / 3.0
        })
        .collect()
}

/// `1 - Σ w O / Σ w E` with quadratic weights, written out as plain double sums.
pub fn brute_qwk(o: &[Vec<u64>]) -> f64 {
    let j = o.len();
    let n: f64 = o.iter().flatten().sum::<u64>() as f64;
    let (mut num, mut den) = (0.0, 0.0);
    for a in 0..j {
        for b in 0..j {
            let w = ((a as f64 - b as f64) / (j as f64 - 1.0)).powi(2);
            let row: f64 = o[a].iter().sum::<u64>() as f64;
            let col: f64 = (0..j).map(|r| o[r][b]).sum::<u64>() as f64;
            num += w * o[a][b] as f64;
            den += w * row * col / n;
        }
    }
    1.0 - num / den
}
