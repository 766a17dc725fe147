//! Tukey–Kramer honestly significant difference test and compact letter display.

use serde::{Deserialize, Serialize};

use super::ptukey::studentized_range_cdf;
use crate::error::{invalid, Error, Result};

pub const DEFAULT_ALPHA: f64 = 0.05;

/// Pooled error term shared by all comparisons.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorTerm {
    pub mse: f64,
    pub df: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TukeyLevel {
    pub name: String,
    pub mean: f64,
    pub n: usize,
    /// Letters of the subsets containing this level, `a` being the lowest subset.
    pub letters: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairComparison {
    pub a: usize,
    pub b: usize,
    pub diff: f64,
    pub q: f64,
    pub p_value: f64,
    pub significant: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TukeyGrouping {
    /// Levels in input order.
    pub levels: Vec<TukeyLevel>,
    pub pairs: Vec<PairComparison>,
    /// Homogeneous subsets `S1..Sk` as level indices sorted by mean; `S1` has the lowest means.
    pub subsets: Vec<Vec<usize>>,
    pub alpha: f64,
    pub error: ErrorTerm,
}

impl TukeyGrouping {
    pub fn p_value(&self, a: usize, b: usize) -> Option<f64> {
        let (a, b) = (a.min(b), a.max(b));
        self.pairs
            .iter()
            .find(|p| p.a == a && p.b == b)
            .map(|p| p.p_value)
    }

    /// Level indices ordered by ascending mean.
    pub fn order_by_mean(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.levels.len()).collect();
        idx.sort_by(|&x, &y| self.levels[x].mean.total_cmp(&self.levels[y].mean));
        idx
    }
}

/// Tukey HSD with the one-way pooled within-group variance.
pub fn tukey_hsd(groups: &[(String, Vec<f64>)], alpha: f64) -> Result<TukeyGrouping> {
    tukey_hsd_with(groups, alpha, None)
}

/// Tukey HSD; `error` overrides the pooled variance, e.g. with a factorial residual.
pub fn tukey_hsd_with(
    groups: &[(String, Vec<f64>)],
    alpha: f64,
    error: Option<ErrorTerm>,
) -> Result<TukeyGrouping> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(invalid("alpha", format!("{alpha} must lie in (0, 1)")));
    }
    if groups.len() < 2 {
        return Err(invalid("groups", "need at least two groups"));
    }
    if let Some((name, _)) = groups.iter().find(|(_, v)| v.len() < 2) {
        return Err(invalid(
            "groups",
            format!("group `{name}` has fewer than two values"),
        ));
    }
    let means: Vec<f64> = groups
        .iter()
        .map(|(_, v)| v.iter().sum::<f64>() / v.len() as f64)
        .collect();
    let error = match error {
        Some(e) => e,
        None => {
            let within: f64 = groups
                .iter()
                .zip(&means)
                .map(|((_, v), m)| v.iter().map(|x| (x - m).powi(2)).sum::<f64>())
                .sum();
            let n: usize = groups.iter().map(|(_, v)| v.len()).sum();
            let df = (n - groups.len()) as f64;
            ErrorTerm {
                mse: within / df,
                df,
            }
        }
    };
    if !(error.mse > 0.0 && error.mse.is_finite()) {
        return Err(Error::DegenerateVariance);
    }
    let k = groups.len();
    let mut pairs = Vec::with_capacity(k * (k - 1) / 2);
    for a in 0..k {
        for b in a + 1..k {
            let (na, nb) = (groups[a].1.len() as f64, groups[b].1.len() as f64);
            let diff = means[b] - means[a];
            let se = (0.5 * error.mse * (1.0 / na + 1.0 / nb)).sqrt();
            let q = diff.abs() / se;
            let p_value = (1.0 - studentized_range_cdf(q, k, error.df)?).clamp(0.0, 1.0);
            pairs.push(PairComparison {
                a,
                b,
                diff,
                q,
                p_value,
                significant: p_value < alpha,
            });
        }
    }
    let subsets = compact_letters(&means, &pairs);
    let mut letters = vec![String::new(); k];
    for (s, members) in subsets.iter().enumerate() {
        for &m in members {
            letters[m].push(letter(s));
        }
    }
    let levels = groups
        .iter()
        .zip(&means)
        .zip(letters)
        .map(|(((name, v), &mean), letters)| TukeyLevel {
            name: name.clone(),
            mean,
            n: v.len(),
            letters,
        })
        .collect();
    Ok(TukeyGrouping {
        levels,
        pairs,
        subsets,
        alpha,
        error,
    })
}

fn letter(i: usize) -> char {
    const ALPHABET: &[u8] = b"abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ";
    ALPHABET.get(i).map_or('?', |&c| c as char)
}

/// Insert-and-absorb construction of the letter columns.
fn compact_letters(means: &[f64], pairs: &[PairComparison]) -> Vec<Vec<usize>> {
    let k = means.len();
    let mut columns: Vec<Vec<bool>> = vec![vec![true; k]];
    for pair in pairs.iter().filter(|p| p.significant) {
        let (i, j) = (pair.a, pair.b);
        let mut next = Vec::with_capacity(columns.len() + 1);
        for col in columns {
            if col[i] && col[j] {
                let mut without_i = col.clone();
                without_i[i] = false;
                let mut without_j = col;
                without_j[j] = false;
                next.push(without_i);
                next.push(without_j);
            } else {
                next.push(col);
            }
        }
        columns = absorb(next);
    }
    let mut subsets: Vec<Vec<usize>> = columns
        .into_iter()
        .map(|col| {
            let mut members: Vec<usize> = (0..k).filter(|&m| col[m]).collect();
            members.sort_by(|&x, &y| means[x].total_cmp(&means[y]).then(x.cmp(&y)));
            members
        })
        .collect();
    subsets.sort_by(|x, y| {
        let key = |s: &Vec<usize>| (means[s[0]], means[*s.last().expect("nonempty")]);
        let (a, b) = (key(x), key(y));
        a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1))
    });
    subsets
}

/// Drops columns that are subsets of another column (and duplicates).
fn absorb(columns: Vec<Vec<bool>>) -> Vec<Vec<bool>> {
    let contains =
        |big: &Vec<bool>, small: &Vec<bool>| big.iter().zip(small).all(|(b, s)| *b || !*s);
    let mut kept: Vec<Vec<bool>> = Vec::new();
    for (idx, col) in columns.iter().enumerate() {
        let dominated = columns
            .iter()
            .enumerate()
            .any(|(other, c)| other != idx && contains(c, col) && (c != col || other < idx));
        if !dominated {
            kept.push(col.clone());
        }
    }
    kept
}
