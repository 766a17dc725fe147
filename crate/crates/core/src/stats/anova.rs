//! Balanced two-way analysis of variance with interaction.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use statrs::function::beta::beta_reg;

use crate::error::{invalid, Error, Result};

/// One observation of the Method × View × seed grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub method: String,
    pub view_config: String,
    pub seed: u64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ResultsTable {
    pub rows: Vec<ResultRow>,
}

impl ResultsTable {
    pub fn push(&mut self, method: &str, view_config: &str, seed: u64, value: f64) {
        self.rows.push(ResultRow {
            method: method.to_string(),
            view_config: view_config.to_string(),
            seed,
            value,
        });
    }

    /// Observations grouped by method, in sorted method order.
    pub fn by_method(&self) -> Vec<(String, Vec<f64>)> {
        let mut groups: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
        for r in &self.rows {
            groups.entry(&r.method).or_default().push(r.value);
        }
        groups
            .into_iter()
            .map(|(k, v)| (k.to_string(), v))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Effect {
    pub ss: f64,
    pub df: usize,
    /// `MS_effect / MS_residual`; `+∞` when the residual is zero and the effect is not.
    pub f: f64,
    pub p_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnovaTable {
    pub method: Effect,
    pub view: Effect,
    pub interaction: Effect,
    pub residual_ss: f64,
    pub residual_df: usize,
    pub total_ss: f64,
    pub replicates: usize,
    /// Set when the residual variance is zero, so F and p are not informative.
    pub degenerate: bool,
}

impl AnovaTable {
    pub fn residual_ms(&self) -> f64 {
        self.residual_ss / self.residual_df as f64
    }
}

/// Upper tail of the F distribution, `I_{d2/(d2 + d1 F)}(d2/2, d1/2)`.
pub fn f_upper_tail(f: f64, d1: f64, d2: f64) -> f64 {
    if f.is_nan() {
        return f64::NAN;
    }
    if f <= 0.0 {
        return 1.0;
    }
    if f.is_infinite() {
        return 0.0;
    }
    beta_reg(0.5 * d2, 0.5 * d1, d2 / (d2 + d1 * f)).clamp(0.0, 1.0)
}

/// Two-way ANOVA over a balanced Method × View design with `R ≥ 2` replicates per cell.
pub fn anova2(table: &ResultsTable) -> Result<AnovaTable> {
    if table.rows.is_empty() {
        return Err(Error::Empty("results table"));
    }
    if let Some(r) = table.rows.iter().find(|r| !r.value.is_finite()) {
        return Err(invalid(
            "value",
            format!(
                "non-finite value for {}/{} seed {}",
                r.method, r.view_config, r.seed
            ),
        ));
    }
    let methods: Vec<&str> = distinct(table.rows.iter().map(|r| r.method.as_str()));
    let views: Vec<&str> = distinct(table.rows.iter().map(|r| r.view_config.as_str()));
    let (a, b) = (methods.len(), views.len());
    if a < 2 || b < 2 {
        return Err(invalid("table", "both factors need at least two levels"));
    }
    let mut cells: Vec<Vec<f64>> = vec![Vec::new(); a * b];
    for r in &table.rows {
        let i = methods
            .binary_search(&r.method.as_str())
            .expect("collected above");
        let j = views
            .binary_search(&r.view_config.as_str())
            .expect("collected above");
        cells[i * b + j].push(r.value);
    }
    let reps = cells[0].len();
    if let Some(pos) = cells.iter().position(|c| c.len() != reps) {
        return Err(Error::UnbalancedDesign(format!(
            "cell {}/{} has {} observations, expected {reps}",
            methods[pos / b],
            views[pos % b],
            cells[pos].len()
        )));
    }
    if reps < 2 {
        return Err(Error::UnbalancedDesign(
            "need at least two replicates per cell".into(),
        ));
    }

    let n = (a * b * reps) as f64;
    let grand = cells.iter().flatten().sum::<f64>() / n;
    let cell_mean: Vec<f64> = cells.iter().map(|c| mean(c)).collect();
    let row_mean: Vec<f64> = (0..a)
        .map(|i| (0..b).map(|j| cell_mean[i * b + j]).sum::<f64>() / b as f64)
        .collect();
    let col_mean: Vec<f64> = (0..b)
        .map(|j| (0..a).map(|i| cell_mean[i * b + j]).sum::<f64>() / a as f64)
        .collect();

    let r = reps as f64;
    let ss_a = (b as f64) * r * row_mean.iter().map(|m| (m - grand).powi(2)).sum::<f64>();
    let ss_b = (a as f64) * r * col_mean.iter().map(|m| (m - grand).powi(2)).sum::<f64>();
    let mut ss_ab = 0.0;
    let mut ss_res = 0.0;
    for i in 0..a {
        for j in 0..b {
            let m = cell_mean[i * b + j];
            ss_ab += r * (m - row_mean[i] - col_mean[j] + grand).powi(2);
            ss_res += cells[i * b + j]
                .iter()
                .map(|x| (x - m).powi(2))
                .sum::<f64>();
        }
    }
    let total_ss = cells
        .iter()
        .flatten()
        .map(|x| (x - grand).powi(2))
        .sum::<f64>();

    let df_res = a * b * (reps - 1);
    let ms_res = ss_res / df_res as f64;
    let degenerate = ss_res <= f64::EPSILON * total_ss || total_ss == 0.0;
    let effect = |ss: f64, df: usize| {
        let f = if degenerate {
            if ss > f64::EPSILON * total_ss && ss > 0.0 {
                f64::INFINITY
            } else {
                f64::NAN
            }
        } else {
            (ss / df as f64) / ms_res
        };
        let p_value = if f.is_nan() {
            f64::NAN
        } else {
            f_upper_tail(f, df as f64, df_res as f64)
        };
        Effect { ss, df, f, p_value }
    };
    if degenerate {
        log::warn!("two-way ANOVA has zero residual variance; F statistics are degenerate");
    }
    Ok(AnovaTable {
        method: effect(ss_a, a - 1),
        view: effect(ss_b, b - 1),
        interaction: effect(ss_ab, (a - 1) * (b - 1)),
        residual_ss: ss_res,
        residual_df: df_res,
        total_ss,
        replicates: reps,
        degenerate,
    })
}

fn distinct<'a>(it: impl Iterator<Item = &'a str>) -> Vec<&'a str> {
    let mut v: Vec<&str> = it.collect();
    v.sort_unstable();
    v.dedup();
    v
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}
