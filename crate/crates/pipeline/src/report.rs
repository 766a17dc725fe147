//! Markdown summaries and statistical reports of an experiment grid.

use std::fmt::Write;

use ordinal_core::model::Method;
use ordinal_core::stats::{
    anova2, tukey_hsd, tukey_hsd_with, AnovaTable, ErrorTerm, TukeyGrouping,
};

use crate::config::ViewConfig;
use crate::grid::{ExperimentGrid, Metric};

/// Mean and sample standard deviation; the deviation of a single value is 0.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

fn cell(values: &[f64]) -> String {
    if values.is_empty() {
        return "".into();
    }
    let (m, s) = mean_std(values);
    format!("{m:.3} ± {s:.3}")
}

fn arrow(metric: Metric) -> &'static str {
    if metric.higher_is_better() {
        "↑"
    } else {
        "↓"
    }
}

pub fn view_display(id: &str) -> String {
    ViewConfig(id.split('+').map(str::to_string).collect()).display()
}

fn values(grid: &ExperimentGrid, metric: Metric, keep: impl Fn(Method, &str) -> bool) -> Vec<f64> {
    grid.rows
        .iter()
        .filter(|r| keep(r.method, &r.view_config))
        .map(|r| metric.of(&r.report))
        .collect()
}

/// Per-method and per-view-configuration tables of mean ± std test scores.
pub fn summary_markdown(grid: &ExperimentGrid, methods: &[Method], views: &[ViewConfig]) -> String {
    let mut out = String::from("# Test results\n\nCells are mean ± sample std over seeds.\n");
    let header = |first: &str, cols: &[String]| {
        format!(
            "| {first} | {} |\n|---|{}\n",
            cols.join(" | "),
            "---|".repeat(cols.len())
        )
    };
    let view_cols: Vec<String> = views.iter().map(ViewConfig::display).collect();
    for metric in Metric::ALL {
        let _ = write!(out, "\n## {} ({})\n\n", metric.name(), arrow(metric));
        out.push_str(&header("Method", &view_cols));
        for &m in methods {
            let cells: Vec<String> = views
                .iter()
                .map(|vc| {
                    cell(&values(grid, metric, |method, v| {
                        method == m && v == vc.id()
                    }))
                })
                .collect();
            let _ = writeln!(out, "| {} | {} |", m.display_name(), cells.join(" | "));
        }
    }

    out.push_str("\n## By view configuration\n\nAll methods and seeds pooled.\n\n");
    let metric_cols: Vec<String> = Metric::ALL
        .iter()
        .map(|m| format!("{} ({})", m.name(), arrow(*m)))
        .collect();
    out.push_str(&header("View", &metric_cols));
    for vc in views {
        let cells: Vec<String> = Metric::ALL
            .iter()
            .map(|&metric| cell(&values(grid, metric, |_, v| v == vc.id())))
            .collect();
        let _ = writeln!(out, "| {} | {} |", vc.display(), cells.join(" | "));
    }
    out
}

fn p_text(p: f64) -> String {
    if p < 0.001 {
        "<0.001".into()
    } else {
        format!("{p:.3}")
    }
}

fn anova_markdown(t: &AnovaTable) -> String {
    let mut out = String::from("| | SS | DF | F | p-value |\n|---|---|---|---|---|\n");
    for (name, e) in [
        ("Method", &t.method),
        ("View", &t.view),
        ("Method * View", &t.interaction),
    ] {
        let _ = writeln!(
            out,
            "| {name} | {:.3} | {} | {:.3} | {} |",
            e.ss,
            e.df,
            e.f,
            p_text(e.p_value)
        );
    }
    let _ = writeln!(
        out,
        "| Residual | {:.3} | {} | | |",
        t.residual_ss, t.residual_df
    );
    if t.degenerate {
        out.push_str("\nThe residual variance is zero; F and p are not informative.\n");
    }
    out
}

/// Homogeneous subsets as columns, levels in ascending order of mean.
pub fn tukey_markdown(g: &TukeyGrouping, label: &str) -> String {
    let cols: Vec<String> = (1..=g.subsets.len()).map(|s| format!("S{s}")).collect();
    let mut out = format!(
        "| {label} | {} |\n|---|{}\n",
        cols.join(" | "),
        "---|".repeat(cols.len())
    );
    for level in g.order_by_mean() {
        let cells: Vec<String> = g
            .subsets
            .iter()
            .map(|s| {
                if s.contains(&level) {
                    format!("{:.3}", g.levels[level].mean)
                } else {
                    String::new()
                }
            })
            .collect();
        let _ = writeln!(out, "| {} | {} |", g.levels[level].name, cells.join(" | "));
    }
    out
}

fn groups_by<K: PartialEq + Clone>(
    grid: &ExperimentGrid,
    metric: Metric,
    key: impl Fn(&crate::grid::GridRow) -> K,
    name: impl Fn(&K) -> String,
) -> Vec<(String, Vec<f64>)> {
    let mut keys: Vec<K> = Vec::new();
    for r in &grid.rows {
        let k = key(r);
        if !keys.contains(&k) {
            keys.push(k);
        }
    }
    keys.iter()
        .map(|k| {
            let v = grid
                .rows
                .iter()
                .filter(|r| key(r) == *k)
                .map(|r| metric.of(&r.report))
                .collect();
            (name(k), v)
        })
        .collect()
}

/// Two-way ANOVA and Tukey HSD subsets per metric.
///
/// The Tukey tests use the ANOVA residual as error term when the ANOVA is
/// available and the one-way pooled variance otherwise.
pub fn stats_markdown(grid: &ExperimentGrid, alpha: f64) -> String {
    let mut out = format!("# Statistical analysis\n\nTukey HSD at α = {alpha}.\n");
    for metric in Metric::ALL {
        let _ = write!(out, "\n## {}\n\n### ANOVA\n\n", metric.name());
        let anova = anova2(&grid.results_table(metric));
        let error = match &anova {
            Ok(t) => {
                out.push_str(&anova_markdown(t));
                (!t.degenerate).then(|| ErrorTerm {
                    mse: t.residual_ms(),
                    df: t.residual_df as f64,
                })
            }
            Err(e) => {
                let _ = writeln!(out, "Not available: {e}.");
                None
            }
        };
        let factors = [
            (
                "Method",
                groups_by(grid, metric, |r| r.method, |m| m.display_name().to_string()),
            ),
            (
                "View",
                groups_by(grid, metric, |r| r.view_config.clone(), |v| view_display(v)),
            ),
        ];
        for (label, groups) in factors {
            let _ = write!(out, "\n### Tukey HSD: {label}\n\n");
            let result = match error {
                Some(e) => tukey_hsd_with(&groups, alpha, Some(e)),
                None => tukey_hsd(&groups, alpha),
            };
            match result {
                Ok(g) => out.push_str(&tukey_markdown(&g, label)),
                Err(e) => {
                    let _ = writeln!(out, "Not available: {e}.");
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridRow;
    use ordinal_core::metrics::MetricReport;

    fn grid() -> ExperimentGrid {
        let mut rows = Vec::new();
        for (mi, m) in [Method::Nominal, Method::Clm].into_iter().enumerate() {
            for (vi, v) in ["crown", "crown+north"].into_iter().enumerate() {
                for seed in 0..3 {
                    let x = 0.1 * mi as f64 + 0.3 * vi as f64 + 0.01 * seed as f64;
                    rows.push(GridRow {
                        method: m,
                        view_config: v.into(),
                        seed,
                        report: MetricReport {
                            qwk: x,
                            amae: 1.0 - x,
                            accuracy: 0.5,
                            sens: vec![None; 2],
                            mae_per_class: vec![None; 2],
                        },
                    });
                }
            }
        }
        ExperimentGrid {
            classes: 2,
            rows,
            ..Default::default()
        }
    }

    #[test]
    fn mean_std_uses_sample_deviation() {
        let (m, s) = mean_std(&[1.0, 2.0, 3.0]);
        assert_eq!(m, 2.0);
        assert_eq!(s, 1.0);
        assert_eq!(mean_std(&[4.0]), (4.0, 0.0));
    }

    #[test]
    fn summary_cells_match_rows() {
        let views = vec![
            ViewConfig(vec!["crown".into()]),
            ViewConfig(vec!["crown".into(), "north".into()]),
        ];
        let md = summary_markdown(&grid(), &[Method::Nominal, Method::Clm], &views);
        assert!(md.contains("| Method | Crown | Crown+North |"));
        assert!(
            md.contains("| CLM | 0.110 ± 0.010 | 0.410 ± 0.010 |"),
            "{md}"
        );
        // Pooled over both methods: 0.00..0.02 and 0.10..0.12.
        let (m, s) = mean_std(&[0.0, 0.01, 0.02, 0.1, 0.11, 0.12]);
        assert!(md.contains(&format!("| Crown | {m:.3} ± {s:.3} |")), "{md}");
    }

    #[test]
    fn stats_report_has_every_section() {
        let md = stats_markdown(&grid(), 0.05);
        assert_eq!(md.matches("### ANOVA").count(), 3);
        assert!(md.contains("| Method * View |"));
        assert!(md.contains("| Crown+North |"));
        // Accuracy is constant, so the tests there are reported as unavailable.
        assert!(md.contains("Not available"));
    }
}
