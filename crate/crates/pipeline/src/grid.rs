//! Experiment results and their CSV form.

use std::path::Path;

use ordinal_core::metrics::MetricReport;
use ordinal_core::model::{Method, ModelConfig};
use ordinal_core::stats::ResultsTable;

use crate::error::PipelineError;

/// Test scores of one (method, view configuration, seed) cell.
#[derive(Debug, Clone, PartialEq)]
pub struct GridRow {
    pub method: Method,
    pub view_config: String,
    pub seed: u64,
    pub report: MetricReport,
}

/// Ensemble weights chosen for a multi-view cell.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightRow {
    pub method: Method,
    pub view_config: String,
    pub seed: u64,
    pub views: Vec<String>,
    pub weights: Vec<f64>,
    /// AMAE of the chosen weights on out-of-fold training predictions.
    pub validation_amae: f64,
}

/// Configuration selected for one per-view model.
#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    pub method: Method,
    pub view: String,
    pub seed: u64,
    pub config: ModelConfig,
    /// Cross-validated AMAE of the choice, when tuning ran.
    pub cv_amae: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ExperimentGrid {
    pub classes: usize,
    pub rows: Vec<GridRow>,
    pub weights: Vec<WeightRow>,
    pub selections: Vec<Selection>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    Qwk,
    Amae,
    Accuracy,
}

impl Metric {
    pub const ALL: [Metric; 3] = [Metric::Qwk, Metric::Amae, Metric::Accuracy];

    pub fn name(self) -> &'static str {
        match self {
            Metric::Qwk => "QWK",
            Metric::Amae => "AMAE",
            Metric::Accuracy => "Accuracy",
        }
    }

    pub fn higher_is_better(self) -> bool {
        !matches!(self, Metric::Amae)
    }

    pub fn of(self, r: &MetricReport) -> f64 {
        match self {
            Metric::Qwk => r.qwk,
            Metric::Amae => r.amae,
            Metric::Accuracy => r.accuracy,
        }
    }
}

pub fn grid_header(classes: usize) -> Vec<String> {
    let mut h: Vec<String> = ["method", "view_config", "seed", "qwk", "amae", "accuracy"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    h.extend((0..classes).map(|j| format!("sens_{j}")));
    h.extend((0..classes).map(|j| format!("mae_{j}")));
    h
}

fn opt(v: &Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl ExperimentGrid {
    /// Rows of one metric as an ANOVA input table.
    pub fn results_table(&self, metric: Metric) -> ResultsTable {
        let mut t = ResultsTable::default();
        for r in &self.rows {
            t.push(
                r.method.display_name(),
                &r.view_config,
                r.seed,
                metric.of(&r.report),
            );
        }
        t
    }

    pub fn write_grid_csv(&self, path: &Path) -> Result<(), PipelineError> {
        let mut w = csv::Writer::from_path(path).map_err(|e| PipelineError::csv(path, e))?;
        w.write_record(grid_header(self.classes))
            .map_err(|e| PipelineError::csv(path, e))?;
        for r in &self.rows {
            let mut rec = vec![
                r.method.id().to_string(),
                r.view_config.clone(),
                r.seed.to_string(),
                r.report.qwk.to_string(),
                r.report.amae.to_string(),
                r.report.accuracy.to_string(),
            ];
            rec.extend(r.report.sens.iter().map(opt));
            rec.extend(r.report.mae_per_class.iter().map(opt));
            w.write_record(&rec)
                .map_err(|e| PipelineError::csv(path, e))?;
        }
        w.flush().map_err(|e| PipelineError::io(path, e))
    }

    pub fn write_weights_csv(&self, path: &Path) -> Result<(), PipelineError> {
        let mut w = csv::Writer::from_path(path).map_err(|e| PipelineError::csv(path, e))?;
        w.write_record([
            "method",
            "view_config",
            "seed",
            "view",
            "weight",
            "validation_amae",
        ])
        .map_err(|e| PipelineError::csv(path, e))?;
        for r in &self.weights {
            for (view, weight) in r.views.iter().zip(&r.weights) {
                w.write_record([
                    r.method.id(),
                    &r.view_config,
                    &r.seed.to_string(),
                    view,
                    &weight.to_string(),
                    &r.validation_amae.to_string(),
                ])
                .map_err(|e| PipelineError::csv(path, e))?;
            }
        }
        w.flush().map_err(|e| PipelineError::io(path, e))
    }

    pub fn write_selections_csv(&self, path: &Path) -> Result<(), PipelineError> {
        let mut w = csv::Writer::from_path(path).map_err(|e| PipelineError::csv(path, e))?;
        w.write_record([
            "method",
            "view",
            "seed",
            "learning_rate",
            "head",
            "loss",
            "cv_amae",
        ])
        .map_err(|e| PipelineError::csv(path, e))?;
        for s in &self.selections {
            w.write_record([
                s.method.id(),
                &s.view,
                &s.seed.to_string(),
                &s.config.learning_rate.to_string(),
                &format!("{:?}", s.config.head),
                &format!("{:?}", s.config.loss),
                &opt(&s.cv_amae),
            ])
            .map_err(|e| PipelineError::csv(path, e))?;
        }
        w.flush().map_err(|e| PipelineError::io(path, e))
    }

    /// Reads a grid CSV written by [`ExperimentGrid::write_grid_csv`].
    pub fn read_grid_csv(path: &Path) -> Result<Self, PipelineError> {
        let file = std::fs::File::open(path).map_err(|e| PipelineError::io(path, e))?;
        let mut reader = csv::Reader::from_reader(file);
        let header = reader
            .headers()
            .map_err(|e| PipelineError::csv(path, e))?
            .clone();
        let classes = header.iter().filter(|h| h.starts_with("sens_")).count();
        let expected = grid_header(classes);
        if header.iter().ne(expected.iter().map(String::as_str)) {
            return Err(PipelineError::Config(format!(
                "{}: not a grid file (expected header `{}`)",
                path.display(),
                expected.join(",")
            )));
        }
        let mut rows = Vec::new();
        for (i, record) in reader.records().enumerate() {
            let record = record.map_err(|e| PipelineError::csv(path, e))?;
            let row = i + 2;
            let num = |c: usize| -> Result<f64, PipelineError> {
                record[c].parse().map_err(|_| PipelineError::NonNumeric {
                    path: path.into(),
                    row,
                    column: header[c].to_string(),
                    value: record[c].to_string(),
                })
            };
            let maybe = |c: usize| -> Result<Option<f64>, PipelineError> {
                if record[c].is_empty() {
                    Ok(None)
                } else {
                    num(c).map(Some)
                }
            };
            let method: Method = record[0].parse().map_err(|e: ordinal_core::Error| {
                PipelineError::Config(format!("{}, row {row}: {e}", path.display()))
            })?;
            let seed = record[2].parse().map_err(|_| PipelineError::NonNumeric {
                path: path.into(),
                row,
                column: "seed".into(),
                value: record[2].to_string(),
            })?;
            rows.push(GridRow {
                method,
                view_config: record[1].to_string(),
                seed,
                report: MetricReport {
                    qwk: num(3)?,
                    amae: num(4)?,
                    accuracy: num(5)?,
                    sens: (0..classes)
                        .map(|j| maybe(6 + j))
                        .collect::<Result<_, _>>()?,
                    mae_per_class: (0..classes)
                        .map(|j| maybe(6 + classes + j))
                        .collect::<Result<_, _>>()?,
                },
            });
        }
        Ok(ExperimentGrid {
            classes,
            rows,
            ..Default::default()
        })
    }
}
