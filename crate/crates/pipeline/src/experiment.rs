//! The (method × view configuration × seed) experiment grid.
//!
//! One stratified train/test partition is drawn from the run's base seed and
//! shared by every cell. Each seed bootstraps the training part per class,
//! then every (method, view) pair is tuned and trained on it. Multi-view
//! cells combine their members' probabilities with weights searched on
//! out-of-fold training predictions, so the test rows never reach tuning or
//! the weight search.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use ordinal_core::data::{
    complement, stratified_folds, stratified_resample_indices, stratified_split_indices,
    MultiViewDataset, SplitIndices,
};
use ordinal_core::ensemble::{aggregate, optimize_weights, ViewProbMatrix};
use ordinal_core::metrics::evaluate;
use ordinal_core::model::{train, tune, Method, ModelConfig};
use ordinal_core::{OrdinalLabel, ProbabilityVector};

use crate::config::{DataSource, ExperimentConfig, ViewConfig};
use crate::csvio::{load_views_csv, CsvLayout};
use crate::error::PipelineError;
use crate::grid::{ExperimentGrid, GridRow, Selection, WeightRow};
use crate::report;
use crate::synth::generate_synthetic;

const RESAMPLE: u64 = 1;
const FOLDS: u64 = 2;
const INIT: u64 = 3;
const WEIGHTS: u64 = 4;

/// Mixes `parts` into `base` with the splitmix64 finaliser.
pub fn derive_seed(base: u64, parts: &[u64]) -> u64 {
    let mut h = base;
    for &p in parts {
        h = h
            .wrapping_add(0x9E37_79B9_7F4A_7C15)
            .wrapping_add(p.wrapping_mul(0xBF58_476D_1CE4_E5B9));
        h = (h ^ (h >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        h = (h ^ (h >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        h ^= h >> 31;
    }
    h
}

/// Rows used by one seed, as indices into the full dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct SeedPlan {
    pub seed: u64,
    /// Bootstrap of the base training part; may repeat rows.
    pub train_rows: Vec<usize>,
    pub test_rows: Vec<usize>,
}

/// The base partition and the per-seed bootstrap of its training part.
pub fn plan_seeds(
    cfg: &ExperimentConfig,
    data: &MultiViewDataset,
) -> Result<(SplitIndices, Vec<SeedPlan>), PipelineError> {
    let split = stratified_split_indices(
        data.labels(),
        data.classes(),
        cfg.test_fraction,
        cfg.base_seed,
    )?;
    let train_labels: Vec<OrdinalLabel> = split.train.iter().map(|&i| data.labels()[i]).collect();
    let plans = (0..cfg.n_seeds as u64)
        .map(|seed| {
            let picks = stratified_resample_indices(
                &train_labels,
                data.classes(),
                derive_seed(cfg.base_seed, &[seed, RESAMPLE]),
            )?;
            Ok(SeedPlan {
                seed,
                train_rows: picks.iter().map(|&k| split.train[k]).collect(),
                test_rows: split.test.clone(),
            })
        })
        .collect::<Result<Vec<_>, PipelineError>>()?;
    Ok((split, plans))
}

pub fn load_data(source: &DataSource) -> Result<MultiViewDataset, PipelineError> {
    match source {
        DataSource::Synthetic { config, seed } => generate_synthetic(config, *seed),
        DataSource::Csv {
            views,
            id_column,
            label_column,
            classes,
        } => {
            let paths: Vec<(String, PathBuf)> = views
                .iter()
                .map(|v| (v.name.clone(), v.path.clone()))
                .collect();
            load_views_csv(
                &paths,
                &CsvLayout {
                    id_column: id_column.clone(),
                    label_column: label_column.clone(),
                    classes: *classes,
                },
            )
        }
    }
}

/// Trains one method on one view for one seed.
///
/// Returns the selected configuration and its cross-validated score, the
/// out-of-fold probabilities of the training rows (when asked for), and the
/// test probabilities of the model refit on all training rows.
pub struct ViewFit {
    pub config: ModelConfig,
    pub cv_amae: Option<f64>,
    pub oof: Option<Vec<ProbabilityVector>>,
    pub test: Vec<ProbabilityVector>,
}

pub fn fit_view(
    cfg: &ExperimentConfig,
    data: &MultiViewDataset,
    plan: &SeedPlan,
    method: Method,
    view: usize,
    with_oof: bool,
) -> ordinal_core::Result<ViewFit> {
    let classes = data.classes();
    let x = data.view_at(view).select(&plan.train_rows);
    let y: Vec<OrdinalLabel> = plan.train_rows.iter().map(|&i| data.labels()[i]).collect();
    let groups: Vec<u64> = plan.train_rows.iter().map(|&i| data.ids()[i]).collect();
    let fold_seed = derive_seed(cfg.base_seed, &[plan.seed, FOLDS]);
    let settings = cfg
        .training
        .settings(derive_seed(cfg.base_seed, &[plan.seed, INIT, view as u64]));

    let (config, cv_amae) = if cfg.tuning {
        let outcome = tune(
            &method.search_space(&settings),
            &x,
            &y,
            &groups,
            classes,
            fold_seed,
            cfg.folds,
        )?;
        let score = outcome
            .evaluations
            .iter()
            .find(|(c, _)| *c == outcome.best)
            .map(|(_, s)| *s);
        (outcome.best, score)
    } else {
        (method.default_config(&settings), None)
    };

    let oof = if with_oof {
        let folds = stratified_folds(&y, &groups, classes, cfg.folds, fold_seed)?;
        let mut probs: Vec<Option<ProbabilityVector>> = vec![None; y.len()];
        for held_out in &folds {
            let fit_rows = complement(y.len(), held_out);
            let fit_y: Vec<OrdinalLabel> = fit_rows.iter().map(|&i| y[i]).collect();
            let model = train(&config, &x.select(&fit_rows), &fit_y, classes)?;
            for &i in held_out {
                probs[i] = Some(model.predict_proba(x.row(i))?);
            }
        }
        Some(
            probs
                .into_iter()
                .map(|p| p.expect("every row is held out once"))
                .collect(),
        )
    } else {
        None
    };

    let model = train(&config, &x, &y, classes)?;
    let test = model.predict_proba_all(&data.view_at(view).select(&plan.test_rows))?;
    Ok(ViewFit {
        config,
        cv_amae,
        oof,
        test,
    })
}

/// Grid produced so far and the first failure, if any.
pub struct GridOutcome {
    pub grid: ExperimentGrid,
    pub error: Option<PipelineError>,
}

/// Runs every cell of the grid on `data`. Cells whose jobs failed are left
/// out of the grid and the first failure in grid order is reported.
pub fn execute(
    cfg: &ExperimentConfig,
    data: &MultiViewDataset,
) -> Result<GridOutcome, PipelineError> {
    cfg.validate()?;
    let view_names: Vec<&str> = cfg.views.iter().map(String::as_str).collect();
    let data = data.select_views(&view_names)?;
    let view_configs = cfg.resolved_view_configs()?;
    let (_, plans) = plan_seeds(cfg, &data)?;
    let view_index = |name: &str| {
        cfg.views
            .iter()
            .position(|v| v == name)
            .expect("validated view")
    };

    let needs_oof: Vec<bool> = (0..cfg.views.len())
        .map(|v| {
            view_configs
                .iter()
                .any(|c| c.0.len() > 1 && c.0.iter().any(|m| view_index(m) == v))
        })
        .collect();
    let used: Vec<bool> = (0..cfg.views.len())
        .map(|v| {
            view_configs
                .iter()
                .any(|c| c.0.iter().any(|m| view_index(m) == v))
        })
        .collect();

    let mut jobs = Vec::new();
    for &method in &cfg.methods {
        for (v, _) in used.iter().enumerate().filter(|(_, u)| **u) {
            for plan in &plans {
                jobs.push((method, v, plan));
            }
        }
    }
    log::info!(
        "{} per-view fits over {} seeds, {} view configurations",
        jobs.len(),
        plans.len(),
        view_configs.len()
    );
    let fits: BTreeMap<(Method, usize, u64), Result<ViewFit, PipelineError>> = jobs
        .par_iter()
        .map(|&(method, v, plan)| {
            let fit = fit_view(cfg, &data, plan, method, v, needs_oof[v]).map_err(|source| {
                PipelineError::Job {
                    context: format!("method {method}, view {}, seed {}", cfg.views[v], plan.seed),
                    source,
                }
            });
            ((method, v, plan.seed), fit)
        })
        .collect();

    let mut cells = Vec::new();
    for &method in &cfg.methods {
        for vc in &view_configs {
            for plan in &plans {
                cells.push((method, vc, plan));
            }
        }
    }
    let results: Vec<Result<CellResult, PipelineError>> = cells
        .par_iter()
        .map(|&(method, vc, plan)| {
            let members: Vec<&ViewFit> =
                vc.0.iter()
                    .map(|name| match &fits[&(method, view_index(name), plan.seed)] {
                        Ok(f) => Ok(f),
                        Err(e) => Err(PipelineError::Config(format!(
                            "skipped {method}/{}/{}: {e}",
                            vc.id(),
                            plan.seed
                        ))),
                    })
                    .collect::<Result<_, _>>()?;
            evaluate_cell(cfg, &data, plan, method, vc, &members).map_err(|source| {
                PipelineError::Job {
                    context: format!(
                        "method {method}, view configuration {}, seed {}",
                        vc.id(),
                        plan.seed
                    ),
                    source,
                }
            })
        })
        .collect();

    let mut grid = ExperimentGrid {
        classes: data.classes(),
        ..Default::default()
    };
    for ((method, v, seed), fit) in &fits {
        if let Ok(f) = fit {
            grid.selections.push(Selection {
                method: *method,
                view: cfg.views[*v].clone(),
                seed: *seed,
                config: f.config.clone(),
                cv_amae: f.cv_amae,
            });
        }
    }
    grid.selections.sort_by_key(|s| {
        (
            cfg.methods.iter().position(|m| *m == s.method),
            view_index(&s.view),
            s.seed,
        )
    });
    // A failed fit is reported itself rather than through the cells it skipped.
    let mut error = None;
    let mut fits = fits;
    for &(method, v, plan) in &jobs {
        if let Some(Err(e)) = fits.remove(&(method, v, plan.seed)) {
            error.get_or_insert(e);
        }
    }
    for result in results {
        match result {
            Ok(cell) => {
                grid.rows.push(cell.row);
                grid.weights.extend(cell.weights);
            }
            Err(e) => {
                error.get_or_insert(e);
            }
        }
    }
    Ok(GridOutcome { grid, error })
}

struct CellResult {
    row: GridRow,
    weights: Option<WeightRow>,
}

fn evaluate_cell(
    cfg: &ExperimentConfig,
    data: &MultiViewDataset,
    plan: &SeedPlan,
    method: Method,
    vc: &ViewConfig,
    members: &[&ViewFit],
) -> ordinal_core::Result<CellResult> {
    let truth: Vec<OrdinalLabel> = plan.test_rows.iter().map(|&i| data.labels()[i]).collect();
    let (pred, weights) = if let [single] = members {
        (
            single
                .test
                .iter()
                .map(ProbabilityVector::argmax)
                .collect::<Vec<_>>(),
            None,
        )
    } else {
        let train_y: Vec<OrdinalLabel> =
            plan.train_rows.iter().map(|&i| data.labels()[i]).collect();
        let stack = |rows: usize, get: &dyn Fn(&ViewFit, usize) -> ProbabilityVector| {
            (0..rows)
                .map(|i| ViewProbMatrix::new(members.iter().map(|m| get(m, i)).collect()))
                .collect::<ordinal_core::Result<Vec<_>>>()
        };
        let oof = stack(train_y.len(), &|m, i| {
            m.oof
                .as_ref()
                .expect("multi-view members carry out-of-fold predictions")[i]
                .clone()
        })?;
        let search = optimize_weights(
            &oof,
            &train_y,
            cfg.n_candidates,
            derive_seed(cfg.base_seed, &[plan.seed, WEIGHTS]),
        )?;
        let test = stack(truth.len(), &|m, i| m.test[i].clone())?;
        let pred = test
            .iter()
            .map(|p| Ok(aggregate(p, &search.weights)?.argmax()))
            .collect::<ordinal_core::Result<Vec<_>>>()?;
        let row = WeightRow {
            method,
            view_config: vc.id(),
            seed: plan.seed,
            views: vc.0.clone(),
            weights: search.weights.as_slice().to_vec(),
            validation_amae: search.amae,
        };
        (pred, Some(row))
    };
    let report = evaluate(&truth, &pred, data.classes(), cfg.metric_options())?;
    Ok(CellResult {
        row: GridRow {
            method,
            view_config: vc.id(),
            seed: plan.seed,
            report,
        },
        weights,
    })
}

/// Files written by [`run_experiment`].
#[derive(Debug, Clone)]
pub struct RunArtifacts {
    pub dir: PathBuf,
    pub grid_csv: PathBuf,
    pub rows: usize,
}

/// Loads the data, runs the grid and writes `grid.csv`, `weights.csv`,
/// `selections.csv`, `summary.md`, `stats.md` and the resolved `config.toml`
/// into the output directory. The CSVs are written even when a job fails.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunArtifacts, PipelineError> {
    cfg.validate()?;
    let data = load_data(&cfg.data)?;
    run_experiment_on(cfg, &data)
}

pub fn run_experiment_on(
    cfg: &ExperimentConfig,
    data: &MultiViewDataset,
) -> Result<RunArtifacts, PipelineError> {
    let dir = cfg.output_dir.clone();
    std::fs::create_dir_all(&dir).map_err(|e| PipelineError::io(&dir, e))?;
    write_text(&dir.join("config.toml"), &cfg.to_toml()?)?;
    let outcome = execute(cfg, data)?;
    let grid = &outcome.grid;
    let grid_csv = dir.join("grid.csv");
    grid.write_grid_csv(&grid_csv)?;
    grid.write_weights_csv(&dir.join("weights.csv"))?;
    grid.write_selections_csv(&dir.join("selections.csv"))?;
    if let Some(e) = outcome.error {
        log::error!("aborting after writing {} completed rows", grid.rows.len());
        return Err(e);
    }
    let views = cfg.resolved_view_configs()?;
    write_text(
        &dir.join("summary.md"),
        &report::summary_markdown(grid, &cfg.methods, &views),
    )?;
    write_text(
        &dir.join("stats.md"),
        &report::stats_markdown(grid, cfg.alpha),
    )?;
    Ok(RunArtifacts {
        dir,
        grid_csv,
        rows: grid.rows.len(),
    })
}

pub(crate) fn write_text(path: &Path, text: &str) -> Result<(), PipelineError> {
    std::fs::write(path, text).map_err(|e| PipelineError::io(path, e))
}
