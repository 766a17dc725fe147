use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use ordinal_core::data::MultiViewDataset;
use ordinal_core::metrics::{evaluate, ExpectedNormalization, MetricOptions, MetricReport};
use ordinal_core::model::Method;
use ordinal_core::OrdinalLabel;
use ordinal_pipeline::config::{DataSource, ExperimentConfig};
use ordinal_pipeline::csvio::{read_predictions, write_views_csv};
use ordinal_pipeline::experiment::{fit_view, load_data, plan_seeds};
use ordinal_pipeline::report::stats_markdown;
use ordinal_pipeline::synth::generate_synthetic;
use ordinal_pipeline::{run_experiment, ExperimentGrid};

#[derive(Parser)]
#[command(
    name = "ordinal",
    version,
    about = "Multi-view ordinal classification experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic multi-view dataset as one CSV per view.
    Generate(Common),
    /// Train one method on one view and score it on the test partition.
    Train {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "clm")]
        method: Method,
        #[arg(long, default_value = "crown")]
        view: String,
    },
    /// Run the full method × view configuration × seed grid.
    Experiment(Common),
    /// ANOVA and Tukey HSD over a grid CSV.
    Stats {
        grid: PathBuf,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Score a predictions CSV with `y_true` and `y_pred` columns.
    Metrics {
        predictions: PathBuf,
        #[arg(long)]
        classes: Option<usize>,
        #[arg(long, value_parser = clap::value_parser!(u32).range(1..=2))]
        qwk_exponent: Option<u32>,
        #[arg(long)]
        e_normalization: Option<Normalization>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Normalization {
    N,
    J,
}

impl From<Normalization> for ExpectedNormalization {
    fn from(n: Normalization) -> Self {
        match n {
            Normalization::N => ExpectedNormalization::SampleTotal,
            Normalization::J => ExpectedNormalization::ClassCount,
        }
    }
}

#[derive(Args)]
struct Common {
    /// TOML experiment configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Base seed of the partition (and of synthetic data generation).
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Comma-separated method identifiers, e.g. `nominal,clm`.
    #[arg(long, value_delimiter = ',')]
    methods: Option<Vec<Method>>,
    /// Comma-separated view names.
    #[arg(long, value_delimiter = ',')]
    views: Option<Vec<String>>,
    #[arg(long)]
    n_seeds: Option<usize>,
    #[arg(long)]
    no_tuning: bool,
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..=2))]
    qwk_exponent: Option<u32>,
    #[arg(long)]
    e_normalization: Option<Normalization>,
}

impl Common {
    fn resolve(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::from_toml_file(path)?,
            None => ExperimentConfig::default(),
        };
        if let Some(seed) = self.seed {
            cfg.base_seed = seed;
            if let DataSource::Synthetic {
                seed: data_seed, ..
            } = &mut cfg.data
            {
                *data_seed = seed;
            }
        }
        if let Some(out) = &self.out {
            cfg.output_dir = out.clone();
        }
        if let Some(methods) = &self.methods {
            cfg.methods = methods.clone();
        }
        if let Some(views) = &self.views {
            cfg.views = views.clone();
            cfg.view_configs.clear();
        }
        if let Some(n) = self.n_seeds {
            cfg.n_seeds = n;
        }
        if self.no_tuning {
            cfg.tuning = false;
        }
        if let Some(e) = self.qwk_exponent {
            cfg.qwk_exponent = e;
        }
        if let Some(n) = self.e_normalization {
            cfg.e_normalization = n.into();
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn print_report(report: &MetricReport) {
    println!("QWK       {:.4}", report.qwk);
    println!("AMAE      {:.4}", report.amae);
    println!("Accuracy  {:.4}", report.accuracy);
    let fmt = |v: &[Option<f64>]| {
        v.iter()
            .map(|x| x.map_or("-".to_string(), |x| format!("{x:.3}")))
            .collect::<Vec<_>>()
            .join(" ")
    };
    println!("Sens      {}", fmt(&report.sens));
    println!("MAE       {}", fmt(&report.mae_per_class));
}

fn generate(common: &Common) -> Result<()> {
    let cfg = common.resolve()?;
    let DataSource::Synthetic { config, seed } = &cfg.data else {
        bail!("`generate` needs a synthetic data source");
    };
    let data = generate_synthetic(config, *seed)?;
    let dir = common.out.clone().unwrap_or_else(|| PathBuf::from("data"));
    for (view, path) in write_views_csv(&data, &dir)? {
        println!("{view}: {}", path.display());
    }
    Ok(())
}

fn train_one(common: &Common, method: Method, view: &str) -> Result<()> {
    let cfg = common.resolve()?;
    let data = load_data(&cfg.data)?;
    let data: MultiViewDataset = data.select_views(&[view])?;
    let single = ExperimentConfig {
        n_seeds: 1,
        ..cfg.clone()
    };
    let (split, plans) = plan_seeds(&single, &data)?;
    let fit = fit_view(&single, &data, &plans[0], method, 0, false)?;
    log::info!("trained {method} on {view} with {:?}", fit.config);
    let pred: Vec<OrdinalLabel> = fit.test.iter().map(|p| p.argmax()).collect();
    let truth: Vec<OrdinalLabel> = split.test.iter().map(|&i| data.labels()[i]).collect();
    print_report(&evaluate(
        &truth,
        &pred,
        data.classes(),
        cfg.metric_options(),
    )?);
    if let Some(out) = &common.out {
        write_predictions(out, &split.test, &data, &truth, &pred)?;
        println!("predictions: {}", out.display());
    }
    Ok(())
}

fn write_predictions(
    path: &Path,
    rows: &[usize],
    data: &MultiViewDataset,
    truth: &[OrdinalLabel],
    pred: &[OrdinalLabel],
) -> Result<()> {
    let mut w =
        csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    w.write_record(["id", "y_true", "y_pred"])?;
    for ((&row, t), p) in rows.iter().zip(truth).zip(pred) {
        w.write_record([
            data.ids()[row].to_string(),
            t.0.to_string(),
            p.0.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match Cli::parse().command {
        Command::Generate(common) => generate(&common),
        Command::Train {
            common,
            method,
            view,
        } => train_one(&common, method, &view),
        Command::Experiment(common) => {
            let cfg = common.resolve()?;
            let run = run_experiment(&cfg)?;
            println!("{} rows written to {}", run.rows, run.grid_csv.display());
            Ok(())
        }
        Command::Stats { grid, alpha, out } => {
            let grid = ExperimentGrid::read_grid_csv(&grid)?;
            let md = stats_markdown(&grid, alpha);
            match out {
                Some(path) => std::fs::write(&path, md)
                    .with_context(|| format!("writing {}", path.display()))?,
                None => print!("{md}"),
            }
            Ok(())
        }
        Command::Metrics {
            predictions,
            classes,
            qwk_exponent,
            e_normalization,
        } => {
            let (truth, pred) = read_predictions(&predictions)?;
            let seen = truth
                .iter()
                .chain(&pred)
                .map(|l| l.0 + 1)
                .max()
                .unwrap_or(0);
            let classes = classes.unwrap_or(seen);
            if classes < seen {
                bail!("label {} does not fit {classes} classes", seen - 1);
            }
            let options = MetricOptions {
                qwk_exponent: qwk_exponent.unwrap_or(2),
                normalization: e_normalization.map(Into::into).unwrap_or_default(),
            };
            print_report(&evaluate(&truth, &pred, classes, options)?);
            Ok(())
        }
    }
}
