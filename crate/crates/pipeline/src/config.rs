//! Experiment configuration, read from and written to TOML.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use ordinal_core::clm::Link;
use ordinal_core::metrics::{ExpectedNormalization, MetricOptions};
use ordinal_core::model::{Backbone, Method, TrainSettings, DEFAULT_BATCH_SIZE, DEFAULT_EPOCHS};

use crate::error::PipelineError;
use crate::synth::SynthConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum DataSource {
    Synthetic {
        #[serde(default)]
        config: SynthConfig,
        #[serde(default)]
        seed: u64,
    },
    Csv {
        /// `(view name, file)` pairs.
        views: Vec<ViewFile>,
        #[serde(default = "default_id_column")]
        id_column: String,
        #[serde(default = "default_label_column")]
        label_column: String,
        classes: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViewFile {
    pub name: String,
    pub path: PathBuf,
}

fn default_id_column() -> String {
    "id".into()
}

fn default_label_column() -> String {
    "label".into()
}

impl Default for DataSource {
    fn default() -> Self {
        DataSource::Synthetic {
            config: SynthConfig::default(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainingConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub backbone: Backbone,
    pub link: Link,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            epochs: DEFAULT_EPOCHS,
            batch_size: DEFAULT_BATCH_SIZE,
            backbone: Backbone::Linear,
            link: Link::Logit,
        }
    }
}

impl TrainingConfig {
    pub fn settings(&self, seed: u64) -> TrainSettings {
        TrainSettings {
            backbone: self.backbone,
            link: self.link,
            epochs: self.epochs,
            batch_size: self.batch_size,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub methods: Vec<Method>,
    /// Views available to the experiment.
    pub views: Vec<String>,
    /// View configurations to evaluate, e.g. `"crown+north"`. Empty means
    /// every nonempty combination of `views`.
    pub view_configs: Vec<String>,
    pub n_seeds: usize,
    /// Seed of the fixed train/test partition.
    pub base_seed: u64,
    pub test_fraction: f64,
    pub tuning: bool,
    pub folds: usize,
    pub n_candidates: usize,
    pub qwk_exponent: u32,
    pub e_normalization: ExpectedNormalization,
    pub alpha: f64,
    pub output_dir: PathBuf,
    pub training: TrainingConfig,
    pub data: DataSource,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            methods: Method::ALL.to_vec(),
            views: vec!["crown".into(), "north".into(), "south".into()],
            view_configs: Vec::new(),
            n_seeds: 20,
            base_seed: 0,
            test_fraction: 0.2,
            tuning: true,
            folds: 3,
            n_candidates: ordinal_core::ensemble::DEFAULT_CANDIDATES,
            qwk_exponent: 2,
            e_normalization: ExpectedNormalization::SampleTotal,
            alpha: 0.05,
            output_dir: PathBuf::from("results"),
            training: TrainingConfig::default(),
            data: DataSource::default(),
        }
    }
}

/// A nonempty, ordered selection of views evaluated together.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ViewConfig(pub Vec<String>);

impl ViewConfig {
    pub fn id(&self) -> String {
        self.0.join("+")
    }

    /// `Crown+North` style label used in reports.
    pub fn display(&self) -> String {
        self.0
            .iter()
            .map(|v| {
                let mut c = v.chars();
                c.next()
                    .map(|f| f.to_uppercase().chain(c).collect::<String>())
                    .unwrap_or_default()
            })
            .collect::<Vec<_>>()
            .join("+")
    }
}

/// All nonempty subsets of `views`, singles first, then pairs, and so on.
pub fn all_view_configs(views: &[String]) -> Vec<ViewConfig> {
    let n = views.len();
    let mut out = Vec::new();
    for size in 1..=n {
        for mask in 0u32..(1 << n) {
            if mask.count_ones() as usize == size {
                let members: Vec<String> = (0..n)
                    .filter(|i| mask & (1 << i) != 0)
                    .map(|i| views[i].clone())
                    .collect();
                out.push(ViewConfig(members));
            }
        }
    }
    // Within one size, order lexicographically by view position.
    out.sort_by_key(|c| {
        let pos: Vec<usize> =
            c.0.iter()
                .map(|v| views.iter().position(|w| w == v).unwrap_or(0))
                .collect();
        (pos.len(), pos)
    });
    out
}

impl ExperimentConfig {
    pub fn from_toml_file(path: &Path) -> Result<Self, PipelineError> {
        let text = std::fs::read_to_string(path).map_err(|e| PipelineError::io(path, e))?;
        toml::from_str(&text).map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))
    }

    pub fn to_toml(&self) -> Result<String, PipelineError> {
        toml::to_string_pretty(self).map_err(|e| PipelineError::Config(e.to_string()))
    }

    pub fn metric_options(&self) -> MetricOptions {
        MetricOptions {
            qwk_exponent: self.qwk_exponent,
            normalization: self.e_normalization,
        }
    }

    pub fn resolved_view_configs(&self) -> Result<Vec<ViewConfig>, PipelineError> {
        if self.view_configs.is_empty() {
            return Ok(all_view_configs(&self.views));
        }
        self.view_configs
            .iter()
            .map(|entry| {
                let members: Vec<String> = entry.split('+').map(|s| s.trim().to_string()).collect();
                if let Some(m) = members.iter().find(|m| !self.views.contains(m)) {
                    return Err(PipelineError::Config(format!(
                        "view configuration `{entry}` uses unknown view `{m}`"
                    )));
                }
                Ok(ViewConfig(members))
            })
            .collect()
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        let bad = |m: &str| Err(PipelineError::Config(m.to_string()));
        if self.methods.is_empty() {
            return bad("at least one method is required");
        }
        if self.views.is_empty() {
            return bad("at least one view is required");
        }
        if self.n_seeds == 0 {
            return bad("n_seeds must be at least 1");
        }
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return bad("test_fraction must lie in (0, 1)");
        }
        if self.folds < 2 {
            return bad("folds must be at least 2");
        }
        if self.n_candidates == 0 {
            return bad("n_candidates must be at least 1");
        }
        if !(1..=2).contains(&self.qwk_exponent) {
            return bad("qwk_exponent must be 1 or 2");
        }
        self.resolved_view_configs()?;
        Ok(())
    }
}
