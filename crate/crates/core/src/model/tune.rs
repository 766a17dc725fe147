//! Methodologies, their hyperparameter grids and the AMAE-guided search.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{train, Backbone, Head, ModelConfig, DEFAULT_BATCH_SIZE, DEFAULT_EPOCHS};
use crate::clm::Link;
use crate::data::{complement, stratified_folds, FeatureMatrix};
use crate::error::{invalid, Error, Result};
use crate::losses::{LossKind, ProximityTransform, SordConfig};
use crate::metrics::amae;
use crate::softlabel::{
    SoftLabelConfig, SoftLabelKind, DEFAULT_BETA_CONCENTRATION, DEFAULT_EXPONENTIAL_TAU,
};
use crate::types::OrdinalLabel;

/// Maximum number of configurations evaluated by one search.
pub const SEARCH_BUDGET: usize = 15;

pub const LEARNING_RATES: [f64; 3] = [1e-4, 1e-3, 1e-2];
pub const ADJACENT_PROBABILITIES: [f64; 3] = [0.01, 0.05, 0.10];
pub const SMOOTHING_FACTORS: [f64; 2] = [0.8, 1.0];
pub const EXPONENTIAL_EXPONENTS: [f64; 3] = [1.0, 1.5, 2.0];
pub const CDWCE_EXPONENTS: [f64; 4] = [0.25, 0.50, 0.75, 1.00];
pub const SORD_BETAS: [f64; 12] = [
    0.3, 0.5, 0.8, 1.0, 2.0, 3.0, 4.0, 7.0, 10.0, 15.0, 20.0, 25.0,
];
pub const SLACE_BETAS: [f64; 12] = [
    1.0, 0.3, 0.5, 0.8, 2.0, 3.0, 4.0, 7.0, 10.0, 15.0, 20.0, 25.0,
];
pub const MIN_DISTANCES: [f64; 3] = [0.0, 0.5, 1.0];

/// Loss and output-layer combinations compared in an experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Nominal,
    Triangular,
    Beta,
    Exponential,
    Cdwce,
    Sord,
    Slace,
    Clm,
    ClmTriangular,
    ClmBeta,
    ClmExponential,
    ClmCdwce,
    ClmSord,
    ClmSlace,
}

impl Method {
    pub const ALL: [Method; 14] = [
        Method::Nominal,
        Method::Triangular,
        Method::Beta,
        Method::Exponential,
        Method::Cdwce,
        Method::Sord,
        Method::Slace,
        Method::Clm,
        Method::ClmTriangular,
        Method::ClmBeta,
        Method::ClmExponential,
        Method::ClmCdwce,
        Method::ClmSord,
        Method::ClmSlace,
    ];

    pub fn id(self) -> &'static str {
        match self {
            Method::Nominal => "nominal",
            Method::Triangular => "triangular",
            Method::Beta => "beta",
            Method::Exponential => "exponential",
            Method::Cdwce => "cdwce",
            Method::Sord => "sord",
            Method::Slace => "slace",
            Method::Clm => "clm",
            Method::ClmTriangular => "clm_triangular",
            Method::ClmBeta => "clm_beta",
            Method::ClmExponential => "clm_exponential",
            Method::ClmCdwce => "clm_cdwce",
            Method::ClmSord => "clm_sord",
            Method::ClmSlace => "clm_slace",
        }
    }

    /// Human-readable name used in report tables.
    pub fn display_name(self) -> &'static str {
        match self {
            Method::Nominal => "Nominal",
            Method::Triangular => "Triangular",
            Method::Beta => "Beta",
            Method::Exponential => "Exponential",
            Method::Cdwce => "CDWCE",
            Method::Sord => "SORD",
            Method::Slace => "SLACE",
            Method::Clm => "CLM",
            Method::ClmTriangular => "CLM Triangular",
            Method::ClmBeta => "CLM Beta",
            Method::ClmExponential => "CLM Exponential",
            Method::ClmCdwce => "CLM CDWCE",
            Method::ClmSord => "CLM SORD",
            Method::ClmSlace => "CLM SLACE",
        }
    }

    pub fn uses_clm(self) -> bool {
        self >= Method::Clm
    }

    /// The loss family shared by a method and its CLM counterpart.
    fn base(self) -> Method {
        match self {
            Method::Clm => Method::Nominal,
            Method::ClmTriangular => Method::Triangular,
            Method::ClmBeta => Method::Beta,
            Method::ClmExponential => Method::Exponential,
            Method::ClmCdwce => Method::Cdwce,
            Method::ClmSord => Method::Sord,
            Method::ClmSlace => Method::Slace,
            m => m,
        }
    }

    /// Loss candidates, in grid order.
    fn losses(self) -> Vec<LossKind> {
        let soft = |kind: SoftLabelKind| {
            SMOOTHING_FACTORS
                .iter()
                .map(move |&lambda| LossKind::CceSoft(SoftLabelConfig { kind, lambda }))
        };
        match self.base() {
            Method::Nominal => vec![LossKind::Cce],
            Method::Triangular => ADJACENT_PROBABILITIES
                .iter()
                .flat_map(|&alpha_adjacent| soft(SoftLabelKind::Triangular { alpha_adjacent }))
                .collect(),
            Method::Beta => soft(SoftLabelKind::Beta {
                concentration: DEFAULT_BETA_CONCENTRATION,
            })
            .collect(),
            Method::Exponential => EXPONENTIAL_EXPONENTS
                .iter()
                .flat_map(|&p_exponent| {
                    soft(SoftLabelKind::Exponential {
                        tau: DEFAULT_EXPONENTIAL_TAU,
                        p_exponent,
                    })
                })
                .collect(),
            Method::Cdwce => CDWCE_EXPONENTS
                .iter()
                .map(|&alpha| LossKind::Cdwce { alpha })
                .collect(),
            Method::Sord => SORD_BETAS
                .iter()
                .flat_map(|&beta| {
                    ProximityTransform::ALL
                        .into_iter()
                        .map(move |transform| LossKind::Sord(SordConfig { beta, transform }))
                })
                .collect(),
            Method::Slace => SLACE_BETAS
                .iter()
                .map(|&beta| LossKind::Slace { beta })
                .collect(),
            _ => unreachable!("base() only returns softmax methods"),
        }
    }

    /// Every configuration in this method's grid.
    pub fn search_space(self, settings: &TrainSettings) -> SearchSpace {
        let heads: Vec<Head> = if self.uses_clm() {
            MIN_DISTANCES
                .iter()
                .map(|&d_min| Head::Clm {
                    link: settings.link,
                    d_min,
                })
                .collect()
        } else {
            vec![Head::Softmax]
        };
        let mut candidates = Vec::new();
        for &learning_rate in &LEARNING_RATES {
            for loss in self.losses() {
                for &head in &heads {
                    candidates.push(ModelConfig {
                        backbone: settings.backbone,
                        head,
                        loss,
                        learning_rate,
                        epochs: settings.epochs,
                        batch_size: settings.batch_size,
                        seed: settings.seed,
                    });
                }
            }
        }
        SearchSpace { candidates }
    }

    /// The configuration used when tuning is switched off: the grid's middle
    /// learning rate and its first value for every other hyperparameter.
    pub fn default_config(self, settings: &TrainSettings) -> ModelConfig {
        let space = self.search_space(settings);
        let per_rate = space.candidates.len() / LEARNING_RATES.len();
        space.candidates[per_rate].clone()
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.id())
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase().replace([' ', '-'], "_");
        Method::ALL
            .into_iter()
            .find(|m| m.id() == key)
            .ok_or_else(|| invalid("method", format!("unknown method `{s}`")))
    }
}

/// Settings shared by every configuration of a search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainSettings {
    pub backbone: Backbone,
    pub link: Link,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for TrainSettings {
    fn default() -> Self {
        Self {
            backbone: Backbone::Linear,
            link: Link::Logit,
            epochs: DEFAULT_EPOCHS,
            batch_size: DEFAULT_BATCH_SIZE,
            seed: 0,
        }
    }
}

/// Candidate configurations in enumeration order.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchSpace {
    candidates: Vec<ModelConfig>,
}

impl SearchSpace {
    pub fn new(candidates: Vec<ModelConfig>) -> Result<Self> {
        if candidates.is_empty() {
            return Err(Error::Empty("search space"));
        }
        Ok(Self { candidates })
    }

    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }

    pub fn candidates(&self) -> &[ModelConfig] {
        &self.candidates
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TuneOutcome {
    pub best: ModelConfig,
    /// Evaluated configurations with their mean fold AMAE, in evaluation order.
    pub evaluations: Vec<(ModelConfig, f64)>,
    pub exhaustive: bool,
}

/// Picks the configuration with the lowest mean stratified k-fold AMAE.
///
/// Spaces with at most [`SEARCH_BUDGET`] entries are searched exhaustively;
/// larger ones are sampled without replacement. `groups` keeps duplicated
/// samples inside a single fold. A fold whose training diverges scores `J - 1`.
pub fn tune(
    space: &SearchSpace,
    x: &FeatureMatrix,
    y: &[OrdinalLabel],
    groups: &[u64],
    classes: usize,
    seed: u64,
    folds: usize,
) -> Result<TuneOutcome> {
    if space.is_empty() {
        return Err(Error::Empty("search space"));
    }
    if x.rows() != y.len() {
        return Err(Error::LengthMismatch {
            expected: x.rows(),
            actual: y.len(),
        });
    }
    let fold_rows = stratified_folds(y, groups, classes, folds, seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let exhaustive = space.len() <= SEARCH_BUDGET;
    let order: Vec<usize> = if exhaustive {
        (0..space.len()).collect()
    } else {
        sample(&mut rng, space.len(), SEARCH_BUDGET).into_vec()
    };

    let worst = (classes - 1) as f64;
    let mut evaluations = Vec::with_capacity(order.len());
    let mut best: Option<(usize, f64)> = None;
    for (rank, &idx) in order.iter().enumerate() {
        let config = &space.candidates[idx];
        let mut total = 0.0;
        for held_out in &fold_rows {
            let fit_rows = complement(y.len(), held_out);
            let fit_y: Vec<OrdinalLabel> = fit_rows.iter().map(|&i| y[i]).collect();
            let score = match train(config, &x.select(&fit_rows), &fit_y, classes) {
                Ok(model) => {
                    let val = x.select(held_out);
                    let truth: Vec<OrdinalLabel> = held_out.iter().map(|&i| y[i]).collect();
                    let pred = model.predict_all(&val)?;
                    let v = amae(&truth, &pred)?;
                    if v.is_nan() {
                        worst
                    } else {
                        v
                    }
                }
                Err(Error::NonFiniteLoss { epoch }) => {
                    log::warn!(
                        "configuration {idx} diverged at epoch {epoch}; fold scored {worst}"
                    );
                    worst
                }
                Err(e) => return Err(e),
            };
            total += score;
        }
        let mean = total / fold_rows.len() as f64;
        if best.is_none_or(|(_, b)| mean < b) {
            best = Some((rank, mean));
        }
        evaluations.push((config.clone(), mean));
    }
    let (rank, score) = best.expect("at least one configuration evaluated");
    log::debug!(
        "search over {} of {} configurations chose #{rank} (AMAE {score:.4})",
        order.len(),
        space.len()
    );
    Ok(TuneOutcome {
        best: evaluations[rank].0.clone(),
        evaluations,
        exhaustive,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::labels;
    use rand::Rng;
    use std::collections::HashSet;

    fn toy(n: usize, seed: u64) -> (FeatureMatrix, Vec<OrdinalLabel>, Vec<u64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut rows = Vec::new();
        let mut y = Vec::new();
        for i in 0..n {
            let class = i % 3;
            rows.push(vec![
                class as f64 + rng.random_range(-0.8..0.8),
                rng.random_range(-1.0..1.0),
            ]);
            y.push(class);
        }
        let ids = (0..n as u64).collect();
        (FeatureMatrix::from_rows(&rows).unwrap(), labels(&y), ids)
    }

    fn quick() -> TrainSettings {
        TrainSettings {
            epochs: 15,
            ..TrainSettings::default()
        }
    }

    #[test]
    fn grid_sizes() {
        let s = TrainSettings::default();
        let sizes: Vec<usize> = Method::ALL
            .iter()
            .map(|m| m.search_space(&s).len())
            .collect();
        assert_eq!(
            sizes,
            vec![3, 18, 6, 18, 12, 216, 36, 9, 54, 18, 54, 36, 648, 108]
        );
        for m in Method::ALL {
            let space = m.search_space(&s);
            let distinct: Vec<String> = space
                .candidates()
                .iter()
                .map(|c| format!("{c:?}"))
                .collect();
            assert_eq!(
                distinct.iter().collect::<HashSet<_>>().len(),
                distinct.len()
            );
            assert_eq!(m.id().parse::<Method>().unwrap(), m);
            assert_eq!(m.default_config(&s).learning_rate, 1e-3);
        }
    }

    #[test]
    fn single_candidate_is_returned() {
        let (x, y, ids) = toy(30, 1);
        let space = SearchSpace::new(vec![ModelConfig {
            epochs: 5,
            ..ModelConfig::default()
        }])
        .unwrap();
        let out = tune(&space, &x, &y, &ids, 3, 1, 3).unwrap();
        assert_eq!(out.best, space.candidates()[0]);
        assert_eq!(out.evaluations.len(), 1);
    }

    #[test]
    fn diverging_candidate_loses() {
        let (x, y, ids) = toy(30, 2);
        let bad = ModelConfig {
            // A unit batch with the largest step overflows the first update.
            learning_rate: f64::MAX,
            batch_size: 1,
            epochs: 5,
            ..ModelConfig::default()
        };
        let good = ModelConfig {
            learning_rate: 1e-2,
            epochs: 30,
            ..ModelConfig::default()
        };
        let out = tune(
            &SearchSpace::new(vec![bad.clone(), good.clone()]).unwrap(),
            &x,
            &y,
            &ids,
            3,
            2,
            3,
        )
        .unwrap();
        assert_eq!(out.best, good);
        assert_eq!(out.evaluations[0].1, 2.0);
    }

    #[test]
    fn nominal_space_is_exhaustive() {
        let (x, y, ids) = toy(30, 3);
        let out = tune(
            &Method::Nominal.search_space(&quick()),
            &x,
            &y,
            &ids,
            3,
            3,
            3,
        )
        .unwrap();
        assert!(out.exhaustive);
        assert_eq!(out.evaluations.len(), 3);
    }

    #[test]
    fn large_space_is_sampled_without_duplicates() {
        let (x, y, ids) = toy(30, 4);
        let settings = TrainSettings {
            epochs: 2,
            ..quick()
        };
        let out = tune(
            &Method::ClmSord.search_space(&settings),
            &x,
            &y,
            &ids,
            3,
            4,
            3,
        )
        .unwrap();
        assert!(!out.exhaustive);
        assert_eq!(out.evaluations.len(), SEARCH_BUDGET);
        let keys: HashSet<String> = out
            .evaluations
            .iter()
            .map(|(c, _)| format!("{c:?}"))
            .collect();
        assert_eq!(keys.len(), SEARCH_BUDGET);
        let again = tune(
            &Method::ClmSord.search_space(&settings),
            &x,
            &y,
            &ids,
            3,
            4,
            3,
        )
        .unwrap();
        assert_eq!(out, again);
    }

    #[test]
    fn small_class_is_rejected() {
        let (x, mut y, ids) = toy(30, 5);
        for l in y.iter_mut().skip(1) {
            if l.0 == 0 {
                l.0 = 1;
            }
        }
        let err = tune(
            &Method::Nominal.search_space(&quick()),
            &x,
            &y,
            &ids,
            3,
            5,
            3,
        )
        .unwrap_err();
        assert!(matches!(err, Error::ClassTooSmall { class: 0, .. }));
    }
}
