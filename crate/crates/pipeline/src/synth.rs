//! Synthetic multi-view ordinal data.
//!
//! Every sample has a scalar latent severity `z`. Labels are assigned by rank
//! so that the class sizes match the requested proportions exactly. Each view
//! observes `z` through its own random loadings, corrupted by view noise that
//! is partly shared across views.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use ordinal_core::data::{FeatureMatrix, MultiViewDataset};
use ordinal_core::OrdinalLabel;

use crate::error::PipelineError;

pub const DEFAULT_PROPORTIONS: [f64; 4] = [0.1356, 0.3458, 0.3593, 0.1593];
pub const DEFAULT_VIEWS: [&str; 3] = ["crown", "north", "south"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub n_samples: usize,
    pub n_features_per_view: usize,
    pub classes: usize,
    pub class_proportions: Vec<f64>,
    pub view_names: Vec<String>,
    /// Standard deviation of the latent noise seen by each view.
    pub view_noise: Vec<f64>,
    /// Correlation of the latent noise between any two views.
    pub latent_correlation: f64,
    /// Per-feature measurement noise, relative to the view noise.
    pub feature_noise: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_samples: 295,
            n_features_per_view: 10,
            classes: 4,
            class_proportions: DEFAULT_PROPORTIONS.to_vec(),
            view_names: DEFAULT_VIEWS.iter().map(|s| s.to_string()).collect(),
            view_noise: vec![0.8, 0.8, 0.8],
            latent_correlation: 0.2,
            feature_noise: 1.0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<(), PipelineError> {
        let bad = |reason: String| Err(PipelineError::Config(reason));
        if self.classes < 2 {
            return bad("synthetic data needs at least two classes".into());
        }
        if self.class_proportions.len() != self.classes {
            return bad(format!(
                "{} class proportions for {} classes",
                self.class_proportions.len(),
                self.classes
            ));
        }
        if self
            .class_proportions
            .iter()
            .any(|p| !(*p > 0.0 && p.is_finite()))
        {
            return bad("class proportions must be positive".into());
        }
        let total: f64 = self.class_proportions.iter().sum();
        if (total - 1.0).abs() > 1e-6 {
            return bad(format!("class proportions sum to {total}, not 1"));
        }
        if self.view_names.is_empty() || self.view_noise.len() != self.view_names.len() {
            return bad("need one noise level per view and at least one view".into());
        }
        if self
            .view_noise
            .iter()
            .any(|s| !(*s >= 0.0 && s.is_finite()))
        {
            return bad("view noise must be nonnegative".into());
        }
        if !(0.0..=1.0).contains(&self.latent_correlation) {
            return bad("latent correlation must lie in [0, 1]".into());
        }
        if !(self.feature_noise >= 0.0 && self.feature_noise.is_finite()) {
            return bad("feature noise must be nonnegative".into());
        }
        if self.n_features_per_view == 0 {
            return bad("views need at least one feature".into());
        }
        Ok(())
    }
}

/// Largest-remainder apportionment of `total` items to `weights`.
pub fn apportion(total: usize, weights: &[f64]) -> Vec<usize> {
    let sum: f64 = weights.iter().sum();
    let quotas: Vec<f64> = weights.iter().map(|w| total as f64 * w / sum).collect();
    let mut counts: Vec<usize> = quotas.iter().map(|q| (q + 1e-9).floor() as usize).collect();
    let assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| {
        let (ra, rb) = (quotas[a] - counts[a] as f64, quotas[b] - counts[b] as f64);
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for &c in order.iter().take(total.saturating_sub(assigned)) {
        counts[c] += 1;
    }
    counts
}

pub fn generate_synthetic(cfg: &SynthConfig, seed: u64) -> Result<MultiViewDataset, PipelineError> {
    cfg.validate()?;
    let n = cfg.n_samples;
    let counts = apportion(n, &cfg.class_proportions);
    if let Some(class) = counts.iter().position(|&c| c == 0) {
        return Err(PipelineError::Config(format!(
            "{n} samples leave class {class} empty at the requested proportions"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut normal = || -> f64 { StandardNormal.sample(&mut rng) };

    let latent: Vec<f64> = (0..n).map(|_| normal()).collect();
    let mut by_rank: Vec<usize> = (0..n).collect();
    by_rank.sort_by(|&a, &b| latent[a].total_cmp(&latent[b]));
    let mut labels = vec![OrdinalLabel(0); n];
    let mut pos = 0;
    for (class, &count) in counts.iter().enumerate() {
        for &i in &by_rank[pos..pos + count] {
            labels[i] = OrdinalLabel(class);
        }
        pos += count;
    }

    let shared: Vec<f64> = (0..n).map(|_| normal()).collect();
    let rho = cfg.latent_correlation;
    let own = (1.0 - rho * rho).sqrt();
    let d = cfg.n_features_per_view;
    let mut views = Vec::with_capacity(cfg.view_names.len());
    for &sigma in &cfg.view_noise {
        let loadings: Vec<f64> = (0..d).map(|_| normal()).collect();
        let mut data = Vec::with_capacity(n * d);
        for i in 0..n {
            let seen = latent[i] + sigma * (rho * shared[i] + own * normal());
            for a in &loadings {
                data.push(a * seen + sigma * cfg.feature_noise * normal());
            }
        }
        views.push(FeatureMatrix::new(n, d, data)?);
    }
    Ok(MultiViewDataset::new(
        cfg.view_names.clone(),
        views,
        labels,
        (0..n as u64).collect(),
        cfg.classes,
    )?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_counts_follow_proportions() {
        let data = generate_synthetic(&SynthConfig::default(), 1).unwrap();
        assert_eq!(data.class_counts(), vec![40, 102, 106, 47]);
        assert_eq!(data.view_names(), &["crown", "north", "south"]);
        assert_eq!(data.view_at(0).cols(), 10);
    }

    #[test]
    fn generation_is_deterministic() {
        let cfg = SynthConfig::default();
        assert_eq!(
            generate_synthetic(&cfg, 7).unwrap(),
            generate_synthetic(&cfg, 7).unwrap()
        );
        assert_ne!(
            generate_synthetic(&cfg, 7).unwrap(),
            generate_synthetic(&cfg, 8).unwrap()
        );
    }

    #[test]
    fn infeasible_configs_are_rejected() {
        let tiny = SynthConfig {
            n_samples: 3,
            ..SynthConfig::default()
        };
        assert!(generate_synthetic(&tiny, 0).is_err());
        let bad = SynthConfig {
            class_proportions: vec![0.5, 0.5, 0.5, 0.5],
            ..SynthConfig::default()
        };
        assert!(generate_synthetic(&bad, 0).is_err());
    }

    #[test]
    fn apportion_matches_hamilton() {
        assert_eq!(apportion(295, &DEFAULT_PROPORTIONS), vec![40, 102, 106, 47]);
        assert_eq!(apportion(10, &[1.0, 1.0, 1.0]), vec![4, 3, 3]);
    }
}
