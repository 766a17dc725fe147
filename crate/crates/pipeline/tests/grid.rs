use ordinal_core::clm::Link;
use ordinal_core::data::{stratified_split_indices, FeatureMatrix, MultiViewDataset};
use ordinal_core::metrics::amae;
use ordinal_core::model::{train, Head, Method, ModelConfig};
use ordinal_core::OrdinalLabel;
use ordinal_pipeline::config::{DataSource, ExperimentConfig, TrainingConfig};
use ordinal_pipeline::experiment::{execute, plan_seeds};
use ordinal_pipeline::synth::{generate_synthetic, SynthConfig};
use ordinal_pipeline::{run_experiment, ExperimentGrid};

fn synth() -> SynthConfig {
    SynthConfig {
        n_samples: 90,
        n_features_per_view: 3,
        ..SynthConfig::default()
    }
}

fn config(methods: Vec<Method>, n_seeds: usize) -> ExperimentConfig {
    ExperimentConfig {
        methods,
        n_seeds,
        tuning: false,
        n_candidates: 25,
        training: TrainingConfig {
            epochs: 8,
            ..Default::default()
        },
        data: DataSource::Synthetic {
            config: synth(),
            seed: 3,
        },
        ..ExperimentConfig::default()
    }
}

#[test]
fn one_cell_gives_one_row() {
    let mut cfg = config(vec![Method::Clm], 1);
    cfg.view_configs = vec!["north".into()];
    let data = generate_synthetic(&synth(), 3).unwrap();
    let out = execute(&cfg, &data).unwrap();
    assert!(out.error.is_none());
    assert_eq!(out.grid.rows.len(), 1);
    assert!(out.grid.weights.is_empty());
    assert_eq!(out.grid.selections.len(), 1);
}

#[test]
fn full_grid_cardinality() {
    let cfg = config(vec![Method::Nominal, Method::Cdwce], 2);
    let data = generate_synthetic(&synth(), 3).unwrap();
    let grid = execute(&cfg, &data).unwrap().grid;
    assert_eq!(grid.rows.len(), 2 * 7 * 2);
    let mut keys: Vec<_> = grid
        .rows
        .iter()
        .map(|r| (r.method, r.view_config.clone(), r.seed))
        .collect();
    keys.sort();
    keys.dedup();
    assert_eq!(keys.len(), 28);
}

#[test]
fn reruns_write_identical_files() {
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    let mut outputs = Vec::new();
    for dir in &dirs {
        let mut cfg = config(vec![Method::Nominal, Method::Slace], 2);
        cfg.tuning = true;
        cfg.output_dir = dir.path().to_path_buf();
        run_experiment(&cfg).unwrap();
        let read = |name: &str| std::fs::read(dir.path().join(name)).unwrap();
        outputs.push([
            read("grid.csv"),
            read("weights.csv"),
            read("selections.csv"),
        ]);
    }
    assert_eq!(outputs[0], outputs[1]);
    let grid = ExperimentGrid::read_grid_csv(&dirs[0].path().join("grid.csv")).unwrap();
    assert_eq!(grid.rows.len(), 2 * 7 * 2);
}

/// Distorts every test-row feature in every view.
fn scramble_test_rows(data: &MultiViewDataset, test: &[usize]) -> MultiViewDataset {
    let views: Vec<FeatureMatrix> = (0..data.view_names().len())
        .map(|v| {
            let m = data.view_at(v);
            let mut values = Vec::with_capacity(m.rows() * m.cols());
            for r in 0..m.rows() {
                let scrambled = test.contains(&r);
                values.extend(
                    m.row(r)
                        .iter()
                        .map(|x| if scrambled { 100.0 - 7.0 * x } else { *x }),
                );
            }
            FeatureMatrix::new(m.rows(), m.cols(), values).unwrap()
        })
        .collect();
    MultiViewDataset::new(
        data.view_names().to_vec(),
        views,
        data.labels().to_vec(),
        data.ids().to_vec(),
        data.classes(),
    )
    .unwrap()
}

#[test]
fn test_rows_never_reach_tuning_or_weights() {
    let mut cfg = config(vec![Method::Clm], 2);
    cfg.tuning = true;
    let data = generate_synthetic(&synth(), 3).unwrap();
    let (split, plans) = plan_seeds(&cfg, &data).unwrap();
    for p in &plans {
        assert!(p.train_rows.iter().all(|r| !split.test.contains(r)));
    }
    let clean = execute(&cfg, &data).unwrap().grid;
    let dirty = execute(&cfg, &scramble_test_rows(&data, &split.test))
        .unwrap()
        .grid;
    assert_eq!(clean.selections, dirty.selections);
    assert_eq!(clean.weights, dirty.weights);
    assert!(clean
        .rows
        .iter()
        .zip(&dirty.rows)
        .any(|(a, b)| a.report != b.report));
}

#[test]
fn noiseless_views_are_linearly_learnable() {
    let clean = SynthConfig {
        n_samples: 200,
        view_noise: vec![0.0; 3],
        ..SynthConfig::default()
    };
    let data = generate_synthetic(&clean, 11).unwrap();
    let split = stratified_split_indices(data.labels(), data.classes(), 0.2, 0).unwrap();
    let pick =
        |rows: &[usize]| -> Vec<OrdinalLabel> { rows.iter().map(|&i| data.labels()[i]).collect() };
    for head in [
        Head::Softmax,
        Head::Clm {
            link: Link::Logit,
            d_min: 0.0,
        },
    ] {
        let cfg = ModelConfig {
            head,
            learning_rate: 1e-2,
            epochs: 2000,
            ..ModelConfig::default()
        };
        for v in 0..3 {
            let x = data.view_at(v);
            let model = train(
                &cfg,
                &x.select(&split.train),
                &pick(&split.train),
                data.classes(),
            )
            .unwrap();
            let pred: Vec<OrdinalLabel> = model
                .predict_proba_all(&x.select(&split.test))
                .unwrap()
                .iter()
                .map(|p| p.argmax())
                .collect();
            let score = amae(&pick(&split.test), &pred).unwrap();
            assert!(score < 0.1, "{head:?} view {v}: test AMAE {score}");
        }
    }
}
