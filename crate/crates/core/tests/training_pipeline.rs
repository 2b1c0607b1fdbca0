use boltzkern::data::{generate_sinc, prepare, SplitSpec};
use boltzkern::spectral::GibbsSchedule;
use boltzkern::training::{initial_params, loo_mse_loss, train, train_with, TrainConfig};
use boltzkern::{RegressionDataset, Sampler, SamplerBackend};

fn sinc_train(n: usize) -> RegressionDataset {
    let table = generate_sinc(n, 2, 0.05, 9).unwrap();
    prepare(&table, &SplitSpec::default()).unwrap().0
}

#[test]
fn single_iteration_moves_parameters() {
    let data = sinc_train(40);
    let config = TrainConfig {
        iterations: 1,
        seed: 7,
        ..TrainConfig::default()
    };
    let (params, history) = train(&data, &config).unwrap();
    assert_eq!(history.records.len(), 1);
    assert_ne!(params, history.initial_params);
    assert_eq!(history.initial_params, initial_params(&config, 2));
    assert_eq!(params, history.final_params);
}

#[test]
fn recorded_loss_matches_snapshot_recomputation() {
    let data = sinc_train(40);
    let config = TrainConfig {
        iterations: 6,
        kernel_snapshot_every: Some(2),
        ..TrainConfig::default()
    };
    let (_, history) = train(&data, &config).unwrap();
    let iterations: Vec<usize> = history.kernel_snapshots.iter().map(|s| s.iteration).collect();
    assert_eq!(iterations, vec![0, 2, 4, 5]);
    for snap in &history.kernel_snapshots {
        let loss = loo_mse_loss(snap.kernel.view(), data.y.view(), config.eps_nw).unwrap();
        assert_eq!(loss, history.records[snap.iteration].loss);
    }
}

#[test]
fn training_is_reproducible() {
    let data = sinc_train(40);
    let config = TrainConfig {
        iterations: 5,
        seed: 3,
        ..TrainConfig::default()
    };
    let a = train(&data, &config).unwrap();
    let b = train(&data, &config).unwrap();
    assert_eq!(a.0, b.0);
    assert_eq!(a.1.records, b.1.records);
    let other = train(&data, &TrainConfig { seed: 4, ..config }).unwrap();
    assert_ne!(a.0, other.0);
}

#[test]
fn gibbs_backend_and_sgd_train() {
    let data = sinc_train(40);
    let config = TrainConfig {
        iterations: 3,
        optimizer: boltzkern::training::OptimizerKind::Sgd,
        backend: SamplerBackend::BlockGibbs(GibbsSchedule {
            burn_in: 10,
            thinning: 2,
        }),
        samples_per_iteration: Some(16),
        baseline_subtraction: true,
        ..TrainConfig::default()
    };
    let mut sampler = Sampler::new(config.backend.clone()).unwrap();
    let (params, history) = train_with(&data, &config, initial_params(&config, 2), &mut sampler).unwrap();
    assert!(params.is_finite());
    assert!(history.losses().iter().all(|l| l.is_finite()));
}

#[test]
fn oversized_model_is_rejected_by_exact_backend() {
    let data = sinc_train(40);
    let config = TrainConfig {
        iterations: 1,
        n_visible: 13,
        n_hidden: 12,
        ..TrainConfig::default()
    };
    assert!(matches!(train(&data, &config), Err(boltzkern::Error::Capacity { .. })));
}

#[test]
fn history_csv_has_one_row_per_iteration() {
    let data = sinc_train(40);
    let config = TrainConfig {
        iterations: 4,
        ..TrainConfig::default()
    };
    let (_, history) = train(&data, &config).unwrap();
    let mut buf = Vec::new();
    history.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 5);
    assert!(lines[0].starts_with("iteration,loss,"));
    assert!(lines[1..].iter().all(|l| l.ends_with(",0")));
}
