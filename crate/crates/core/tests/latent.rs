mod common;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use ventbench::bench::make_cohort;
use ventbench::latent::{
    generate_dataset, latent_samples, reconstruction_mse, train_autoencoder, train_e2c,
    train_latent_dynamics, E2cModel, LatentParams, MlpWeights, NormalizationSpec, TrainSchedule,
    TransitionDataset,
};
use ventbench::sim::{ObservedState, VentilatorAction};
use ventbench::{Config, Error};

fn small_dataset(patients: usize, runs: usize, steps: usize, seed: u64) -> TransitionDataset {
    let cfg = Config::default();
    let cohort = make_cohort(patients, seed, &cfg.bench).unwrap();
    generate_dataset(&cfg, &cfg.bounds_table().unwrap(), &cohort.patients, runs, steps, seed).unwrap()
}

fn schedule(epochs: usize, batch: usize) -> TrainSchedule {
    TrainSchedule {
        epochs,
        ..LatentParams::default().schedule()
    }
    .with_batch(batch)
}

trait WithBatch {
    fn with_batch(self, b: usize) -> Self;
}

impl WithBatch for TrainSchedule {
    fn with_batch(mut self, b: usize) -> Self {
        self.batch_size = b;
        self
    }
}

#[test]
fn one_patient_one_run_gives_95_triplets() {
    let cfg = Config::default();
    let cohort = make_cohort(2, 0, &cfg.bench).unwrap();
    let d = generate_dataset(&cfg, &cfg.bounds_table().unwrap(), &cohort.patients[..1], 1, 96, 0).unwrap();
    assert_eq!(d.len(), 95);
}

#[test]
fn dataset_is_deterministic_and_never_straddles_episodes() {
    let a = small_dataset(4, 2, 20, 3);
    assert_eq!(a, small_dataset(4, 2, 20, 3));
    assert_eq!(a.len(), 8 * 19);
    assert_eq!(a.episode_ids().len(), 8);
    for w in a.triplets.windows(2) {
        if w[0].episode == w[1].episode {
            assert_eq!(w[0].s_next, w[1].s);
        }
    }
    assert_ne!(a, small_dataset(4, 2, 20, 4));
}

#[test]
fn split_keeps_episodes_whole() {
    let d = small_dataset(10, 2, 12, 1);
    let (train, val) = d.split(0.1, 9);
    assert_eq!(val.episode_ids().len(), 2);
    assert_eq!(train.len() + val.len(), d.len());
    assert!(train.episode_ids().is_disjoint(&val.episode_ids()));
    assert_eq!(d.split(0.1, 9), (train, val));
}

#[test]
fn dataset_roundtrips_through_csv_and_binary() {
    let d = small_dataset(2, 1, 10, 5);
    let dir = tempfile::tempdir().unwrap();
    for name in ["d.csv", "d.bin"] {
        let p = dir.path().join(name);
        d.save(&p).unwrap();
        assert_eq!(TransitionDataset::load(&p).unwrap(), d);
    }
    let bad = dir.path().join("bad.bin");
    std::fs::write(&bad, b"nope, not a dataset").unwrap();
    assert!(matches!(TransitionDataset::load(&bad), Err(Error::Format(_))));
    let mut bytes = std::fs::read(dir.path().join("d.bin")).unwrap();
    bytes[4] = 99;
    std::fs::write(&bad, &bytes).unwrap();
    assert!(matches!(TransitionDataset::load(&bad), Err(Error::SchemaVersion { .. })));
}

#[test]
fn normalization_inverts_inside_range() {
    let spec = NormalizationSpec::default();
    let mid = ObservedState(std::array::from_fn(|i| 0.3 * spec.state_min[i] + 0.7 * spec.state_max[i]));
    let back = spec.denormalize_state(&spec.normalize_state(&mid)).unwrap();
    for i in 0..27 {
        assert!((back.0[i] - mid.0[i]).abs() <= 1e-9 * (1.0 + mid.0[i].abs()));
    }
    let a = VentilatorAction {
        fio2: 0.6,
        pinsp: 20.0,
        tinsp: 1.2,
        rr: 18.0,
        peep: 9.0,
        slope: 0.4,
    };
    let b = spec.denormalize_action(&spec.normalize_action(&a));
    for (x, y) in a.to_array().iter().zip(b.to_array()) {
        assert!((x - y).abs() < 1e-12);
    }
}

#[test]
fn analytic_gradients_match_finite_differences() {
    for sizes in [[27, 16, 6], [6, 16, 27], [12, 8, 6]] {
        let r = common::gradient_check(&sizes, 20, 1e-5, 17);
        assert!(r.max_rel_error < 1e-4, "{sizes:?}: {r:?}");
        assert!(r.skipped * 100 < r.checked, "{sizes:?}: {r:?}");
    }
}

/// Raises biases so every unit is switched on at `x`. With a single training
/// point a unit that starts switched off never receives gradient.
fn switch_on_at(net: &mut MlpWeights, x: &[f64]) {
    let sizes = net.sizes().to_vec();
    let mut h = x.to_vec();
    let mut off = 0;
    for w in sizes.windows(2) {
        let (n_in, n_out) = (w[0], w[1]);
        let p = net.params_mut();
        let mut out = vec![0.0; n_out];
        for o in 0..n_out {
            let z: f64 = (0..n_in).map(|i| p[off + o * n_in + i] * h[i]).sum();
            let b = &mut p[off + n_in * n_out + o];
            *b = b.max(0.1 - z);
            out[o] = z + *b;
        }
        off += n_in * n_out + n_out;
        h = out;
    }
}

#[test]
fn autoencoder_memorizes_a_single_state() {
    let d = small_dataset(2, 1, 5, 0);
    let x = NormalizationSpec::default().normalize_state(&d.triplets[0].s).to_vec();
    let data = vec![x.clone(); 64];
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut enc = MlpWeights::init(&[27, 16, 6], &mut rng);
    let mut dec = MlpWeights::init(&[6, 16, 27], &mut rng);
    switch_on_at(&mut enc, &x);
    switch_on_at(&mut dec, &enc.forward(&x).unwrap());
    let before = reconstruction_mse(&enc, &dec, &data[..1]).unwrap();
    // Without momentum and with a smaller step no output overshoots past
    // zero, where it would stay for good.
    let mut sched = schedule(200, 16);
    sched.adam.lr = 3e-4;
    sched.adam.beta1 = 0.0;
    let (enc, dec, log) = train_autoencoder(&data, &data[..1], enc, dec, &sched, 1).unwrap();
    let after = reconstruction_mse(&enc, &dec, &data[..1]).unwrap();
    assert!(after < 1e-5 && after < 1e-3 * before, "{before} -> {after}");
    assert_eq!(log.epochs.len(), 200);
}

#[test]
fn latent_dynamics_leaves_autoencoder_frozen() {
    let norm = NormalizationSpec::default();
    let d = small_dataset(4, 1, 40, 2);
    let states: Vec<Vec<f64>> = d.triplets.iter().map(|t| norm.normalize_state(&t.s).to_vec()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let enc = MlpWeights::init_with_bias(&[27, 16, 6], 0.6, &mut rng);
    let dec = MlpWeights::init_with_bias(&[6, 16, 27], 0.6, &mut rng);
    let dynm = MlpWeights::init_with_bias(&[12, 8, 6], 0.6, &mut rng);
    let (enc, dec, _) = train_autoencoder(&states, &states, enc, dec, &schedule(10, 32), 2).unwrap();
    let (enc_sum, dec_sum) = (enc.checksum(), dec.checksum());
    let samples = latent_samples(&d, &enc, &norm).unwrap();
    let (trained, _) = train_latent_dynamics(&samples, &samples, &dec, dynm.clone(), &schedule(10, 32), 3).unwrap();
    assert_eq!(enc.checksum(), enc_sum);
    assert_eq!(dec.checksum(), dec_sum);
    assert_ne!(trained.checksum(), dynm.checksum());
}

#[test]
fn identity_dynamics_approach_reconstruction_error() {
    let mut d = small_dataset(10, 2, 96, 0);
    for t in &mut d.triplets {
        t.s_next = t.s;
    }
    let (_, r) = train_e2c(&d, &LatentParams::default(), 0).unwrap();
    assert!(
        r.dynamics_val_rmse < r.ae_val_rmse + 0.01,
        "identity dynamics rmse {} vs autoencoder {}",
        r.dynamics_val_rmse,
        r.ae_val_rmse
    );
}

#[test]
fn training_loss_moving_average_does_not_increase() {
    let norm = NormalizationSpec::default();
    let d = small_dataset(6, 1, 40, 4);
    let states: Vec<Vec<f64>> = d.triplets.iter().map(|t| norm.normalize_state(&t.s).to_vec()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let enc = MlpWeights::init_with_bias(&[27, 16, 6], 0.6, &mut rng);
    let dec = MlpWeights::init_with_bias(&[6, 16, 27], 0.6, &mut rng);
    let (_, _, log) = train_autoencoder(&states, &states, enc, dec, &schedule(120, 64), 5).unwrap();
    let losses: Vec<f64> = log.epochs.iter().map(|e| e.train_mse).collect();
    let ma: Vec<f64> = losses.windows(10).map(|w| w.iter().sum::<f64>() / 10.0).collect();
    for w in ma.windows(2) {
        assert!(w[1] <= w[0] * 1.01, "moving average rose from {} to {}", w[0], w[1]);
    }
    assert!(ma.last().unwrap() < &(0.5 * ma[0]));
}

#[test]
fn model_save_load_and_missing_files() {
    let d = small_dataset(4, 1, 20, 6);
    let params = LatentParams {
        epochs: 3,
        ..LatentParams::default()
    };
    let (model, report) = train_e2c(&d, &params, 6).unwrap();
    assert_eq!(report.train_triplets + report.val_triplets, d.len());
    assert_eq!(report.autoencoder.epochs.len(), 3);

    let dir = tempfile::tempdir().unwrap();
    model.save(dir.path()).unwrap();
    let loaded = E2cModel::load(dir.path()).unwrap();
    assert_eq!(loaded, model);

    let s = d.triplets[0].s;
    let a = d.triplets[0].a;
    let p = model.learned_predict(&s, &a);
    assert!(p.is_finite());
    assert_eq!(p, model.learned_predict(&s, &a));
    assert_eq!(model.encode(&s).len(), 6);

    std::fs::remove_file(dir.path().join("dynamics.bin")).unwrap();
    match E2cModel::load(dir.path()) {
        Err(Error::MissingModel { path }) => assert!(path.ends_with("dynamics.bin")),
        other => panic!("expected a missing-model error, got {other:?}"),
    }
    assert!(matches!(
        E2cModel::load(&dir.path().join("nowhere")),
        Err(Error::MissingModel { .. })
    ));
}

#[test]
fn empty_dataset_is_rejected() {
    assert!(train_e2c(&TransitionDataset::default(), &LatentParams::default(), 0).is_err());
}
