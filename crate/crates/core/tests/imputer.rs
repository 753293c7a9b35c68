use iin_core::imputer::{
    build_training_pairs, contexts, fit, missing_index, predict_missing, run_cascade, train_epoch, Mode, Normalization,
    Normalizer, TrainConfig,
};
use iin_core::ingest::{simulate_missing, MissingSpec};
use iin_core::init::{initialize, InitializerKind};
use iin_core::nn::{init_params, CellKind, ModelShape, NadamConfig, NadamState};
use iin_core::synth::{generate, SynthSpec};
use iin_core::{EntryState, Error, SensorDataset, TimeFormat};
use ndarray::Array2;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn small() -> TrainConfig {
    TrainConfig {
        w: 3,
        hidden: 4,
        iter_num: 2,
        max_epochs: 3,
        batch_size: 32,
        seed: 9,
        ..Default::default()
    }
}

fn fixture(sensors: usize, steps: usize, rate: f64) -> SensorDataset {
    let ds = generate(&SynthSpec {
        sensors,
        steps,
        ..Default::default()
    })
    .unwrap();
    simulate_missing(&ds, &MissingSpec::random_rate(rate, 3)).unwrap()
}

fn column(values: &[f64]) -> SensorDataset {
    let v = Array2::from_shape_vec((values.len(), 1), values.to_vec()).unwrap();
    SensorDataset::from_matrix(
        vec!["a".into()],
        (0..values.len()).map(|t| t as f64).collect(),
        TimeFormat::EpochHours,
        v,
        "x",
    )
    .unwrap()
}

#[test]
fn no_valid_anchor_is_a_training_error() {
    let nan = f64::NAN;
    let ds = column(&[1.0, nan, nan, nan, nan, nan, 2.0, nan, nan, nan]);
    let err = build_training_pairs(ds.values(), &ds, &small(), &Normalizer::identity(1)).unwrap_err();
    assert!(matches!(err, Error::Training(_)));
    let t0 = initialize(&ds, &InitializerKind::TemporalNearest).unwrap();
    assert!(matches!(
        iin_core::imputer::run_cascade_from(&ds, &small(), t0, "nearest".into()),
        Err(Error::Training(_))
    ));
}

#[test]
fn constant_series_trains_at_zero_loss() {
    let ds = column(&[3.5; 40]);
    let config = small();
    let norm = Normalizer::fit(&ds, Normalization::GlobalZscore, &[true; 40]);
    let pairs = build_training_pairs(ds.values(), &ds, &config, &norm).unwrap();
    assert!(pairs.targets.iter().all(|y| *y == 0.0));
    let mut model = init_params(ModelShape::standard(4), 1.0, 1);
    let mut opt = NadamState::new(NadamConfig::default(), &model.weights);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let loss = train_epoch(&mut model, &pairs, &mut opt, &mut rng, &config, &norm).unwrap();
    assert_eq!(loss, 0.0);
}

#[test]
fn epochs_are_reproducible() {
    let ds = fixture(2, 120, 0.2);
    let config = small();
    let t0 = initialize(&ds, &InitializerKind::TemporalNearest).unwrap();
    let norm = Normalizer::fit(&ds, config.normalization, &[true; 120]);
    let pairs = build_training_pairs(&t0, &ds, &config, &norm).unwrap();
    let losses = || {
        let mut model = init_params(ModelShape::standard(4), 1.0, 5);
        let mut opt = NadamState::new(NadamConfig::default(), &model.weights);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        (0..3)
            .map(|_| train_epoch(&mut model, &pairs, &mut opt, &mut rng, &config, &norm).unwrap())
            .collect::<Vec<_>>()
    };
    assert_eq!(losses(), losses());
}

#[test]
fn early_stopping_keeps_the_best_epoch() {
    let ds = fixture(2, 150, 0.2);
    let t0 = initialize(&ds, &InitializerKind::TemporalNearest).unwrap();
    for patience in [0, 1, 2] {
        let config = TrainConfig {
            patience,
            max_epochs: 12,
            ..small()
        };
        let norm = Normalizer::fit(&ds, config.normalization, &[true; 150]);
        let all = build_training_pairs(&t0, &ds, &config, &norm).unwrap();
        let n = all.len();
        let train = all.select(&(0..n - 20).collect::<Vec<_>>());
        let val = all.select(&(n - 20..n).collect::<Vec<_>>());
        let mut model = init_params(ModelShape::standard(4), 1.0, 2);
        let mut opt = NadamState::new(NadamConfig::default(), &model.weights);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let r = fit(&mut model, &mut opt, &train, &val, &config, &norm, &mut rng, false).unwrap();
        let last_improvement = r.best_epoch;
        assert!(r.epochs == config.max_epochs || r.epochs - last_improvement == patience.max(1));
        assert!(r.best_validation_mae <= *r.validation_mae.last().unwrap());
        let kept = iin_core::imputer::pair_mae(&model, &val, &norm);
        assert_eq!(kept, r.best_validation_mae);
    }
}

#[test]
fn prediction_without_gaps_is_the_identity() {
    let ds = column(&(0..30).map(|v| (v as f64).sin()).collect::<Vec<_>>());
    let model = init_params(ModelShape::standard(4), 1.0, 1);
    let config = small();
    let positions = missing_index(&ds);
    assert!(positions.is_empty());
    let next = predict_missing(&model, ds.values(), &ds, &positions, &config, &Normalizer::identity(1));
    assert_eq!(&next, ds.values());
}

#[test]
fn isolated_gap_ignores_its_own_estimate() {
    let mut values: Vec<f64> = (0..40).map(|v| (v as f64 * 0.3).sin()).collect();
    values[20] = f64::NAN;
    let ds = column(&values);
    let config = small();
    let model = init_params(ModelShape::standard(4), 1.0, 4);
    let norm = Normalizer::identity(1);
    let t = initialize(&ds, &InitializerKind::TemporalNearest).unwrap();
    let mut perturbed = t.clone();
    perturbed[(20, 0)] += 17.0;
    let positions = missing_index(&ds);
    let a = predict_missing(&model, &t, &ds, &positions, &config, &norm);
    let b = predict_missing(&model, &perturbed, &ds, &positions, &config, &norm);
    assert_eq!(a[(20, 0)], b[(20, 0)]);

    let literal = TrainConfig {
        include_center_input: true,
        ..config
    };
    let a = predict_missing(&model, &t, &ds, &positions, &literal, &norm);
    let b = predict_missing(&model, &perturbed, &ds, &positions, &literal, &norm);
    assert_ne!(a[(20, 0)], b[(20, 0)]);
}

#[test]
fn every_position_in_a_long_gap_is_estimated() {
    let mut values: Vec<f64> = (0..80).map(|v| (v as f64 * 0.2).sin()).collect();
    for v in &mut values[30..41] {
        *v = f64::NAN;
    }
    let ds = column(&values);
    let run = run_cascade(&ds, &small(), &InitializerKind::TemporalNearest).unwrap();
    let (t0, t1) = (&run.series[0], &run.series[1]);
    for t in 30..41 {
        assert_ne!(t0[(t, 0)], t1[(t, 0)], "t = {t}");
        assert!(t1[(t, 0)].is_finite());
    }
}

#[test]
fn cascade_shapes_follow_the_config() {
    let ds = fixture(3, 120, 0.2);
    let one = TrainConfig { iter_num: 1, ..small() };
    let run = run_cascade(&ds, &one, &InitializerKind::TemporalNearest).unwrap();
    assert_eq!(run.series.len(), 2);
    assert_eq!(run.rounds.len(), 1);
    assert_eq!(run.models.len(), 1);
    assert_eq!(run.rounds[0].fits.len(), 1);

    let sep = TrainConfig { mode: Mode::Separate, ..small() };
    let run = run_cascade(&ds, &sep, &InitializerKind::TemporalNearest).unwrap();
    assert_eq!(run.series.len(), 3);
    assert_eq!(run.models.len(), 3);
    assert!(run.rounds.iter().all(|r| r.fits.len() == 3));
    let mean = run.rounds[0].fits.iter().map(|f| f.best_validation_mae).sum::<f64>() / 3.0;
    assert_eq!(run.rounds[0].validation_mae, mean);
}

#[test]
fn phased_cascade_runs_on_irregular_time() {
    let ds = fixture(2, 100, 0.2);
    let mut times: Vec<f64> = Vec::new();
    let mut t = 0.0;
    for i in 0..100 {
        t += 0.5 + (i % 3) as f64 * 0.7;
        times.push(t);
    }
    let irregular = SensorDataset::from_matrix(
        ds.sensor_ids().to_vec(),
        times,
        TimeFormat::Real,
        ds.values().clone(),
        "x",
    )
    .unwrap();
    let config = TrainConfig {
        cell_kind: CellKind::Phased,
        ..small()
    };
    let run = run_cascade(&irregular, &config, &InitializerKind::TemporalNearest).unwrap();
    assert!(run.models[0].time_gates.is_some());
    assert!(run.final_series().iter().all(|v| v.is_finite()));
}

fn assert_observed_fixed(ds: &SensorDataset, series: &[Array2<f64>]) {
    for t_i in series {
        for ((t, s), m) in ds.mask().indexed_iter() {
            if *m == EntryState::Observed {
                assert_eq!(t_i[(t, s)].to_bits(), ds.values()[(t, s)].to_bits());
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 6, ..ProptestConfig::default() })]

    #[test]
    fn observed_entries_never_drift(seed in 0u64..1000, rate in 0.05f64..0.4, separate in any::<bool>()) {
        let ds = generate(&SynthSpec { sensors: 2, steps: 80, seed, ..Default::default() }).unwrap();
        let ds = simulate_missing(&ds, &MissingSpec::random_rate(rate, seed)).unwrap();
        let config = TrainConfig {
            max_epochs: 2,
            mode: if separate { Mode::Separate } else { Mode::Mixed },
            seed,
            ..small()
        };
        let run = run_cascade(&ds, &config, &InitializerKind::TemporalNearest).unwrap();
        assert_observed_fixed(&ds, &run.series);
        prop_assert_eq!(&run.missing_index, &missing_index(&ds));
        for pair in run.series.windows(2) {
            let changed: Vec<(usize, usize)> = pair[0]
                .indexed_iter()
                .filter(|(i, v)| pair[1][*i] != **v)
                .map(|(i, _)| i)
                .collect();
            prop_assert!(changed.iter().all(|p| run.missing_index.contains(p)));
        }
    }

    #[test]
    fn update_order_does_not_matter(seed in 0u64..1000) {
        let ds = fixture(2, 60, 0.3);
        let config = small();
        let model = init_params(ModelShape::standard(4), 1.0, seed);
        let norm = Normalizer::fit(&ds, config.normalization, &[true; 60]);
        let t = initialize(&ds, &InitializerKind::TemporalNearest).unwrap();
        let positions = missing_index(&ds);
        let mut shuffled = positions.clone();
        use rand::seq::SliceRandom;
        shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let a = predict_missing(&model, &t, &ds, &positions, &config, &norm);
        let b = predict_missing(&model, &t, &ds, &shuffled, &config, &norm);
        prop_assert_eq!(a, b);
    }
}

#[test]
fn contexts_use_current_estimates_for_missing_slots() {
    let nan = f64::NAN;
    let ds = column(&[1.0, nan, 3.0, 4.0, 5.0]);
    let mut dense = ds.values().clone();
    dense[(1, 0)] = 2.5;
    let p = contexts(&dense, &ds, &[(2, 0)], &small(), &Normalizer::identity(1));
    assert_eq!(p.batch.forward.row(0).to_vec(), vec![1.0, 1.0, 2.5]);
}
