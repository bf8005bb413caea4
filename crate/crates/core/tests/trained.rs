//! Properties that only show up after real training runs.

use ndarray::{Array2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use tende::estimators::{cmi_terms, transfer_entropy, EstimatorConfig};
use tende::neural::ScoreNetwork;
use tende::score_model::{predict_noise, score_at, train, Approach, EncodingMask, OutputSkip, TrainConfig};
use tende::systems::{Direction, System, TeDataset};

fn normal(n: usize, cols: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
    Array2::from_shape_simple_fn((n, cols), || StandardNormal.sample(rng))
}

fn noise_dataset(n: usize, seed: u64) -> TeDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    TeDataset {
        y: normal(n, 1, &mut rng),
        x: normal(n, 1, &mut rng),
        z: normal(n, 1, &mut rng),
        k: 1,
        l: 1,
    }
}

fn worst_toy_score_error(model: &tende::score_model::TrainedModel) -> f64 {
    // N(0,1) stays N(0,1) under VP, so the exact score is -y_t at every t
    let mut worst: f64 = 0.0;
    for t in [0.1, 0.5, 0.9] {
        let v = model.schedule.v(t).unwrap();
        for i in 0..=8 {
            let y_t = -1.0 + 0.25 * i as f64;
            let eps = model
                .predict_noise(
                    Array2::from_elem((1, 1), y_t).view(),
                    Array2::from_elem((1, 1), 0.3).view(),
                    Array2::from_elem((1, 1), -0.2).view(),
                    &[t],
                    EncodingMask::MARGINAL,
                )
                .unwrap();
            worst = worst.max((-eps[[0, 0]] / v.sqrt() + y_t).abs());
        }
    }
    worst
}

#[test]
fn gaussian_toy_score_is_learned() {
    let data = noise_dataset(4000, 1);
    let cfg = TrainConfig {
        approach: Approach::Joint,
        epochs: 100,
        ..TrainConfig::default()
    };
    let worst = worst_toy_score_error(&train(&data, &cfg).unwrap());
    assert!(worst < 0.05, "worst score error {worst}");

    // the raw output has to learn ε̂ = √v·y_t itself; it gets closer but
    // stays near 0.1 at this budget
    let raw = TrainConfig { skip: OutputSkip::None, ..cfg };
    let untrained = train(&data, &TrainConfig { epochs: 1, ..raw.clone() }).unwrap();
    let model = train(&data, &raw).unwrap();
    assert!(model.loss_trace.last() < model.loss_trace.first());
    let (before, after) = (worst_toy_score_error(&untrained), worst_toy_score_error(&model));
    assert!(after < 0.5 * before, "{after} vs {before}");
}

#[test]
fn masks_differ_after_training_on_dependent_data() {
    let mut data = noise_dataset(3000, 2);
    data.y = &data.x * 0.8 + &data.y * 0.6;
    let cfg = TrainConfig {
        approach: Approach::Joint,
        epochs: 60,
        ..TrainConfig::default()
    };
    let model = train(&data, &cfg).unwrap();
    let rows = 50;
    let t = vec![0.3; rows];
    let (y, x, z) = (data.y.slice(ndarray::s![..rows, ..]), data.x.slice(ndarray::s![..rows, ..]), data.z.slice(ndarray::s![..rows, ..]));
    let cond = model.predict_noise(y, x, z, &t, EncodingMask::COND_XZ).unwrap();
    let marg = model.predict_noise(y, x, z, &t, EncodingMask::MARGINAL).unwrap();
    let gap = (&cond - &marg).iter().map(|d| d.abs()).fold(0.0, f64::max);
    assert!(gap > 0.05, "largest gap {gap}");
}

#[test]
fn snapshots_answer_rows_in_turn() {
    let data = noise_dataset(400, 3);
    let cfg = TrainConfig {
        approach: Approach::Joint,
        epochs: 5,
        snapshots: 3,
        ..TrainConfig::default()
    };
    let model = train(&data, &cfg).unwrap();
    let nets = model.ensemble();
    assert_eq!(nets.len(), 3);
    assert_eq!(nets[2], &model.net);
    assert_ne!(nets[0], nets[1]);

    let t: Vec<f64> = (0..7).map(|i| 0.05 + 0.1 * i as f64).collect();
    let rows = |a: &Array2<f64>| a.slice(ndarray::s![..7, ..]).to_owned();
    let (y, x, z) = (rows(&data.y), rows(&data.x), rows(&data.z));
    let got = model.predict_noise(y.view(), x.view(), z.view(), &t, EncodingMask::COND_Z).unwrap();
    for (i, row) in got.axis_iter(Axis(0)).enumerate() {
        let net = nets[i % 3];
        let sl = ndarray::s![i..i + 1, ..];
        let raw = predict_noise(net, y.slice(sl), x.slice(sl), z.slice(sl), &t[i..i + 1], EncodingMask::COND_Z).unwrap();
        let skip = model.schedule.v(t[i]).unwrap().sqrt() * y[[i, 0]];
        assert!((row[0] - (raw[[0, 0]] + skip)).abs() < 1e-12);
    }

    let single = train(&data, &TrainConfig { snapshots: 1, ..cfg }).unwrap();
    assert!(single.snapshots.is_empty());
    assert_eq!(single.net, model.net);
}

#[test]
fn trained_checkpoint_round_trips() {
    let data = noise_dataset(300, 4);
    let model = train(&data, &TrainConfig { epochs: 3, ..TrainConfig::default() }).unwrap();
    let mut buf = Vec::new();
    model.net.save(&mut buf).unwrap();
    let back = ScoreNetwork::load(buf.as_slice()).unwrap();
    assert_eq!(back, model.net);
    let sched = model.schedule;
    let a = score_at(&model.net, &[0.4], &[1.0], &[-1.0], 0.2, EncodingMask::COND_XZ, &sched).unwrap();
    let b = score_at(&back, &[0.4], &[1.0], &[-1.0], 0.2, EncodingMask::COND_XZ, &sched).unwrap();
    assert_eq!(a, b);
}

#[test]
fn independent_source_gives_near_zero() {
    let data = noise_dataset(10_000, 5);
    let train_cfg = TrainConfig {
        approach: Approach::Joint,
        ..TrainConfig::default()
    };
    let model = train(&data, &train_cfg).unwrap();
    let terms = cmi_terms(&model, &data, &EstimatorConfig::default()).unwrap();
    assert!((0.0..=0.05).contains(&terms.c1), "c1 {}", terms.c1);
    assert!(terms.j1.unwrap().abs() <= 0.05, "j1 {:?}", terms.j1);
    assert!(terms.j2.unwrap().abs() <= 0.05, "j2 {:?}", terms.j2);
}

#[test]
fn joint_system_without_coupling() {
    // (1 - Φ(0)) · (-½ ln(1 - 0.81)) with Φ(0) = ½
    let truth = -0.25 * (1.0f64 - 0.81).ln();
    let system = System::from_name("joint", Some(0.0)).unwrap();
    assert!((system.truth(Direction::XToY).unwrap() - truth).abs() < 1e-12);
    let pair = system.generate(10_001, &mut ChaCha8Rng::seed_from_u64(6)).unwrap();
    let est = transfer_entropy(&pair, 1, 1, Direction::XToY, &EstimatorConfig::default(), &TrainConfig::default(), 1).unwrap();
    assert!((est.value - truth).abs() < 0.05, "{} vs {truth}", est.value);
}
