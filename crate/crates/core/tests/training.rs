use eps_core::classifier::{predict_all, train, CnnConfig, TrainConfig};
use eps_core::rng::rng;
use eps_core::Cnn;
use rand_distr::{Distribution, Normal};

/// Three classes of noisy spectral lines at class-specific bins on both rows.
fn lines(per_class: usize, width: usize, seed: u64) -> (Vec<Vec<f32>>, Vec<usize>) {
    let mut r = rng(seed);
    let noise = Normal::new(0.0, 0.3).unwrap();
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for c in 0..3 {
        for _ in 0..per_class {
            let centre = (width / 4 * (c + 1)) as f32;
            let x: Vec<f32> = (0..2 * width)
                .map(|k| {
                    let d = (k % width) as f32 - centre;
                    2.0 * (-d * d / 8.0).exp() + noise.sample(&mut r) as f32
                })
                .collect();
            xs.push(x);
            ys.push(c);
        }
    }
    (xs, ys)
}

fn config() -> TrainConfig {
    TrainConfig {
        learning_rate: 3e-3,
        batch_size: 64,
        epochs: 3,
        patience: 100,
        target_loss: 0.0,
        ..TrainConfig::default()
    }
}

#[test]
fn loss_does_not_rise_over_first_epochs() {
    let (xs, ys) = lines(16, 64, 1);
    let mut m = Cnn::new(CnnConfig::miniature(3), 2).unwrap();
    let h = train(&mut m, &xs, &ys, &config()).unwrap();
    assert_eq!(h.epoch_loss.len(), 3);
    assert!(
        h.epoch_loss.windows(2).all(|w| w[1] <= w[0]),
        "{:?}",
        h.epoch_loss
    );
}

#[test]
fn training_is_reproducible_and_learns() {
    let (xs, ys) = lines(16, 64, 3);
    let cfg = TrainConfig {
        epochs: 60,
        batch_size: 8,
        ..config()
    };
    let run = || {
        let mut m = Cnn::new(CnnConfig::miniature(3), 5).unwrap();
        let h = train(&mut m, &xs, &ys, &cfg).unwrap();
        (m, h)
    };
    let (m, h) = run();
    let (m2, h2) = run();
    assert_eq!(h, h2);
    assert_eq!(m.params(), m2.params());
    let (test, labels) = lines(10, 64, 4);
    let pred = predict_all(&m, &test).unwrap();
    let acc = pred
        .iter()
        .zip(&labels)
        .filter(|((p, _), y)| p == *y)
        .count() as f64
        / labels.len() as f64;
    assert!(acc >= 0.9, "held-out accuracy {acc}");
}
