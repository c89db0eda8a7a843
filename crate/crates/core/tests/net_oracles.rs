use gazeflow::frontend::{FeatureMatrix, LabeledWindow};
use gazeflow::model::{DatasetSplit, LabelClass, SplitRatios};
use gazeflow::net::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_params(rng: &mut ChaCha8Rng, shape: NetworkShape) -> NetworkParams {
    let mut p = NetworkParams::zeros(shape).unwrap();
    for t in p.tensors_mut() {
        for v in t.iter_mut() {
            *v = rng.random_range(-0.5..0.5);
        }
    }
    p
}

fn random_feature(rng: &mut ChaCha8Rng, rows: usize) -> FeatureMatrix {
    FeatureMatrix::from_row_major((0..rows * 2).map(|_| rng.random_range(0.0..3.0)).collect()).unwrap()
}

/// Loops written directly from the layer definitions.
fn unrolled_forward(p: &NetworkParams, x: &FeatureMatrix) -> [f64; 3] {
    let s = *p.shape();
    let mut conv = vec![vec![0.0; s.filters]; s.conv_len()];
    for (pos, row) in conv.iter_mut().enumerate() {
        for (f, out) in row.iter_mut().enumerate() {
            let mut acc = p.conv_bias[f];
            for t in 0..s.kernel_len {
                for c in 0..2 {
                    acc += p.conv_weights[(f * s.kernel_len + t) * 2 + c] * x.get(pos + t, c);
                }
            }
            *out = acc;
        }
    }
    let mut flat = Vec::new();
    for q in 0..s.pooled_len() {
        for f in 0..s.filters {
            flat.push((0..s.pool_factor).map(|j| conv[q * s.pool_factor + j][f]).fold(f64::NEG_INFINITY, f64::max));
        }
    }
    let mut logits = [0.0; 3];
    for (c, z) in logits.iter_mut().enumerate() {
        *z = p.dense_bias[c] + flat.iter().enumerate().map(|(j, a)| p.dense_weights[c * flat.len() + j] * a).sum::<f64>();
    }
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e = logits.map(|z| (z - m).exp());
    let sum: f64 = e.iter().sum();
    e.map(|v| v / sum)
}

#[test]
fn forward_matches_unrolled_loops() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for kernel in [10, 5, 1, 26] {
        let shape = NetworkShape::with_kernel_len(kernel);
        for _ in 0..10 {
            let p = random_params(&mut rng, shape);
            let x = random_feature(&mut rng, 30);
            let fast = p.predict(&x).unwrap();
            let slow = unrolled_forward(&p, &x);
            for c in 0..3 {
                assert!((fast.probs()[c] - slow[c]).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn shape_chain_defaults() {
    let s = NetworkShape::default();
    assert_eq!((s.input_len, s.channels), (30, 2));
    assert_eq!((s.conv_len(), s.filters), (21, 10));
    assert_eq!(s.pooled_len(), 4);
    assert_eq!(s.flattened_dim(), 40);
    assert_eq!(s.classes, 3);
    let pass = init_params(0, 10).unwrap().forward(&FeatureMatrix::zeros(30)).unwrap();
    assert_eq!(pass.conv.len(), 21 * 10);
    assert_eq!(pass.pooled.len(), 40);
}

fn loss_at(p: &NetworkParams, x: &FeatureMatrix, y: LabelClass) -> f64 {
    loss_cross_entropy(&p.predict(x).unwrap(), y)
}

#[test]
fn gradients_match_central_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let h = 1e-5;
    let mut worst = 0.0f64;
    for trial in 0..50 {
        let shape = NetworkShape::default();
        let p = random_params(&mut rng, shape);
        let x = random_feature(&mut rng, 30);
        let y = LabelClass::from_index(trial % 3);
        let pass = p.forward(&x).unwrap();
        let grads = p.backward(&x, y, &pass).unwrap();
        let analytic: Vec<f64> = grads.iter().copied().collect();
        let mut k = 0;
        for t in 0..4 {
            let len = p.tensors()[t].len();
            for i in 0..len {
                let mut plus = p.clone();
                plus.tensors_mut()[t][i] += h;
                let mut minus = p.clone();
                minus.tensors_mut()[t][i] -= h;
                let numeric = (loss_at(&plus, &x, y) - loss_at(&minus, &x, y)) / (2.0 * h);
                let a = analytic[k];
                // max-pool kinks: skip components whose perturbation flips a pooling argmax
                let flips = plus.forward(&x).unwrap().argmax != pass.argmax || minus.forward(&x).unwrap().argmax != pass.argmax;
                if !flips {
                    let denom = a.abs().max(numeric.abs()).max(1e-6);
                    worst = worst.max((a - numeric).abs() / denom);
                }
                k += 1;
            }
        }
    }
    assert!(worst < 1e-4, "worst relative error {worst}");
}

fn scalar_adam(theta: f64, g: f64, m: f64, v: f64, t: u64, c: &AdamConfig) -> (f64, f64, f64) {
    let m1 = c.beta1 * m + (1.0 - c.beta1) * g;
    let v1 = c.beta2 * v + (1.0 - c.beta2) * g * g;
    let mh = m1 / (1.0 - c.beta1.powi(t as i32 + 1));
    let vh = v1 / (1.0 - c.beta2.powi(t as i32 + 1));
    (theta - c.alpha * mh / (vh.sqrt() + c.epsilon), m1, v1)
}

fn single_weight_step(theta: f64, g: f64, state: &mut AdamState, cfg: &AdamConfig) -> f64 {
    let shape = NetworkShape::default();
    let mut p = NetworkParams::zeros(shape).unwrap();
    p.dense_bias[1] = theta;
    let mut grads = NetworkParams::zeros(shape).unwrap();
    grads.dense_bias[1] = g;
    adam_step(&mut p, &grads, state, cfg);
    p.dense_bias[1]
}

#[test]
fn adam_first_step_by_hand() {
    let cfg = AdamConfig::PHASE1;
    let mut state = AdamState::new(NetworkShape::default()).unwrap();
    let theta = single_weight_step(1.0, 2.0, &mut state, &cfg);
    // m̂ = 2, v̂ = 4 at t = 1
    let expected = 1.0 - 0.001 * 2.0 / (2.0 + 1e-8);
    assert!((theta - expected).abs() < 1e-12, "{theta} vs {expected}");
    assert!((theta - 0.999_000_000_005).abs() < 1e-12);
    assert_eq!(state.t, 1);
}

#[test]
fn adam_literal_second_phase_parameters() {
    let cfg = AdamConfig::PHASE2;
    assert_eq!((cfg.alpha, cfg.beta1, cfg.beta2, cfg.epsilon), (0.002, 0.85, 0.1, 1e-8));
    let mut state = AdamState::new(NetworkShape::default()).unwrap();
    let (mut theta, mut m, mut v) = (0.5, 0.0, 0.0);
    for (t, g) in [0.3, -1.2, 0.05, 2.0, -0.7].into_iter().enumerate() {
        let got = single_weight_step(theta, g, &mut state, &cfg);
        let (expect, m1, v1) = scalar_adam(theta, g, m, v, t as u64, &cfg);
        assert!((got - expect).abs() < 1e-12, "step {t}: {got} vs {expect}");
        (theta, m, v) = (got, m1, v1);
    }
    // t = 1 with β₂ = 0.1: v̂ = 0.9·g² / 0.9 = g², m̂ = g
    let mut fresh = AdamState::new(NetworkShape::default()).unwrap();
    let got = single_weight_step(0.0, -3.0, &mut fresh, &cfg);
    assert!((got - 0.002 * 3.0 / (3.0 + 1e-8)).abs() < 1e-12);
}

#[test]
fn softmax_stays_normalized_for_large_logits() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..1000 {
        let z = [rng.random_range(-1e4..1e4), rng.random_range(-1e4..1e4), rng.random_range(-1e4..1e4)];
        let p = softmax(&z);
        assert!((p.probs().iter().sum::<f64>() - 1.0).abs() <= 1e-12);
    }
    for z in [[1e4, -1e4, 0.0], [-1e4, -1e4, -1e4], [1e4, 1e4, 1e4]] {
        assert!((softmax(&z).probs().iter().sum::<f64>() - 1.0).abs() <= 1e-12);
    }
}

#[test]
fn glorot_init_statistics() {
    let p = init_params(123, 10).unwrap();
    let b = glorot_bound(20, 10);
    assert!(p.conv_weights.iter().all(|w| w.abs() <= b));
    let n = p.conv_weights.len() as f64;
    let mean = p.conv_weights.iter().sum::<f64>() / n;
    let var = p.conv_weights.iter().map(|w| (w - mean).powi(2)).sum::<f64>() / n;
    // 200 draws of U(-b, b): mean within ~4 standard errors, variance near b²/3
    assert!(mean.abs() < 4.0 * b / (3.0f64.sqrt() * n.sqrt()));
    assert!((var - b * b / 3.0).abs() < 0.25 * b * b / 3.0);
    assert!(p.conv_bias.iter().chain(&p.dense_bias).all(|&v| v == 0.0));
}

fn toy_windows() -> Vec<LabeledWindow> {
    // each class lights up its own band of frequency rows
    (0..30)
        .map(|i| {
            let class = LabelClass::from_index(i % 3);
            let lo = class.index() * 10;
            let values = (0..30)
                .flat_map(|r| {
                    let v = if (lo..lo + 10).contains(&r) { 1.0 + 0.1 * (i / 3) as f64 } else { 0.0 };
                    [v, 0.5 * v]
                })
                .collect();
            LabeledWindow { seq_idx: 0, center_idx: i, feature: FeatureMatrix::from_row_major(values).unwrap(), label: class }
        })
        .collect()
}

#[test]
fn separable_toy_set_is_learned() {
    let all = toy_windows();
    let data = DatasetSplit { train: all[..21].to_vec(), validation: all[21..].to_vec(), test: Vec::new(), ratios: SplitRatios::default() };
    let cfg = TrainConfig {
        phase1: PhaseConfig::new(60, AdamConfig { alpha: 0.01, ..AdamConfig::PHASE1 }),
        phase2: PhaseConfig::new(0, AdamConfig::PHASE2),
        batch_size: 64,
        shuffle: false,
        ..Default::default()
    };
    let (params, history) = train(&data, &cfg).unwrap();
    let losses: Vec<f64> = history.records.iter().take(10).map(|r| r.train_loss).collect();
    assert!(losses.windows(2).all(|w| w[1] < w[0]), "{losses:?}");
    assert_eq!(accuracy(&params, &data.train), 1.0);
    assert_eq!(history.records.len(), 60);
}

#[test]
fn zero_epochs_return_the_initialization() {
    let all = toy_windows();
    let data = DatasetSplit { train: all[..20].to_vec(), validation: all[20..].to_vec(), test: Vec::new(), ratios: SplitRatios::default() };
    let cfg = TrainConfig {
        phase1: PhaseConfig::new(0, AdamConfig::PHASE1),
        phase2: PhaseConfig::new(0, AdamConfig::PHASE2),
        seed: 31,
        ..Default::default()
    };
    let (params, history) = train(&data, &cfg).unwrap();
    assert_eq!(params, init_params(31, 10).unwrap());
    assert!(history.records.is_empty());
}

#[test]
fn training_is_deterministic() {
    let all = toy_windows();
    let data = DatasetSplit { train: all[..24].to_vec(), validation: all[24..].to_vec(), test: Vec::new(), ratios: SplitRatios::default() };
    let cfg = TrainConfig {
        phase1: PhaseConfig::new(4, AdamConfig::PHASE1),
        phase2: PhaseConfig::new(3, AdamConfig::PHASE2),
        batch_size: 5,
        seed: 8,
        ..Default::default()
    };
    let (a, ha) = train(&data, &cfg).unwrap();
    let (b, hb) = train(&data, &cfg).unwrap();
    assert_eq!(a, b);
    assert_eq!(ha, hb);
    assert_eq!(ha.records.len(), 7);
    let (c, _) = train(&data, &TrainConfig { seed: 9, ..cfg }).unwrap();
    assert_ne!(a, c);
}
