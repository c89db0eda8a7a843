use std::f64::consts::PI;

use gazeflow::detect::*;
use gazeflow::frontend::FrontendConfig;
use gazeflow::model::{argmax_class, GazeSample, GazeSequence, LabelClass};
use gazeflow::net::{init_params, NetworkParams, NetworkShape};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

const DT: f64 = 10.0 / 3.0;

fn seq_from(points: &[(f64, f64)]) -> GazeSequence {
    let samples = points.iter().enumerate().map(|(i, &(x, y))| GazeSample::new(i as f64 * DT, x, y)).collect();
    GazeSequence::new(samples, None, "t").unwrap()
}

/// Fixation, a fast jump, then a slow drift: every class shows up.
fn mixed_trace(rng: &mut ChaCha8Rng) -> Vec<(f64, f64)> {
    let noise = Normal::new(0.0, 0.03).unwrap();
    let mut pts = Vec::new();
    for _ in 0..60 {
        pts.push((noise.sample(rng), noise.sample(rng)));
    }
    for k in 1..=8 {
        pts.push((k as f64, 0.5 * k as f64));
    }
    let (x0, y0) = (8.0, 4.0);
    for k in 0..90 {
        let t = k as f64 * DT / 1000.0;
        pts.push((x0 - 12.0 * t + noise.sample(rng), y0 + 5.0 * t + noise.sample(rng)));
    }
    pts
}

#[test]
fn velocity_matches_two_point_formula() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let pts: Vec<(f64, f64)> = (0..50).map(|_| (rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0))).collect();
    let seq = seq_from(&pts);
    for i in 1..49 {
        let (a, c) = (pts[i - 1], pts[i + 1]);
        let expected = ((c.0 - a.0).powi(2) + (c.1 - a.1).powi(2)).sqrt() / (2.0 * DT / 1000.0);
        assert!((velocity(&seq, i).unwrap() - expected).abs() < 1e-9 * (1.0 + expected));
    }
    assert!(velocity(&seq, 0).is_err());
    assert!(velocity(&seq, 49).is_err());
}

#[test]
fn turning_angle_matches_trig() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..500 {
        let a: f64 = rng.random_range(-PI..PI);
        let turn: f64 = rng.random_range(-PI + 1e-3..PI - 1e-3);
        let (l1, l2) = (rng.random_range(0.1..3.0), rng.random_range(0.1..3.0));
        let p0 = (rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        let p1 = (p0.0 + l1 * a.cos(), p0.1 + l1 * a.sin());
        let p2 = (p1.0 + l2 * (a + turn).cos(), p1.1 + l2 * (a + turn).sin());
        let got = mean_turning_angle(&[p0, p1, p2]).unwrap();
        assert!((got - turn.abs()).abs() < 1e-9, "{got} vs {}", turn.abs());
    }
    assert_eq!(mean_turning_angle(&[(0.0, 0.0), (0.0, 0.0), (0.0, 0.0)]), None);
}

fn oracle_ivt_idt(pts: &[(f64, f64)], v_thr: f64, d_thr: f64, w: usize) -> Vec<Option<LabelClass>> {
    let n = pts.len();
    // pass 1: saccade flags
    let mut sac = vec![None; n];
    for i in 1..n - 1 {
        let (a, c) = (pts[i - 1], pts[i + 1]);
        let v = (c.0 - a.0).hypot(c.1 - a.1) / (2.0 * DT / 1000.0);
        sac[i] = Some(v > v_thr);
    }
    // pass 2: dispersion over the saccade-free run inside the centred window
    let mut out = vec![None; n];
    for i in 0..n {
        match sac[i] {
            None => {}
            Some(true) => out[i] = Some(LabelClass::Saccade),
            Some(false) => {
                let lo = i.saturating_sub(w / 2);
                let hi = (lo + w).min(n);
                let run: Vec<(f64, f64)> = (lo..hi)
                    .filter(|&j| {
                        let (a, b) = (j.min(i), j.max(i));
                        (a..=b).all(|k| sac[k] == Some(false))
                    })
                    .map(|j| pts[j])
                    .collect();
                let xs = run.iter().map(|p| p.0);
                let ys = run.iter().map(|p| p.1);
                let d = xs.clone().fold(f64::MIN, f64::max) - xs.fold(f64::MAX, f64::min)
                    + ys.clone().fold(f64::MIN, f64::max)
                    - ys.fold(f64::MAX, f64::min);
                out[i] = Some(if d > d_thr { LabelClass::Pursuit } else { LabelClass::Fixation });
            }
        }
    }
    out
}

#[test]
fn ivt_idt_matches_two_pass_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for (v_thr, d_thr) in [(50.0, 1.0), (30.0, 0.4), (120.0, 1.2)] {
        let pts = mixed_trace(&mut rng);
        let cfg = BaselineConfig { velocity_threshold_deg_s: v_thr, dispersion_threshold_deg: d_thr, ..Default::default() };
        let got = ivt_idt_detect(&seq_from(&pts), &cfg).unwrap().labels();
        assert_eq!(got, oracle_ivt_idt(&pts, v_thr, d_thr, 30));
        assert!(got.contains(&Some(LabelClass::Pursuit)) && got.contains(&Some(LabelClass::Saccade)));
    }
}

#[test]
fn pca_ratio_near_one_for_isotropic_jitter() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let noise = Normal::new(0.0, 0.1).unwrap();
    let pts: Vec<(f64, f64)> = (0..20_000).map(|_| (noise.sample(&mut rng), noise.sample(&mut rng))).collect();
    let r = pca_ratio(&pts);
    assert!((1.0..1.1).contains(&r), "{r}");
    let line: Vec<(f64, f64)> = (0..30).map(|i| (i as f64 * 0.1, i as f64 * 0.05)).collect();
    assert!(pca_ratio(&line) > 1e6);
}

#[test]
fn baselines_separate_fixation_from_pursuit() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let pts = mixed_trace(&mut rng);
    let seq = seq_from(&pts);
    for kind in [BaselineKind::IvtIdt, BaselineKind::Ivmp, BaselineKind::Pca] {
        let labels = Baseline::new(kind, BaselineConfig::default()).unwrap().detect(&seq).unwrap().labels();
        assert_eq!(labels[30], Some(LabelClass::Fixation), "{kind:?}");
        assert_eq!(labels[64], Some(LabelClass::Saccade), "{kind:?}");
        assert_eq!(labels[120], Some(LabelClass::Pursuit), "{kind:?}");
    }
}

#[test]
fn zero_model_gives_uniform_scores_on_covered_samples() {
    let seq = seq_from(&(0..100).map(|i| ((i as f64).sin(), 0.0)).collect::<Vec<_>>());
    let zero = NetworkParams::zeros(NetworkShape::default()).unwrap();
    let out = cnn_detect(&zero, &seq, &FrontendConfig::default()).unwrap();
    assert_eq!(out.len(), 100);
    assert_eq!(out.covered_count(), 71);
    assert!(!out.is_covered(14) && out.is_covered(15) && out.is_covered(85) && !out.is_covered(86));
    for s in out.entries() {
        for p in s.scores {
            assert!((p - 1.0 / 3.0).abs() < 1e-15);
        }
        assert_eq!(s.label, LabelClass::Fixation);
    }
}

#[test]
fn cnn_detector_replays_the_network_per_window() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let pts = mixed_trace(&mut rng);
    let seq = seq_from(&pts);
    let model = init_params(3, 10).unwrap();
    let cfg = FrontendConfig::default();
    let out = cnn_detect(&model, &seq, &cfg).unwrap();
    for w in gazeflow::frontend::extract_windows(&seq, &cfg).unwrap() {
        let p = model.predict(&w.feature).unwrap();
        assert_eq!(out.get(w.center_idx).unwrap().scores, *p.probs());
    }
    assert_eq!(out.covered_count(), pts.len() - 29);
}

#[test]
fn tuning_recovers_a_working_velocity_threshold() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let seqs: Vec<GazeSequence> = (0..3)
        .map(|_| {
            let pts = mixed_trace(&mut rng);
            let labels: Vec<LabelClass> = (0..pts.len())
                .map(|i| match i {
                    0..=59 => LabelClass::Fixation,
                    60..=67 => LabelClass::Saccade,
                    _ => LabelClass::Pursuit,
                })
                .collect();
            let samples = pts.iter().enumerate().map(|(i, &(x, y))| GazeSample::new(i as f64 * DT, x, y)).collect();
            GazeSequence::new(samples, Some(labels), "l").unwrap()
        })
        .collect();
    let positions: Vec<Vec<usize>> = seqs.iter().map(|s| (1..s.len() - 1).collect()).collect();
    let base = BaselineConfig::default();
    let tuned = tune_baseline(BaselineKind::Ivt, &seqs, &positions, &base, &ThresholdGrid::default()).unwrap();
    assert!(tuned.config.velocity_threshold_deg_s > 25.0 && tuned.config.velocity_threshold_deg_s < 300.0);
    assert_eq!(tuned.config.dispersion_threshold_deg, base.dispersion_threshold_deg);
}

fn rotate(pts: &[(f64, f64)], a: f64) -> Vec<(f64, f64)> {
    let (s, c) = a.sin_cos();
    pts.iter().map(|&(x, y)| (c * x - s * y, s * x + c * y)).collect()
}

proptest! {
    #[test]
    fn pca_ratio_is_rotation_invariant(
        pts in prop::collection::vec((-5.0f64..5.0, -5.0f64..5.0), 3..40),
        a in -PI..PI,
    ) {
        let (r0, r1) = (pca_ratio(&pts), pca_ratio(&rotate(&pts, a)));
        prop_assume!(covariance_eigenvalues(&pts).1 > 1e-6);
        prop_assert!((r0 - r1).abs() <= 1e-6 * r0);
    }

    #[test]
    fn raising_the_velocity_threshold_never_adds_saccades(
        pts in prop::collection::vec((-3.0f64..3.0, -3.0f64..3.0), 5..60),
        t1 in 1.0f64..2000.0,
        dt in 0.0f64..2000.0,
    ) {
        let seq = seq_from(&pts);
        let lo = ivt_detect(&seq, &BaselineConfig { velocity_threshold_deg_s: t1, ..Default::default() }).unwrap().labels();
        let hi = ivt_detect(&seq, &BaselineConfig { velocity_threshold_deg_s: t1 + dt, ..Default::default() }).unwrap().labels();
        for (a, b) in lo.iter().zip(&hi) {
            if *b == Some(LabelClass::Saccade) {
                prop_assert_eq!(*a, Some(LabelClass::Saccade));
            }
        }
    }

    #[test]
    fn scores_are_normalized_and_agree_with_labels(
        pts in prop::collection::vec((-3.0f64..3.0, -3.0f64..3.0), 30..80),
        v in 5.0f64..500.0,
        d in 0.05f64..5.0,
        ang in 0.1f64..3.0,
        r in 1.1f64..50.0,
    ) {
        let seq = seq_from(&pts);
        let cfg = BaselineConfig { velocity_threshold_deg_s: v, dispersion_threshold_deg: d, angle_threshold_rad: ang, pca_ratio_threshold: r, ..Default::default() };
        for kind in [BaselineKind::Ivt, BaselineKind::IvtIdt, BaselineKind::Ivmp, BaselineKind::Pca] {
            let out = Baseline::new(kind, cfg).unwrap().detect(&seq).unwrap();
            prop_assert_eq!(out.covered_count(), pts.len() - 2);
            for s in out.entries() {
                prop_assert!((s.scores.iter().sum::<f64>() - 1.0).abs() < 1e-12);
                prop_assert!(s.scores.iter().all(|p| (0.0..=1.0).contains(p)));
                prop_assert_eq!(argmax_class(&s.scores), s.label);
            }
        }
    }
}
