//! Scripted dot-stimulus simulation with construction-time labels.
//!
//! A script alternates fixations and pursuits, joined by saccades except
//! for occasional direct pursuit onsets and offsets. Fixation and saccade
//! endpoints sit on a star of 88 screen positions; pursuits either travel
//! to another star point, or run straight and bounce off the screen edges
//! at constant or ramped speed.

use std::f64::consts::PI;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{events_from_labels, GazeSample, GazeSequence, LabelClass};

pub type Point = (f64, f64);

/// Relative frequency of the pursuit kinds in generated scripts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PursuitMix {
    pub to_target: f64,
    pub bouncing: f64,
    pub accelerating: f64,
}

impl Default for PursuitMix {
    fn default() -> Self {
        Self { to_target: 1.0, bouncing: 1.0, accelerating: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StimulusConfig {
    pub rate_hz: f64,
    pub screen_half_extent_deg: f64,
    pub n_star_positions: usize,
    pub fixation_dur_ms: (f64, f64),
    pub pursuit_speed_deg_s: (f64, f64),
    pub saccade_dur_ms: (f64, f64),
    /// Duration of straight bouncing and accelerating pursuits.
    pub pursuit_dur_ms: (f64, f64),
    pub noise_sigma_deg: f64,
    pub tremor_sigma_deg: f64,
    pub sequence_dur_ms: f64,
    /// Event counts the script steers toward, as fixation, saccade, pursuit.
    pub target_event_counts: [u64; 3],
    pub mix: PursuitMix,
    pub seed: u64,
}

impl Default for StimulusConfig {
    fn default() -> Self {
        Self {
            rate_hz: 300.0,
            screen_half_extent_deg: 11.0,
            n_star_positions: 88,
            fixation_dur_ms: (100.0, 400.0),
            pursuit_speed_deg_s: (5.0, 35.0),
            saccade_dur_ms: (10.0, 100.0),
            pursuit_dur_ms: (2000.0, 10000.0),
            noise_sigma_deg: 0.05,
            tremor_sigma_deg: 0.02,
            sequence_dur_ms: 20000.0,
            target_event_counts: [1626, 2647, 1089],
            mix: PursuitMix::default(),
            seed: 0,
        }
    }
}

fn check_range(name: &str, (lo, hi): (f64, f64), min: f64) -> Result<()> {
    if !(lo.is_finite() && hi.is_finite() && lo >= min && lo <= hi) {
        return Err(Error::Config(format!("{name} range ({lo}, {hi}) is empty or out of bounds")));
    }
    Ok(())
}

impl StimulusConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.rate_hz.is_finite() && self.rate_hz > 0.0) {
            return Err(Error::Config("rate_hz must be positive".into()));
        }
        if !(self.screen_half_extent_deg.is_finite() && self.screen_half_extent_deg > 0.0) {
            return Err(Error::Config("screen_half_extent_deg must be positive".into()));
        }
        if self.n_star_positions == 0 || self.n_star_positions % 8 != 0 {
            return Err(Error::Config("n_star_positions must be a positive multiple of 8".into()));
        }
        check_range("fixation_dur_ms", self.fixation_dur_ms, f64::MIN_POSITIVE)?;
        check_range("pursuit_speed_deg_s", self.pursuit_speed_deg_s, f64::MIN_POSITIVE)?;
        check_range("saccade_dur_ms", self.saccade_dur_ms, f64::MIN_POSITIVE)?;
        check_range("pursuit_dur_ms", self.pursuit_dur_ms, f64::MIN_POSITIVE)?;
        if !(self.noise_sigma_deg >= 0.0 && self.tremor_sigma_deg >= 0.0) {
            return Err(Error::Config("noise and tremor sigmas must be non-negative".into()));
        }
        if !(self.sequence_dur_ms.is_finite() && self.sequence_dur_ms > 0.0) {
            return Err(Error::Config("sequence_dur_ms must be positive".into()));
        }
        let [f, s, p] = self.target_event_counts;
        if f + p == 0 || s == 0 && f * p == 0 {
            return Err(Error::Config("target_event_counts need movements of both kinds or saccades".into()));
        }
        let m = self.mix;
        if [m.to_target, m.bouncing, m.accelerating].iter().any(|w| !(w.is_finite() && *w >= 0.0))
            || m.to_target + m.bouncing + m.accelerating <= 0.0
        {
            return Err(Error::Config("pursuit mix weights must be non-negative with a positive sum".into()));
        }
        Ok(())
    }

    fn sample_dt_ms(&self) -> f64 {
        1000.0 / self.rate_hz
    }
}

/// 8 rays (horizontal, vertical, both diagonals, both directions) with
/// equally spaced points, the outermost at the screen half-extent.
pub fn star_positions(config: &StimulusConfig) -> Vec<Point> {
    let per_ray = config.n_star_positions / 8;
    let step = config.screen_half_extent_deg / per_ray as f64;
    let mut out = Vec::with_capacity(config.n_star_positions);
    for ray in 0..8 {
        let angle = ray as f64 * PI / 4.0;
        let (s, c) = angle.sin_cos();
        for k in 1..=per_ray {
            let r = step * k as f64;
            out.push((r * c, r * s));
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScriptEvent {
    FixateAt { point: Point, dur_ms: f64 },
    SaccadeTo { point: Point },
    PursueTo { point: Point, speed: f64 },
    /// Straight movement along `direction` (radians), reflected at the screen edges.
    PursueBouncing { direction: f64, speed: f64, dur_ms: f64 },
    PursueAccel { direction: f64, speed_from: f64, speed_to: f64, dur_ms: f64 },
}

impl ScriptEvent {
    pub fn class(&self) -> LabelClass {
        match self {
            ScriptEvent::FixateAt { .. } => LabelClass::Fixation,
            ScriptEvent::SaccadeTo { .. } => LabelClass::Saccade,
            _ => LabelClass::Pursuit,
        }
    }
}

/// Samples produced by one script event.
#[derive(Debug, Clone, PartialEq)]
pub struct EventRun {
    pub samples: Vec<GazeSample>,
    pub labels: Vec<LabelClass>,
    /// Noise-free gaze position when the event ends.
    pub end_point: Point,
    pub end_ms: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticTrace {
    pub sequence: GazeSequence,
    pub script: Vec<ScriptEvent>,
}

/// Reflects a coordinate back into `[-h, h]`.
pub fn fold_into(x: f64, h: f64) -> f64 {
    let period = 4.0 * h;
    let y = (x + h).rem_euclid(period);
    if y > 2.0 * h {
        4.0 * h - y - h
    } else {
        y - h
    }
}

/// Saccade duration in ms: the usual linear amplitude relation
/// (21 ms + 2.2 ms/deg) with ±10% jitter, clamped to the configured band.
pub fn saccade_duration_ms(amplitude: f64, jitter: f64, config: &StimulusConfig) -> f64 {
    let (lo, hi) = config.saccade_dur_ms;
    ((21.0 + 2.2 * amplitude) * jitter).clamp(lo, hi)
}

/// Minimum-jerk position fraction at normalized time `tau`.
pub fn minimum_jerk(tau: f64) -> f64 {
    let t = tau.clamp(0.0, 1.0);
    t * t * t * (10.0 - 15.0 * t + 6.0 * t * t)
}

fn in_screen(p: Point, h: f64) -> bool {
    p.0.is_finite() && p.1.is_finite() && p.0.abs() <= h + 1e-9 && p.1.abs() <= h + 1e-9
}

fn check_speed(speed: f64, config: &StimulusConfig) -> Result<()> {
    let (lo, hi) = config.pursuit_speed_deg_s;
    if !(speed >= lo && speed <= hi) {
        return Err(Error::InvalidInput(format!("pursuit speed {speed} outside [{lo}, {hi}]")));
    }
    Ok(())
}

/// Synthesizes one event starting at `start_ms` from gaze position `start`.
/// Samples fall on the global grid `t_k = k / rate`, and an event owns the
/// grid points inside its half-open time interval.
pub fn synthesize_event(
    event: &ScriptEvent,
    start: Point,
    start_ms: f64,
    config: &StimulusConfig,
    rng: &mut impl Rng,
) -> Result<EventRun> {
    let h = config.screen_half_extent_deg;
    if !in_screen(start, h) {
        return Err(Error::InvalidInput(format!("start point {start:?} outside the screen")));
    }
    let fold = |p: Point| (fold_into(p.0, h), fold_into(p.1, h));
    // trajectory as a function of time since event start (ms)
    let (dur_ms, path): (f64, Box<dyn Fn(f64) -> Point>) = match *event {
        ScriptEvent::FixateAt { point, dur_ms } => {
            if !in_screen(point, h) {
                return Err(Error::InvalidInput(format!("fixation target {point:?} outside the screen")));
            }
            (dur_ms, Box::new(move |_| point))
        }
        ScriptEvent::SaccadeTo { point } => {
            if !in_screen(point, h) {
                return Err(Error::InvalidInput(format!("saccade target {point:?} outside the screen")));
            }
            let amplitude = (point.0 - start.0).hypot(point.1 - start.1);
            let dur = saccade_duration_ms(amplitude, rng.random_range(0.9..=1.1), config);
            let path = move |t: f64| {
                let s = minimum_jerk(t / dur);
                (start.0 + s * (point.0 - start.0), start.1 + s * (point.1 - start.1))
            };
            (dur, Box::new(path))
        }
        ScriptEvent::PursueTo { point, speed } => {
            if !in_screen(point, h) {
                return Err(Error::InvalidInput(format!("pursuit target {point:?} outside the screen")));
            }
            check_speed(speed, config)?;
            let dist = (point.0 - start.0).hypot(point.1 - start.1);
            let dur = 1000.0 * dist / speed;
            let path = move |t: f64| {
                let s = if dur > 0.0 { (t / dur).min(1.0) } else { 1.0 };
                (start.0 + s * (point.0 - start.0), start.1 + s * (point.1 - start.1))
            };
            (dur, Box::new(path))
        }
        ScriptEvent::PursueBouncing { direction, speed, dur_ms } => {
            check_speed(speed, config)?;
            let (s, c) = direction.sin_cos();
            let path = move |t: f64| {
                let d = speed * t / 1000.0;
                fold((start.0 + d * c, start.1 + d * s))
            };
            (dur_ms, Box::new(path))
        }
        ScriptEvent::PursueAccel { direction, speed_from, speed_to, dur_ms } => {
            check_speed(speed_from, config)?;
            check_speed(speed_to, config)?;
            let (s, c) = direction.sin_cos();
            let path = move |t: f64| {
                let ts = t / 1000.0;
                let d = speed_from * ts + (speed_to - speed_from) * ts * ts / (2.0 * dur_ms / 1000.0);
                fold((start.0 + d * c, start.1 + d * s))
            };
            (dur_ms, Box::new(path))
        }
    };
    if !(dur_ms.is_finite() && dur_ms >= 0.0) {
        return Err(Error::InvalidInput(format!("event duration {dur_ms} ms")));
    }

    let class = event.class();
    let dt = config.sample_dt_ms();
    let end_ms = start_ms + dur_ms;
    let first = (start_ms / dt).ceil() as usize;
    let noise = Normal::new(0.0, config.noise_sigma_deg).map_err(|e| Error::Config(e.to_string()))?;
    let tremor = Normal::new(0.0, config.tremor_sigma_deg).map_err(|e| Error::Config(e.to_string()))?;

    let mut samples = Vec::new();
    let mut k = first;
    loop {
        let t = k as f64 * dt;
        if t >= end_ms {
            break;
        }
        if t >= start_ms {
            let (mut x, mut y) = path(t - start_ms);
            if class == LabelClass::Fixation {
                x += tremor.sample(rng);
                y += tremor.sample(rng);
            }
            x += noise.sample(rng);
            y += noise.sample(rng);
            samples.push(GazeSample::new(t, x.clamp(-h, h), y.clamp(-h, h)));
        }
        k += 1;
    }
    let labels = vec![class; samples.len()];
    Ok(EventRun { samples, labels, end_point: path(dur_ms), end_ms })
}

fn pick_target(from: Point, stars: &[Point], min_dist: f64, rng: &mut impl Rng) -> Point {
    let far: Vec<Point> =
        stars.iter().copied().filter(|p| (p.0 - from.0).hypot(p.1 - from.1) >= min_dist).collect();
    *far.choose(rng).expect("star layout spans the screen")
}

fn is_star(p: Point, stars: &[Point]) -> bool {
    stars.iter().any(|s| (s.0 - p.0).abs() < 1e-12 && (s.1 - p.1).abs() < 1e-12)
}

/// Saccade target: the mirrored star point half of the time when gazing at
/// a star point, else a random star point at least 1 deg away.
fn saccade_target(from: Point, stars: &[Point], rng: &mut impl Rng) -> Point {
    if is_star(from, stars) && rng.random_bool(0.5) {
        return (-from.0, -from.1);
    }
    pick_target(from, stars, 1.0, rng)
}

fn pursuit_event(from: Point, stars: &[Point], config: &StimulusConfig, rng: &mut impl Rng) -> ScriptEvent {
    let (vlo, vhi) = config.pursuit_speed_deg_s;
    let (dlo, dhi) = config.pursuit_dur_ms;
    let m = config.mix;
    let u = rng.random_range(0.0..m.to_target + m.bouncing + m.accelerating);
    let direction = rng.random_range(0.0..2.0 * PI);
    if u < m.to_target {
        ScriptEvent::PursueTo { point: pick_target(from, stars, 3.0, rng), speed: rng.random_range(vlo..=vhi) }
    } else if u < m.to_target + m.bouncing {
        ScriptEvent::PursueBouncing { direction, speed: rng.random_range(vlo..=vhi), dur_ms: rng.random_range(dlo..=dhi) }
    } else {
        ScriptEvent::PursueAccel {
            direction,
            speed_from: rng.random_range(vlo..=vhi),
            speed_to: rng.random_range(vlo..=vhi),
            dur_ms: rng.random_range(dlo..=dhi),
        }
    }
}

/// Generates sequence `index` of the corpus seeded by `config.seed`.
///
/// Movements are drawn in the target fixation:pursuit proportion. Two
/// movements of the same kind are always separated by a saccade; between
/// different kinds a saccade is inserted while the saccade count stays
/// within the target saccade:movement ratio. The first transition of every
/// sequence is direct, a pursuit onset in even-indexed sequences and an
/// offset in odd-indexed ones, so any corpus of two or more sequences holds
/// all nine label-pair transitions.
pub fn generate_sequence(config: &StimulusConfig, index: u64) -> Result<SyntheticTrace> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(index);
    let stars = star_positions(config);
    let [tf, ts, tp] = config.target_event_counts;
    let saccade_ratio = ts as f64 / (tf + tp) as f64;
    let p_fix = tf as f64 / (tf + tp) as f64;

    let mut pos = *stars.choose(&mut rng).expect("non-empty star");
    let mut t = 0.0;
    let mut samples = Vec::new();
    let mut labels = Vec::new();
    let mut script = Vec::new();
    let mut counts = [0u64; 3];
    let mut prev: Option<LabelClass> = None;
    let mut emit = |ev: ScriptEvent, pos: &mut Point, t: &mut f64, rng: &mut ChaCha8Rng| -> Result<()> {
        let run = synthesize_event(&ev, *pos, *t, config, rng)?;
        samples.extend(run.samples);
        labels.extend(run.labels);
        script.push(ev);
        *pos = run.end_point;
        *t = run.end_ms;
        Ok(())
    };

    while t < config.sequence_dur_ms {
        let movements = counts[0] + counts[2];
        let kind = match (prev, movements) {
            (None, _) => if index % 2 == 0 { LabelClass::Fixation } else { LabelClass::Pursuit },
            (Some(p), 1) => if p == LabelClass::Fixation { LabelClass::Pursuit } else { LabelClass::Fixation },
            _ => if rng.random_bool(p_fix) { LabelClass::Fixation } else { LabelClass::Pursuit },
        };
        if let Some(p) = prev {
            let direct = p != kind
                && (movements == 1 || (counts[1] + 1) as f64 > saccade_ratio * (movements + 1) as f64 + 1.0);
            if !direct {
                let target = saccade_target(pos, &stars, &mut rng);
                emit(ScriptEvent::SaccadeTo { point: target }, &mut pos, &mut t, &mut rng)?;
                counts[1] += 1;
            }
        }
        let ev = if kind == LabelClass::Fixation {
            let (lo, hi) = config.fixation_dur_ms;
            ScriptEvent::FixateAt { point: pos, dur_ms: rng.random_range(lo..=hi) }
        } else {
            pursuit_event(pos, &stars, config, &mut rng)
        };
        emit(ev, &mut pos, &mut t, &mut rng)?;
        counts[kind.index()] += 1;
        prev = Some(kind);
    }

    let n = samples.iter().take_while(|s| s.t_ms < config.sequence_dur_ms).count();
    samples.truncate(n);
    labels.truncate(n);
    let sequence = GazeSequence::new(samples, Some(labels), format!("synth-{}-{index:04}", config.seed))?;
    Ok(SyntheticTrace { sequence, script })
}

pub fn generate_corpus(config: &StimulusConfig, n_sequences: usize) -> Result<Vec<SyntheticTrace>> {
    if n_sequences == 0 {
        return Err(Error::InvalidInput("at least one sequence is required".into()));
    }
    (0..n_sequences as u64).map(|i| generate_sequence(config, i)).collect()
}

/// `counts[a][b]`: positions i with `labels[i] = a` and `labels[i+1] = b`.
pub fn transition_counts(labels: &[LabelClass]) -> [[u64; 3]; 3] {
    let mut out = [[0u64; 3]; 3];
    for w in labels.windows(2) {
        out[w[0].index()][w[1].index()] += 1;
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct CorpusStats {
    pub sequences: u64,
    pub frames: [u64; 3],
    pub events: [u64; 3],
    pub transitions: [[u64; 3]; 3],
}

impl CorpusStats {
    pub fn add(&mut self, labels: &[LabelClass]) {
        self.sequences += 1;
        for l in labels {
            self.frames[l.index()] += 1;
        }
        for ev in events_from_labels(labels) {
            self.events[ev.class.index()] += 1;
        }
        let t = transition_counts(labels);
        for a in 0..3 {
            for b in 0..3 {
                self.transitions[a][b] += t[a][b];
            }
        }
    }

    pub fn from_sequences<'a>(seqs: impl IntoIterator<Item = &'a GazeSequence>) -> Result<Self> {
        let mut stats = Self::default();
        for s in seqs {
            stats.add(s.require_labels()?);
        }
        Ok(stats)
    }

    pub fn total_frames(&self) -> u64 {
        self.frames.iter().sum()
    }

    pub fn all_transitions_present(&self) -> bool {
        self.transitions.iter().flatten().all(|&c| c > 0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quiet() -> StimulusConfig {
        StimulusConfig { noise_sigma_deg: 0.0, tremor_sigma_deg: 0.0, ..Default::default() }
    }

    #[test]
    fn star_layout() {
        let stars = star_positions(&StimulusConfig::default());
        assert_eq!(stars.len(), 88);
        let mut max = 0.0f64;
        for a in &stars {
            for b in &stars {
                max = max.max((a.0 - b.0).hypot(a.1 - b.1));
            }
            assert!(stars.iter().any(|b| (a.0 + b.0).abs() < 1e-12 && (a.1 + b.1).abs() < 1e-12));
        }
        assert!((max - 22.0).abs() < 1e-9);
    }

    #[test]
    fn fixation_sample_count() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let ev = ScriptEvent::FixateAt { point: (1.0, 2.0), dur_ms: 300.0 };
        let run = synthesize_event(&ev, (1.0, 2.0), 0.0, &StimulusConfig::default(), &mut rng).unwrap();
        assert_eq!(run.samples.len(), 90);
        assert!(run.labels.iter().all(|&l| l == LabelClass::Fixation));
        let quiet_run = synthesize_event(&ev, (0.0, 0.0), 0.0, &quiet(), &mut rng).unwrap();
        assert!(quiet_run.samples.iter().all(|s| s.x_deg == 1.0 && s.y_deg == 2.0));
    }

    #[test]
    fn events_share_the_sample_grid() {
        let cfg = quiet();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let a = synthesize_event(&ScriptEvent::FixateAt { point: (0.0, 0.0), dur_ms: 101.0 }, (0.0, 0.0), 0.0, &cfg, &mut rng)
            .unwrap();
        let b = synthesize_event(&ScriptEvent::FixateAt { point: (0.0, 0.0), dur_ms: 50.0 }, (0.0, 0.0), a.end_ms, &cfg, &mut rng)
            .unwrap();
        let dt = 1000.0 / 300.0;
        assert_eq!(a.samples.len(), 31);
        assert!((b.samples[0].t_ms - 31.0 * dt).abs() < 1e-9);
    }

    #[test]
    fn target_off_screen_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let ev = ScriptEvent::SaccadeTo { point: (12.0, 0.0) };
        assert!(synthesize_event(&ev, (0.0, 0.0), 0.0, &quiet(), &mut rng).is_err());
        let ev = ScriptEvent::PursueBouncing { direction: 0.0, speed: 50.0, dur_ms: 100.0 };
        assert!(synthesize_event(&ev, (0.0, 0.0), 0.0, &quiet(), &mut rng).is_err());
    }

    #[test]
    fn saccade_lands_on_target() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let ev = ScriptEvent::SaccadeTo { point: (10.0, 0.0) };
        let run = synthesize_event(&ev, (0.0, 0.0), 0.0, &quiet(), &mut rng).unwrap();
        assert_eq!(run.end_point, (10.0, 0.0));
        assert!(run.samples.windows(2).all(|w| w[1].x_deg >= w[0].x_deg));
        // 10 deg takes 43 ms ± 10%: 12 to 15 samples at 300 Hz
        assert!((12..=15).contains(&run.samples.len()), "{}", run.samples.len());
    }

    #[test]
    fn fold_reflects() {
        assert_eq!(fold_into(3.0, 11.0), 3.0);
        assert!((fold_into(12.0, 11.0) - 10.0).abs() < 1e-12);
        assert!((fold_into(-13.0, 11.0) + 9.0).abs() < 1e-12);
        assert!((fold_into(35.0, 11.0) + 9.0).abs() < 1e-12);
    }

    #[test]
    fn sequences_are_deterministic_and_labeled() {
        let cfg = StimulusConfig { seed: 7, sequence_dur_ms: 5000.0, ..Default::default() };
        let a = generate_corpus(&cfg, 3).unwrap();
        let b = generate_corpus(&cfg, 3).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.sequence, y.sequence);
            assert_eq!(x.sequence.len(), 1500);
        }
        assert_ne!(a[0].sequence.samples(), a[1].sequence.samples());
        assert!(generate_corpus(&cfg, 0).is_err());
    }

    #[test]
    fn first_transition_alternates() {
        let cfg = StimulusConfig { seed: 2, sequence_dur_ms: 4000.0, ..Default::default() };
        let even = generate_sequence(&cfg, 0).unwrap();
        let odd = generate_sequence(&cfg, 1).unwrap();
        assert_eq!(even.script[0].class(), LabelClass::Fixation);
        assert_eq!(even.script[1].class(), LabelClass::Pursuit);
        assert_eq!(odd.script[0].class(), LabelClass::Pursuit);
        assert_eq!(odd.script[1].class(), LabelClass::Fixation);
    }

    #[test]
    fn config_validation() {
        assert!(StimulusConfig::default().validate().is_ok());
        assert!(StimulusConfig { rate_hz: 0.0, ..Default::default() }.validate().is_err());
        assert!(StimulusConfig { fixation_dur_ms: (400.0, 100.0), ..Default::default() }.validate().is_err());
        assert!(StimulusConfig { noise_sigma_deg: -1.0, ..Default::default() }.validate().is_err());
        assert!(StimulusConfig { n_star_positions: 90, ..Default::default() }.validate().is_err());
    }
}
