//! Overlap detection and collision scoring.
//!
//! Every frame, each pair of active tracks is tested for box overlap. A
//! maximal run of frames in which a pair overlaps is an *episode*. Once
//! `post_window` frames have passed since an episode's onset, the episode is
//! scored from three anomalies:
//!
//! * `alpha`, the acceleration anomaly: peak acceleration after onset against
//!   the mean acceleration before it,
//! * `beta`, the trajectory anomaly: how squarely the two trajectories meet,
//! * `gamma`, the change-in-angle anomaly: how far a vehicle's own heading
//!   turns across the onset.
//!
//! The anomalies are combined with fixed weights and an [`AccidentEvent`] is
//! emitted when the combined score exceeds the decision threshold. Events
//! therefore trail the overlap onset by `post_window` frames.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::detection::BoundingBox;
use crate::kinematics::{angle_between, DirectionVector, KinematicsState, TrackKinematics};
use crate::tracker::{Point2, StepOutcome, Tracker};

/// Which form of the overlap test to apply.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OverlapRule {
    /// Center distance against summed extents on both axes.
    #[default]
    Corrected,
    /// Same, but the vertical term uses `|a.y + b.y|`. Kept for comparison
    /// only; it rejects even identical boxes away from the origin.
    CenterSum,
}

/// True iff the box interiors intersect on both axes. Touching edges do not overlap.
pub fn boxes_overlap(a: &BoundingBox, b: &BoundingBox) -> bool {
    boxes_overlap_with(a, b, OverlapRule::Corrected)
}

pub fn boxes_overlap_with(a: &BoundingBox, b: &BoundingBox, rule: OverlapRule) -> bool {
    let dy = match rule {
        OverlapRule::Corrected => (a.y - b.y).abs(),
        OverlapRule::CenterSum => (a.y + b.y).abs(),
    };
    2.0 * (a.x - b.x).abs() < a.w + b.w && 2.0 * dy < a.h + b.h
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Weights {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

impl Default for Weights {
    fn default() -> Self {
        Self { alpha: 0.4, beta: 0.35, gamma: 0.25 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnomalyConfig {
    /// Lower edge (degrees, exclusive) of the crossing-angle band.
    pub theta_low: f64,
    /// Upper edge (degrees, exclusive) of the crossing-angle band.
    pub theta_high: f64,
    /// Acceleration change (px/s^2) that maps to `alpha = 1`. Per-sample
    /// acceleration noise grows by roughly 140 px/s^2 per pixel of centroid
    /// jitter, so smaller values saturate on noisy but uneventful tracks.
    pub accel_norm: f64,
    /// Heading rotation (degrees) that maps to `gamma = 1`.
    pub gamma_norm: f64,
    /// Length scale (px) of the intersection-distance attenuation.
    pub distance_scale: f64,
    pub weights: Weights,
    pub decision_threshold: f64,
    pub pre_window: u64,
    pub post_window: u64,
    /// Minimum frames between two events for the same pair.
    pub cooldown: u64,
}

impl Default for AnomalyConfig {
    fn default() -> Self {
        Self {
            theta_low: 10.0,
            theta_high: 170.0,
            accel_norm: 1200.0,
            gamma_norm: 90.0,
            distance_scale: 100.0,
            weights: Weights::default(),
            decision_threshold: 0.5,
            pre_window: 15,
            post_window: 15,
            cooldown: 60,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnomalyConfigError {
    #[error("crossing band must satisfy 0 <= theta_low < theta_high <= 180, got ({0}, {1})")]
    Band(f64, f64),
    #[error("weights must be non-negative and sum to 1, got {0:?}")]
    Weights(Weights),
    #[error("{0} must be positive")]
    NonPositive(&'static str),
    #[error("decision_threshold must lie in [0, 1], got {0}")]
    Threshold(f64),
}

impl AnomalyConfig {
    pub fn validate(&self) -> Result<(), AnomalyConfigError> {
        if !(0.0 <= self.theta_low && self.theta_low < self.theta_high && self.theta_high <= 180.0) {
            return Err(AnomalyConfigError::Band(self.theta_low, self.theta_high));
        }
        let w = self.weights;
        if w.alpha < 0.0 || w.beta < 0.0 || w.gamma < 0.0 || (w.alpha + w.beta + w.gamma - 1.0).abs() > 1e-9 {
            return Err(AnomalyConfigError::Weights(w));
        }
        for (name, v) in
            [("accel_norm", self.accel_norm), ("gamma_norm", self.gamma_norm), ("distance_scale", self.distance_scale)]
        {
            if v.is_nan() || v <= 0.0 {
                return Err(AnomalyConfigError::NonPositive(name));
            }
        }
        if !(0.0..=1.0).contains(&self.decision_threshold) {
            return Err(AnomalyConfigError::Threshold(self.decision_threshold));
        }
        Ok(())
    }
}

/// A track pair whose boxes overlap in `frame_index`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct OverlapEvent {
    pub frame_index: u64,
    pub track_a: u64,
    pub track_b: u64,
    pub onset: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AnomalyScores {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub combined: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AccidentEvent {
    pub frame_index: u64,
    pub track_a: u64,
    pub track_b: u64,
    pub scores: AnomalyScores,
    pub overlap_onset: u64,
}

#[derive(Serialize)]
struct EventRecord {
    frame: u64,
    pair: [u64; 2],
    alpha: f64,
    beta: f64,
    gamma: f64,
    score: f64,
    onset: u64,
}

impl AccidentEvent {
    /// The line-delimited output record (no trailing newline).
    pub fn to_record(&self) -> String {
        serde_json::to_string(&EventRecord {
            frame: self.frame_index,
            pair: [self.track_a, self.track_b],
            alpha: self.scores.alpha,
            beta: self.scores.beta,
            gamma: self.scores.gamma,
            score: self.scores.combined,
            onset: self.overlap_onset,
        })
        .expect("event records always serialize")
    }

    pub fn pair(&self) -> (u64, u64) {
        (self.track_a, self.track_b)
    }
}

/// Acceleration anomaly of one track around `onset`.
///
/// The pre-onset reference is the mean acceleration over
/// `[onset - pre_window, onset]`; the post-onset peak is the sample of
/// largest magnitude in `(onset, onset + post_window]`, sign kept. Fewer than
/// two samples on either side yields zero.
pub fn acceleration_anomaly<'a, I>(history: I, onset: u64, cfg: &AnomalyConfig) -> f64
where
    I: IntoIterator<Item = &'a (u64, f64)>,
{
    let pre_start = onset.saturating_sub(cfg.pre_window);
    let post_end = onset + cfg.post_window;
    let (mut pre_sum, mut pre_n) = (0.0, 0usize);
    let mut peak: Option<f64> = None;
    let mut post_n = 0usize;
    for &(f, a) in history {
        if (pre_start..=onset).contains(&f) {
            pre_sum += a;
            pre_n += 1;
        } else if f > onset && f <= post_end {
            post_n += 1;
            if peak.is_none_or(|p| a.abs() > p.abs()) {
                peak = Some(a);
            }
        }
    }
    match peak {
        Some(peak) if pre_n >= 2 && post_n >= 2 => {
            let change = peak - pre_sum / pre_n as f64;
            (change.abs() / cfg.accel_norm).clamp(0.0, 1.0)
        }
        _ => 0.0,
    }
}

/// Distance from the crossing point of two centroid-anchored trajectory lines
/// to the midpoint of the centroids. Near-parallel lines give infinity.
pub fn intersection_distance(ca: Point2, u: &DirectionVector, cb: Point2, v: &DirectionVector) -> f64 {
    let cross = u.i * v.j - u.j * v.i;
    if cross.abs() < 1e-6 {
        return f64::INFINITY;
    }
    let (wx, wy) = (cb.x - ca.x, cb.y - ca.y);
    let s = (wx * v.j - wy * v.i) / cross;
    let p = Point2::new(ca.x + s * u.i, ca.y + s * u.j);
    p.distance(&Point2::new((ca.x + cb.x) / 2.0, (ca.y + cb.y) / 2.0))
}

/// Trajectory anomaly from the crossing angle `theta` (degrees).
///
/// Inside the open band `(theta_low, theta_high)` the anomaly is `sin(theta)`.
/// Outside it, the same value is attenuated by
/// `exp(-intersection_dist / distance_scale)`.
pub fn trajectory_anomaly(theta: Option<f64>, intersection_dist: Option<f64>, cfg: &AnomalyConfig) -> f64 {
    let Some(theta) = theta else { return 0.0 };
    let interior = theta.to_radians().sin().clamp(0.0, 1.0);
    if theta > cfg.theta_low && theta < cfg.theta_high {
        interior
    } else {
        let d = intersection_dist.unwrap_or(f64::INFINITY);
        interior * (-d / cfg.distance_scale).exp()
    }
}

/// Heading-rotation anomaly of one track across `onset`.
///
/// Compares the latest direction at or before the onset with the latest one
/// inside `(onset, onset + post_window]`.
pub fn angle_change_anomaly<'a, I>(directions: I, onset: u64, cfg: &AnomalyConfig) -> f64
where
    I: IntoIterator<Item = &'a DirectionVector>,
{
    let mut before = None;
    let mut after = None;
    for d in directions {
        if d.source_frame <= onset {
            before = Some(*d);
        } else if d.source_frame <= onset + cfg.post_window {
            after = Some(*d);
        }
    }
    match (before, after) {
        (Some(b), Some(a)) => (angle_between(&b, &a) / cfg.gamma_norm).clamp(0.0, 1.0),
        _ => 0.0,
    }
}

pub fn combine(alpha: f64, beta: f64, gamma: f64, weights: &Weights) -> f64 {
    (weights.alpha * alpha + weights.beta * beta + weights.gamma * gamma).clamp(0.0, 1.0)
}

/// Scores one overlap episode of the pair `(a, b)` with the given onset.
pub fn score_pair(
    a: Option<&TrackKinematics>,
    b: Option<&TrackKinematics>,
    centroid_a: Option<Point2>,
    centroid_b: Option<Point2>,
    onset: u64,
    cfg: &AnomalyConfig,
) -> AnomalyScores {
    let empty = TrackKinematics::default();
    let (ka, kb) = (a.unwrap_or(&empty), b.unwrap_or(&empty));

    let alpha = acceleration_anomaly(&ka.acceleration_history, onset, cfg).max(acceleration_anomaly(
        &kb.acceleration_history,
        onset,
        cfg,
    ));

    let (da, db) = (ka.direction_at(onset), kb.direction_at(onset));
    let beta = match (da, db) {
        (Some(u), Some(v)) => {
            let theta = angle_between(&u, &v);
            let dist = match (centroid_a, centroid_b) {
                (Some(ca), Some(cb)) => intersection_distance(ca, &u, cb, &v),
                _ => f64::INFINITY,
            };
            trajectory_anomaly(Some(theta), Some(dist), cfg)
        }
        _ => trajectory_anomaly(None, None, cfg),
    };

    let gamma = angle_change_anomaly(&ka.direction_history, onset, cfg).max(angle_change_anomaly(
        &kb.direction_history,
        onset,
        cfg,
    ));

    AnomalyScores { alpha, beta, gamma, combined: combine(alpha, beta, gamma, &cfg.weights) }
}

#[derive(Debug, Clone)]
struct Episode {
    pair: (u64, u64),
    onset: u64,
    last_overlap: u64,
    scored: bool,
}

/// A scored overlap episode (one "pattern" for false-alarm accounting).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScoredEpisode {
    pub frame_index: u64,
    pub track_a: u64,
    pub track_b: u64,
    pub onset: u64,
    pub scores: AnomalyScores,
    pub emitted: bool,
}

#[derive(Debug, Clone, Default)]
pub struct FrameReport {
    pub overlaps: Vec<OverlapEvent>,
    pub scored: Vec<ScoredEpisode>,
    pub events: Vec<AccidentEvent>,
}

/// Per-stream overlap episode bookkeeping and scoring.
#[derive(Debug, Clone)]
pub struct CollisionEngine {
    config: AnomalyConfig,
    rule: OverlapRule,
    episodes: Vec<Episode>,
    last_event: BTreeMap<(u64, u64), u64>,
    prev_frame: Option<u64>,
    scored_total: u64,
}

impl CollisionEngine {
    pub fn new(config: AnomalyConfig, rule: OverlapRule) -> Self {
        Self { config, rule, episodes: Vec::new(), last_event: BTreeMap::new(), prev_frame: None, scored_total: 0 }
    }

    pub fn config(&self) -> &AnomalyConfig {
        &self.config
    }

    /// Number of episodes scored so far.
    pub fn scored_total(&self) -> u64 {
        self.scored_total
    }

    /// Runs overlap detection and due scoring for `frame_index`.
    ///
    /// Must be called after the tracker and kinematics have been stepped for
    /// the frame, and before kinematics state for deregistered tracks is
    /// retired.
    pub fn process_frame(
        &mut self,
        tracker: &Tracker,
        kinematics: &KinematicsState,
        outcome: &StepOutcome,
        frame_index: u64,
    ) -> FrameReport {
        let mut report = FrameReport::default();
        let prev = self.prev_frame.replace(frame_index);

        let active: Vec<(u64, BoundingBox)> = tracker.tracks().map(|t| (t.id, t.last_bbox())).collect();
        for (i, (ida, ba)) in active.iter().enumerate() {
            for (idb, bb) in &active[i + 1..] {
                if !boxes_overlap_with(ba, bb, self.rule) {
                    continue;
                }
                let pair = (*ida, *idb);
                let open = self
                    .episodes
                    .iter_mut()
                    .rev()
                    .find(|e| e.pair == pair && prev.is_some_and(|p| e.last_overlap == p));
                let onset = match open {
                    Some(e) => {
                        e.last_overlap = frame_index;
                        e.onset
                    }
                    None => {
                        self.episodes.push(Episode {
                            pair,
                            onset: frame_index,
                            last_overlap: frame_index,
                            scored: false,
                        });
                        frame_index
                    }
                };
                report.overlaps.push(OverlapEvent { frame_index, track_a: pair.0, track_b: pair.1, onset });
            }
        }

        let gone: Vec<u64> = outcome.deregistered.iter().map(|t| t.id).collect();
        let mut due: Vec<usize> = self
            .episodes
            .iter()
            .enumerate()
            .filter(|(_, e)| {
                !e.scored
                    && (frame_index >= e.onset + self.config.post_window
                        || gone.contains(&e.pair.0)
                        || gone.contains(&e.pair.1))
            })
            .map(|(i, _)| i)
            .collect();
        due.sort_by_key(|&i| (self.episodes[i].onset, self.episodes[i].pair));

        for i in due {
            let (pair, onset) = (self.episodes[i].pair, self.episodes[i].onset);
            self.episodes[i].scored = true;
            self.scored_total += 1;
            let centroid = |id: u64| {
                tracker
                    .track(id)
                    .or_else(|| outcome.deregistered.iter().find(|t| t.id == id))
                    .and_then(|t| t.centroid_at(onset))
            };
            let scores = score_pair(
                kinematics.get(pair.0),
                kinematics.get(pair.1),
                centroid(pair.0),
                centroid(pair.1),
                onset,
                &self.config,
            );
            let cooled = self.last_event.get(&pair).is_none_or(|&f| frame_index >= f + self.config.cooldown);
            let emitted = scores.combined > self.config.decision_threshold && cooled;
            if emitted {
                self.last_event.insert(pair, frame_index);
                report.events.push(AccidentEvent {
                    frame_index,
                    track_a: pair.0,
                    track_b: pair.1,
                    scores,
                    overlap_onset: onset,
                });
            }
            report.scored.push(ScoredEpisode { frame_index, track_a: pair.0, track_b: pair.1, onset, scores, emitted });
        }

        // Closed and scored episodes are finished; open ones stay so a
        // continuing overlap is not counted as a new episode.
        self.episodes.retain(|e| !e.scored || e.last_overlap == frame_index);
        report
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn bx(x: f64, y: f64, w: f64, h: f64) -> BoundingBox {
        BoundingBox::new(x, y, w, h).unwrap()
    }

    fn unit(deg: f64, frame: u64) -> DirectionVector {
        DirectionVector { i: deg.to_radians().cos(), j: deg.to_radians().sin(), source_frame: frame }
    }

    /// Interval-intersection test on corner coordinates.
    fn interval_oracle(a: &BoundingBox, b: &BoundingBox) -> bool {
        let (a0, a1) = (a.x - a.w / 2.0, a.x + a.w / 2.0);
        let (b0, b1) = (b.x - b.w / 2.0, b.x + b.w / 2.0);
        let (c0, c1) = (a.y - a.h / 2.0, a.y + a.h / 2.0);
        let (d0, d1) = (b.y - b.h / 2.0, b.y + b.h / 2.0);
        a0.max(b0) < a1.min(b1) && c0.max(d0) < c1.min(d1)
    }

    #[test]
    fn overlap_examples() {
        let a = bx(100.0, 100.0, 10.0, 10.0);
        assert!(boxes_overlap(&a, &a));
        assert!(!boxes_overlap(&a, &bx(200.0, 100.0, 10.0, 10.0)));
        assert!(!boxes_overlap(&a, &bx(110.0, 100.0, 10.0, 10.0)));
        assert!(!boxes_overlap(&a, &bx(100.0, 110.0, 10.0, 10.0)));
        assert!(boxes_overlap(&a, &bx(109.0, 109.0, 10.0, 10.0)));
    }

    #[test]
    fn center_sum_rule_rejects_identical_boxes() {
        let a = bx(100.0, 100.0, 10.0, 10.0);
        assert!(!boxes_overlap_with(&a, &a, OverlapRule::CenterSum));
        // It only agrees near the origin.
        let b = bx(10.0, 1.0, 10.0, 10.0);
        assert!(boxes_overlap_with(&b, &b, OverlapRule::CenterSum));
    }

    #[test]
    fn overlap_agrees_with_interval_oracle() {
        // Integer-valued coordinates make exact edge contact common.
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..10_000 {
            let a = bx(
                rng.random_range(0..100) as f64,
                rng.random_range(0..100) as f64,
                rng.random_range(1..40) as f64,
                rng.random_range(1..40) as f64,
            );
            let b = bx(
                rng.random_range(0..100) as f64,
                rng.random_range(0..100) as f64,
                rng.random_range(1..40) as f64,
                rng.random_range(1..40) as f64,
            );
            assert_eq!(boxes_overlap(&a, &b), interval_oracle(&a, &b), "{a:?} {b:?}");
        }
    }

    #[test]
    fn alpha_zero_for_constant_speed() {
        let hist: Vec<(u64, f64)> = (0..40).map(|f| (f, 0.0)).collect();
        assert_eq!(acceleration_anomaly(&hist, 20, &AnomalyConfig::default()), 0.0);
    }

    #[test]
    fn alpha_linear_midpoint() {
        let cfg = AnomalyConfig::default();
        let hist: Vec<(u64, f64)> = (0..40).map(|f| (f, if f > 20 { -cfg.accel_norm / 2.0 } else { 0.0 })).collect();
        assert_eq!(acceleration_anomaly(&hist, 20, &cfg), 0.5);
    }

    #[test]
    fn alpha_needs_two_samples_per_side() {
        let cfg = AnomalyConfig::default();
        let big = 3.0 * cfg.accel_norm;
        let hist = vec![(19, 0.0), (20, 0.0), (21, big)];
        assert_eq!(acceleration_anomaly(&hist, 20, &cfg), 0.0);
        let hist = vec![(20, 0.0), (21, big), (22, 0.0)];
        assert_eq!(acceleration_anomaly(&hist, 20, &cfg), 0.0);
        let hist = vec![(19, 0.0), (20, 0.0), (21, big), (22, 0.0)];
        assert_eq!(acceleration_anomaly(&hist, 20, &cfg), 1.0);
    }

    #[test]
    fn alpha_ignores_samples_outside_windows() {
        let cfg = AnomalyConfig::default();
        let mut hist: Vec<(u64, f64)> = (0..60).map(|f| (f, 0.0)).collect();
        hist[2].1 = 5000.0; // before the pre-window
        hist[50].1 = 5000.0; // after the post-window
        assert_eq!(acceleration_anomaly(&hist, 30, &cfg), 0.0);
    }

    #[test]
    fn beta_examples() {
        let cfg = AnomalyConfig::default();
        assert!((trajectory_anomaly(Some(90.0), None, &cfg) - 1.0).abs() < 1e-12);
        assert_eq!(trajectory_anomaly(None, Some(5.0), &cfg), 0.0);
        let parallel = trajectory_anomaly(Some(5.0), Some(f64::INFINITY), &cfg);
        assert_eq!(parallel, 0.0);
        let far = trajectory_anomaly(Some(5.0), Some(1000.0), &cfg);
        assert!(far < 1e-5, "{far}");
        // band edges are exclusive
        let edge = trajectory_anomaly(Some(10.0), Some(100.0), &cfg);
        assert!((edge - 10f64.to_radians().sin() * (-1.0f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn intersection_distance_cases() {
        // Perpendicular lines through (0,0) and (10,10) meet at (10,0); midpoint (5,5).
        let d = intersection_distance(Point2::new(0.0, 0.0), &unit(0.0, 0), Point2::new(10.0, 10.0), &unit(90.0, 0));
        assert!((d - 50f64.sqrt()).abs() < 1e-9);
        let d = intersection_distance(Point2::new(0.0, 0.0), &unit(0.0, 0), Point2::new(0.0, 10.0), &unit(180.0, 0));
        assert!(d.is_infinite());
    }

    #[test]
    fn gamma_examples() {
        let cfg = AnomalyConfig::default();
        let straight: Vec<_> = (0..30).map(|f| unit(30.0, f)).collect();
        assert_eq!(angle_change_anomaly(&straight, 15, &cfg), 0.0);
        let turned: Vec<_> = (0..30).map(|f| unit(if f > 15 { 75.0 } else { 30.0 }, f)).collect();
        assert!((angle_change_anomaly(&turned, 15, &cfg) - 0.5).abs() < 1e-9);
        let spun: Vec<_> = (0..30).map(|f| unit(if f > 15 { 150.0 } else { 30.0 }, f)).collect();
        assert_eq!(angle_change_anomaly(&spun, 15, &cfg), 1.0);
        assert_eq!(angle_change_anomaly(&straight[..10], 15, &cfg), 0.0);
    }

    #[test]
    fn combine_examples() {
        let w = Weights::default();
        assert_eq!(combine(0.0, 0.0, 0.0, &w), 0.0);
        assert!((combine(1.0, 1.0, 1.0, &w) - 1.0).abs() < 1e-12);
        assert!((combine(1.0, 0.0, 0.0, &w) - 0.4).abs() < 1e-12);
    }

    #[test]
    fn config_validation() {
        assert!(AnomalyConfig::default().validate().is_ok());
        let bad = AnomalyConfig { theta_low: 90.0, theta_high: 30.0, ..Default::default() };
        assert!(matches!(bad.validate(), Err(AnomalyConfigError::Band(..))));
        let bad = AnomalyConfig { weights: Weights { alpha: 0.5, beta: 0.5, gamma: 0.5 }, ..Default::default() };
        assert!(matches!(bad.validate(), Err(AnomalyConfigError::Weights(_))));
        let bad = AnomalyConfig { accel_norm: 0.0, ..Default::default() };
        assert!(matches!(bad.validate(), Err(AnomalyConfigError::NonPositive("accel_norm"))));
    }

    #[test]
    fn event_record_format() {
        let e = AccidentEvent {
            frame_index: 120,
            track_a: 0,
            track_b: 1,
            scores: AnomalyScores { alpha: 1.0, beta: 0.5, gamma: 0.0, combined: 0.575 },
            overlap_onset: 105,
        };
        assert_eq!(
            e.to_record(),
            r#"{"frame":120,"pair":[0,1],"alpha":1.0,"beta":0.5,"gamma":0.0,"score":0.575,"onset":105}"#
        );
    }

    proptest! {
        #[test]
        fn overlap_symmetric_reflexive_and_matches_oracle(
            ax in -100.0f64..100.0, ay in -100.0f64..100.0, aw in 0.1f64..50.0, ah in 0.1f64..50.0,
            bx_ in -100.0f64..100.0, by in -100.0f64..100.0, bw in 0.1f64..50.0, bh in 0.1f64..50.0,
        ) {
            let a = bx(ax, ay, aw, ah);
            let b = bx(bx_, by, bw, bh);
            prop_assert!(boxes_overlap(&a, &a));
            prop_assert_eq!(boxes_overlap(&a, &b), boxes_overlap(&b, &a));
            prop_assert_eq!(boxes_overlap(&a, &b), interval_oracle(&a, &b));
        }

        #[test]
        fn combine_is_bounded_and_monotone(
            a in 0.0f64..=1.0, b in 0.0f64..=1.0, g in 0.0f64..=1.0, bump in 0.0f64..=1.0,
            wa in 0.0f64..1.0, wb in 0.0f64..1.0,
        ) {
            prop_assume!(wa + wb <= 1.0);
            let w = Weights { alpha: wa, beta: wb, gamma: 1.0 - wa - wb };
            let c = combine(a, b, g, &w);
            prop_assert!((0.0..=1.0).contains(&c));
            prop_assert!(combine((a + bump).min(1.0), b, g, &w) >= c);
            prop_assert!(combine(a, (b + bump).min(1.0), g, &w) >= c);
            prop_assert!(combine(a, b, (g + bump).min(1.0), &w) >= c);
        }

        #[test]
        fn anomalies_stay_in_unit_interval(
            accels in prop::collection::vec(-1e5f64..1e5, 0..40),
            onset in 0u64..40,
            theta in 0.0f64..=180.0,
            dist in 0.0f64..1e4,
        ) {
            let cfg = AnomalyConfig::default();
            let hist: Vec<(u64, f64)> = accels.iter().enumerate().map(|(f, a)| (f as u64, *a)).collect();
            let alpha = acceleration_anomaly(&hist, onset, &cfg);
            prop_assert!((0.0..=1.0).contains(&alpha));
            let beta = trajectory_anomaly(Some(theta), Some(dist), &cfg);
            prop_assert!((0.0..=1.0).contains(&beta));
            let dirs: Vec<_> = accels.iter().enumerate().map(|(f, a)| unit(*a, f as u64)).collect();
            let gamma = angle_change_anomaly(&dirs, onset, &cfg);
            prop_assert!((0.0..=1.0).contains(&gamma));
        }
    }
}
