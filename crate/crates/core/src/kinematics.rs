//! Trajectory direction, speed and acceleration of tracked vehicles.
//!
//! Speeds are in pixels per second. The scaled speed multiplies the gross
//! speed by `(H - h) / H + 1`, a depth heuristic that boosts boxes that are
//! small relative to the frame (far from the camera). It is not a metric
//! correction.

use std::collections::{BTreeMap, VecDeque};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::tracker::{Point2, StepOutcome, Track, Tracker};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DirectionVector {
    pub i: f64,
    pub j: f64,
    pub source_frame: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KinematicsConfig {
    pub fps: f64,
    /// Frames spanned by one displacement measurement.
    pub interval: u32,
    /// Displacement (px per interval) below which no direction is recorded.
    /// Must sit well above centroid jitter, or stationary vehicles report
    /// random headings.
    pub min_traj_magnitude: f64,
}

impl Default for KinematicsConfig {
    fn default() -> Self {
        Self { fps: 30.0, interval: 5, min_traj_magnitude: 10.0 }
    }
}

impl KinematicsConfig {
    /// Seconds between consecutive frames.
    pub fn tau(&self) -> f64 {
        frame_interval(self.fps)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DomainError {
    #[error("box height {0} must be positive")]
    NonPositiveBoxHeight(f64),
    #[error("frame height {0} must be positive")]
    NonPositiveFrameHeight(f64),
}

pub fn frame_interval(fps: f64) -> f64 {
    1.0 / fps
}

pub fn magnitude(i: f64, j: f64) -> f64 {
    (i * i + j * j).sqrt()
}

/// Most recent sample at or before `frame - interval`, falling back to the
/// oldest sample when the history is shorter than that. The newest sample is
/// never returned.
fn reference_sample<T: Copy>(history: &VecDeque<(u64, T)>, interval: u32) -> Option<(u64, T)> {
    let &(now, _) = history.back()?;
    if history.len() < 2 {
        return None;
    }
    let target = now.saturating_sub(interval as u64);
    let found = history.iter().rev().skip(1).find(|(f, _)| *f <= target).copied();
    found.or_else(|| history.front().copied())
}

/// Normalized displacement over the last `interval` frames of `history`, or
/// `None` when the displacement does not exceed `min_magnitude`.
pub fn direction_vector(
    history: &VecDeque<(u64, Point2)>,
    interval: u32,
    min_magnitude: f64,
) -> Option<DirectionVector> {
    let (_, start) = reference_sample(history, interval)?;
    let &(now, end) = history.back()?;
    let (di, dj) = (end.x - start.x, end.y - start.y);
    let m = magnitude(di, dj);
    if m > min_magnitude {
        Some(DirectionVector { i: di / m, j: dj / m, source_frame: now })
    } else {
        None
    }
}

/// Angle between two direction vectors in degrees, in `[0, 180]`.
pub fn angle_between(u: &DirectionVector, v: &DirectionVector) -> f64 {
    (u.i * v.i + u.j * v.j).clamp(-1.0, 1.0).acos().to_degrees()
}

/// Centroid displacement per second over `interval` frames.
pub fn gross_speed(c1: Point2, c2: Point2, fps: f64, interval: f64) -> f64 {
    magnitude(c2.x - c1.x, c2.y - c1.y) / (frame_interval(fps) * interval)
}

/// Gross speed scaled by the box-height depth factor.
///
/// A box taller than the frame is clamped to the frame height.
pub fn scaled_speed(gross: f64, frame_height: f64, box_height: f64) -> Result<f64, DomainError> {
    if frame_height.is_nan() || frame_height <= 0.0 {
        return Err(DomainError::NonPositiveFrameHeight(frame_height));
    }
    if box_height.is_nan() || box_height <= 0.0 {
        return Err(DomainError::NonPositiveBoxHeight(box_height));
    }
    let h = if box_height > frame_height {
        log::warn!("box height {box_height} exceeds frame height {frame_height}; clamping");
        frame_height
    } else {
        box_height
    };
    Ok(((frame_height - h) / frame_height + 1.0) * gross)
}

/// Signed change in scaled speed per second over `interval` frames.
pub fn acceleration(s1: f64, s2: f64, fps: f64, interval: f64) -> f64 {
    (s2 - s1) / (frame_interval(fps) * interval)
}

/// Kinematic state and bounded histories of one track.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrackKinematics {
    pub direction: Option<DirectionVector>,
    pub gross_speed: Option<f64>,
    pub scaled_speed: Option<f64>,
    pub acceleration: Option<f64>,
    pub speed_history: VecDeque<(u64, f64)>,
    pub acceleration_history: VecDeque<(u64, f64)>,
    /// Accepted (above-threshold) directions only.
    pub direction_history: VecDeque<DirectionVector>,
}

impl TrackKinematics {
    /// Latest accepted direction computed at or before `frame`.
    pub fn direction_at(&self, frame: u64) -> Option<DirectionVector> {
        self.direction_history.iter().rev().find(|d| d.source_frame <= frame).copied()
    }

    fn prune(&mut self, oldest: u64) {
        while self.speed_history.front().is_some_and(|(f, _)| *f < oldest) {
            self.speed_history.pop_front();
        }
        while self.acceleration_history.front().is_some_and(|(f, _)| *f < oldest) {
            self.acceleration_history.pop_front();
        }
        while self.direction_history.front().is_some_and(|d| d.source_frame < oldest) {
            self.direction_history.pop_front();
        }
    }
}

/// Per-stream kinematics for every live track.
#[derive(Debug, Clone)]
pub struct KinematicsState {
    config: KinematicsConfig,
    /// Frames of speed/acceleration/direction history kept per track.
    history_frames: u64,
    tracks: BTreeMap<u64, TrackKinematics>,
}

impl KinematicsState {
    pub fn new(config: KinematicsConfig, history_frames: u64) -> Self {
        Self { config, history_frames, tracks: BTreeMap::new() }
    }

    pub fn config(&self) -> &KinematicsConfig {
        &self.config
    }

    pub fn get(&self, id: u64) -> Option<&TrackKinematics> {
        self.tracks.get(&id)
    }

    /// Recomputes kinematics for every track observed in `outcome`.
    pub fn update(&mut self, tracker: &Tracker, outcome: &StepOutcome, frame_height: f64) -> Result<(), DomainError> {
        for id in outcome.observed() {
            let track = tracker.track(id).expect("observed tracks are active");
            let entry = self.tracks.entry(id).or_default();
            update_track(&self.config, entry, track, frame_height)?;
            let oldest = track.last_seen().saturating_sub(self.history_frames);
            entry.prune(oldest);
        }
        Ok(())
    }

    /// Drops state for tracks the tracker has deregistered.
    pub fn retire(&mut self, outcome: &StepOutcome) {
        for t in &outcome.deregistered {
            self.tracks.remove(&t.id);
        }
    }
}

fn update_track(
    cfg: &KinematicsConfig,
    k: &mut TrackKinematics,
    track: &Track,
    frame_height: f64,
) -> Result<(), DomainError> {
    let history = &track.centroid_history;
    let &(now, c2) = history.back().expect("tracks are never empty");

    k.direction = direction_vector(history, cfg.interval, cfg.min_traj_magnitude);
    if let Some(d) = k.direction {
        k.direction_history.push_back(d);
    }

    // Speeds divide by the frames actually elapsed between the two centroids,
    // which equals `interval` once the track is old enough and no frames were
    // dropped.
    let Some((then, c1)) = reference_sample(history, cfg.interval) else {
        k.gross_speed = None;
        k.scaled_speed = None;
        k.acceleration = None;
        return Ok(());
    };
    let sg = gross_speed(c1, c2, cfg.fps, (now - then) as f64);
    let ss = scaled_speed(sg, frame_height, track.last_bbox().h)?;
    k.gross_speed = Some(sg);
    k.scaled_speed = Some(ss);
    k.speed_history.push_back((now, ss));

    k.acceleration = reference_sample(&k.speed_history, cfg.interval)
        .map(|(then, s1)| acceleration(s1, ss, cfg.fps, (now - then) as f64));
    if let Some(a) = k.acceleration {
        k.acceleration_history.push_back((now, a));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detection::{BoundingBox, Detection, DetectionFrame};
    use crate::tracker::TrackerConfig;
    use proptest::prelude::*;

    fn history(points: &[(u64, f64, f64)]) -> VecDeque<(u64, Point2)> {
        points.iter().map(|&(f, x, y)| (f, Point2::new(x, y))).collect()
    }

    fn dir(i: f64, j: f64) -> DirectionVector {
        let m = magnitude(i, j);
        DirectionVector { i: i / m, j: j / m, source_frame: 0 }
    }

    #[test]
    #[allow(clippy::approx_constant)]
    fn magnitude_closed_forms() {
        assert_eq!(magnitude(3.0, 4.0), 5.0);
        assert_eq!(magnitude(0.0, 0.0), 0.0);
        assert!((magnitude(1.0, 1.0) - 1.41421356).abs() < 1e-8);
    }

    #[test]
    fn direction_of_3_4_5_displacement() {
        let h = history(&[(0, 0.0, 0.0), (1, 0.6, 0.8), (2, 1.2, 1.6), (3, 1.8, 2.4), (4, 2.4, 3.2), (5, 3.0, 4.0)]);
        let d = direction_vector(&h, 5, 1.0).unwrap();
        assert!((d.i - 0.6).abs() < 1e-12 && (d.j - 0.8).abs() < 1e-12);
        assert_eq!(d.source_frame, 5);
    }

    #[test]
    fn stationary_direction_is_discarded() {
        let h = history(&[(0, 5.0, 5.0), (1, 5.0, 5.0), (2, 5.0, 5.0), (3, 5.0, 5.0), (4, 5.0, 5.0), (5, 5.0, 5.0)]);
        assert!(direction_vector(&h, 5, 1.0).is_none());
        assert!(direction_vector(&history(&[(0, 1.0, 1.0)]), 5, 0.0).is_none());
    }

    #[test]
    fn young_track_uses_earliest_centroid() {
        let h = history(&[(10, 0.0, 0.0), (11, 0.0, 4.0), (12, 0.0, 8.0)]);
        let d = direction_vector(&h, 5, 1.0).unwrap();
        assert_eq!((d.i, d.j), (0.0, 1.0));
    }

    #[test]
    fn direction_matches_recomputation_on_random_walk() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let mut h = VecDeque::new();
        let (mut x, mut y, mut f) = (0.0f64, 0.0f64, 0u64);
        for _ in 0..200 {
            f += rng.random_range(1..3);
            x += rng.random_range(-4.0..4.0);
            y += rng.random_range(-4.0..4.0);
            h.push_back((f, Point2::new(x, y)));
            // Recompute from scratch over the stored history.
            let pts: Vec<_> = h.iter().copied().collect();
            let target = f.saturating_sub(5);
            let mut start = pts[0];
            for p in &pts[..pts.len() - 1] {
                if p.0 <= target {
                    start = *p;
                }
            }
            let got = direction_vector(&h, 5, 3.0);
            if pts.len() < 2 {
                assert!(got.is_none());
                continue;
            }
            let (dx, dy) = (x - start.1.x, y - start.1.y);
            let m = (dx * dx + dy * dy).sqrt();
            match got {
                Some(d) => {
                    assert!(m > 3.0);
                    assert!((d.i - dx / m).abs() < 1e-12 && (d.j - dy / m).abs() < 1e-12);
                }
                None => assert!(m <= 3.0),
            }
        }
    }

    #[test]
    fn angle_closed_forms() {
        assert!((angle_between(&dir(1.0, 0.0), &dir(0.0, 1.0)) - 90.0).abs() < 1e-6);
        assert!(angle_between(&dir(1.0, 0.0), &dir(1.0, 0.0)).abs() < 1e-6);
        assert!((angle_between(&dir(1.0, 0.0), &dir(-1.0, 0.0)) - 180.0).abs() < 1e-6);
    }

    #[test]
    fn angle_absorbs_dot_product_drift() {
        let u = DirectionVector { i: 1.0 + 1e-15, j: 0.0, source_frame: 0 };
        assert_eq!(angle_between(&u, &u), 0.0);
    }

    #[test]
    fn frame_interval_at_30_fps() {
        assert_eq!(frame_interval(30.0), 1.0 / 30.0);
        assert_eq!(KinematicsConfig::default().tau(), 1.0 / 30.0);
    }

    #[test]
    fn gross_speed_examples() {
        assert!((gross_speed(Point2::new(0.0, 0.0), Point2::new(10.0, 0.0), 30.0, 5.0) - 60.0).abs() < 1e-9);
        assert_eq!(gross_speed(Point2::new(3.0, 3.0), Point2::new(3.0, 3.0), 30.0, 5.0), 0.0);
    }

    #[test]
    fn scaled_speed_examples() {
        assert_eq!(scaled_speed(60.0, 720.0, 720.0).unwrap(), 60.0);
        assert!((scaled_speed(60.0, 720.0, 360.0).unwrap() - 90.0).abs() < 1e-9);
        assert!((scaled_speed(60.0, 720.0, 1e-9).unwrap() - 120.0).abs() < 1e-6);
        assert_eq!(scaled_speed(60.0, 720.0, 800.0).unwrap(), 60.0);
        assert!(matches!(scaled_speed(60.0, 720.0, 0.0), Err(DomainError::NonPositiveBoxHeight(_))));
        assert!(matches!(scaled_speed(60.0, 0.0, 10.0), Err(DomainError::NonPositiveFrameHeight(_))));
    }

    #[test]
    fn acceleration_examples() {
        assert_eq!(acceleration(75.0, 75.0, 30.0, 5.0), 0.0);
        assert!((acceleration(60.0, 90.0, 30.0, 5.0) - 180.0).abs() < 1e-9);
    }

    fn single_box_frame(index: u64, x: f64, y: f64) -> DetectionFrame {
        DetectionFrame {
            frame_index: index,
            width: 1280,
            height: 720,
            detections: vec![Detection { class_id: 3, score: 0.9, bbox: BoundingBox::new(x, y, 40.0, 20.0).unwrap() }],
        }
    }

    #[test]
    fn constant_velocity_track_has_zero_acceleration() {
        let mut tracker = Tracker::new(TrackerConfig::default());
        let mut kin = KinematicsState::new(KinematicsConfig::default(), 30);
        let mut windows = 0;
        for f in 0..100u64 {
            let out = tracker.step(&single_box_frame(f, 100.0 + 7.0 * f as f64, 300.0 + 2.0 * f as f64)).unwrap();
            kin.update(&tracker, &out, 720.0).unwrap();
            let k = kin.get(0).unwrap();
            if let Some(a) = k.acceleration {
                assert!(a.abs() < 1e-6, "frame {f}: {a}");
                windows += 1;
            }
            if f >= 1 {
                let expected = magnitude(7.0, 2.0) * 30.0 * ((720.0 - 20.0) / 720.0 + 1.0);
                assert!((k.scaled_speed.unwrap() - expected).abs() < 1e-9);
            }
        }
        assert_eq!(windows, 98);
    }

    #[test]
    fn histories_are_bounded_by_frame_age() {
        let mut tracker = Tracker::new(TrackerConfig::default());
        let mut kin = KinematicsState::new(KinematicsConfig::default(), 30);
        for f in 0..100u64 {
            let out = tracker.step(&single_box_frame(f, 100.0 + 7.0 * f as f64, 300.0)).unwrap();
            kin.update(&tracker, &out, 720.0).unwrap();
        }
        let k = kin.get(0).unwrap();
        assert_eq!(k.speed_history.front().unwrap().0, 69);
        assert_eq!(k.direction_history.len(), 31);
    }

    proptest! {
        #[test]
        fn normalized_vectors_have_unit_length(i in -1e3f64..1e3, j in -1e3f64..1e3) {
            prop_assume!(magnitude(i, j) > 1e-9);
            let d = dir(i, j);
            prop_assert!((magnitude(d.i, d.j) - 1.0).abs() < 1e-9);
        }

        #[test]
        fn angle_is_symmetric_and_bounded(a in 0.0f64..360.0, b in 0.0f64..360.0) {
            let u = dir(a.to_radians().cos(), a.to_radians().sin());
            let v = dir(b.to_radians().cos(), b.to_radians().sin());
            let t = angle_between(&u, &v);
            prop_assert_eq!(t, angle_between(&v, &u));
            prop_assert!((0.0..=180.0).contains(&t));
            prop_assert!(angle_between(&u, &u) < 1e-6);
        }

        #[test]
        fn gross_speed_identity(x1 in -500.0f64..500.0, y1 in -500.0f64..500.0, dx in -200.0f64..200.0, dy in -200.0f64..200.0, interval in 1u32..20, k in 0.1f64..10.0) {
            let (c1, c2) = (Point2::new(x1, y1), Point2::new(x1 + dx, y1 + dy));
            let s = gross_speed(c1, c2, 30.0, interval as f64);
            let expected = magnitude(dx, dy) * 30.0 / interval as f64;
            prop_assert!((s - expected).abs() <= 1e-9 * expected.max(1.0));
            let scaled = gross_speed(Point2::new(k * c1.x, k * c1.y), Point2::new(k * c2.x, k * c2.y), 30.0, interval as f64);
            prop_assert!((scaled - k * s).abs() <= 1e-9 * (k * s).max(1.0));
        }

        #[test]
        fn scaled_speed_non_increasing_in_box_height(sg in 0.0f64..1e3, h1 in 0.1f64..720.0, h2 in 0.1f64..720.0) {
            let (lo, hi) = if h1 <= h2 { (h1, h2) } else { (h2, h1) };
            prop_assert!(scaled_speed(sg, 720.0, lo).unwrap() >= scaled_speed(sg, 720.0, hi).unwrap());
            prop_assert_eq!(scaled_speed(sg, 720.0, 720.0).unwrap(), sg);
        }

        #[test]
        fn acceleration_is_antisymmetric(s1 in 0.0f64..1e3, s2 in 0.0f64..1e3) {
            prop_assert_eq!(acceleration(s1, s2, 30.0, 5.0), -acceleration(s2, s1, 30.0, 5.0));
        }
    }
}
