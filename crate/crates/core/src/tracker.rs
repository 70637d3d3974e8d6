//! Centroid tracker.
//!
//! Each frame, detection centroids are associated to the last known centroid
//! of every active track by greedy shortest-distance-first matching. Leftover
//! detections register new tracks, leftover tracks accumulate missed frames
//! and are deregistered once they have been unseen for longer than
//! `dereg_after` frames. Unmatched tracks keep their last centroid.

use std::collections::{BTreeMap, VecDeque};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::detection::{BoundingBox, DetectionFrame};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &Point2) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// The box center, i.e. the crossing of the lines through the midpoints of
/// opposite edges.
pub fn centroid_of(b: &BoundingBox) -> Point2 {
    Point2::new(b.x, b.y)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrackerConfig {
    /// Largest centroid displacement (px) accepted as the same vehicle.
    pub max_match_distance: f64,
    /// A track is deregistered once unseen for more than this many frames.
    pub dereg_after: u32,
    /// Number of centroid/box samples retained per track.
    pub history_len: usize,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        Self { max_match_distance: 50.0, dereg_after: 10, history_len: 30 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrackState {
    Active,
    Deregistered,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Track {
    pub id: u64,
    pub centroid_history: VecDeque<(u64, Point2)>,
    pub bbox_history: VecDeque<(u64, BoundingBox)>,
    pub missing_frames: u32,
    pub state: TrackState,
}

impl Track {
    fn new(id: u64, frame: u64, bbox: BoundingBox) -> Self {
        let mut t = Self {
            id,
            centroid_history: VecDeque::new(),
            bbox_history: VecDeque::new(),
            missing_frames: 0,
            state: TrackState::Active,
        };
        t.record(frame, bbox, usize::MAX);
        t
    }

    fn record(&mut self, frame: u64, bbox: BoundingBox, history_len: usize) {
        self.centroid_history.push_back((frame, centroid_of(&bbox)));
        self.bbox_history.push_back((frame, bbox));
        while self.centroid_history.len() > history_len.max(1) {
            self.centroid_history.pop_front();
            self.bbox_history.pop_front();
        }
        self.missing_frames = 0;
    }

    pub fn last_centroid(&self) -> Point2 {
        self.centroid_history.back().expect("tracks are created with one sample").1
    }

    pub fn last_bbox(&self) -> BoundingBox {
        self.bbox_history.back().expect("tracks are created with one sample").1
    }

    pub fn last_seen(&self) -> u64 {
        self.centroid_history.back().expect("tracks are created with one sample").0
    }

    /// Most recent centroid observed at or before `frame`.
    pub fn centroid_at(&self, frame: u64) -> Option<Point2> {
        self.centroid_history.iter().rev().find(|(f, _)| *f <= frame).map(|(_, c)| *c)
    }
}

/// Result of one greedy association round.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Association {
    pub matches: Vec<(u64, usize)>,
    pub unmatched_tracks: Vec<u64>,
    pub unmatched_detections: Vec<usize>,
}

/// Greedy globally-shortest-first matching under a distance gate.
///
/// Ties are broken by lower track id, then lower detection index. Matches are
/// reported in the order they were taken.
pub fn associate(existing: &[(u64, Point2)], detected: &[Point2], max_dist: f64) -> Association {
    let mut pairs: Vec<(f64, u64, usize, usize)> = Vec::new();
    for (ti, (id, c)) in existing.iter().enumerate() {
        for (di, p) in detected.iter().enumerate() {
            let d = c.distance(p);
            if d <= max_dist {
                pairs.push((d, *id, di, ti));
            }
        }
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));

    let mut track_used = vec![false; existing.len()];
    let mut det_used = vec![false; detected.len()];
    let mut matches = Vec::new();
    for (_, id, di, ti) in pairs {
        if track_used[ti] || det_used[di] {
            continue;
        }
        track_used[ti] = true;
        det_used[di] = true;
        matches.push((id, di));
    }
    Association {
        matches,
        unmatched_tracks: existing.iter().zip(&track_used).filter(|(_, u)| !**u).map(|((id, _), _)| *id).collect(),
        unmatched_detections: (0..detected.len()).filter(|i| !det_used[*i]).collect(),
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TrackerError {
    #[error("frame {got} is not after the last stepped frame {last}")]
    OutOfOrderFrame { last: u64, got: u64 },
}

/// Lifecycle changes produced by one [`Tracker::step`].
#[derive(Debug, Clone, Default)]
pub struct StepOutcome {
    pub matched: Vec<u64>,
    pub registered: Vec<u64>,
    /// Tracks removed this frame, in their final state.
    pub deregistered: Vec<Track>,
}

impl StepOutcome {
    /// Ids that received a detection this frame (matched or newly registered).
    pub fn observed(&self) -> impl Iterator<Item = u64> + '_ {
        self.matched.iter().chain(&self.registered).copied()
    }
}

#[derive(Debug, Clone)]
pub struct Tracker {
    config: TrackerConfig,
    tracks: BTreeMap<u64, Track>,
    next_id: u64,
    last_frame: Option<u64>,
}

impl Tracker {
    pub fn new(config: TrackerConfig) -> Self {
        Self { config, tracks: BTreeMap::new(), next_id: 0, last_frame: None }
    }

    pub fn config(&self) -> &TrackerConfig {
        &self.config
    }

    pub fn next_id(&self) -> u64 {
        self.next_id
    }

    /// Active tracks in ascending id order.
    pub fn tracks(&self) -> impl Iterator<Item = &Track> {
        self.tracks.values()
    }

    pub fn track(&self, id: u64) -> Option<&Track> {
        self.tracks.get(&id)
    }

    pub fn step(&mut self, frame: &DetectionFrame) -> Result<StepOutcome, TrackerError> {
        if let Some(last) = self.last_frame {
            if frame.frame_index <= last {
                return Err(TrackerError::OutOfOrderFrame { last, got: frame.frame_index });
            }
        }
        let now = frame.frame_index;
        self.last_frame = Some(now);

        let existing: Vec<(u64, Point2)> = self.tracks.values().map(|t| (t.id, t.last_centroid())).collect();
        let detected: Vec<Point2> = frame.detections.iter().map(|d| centroid_of(&d.bbox)).collect();
        let assoc = associate(&existing, &detected, self.config.max_match_distance);

        let mut outcome = StepOutcome::default();
        for &(id, di) in &assoc.matches {
            let track = self.tracks.get_mut(&id).expect("matched ids come from the track table");
            track.record(now, frame.detections[di].bbox, self.config.history_len);
            outcome.matched.push(id);
        }
        outcome.matched.sort_unstable();

        for &di in &assoc.unmatched_detections {
            let id = self.next_id;
            self.next_id += 1;
            self.tracks.insert(id, Track::new(id, now, frame.detections[di].bbox));
            outcome.registered.push(id);
        }

        for id in assoc.unmatched_tracks {
            let track = self.tracks.get_mut(&id).expect("unmatched ids come from the track table");
            // Elapsed frames, so dropped frame indices still count as misses.
            track.missing_frames = u32::try_from(now - track.last_seen()).unwrap_or(u32::MAX);
            if track.missing_frames > self.config.dereg_after {
                let mut gone = self.tracks.remove(&id).expect("present");
                gone.state = TrackState::Deregistered;
                outcome.deregistered.push(gone);
            }
        }
        Ok(outcome)
    }
}
