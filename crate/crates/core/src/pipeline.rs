//! Frame-by-frame wiring of filtering, tracking, kinematics and collision scoring.

use std::collections::BTreeSet;
use std::io::{BufRead, Write};

use serde::Serialize;
use thiserror::Error;

use crate::collision::{AccidentEvent, CollisionEngine, FrameReport, ScoredEpisode};
use crate::config::{ConfigError, EngineConfig};
use crate::detection::{filter_vehicles, DetectionFrame, FrameReader, StreamError};
use crate::kinematics::{DomainError, KinematicsState};
use crate::tracker::{Tracker, TrackerError};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Stream(#[from] StreamError),
    #[error(transparent)]
    Tracker(#[from] TrackerError),
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub struct Pipeline {
    allowlist: BTreeSet<i64>,
    min_score: f64,
    tracker: Tracker,
    kinematics: KinematicsState,
    engine: CollisionEngine,
}

impl Pipeline {
    pub fn new(config: &EngineConfig) -> Result<Self, ConfigError> {
        config.validate()?;
        Ok(Self {
            allowlist: config.detection.allowlist(),
            min_score: config.detection.min_score,
            tracker: Tracker::new(config.tracker.clone()),
            kinematics: KinematicsState::new(config.kinematics.clone(), config.tracker.history_len as u64),
            engine: CollisionEngine::new(config.anomaly.clone(), config.overlap_rule()),
        })
    }

    pub fn tracker(&self) -> &Tracker {
        &self.tracker
    }

    pub fn kinematics(&self) -> &KinematicsState {
        &self.kinematics
    }

    pub fn scored_total(&self) -> u64 {
        self.engine.scored_total()
    }

    pub fn push(&mut self, frame: &DetectionFrame) -> Result<FrameReport, PipelineError> {
        let vehicles = filter_vehicles(frame, &self.allowlist, self.min_score);
        let outcome = self.tracker.step(&vehicles)?;
        self.kinematics.update(&self.tracker, &outcome, frame.height as f64)?;
        let report = self.engine.process_frame(&self.tracker, &self.kinematics, &outcome, frame.frame_index);
        self.kinematics.retire(&outcome);
        Ok(report)
    }
}

/// Everything a run produced.
#[derive(Debug, Clone, Default)]
pub struct RunSummary {
    pub frames: u64,
    pub events: Vec<AccidentEvent>,
    pub scored: Vec<ScoredEpisode>,
}

impl RunSummary {
    fn absorb(&mut self, report: FrameReport) {
        self.frames += 1;
        self.events.extend(report.events);
        self.scored.extend(report.scored);
    }

    /// Events as line-delimited records.
    pub fn events_text(&self) -> String {
        self.events.iter().map(|e| e.to_record() + "\n").collect()
    }
}

pub fn run_frames<'a, I>(frames: I, config: &EngineConfig) -> Result<RunSummary, PipelineError>
where
    I: IntoIterator<Item = &'a DetectionFrame>,
{
    let mut pipeline = Pipeline::new(config)?;
    let mut summary = RunSummary::default();
    for frame in frames {
        summary.absorb(pipeline.push(frame)?);
    }
    Ok(summary)
}

#[derive(Serialize)]
struct TraceTrack {
    id: u64,
    centroid: [f64; 2],
    speed: Option<f64>,
    accel: Option<f64>,
    dir: Option<[f64; 2]>,
}

#[derive(Serialize)]
struct TraceRecord<'a> {
    frame: u64,
    tracks: Vec<TraceTrack>,
    overlaps: Vec<[u64; 3]>,
    scored: &'a [ScoredEpisode],
}

fn trace_line(pipeline: &Pipeline, frame: u64, report: &FrameReport) -> String {
    let tracks = pipeline
        .tracker()
        .tracks()
        .map(|t| {
            let k = pipeline.kinematics().get(t.id);
            let c = t.last_centroid();
            TraceTrack {
                id: t.id,
                centroid: [c.x, c.y],
                speed: k.and_then(|k| k.scaled_speed),
                accel: k.and_then(|k| k.acceleration),
                dir: k.and_then(|k| k.direction).map(|d| [d.i, d.j]),
            }
        })
        .collect();
    let record = TraceRecord {
        frame,
        tracks,
        overlaps: report.overlaps.iter().map(|o| [o.track_a, o.track_b, o.onset]).collect(),
        scored: &report.scored,
    };
    serde_json::to_string(&record).expect("trace records always serialize")
}

/// Runs the pipeline over a line-delimited stream, optionally writing one
/// trace record per frame.
pub fn run_reader<R: BufRead>(
    reader: R,
    config: &EngineConfig,
    mut trace: Option<&mut dyn Write>,
) -> Result<RunSummary, PipelineError> {
    let mut pipeline = Pipeline::new(config)?;
    let mut summary = RunSummary::default();
    for frame in FrameReader::new(reader) {
        let frame = frame?;
        let report = pipeline.push(&frame)?;
        if let Some(w) = trace.as_deref_mut() {
            writeln!(w, "{}", trace_line(&pipeline, frame.frame_index, &report))?;
        }
        summary.absorb(report);
    }
    Ok(summary)
}
