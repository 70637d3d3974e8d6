//! Detection rate / false alarm rate evaluation against ground truth.
//!
//! A *pattern* is one scored overlap episode. The false alarm rate is the
//! share of patterns whose event did not match any ground-truth collision.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::collision::AccidentEvent;
use crate::config::EngineConfig;
use crate::pipeline::{run_frames, PipelineError, RunSummary};
use crate::sim::{builtin_suite, generate, SpecError};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MetricError {
    #[error("rate undefined: denominator is zero")]
    DivisionByZero,
}

#[derive(Debug, Error)]
pub enum TruthError {
    #[error("truth line {line}: expected `frame id id`, got {text:?}")]
    Malformed { line: usize, text: String },
}

/// One ground-truth collision, stored with `a < b`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct TruthRecord {
    pub frame: u64,
    pub a: u64,
    pub b: u64,
}

impl TruthRecord {
    pub fn new(frame: u64, a: u64, b: u64) -> Self {
        Self { frame, a: a.min(b), b: a.max(b) }
    }

    pub fn to_line(&self) -> String {
        format!("{} {} {}", self.frame, self.a, self.b)
    }
}

/// Parses a `.truth` file: one `frame id id` triple per line. Blank lines and
/// `#` comments are skipped.
pub fn parse_truth(text: &str) -> Result<Vec<TruthRecord>, TruthError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let nums: Vec<u64> = line
            .split_whitespace()
            .map(str::parse)
            .collect::<Result<_, _>>()
            .map_err(|_| TruthError::Malformed { line: i + 1, text: line.to_string() })?;
        match nums[..] {
            [frame, a, b] if a != b => out.push(TruthRecord::new(frame, a, b)),
            _ => return Err(TruthError::Malformed { line: i + 1, text: line.to_string() }),
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MatchResult {
    /// `(event index, truth index)` pairs.
    pub true_positives: Vec<(usize, usize)>,
    pub false_positives: Vec<usize>,
    pub misses: Vec<usize>,
}

/// Matches events to truth entries.
///
/// An event matches a truth entry with the same (unordered) pair whose frame
/// lies within `window` frames of the event frame. Truth entries are visited
/// in frame order and each consumes the earliest eligible unused event.
pub fn match_events(events: &[AccidentEvent], truth: &[TruthRecord], window: u64) -> MatchResult {
    let mut order: Vec<usize> = (0..truth.len()).collect();
    order.sort_by_key(|&i| truth[i]);
    let mut used = vec![false; events.len()];
    let mut result = MatchResult::default();
    for ti in order {
        let t = truth[ti];
        let hit = (0..events.len())
            .filter(|&ei| !used[ei])
            .filter(|&ei| {
                let e = &events[ei];
                (e.track_a.min(e.track_b), e.track_a.max(e.track_b)) == (t.a, t.b)
                    && e.frame_index.abs_diff(t.frame) <= window
            })
            .min_by_key(|&ei| (events[ei].frame_index, ei));
        match hit {
            Some(ei) => {
                used[ei] = true;
                result.true_positives.push((ei, ti));
            }
            None => result.misses.push(ti),
        }
    }
    result.true_positives.sort_unstable();
    result.misses.sort_unstable();
    result.false_positives = (0..events.len()).filter(|&i| !used[i]).collect();
    result
}

pub fn detection_rate(detected: u64, total: u64) -> Result<f64, MetricError> {
    if total == 0 {
        return Err(MetricError::DivisionByZero);
    }
    Ok(detected as f64 / total as f64 * 100.0)
}

pub fn false_alarm_rate(false_alarm_patterns: u64, total_patterns: u64) -> Result<f64, MetricError> {
    if total_patterns == 0 {
        return Err(MetricError::DivisionByZero);
    }
    Ok(false_alarm_patterns as f64 / total_patterns as f64 * 100.0)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LatencyStats {
    pub count: usize,
    pub min: i64,
    pub mean: f64,
    pub max: i64,
}

impl LatencyStats {
    fn from_samples(samples: &[i64]) -> Option<Self> {
        if samples.is_empty() {
            return None;
        }
        Some(Self {
            count: samples.len(),
            min: *samples.iter().min().expect("non-empty"),
            mean: samples.iter().sum::<i64>() as f64 / samples.len() as f64,
            max: *samples.iter().max().expect("non-empty"),
        })
    }
}

/// Outcome of one evaluated stream.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StreamOutcome {
    pub name: String,
    pub accidents: u64,
    pub detected: u64,
    pub events: u64,
    pub false_alarms: u64,
    pub patterns: u64,
    /// Frames from each ground-truth collision to its matched event.
    pub latencies: Vec<i64>,
}

impl StreamOutcome {
    pub fn evaluate(name: &str, events: &[AccidentEvent], patterns: u64, truth: &[TruthRecord], window: u64) -> Self {
        let m = match_events(events, truth, window);
        Self {
            name: name.to_string(),
            accidents: truth.len() as u64,
            detected: m.true_positives.len() as u64,
            events: events.len() as u64,
            false_alarms: m.false_positives.len() as u64,
            patterns,
            latencies: m
                .true_positives
                .iter()
                .map(|&(ei, ti)| events[ei].frame_index as i64 - truth[ti].frame as i64)
                .collect(),
        }
    }

    pub fn from_run(name: &str, run: &RunSummary, truth: &[TruthRecord], window: u64) -> Self {
        Self::evaluate(name, &run.events, run.scored.len() as u64, truth, window)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvaluationReport {
    pub total_accidents: u64,
    pub detected_accidents: u64,
    pub detection_rate: Option<f64>,
    pub total_patterns: u64,
    pub false_alarms: u64,
    pub false_alarm_rate: Option<f64>,
    pub latency: Option<LatencyStats>,
    pub streams: Vec<StreamOutcome>,
}

impl EvaluationReport {
    pub fn from_outcomes(streams: Vec<StreamOutcome>) -> Self {
        let total_accidents = streams.iter().map(|s| s.accidents).sum();
        let detected_accidents = streams.iter().map(|s| s.detected).sum();
        let total_patterns = streams.iter().map(|s| s.patterns).sum();
        let false_alarms = streams.iter().map(|s| s.false_alarms).sum();
        let latencies: Vec<i64> = streams.iter().flat_map(|s| s.latencies.iter().copied()).collect();
        Self {
            total_accidents,
            detected_accidents,
            detection_rate: detection_rate(detected_accidents, total_accidents).ok(),
            total_patterns,
            false_alarms,
            false_alarm_rate: false_alarm_rate(false_alarms, total_patterns).ok(),
            latency: LatencyStats::from_samples(&latencies),
            streams,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("reports always serialize")
    }

    pub fn to_table(&self) -> String {
        let pct = |r: Option<f64>| r.map_or_else(|| "n/a".to_string(), |r| format!("{r:.2}%"));
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<28} {:>5} {:>5} {:>6} {:>4} {:>8}",
            "stream", "truth", "hits", "events", "fa", "patterns"
        );
        for s in &self.streams {
            let _ = writeln!(
                out,
                "{:<28} {:>5} {:>5} {:>6} {:>4} {:>8}",
                s.name, s.accidents, s.detected, s.events, s.false_alarms, s.patterns
            );
        }
        let _ = writeln!(out);
        let _ = writeln!(
            out,
            "detection rate   {} ({}/{})",
            pct(self.detection_rate),
            self.detected_accidents,
            self.total_accidents
        );
        let _ = writeln!(
            out,
            "false alarm rate {} ({}/{} patterns)",
            pct(self.false_alarm_rate),
            self.false_alarms,
            self.total_patterns
        );
        if let Some(l) = &self.latency {
            let _ = writeln!(out, "latency (frames) min {} mean {:.1} max {}", l.min, l.mean, l.max);
        }
        out
    }
}

#[derive(Debug, Error)]
pub enum BenchError {
    #[error(transparent)]
    Spec(#[from] SpecError),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
}

/// Result of running the builtin suite.
#[derive(Debug, Clone)]
pub struct BenchOutput {
    pub report: EvaluationReport,
    /// Per-scenario events, in suite order.
    pub events: Vec<(String, Vec<AccidentEvent>)>,
}

impl BenchOutput {
    /// Event records tagged with their scenario name, one per line.
    pub fn events_text(&self) -> String {
        let mut out = String::new();
        for (name, events) in &self.events {
            let tag = serde_json::to_string(name).expect("names serialize");
            for e in events {
                let record = e.to_record();
                let _ = writeln!(out, "{{\"scenario\":{tag},{}", &record[1..]);
            }
        }
        out
    }
}

/// Generates the builtin suite for `seed`, runs every scenario and scores it.
/// Scenarios run in parallel; results are collected in suite order.
pub fn run_bench(config: &EngineConfig, seed: u64) -> Result<BenchOutput, BenchError> {
    let suite = builtin_suite(seed);
    let results: Vec<Result<(StreamOutcome, Vec<AccidentEvent>), BenchError>> = suite
        .par_iter()
        .map(|spec| {
            let scenario = generate(spec)?;
            let run = run_frames(&scenario.frames, config)?;
            let outcome = StreamOutcome::from_run(&scenario.name, &run, &scenario.truth, config.eval.truth_window);
            Ok((outcome, run.events))
        })
        .collect();
    let mut outcomes = Vec::with_capacity(results.len());
    let mut events = Vec::with_capacity(results.len());
    for r in results {
        let (outcome, evs) = r?;
        events.push((outcome.name.clone(), evs));
        outcomes.push(outcome);
    }
    Ok(BenchOutput { report: EvaluationReport::from_outcomes(outcomes), events })
}
