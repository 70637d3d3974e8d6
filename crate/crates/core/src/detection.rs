//! Detection stream ingestion.
//!
//! One JSON object per line, one line per video frame:
//!
//! ```text
//! {"frame":0,"w":1280,"h":720,"det":[{"cls":3,"score":0.97,"box":[640,360,80,40]}]}
//! ```
//!
//! `box` is `[center_x, center_y, width, height]`. A detection may carry
//! `tlwh` (`[left, top, width, height]`) instead, which is converted to
//! center form here. Unknown fields are ignored.

use std::collections::BTreeSet;
use std::io::BufRead;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// COCO category ids (background = 0) for car, motorcycle, bus and truck.
pub const DEFAULT_VEHICLE_CLASSES: [i64; 4] = [3, 4, 6, 8];
pub const DEFAULT_MIN_SCORE: f64 = 0.7;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParseError {
    #[error("malformed record: {0}")]
    Syntax(String),
    #[error("invalid record: {0}")]
    Schema(String),
    #[error("detection {index}: score {score} outside [0, 1]")]
    ScoreOutOfRange { index: usize, score: f64 },
    #[error("{what} must be positive, got {value}")]
    NonPositiveDimension { what: &'static str, value: f64 },
    #[error("detection {index}: exactly one of `box` or `tlwh` is required")]
    BoxFormat { index: usize },
    #[error("detection {index}: box lies entirely outside the frame")]
    BoxOutsideFrame { index: usize },
    #[error("frame index {got} does not follow previous frame {previous}")]
    NonMonotoneFrame { previous: u64, got: u64 },
}

/// A parse failure annotated with its 1-based line number.
#[derive(Debug, Error, Clone, PartialEq)]
#[error("line {line}: {source}")]
pub struct StreamError {
    pub line: usize,
    #[source]
    pub source: ParseError,
}

/// Axis-aligned box in center form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl BoundingBox {
    pub fn new(x: f64, y: f64, w: f64, h: f64) -> Result<Self, ParseError> {
        for (what, v) in [("box x", x), ("box y", y)] {
            if !v.is_finite() {
                return Err(ParseError::Schema(format!("{what} is not finite")));
            }
        }
        if !(w > 0.0 && w.is_finite()) {
            return Err(ParseError::NonPositiveDimension { what: "box width", value: w });
        }
        if !(h > 0.0 && h.is_finite()) {
            return Err(ParseError::NonPositiveDimension { what: "box height", value: h });
        }
        Ok(Self { x, y, w, h })
    }

    /// Builds a box from its top-left corner and size.
    pub fn from_top_left(left: f64, top: f64, w: f64, h: f64) -> Result<Self, ParseError> {
        Self::new(left + w / 2.0, top + h / 2.0, w, h)
    }

    pub fn left(&self) -> f64 {
        self.x - self.w / 2.0
    }

    pub fn right(&self) -> f64 {
        self.x + self.w / 2.0
    }

    pub fn top(&self) -> f64 {
        self.y - self.h / 2.0
    }

    pub fn bottom(&self) -> f64 {
        self.y + self.h / 2.0
    }

    /// Intersects the box with `[0,width] x [0,height]`; `None` if nothing is left.
    pub fn clamp_to(&self, width: f64, height: f64) -> Option<Self> {
        if self.left() >= 0.0 && self.top() >= 0.0 && self.right() <= width && self.bottom() <= height {
            return Some(*self);
        }
        let l = self.left().clamp(0.0, width);
        let r = self.right().clamp(0.0, width);
        let t = self.top().clamp(0.0, height);
        let b = self.bottom().clamp(0.0, height);
        if r - l <= 0.0 || b - t <= 0.0 {
            return None;
        }
        Some(Self { x: (l + r) / 2.0, y: (t + b) / 2.0, w: r - l, h: b - t })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Detection {
    pub class_id: i64,
    pub score: f64,
    pub bbox: BoundingBox,
}

/// All detections reported for one video frame.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectionFrame {
    pub frame_index: u64,
    pub width: u32,
    pub height: u32,
    pub detections: Vec<Detection>,
}

#[derive(Deserialize)]
struct RawFrame {
    frame: u64,
    w: i64,
    h: i64,
    #[serde(default)]
    det: Vec<RawDetection>,
}

#[derive(Deserialize)]
struct RawDetection {
    cls: i64,
    score: f64,
    #[serde(rename = "box")]
    center: Option<[f64; 4]>,
    tlwh: Option<[f64; 4]>,
}

#[derive(Serialize)]
struct WireFrame {
    frame: u64,
    w: u32,
    h: u32,
    det: Vec<WireDetection>,
}

#[derive(Serialize)]
struct WireDetection {
    cls: i64,
    score: f64,
    #[serde(rename = "box")]
    center: [f64; 4],
}

/// Parses and validates one stream record.
///
/// Boxes are clamped to the frame. Frame ordering is checked by
/// [`FrameReader`], not here.
pub fn parse_frame(record: &str) -> Result<DetectionFrame, ParseError> {
    let raw: RawFrame = serde_json::from_str(record).map_err(|e| {
        if e.is_data() {
            ParseError::Schema(e.to_string())
        } else {
            ParseError::Syntax(e.to_string())
        }
    })?;
    if raw.w <= 0 {
        return Err(ParseError::NonPositiveDimension { what: "frame width", value: raw.w as f64 });
    }
    if raw.h <= 0 {
        return Err(ParseError::NonPositiveDimension { what: "frame height", value: raw.h as f64 });
    }
    let width = u32::try_from(raw.w).map_err(|_| ParseError::Schema("frame width too large".into()))?;
    let height = u32::try_from(raw.h).map_err(|_| ParseError::Schema("frame height too large".into()))?;

    let mut detections = Vec::with_capacity(raw.det.len());
    for (index, d) in raw.det.into_iter().enumerate() {
        if !(0.0..=1.0).contains(&d.score) {
            return Err(ParseError::ScoreOutOfRange { index, score: d.score });
        }
        let bbox = match (d.center, d.tlwh) {
            (Some([x, y, w, h]), None) => BoundingBox::new(x, y, w, h)?,
            (None, Some([l, t, w, h])) => BoundingBox::from_top_left(l, t, w, h)?,
            _ => return Err(ParseError::BoxFormat { index }),
        };
        let bbox = bbox.clamp_to(width as f64, height as f64).ok_or(ParseError::BoxOutsideFrame { index })?;
        detections.push(Detection { class_id: d.cls, score: d.score, bbox });
    }
    Ok(DetectionFrame { frame_index: raw.frame, width, height, detections })
}

/// Serializes a frame to the center-form wire record (no trailing newline).
pub fn serialize_frame(frame: &DetectionFrame) -> String {
    let wire = WireFrame {
        frame: frame.frame_index,
        w: frame.width,
        h: frame.height,
        det: frame
            .detections
            .iter()
            .map(|d| WireDetection {
                cls: d.class_id,
                score: d.score,
                center: [d.bbox.x, d.bbox.y, d.bbox.w, d.bbox.h],
            })
            .collect(),
    };
    serde_json::to_string(&wire).expect("frame records always serialize")
}

/// Keeps detections whose class is allowlisted and whose score reaches `min_score`.
pub fn filter_vehicles(frame: &DetectionFrame, allowlist: &BTreeSet<i64>, min_score: f64) -> DetectionFrame {
    DetectionFrame {
        detections: frame
            .detections
            .iter()
            .filter(|d| allowlist.contains(&d.class_id) && d.score >= min_score)
            .copied()
            .collect(),
        ..frame.clone()
    }
}

/// Iterates the frames of a line-delimited stream, enforcing strictly
/// increasing frame indices. Blank lines are skipped.
pub struct FrameReader<R> {
    lines: std::io::Lines<R>,
    line_no: usize,
    last_frame: Option<u64>,
}

impl<R: BufRead> FrameReader<R> {
    pub fn new(reader: R) -> Self {
        Self { lines: reader.lines(), line_no: 0, last_frame: None }
    }
}

impl<R: BufRead> Iterator for FrameReader<R> {
    type Item = Result<DetectionFrame, StreamError>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            let line = self.lines.next()?;
            self.line_no += 1;
            let line = match line {
                Ok(l) => l,
                Err(e) => {
                    return Some(Err(StreamError { line: self.line_no, source: ParseError::Syntax(e.to_string()) }))
                }
            };
            if line.trim().is_empty() {
                continue;
            }
            let parsed = parse_frame(&line).and_then(|f| match self.last_frame {
                Some(previous) if f.frame_index <= previous => {
                    Err(ParseError::NonMonotoneFrame { previous, got: f.frame_index })
                }
                _ => Ok(f),
            });
            return Some(match parsed {
                Ok(f) => {
                    self.last_frame = Some(f.frame_index);
                    Ok(f)
                }
                Err(source) => Err(StreamError { line: self.line_no, source }),
            });
        }
    }
}
