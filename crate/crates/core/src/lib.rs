//! Vehicular collision detection from per-frame vehicle detections.
//!
//! The pipeline takes a line-delimited detection stream, keeps vehicle
//! detections, tracks them by centroid, derives direction, speed and
//! acceleration for each track, and scores every overlap between two tracks
//! for acceleration, trajectory and heading anomalies.
//!
//! Modules, in pipeline order:
//!
//! * [`detection`]: wire format parsing and vehicle filtering
//! * [`tracker`]: centroid tracking with greedy association
//! * [`kinematics`]: direction vectors, speeds and accelerations
//! * [`collision`]: overlap episodes, anomaly scoring and accident events
//! * [`pipeline`]: the per-frame wiring
//! * [`sim`]: scripted synthetic scenarios with ground truth
//! * [`eval`]: detection rate / false alarm rate evaluation and the benchmark

pub mod collision;
pub mod config;
pub mod detection;
pub mod eval;
pub mod kinematics;
pub mod pipeline;
pub mod sim;
pub mod tracker;

pub use collision::{AccidentEvent, AnomalyConfig, AnomalyScores, CollisionEngine, OverlapRule};
pub use config::EngineConfig;
pub use detection::{BoundingBox, Detection, DetectionFrame};
pub use kinematics::KinematicsConfig;
pub use pipeline::{run_frames, run_reader, Pipeline, RunSummary};
pub use tracker::{Point2, Tracker, TrackerConfig};
