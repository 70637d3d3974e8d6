//! Synthetic detection streams with ground-truth collision labels.
//!
//! Each vehicle follows a scripted path: an initial position and velocity
//! (px/frame), optional maneuvers that change speed or heading over a frame
//! range, and an optional impact that applies a speed change, a sustained
//! deceleration and a heading change. Detection quality is degraded with
//! Gaussian centroid noise and Bernoulli dropout. Output is deterministic for
//! a given seed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::collision::boxes_overlap;
use crate::detection::{serialize_frame, BoundingBox, Detection, DetectionFrame};
use crate::eval::TruthRecord;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpecError {
    #[error("cannot parse scenario: {0}")]
    Parse(String),
    #[error("scenario {0}: {1}")]
    Invalid(String, String),
    #[error("scenario {scenario}: vehicles {a} and {b} overlap at spawn")]
    OverlappingSpawn { scenario: String, a: usize, b: usize },
    #[error("scenario {scenario}: vehicle {vehicle} box does not fit in the frame at spawn")]
    OutOfFrame { scenario: String, vehicle: usize },
    #[error("scenario {scenario}: vehicle {vehicle} is never detected")]
    NeverVisible { scenario: String, vehicle: usize },
}

/// Speed and heading change applied over the frames `[from, to)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Maneuver {
    pub from: u64,
    pub to: u64,
    /// Speed change per frame (px/frame^2); speed never drops below zero.
    #[serde(default)]
    pub accel: f64,
    /// Heading change per frame (degrees).
    #[serde(default)]
    pub turn_rate: f64,
}

/// Scripted post-impact behavior, starting at `frame`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Impact {
    pub frame: u64,
    /// Instant speed change at impact (px/frame).
    #[serde(default)]
    pub speed_change: f64,
    /// Deceleration applied every frame after impact (px/frame^2).
    #[serde(default)]
    pub deceleration: f64,
    /// Total heading change (degrees), spread over `turn_frames`.
    #[serde(default)]
    pub heading_change: f64,
    #[serde(default = "one")]
    pub turn_frames: u32,
}

fn one() -> u32 {
    1
}

fn default_class() -> i64 {
    3
}

fn default_score() -> f64 {
    0.92
}

fn default_fps() -> f64 {
    30.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VehicleScript {
    /// Center at spawn (px).
    pub start: [f64; 2],
    /// Initial velocity (px/frame).
    pub velocity: [f64; 2],
    /// Box width and height (px).
    pub size: [f64; 2],
    #[serde(default)]
    pub spawn_frame: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub despawn_frame: Option<u64>,
    /// Heading (degrees) used when the initial velocity is zero.
    #[serde(default)]
    pub heading: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub maneuvers: Vec<Maneuver>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub impact: Option<Impact>,
    #[serde(default)]
    pub noise_sigma: f64,
    #[serde(default)]
    pub dropout: f64,
    #[serde(default = "default_class")]
    pub class_id: i64,
    #[serde(default = "default_score")]
    pub score: f64,
}

impl VehicleScript {
    pub fn new(start: [f64; 2], velocity: [f64; 2], size: [f64; 2]) -> Self {
        Self {
            start,
            velocity,
            size,
            spawn_frame: 0,
            despawn_frame: None,
            heading: 0.0,
            maneuvers: Vec::new(),
            impact: None,
            noise_sigma: 0.0,
            dropout: 0.0,
            class_id: default_class(),
            score: default_score(),
        }
    }
}

/// A scripted collision between two vehicles (indices into `vehicles`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScriptedCollision {
    pub frame: u64,
    pub vehicles: [usize; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    pub name: String,
    pub frame_count: u64,
    #[serde(default = "default_fps")]
    pub fps: f64,
    pub width: u32,
    pub height: u32,
    #[serde(default)]
    pub seed: u64,
    pub vehicles: Vec<VehicleScript>,
    #[serde(default)]
    pub ground_truth: Vec<ScriptedCollision>,
}

impl ScenarioSpec {
    pub fn from_toml_str(text: &str) -> Result<Self, SpecError> {
        toml::from_str(text).map_err(|e| SpecError::Parse(e.to_string()))
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("scenario specs always serialize")
    }

    fn invalid(&self, msg: impl Into<String>) -> SpecError {
        SpecError::Invalid(self.name.clone(), msg.into())
    }

    pub fn validate(&self) -> Result<(), SpecError> {
        if self.frame_count == 0 {
            return Err(self.invalid("frame_count must be positive"));
        }
        if self.fps.is_nan() || self.fps <= 0.0 {
            return Err(self.invalid("fps must be positive"));
        }
        if self.width == 0 || self.height == 0 {
            return Err(self.invalid("frame size must be positive"));
        }
        let (w, h) = (self.width as f64, self.height as f64);
        for (i, v) in self.vehicles.iter().enumerate() {
            if !(v.size[0] > 0.0 && v.size[1] > 0.0) {
                return Err(self.invalid(format!("vehicle {i}: box size must be positive")));
            }
            if v.noise_sigma.is_nan() || v.noise_sigma < 0.0 {
                return Err(self.invalid(format!("vehicle {i}: noise_sigma must be non-negative")));
            }
            if !(0.0..=1.0).contains(&v.dropout) || !(0.0..=1.0).contains(&v.score) {
                return Err(self.invalid(format!("vehicle {i}: dropout and score must lie in [0, 1]")));
            }
            if v.spawn_frame >= self.frame_count {
                return Err(self.invalid(format!("vehicle {i}: spawn_frame beyond the scenario")));
            }
            let [x, y] = v.start;
            let [bw, bh] = v.size;
            if x - bw / 2.0 < 0.0 || x + bw / 2.0 > w || y - bh / 2.0 < 0.0 || y + bh / 2.0 > h {
                return Err(SpecError::OutOfFrame { scenario: self.name.clone(), vehicle: i });
            }
        }
        let paths = self.paths();
        for a in 0..self.vehicles.len() {
            for b in a + 1..self.vehicles.len() {
                let spawn = self.vehicles[a].spawn_frame.max(self.vehicles[b].spawn_frame);
                if let (Some(ba), Some(bb)) = (paths[a][spawn as usize], paths[b][spawn as usize]) {
                    if boxes_overlap(&ba, &bb) {
                        return Err(SpecError::OverlappingSpawn { scenario: self.name.clone(), a, b });
                    }
                }
            }
        }
        for c in &self.ground_truth {
            let [a, b] = c.vehicles;
            if c.frame >= self.frame_count || a == b || a >= self.vehicles.len() || b >= self.vehicles.len() {
                return Err(self.invalid(format!("bad ground-truth entry {c:?}")));
            }
        }
        Ok(())
    }

    /// Noise-free box of every vehicle in every frame (`None` while absent).
    pub fn paths(&self) -> Vec<Vec<Option<BoundingBox>>> {
        self.vehicles.iter().map(|v| vehicle_path(v, self.frame_count)).collect()
    }

    /// First frame in which the noise-free boxes of vehicles `a` and `b` overlap.
    pub fn first_overlap_frame(&self, a: usize, b: usize) -> Option<u64> {
        let paths = self.paths();
        (0..self.frame_count as usize)
            .find(|&f| matches!((paths[a][f], paths[b][f]), (Some(x), Some(y)) if boxes_overlap(&x, &y)))
            .map(|f| f as u64)
    }
}

fn vehicle_path(v: &VehicleScript, frame_count: u64) -> Vec<Option<BoundingBox>> {
    let mut out = vec![None; frame_count as usize];
    let (mut x, mut y) = (v.start[0], v.start[1]);
    let (mut vx, mut vy) = (v.velocity[0], v.velocity[1]);
    let mut heading = if vx == 0.0 && vy == 0.0 { v.heading.to_radians() } else { vy.atan2(vx) };
    let end = v.despawn_frame.unwrap_or(frame_count).min(frame_count);
    for f in v.spawn_frame..end {
        out[f as usize] = Some(BoundingBox { x, y, w: v.size[0], h: v.size[1] });

        let mut dspeed = 0.0;
        let mut dheading = 0.0;
        for m in &v.maneuvers {
            if (m.from..m.to).contains(&f) {
                dspeed += m.accel;
                dheading += m.turn_rate;
            }
        }
        if let Some(imp) = &v.impact {
            if f == imp.frame {
                dspeed += imp.speed_change;
            }
            if f >= imp.frame {
                dspeed -= imp.deceleration;
                if f < imp.frame + imp.turn_frames as u64 {
                    dheading += imp.heading_change / imp.turn_frames as f64;
                }
            }
        }
        if dspeed != 0.0 || dheading != 0.0 {
            let speed = (vx.hypot(vy) + dspeed).max(0.0);
            heading += dheading.to_radians();
            vx = speed * heading.cos();
            vy = speed * heading.sin();
        }
        x += vx;
        y += vy;
    }
    out
}

/// A generated stream with its labels.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub frames: Vec<DetectionFrame>,
    /// Collisions keyed by the track ids a swap-free tracker assigns.
    pub truth: Vec<TruthRecord>,
    /// Track id expected for each vehicle (order of first detection).
    pub expected_ids: Vec<u64>,
}

impl Scenario {
    pub fn stream_text(&self) -> String {
        self.frames.iter().map(|f| serialize_frame(f) + "\n").collect()
    }

    pub fn truth_text(&self) -> String {
        self.truth.iter().map(|t| t.to_line() + "\n").collect()
    }
}

/// Renders the detection stream and ground truth for `spec`.
///
/// Truth ids are the ids a tracker assigns when it follows every vehicle
/// without a swap: vehicles are numbered in order of first emitted detection,
/// ties broken by script order.
pub fn generate(spec: &ScenarioSpec) -> Result<Scenario, SpecError> {
    spec.validate()?;
    let paths = spec.paths();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let unit = Normal::new(0.0, 1.0).expect("unit normal");
    let (w, h) = (spec.width as f64, spec.height as f64);

    let mut first_seen: Vec<Option<(u64, usize)>> = vec![None; spec.vehicles.len()];
    let mut frames = Vec::with_capacity(spec.frame_count as usize);
    for f in 0..spec.frame_count {
        let mut detections = Vec::new();
        for (i, v) in spec.vehicles.iter().enumerate() {
            let Some(b) = paths[i][f as usize] else { continue };
            // Draw unconditionally so one vehicle's dropout never shifts another's noise.
            let drop = rng.random::<f64>() < v.dropout;
            let nx: f64 = unit.sample(&mut rng);
            let ny: f64 = unit.sample(&mut rng);
            if drop {
                continue;
            }
            let noisy = BoundingBox { x: b.x + v.noise_sigma * nx, y: b.y + v.noise_sigma * ny, ..b };
            let Some(clamped) = noisy.clamp_to(w, h) else { continue };
            if first_seen[i].is_none() {
                first_seen[i] = Some((f, i));
            }
            detections.push(Detection { class_id: v.class_id, score: v.score, bbox: clamped });
        }
        frames.push(DetectionFrame { frame_index: f, width: spec.width, height: spec.height, detections });
    }

    let mut order: Vec<(u64, usize)> = Vec::new();
    for (i, s) in first_seen.iter().enumerate() {
        match s {
            Some(s) => order.push(*s),
            None if spec.ground_truth.iter().any(|c| c.vehicles.contains(&i)) => {
                return Err(SpecError::NeverVisible { scenario: spec.name.clone(), vehicle: i })
            }
            None => {}
        }
    }
    order.sort_unstable();
    let mut expected_ids = vec![u64::MAX; spec.vehicles.len()];
    for (rank, (_, i)) in order.iter().enumerate() {
        expected_ids[*i] = rank as u64;
    }

    let mut truth: Vec<TruthRecord> = spec
        .ground_truth
        .iter()
        .map(|c| TruthRecord::new(c.frame, expected_ids[c.vehicles[0]], expected_ids[c.vehicles[1]]))
        .collect();
    truth.sort_by_key(|t| (t.frame, t.a, t.b));

    Ok(Scenario { name: spec.name.clone(), frames, truth, expected_ids })
}

/// Detection-quality tier standing in for ambient conditions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Conditions {
    /// Noiseless, no dropout.
    Clear,
    /// sigma 1.5 px, 5% dropout.
    Degraded,
    /// sigma 3 px, 15% dropout.
    Poor,
}

impl Conditions {
    pub fn noise(self) -> (f64, f64) {
        match self {
            Conditions::Clear => (0.0, 0.0),
            Conditions::Degraded => (1.5, 0.05),
            Conditions::Poor => (3.0, 0.15),
        }
    }

    fn suffix(self) -> &'static str {
        match self {
            Conditions::Clear => "clear",
            Conditions::Degraded => "degraded",
            Conditions::Poor => "poor",
        }
    }
}

const FRAME_W: u32 = 1280;
const FRAME_H: u32 = 720;
const FRAMES: u64 = 150;
/// Horizontal and vertical car boxes.
const CAR_H: [f64; 2] = [64.0, 36.0];
const CAR_V: [f64; 2] = [36.0, 64.0];
/// Frames between first box overlap and scripted contact.
const CONTACT_LAG: u64 = 2;

fn scenario(name: &str, cond: Conditions, seed: u64, mut vehicles: Vec<VehicleScript>) -> ScenarioSpec {
    let (sigma, dropout) = cond.noise();
    for v in &mut vehicles {
        v.noise_sigma = sigma;
        v.dropout = dropout;
    }
    ScenarioSpec {
        name: format!("{name}-{}", cond.suffix()),
        frame_count: FRAMES,
        fps: 30.0,
        width: FRAME_W,
        height: FRAME_H,
        seed,
        vehicles,
        ground_truth: Vec::new(),
    }
}

/// Labels a collision between vehicles `a` and `b` at their first noise-free
/// overlap and schedules the scripted impacts `CONTACT_LAG` frames later.
fn stage_collision(mut spec: ScenarioSpec, a: usize, b: usize, impact_a: Impact, impact_b: Impact) -> ScenarioSpec {
    let frame = spec.first_overlap_frame(a, b).unwrap_or_else(|| panic!("{}: staged vehicles never meet", spec.name));
    spec.vehicles[a].impact = Some(Impact { frame: frame + CONTACT_LAG, ..impact_a });
    spec.vehicles[b].impact = Some(Impact { frame: frame + CONTACT_LAG, ..impact_b });
    spec.ground_truth.push(ScriptedCollision { frame, vehicles: [a, b] });
    spec
}

fn impact(speed_change: f64, deceleration: f64, heading_change: f64, turn_frames: u32) -> Impact {
    Impact { frame: 0, speed_change, deceleration, heading_change, turn_frames }
}

fn head_on(cond: Conditions, seed: u64) -> ScenarioSpec {
    let spec = scenario(
        "head-on",
        cond,
        seed,
        vec![
            VehicleScript::new([260.0, 360.0], [7.0, 0.0], CAR_H),
            VehicleScript::new([1020.0, 366.0], [-7.0, 0.0], CAR_H),
        ],
    );
    stage_collision(spec, 0, 1, impact(-3.0, 0.15, -55.0, 8), impact(-3.5, 0.15, -40.0, 8))
}

fn t_bone(cond: Conditions, seed: u64) -> ScenarioSpec {
    let spec = scenario(
        "t-bone",
        cond,
        seed,
        vec![
            VehicleScript::new([200.0, 360.0], [8.0, 0.0], CAR_H),
            VehicleScript::new([660.0, 660.0], [0.0, -5.5], CAR_V),
        ],
    );
    stage_collision(spec, 0, 1, impact(-3.0, 0.2, -35.0, 6), impact(-5.0, 0.1, 0.0, 1))
}

fn rear_end(cond: Conditions, seed: u64) -> ScenarioSpec {
    let spec = scenario(
        "rear-end",
        cond,
        seed,
        vec![
            VehicleScript::new([540.0, 400.0], [3.0, 0.0], CAR_H),
            VehicleScript::new([160.0, 400.0], [10.0, 0.0], CAR_H),
        ],
    );
    stage_collision(spec, 0, 1, impact(4.0, 0.25, -30.0, 8), impact(-5.0, 0.1, 60.0, 8))
}

fn spin_out(cond: Conditions, seed: u64) -> ScenarioSpec {
    let spec = scenario(
        "spin-out",
        cond,
        seed,
        vec![
            VehicleScript::new([180.0, 420.0], [8.0, 0.0], CAR_H),
            VehicleScript::new([420.0, 120.0], [4.0, 4.5], CAR_V),
        ],
    );
    stage_collision(spec, 0, 1, impact(-1.5, 0.12, 150.0, 12), impact(-4.0, 0.15, -20.0, 5))
}

fn low_speed_shunt(cond: Conditions, seed: u64) -> ScenarioSpec {
    let spec = scenario(
        "low-speed-shunt",
        cond,
        seed,
        vec![
            VehicleScript::new([420.0, 300.0], [4.0, 0.0], CAR_H),
            VehicleScript::new([520.0, 520.0], [2.0, -3.5], CAR_V),
        ],
    );
    stage_collision(spec, 0, 1, impact(-4.0, 0.0, 15.0, 4), impact(-4.0, 0.0, 0.0, 1))
}

fn stop_at_light(cond: Conditions, seed: u64) -> ScenarioSpec {
    // Adjacent lanes 30 px apart with 36 px boxes: side-by-side cars overlap.
    let mut a = VehicleScript::new([200.0, 340.0], [6.0, 0.0], CAR_H);
    a.maneuvers.push(Maneuver { from: 30, to: 70, accel: -0.15, turn_rate: 0.0 });
    let mut b = VehicleScript::new([120.0, 370.0], [7.0, 0.0], CAR_H);
    b.spawn_frame = 10;
    b.maneuvers.push(Maneuver { from: 40, to: 87, accel: -0.15, turn_rate: 0.0 });
    scenario("stop-at-light", cond, seed, vec![a, b])
}

fn parallel_pass(cond: Conditions, seed: u64) -> ScenarioSpec {
    scenario(
        "parallel-pass",
        cond,
        seed,
        vec![
            VehicleScript::new([420.0, 340.0], [4.0, 0.0], CAR_H),
            VehicleScript::new([100.0, 372.0], [9.0, 0.0], CAR_H),
        ],
    )
}

fn crossing_no_contact(cond: Conditions, seed: u64) -> ScenarioSpec {
    // The northbound car reaches the crossing well after the eastbound car cleared it.
    scenario(
        "crossing-no-contact",
        cond,
        seed,
        vec![
            VehicleScript::new([300.0, 360.0], [8.0, 0.0], CAR_H),
            VehicleScript::new([500.0, 680.0], [0.0, -4.0], CAR_V),
        ],
    )
}

fn dense_disjoint(cond: Conditions, seed: u64) -> ScenarioSpec {
    let mut vehicles = Vec::new();
    for (lane, (y, speed)) in
        [(120.0, 6.0), (220.0, -5.0), (320.0, 7.0), (420.0, -6.0), (520.0, 5.0)].into_iter().enumerate()
    {
        let start_x = if speed > 0.0 { 60.0 } else { 1220.0 };
        for k in 0..2 {
            let offset = k as f64 * 160.0 + lane as f64 * 10.0;
            let x = if speed > 0.0 { start_x + offset } else { start_x - offset };
            vehicles.push(VehicleScript::new([x, y], [speed, 0.0], CAR_H));
        }
    }
    scenario("dense-disjoint", cond, seed, vehicles)
}

fn stationary_cluster(cond: Conditions, seed: u64) -> ScenarioSpec {
    // A parked row with one car easing into a gap that is slightly too tight.
    let mut vehicles: Vec<VehicleScript> =
        [536.0, 608.0, 680.0, 752.0].iter().map(|&x| VehicleScript::new([x, 300.0], [0.0, 0.0], CAR_V)).collect();
    let mut parker = VehicleScript::new([640.0, 500.0], [0.0, -5.0], CAR_V);
    parker.maneuvers.push(Maneuver { from: 20, to: 53, accel: -0.15, turn_rate: 0.0 });
    vehicles.push(parker);
    scenario("stationary-cluster", cond, seed, vehicles)
}

/// The fixed 20-scenario benchmark: five collision and five benign scripts,
/// each in clear conditions and in one noisy tier.
pub fn builtin_suite(seed: u64) -> Vec<ScenarioSpec> {
    type Builder = fn(Conditions, u64) -> ScenarioSpec;
    let positives: [(Builder, Conditions); 5] = [
        (head_on, Conditions::Poor),
        (t_bone, Conditions::Degraded),
        (rear_end, Conditions::Poor),
        (spin_out, Conditions::Degraded),
        (low_speed_shunt, Conditions::Poor),
    ];
    let negatives: [(Builder, Conditions); 5] = [
        (stop_at_light, Conditions::Degraded),
        (parallel_pass, Conditions::Poor),
        (crossing_no_contact, Conditions::Degraded),
        (dense_disjoint, Conditions::Poor),
        (stationary_cluster, Conditions::Degraded),
    ];
    let mut suite = Vec::with_capacity(20);
    for (build, noisy) in positives.iter().chain(&negatives) {
        for cond in [Conditions::Clear, *noisy] {
            let k = suite.len() as u64;
            suite.push(build(cond, seed.wrapping_mul(1000).wrapping_add(k)));
        }
    }
    suite
}
