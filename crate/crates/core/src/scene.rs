//! Domain types for agents, prediction samples and model outputs, plus the
//! target-centric coordinate transform every downstream stage assumes.
//!
//! All geometry is 2D, in meters, on a fixed 2 Hz timestep grid. A [`Sample`]
//! is one prediction task: the target agent's history, the neighbor
//! histories, the vector map and the ground-truth future.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

use crate::synth::VectorMap;

/// Past steps before the current state (2 s at 2 Hz).
pub const T_H: usize = 4;
/// States per track: `T_H` past steps plus the current one.
pub const HISTORY_LEN: usize = T_H + 1;
/// Prediction horizon in steps (6 s at 2 Hz).
pub const T_F: usize = 12;
/// Timestep duration in seconds.
pub const DT: f64 = 0.5;
/// Default number of predicted modes.
pub const DEFAULT_K: usize = 5;

#[derive(Debug, Error)]
pub enum SceneError {
    #[error("invalid sample: target current pose is not finite")]
    InvalidTargetPose,
    #[error("invalid sample: target track is empty")]
    EmptyTargetTrack,
}

/// A 2D point in meters. Serializes as a `[x, y]` pair.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Serialize for Point2 {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        (self.x, self.y).serialize(s)
    }
}

impl<'de> Deserialize<'de> for Point2 {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let (x, y) = <(f64, f64)>::deserialize(d)?;
        Ok(Point2 { x, y })
    }
}

impl Point2 {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn dist(&self, other: &Point2) -> f64 {
        ((self.x - other.x).powi(2) + (self.y - other.y).powi(2)).sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

/// Wraps an angle to the half-open interval (-pi, pi].
pub fn wrap_angle(theta: f64) -> f64 {
    let two_pi = 2.0 * PI;
    let mut a = theta % two_pi;
    if a <= -PI {
        a += two_pi;
    } else if a > PI {
        a -= two_pi;
    }
    a
}

/// One agent state on the 2 Hz grid.
///
/// Heading is stored explicitly because the target frame and the rasterizer
/// need an absolute orientation; the encoders consume only
/// `(x, y, v, a, yaw_rate)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgentState {
    /// Position x in meters.
    pub x: f64,
    /// Position y in meters.
    pub y: f64,
    /// Heading in radians, wrapped to (-pi, pi].
    pub heading: f64,
    /// Speed in m/s.
    pub v: f64,
    /// Acceleration in m/s^2.
    pub a: f64,
    /// Yaw rate in rad/s.
    pub yaw_rate: f64,
    /// Integer timestep index; the current step is the track's last.
    pub t: i64,
}

impl AgentState {
    pub fn is_finite(&self) -> bool {
        self.x.is_finite()
            && self.y.is_finite()
            && self.heading.is_finite()
            && self.v.is_finite()
            && self.a.is_finite()
            && self.yaw_rate.is_finite()
    }
}

/// Object class vocabulary, in one-hot order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectClass {
    Car,
    Truck,
    Bus,
    Bicycle,
    Motorcycle,
    Pedestrian,
    /// Catch-all; unknown class names map here on read.
    #[serde(other)]
    Other,
}

impl ObjectClass {
    pub const VOCABULARY: [ObjectClass; 7] = [
        ObjectClass::Car,
        ObjectClass::Truck,
        ObjectClass::Bus,
        ObjectClass::Bicycle,
        ObjectClass::Motorcycle,
        ObjectClass::Pedestrian,
        ObjectClass::Other,
    ];

    /// Index into the one-hot vocabulary.
    pub fn index(&self) -> usize {
        Self::VOCABULARY.iter().position(|c| c == self).unwrap()
    }
}

/// Physical information of an agent: class and footprint dimensions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectInfo {
    #[serde(rename = "class")]
    pub object_class: ObjectClass,
    /// Length in meters (along heading), >= width.
    pub length: f64,
    /// Width in meters, > 0.
    pub width: f64,
}

impl ObjectInfo {
    pub fn new(object_class: ObjectClass, length: f64, width: f64) -> Self {
        Self {
            object_class,
            length,
            width,
        }
    }

    /// Footprint area in m^2.
    pub fn area(&self) -> f64 {
        self.length * self.width
    }
}

/// One agent's identity, physical info and fixed-length state history.
///
/// Tracks always hold exactly [`HISTORY_LEN`] states. Agents that appeared
/// recently are padded backward from their earliest known state; padded
/// slots are flagged `false` in `valid`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentTrack {
    #[serde(default)]
    pub agent_id: String,
    pub info: ObjectInfo,
    pub states: Vec<AgentState>,
    /// Per-step validity; `false` marks backward-padded steps.
    #[serde(default)]
    pub valid: Vec<bool>,
}

impl AgentTrack {
    /// Builds a track from at least one observed state ending at the current
    /// step, padding missing leading steps backward from the earliest state.
    pub fn from_partial_states(
        agent_id: impl Into<String>,
        info: ObjectInfo,
        observed: &[AgentState],
    ) -> Self {
        assert!(!observed.is_empty(), "track needs at least one state");
        assert!(
            observed.len() <= HISTORY_LEN,
            "track longer than history window"
        );
        let pad = HISTORY_LEN - observed.len();
        let earliest = observed[0];
        let mut states = Vec::with_capacity(HISTORY_LEN);
        let mut valid = Vec::with_capacity(HISTORY_LEN);
        for i in 0..pad {
            let mut s = earliest;
            s.t = earliest.t - (pad - i) as i64;
            states.push(s);
            valid.push(false);
        }
        states.extend_from_slice(observed);
        valid.extend(std::iter::repeat_n(true, observed.len()));
        Self {
            agent_id: agent_id.into(),
            info,
            states,
            valid,
        }
    }

    /// The state at the current timestep (the last one).
    pub fn current_state(&self) -> Option<&AgentState> {
        self.states.last()
    }
}

/// One prediction task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub sample_id: String,
    /// The target track S_0 whose future is predicted.
    pub target: AgentTrack,
    /// Surrounding agent tracks S_1..S_N.
    pub neighbors: Vec<AgentTrack>,
    pub map: VectorMap,
    /// Ground-truth future, exactly [`T_F`] waypoints.
    pub future: Vec<Point2>,
}

/// K candidate future trajectories with mode probabilities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionSet {
    /// K modes, each exactly [`T_F`] waypoints.
    pub modes: Vec<Vec<Point2>>,
    /// K non-negative probabilities summing to 1.
    pub probabilities: Vec<f64>,
}

impl PredictionSet {
    pub fn num_modes(&self) -> usize {
        self.modes.len()
    }

    /// Invariant check: per-mode waypoint counts, finite coordinates and
    /// normalized probabilities.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        if self.probabilities.len() != self.modes.len() {
            out.push(Violation::new(
                "probabilities",
                format!(
                    "{} probabilities for {} modes",
                    self.probabilities.len(),
                    self.modes.len()
                ),
            ));
        }
        for (k, mode) in self.modes.iter().enumerate() {
            if mode.len() != T_F {
                out.push(Violation::new(
                    format!("modes[{k}]"),
                    format!("{} waypoints != {}", mode.len(), T_F),
                ));
            }
            if mode.iter().any(|p| !p.is_finite()) {
                out.push(Violation::new(format!("modes[{k}]"), "non-finite waypoint"));
            }
        }
        let sum: f64 = self.probabilities.iter().sum();
        if (sum - 1.0).abs() > 1e-6 || self.probabilities.iter().any(|p| *p < 0.0) {
            out.push(Violation::new(
                "probabilities",
                format!("not a distribution (sum {sum})"),
            ));
        }
        out
    }
}

fn transform_point(p: Point2, origin: Point2, cos_t: f64, sin_t: f64) -> Point2 {
    // p' = R(-theta) (p - origin)
    let dx = p.x - origin.x;
    let dy = p.y - origin.y;
    Point2::new(cos_t * dx + sin_t * dy, -sin_t * dx + cos_t * dy)
}

fn transform_track(
    track: &AgentTrack,
    origin: Point2,
    theta: f64,
    cos_t: f64,
    sin_t: f64,
) -> AgentTrack {
    let mut out = track.clone();
    for s in &mut out.states {
        let p = transform_point(Point2::new(s.x, s.y), origin, cos_t, sin_t);
        s.x = p.x;
        s.y = p.y;
        s.heading = wrap_angle(s.heading - theta);
    }
    out
}

/// Re-expresses a sample in the frame centered on the target's current
/// position with its current heading aligned with the x-axis.
///
/// Positions of every history, future waypoint and map vertex are rotated
/// and translated; headings are shifted by the target heading and rewrapped.
/// Speeds, accelerations and yaw rates are scalars and stay unchanged.
pub fn to_target_frame(sample: &Sample) -> Result<Sample, SceneError> {
    let cur = sample
        .target
        .current_state()
        .ok_or(SceneError::EmptyTargetTrack)?;
    if !(cur.x.is_finite() && cur.y.is_finite() && cur.heading.is_finite()) {
        return Err(SceneError::InvalidTargetPose);
    }
    let origin = Point2::new(cur.x, cur.y);
    let theta = cur.heading;
    let (sin_t, cos_t) = theta.sin_cos();

    let target = transform_track(&sample.target, origin, theta, cos_t, sin_t);
    let neighbors = sample
        .neighbors
        .iter()
        .map(|n| transform_track(n, origin, theta, cos_t, sin_t))
        .collect();
    let future = sample
        .future
        .iter()
        .map(|p| transform_point(*p, origin, cos_t, sin_t))
        .collect();
    let map = sample
        .map
        .map_points(|p| transform_point(p, origin, cos_t, sin_t));

    Ok(Sample {
        sample_id: sample.sample_id.clone(),
        target,
        neighbors,
        map,
        future,
    })
}

/// One invariant violation found by [`validate_sample`].
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    /// Dotted path of the offending field, e.g. `neighbors[1].states[0].x`.
    pub field: String,
    pub message: String,
}

impl Violation {
    fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            field: field.into(),
            message: message.into(),
        }
    }
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

fn validate_track(track: &AgentTrack, ctx: &str, out: &mut Vec<Violation>) {
    if track.states.len() != HISTORY_LEN {
        out.push(Violation::new(
            format!("{ctx}.states"),
            format!("track length {} != {}", track.states.len(), HISTORY_LEN),
        ));
    }
    if track.valid.len() != track.states.len() {
        out.push(Violation::new(
            format!("{ctx}.valid"),
            format!(
                "validity length {} != state length {}",
                track.valid.len(),
                track.states.len()
            ),
        ));
    }
    for (i, s) in track.states.iter().enumerate() {
        if !s.is_finite() {
            out.push(Violation::new(
                format!("{ctx}.states[{i}]"),
                "non-finite state field",
            ));
        } else if s.heading <= -PI || s.heading > PI {
            out.push(Violation::new(
                format!("{ctx}.states[{i}].heading"),
                format!("heading {} outside (-pi, pi]", s.heading),
            ));
        }
    }
    for w in track.states.windows(2) {
        if w[1].t != w[0].t + 1 {
            out.push(Violation::new(
                format!("{ctx}.states"),
                format!("timesteps not increasing by 1: {} -> {}", w[0].t, w[1].t),
            ));
            break;
        }
    }
    let info = &track.info;
    if !(info.length.is_finite() && info.width.is_finite())
        || info.width <= 0.0
        || info.length < info.width
    {
        out.push(Violation::new(
            format!("{ctx}.info"),
            format!(
                "need length >= width > 0, got length={} width={}",
                info.length, info.width
            ),
        ));
    }
}

/// Reports every invariant violation of a sample; an empty list means valid.
pub fn validate_sample(sample: &Sample) -> Vec<Violation> {
    let mut out = Vec::new();
    validate_track(&sample.target, "target", &mut out);
    if sample.target.valid.iter().any(|v| !v) {
        out.push(Violation::new(
            "target.valid",
            "target track must be fully observed",
        ));
    }
    for (i, n) in sample.neighbors.iter().enumerate() {
        validate_track(n, &format!("neighbors[{i}]"), &mut out);
    }
    if sample.future.len() != T_F {
        out.push(Violation::new(
            "future",
            format!("future length {} != {}", sample.future.len(), T_F),
        ));
    }
    for (i, p) in sample.future.iter().enumerate() {
        if !p.is_finite() {
            out.push(Violation::new(
                format!("future[{i}]"),
                "non-finite waypoint",
            ));
        }
    }
    sample.map.collect_violations("map", &mut out);
    out
}
