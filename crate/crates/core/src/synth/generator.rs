//! Kinematic scenario synthesis.
//!
//! Each scenario rolls the target with a forward-Euler kinematic bicycle at
//! `DT`, lays a road band around the driven path, adds junction furniture
//! (cross road, crosswalk, sidewalks) per scenario kind, and places
//! lane-following neighbors. Everything is a pure function of the spec, so
//! identical specs produce bit-identical samples.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::scene::{
    wrap_angle, AgentState, AgentTrack, ObjectClass, ObjectInfo, Point2, Sample, DT, HISTORY_LEN,
    T_F,
};
use crate::synth::VectorMap;

/// Half width of the drivable band around a road axis.
pub const ROAD_HALF_WIDTH: f64 = 3.5;
const LANE_OFFSET: f64 = 1.75;
const SIDEWALK_CENTER: f64 = 4.55;
const SIDEWALK_HALF: f64 = 0.75;
/// Cap on heading change per step; bounds Euler drift and keeps road bands simple.
const MAX_STEP_TURN: f64 = 0.35;
const BACK_EXTENSION: f64 = 28.0;
const FWD_EXTENSION: f64 = 14.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    Straight,
    LeftTurn,
    RightTurn,
    UTurn,
    Fork,
}

impl ScenarioKind {
    pub const ALL: [ScenarioKind; 5] = [
        ScenarioKind::Straight,
        ScenarioKind::LeftTurn,
        ScenarioKind::RightTurn,
        ScenarioKind::UTurn,
        ScenarioKind::Fork,
    ];

    pub fn label(&self) -> &'static str {
        match self {
            ScenarioKind::Straight => "straight",
            ScenarioKind::LeftTurn => "left_turn",
            ScenarioKind::RightTurn => "right_turn",
            ScenarioKind::UTurn => "u_turn",
            ScenarioKind::Fork => "fork",
        }
    }
}

/// Everything a scenario depends on; generation is pure given this.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub kind: ScenarioKind,
    /// Commanded target speed in m/s, >= 0.
    pub target_speed: f64,
    pub n_neighbors: usize,
    /// Std-dev of Gaussian position noise added to past states, meters.
    pub noise_std: f64,
    pub seed: u64,
}

/// One forward-Euler step of the kinematic bicycle model.
///
/// Steering is commanded as a path curvature; the steer angle is
/// `atan(wheelbase * curvature)`, so the heading rate is `v * curvature`.
pub fn bicycle_step(
    pos: Point2,
    heading: f64,
    v: f64,
    curvature: f64,
    wheelbase: f64,
    dt: f64,
) -> (Point2, f64) {
    let steer = (wheelbase * curvature).atan();
    let next = Point2::new(
        pos.x + v * dt * heading.cos(),
        pos.y + v * dt * heading.sin(),
    );
    let next_heading = heading + v / wheelbase * steer.tan() * dt;
    (next, next_heading)
}

#[derive(Debug, Clone, Copy)]
struct TurnPlan {
    /// Future motion step at which curvature starts (0 = step leaving t0).
    onset_step: usize,
    /// Signed curvature; 0 for straight scenarios.
    curvature: f64,
    /// Total heading sweep of the turn, radians (absolute).
    total_angle: f64,
}

impl TurnPlan {
    fn straight() -> Self {
        TurnPlan {
            onset_step: 0,
            curvature: 0.0,
            total_angle: 0.0,
        }
    }
}

fn draw_radius(rng: &mut ChaCha8Rng, lo: f64, hi: f64, v: f64) -> f64 {
    // Keep the per-step heading change under MAX_STEP_TURN.
    let min_r = (v * DT / MAX_STEP_TURN).max(lo);
    let hi = hi.max(min_r + 2.0);
    rng.gen_range(min_r..hi)
}

fn draw_plan(kind: ScenarioKind, v: f64, rng: &mut ChaCha8Rng) -> (TurnPlan, Option<TurnPlan>) {
    match kind {
        ScenarioKind::Straight => (TurnPlan::straight(), None),
        ScenarioKind::LeftTurn | ScenarioKind::RightTurn => {
            let r = draw_radius(rng, 7.0, 18.0, v);
            let angle = rng.gen_range(1.2..1.75); // ~70..100 degrees
            let onset = rng.gen_range(0..=2usize);
            let sign = if kind == ScenarioKind::LeftTurn {
                1.0
            } else {
                -1.0
            };
            (
                TurnPlan {
                    onset_step: onset,
                    curvature: sign / r,
                    total_angle: angle,
                },
                None,
            )
        }
        ScenarioKind::UTurn => {
            let r = draw_radius(rng, 6.0, 10.0, v);
            let onset = rng.gen_range(0..=1usize);
            let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
            (
                TurnPlan {
                    onset_step: onset,
                    curvature: sign / r,
                    total_angle: std::f64::consts::PI,
                },
                None,
            )
        }
        ScenarioKind::Fork => {
            let r = draw_radius(rng, 9.0, 18.0, v);
            let angle = rng.gen_range(0.55..0.95);
            let onset = rng.gen_range(0..=2usize);
            let chosen_left = rng.gen_bool(0.5);
            let sign = if chosen_left { 1.0 } else { -1.0 };
            let chosen = TurnPlan {
                onset_step: onset,
                curvature: sign / r,
                total_angle: angle,
            };
            let other = TurnPlan {
                onset_step: onset,
                curvature: -sign / r,
                total_angle: angle,
            };
            (chosen, Some(other))
        }
    }
}

/// Rolls the target path over all `HISTORY_LEN + T_F` states and shifts it so
/// the current state sits at the origin with heading 0.
fn roll_path(v: f64, wheelbase: f64, plan: &TurnPlan) -> (Vec<Point2>, Vec<f64>) {
    let n = HISTORY_LEN + T_F;
    let mut pts = Vec::with_capacity(n);
    let mut ths = Vec::with_capacity(n);
    let mut p = Point2::new(0.0, 0.0);
    let mut th = 0.0f64;
    let mut swept = 0.0f64;
    for i in 0..n {
        pts.push(p);
        ths.push(th);
        if i + 1 == n {
            break;
        }
        let mut kappa = 0.0;
        let curved = plan.curvature != 0.0
            && i >= (HISTORY_LEN - 1) + plan.onset_step
            && swept < plan.total_angle - 1e-12;
        if curved && v > 0.0 {
            let full = v * plan.curvature.abs() * DT;
            let dth = full.min(plan.total_angle - swept);
            kappa = plan.curvature.signum() * dth / (v * DT);
            swept += dth;
        }
        let (np, nth) = bicycle_step(p, th, v, kappa, wheelbase, DT);
        p = np;
        th = nth;
    }
    let origin = pts[HISTORY_LEN - 1];
    for q in &mut pts {
        q.x -= origin.x;
        q.y -= origin.y;
    }
    (pts, ths)
}

// ---------------------------------------------------------------------------
// polyline utilities
// ---------------------------------------------------------------------------

fn unit(from: Point2, to: Point2) -> Option<Point2> {
    let dx = to.x - from.x;
    let dy = to.y - from.y;
    let len = (dx * dx + dy * dy).sqrt();
    if len < 1e-12 {
        None
    } else {
        Some(Point2::new(dx / len, dy / len))
    }
}

fn polyline_length(pts: &[Point2]) -> f64 {
    pts.windows(2).map(|w| w[0].dist(&w[1])).sum()
}

fn dedupe(pts: &[Point2]) -> Vec<Point2> {
    let mut out: Vec<Point2> = Vec::with_capacity(pts.len());
    for p in pts {
        if out.last().is_none_or(|q| q.dist(p) > 1e-9) {
            out.push(*p);
        }
    }
    out
}

fn extend_polyline(pts: &[Point2], back: f64, fwd: f64) -> Vec<Point2> {
    let pts = dedupe(pts);
    if pts.len() < 2 {
        return pts;
    }
    let mut out = Vec::with_capacity(pts.len() + 2);
    let d0 = unit(pts[0], pts[1]).unwrap();
    out.push(Point2::new(pts[0].x - back * d0.x, pts[0].y - back * d0.y));
    out.extend_from_slice(&pts);
    let dn = unit(pts[pts.len() - 2], pts[pts.len() - 1]).unwrap();
    let last = pts[pts.len() - 1];
    out.push(Point2::new(last.x + fwd * dn.x, last.y + fwd * dn.y));
    out
}

fn subdivide(pts: &[Point2], max_step: f64) -> Vec<Point2> {
    let mut out = Vec::new();
    for w in pts.windows(2) {
        let seg = w[0].dist(&w[1]);
        let n = (seg / max_step).ceil().max(1.0) as usize;
        for k in 0..n {
            let f = k as f64 / n as f64;
            out.push(Point2::new(
                w[0].x + f * (w[1].x - w[0].x),
                w[0].y + f * (w[1].y - w[0].y),
            ));
        }
    }
    out.push(pts[pts.len() - 1]);
    out
}

/// Offsets a polyline laterally by `d` (positive = left) with miter joins.
fn offset_polyline(pts: &[Point2], d: f64) -> Vec<Point2> {
    let n = pts.len();
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let t_in = if i > 0 {
            unit(pts[i - 1], pts[i])
        } else {
            None
        };
        let t_out = if i + 1 < n {
            unit(pts[i], pts[i + 1])
        } else {
            None
        };
        let (bis, scale) = match (t_in, t_out) {
            (Some(a), Some(b)) => {
                let sx = a.x + b.x;
                let sy = a.y + b.y;
                let len = (sx * sx + sy * sy).sqrt();
                if len < 1e-9 {
                    (a, 1.0)
                } else {
                    let bis = Point2::new(sx / len, sy / len);
                    // miter length; dot(bis, a) = cos(half turn angle)
                    let cos_half = (bis.x * a.x + bis.y * a.y).max(0.5);
                    (bis, 1.0 / cos_half)
                }
            }
            (Some(a), None) => (a, 1.0),
            (None, Some(b)) => (b, 1.0),
            (None, None) => (Point2::new(1.0, 0.0), 1.0),
        };
        let normal = Point2::new(-bis.y, bis.x);
        out.push(Point2::new(
            pts[i].x + d * scale * normal.x,
            pts[i].y + d * scale * normal.y,
        ));
    }
    out
}

/// Closed band polygon around a polyline (no repeated closing vertex).
fn offset_band(pts: &[Point2], halfwidth: f64) -> Vec<Point2> {
    let pts = dedupe(pts);
    let left = offset_polyline(&pts, halfwidth);
    let mut right = offset_polyline(&pts, -halfwidth);
    right.reverse();
    left.into_iter().chain(right).collect()
}

/// Point and tangent heading at arc length `s`, extending linearly past the ends.
fn point_at_arc(pts: &[Point2], s: f64) -> (Point2, f64) {
    let pts = dedupe(pts);
    if pts.len() < 2 {
        return (pts[0], 0.0);
    }
    if s < 0.0 {
        let d = unit(pts[0], pts[1]).unwrap();
        return (
            Point2::new(pts[0].x + s * d.x, pts[0].y + s * d.y),
            d.y.atan2(d.x),
        );
    }
    let mut acc = 0.0;
    for w in pts.windows(2) {
        let seg = w[0].dist(&w[1]);
        if s <= acc + seg {
            let f = (s - acc) / seg;
            let d = unit(w[0], w[1]).unwrap();
            return (
                Point2::new(
                    w[0].x + f * (w[1].x - w[0].x),
                    w[0].y + f * (w[1].y - w[0].y),
                ),
                d.y.atan2(d.x),
            );
        }
        acc += seg;
    }
    let d = unit(pts[pts.len() - 2], pts[pts.len() - 1]).unwrap();
    let last = pts[pts.len() - 1];
    let over = s - acc;
    (
        Point2::new(last.x + over * d.x, last.y + over * d.y),
        d.y.atan2(d.x),
    )
}

fn axis_rect(center: Point2, dir: Point2, half_len: f64, half_w: f64) -> Vec<Point2> {
    let n = Point2::new(-dir.y, dir.x);
    let c = center;
    vec![
        Point2::new(
            c.x - half_len * dir.x - half_w * n.x,
            c.y - half_len * dir.y - half_w * n.y,
        ),
        Point2::new(
            c.x + half_len * dir.x - half_w * n.x,
            c.y + half_len * dir.y - half_w * n.y,
        ),
        Point2::new(
            c.x + half_len * dir.x + half_w * n.x,
            c.y + half_len * dir.y + half_w * n.y,
        ),
        Point2::new(
            c.x - half_len * dir.x + half_w * n.x,
            c.y - half_len * dir.y + half_w * n.y,
        ),
    ]
}

// ---------------------------------------------------------------------------
// object info and tracks
// ---------------------------------------------------------------------------

fn draw_info(rng: &mut ChaCha8Rng, target: bool) -> ObjectInfo {
    let roll: f64 = rng.gen();
    let class = if target {
        if roll < 0.7 {
            ObjectClass::Car
        } else if roll < 0.9 {
            ObjectClass::Truck
        } else {
            ObjectClass::Bus
        }
    } else if roll < 0.55 {
        ObjectClass::Car
    } else if roll < 0.68 {
        ObjectClass::Truck
    } else if roll < 0.76 {
        ObjectClass::Bus
    } else if roll < 0.88 {
        ObjectClass::Bicycle
    } else {
        ObjectClass::Motorcycle
    };
    let (l, w) = match class {
        ObjectClass::Car => (rng.gen_range(4.2..5.0), rng.gen_range(1.7..2.0)),
        ObjectClass::Truck => (rng.gen_range(6.5..9.0), rng.gen_range(2.2..2.5)),
        ObjectClass::Bus => (rng.gen_range(10.0..12.0), rng.gen_range(2.5..2.9)),
        ObjectClass::Bicycle => (rng.gen_range(1.6..1.9), rng.gen_range(0.5..0.7)),
        ObjectClass::Motorcycle => (rng.gen_range(2.0..2.3), rng.gen_range(0.7..0.9)),
        ObjectClass::Pedestrian | ObjectClass::Other => {
            (rng.gen_range(0.6..0.9), rng.gen_range(0.5..0.6))
        }
    };
    ObjectInfo::new(class, l, w)
}

/// States sampled by walking a lane at constant commanded speed; stored speed
/// is the realized chord speed so finite differences agree exactly.
fn lane_follower_states(lane: &[Point2], s0: f64, v: f64) -> Vec<AgentState> {
    // positions for t = -T_H .. +1 (one extra step to compute t0 speed)
    let mut pos = Vec::with_capacity(HISTORY_LEN + 1);
    let mut heads = Vec::with_capacity(HISTORY_LEN + 1);
    for k in 0..=HISTORY_LEN {
        let s = s0 + (k as f64 - (HISTORY_LEN - 1) as f64) * v * DT;
        let (p, h) = point_at_arc(lane, s);
        pos.push(p);
        heads.push(h);
    }
    let mut speeds = Vec::with_capacity(HISTORY_LEN);
    for k in 0..HISTORY_LEN {
        speeds.push(pos[k].dist(&pos[k + 1]) / DT);
    }
    let mut states = Vec::with_capacity(HISTORY_LEN);
    for k in 0..HISTORY_LEN {
        let yaw_rate = if k > 0 {
            wrap_angle(heads[k] - heads[k - 1]) / DT
        } else {
            wrap_angle(heads[1] - heads[0]) / DT
        };
        let a = if k > 0 {
            (speeds[k] - speeds[k - 1]) / DT
        } else {
            0.0
        };
        states.push(AgentState {
            x: pos[k].x,
            y: pos[k].y,
            heading: wrap_angle(heads[k]),
            v: speeds[k],
            a,
            yaw_rate,
            t: k as i64 - (HISTORY_LEN as i64 - 1),
        });
    }
    states
}

fn apply_global(states: &mut [AgentState], pose: (f64, f64, f64)) {
    let (tx, ty, gth) = pose;
    let (s, c) = gth.sin_cos();
    for st in states {
        let x = c * st.x - s * st.y + tx;
        let y = s * st.x + c * st.y + ty;
        st.x = x;
        st.y = y;
        st.heading = wrap_angle(st.heading + gth);
    }
}

fn global_point(p: Point2, pose: (f64, f64, f64)) -> Point2 {
    let (tx, ty, gth) = pose;
    let (s, c) = gth.sin_cos();
    Point2::new(c * p.x - s * p.y + tx, s * p.x + c * p.y + ty)
}

// ---------------------------------------------------------------------------
// generator
// ---------------------------------------------------------------------------

/// Generates one scenario deterministically from its spec.
pub fn generate_scenario(spec: &ScenarioSpec) -> Sample {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let v = spec.target_speed.max(0.0);

    // Fixed draw order: pose, target info, plan, neighbors, noise.
    let pose = (
        rng.gen_range(-150.0..150.0),
        rng.gen_range(-150.0..150.0),
        rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI),
    );
    let target_info = draw_info(&mut rng, true);
    let wheelbase = 0.6 * target_info.length;
    let (plan, other_plan) = draw_plan(spec.kind, v, &mut rng);

    let (path, ths) = roll_path(v, wheelbase, &plan);
    let other_path = other_plan.map(|p| roll_path(v, wheelbase, &p).0);

    // Target states over the history window.
    let mut target_states: Vec<AgentState> = (0..HISTORY_LEN)
        .map(|i| {
            let yaw_rate = if i > 0 {
                (ths[i] - ths[i - 1]) / DT
            } else {
                (ths[1] - ths[0]) / DT
            };
            AgentState {
                x: path[i].x,
                y: path[i].y,
                heading: wrap_angle(ths[i]),
                v,
                a: 0.0,
                yaw_rate,
                t: i as i64 - (HISTORY_LEN as i64 - 1),
            }
        })
        .collect();
    let future_local: Vec<Point2> = path[HISTORY_LEN..].to_vec();

    // Road geometry in the scenario frame.
    let degenerate = polyline_length(&path) < 0.5;
    let center_path: Vec<Point2> = if degenerate {
        vec![Point2::new(-30.0, 0.0), Point2::new(40.0, 0.0)]
    } else {
        path.clone()
    };
    let ext_path = subdivide(
        &extend_polyline(&center_path, BACK_EXTENSION, FWD_EXTENSION),
        1.5,
    );

    let onset_x = plan.onset_step as f64 * v * DT;
    let onset_pt = Point2::new(onset_x, 0.0);

    let mut map = VectorMap::default();
    map.drivable_polygons
        .push(offset_band(&ext_path, ROAD_HALF_WIDTH));
    map.lane_centerlines.push(ext_path.clone());

    // Oncoming lane along the straight approach.
    let approach_end_x = match spec.kind {
        ScenarioKind::Straight => 55.0_f64.max(onset_x),
        _ => onset_x + 1.0,
    };
    let oncoming: Vec<Point2> = vec![
        Point2::new(approach_end_x, LANE_OFFSET),
        Point2::new(-45.0, LANE_OFFSET),
    ];
    map.lane_centerlines.push(oncoming.clone());

    // Cross road through the analytic arc end for turn kinds.
    let mut cross_lanes: Vec<Vec<Point2>> = Vec::new();
    if matches!(spec.kind, ScenarioKind::LeftTurn | ScenarioKind::RightTurn) && !degenerate {
        let r = 1.0 / plan.curvature.abs();
        let s = plan.curvature.signum();
        let phi = plan.total_angle;
        let arc_end = Point2::new(onset_pt.x + r * phi.sin(), s * r * (1.0 - phi.cos()));
        let exit_dir = Point2::new((s * phi).cos(), (s * phi).sin());
        let cross_axis = vec![
            Point2::new(arc_end.x - 38.0 * exit_dir.x, arc_end.y - 38.0 * exit_dir.y),
            Point2::new(arc_end.x + 38.0 * exit_dir.x, arc_end.y + 38.0 * exit_dir.y),
        ];
        map.drivable_polygons
            .push(offset_band(&cross_axis, ROAD_HALF_WIDTH));
        let n = Point2::new(-exit_dir.y, exit_dir.x);
        let lane_a: Vec<Point2> = cross_axis
            .iter()
            .map(|p| Point2::new(p.x - LANE_OFFSET * n.x, p.y - LANE_OFFSET * n.y))
            .collect();
        let mut lane_b: Vec<Point2> = cross_axis
            .iter()
            .map(|p| Point2::new(p.x + LANE_OFFSET * n.x, p.y + LANE_OFFSET * n.y))
            .collect();
        lane_b.reverse();
        map.lane_centerlines.push(lane_a.clone());
        map.lane_centerlines.push(lane_b.clone());
        cross_lanes.push(lane_a);
        cross_lanes.push(lane_b);
    }

    // The unchosen fork branch.
    if let Some(other) = &other_path {
        let ext_other = subdivide(&extend_polyline(other, 2.0, FWD_EXTENSION), 1.5);
        map.drivable_polygons
            .push(offset_band(&ext_other, ROAD_HALF_WIDTH));
        map.lane_centerlines.push(ext_other);
    }

    // Sidewalks flank the approach; junction kinds get a crosswalk before the
    // junction, straight roads sometimes get one mid-block.
    let sidewalk_end = match spec.kind {
        ScenarioKind::Straight => 50.0,
        _ => (onset_x - 8.0).max(-20.0),
    };
    for side in [-1.0, 1.0] {
        let axis = vec![
            Point2::new(-42.0, side * SIDEWALK_CENTER),
            Point2::new(sidewalk_end, side * SIDEWALK_CENTER),
        ];
        map.sidewalks.push(offset_band(&axis, SIDEWALK_HALF));
    }
    match spec.kind {
        ScenarioKind::Straight => {
            if rng.gen_bool(0.5) {
                let x = rng.gen_range(8.0..25.0);
                map.crosswalks.push(axis_rect(
                    Point2::new(x, 0.0),
                    Point2::new(1.0, 0.0),
                    1.5,
                    SIDEWALK_CENTER + SIDEWALK_HALF,
                ));
            }
        }
        _ => {
            map.crosswalks.push(axis_rect(
                Point2::new(onset_x - 2.5, 0.0),
                Point2::new(1.0, 0.0),
                1.5,
                SIDEWALK_CENTER + SIDEWALK_HALF,
            ));
        }
    }

    // Neighbors follow their own lanes.
    #[derive(Clone, Copy)]
    enum LaneRole {
        Lead,
        Trail,
        Oncoming,
        Cross(usize),
    }
    let mut roles: Vec<LaneRole> = vec![LaneRole::Trail, LaneRole::Oncoming];
    match spec.kind {
        ScenarioKind::Straight | ScenarioKind::LeftTurn | ScenarioKind::RightTurn => {
            roles.push(LaneRole::Lead);
        }
        _ => {}
    }
    for i in 0..cross_lanes.len() {
        roles.push(LaneRole::Cross(i));
    }

    let s_t0 = BACK_EXTENSION + (HISTORY_LEN - 1) as f64 * v * DT;
    let mut neighbors = Vec::with_capacity(spec.n_neighbors);
    for ni in 0..spec.n_neighbors {
        let role = roles[rng.gen_range(0..roles.len())];
        let info = draw_info(&mut rng, false);
        let nv = rng.gen_range(0.5..1.1) * v.max(3.0);
        let (lane, s0): (&[Point2], f64) = match role {
            LaneRole::Lead => (&ext_path, s_t0 + rng.gen_range(8.0..28.0)),
            LaneRole::Trail => (&ext_path, s_t0 - rng.gen_range(7.0..20.0)),
            LaneRole::Oncoming => {
                let len = polyline_length(&oncoming);
                (&oncoming, rng.gen_range(0.1..0.6) * len)
            }
            LaneRole::Cross(i) => {
                let len = polyline_length(&cross_lanes[i]);
                (&cross_lanes[i], rng.gen_range(0.1..0.6) * len)
            }
        };
        let states = lane_follower_states(lane, s0, nv);
        let keep = if rng.gen_bool(0.25) {
            rng.gen_range(2..HISTORY_LEN)
        } else {
            HISTORY_LEN
        };
        let track =
            AgentTrack::from_partial_states(format!("n{ni}"), info, &states[HISTORY_LEN - keep..]);
        neighbors.push(track);
    }

    // Position noise on past states only.
    if spec.noise_std > 0.0 {
        let normal = Normal::new(0.0, spec.noise_std).unwrap();
        for st in &mut target_states {
            st.x += normal.sample(&mut rng);
            st.y += normal.sample(&mut rng);
        }
        for nb in &mut neighbors {
            for st in &mut nb.states {
                st.x += normal.sample(&mut rng);
                st.y += normal.sample(&mut rng);
            }
        }
    }

    // Lift everything into the global frame.
    apply_global(&mut target_states, pose);
    for nb in &mut neighbors {
        apply_global(&mut nb.states, pose);
    }
    let future = future_local
        .iter()
        .map(|p| global_point(*p, pose))
        .collect();
    let map = map.map_points(|p| global_point(p, pose));

    let target = AgentTrack {
        agent_id: "target".into(),
        info: target_info,
        states: target_states,
        valid: vec![true; HISTORY_LEN],
    };

    Sample {
        sample_id: format!("{}-{:016x}", spec.kind.label(), spec.seed),
        target,
        neighbors,
        map,
        future,
    }
}
