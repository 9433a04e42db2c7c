//! Physics baseline: roll the current velocity and yaw rate forward.

use crate::scene::{Point2, PredictionSet, Sample, DT, T_F};

/// Rolls the target's current speed and yaw rate out for the horizon: an
/// exact circular arc when turning, a straight line otherwise. The single
/// trajectory is replicated across `k` modes with uniform probabilities.
pub fn constant_velocity_baseline(sample: &Sample, k: usize) -> PredictionSet {
    let cur = sample
        .target
        .current_state()
        .expect("target track is never empty");
    let (x0, y0, theta, v, omega) = (cur.x, cur.y, cur.heading, cur.v, cur.yaw_rate);

    let mut waypoints = Vec::with_capacity(T_F);
    if omega.abs() < 1e-9 {
        let (s, c) = theta.sin_cos();
        for j in 1..=T_F {
            let d = v * DT * j as f64;
            waypoints.push(Point2::new(x0 + d * c, y0 + d * s));
        }
    } else {
        let r = v / omega;
        for j in 1..=T_F {
            let a = theta + omega * DT * j as f64;
            waypoints.push(Point2::new(
                x0 + r * (a.sin() - theta.sin()),
                y0 + r * (theta.cos() - a.cos()),
            ));
        }
    }

    PredictionSet {
        modes: vec![waypoints; k.max(1)],
        probabilities: vec![1.0 / k.max(1) as f64; k.max(1)],
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::{AgentState, AgentTrack, ObjectClass, ObjectInfo, HISTORY_LEN};
    use crate::synth::VectorMap;

    fn sample_with_state(v: f64, heading: f64, yaw_rate: f64) -> Sample {
        let states: Vec<AgentState> = (0..HISTORY_LEN)
            .map(|i| AgentState {
                x: 0.0,
                y: 0.0,
                heading,
                v,
                a: 0.0,
                yaw_rate,
                t: i as i64 - (HISTORY_LEN as i64 - 1),
            })
            .collect();
        Sample {
            sample_id: "b".into(),
            target: AgentTrack {
                agent_id: "target".into(),
                info: ObjectInfo::new(ObjectClass::Car, 4.5, 2.0),
                states,
                valid: vec![true; HISTORY_LEN],
            },
            neighbors: vec![],
            map: VectorMap::default(),
            future: (1..=T_F).map(|t| Point2::new(t as f64, 0.0)).collect(),
        }
    }

    #[test]
    fn straight_rollout_meter_per_step() {
        let pred = constant_velocity_baseline(&sample_with_state(2.0, 0.0, 0.0), 5);
        assert_eq!(pred.modes.len(), 5);
        for (j, p) in pred.modes[0].iter().enumerate() {
            assert!((p.x - (j + 1) as f64).abs() < 1e-12);
            assert_eq!(p.y, 0.0);
        }
        assert!(pred.probabilities.iter().all(|p| (p - 0.2).abs() < 1e-12));
    }

    #[test]
    fn stationary_stays_at_origin() {
        let pred = constant_velocity_baseline(&sample_with_state(0.0, 1.0, 0.0), 3);
        assert!(pred.modes[0].iter().all(|p| p.x == 0.0 && p.y == 0.0));
    }

    #[test]
    fn arc_waypoints_lie_on_circle() {
        let (v, omega) = (6.0, 0.4);
        let pred = constant_velocity_baseline(&sample_with_state(v, 0.3, omega), 2);
        let r = v / omega;
        // turning circle center is p0 + r * (-sin theta, cos theta)
        let center = Point2::new(-r * 0.3_f64.sin(), r * 0.3_f64.cos());
        for p in &pred.modes[0] {
            assert!((p.dist(&center) - r.abs()).abs() < 1e-9, "{p:?}");
        }
    }

    #[test]
    fn identical_modes_for_all_k() {
        let pred = constant_velocity_baseline(&sample_with_state(4.0, -0.7, -0.2), 5);
        for m in &pred.modes[1..] {
            assert_eq!(m, &pred.modes[0]);
        }
    }
}
