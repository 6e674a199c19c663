//! Planar 20-link arm with first-order joint dynamics.
//!
//! State is `[q_0..q_19, ee_x, ee_y]` with relative joint angles. Joint
//! velocity is proportional to the commanded torque, so zero torque holds
//! any pose. Base at the origin of the `[-1, 1]²` workspace.

use std::f64::consts::FRAC_PI_2;

use super::geometry::{segments_intersect, Point, Segment};
use super::{EnvName, EnvSpec, Termination};

pub const NUM_JOINTS: usize = 20;
pub const LINK_LENGTH: f64 = 0.05;
pub const JOINT_LIMIT: f64 = FRAC_PI_2;
/// Joint velocity per unit torque.
pub const TORQUE_GAIN: f64 = 1.0;
pub const MAX_TORQUE: f64 = 1.0;
pub const DT: f64 = 0.02;
pub const HORIZON: usize = 250;

/// Wall layout: four axis-aligned segments of length 0.5, one per
/// quadrant, starting at distance 0.5 from each axis. Together they
/// form a broken cross with open corridors between the arms.
pub fn walls() -> Vec<Segment> {
    vec![
        Segment::new(0.5, 0.5, 0.5, 1.0),
        Segment::new(0.5, -1.0, 0.5, -0.5),
        Segment::new(-1.0, 0.5, -0.5, 0.5),
        Segment::new(-1.0, -0.5, -0.5, -0.5),
    ]
}

pub(super) fn spec(name: EnvName, walls: Vec<Segment>) -> EnvSpec {
    let mut state_low = vec![-JOINT_LIMIT; NUM_JOINTS];
    let mut state_high = vec![JOINT_LIMIT; NUM_JOINTS];
    let reach = NUM_JOINTS as f64 * LINK_LENGTH;
    state_low.extend([-reach, -reach]);
    state_high.extend([reach, reach]);
    EnvSpec {
        name,
        state_dim: NUM_JOINTS + 2,
        action_dim: NUM_JOINTS,
        horizon: HORIZON,
        action_low: vec![-MAX_TORQUE; NUM_JOINTS],
        action_high: vec![MAX_TORQUE; NUM_JOINTS],
        outcome_dims: vec![NUM_JOINTS, NUM_JOINTS + 1],
        dt: DT,
        walls,
        state_low,
        state_high,
    }
}

pub(super) fn rest_state() -> Vec<f64> {
    let mut values = vec![0.0; NUM_JOINTS];
    let ee = joint_positions(&values)[NUM_JOINTS];
    values.extend([ee.x, ee.y]);
    values
}

/// Base plus the end point of every link.
pub fn joint_positions(angles: &[f64]) -> Vec<Point> {
    let mut points = Vec::with_capacity(angles.len() + 1);
    let (mut x, mut y, mut heading) = (0.0, 0.0, 0.0);
    points.push(Point::new(x, y));
    for &q in angles {
        heading += q;
        x += LINK_LENGTH * heading.cos();
        y += LINK_LENGTH * heading.sin();
        points.push(Point::new(x, y));
    }
    points
}

pub fn links(angles: &[f64]) -> Vec<Segment> {
    joint_positions(angles)
        .windows(2)
        .map(|p| Segment { a: p[0], b: p[1] })
        .collect()
}

pub(super) fn step(dt: f64, state: &[f64], torque: &[f64]) -> Vec<f64> {
    let mut next: Vec<f64> = state[..NUM_JOINTS]
        .iter()
        .zip(torque)
        .map(|(q, t)| q + TORQUE_GAIN * t * dt)
        .collect();
    let ee = joint_positions(&next)[NUM_JOINTS];
    next.extend([ee.x, ee.y]);
    next
}

pub(super) fn termination(state: &[f64], walls: &[Segment]) -> Termination {
    let angles = &state[..NUM_JOINTS];
    let segments = links(angles);
    if segments
        .iter()
        .any(|link| walls.iter().any(|w| segments_intersect(link, w)))
    {
        return Termination::WallCollision;
    }
    if self_collides(&segments) {
        return Termination::SelfCollision;
    }
    if angles.iter().any(|q| q.abs() > JOINT_LIMIT) {
        return Termination::JointLimit;
    }
    Termination::None
}

fn self_collides(segments: &[Segment]) -> bool {
    (0..segments.len()).any(|i| {
        (i + 2..segments.len()).any(|j| segments_intersect(&segments[i], &segments[j]))
    })
}
