//! Ball on an inextensible string below a velocity-commanded cup.
//!
//! State is `[ball − cup position (3), ball velocity (3)]`. The cup is a
//! kinematic point whose velocity during a step equals the clamped action;
//! the ball velocity is kept in the world frame so the transition only
//! depends on `(state, action)`.

use super::{EnvName, EnvSpec};

pub const STRING_LENGTH: f64 = 0.3;
pub const BALL_MASS: f64 = 0.05;
pub const GRAVITY: f64 = 9.81;
pub const DT: f64 = 0.02;
pub const HORIZON: usize = 300;
pub const MAX_CUP_SPEED: f64 = 1.0;
/// Display range of the ball velocity for histograms.
pub const VELOCITY_RANGE: f64 = 4.0;

pub(super) fn spec() -> EnvSpec {
    let l = STRING_LENGTH;
    EnvSpec {
        name: EnvName::BallInCup,
        state_dim: 6,
        action_dim: 3,
        horizon: HORIZON,
        action_low: vec![-MAX_CUP_SPEED; 3],
        action_high: vec![MAX_CUP_SPEED; 3],
        outcome_dims: vec![0, 1, 2],
        dt: DT,
        walls: Vec::new(),
        state_low: vec![-l, -l, -l, -VELOCITY_RANGE, -VELOCITY_RANGE, -VELOCITY_RANGE],
        state_high: vec![l, l, l, VELOCITY_RANGE, VELOCITY_RANGE, VELOCITY_RANGE],
    }
}

pub(super) fn rest_state() -> Vec<f64> {
    vec![0.0, 0.0, -STRING_LENGTH, 0.0, 0.0, 0.0]
}

/// Semi-implicit Euler step with an impulsive string constraint.
pub(super) fn step(dt: f64, state: &[f64], cup_velocity: &[f64]) -> Vec<f64> {
    let mut pos = [state[0], state[1], state[2]];
    let mut vel = [state[3], state[4], state[5]];
    vel[2] -= GRAVITY * dt;
    for i in 0..3 {
        pos[i] += (vel[i] - cup_velocity[i]) * dt;
    }

    let dist = pos.iter().map(|p| p * p).sum::<f64>().sqrt();
    if dist > STRING_LENGTH {
        // Taut: pull the ball back onto the sphere and cancel the outward
        // relative velocity.
        let radial = [pos[0] / dist, pos[1] / dist, pos[2] / dist];
        for i in 0..3 {
            pos[i] = radial[i] * STRING_LENGTH;
        }
        let outward: f64 = (0..3).map(|i| (vel[i] - cup_velocity[i]) * radial[i]).sum();
        if outward > 0.0 {
            for i in 0..3 {
                vel[i] -= outward * radial[i];
            }
        }
    }
    vec![pos[0], pos[1], pos[2], vel[0], vel[1], vel[2]]
}
