//! Deterministic, reward-free simulated tasks.
//!
//! Both environments are pure functions of `(spec, state, action)`; there
//! is no hidden simulator state, so episodes can run concurrently.

pub mod arm;
pub mod ball_in_cup;
pub mod geometry;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use geometry::Segment;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvName {
    BallInCup,
    RedundantArm,
    RedundantArmNoWalls,
}

impl EnvName {
    pub const ALL: [EnvName; 3] = [
        EnvName::BallInCup,
        EnvName::RedundantArm,
        EnvName::RedundantArmNoWalls,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            EnvName::BallInCup => "ball_in_cup",
            EnvName::RedundantArm => "redundant_arm",
            EnvName::RedundantArmNoWalls => "redundant_arm_no_walls",
        }
    }

    /// Human-readable name used in table headers.
    pub fn title(self) -> &'static str {
        match self {
            EnvName::BallInCup => "Ball In Cup",
            EnvName::RedundantArm => "Redundant Arm",
            EnvName::RedundantArmNoWalls => "Redundant Arm No Walls",
        }
    }
}

impl fmt::Display for EnvName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EnvName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        EnvName::ALL
            .into_iter()
            .find(|e| e.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown environment '{s}'")))
    }
}

/// Why an episode stopped before its horizon.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    #[default]
    None,
    WallCollision,
    SelfCollision,
    JointLimit,
}

impl Termination {
    pub fn as_str(self) -> &'static str {
        match self {
            Termination::None => "none",
            Termination::WallCollision => "wall_collision",
            Termination::SelfCollision => "self_collision",
            Termination::JointLimit => "joint_limit",
        }
    }
}

impl fmt::Display for Termination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Termination {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [
            Termination::None,
            Termination::WallCollision,
            Termination::SelfCollision,
            Termination::JointLimit,
        ]
        .into_iter()
        .find(|t| t.as_str() == s)
        .ok_or_else(|| Error::Config(format!("unknown termination reason '{s}'")))
    }
}

/// Static description of a task.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnvSpec {
    pub name: EnvName,
    pub state_dim: usize,
    pub action_dim: usize,
    pub horizon: usize,
    pub action_low: Vec<f64>,
    pub action_high: Vec<f64>,
    /// State indices forming the outcome (behavior) space.
    pub outcome_dims: Vec<usize>,
    pub dt: f64,
    /// Obstacles; empty except for the walled arm.
    pub walls: Vec<Segment>,
    /// Per-dimension display range of the state, used for histograms.
    pub state_low: Vec<f64>,
    pub state_high: Vec<f64>,
}

impl EnvSpec {
    pub fn new(name: EnvName) -> Self {
        match name {
            EnvName::BallInCup => ball_in_cup::spec(),
            EnvName::RedundantArm => arm::spec(name, arm::walls()),
            EnvName::RedundantArmNoWalls => arm::spec(name, Vec::new()),
        }
    }

    /// Euclidean diameter of the state display box; caps diverged errors.
    pub fn workspace_diameter(&self) -> f64 {
        self.state_low
            .iter()
            .zip(&self.state_high)
            .map(|(l, h)| (h - l).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    pub fn clamp_action(&self, action: &[f64]) -> Vec<f64> {
        action
            .iter()
            .zip(self.action_low.iter().zip(&self.action_high))
            .map(|(&a, (&lo, &hi))| a.clamp(lo, hi))
            .collect()
    }

    pub fn action_in_box(&self, action: &[f64]) -> bool {
        action.len() == self.action_dim
            && action
                .iter()
                .zip(self.action_low.iter().zip(&self.action_high))
                .all(|(&a, (&lo, &hi))| a >= lo && a <= hi)
    }

    pub fn outcome(&self, values: &[f64]) -> Vec<f64> {
        self.outcome_dims.iter().map(|&i| values[i]).collect()
    }

    /// Human-readable name of a state dimension.
    pub fn state_label(&self, dim: usize) -> String {
        match self.name {
            EnvName::BallInCup => ["rel_x", "rel_y", "rel_z", "vel_x", "vel_y", "vel_z"]
                .get(dim)
                .map(|s| s.to_string())
                .unwrap_or_else(|| format!("s{dim}")),
            _ => match dim {
                d if d < arm::NUM_JOINTS => format!("q{d}"),
                d if d == arm::NUM_JOINTS => "ee_x".into(),
                d if d == arm::NUM_JOINTS + 1 => "ee_y".into(),
                d => format!("s{d}"),
            },
        }
    }
}

/// A point in the task's state space plus episode bookkeeping.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnvState {
    pub values: Vec<f64>,
    pub step_index: usize,
    pub termination: Termination,
}

impl EnvState {
    pub fn terminated(&self) -> bool {
        self.termination != Termination::None
    }
}

/// Outcome-space point assigned to a trajectory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BehaviorDescriptor {
    pub values: Vec<f64>,
}

impl BehaviorDescriptor {
    pub fn distance(&self, other: &BehaviorDescriptor) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt()
    }
}

pub fn reset(spec: &EnvSpec) -> EnvState {
    let values = match spec.name {
        EnvName::BallInCup => ball_in_cup::rest_state(),
        EnvName::RedundantArm | EnvName::RedundantArmNoWalls => arm::rest_state(),
    };
    EnvState {
        values,
        step_index: 0,
        termination: Termination::None,
    }
}

/// Advances the simulation by one control step.
pub fn step(spec: &EnvSpec, state: &EnvState, action: &[f64]) -> Result<EnvState> {
    if state.terminated() {
        return Err(Error::Usage(format!(
            "cannot step a terminated state ({})",
            state.termination
        )));
    }
    if state.step_index >= spec.horizon {
        return Err(Error::Usage(format!(
            "cannot step past the horizon of {} steps",
            spec.horizon
        )));
    }
    if action.len() != spec.action_dim {
        return Err(Error::shape("action", spec.action_dim, action.len()));
    }
    if state.values.len() != spec.state_dim {
        return Err(Error::shape("state", spec.state_dim, state.values.len()));
    }
    let action = spec.clamp_action(action);
    let values = match spec.name {
        EnvName::BallInCup => ball_in_cup::step(spec.dt, &state.values, &action),
        EnvName::RedundantArm | EnvName::RedundantArmNoWalls => {
            arm::step(spec.dt, &state.values, &action)
        }
    };
    let mut next = EnvState {
        values,
        step_index: state.step_index + 1,
        termination: Termination::None,
    };
    next.termination = check_termination(spec, &next);
    Ok(next)
}

/// Environment-side early-stopping rule.
pub fn check_termination(spec: &EnvSpec, state: &EnvState) -> Termination {
    match spec.name {
        EnvName::BallInCup => Termination::None,
        EnvName::RedundantArm | EnvName::RedundantArmNoWalls => {
            arm::termination(&state.values, &spec.walls)
        }
    }
}

/// Behavior descriptor of a trajectory: the outcome dimensions of its
/// final state.
pub fn observer<S: AsRef<[f64]>>(spec: &EnvSpec, trajectory: &[S]) -> Result<BehaviorDescriptor> {
    let last = trajectory
        .last()
        .ok_or_else(|| Error::Usage("observer needs a non-empty trajectory".into()))?;
    Ok(BehaviorDescriptor {
        values: spec.outcome(last.as_ref()),
    })
}

impl AsRef<[f64]> for EnvState {
    fn as_ref(&self) -> &[f64] {
        &self.values
    }
}
