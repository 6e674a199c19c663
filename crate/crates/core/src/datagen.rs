//! Bootstrap data gathering: random policies, random actions, and the
//! even-split hybrid of the two.

use std::fmt;
use std::str::FromStr;

use ndarray::Array2;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::envs::{self, EnvSpec, Termination};
use crate::error::{Error, Result};
use crate::nn::{Activation, MlpParams};
use crate::seed;

/// Hidden layer widths of a random policy.
pub const POLICY_HIDDEN: [usize; 2] = [10, 10];
/// Random policy weights and biases are drawn uniformly from
/// `[-POLICY_PARAM_RANGE, POLICY_PARAM_RANGE]`.
pub const POLICY_PARAM_RANGE: f64 = 1.0;
pub const DEFAULT_ACTION_REPEAT: usize = 10;

/// Where an episode's actions came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    RandomPolicy,
    RandomActions,
}

impl Source {
    pub fn as_str(self) -> &'static str {
        match self {
            Source::RandomPolicy => "random_policy",
            Source::RandomActions => "random_actions",
        }
    }
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Source {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "random_policy" => Ok(Source::RandomPolicy),
            "random_actions" => Ok(Source::RandomActions),
            _ => Err(Error::Config(format!("unknown episode source '{s}'"))),
        }
    }
}

/// Data-gathering strategy.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    RandomPolicy,
    RandomActions,
    Rarph,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::RandomPolicy, Method::RandomActions, Method::Rarph];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::RandomPolicy => "random_policy",
            Method::RandomActions => "random_actions",
            Method::Rarph => "rarph",
        }
    }

    /// Column heading used in rendered tables.
    pub fn title(self) -> &'static str {
        match self {
            Method::RandomPolicy => "Random policies",
            Method::RandomActions => "Random actions",
            Method::Rarph => "RARPH",
        }
    }

    pub fn code(self) -> u64 {
        match self {
            Method::RandomPolicy => 0,
            Method::RandomActions => 1,
            Method::Rarph => 2,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown method '{s}'")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub state: Vec<f64>,
    pub action: Vec<f64>,
    pub next_state: Vec<f64>,
}

/// One rollout on the real environment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Episode {
    pub transitions: Vec<Transition>,
    pub termination: Termination,
    pub source: Source,
}

impl Episode {
    pub fn len(&self) -> usize {
        self.transitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transitions.is_empty()
    }

    /// `[s_0, s_1, …, s_T]`.
    pub fn states(&self) -> Vec<Vec<f64>> {
        let mut states = Vec::with_capacity(self.len() + 1);
        if let Some(first) = self.transitions.first() {
            states.push(first.state.clone());
        }
        states.extend(self.transitions.iter().map(|t| t.next_state.clone()));
        states
    }

    /// Next state of each transition equals the state of the following one.
    pub fn is_chained(&self) -> bool {
        self.transitions
            .windows(2)
            .all(|w| w[0].next_state == w[1].state)
    }
}

/// Piecewise-constant action sequence: `block_actions[t / repeat_length]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ActionSchedule {
    pub repeat_length: usize,
    pub block_actions: Vec<Vec<f64>>,
}

impl ActionSchedule {
    pub fn num_blocks(&self) -> usize {
        self.block_actions.len()
    }

    pub fn action_at(&self, step: usize) -> &[f64] {
        let block = (step / self.repeat_length).min(self.block_actions.len() - 1);
        &self.block_actions[block]
    }
}

/// Maps a random policy's output to the action box via `tanh`.
pub fn policy_action(spec: &EnvSpec, policy: &MlpParams, state: &[f64]) -> Result<Vec<f64>> {
    let raw = policy.forward(state)?;
    Ok(raw
        .iter()
        .zip(spec.action_low.iter().zip(&spec.action_high))
        .map(|(&r, (&lo, &hi))| lo + (hi - lo) * 0.5 * (r.tanh() + 1.0))
        .collect())
}

pub fn policy_layer_sizes(spec: &EnvSpec) -> Vec<usize> {
    let mut sizes = vec![spec.state_dim];
    sizes.extend(POLICY_HIDDEN);
    sizes.push(spec.action_dim);
    sizes
}

pub fn sample_random_policy(spec: &EnvSpec, seed: u64) -> MlpParams {
    let mut rng = seed::rng(seed);
    MlpParams::uniform(
        &policy_layer_sizes(spec),
        Activation::Tanh,
        POLICY_PARAM_RANGE,
        &mut rng,
    )
    .expect("policy layer sizes are positive")
}

fn rollout(
    spec: &EnvSpec,
    source: Source,
    mut act: impl FnMut(usize, &[f64]) -> Result<Vec<f64>>,
) -> Result<Episode> {
    let mut state = envs::reset(spec);
    let mut transitions = Vec::with_capacity(spec.horizon);
    while state.step_index < spec.horizon && !state.terminated() {
        let action = spec.clamp_action(&act(state.step_index, &state.values)?);
        let next = envs::step(spec, &state, &action)?;
        transitions.push(Transition {
            state: state.values,
            action,
            next_state: next.values.clone(),
        });
        state = next;
    }
    Ok(Episode {
        transitions,
        termination: state.termination,
        source,
    })
}

pub fn rollout_random_policy(spec: &EnvSpec, policy: &MlpParams) -> Result<Episode> {
    if policy.input_dim() != spec.state_dim || policy.output_dim() != spec.action_dim {
        return Err(Error::Config(format!(
            "policy shape {:?} does not fit {}",
            policy.layer_sizes, spec.name
        )));
    }
    rollout(spec, Source::RandomPolicy, |_, s| policy_action(spec, policy, s))
}

pub fn sample_action_schedule(spec: &EnvSpec, repeat_length: usize, seed: u64) -> Result<ActionSchedule> {
    if repeat_length == 0 || !spec.horizon.is_multiple_of(repeat_length) {
        return Err(Error::Config(format!(
            "action repeat {repeat_length} does not divide the horizon {}",
            spec.horizon
        )));
    }
    let mut rng = seed::rng(seed);
    let block_actions = (0..spec.horizon / repeat_length)
        .map(|_| {
            spec.action_low
                .iter()
                .zip(&spec.action_high)
                .map(|(&lo, &hi)| rng.random_range(lo..=hi))
                .collect()
        })
        .collect();
    Ok(ActionSchedule {
        repeat_length,
        block_actions,
    })
}

pub fn rollout_random_actions(spec: &EnvSpec, schedule: &ActionSchedule) -> Result<Episode> {
    if schedule.repeat_length * schedule.num_blocks() != spec.horizon {
        return Err(Error::Config(format!(
            "schedule covers {} steps, horizon is {}",
            schedule.repeat_length * schedule.num_blocks(),
            spec.horizon
        )));
    }
    if let Some(bad) = schedule.block_actions.iter().find(|a| !spec.action_in_box(a)) {
        return Err(Error::Config(format!("schedule action {bad:?} outside the action box")));
    }
    rollout(spec, Source::RandomActions, |t, _| Ok(schedule.action_at(t).to_vec()))
}

/// Budget split of the hybrid: the odd episode goes to random policies.
pub fn rarph_split(total_episodes: usize) -> (usize, usize) {
    (total_episodes.div_ceil(2), total_episodes / 2)
}

/// Provenance of a contiguous run of samples.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeInfo {
    pub start: usize,
    pub len: usize,
    pub source: Source,
    pub termination: Termination,
    pub seed: u64,
}

/// Flat pool of `(state, action) → next_state` samples.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub env: crate::envs::EnvName,
    pub method: Method,
    pub action_repeat: usize,
    pub seed: u64,
    pub states: Array2<f64>,
    pub actions: Array2<f64>,
    pub next_states: Array2<f64>,
    pub episodes: Vec<EpisodeInfo>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.states.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn state_dim(&self) -> usize {
        self.states.ncols()
    }

    pub fn action_dim(&self) -> usize {
        self.actions.ncols()
    }

    pub fn from_episodes(
        spec: &EnvSpec,
        method: Method,
        action_repeat: usize,
        seed: u64,
        episodes: &[(Episode, u64)],
    ) -> Self {
        let n: usize = episodes.iter().map(|(e, _)| e.len()).sum();
        let mut states = Array2::zeros((n, spec.state_dim));
        let mut actions = Array2::zeros((n, spec.action_dim));
        let mut next_states = Array2::zeros((n, spec.state_dim));
        let mut infos = Vec::with_capacity(episodes.len());
        let mut row = 0;
        for (episode, episode_seed) in episodes {
            infos.push(EpisodeInfo {
                start: row,
                len: episode.len(),
                source: episode.source,
                termination: episode.termination,
                seed: *episode_seed,
            });
            for t in &episode.transitions {
                states.row_mut(row).assign(&ndarray::aview1(&t.state));
                actions.row_mut(row).assign(&ndarray::aview1(&t.action));
                next_states.row_mut(row).assign(&ndarray::aview1(&t.next_state));
                row += 1;
            }
        }
        Dataset {
            env: spec.name,
            method,
            action_repeat,
            seed,
            states,
            actions,
            next_states,
            episodes: infos,
        }
    }

    /// Checks the dataset invariants: provenance partitions the samples.
    pub fn validate(&self) -> Result<()> {
        let mut next = 0;
        for info in &self.episodes {
            if info.start != next {
                return Err(Error::Usage(format!(
                    "episode boundaries are not contiguous at sample {next}"
                )));
            }
            next += info.len;
        }
        if next != self.len() || self.actions.nrows() != self.len() || self.next_states.nrows() != self.len() {
            return Err(Error::Usage("sample count does not match episode lengths".into()));
        }
        Ok(())
    }

    pub fn mean_episode_length(&self) -> f64 {
        if self.episodes.is_empty() {
            return 0.0;
        }
        self.len() as f64 / self.episodes.len() as f64
    }
}

/// Per-episode seed derived from the gather seed and the episode index.
pub fn episode_seed(master: u64, index: usize) -> u64 {
    seed::derive_seed(master, &[index as u64])
}

/// Generates the episodes of one bootstrap budget, in episode-index order.
pub fn gather_episodes(
    spec: &EnvSpec,
    method: Method,
    n_episodes: usize,
    action_repeat: usize,
    seed: u64,
) -> Result<Vec<(Episode, u64)>> {
    if n_episodes == 0 {
        return Err(Error::Config("a budget needs at least one episode".into()));
    }
    if action_repeat == 0 || !spec.horizon.is_multiple_of(action_repeat) {
        return Err(Error::Config(format!(
            "action repeat {action_repeat} does not divide the horizon {}",
            spec.horizon
        )));
    }
    let n_policy = match method {
        Method::RandomPolicy => n_episodes,
        Method::RandomActions => 0,
        Method::Rarph => rarph_split(n_episodes).0,
    };
    (0..n_episodes)
        .map(|i| {
            let s = episode_seed(seed, i);
            let episode = if i < n_policy {
                rollout_random_policy(spec, &sample_random_policy(spec, s))?
            } else {
                rollout_random_actions(spec, &sample_action_schedule(spec, action_repeat, s)?)?
            };
            Ok((episode, s))
        })
        .collect()
}

pub fn gather(
    spec: &EnvSpec,
    method: Method,
    n_episodes: usize,
    action_repeat: usize,
    seed: u64,
) -> Result<Dataset> {
    let episodes = gather_episodes(spec, method, n_episodes, action_repeat, seed)?;
    Ok(Dataset::from_episodes(spec, method, action_repeat, seed, &episodes))
}
