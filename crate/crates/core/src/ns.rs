//! Novelty Search over random-policy controllers.
//!
//! The resulting archive holds behaviorally diverse real-environment
//! episodes; a fixed subset of it is the ground truth every model is
//! evaluated against.

use rand::seq::index;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::datagen::{rollout_random_policy, sample_random_policy, Episode};
use crate::envs::{observer, BehaviorDescriptor, EnvSpec};
use crate::error::{Error, Result};
use crate::nn::MlpParams;
use crate::seed;

const TOURNAMENT_SIZE: usize = 3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NsConfig {
    pub population_size: usize,
    pub generations: usize,
    pub k_nearest: usize,
    pub mutation_std: f64,
    pub archive_add_per_gen: usize,
    /// Number of archive entries in the evaluation suite.
    pub suite_size: usize,
}

impl Default for NsConfig {
    fn default() -> Self {
        NsConfig {
            population_size: 50,
            generations: 20,
            k_nearest: 15,
            mutation_std: 0.1,
            archive_add_per_gen: 3,
            suite_size: 50,
        }
    }
}

impl NsConfig {
    pub fn validate(&self) -> Result<()> {
        if self.population_size == 0 || self.k_nearest == 0 || self.archive_add_per_gen == 0 {
            return Err(Error::Config(
                "population_size, k_nearest and archive_add_per_gen must be positive".into(),
            ));
        }
        if self.archive_add_per_gen > self.population_size {
            return Err(Error::Config("cannot archive more than the population per generation".into()));
        }
        if !(self.mutation_std > 0.0 && self.mutation_std.is_finite()) {
            return Err(Error::Config("mutation_std must be positive".into()));
        }
        if self.suite_size == 0 || self.suite_size > self.generations * self.archive_add_per_gen {
            return Err(Error::Config(format!(
                "suite_size {} must lie in 1..={} (generations × archive_add_per_gen)",
                self.suite_size,
                self.generations * self.archive_add_per_gen
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArchiveEntry {
    pub policy: MlpParams,
    pub episode: Episode,
    pub descriptor: BehaviorDescriptor,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct NsArchive {
    pub entries: Vec<ArchiveEntry>,
}

impl NsArchive {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Mean distance to the `k` nearest members of `pool` (all of them if the
/// pool is smaller).
pub fn novelty_score(b: &BehaviorDescriptor, pool: &[&BehaviorDescriptor], k: usize) -> Result<f64> {
    if pool.is_empty() {
        return Err(Error::Usage("novelty needs a non-empty neighbor pool".into()));
    }
    if k == 0 {
        return Err(Error::Usage("k must be at least 1".into()));
    }
    let mut distances: Vec<f64> = pool.iter().map(|p| b.distance(p)).collect();
    let k = k.min(distances.len());
    if k < distances.len() {
        distances.select_nth_unstable_by(k - 1, f64::total_cmp);
    }
    let mut nearest = distances[..k].to_vec();
    // Fixed summation order keeps the score independent of pool order.
    nearest.sort_by(f64::total_cmp);
    Ok(nearest.iter().sum::<f64>() / k as f64)
}

fn evaluate(spec: &EnvSpec, policy: MlpParams) -> Result<ArchiveEntry> {
    let episode = rollout_random_policy(spec, &policy)?;
    let descriptor = observer(spec, &episode.states())?;
    Ok(ArchiveEntry {
        policy,
        episode,
        descriptor,
    })
}

fn mutate(parent: &MlpParams, std: f64, rng: &mut impl Rng) -> MlpParams {
    let noise = Normal::new(0.0, std).expect("positive mutation std");
    let mut child = parent.clone();
    for w in &mut child.weights {
        w.mapv_inplace(|v| v + noise.sample(rng));
    }
    for b in &mut child.biases {
        b.mapv_inplace(|v| v + noise.sample(rng));
    }
    child
}

pub fn evolve(spec: &EnvSpec, config: &NsConfig, seed: u64) -> Result<NsArchive> {
    if config.population_size == 0 || config.k_nearest == 0 {
        return Err(Error::Config("population_size and k_nearest must be positive".into()));
    }
    let mut rng = seed::rng(seed::derive_seed(seed, &[u64::MAX]));
    let mut population: Vec<ArchiveEntry> = (0..config.population_size)
        .map(|i| evaluate(spec, sample_random_policy(spec, seed::derive_seed(seed, &[i as u64]))))
        .collect::<Result<_>>()?;
    let mut archive = NsArchive::default();

    for _ in 0..config.generations {
        let novelty: Vec<f64> = (0..population.len())
            .map(|i| {
                let pool: Vec<&BehaviorDescriptor> = population
                    .iter()
                    .enumerate()
                    .filter(|&(j, _)| j != i)
                    .map(|(_, e)| &e.descriptor)
                    .chain(archive.entries.iter().map(|e| &e.descriptor))
                    .collect();
                if pool.is_empty() {
                    return Ok(0.0);
                }
                novelty_score(&population[i].descriptor, &pool, config.k_nearest)
            })
            .collect::<Result<_>>()?;

        let mut ranked: Vec<usize> = (0..population.len()).collect();
        ranked.sort_by(|&a, &b| novelty[b].total_cmp(&novelty[a]).then(a.cmp(&b)));
        for &i in ranked.iter().take(config.archive_add_per_gen) {
            archive.entries.push(population[i].clone());
        }

        let offspring: Vec<MlpParams> = (0..config.population_size)
            .map(|_| {
                let winner = (0..TOURNAMENT_SIZE)
                    .map(|_| rng.random_range(0..population.len()))
                    .reduce(|best, c| if novelty[c] > novelty[best] { c } else { best })
                    .expect("non-empty tournament");
                mutate(&population[winner].policy, config.mutation_std, &mut rng)
            })
            .collect();
        population = offspring
            .into_iter()
            .map(|p| evaluate(spec, p))
            .collect::<Result<_>>()?;
    }
    Ok(archive)
}

/// Indices of `n` archive entries sampled without replacement, ascending.
pub fn evaluation_suite_indices(archive_len: usize, n: usize, seed: u64) -> Result<Vec<usize>> {
    if n > archive_len {
        return Err(Error::Usage(format!(
            "suite of {n} requested from an archive of {archive_len}"
        )));
    }
    let mut rng = seed::rng(seed);
    let mut picked = index::sample(&mut rng, archive_len, n).into_vec();
    picked.sort_unstable();
    Ok(picked)
}

/// `n` archive entries sampled without replacement, in archive order.
pub fn evaluation_suite(archive: &NsArchive, n: usize, seed: u64) -> Result<Vec<ArchiveEntry>> {
    Ok(evaluation_suite_indices(archive.len(), n, seed)?
        .into_iter()
        .map(|i| archive.entries[i].clone())
        .collect())
}

/// Mean pairwise distance between descriptors.
pub fn descriptor_spread(descriptors: &[&BehaviorDescriptor]) -> f64 {
    let n = descriptors.len();
    if n < 2 {
        return 0.0;
    }
    let mut total = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            total += descriptors[i].distance(descriptors[j]);
        }
    }
    total / (n * (n - 1) / 2) as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::EnvName;

    fn bd(v: &[f64]) -> BehaviorDescriptor {
        BehaviorDescriptor { values: v.to_vec() }
    }

    #[test]
    fn novelty_examples() {
        let b = bd(&[1.0, 2.0]);
        let copies = [b.clone(), b.clone(), b.clone(), bd(&[10.0, 10.0])];
        let pool: Vec<_> = copies.iter().collect();
        assert_eq!(novelty_score(&b, &pool, 3).unwrap(), 0.0);

        let origin = bd(&[0.0, 0.0]);
        assert_eq!(novelty_score(&bd(&[3.0, 4.0]), &[&origin], 1).unwrap(), 5.0);
        // Pool smaller than k uses every member.
        assert_eq!(novelty_score(&bd(&[3.0, 4.0]), &[&origin], 10).unwrap(), 5.0);
        assert!(novelty_score(&b, &[], 1).is_err());
        assert!(novelty_score(&b, &[&origin], 0).is_err());
    }

    #[test]
    fn zero_generations_leave_archive_empty() {
        let spec = EnvSpec::new(EnvName::BallInCup);
        let config = NsConfig {
            population_size: 4,
            generations: 0,
            ..NsConfig::default()
        };
        assert!(evolve(&spec, &config, 1).unwrap().is_empty());
    }

    #[test]
    fn archive_grows_additively_and_is_consistent() {
        let spec = EnvSpec::new(EnvName::RedundantArm);
        let config = NsConfig {
            population_size: 6,
            generations: 3,
            k_nearest: 3,
            archive_add_per_gen: 2,
            suite_size: 4,
            ..NsConfig::default()
        };
        let archive = evolve(&spec, &config, 5).unwrap();
        assert_eq!(archive.len(), 6);
        for e in &archive.entries {
            assert_eq!(e.descriptor, observer(&spec, &e.episode.states()).unwrap());
            assert!(e.episode.len() <= spec.horizon);
            assert!(e.episode.is_chained());
        }
        assert_eq!(archive, evolve(&spec, &config, 5).unwrap());
    }

    #[test]
    fn suite_sampling() {
        let spec = EnvSpec::new(EnvName::BallInCup);
        let config = NsConfig {
            population_size: 5,
            generations: 2,
            k_nearest: 2,
            archive_add_per_gen: 2,
            suite_size: 3,
            ..NsConfig::default()
        };
        let archive = evolve(&spec, &config, 2).unwrap();
        assert_eq!(evaluation_suite(&archive, 4, 9).unwrap(), archive.entries);
        let a = evaluation_suite(&archive, 2, 9).unwrap();
        assert_eq!(a, evaluation_suite(&archive, 2, 9).unwrap());
        assert_eq!(a.len(), 2);
        assert!(matches!(evaluation_suite(&archive, 5, 9), Err(Error::Usage(_))));
    }

    #[test]
    fn config_validation() {
        assert!(NsConfig::default().validate().is_ok());
        let c = NsConfig {
            suite_size: 61,
            ..NsConfig::default()
        };
        assert!(c.validate().is_err());
    }
}
