//! Arm reward models, agent sharing structures and the instance generators
//! used by the experiments.
//!
//! Arms and agents are 0-based throughout the crate: arm `0` is the first
//! entry of [`ArmModel::means`], agent `0` the first entry of
//! [`SharingStructure::profiles`].

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Reward distribution family shared by all arms of a model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum RewardKind {
    /// `Bernoulli(mean)` rewards.
    Bernoulli,
    /// Every pull returns the mean exactly.
    Deterministic,
    /// `Uniform(lo, hi)` per arm; the midpoint of each interval is the mean.
    Uniform { bounds: Vec<(f64, f64)> },
}

/// True (hidden) reward distributions of the `N` homogeneous arms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmModel {
    means: Vec<f64>,
    kind: RewardKind,
}

impl ArmModel {
    pub fn new(means: Vec<f64>, kind: RewardKind) -> Result<Self> {
        if means.is_empty() {
            return Err(Error::InvalidModel("at least one arm is required".into()));
        }
        if let Some(m) = means.iter().find(|m| !(0.0..=1.0).contains(*m)) {
            return Err(Error::InvalidModel(format!("mean {m} outside [0, 1]")));
        }
        if let RewardKind::Uniform { bounds } = &kind {
            if bounds.len() != means.len() {
                return Err(Error::InvalidModel(format!(
                    "{} uniform bounds for {} arms",
                    bounds.len(),
                    means.len()
                )));
            }
            for (i, (&(lo, hi), &mean)) in bounds.iter().zip(&means).enumerate() {
                if !(0.0 <= lo && lo <= hi && hi <= 1.0) {
                    return Err(Error::InvalidModel(format!(
                        "arm {i}: bounds ({lo}, {hi}) not inside [0, 1]"
                    )));
                }
                if ((lo + hi) / 2.0 - mean).abs() > 1e-12 {
                    return Err(Error::InvalidModel(format!(
                        "arm {i}: midpoint of ({lo}, {hi}) differs from mean {mean}"
                    )));
                }
            }
        }
        Ok(Self { means, kind })
    }

    pub fn bernoulli(means: Vec<f64>) -> Result<Self> {
        Self::new(means, RewardKind::Bernoulli)
    }

    pub fn deterministic(means: Vec<f64>) -> Result<Self> {
        Self::new(means, RewardKind::Deterministic)
    }

    /// Uniform rewards of the given half-width around each mean, clipped so
    /// that the interval stays inside `[0, 1]` and keeps its midpoint.
    pub fn uniform(means: Vec<f64>, half_width: f64) -> Result<Self> {
        let bounds = means
            .iter()
            .map(|&m| {
                let w = half_width.min(m).min(1.0 - m).max(0.0);
                (m - w, m + w)
            })
            .collect();
        Self::new(means, RewardKind::Uniform { bounds })
    }

    pub fn n_arms(&self) -> usize {
        self.means.len()
    }

    pub fn means(&self) -> &[f64] {
        &self.means
    }

    pub fn kind(&self) -> &RewardKind {
        &self.kind
    }

    pub fn best_mean(&self) -> f64 {
        self.means.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Gap `max_j mu_j - mu_i` of every arm.
    pub fn gaps(&self) -> Vec<f64> {
        let best = self.best_mean();
        self.means.iter().map(|m| best - m).collect()
    }

    /// Smallest strictly positive gap, `None` when every arm is optimal.
    pub fn min_gap(&self) -> Option<f64> {
        self.gaps()
            .into_iter()
            .filter(|&g| g > 0.0)
            .min_by(f64::total_cmp)
    }

    /// Draw one reward of `arm`.
    pub fn sample<R: Rng + ?Sized>(&self, arm: usize, rng: &mut R) -> Result<f64> {
        let mean = *self.means.get(arm).ok_or(Error::ArmOutOfRange {
            arm,
            n_arms: self.means.len(),
        })?;
        Ok(match &self.kind {
            RewardKind::Deterministic => mean,
            RewardKind::Bernoulli => {
                if rng.gen::<f64>() < mean {
                    1.0
                } else {
                    0.0
                }
            }
            RewardKind::Uniform { bounds } => {
                let (lo, hi) = bounds[arm];
                lo + (hi - lo) * rng.gen::<f64>()
            }
        })
    }
}

/// Draw one reward of `arm` from `model`.
pub fn sample_reward<R: Rng + ?Sized>(model: &ArmModel, arm: usize, rng: &mut R) -> Result<f64> {
    model.sample(arm, rng)
}

/// An agent and the arms whose outcomes it is willing to broadcast.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentProfile {
    pub id: usize,
    /// Sorted, deduplicated arm indices.
    shared_arms: Vec<usize>,
}

impl AgentProfile {
    pub fn new(id: usize, mut shared_arms: Vec<usize>) -> Self {
        shared_arms.sort_unstable();
        shared_arms.dedup();
        Self { id, shared_arms }
    }

    pub fn shared_arms(&self) -> &[usize] {
        &self.shared_arms
    }

    pub fn shares(&self, arm: usize) -> bool {
        self.shared_arms.binary_search(&arm).is_ok()
    }
}

/// Who shares what: one profile per agent, indexed by agent id.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SharingStructure {
    profiles: Vec<AgentProfile>,
}

impl SharingStructure {
    /// Builds a structure from per-agent shared arm lists; agent ids follow
    /// the list order.
    pub fn from_sets(sets: Vec<Vec<usize>>) -> Self {
        let profiles = sets
            .into_iter()
            .enumerate()
            .map(|(id, arms)| AgentProfile::new(id, arms))
            .collect();
        Self { profiles }
    }

    /// One shared arm per agent.
    pub fn from_assignment(arm_of_agent: &[usize]) -> Self {
        Self::from_sets(arm_of_agent.iter().map(|&a| vec![a]).collect())
    }

    pub fn profiles(&self) -> &[AgentProfile] {
        &self.profiles
    }

    pub fn n_agents(&self) -> usize {
        self.profiles.len()
    }

    /// Checks every shared arm index against the model size.
    pub fn validate(&self, n_arms: usize) -> Result<()> {
        for p in &self.profiles {
            if let Some(&arm) = p.shared_arms.iter().find(|&&a| a >= n_arms) {
                return Err(Error::ArmOutOfRange { arm, n_arms });
            }
        }
        Ok(())
    }

    /// Share set `S_i` of every arm: the agents willing to broadcast it.
    pub fn share_sets(&self, n_arms: usize) -> Vec<Vec<usize>> {
        let mut sets = vec![Vec::new(); n_arms];
        for p in &self.profiles {
            for &a in &p.shared_arms {
                if a < n_arms {
                    sets[a].push(p.id);
                }
            }
        }
        sets
    }

    /// `|S_i|` for every arm.
    pub fn share_counts(&self, n_arms: usize) -> Vec<usize> {
        self.share_sets(n_arms).iter().map(Vec::len).collect()
    }

    pub fn covers_all(&self, n_arms: usize) -> bool {
        self.share_counts(n_arms).iter().all(|&c| c > 0)
    }
}

fn require_coverage(n_arms: usize, n_agents: usize) -> Result<()> {
    if n_arms == 0 || n_agents < n_arms {
        return Err(Error::Coverage { n_arms, n_agents });
    }
    Ok(())
}

/// Every agent shares one arm and the share sets differ in size by at most
/// one. Agent `m` shares arm `m mod N`, so surplus agents land on the
/// lowest-indexed arms first.
pub fn make_balanced_instance(n_arms: usize, n_agents: usize) -> Result<SharingStructure> {
    require_coverage(n_arms, n_agents)?;
    let assignment: Vec<usize> = (0..n_agents).map(|m| m % n_arms).collect();
    Ok(SharingStructure::from_assignment(&assignment))
}

/// Arms 0 and 1 are shared by exactly one agent each (agents 0 and 1); the
/// remaining agents are spread round-robin over arms `2..N`.
pub fn make_imbalanced_instance(n_arms: usize, n_agents: usize) -> Result<SharingStructure> {
    require_coverage(n_arms, n_agents)?;
    let head = n_arms.min(2);
    let tail = n_arms - head;
    let assignment: Vec<usize> = (0..n_agents)
        .map(|m| {
            if m < head {
                m
            } else if tail == 0 {
                // Fewer than three arms: nothing left to spread over.
                (m - head) % n_arms
            } else {
                head + (m - head) % tail
            }
        })
        .collect();
    Ok(SharingStructure::from_assignment(&assignment))
}

/// Random means in `[0, 1]` and a random one-arm-per-agent sharing
/// structure in which every arm has at least one sharer.
pub fn make_random_instance<R: Rng + ?Sized>(
    n_arms: usize,
    n_agents: usize,
    rng: &mut R,
) -> Result<(ArmModel, SharingStructure)> {
    require_coverage(n_arms, n_agents)?;
    let means: Vec<f64> = (0..n_arms).map(|_| rng.gen::<f64>()).collect();
    let mut agents: Vec<usize> = (0..n_agents).collect();
    agents.shuffle(rng);
    let mut assignment = vec![0; n_agents];
    for (arm, &agent) in agents[..n_arms].iter().enumerate() {
        assignment[agent] = arm;
    }
    for &agent in &agents[n_arms..] {
        assignment[agent] = rng.gen_range(0..n_arms);
    }
    Ok((
        ArmModel::bernoulli(means)?,
        SharingStructure::from_assignment(&assignment),
    ))
}

/// Each agent shares two neighbouring arms: with agents numbered from one,
/// agent `m` shares `m mod N` and `(m + 1) mod N`. In 0-based terms agent `k`
/// shares arms `(k + 1) mod N` and `(k + 2) mod N`.
pub fn make_paired_instance(n_arms: usize, n_agents: usize) -> Result<SharingStructure> {
    if n_arms == 0 {
        return Err(Error::Coverage { n_arms, n_agents });
    }
    let sets = (0..n_agents)
        .map(|k| vec![(k + 1) % n_arms, (k + 2) % n_arms])
        .collect();
    Ok(SharingStructure::from_sets(sets))
}

/// Evenly spaced means `(N-1)/N, (N-2)/N, ..., 0`; for ten arms this is the
/// `0.9, 0.8, ..., 0` reward vector of the main experiments.
pub fn staircase_means(n_arms: usize) -> Vec<f64> {
    (0..n_arms)
        .map(|i| (n_arms - 1 - i) as f64 / n_arms as f64)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn deterministic_returns_mean() {
        let model = ArmModel::deterministic(vec![1.0, 0.5]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(sample_reward(&model, 1, &mut rng).unwrap(), 0.5);
    }

    #[test]
    fn degenerate_bernoulli() {
        let model = ArmModel::bernoulli(vec![0.0, 1.0]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..10_000 {
            assert_eq!(model.sample(0, &mut rng).unwrap(), 0.0);
            assert_eq!(model.sample(1, &mut rng).unwrap(), 1.0);
        }
    }

    #[test]
    fn bernoulli_sample_mean() {
        let model = ArmModel::bernoulli(vec![0.9]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 1_000_000;
        let total: f64 = (0..n).map(|_| model.sample(0, &mut rng).unwrap()).sum();
        assert!((total / n as f64 - 0.9).abs() < 1e-3);
    }

    #[test]
    fn samples_stay_in_unit_interval() {
        let means = vec![0.0, 0.2, 0.5, 0.97, 1.0];
        let models = [
            ArmModel::bernoulli(means.clone()).unwrap(),
            ArmModel::deterministic(means.clone()).unwrap(),
            ArmModel::uniform(means.clone(), 0.3).unwrap(),
        ];
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for model in &models {
            for k in 0..1_000_000 {
                let x = model.sample(k % means.len(), &mut rng).unwrap();
                assert!((0.0..=1.0).contains(&x));
            }
        }
    }

    #[test]
    fn uniform_midpoint_is_mean() {
        let model = ArmModel::uniform(vec![0.1, 0.5, 0.95], 0.2).unwrap();
        let RewardKind::Uniform { bounds } = model.kind() else {
            unreachable!()
        };
        assert_eq!(bounds[0], (0.0, 0.2));
        assert!(ArmModel::new(vec![0.5], RewardKind::Uniform { bounds: vec![(0.0, 0.6)] }).is_err());
    }

    #[test]
    fn out_of_range_arm() {
        let model = ArmModel::deterministic(vec![0.5]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(
            model.sample(1, &mut rng),
            Err(Error::ArmOutOfRange { arm: 1, n_arms: 1 })
        );
    }

    #[test]
    fn rejects_bad_means() {
        assert!(ArmModel::bernoulli(vec![0.5, 1.2]).is_err());
        assert!(ArmModel::bernoulli(vec![]).is_err());
    }

    #[test]
    fn gaps() {
        let model = ArmModel::deterministic(vec![0.4, 0.9, 0.9, 0.1]).unwrap();
        let g = model.gaps();
        assert!(g.iter().all(|&x| x >= 0.0));
        assert_eq!(model.min_gap(), Some(0.5));
        assert_eq!(ArmModel::deterministic(vec![0.3, 0.3]).unwrap().min_gap(), None);
    }

    #[test]
    fn balanced_even() {
        let s = make_balanced_instance(10, 20).unwrap();
        assert_eq!(s.share_counts(10), vec![2; 10]);
        assert!(s.profiles().iter().all(|p| p.shared_arms().len() == 1));

        let s = make_balanced_instance(2, 2).unwrap();
        assert_eq!(s.share_sets(2), vec![vec![0], vec![1]]);
    }

    #[test]
    fn balanced_remainder_goes_to_low_arms() {
        let s = make_balanced_instance(10, 25).unwrap();
        assert_eq!(s.share_counts(10), vec![3, 3, 3, 3, 3, 2, 2, 2, 2, 2]);
        assert!(make_balanced_instance(10, 9).is_err());
    }

    #[test]
    fn imbalanced_counts() {
        let s = make_imbalanced_instance(10, 10).unwrap();
        assert_eq!(s.share_counts(10), vec![1; 10]);

        let s = make_imbalanced_instance(10, 802).unwrap();
        let mut expected = vec![1, 1];
        expected.extend([100; 8]);
        assert_eq!(s.share_counts(10), expected);

        let s = make_imbalanced_instance(10, 805).unwrap();
        let c = s.share_counts(10);
        assert_eq!(&c[..2], &[1, 1]);
        assert!(c[2..].iter().all(|&x| x == 100 || x == 101));

        assert_eq!(
            make_imbalanced_instance(3, 2),
            Err(Error::Coverage { n_arms: 3, n_agents: 2 })
        );
    }

    #[test]
    fn random_instance_is_seeded_and_covering() {
        let mut a = ChaCha8Rng::seed_from_u64(5);
        let mut b = ChaCha8Rng::seed_from_u64(5);
        let x = make_random_instance(10, 37, &mut a).unwrap();
        let y = make_random_instance(10, 37, &mut b).unwrap();
        assert_eq!(x, y);
        for seed in 0..50 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (model, sharing) = make_random_instance(7, 9, &mut rng).unwrap();
            assert!(model.means().iter().all(|m| (0.0..=1.0).contains(m)));
            assert!(sharing.covers_all(7));
        }
        assert!(make_random_instance(4, 3, &mut a).is_err());
    }

    #[test]
    fn random_share_counts_follow_multinomial() {
        // Each arm gets 1 forced sharer plus Binomial(M - N, 1/N) extra ones.
        let (n, m, seeds) = (10usize, 10_000usize, 40u64);
        let extra = (m - n) as f64;
        let expected = 1.0 + extra / n as f64;
        let sd = (extra * (1.0 / n as f64) * (1.0 - 1.0 / n as f64)).sqrt();
        let mut total = vec![0.0; n];
        for seed in 0..seeds {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (_, sharing) = make_random_instance(n, m, &mut rng).unwrap();
            for (i, c) in sharing.share_counts(n).into_iter().enumerate() {
                total[i] += c as f64;
            }
        }
        let se = sd / (seeds as f64).sqrt();
        for t in total {
            assert!((t / seeds as f64 - expected).abs() <= 3.0 * se + 1e-9);
        }
    }

    #[test]
    fn paired_sharing() {
        let s = make_paired_instance(10, 20).unwrap();
        assert_eq!(s.profiles()[0].shared_arms(), &[1, 2]);
        assert_eq!(s.profiles()[8].shared_arms(), &[0, 9]);
        assert_eq!(s.share_counts(10), vec![4; 10]);
    }

    #[test]
    fn staircase() {
        let m = staircase_means(10);
        assert_eq!(m[0], 0.9);
        assert_eq!(m[9], 0.0);
    }
}
