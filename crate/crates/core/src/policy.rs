//! Per-agent decision rules: the Balanced-ETC explore/commit rule and the
//! single-agent 2-UCB baseline.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::board::{confidence_radius, ratio, Horizon, PublicBoard};
use crate::env::{AgentProfile, ArmModel};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ActionKind {
    /// Pull the least-broadcast active shared arm and broadcast the reward.
    Explore,
    /// Silently pull the empirically best active arm.
    Commit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionDecision {
    pub arm: usize,
    pub kind: ActionKind,
}

impl ActionDecision {
    pub fn explore(arm: usize) -> Self {
        Self {
            arm,
            kind: ActionKind::Explore,
        }
    }

    pub fn commit(arm: usize) -> Self {
        Self {
            arm,
            kind: ActionKind::Commit,
        }
    }
}

/// An agent's own samples of arms the public board has no data on. Only
/// consulted for its commit choice.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PrivateEstimates {
    counts: Vec<u64>,
    sums: Vec<f64>,
}

impl PrivateEstimates {
    pub fn new(n_arms: usize) -> Self {
        Self {
            counts: vec![0; n_arms],
            sums: vec![0.0; n_arms],
        }
    }

    pub fn record(&mut self, arm: usize, reward: f64) {
        self.counts[arm] += 1;
        self.sums[arm] += reward;
    }

    pub fn mean(&self, arm: usize) -> Option<f64> {
        match self.counts.get(arm).copied().unwrap_or(0) {
            0 => None,
            n => Some(self.sums[arm] / n as f64),
        }
    }
}

/// Balanced-ETC for one agent, using only the public board.
pub fn balanced_etc_decide(
    board: &PublicBoard,
    profile: &AgentProfile,
    threshold: f64,
) -> ActionDecision {
    decide(board, profile.shared_arms(), threshold, None)
}

/// Balanced-ETC where the commit choice may also use the agent's private
/// samples of arms nobody has broadcast.
pub fn balanced_etc_decide_with(
    board: &PublicBoard,
    profile: &AgentProfile,
    threshold: f64,
    private: &PrivateEstimates,
) -> ActionDecision {
    decide(board, profile.shared_arms(), threshold, Some(private))
}

fn decide(
    board: &PublicBoard,
    shared_arms: &[usize],
    threshold: f64,
    private: Option<&PrivateEstimates>,
) -> ActionDecision {
    if board.active_arms().len() > 1 {
        if let Some((arm, own_min)) = board.least_broadcast_shared(shared_arms) {
            if ratio(own_min, board.min_active_count()) <= threshold {
                return ActionDecision::explore(arm);
            }
        }
    }
    ActionDecision::commit(commit_target(board, private))
}

/// Active arm with the highest estimate, lowest index on ties. Arms without
/// public data fall back to private samples, then to the optimistic 1.0.
pub fn commit_target(board: &PublicBoard, private: Option<&PrivateEstimates>) -> usize {
    let mut best = usize::MAX;
    let mut best_value = f64::NEG_INFINITY;
    for &i in board.active_arms() {
        let value = board
            .mean(i)
            .or_else(|| private.and_then(|p| p.mean(i)))
            .unwrap_or(1.0);
        if best == usize::MAX || value > best_value {
            best = i;
            best_value = value;
        }
    }
    best
}

/// Single-agent 2-UCB with the fixed-horizon bonus `sqrt(2 ln T / n)`.
#[derive(Debug, Clone, PartialEq)]
pub struct UcbState {
    horizon: Horizon,
    counts: Vec<u64>,
    sums: Vec<f64>,
    index: Vec<f64>,
    t: u64,
}

impl UcbState {
    pub fn new(n_arms: usize, horizon: Horizon) -> Self {
        Self {
            horizon,
            counts: vec![0; n_arms],
            sums: vec![0.0; n_arms],
            index: vec![f64::INFINITY; n_arms],
            t: 0,
        }
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn t(&self) -> u64 {
        self.t
    }

    pub fn mean(&self, arm: usize) -> Option<f64> {
        match self.counts[arm] {
            0 => None,
            n => Some(self.sums[arm] / n as f64),
        }
    }

    /// Upper confidence index of `arm`; `+inf` until its first pull.
    pub fn index(&self, arm: usize) -> f64 {
        self.index[arm]
    }

    pub fn record(&mut self, arm: usize, reward: f64) {
        self.counts[arm] += 1;
        self.sums[arm] += reward;
        self.t += 1;
        // ln T is fixed, so only the pulled arm's index moves.
        let n = self.counts[arm];
        self.index[arm] = self.sums[arm] / n as f64 + confidence_radius(n, &self.horizon);
    }
}

pub fn ucb_decide(state: &UcbState) -> usize {
    let mut best = 0;
    for (i, &v) in state.index.iter().enumerate().skip(1) {
        if v > state.index[best] {
            best = i;
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UcbRun {
    /// `sum_t (mu_best - mu_pulled)` over the realized pulls.
    pub regret: f64,
    pub pull_counts: Vec<u64>,
}

/// Runs 2-UCB for the whole horizon on a private reward stream.
pub fn run_ucb_baseline<R: Rng + ?Sized>(
    model: &ArmModel,
    horizon: Horizon,
    rng: &mut R,
) -> Result<UcbRun> {
    let n_arms = model.n_arms();
    if horizon.steps() < n_arms as u64 {
        return Err(Error::InvalidConfig(format!(
            "2-UCB needs a horizon of at least {n_arms} steps, got {}",
            horizon.steps()
        )));
    }
    let mut state = UcbState::new(n_arms, horizon);
    for _ in 0..horizon.steps() {
        let arm = ucb_decide(&state);
        let reward = model.sample(arm, rng)?;
        state.record(arm, reward);
    }
    let gaps = model.gaps();
    let regret = state
        .counts
        .iter()
        .zip(&gaps)
        .map(|(&n, &g)| n as f64 * g)
        .sum();
    Ok(UcbRun {
        regret,
        pull_counts: state.counts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn board_with(counts_means: &[(u64, f64)], steps: u64) -> PublicBoard {
        let mut b = PublicBoard::new(counts_means.len(), Horizon::new(steps).unwrap());
        for (arm, &(n, mean)) in counts_means.iter().enumerate() {
            for _ in 0..n {
                b.record_broadcast(arm, mean).unwrap();
            }
        }
        b
    }

    #[test]
    fn sole_active_arm_commits() {
        let b = board_with(&[(5, 0.5)], 100);
        let p = AgentProfile::new(0, vec![0]);
        assert_eq!(balanced_etc_decide(&b, &p, 1.0), ActionDecision::commit(0));
    }

    #[test]
    fn explore_tie_breaks_low() {
        let b = board_with(&[(5, 0.5), (5, 0.5), (5, 0.5)], 100);
        let p = AgentProfile::new(0, vec![1, 2]);
        assert_eq!(balanced_etc_decide(&b, &p, 1.0), ActionDecision::explore(1));
    }

    #[test]
    fn over_explored_agent_commits() {
        let b = board_with(&[(10, 0.6), (30, 0.4)], 100_000);
        let p = AgentProfile::new(0, vec![1]);
        // balance level 30 / 10 = 3 > 1
        assert_eq!(balanced_etc_decide(&b, &p, 1.0), ActionDecision::commit(0));
        assert_eq!(balanced_etc_decide(&b, &p, 3.0), ActionDecision::explore(1));
    }

    #[test]
    fn agent_without_shared_arms_commits() {
        let b = board_with(&[(3, 0.2), (3, 0.4)], 100);
        let p = AgentProfile::new(0, vec![]);
        assert_eq!(balanced_etc_decide(&b, &p, 1.0), ActionDecision::commit(1));
    }

    #[test]
    fn commit_prefers_optimism_then_private_data() {
        let b = board_with(&[(3, 0.8), (0, 0.0)], 100);
        assert_eq!(commit_target(&b, None), 1);
        let mut private = PrivateEstimates::new(2);
        private.record(1, 0.1);
        assert_eq!(commit_target(&b, Some(&private)), 0);
        let p = AgentProfile::new(0, vec![]);
        assert_eq!(
            balanced_etc_decide_with(&b, &p, 1.0, &private),
            ActionDecision::commit(0)
        );
    }

    #[test]
    fn ucb_initial_order() {
        let s = UcbState::new(4, Horizon::new(100).unwrap());
        assert_eq!(ucb_decide(&s), 0);
        let mut s = UcbState::new(2, Horizon::new(100).unwrap());
        s.record(0, 1.0);
        assert_eq!(ucb_decide(&s), 1);
    }

    #[test]
    fn ucb_index_arithmetic() {
        let h = Horizon::new(100_000).unwrap();
        let mut s = UcbState::new(2, h);
        for _ in 0..100 {
            s.record(0, 0.9);
            s.record(1, 0.8);
        }
        let bonus = (2.0 * h.ln() / 100.0).sqrt();
        assert!((bonus - 0.479_852_591_218_808).abs() < 1e-12);
        assert!((s.index(0) - 1.379_852_591_218_808).abs() < 1e-9);
        assert_eq!(ucb_decide(&s), 0);
    }

    /// Direct step-through of 2-UCB with deterministic rewards, recomputing
    /// every index from scratch each step.
    fn brute_force_ucb(means: &[f64], steps: u64) -> (Vec<u64>, f64) {
        let ln = (steps as f64).ln();
        let mut n = vec![0u64; means.len()];
        let mut s = vec![0.0; means.len()];
        for _ in 0..steps {
            let mut best = 0;
            let mut best_v = f64::NEG_INFINITY;
            for i in 0..means.len() {
                let v = if n[i] == 0 {
                    f64::INFINITY
                } else {
                    s[i] / n[i] as f64 + (2.0 * ln / n[i] as f64).sqrt()
                };
                if v > best_v {
                    best = i;
                    best_v = v;
                }
            }
            n[best] += 1;
            s[best] += means[best];
        }
        let top = means.iter().copied().fold(f64::MIN, f64::max);
        let regret = n.iter().zip(means).map(|(&k, m)| k as f64 * (top - m)).sum();
        (n, regret)
    }

    #[test]
    fn ucb_deterministic_two_arms() {
        let (counts, regret) = brute_force_ucb(&[1.0, 0.5], 100);
        assert_eq!(counts, vec![86, 14]);
        assert_eq!(regret, 7.0);

        let model = ArmModel::deterministic(vec![1.0, 0.5]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let run = run_ucb_baseline(&model, Horizon::new(100).unwrap(), &mut rng).unwrap();
        assert_eq!(run.pull_counts, counts);
        assert_eq!(run.regret, regret);
    }

    #[test]
    fn ucb_zero_regret_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let single = ArmModel::bernoulli(vec![0.3]).unwrap();
        let run = run_ucb_baseline(&single, Horizon::new(500).unwrap(), &mut rng).unwrap();
        assert_eq!(run.regret, 0.0);
        let tied = ArmModel::bernoulli(vec![0.6, 0.6]).unwrap();
        let run = run_ucb_baseline(&tied, Horizon::new(500).unwrap(), &mut rng).unwrap();
        assert_eq!(run.regret, 0.0);
        assert_eq!(run.pull_counts.iter().sum::<u64>(), 500);
    }

    #[test]
    fn ucb_rejects_short_horizon() {
        let model = ArmModel::bernoulli(vec![0.1, 0.2, 0.3]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(run_ucb_baseline(&model, Horizon::new(2).unwrap(), &mut rng).is_err());
    }

    #[test]
    fn ucb_pulls_each_arm_once_first() {
        let model = ArmModel::bernoulli(vec![0.1, 0.9, 0.4, 0.7, 0.5]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut s = UcbState::new(5, Horizon::new(1000).unwrap());
        let mut first = Vec::new();
        for _ in 0..5 {
            let arm = ucb_decide(&s);
            first.push(arm);
            s.record(arm, model.sample(arm, &mut rng).unwrap());
        }
        assert_eq!(first, vec![0, 1, 2, 3, 4]);
    }

    proptest! {
        #[test]
        fn ucb_matches_brute_force(
            means in proptest::collection::vec(0.0f64..=1.0, 1..5),
            steps in 10u64..400,
        ) {
            let model = ArmModel::deterministic(means.clone()).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(0);
            let run = run_ucb_baseline(&model, Horizon::new(steps).unwrap(), &mut rng).unwrap();
            let (counts, _) = brute_force_ucb(&means, steps);
            prop_assert_eq!(run.pull_counts, counts);
        }

        /// Explore iff all three guards hold, and the explore target is the
        /// least-broadcast active shared arm.
        #[test]
        fn guard_truth_table(
            counts in proptest::collection::vec(0u64..20, 2..6),
            shared_mask in proptest::collection::vec(any::<bool>(), 6),
            high in proptest::collection::vec(any::<bool>(), 6),
            threshold in 1.0f64..4.0,
        ) {
            let n = counts.len();
            // Short horizon so that well-sampled low arms get eliminated.
            let h = Horizon::new(3).unwrap();
            let mut b = PublicBoard::new(n, h);
            for (arm, &c) in counts.iter().enumerate() {
                let r = if high[arm] { 1.0 } else { 0.0 };
                for _ in 0..c {
                    b.record_broadcast(arm, r).unwrap();
                }
            }
            b.run_elimination();
            let shared: Vec<usize> = (0..n).filter(|&i| shared_mask[i]).collect();
            let p = AgentProfile::new(0, shared.clone());
            let d = balanced_etc_decide(&b, &p, threshold);

            let active = b.active_arms();
            let inter: Vec<usize> = shared.iter().copied().filter(|i| active.contains(i)).collect();
            let guard_size = active.len() > 1;
            let guard_inter = !inter.is_empty();
            let guard_balance = guard_inter && b.balance_level(&shared).unwrap() <= threshold;
            let should_explore = guard_size && guard_inter && guard_balance;
            prop_assert_eq!(d.kind == ActionKind::Explore, should_explore);
            if should_explore {
                let min = inter.iter().map(|&i| b.count(i)).min().unwrap();
                let first = *inter.iter().find(|&&i| b.count(i) == min).unwrap();
                prop_assert_eq!(d.arm, first);
                let global = b.min_active_count();
                prop_assert!(ratio(b.count(d.arm), global) <= threshold);
            } else {
                prop_assert!(active.contains(&d.arm));
            }
        }
    }
}
