//! One full run of the multi-agent protocol: rounds, sequential agent
//! turns, broadcasts, elimination, ledgers, settlement and diagnostics.
//!
//! Rounds are numbered from 1 to `T`; agents act in id order within a round
//! and every agent sees the broadcasts made earlier in the same round.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::board::{BoardSnapshot, Horizon, PublicBoard};
use crate::env::{ArmModel, SharingStructure};
use crate::error::{Error, Result};
use crate::incentive::{self, AgentLedger, IncentiveOutcome, IrReport};
use crate::policy::{self, ActionKind, PrivateEstimates, UcbRun};

/// Reward stream of the collaborative run.
pub fn reward_stream(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Reward stream of the 2-UCB baseline, independent of [`reward_stream`].
pub fn baseline_stream(seed: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    rng
}

/// Stream for drawing random problem instances.
pub fn instance_stream(seed: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(2);
    rng
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub model: ArmModel,
    pub sharing: SharingStructure,
    pub horizon: u64,
    /// Balance level threshold `B >= 1`.
    pub threshold: f64,
    pub seed: u64,
    pub diagnostics: bool,
    /// Charge agents only for pairs broadcast by others.
    pub exclude_own_shares: bool,
}

impl RunConfig {
    pub fn new(model: ArmModel, sharing: SharingStructure, horizon: u64) -> Self {
        Self {
            model,
            sharing,
            horizon,
            threshold: 1.0,
            seed: 0,
            diagnostics: true,
            exclude_own_shares: false,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_threshold(mut self, threshold: f64) -> Self {
        self.threshold = threshold;
        self
    }

    pub fn validate(&self) -> Result<Horizon> {
        if self.threshold.is_nan() || self.threshold < 1.0 {
            return Err(Error::InvalidConfig(format!(
                "balance threshold must be at least 1, got {}",
                self.threshold
            )));
        }
        if self.sharing.n_agents() == 0 {
            return Err(Error::InvalidConfig("at least one agent is required".into()));
        }
        self.sharing.validate(self.model.n_arms())?;
        let horizon = Horizon::new(self.horizon)?;
        if self.horizon < self.model.n_arms() as u64 {
            return Err(Error::InvalidConfig(format!(
                "horizon {} is shorter than the number of arms {}",
                self.horizon,
                self.model.n_arms()
            )));
        }
        Ok(horizon)
    }
}

/// When and by whose turn an arm left the active set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Elimination {
    pub round: u64,
    pub agent: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    /// Every public mean stayed within `sqrt(1.5 ln T / N_i)` of the truth.
    pub good_event_held: bool,
    /// `min_{i active} N_i >= t / N - 1` at every round start while more
    /// than one arm was active and all active arms had a sharer.
    pub min_count_invariant_held: bool,
    /// Every sub-optimal arm ended with at most
    /// `ceil(8 (1 + sqrt B)^2 ln T / Delta_i^2)` broadcasts.
    pub exploration_caps_held: bool,
    /// No optimal arm was ever eliminated.
    pub optimal_arms_survived: bool,
    /// Upper bound on the expected overall regret.
    pub theorem1_bound_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub seed: u64,
    pub overall_regret: f64,
    pub per_agent_regret: Vec<f64>,
    pub shared_pairs_total: u64,
    pub eliminated_at: Vec<Option<Elimination>>,
    pub final_board: BoardSnapshot,
    pub ledgers: Vec<AgentLedger>,
    pub ucb: UcbRun,
    pub incentive: IncentiveOutcome,
    pub ir: IrReport,
    pub diagnostics: Option<Diagnostics>,
}

impl RunResult {
    pub fn n_agents(&self) -> usize {
        self.per_agent_regret.len()
    }

    pub fn avg_individual_regret(&self) -> f64 {
        self.overall_regret / self.n_agents() as f64
    }

    pub fn max_raw_individual_regret(&self) -> f64 {
        self.per_agent_regret
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn max_adjusted_regret(&self) -> f64 {
        self.incentive
            .adjusted_regret
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn eliminated_arms(&self) -> impl Iterator<Item = usize> + '_ {
        self.eliminated_at
            .iter()
            .enumerate()
            .filter_map(|(i, e)| e.map(|_| i))
    }

    /// True when only optimal arms are left active.
    pub fn all_suboptimal_eliminated(&self, model: &ArmModel) -> bool {
        let gaps = model.gaps();
        self.final_board.active.iter().all(|&i| gaps[i] == 0.0)
    }
}

/// One pull, as seen by a trace observer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub round: u64,
    pub agent: usize,
    pub arm: usize,
    pub kind: ActionKind,
    pub reward: f64,
    /// Active set the decision was made against.
    pub active: Vec<usize>,
    /// Public broadcast counts after the pull.
    pub counts: Vec<u64>,
}

pub fn theorem1_bound(model: &ArmModel, n_agents: usize, horizon: &Horizon, threshold: f64) -> f64 {
    let factor = (1.0 + threshold.sqrt()).powi(2);
    let explore: f64 = model
        .gaps()
        .into_iter()
        .filter(|&g| g > 0.0)
        .map(|g| 8.0 * factor * horizon.ln() / g)
        .sum();
    let n = model.n_arms() as f64;
    let m = n_agents as f64;
    let commit = model
        .min_gap()
        .map_or(0.0, |d| 4.0 * std::f64::consts::E * m * n * n / d);
    explore + commit + 2.0 * m * n
}

/// Broadcast cap of a sub-optimal arm on the good event.
pub fn exploration_cap(gap: f64, horizon: &Horizon, threshold: f64) -> u64 {
    (8.0 * horizon.ln() * (1.0 + threshold.sqrt()).powi(2) / (gap * gap)).ceil() as u64
}

fn good_event_radius(count: u64, horizon: &Horizon) -> f64 {
    (1.5 * horizon.ln() / count as f64).sqrt()
}

struct DiagnosticsCollector<'a> {
    means: &'a [f64],
    covered: Vec<bool>,
    n_arms: f64,
    good_event: bool,
    min_count: bool,
}

impl<'a> DiagnosticsCollector<'a> {
    fn new(model: &'a ArmModel, sharing: &SharingStructure) -> Self {
        Self {
            means: model.means(),
            covered: sharing
                .share_counts(model.n_arms())
                .into_iter()
                .map(|c| c > 0)
                .collect(),
            n_arms: model.n_arms() as f64,
            good_event: true,
            min_count: true,
        }
    }

    fn round_start(&mut self, round: u64, active: &[usize], counts: &[u64]) {
        if active.len() > 1 && active.iter().all(|&i| self.covered[i]) {
            let min = active.iter().map(|&i| counts[i]).min().unwrap_or(0);
            if (min as f64) < round as f64 / self.n_arms - 1.0 {
                self.min_count = false;
            }
        }
    }

    fn broadcast(&mut self, arm: usize, count: u64, sum: f64, horizon: &Horizon) {
        let mean = sum / count as f64;
        if (mean - self.means[arm]).abs() > good_event_radius(count, horizon) {
            self.good_event = false;
        }
    }

    fn finish(
        self,
        model: &ArmModel,
        n_agents: usize,
        final_counts: &[u64],
        final_active: &[usize],
        horizon: &Horizon,
        threshold: f64,
    ) -> Diagnostics {
        finish_diagnostics(
            self.good_event,
            self.min_count,
            model,
            n_agents,
            final_counts,
            final_active,
            horizon,
            threshold,
        )
    }
}

#[allow(clippy::too_many_arguments)]
fn finish_diagnostics(
    good_event_held: bool,
    min_count_invariant_held: bool,
    model: &ArmModel,
    n_agents: usize,
    final_counts: &[u64],
    final_active: &[usize],
    horizon: &Horizon,
    threshold: f64,
) -> Diagnostics {
    let gaps = model.gaps();
    let exploration_caps_held = gaps
        .iter()
        .zip(final_counts)
        .filter(|(&g, _)| g > 0.0)
        .all(|(&g, &n)| n <= exploration_cap(g, horizon, threshold));
    let optimal_arms_survived = gaps
        .iter()
        .enumerate()
        .filter(|(_, &g)| g == 0.0)
        .all(|(i, _)| final_active.contains(&i));
    Diagnostics {
        good_event_held,
        min_count_invariant_held,
        exploration_caps_held,
        optimal_arms_survived,
        theorem1_bound_value: theorem1_bound(model, n_agents, horizon, threshold),
    }
}

/// Runs the collaborative protocol and the 2-UCB baseline for one seed.
pub fn simulate(config: &RunConfig) -> Result<RunResult> {
    run(config, None)
}

/// Like [`simulate`], handing every pull to `observer` as it happens.
pub fn simulate_traced(
    config: &RunConfig,
    observer: &mut dyn FnMut(&TraceRecord),
) -> Result<RunResult> {
    run(config, Some(observer))
}

/// Runs `config` and writes its trace as JSON lines.
pub fn write_trace<W: std::io::Write>(config: &RunConfig, mut out: W) -> Result<RunResult> {
    let mut failure = None;
    let result = simulate_traced(config, &mut |rec| {
        if failure.is_none() {
            let line = serde_json::to_string(rec).map_err(|e| e.to_string());
            let written = line.and_then(|l| writeln!(out, "{l}").map_err(|e| e.to_string()));
            if let Err(e) = written {
                failure = Some(e);
            }
        }
    })?;
    match failure {
        Some(e) => Err(Error::Trace(e)),
        None => Ok(result),
    }
}

fn run(config: &RunConfig, mut observer: Option<&mut dyn FnMut(&TraceRecord)>) -> Result<RunResult> {
    let horizon = config.validate()?;
    let model = &config.model;
    let profiles = config.sharing.profiles();
    let n_arms = model.n_arms();
    let n_agents = profiles.len();
    let steps = horizon.steps();
    let threshold = config.threshold;

    let mut rng = reward_stream(config.seed);
    let mut board = PublicBoard::new(n_arms, horizon);
    let mut ledgers = vec![AgentLedger::new(n_arms); n_agents];
    let mut private = vec![PrivateEstimates::new(n_arms); n_agents];
    let mut eliminated_at = vec![None; n_arms];
    let mut diag = config
        .diagnostics
        .then(|| DiagnosticsCollector::new(model, &config.sharing));

    'rounds: for round in 1..=steps {
        if let Some(d) = diag.as_mut() {
            d.round_start(round, board.active_arms(), board.counts());
        }
        for (agent, profile) in profiles.iter().enumerate() {
            for arm in board.run_elimination() {
                eliminated_at[arm] = Some(Elimination { round, agent });
            }
            if observer.is_none() && board.active_arms().len() == 1 {
                // Everyone commits to the survivor from here on and nothing
                // else can change.
                let survivor = board.active_arms()[0];
                let left = steps - round;
                for (k, ledger) in ledgers.iter_mut().enumerate() {
                    ledger.commit_counts[survivor] += left + u64::from(k >= agent);
                }
                break 'rounds;
            }

            let decision =
                policy::balanced_etc_decide_with(&board, profile, threshold, &private[agent]);
            let reward = model.sample(decision.arm, &mut rng)?;
            let ledger = &mut ledgers[agent];
            match decision.kind {
                ActionKind::Explore => {
                    board.record_broadcast(decision.arm, reward)?;
                    ledger.explore_counts[decision.arm] += 1;
                    if let Some(d) = diag.as_mut() {
                        d.broadcast(
                            decision.arm,
                            board.count(decision.arm),
                            board.sum(decision.arm),
                            &horizon,
                        );
                    }
                }
                ActionKind::Commit => {
                    ledger.commit_counts[decision.arm] += 1;
                    if board.count(decision.arm) == 0 {
                        private[agent].record(decision.arm, reward);
                    }
                }
            }
            if let Some(obs) = observer.as_mut() {
                obs(&TraceRecord {
                    round,
                    agent,
                    arm: decision.arm,
                    kind: decision.kind,
                    reward,
                    active: board.active_arms().to_vec(),
                    counts: board.counts().to_vec(),
                });
            }
        }
    }

    let gaps = model.gaps();
    for ledger in &mut ledgers {
        ledger.raw_regret = (0..n_arms).map(|i| ledger.pulls(i) as f64 * gaps[i]).sum();
    }
    let per_agent_regret: Vec<f64> = ledgers.iter().map(|l| l.raw_regret).collect();
    let overall_regret = per_agent_regret.iter().sum();

    let ucb = policy::run_ucb_baseline(model, horizon, &mut baseline_stream(config.seed))?;
    let outcome = incentive::settle(
        &ledgers,
        &board,
        threshold,
        ucb.regret,
        config.exclude_own_shares,
    )?;
    let ir = incentive::check_ir(&outcome, ucb.regret, model, &horizon);
    let diagnostics = diag.map(|d| {
        d.finish(
            model,
            n_agents,
            board.counts(),
            board.active_arms(),
            &horizon,
            threshold,
        )
    });

    Ok(RunResult {
        seed: config.seed,
        overall_regret,
        per_agent_regret,
        shared_pairs_total: board.total_broadcasts(),
        eliminated_at,
        final_board: board.snapshot(),
        ledgers,
        ucb,
        incentive: outcome,
        ir,
        diagnostics,
    })
}

/// Recomputes the diagnostics from a complete trace of a run.
pub fn collect_diagnostics(trace: &[TraceRecord], config: &RunConfig) -> Result<Diagnostics> {
    let horizon = config.validate()?;
    let model = &config.model;
    let n_arms = model.n_arms();
    let mut collector = DiagnosticsCollector::new(model, &config.sharing);
    let mut sums = vec![0.0; n_arms];
    let mut active: Vec<usize> = (0..n_arms).collect();
    let mut counts = vec![0u64; n_arms];
    let mut round = 0;
    for rec in trace {
        if rec.round != round {
            round = rec.round;
            collector.round_start(round, &active, &counts);
        }
        if rec.kind == ActionKind::Explore {
            sums[rec.arm] += rec.reward;
            collector.broadcast(rec.arm, rec.counts[rec.arm], sums[rec.arm], &horizon);
        }
        active.clone_from(&rec.active);
        counts.clone_from(&rec.counts);
    }
    Ok(collector.finish(
        model,
        config.sharing.n_agents(),
        &counts,
        &active,
        &horizon,
        config.threshold,
    ))
}

/// Runs `n_reps` independent copies of `template` with seeds
/// `seed_base + rep`. Results come back in seed order.
pub fn replicate(template: &RunConfig, n_reps: usize, seed_base: u64) -> Result<Vec<RunResult>> {
    replicate_with(n_reps, seed_base, |seed| {
        simulate(&template.clone().with_seed(seed))
    })
}

/// Maps `job` over seeds `seed_base..seed_base + n_reps` in parallel,
/// keeping seed order.
pub fn replicate_with<T, F>(n_reps: usize, seed_base: u64, job: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64) -> Result<T> + Sync,
{
    if n_reps == 0 {
        return Err(Error::InvalidConfig("at least one replication is required".into()));
    }
    (0..n_reps as u64)
        .into_par_iter()
        .map(|rep| job(seed_base + rep))
        .collect()
}
