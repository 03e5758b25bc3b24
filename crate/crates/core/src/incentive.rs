//! End-of-game settlement: per-agent compensation for pulls of eliminated
//! arms, the flat cost of reading shared pairs, IR verdicts and the
//! controller's profit.
//!
//! Compensation prices every pull of an eliminated arm `i` at the upper end
//! of the gap bracket implied by its final broadcast count `N_i(T)`, and the
//! cost prices every shared pair of `i` at a deflated lower end:
//!
//! ```text
//! Com_m  = sum_{i eliminated} (Ne_im + Nc_im) * sqrt(8 (1 + sqrt B)^2 ln T / N_i)
//! Cost_m = sum_{i eliminated} N_i * sqrt((sqrt 2 - sqrt 1.5)^4 ln T / (128 (1 + sqrt B)^2 N_i))
//! ```

use serde::{Deserialize, Serialize};

use crate::board::{Horizon, PublicBoard};
use crate::env::ArmModel;
use crate::error::{Error, Result};

/// `sqrt(2) - sqrt(3/2)`: the slack between the elimination radius and the
/// good-event radius.
pub fn radius_slack() -> f64 {
    2f64.sqrt() - 1.5f64.sqrt()
}

fn balance_factor(threshold: f64) -> f64 {
    let f = 1.0 + threshold.sqrt();
    f * f
}

/// What one agent did over the run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentLedger {
    pub explore_counts: Vec<u64>,
    pub commit_counts: Vec<u64>,
    /// Regret against the true means over all of the agent's pulls.
    pub raw_regret: f64,
}

impl AgentLedger {
    pub fn new(n_arms: usize) -> Self {
        Self {
            explore_counts: vec![0; n_arms],
            commit_counts: vec![0; n_arms],
            raw_regret: 0.0,
        }
    }

    pub fn pulls(&self, arm: usize) -> u64 {
        self.explore_counts[arm] + self.commit_counts[arm]
    }

    pub fn total_pulls(&self) -> u64 {
        self.explore_counts.iter().sum::<u64>() + self.commit_counts.iter().sum::<u64>()
    }

    /// Regret from pulls of the given arms only.
    pub fn regret_on(&self, arms: impl IntoIterator<Item = usize>, gaps: &[f64]) -> f64 {
        arms.into_iter()
            .map(|i| self.pulls(i) as f64 * gaps[i])
            .sum()
    }
}

fn eliminated_arms(board: &PublicBoard) -> impl Iterator<Item = usize> + '_ {
    (0..board.n_arms()).filter(|&i| !board.is_active(i))
}

/// Per-pull compensation for an eliminated arm broadcast `count` times.
pub fn compensation_rate(count: u64, horizon: &Horizon, threshold: f64) -> f64 {
    (8.0 * balance_factor(threshold) * horizon.ln() / count as f64).sqrt()
}

/// Per-pair cost for an eliminated arm broadcast `count` times.
pub fn cost_rate(count: u64, horizon: &Horizon, threshold: f64) -> f64 {
    (radius_slack().powi(4) * horizon.ln() / (128.0 * balance_factor(threshold) * count as f64))
        .sqrt()
}

pub fn compute_compensation(
    ledger: &AgentLedger,
    board: &PublicBoard,
    threshold: f64,
) -> Result<f64> {
    let mut total = 0.0;
    for i in eliminated_arms(board) {
        let n = board.count(i);
        if n == 0 {
            return Err(Error::Inconsistent(format!(
                "arm {i} was eliminated without any broadcast"
            )));
        }
        let pulls = ledger.pulls(i);
        if pulls > 0 {
            total += pulls as f64 * compensation_rate(n, board.horizon(), threshold);
        }
    }
    Ok(total)
}

/// Cost charged to every agent, counting all shared pairs including its own.
pub fn compute_cost(board: &PublicBoard, threshold: f64) -> f64 {
    eliminated_arms(board)
        .filter(|&i| board.count(i) > 0)
        .map(|i| {
            let n = board.count(i);
            n as f64 * cost_rate(n, board.horizon(), threshold)
        })
        .sum()
}

/// Cost for pairs received from others only, i.e. excluding the agent's own
/// broadcasts.
pub fn compute_cost_excluding_own(ledger: &AgentLedger, board: &PublicBoard, threshold: f64) -> f64 {
    eliminated_arms(board)
        .filter(|&i| board.count(i) > 0)
        .map(|i| {
            let n = board.count(i);
            let received = n.saturating_sub(ledger.explore_counts[i]);
            received as f64 * cost_rate(n, board.horizon(), threshold)
        })
        .sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IncentiveOutcome {
    pub compensation: Vec<f64>,
    pub cost: Vec<f64>,
    /// `R_m - Com_m + Cost_m`.
    pub adjusted_regret: Vec<f64>,
    /// `R_m - Com_m + Cost_m - R_UCB`.
    pub relative_regret: Vec<f64>,
    /// `sum_m Cost_m - sum_m Com_m`.
    pub controller_profit: f64,
}

impl IncentiveOutcome {
    pub fn total_compensation(&self) -> f64 {
        self.compensation.iter().sum()
    }

    pub fn total_cost(&self) -> f64 {
        self.cost.iter().sum()
    }
}

/// Settles every agent's account against the final board.
pub fn settle(
    ledgers: &[AgentLedger],
    board: &PublicBoard,
    threshold: f64,
    ucb_regret: f64,
    exclude_own_shares: bool,
) -> Result<IncentiveOutcome> {
    let shared_cost = compute_cost(board, threshold);
    let mut compensation = Vec::with_capacity(ledgers.len());
    let mut cost = Vec::with_capacity(ledgers.len());
    for ledger in ledgers {
        compensation.push(compute_compensation(ledger, board, threshold)?);
        cost.push(if exclude_own_shares {
            compute_cost_excluding_own(ledger, board, threshold)
        } else {
            shared_cost
        });
    }
    let adjusted_regret: Vec<f64> = ledgers
        .iter()
        .zip(compensation.iter().zip(&cost))
        .map(|(l, (com, c))| l.raw_regret - com + c)
        .collect();
    let relative_regret = adjusted_regret.iter().map(|a| a - ucb_regret).collect();
    let controller_profit = cost.iter().sum::<f64>() - compensation.iter().sum::<f64>();
    Ok(IncentiveOutcome {
        compensation,
        cost,
        adjusted_regret,
        relative_regret,
        controller_profit,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IrReport {
    /// Whether each agent is no worse off than running 2-UCB alone.
    pub verdicts: Vec<bool>,
    /// `T / ln^2 T > N / (4 Delta_min^4)`: the regime where IR is guaranteed
    /// on the good event.
    pub horizon_condition: bool,
}

impl IrReport {
    pub fn all_rational(&self) -> bool {
        self.verdicts.iter().all(|&v| v)
    }
}

pub fn check_ir(
    outcome: &IncentiveOutcome,
    ucb_regret: f64,
    model: &ArmModel,
    horizon: &Horizon,
) -> IrReport {
    IrReport {
        verdicts: outcome
            .adjusted_regret
            .iter()
            .map(|a| a - ucb_regret <= 0.0)
            .collect(),
        horizon_condition: ir_horizon_condition(model, horizon),
    }
}

pub fn ir_horizon_condition(model: &ArmModel, horizon: &Horizon) -> bool {
    match model.min_gap() {
        None => true,
        Some(d) => {
            horizon.steps() as f64 / (horizon.ln() * horizon.ln())
                > model.n_arms() as f64 / (4.0 * d.powi(4))
        }
    }
}

/// `(T - 2N) / ln T > 8 (1 + sqrt B)^2 N / Delta_min^2`: long enough that
/// every sub-optimal arm gets eliminated on the good event.
pub fn bracket_horizon_condition(model: &ArmModel, horizon: &Horizon, threshold: f64) -> bool {
    match model.min_gap() {
        None => true,
        Some(d) => {
            let n = model.n_arms() as f64;
            (horizon.steps() as f64 - 2.0 * n) / horizon.ln()
                > 8.0 * balance_factor(threshold) * n / (d * d)
        }
    }
}

/// Interval the gap of an eliminated arm must lie in, given how many times
/// it was broadcast.
pub fn delta_bracket(count: f64, horizon: &Horizon, threshold: f64) -> Result<(f64, f64)> {
    if count.is_nan() || count <= 0.0 {
        return Err(Error::Contract(format!(
            "gap bracket needs a positive count, got {count}"
        )));
    }
    let lower = (radius_slack().powi(2) * horizon.ln() / count).sqrt();
    let upper = (8.0 * balance_factor(threshold) * horizon.ln() / count).sqrt();
    Ok((lower, upper))
}

/// Minimum number of 2-UCB pulls of an arm with the given gap on the
/// baseline's good event.
pub fn ucb_pull_floor(gap: f64, horizon: &Horizon) -> Result<u64> {
    if gap.is_nan() || gap <= 0.0 {
        return Err(Error::Contract(format!("pull floor needs a positive gap, got {gap}")));
    }
    Ok((radius_slack().powi(2) * horizon.ln() / (4.0 * gap * gap)).ceil() as u64)
}

/// `sum_i (sqrt 2 - sqrt 1.5)^2 ln T / (4 Delta_i)` over sub-optimal arms:
/// the baseline regret floor that caps every agent's cost.
pub fn cost_ceiling(model: &ArmModel, horizon: &Horizon) -> f64 {
    model
        .gaps()
        .into_iter()
        .filter(|&g| g > 0.0)
        .map(|g| radius_slack().powi(2) * horizon.ln() / (4.0 * g))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn oracle_board() -> PublicBoard {
        let mut b = PublicBoard::new(2, Horizon::new(1000).unwrap());
        for _ in 0..222 {
            b.record_broadcast(0, 1.0).unwrap();
        }
        for _ in 0..221 {
            b.record_broadcast(1, 0.5).unwrap();
        }
        assert_eq!(b.run_elimination(), vec![1]);
        b
    }

    fn oracle_ledgers() -> Vec<AgentLedger> {
        let mut a = AgentLedger::new(2);
        a.explore_counts[0] = 222;
        a.commit_counts[0] = 778;
        let mut b = AgentLedger::new(2);
        b.explore_counts[1] = 221;
        b.commit_counts[0] = 779;
        b.raw_regret = 110.5;
        vec![a, b]
    }

    #[test]
    fn nothing_eliminated_means_no_payments() {
        let mut b = PublicBoard::new(2, Horizon::new(100).unwrap());
        b.record_broadcast(0, 0.5).unwrap();
        let mut l = AgentLedger::new(2);
        l.explore_counts[0] = 1;
        assert_eq!(compute_compensation(&l, &b, 1.0).unwrap(), 0.0);
        assert_eq!(compute_cost(&b, 1.0), 0.0);
    }

    #[test]
    fn compensation_closed_form() {
        // ln T = 4, B = 1, N_i = 128: unit sqrt(8 * 4 * 4 / 128) = 1.
        let mut b = PublicBoard::new(2, Horizon::with_log(1000, 4.0));
        for _ in 0..2000 {
            b.record_broadcast(0, 1.0).unwrap();
        }
        for _ in 0..128 {
            b.record_broadcast(1, 0.0).unwrap();
        }
        assert_eq!(b.run_elimination(), vec![1]);
        let mut l = AgentLedger::new(2);
        l.explore_counts[1] = 3;
        l.commit_counts[1] = 2;
        assert_relative_eq!(compute_compensation(&l, &b, 1.0).unwrap(), 5.0, max_relative = 1e-12);
    }

    #[test]
    fn cost_unit_closed_form() {
        // With N_i = ln T the per-pair unit is (sqrt 2 - sqrt 1.5)^2 / sqrt 512.
        let h = Horizon::with_log(1000, 64.0);
        let unit = cost_rate(64, &h, 1.0);
        assert_relative_eq!(unit, 0.001_586_499_460_608_64, max_relative = 1e-12);
    }

    #[test]
    fn oracle_settlement() {
        let b = oracle_board();
        let ledgers = oracle_ledgers();
        let com = compute_compensation(&ledgers[1], &b, 1.0).unwrap();
        // 221 * sqrt(32 ln 1000 / 221), 40-digit evaluation.
        assert_relative_eq!(com, 221.024_083_151_501_1, max_relative = 1e-12);
        assert_eq!(compute_compensation(&ledgers[0], &b, 1.0).unwrap(), 0.0);
        let cost = compute_cost(&b, 1.0);
        assert_relative_eq!(cost, 0.061_987_559_381_230_61, max_relative = 1e-12);

        let out = settle(&ledgers, &b, 1.0, 18.0, false).unwrap();
        assert_eq!(out.cost, vec![cost, cost]);
        assert_relative_eq!(out.adjusted_regret[1], 110.5 - com + cost, max_relative = 1e-12);
        assert_relative_eq!(out.controller_profit, 2.0 * cost - com, max_relative = 1e-12);
        let model = ArmModel::deterministic(vec![1.0, 0.5]).unwrap();
        let report = check_ir(&out, 18.0, &model, b.horizon());
        assert_eq!(report.verdicts, vec![true, true]);
        assert!(out.relative_regret[1] < -110.0);
    }

    #[test]
    fn excluding_own_shares() {
        let b = oracle_board();
        let ledgers = oracle_ledgers();
        assert_eq!(compute_cost_excluding_own(&ledgers[1], &b, 1.0), 0.0);
        assert_eq!(compute_cost_excluding_own(&ledgers[0], &b, 1.0), compute_cost(&b, 1.0));
    }

    #[test]
    fn zero_count_elimination_is_inconsistent() {
        let mut b = PublicBoard::new(2, Horizon::new(100).unwrap());
        b.force_eliminate(1);
        assert!(matches!(
            compute_compensation(&AgentLedger::new(2), &b, 1.0),
            Err(Error::Inconsistent(_))
        ));
    }

    #[test]
    fn ir_verdicts() {
        let model = ArmModel::bernoulli(vec![0.9, 0.1]).unwrap();
        let h = Horizon::new(1000).unwrap();
        let out = IncentiveOutcome {
            compensation: vec![0.0, 0.0],
            cost: vec![0.0, 0.5],
            adjusted_regret: vec![10.0, 10.5],
            relative_regret: vec![0.0, 0.5],
            controller_profit: 0.5,
        };
        assert_eq!(check_ir(&out, 10.0, &model, &h).verdicts, vec![true, false]);
    }

    #[test]
    fn horizon_conditions() {
        let model = ArmModel::bernoulli(vec![0.9, 0.8, 0.0]).unwrap();
        // N / (4 * 0.1^4) = 7500, T / ln^2 T at 1e5 is ~754.
        assert!(!ir_horizon_condition(&model, &Horizon::new(100_000).unwrap()));
        assert!(ir_horizon_condition(&model, &Horizon::new(10_000_000).unwrap()));
        let model = ArmModel::deterministic(vec![1.0, 0.5]).unwrap();
        // (T - 4) / ln T against 32 * 2 / 0.25 = 256.
        assert!(!bracket_horizon_condition(&model, &Horizon::new(1000).unwrap(), 1.0));
        assert!(bracket_horizon_condition(&model, &Horizon::new(10_000).unwrap(), 1.0));
    }

    #[test]
    fn brackets() {
        let h = Horizon::with_log(10, 1.0);
        let (_, upper) = delta_bracket(32.0, &h, 1.0).unwrap();
        assert_relative_eq!(upper, 1.0, max_relative = 1e-15);
        let (lower, _) = delta_bracket(radius_slack().powi(2), &h, 1.0).unwrap();
        assert_relative_eq!(lower, 1.0, max_relative = 1e-12);

        let h = Horizon::new(1000).unwrap();
        let (lower, upper) = delta_bracket(221.0, &h, 1.0).unwrap();
        assert_relative_eq!(lower, 0.033_497_298_975_268_12, max_relative = 1e-12);
        assert_relative_eq!(upper, 1.000_108_973_536_204, max_relative = 1e-12);
        assert!(lower < 0.5 && 0.5 < upper);
        assert!(delta_bracket(0.0, &h, 1.0).is_err());
    }

    #[test]
    fn pull_floor() {
        let h = Horizon::with_log(10, 4.0);
        assert_eq!(ucb_pull_floor(radius_slack(), &h).unwrap(), 1);
        let h = Horizon::new(1000).unwrap();
        assert_eq!(ucb_pull_floor(0.5, &h).unwrap(), 1);
        assert!(ucb_pull_floor(0.001, &h).unwrap() > ucb_pull_floor(0.01, &h).unwrap());
        assert!(ucb_pull_floor(0.0, &h).is_err());
        assert!(ucb_pull_floor(-0.1, &h).is_err());
    }
}
