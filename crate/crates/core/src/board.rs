//! The public board: statistics built only from broadcast arm-reward pairs,
//! the confidence-interval elimination rule and the balance level.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Time horizon `T` together with the `ln T` used by every confidence
/// radius. Natural log throughout.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Horizon {
    steps: u64,
    ln: f64,
}

impl Horizon {
    pub fn new(steps: u64) -> Result<Self> {
        if steps < 2 {
            return Err(Error::InvalidConfig(format!(
                "horizon must be at least 2, got {steps}"
            )));
        }
        Ok(Self {
            steps,
            ln: (steps as f64).ln(),
        })
    }

    /// A horizon whose logarithm is pinned to `ln` instead of `ln(steps)`.
    /// Used to check closed-form arithmetic.
    pub fn with_log(steps: u64, ln: f64) -> Self {
        Self { steps, ln }
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn ln(&self) -> f64 {
        self.ln
    }
}

/// `sqrt(2 ln T / count)`, or `+inf` for an arm that was never broadcast.
pub fn confidence_radius(count: u64, horizon: &Horizon) -> f64 {
    if count == 0 {
        f64::INFINITY
    } else {
        (2.0 * horizon.ln / count as f64).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PublicBoard {
    horizon: Horizon,
    counts: Vec<u64>,
    sums: Vec<f64>,
    radius: Vec<f64>,
    active: Vec<bool>,
    active_arms: Vec<usize>,
    // Elimination only needs to run again after a new broadcast.
    stale: bool,
}

impl PublicBoard {
    pub fn new(n_arms: usize, horizon: Horizon) -> Self {
        Self {
            horizon,
            counts: vec![0; n_arms],
            sums: vec![0.0; n_arms],
            radius: vec![f64::INFINITY; n_arms],
            active: vec![true; n_arms],
            active_arms: (0..n_arms).collect(),
            stale: false,
        }
    }

    pub fn horizon(&self) -> &Horizon {
        &self.horizon
    }

    pub fn n_arms(&self) -> usize {
        self.counts.len()
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn count(&self, arm: usize) -> u64 {
        self.counts[arm]
    }

    pub fn sum(&self, arm: usize) -> f64 {
        self.sums[arm]
    }

    /// Empirical mean of the broadcast rewards, `None` before the first one.
    pub fn mean(&self, arm: usize) -> Option<f64> {
        match self.counts[arm] {
            0 => None,
            n => Some(self.sums[arm] / n as f64),
        }
    }

    pub fn radius(&self, arm: usize) -> f64 {
        self.radius[arm]
    }

    pub fn is_active(&self, arm: usize) -> bool {
        self.active[arm]
    }

    /// Active arms in increasing index order.
    pub fn active_arms(&self) -> &[usize] {
        &self.active_arms
    }

    pub fn total_broadcasts(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn record_broadcast(&mut self, arm: usize, reward: f64) -> Result<()> {
        let n_arms = self.n_arms();
        if arm >= n_arms {
            return Err(Error::ArmOutOfRange { arm, n_arms });
        }
        if !self.active[arm] {
            return Err(Error::EliminatedBroadcast(arm));
        }
        self.counts[arm] += 1;
        self.sums[arm] += reward;
        self.radius[arm] = confidence_radius(self.counts[arm], &self.horizon);
        self.stale = true;
        Ok(())
    }

    /// Removes every active arm whose upper confidence bound does not exceed
    /// the largest lower confidence bound among active arms. Returns the
    /// newly eliminated arms in index order.
    ///
    /// Unsampled arms have bounds `(-inf, +inf)`: they neither eliminate nor
    /// get eliminated. The arm holding the largest lower bound always
    /// survives since its own upper bound is strictly above it.
    pub fn run_elimination(&mut self) -> Vec<usize> {
        if !self.stale {
            return Vec::new();
        }
        self.stale = false;
        let best_lower = self
            .active_arms
            .iter()
            .filter(|&&j| self.counts[j] > 0)
            .map(|&j| self.sums[j] / self.counts[j] as f64 - self.radius[j])
            .fold(f64::NEG_INFINITY, f64::max);
        if best_lower == f64::NEG_INFINITY {
            return Vec::new();
        }
        let mut eliminated = Vec::new();
        for &i in &self.active_arms {
            let n = self.counts[i];
            if n > 0 && self.sums[i] / n as f64 + self.radius[i] <= best_lower {
                eliminated.push(i);
            }
        }
        if !eliminated.is_empty() {
            for &i in &eliminated {
                self.active[i] = false;
            }
            let active = &self.active;
            self.active_arms.retain(|&i| active[i]);
        }
        eliminated
    }

    pub fn min_active_count(&self) -> u64 {
        self.active_arms
            .iter()
            .map(|&i| self.counts[i])
            .min()
            .unwrap_or(0)
    }

    /// Least-broadcast active arm among `shared_arms` (lowest index on
    /// ties), with its count.
    pub fn least_broadcast_shared(&self, shared_arms: &[usize]) -> Option<(usize, u64)> {
        let mut best: Option<(usize, u64)> = None;
        for &i in shared_arms {
            if i < self.active.len() && self.active[i] {
                let n = self.counts[i];
                if best.is_none_or(|(_, b)| n < b) {
                    best = Some((i, n));
                }
            }
        }
        best
    }

    /// Ratio of the smallest count among the agent's active shared arms to
    /// the smallest count among all active arms. `0/0` is 1 and `x/0` is
    /// `+inf`.
    pub fn balance_level(&self, shared_arms: &[usize]) -> Result<f64> {
        let (_, own) = self
            .least_broadcast_shared(shared_arms)
            .ok_or(Error::EmptySharedActiveSet)?;
        Ok(ratio(own, self.min_active_count()))
    }

    #[cfg(test)]
    pub(crate) fn force_eliminate(&mut self, arm: usize) {
        self.active[arm] = false;
        self.active_arms.retain(|&i| i != arm);
    }

    pub fn snapshot(&self) -> BoardSnapshot {
        BoardSnapshot {
            counts: self.counts.clone(),
            means: (0..self.n_arms()).map(|i| self.mean(i)).collect(),
            active: self.active_arms.clone(),
        }
    }
}

pub(crate) fn ratio(num: u64, den: u64) -> f64 {
    match (num, den) {
        (0, 0) => 1.0,
        (_, 0) => f64::INFINITY,
        (n, d) => n as f64 / d as f64,
    }
}

/// Serializable view of a board.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoardSnapshot {
    pub counts: Vec<u64>,
    pub means: Vec<Option<f64>>,
    pub active: Vec<usize>,
}
