//! Simulator and analysis toolkit for multi-agent multi-armed bandits with
//! limited information sharing.
//!
//! Agents pull homogeneous arms in sequence; each agent only broadcasts
//! rewards of the arms they are willing to share. [`sim::simulate`] runs the
//! Balanced-ETC protocol over such a population alongside a single-agent
//! 2-UCB baseline, then settles the end-of-game compensation and cost of
//! every agent.

pub mod board;
pub mod env;
pub mod error;
pub mod incentive;
pub mod policy;
pub mod sim;

pub use board::{confidence_radius, BoardSnapshot, Horizon, PublicBoard};
pub use env::{
    make_balanced_instance, make_imbalanced_instance, make_paired_instance, make_random_instance,
    sample_reward, staircase_means, AgentProfile, ArmModel, RewardKind, SharingStructure,
};
pub use error::{Error, Result};
pub use incentive::{
    check_ir, compute_compensation, compute_cost, delta_bracket, ucb_pull_floor, AgentLedger,
    IncentiveOutcome, IrReport,
};
pub use policy::{
    balanced_etc_decide, run_ucb_baseline, ucb_decide, ActionDecision, ActionKind, UcbRun,
    UcbState,
};
pub use sim::{
    collect_diagnostics, replicate, replicate_with, simulate, simulate_traced, Diagnostics,
    Elimination, RunConfig, RunResult, TraceRecord,
};
