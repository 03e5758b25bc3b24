//! Workloads shared by the benchmarks.

use lsimab_core::{make_balanced_instance, make_imbalanced_instance, staircase_means, ArmModel, RunConfig};

fn model() -> ArmModel {
    ArmModel::bernoulli(staircase_means(10)).unwrap()
}

/// Balanced sharing over ten staircase arms.
pub fn balanced(agents: usize, horizon: u64) -> RunConfig {
    let sharing = make_balanced_instance(10, agents).unwrap();
    RunConfig::new(model(), sharing, horizon).with_seed(7)
}

/// Two agents share the two best arms; the rest cover one arm each.
pub fn imbalanced(agents: usize, horizon: u64) -> RunConfig {
    let sharing = make_imbalanced_instance(10, agents).unwrap();
    RunConfig::new(model(), sharing, horizon).with_seed(7)
}
