//! Replication orchestration and CSV output for experiment presets.

use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use lsimab_core::incentive::{cost_ceiling, delta_bracket};
use lsimab_core::sim::write_trace;
use lsimab_core::{replicate_with, simulate, Horizon, RunConfig, RunResult};

use crate::error::{HarnessError, Result};
use crate::preset::{ExperimentPreset, GridPoint};

pub const SUMMARY_COLUMNS: [&str; 21] = [
    "preset",
    "M",
    "N",
    "T",
    "B",
    "seed_base",
    "reps",
    "overall_regret_mean",
    "overall_regret_se",
    "avg_individual_regret_mean",
    "max_raw_individual_regret_mean",
    "max_ir_adjusted_regret_mean",
    "ucb_regret_mean",
    "total_compensation_mean",
    "total_cost_mean",
    "controller_profit_mean",
    "shared_pairs_mean",
    "good_event_rate",
    "min_count_invariant_rate",
    "exploration_caps_rate",
    "theorem1_bound_value",
];

pub const RUN_COLUMNS: [&str; 20] = [
    "preset",
    "M",
    "N",
    "T",
    "B",
    "seed",
    "overall_regret",
    "avg_individual_regret",
    "max_raw_individual_regret",
    "max_ir_adjusted_regret",
    "ucb_regret",
    "total_compensation",
    "total_cost",
    "controller_profit",
    "shared_pairs",
    "good_event",
    "min_count_invariant",
    "exploration_caps",
    "all_suboptimal_eliminated",
    "ir_all_agents",
];

/// Per-replication metrics, small enough to keep for every run.
#[derive(Debug, Clone, PartialEq)]
pub struct RepSummary {
    pub seed: u64,
    pub overall_regret: f64,
    pub avg_individual_regret: f64,
    pub max_raw_individual_regret: f64,
    pub max_ir_adjusted_regret: f64,
    pub ucb_regret: f64,
    pub total_compensation: f64,
    pub total_cost: f64,
    pub controller_profit: f64,
    pub shared_pairs: u64,
    pub good_event: bool,
    pub min_count_invariant: bool,
    pub exploration_caps: bool,
    pub optimal_arms_survived: bool,
    pub theorem1_bound: f64,
    pub all_suboptimal_eliminated: bool,
    /// Every agent's incentive-adjusted regret is at most the baseline's.
    pub ir_all_agents: bool,
    /// Gap brackets of eliminated arms contain the true gaps. Only evaluated
    /// on good-event runs that eliminated every sub-optimal arm.
    pub bracket_held: Option<bool>,
    /// Regret on eliminated arms never exceeds compensation (same runs).
    pub compensation_dominates: Option<bool>,
    /// Every cost stays below the baseline regret floor (same runs).
    pub cost_ceiling_held: Option<bool>,
}

impl RepSummary {
    pub fn from_run(run: &RunResult, config: &RunConfig) -> Self {
        let model = &config.model;
        let horizon = Horizon::new(config.horizon).expect("validated before the run");
        let diag = run.diagnostics.clone().unwrap_or(lsimab_core::Diagnostics {
            good_event_held: false,
            min_count_invariant_held: false,
            exploration_caps_held: false,
            optimal_arms_survived: false,
            theorem1_bound_value: f64::NAN,
        });
        let all_eliminated = run.all_suboptimal_eliminated(model);
        let settled = diag.good_event_held && all_eliminated;
        let gaps = model.gaps();

        let bracket_held = settled.then(|| {
            run.eliminated_arms().all(|i| {
                let n = run.final_board.counts[i] as f64;
                delta_bracket(n, &horizon, config.threshold)
                    .map(|(lo, up)| lo <= gaps[i] && gaps[i] <= up)
                    .unwrap_or(false)
            })
        });
        let compensation_dominates = settled.then(|| {
            run.ledgers
                .iter()
                .zip(&run.incentive.compensation)
                .all(|(l, &com)| l.regret_on(run.eliminated_arms(), &gaps) <= com)
        });
        let cost_ceiling_held = settled.then(|| {
            let ceiling = cost_ceiling(model, &horizon);
            run.incentive.cost.iter().all(|&c| c <= ceiling)
        });

        Self {
            seed: run.seed,
            overall_regret: run.overall_regret,
            avg_individual_regret: run.avg_individual_regret(),
            max_raw_individual_regret: run.max_raw_individual_regret(),
            max_ir_adjusted_regret: run.max_adjusted_regret(),
            ucb_regret: run.ucb.regret,
            total_compensation: run.incentive.total_compensation(),
            total_cost: run.incentive.total_cost(),
            controller_profit: run.incentive.controller_profit,
            shared_pairs: run.shared_pairs_total,
            good_event: diag.good_event_held,
            min_count_invariant: diag.min_count_invariant_held,
            exploration_caps: diag.exploration_caps_held,
            optimal_arms_survived: diag.optimal_arms_survived,
            theorem1_bound: diag.theorem1_bound_value,
            all_suboptimal_eliminated: all_eliminated,
            ir_all_agents: run.ir.all_rational(),
            bracket_held,
            compensation_dominates,
            cost_ceiling_held,
        }
    }
}

/// One summary CSV row.
#[derive(Debug, Clone, PartialEq)]
pub struct PointSummary {
    pub preset: String,
    pub agents: usize,
    pub arms: usize,
    pub horizon: u64,
    pub threshold: f64,
    pub seed_base: u64,
    pub reps: usize,
    pub overall_regret_mean: f64,
    pub overall_regret_se: f64,
    pub avg_individual_regret_mean: f64,
    pub max_raw_individual_regret_mean: f64,
    pub max_ir_adjusted_regret_mean: f64,
    pub ucb_regret_mean: f64,
    pub total_compensation_mean: f64,
    pub total_cost_mean: f64,
    pub controller_profit_mean: f64,
    pub shared_pairs_mean: f64,
    pub good_event_rate: f64,
    pub min_count_invariant_rate: f64,
    pub exploration_caps_rate: f64,
    pub theorem1_bound_value: f64,
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (n, sum) = xs.fold((0usize, 0.0), |(n, s), x| (n + 1, s + x));
    sum / n as f64
}

fn standard_error(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs.iter().copied());
    let var = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64;
    (var / xs.len() as f64).sqrt()
}

fn rate(reps: &[RepSummary], flag: impl Fn(&RepSummary) -> bool) -> f64 {
    reps.iter().filter(|r| flag(r)).count() as f64 / reps.len() as f64
}

pub fn aggregate(preset: &ExperimentPreset, point: GridPoint, reps: &[RepSummary]) -> PointSummary {
    let of = |f: fn(&RepSummary) -> f64| mean(reps.iter().map(f));
    let overall: Vec<f64> = reps.iter().map(|r| r.overall_regret).collect();
    PointSummary {
        preset: preset.name.clone(),
        agents: point.agents,
        arms: preset.n_arms(),
        horizon: point.horizon,
        threshold: preset.threshold,
        seed_base: preset.base_seed,
        reps: reps.len(),
        overall_regret_mean: of(|r| r.overall_regret),
        overall_regret_se: standard_error(&overall),
        avg_individual_regret_mean: of(|r| r.avg_individual_regret),
        max_raw_individual_regret_mean: of(|r| r.max_raw_individual_regret),
        max_ir_adjusted_regret_mean: of(|r| r.max_ir_adjusted_regret),
        ucb_regret_mean: of(|r| r.ucb_regret),
        total_compensation_mean: of(|r| r.total_compensation),
        total_cost_mean: of(|r| r.total_cost),
        controller_profit_mean: of(|r| r.controller_profit),
        shared_pairs_mean: of(|r| r.shared_pairs as f64),
        good_event_rate: rate(reps, |r| r.good_event),
        min_count_invariant_rate: rate(reps, |r| r.min_count_invariant),
        exploration_caps_rate: rate(reps, |r| r.exploration_caps),
        theorem1_bound_value: of(|r| r.theorem1_bound),
    }
}

/// Runs every replication of one grid point.
pub fn run_point(preset: &ExperimentPreset, point: GridPoint) -> Result<Vec<RepSummary>> {
    let reps = replicate_with(preset.replications, preset.base_seed, |seed| {
        let config = preset.run_config(point, seed)?;
        let run = simulate(&config)?;
        Ok(RepSummary::from_run(&run, &config))
    })?;
    Ok(reps)
}

/// Everything one preset run produced.
#[derive(Debug, Clone)]
pub struct PresetOutput {
    pub summary_csv: PathBuf,
    pub runs_csv: PathBuf,
    pub points: Vec<(PointSummary, Vec<RepSummary>)>,
}

/// Runs a preset and writes `<name>.csv` (one row per grid point) and
/// `<name>_runs.csv` (one row per replication) into `output_dir`. Returns the
/// summary CSV path.
pub fn run_preset(preset: &ExperimentPreset, output_dir: &Path) -> Result<PathBuf> {
    Ok(run_preset_with(preset, output_dir, |_| {})?.summary_csv)
}

pub fn run_preset_with(
    preset: &ExperimentPreset,
    output_dir: &Path,
    mut progress: impl FnMut(&PointSummary),
) -> Result<PresetOutput> {
    preset.validate()?;
    fs::create_dir_all(output_dir).map_err(|e| HarnessError::io(output_dir, e))?;
    let mut points = Vec::new();
    for point in preset.grid() {
        if preset.trace {
            let path = output_dir.join(format!(
                "{}_M{}_T{}.trace.jsonl",
                preset.name, point.agents, point.horizon
            ));
            let file = fs::File::create(&path).map_err(|e| HarnessError::io(&path, e))?;
            write_trace(&preset.run_config(point, preset.base_seed)?, BufWriter::new(file))?;
        }
        let reps = run_point(preset, point)?;
        let summary = aggregate(preset, point, &reps);
        progress(&summary);
        points.push((summary, reps));
    }
    let summary_csv = output_dir.join(format!("{}.csv", preset.name));
    let runs_csv = output_dir.join(format!("{}_runs.csv", preset.name));
    write_summary_csv(&summary_csv, points.iter().map(|(s, _)| s))?;
    write_runs_csv(&runs_csv, preset, &points)?;
    Ok(PresetOutput {
        summary_csv,
        runs_csv,
        points,
    })
}

/// Formats a float with 9 significant digits, independent of locale.
pub fn fmt_num(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return if x.is_nan() {
            "nan".into()
        } else if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    let sci = format!("{x:.8e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent marker");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..9).contains(&exp) {
        let decimals = (8 - exp).max(0) as usize;
        let fixed = format!("{x:.decimals$}");
        if fixed.contains('.') {
            fixed.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            fixed
        }
    } else {
        let mantissa = if mantissa.contains('.') {
            mantissa.trim_end_matches('0').trim_end_matches('.')
        } else {
            mantissa
        };
        format!("{mantissa}e{exp}")
    }
}

fn flag(b: bool) -> String {
    u8::from(b).to_string()
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    let file = fs::File::create(path).map_err(|e| HarnessError::io(path, e))?;
    Ok(csv::Writer::from_writer(file))
}

pub fn summary_record(s: &PointSummary) -> Vec<String> {
    vec![
        s.preset.clone(),
        s.agents.to_string(),
        s.arms.to_string(),
        s.horizon.to_string(),
        fmt_num(s.threshold),
        s.seed_base.to_string(),
        s.reps.to_string(),
        fmt_num(s.overall_regret_mean),
        fmt_num(s.overall_regret_se),
        fmt_num(s.avg_individual_regret_mean),
        fmt_num(s.max_raw_individual_regret_mean),
        fmt_num(s.max_ir_adjusted_regret_mean),
        fmt_num(s.ucb_regret_mean),
        fmt_num(s.total_compensation_mean),
        fmt_num(s.total_cost_mean),
        fmt_num(s.controller_profit_mean),
        fmt_num(s.shared_pairs_mean),
        fmt_num(s.good_event_rate),
        fmt_num(s.min_count_invariant_rate),
        fmt_num(s.exploration_caps_rate),
        fmt_num(s.theorem1_bound_value),
    ]
}

pub fn write_summary_csv<'a>(
    path: &Path,
    rows: impl IntoIterator<Item = &'a PointSummary>,
) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(SUMMARY_COLUMNS)?;
    for row in rows {
        w.write_record(summary_record(row))?;
    }
    w.flush().map_err(|e| HarnessError::io(path, e))
}

fn write_runs_csv(
    path: &Path,
    preset: &ExperimentPreset,
    points: &[(PointSummary, Vec<RepSummary>)],
) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(RUN_COLUMNS)?;
    for (p, reps) in points {
        for r in reps {
            w.write_record([
                preset.name.clone(),
                p.agents.to_string(),
                p.arms.to_string(),
                p.horizon.to_string(),
                fmt_num(p.threshold),
                r.seed.to_string(),
                fmt_num(r.overall_regret),
                fmt_num(r.avg_individual_regret),
                fmt_num(r.max_raw_individual_regret),
                fmt_num(r.max_ir_adjusted_regret),
                fmt_num(r.ucb_regret),
                fmt_num(r.total_compensation),
                fmt_num(r.total_cost),
                fmt_num(r.controller_profit),
                r.shared_pairs.to_string(),
                flag(r.good_event),
                flag(r.min_count_invariant),
                flag(r.exploration_caps),
                flag(r.all_suboptimal_eliminated),
                flag(r.ir_all_agents),
            ])?;
        }
    }
    w.flush().map_err(|e| HarnessError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nine_significant_digits() {
        assert_eq!(fmt_num(110.5), "110.5");
        assert_eq!(fmt_num(1.0), "1");
        assert_eq!(fmt_num(0.0), "0");
        assert_eq!(fmt_num(221.0240831515011), "221.024083");
        assert_eq!(fmt_num(-4608.900562425029), "-4608.90056");
        assert_eq!(fmt_num(0.061987559381230), "0.0619875594");
        assert_eq!(fmt_num(123456789012.0), "1.23456789e11");
        assert_eq!(fmt_num(9.9999999996), "10");
        assert_eq!(fmt_num(2.5e-7), "2.5e-7");
        assert_eq!(fmt_num(f64::INFINITY), "inf");
    }

    #[test]
    fn standard_error_of_constant_is_zero() {
        assert_eq!(standard_error(&[3.0, 3.0, 3.0]), 0.0);
        assert_eq!(standard_error(&[3.0]), 0.0);
        // sd of {1, 3} is sqrt(2); se = sqrt(2) / sqrt(2) = 1.
        assert!((standard_error(&[1.0, 3.0]) - 1.0).abs() < 1e-15);
    }
}
