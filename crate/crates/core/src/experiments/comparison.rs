//! Iterations-to-optimal for trajectory-wide versus start-state-only updates.

use std::fmt::Write as _;

use rayon::prelude::*;

use super::ExperimentError;
use crate::mdp::{InitialDistribution, Mdp};
use crate::opi::{run_opi, OpiConfig, UpdateMode};
use crate::solvers::policy_iteration;

/// Per-trial iteration cap used when none is configured.
pub const DEFAULT_ITERATION_CAP: usize = 1_000_000;

/// Number of histogram bins.
pub const HISTOGRAM_BINS: usize = 30;

pub const MODES: [UpdateMode; 2] = [UpdateMode::TrajectoryUpdate, UpdateMode::FirstStateOnly];

#[derive(Debug, Clone, PartialEq)]
pub struct TrialOutcome {
    pub trial: usize,
    pub mode: UpdateMode,
    pub seed: u64,
    /// The cap when `censored`.
    pub iterations_to_optimal: usize,
    /// The greedy policy was still not optimal at the cap.
    pub censored: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModeSummary {
    pub mode: UpdateMode,
    pub trials: usize,
    pub censored: usize,
    /// Censored trials count at the cap, so this is a lower bound when any
    /// trial is censored.
    pub mean: f64,
    pub median: f64,
    pub q10: f64,
    pub q25: f64,
    pub q75: f64,
    pub q90: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HistogramBin {
    pub mode: UpdateMode,
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonResult {
    /// Configuration shared by all trials (seed is the base seed).
    pub config: OpiConfig,
    pub trials: usize,
    /// Ordered by trial, then by mode.
    pub outcomes: Vec<TrialOutcome>,
}

/// Linear interpolation between closest ranks.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

impl ComparisonResult {
    pub const CSV_HEADER: &'static str = "trial,mode,seed,iterations_to_optimal,censored";
    pub const HISTOGRAM_HEADER: &'static str = "mode,bin_lo,bin_hi,count";

    pub fn iterations(&self, mode: UpdateMode) -> Vec<usize> {
        self.outcomes
            .iter()
            .filter(|o| o.mode == mode)
            .map(|o| o.iterations_to_optimal)
            .collect()
    }

    pub fn summary(&self, mode: UpdateMode) -> ModeSummary {
        let mut xs: Vec<f64> = self.iterations(mode).iter().map(|&x| x as f64).collect();
        xs.sort_by(f64::total_cmp);
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        ModeSummary {
            mode,
            trials: xs.len(),
            censored: self
                .outcomes
                .iter()
                .filter(|o| o.mode == mode && o.censored)
                .count(),
            mean,
            median: quantile(&xs, 0.5),
            q10: quantile(&xs, 0.1),
            q25: quantile(&xs, 0.25),
            q75: quantile(&xs, 0.75),
            q90: quantile(&xs, 0.9),
        }
    }

    /// `mean(first-state) / mean(trajectory)`.
    pub fn mean_ratio(&self) -> f64 {
        self.summary(UpdateMode::FirstStateOnly).mean / self.summary(UpdateMode::TrajectoryUpdate).mean
    }

    pub fn to_csv(&self) -> String {
        let mut out = format!("{}\n", Self::CSV_HEADER);
        for o in &self.outcomes {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                o.trial,
                o.mode.label(),
                o.seed,
                o.iterations_to_optimal,
                o.censored
            );
        }
        out
    }

    /// Equal-width bins over the range pooled across both modes.
    pub fn histogram(&self, bins: usize) -> Vec<HistogramBin> {
        let all: Vec<f64> = self.outcomes.iter().map(|o| o.iterations_to_optimal as f64).collect();
        let lo = all.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = all.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let (lo, width) = if all.is_empty() {
            (0.0, 1.0)
        } else if hi > lo {
            (lo, (hi - lo) / bins as f64)
        } else {
            (lo, 1.0)
        };
        let mut out = Vec::with_capacity(2 * bins);
        for mode in MODES {
            let mut counts = vec![0usize; bins];
            for x in self.iterations(mode) {
                let b = (((x as f64 - lo) / width) as usize).min(bins - 1);
                counts[b] += 1;
            }
            for (b, count) in counts.into_iter().enumerate() {
                out.push(HistogramBin {
                    mode,
                    lo: lo + b as f64 * width,
                    hi: lo + (b + 1) as f64 * width,
                    count,
                });
            }
        }
        out
    }

    pub fn histogram_csv(&self) -> String {
        let mut out = format!("{}\n", Self::HISTOGRAM_HEADER);
        for b in self.histogram(HISTOGRAM_BINS) {
            let _ = writeln!(out, "{},{},{},{}", b.mode.label(), b.lo, b.hi, b.count);
        }
        out
    }

    /// One line per mode.
    pub fn summary_text(&self) -> String {
        let mut out = String::new();
        for mode in MODES {
            let s = self.summary(mode);
            let _ = writeln!(
                out,
                "{:<12} trials={} censored={} mean={:.1} median={:.1} q10={:.1} q25={:.1} q75={:.1} q90={:.1}",
                mode.label(),
                s.trials,
                s.censored,
                s.mean,
                s.median,
                s.q10,
                s.q25,
                s.q75,
                s.q90
            );
        }
        let _ = writeln!(out, "mean ratio first-state/trajectory = {:.3}", self.mean_ratio());
        out
    }
}

/// Worker count from `OPI_THREADS`, if set to a positive integer.
pub fn thread_limit() -> Option<usize> {
    std::env::var("OPI_THREADS")
        .ok()
        .and_then(|v| v.trim().parse().ok())
        .filter(|&n: &usize| n > 0)
}

/// Runs `trials` paired trials of both update modes until the greedy policy
/// is optimal or `base.max_iterations` is reached. Trial `k` uses seed
/// `base.seed + k` for both modes, on stream 0 (trajectory) or 1 (first
/// state). Results do not depend on the number of worker threads.
pub fn run_comparison(
    mdp: &Mdp,
    p: &InitialDistribution,
    trials: usize,
    base: &OpiConfig,
) -> Result<ComparisonResult, ExperimentError> {
    base.validate()?;
    let oracle = policy_iteration(mdp)?;
    let run_trial = |job: usize| {
        let trial = job / 2;
        let mode_index = job % 2;
        let config = OpiConfig {
            update_mode: MODES[mode_index],
            seed: base.seed.wrapping_add(trial as u64),
            stream: mode_index as u64,
            stop_at_optimal: true,
            history_stride: None,
            ..base.clone()
        };
        let r = run_opi(mdp, p, &config, &oracle)?;
        Ok(TrialOutcome {
            trial,
            mode: config.update_mode,
            seed: config.seed,
            iterations_to_optimal: r.iterations_to_optimal.unwrap_or(r.iterations),
            censored: r.iterations_to_optimal.is_none(),
        })
    };
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = thread_limit() {
        pool = pool.num_threads(n);
    }
    let pool = pool
        .build()
        .map_err(|e| ExperimentError::Runtime(format!("thread pool: {e}")))?;
    let outcomes = pool.install(|| {
        (0..2 * trials)
            .into_par_iter()
            .map(run_trial)
            .collect::<Result<Vec<_>, ExperimentError>>()
    })?;
    Ok(ComparisonResult {
        config: base.clone(),
        trials,
        outcomes,
    })
}
