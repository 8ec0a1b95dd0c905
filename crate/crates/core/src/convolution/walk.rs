//! Monte Carlo simulation of the left-invariant walk X_j = x xi_1 ... xi_j,
//! with displacement profiles measured in the word metric.

use crate::error::{Error, Result};
use crate::group::{LengthStatus, WordMetric};
use crate::measures::Sampler;
use crate::scalar::Scalar;
use rayon::prelude::*;

/// Per-trial outcome. Displacements are censored (None) when the walk left
/// the enumerated metric range; censored values are never fabricated.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TrialStat {
    pub sup_displacement: Option<u32>,
    pub end_displacement: Option<u32>,
}

#[derive(Clone, Debug)]
pub struct WalkStats {
    pub trials: u64,
    pub horizon: u64,
    pub seed: u64,
    pub per_trial: Vec<TrialStat>,
}

impl WalkStats {
    pub fn censored_count(&self) -> u64 {
        self.per_trial
            .iter()
            .filter(|t| t.sup_displacement.is_none() || t.end_displacement.is_none())
            .count() as u64
    }

    pub fn mean_end_displacement(&self) -> Option<f64> {
        let vals: Vec<f64> = self
            .per_trial
            .iter()
            .filter_map(|t| t.end_displacement.map(|v| v as f64))
            .collect();
        if vals.is_empty() {
            None
        } else {
            Some(vals.iter().sum::<f64>() / vals.len() as f64)
        }
    }

    /// CSV rows: trial, sup_disp, end_disp (censored cells are empty).
    pub fn to_csv(&self) -> String {
        let mut out = String::from("trial,sup_disp,end_disp\n");
        for (i, t) in self.per_trial.iter().enumerate() {
            let s = t
                .sup_displacement
                .map(|v| v.to_string())
                .unwrap_or_default();
            let e = t
                .end_displacement
                .map(|v| v.to_string())
                .unwrap_or_default();
            out.push_str(&format!("{i},{s},{e}\n"));
        }
        out
    }
}

/// Independent trials of the walk driven by the sampler's measure. Trials
/// are seeded by index, so results are bit-identical for any worker count.
pub fn simulate_walk(
    sampler: &Sampler,
    metric: &WordMetric,
    horizon: u64,
    trials: u64,
) -> Result<WalkStats> {
    if trials < 1 {
        return Err(Error::usage("need at least one trial"));
    }
    let group = metric.descriptor().clone();
    let per_trial: Vec<TrialStat> = (0..trials)
        .into_par_iter()
        .map(|trial| {
            let mut rng = sampler.rng_for(trial);
            let mut x = group.identity();
            let mut sup: Option<u32> = Some(0);
            let mut last: Option<u32> = Some(0);
            for _ in 0..horizon {
                let step = sampler.draw(&mut rng);
                x = group.mul_unchecked(&x, &step);
                match metric.word_length(&x) {
                    LengthStatus::Reached(l) => {
                        last = Some(l);
                        sup = sup.map(|s| s.max(l));
                    }
                    LengthStatus::Unreached => {
                        last = None;
                        sup = None;
                    }
                }
            }
            TrialStat {
                sup_displacement: sup,
                end_displacement: last,
            }
        })
        .collect();
    Ok(WalkStats {
        trials,
        horizon,
        seed: sampler.seed(),
        per_trial,
    })
}

/// Estimated exceedance probability with a binomial confidence interval.
#[derive(Clone, Copy, Debug)]
pub struct ExitTimeEstimate {
    pub threshold: f64,
    pub exceed_count: u64,
    pub censored_as_exceed: u64,
    pub estimate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

/// Fraction of trials with sup_{k<=n} |X_k| >= gamma n^{1/alpha}. Censored
/// trials count as exceedances (the walk left the enumerated range).
pub fn exit_time_stats(stats: &WalkStats, gamma: f64, alpha: f64) -> Result<ExitTimeEstimate> {
    if stats.per_trial.is_empty() {
        return Err(Error::usage("empty walk statistics"));
    }
    let threshold = gamma * (stats.horizon as f64).powf(1.0 / alpha);
    let mut exceed = 0u64;
    let mut censored = 0u64;
    for t in &stats.per_trial {
        match t.sup_displacement {
            Some(s) => {
                if s as f64 >= threshold {
                    exceed += 1;
                }
            }
            None => {
                censored += 1;
                exceed += 1;
            }
        }
    }
    let n = stats.per_trial.len() as f64;
    let p = exceed as f64 / n;
    // normal-approximation 95% interval
    let half = 1.96 * (p * (1.0 - p) / n).sqrt();
    Ok(ExitTimeEstimate {
        threshold,
        exceed_count: exceed,
        censored_as_exceed: censored,
        estimate: p,
        ci_low: (p - half).max(0.0),
        ci_high: (p + half).min(1.0),
    })
}

/// Convenience: exceedance estimates over a grid of gamma values; the
/// estimate is non-increasing in gamma by construction.
pub fn exit_time_profile<F: Scalar>(
    stats: &WalkStats,
    gammas: &[F],
    alpha: f64,
) -> Result<Vec<ExitTimeEstimate>> {
    gammas
        .iter()
        .map(|g| exit_time_stats(stats, g.as_f64(), alpha))
        .collect()
}
