use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{MlError, Result, RunRecord, SolverConfig};

/// Default near-best ratio: within 110% of the fastest time.
pub const DEFAULT_TIME_RATIO: f64 = 1.10;

/// A problem with its fastest eligible configuration and the near-best set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledInstance {
    pub problem_id: String,
    /// Matrix features plus the request fields of the problem.
    pub features: BTreeMap<String, f64>,
    pub best: SolverConfig,
    pub near_best: BTreeSet<SolverConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelReport {
    pub instances: Vec<LabeledInstance>,
    /// Problems without any eligible run, in order of first appearance.
    pub excluded: Vec<String>,
}

/// A run counts when it converged, its residual is within the tolerance (the
/// request's own, else `default_tolerance`) and it found enough eigenvalues.
pub fn is_eligible(run: &RunRecord, default_tolerance: f64) -> bool {
    let tolerance = run.request.tolerance.unwrap_or(default_tolerance);
    let residual_ok = run.residual.is_some_and(|r| r <= tolerance);
    let count_ok = match (run.request.n_eigenvalues, run.converged_count) {
        (Some(wanted), Some(got)) => got >= wanted,
        (Some(_), None) => false,
        (None, _) => true,
    };
    run.converged && residual_ok && count_ok && run.time_seconds > 0.0
}

/// Labels every problem: `best` is the fastest eligible configuration (ties go
/// to the smaller label) and `near_best` holds every eligible configuration
/// faster than `time_ratio` times the best time, plus those tied with it.
pub fn derive_labels(runs: &[RunRecord], default_tolerance: f64, time_ratio: f64) -> Result<LabelReport> {
    if !(time_ratio.is_finite() && time_ratio >= 1.0) {
        return Err(MlError::InvalidRatio(time_ratio));
    }
    let mut order: Vec<&str> = Vec::new();
    let mut groups: BTreeMap<&str, Vec<&RunRecord>> = BTreeMap::new();
    for run in runs {
        let g = groups.entry(&run.problem_id).or_default();
        if g.is_empty() {
            order.push(&run.problem_id);
        }
        g.push(run);
    }

    let mut instances = Vec::new();
    let mut excluded = Vec::new();
    for id in order {
        let group = &groups[id];
        // fastest eligible time per configuration
        let mut times: BTreeMap<&SolverConfig, f64> = BTreeMap::new();
        for run in group.iter().filter(|r| is_eligible(r, default_tolerance)) {
            let t = times.entry(&run.config).or_insert(f64::INFINITY);
            *t = t.min(run.time_seconds);
        }
        let Some((best, t_best)) = times.iter().fold(None, |acc: Option<(&SolverConfig, f64)>, (c, &t)| match acc {
            Some((_, bt)) if bt <= t => acc,
            _ => Some((c, t)),
        }) else {
            excluded.push(id.to_string());
            continue;
        };
        let near_best =
            times.iter().filter(|(_, &t)| t < time_ratio * t_best || t == t_best).map(|(c, _)| (*c).clone()).collect();
        let mut features = group[0].features.clone();
        features.extend(group[0].request.as_features());
        instances.push(LabeledInstance { problem_id: id.to_string(), features, best: best.clone(), near_best });
    }
    Ok(LabelReport { instances, excluded })
}
