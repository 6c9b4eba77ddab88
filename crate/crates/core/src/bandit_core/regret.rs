use super::learner::RoundOutcome;
use crate::{Error, Result};

/// Cumulative `sum (learner cost - oracle cost)`.
pub fn regret(learner: &[f64], oracle: &[f64]) -> Result<Vec<f64>> {
    if learner.len() != oracle.len() {
        return Err(Error::Dimension {
            expected: learner.len(),
            actual: oracle.len(),
        });
    }
    Ok(learner
        .iter()
        .zip(oracle)
        .scan(0.0, |acc, (l, o)| {
            *acc += l - o;
            Some(*acc)
        })
        .collect())
}

fn column(trace: &[RoundOutcome], pick: impl Fn(&RoundOutcome) -> Option<f64>, name: &str) -> Result<Vec<f64>> {
    trace
        .iter()
        .map(|o| pick(o).ok_or_else(|| Error::invalid(format!("slot {} has no {name}; run in evaluation mode", o.slot))))
        .collect()
}

/// Regret against the best policy of the current set, round by round.
pub fn trace_regret(trace: &[RoundOutcome]) -> Result<Vec<f64>> {
    regret(
        &column(trace, |o| o.norm_cost, "normalized cost")?,
        &column(trace, |o| o.oracle_cost, "policy-set oracle")?,
    )
}

/// Regret against the best arm of every round.
pub fn best_response_regret(trace: &[RoundOutcome]) -> Result<Vec<f64>> {
    regret(
        &column(trace, |o| o.norm_cost, "normalized cost")?,
        &column(trace, |o| o.best_arm_cost, "best-arm oracle")?,
    )
}

/// Least-squares fit of `log y = log c + alpha log x` over points with
/// positive coordinates. Returns `(c, alpha)`.
pub fn fit_power_law(points: &[(f64, f64)]) -> Option<(f64, f64)> {
    let logs: Vec<(f64, f64)> = points
        .iter()
        .filter(|(x, y)| *x > 0.0 && *y > 0.0)
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    if logs.len() < 2 {
        return None;
    }
    let n = logs.len() as f64;
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = logs.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let alpha = sxy / sxx;
    Some(((my - alpha * mx).exp(), alpha))
}
