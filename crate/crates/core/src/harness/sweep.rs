use serde::Serialize;

use super::{run_experiment, ExperimentConfig};
use crate::error::{Error, Result};

/// Least-squares line through `(ln x, ln y)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LogLogFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

pub fn fit_loglog(points: &[(f64, f64)]) -> Result<LogLogFit> {
    if points.len() < 2 {
        return Err(Error::Config("a log-log fit needs at least two points".into()));
    }
    if let Some(p) = points.iter().find(|(x, y)| !(*x > 0.0 && *y > 0.0 && x.is_finite() && y.is_finite())) {
        return Err(Error::Config(format!("log-log fit needs positive finite values, got {p:?}")));
    }
    let logs: Vec<(f64, f64)> = points.iter().map(|(x, y)| (x.ln(), y.ln())).collect();
    let n = logs.len() as f64;
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = logs.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: f64 = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return Err(Error::Config("log-log fit needs at least two distinct x values".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = logs.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    let ss_tot: f64 = logs.iter().map(|p| (p.1 - my).powi(2)).sum();
    let r_squared = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 };
    Ok(LogLogFit { slope, intercept, r_squared })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepPoint {
    #[serde(rename = "T")]
    pub horizon: usize,
    pub mean_final_regret: f64,
    pub sd_final_regret: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepResult {
    pub algorithm: String,
    pub points: Vec<SweepPoint>,
    pub fit: LogLogFit,
}

/// Runs `config` at every horizon in `horizons` and fits the growth rate
/// of the first algorithm's mean final regret.
pub fn scaling_sweep(config: &ExperimentConfig, horizons: &[usize]) -> Result<SweepResult> {
    if horizons.len() < 3 {
        return Err(Error::Config(format!("a sweep needs at least three horizons, got {}", horizons.len())));
    }
    if config.task.is_mdp() {
        return Err(Error::Config("the sweep varies T and supports bandit tasks only".into()));
    }
    let mut points = Vec::with_capacity(horizons.len());
    let mut algorithm = String::new();
    for &t in horizons {
        let mut c = config.clone();
        c.rounds = Some(t);
        let res = run_experiment(&c)?;
        let first = &res.summary.algorithms[0];
        algorithm.clone_from(&first.algorithm);
        points.push(SweepPoint { horizon: t, mean_final_regret: first.mean_final_regret, sd_final_regret: first.sd_final_regret });
    }
    let xy: Vec<(f64, f64)> = points.iter().map(|p| (p.horizon as f64, p.mean_final_regret)).collect();
    Ok(SweepResult { algorithm, points, fit: fit_loglog(&xy)? })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::Task;

    #[test]
    fn three_quarter_power_is_recovered() {
        let pts: Vec<(f64, f64)> = [1000.0, 2000.0, 4000.0, 8000.0].iter().map(|&t: &f64| (t, 3.7 * t.powf(0.75))).collect();
        let fit = fit_loglog(&pts).unwrap();
        assert!((fit.slope - 0.75).abs() <= 1e-9);
        assert!((fit.intercept - 3.7f64.ln()).abs() <= 1e-9);
        assert!((fit.r_squared - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn constant_input_has_zero_slope() {
        let fit = fit_loglog(&[(10.0, 5.0), (20.0, 5.0), (40.0, 5.0)]).unwrap();
        assert_eq!(fit.slope, 0.0);
        assert_eq!(fit.r_squared, 1.0);
    }

    #[test]
    fn noisy_points_by_hand() {
        // ln-points (0, 0), (1, 1), (2, 3): slope 1.5, intercept −1/6
        let e = std::f64::consts::E;
        let fit = fit_loglog(&[(1.0, 1.0), (e, e), (e * e, e.powi(3))]).unwrap();
        assert!((fit.slope - 1.5).abs() < 1e-12);
        assert!((fit.intercept + 1.0 / 6.0).abs() < 1e-12);
        // residuals 1/6, −1/3, 1/6 → ss_res = 1/6
        let ss_tot = (0.0f64 - 4.0 / 3.0).powi(2) + (1.0f64 - 4.0 / 3.0).powi(2) + (3.0f64 - 4.0 / 3.0).powi(2);
        assert!((fit.r_squared - (1.0 - (1.0 / 6.0) / ss_tot)).abs() < 1e-12);
    }

    #[test]
    fn bad_inputs() {
        assert!(fit_loglog(&[(1.0, 1.0)]).is_err());
        assert!(fit_loglog(&[(1.0, 1.0), (2.0, 0.0)]).is_err());
        assert!(fit_loglog(&[(3.0, 1.0), (3.0, 2.0)]).is_err());
        assert!(scaling_sweep(&ExperimentConfig::new(Task::Lb), &[100, 200]).is_err());
        assert!(scaling_sweep(&ExperimentConfig::new(Task::MdpLm), &[1, 2, 3]).is_err());
    }

    #[test]
    fn small_live_sweep() {
        let mut c = ExperimentConfig::new(Task::Lb);
        c.trials = 2;
        c.algorithms = vec!["weighted".into()];
        let res = scaling_sweep(&c, &[100, 200, 400]).unwrap();
        assert_eq!(res.points.len(), 3);
        assert_eq!(res.algorithm, "weighted");
        assert!(res.fit.slope.is_finite());
    }
}
