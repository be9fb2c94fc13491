use std::fmt::Write as _;

use super::config::ExperimentConfig;
use super::toy::TrialResult;

/// Aggregate over a configuration's trials.
#[derive(Debug, Clone, PartialEq)]
pub struct TableRow {
    pub config: String,
    pub trials: usize,
    pub successes: usize,
    /// Percent.
    pub success_rate: f64,
    /// Over successful trials; `NaN` when there are none.
    pub iterations_mean: f64,
    pub iterations_sd: f64,
    pub reward_mean: f64,
    pub reward_sd: f64,
}

/// Mean and sample standard deviation.
pub fn mean_sd(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() == 1 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

impl TableRow {
    pub fn from_trials(cfg: &ExperimentConfig, results: &[TrialResult]) -> Self {
        let ok: Vec<&TrialResult> = results.iter().filter(|r| r.success).collect();
        let iters: Vec<f64> = ok.iter().map(|r| r.iterations as f64).collect();
        let rewards: Vec<f64> = ok.iter().map(|r| r.reward).collect();
        let (im, is) = mean_sd(&iters);
        let (rm, rs) = mean_sd(&rewards);
        TableRow {
            config: cfg.echo(),
            trials: results.len(),
            successes: ok.len(),
            success_rate: if results.is_empty() { 0.0 } else { 100.0 * ok.len() as f64 / results.len() as f64 },
            iterations_mean: im,
            iterations_sd: is,
            reward_mean: rm,
            reward_sd: rs,
        }
    }

    pub const TSV_HEADER: &'static str = "trials\tsuccesses\tsuccess_rate\titer_mean\titer_sd\treward_mean\treward_sd";

    pub fn tsv_line(&self) -> String {
        format!(
            "{}\t{}\t{:.1}\t{}\t{}\t{}\t{}",
            self.trials,
            self.successes,
            self.success_rate,
            self.iterations_mean,
            self.iterations_sd,
            self.reward_mean,
            self.reward_sd
        )
    }

    /// `#` config echo, header, one data line.
    pub fn to_tsv(&self) -> String {
        format!("# {}\n{}\n{}\n", self.config, Self::TSV_HEADER, self.tsv_line())
    }
}

pub fn trials_tsv(cfg: &ExperimentConfig, results: &[TrialResult]) -> String {
    let mut out = format!("# {}\ntrial\tsuccess\titerations\tfailure\treward\tlet_residual\tweights\n", cfg.echo());
    for (i, r) in results.iter().enumerate() {
        let w: Vec<String> = r.weights.iter().map(|v| v.to_string()).collect();
        let _ = writeln!(
            out,
            "{i}\t{}\t{}\t{}\t{}\t{}\t{}",
            u8::from(r.success),
            r.iterations,
            r.failure.map_or("-", |f| f.tag()),
            r.reward,
            r.let_residual.map_or_else(|| "-".to_string(), |v| v.to_string()),
            w.join(",")
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sample_statistics() {
        let (m, s) = mean_sd(&[1.0, 2.0, 3.0]);
        assert_eq!(m, 2.0);
        assert_eq!(s, 1.0);
        assert_eq!(mean_sd(&[4.0]), (4.0, 0.0));
        assert!(mean_sd(&[]).0.is_nan());
    }
}
