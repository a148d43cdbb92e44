//! Posterior summaries, convergence diagnostics and model scores.

use std::fmt::Write as _;

use thiserror::Error;

use crate::compiler::ExecutablePlan;
use crate::sampler::DrawSet;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalysisError {
    #[error("model has no imputed sites")]
    NoImputedSites,
    #[error("draw set has no draws")]
    Empty,
    #[error("draw columns do not match the plan's latent layout")]
    LayoutMismatch,
}

/// Sample quantile by linear interpolation between order statistics
/// (`h = (n - 1) q`). `sorted` must be ascending and non-empty.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * q.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn sample_var(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() as f64 - 1.0)
}

/// Split potential scale reduction. NaN with fewer than two chains, fewer
/// than four draws per chain, or no within-chain variation.
pub fn split_rhat(chains: &[Vec<f64>]) -> f64 {
    let n = chains.iter().map(Vec::len).min().unwrap_or(0);
    if chains.len() < 2 || n < 4 {
        return f64::NAN;
    }
    let half = n / 2;
    let mut parts: Vec<&[f64]> = Vec::with_capacity(2 * chains.len());
    for c in chains {
        parts.push(&c[..half]);
        parts.push(&c[n - half..n]);
    }
    let w = parts.iter().map(|p| sample_var(p)).sum::<f64>() / parts.len() as f64;
    let means: Vec<f64> = parts.iter().map(|p| mean(p)).collect();
    let b_over_n = sample_var(&means);
    let hn = half as f64;
    let var_plus = (hn - 1.0) / hn * w + b_over_n;
    if w <= 0.0 {
        return f64::NAN;
    }
    (var_plus / w).sqrt()
}

/// Multi-chain effective sample size from Geyer's initial monotone sequence
/// of autocorrelations, capped at the total number of draws.
pub fn ess(chains: &[Vec<f64>]) -> f64 {
    let m = chains.len();
    let n = chains.iter().map(Vec::len).min().unwrap_or(0);
    if m == 0 || n < 4 {
        return f64::NAN;
    }
    let chains: Vec<&[f64]> = chains.iter().map(|c| &c[..n]).collect();
    let means: Vec<f64> = chains.iter().map(|c| mean(c)).collect();
    let acov = |lag: usize| -> f64 {
        let mut s = 0.0;
        for (c, mu) in chains.iter().zip(&means) {
            let mut a = 0.0;
            for i in 0..n - lag {
                a += (c[i] - mu) * (c[i + lag] - mu);
            }
            s += a / n as f64;
        }
        s / m as f64
    };
    let nf = n as f64;
    let mean_var = acov(0) * nf / (nf - 1.0);
    let mut var_plus = mean_var * (nf - 1.0) / nf;
    if m > 1 {
        var_plus += sample_var(&means);
    }
    if var_plus.is_nan() || var_plus <= 0.0 {
        return f64::NAN;
    }
    let rho = |lag: usize| 1.0 - (mean_var - acov(lag)) / var_plus;

    let mut rho_hat = vec![0.0; n];
    let mut even = 1.0;
    let mut odd = rho(1);
    rho_hat[0] = even;
    rho_hat[1] = odd;
    let mut s = 1;
    while s < n - 4 && even + odd > 0.0 {
        even = rho(s + 1);
        odd = rho(s + 2);
        if even + odd >= 0.0 {
            rho_hat[s + 1] = even;
            rho_hat[s + 2] = odd;
        }
        s += 2;
    }
    let max_s = s;
    if even > 0.0 {
        rho_hat[max_s + 1] = even;
    }
    let mut t = 1;
    while t + 3 <= max_s {
        if rho_hat[t + 1] + rho_hat[t + 2] > rho_hat[t - 1] + rho_hat[t] {
            rho_hat[t + 1] = (rho_hat[t - 1] + rho_hat[t]) / 2.0;
            rho_hat[t + 2] = rho_hat[t + 1];
        }
        t += 2;
    }
    let total = (m * n) as f64;
    let tau = -1.0 + 2.0 * rho_hat[..max_s].iter().sum::<f64>() + rho_hat[max_s + 1];
    (total / tau).min(total)
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct SummaryRow {
    pub name: String,
    pub mean: f64,
    pub std: f64,
    pub median: f64,
    pub q05: f64,
    pub q95: f64,
    pub n_eff: f64,
    pub r_hat: f64,
}

impl SummaryRow {
    /// Summary of one site from per-chain draws.
    pub fn from_chains(name: impl Into<String>, chains: &[Vec<f64>]) -> SummaryRow {
        let mut all: Vec<f64> = chains.iter().flatten().copied().collect();
        let mu = mean(&all);
        let sd = if all.len() > 1 { sample_var(&all).sqrt() } else { 0.0 };
        all.sort_by(f64::total_cmp);
        SummaryRow {
            name: name.into(),
            mean: mu,
            std: sd,
            median: quantile(&all, 0.5),
            q05: quantile(&all, 0.05),
            q95: quantile(&all, 0.95),
            n_eff: ess(chains),
            r_hat: split_rhat(chains),
        }
    }

    /// Monte Carlo standard error of the mean.
    pub fn mcse(&self) -> f64 {
        self.std / self.n_eff.sqrt()
    }
}

/// One row per draw column, in column order.
pub fn summarize(draws: &DrawSet) -> Vec<SummaryRow> {
    (0..draws.names.len()).map(|k| SummaryRow::from_chains(&draws.names[k], &draws.column(k))).collect()
}

/// Tab-separated table with columns mean, std, median, 5.0%, 95.0%, n_eff
/// and r_hat.
pub fn format_summary(rows: &[SummaryRow]) -> String {
    let mut out = String::from("\tmean\tstd\tmedian\t5.0%\t95.0%\tn_eff\tr_hat\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{}\t{:.2}\t{:.2}\t{:.2}\t{:.2}\t{:.2}\t{:.2}\t{:.2}",
            r.name, r.mean, r.std, r.median, r.q05, r.q95, r.n_eff, r.r_hat
        );
    }
    out
}

/// Posterior draws of one missing cell.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct Imputation {
    pub var: String,
    pub tuple: Vec<i64>,
    /// Draws of all chains, chain by chain.
    pub draws: Vec<f64>,
}

impl Imputation {
    pub fn mean(&self) -> f64 {
        mean(&self.draws)
    }
}

/// Splits `y[3,4]` into `("y", [3, 4])`.
pub fn parse_site_name(name: &str) -> Option<(String, Vec<i64>)> {
    let Some(open) = name.find('[') else { return Some((name.to_string(), Vec::new())) };
    let inner = name[open + 1..].strip_suffix(']')?;
    let tuple = inner.split(',').map(|p| p.trim().parse().ok()).collect::<Option<Vec<i64>>>()?;
    Some((name[..open].to_string(), tuple))
}

/// Draws of every imputed column, in layout order.
pub fn extract_imputations(draws: &DrawSet) -> Result<Vec<Imputation>, AnalysisError> {
    let mut out = Vec::new();
    for (k, name) in draws.names.iter().enumerate() {
        if !draws.imputed[k] {
            continue;
        }
        let (var, tuple) = parse_site_name(name).ok_or(AnalysisError::LayoutMismatch)?;
        out.push(Imputation { var, tuple, draws: draws.column(k).into_iter().flatten().collect() });
    }
    if out.is_empty() {
        return Err(AnalysisError::NoImputedSites);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct ModelScore {
    pub nll: f64,
    pub aic: f64,
    pub bic: f64,
    /// Scalar parameters, imputed cells excluded.
    pub k: usize,
    /// Observed scalar cells.
    pub n: usize,
    pub runtime_seconds: f64,
}

impl ModelScore {
    pub fn new(nll: f64, k: usize, n: usize, runtime_seconds: f64) -> ModelScore {
        let kf = k as f64;
        ModelScore { nll, aic: 2.0 * kf + 2.0 * nll, bic: kf * (n as f64).ln() + 2.0 * nll, k, n, runtime_seconds }
    }
}

/// Negative log likelihood of the observed cells at the posterior mean of
/// every latent slot, with the derived information criteria.
pub fn score(plan: &ExecutablePlan, draws: &DrawSet, runtime_seconds: f64) -> Result<ModelScore, AnalysisError> {
    if draws.names != plan.slot_names() {
        return Err(AnalysisError::LayoutMismatch);
    }
    if draws.n_samples() == 0 {
        return Err(AnalysisError::Empty);
    }
    let parts = plan.parts_at_constrained(&draws.means());
    Ok(ModelScore::new(-parts.observed, plan.n_params(), plan.n_observed(), runtime_seconds))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn iid(m: usize, n: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..m).map(|_| (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()).collect()
    }

    #[test]
    fn quantiles_of_one_to_hundred() {
        let xs: Vec<f64> = (1..=100).map(f64::from).collect();
        assert!((quantile(&xs, 0.05) - 5.95).abs() < 1e-12);
        assert!((quantile(&xs, 0.5) - 50.5).abs() < 1e-12);
        assert!((quantile(&xs, 0.95) - 95.05).abs() < 1e-12);
    }

    #[test]
    fn iid_chains_are_converged_and_efficient() {
        let c = iid(4, 5000, 1);
        let r = split_rhat(&c);
        assert!((0.999..=1.01).contains(&r), "{r}");
        let e = ess(&c);
        assert!((0.8 * 20000.0..=20000.0).contains(&e), "{e}");
    }

    #[test]
    fn offset_chains_are_flagged() {
        let mut c = iid(2, 1000, 2);
        for x in &mut c[1] {
            *x += 10.0;
        }
        assert!(split_rhat(&c) > 1.2);
    }

    #[test]
    fn constant_draws() {
        let c = vec![vec![3.0; 50]; 2];
        let r = SummaryRow::from_chains("c", &c);
        assert_eq!((r.mean, r.median, r.std), (3.0, 3.0, 0.0));
        assert!(r.r_hat.is_nan());
    }

    #[test]
    fn ess_of_autoregressive_stream() {
        let rho: f64 = 0.6;
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 20000;
        let mut x = 0.0;
        let mut c = Vec::with_capacity(n);
        let sd = (1.0 - rho * rho).sqrt();
        for _ in 0..n {
            let z: f64 = StandardNormal.sample(&mut rng);
            x = rho * x + sd * z;
            c.push(x);
        }
        let expect = n as f64 * (1.0 - rho) / (1.0 + rho);
        let got = ess(&[c]);
        assert!((got / expect - 1.0).abs() < 0.2, "{got} vs {expect}");
    }

    #[test]
    fn information_criteria() {
        let s = ModelScore::new(10.0, 2, 100, 0.0);
        assert_eq!(s.aic, 24.0);
        assert!((s.bic - (2.0 * 100f64.ln() + 20.0)).abs() < 1e-12);
        assert!((s.bic - 29.21).abs() < 0.01);
    }

    #[test]
    fn site_names_round_trip() {
        assert_eq!(parse_site_name("y[5]"), Some(("y".into(), vec![5])));
        assert_eq!(parse_site_name("A[3,12]"), Some(("A".into(), vec![3, 12])));
        assert_eq!(parse_site_name("sigma"), Some(("sigma".into(), vec![])));
        assert_eq!(parse_site_name("y[x]"), None);
    }
}
