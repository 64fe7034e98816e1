//! Loss-of-resilience integrals, value of information, value-to-cost ratio
//! and Monte Carlo convergence diagnostics.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::recovery::RecoveryTrajectory;

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.96;

/// `∫ (f0 - F(t)) dt` over `[from, to]` for a right-continuous staircase
/// given by `(t, F)` breakpoints (the last value extends to `to`).
pub fn lor_between(breakpoints: &[(f64, f64)], f0: f64, from: f64, to: f64) -> f64 {
    let mut area = 0.0;
    for (k, &(t, f)) in breakpoints.iter().enumerate() {
        let end = breakpoints.get(k + 1).map_or(f64::INFINITY, |b| b.0);
        let (lo, hi) = (t.max(from), end.min(to));
        if hi > lo {
            area += (f0 - f) * (hi - lo);
        }
    }
    area
}

/// Loss of resilience on `[0, horizon]`, MW·day.
pub fn lor(traj: &RecoveryTrajectory, f0: f64, horizon: f64) -> f64 {
    lor_between(&traj.breakpoints, f0, 0.0, horizon)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub n: usize,
    pub mean: f64,
    pub std: f64,
    /// Half-width of the normal-approximation 95% interval of the mean.
    pub ci_half: f64,
}

pub fn summarize(xs: &[f64]) -> Summary {
    let n = xs.len();
    if n == 0 {
        return Summary { n, mean: f64::NAN, std: f64::NAN, ci_half: f64::NAN };
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    let std = if n > 1 { (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt() } else { 0.0 };
    Summary { n, mean, std, ci_half: Z95 * std / (n as f64).sqrt() }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SampleKey {
    pub scenario: u64,
    pub replicate: u64,
}

/// One LoR observation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LorSample {
    pub key: SampleKey,
    pub lor: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairedInterval {
    /// Independent units the interval is built from (scenarios, or
    /// replicate pairs when there is a single scenario).
    pub units: usize,
    pub mean: f64,
    pub low: f64,
    pub high: f64,
}

impl PairedInterval {
    pub fn excludes_zero(&self) -> bool {
        self.low > 0.0 || self.high < 0.0
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VoiEstimate {
    /// `E[LoR baseline] - E[LoR monitored]`, MW·day.
    pub voi: f64,
    /// VoI as a percentage of the baseline mean.
    pub relative_pct: f64,
    pub baseline: Summary,
    pub monitored: Summary,
    pub paired: Option<PairedInterval>,
}

/// Value of information between a baseline arm and a monitored arm.
///
/// When the samples share keys the paired interval is computed on
/// per-scenario mean differences (or per-pair differences if there is only
/// one scenario).
pub fn voi(baseline: &[LorSample], monitored: &[LorSample]) -> Result<VoiEstimate> {
    if baseline.is_empty() || monitored.is_empty() {
        return Err(Error::Contract("value of information needs samples in both arms".into()));
    }
    let b = summarize(&sorted_values(baseline));
    let m = summarize(&sorted_values(monitored));
    let voi = b.mean - m.mean;
    Ok(VoiEstimate {
        voi,
        relative_pct: if b.mean != 0.0 { 100.0 * voi / b.mean } else { 0.0 },
        baseline: b,
        monitored: m,
        paired: paired_interval(baseline, monitored),
    })
}

fn sorted_values(samples: &[LorSample]) -> Vec<f64> {
    let mut s = samples.to_vec();
    s.sort_by_key(|x| x.key);
    s.into_iter().map(|x| x.lor).collect()
}

fn paired_interval(baseline: &[LorSample], monitored: &[LorSample]) -> Option<PairedInterval> {
    let other: BTreeMap<SampleKey, f64> = monitored.iter().map(|s| (s.key, s.lor)).collect();
    let mut by_scenario: BTreeMap<u64, Vec<f64>> = BTreeMap::new();
    let mut pairs = Vec::new();
    let mut sorted = baseline.to_vec();
    sorted.sort_by_key(|x| x.key);
    for s in &sorted {
        if let Some(m) = other.get(&s.key) {
            by_scenario.entry(s.key.scenario).or_default().push(s.lor - m);
            pairs.push(s.lor - m);
        }
    }
    if pairs.len() < 2 {
        return None;
    }
    let units: Vec<f64> = if by_scenario.len() >= 2 {
        by_scenario.values().map(|d| d.iter().sum::<f64>() / d.len() as f64).collect()
    } else {
        pairs
    };
    let s = summarize(&units);
    Some(PairedInterval { units: s.n, mean: s.mean, low: s.mean - s.ci_half, high: s.mean + s.ci_half })
}

/// Deployment cost and value of lost load.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CostModel {
    /// Cost of full coverage at the reference accuracy, USD.
    pub full_cost: f64,
    /// `(accuracy, cost multiplier)` points, ascending in accuracy.
    pub accuracy_factor: Vec<(f64, f64)>,
    /// USD per MWh of unserved energy.
    pub voll_per_mwh: f64,
}

impl Default for CostModel {
    fn default() -> Self {
        CostModel { full_cost: 1e7, accuracy_factor: vec![(0.75, 0.8), (0.85, 1.0), (0.95, 1.2)], voll_per_mwh: 10_000.0 }
    }
}

impl CostModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.full_cost > 0.0 && self.voll_per_mwh > 0.0) {
            return Err(Error::Config("cost and value of lost load must be positive".into()));
        }
        if self.accuracy_factor.is_empty()
            || self.accuracy_factor.iter().any(|&(_, f)| !(f > 0.0))
            || self.accuracy_factor.windows(2).any(|w| w[1].0 <= w[0].0)
        {
            return Err(Error::Config("accuracy factors must be positive with strictly increasing accuracy".into()));
        }
        Ok(())
    }

    /// Piecewise-linear multiplier; clamped (with a warning) outside the
    /// tabulated accuracy range.
    pub fn factor(&self, a: f64) -> f64 {
        let pts = &self.accuracy_factor;
        let (first, last) = (pts[0], pts[pts.len() - 1]);
        if a < first.0 || a > last.0 {
            log::warn!("accuracy {a} outside [{}, {}]; cost factor clamped", first.0, last.0);
        }
        if a <= first.0 {
            return first.1;
        }
        for w in pts.windows(2) {
            let ((x0, y0), (x1, y1)) = (w[0], w[1]);
            if a == x1 {
                return y1;
            }
            if a < x1 {
                return y0 + (y1 - y0) * (a - x0) / (x1 - x0);
            }
        }
        last.1
    }

    pub fn cost(&self, p: f64, a: f64) -> f64 {
        self.full_cost * p * self.factor(a)
    }

    /// Value of lost load per MW·day.
    pub fn voll_per_mw_day(&self) -> f64 {
        self.voll_per_mwh * 24.0
    }

    /// Monetised resilience gain over deployment cost.
    pub fn vcr(&self, voi_mw_day: f64, p: f64, a: f64) -> Result<f64> {
        if !(p > 0.0 && p <= 1.0) {
            return Err(Error::Contract(format!("value-to-cost ratio undefined at coverage {p}")));
        }
        if voi_mw_day < 0.0 {
            log::warn!("negative value of information {voi_mw_day} MW·day");
        }
        Ok(voi_mw_day * self.voll_per_mw_day() / self.cost(p, a))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Convergence {
    pub converged: bool,
    pub n: usize,
    pub mean: f64,
    /// Largest `|m_k - m_n| / |m_n|` over the trailing window.
    pub max_rel_change: f64,
    /// CI half-width relative to the mean.
    pub ci_rel: f64,
}

pub const CONVERGENCE_WINDOW: usize = 20;
pub const MEAN_TOL: f64 = 0.01;
pub const CI_TOL: f64 = 0.02;

/// Running-mean stability over the last 20 samples and CI width relative
/// to the mean; needs at least 21 samples.
pub fn convergence_check(samples: &[f64]) -> Convergence {
    let n = samples.len();
    let running = running_means(samples);
    let mean = running.last().copied().unwrap_or(f64::NAN);
    if n <= CONVERGENCE_WINDOW {
        return Convergence { converged: false, n, mean, max_rel_change: f64::INFINITY, ci_rel: f64::INFINITY };
    }
    let scale = mean.abs();
    let max_change = running[n - 1 - CONVERGENCE_WINDOW..n - 1]
        .iter()
        .map(|m| (m - mean).abs())
        .fold(0.0f64, f64::max);
    let s = summarize(samples);
    let (max_rel_change, ci_rel) = if scale > 0.0 {
        (max_change / scale, s.ci_half / scale)
    } else if max_change == 0.0 && s.ci_half == 0.0 {
        (0.0, 0.0)
    } else {
        (f64::INFINITY, f64::INFINITY)
    };
    Convergence { converged: max_rel_change < MEAN_TOL && ci_rel < CI_TOL, n, mean, max_rel_change, ci_rel }
}

pub fn running_means(samples: &[f64]) -> Vec<f64> {
    let mut sum = 0.0;
    samples
        .iter()
        .enumerate()
        .map(|(k, x)| {
            sum += x;
            sum / (k + 1) as f64
        })
        .collect()
}

/// First sample count at which the criterion holds, if any.
pub fn first_converged(samples: &[f64]) -> Option<usize> {
    (CONVERGENCE_WINDOW + 1..=samples.len()).find(|&n| convergence_check(&samples[..n]).converged)
}
