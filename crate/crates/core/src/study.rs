//! Paired Monte Carlo studies: shared hazard and damage per scenario,
//! several monitoring arms evaluated on the same perception and repair
//! streams, and the statistics that compare them.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fragility::{sample_scenario, DamageScenario, FragilitySet, FunctionalityMap};
use crate::hazard::{CorrelationModel, FaultScenario, FieldSampler, IntensityField, SimplifiedAttenuation};
use crate::network::NetworkCase;
use crate::perception::{assess_scenario, Coverage, MonitoringConfig};
use crate::power_flow::FunctionalityEvaluator;
use crate::recovery::{simulate, RecoveryConfig, RecoveryTrajectory};
use crate::resilience::{
    convergence_check, lor, running_means, summarize, voi, Convergence, CostModel, LorSample, SampleKey, Summary,
    VoiEstimate, Z95,
};
use crate::rng::{replicate_stream, scenario_stream, Purpose};

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HazardConfig {
    pub fault: FaultScenario,
    pub correlation: CorrelationModel,
    pub attenuation: SimplifiedAttenuation,
}

impl HazardConfig {
    pub fn sampler(&self, case: &NetworkCase) -> Result<FieldSampler> {
        self.attenuation.validate()?;
        FieldSampler::new(case, &self.fault, &self.attenuation, &self.correlation)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Arm {
    pub name: String,
    pub monitoring: MonitoringConfig,
}

impl Arm {
    pub fn new(name: impl Into<String>, monitoring: MonitoringConfig) -> Self {
        Arm { name: name.into(), monitoring }
    }
}

/// Everything that defines a study apart from the network and the seed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StudyConfig {
    pub hazard: HazardConfig,
    pub fragility: FragilitySet,
    pub functionality: FunctionalityMap,
    pub recovery: RecoveryConfig,
    pub cost: CostModel,
    /// The first arm is the baseline every other arm is compared with.
    pub arms: Vec<Arm>,
    pub scenarios: usize,
    pub perceptions: usize,
    /// Spacing of the trajectory band grid, days.
    pub grid_step: f64,
}

impl Default for StudyConfig {
    fn default() -> Self {
        StudyConfig {
            hazard: HazardConfig::default(),
            fragility: FragilitySet::default(),
            functionality: FunctionalityMap::default(),
            recovery: RecoveryConfig::default(),
            cost: CostModel::default(),
            arms: vec![Arm::new("inspection", MonitoringConfig::inspection()), Arm::new("sshm", MonitoringConfig::sshm(0.9))],
            scenarios: 25,
            perceptions: 20,
            grid_step: 0.1,
        }
    }
}

impl StudyConfig {
    pub fn validate(&self) -> Result<()> {
        if self.arms.is_empty() {
            return Err(Error::Config("a study needs at least one arm".into()));
        }
        if self.scenarios == 0 || self.perceptions == 0 {
            return Err(Error::Config("scenario and perception counts must be at least 1".into()));
        }
        if !(self.grid_step > 0.0) {
            return Err(Error::Config("grid step must be positive".into()));
        }
        self.hazard.fault.validate()?;
        self.hazard.correlation.validate()?;
        self.hazard.attenuation.validate()?;
        self.fragility.validate()?;
        self.functionality.validate()?;
        self.recovery.validate()?;
        self.cost.validate()?;
        for arm in &self.arms {
            arm.monitoring.validate()?;
        }
        Ok(())
    }
}

/// Intensity field and true damage for scenario `s`; identical for every
/// arm and replicate.
pub fn draw_scenario(
    case: &NetworkCase,
    sampler: &FieldSampler,
    fragility: &FragilitySet,
    seed: u64,
    scenario: u64,
) -> Result<(IntensityField, DamageScenario)> {
    let field = sampler.sample(&mut scenario_stream(seed, scenario, Purpose::Hazard))?;
    let damage = sample_scenario(&field, case, fragility, &mut scenario_stream(seed, scenario, Purpose::Damage))?;
    Ok((field, damage))
}

/// One perception + recovery realisation. Perception and repair streams
/// depend only on (seed, scenario, replicate), never on the arm.
pub fn run_replicate(
    damage: &DamageScenario,
    monitoring: &MonitoringConfig,
    recovery: &RecoveryConfig,
    evaluator: &mut FunctionalityEvaluator<'_>,
    seed: u64,
    scenario: u64,
    replicate: u64,
) -> Result<RecoveryTrajectory> {
    let perceived = assess_scenario(
        evaluator.case(),
        damage,
        monitoring,
        &mut replicate_stream(seed, scenario, replicate, Purpose::Perception),
    )?;
    simulate(damage, &perceived, recovery, evaluator, &mut replicate_stream(seed, scenario, replicate, Purpose::Repair))
}

/// Mean served-load trajectory with a 95% interval of the mean.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryBand {
    pub t: Vec<f64>,
    pub mean: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl TrajectoryBand {
    pub fn csv(&self) -> String {
        let mut out = String::from("t_days,mean_MW,lower_MW,upper_MW\n");
        for k in 0..self.t.len() {
            let _ = writeln!(out, "{},{},{},{}", self.t[k], self.mean[k], self.lower[k], self.upper[k]);
        }
        out
    }
}

struct BandAccumulator {
    t: Vec<f64>,
    sum: Vec<f64>,
    sum_sq: Vec<f64>,
    n: usize,
}

impl BandAccumulator {
    fn new(horizon: f64, step: f64) -> Self {
        let count = (horizon / step).round() as usize + 1;
        let t = (0..count).map(|k| k as f64 * step).collect();
        BandAccumulator { t, sum: vec![0.0; count], sum_sq: vec![0.0; count], n: 0 }
    }

    fn add(&mut self, traj: &RecoveryTrajectory) {
        for (k, &t) in self.t.iter().enumerate() {
            let f = traj.at(t);
            self.sum[k] += f;
            self.sum_sq[k] += f * f;
        }
        self.n += 1;
    }

    fn finish(self) -> TrajectoryBand {
        let n = self.n.max(1) as f64;
        let mut band = TrajectoryBand { t: self.t, mean: vec![], lower: vec![], upper: vec![] };
        for (s, s2) in self.sum.iter().zip(&self.sum_sq) {
            let mean = s / n;
            let var = if self.n > 1 { ((s2 - n * mean * mean) / (n - 1.0)).max(0.0) } else { 0.0 };
            let half = Z95 * (var / n).sqrt();
            band.mean.push(mean);
            band.lower.push(mean - half);
            band.upper.push(mean + half);
        }
        band
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArmReport {
    pub name: String,
    pub monitoring: MonitoringConfig,
    pub samples: Vec<LorSample>,
    pub lor: Summary,
    pub recovery_time: Summary,
    /// Replicates still short of full service at the horizon.
    pub unrecovered: usize,
    pub convergence: Convergence,
    pub running_mean: Vec<f64>,
    #[serde(skip)]
    pub band: Option<TrajectoryBand>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub baseline: String,
    pub monitored: String,
    pub voi: VoiEstimate,
    /// Present when the monitored arm has positive sensor coverage.
    pub vcr: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSummary {
    pub scenario: u64,
    pub damaged: usize,
    pub initial_mw: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StudyReport {
    pub seed: u64,
    pub scenarios: usize,
    pub perceptions: usize,
    pub f0: f64,
    pub horizon: f64,
    pub scenario_summaries: Vec<ScenarioSummary>,
    pub arms: Vec<ArmReport>,
    pub comparisons: Vec<Comparison>,
    pub failed_replicates: usize,
}

impl StudyReport {
    pub fn arm(&self, name: &str) -> Option<&ArmReport> {
        self.arms.iter().find(|a| a.name == name)
    }

    pub fn comparison(&self, monitored: &str) -> Option<&Comparison> {
        self.comparisons.iter().find(|c| c.monitored == monitored)
    }

    /// Running-mean trace per arm, one row per sample count.
    pub fn convergence_csv(&self) -> String {
        let mut out = String::from("n");
        for arm in &self.arms {
            let _ = write!(out, ",{}", arm.name);
        }
        out.push('\n');
        let rows = self.arms.iter().map(|a| a.running_mean.len()).max().unwrap_or(0);
        for k in 0..rows {
            let _ = write!(out, "{}", k + 1);
            for arm in &self.arms {
                match arm.running_mean.get(k) {
                    Some(v) => {
                        let _ = write!(out, ",{v}");
                    }
                    None => out.push(','),
                }
            }
            out.push('\n');
        }
        out
    }
}

struct ScenarioOutcome {
    summary: ScenarioSummary,
    /// Per arm: (replicate, trajectory) for successful replicates.
    arms: Vec<Vec<(u64, RecoveryTrajectory)>>,
    failed: usize,
}

fn run_scenario(case: &NetworkCase, cfg: &StudyConfig, sampler: &FieldSampler, seed: u64, s: u64) -> ScenarioOutcome {
    let mut arms = vec![Vec::with_capacity(cfg.perceptions); cfg.arms.len()];
    let (_, damage) = match draw_scenario(case, sampler, &cfg.fragility, seed, s) {
        Ok(d) => d,
        Err(e) => {
            log::warn!("scenario {s} failed: {e}");
            return ScenarioOutcome {
                summary: ScenarioSummary { scenario: s, damaged: 0, initial_mw: f64::NAN },
                arms,
                failed: cfg.perceptions * cfg.arms.len(),
            };
        }
    };
    let mut evaluator = FunctionalityEvaluator::new(case, &cfg.functionality);
    let initial_mw = evaluator.served(&damage).unwrap_or(f64::NAN);
    let mut failed = 0;
    for r in 0..cfg.perceptions as u64 {
        for (k, arm) in cfg.arms.iter().enumerate() {
            match run_replicate(&damage, &arm.monitoring, &cfg.recovery, &mut evaluator, seed, s, r) {
                Ok(traj) => arms[k].push((r, traj)),
                Err(e) => {
                    log::warn!("scenario {s} replicate {r} arm {}: {e}", arm.name);
                    failed += 1;
                }
            }
        }
    }
    ScenarioOutcome { summary: ScenarioSummary { scenario: s, damaged: damage.damaged_count(), initial_mw }, arms, failed }
}

/// Run every arm on `scenarios x perceptions` paired realisations.
/// Results do not depend on the number of worker threads.
pub fn run_study(case: &NetworkCase, cfg: &StudyConfig, seed: u64) -> Result<StudyReport> {
    run_study_with_progress(case, cfg, seed, |_| {})
}

pub fn run_study_with_progress(
    case: &NetworkCase,
    cfg: &StudyConfig,
    seed: u64,
    progress: impl Fn(usize) + Sync,
) -> Result<StudyReport> {
    cfg.validate()?;
    let sampler = cfg.hazard.sampler(case)?;
    let done = std::sync::atomic::AtomicUsize::new(0);
    let outcomes: Vec<ScenarioOutcome> = (0..cfg.scenarios as u64)
        .into_par_iter()
        .map(|s| {
            let out = run_scenario(case, cfg, &sampler, seed, s);
            progress(done.fetch_add(1, std::sync::atomic::Ordering::Relaxed) + 1);
            out
        })
        .collect();

    let f0 = case.f0();
    let horizon = cfg.recovery.horizon_days;
    let mut arms = Vec::new();
    for (k, arm) in cfg.arms.iter().enumerate() {
        let mut band = BandAccumulator::new(horizon, cfg.grid_step);
        let mut samples = Vec::new();
        let mut times = Vec::new();
        let mut unrecovered = 0;
        for out in &outcomes {
            for (r, traj) in &out.arms[k] {
                band.add(traj);
                samples.push(LorSample { key: SampleKey { scenario: out.summary.scenario, replicate: *r }, lor: lor(traj, f0, horizon) });
                match traj.full_recovery_time {
                    Some(t) => times.push(t),
                    None => unrecovered += 1,
                }
            }
        }
        let values: Vec<f64> = samples.iter().map(|s| s.lor).collect();
        arms.push(ArmReport {
            name: arm.name.clone(),
            monitoring: arm.monitoring.clone(),
            lor: summarize(&values),
            recovery_time: summarize(&times),
            unrecovered,
            convergence: convergence_check(&values),
            running_mean: running_means(&values),
            samples,
            band: Some(band.finish()),
        });
    }

    let mut comparisons = Vec::new();
    if let Some((base, rest)) = arms.split_first() {
        for (arm, cfg_arm) in rest.iter().zip(&cfg.arms[1..]) {
            if base.samples.is_empty() || arm.samples.is_empty() {
                continue;
            }
            let v = voi(&base.samples, &arm.samples)?;
            let p = cfg_arm.monitoring.coverage_fraction(case);
            let vcr = (p > 0.0).then(|| cfg.cost.vcr(v.voi, p, cfg_arm.monitoring.a_sshm)).transpose()?;
            comparisons.push(Comparison { baseline: base.name.clone(), monitored: arm.name.clone(), voi: v, vcr });
        }
    }
    let failed_replicates = outcomes.iter().map(|o| o.failed).sum();
    if failed_replicates > 0 {
        log::warn!("{failed_replicates} replicates failed and were excluded");
    }
    Ok(StudyReport {
        seed,
        scenarios: cfg.scenarios,
        perceptions: cfg.perceptions,
        f0,
        horizon,
        scenario_summaries: outcomes.into_iter().map(|o| o.summary).collect(),
        arms,
        comparisons,
        failed_replicates,
    })
}

/// One row of a coverage/accuracy sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub p: f64,
    pub a: f64,
    pub mean_lor: f64,
    pub std_lor: f64,
    pub voi: f64,
    pub vcr: f64,
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from("p,a,mean_lor,std_lor,voi,vcr\n");
    for r in rows {
        let _ = writeln!(out, "{},{},{},{},{},{}", r.p, r.a, r.mean_lor, r.std_lor, r.voi, r.vcr);
    }
    out
}

/// Evaluate every (p, a) cell against an inspection-only baseline. All cells
/// run inside one study so they share scenarios, perception and repair
/// streams.
pub fn sweep(
    case: &NetworkCase,
    base: &StudyConfig,
    baseline: &MonitoringConfig,
    ps: &[f64],
    accuracies: &[f64],
    seed: u64,
) -> Result<(Vec<SweepRow>, StudyReport)> {
    if ps.is_empty() || accuracies.is_empty() {
        return Err(Error::Config("sweep grid is empty".into()));
    }
    if let Some(p) = ps.iter().find(|p| !(**p > 0.0 && **p <= 1.0)) {
        return Err(Error::Config(format!("sweep coverage {p} outside (0, 1]")));
    }
    let mut cfg = base.clone();
    cfg.arms = vec![Arm::new("baseline", baseline.clone())];
    for &p in ps {
        for &a in accuracies {
            let monitoring = MonitoringConfig { coverage: Coverage::Fraction(p), a_sshm: a, ..baseline.clone() };
            let monitoring = MonitoringConfig { delay_inspect: None, ..monitoring };
            cfg.arms.push(Arm::new(format!("p{p}_a{a}"), monitoring));
        }
    }
    let report = run_study(case, &cfg, seed)?;
    let mut rows = Vec::new();
    let mut k = 1;
    for &p in ps {
        for &a in accuracies {
            let arm = &report.arms[k];
            let cmp = report.comparison(&arm.name).ok_or_else(|| Error::Numerical(format!("no samples for {}", arm.name)))?;
            rows.push(SweepRow {
                p,
                a,
                mean_lor: arm.lor.mean,
                std_lor: arm.lor.std,
                voi: cmp.voi.voi,
                vcr: cmp.vcr.unwrap_or(f64::NAN),
            });
            k += 1;
        }
    }
    Ok((rows, report))
}
