//! Event-driven restoration: crews work through a static priority queue
//! built from perceived damage, while durations follow the true damage.

use std::fmt::Write as _;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fragility::{DamageScenario, DamageState};
use crate::network::{ComponentKind, NetworkCase};
use crate::perception::PerceivedScenario;
use crate::power_flow::FunctionalityEvaluator;

/// Mean and standard deviation of a repair duration, days.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Duration {
    pub mean: f64,
    pub std: f64,
}

const fn d(mean: f64, std: f64) -> Duration {
    Duration { mean, std }
}

/// Repair durations for DS1..DS4 per damageable kind.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RepairTable {
    pub bus: [Duration; 4],
    pub generator: [Duration; 4],
    pub load: [Duration; 4],
    pub substation: [Duration; 4],
    /// Lower truncation of every sampled duration, days.
    pub min_days: f64,
}

impl Default for RepairTable {
    fn default() -> Self {
        RepairTable {
            bus: [d(0.8, 0.4), d(2.5, 1.0), d(5.5, 2.0), d(7.0, 3.0)],
            generator: [d(0.5, 0.1), d(3.6, 3.6), d(22.0, 21.0), d(65.0, 30.0)],
            load: [d(0.3, 0.2), d(1.0, 0.5), d(3.0, 1.5), d(7.0, 3.0)],
            substation: [d(1.0, 0.6), d(3.0, 1.5), d(7.0, 3.5), d(30.0, 15.0)],
            min_days: 0.2,
        }
    }
}

impl RepairTable {
    pub fn params(&self, kind: ComponentKind, ds: DamageState) -> Option<Duration> {
        if ds == DamageState::None {
            return None;
        }
        let row = match kind {
            ComponentKind::BusNode => &self.bus,
            ComponentKind::GenerationPlant => &self.generator,
            ComponentKind::LoadUnit => &self.load,
            ComponentKind::Substation => &self.substation,
            ComponentKind::TransmissionLine => return None,
        };
        Some(row[ds.index() - 1])
    }

    /// Duration for a given standard-normal draw `z`.
    pub fn duration(&self, kind: ComponentKind, ds: DamageState, z: f64) -> Option<f64> {
        self.params(kind, ds).map(|p| (p.mean + p.std * z).max(self.min_days))
    }

    pub fn validate(&self) -> Result<()> {
        let rows = [&self.bus, &self.generator, &self.load, &self.substation];
        if rows.iter().flat_map(|r| r.iter()).any(|p| !(p.mean > 0.0 && p.std >= 0.0 && p.mean.is_finite() && p.std.is_finite())) {
            return Err(Error::Config("repair durations need positive means and non-negative deviations".into()));
        }
        if !(self.min_days > 0.0) {
            return Err(Error::Config("minimum repair duration must be positive".into()));
        }
        Ok(())
    }
}

pub fn sample_duration<R: Rng + ?Sized>(kind: ComponentKind, ds: DamageState, table: &RepairTable, rng: &mut R) -> Result<f64> {
    let z: f64 = rng.sample(StandardNormal);
    table
        .duration(kind, ds, z)
        .ok_or_else(|| Error::Contract(format!("no repair duration for {} at {}", kind.label(), ds.label())))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CrewPool {
    pub crews: usize,
    /// Travel and mobilisation before each task, days.
    pub transfer_days: f64,
}

impl Default for CrewPool {
    fn default() -> Self {
        CrewPool { crews: 3, transfer_days: 0.25 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RecoveryConfig {
    pub crew_pool: CrewPool,
    pub repair: RepairTable,
    /// Simulation and integration horizon, days.
    pub horizon_days: f64,
    /// Time a crew spends confirming that a reported component is intact.
    pub false_positive_days: f64,
}

impl Default for RecoveryConfig {
    fn default() -> Self {
        RecoveryConfig { crew_pool: CrewPool::default(), repair: RepairTable::default(), horizon_days: 200.0, false_positive_days: 0.2 }
    }
}

impl RecoveryConfig {
    pub fn validate(&self) -> Result<()> {
        if self.crew_pool.crews == 0 {
            return Err(Error::Config("at least one crew is required".into()));
        }
        if !(self.crew_pool.transfer_days >= 0.0 && self.crew_pool.transfer_days.is_finite()) {
            return Err(Error::Config("transfer time must be non-negative".into()));
        }
        if !(self.horizon_days > 0.0 && self.horizon_days.is_finite()) {
            return Err(Error::Config("horizon must be positive".into()));
        }
        if !(self.false_positive_days >= 0.0) {
            return Err(Error::Config("false-positive visit time must be non-negative".into()));
        }
        self.repair.validate()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RepairTask {
    pub component: usize,
    pub kind: ComponentKind,
    pub perceived: DamageState,
    pub truth: DamageState,
    pub duration: f64,
    pub available_at: f64,
    pub start: f64,
    pub end: f64,
    pub crew: usize,
    pub rediscovery: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecoveryTrajectory {
    /// `(t, served MW)`; strictly increasing in t, piecewise constant.
    pub breakpoints: Vec<(f64, f64)>,
    pub gantt: Vec<RepairTask>,
    pub full_recovery_time: Option<f64>,
    pub horizon: f64,
    pub truncated: bool,
    pub initial_tasks: usize,
    pub discovered_tasks: usize,
}

impl RecoveryTrajectory {
    pub fn initial_functionality(&self) -> f64 {
        self.breakpoints[0].1
    }

    /// Served MW at time t (right-continuous).
    pub fn at(&self, t: f64) -> f64 {
        let k = self.breakpoints.partition_point(|&(bt, _)| bt <= t);
        self.breakpoints[k.saturating_sub(1)].1
    }

    pub fn trajectory_csv(&self) -> String {
        let mut out = String::from("t_days,F_MW\n");
        for (t, f) in &self.breakpoints {
            let _ = writeln!(out, "{t},{f}");
        }
        out
    }

    pub fn gantt_csv(&self, case: &NetworkCase) -> String {
        let mut out = String::from("component_id,kind,true_ds,perceived_ds,crew,start,end,is_rediscovery\n");
        for task in &self.gantt {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                case.components()[task.component].id,
                task.kind.label(),
                task.truth.label(),
                task.perceived.label(),
                task.crew,
                task.start,
                task.end,
                task.rediscovery
            );
        }
        out
    }
}

/// Type rank used for repair ordering: buses, generators, loads, substations.
fn type_rank(kind: ComponentKind) -> u8 {
    match kind {
        ComponentKind::BusNode => 0,
        ComponentKind::GenerationPlant => 1,
        ComponentKind::LoadUnit => 2,
        ComponentKind::Substation => 3,
        ComponentKind::TransmissionLine => 4,
    }
}

/// Sort components by type, then descending capacity, then index.
pub fn priority_order(case: &NetworkCase, components: &mut [usize]) {
    components.sort_by(|&a, &b| {
        let (ka, kb) = (case.components()[a].kind, case.components()[b].kind);
        type_rank(ka)
            .cmp(&type_rank(kb))
            .then(case.capacity_rank(b).total_cmp(&case.capacity_rank(a)))
            .then(a.cmp(&b))
    });
}

/// Components perceived as damaged, in repair order.
pub fn build_queue(case: &NetworkCase, perceived: &PerceivedScenario) -> Vec<usize> {
    let mut queue: Vec<usize> = (0..case.components().len())
        .filter(|&i| case.components()[i].kind.is_damageable() && perceived.perceived[i] != DamageState::None)
        .collect();
    priority_order(case, &mut queue);
    queue
}

struct Pending {
    component: usize,
    duration: f64,
    available_at: f64,
    rediscovery: bool,
}

/// Run the restoration loop until every queued task is done or the horizon
/// is reached.
///
/// One standard-normal draw per component (in component order) is taken
/// from `rng` up front; durations are computed from the true damage state
/// so runs sharing a stream see identical work regardless of perception.
pub fn simulate<R: Rng + ?Sized>(
    truth: &DamageScenario,
    perceived: &PerceivedScenario,
    cfg: &RecoveryConfig,
    evaluator: &mut FunctionalityEvaluator<'_>,
    rng: &mut R,
) -> Result<RecoveryTrajectory> {
    let case = evaluator.case();
    let map = evaluator.map();
    let n = case.components().len();
    if truth.states().len() != n || perceived.perceived.len() != n || perceived.available_at.len() != n {
        return Err(Error::Contract("damage, perception and case cover different components".into()));
    }
    let z: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
    let work = |i: usize| -> f64 {
        let kind = case.components()[i].kind;
        cfg.repair.duration(kind, truth.state(i), z[i]).unwrap_or(cfg.false_positive_days)
    };

    let mut queued = vec![false; n];
    let mut queue: Vec<Pending> = build_queue(case, perceived)
        .into_iter()
        .map(|i| {
            queued[i] = true;
            Pending { component: i, duration: work(i), available_at: perceived.available_at[i], rediscovery: false }
        })
        .collect();
    let initial_tasks = queue.len();
    let mut discovered_tasks = 0;
    let mut discovery_done = false;

    let mut state = truth.clone();
    let f0 = case.f0();
    let mut breakpoints = vec![(0.0, evaluator.served(&state)?)];
    let mut crews: Vec<Option<RepairTask>> = vec![None; cfg.crew_pool.crews];
    let mut gantt = Vec::new();
    let mut truncated = false;
    let mut t = 0.0;

    loop {
        // completions due now
        let mut changed = false;
        for slot in crews.iter_mut() {
            if slot.as_ref().is_some_and(|task| task.end <= t) {
                let task = slot.take().expect("checked");
                if state.state(task.component) != DamageState::None {
                    state.set(task.component, DamageState::None);
                    changed = true;
                }
                gantt.push(task);
            }
        }
        if changed {
            let f = evaluator.served(&state)?;
            let last = breakpoints.last_mut().expect("non-empty");
            if last.0 == t {
                last.1 = f;
            } else if last.1 != f {
                breakpoints.push((t, f));
            }
        }

        // missed damage surfaces once the planned work is finished
        if !discovery_done && queue.is_empty() && crews.iter().all(Option::is_none) {
            discovery_done = true;
            let mut missed: Vec<usize> = (0..n)
                .filter(|&i| case.components()[i].kind.is_damageable() && !queued[i] && state.ratio(case, i, map) < 1.0)
                .collect();
            priority_order(case, &mut missed);
            for i in missed {
                queued[i] = true;
                discovered_tasks += 1;
                queue.push(Pending {
                    component: i,
                    duration: work(i) * perceived.rediscovery_penalty,
                    available_at: t,
                    rediscovery: true,
                });
            }
        }

        for (crew, slot) in crews.iter_mut().enumerate() {
            if slot.is_some() {
                continue;
            }
            let Some(k) = queue.iter().position(|p| p.available_at <= t) else { break };
            let p = queue.remove(k);
            let start = t + cfg.crew_pool.transfer_days;
            *slot = Some(RepairTask {
                component: p.component,
                kind: case.components()[p.component].kind,
                perceived: perceived.perceived[p.component],
                truth: truth.state(p.component),
                duration: p.duration,
                available_at: p.available_at,
                start,
                end: start + p.duration,
                crew,
                rediscovery: p.rediscovery,
            });
        }

        let next_completion = crews.iter().flatten().map(|task| task.end).fold(f64::INFINITY, f64::min);
        let next_release = if crews.iter().any(Option::is_none) {
            queue.iter().map(|p| p.available_at).filter(|&a| a > t).fold(f64::INFINITY, f64::min)
        } else {
            f64::INFINITY
        };
        let next = next_completion.min(next_release);
        if next.is_infinite() {
            break;
        }
        if next > cfg.horizon_days {
            truncated = true;
            break;
        }
        t = next;
    }

    let full_recovery_time = breakpoints.iter().find(|(_, f)| *f >= f0 - 1e-6).map(|&(t, _)| t);
    Ok(RecoveryTrajectory {
        breakpoints,
        gantt,
        full_recovery_time,
        horizon: cfg.horizon_days,
        truncated,
        initial_tasks,
        discovered_tasks,
    })
}
