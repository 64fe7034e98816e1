use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context};
use gridquake_core::network::CaseMetadata;
use gridquake_core::power_flow::{dispatch_dump, evaluate, FunctionalityEvaluator};
use gridquake_core::resilience::lor;
use gridquake_core::study::{draw_scenario, run_replicate, run_study_with_progress, sweep, sweep_csv};
use gridquake_core::{parse_case, parse_case_file, DamageScenario, NetworkCase, StudyReport};
use serde_json::json;

use crate::config::RunConfig;
use crate::output::Artifacts;
use crate::{usage, Overrides};

const SEED_ENV: &str = "GRIDQUAKE_SEED";

/// Flag, then config file, then environment.
fn resolve_seed(flag: Option<u64>, cfg: &RunConfig) -> anyhow::Result<u64> {
    if let Some(seed) = flag.or(cfg.seed) {
        return Ok(seed);
    }
    match std::env::var(SEED_ENV) {
        Ok(v) => v.trim().parse().map_err(|_| usage(anyhow!("{SEED_ENV}={v:?} is not a 64-bit unsigned integer"))),
        Err(_) => Err(usage(anyhow!("no seed: pass --seed, set `seed` in the config, or set {SEED_ENV}"))),
    }
}

struct Prepared {
    cfg: RunConfig,
    case: NetworkCase,
    seed: u64,
    out: Artifacts,
}

fn prepare(config: &Path, common: &Overrides, edit: impl FnOnce(&mut RunConfig)) -> anyhow::Result<Prepared> {
    let mut cfg = RunConfig::load(config).map_err(usage)?;
    if let Some(dir) = &common.out {
        cfg.output_dir = dir.clone();
    }
    edit(&mut cfg);
    let seed = resolve_seed(common.seed, &cfg)?;
    cfg.seed = Some(seed);
    cfg.validate().map_err(usage)?;
    let case = cfg.load_case().map_err(usage)?;
    let out = Artifacts::create(&cfg.output_dir, cfg.fingerprint(), seed)?;
    Ok(Prepared { cfg, case, seed, out })
}

pub struct SimulateArgs {
    pub arm: Option<String>,
    pub scenario: u64,
    pub replicate: u64,
    pub damage: Option<PathBuf>,
    pub scenario_dump: Option<PathBuf>,
}

pub fn simulate(config: &Path, common: &Overrides, args: SimulateArgs) -> anyhow::Result<()> {
    let Prepared { cfg, case, seed, out } = prepare(config, common, |cfg| {
        if let Some(d) = &args.damage {
            cfg.damage = Some(d.clone());
        }
    })?;
    let study = &cfg.study;
    let arm = match &args.arm {
        Some(name) => study
            .arms
            .iter()
            .find(|a| &a.name == name)
            .ok_or_else(|| usage(anyhow!("no arm named `{name}` in the config")))?,
        None => &study.arms[0],
    };

    let (field, damage) = match &cfg.damage {
        Some(path) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            let damage = DamageScenario::from_json(&case, &text)
                .with_context(|| format!("loading damage scenario {}", path.display()))
                .map_err(usage)?;
            (None, damage)
        }
        None => {
            let sampler = study.hazard.sampler(&case).map_err(usage)?;
            let (field, damage) = draw_scenario(&case, &sampler, &study.fragility, seed, args.scenario)?;
            (Some(field), damage)
        }
    };

    let state = evaluate(&case, &damage, &study.functionality)?;
    let mut evaluator = FunctionalityEvaluator::new(&case, &study.functionality);
    let traj = run_replicate(&damage, &arm.monitoring, &study.recovery, &mut evaluator, seed, args.scenario, args.replicate)?;
    let value = lor(&traj, case.f0(), study.recovery.horizon_days);

    if let Some(field) = &field {
        let mut body = String::from("component_id,kind,x_km,y_km,pga_g\n");
        for (c, pga) in case.components().iter().zip(field.values()) {
            let _ = writeln!(body, "{},{},{},{},{}", c.id, c.kind.label(), c.location.x, c.location.y, pga);
        }
        out.csv("intensity.csv", &body)?;
    }
    let described = damage.to_json_described(&case, &out.header());
    out.raw("damage.json", &described)?;
    if let Some(path) = &args.scenario_dump {
        std::fs::write(path, &described).with_context(|| format!("writing {}", path.display()))?;
    }
    out.json("dispatch.json", dispatch_dump(&case, &state))?;
    out.csv("trajectory.csv", &traj.trajectory_csv())?;
    out.csv("gantt.csv", &traj.gantt_csv(&case))?;

    let summary = json!({
        "arm": arm.name,
        "scenario": args.scenario,
        "replicate": args.replicate,
        "damage_source": if field.is_some() { "hazard" } else { "fixture" },
        "damaged_components": damage.damaged_count(),
        "baseline_mw": case.f0(),
        "initial_mw": state.served,
        "lor_mw_day": value,
        "full_recovery_days": traj.full_recovery_time,
        "truncated": traj.truncated,
        "gantt_rows": traj.gantt.len(),
        "discovered_tasks": traj.discovered_tasks,
    });
    out.json("summary.json", summary.clone())?;
    println!("{summary}");
    Ok(())
}

pub struct StudyArgs {
    pub scenarios: Option<usize>,
    pub perceptions: Option<usize>,
}

pub fn study(config: &Path, common: &Overrides, args: StudyArgs) -> anyhow::Result<()> {
    let Prepared { cfg, case, seed, out } = prepare(config, common, |cfg| {
        if let Some(n) = args.scenarios {
            cfg.study.scenarios = n;
        }
        if let Some(n) = args.perceptions {
            cfg.study.perceptions = n;
        }
    })?;
    let total = cfg.study.scenarios;
    let report = run_study_with_progress(&case, &cfg.study, seed, |done| log::info!("scenario {done}/{total} done"))?;
    write_study(&out, &report)?;

    let summary = json!({
        "arms": report.arms.iter().map(|a| json!({
            "name": a.name,
            "samples": a.samples.len(),
            "mean_lor": a.lor.mean,
            "ci_half": a.lor.ci_half,
            "converged": a.convergence.converged,
        })).collect::<Vec<_>>(),
        "comparisons": report.comparisons.iter().map(|c| json!({
            "baseline": c.baseline,
            "monitored": c.monitored,
            "voi": c.voi.voi,
            "relative_pct": c.voi.relative_pct,
            "ci": c.voi.paired.map(|p| [p.low, p.high]),
            "vcr": c.vcr,
        })).collect::<Vec<_>>(),
        "failed_replicates": report.failed_replicates,
    });
    println!("{summary}");
    if report.failed_replicates > 0 && report.arms.iter().all(|a| a.samples.is_empty()) {
        bail!("every replicate failed");
    }
    Ok(())
}

fn write_study(out: &Artifacts, report: &StudyReport) -> anyhow::Result<()> {
    out.json("report.json", serde_json::to_value(report)?)?;
    for (k, arm) in report.arms.iter().enumerate() {
        if let Some(band) = &arm.band {
            out.csv(&format!("band_{k}_{}.csv", file_safe(&arm.name)), &band.csv())?;
        }
    }
    out.csv("convergence.csv", &report.convergence_csv())?;
    let mut voi = String::from("baseline,monitored,voi_mw_day,relative_pct,ci_low,ci_high,vcr\n");
    for c in &report.comparisons {
        let (low, high) = c.voi.paired.map_or((f64::NAN, f64::NAN), |p| (p.low, p.high));
        let vcr = c.vcr.map_or(String::new(), |v| v.to_string());
        let _ = writeln!(voi, "{},{},{},{},{low},{high},{vcr}", c.baseline, c.monitored, c.voi.voi, c.voi.relative_pct);
    }
    out.csv("voi.csv", &voi)?;
    Ok(())
}

fn file_safe(name: &str) -> String {
    name.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '.' { c } else { '_' }).collect()
}

pub fn sweep_cmd(config: &Path, common: &Overrides, grid: Option<(Vec<f64>, Vec<f64>)>) -> anyhow::Result<()> {
    let Prepared { cfg, case, seed, out } = prepare(config, common, |cfg| {
        if let Some((p, a)) = grid {
            cfg.sweep.p = p;
            cfg.sweep.a = a;
        }
    })?;
    if cfg.sweep.p.is_empty() || cfg.sweep.a.is_empty() {
        return Err(usage(anyhow!("sweep grid is empty")));
    }
    if let Some(p) = cfg.sweep.p.iter().find(|p| !(**p > 0.0 && **p <= 1.0)) {
        return Err(usage(anyhow!("sweep coverage {p} outside (0, 1]")));
    }
    if let Some(a) = cfg.sweep.a.iter().find(|a| !(0.0..=1.0).contains(*a)) {
        return Err(usage(anyhow!("sweep accuracy {a} outside [0, 1]")));
    }
    let (rows, report) = sweep(&case, &cfg.study, &cfg.sweep.baseline, &cfg.sweep.p, &cfg.sweep.a, seed)?;
    out.csv("sweep.csv", &sweep_csv(&rows))?;
    out.json("sweep_report.json", serde_json::to_value(&report)?)?;
    println!("{}", json!({ "rows": rows, "failed_replicates": report.failed_replicates }));
    Ok(())
}

pub fn convert(case_path: &Path, meta: Option<&Path>, output: Option<&Path>) -> anyhow::Result<()> {
    let meta = meta
        .map(|p| -> anyhow::Result<CaseMetadata> {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            CaseMetadata::from_json(&text).with_context(|| format!("parsing {}", p.display()))
        })
        .transpose()
        .map_err(usage)?;
    let case = parse_case_file(case_path, meta.as_ref())
        .with_context(|| format!("converting {}", case_path.display()))
        .map_err(usage)?;
    let json = case.to_json();
    match output {
        Some(path) => std::fs::write(path, &json).with_context(|| format!("writing {}", path.display()))?,
        None => print!("{json}"),
    }
    Ok(())
}

pub fn validate_config(config: &Path, common: &Overrides) -> anyhow::Result<()> {
    let mut cfg = RunConfig::load(config).map_err(usage)?;
    if common.seed.is_some() {
        cfg.seed = common.seed;
    }
    cfg.validate().map_err(usage)?;
    let case = cfg.load_case().map_err(usage)?;
    let damaged = match &cfg.damage {
        Some(path) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            Some(DamageScenario::from_json(&case, &text).map_err(|e| usage(e))?.damaged_count())
        }
        None => None,
    };
    println!(
        "{}",
        json!({
            "valid": true,
            "case": case.name(),
            "buses": case.buses().len(),
            "components": case.components().len(),
            "arms": cfg.study.arms.iter().map(|a| &a.name).collect::<Vec<_>>(),
            "damaged_in_fixture": damaged,
            "config_sha256": cfg.fingerprint(),
        })
    );
    Ok(())
}

pub fn validate_case(path: &Path, meta: Option<&Path>) -> anyhow::Result<()> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display())).map_err(usage)?;
    let meta = match meta {
        Some(p) => Some(CaseMetadata::from_json(&std::fs::read_to_string(p)?).map_err(|e| usage(e))?),
        None => None,
    };
    let case = parse_case(&text, meta.as_ref()).map_err(|e| usage(e))?;
    println!(
        "{}",
        json!({
            "valid": true,
            "case": case.name(),
            "buses": case.buses().len(),
            "components": case.components().len(),
            "damageable": case.damageable_count(),
            "demand_mw": case.f0(),
        })
    );
    Ok(())
}
