//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails.

use std::collections::BTreeSet;
use std::io::Write;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use gridquake_core::fragility::{sample_scenario, DamageState};
use gridquake_core::hazard::IntensityField;
use gridquake_core::lp::{LinearProgram, LpOutcome, Relation};
use gridquake_core::network::{Branch, Bus, CostCoeffs, Generator, Load};
use gridquake_core::perception::{tridiagonal_confusion, PerceivedScenario};
use gridquake_core::power_flow::{build_islands, check_dispatch, evaluate, shed_and_solve, Ratios};
use gridquake_core::recovery::{simulate, RecoveryTrajectory};
use gridquake_core::resilience::{lor, lor_between};
use gridquake_core::rng::{replicate_stream, substream, Purpose};
use gridquake_core::study::{draw_scenario, run_replicate, sweep, Arm};
use gridquake_core::{
    run_study, ComponentKind, CostModel, DamageScenario, FunctionalityEvaluator, FunctionalityMap, MonitoringConfig,
    NetworkCase, Point, StudyConfig,
};
use rand::seq::SliceRandom;
use rand::Rng;
use statrs::distribution::{ContinuousCDF, Normal};

/// Master seed for every stochastic criterion, fixed before any run.
const SEED: u64 = 42;
const FIXTURE: &str = include_str!("../data/scenarios/two_islands.json");

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn criterion_1() -> Check {
    let case = NetworkCase::rts24();
    let start = Instant::now();
    let state = evaluate(&case, &DamageScenario::intact(&case), &FunctionalityMap::default()).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    ensure((state.served - 2850.0).abs() <= 1e-6, || format!("served {} MW, expected 2850 +/- 1e-6", state.served))?;
    ensure(elapsed < Duration::from_secs(1), || format!("took {elapsed:?}, limit 1 s"))?;
    Ok(format!("served {} MW (tol 1e-6) in {elapsed:.2?} (limit 1 s)", state.served))
}

fn criterion_2() -> Check {
    let case = NetworkCase::rts24();
    let damage = DamageScenario::from_json(&case, FIXTURE).map_err(|e| e.to_string())?;
    let state = evaluate(&case, &damage, &FunctionalityMap::default()).map_err(|e| e.to_string())?;
    let viable: Vec<_> = state.islands.iter().filter(|o| o.island.viable).collect();
    ensure(viable.len() == 2, || format!("{} viable islands, expected 2", viable.len()))?;
    let ids = |o: &gridquake_core::power_flow::IslandOutcome| -> BTreeSet<u32> {
        o.island.buses.iter().map(|&b| case.buses()[b].id).collect()
    };
    let first: BTreeSet<u32> = (1..=13).chain([24]).collect();
    let second: BTreeSet<u32> = (16..=22).collect();
    ensure(ids(viable[0]) == first, || format!("first island {:?}", ids(viable[0])))?;
    ensure(ids(viable[1]) == second, || format!("second island {:?}", ids(viable[1])))?;
    let (a, b) = (viable[0].total_served(), viable[1].total_served());
    ensure((a - 803.5).abs() <= 0.01, || format!("island 1 serves {a}, expected 803.5"))?;
    ensure((b - 568.75).abs() <= 0.01, || format!("island 2 serves {b}, expected 568.75"))?;
    ensure((state.served - 1372.25).abs() <= 0.01, || format!("total {}, expected 1372.25", state.served))?;
    Ok(format!("islands {{1-13,24}} {a:.2} MW + {{16-22}} {b:.2} MW = {:.2} MW (tol 0.01)", state.served))
}

fn criterion_3() -> Check {
    let case = NetworkCase::rts24();
    let sshm = MonitoringConfig { delay_sshm: 0.0, ..MonitoringConfig::sshm(0.9) };
    let inspection = MonitoringConfig { delay_inspect: Some(2.0), a_inspect: 0.7, ..MonitoringConfig::inspection() };
    let cfg = StudyConfig {
        arms: vec![Arm::new("inspection", inspection), Arm::new("sshm", sshm)],
        scenarios: 25,
        perceptions: 20,
        ..StudyConfig::default()
    };
    let start = Instant::now();
    let report = run_study(&case, &cfg, SEED).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    let cmp = report.comparison("sshm").ok_or("no comparison")?;
    let ci = cmp.voi.paired.ok_or("no paired interval")?;
    let detail = format!(
        "VoI {:.0} MW*day, 95% CI [{:.0}, {:.0}], reduction {:.1}% (band 5-40%), {elapsed:.1?} (limit 300 s)",
        cmp.voi.voi, ci.low, ci.high, cmp.voi.relative_pct
    );
    ensure(report.failed_replicates == 0, || format!("{} failed replicates", report.failed_replicates))?;
    ensure(cmp.voi.voi > 0.0 && ci.excludes_zero(), || detail.clone())?;
    ensure((5.0..=40.0).contains(&cmp.voi.relative_pct), || detail.clone())?;
    ensure(elapsed < Duration::from_secs(300), || detail.clone())?;
    Ok(detail)
}

fn same_bits(a: &RecoveryTrajectory, b: &RecoveryTrajectory) -> bool {
    let bits = |t: &RecoveryTrajectory| {
        let mut v: Vec<u64> = t.breakpoints.iter().flat_map(|(x, y)| [x.to_bits(), y.to_bits()]).collect();
        for task in &t.gantt {
            v.extend([task.start.to_bits(), task.end.to_bits(), task.duration.to_bits(), task.available_at.to_bits()]);
        }
        v
    };
    bits(a) == bits(b) && a == b
}

fn criterion_4() -> Check {
    let case = NetworkCase::rts24();
    let cfg = StudyConfig::default();
    let sampler = cfg.hazard.sampler(&case).map_err(|e| e.to_string())?;
    let perfect = MonitoringConfig::perfect();
    let mut evaluator = FunctionalityEvaluator::new(&case, &cfg.functionality);
    let mut runs = 0;
    for s in 0..10u64 {
        let (_, damage) = draw_scenario(&case, &sampler, &cfg.fragility, SEED, s).map_err(|e| e.to_string())?;
        for r in 0..5u64 {
            let monitored = run_replicate(&damage, &perfect, &cfg.recovery, &mut evaluator, SEED, s, r)
                .map_err(|e| e.to_string())?;
            let exact = simulate(
                &damage,
                &PerceivedScenario::exact(&damage),
                &cfg.recovery,
                &mut evaluator,
                &mut replicate_stream(SEED, s, r, Purpose::Repair),
            )
            .map_err(|e| e.to_string())?;
            ensure(same_bits(&monitored, &exact), || format!("scenario {s} replicate {r} differs"))?;
            runs += 1;
        }
    }
    Ok(format!("{runs} paired recoveries bitwise identical"))
}

fn criterion_5() -> Check {
    let case = NetworkCase::rts24();
    let map = FunctionalityMap::default();
    let cfg = StudyConfig::default();
    let sampler = cfg.hazard.sampler(&case).map_err(|e| e.to_string())?;
    let mut rng = substream(SEED, &[5]);
    let mut worst = 0.0f64;
    let mut dispatches = 0;
    for k in 0..500 {
        // half hazard-driven, half uniformly random states
        let damage = if k % 2 == 0 {
            let field = sampler.sample(&mut rng).map_err(|e| e.to_string())?;
            sample_scenario(&field, &case, &cfg.fragility, &mut rng).map_err(|e| e.to_string())?
        } else {
            let mut d = DamageScenario::intact(&case);
            for i in 0..case.components().len() {
                if case.components()[i].kind.is_damageable() && rng.random::<f64>() < 0.35 {
                    d.set(i, DamageState::ALL[rng.random_range(1..5)]);
                }
            }
            d
        };
        let ratios = Ratios::from_damage(&case, &damage, &map);
        let state = evaluate(&case, &damage, &map).map_err(|e| e.to_string())?;
        for o in &state.islands {
            if let Some(d) = &o.dispatch {
                worst = worst.max(check_dispatch(&case, &ratios, d).worst());
                dispatches += 1;
            }
            for (s, dem) in o.served.iter().zip(&o.demand) {
                ensure(*s <= dem + 1e-9, || format!("scenario {k}: served {s} above demand {dem}"))?;
            }
        }
    }
    ensure(worst <= 1e-6, || format!("worst violation {worst:e} MW over {dispatches} dispatches"))?;
    Ok(format!("500 scenarios, {dispatches} island dispatches, worst violation {worst:.1e} MW (tol 1e-6)"))
}

/// Random network with at most six buses; bus ids have gaps so ordering by
/// id and by index are both exercised.
fn random_case(rng: &mut impl Rng) -> NetworkCase {
    let nb = rng.random_range(2..=6);
    let mut ids: Vec<u32> = (1..=12).collect();
    ids.shuffle(rng);
    let mut ids: Vec<u32> = ids[..nb].to_vec();
    ids.sort_unstable();
    let buses = ids
        .iter()
        .map(|&id| Bus { id, base_kv: 138.0, location: Point::new(rng.random_range(0.0..50.0), rng.random_range(0.0..50.0)) })
        .collect();
    let pick = |rng: &mut dyn rand::RngCore| ids[rng.random_range(0..nb)];
    let mut branches = Vec::new();
    for _ in 0..rng.random_range(1..=8) {
        let from = pick(rng);
        let mut to = pick(rng);
        while to == from {
            to = pick(rng);
        }
        let rate = if rng.random::<f64>() < 0.2 { 1e4 } else { rng.random_range(10.0..150.0) };
        branches.push(Branch {
            from,
            to,
            reactance: rng.random_range(0.02..0.5),
            rate,
            is_substation: rng.random::<f64>() < 0.25,
        });
    }
    let generators = (0..rng.random_range(1..=3))
        .map(|_| {
            let pg_max = rng.random_range(20.0..200.0);
            let pg_min = if rng.random::<f64>() < 0.3 { rng.random_range(0.0..0.3) * pg_max } else { 0.0 };
            Generator {
                bus: pick(rng),
                pg_min,
                pg_max,
                cost: CostCoeffs { quadratic: rng.random_range(0.0..0.02), linear: rng.random_range(5.0..40.0), constant: 0.0 },
            }
        })
        .collect();
    let sizes = [10.0, 25.0, 40.0];
    let loads = (0..rng.random_range(1..=4))
        .map(|_| {
            // repeated sizes exercise the tie-break
            let pd = if rng.random::<f64>() < 0.4 { sizes[rng.random_range(0..3)] } else { rng.random_range(5.0..120.0) };
            Load { bus: pick(rng), pd }
        })
        .collect();
    NetworkCase::new("random", 100.0, buses, generators, loads, branches).expect("random case is valid")
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn find(&mut self, x: usize) -> usize {
        let p = self.0[x];
        if p == x {
            return x;
        }
        let root = self.find(p);
        self.0[x] = root;
        root
    }
    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        self.0[ra] = rb;
    }
}

/// Served MW on one island set of bus indices: drop the k smallest
/// positive loads for k = 0, 1, ... and test feasibility with a bus-angle
/// DC formulation.
fn oracle_served(case: &NetworkCase, ratios: &Ratios, island: &[usize]) -> f64 {
    let in_island = |b: usize| island.contains(&b);
    let base = case.base_mva();
    let gens: Vec<usize> = (0..case.generators().len())
        .filter(|&g| in_island(case.bus_position(case.generators()[g].bus).unwrap()))
        .filter(|&g| ratios.generator(case, g) > 0.0 && case.generators()[g].pg_max > 0.0)
        .collect();
    let loads: Vec<usize> =
        (0..case.loads().len()).filter(|&l| in_island(case.bus_position(case.loads()[l].bus).unwrap())).collect();
    let demand = |l: usize| ratios.load(case, l) * case.loads()[l].pd;
    let lines: Vec<usize> = (0..case.branches().len())
        .filter(|&br| {
            let (f, t) = case.branch_ends(br);
            in_island(f) && in_island(t) && ratios.branch(case, br) > 0.0
        })
        .collect();
    if gens.is_empty() {
        return 0.0;
    }
    let mut order: Vec<usize> = loads.iter().copied().filter(|&l| demand(l) > 0.0).collect();
    order.sort_by(|&a, &b| {
        demand(a).total_cmp(&demand(b)).then(case.loads()[a].bus.cmp(&case.loads()[b].bus)).then(a.cmp(&b))
    });
    for k in 0..=order.len() {
        let kept = &order[k..];
        if kept.is_empty() {
            return 0.0;
        }
        let mut lp = LinearProgram::new();
        // free angles as differences of two non-negative variables; island[0] is the reference
        let theta: Vec<Option<(usize, usize)>> = island
            .iter()
            .enumerate()
            .map(|(i, _)| (i > 0).then(|| (lp.add_var(0.0, f64::INFINITY), lp.add_var(0.0, f64::INFINITY))))
            .collect();
        let pos = |b: usize| island.iter().position(|&x| x == b).unwrap();
        let pg: Vec<usize> = gens
            .iter()
            .map(|&g| {
                let gen = &case.generators()[g];
                lp.add_var(0.0, ratios.generator(case, g) * (gen.pg_max - gen.pg_min))
            })
            .collect();
        let angle_terms = |b: usize, scale: f64| -> Vec<(usize, f64)> {
            match theta[pos(b)] {
                Some((p, m)) => vec![(p, scale), (m, -scale)],
                None => vec![],
            }
        };
        for &b in island {
            let mut row = Vec::new();
            let mut rhs = 0.0;
            for (k2, &g) in gens.iter().enumerate() {
                let gen = &case.generators()[g];
                if case.bus_position(gen.bus).unwrap() == b {
                    row.push((pg[k2], 1.0));
                    rhs -= ratios.generator(case, g) * gen.pg_min;
                }
            }
            for &l in kept {
                if case.bus_position(case.loads()[l].bus).unwrap() == b {
                    rhs += demand(l);
                }
            }
            for &br in &lines {
                let (f, t) = case.branch_ends(br);
                let s = base / case.branches()[br].reactance;
                if f == b || t == b {
                    let sign = if f == b { -1.0 } else { 1.0 };
                    row.extend(angle_terms(f, sign * s));
                    row.extend(angle_terms(t, -sign * s));
                }
            }
            lp.add_row(row, Relation::Eq, rhs);
        }
        for &br in &lines {
            let branch = &case.branches()[br];
            if branch.rate <= 0.0 {
                continue;
            }
            let (f, t) = case.branch_ends(br);
            let s = base / branch.reactance;
            let mut row = angle_terms(f, s);
            row.extend(angle_terms(t, -s));
            let cap = ratios.branch(case, br) * branch.rate;
            lp.add_row(row.clone(), Relation::Le, cap);
            lp.add_row(row, Relation::Ge, -cap);
        }
        match lp.solve().expect("oracle LP solves") {
            LpOutcome::Optimal { .. } => return kept.iter().map(|&l| demand(l)).sum(),
            LpOutcome::Infeasible => continue,
            LpOutcome::Unbounded => panic!("feasibility LP cannot be unbounded"),
        }
    }
    0.0
}

fn criterion_6() -> Check {
    let map = FunctionalityMap::default();
    let mut rng = substream(SEED, &[6]);
    let mut islands_checked = 0;
    let mut shed_cases = 0;
    for n in 0..200 {
        let case = random_case(&mut rng);
        let mut damage = DamageScenario::intact(&case);
        for i in 0..case.components().len() {
            if case.components()[i].kind.is_damageable() && rng.random::<f64>() < 0.3 {
                damage.set(i, DamageState::ALL[rng.random_range(1..5)]);
            }
        }
        let ratios = Ratios::from_damage(&case, &damage, &map);

        let nb = case.buses().len();
        let up: Vec<bool> = (0..nb).map(|b| ratios.bus(&case, b) > 0.0).collect();
        let mut uf = UnionFind((0..nb).collect());
        for br in 0..case.branches().len() {
            let (f, t) = case.branch_ends(br);
            if up[f] && up[t] && ratios.branch(&case, br) > 0.0 {
                uf.union(f, t);
            }
        }
        let mut expected: BTreeSet<BTreeSet<u32>> = BTreeSet::new();
        for root in 0..nb {
            let members: BTreeSet<u32> =
                (0..nb).filter(|&b| up[b] && uf.find(b) == root).map(|b| case.buses()[b].id).collect();
            if !members.is_empty() {
                expected.insert(members);
            }
        }
        let islands = build_islands(&case, &ratios);
        let got: BTreeSet<BTreeSet<u32>> =
            islands.iter().map(|i| i.buses.iter().map(|&b| case.buses()[b].id).collect()).collect();
        ensure(got == expected, || format!("network {n}: islands {got:?}, oracle {expected:?}"))?;

        for island in &islands {
            let outcome = shed_and_solve(&case, island, &ratios).map_err(|e| e.to_string())?;
            let mut members = island.buses.clone();
            members.sort_by_key(|&b| case.buses()[b].id);
            let oracle = oracle_served(&case, &ratios, &members);
            let got = outcome.total_served();
            ensure((got - oracle).abs() <= 1e-6, || {
                format!("network {n}: island {:?} serves {got}, oracle {oracle}", members)
            })?;
            islands_checked += 1;
            shed_cases += usize::from(!outcome.shed.is_empty());
        }
    }
    Ok(format!("200 networks, {islands_checked} islands match union-find and exhaustive shedding ({shed_cases} with shedding, tol 1e-6)"))
}

fn criterion_7() -> Check {
    let mut notes = Vec::new();

    // confusion draws
    let mut rng = substream(SEED, &[7, 1]);
    let mut worst_conf = 0.0f64;
    for a in [0.7, 0.9] {
        let m = tridiagonal_confusion(a).map_err(|e| e.to_string())?;
        for truth in DamageState::ALL {
            let mut counts = [0usize; 5];
            for _ in 0..10_000 {
                counts[m.draw(truth, rng.random()).index()] += 1;
            }
            for (k, &c) in counts.iter().enumerate() {
                worst_conf = worst_conf.max((c as f64 / 1e4 - m.row(truth)[k]).abs());
            }
        }
    }
    ensure(worst_conf <= 0.01, || format!("confusion frequency off by {worst_conf}"))?;
    notes.push(format!("confusion {worst_conf:.4} (tol 0.01)"));

    // fragility histogram against lognormal interval probabilities
    let case = NetworkCase::rts24();
    let frag = StudyConfig::default().fragility;
    let mut rng = substream(SEED, &[7, 2]);
    let mut worst_frag = 0.0f64;
    for pga in [0.15, 0.4, 0.8] {
        let field = IntensityField::uniform(&case, pga);
        let mut counts = [[0usize; 5]; 4];
        let mut totals = [0usize; 4];
        let kinds =
            [ComponentKind::BusNode, ComponentKind::GenerationPlant, ComponentKind::LoadUnit, ComponentKind::Substation];
        for _ in 0..2_000 {
            let d = sample_scenario(&field, &case, &frag, &mut rng).map_err(|e| e.to_string())?;
            for (i, c) in case.components().iter().enumerate() {
                if let Some(k) = kinds.iter().position(|&x| x == c.kind) {
                    counts[k][d.state(i).index()] += 1;
                    totals[k] += 1;
                }
            }
        }
        for (k, kind) in kinds.iter().enumerate() {
            let curves = frag.curves(*kind).unwrap();
            let mut exceed = [1.0f64; 6];
            exceed[5] = 0.0;
            for (j, cv) in curves.iter().enumerate() {
                let raw = Normal::new(cv.median.ln(), cv.beta).unwrap().cdf(pga.ln());
                exceed[j + 1] = raw.min(exceed[j]);
            }
            for s in 0..5 {
                let expected = exceed[s] - exceed[s + 1];
                let observed = counts[k][s] as f64 / totals[k] as f64;
                worst_frag = worst_frag.max((observed - expected).abs());
            }
        }
    }
    ensure(worst_frag <= 0.02, || format!("fragility frequency off by {worst_frag}"))?;
    notes.push(format!("fragility {worst_frag:.4} (tol 0.02)"));

    // spatial correlation of log-residuals between site pairs
    let cfg = StudyConfig::default();
    let sampler = cfg.hazard.sampler(&case).map_err(|e| e.to_string())?;
    let median = sampler.median_field();
    let sigma = cfg.hazard.fault.sigma_ln;
    let pairs = [("bus-1", "bus-2"), ("bus-3", "bus-24"), ("bus-15", "bus-21"), ("bus-1", "bus-22")];
    let idx: Vec<(usize, usize)> = pairs
        .iter()
        .map(|(a, b)| (case.component_position(a).unwrap(), case.component_position(b).unwrap()))
        .collect();
    let n = 10_000;
    let mut sums = vec![[0.0f64; 5]; idx.len()];
    let mut rng = substream(SEED, &[7, 3]);
    for _ in 0..n {
        let field = sampler.sample(&mut rng).map_err(|e| e.to_string())?;
        for (k, &(i, j)) in idx.iter().enumerate() {
            let x = (field.pga(i).ln() - median.pga(i).ln()) / sigma;
            let y = (field.pga(j).ln() - median.pga(j).ln()) / sigma;
            let s = &mut sums[k];
            s[0] += x;
            s[1] += y;
            s[2] += x * x;
            s[3] += y * y;
            s[4] += x * y;
        }
    }
    let mut worst_rho = 0.0f64;
    for (k, &(i, j)) in idx.iter().enumerate() {
        let nf = n as f64;
        let s = sums[k];
        let cov = s[4] / nf - s[0] / nf * s[1] / nf;
        let vx = s[2] / nf - (s[0] / nf).powi(2);
        let vy = s[3] / nf - (s[1] / nf).powi(2);
        let estimate = cov / (vx * vy).sqrt();
        let h = case.components()[i].location.distance(case.components()[j].location);
        let target = (-3.0 * h / cfg.hazard.correlation.range_km).exp();
        worst_rho = worst_rho.max((estimate - target).abs());
    }
    ensure(worst_rho <= 0.05, || format!("correlation off by {worst_rho}"))?;
    notes.push(format!("correlation {worst_rho:.4} (tol 0.05)"));
    Ok(notes.join(", "))
}

fn criterion_8() -> Check {
    let case = NetworkCase::rts24();
    let cfg = StudyConfig { scenarios: 10, perceptions: 10, ..StudyConfig::default() };
    let baseline = MonitoringConfig::inspection();
    let start = Instant::now();
    let (by_a, _) = sweep(&case, &cfg, &baseline, &[0.5], &[0.75, 0.85, 0.95], SEED).map_err(|e| e.to_string())?;
    let (by_p, _) = sweep(&case, &cfg, &baseline, &[0.1, 0.3, 0.5, 0.7], &[0.95], SEED).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    let a: Vec<f64> = by_a.iter().map(|r| r.mean_lor).collect();
    let p: Vec<f64> = by_p.iter().map(|r| r.mean_lor).collect();
    let fmt = |v: &[f64]| v.iter().map(|x| format!("{x:.0}")).collect::<Vec<_>>().join(" > ");
    let detail = format!("in a: {}; in p: {}; {elapsed:.1?} (limit 600 s)", fmt(&a), fmt(&p));
    ensure(a.windows(2).all(|w| w[1] < w[0]), || format!("not decreasing in a: {detail}"))?;
    ensure(p.windows(2).all(|w| w[1] < w[0]), || format!("not decreasing in p: {detail}"))?;
    ensure(elapsed < Duration::from_secs(600), || detail.clone())?;
    Ok(detail)
}

fn criterion_9() -> Check {
    let cm = CostModel::default();
    let cost = cm.cost(0.5, 0.95);
    let voll = cm.voll_per_mw_day();
    ensure(cost == 6_000_000.0, || format!("cost {cost}"))?;
    ensure(voll == 240_000.0, || format!("VOLL {voll}"))?;
    let vcr = cm.vcr(25.0, 0.5, 0.95).map_err(|e| e.to_string())?;
    ensure(vcr == 1.0, || format!("vcr {vcr}"))?;
    Ok(format!("Cost(0.5, 0.95) = {cost} USD, VOLL = {voll} USD/MW*day (exact)"))
}

fn criterion_10() -> Check {
    let f0 = 2850.0;
    // (breakpoints, horizon, hand-computed rectangle sum)
    let fixtures: [(Vec<(f64, f64)>, f64, f64); 4] = [
        (vec![(0.0, 2850.0)], 10.0, 0.0),
        (vec![(0.0, 0.0)], 3.5, 9975.0),
        (vec![(0.0, 1000.0), (0.5, 1500.0), (2.25, 2850.0)], 4.0, 1850.0 * 0.5 + 1350.0 * 1.75),
        (vec![(0.0, 1372.25), (6.25, 2000.5), (12.125, 2850.0)], 200.0, 1477.75 * 6.25 + 849.5 * 5.875),
    ];
    let mut splits = 0;
    for (bps, horizon, expected) in &fixtures {
        let traj = RecoveryTrajectory {
            breakpoints: bps.clone(),
            gantt: vec![],
            full_recovery_time: None,
            horizon: *horizon,
            truncated: false,
            initial_tasks: 0,
            discovered_tasks: 0,
        };
        let got = lor(&traj, f0, *horizon);
        ensure(got == *expected, || format!("{bps:?}: {got} != {expected}"))?;
        let mut cuts: Vec<f64> = bps.iter().map(|b| b.0).collect();
        cuts.extend((0..=64).map(|k| horizon * k as f64 / 64.0));
        for t in cuts {
            let sum = lor_between(bps, f0, 0.0, t) + lor_between(bps, f0, t, *horizon);
            ensure(sum == got, || format!("split at {t}: {sum} != {got}"))?;
            splits += 1;
        }
    }
    Ok(format!("{} staircases exact, {splits} splits additive (exact)", fixtures.len()))
}

fn main() {
    let criteria: [(u32, &str, fn() -> Check); 10] = [
        (1, "baseline functionality", criterion_1),
        (2, "fixture reproduction", criterion_2),
        (3, "directional value of information", criterion_3),
        (4, "perfect-information equivalence", criterion_4),
        (5, "dispatch feasibility", criterion_5),
        (6, "island and shedding oracles", criterion_6),
        (7, "statistical conformance", criterion_7),
        (8, "monotone sensitivity", criterion_8),
        (9, "cost arithmetic", criterion_9),
        (10, "loss-of-resilience quadrature", criterion_10),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    let mut err = std::io::stderr();
    for (id, name, check) in criteria {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str()) || *f == id.to_string()) {
            continue;
        }
        let result = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            Err(p.downcast_ref::<String>().cloned().or(p.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default())
        });
        let (tag, detail) = match result {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        let _ = writeln!(err, "{tag} criterion {id:>2} ({name}): {detail}");
    }
    if failed > 0 {
        let _ = writeln!(err, "{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
