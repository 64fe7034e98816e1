//! System functionality: island detection, DC optimal power flow on each
//! viable island, and smallest-load-first shedding.

use std::collections::{HashMap, VecDeque};

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fragility::{DamageScenario, DamageState, FunctionalityMap};
use crate::lp::{LinearProgram, LpOutcome, Relation};
use crate::network::{adjacency, Adjacency, NetworkCase};

/// Tolerance for the post-hoc constraint check, MW.
pub const CHECK_TOL_MW: f64 = 1e-6;

/// Connected components of an adjacency matrix, each sorted ascending and
/// the list ordered by smallest member. Isolated nodes are singletons.
pub fn find_islands(adj: &Adjacency) -> Vec<Vec<usize>> {
    let n = adj.size();
    let mut seen = vec![false; n];
    let mut out = Vec::new();
    for start in 0..n {
        if seen[start] {
            continue;
        }
        seen[start] = true;
        let mut members = vec![start];
        let mut queue = VecDeque::from([start]);
        while let Some(u) = queue.pop_front() {
            for v in adj.neighbors(u) {
                if !seen[v] {
                    seen[v] = true;
                    members.push(v);
                    queue.push_back(v);
                }
            }
        }
        members.sort_unstable();
        out.push(members);
    }
    out
}

/// Residual capacity of every component, indexed like the case components.
#[derive(Clone, Debug, PartialEq)]
pub struct Ratios(pub Vec<f64>);

impl Ratios {
    pub fn from_damage(case: &NetworkCase, damage: &DamageScenario, map: &FunctionalityMap) -> Self {
        Ratios((0..case.components().len()).map(|i| damage.ratio(case, i, map)).collect())
    }

    pub fn bus(&self, case: &NetworkCase, b: usize) -> f64 {
        self.0[case.bus_component(b)]
    }
    pub fn generator(&self, case: &NetworkCase, g: usize) -> f64 {
        self.0[case.generator_component(g)]
    }
    pub fn load(&self, case: &NetworkCase, l: usize) -> f64 {
        self.0[case.load_component(l)]
    }
    pub fn branch(&self, case: &NetworkCase, br: usize) -> f64 {
        self.0[case.branch_component(br)]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Island {
    /// Bus-table indices, sorted.
    pub buses: Vec<usize>,
    pub generators: Vec<usize>,
    pub loads: Vec<usize>,
    pub branches: Vec<usize>,
    pub viable: bool,
}

/// Islands of functional buses under the given residual capacities.
pub fn build_islands(case: &NetworkCase, ratios: &Ratios) -> Vec<Island> {
    let n = case.buses().len();
    let bus_up: Vec<bool> = (0..n).map(|b| ratios.bus(case, b) > 0.0).collect();
    let edges: Vec<usize> = (0..case.branches().len())
        .filter(|&br| {
            let (f, t) = case.branch_ends(br);
            bus_up[f] && bus_up[t] && ratios.branch(case, br) > 0.0
        })
        .collect();
    let adj = Adjacency::from_edges(n, edges.iter().map(|&br| case.branch_ends(br)));
    let mut groups = find_islands(&adj);
    groups.retain(|g| bus_up[g[0]]);
    groups.sort_by_key(|g| g.iter().map(|&b| case.buses()[b].id).min());
    let mut island_of = vec![usize::MAX; n];
    for (k, g) in groups.iter().enumerate() {
        for &b in g {
            island_of[b] = k;
        }
    }
    let mut islands: Vec<Island> = groups
        .into_iter()
        .map(|mut buses| {
            buses.sort_by_key(|&b| case.buses()[b].id);
            Island { buses, generators: vec![], loads: vec![], branches: vec![], viable: false }
        })
        .collect();
    for (g, gen) in case.generators().iter().enumerate() {
        let b = case.bus_position(gen.bus).expect("validated case");
        if island_of[b] != usize::MAX {
            islands[island_of[b]].generators.push(g);
        }
    }
    for (l, load) in case.loads().iter().enumerate() {
        let b = case.bus_position(load.bus).expect("validated case");
        if island_of[b] != usize::MAX {
            islands[island_of[b]].loads.push(l);
        }
    }
    for br in edges {
        let (f, _) = case.branch_ends(br);
        islands[island_of[f]].branches.push(br);
    }
    for isl in &mut islands {
        let has_gen = isl.generators.iter().any(|&g| ratios.generator(case, g) * case.generators()[g].pg_max > 0.0);
        let has_load = isl.loads.iter().any(|&l| ratios.load(case, l) * case.loads()[l].pd > 0.0);
        isl.viable = has_gen && has_load;
    }
    islands
}

/// Outcome of one optimal power flow attempt on an island.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DispatchResult {
    pub generators: Vec<usize>,
    /// MW, aligned with `generators`.
    pub pg: Vec<f64>,
    pub buses: Vec<usize>,
    /// Radians, aligned with `buses`; the first bus is the reference.
    pub theta: Vec<f64>,
    pub branches: Vec<usize>,
    /// MW from the branch's `from` bus, aligned with `branches`.
    pub flow: Vec<f64>,
    pub loads: Vec<usize>,
    /// MW, aligned with `loads`.
    pub served: Vec<f64>,
    pub cost: f64,
}

/// Number of linear pieces approximating each quadratic cost curve.
pub const COST_SEGMENTS: usize = 4;

/// DC OPF on one island with fixed per-load demands (MW, indexed by load).
///
/// Line flows are expressed through injection shift factors, so the LP only
/// carries generator segments; line limits are added as rows on demand
/// until the solution respects all of them. Returns `None` when no dispatch
/// satisfies balance, line and generator limits.
pub fn dcopf(case: &NetworkCase, island: &Island, ratios: &Ratios, demand: &[f64]) -> Result<Option<DispatchResult>> {
    let base = case.base_mva();
    let nb = island.buses.len();
    let local: HashMap<usize, usize> = island.buses.iter().enumerate().map(|(k, &b)| (b, k)).collect();

    let sens = ShiftFactors::new(case, island, &local)?;

    // fixed part of each bus injection, per unit
    let mut fixed = vec![0.0; nb];
    for &l in &island.loads {
        let b = local[&case.bus_position(case.loads()[l].bus).expect("validated case")];
        fixed[b] -= demand[l] / base;
    }
    let mut lp = LinearProgram::new();
    // (generator, local bus, pmin MW, segment vars, segment width MW)
    let mut units: Vec<(usize, usize, f64, Vec<usize>, f64)> = Vec::new();
    for &g in &island.generators {
        let gen = &case.generators()[g];
        let alpha = ratios.generator(case, g);
        if alpha <= 0.0 || gen.pg_max <= 0.0 {
            continue;
        }
        let b = local[&case.bus_position(gen.bus).expect("validated case")];
        let lo = alpha * gen.pg_min;
        let hi = alpha * gen.pg_max;
        fixed[b] += lo / base;
        let width = (hi - lo) / COST_SEGMENTS as f64;
        let mut vars = Vec::new();
        if width > 0.0 {
            for k in 0..COST_SEGMENTS {
                let p0 = lo + width * k as f64;
                let slope = (gen.cost.eval(p0 + width) - gen.cost.eval(p0)) / width;
                vars.push(lp.add_var(slope, width / base));
            }
        }
        units.push((g, b, lo, vars, width));
    }
    let balance_rhs = -fixed.iter().sum::<f64>();
    lp.add_row(
        units.iter().flat_map(|u| u.3.iter().map(|&v| (v, 1.0))).collect(),
        Relation::Eq,
        balance_rhs,
    );

    let caps: Vec<Option<f64>> = island
        .branches
        .iter()
        .map(|&br| {
            let rate = case.branches()[br].rate;
            (rate > 0.0).then(|| ratios.branch(case, br) * rate / base)
        })
        .collect();
    let fixed_flow: Vec<f64> = (0..island.branches.len()).map(|k| sens.flow(k, &fixed)).collect();
    let mut added = vec![[false; 2]; island.branches.len()];
    let max_rounds = 2 * island.branches.len() + 1;
    for _ in 0..=max_rounds {
        let x = match lp.solve()? {
            LpOutcome::Optimal { x, .. } => x,
            LpOutcome::Infeasible => return Ok(None),
            LpOutcome::Unbounded => return Err(Error::Numerical("dispatch LP unbounded".into())),
        };
        let mut inj = fixed.clone();
        for (_, b, _, vars, _) in &units {
            inj[*b] += vars.iter().map(|&v| x[v]).sum::<f64>();
        }
        let mut violated = false;
        for (k, cap) in caps.iter().enumerate() {
            let Some(cap) = *cap else { continue };
            let f = sens.flow(k, &inj);
            for (side, sign) in [(0, 1.0), (1, -1.0)] {
                if sign * f > cap + 1e-9 && !added[k][side] {
                    added[k][side] = true;
                    violated = true;
                    let coeffs = units
                        .iter()
                        .flat_map(|(_, b, _, vars, _)| {
                            let s = sign * sens.factor(k, *b);
                            vars.iter().map(move |&v| (v, s))
                        })
                        .filter(|(_, s)| *s != 0.0)
                        .collect();
                    lp.add_row(coeffs, Relation::Le, cap - sign * fixed_flow[k]);
                }
            }
        }
        if violated {
            continue;
        }
        let theta = sens.angles(&inj);
        let pg: Vec<f64> = units.iter().map(|(_, _, lo, vars, _)| lo + base * vars.iter().map(|&v| x[v]).sum::<f64>()).collect();
        let cost = units
            .iter()
            .zip(&pg)
            .map(|((g, ..), p)| case.generators()[*g].cost.eval(*p))
            .sum();
        let flow = (0..island.branches.len()).map(|k| sens.flow(k, &inj) * base).collect();
        return Ok(Some(DispatchResult {
            generators: units.iter().map(|u| u.0).collect(),
            pg,
            buses: island.buses.clone(),
            theta,
            branches: island.branches.clone(),
            flow,
            loads: island.loads.clone(),
            served: island.loads.iter().map(|&l| demand[l]).collect(),
            cost,
        }));
    }
    Err(Error::Numerical("line-limit constraint generation did not settle".into()))
}

/// DC sensitivities of one island: bus angles and branch flows as linear
/// functions of nodal injections (reference bus = first island bus).
struct ShiftFactors {
    /// Reactance matrix with a zero row/column for the reference bus.
    x: DMatrix<f64>,
    ends: Vec<(usize, usize, f64)>,
}

impl ShiftFactors {
    fn new(case: &NetworkCase, island: &Island, local: &HashMap<usize, usize>) -> Result<Self> {
        let nb = island.buses.len();
        let ends: Vec<(usize, usize, f64)> = island
            .branches
            .iter()
            .map(|&br| {
                let (f, t) = case.branch_ends(br);
                (local[&f], local[&t], case.branches()[br].reactance)
            })
            .collect();
        let mut x = DMatrix::zeros(nb, nb);
        if nb > 1 {
            let mut b = DMatrix::<f64>::zeros(nb - 1, nb - 1);
            for &(f, t, react) in &ends {
                let s = 1.0 / react;
                for (i, j, v) in [(f, f, s), (t, t, s), (f, t, -s), (t, f, -s)] {
                    if i > 0 && j > 0 {
                        b[(i - 1, j - 1)] += v;
                    }
                }
            }
            let inv = b
                .try_inverse()
                .ok_or_else(|| Error::Numerical("island susceptance matrix is singular".into()))?;
            x.view_mut((1, 1), (nb - 1, nb - 1)).copy_from(&inv);
        }
        Ok(ShiftFactors { x, ends })
    }

    fn factor(&self, k: usize, bus: usize) -> f64 {
        let (f, t, react) = self.ends[k];
        (self.x[(f, bus)] - self.x[(t, bus)]) / react
    }

    /// Per-unit flow on island branch `k` for per-unit injections.
    fn flow(&self, k: usize, inj: &[f64]) -> f64 {
        inj.iter().enumerate().map(|(b, p)| self.factor(k, b) * p).sum()
    }

    fn angles(&self, inj: &[f64]) -> Vec<f64> {
        (0..inj.len()).map(|i| (0..inj.len()).map(|j| self.x[(i, j)] * inj[j]).sum()).collect()
    }
}

/// Worst violations of the three constraint families, MW.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct DispatchCheck {
    pub balance: f64,
    pub line: f64,
    pub generator: f64,
}

impl DispatchCheck {
    pub fn worst(&self) -> f64 {
        self.balance.max(self.line).max(self.generator)
    }
}

/// Re-derive flows from the reported angles and measure constraint
/// violations without touching solver internals.
pub fn check_dispatch(case: &NetworkCase, ratios: &Ratios, d: &DispatchResult) -> DispatchCheck {
    let base = case.base_mva();
    let theta_of: HashMap<usize, f64> = d.buses.iter().copied().zip(d.theta.iter().copied()).collect();
    let mut net: HashMap<usize, f64> = d.buses.iter().map(|&b| (b, 0.0)).collect();
    let mut out = DispatchCheck::default();
    for (&g, &p) in d.generators.iter().zip(&d.pg) {
        let gen = &case.generators()[g];
        let alpha = ratios.generator(case, g);
        out.generator = out.generator.max(alpha * gen.pg_min - p).max(p - alpha * gen.pg_max);
        *net.get_mut(&case.bus_position(gen.bus).unwrap()).unwrap() += p;
    }
    for (&l, &s) in d.loads.iter().zip(&d.served) {
        *net.get_mut(&case.bus_position(case.loads()[l].bus).unwrap()).unwrap() -= s;
    }
    for &br in &d.branches {
        let (f, t) = case.branch_ends(br);
        let branch = &case.branches()[br];
        let flow = (theta_of[&f] - theta_of[&t]) / branch.reactance * base;
        if branch.rate > 0.0 {
            out.line = out.line.max(flow.abs() - ratios.branch(case, br) * branch.rate);
        }
        *net.get_mut(&f).unwrap() -= flow;
        *net.get_mut(&t).unwrap() += flow;
    }
    out.balance = net.values().fold(0.0f64, |m, v| m.max(v.abs()));
    out
}

/// Island result after shedding.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IslandOutcome {
    pub island: Island,
    /// Residual demand before shedding, MW per island load.
    pub demand: Vec<f64>,
    /// Served MW per island load (zero for shed loads).
    pub served: Vec<f64>,
    /// Load indices in shedding order.
    pub shed: Vec<usize>,
    pub dispatch: Option<DispatchResult>,
}

impl IslandOutcome {
    pub fn total_served(&self) -> f64 {
        self.served.iter().sum()
    }
}

/// Solve, and while infeasible drop the smallest remaining non-zero load
/// (ties to the lowest bus id) and retry, at most once per island load.
pub fn shed_and_solve(case: &NetworkCase, island: &Island, ratios: &Ratios) -> Result<IslandOutcome> {
    let mut demand = vec![0.0; case.loads().len()];
    for &l in &island.loads {
        demand[l] = ratios.load(case, l) * case.loads()[l].pd;
    }
    let initial: Vec<f64> = island.loads.iter().map(|&l| demand[l]).collect();
    let mut shed = Vec::new();
    let mut dispatch = None;
    if island.viable {
        for _ in 0..=island.loads.len() {
            if !island.loads.iter().any(|&l| demand[l] > 0.0) {
                break;
            }
            if let Some(d) = dcopf(case, island, ratios, &demand)? {
                dispatch = Some(d);
                break;
            }
            let next = island
                .loads
                .iter()
                .copied()
                .filter(|&l| demand[l] > 0.0)
                .min_by(|&a, &b| {
                    demand[a]
                        .total_cmp(&demand[b])
                        .then(case.loads()[a].bus.cmp(&case.loads()[b].bus))
                        .then(a.cmp(&b))
                })
                .expect("checked non-empty");
            demand[next] = 0.0;
            shed.push(next);
        }
        if dispatch.is_none() {
            log::debug!("island at bus {} serves nothing after shedding", case.buses()[island.buses[0]].id);
        }
    }
    let served = match &dispatch {
        Some(d) => d.served.clone(),
        None => vec![0.0; island.loads.len()],
    };
    Ok(IslandOutcome { island: island.clone(), demand: initial, served, shed, dispatch })
}

/// Full functionality evaluation of one damage state.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NetworkState {
    pub islands: Vec<IslandOutcome>,
    pub served: f64,
}

pub fn evaluate(case: &NetworkCase, damage: &DamageScenario, map: &FunctionalityMap) -> Result<NetworkState> {
    let ratios = Ratios::from_damage(case, damage, map);
    evaluate_ratios(case, &ratios)
}

pub fn evaluate_ratios(case: &NetworkCase, ratios: &Ratios) -> Result<NetworkState> {
    let mut islands = Vec::new();
    for island in build_islands(case, ratios) {
        islands.push(shed_and_solve(case, &island, ratios)?);
    }
    let served = islands.iter().map(IslandOutcome::total_served).sum::<f64>().clamp(0.0, case.f0());
    Ok(NetworkState { islands, served })
}

/// Served MW summed over all islands.
pub fn system_functionality(case: &NetworkCase, damage: &DamageScenario, map: &FunctionalityMap) -> Result<f64> {
    Ok(evaluate(case, damage, map)?.served)
}

/// Human-oriented dump of a [`NetworkState`] using case ids.
pub fn dispatch_dump(case: &NetworkCase, state: &NetworkState) -> serde_json::Value {
    let islands: Vec<serde_json::Value> = state
        .islands
        .iter()
        .map(|o| {
            let bus_ids: Vec<u32> = o.island.buses.iter().map(|&b| case.buses()[b].id).collect();
            let load_id = |l: usize| case.components()[case.load_component(l)].id.clone();
            let gen_id = |g: usize| case.components()[case.generator_component(g)].id.clone();
            let mut entry = serde_json::json!({
                "buses": bus_ids,
                "viable": o.island.viable,
                "demand_mw": o.demand.iter().sum::<f64>(),
                "served_mw": o.total_served(),
                "shed": o.shed.iter().map(|&l| load_id(l)).collect::<Vec<_>>(),
                "loads": o.island.loads.iter().zip(&o.served).map(|(&l, s)| serde_json::json!({"id": load_id(l), "served_mw": s})).collect::<Vec<_>>(),
            });
            if let Some(d) = &o.dispatch {
                entry["generation"] = d
                    .generators
                    .iter()
                    .zip(&d.pg)
                    .map(|(&g, p)| serde_json::json!({"id": gen_id(g), "pg_mw": p}))
                    .collect();
                entry["flows"] = d
                    .branches
                    .iter()
                    .zip(&d.flow)
                    .map(|(&br, f)| serde_json::json!({"id": case.components()[case.branch_component(br)].id, "mw": f}))
                    .collect();
                entry["cost"] = d.cost.into();
            }
            entry
        })
        .collect();
    serde_json::json!({ "served_mw": state.served, "islands": islands })
}

/// Memoizing wrapper around [`system_functionality`], keyed by the full
/// damage-state vector. One evaluator per worker; not shared across threads.
pub struct FunctionalityEvaluator<'a> {
    case: &'a NetworkCase,
    map: &'a FunctionalityMap,
    cache: HashMap<Vec<DamageState>, f64>,
}

impl<'a> FunctionalityEvaluator<'a> {
    pub fn new(case: &'a NetworkCase, map: &'a FunctionalityMap) -> Self {
        FunctionalityEvaluator { case, map, cache: HashMap::new() }
    }

    pub fn served(&mut self, damage: &DamageScenario) -> Result<f64> {
        if let Some(&v) = self.cache.get(damage.states()) {
            return Ok(v);
        }
        let v = system_functionality(self.case, damage, self.map)?;
        self.cache.insert(damage.states().to_vec(), v);
        Ok(v)
    }

    pub fn cached(&self) -> usize {
        self.cache.len()
    }

    pub fn case(&self) -> &'a NetworkCase {
        self.case
    }

    pub fn map(&self) -> &'a FunctionalityMap {
        self.map
    }
}

/// Buses adjacency under a damage state, re-exported for callers that
/// only need topology.
pub fn damaged_adjacency(case: &NetworkCase, damage: &DamageScenario, map: &FunctionalityMap) -> Adjacency {
    adjacency(case, damage, map)
}
