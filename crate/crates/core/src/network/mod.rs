//! Power network representation.
//!
//! A [`NetworkCase`] holds buses, generation plants, load units and branches
//! in typed tables, plus a flat component list that the damage, perception
//! and recovery stages index into. Component order is fixed: buses, then
//! generators, then loads, then branches, each in table order.

mod matpower;
mod native;

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fragility::{DamageScenario, FunctionalityMap};

pub use matpower::{parse_matpower, CaseMetadata, MatpowerCase};
pub use native::{NativeBranch, NativeBus, NativeCase, NativeGenerator, NativeLoad};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ComponentKind {
    BusNode,
    GenerationPlant,
    LoadUnit,
    Substation,
    TransmissionLine,
}

impl ComponentKind {
    pub const DAMAGEABLE: [ComponentKind; 4] = [
        ComponentKind::BusNode,
        ComponentKind::GenerationPlant,
        ComponentKind::LoadUnit,
        ComponentKind::Substation,
    ];

    /// Transmission lines are treated as seismically robust.
    pub fn is_damageable(self) -> bool {
        !matches!(self, ComponentKind::TransmissionLine)
    }

    pub fn label(self) -> &'static str {
        match self {
            ComponentKind::BusNode => "bus",
            ComponentKind::GenerationPlant => "generator",
            ComponentKind::LoadUnit => "load",
            ComponentKind::Substation => "substation",
            ComponentKind::TransmissionLine => "line",
        }
    }
}

/// Planar location in kilometres.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn distance(self, other: Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn midpoint(self, other: Point) -> Point {
        Point::new(0.5 * (self.x + other.x), 0.5 * (self.y + other.y))
    }
}

/// Polynomial generation cost `quadratic * P^2 + linear * P + constant`, P in MW.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CostCoeffs {
    pub quadratic: f64,
    pub linear: f64,
    pub constant: f64,
}

impl CostCoeffs {
    pub fn eval(&self, p: f64) -> f64 {
        (self.quadratic * p + self.linear) * p + self.constant
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Bus {
    pub id: u32,
    pub base_kv: f64,
    pub location: Point,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Generator {
    pub bus: u32,
    pub pg_min: f64,
    pub pg_max: f64,
    pub cost: CostCoeffs,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Load {
    pub bus: u32,
    pub pd: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Branch {
    pub from: u32,
    pub to: u32,
    /// Series reactance, per unit on the system base.
    pub reactance: f64,
    /// Thermal rating, MW.
    pub rate: f64,
    pub is_substation: bool,
}

impl Branch {
    /// Per-unit susceptance `1 / x`.
    pub fn susceptance(&self) -> f64 {
        1.0 / self.reactance
    }
}

/// Typed reference from a component back into its table.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Element {
    Bus(usize),
    Generator(usize),
    Load(usize),
    Branch(usize),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Component {
    pub id: String,
    pub kind: ComponentKind,
    pub location: Point,
    pub element: Element,
}

#[derive(Clone, Debug, PartialEq)]
pub struct NetworkCase {
    name: String,
    base_mva: f64,
    buses: Vec<Bus>,
    generators: Vec<Generator>,
    loads: Vec<Load>,
    branches: Vec<Branch>,
    components: Vec<Component>,
    bus_index: HashMap<u32, usize>,
    component_index: HashMap<String, usize>,
    bus_component: Vec<usize>,
    generator_component: Vec<usize>,
    load_component: Vec<usize>,
    branch_component: Vec<usize>,
    /// Branch endpoints as bus-table indices.
    branch_ends: Vec<(usize, usize)>,
    degree: Vec<usize>,
    f0: f64,
}

const RTS24_M: &str = include_str!("../../data/rts24.m");
const RTS24_META: &str = include_str!("../../data/rts24_meta.json");

impl NetworkCase {
    /// Build and validate a case from its tables.
    pub fn new(
        name: impl Into<String>,
        base_mva: f64,
        buses: Vec<Bus>,
        generators: Vec<Generator>,
        loads: Vec<Load>,
        branches: Vec<Branch>,
    ) -> Result<Self> {
        if !(base_mva > 0.0 && base_mva.is_finite()) {
            return Err(Error::Validation(format!("baseMVA must be positive, got {base_mva}")));
        }
        if buses.is_empty() {
            return Err(Error::Validation("case has no buses".into()));
        }
        let mut bus_index = HashMap::with_capacity(buses.len());
        for (i, b) in buses.iter().enumerate() {
            if bus_index.insert(b.id, i).is_some() {
                return Err(Error::Validation(format!("duplicate bus id {}", b.id)));
            }
            if !(b.location.x.is_finite() && b.location.y.is_finite()) {
                return Err(Error::Validation(format!("bus {} has a non-finite coordinate", b.id)));
            }
        }
        let lookup = |bus: u32, what: &str| {
            bus_index
                .get(&bus)
                .copied()
                .ok_or_else(|| Error::Validation(format!("{what} references unknown bus {bus}")))
        };
        for (i, g) in generators.iter().enumerate() {
            lookup(g.bus, &format!("generator {}", i + 1))?;
            if !(g.pg_min >= 0.0 && g.pg_min <= g.pg_max && g.pg_max.is_finite()) {
                return Err(Error::Validation(format!(
                    "generator at bus {} has invalid limits [{}, {}]",
                    g.bus, g.pg_min, g.pg_max
                )));
            }
        }
        for (i, l) in loads.iter().enumerate() {
            lookup(l.bus, &format!("load {}", i + 1))?;
            if !(l.pd >= 0.0 && l.pd.is_finite()) {
                return Err(Error::Validation(format!("load at bus {} has negative demand {}", l.bus, l.pd)));
            }
        }
        let mut branch_ends = Vec::with_capacity(branches.len());
        let mut degree = vec![0usize; buses.len()];
        for (i, br) in branches.iter().enumerate() {
            let what = format!("branch {}", i + 1);
            let f = lookup(br.from, &what)?;
            let t = lookup(br.to, &what)?;
            if f == t {
                return Err(Error::Validation(format!("{what} is a self-loop on bus {}", br.from)));
            }
            if !(br.rate > 0.0 && br.rate.is_finite()) {
                return Err(Error::Validation(format!("{what} has non-positive rating {}", br.rate)));
            }
            if !(br.reactance > 0.0 && br.reactance.is_finite()) {
                return Err(Error::Validation(format!("{what} has non-positive reactance {}", br.reactance)));
            }
            branch_ends.push((f, t));
            degree[f] += 1;
            degree[t] += 1;
        }

        let mut components = Vec::with_capacity(buses.len() + generators.len() + loads.len() + branches.len());
        let mut bus_component = Vec::with_capacity(buses.len());
        for (i, b) in buses.iter().enumerate() {
            bus_component.push(components.len());
            components.push(Component {
                id: format!("bus-{}", b.id),
                kind: ComponentKind::BusNode,
                location: b.location,
                element: Element::Bus(i),
            });
        }
        let generator_component = push_attached(
            &mut components,
            generators.iter().map(|g| g.bus),
            "gen",
            ComponentKind::GenerationPlant,
            &buses,
            &bus_index,
            Element::Generator,
        );
        let load_component = push_attached(
            &mut components,
            loads.iter().map(|l| l.bus),
            "load",
            ComponentKind::LoadUnit,
            &buses,
            &bus_index,
            Element::Load,
        );
        let mut branch_component = Vec::with_capacity(branches.len());
        for (i, br) in branches.iter().enumerate() {
            let (f, t) = branch_ends[i];
            branch_component.push(components.len());
            components.push(Component {
                id: format!("branch-{}", i + 1),
                kind: if br.is_substation { ComponentKind::Substation } else { ComponentKind::TransmissionLine },
                location: buses[f].location.midpoint(buses[t].location),
                element: Element::Branch(i),
            });
        }
        let component_index = components.iter().enumerate().map(|(i, c)| (c.id.clone(), i)).collect();
        let f0 = loads.iter().map(|l| l.pd).sum();

        Ok(NetworkCase {
            name: name.into(),
            base_mva,
            buses,
            generators,
            loads,
            branches,
            components,
            bus_index,
            component_index,
            bus_component,
            generator_component,
            load_component,
            branch_component,
            branch_ends,
            degree,
            f0,
        })
    }

    /// The IEEE 24-bus Reliability Test System with the shipped coordinates
    /// and substation assignment.
    pub fn rts24() -> NetworkCase {
        let meta = CaseMetadata::from_json(RTS24_META).expect("shipped RTS-24 metadata is valid");
        parse_matpower(RTS24_M, &meta).expect("shipped RTS-24 case is valid")
    }

    pub fn name(&self) -> &str {
        &self.name
    }
    pub fn base_mva(&self) -> f64 {
        self.base_mva
    }
    pub fn buses(&self) -> &[Bus] {
        &self.buses
    }
    pub fn generators(&self) -> &[Generator] {
        &self.generators
    }
    pub fn loads(&self) -> &[Load] {
        &self.loads
    }
    pub fn branches(&self) -> &[Branch] {
        &self.branches
    }
    pub fn components(&self) -> &[Component] {
        &self.components
    }
    /// Pre-event functionality: total nominal demand, MW.
    pub fn f0(&self) -> f64 {
        self.f0
    }

    pub fn bus_position(&self, bus_id: u32) -> Option<usize> {
        self.bus_index.get(&bus_id).copied()
    }
    pub fn component_position(&self, id: &str) -> Option<usize> {
        self.component_index.get(id).copied()
    }
    pub fn bus_component(&self, bus: usize) -> usize {
        self.bus_component[bus]
    }
    pub fn generator_component(&self, g: usize) -> usize {
        self.generator_component[g]
    }
    pub fn load_component(&self, l: usize) -> usize {
        self.load_component[l]
    }
    pub fn branch_component(&self, br: usize) -> usize {
        self.branch_component[br]
    }
    /// Endpoints of a branch as bus-table indices.
    pub fn branch_ends(&self, br: usize) -> (usize, usize) {
        self.branch_ends[br]
    }
    /// Number of branches incident to a bus (parallel circuits counted separately).
    pub fn bus_degree(&self, bus: usize) -> usize {
        self.degree[bus]
    }

    pub fn damageable_count(&self) -> usize {
        self.components.iter().filter(|c| c.kind.is_damageable()).count()
    }

    pub fn count_of(&self, kind: ComponentKind) -> usize {
        self.components.iter().filter(|c| c.kind == kind).count()
    }

    /// Bus-table index of the bus a node component sits on.
    pub fn host_bus(&self, component: usize) -> Option<usize> {
        match self.components[component].element {
            Element::Bus(b) => Some(b),
            Element::Generator(g) => self.bus_position(self.generators[g].bus),
            Element::Load(l) => self.bus_position(self.loads[l].bus),
            Element::Branch(_) => None,
        }
    }

    /// Capacity measure used to rank repairs within a component type.
    pub fn capacity_rank(&self, component: usize) -> f64 {
        match self.components[component].element {
            Element::Bus(b) => self.degree[b] as f64,
            Element::Generator(g) => self.generators[g].pg_max,
            Element::Load(l) => self.loads[l].pd,
            Element::Branch(br) => self.branches[br].rate,
        }
    }

    pub fn to_native(&self) -> NativeCase {
        NativeCase::from_case(self)
    }

    pub fn from_native(native: &NativeCase) -> Result<Self> {
        native.to_case()
    }

    /// Serialize to the native JSON document.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.to_native()).expect("native case serializes");
        s.push('\n');
        s
    }
}

fn push_attached<F>(
    components: &mut Vec<Component>,
    hosts: impl Iterator<Item = u32>,
    prefix: &str,
    kind: ComponentKind,
    buses: &[Bus],
    bus_index: &HashMap<u32, usize>,
    element: F,
) -> Vec<usize>
where
    F: Fn(usize) -> Element,
{
    let hosts: Vec<u32> = hosts.collect();
    let mut per_bus: BTreeMap<u32, usize> = BTreeMap::new();
    for &b in &hosts {
        *per_bus.entry(b).or_default() += 1;
    }
    let mut seen: HashMap<u32, usize> = HashMap::new();
    let mut out = Vec::with_capacity(hosts.len());
    for (i, &b) in hosts.iter().enumerate() {
        let n = seen.entry(b).or_default();
        *n += 1;
        let id = if per_bus[&b] > 1 { format!("{prefix}-{b}-{n}") } else { format!("{prefix}-{b}") };
        out.push(components.len());
        components.push(Component {
            id,
            kind,
            location: buses[bus_index[&b]].location,
            element: element(i),
        });
    }
    out
}

/// Parse a case from either the native JSON document or a MATPOWER `.m`
/// file. MATPOWER input needs the metadata table for coordinates and the
/// substation flags; native documents carry both and ignore `meta`.
pub fn parse_case(text: &str, meta: Option<&CaseMetadata>) -> Result<NetworkCase> {
    if text.trim_start().starts_with('{') {
        let native: NativeCase = serde_json::from_str(text)?;
        native.to_case()
    } else {
        let meta = meta.ok_or_else(|| {
            Error::Validation("MATPOWER input requires a coordinate/metadata table".into())
        })?;
        parse_matpower(text, meta)
    }
}

pub fn parse_case_file(path: &std::path::Path, meta: Option<&CaseMetadata>) -> Result<NetworkCase> {
    parse_case(&std::fs::read_to_string(path)?, meta)
}

/// Binary bus-to-bus adjacency after removing failed components.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Adjacency {
    n: usize,
    cells: Vec<bool>,
}

impl Adjacency {
    pub fn zeros(n: usize) -> Self {
        Adjacency { n, cells: vec![false; n * n] }
    }

    pub fn from_edges(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Self {
        let mut a = Adjacency::zeros(n);
        for (i, j) in edges {
            a.set(i, j);
        }
        a
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> bool {
        self.cells[i * self.n + j]
    }

    /// Set the symmetric pair (i, j); diagonal entries are ignored.
    pub fn set(&mut self, i: usize, j: usize) {
        if i != j {
            self.cells[i * self.n + j] = true;
            self.cells[j * self.n + i] = true;
        }
    }

    pub fn nonzero_count(&self) -> usize {
        self.cells.iter().filter(|&&c| c).count()
    }

    pub fn neighbors(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        let row = &self.cells[i * self.n..(i + 1) * self.n];
        row.iter().enumerate().filter_map(|(j, &c)| c.then_some(j))
    }
}

/// `A[i][j] = 1` iff buses i and j are functional and at least one branch
/// between them is functional.
pub fn adjacency(case: &NetworkCase, damage: &DamageScenario, map: &FunctionalityMap) -> Adjacency {
    let bus_up: Vec<bool> = (0..case.buses.len())
        .map(|b| damage.ratio(case, case.bus_component(b), map) > 0.0)
        .collect();
    let edges = (0..case.branches.len()).filter_map(|br| {
        let (f, t) = case.branch_ends(br);
        let up = bus_up[f] && bus_up[t] && damage.ratio(case, case.branch_component(br), map) > 0.0;
        up.then_some((f, t))
    });
    Adjacency::from_edges(case.buses.len(), edges)
}
