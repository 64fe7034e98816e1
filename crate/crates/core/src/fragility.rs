//! Lognormal fragility curves, inverse-transform damage sampling and the
//! damage-to-functionality mapping.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};
use crate::hazard::IntensityField;
use crate::network::{ComponentKind, NetworkCase};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
#[repr(u8)]
pub enum DamageState {
    #[default]
    None = 0,
    Slight = 1,
    Moderate = 2,
    Extensive = 3,
    Complete = 4,
}

impl DamageState {
    pub const ALL: [DamageState; 5] = [
        DamageState::None,
        DamageState::Slight,
        DamageState::Moderate,
        DamageState::Extensive,
        DamageState::Complete,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn label(self) -> &'static str {
        match self {
            DamageState::None => "DS0",
            DamageState::Slight => "DS1",
            DamageState::Moderate => "DS2",
            DamageState::Extensive => "DS3",
            DamageState::Complete => "DS4",
        }
    }
}

/// Median (g) and log-standard deviation of one fragility curve.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Curve {
    pub median: f64,
    pub beta: f64,
}

const fn c(median: f64, beta: f64) -> Curve {
    Curve { median, beta }
}

/// Fragility curves for DS1..DS4 per damageable component kind.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FragilitySet {
    pub bus: [Curve; 4],
    pub generator: [Curve; 4],
    pub load: [Curve; 4],
    pub substation: [Curve; 4],
}

impl Default for FragilitySet {
    /// Hazus-derived parameters for PGA in g.
    fn default() -> Self {
        FragilitySet {
            bus: [c(0.13, 0.65), c(0.26, 0.50), c(0.34, 0.40), c(0.74, 0.40)],
            generator: [c(0.10, 0.60), c(0.22, 0.55), c(0.49, 0.50), c(0.79, 0.50)],
            load: [c(0.24, 0.25), c(0.32, 0.23), c(0.58, 0.15), c(0.89, 0.15)],
            substation: [c(0.10, 0.60), c(0.20, 0.50), c(0.30, 0.40), c(0.50, 0.40)],
        }
    }
}

impl FragilitySet {
    pub fn curves(&self, kind: ComponentKind) -> Option<&[Curve; 4]> {
        match kind {
            ComponentKind::BusNode => Some(&self.bus),
            ComponentKind::GenerationPlant => Some(&self.generator),
            ComponentKind::LoadUnit => Some(&self.load),
            ComponentKind::Substation => Some(&self.substation),
            ComponentKind::TransmissionLine => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for kind in ComponentKind::DAMAGEABLE {
            let curves = self.curves(kind).expect("damageable kinds have curves");
            for (k, cv) in curves.iter().enumerate() {
                if !(cv.median > 0.0 && cv.median.is_finite() && cv.beta > 0.0 && cv.beta.is_finite()) {
                    return Err(Error::Config(format!("{} DS{} curve must have positive median and beta", kind.label(), k + 1)));
                }
                if k > 0 && cv.median <= curves[k - 1].median {
                    return Err(Error::Config(format!("{} medians must increase from DS1 to DS4", kind.label())));
                }
            }
        }
        Ok(())
    }
}

pub fn std_normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// `P(DS >= DS_k | pga)` for k = 1..4.
///
/// Crossing curves (e.g. bus DS2/DS3 above ~1 g) would give non-monotone
/// probabilities; each value is capped by the previous one so the result is
/// always a valid exceedance sequence.
pub fn exceedance_probs(kind: ComponentKind, pga: f64, frag: &FragilitySet) -> [f64; 4] {
    let Some(curves) = frag.curves(kind) else { return [0.0; 4] };
    if pga <= 0.0 {
        return [0.0; 4];
    }
    let ln_pga = pga.ln();
    let mut out = [0.0; 4];
    let mut cap = 1.0f64;
    for (p, cv) in out.iter_mut().zip(curves) {
        let raw = std_normal_cdf((ln_pga - cv.median.ln()) / cv.beta);
        cap = cap.min(raw);
        *p = cap;
    }
    out
}

/// Inverse-transform draw: the most severe state whose exceedance
/// probability is above `u`.
pub fn sample_damage(probs: &[f64; 4], u: f64) -> Result<DamageState> {
    for (k, &p) in probs.iter().enumerate() {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::Contract(format!("exceedance probability {p} outside [0, 1]")));
        }
        if k > 0 && p > probs[k - 1] {
            return Err(Error::Contract(format!("exceedance probabilities not non-increasing: {probs:?}")));
        }
    }
    Ok(probs
        .iter()
        .rposition(|&p| u < p)
        .map_or(DamageState::None, |k| DamageState::ALL[k + 1]))
}

/// Residual capacity ratio per kind and damage state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FunctionalityMap {
    pub bus: [f64; 5],
    pub generator: [f64; 5],
    pub load: [f64; 5],
    pub substation: [f64; 5],
}

impl Default for FunctionalityMap {
    fn default() -> Self {
        let graded = [1.0, 0.75, 0.50, 0.25, 0.0];
        FunctionalityMap { bus: [1.0, 1.0, 0.0, 0.0, 0.0], generator: graded, load: graded, substation: graded }
    }
}

impl FunctionalityMap {
    pub fn ratio(&self, kind: ComponentKind, ds: DamageState) -> f64 {
        let row = match kind {
            ComponentKind::BusNode => &self.bus,
            ComponentKind::GenerationPlant => &self.generator,
            ComponentKind::LoadUnit => &self.load,
            ComponentKind::Substation => &self.substation,
            ComponentKind::TransmissionLine => return 1.0,
        };
        row[ds.index()]
    }

    pub fn validate(&self) -> Result<()> {
        for (name, row) in [("bus", &self.bus), ("generator", &self.generator), ("load", &self.load), ("substation", &self.substation)] {
            if row[0] != 1.0 {
                return Err(Error::Config(format!("{name} functionality at DS0 must be 1")));
            }
            if row.iter().any(|r| !(0.0..=1.0).contains(r)) || row.windows(2).any(|w| w[1] > w[0]) {
                return Err(Error::Config(format!("{name} functionality must be non-increasing within [0, 1]")));
            }
        }
        Ok(())
    }
}

pub fn functionality_ratio(kind: ComponentKind, ds: DamageState, map: &FunctionalityMap) -> f64 {
    map.ratio(kind, ds)
}

/// True damage state of every component, indexed like `NetworkCase::components`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DamageScenario {
    states: Vec<DamageState>,
}

impl DamageScenario {
    pub fn intact(case: &NetworkCase) -> Self {
        DamageScenario { states: vec![DamageState::None; case.components().len()] }
    }

    /// Build from explicit states; transmission lines must be intact.
    pub fn from_states(case: &NetworkCase, states: Vec<DamageState>) -> Result<Self> {
        if states.len() != case.components().len() {
            return Err(Error::Contract(format!(
                "damage scenario covers {} components, case has {}",
                states.len(),
                case.components().len()
            )));
        }
        if let Some(c) = case
            .components()
            .iter()
            .zip(&states)
            .find(|(c, s)| !c.kind.is_damageable() && **s != DamageState::None)
        {
            return Err(Error::Contract(format!("{} is a transmission line and cannot be damaged", c.0.id)));
        }
        Ok(DamageScenario { states })
    }

    pub fn states(&self) -> &[DamageState] {
        &self.states
    }

    pub fn state(&self, component: usize) -> DamageState {
        self.states[component]
    }

    /// Panics if asked to damage a transmission line through a case-aware
    /// caller; plain index writes are trusted.
    pub fn set(&mut self, component: usize, ds: DamageState) {
        self.states[component] = ds;
    }

    pub fn ratio(&self, case: &NetworkCase, component: usize, map: &FunctionalityMap) -> f64 {
        map.ratio(case.components()[component].kind, self.states[component])
    }

    pub fn damaged_count(&self) -> usize {
        self.states.iter().filter(|&&s| s != DamageState::None).count()
    }

    /// `(component id, state)` pairs for damaged components.
    pub fn to_named(&self, case: &NetworkCase) -> Vec<(String, DamageState)> {
        case.components()
            .iter()
            .zip(&self.states)
            .filter(|(_, s)| **s != DamageState::None)
            .map(|(c, s)| (c.id.clone(), *s))
            .collect()
    }

    pub fn from_named(case: &NetworkCase, named: &[(String, DamageState)]) -> Result<Self> {
        let mut states = vec![DamageState::None; case.components().len()];
        for (id, s) in named {
            let idx = case
                .component_position(id)
                .ok_or_else(|| Error::Validation(format!("unknown component `{id}`")))?;
            states[idx] = *s;
        }
        Self::from_states(case, states)
    }
}

/// On-disk form of a damage scenario: only damaged components are listed.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DamageDocument {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    description: Option<String>,
    damage: BTreeMap<String, DamageState>,
}

impl DamageScenario {
    pub fn from_json(case: &NetworkCase, text: &str) -> Result<Self> {
        let doc: DamageDocument = serde_json::from_str(text)?;
        let named: Vec<(String, DamageState)> = doc.damage.into_iter().collect();
        Self::from_named(case, &named)
    }

    pub fn to_json(&self, case: &NetworkCase) -> String {
        self.document(case, None)
    }

    /// Same document with a free-text `description` field, still loadable
    /// by [`DamageScenario::from_json`].
    pub fn to_json_described(&self, case: &NetworkCase, description: &str) -> String {
        self.document(case, Some(description.to_string()))
    }

    fn document(&self, case: &NetworkCase, description: Option<String>) -> String {
        let doc = DamageDocument { description, damage: self.to_named(case).into_iter().collect() };
        let mut s = serde_json::to_string_pretty(&doc).expect("damage document serializes");
        s.push('\n');
        s
    }
}

/// One independent inverse-transform draw per damageable component, in
/// component order. Lines consume no random numbers.
pub fn sample_scenario<R: Rng + ?Sized>(
    field: &IntensityField,
    case: &NetworkCase,
    frag: &FragilitySet,
    rng: &mut R,
) -> Result<DamageScenario> {
    let mut states = vec![DamageState::None; case.components().len()];
    for (i, comp) in case.components().iter().enumerate() {
        if !comp.kind.is_damageable() {
            continue;
        }
        let probs = exceedance_probs(comp.kind, field.pga(i), frag);
        let u: f64 = rng.random();
        states[i] = sample_damage(&probs, u)?;
    }
    Ok(DamageScenario { states })
}
