//! Native JSON case document.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{Branch, Bus, CostCoeffs, Generator, Load, NetworkCase, Point};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NativeCase {
    pub name: String,
    pub base_mva: f64,
    pub buses: Vec<NativeBus>,
    pub generators: Vec<NativeGenerator>,
    pub loads: Vec<NativeLoad>,
    pub branches: Vec<NativeBranch>,
    /// Bus id to `[x, y]` in km.
    pub coordinates: BTreeMap<u32, [f64; 2]>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NativeBus {
    pub id: u32,
    #[serde(default)]
    pub base_kv: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NativeGenerator {
    pub bus: u32,
    pub pg_min: f64,
    pub pg_max: f64,
    /// `[quadratic, linear, constant]` cost per MW.
    #[serde(default)]
    pub cost: [f64; 3],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NativeLoad {
    pub bus: u32,
    pub pd: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NativeBranch {
    pub from: u32,
    pub to: u32,
    /// Series reactance, per unit.
    pub x: f64,
    /// Rating, MW.
    pub rate: f64,
    pub is_substation: bool,
}

impl NativeCase {
    pub fn from_case(case: &NetworkCase) -> Self {
        NativeCase {
            name: case.name().to_string(),
            base_mva: case.base_mva(),
            buses: case.buses().iter().map(|b| NativeBus { id: b.id, base_kv: b.base_kv }).collect(),
            generators: case
                .generators()
                .iter()
                .map(|g| NativeGenerator {
                    bus: g.bus,
                    pg_min: g.pg_min,
                    pg_max: g.pg_max,
                    cost: [g.cost.quadratic, g.cost.linear, g.cost.constant],
                })
                .collect(),
            loads: case.loads().iter().map(|l| NativeLoad { bus: l.bus, pd: l.pd }).collect(),
            branches: case
                .branches()
                .iter()
                .map(|b| NativeBranch {
                    from: b.from,
                    to: b.to,
                    x: b.reactance,
                    rate: b.rate,
                    is_substation: b.is_substation,
                })
                .collect(),
            coordinates: case.buses().iter().map(|b| (b.id, [b.location.x, b.location.y])).collect(),
        }
    }

    pub fn to_case(&self) -> Result<NetworkCase> {
        let buses = self
            .buses
            .iter()
            .map(|b| {
                let [x, y] = *self
                    .coordinates
                    .get(&b.id)
                    .ok_or_else(|| Error::Validation(format!("missing coordinate for bus {}", b.id)))?;
                Ok(Bus { id: b.id, base_kv: b.base_kv, location: Point::new(x, y) })
            })
            .collect::<Result<Vec<_>>>()?;
        let generators = self
            .generators
            .iter()
            .map(|g| Generator {
                bus: g.bus,
                pg_min: g.pg_min,
                pg_max: g.pg_max,
                cost: CostCoeffs { quadratic: g.cost[0], linear: g.cost[1], constant: g.cost[2] },
            })
            .collect();
        let loads = self.loads.iter().map(|l| Load { bus: l.bus, pd: l.pd }).collect();
        let branches = self
            .branches
            .iter()
            .map(|b| Branch { from: b.from, to: b.to, reactance: b.x, rate: b.rate, is_substation: b.is_substation })
            .collect();
        NetworkCase::new(self.name.clone(), self.base_mva, buses, generators, loads, branches)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::parse_case;
    use proptest::prelude::*;

    #[test]
    fn rts24_round_trip() {
        let case = NetworkCase::rts24();
        let text = case.to_json();
        let back = parse_case(&text, None).unwrap();
        assert_eq!(case, back);
        assert_eq!(text, back.to_json());
    }

    #[test]
    fn shipped_native_matches_matpower_source() {
        let shipped = include_str!("../../data/rts24.json");
        assert_eq!(shipped, NetworkCase::rts24().to_json());
    }

    #[test]
    fn missing_coordinate_rejected() {
        let mut native = NetworkCase::rts24().to_native();
        native.coordinates.remove(&7);
        assert!(native.to_case().unwrap_err().to_string().contains("bus 7"));
    }

    proptest! {
        #[test]
        fn perturbed_cases_round_trip(
            scale in 0.5f64..2.0,
            shift in -100.0f64..100.0,
            flags in proptest::collection::vec(any::<bool>(), 38),
        ) {
            let mut native = NetworkCase::rts24().to_native();
            for l in &mut native.loads { l.pd *= scale; }
            for c in native.coordinates.values_mut() { c[0] += shift; }
            for (b, f) in native.branches.iter_mut().zip(&flags) { b.is_substation = *f; }
            let case = native.to_case().unwrap();
            let back = parse_case(&case.to_json(), None).unwrap();
            prop_assert_eq!(case, back);
        }
    }
}
