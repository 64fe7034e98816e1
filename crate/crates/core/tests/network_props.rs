use gridquake_core::network::adjacency;
use gridquake_core::power_flow::find_islands;
use gridquake_core::{parse_case, DamageScenario, DamageState, FunctionalityMap, NetworkCase};
use proptest::prelude::*;

fn scenario(case: &NetworkCase, states: &[u8]) -> DamageScenario {
    let mut d = DamageScenario::intact(case);
    let mut it = states.iter();
    for i in 0..case.components().len() {
        if case.components()[i].kind.is_damageable() {
            d.set(i, DamageState::ALL[*it.next().unwrap() as usize]);
        }
    }
    d
}

fn states() -> impl Strategy<Value = Vec<u8>> {
    proptest::collection::vec(prop_oneof![3 => Just(0u8), 1 => 1u8..5], 56)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn adjacency_symmetric_with_empty_diagonal(s in states()) {
        let case = NetworkCase::rts24();
        let a = adjacency(&case, &scenario(&case, &s), &FunctionalityMap::default());
        for i in 0..a.size() {
            prop_assert!(!a.get(i, i));
            for j in 0..a.size() {
                prop_assert_eq!(a.get(i, j), a.get(j, i));
            }
        }
    }

    #[test]
    fn improving_a_component_keeps_every_edge(s in states(), pick in 0usize..56, to in 0usize..4) {
        let case = NetworkCase::rts24();
        let map = FunctionalityMap::default();
        let before = scenario(&case, &s);
        let damageable: Vec<usize> =
            (0..case.components().len()).filter(|&i| case.components()[i].kind.is_damageable()).collect();
        let i = damageable[pick];
        let mut after = before.clone();
        let lower = to.min(before.state(i).index());
        after.set(i, DamageState::ALL[lower]);
        let (a, b) = (adjacency(&case, &before, &map), adjacency(&case, &after, &map));
        for x in 0..a.size() {
            for y in 0..a.size() {
                prop_assert!(!a.get(x, y) || b.get(x, y));
            }
        }
    }

    #[test]
    fn islands_partition_the_buses(s in states()) {
        let case = NetworkCase::rts24();
        let a = adjacency(&case, &scenario(&case, &s), &FunctionalityMap::default());
        let islands = find_islands(&a);
        let mut all: Vec<usize> = islands.iter().flatten().copied().collect();
        all.sort_unstable();
        prop_assert_eq!(all, (0..24).collect::<Vec<_>>());
        for island in &islands {
            for &u in island {
                for v in a.neighbors(u) {
                    prop_assert!(island.contains(&v));
                }
            }
        }
    }
}

#[test]
fn native_and_matpower_forms_agree() {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("data");
    let native = std::fs::read_to_string(dir.join("rts24.json")).unwrap();
    let from_native = parse_case(&native, None).unwrap();
    assert_eq!(from_native, NetworkCase::rts24());
    assert_eq!(from_native.to_json(), native);
    let again = parse_case(&from_native.to_json(), None).unwrap();
    assert_eq!(again, from_native);
}

#[test]
fn intact_rts24_is_one_island() {
    let case = NetworkCase::rts24();
    let a = adjacency(&case, &DamageScenario::intact(&case), &FunctionalityMap::default());
    assert_eq!(find_islands(&a).len(), 1);
}
