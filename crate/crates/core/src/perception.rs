//! Damage perception: confusion matrices, coverage assignment and the
//! time at which each component's assessment becomes usable.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fragility::{DamageScenario, DamageState};
use crate::network::NetworkCase;

/// Row-stochastic 5x5 matrix; row = true state, column = perceived state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    rows: [[f64; 5]; 5],
}

impl ConfusionMatrix {
    pub fn new(rows: [[f64; 5]; 5]) -> Result<Self> {
        for (m, row) in rows.iter().enumerate() {
            if row.iter().any(|p| !(0.0..=1.0).contains(p)) {
                return Err(Error::Validation(format!("confusion row {m} has entries outside [0, 1]")));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > 1e-12 {
                return Err(Error::Validation(format!("confusion row {m} sums to {sum}")));
            }
        }
        Ok(ConfusionMatrix { rows })
    }

    pub fn identity() -> Self {
        let mut rows = [[0.0; 5]; 5];
        for (i, row) in rows.iter_mut().enumerate() {
            row[i] = 1.0;
        }
        ConfusionMatrix { rows }
    }

    pub fn row(&self, truth: DamageState) -> &[f64; 5] {
        &self.rows[truth.index()]
    }

    pub fn rows(&self) -> &[[f64; 5]; 5] {
        &self.rows
    }

    /// Inverse-CDF categorical draw for a given uniform `u`.
    pub fn draw(&self, truth: DamageState, u: f64) -> DamageState {
        let row = self.row(truth);
        let mut acc = 0.0;
        let mut last = truth;
        for (k, &p) in row.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            last = DamageState::ALL[k];
            acc += p;
            if u < acc {
                return last;
            }
        }
        last
    }
}

/// Accuracy `a` on the diagonal, the remainder split between the two
/// neighbouring states (folded back onto the diagonal at DS0 and DS4).
pub fn tridiagonal_confusion(a: f64) -> Result<ConfusionMatrix> {
    if !(0.0..=1.0).contains(&a) {
        return Err(Error::Validation(format!("accuracy {a} outside [0, 1]")));
    }
    let off = (1.0 - a) / 2.0;
    let mut rows = [[0.0; 5]; 5];
    rows[0][0] = (1.0 + a) / 2.0;
    rows[0][1] = off;
    for (m, row) in rows.iter_mut().enumerate().take(4).skip(1) {
        row[m - 1] = off;
        row[m] = a;
        row[m + 1] = off;
    }
    rows[4][3] = off;
    rows[4][4] = (1.0 + a) / 2.0;
    ConfusionMatrix::new(rows)
}

pub fn perceive<R: Rng + ?Sized>(truth: DamageState, matrix: &ConfusionMatrix, rng: &mut R) -> DamageState {
    matrix.draw(truth, rng.random())
}

/// Which damageable components carry sensors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Coverage {
    /// A seeded uniform random subset of `round(p * n)` damageable components.
    Fraction(f64),
    /// An explicit list of component ids.
    Instrumented(Vec<String>),
}

/// Inspection delay (days) for unmonitored components as a function of
/// coverage: fewer components to inspect means a faster campaign.
const INSPECTION_DELAY_TABLE: [(f64, f64); 5] = [(0.0, 2.0), (0.1, 1.8), (0.3, 1.4), (0.5, 1.0), (0.7, 0.6)];

pub fn inspection_delay_for_coverage(p: f64) -> f64 {
    let table = &INSPECTION_DELAY_TABLE;
    if p <= table[0].0 {
        return table[0].1;
    }
    for w in table.windows(2) {
        let ((x0, y0), (x1, y1)) = (w[0], w[1]);
        if p <= x1 {
            return y0 + (y1 - y0) * (p - x0) / (x1 - x0);
        }
    }
    table[table.len() - 1].1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MonitoringConfig {
    pub coverage: Coverage,
    pub a_sshm: f64,
    pub a_inspect: f64,
    /// Fixed inspection delay; `None` derives it from the coverage fraction.
    #[serde(default)]
    pub delay_inspect: Option<f64>,
    #[serde(default)]
    pub delay_sshm: f64,
    #[serde(default = "default_penalty")]
    pub rediscovery_penalty: f64,
}

fn default_penalty() -> f64 {
    1.3
}

impl MonitoringConfig {
    /// Every component instrumented, exact and instantaneous.
    pub fn perfect() -> Self {
        MonitoringConfig {
            coverage: Coverage::Fraction(1.0),
            a_sshm: 1.0,
            a_inspect: 1.0,
            delay_inspect: Some(0.0),
            delay_sshm: 0.0,
            rediscovery_penalty: default_penalty(),
        }
    }

    /// Full sensor coverage at the given accuracy.
    pub fn sshm(a: f64) -> Self {
        MonitoringConfig {
            coverage: Coverage::Fraction(1.0),
            a_sshm: a,
            a_inspect: 0.7,
            delay_inspect: None,
            delay_sshm: 0.0,
            rediscovery_penalty: default_penalty(),
        }
    }

    /// Field inspection only.
    pub fn inspection() -> Self {
        MonitoringConfig {
            coverage: Coverage::Fraction(0.0),
            a_sshm: 0.9,
            a_inspect: 0.7,
            delay_inspect: Some(2.0),
            delay_sshm: 0.0,
            rediscovery_penalty: default_penalty(),
        }
    }

    pub fn partial(p: f64, a_sshm: f64) -> Self {
        MonitoringConfig { coverage: Coverage::Fraction(p), a_sshm, ..Self::inspection_with_table() }
    }

    fn inspection_with_table() -> Self {
        MonitoringConfig { delay_inspect: None, ..Self::inspection() }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, a) in [("a_sshm", self.a_sshm), ("a_inspect", self.a_inspect)] {
            if !(0.0..=1.0).contains(&a) {
                return Err(Error::Config(format!("{name} = {a} outside [0, 1]")));
            }
        }
        if let Coverage::Fraction(p) = self.coverage {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Config(format!("coverage fraction {p} outside [0, 1]")));
            }
        }
        if self.delay_inspect.is_some_and(|d| !(d >= 0.0 && d.is_finite())) || !(self.delay_sshm >= 0.0 && self.delay_sshm.is_finite()) {
            return Err(Error::Config("delays must be non-negative".into()));
        }
        if !(self.rediscovery_penalty >= 1.0 && self.rediscovery_penalty.is_finite()) {
            return Err(Error::Config("rediscovery penalty must be at least 1".into()));
        }
        Ok(())
    }

    /// Nominal coverage fraction (explicit lists count their share of
    /// damageable components).
    pub fn coverage_fraction(&self, case: &NetworkCase) -> f64 {
        match &self.coverage {
            Coverage::Fraction(p) => *p,
            Coverage::Instrumented(ids) => ids.len() as f64 / case.damageable_count().max(1) as f64,
        }
    }

    pub fn inspection_delay(&self, case: &NetworkCase) -> f64 {
        self.delay_inspect.unwrap_or_else(|| inspection_delay_for_coverage(self.coverage_fraction(case)))
    }
}

/// Perceived state and information-availability time per component.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerceivedScenario {
    pub perceived: Vec<DamageState>,
    pub available_at: Vec<f64>,
    pub instrumented: Vec<bool>,
    /// Duration multiplier for damage found only after the initial queue.
    pub rediscovery_penalty: f64,
}

impl PerceivedScenario {
    /// Perfect, instantaneous knowledge of the true damage.
    pub fn exact(truth: &DamageScenario) -> Self {
        let n = truth.states().len();
        PerceivedScenario {
            perceived: truth.states().to_vec(),
            available_at: vec![0.0; n],
            instrumented: vec![true; n],
            rediscovery_penalty: default_penalty(),
        }
    }
}

/// Assign coverage and perceive every damageable component.
///
/// The draw order is fixed regardless of configuration: one shuffle of the
/// damageable components, then one uniform per damageable component. Runs
/// that differ only in coverage or accuracy therefore see nested sensor
/// sets and coupled misclassifications under the same stream.
pub fn assess_scenario<R: Rng + ?Sized>(
    case: &NetworkCase,
    truth: &DamageScenario,
    cfg: &MonitoringConfig,
    rng: &mut R,
) -> Result<PerceivedScenario> {
    cfg.validate()?;
    let n = case.components().len();
    if truth.states().len() != n {
        return Err(Error::Contract("damage scenario does not match case".into()));
    }
    let damageable: Vec<usize> = (0..n).filter(|&i| case.components()[i].kind.is_damageable()).collect();
    let mut order = damageable.clone();
    order.shuffle(rng);

    let mut instrumented = vec![false; n];
    match &cfg.coverage {
        Coverage::Fraction(p) => {
            let k = (p * damageable.len() as f64).round() as usize;
            for &i in &order[..k.min(order.len())] {
                instrumented[i] = true;
            }
        }
        Coverage::Instrumented(ids) => {
            for id in ids {
                let i = case
                    .component_position(id)
                    .ok_or_else(|| Error::Config(format!("unknown instrumented component `{id}`")))?;
                if !case.components()[i].kind.is_damageable() {
                    return Err(Error::Config(format!("`{id}` is not a damageable component")));
                }
                instrumented[i] = true;
            }
        }
    }

    let sshm = tridiagonal_confusion(cfg.a_sshm)?;
    let inspect = tridiagonal_confusion(cfg.a_inspect)?;
    let delay_inspect = cfg.inspection_delay(case);
    let mut perceived = vec![DamageState::None; n];
    let mut available_at = vec![0.0; n];
    for &i in &damageable {
        let u: f64 = rng.random();
        let (matrix, delay) = if instrumented[i] { (&sshm, cfg.delay_sshm) } else { (&inspect, delay_inspect) };
        perceived[i] = matrix.draw(truth.state(i), u);
        available_at[i] = delay;
    }
    Ok(PerceivedScenario { perceived, available_at, instrumented, rediscovery_penalty: cfg.rediscovery_penalty })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::substream;
    use proptest::prelude::*;

    #[test]
    fn matrix_examples() {
        assert_eq!(tridiagonal_confusion(1.0).unwrap(), ConfusionMatrix::identity());
        let c = tridiagonal_confusion(0.9).unwrap();
        let close = |a: &[f64; 5], b: [f64; 5]| a.iter().zip(b).all(|(x, y)| (x - y).abs() < 1e-12);
        assert!(close(c.row(DamageState::Moderate), [0.0, 0.05, 0.9, 0.05, 0.0]));
        assert!(close(c.row(DamageState::None), [0.95, 0.05, 0.0, 0.0, 0.0]));
        assert!(close(c.row(DamageState::Complete), [0.0, 0.0, 0.0, 0.05, 0.95]));
        assert!(tridiagonal_confusion(1.1).is_err());
        assert!(tridiagonal_confusion(-0.1).is_err());
    }

    #[test]
    fn zero_accuracy_never_hits_interior_truth() {
        let c = tridiagonal_confusion(0.0).unwrap();
        let mut rng = substream(2, &[0]);
        let mut seen = [0usize; 5];
        for _ in 0..4000 {
            seen[perceive(DamageState::Moderate, &c, &mut rng).index()] += 1;
        }
        assert_eq!(seen[0] + seen[2] + seen[4], 0);
        assert!((seen[1] as f64 / 4000.0 - 0.5).abs() < 0.03);
    }

    #[test]
    fn draw_frequencies() {
        let c = tridiagonal_confusion(0.9).unwrap();
        let mut rng = substream(7, &[1]);
        let n = 10_000;
        let mut seen = [0usize; 5];
        for _ in 0..n {
            seen[perceive(DamageState::Moderate, &c, &mut rng).index()] += 1;
        }
        for (k, expected) in [0.0, 0.05, 0.9, 0.05, 0.0].into_iter().enumerate() {
            assert!((seen[k] as f64 / n as f64 - expected).abs() < 0.01, "{seen:?}");
        }
    }

    #[test]
    fn delay_lookup() {
        assert_eq!(inspection_delay_for_coverage(0.0), 2.0);
        assert!((inspection_delay_for_coverage(0.1) - 1.8).abs() < 1e-12);
        assert!((inspection_delay_for_coverage(0.3) - 1.4).abs() < 1e-12);
        assert!((inspection_delay_for_coverage(0.5) - 1.0).abs() < 1e-12);
        assert!((inspection_delay_for_coverage(0.7) - 0.6).abs() < 1e-12);
        assert!((inspection_delay_for_coverage(0.4) - 1.2).abs() < 1e-12);
        assert_eq!(inspection_delay_for_coverage(0.9), 0.6);
    }

    #[test]
    fn assessment_examples() {
        let case = NetworkCase::rts24();
        let mut truth = DamageScenario::intact(&case);
        truth.set(case.component_position("gen-7").unwrap(), DamageState::Extensive);
        truth.set(case.component_position("bus-3").unwrap(), DamageState::Slight);

        let exact = assess_scenario(&case, &truth, &MonitoringConfig::perfect(), &mut substream(1, &[0])).unwrap();
        assert_eq!(exact.perceived, truth.states());
        assert!(exact.available_at.iter().all(|&t| t == 0.0));

        let insp = assess_scenario(&case, &truth, &MonitoringConfig::inspection(), &mut substream(1, &[0])).unwrap();
        for (i, c) in case.components().iter().enumerate() {
            if c.kind.is_damageable() {
                assert_eq!(insp.available_at[i], 2.0);
                assert!(!insp.instrumented[i]);
            }
        }

        let half = MonitoringConfig::partial(0.5, 0.9);
        let a = assess_scenario(&case, &truth, &half, &mut substream(1, &[5])).unwrap();
        assert_eq!(a.instrumented.iter().filter(|&&x| x).count(), 28);
        let b = assess_scenario(&case, &truth, &half, &mut substream(1, &[5])).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn coverage_sets_are_nested() {
        let case = NetworkCase::rts24();
        let truth = DamageScenario::intact(&case);
        let sets: Vec<Vec<bool>> = [0.1, 0.3, 0.5, 0.7]
            .iter()
            .map(|&p| {
                assess_scenario(&case, &truth, &MonitoringConfig::partial(p, 0.95), &mut substream(3, &[9]))
                    .unwrap()
                    .instrumented
            })
            .collect();
        for w in sets.windows(2) {
            assert!(w[0].iter().zip(&w[1]).all(|(small, big)| !small || *big));
        }
    }

    #[test]
    fn explicit_instrumentation() {
        let case = NetworkCase::rts24();
        let truth = DamageScenario::intact(&case);
        let cfg = MonitoringConfig { coverage: Coverage::Instrumented(vec!["bus-1".into()]), ..MonitoringConfig::inspection() };
        let p = assess_scenario(&case, &truth, &cfg, &mut substream(0, &[0])).unwrap();
        assert_eq!(p.instrumented.iter().filter(|&&x| x).count(), 1);
        assert_eq!(p.available_at[case.component_position("bus-1").unwrap()], 0.0);
        let bad = MonitoringConfig { coverage: Coverage::Instrumented(vec!["branch-1".into()]), ..MonitoringConfig::inspection() };
        assert!(assess_scenario(&case, &truth, &bad, &mut substream(0, &[0])).is_err());
    }

    proptest! {
        #[test]
        fn rows_are_stochastic(a in 0.0f64..=1.0) {
            let c = tridiagonal_confusion(a).unwrap();
            for row in c.rows() {
                prop_assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            }
        }

        #[test]
        fn higher_accuracy_errs_on_a_subset(lo in 0.0f64..1.0, gap in 0.0f64..1.0, u in 0.0f64..1.0, m in 0usize..5) {
            let hi = (lo + gap).min(1.0);
            let truth = DamageState::ALL[m];
            let low = tridiagonal_confusion(lo).unwrap().draw(truth, u);
            let high = tridiagonal_confusion(hi).unwrap().draw(truth, u);
            prop_assert!(high == truth || low == high);
        }
    }
}
