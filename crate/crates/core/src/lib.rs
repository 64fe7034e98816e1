//! Monte Carlo simulation of post-earthquake power network recovery under
//! imperfect damage information, and the resilience value of structural
//! health monitoring.

pub mod error;
pub mod fragility;
pub mod hazard;
pub mod lp;
pub mod network;
pub mod perception;
pub mod power_flow;
pub mod recovery;
pub mod resilience;
pub mod rng;
pub mod study;

pub use error::{Error, Result};
pub use fragility::{DamageScenario, DamageState, FragilitySet, FunctionalityMap};
pub use hazard::{CorrelationModel, FaultScenario, FieldSampler, IntensityField, SimplifiedAttenuation};
pub use network::{parse_case, parse_case_file, Component, ComponentKind, NetworkCase, Point};
pub use perception::{ConfusionMatrix, Coverage, MonitoringConfig, PerceivedScenario};
pub use power_flow::{DispatchResult, FunctionalityEvaluator, NetworkState};
pub use recovery::{CrewPool, RecoveryConfig, RecoveryTrajectory, RepairTable, RepairTask};
pub use resilience::{CostModel, LorSample, Summary, VoiEstimate};
pub use study::{run_study, sweep, Arm, HazardConfig, StudyConfig, StudyReport, SweepRow};
