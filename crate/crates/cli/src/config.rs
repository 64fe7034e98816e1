use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use gridquake_core::network::CaseMetadata;
use gridquake_core::perception::MonitoringConfig;
use gridquake_core::{parse_case_file, NetworkCase, StudyConfig};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const SCHEMA_VERSION: u32 = 1;

/// Name that selects the built-in RTS-24 case instead of a file.
pub const BUILTIN_CASE: &str = "rts24";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    /// `rts24`, a native JSON case, or a MATPOWER file (needs `case_metadata`).
    #[serde(default = "default_case")]
    pub case: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub case_metadata: Option<PathBuf>,
    /// Fixed damage scenario for `simulate`; skips the hazard draw.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub damage: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub study: StudyConfig,
    #[serde(default)]
    pub sweep: SweepGrid,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepGrid {
    pub baseline: MonitoringConfig,
    pub p: Vec<f64>,
    pub a: Vec<f64>,
}

impl Default for SweepGrid {
    fn default() -> Self {
        SweepGrid { baseline: MonitoringConfig::inspection(), p: vec![0.1, 0.3, 0.5, 0.7], a: vec![0.75, 0.85, 0.95] }
    }
}

fn default_case() -> String {
    BUILTIN_CASE.to_string()
}

fn default_output() -> PathBuf {
    PathBuf::from("gridquake-out")
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            schema_version: SCHEMA_VERSION,
            case: default_case(),
            case_metadata: None,
            damage: None,
            seed: None,
            output_dir: default_output(),
            study: StudyConfig::default(),
            sweep: SweepGrid::default(),
        }
    }
}

impl RunConfig {
    /// Parse a config file and resolve relative paths against its directory.
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let mut cfg: RunConfig =
            serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        if cfg.case != BUILTIN_CASE {
            cfg.case = base.join(&cfg.case).to_string_lossy().into_owned();
        }
        cfg.case_metadata = cfg.case_metadata.map(|p| base.join(p));
        cfg.damage = cfg.damage.map(|p| base.join(p));
        cfg.output_dir = base.join(&cfg.output_dir);
        Ok(cfg)
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            bail!("unsupported schema_version {} (expected {SCHEMA_VERSION})", self.schema_version);
        }
        if self.case != BUILTIN_CASE && !Path::new(&self.case).is_file() {
            bail!("case file {} does not exist", self.case);
        }
        for path in [&self.case_metadata, &self.damage].into_iter().flatten() {
            if !path.is_file() {
                bail!("referenced file {} does not exist", path.display());
            }
        }
        self.study.validate()?;
        self.sweep.baseline.validate()?;
        Ok(())
    }

    pub fn load_case(&self) -> anyhow::Result<NetworkCase> {
        if self.case == BUILTIN_CASE {
            return Ok(NetworkCase::rts24());
        }
        let meta = match &self.case_metadata {
            Some(p) => Some(
                CaseMetadata::from_json(&std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?)
                    .with_context(|| format!("parsing {}", p.display()))?,
            ),
            None => None,
        };
        Ok(parse_case_file(Path::new(&self.case), meta.as_ref())?)
    }

    /// Hex SHA-256 of the resolved config, excluding where output goes.
    pub fn fingerprint(&self) -> String {
        let mut hashed = self.clone();
        hashed.output_dir = PathBuf::new();
        let text = serde_json::to_string(&hashed).expect("config serializes");
        Sha256::digest(text.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }
}
