//! Run configuration, read from TOML.
//!
//! ```toml
//! seed = 7
//!
//! [family]
//! kind = "quartic_sum_form"
//! dim = 1
//! epsilon = 1.0
//! x_box = [[-0.5, 0.5]]
//!
//! [check]
//! conditions = ["A0", "A2", "B3w"]
//!
//! [check.probes]
//! pairs = 40
//! tangents = 2
//! ```
//!
//! Unknown keys are rejected at every level.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::conditions::Condition;
use crate::equilibrium::EquilibriumOptions;
use crate::families::FamilySpec;
use crate::mtw::{BConvexitySampler, ProbeSampler};
use crate::report::Format;
use crate::surplus::{StructureSampler, Tolerances};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    /// Worker threads; `0` uses all cores.
    #[serde(default)]
    pub threads: usize,
    pub family: FamilySpec,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub check: CheckOptions,
    #[serde(default)]
    pub scan: ScanOptions,
    #[serde(default)]
    pub equilibrium: EquilibriumOptions,
    #[serde(default)]
    pub output: OutputOptions,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CheckOptions {
    pub conditions: Vec<Condition>,
    pub structure: StructureSampler,
    pub probes: ProbeSampler,
    pub bconvexity: BConvexitySampler,
}

impl Default for CheckOptions {
    fn default() -> Self {
        Self {
            conditions: Condition::ALL.to_vec(),
            structure: StructureSampler::default(),
            probes: ProbeSampler::default(),
            bconvexity: BConvexitySampler::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScanOptions {
    /// Decides whether tangents are drawn orthogonal (A3) or free (B3).
    pub condition: Condition,
    pub probes: ProbeSampler,
}

impl Default for ScanOptions {
    fn default() -> Self {
        Self {
            condition: Condition::B3w,
            probes: ProbeSampler {
                pairs: 100,
                tangents: 1,
                all_routes: true,
                ..ProbeSampler::default()
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputOptions {
    pub format: Format,
}

/// A configuration that failed to parse, with a 1-based position when the
/// parser reports one.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub column: Option<usize>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.line, self.column) {
            (Some(l), Some(c)) => write!(f, "config error at line {l}, column {c}: {}", self.message),
            _ => write!(f, "config error: {}", self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

fn position(src: &str, offset: usize) -> (usize, usize) {
    let before = &src[..offset.min(src.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, column)
}

impl RunConfig {
    pub fn from_toml_str(src: &str) -> Result<Self, ConfigError> {
        let cfg: RunConfig = toml::from_str(src).map_err(|e| {
            let (line, column) = match e.span() {
                Some(span) => {
                    let (l, c) = position(src, span.start);
                    (Some(l), Some(c))
                }
                None => (None, None),
            };
            ConfigError {
                line,
                column,
                message: e.message().trim().to_string(),
            }
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self, ConfigError> {
        let src = std::fs::read_to_string(path).map_err(|e| ConfigError {
            line: None,
            column: None,
            message: format!("{}: {e}", path.display()),
        })?;
        Self::from_toml_str(&src)
    }

    /// A configuration with every section at its default.
    pub fn for_family(family: FamilySpec) -> Self {
        Self {
            seed: 0,
            threads: 0,
            family,
            tolerances: Tolerances::default(),
            check: CheckOptions::default(),
            scan: ScanOptions::default(),
            equilibrium: EquilibriumOptions::default(),
            output: OutputOptions::default(),
        }
    }

    fn validate(&self) -> Result<(), ConfigError> {
        let fail = |message: String| {
            Err(ConfigError {
                line: None,
                column: None,
                message,
            })
        };
        if !self.scan.condition.is_curvature() {
            return fail(format!("scan.condition must be A3w, A3s, B3w or B3s, got {}", self.scan.condition));
        }
        for p in [&self.check.probes, &self.scan.probes] {
            if p.tangents == 0 {
                return fail("probe samplers need tangents >= 1".into());
            }
            if !(0.0..=1.0).contains(&p.spot_check_fraction) {
                return fail("spot_check_fraction must lie in [0, 1]".into());
            }
            if !(p.stencil.spacing > 0.0) {
                return fail("stencil spacing must be positive".into());
            }
        }
        if !(self.equilibrium.fd_step > 0.0) {
            return fail("equilibrium.fd_step must be positive".into());
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form, hex encoded.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
    }
}
