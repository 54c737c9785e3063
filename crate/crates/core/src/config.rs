//! Run configuration: JSON with every section optional, unknown keys rejected,
//! and all defaults filled in before the config is hashed or echoed.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::chain::{ChainConfig, InitialK};
use crate::error::{Error, Result};
use crate::field::ConductivityField;
use crate::grid::GridSpec;
use crate::io;
use crate::phantoms::PhantomSpec;

/// Where the observed data comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataConfig {
    /// Synthetic experiment: the data is the forward solution of this phantom.
    pub phantom: Option<PhantomSpec>,
    /// Measured data as an `index,value` CSV.
    pub boundary_file: Option<PathBuf>,
    /// Ground truth for the reconstruction error when data comes from a file.
    pub truth_file: Option<PathBuf>,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self { phantom: Some(PhantomSpec::default_gaussian_well()), boundary_file: None, truth_file: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub grid: GridSpec,
    pub chain: ChainConfig,
    pub data: DataConfig,
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        self.grid.validate().map_err(|e| Error::config("grid", e.to_string()))?;
        self.chain.validate()?;
        match (&self.data.phantom, &self.data.boundary_file) {
            (Some(_), Some(_)) => {
                return Err(Error::config("data", "give either `phantom` or `boundary_file`, not both"));
            }
            (None, None) => return Err(Error::config("data", "one of `phantom` or `boundary_file` is required")),
            (Some(p), None) => {
                if self.data.truth_file.is_some() {
                    return Err(Error::config("data.truth_file", "not allowed with a phantom"));
                }
                p.build(self.grid.n, self.grid.m).map_err(|e| Error::config("data.phantom", e.to_string()))?;
            }
            (None, Some(_)) => {}
        }
        Ok(())
    }

    /// Applies defaults that depend on other keys.
    pub fn resolved(mut self) -> Self {
        self.chain.normalizer = self.chain.normalizer.resolved();
        self
    }

    /// Resolves relative file references against `base`.
    fn rebase(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let InitialK::File { file } = &mut self.chain.initial_k {
            fix(file);
        }
        if let Some(p) = &mut self.data.boundary_file {
            fix(p);
        }
        if let Some(p) = &mut self.data.truth_file {
            fix(p);
        }
    }

    /// SHA-256 of the canonical JSON form; object keys are sorted, so the
    /// hash does not depend on key order in the source file.
    pub fn hash(&self) -> String {
        let value = serde_json::to_value(self).expect("config serializes");
        hex::encode(Sha256::digest(value.to_string().as_bytes()))
    }

    pub fn to_pretty_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Ground truth for synthetic runs or when a truth file is given.
    pub fn truth(&self) -> Result<Option<ConductivityField>> {
        if let Some(p) = &self.data.phantom {
            return p.build(self.grid.n, self.grid.m).map(Some);
        }
        match &self.data.truth_file {
            Some(path) => {
                let k = ConductivityField::with_floor(io::read_field_csv(path)?, self.chain.proposal.k_min)?;
                k.field().check_shape(self.grid.n, self.grid.m)?;
                Ok(Some(k))
            }
            None => Ok(None),
        }
    }
}

/// Parses and validates a config from JSON text.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let cfg: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        Error::config(if path == "." { String::from("<root>") } else { path }, e.into_inner().to_string())
    })?;
    cfg.validate()?;
    Ok(cfg.resolved())
}

pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let text = if text.trim().is_empty() { "{}" } else { text.as_str() };
    let mut cfg = parse_config(text)?;
    if let Some(dir) = path.parent() {
        cfg.rebase(dir);
    }
    Ok(cfg)
}
