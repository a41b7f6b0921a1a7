//! Run configuration: one JSON document per run, overridable by dotted
//! `--set key=value` paths, hashed for provenance.

use crate::error::{Error, Result};
use crate::geometry::ModelKind;
use crate::spectrum::CountingConvention;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::path::Path;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelKind,
    pub max_word_length: usize,
    #[serde(default = "default_convention", with = "convention_string")]
    pub counting_convention: CountingConvention,
    /// Named tolerances: integrator, newton, shorten.
    #[serde(default = "default_tolerances")]
    pub tolerances: BTreeMap<String, f64>,
    #[serde(default = "default_output_dir")]
    pub output_dir: String,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub analysis: AnalysisConfig,
}

fn default_convention() -> CountingConvention {
    CountingConvention::parse("with-iterates/unoriented").unwrap()
}

fn default_output_dir() -> String {
    "out".to_string()
}

fn default_tolerances() -> BTreeMap<String, f64> {
    BTreeMap::from([
        ("integrator".to_string(), 1e-12),
        ("newton".to_string(), 1e-10),
        ("shorten".to_string(), 1e-6),
    ])
}

mod convention_string {
    use super::CountingConvention;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(c: &CountingConvention, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&c.to_string())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<CountingConvention, D::Error> {
        let raw = String::deserialize(d)?;
        CountingConvention::parse(&raw).map_err(serde::de::Error::custom)
    }
}

/// Per-task analysis parameters; unset fields fall back to spectrum-derived
/// defaults.
#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisConfig {
    /// Zeta evaluation point as [re, im].
    pub s: Option<[f64; 2]>,
    pub k_max: Option<usize>,
    pub weighted: Option<bool>,
    /// Explicit primitive-length truncation for zeta.
    pub truncation: Option<f64>,
    /// Regression window (lo, hi) for entropy/pressure.
    pub window: Option<(f64, f64)>,
    pub potential: Option<crate::analysis::Potential>,
    pub bump_center: Option<f64>,
    pub bump_width: Option<f64>,
    pub pot_h: Option<f64>,
    pub pot_t_values: Option<Vec<f64>>,
    pub separation_t: Option<f64>,
    pub separation_delta: Option<f64>,
    pub separation_b: Option<f64>,
    pub separation_samples: Option<usize>,
    pub corollary_h: Option<f64>,
    pub corollary_k1: Option<f64>,
    pub corollary_k2: Option<f64>,
    pub corollary_n: Option<usize>,
}

impl RunConfig {
    pub fn from_value(value: serde_json::Value) -> Result<RunConfig> {
        let cfg: RunConfig = serde_json::from_value(value)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path, overrides: &[(String, String)]) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path)?;
        let mut value: serde_json::Value = serde_json::from_str(&text)?;
        for (key, raw) in overrides {
            apply_override(&mut value, key, raw)?;
        }
        RunConfig::from_value(value)
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_word_length < 1 {
            return Err(Error::Config("max_word_length must be at least 1".into()));
        }
        for (name, &tol) in &self.tolerances {
            if !(tol > 0.0) || !tol.is_finite() {
                return Err(Error::Config(format!(
                    "tolerance '{name}' must be positive, got {tol}"
                )));
            }
        }
        Ok(())
    }

    pub fn tolerance(&self, name: &str) -> f64 {
        self.tolerances
            .get(name)
            .copied()
            .unwrap_or_else(|| default_tolerances()[name])
    }

    /// SHA-256 over the canonical JSON serialization; embedded in every
    /// output record for provenance.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serializes");
        let digest = Sha256::digest(canonical.as_bytes());
        hex::encode(digest)
    }
}

/// Apply a dotted-path override; the value text is parsed as JSON when
/// possible and kept as a string otherwise.
fn apply_override(value: &mut serde_json::Value, key: &str, raw: &str) -> Result<()> {
    let parsed: serde_json::Value = serde_json::from_str(raw)
        .unwrap_or_else(|_| serde_json::Value::String(raw.to_string()));
    let mut cursor = value;
    let parts: Vec<&str> = key.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        if part.is_empty() {
            return Err(Error::Config(format!("bad override path '{key}'")));
        }
        let obj = cursor
            .as_object_mut()
            .ok_or_else(|| Error::Config(format!("override path '{key}' crosses a non-object")))?;
        if i + 1 == parts.len() {
            obj.insert(part.to_string(), parsed);
            return Ok(());
        }
        cursor = obj
            .entry(part.to_string())
            .or_insert_with(|| serde_json::Value::Object(Default::default()));
    }
    Ok(())
}
