//! Named model presets.
//!
//! A preset is a small TOML document:
//!
//! ```toml
//! name = "Toy"
//! d_in = 1
//! d_out = 1
//! sigma_f = 1.0          # signal standard deviation
//! length_scales = [0.1]  # one per input dimension
//! sigma_n = 0.1          # noise standard deviation
//! max_leaves = 16
//! max_local_data = 50
//! ```
//!
//! Six presets ship with the crate (SARCOS, KIN40K, POL, PUMADYN32NM,
//! Control, Toy). Their numbers are defaults chosen for this project; load
//! your own values from a preset directory to override them.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gp::Hyperparameters;
use crate::tree::TreeConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Preset {
    #[serde(default)]
    pub name: String,
    pub d_in: usize,
    pub d_out: usize,
    pub sigma_f: f64,
    pub length_scales: Vec<f64>,
    pub sigma_n: f64,
    pub max_leaves: usize,
    pub max_local_data: usize,
}

impl Preset {
    pub fn from_toml(text: &str) -> Result<Self> {
        let p: Preset = toml::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        p.validate()?;
        Ok(p)
    }

    pub fn hyperparameters(&self) -> Hyperparameters {
        Hyperparameters {
            sigma_f: self.sigma_f,
            length_scales: self.length_scales.clone(),
            sigma_n: self.sigma_n,
            d_in: self.d_in,
            d_out: self.d_out,
        }
    }

    /// Tree settings from this preset; routing knobs are taken from `base`.
    pub fn tree_config(&self, base: &TreeConfig) -> TreeConfig {
        TreeConfig {
            max_leaves: self.max_leaves,
            max_local_data: self.max_local_data,
            overlap_ratio: base.overlap_ratio,
            rng_seed: base.rng_seed,
            hp: self.hyperparameters(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let cfg = TreeConfig::new(self.hyperparameters(), self.max_leaves, self.max_local_data);
        cfg.validate()
            .map_err(|e| Error::InvalidConfig(format!("preset {:?}: {e}", self.name)))
    }
}

const SHIPPED: [&str; 6] = [
    include_str!("../../presets/sarcos.toml"),
    include_str!("../../presets/kin40k.toml"),
    include_str!("../../presets/pol.toml"),
    include_str!("../../presets/pumadyn32nm.toml"),
    include_str!("../../presets/control.toml"),
    include_str!("../../presets/toy.toml"),
];

/// Name-indexed preset collection. Lookups ignore ASCII case.
#[derive(Debug, Clone)]
pub struct PresetCatalog {
    presets: BTreeMap<String, Preset>,
}

impl PresetCatalog {
    pub fn shipped() -> Self {
        let mut presets = BTreeMap::new();
        for text in SHIPPED {
            let p = Preset::from_toml(text).expect("shipped presets are valid");
            presets.insert(p.name.to_ascii_lowercase(), p);
        }
        PresetCatalog { presets }
    }

    /// Shipped presets plus every `*.toml` in `dir`; files shadow shipped
    /// presets of the same name. A file without `name` is named after its stem.
    pub fn with_dir(dir: &Path) -> Result<Self> {
        let mut catalog = Self::shipped();
        for entry in std::fs::read_dir(dir)? {
            let path = entry?.path();
            if path.extension().and_then(|e| e.to_str()) != Some("toml") {
                continue;
            }
            let text = std::fs::read_to_string(&path)?;
            let mut p: Preset =
                toml::from_str(&text).map_err(|e| Error::InvalidConfig(format!("{}: {e}", path.display())))?;
            if p.name.is_empty() {
                p.name = path
                    .file_stem()
                    .and_then(|s| s.to_str())
                    .unwrap_or_default()
                    .to_string();
            }
            p.validate()?;
            catalog.insert(p);
        }
        Ok(catalog)
    }

    pub fn insert(&mut self, preset: Preset) {
        self.presets.insert(preset.name.to_ascii_lowercase(), preset);
    }

    pub fn get(&self, name: &str) -> Result<&Preset> {
        self.presets
            .get(&name.to_ascii_lowercase())
            .ok_or_else(|| Error::NotFound {
                what: format!("preset {name:?}"),
                available: self.names(),
            })
    }

    pub fn names(&self) -> Vec<String> {
        self.presets.values().map(|p| p.name.clone()).collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Preset> {
        self.presets.values()
    }
}

impl Default for PresetCatalog {
    fn default() -> Self {
        Self::shipped()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shipped_presets_validate() {
        let c = PresetCatalog::shipped();
        let mut names = c.names();
        names.sort();
        assert_eq!(names, ["Control", "KIN40K", "POL", "PUMADYN32NM", "SARCOS", "Toy"]);
        for p in c.iter() {
            assert_eq!(p.length_scales.len(), p.d_in, "{}", p.name);
        }
        let toy = c.get("Toy").unwrap();
        assert_eq!((toy.d_in, toy.d_out), (1, 1));
        assert_eq!(c.get("sarcos").unwrap().d_out, 7);
    }

    #[test]
    fn unknown_preset_lists_alternatives() {
        let err = PresetCatalog::shipped().get("MNIST").unwrap_err();
        assert_eq!(err.code(), "not-found");
        assert!(err.to_string().contains("Toy"), "{err}");
    }

    #[test]
    fn rejects_inconsistent_preset() {
        let text = "name = \"bad\"\nd_in = 2\nd_out = 1\nsigma_f = 1.0\nlength_scales = [1.0]\nsigma_n = 0.1\nmax_leaves = 2\nmax_local_data = 4";
        assert_eq!(Preset::from_toml(text).unwrap_err().code(), "invalid-config");
    }

    #[test]
    fn directory_overrides_shipped() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(
            dir.path().join("mine.toml"),
            "d_in = 2\nd_out = 1\nsigma_f = 2.0\nlength_scales = [1.0, 1.0]\nsigma_n = 0.2\nmax_leaves = 3\nmax_local_data = 9",
        )
        .unwrap();
        std::fs::write(
            dir.path().join("toy.toml"),
            "name = \"Toy\"\nd_in = 1\nd_out = 1\nsigma_f = 3.0\nlength_scales = [1.0]\nsigma_n = 0.2\nmax_leaves = 3\nmax_local_data = 9",
        )
        .unwrap();
        let c = PresetCatalog::with_dir(dir.path()).unwrap();
        assert_eq!(c.get("mine").unwrap().sigma_f, 2.0);
        assert_eq!(c.get("Toy").unwrap().sigma_f, 3.0);
    }
}
