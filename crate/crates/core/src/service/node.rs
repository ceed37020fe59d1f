//! The slot registry.

use std::sync::Arc;

use tracing::info;

use super::config::{EndpointConfig, NodeConfig};
use super::preset::PresetCatalog;
use super::slot::Slot;
use crate::error::{Error, Result};
use crate::tree::TreeConfig;

/// Preset every slot starts from until configured otherwise.
pub const DEFAULT_PRESET: &str = "Toy";

pub struct Node {
    slots: Vec<Arc<Slot>>,
    presets: PresetCatalog,
}

impl Node {
    /// `count` slots using [`EndpointConfig::for_slot`] and the Toy preset.
    pub fn new(count: usize, presets: PresetCatalog, seed: u64) -> Result<Self> {
        let preset = presets.get(DEFAULT_PRESET)?.clone();
        let slots = (0..count)
            .map(|id| {
                let cfg =
                    TreeConfig::new(preset.hyperparameters(), preset.max_leaves, preset.max_local_data).with_seed(seed);
                let slot = Slot::new(id, cfg, EndpointConfig::for_slot(id));
                slot.apply_preset(&preset)?;
                Ok(Arc::new(slot))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Node { slots, presets })
    }

    /// Builds the registry and applies every `[[slot]]` section. Does not
    /// switch anything on; see [`Node::autostart`].
    pub fn from_config(cfg: &NodeConfig) -> Result<Self> {
        cfg.validate()?;
        let presets = match &cfg.preset_dir {
            Some(dir) => PresetCatalog::with_dir(dir)?,
            None => PresetCatalog::shipped(),
        };
        let node = Node::new(cfg.slots, presets, cfg.seed)?;
        for sc in &cfg.slot_configs {
            let slot = node.slot(sc.id)?;
            let view = slot.view();
            let mut tree_cfg = view.tree_config;
            let mut label = view.preset;
            if let Some(name) = &sc.preset {
                let p = node.presets.get(name)?;
                tree_cfg = p.tree_config(&tree_cfg);
                label = Some(p.name.clone());
            }
            if let Some(model) = &sc.model {
                tree_cfg = model.tree_config(&tree_cfg);
                label = Some(if model.name.is_empty() {
                    "custom".to_string()
                } else {
                    model.name.clone()
                });
            }
            if let Some(seed) = sc.seed {
                tree_cfg.rng_seed = seed;
            }
            if let Some(r) = sc.overlap_ratio {
                tree_cfg.overlap_ratio = r;
            }
            slot.configure(tree_cfg, label)?;
            slot.set_endpoint(sc.endpoint())?;
        }
        Ok(node)
    }

    pub fn slots(&self) -> &[Arc<Slot>] {
        &self.slots
    }

    pub fn slot(&self, id: usize) -> Result<&Arc<Slot>> {
        self.slots.get(id).ok_or_else(|| Error::NotFound {
            what: format!("slot {id}"),
            available: (0..self.slots.len()).map(|i| i.to_string()).collect(),
        })
    }

    pub fn presets(&self) -> &PresetCatalog {
        &self.presets
    }

    pub fn apply_preset(&self, id: usize, name: &str) -> Result<()> {
        let preset = self.presets.get(name)?;
        self.slot(id)?.apply_preset(preset)
    }

    /// UDP on, GP on, start: the operator's bring-up sequence.
    pub fn bring_up(&self, id: usize) -> Result<()> {
        let slot = self.slot(id)?;
        slot.set_udp(true)?;
        if let Err(e) = slot.set_gp(true).and_then(|_| slot.start()) {
            slot.set_udp(false)?;
            return Err(e);
        }
        info!(slot = id, "serving");
        Ok(())
    }

    /// Brings up the slots marked `autostart` in `cfg`.
    pub fn autostart(&self, cfg: &NodeConfig) -> Result<()> {
        for sc in cfg.slot_configs.iter().filter(|s| s.autostart) {
            self.bring_up(sc.id)?;
        }
        Ok(())
    }

    pub fn shutdown(&self) {
        for s in &self.slots {
            s.shutdown();
        }
    }
}

impl Drop for Node {
    fn drop(&mut self) {
        self.shutdown();
    }
}
