//! Endpoint settings and the node configuration file.

use std::net::{Ipv4Addr, SocketAddrV4};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::preset::Preset;
use crate::error::{Error, Result};

pub const DEFAULT_READ_PORT: u16 = 8000;
pub const DEFAULT_SEND_PORT: u16 = 8050;
pub const DEFAULT_LISTEN_RATE_HZ: f64 = 1000.0;
pub const DEFAULT_ADMIN_PORT: u16 = 8080;
pub const DEFAULT_SLOTS: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EndpointConfig {
    pub read_ip: String,
    pub read_port: u16,
    pub send_ip: String,
    pub send_port: u16,
    /// Upper bound on datagram reads per second.
    pub listen_rate_hz: f64,
}

impl Default for EndpointConfig {
    fn default() -> Self {
        EndpointConfig {
            read_ip: Ipv4Addr::LOCALHOST.to_string(),
            read_port: DEFAULT_READ_PORT,
            send_ip: Ipv4Addr::LOCALHOST.to_string(),
            send_port: DEFAULT_SEND_PORT,
            listen_rate_hz: DEFAULT_LISTEN_RATE_HZ,
        }
    }
}

impl EndpointConfig {
    /// Slot `id` reads on `8000 + id` and replies to `8050 + id`.
    pub fn for_slot(id: usize) -> Self {
        let offset = u16::try_from(id).unwrap_or(0);
        EndpointConfig {
            read_port: DEFAULT_READ_PORT.saturating_add(offset),
            send_port: DEFAULT_SEND_PORT.saturating_add(offset),
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.read_addr()?;
        self.send_addr()?;
        if !(self.listen_rate_hz.is_finite() && self.listen_rate_hz > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "listen_rate_hz must be positive, got {}",
                self.listen_rate_hz
            )));
        }
        Ok(())
    }

    pub fn read_addr(&self) -> Result<SocketAddrV4> {
        socket_addr("read", &self.read_ip, self.read_port)
    }

    pub fn send_addr(&self) -> Result<SocketAddrV4> {
        socket_addr("send", &self.send_ip, self.send_port)
    }
}

fn socket_addr(which: &str, ip: &str, port: u16) -> Result<SocketAddrV4> {
    let ip: Ipv4Addr = ip
        .parse()
        .map_err(|_| Error::InvalidConfig(format!("{which} IP {ip:?} is not an IPv4 address")))?;
    if port == 0 {
        return Err(Error::InvalidConfig(format!("{which} port must be in 1..=65535")));
    }
    Ok(SocketAddrV4::new(ip, port))
}

/// Per-slot section of the configuration file. Endpoint fields left out
/// fall back to [`EndpointConfig::for_slot`].
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SlotConfig {
    pub id: usize,
    pub preset: Option<String>,
    /// Inline model settings; same schema as a preset file.
    pub model: Option<Preset>,
    pub read_ip: Option<String>,
    pub read_port: Option<u16>,
    pub send_ip: Option<String>,
    pub send_port: Option<u16>,
    pub rate_hz: Option<f64>,
    pub seed: Option<u64>,
    pub overlap_ratio: Option<f64>,
    /// Switch UDP and GP on and start serving at launch.
    #[serde(default)]
    pub autostart: bool,
}

impl SlotConfig {
    pub fn endpoint(&self) -> EndpointConfig {
        let base = EndpointConfig::for_slot(self.id);
        EndpointConfig {
            read_ip: self.read_ip.clone().unwrap_or(base.read_ip),
            read_port: self.read_port.unwrap_or(base.read_port),
            send_ip: self.send_ip.clone().unwrap_or(base.send_ip),
            send_port: self.send_port.unwrap_or(base.send_port),
            listen_rate_hz: self.rate_hz.unwrap_or(base.listen_rate_hz),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NodeConfig {
    pub admin_ip: String,
    pub admin_port: u16,
    pub slots: usize,
    /// Seed for every slot's routing generator unless the slot overrides it.
    pub seed: u64,
    /// Extra preset files (`*.toml`); they shadow shipped presets of the same name.
    pub preset_dir: Option<PathBuf>,
    #[serde(rename = "slot")]
    pub slot_configs: Vec<SlotConfig>,
}

impl Default for NodeConfig {
    fn default() -> Self {
        NodeConfig {
            admin_ip: Ipv4Addr::LOCALHOST.to_string(),
            admin_port: DEFAULT_ADMIN_PORT,
            slots: DEFAULT_SLOTS,
            seed: 0,
            preset_dir: None,
            slot_configs: Vec::new(),
        }
    }
}

impl NodeConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: NodeConfig = toml::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut cfg = Self::from_toml(&text)?;
        // relative preset_dir is resolved against the config file's directory
        if let (Some(dir), Some(parent)) = (&cfg.preset_dir, path.parent()) {
            if dir.is_relative() {
                cfg.preset_dir = Some(parent.join(dir));
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.slots == 0 {
            return Err(Error::InvalidConfig("at least one slot is required".into()));
        }
        for s in &self.slot_configs {
            if s.id >= self.slots {
                return Err(Error::InvalidConfig(format!(
                    "slot id {} out of range (node has {} slots)",
                    s.id, self.slots
                )));
            }
            s.endpoint().validate()?;
            if let Some(model) = &s.model {
                model.validate()?;
            }
        }
        Ok(())
    }

    /// Returns the section for slot `id`, creating an empty one if needed.
    pub fn slot_mut(&mut self, id: usize) -> &mut SlotConfig {
        if let Some(pos) = self.slot_configs.iter().position(|s| s.id == id) {
            &mut self.slot_configs[pos]
        } else {
            self.slot_configs.push(SlotConfig {
                id,
                ..Default::default()
            });
            self.slot_configs.last_mut().expect("just pushed")
        }
    }
}
