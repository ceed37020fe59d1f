//! The runnable node: slots, presets, metrics and the admin API.

pub mod admin;
mod config;
mod metrics;
mod node;
mod preset;
mod slot;

pub use config::{
    EndpointConfig, NodeConfig, SlotConfig, DEFAULT_ADMIN_PORT, DEFAULT_LISTEN_RATE_HZ, DEFAULT_READ_PORT,
    DEFAULT_SEND_PORT, DEFAULT_SLOTS,
};
pub use metrics::{Metrics, MetricsRecorder, TIMING_WINDOW};
pub use node::{Node, DEFAULT_PRESET};
pub use preset::{Preset, PresetCatalog};
pub use slot::{Handled, Slot, SlotView};
