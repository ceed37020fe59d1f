//! Remote Gaussian-process regression node.
//!
//! Clients stream `[x, y, t]` samples over UDP; each slot learns online with a
//! capacity-bounded tree of local GP experts and replies `[mu(x), t]`.
//!
//! - [`gp`]: ARD-SE kernel and exact local GP models with incremental updates.
//! - [`tree`]: the growing tree of local experts.
//! - [`protocol`]: the datagram codec.
//! - [`service`]: slots, presets, metrics and the admin API.
//! - [`client`]: the streaming/evaluation client.

pub mod client;
pub mod error;
pub mod gp;
pub mod protocol;
pub mod service;
pub mod tree;

pub use error::{Error, Result};
