//! One model slot: endpoint, activation switches, the tree, and the
//! receive → decode → learn → predict → reply pipeline.
//!
//! Lock order is `runner` → `state` → `metrics`. The pipeline thread only
//! ever takes `state` then `metrics`, so admin calls that hold `runner`
//! may join it safely.

use std::io;
use std::net::{Ipv4Addr, SocketAddr, SocketAddrV4, UdpSocket};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex, MutexGuard};
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant};

use serde::Serialize;
use tracing::{debug, info, warn};

use super::config::EndpointConfig;
use super::metrics::{Metrics, MetricsRecorder};
use super::preset::Preset;
use crate::error::{Error, Result};
use crate::protocol::{self, Message, MAX_DATAGRAM};
use crate::tree::{LogGpTree, TreeConfig, TreeStats};

/// How long a blocked read waits before re-checking the stop flag.
const POLL_INTERVAL: Duration = Duration::from_millis(20);

struct Sockets {
    read: UdpSocket,
    send: UdpSocket,
    reply_to: SocketAddrV4,
}

struct SlotState {
    tree_config: TreeConfig,
    preset: Option<String>,
    endpoint: EndpointConfig,
    // Some iff the UDP switch is on
    sockets: Option<Sockets>,
    // Some iff the GP switch is on
    tree: Option<LogGpTree>,
}

struct Runner {
    stop: Arc<AtomicBool>,
    handle: JoinHandle<()>,
}

/// Serializable view of a slot for the admin API.
#[derive(Debug, Clone, Serialize)]
pub struct SlotView {
    pub id: usize,
    pub endpoint: EndpointConfig,
    pub tree_config: TreeConfig,
    pub preset: Option<String>,
    pub udp_active: bool,
    pub gp_active: bool,
    pub running: bool,
    pub tree: Option<TreeStats>,
}

/// What the pipeline did with one datagram.
#[derive(Debug, Clone, PartialEq)]
pub struct Handled {
    pub class: &'static str,
    pub reply: Option<Vec<u8>>,
}

pub struct Slot {
    id: usize,
    state: Mutex<SlotState>,
    metrics: Mutex<MetricsRecorder>,
    runner: Mutex<Option<Runner>>,
    running: AtomicBool,
}

fn lock<T>(m: &Mutex<T>) -> MutexGuard<'_, T> {
    // a panic in the pipeline must not take the admin side down with it
    m.lock().unwrap_or_else(|p| p.into_inner())
}

impl Slot {
    pub fn new(id: usize, tree_config: TreeConfig, endpoint: EndpointConfig) -> Self {
        Slot {
            id,
            state: Mutex::new(SlotState {
                tree_config,
                preset: None,
                endpoint,
                sockets: None,
                tree: None,
            }),
            metrics: Mutex::new(MetricsRecorder::default()),
            runner: Mutex::new(None),
            running: AtomicBool::new(false),
        }
    }

    pub fn id(&self) -> usize {
        self.id
    }

    pub fn is_running(&self) -> bool {
        self.running.load(Ordering::Acquire)
    }

    pub fn view(&self) -> SlotView {
        let state = lock(&self.state);
        SlotView {
            id: self.id,
            endpoint: state.endpoint.clone(),
            tree_config: state.tree_config.clone(),
            preset: state.preset.clone(),
            udp_active: state.sockets.is_some(),
            gp_active: state.tree.is_some(),
            running: self.is_running(),
            tree: state.tree.as_ref().map(LogGpTree::stats),
        }
    }

    pub fn metrics_snapshot(&self) -> Metrics {
        lock(&self.metrics).snapshot()
    }

    pub fn tree_stats(&self) -> Option<TreeStats> {
        lock(&self.state).tree.as_ref().map(LogGpTree::stats)
    }

    /// Runs `f` against the active tree, e.g. to probe predictions.
    pub fn with_tree<R>(&self, f: impl FnOnce(&LogGpTree) -> R) -> Option<R> {
        lock(&self.state).tree.as_ref().map(f)
    }

    /// Actual bound read address while UDP is active (useful with port 0).
    pub fn local_read_addr(&self) -> Option<SocketAddr> {
        lock(&self.state)
            .sockets
            .as_ref()
            .and_then(|s| s.read.local_addr().ok())
    }

    pub fn set_endpoint(&self, endpoint: EndpointConfig) -> Result<()> {
        endpoint.validate()?;
        let mut state = lock(&self.state);
        let current = &state.endpoint;
        let addresses_changed = current.read_ip != endpoint.read_ip
            || current.read_port != endpoint.read_port
            || current.send_ip != endpoint.send_ip
            || current.send_port != endpoint.send_port;
        if state.sockets.is_some() && addresses_changed {
            return Err(self.locked("addresses cannot change while UDP is active"));
        }
        if self.is_running() && current.listen_rate_hz != endpoint.listen_rate_hz {
            return Err(self.locked("listening rate cannot change while running"));
        }
        state.endpoint = endpoint;
        Ok(())
    }

    pub fn set_tree_config(&self, cfg: TreeConfig) -> Result<()> {
        self.configure(cfg, None)
    }

    pub fn apply_preset(&self, preset: &Preset) -> Result<()> {
        preset.validate()?;
        let cfg = preset.tree_config(&lock(&self.state).tree_config);
        self.configure(cfg, Some(preset.name.clone()))
    }

    /// Replaces the model settings; `label` names the preset they came from.
    pub fn configure(&self, cfg: TreeConfig, label: Option<String>) -> Result<()> {
        cfg.validate()?;
        let mut state = lock(&self.state);
        if state.tree.is_some() {
            return Err(self.locked("model settings cannot change while the GP is active"));
        }
        state.tree_config = cfg;
        state.preset = label;
        Ok(())
    }

    fn locked(&self, what: &str) -> Error {
        Error::Locked {
            slot: self.id,
            what: what.into(),
        }
    }

    /// UDP switch. Switching on binds the read socket and an ephemeral send
    /// socket; switching off stops a running pipeline first.
    pub fn set_udp(&self, active: bool) -> Result<()> {
        let mut runner = lock(&self.runner);
        if active {
            let mut state = lock(&self.state);
            if state.sockets.is_some() {
                return Ok(());
            }
            state.endpoint.validate()?;
            let read_addr = state.endpoint.read_addr()?;
            let reply_to = state.endpoint.send_addr()?;
            let read = UdpSocket::bind(read_addr).map_err(|source| Error::PortOccupied {
                ip: read_addr.ip().to_string(),
                port: read_addr.port(),
                source,
            })?;
            let send = UdpSocket::bind(SocketAddrV4::new(Ipv4Addr::UNSPECIFIED, 0))?;
            info!(slot = self.id, read = %read.local_addr()?, reply_to = %reply_to, "udp active");
            state.sockets = Some(Sockets { read, send, reply_to });
        } else {
            self.stop_locked(&mut runner);
            if lock(&self.state).sockets.take().is_some() {
                info!(slot = self.id, "udp inactive");
            }
        }
        Ok(())
    }

    /// GP switch. Switching on builds a fresh empty tree, discarding any
    /// existing one, and locks the model settings.
    pub fn set_gp(&self, active: bool) -> Result<()> {
        let mut runner = lock(&self.runner);
        if active {
            let mut state = lock(&self.state);
            let tree = LogGpTree::new(state.tree_config.clone())?;
            state.tree = Some(tree);
            lock(&self.metrics).counters().stored_quantity = 0;
            info!(slot = self.id, preset = ?state.preset, "gp active (fresh model)");
        } else {
            self.stop_locked(&mut runner);
            let mut state = lock(&self.state);
            if state.tree.take().is_some() {
                info!(slot = self.id, "gp inactive");
            }
            lock(&self.metrics).counters().stored_quantity = 0;
        }
        Ok(())
    }

    /// Starts the pipeline thread. A no-op when already running.
    pub fn start(self: &Arc<Self>) -> Result<()> {
        let mut runner = lock(&self.runner);
        if runner.is_some() {
            return Ok(());
        }
        let state = lock(&self.state);
        let sockets = state
            .sockets
            .as_ref()
            .ok_or_else(|| Error::InvalidState(format!("slot {}: UDP is not active", self.id)))?;
        if state.tree.is_none() {
            return Err(Error::InvalidState(format!("slot {}: GP model is not active", self.id)));
        }
        let read = sockets.read.try_clone()?;
        let send = sockets.send.try_clone()?;
        let reply_to = sockets.reply_to;
        let min_gap = Duration::from_secs_f64(1.0 / state.endpoint.listen_rate_hz);
        drop(state);

        read.set_read_timeout(Some(POLL_INTERVAL))?;
        let stop = Arc::new(AtomicBool::new(false));
        let slot = Arc::clone(self);
        let flag = Arc::clone(&stop);
        let handle = thread::Builder::new()
            .name(format!("gpnode-slot-{}", self.id))
            .spawn(move || slot.serve(read, send, reply_to, min_gap, &flag))?;
        *runner = Some(Runner { stop, handle });
        self.running.store(true, Ordering::Release);
        info!(slot = self.id, "started");
        Ok(())
    }

    /// Stops the pipeline after the datagram in flight, if any.
    pub fn stop(&self) {
        let mut runner = lock(&self.runner);
        self.stop_locked(&mut runner);
    }

    fn stop_locked(&self, runner: &mut Option<Runner>) {
        if let Some(r) = runner.take() {
            r.stop.store(true, Ordering::Release);
            if r.handle.join().is_err() {
                warn!(slot = self.id, "pipeline thread panicked");
            }
            self.running.store(false, Ordering::Release);
            info!(slot = self.id, "stopped");
        }
    }

    /// Switches everything off.
    pub fn shutdown(&self) {
        let _ = self.set_udp(false);
        let _ = self.set_gp(false);
    }

    /// Decodes and applies one datagram, returning the reply to send (if any).
    /// Requires an active GP model; sockets are not touched.
    pub fn handle_datagram(&self, bytes: &[u8]) -> Result<Handled> {
        let started = Instant::now();
        let mut state = lock(&self.state);
        let tree = state
            .tree
            .as_mut()
            .ok_or_else(|| Error::InvalidState(format!("slot {}: GP model is not active", self.id)))?;
        let hp = &tree.config().hp;
        let message = protocol::decode_datagram(bytes, hp.d_in, hp.d_out);
        let class = message.class();
        let mut reply = None;
        let mut stored_now = None;
        match message {
            Message::Command { value } => {
                tree.reset();
                let mut m = lock(&self.metrics);
                let c = m.counters();
                c.received_quantity += 1;
                c.command_quantity += 1;
                c.last_command_value = Some(value);
                c.stored_quantity = 0;
                info!(slot = self.id, value, "reset command");
            }
            Message::Sample { x, y, t } => {
                let stored = match tree.insert(&x, &y) {
                    Ok(outcome) => outcome.stored,
                    Err(e) => {
                        warn!(slot = self.id, error = %e, "sample could not be learned");
                        false
                    }
                };
                match tree.predict(&x).and_then(|mu| protocol::encode_reply(&mu, t)) {
                    Ok(bytes) => reply = Some(bytes),
                    Err(e) => warn!(slot = self.id, error = %e, "no prediction for sample"),
                }
                stored_now = Some((stored, tree.stats().stored_points as u64));
            }
            Message::Malformed { reason, byte_len } => {
                let mut m = lock(&self.metrics);
                let c = m.counters();
                c.received_quantity += 1;
                c.malformed_quantity += 1;
                warn!(slot = self.id, bytes = byte_len, %reason, "malformed datagram");
            }
        }
        drop(state);
        if let Some((stored, total)) = stored_now {
            let mut m = lock(&self.metrics);
            let c = m.counters();
            c.received_quantity += 1;
            c.stored_quantity = total;
            if !stored {
                c.dropped_quantity += 1;
            }
            m.record_compute(started.elapsed());
        }
        Ok(Handled { class, reply })
    }

    fn serve(&self, read: UdpSocket, send: UdpSocket, reply_to: SocketAddrV4, min_gap: Duration, stop: &AtomicBool) {
        let mut buf = vec![0u8; MAX_DATAGRAM + 1];
        let mut peek = [0u8; 1];
        let mut last_read: Option<Instant> = None;
        while !stop.load(Ordering::Acquire) {
            if let Some(prev) = last_read {
                let next = prev + min_gap;
                let now = Instant::now();
                if now < next {
                    thread::sleep((next - now).min(POLL_INTERVAL));
                    continue;
                }
            }
            // wait for a datagram without reading it so the read timer
            // measures the read itself, not idle time
            match read.peek_from(&mut peek) {
                Ok(_) => {}
                Err(e) if is_timeout(&e) => continue,
                Err(e) => debug!(slot = self.id, error = %e, "peek failed"),
            }
            let read_started = Instant::now();
            let n = match read.recv_from(&mut buf) {
                Ok((n, _)) => n,
                Err(e) if is_timeout(&e) => continue,
                Err(e) => {
                    warn!(slot = self.id, error = %e, "udp read failed");
                    thread::sleep(POLL_INTERVAL);
                    continue;
                }
            };
            let read_time = read_started.elapsed();
            last_read = Some(read_started);
            lock(&self.metrics).record_read(read_time);

            let handled = match self.handle_datagram(&buf[..n]) {
                Ok(h) => h,
                Err(e) => {
                    warn!(slot = self.id, error = %e, "datagram not handled");
                    continue;
                }
            };
            let mut send_time = Duration::ZERO;
            if let Some(reply) = &handled.reply {
                let send_started = Instant::now();
                let result = send.send_to(reply, reply_to);
                send_time = send_started.elapsed();
                let mut m = lock(&self.metrics);
                match result {
                    Ok(_) => m.counters().reply_quantity += 1,
                    Err(e) => {
                        m.counters().send_failures += 1;
                        warn!(slot = self.id, error = %e, to = %reply_to, "reply send failed");
                    }
                }
                m.record_send(send_time);
            }
            debug!(
                slot = self.id,
                class = handled.class,
                bytes = n,
                reply_bytes = handled.reply.as_ref().map_or(0, Vec::len),
                read_s = read_time.as_secs_f64(),
                send_s = send_time.as_secs_f64(),
                "datagram"
            );
        }
    }
}

fn is_timeout(e: &io::Error) -> bool {
    matches!(e.kind(), io::ErrorKind::WouldBlock | io::ErrorKind::TimedOut)
}
