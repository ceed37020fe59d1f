//! Streaming client: sends `[x, y, t]` samples at a fixed rate, matches the
//! replies by timestamp and reports error and latency.

mod dataset;
mod report;

pub use dataset::{toy_sine, Dataset, Source, TOY_SINE};
pub use report::{summary_text, write_csv, CSV_HEADER};

use std::collections::HashMap;
use std::io;
use std::net::{Ipv4Addr, SocketAddr, UdpSocket};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::{Duration, Instant};

use serde::Serialize;
use tracing::warn;

use crate::error::{Error, Result};
use crate::protocol::{self, RESET_COMMAND};

#[derive(Debug, Clone)]
pub struct StreamSpec {
    pub source: Source,
    pub rate_hz: f64,
    pub count: usize,
    /// The node's read endpoint.
    pub target: SocketAddr,
    /// Local endpoint the node replies to.
    pub listen: SocketAddr,
    pub reply_timeout: Duration,
}

impl StreamSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.rate_hz.is_finite() && self.rate_hz > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "rate must be positive, got {}",
                self.rate_hz
            )));
        }
        if self.count == 0 {
            return Err(Error::InvalidArgument("count must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Record {
    pub t: f64,
    pub x: Vec<f64>,
    /// Target as sent on the wire.
    pub y: Vec<f64>,
    /// Reference for the error metrics: the noise-free target when the
    /// source knows it, otherwise the sent target.
    pub y_true: Vec<f64>,
    pub mu: Option<Vec<f64>>,
    pub rtt: Option<Duration>,
    pub matched: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Summary {
    pub sent: usize,
    pub received: usize,
    pub lost: usize,
    pub rmse_overall: Option<f64>,
    pub rmse_tail: Option<f64>,
    pub tail_k: usize,
    pub rtt_p50: Option<f64>,
    pub rtt_p90: Option<f64>,
    pub rtt_p99: Option<f64>,
    pub rtt_max: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ReplyLog {
    pub records: Vec<Record>,
    pub summary: Summary,
    /// Set when a socket error cut the run short; `records` holds what was sent.
    pub aborted: Option<String>,
}

impl ReplyLog {
    pub fn from_records(records: Vec<Record>, aborted: Option<String>) -> Self {
        let tail_k = (records.len() / 5).max(1);
        let mut log = ReplyLog {
            records,
            summary: Summary::default(),
            aborted,
        };
        log.summary = log.summarize(tail_k);
        log
    }

    fn summarize(&self, tail_k: usize) -> Summary {
        let matched: Vec<&Record> = self.records.iter().filter(|r| r.matched).collect();
        let mut rtts: Vec<f64> = matched.iter().filter_map(|r| r.rtt).map(|d| d.as_secs_f64()).collect();
        rtts.sort_by(f64::total_cmp);
        let pct = |p: f64| -> Option<f64> {
            if rtts.is_empty() {
                return None;
            }
            let rank = ((p * rtts.len() as f64).ceil() as usize).clamp(1, rtts.len());
            Some(rtts[rank - 1])
        };
        let tail_start = matched.len().saturating_sub(tail_k);
        Summary {
            sent: self.records.len(),
            received: matched.len(),
            lost: self.records.len() - matched.len(),
            rmse_overall: rmse(&matched),
            rmse_tail: rmse(&matched[tail_start..]),
            tail_k,
            rtt_p50: pct(0.5),
            rtt_p90: pct(0.9),
            rtt_p99: pct(0.99),
            rtt_max: rtts.last().copied(),
        }
    }

    /// RMSE over the matched records among `records[range]`.
    pub fn rmse_range(&self, range: std::ops::Range<usize>) -> Option<f64> {
        let matched: Vec<&Record> = self.records[range].iter().filter(|r| r.matched).collect();
        rmse(&matched)
    }
}

/// Root mean squared error over every output component of matched records.
fn rmse(records: &[&Record]) -> Option<f64> {
    let mut sum = 0.0;
    let mut n = 0usize;
    for r in records {
        if let Some(mu) = &r.mu {
            for (m, y) in mu.iter().zip(&r.y_true) {
                sum += (m - y) * (m - y);
                n += 1;
            }
        }
    }
    (n > 0).then(|| (sum / n as f64).sqrt())
}

struct Matching {
    // timestamp bits → (record index, send instant)
    pending: HashMap<u64, (usize, Instant)>,
    records: Vec<Record>,
    last_send: Option<Instant>,
}

fn unspecified_for(addr: &SocketAddr) -> SocketAddr {
    match addr {
        SocketAddr::V4(_) => SocketAddr::from((Ipv4Addr::UNSPECIFIED, 0)),
        SocketAddr::V6(_) => SocketAddr::from((std::net::Ipv6Addr::UNSPECIFIED, 0)),
    }
}

/// Sends a single-value command datagram (`-1` resets the model).
pub fn send_command(target: SocketAddr, value: f64) -> Result<()> {
    let socket = UdpSocket::bind(unspecified_for(&target))?;
    socket.send_to(&protocol::encode_command(value), target)?;
    Ok(())
}

pub fn stream(spec: &StreamSpec) -> Result<ReplyLog> {
    spec.validate()?;
    let data = spec.source.load(spec.count)?;
    data.check_timestamps()?;

    let listener = UdpSocket::bind(spec.listen)
        .map_err(|e| Error::InvalidArgument(format!("cannot listen on {}: {e}", spec.listen)))?;
    listener.set_read_timeout(Some(Duration::from_millis(10)))?;
    let sender = UdpSocket::bind(unspecified_for(&spec.target))?;

    let table = Arc::new(Mutex::new(Matching {
        pending: HashMap::with_capacity(spec.count),
        records: Vec::with_capacity(spec.count),
        last_send: None,
    }));
    let sending_done = Arc::new(AtomicBool::new(false));

    let listen_thread = {
        let table = Arc::clone(&table);
        let done = Arc::clone(&sending_done);
        let d_out = data.d_out;
        let timeout = spec.reply_timeout;
        thread::spawn(move || listen_replies(&listener, &table, &done, d_out, timeout))
    };

    let mut aborted = None;
    let start = Instant::now();
    let period = Duration::from_secs_f64(1.0 / spec.rate_hz);
    let mut prev_t = f64::NEG_INFINITY;
    for i in 0..spec.count {
        let due = start + period.mul_f64(i as f64);
        let now = Instant::now();
        if due > now {
            thread::sleep(due - now);
        }
        let t = match &data.timestamps {
            Some(ts) => ts[i],
            None => {
                let t = start.elapsed().as_secs_f64();
                if t > prev_t {
                    t
                } else {
                    prev_t.next_up()
                }
            }
        };
        prev_t = t;
        let (x, y) = (&data.inputs[i], &data.outputs[i]);
        let bytes = match protocol::encode_sample(x, y, t) {
            Ok(b) => b,
            Err(e) => {
                aborted = Some(format!("sample {i}: {e}"));
                break;
            }
        };
        {
            let mut tab = table.lock().expect("matching table");
            let idx = tab.records.len();
            let y_true = data.clean.as_ref().map_or(y, |c| &c[i]);
            tab.records.push(Record {
                t,
                x: x.clone(),
                y: y.clone(),
                y_true: y_true.clone(),
                mu: None,
                rtt: None,
                matched: false,
            });
            let sent_at = Instant::now();
            tab.pending.insert(t.to_bits(), (idx, sent_at));
            tab.last_send = Some(sent_at);
        }
        match sender.send_to(&bytes, spec.target) {
            Ok(_) => {}
            // stale ICMP from an earlier datagram; the sample itself may be lost
            Err(e) if e.kind() == io::ErrorKind::ConnectionRefused => {}
            Err(e) => {
                aborted = Some(format!("send to {} failed after {i} samples: {e}", spec.target));
                break;
            }
        }
    }
    sending_done.store(true, Ordering::Release);
    if let Err(e) = listen_thread
        .join()
        .unwrap_or_else(|_| Err(io::Error::other("listener panicked")))
    {
        aborted.get_or_insert_with(|| format!("reply listener failed: {e}"));
    }

    let records = std::mem::take(&mut table.lock().expect("matching table").records);
    Ok(ReplyLog::from_records(records, aborted))
}

fn listen_replies(
    socket: &UdpSocket,
    table: &Mutex<Matching>,
    sending_done: &AtomicBool,
    d_out: usize,
    timeout: Duration,
) -> io::Result<()> {
    let mut buf = vec![0u8; protocol::MAX_DATAGRAM];
    loop {
        match socket.recv_from(&mut buf) {
            Ok((n, _)) => match protocol::decode_reply(&buf[..n], d_out) {
                Ok(reply) => {
                    let mut tab = table.lock().expect("matching table");
                    if let Some((idx, sent_at)) = tab.pending.remove(&reply.t.to_bits()) {
                        let rtt = sent_at.elapsed();
                        if rtt <= timeout {
                            let r = &mut tab.records[idx];
                            r.mu = Some(reply.mu);
                            r.rtt = Some(rtt);
                            r.matched = true;
                        }
                    }
                }
                Err(e) => warn!(error = %e, "ignoring unexpected datagram"),
            },
            Err(e) if matches!(e.kind(), io::ErrorKind::WouldBlock | io::ErrorKind::TimedOut) => {}
            Err(e) if e.kind() == io::ErrorKind::ConnectionRefused => {}
            Err(e) => return Err(e),
        }
        if sending_done.load(Ordering::Acquire) {
            let tab = table.lock().expect("matching table");
            let expired = tab.last_send.is_none_or(|last| last.elapsed() >= timeout);
            if tab.pending.is_empty() || expired {
                return Ok(());
            }
        }
    }
}

/// Reset-separated repetitions of `spec`. Before each run the `-1` command
/// is sent and the client waits one reply timeout; `after_reset(run)` is
/// called at that point, before any sample of the run goes out.
pub fn monte_carlo_with(spec: &StreamSpec, runs: usize, mut after_reset: impl FnMut(usize)) -> Result<Vec<ReplyLog>> {
    let mut logs = Vec::with_capacity(runs);
    for run in 0..runs {
        send_command(spec.target, RESET_COMMAND)?;
        thread::sleep(spec.reply_timeout);
        after_reset(run);
        logs.push(stream(spec)?);
    }
    Ok(logs)
}

pub fn monte_carlo(spec: &StreamSpec, runs: usize) -> Result<Vec<ReplyLog>> {
    monte_carlo_with(spec, runs, |_| {})
}
