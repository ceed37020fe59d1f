//! Per-slot counters and timing gauges.

use std::collections::VecDeque;
use std::time::Duration;

use serde::{Deserialize, Serialize};

/// Length of the rolling window behind the mean timings.
pub const TIMING_WINDOW: usize = 100;

/// Point-in-time copy of a slot's counters and gauges. Durations are seconds.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    /// Every datagram read, whatever its class ("Received Quantity").
    pub received_quantity: u64,
    /// Training points currently held by the model ("GP Data Quantity").
    pub stored_quantity: u64,
    pub malformed_quantity: u64,
    pub command_quantity: u64,
    /// Samples the saturated tree could not store.
    pub dropped_quantity: u64,
    pub reply_quantity: u64,
    pub send_failures: u64,
    pub last_command_value: Option<f64>,
    pub last_read_time: f64,
    pub last_compute_time: f64,
    pub last_send_time: f64,
    pub mean_read_time: f64,
    pub mean_compute_time: f64,
    pub mean_send_time: f64,
}

#[derive(Debug, Default)]
struct Rolling {
    window: VecDeque<f64>,
}

impl Rolling {
    fn push(&mut self, v: f64) {
        if self.window.len() == TIMING_WINDOW {
            self.window.pop_front();
        }
        self.window.push_back(v);
    }

    fn mean(&self) -> f64 {
        if self.window.is_empty() {
            0.0
        } else {
            self.window.iter().sum::<f64>() / self.window.len() as f64
        }
    }
}

/// Mutable side of [`Metrics`], owned by the slot pipeline.
#[derive(Debug, Default)]
pub struct MetricsRecorder {
    current: Metrics,
    read: Rolling,
    compute: Rolling,
    send: Rolling,
}

impl MetricsRecorder {
    pub fn snapshot(&self) -> Metrics {
        let mut m = self.current.clone();
        m.mean_read_time = self.read.mean();
        m.mean_compute_time = self.compute.mean();
        m.mean_send_time = self.send.mean();
        m
    }

    pub fn counters(&mut self) -> &mut Metrics {
        &mut self.current
    }

    pub fn record_read(&mut self, d: Duration) {
        let s = d.as_secs_f64();
        self.current.last_read_time = s;
        self.read.push(s);
    }

    pub fn record_compute(&mut self, d: Duration) {
        let s = d.as_secs_f64();
        self.current.last_compute_time = s;
        self.compute.push(s);
    }

    pub fn record_send(&mut self, d: Duration) {
        let s = d.as_secs_f64();
        self.current.last_send_time = s;
        self.send.push(s);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fresh_metrics_are_zero() {
        assert_eq!(MetricsRecorder::default().snapshot(), Metrics::default());
    }

    #[test]
    fn rolling_mean_covers_last_window() {
        let mut r = MetricsRecorder::default();
        for i in 0..250 {
            r.record_compute(Duration::from_millis(i));
        }
        let m = r.snapshot();
        assert!((m.last_compute_time - 0.249).abs() < 1e-12);
        // mean of 150..=249 ms
        assert!((m.mean_compute_time - 0.1995).abs() < 1e-12);
        assert_eq!(m.mean_read_time, 0.0);
    }
}
