//! Streaming client against live slots and against nothing at all.

mod common;

use std::io::Write;
use std::net::SocketAddr;
use std::time::Duration;

use common::{free_port, running_slot, wait_until};
use gpnode::client::{self, Dataset, Source, StreamSpec};
use gpnode::gp::Hyperparameters;
use gpnode::tree::TreeConfig;
use gpnode::Error;

fn spec(source: Source, count: usize, target: SocketAddr, listen_port: u16) -> StreamSpec {
    StreamSpec {
        source,
        rate_hz: 500.0,
        count,
        target,
        listen: SocketAddr::from(([127, 0, 0, 1], listen_port)),
        reply_timeout: Duration::from_millis(300),
    }
}

fn toy_cfg() -> TreeConfig {
    TreeConfig::new(Hyperparameters::isotropic(1.0, 0.1, 0.1, 1, 1).unwrap(), 16, 50).with_seed(8)
}

#[test]
fn stopped_node_means_everything_lost() {
    let target = SocketAddr::from(([127, 0, 0, 1], free_port()));
    let log = client::stream(&spec(Source::toy(1, 0.1, 1), 1, target, free_port())).unwrap();
    assert_eq!(log.summary.sent, 1);
    assert_eq!(log.summary.lost, 1);
    assert_eq!(log.summary.received, 0);
    assert!(log.summary.rmse_overall.is_none());
    assert!(client::summary_text(&log).contains("n/a"));
}

#[test]
fn streams_toy_sine_and_writes_report() {
    let listen = free_port();
    let (slot, target) = running_slot(toy_cfg(), listen);
    let log = client::stream(&spec(Source::toy(1, 0.1, 2), 300, target, listen)).unwrap();
    assert_eq!(log.summary.lost, 0);
    assert_eq!(log.summary.tail_k, 60);
    assert!(log.summary.rtt_p50.unwrap() <= log.summary.rtt_p99.unwrap());
    let ts: Vec<f64> = log.records.iter().map(|r| r.t).collect();
    assert!(ts.windows(2).all(|w| w[1] > w[0]));
    assert!(wait_until(Duration::from_secs(2), || slot
        .metrics_snapshot()
        .received_quantity
        == 300));

    let mut out = Vec::new();
    client::write_csv(&log, &mut out).unwrap();
    let text = String::from_utf8(out).unwrap();
    assert_eq!(text.lines().next().unwrap(), client::CSV_HEADER);
    assert_eq!(text.lines().count(), 301);
    slot.shutdown();
}

#[test]
fn csv_source_with_explicit_timestamps() {
    let mut file = tempfile::NamedTempFile::new().unwrap();
    writeln!(file, "x1,y1,t").unwrap();
    for i in 0..40 {
        let x = i as f64 / 40.0;
        writeln!(file, "{x},{},{}", (6.0 * x).sin(), 100.0 + i as f64 * 0.5).unwrap();
    }
    file.flush().unwrap();
    let listen = free_port();
    let (slot, target) = running_slot(toy_cfg(), listen);
    let log = client::stream(&spec(Source::Csv(file.path().to_path_buf()), 40, target, listen)).unwrap();
    assert_eq!(log.summary.received, 40);
    assert_eq!(log.records[3].t, 101.5);
    slot.shutdown();
}

#[test]
fn duplicate_timestamps_are_rejected() {
    let ds = Dataset::from_reader("x1,y1,t\n0,0,1\n1,1,2\n2,2,2\n".as_bytes()).unwrap();
    let err = ds.check_timestamps().unwrap_err();
    assert!(matches!(err, Error::InvalidArgument(_)));
    assert!(err.to_string().contains("rows 2 and 3"));

    let mut file = tempfile::NamedTempFile::new().unwrap();
    write!(file, "x1,y1,t\n0,0,5\n1,1,4\n").unwrap();
    let target = SocketAddr::from(([127, 0, 0, 1], free_port()));
    let err = client::stream(&spec(Source::Csv(file.path().to_path_buf()), 2, target, free_port())).unwrap_err();
    assert!(matches!(err, Error::InvalidArgument(_)));
}

#[test]
fn malformed_csv_headers() {
    for bad in ["a,b\n1,2\n", "x1,x2\n1,2\n", "y1,x1\n1,2\n", "x1,y1,t,z\n1,2,3,4\n"] {
        assert!(Dataset::from_reader(bad.as_bytes()).is_err(), "{bad:?}");
    }
    assert!(Dataset::from_reader("x1,y1\n1,oops\n".as_bytes()).is_err());
}

#[test]
fn monte_carlo_resets_between_runs() {
    let listen = free_port();
    let (slot, target) = running_slot(toy_cfg(), listen);
    let mut stored_after_reset = Vec::new();
    let logs = client::monte_carlo_with(&spec(Source::toy(1, 0.1, 3), 120, target, listen), 3, |_| {
        stored_after_reset.push(slot.metrics_snapshot().stored_quantity);
    })
    .unwrap();
    assert_eq!(stored_after_reset, vec![0, 0, 0]);
    let rmse: Vec<f64> = logs.iter().map(|l| l.summary.rmse_overall.unwrap()).collect();
    assert!(rmse.iter().all(|r| (r - rmse[0]).abs() <= 1e-12), "{rmse:?}");
    assert_eq!(slot.metrics_snapshot().command_quantity, 3);
    slot.shutdown();
}

#[test]
fn invalid_stream_parameters() {
    let target = SocketAddr::from(([127, 0, 0, 1], 9));
    let mut s = spec(Source::toy(1, 0.1, 1), 0, target, 9);
    assert!(client::stream(&s).is_err());
    s.count = 1;
    s.rate_hz = 0.0;
    assert!(client::stream(&s).is_err());
}
