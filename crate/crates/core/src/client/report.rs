//! Text summary and per-sample CSV output.
//!
//! CSV columns (fixed): `index,t,x,y,y_true,mu,rtt_s,matched`. Vector fields
//! are `;`-separated; `mu` and `rtt_s` are empty for lost samples. Numbers
//! are printed in shortest round-trip form.

use std::fmt::Write as _;
use std::io::Write;

use super::ReplyLog;
use crate::error::Result;

pub const CSV_HEADER: &str = "index,t,x,y,y_true,mu,rtt_s,matched";

fn join(v: &[f64]) -> String {
    v.iter().map(f64::to_string).collect::<Vec<_>>().join(";")
}

pub fn write_csv(log: &ReplyLog, mut out: impl Write) -> Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for (i, r) in log.records.iter().enumerate() {
        writeln!(
            out,
            "{i},{},{},{},{},{},{},{}",
            r.t,
            join(&r.x),
            join(&r.y),
            join(&r.y_true),
            r.mu.as_deref().map(join).unwrap_or_default(),
            r.rtt.map(|d| d.as_secs_f64().to_string()).unwrap_or_default(),
            r.matched
        )?;
    }
    Ok(())
}

pub fn summary_text(log: &ReplyLog) -> String {
    let s = &log.summary;
    let opt = |v: Option<f64>| v.map_or_else(|| "n/a".to_string(), |v| format!("{v:.6}"));
    let ms = |v: Option<f64>| v.map_or_else(|| "n/a".to_string(), |v| format!("{:.3}", v * 1e3));
    let mut out = String::new();
    let _ = writeln!(out, "sent       {}", s.sent);
    let _ = writeln!(out, "received   {}", s.received);
    let _ = writeln!(out, "lost       {}", s.lost);
    let _ = writeln!(out, "rmse       {}", opt(s.rmse_overall));
    let _ = writeln!(out, "rmse_tail  {} (last {})", opt(s.rmse_tail), s.tail_k);
    let _ = writeln!(
        out,
        "rtt_ms     p50 {}  p90 {}  p99 {}  max {}",
        ms(s.rtt_p50),
        ms(s.rtt_p90),
        ms(s.rtt_p99),
        ms(s.rtt_max)
    );
    if let Some(reason) = &log.aborted {
        let _ = writeln!(out, "aborted    {reason}");
    }
    out
}
