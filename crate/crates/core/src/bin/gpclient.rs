//! `gpclient`: stream samples to a node and report accuracy and latency.

use std::fs::File;
use std::io::BufWriter;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Parser, Subcommand};
use gpnode::client::{self, Source, StreamSpec, TOY_SINE};
use gpnode::protocol::RESET_COMMAND;

#[derive(Debug, Parser)]
#[command(name = "gpclient", version, about = "Streaming client for gpserve")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Stream samples and match replies by timestamp.
    Stream {
        /// Node read endpoint.
        #[arg(long)]
        target: SocketAddr,
        /// Local endpoint the node replies to.
        #[arg(long)]
        listen: SocketAddr,
        /// CSV file (header x1..xD,y1..yK[,t]) or `toy-sine`.
        #[arg(long, default_value = TOY_SINE)]
        source: String,
        #[arg(long, default_value_t = 200.0)]
        rate: f64,
        #[arg(long, default_value_t = 1000)]
        count: usize,
        /// Reset-separated repetitions (Monte-Carlo mode when > 1).
        #[arg(long, default_value_t = 1)]
        runs: usize,
        /// Reply timeout in seconds.
        #[arg(long, default_value_t = 1.0)]
        timeout: f64,
        /// Per-sample CSV output; run `i` of several goes to `<stem>_run<i>.<ext>`.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Input dimension of the toy-sine generator.
        #[arg(long, default_value_t = 1)]
        d_in: usize,
        /// Noise standard deviation of the toy-sine generator.
        #[arg(long, default_value_t = 0.1)]
        noise: f64,
    },
    /// Send a single-value command (default -1: reset the model).
    Reset {
        #[arg(long)]
        target: SocketAddr,
        #[arg(long, default_value_t = RESET_COMMAND, allow_hyphen_values = true)]
        value: f64,
    },
}

fn run_path(out: &Path, run: usize, runs: usize) -> PathBuf {
    if runs == 1 {
        return out.to_path_buf();
    }
    let stem = out.file_stem().and_then(|s| s.to_str()).unwrap_or("results");
    let ext = out.extension().and_then(|s| s.to_str()).unwrap_or("csv");
    out.with_file_name(format!("{stem}_run{run}.{ext}"))
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::Reset { target, value } => match client::send_command(target, value) {
            Ok(()) => ExitCode::SUCCESS,
            Err(e) => {
                eprintln!("gpclient: {e}");
                ExitCode::FAILURE
            }
        },
        Command::Stream {
            target,
            listen,
            source,
            rate,
            count,
            runs,
            timeout,
            out,
            seed,
            d_in,
            noise,
        } => {
            let spec = StreamSpec {
                source: Source::parse(&source, d_in, noise, seed),
                rate_hz: rate,
                count,
                target,
                listen,
                reply_timeout: Duration::from_secs_f64(timeout),
            };
            let logs = if runs > 1 {
                client::monte_carlo(&spec, runs)
            } else {
                client::stream(&spec).map(|l| vec![l])
            };
            let logs = match logs {
                Ok(l) => l,
                Err(e) => {
                    eprintln!("gpclient: {e}");
                    return ExitCode::FAILURE;
                }
            };
            let mut failed = false;
            for (i, log) in logs.iter().enumerate() {
                if runs > 1 {
                    println!("run {i}");
                }
                print!("{}", client::summary_text(log));
                failed |= log.aborted.is_some();
                if let Some(out) = &out {
                    let path = run_path(out, i, runs);
                    let written = File::create(&path)
                        .map_err(gpnode::Error::from)
                        .and_then(|f| client::write_csv(log, BufWriter::new(f)));
                    if let Err(e) = written {
                        eprintln!("gpclient: writing {}: {e}", path.display());
                        failed = true;
                    }
                }
            }
            if failed {
                ExitCode::FAILURE
            } else {
                ExitCode::SUCCESS
            }
        }
    }
}
