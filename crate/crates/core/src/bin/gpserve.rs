//! `gpserve`: run the GP node.

use std::io::IsTerminal;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use clap::Parser;
use gpnode::service::{admin, Node, NodeConfig};
use tracing::{error, info};
use tracing_subscriber::EnvFilter;

#[derive(Debug, Parser)]
#[command(name = "gpserve", version, about = "Remote Gaussian-process regression node")]
struct Args {
    /// TOML configuration file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Slot the endpoint/preset flags apply to.
    #[arg(long, default_value_t = 0)]
    slot: usize,
    #[arg(long)]
    read_ip: Option<String>,
    #[arg(long)]
    read_port: Option<u16>,
    #[arg(long)]
    send_ip: Option<String>,
    #[arg(long)]
    send_port: Option<u16>,
    /// Maximum UDP read rate in Hz.
    #[arg(long)]
    rate: Option<f64>,
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    admin_port: Option<u16>,
    /// Serve the configured slots without the admin API.
    #[arg(long)]
    headless: bool,
    /// Routing seed for every slot.
    #[arg(long)]
    seed: Option<u64>,
}

impl Args {
    fn slot_flags_given(&self) -> bool {
        self.read_ip.is_some()
            || self.read_port.is_some()
            || self.send_ip.is_some()
            || self.send_port.is_some()
            || self.rate.is_some()
            || self.preset.is_some()
    }

    fn merge_into(&self, cfg: &mut NodeConfig) {
        if let Some(p) = self.admin_port {
            cfg.admin_port = p;
        }
        if let Some(seed) = self.seed {
            cfg.seed = seed;
            for s in &mut cfg.slot_configs {
                s.seed = Some(seed);
            }
        }
        if self.slot_flags_given() || (self.headless && cfg.slot_configs.is_empty()) {
            let s = cfg.slot_mut(self.slot);
            if self.read_ip.is_some() {
                s.read_ip.clone_from(&self.read_ip);
            }
            s.read_port = self.read_port.or(s.read_port);
            if self.send_ip.is_some() {
                s.send_ip.clone_from(&self.send_ip);
            }
            s.send_port = self.send_port.or(s.send_port);
            s.rate_hz = self.rate.or(s.rate_hz);
            if self.preset.is_some() {
                s.preset.clone_from(&self.preset);
            }
        }
        if cfg.slots <= self.slot {
            cfg.slots = self.slot + 1;
        }
    }
}

async fn run(args: Args) -> gpnode::Result<()> {
    let mut cfg = match &args.config {
        Some(path) => NodeConfig::load(path)?,
        None => NodeConfig::default(),
    };
    args.merge_into(&mut cfg);
    cfg.validate()?;
    let node = Arc::new(Node::from_config(&cfg)?);

    if args.headless {
        for s in &cfg.slot_configs {
            node.bring_up(s.id)?;
        }
        info!(slots = cfg.slot_configs.len(), "headless; ctrl-c to stop");
        tokio::signal::ctrl_c().await?;
    } else {
        node.autostart(&cfg)?;
        let ip: std::net::IpAddr = cfg
            .admin_ip
            .parse()
            .map_err(|_| gpnode::Error::InvalidConfig(format!("admin_ip {:?}", cfg.admin_ip)))?;
        let addr = SocketAddr::new(ip, cfg.admin_port);
        admin::serve(Arc::clone(&node), addr, async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    }
    let node = Arc::clone(&node);
    tokio::task::spawn_blocking(move || node.shutdown())
        .await
        .map_err(|e| gpnode::Error::Internal(e.to_string()))?;
    Ok(())
}

#[tokio::main]
async fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("info")))
        .with_writer(std::io::stderr)
        .with_ansi(std::io::stderr().is_terminal())
        .init();
    let args = Args::parse();
    match run(args).await {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            error!(code = e.code(), "{e}");
            ExitCode::FAILURE
        }
    }
}
