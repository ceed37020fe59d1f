//! Shared test helpers: an independent dense-solve GP oracle and socket utilities.
#![allow(dead_code)]

use std::net::{SocketAddr, UdpSocket};
use std::sync::Arc;

use gpnode::gp::Hyperparameters;
use gpnode::service::{EndpointConfig, Slot};
use gpnode::tree::TreeConfig;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform_points(rng: &mut ChaCha8Rng, n: usize, d: usize, lo: f64, hi: f64) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| (0..d).map(|_| rng.random_range(lo..hi)).collect())
        .collect()
}

/// Straight transcription of the ARD-SE formula, kept apart from the crate's kernel.
pub fn direct_kernel(x: &[f64], x2: &[f64], sigma_f: f64, ls: &[f64]) -> f64 {
    let mut s = 0.0;
    for d in 0..x.len() {
        s += (x[d] - x2[d]).powi(2) / ls[d].powi(2);
    }
    sigma_f.powi(2) * (-0.5 * s).exp()
}

/// Exact GP via a dense LU solve (no Cholesky, no incremental updates).
pub struct DenseGp {
    xs: Vec<Vec<f64>>,
    gram_lu: nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
    weights: Vec<DVector<f64>>,
    sigma_f: f64,
    ls: Vec<f64>,
}

impl DenseGp {
    pub fn new(xs: &[Vec<f64>], ys: &[Vec<f64>], hp: &Hyperparameters) -> Self {
        let n = xs.len();
        let gram = DMatrix::from_fn(n, n, |i, j| {
            direct_kernel(&xs[i], &xs[j], hp.sigma_f, &hp.length_scales) + if i == j { hp.sigma_n.powi(2) } else { 0.0 }
        });
        let lu = gram.lu();
        let weights = (0..hp.d_out)
            .map(|j| lu.solve(&DVector::from_fn(n, |i, _| ys[i][j])).expect("non-singular"))
            .collect();
        DenseGp {
            xs: xs.to_vec(),
            gram_lu: lu,
            weights,
            sigma_f: hp.sigma_f,
            ls: hp.length_scales.clone(),
        }
    }

    fn cross(&self, x: &[f64]) -> DVector<f64> {
        DVector::from_fn(self.xs.len(), |i, _| {
            direct_kernel(&self.xs[i], x, self.sigma_f, &self.ls)
        })
    }

    pub fn mean(&self, x: &[f64]) -> Vec<f64> {
        let k = self.cross(x);
        self.weights.iter().map(|w| k.dot(w)).collect()
    }

    pub fn var(&self, x: &[f64]) -> f64 {
        let k = self.cross(x);
        let v = self.gram_lu.solve(&k).expect("non-singular");
        self.sigma_f.powi(2) - k.dot(&v)
    }
}

/// An unused loopback UDP port (bound then released).
pub fn free_port() -> u16 {
    UdpSocket::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port()
}

/// Reply listener on an ephemeral loopback port.
pub fn reply_socket() -> (UdpSocket, u16) {
    let s = UdpSocket::bind("127.0.0.1:0").unwrap();
    s.set_read_timeout(Some(std::time::Duration::from_secs(2))).unwrap();
    let port = s.local_addr().unwrap().port();
    (s, port)
}

/// A slot wired to loopback, switched on and running. Retries on port races.
pub fn running_slot(cfg: TreeConfig, reply_port: u16) -> (Arc<Slot>, SocketAddr) {
    running_slot_with(0, cfg, reply_port, 1e6)
}

pub fn running_slot_with(id: usize, cfg: TreeConfig, reply_port: u16, rate_hz: f64) -> (Arc<Slot>, SocketAddr) {
    for _ in 0..20 {
        let ep = EndpointConfig {
            read_port: free_port(),
            send_port: reply_port,
            listen_rate_hz: rate_hz,
            ..Default::default()
        };
        let slot = Arc::new(Slot::new(id, cfg.clone(), ep));
        if slot.set_udp(true).is_err() {
            continue;
        }
        slot.set_gp(true).unwrap();
        slot.start().unwrap();
        let addr = slot.local_read_addr().unwrap();
        return (slot, addr);
    }
    panic!("no free port found");
}

/// Polls `cond` every 5 ms until it holds or `timeout` passes.
pub fn wait_until(timeout: std::time::Duration, mut cond: impl FnMut() -> bool) -> bool {
    let deadline = std::time::Instant::now() + timeout;
    while std::time::Instant::now() < deadline {
        if cond() {
            return true;
        }
        std::thread::sleep(std::time::Duration::from_millis(5));
    }
    cond()
}
