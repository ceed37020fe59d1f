//! Local HTTP admin API (JSON bodies).
//!
//! | method | path                         | body               |
//! |--------|------------------------------|--------------------|
//! | GET    | /api/host                    |                    |
//! | GET    | /api/slots                   |                    |
//! | GET    | /api/slots/{id}              |                    |
//! | GET    | /api/slots/{id}/metrics      |                    |
//! | PUT    | /api/slots/{id}/endpoint     | `EndpointConfig`   |
//! | PUT    | /api/slots/{id}/config       | `TreeConfig`       |
//! | POST   | /api/slots/{id}/udp          | `{"active": bool}` |
//! | POST   | /api/slots/{id}/gp           | `{"active": bool}` |
//! | POST   | /api/slots/{id}/start        |                    |
//! | POST   | /api/slots/{id}/stop         |                    |
//! | GET    | /api/presets                 |                    |
//! | POST   | /api/slots/{id}/preset       | `{"name": str}`    |
//! | GET    | /api/slots/{id}/events       | server-sent events |
//!
//! Errors are `{"code": ..., "message": ...}` with `code` one of
//! `locked-state`, `port-occupied`, `not-found`, `invalid-config`,
//! `invalid-state`, `invalid-argument`, `internal`, `io`.

use std::convert::Infallible;
use std::future::Future;
use std::net::{Ipv4Addr, SocketAddr, UdpSocket};
use std::sync::Arc;
use std::time::Duration;

use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::sse::{Event, KeepAlive, Sse};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post, put};
use axum::{Json, Router};
use futures::stream::Stream;
use serde::{Deserialize, Serialize};

use super::config::{EndpointConfig, DEFAULT_READ_PORT, DEFAULT_SEND_PORT};
use super::metrics::Metrics;
use super::node::Node;
use super::preset::Preset;
use super::slot::{Slot, SlotView};
use crate::error::Error;
use crate::tree::TreeConfig;

/// Push period of the metrics event stream (5 Hz).
pub const EVENT_PERIOD: Duration = Duration::from_millis(200);

#[derive(Debug, Serialize, Deserialize)]
pub struct ErrorBody {
    pub code: String,
    pub message: String,
}

pub struct ApiError(Error);

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        ApiError(e)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = match &self.0 {
            Error::NotFound { .. } => StatusCode::NOT_FOUND,
            Error::Locked { .. } | Error::PortOccupied { .. } | Error::InvalidState(_) => StatusCode::CONFLICT,
            Error::InvalidConfig(_) | Error::InvalidArgument(_) => StatusCode::BAD_REQUEST,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        let body = ErrorBody {
            code: self.0.code().to_string(),
            message: self.0.to_string(),
        };
        (status, Json(body)).into_response()
    }
}

type ApiResult<T> = Result<Json<T>, ApiError>;

#[derive(Debug, Serialize, Deserialize)]
pub struct Switch {
    pub active: bool,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct PresetChoice {
    pub name: String,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct HostInfo {
    pub local_ip: String,
    pub default_read_port: u16,
    pub default_send_port: u16,
}

/// One item of the event stream.
#[derive(Debug, Serialize, Deserialize)]
pub struct SlotEvent {
    pub udp_active: bool,
    pub gp_active: bool,
    pub running: bool,
    pub metrics: Metrics,
}

pub fn router(node: Arc<Node>) -> Router {
    Router::new()
        .route("/api/host", get(host))
        .route("/api/slots", get(list_slots))
        .route("/api/slots/{id}", get(get_slot))
        .route("/api/slots/{id}/metrics", get(metrics))
        .route("/api/slots/{id}/endpoint", put(put_endpoint))
        .route("/api/slots/{id}/config", put(put_config))
        .route("/api/slots/{id}/udp", post(switch_udp))
        .route("/api/slots/{id}/gp", post(switch_gp))
        .route("/api/slots/{id}/start", post(start))
        .route("/api/slots/{id}/stop", post(stop))
        .route("/api/presets", get(presets))
        .route("/api/slots/{id}/preset", post(apply_preset))
        .route("/api/slots/{id}/events", get(events))
        .with_state(node)
}

/// Serves the admin API until `shutdown` resolves.
pub async fn serve(
    node: Arc<Node>,
    addr: SocketAddr,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!(addr = %listener.local_addr()?, "admin api listening");
    axum::serve(listener, router(node))
        .with_graceful_shutdown(shutdown)
        .await
}

/// Best guess at this host's outward-facing IPv4 address; loopback if none.
pub fn local_ipv4() -> Ipv4Addr {
    // connect() on UDP only selects a route, nothing is sent
    UdpSocket::bind((Ipv4Addr::UNSPECIFIED, 0))
        .and_then(|s| {
            s.connect((Ipv4Addr::new(192, 0, 2, 1), 9))?;
            s.local_addr()
        })
        .ok()
        .and_then(|a| match a.ip() {
            std::net::IpAddr::V4(ip) if !ip.is_unspecified() => Some(ip),
            _ => None,
        })
        .unwrap_or(Ipv4Addr::LOCALHOST)
}

fn slot(node: &Node, id: usize) -> Result<Arc<Slot>, ApiError> {
    Ok(Arc::clone(node.slot(id)?))
}

/// Lifecycle calls may join the pipeline thread; keep them off the async workers.
async fn blocking<T: Send + 'static>(f: impl FnOnce() -> Result<T, Error> + Send + 'static) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError(Error::Internal(e.to_string())))?
        .map_err(ApiError)
}

async fn host() -> Json<HostInfo> {
    Json(HostInfo {
        local_ip: local_ipv4().to_string(),
        default_read_port: DEFAULT_READ_PORT,
        default_send_port: DEFAULT_SEND_PORT,
    })
}

async fn list_slots(State(node): State<Arc<Node>>) -> Json<Vec<SlotView>> {
    Json(node.slots().iter().map(|s| s.view()).collect())
}

async fn get_slot(State(node): State<Arc<Node>>, Path(id): Path<usize>) -> ApiResult<SlotView> {
    Ok(Json(slot(&node, id)?.view()))
}

async fn metrics(State(node): State<Arc<Node>>, Path(id): Path<usize>) -> ApiResult<Metrics> {
    Ok(Json(slot(&node, id)?.metrics_snapshot()))
}

async fn put_endpoint(
    State(node): State<Arc<Node>>,
    Path(id): Path<usize>,
    Json(ep): Json<EndpointConfig>,
) -> ApiResult<SlotView> {
    let s = slot(&node, id)?;
    s.set_endpoint(ep)?;
    Ok(Json(s.view()))
}

async fn put_config(
    State(node): State<Arc<Node>>,
    Path(id): Path<usize>,
    Json(cfg): Json<TreeConfig>,
) -> ApiResult<SlotView> {
    let s = slot(&node, id)?;
    s.set_tree_config(cfg)?;
    Ok(Json(s.view()))
}

async fn switch_udp(
    State(node): State<Arc<Node>>,
    Path(id): Path<usize>,
    Json(sw): Json<Switch>,
) -> ApiResult<SlotView> {
    let s = slot(&node, id)?;
    let v = blocking(move || s.set_udp(sw.active).map(|_| s.view())).await?;
    Ok(Json(v))
}

async fn switch_gp(
    State(node): State<Arc<Node>>,
    Path(id): Path<usize>,
    Json(sw): Json<Switch>,
) -> ApiResult<SlotView> {
    let s = slot(&node, id)?;
    let v = blocking(move || s.set_gp(sw.active).map(|_| s.view())).await?;
    Ok(Json(v))
}

async fn start(State(node): State<Arc<Node>>, Path(id): Path<usize>) -> ApiResult<SlotView> {
    let s = slot(&node, id)?;
    let v = blocking(move || s.start().map(|_| s.view())).await?;
    Ok(Json(v))
}

async fn stop(State(node): State<Arc<Node>>, Path(id): Path<usize>) -> ApiResult<SlotView> {
    let s = slot(&node, id)?;
    let v = blocking(move || {
        s.stop();
        Ok(s.view())
    })
    .await?;
    Ok(Json(v))
}

async fn presets(State(node): State<Arc<Node>>) -> Json<Vec<Preset>> {
    Json(node.presets().iter().cloned().collect())
}

async fn apply_preset(
    State(node): State<Arc<Node>>,
    Path(id): Path<usize>,
    Json(choice): Json<PresetChoice>,
) -> ApiResult<SlotView> {
    node.apply_preset(id, &choice.name)?;
    Ok(Json(slot(&node, id)?.view()))
}

fn slot_event(s: &Slot) -> SlotEvent {
    let v = s.view();
    SlotEvent {
        udp_active: v.udp_active,
        gp_active: v.gp_active,
        running: v.running,
        metrics: s.metrics_snapshot(),
    }
}

async fn events(
    State(node): State<Arc<Node>>,
    Path(id): Path<usize>,
) -> Result<Sse<impl Stream<Item = Result<Event, Infallible>>>, ApiError> {
    let s = slot(&node, id)?;
    let mut ticker = tokio::time::interval(EVENT_PERIOD);
    ticker.set_missed_tick_behavior(tokio::time::MissedTickBehavior::Skip);
    let stream = futures::stream::unfold((s, ticker), |(s, mut ticker)| async move {
        ticker.tick().await;
        let event = Event::default()
            .event("metrics")
            .json_data(slot_event(&s))
            .unwrap_or_else(|e| Event::default().event("error").data(e.to_string()));
        Some((Ok(event), (s, ticker)))
    });
    Ok(Sse::new(stream).keep_alive(KeepAlive::default()))
}
