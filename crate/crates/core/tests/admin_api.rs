//! Admin API driven through the router and over a real TCP socket.

mod common;

use std::io::{Read, Write};
use std::net::{TcpListener, TcpStream, UdpSocket};
use std::sync::Arc;

use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use common::{free_port, reply_socket};
use gpnode::protocol::encode_sample;
use gpnode::service::admin::{self, ErrorBody, HostInfo, SlotEvent};
use gpnode::service::{Node, PresetCatalog, DEFAULT_READ_PORT};
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

fn node() -> Arc<Node> {
    Arc::new(Node::new(2, PresetCatalog::shipped(), 1).unwrap())
}

async fn call(node: &Arc<Node>, method: Method, path: &str, body: Option<Value>) -> (StatusCode, Value) {
    let req = Request::builder().method(method).uri(path);
    let req = match body {
        Some(b) => req
            .header("content-type", "application/json")
            .body(Body::from(b.to_string()))
            .unwrap(),
        None => req.body(Body::empty()).unwrap(),
    };
    let resp = admin::router(Arc::clone(node)).oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let value = serde_json::from_slice(&bytes).unwrap_or(Value::Null);
    (status, value)
}

fn error_code(v: &Value) -> String {
    serde_json::from_value::<ErrorBody>(v.clone()).unwrap().code
}

async fn point_at_loopback(node: &Arc<Node>, id: usize, reply_port: u16) -> u16 {
    let read_port = free_port();
    let (status, _) = call(
        node,
        Method::PUT,
        &format!("/api/slots/{id}/endpoint"),
        Some(json!({
            "read_ip": "127.0.0.1", "read_port": read_port,
            "send_ip": "127.0.0.1", "send_port": reply_port,
            "listen_rate_hz": 1000.0
        })),
    )
    .await;
    assert_eq!(status, StatusCode::OK);
    read_port
}

#[tokio::test]
async fn host_and_listing() {
    let n = node();
    let (status, v) = call(&n, Method::GET, "/api/host", None).await;
    assert_eq!(status, StatusCode::OK);
    let host: HostInfo = serde_json::from_value(v).unwrap();
    assert_eq!(host.default_read_port, DEFAULT_READ_PORT);
    assert!(host.local_ip.parse::<std::net::Ipv4Addr>().is_ok());

    let (status, v) = call(&n, Method::GET, "/api/slots", None).await;
    assert_eq!(status, StatusCode::OK);
    let slots = v.as_array().unwrap();
    assert_eq!(slots.len(), 2);
    assert_eq!(slots[1]["endpoint"]["read_port"], 8001);
    assert_eq!(slots[0]["udp_active"], false);

    let (status, v) = call(&n, Method::GET, "/api/slots/7", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(error_code(&v), "not-found");
}

#[tokio::test]
async fn presets_listing_and_apply() {
    let n = node();
    let (_, v) = call(&n, Method::GET, "/api/presets", None).await;
    let names: Vec<String> = v
        .as_array()
        .unwrap()
        .iter()
        .map(|p| p["name"].as_str().unwrap().to_lowercase())
        .collect();
    for want in ["sarcos", "kin40k", "pol", "pumadyn32nm", "control", "toy"] {
        assert!(names.iter().any(|n| n == want), "{want} missing from {names:?}");
    }
    let (status, v) = call(&n, Method::POST, "/api/slots/0/preset", Some(json!({"name": "sarcos"}))).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(v["tree_config"]["hp"]["d_in"], 21);
    assert_eq!(v["tree_config"]["hp"]["d_out"], 7);

    let (status, v) = call(&n, Method::POST, "/api/slots/0/preset", Some(json!({"name": "nope"}))).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert!(v["message"].as_str().unwrap().to_lowercase().contains("sarcos"));
}

#[tokio::test]
async fn lifecycle_and_locking() {
    let n = node();
    let (_rx, reply_port) = reply_socket();
    let read_port = point_at_loopback(&n, 0, reply_port).await;

    let (status, v) = call(&n, Method::POST, "/api/slots/0/start", None).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(error_code(&v), "invalid-state");

    let (status, v) = call(&n, Method::POST, "/api/slots/0/udp", Some(json!({"active": true}))).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(v["udp_active"], true);

    let (status, v) = call(
        &n,
        Method::PUT,
        "/api/slots/0/endpoint",
        Some(json!({"read_ip": "127.0.0.1", "read_port": free_port(), "send_ip": "127.0.0.1", "send_port": reply_port, "listen_rate_hz": 1000.0})),
    )
    .await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(error_code(&v), "locked-state");

    let (status, _) = call(&n, Method::POST, "/api/slots/0/gp", Some(json!({"active": true}))).await;
    assert_eq!(status, StatusCode::OK);
    let (status, v) = call(
        &n,
        Method::POST,
        "/api/slots/0/preset",
        Some(json!({"name": "control"})),
    )
    .await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(error_code(&v), "locked-state");
    let (_, view) = call(&n, Method::GET, "/api/slots/0", None).await;
    let (status, _) = call(
        &n,
        Method::PUT,
        "/api/slots/0/config",
        Some(view["tree_config"].clone()),
    )
    .await;
    assert_eq!(status, StatusCode::CONFLICT);

    let (status, v) = call(&n, Method::POST, "/api/slots/0/start", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(v["running"], true);

    let tx = UdpSocket::bind("127.0.0.1:0").unwrap();
    tx.send_to(&encode_sample(&[0.2], &[0.4], 1.0).unwrap(), ("127.0.0.1", read_port))
        .unwrap();
    let slot = Arc::clone(n.slot(0).unwrap());
    assert!(common::wait_until(std::time::Duration::from_secs(5), || slot
        .metrics_snapshot()
        .stored_quantity
        == 1));
    let (status, m) = call(&n, Method::GET, "/api/slots/0/metrics", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(m["received_quantity"], 1);
    assert_eq!(m["stored_quantity"], 1);

    let (_, v) = call(&n, Method::POST, "/api/slots/0/stop", None).await;
    assert_eq!(v["running"], false);
    assert_eq!(v["udp_active"], true);
    let (_, v) = call(&n, Method::POST, "/api/slots/0/gp", Some(json!({"active": false}))).await;
    assert_eq!(v["gp_active"], false);
    let (status, _) = call(
        &n,
        Method::POST,
        "/api/slots/0/preset",
        Some(json!({"name": "control"})),
    )
    .await;
    assert_eq!(status, StatusCode::OK);
    n.shutdown();
}

#[tokio::test]
async fn occupied_port_and_bad_bodies() {
    let n = node();
    let blocker = UdpSocket::bind("127.0.0.1:0").unwrap();
    let port = blocker.local_addr().unwrap().port();
    let (status, _) = call(
        &n,
        Method::PUT,
        "/api/slots/1/endpoint",
        Some(json!({"read_ip": "127.0.0.1", "read_port": port, "send_ip": "127.0.0.1", "send_port": 9, "listen_rate_hz": 10.0})),
    )
    .await;
    assert_eq!(status, StatusCode::OK);
    let (status, v) = call(&n, Method::POST, "/api/slots/1/udp", Some(json!({"active": true}))).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(error_code(&v), "port-occupied");
    assert!(v["message"].as_str().unwrap().contains(&port.to_string()));

    let (status, v) = call(
        &n,
        Method::PUT,
        "/api/slots/1/endpoint",
        Some(json!({"read_ip": "not-an-ip", "read_port": 1, "send_ip": "127.0.0.1", "send_port": 9, "listen_rate_hz": 10.0})),
    )
    .await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(error_code(&v), "invalid-config");

    let (status, _) = call(&n, Method::POST, "/api/slots/1/udp", Some(json!({"on": 1}))).await;
    assert!(status.is_client_error());
}

#[tokio::test]
async fn event_stream_pushes_metrics() {
    let n = node();
    let req = Request::builder()
        .uri("/api/slots/1/events")
        .body(Body::empty())
        .unwrap();
    let resp = admin::router(Arc::clone(&n)).oneshot(req).await.unwrap();
    assert_eq!(resp.status(), StatusCode::OK);
    assert!(resp.headers()["content-type"]
        .to_str()
        .unwrap()
        .starts_with("text/event-stream"));
    let mut body = resp.into_body();
    let started = std::time::Instant::now();
    let mut events = Vec::new();
    while events.len() < 3 {
        let frame = body.frame().await.unwrap().unwrap();
        let Some(data) = frame.data_ref() else { continue };
        let text = std::str::from_utf8(data).unwrap();
        if !text.contains("event: metrics") {
            continue;
        }
        let json = text.lines().find_map(|l| l.strip_prefix("data: ")).unwrap();
        events.push(serde_json::from_str::<SlotEvent>(json).unwrap());
    }
    // first tick is immediate, then one per period
    assert!(started.elapsed() >= admin::EVENT_PERIOD * 2 - std::time::Duration::from_millis(20));
    assert!(!events[0].running);
    assert_eq!(events[2].metrics.received_quantity, 0);

    let (status, _) = call(&n, Method::GET, "/api/slots/5/events", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}

#[test]
fn serves_over_tcp() {
    let port = TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let rt = tokio::runtime::Runtime::new().unwrap();
    let (tx, rx) = tokio::sync::oneshot::channel::<()>();
    let server = rt.spawn(admin::serve(node(), ([127, 0, 0, 1], port).into(), async {
        let _ = rx.await;
    }));
    let mut response = String::new();
    for _ in 0..100 {
        if let Ok(mut s) = TcpStream::connect(("127.0.0.1", port)) {
            s.write_all(b"GET /api/slots/0 HTTP/1.1\r\nHost: localhost\r\nConnection: close\r\n\r\n")
                .unwrap();
            s.read_to_string(&mut response).unwrap();
            break;
        }
        std::thread::sleep(std::time::Duration::from_millis(20));
    }
    assert!(response.starts_with("HTTP/1.1 200"), "{response}");
    assert!(response.contains("\"read_port\":8000"));
    tx.send(()).unwrap();
    rt.block_on(server).unwrap().unwrap();
}
