//! The HTTP gateway driven in-process: submit a flow, read it back, tail
//! telemetry and follow the event stream.
//!
//! ```text
//! cargo run --example gateway
//! ```
//!
//! `polka-te serve` runs the same router on a socket.

use axum::body::Body;
use axum::http::Request;
use futures::StreamExt;
use http_body_util::BodyExt;
use tower::ServiceExt;

use polka_te::api::{event_stream, Gateway};
use polka_te::bundled;
use polka_te::controller::{Controller, ControllerConfig};

async fn call(router: &axum::Router, method: &str, uri: &str, body: &str) -> String {
    let req = Request::builder()
        .method(method)
        .uri(uri)
        .body(Body::from(body.to_string()))
        .unwrap();
    let resp = router.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    format!("{status} {}", String::from_utf8_lossy(&bytes))
}

#[tokio::main]
async fn main() {
    let gw = Gateway::new(Controller::new(bundled::p4lab(), ControllerConfig::default()));
    let router = gw.router();
    let events = event_stream(gw.handle(), gw.events(), 0);

    let intent = r#"{"src":"host1","dst":"host2","protocol":1,"demand_mbps":0.1,"tunnel":1}"#;
    println!("POST /flows -> {}", call(&router, "POST", "/flows", intent).await);
    gw.handle().call(|c| c.run_ticks(5)).await.unwrap().unwrap();
    println!("GET /telemetry/path:1:latency?n=3 -> {}", call(&router, "GET", "/telemetry/path:1:latency?n=3", "").await);
    let body = r#"{"objective":"min_latency"}"#;
    let out = call(&router, "POST", "/flows/1/reallocate", body).await;
    println!("POST /flows/1/reallocate -> {}...", &out[..out.len().min(120)]);
    println!("POST /flows/9/migrate -> {}", call(&router, "POST", "/flows/9/migrate", r#"{"tunnel":2}"#).await);

    let total = gw.handle().read(|c| c.bus().last_seq()).await.unwrap();
    println!("\nevents:");
    let mut events = std::pin::pin!(events);
    for _ in 0..total {
        let m = events.next().await.unwrap();
        println!("  {:>3} t={:<4} {}", m.seq, m.t, m.topic());
    }
}
