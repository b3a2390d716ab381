//! Bus ordering, log replay, and agreement between headless and served runs.

use std::collections::BTreeMap;

use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use proptest::prelude::*;
use tower::ServiceExt;

use polka_te::api::Gateway;
use polka_te::bundled::p4lab;
use polka_te::controller::{
    read_ndjson, replay, BusMessage, Controller, ControllerConfig, Event, FlowIntent, FlowState,
};
use polka_te::netsim::FlowId;
use polka_te::optimizer::Objective;

#[derive(Debug, Clone)]
enum Op {
    Submit { tos: u8, pin: Option<u32>, demand: f64 },
    Ticks(usize),
    Reallocate(Objective),
    Migrate { flow: u64, tunnel: u32 },
    Stop(u64),
}

fn op() -> impl Strategy<Value = Op> {
    prop_oneof![
        3 => (0u8..6, prop::option::of(1u32..=3), prop_oneof![Just(100.0), 1.0f64..30.0])
            .prop_map(|(tos, pin, demand)| Op::Submit { tos, pin, demand }),
        3 => (1usize..30).prop_map(Op::Ticks),
        1 => prop_oneof![Just(Objective::MaxPredictedBandwidth), Just(Objective::MinLatency)].prop_map(Op::Reallocate),
        2 => (1u64..5, 1u32..=4).prop_map(|(flow, tunnel)| Op::Migrate { flow, tunnel }),
        1 => (1u64..5).prop_map(Op::Stop),
    ]
}

fn intent(tos: u8, pin: Option<u32>, demand: f64) -> FlowIntent {
    let i = FlowIntent::new("host1", "host2", 6, tos, demand);
    match pin {
        Some(t) => i.pinned(t),
        None => i,
    }
}

/// Applies `op`, ignoring rejected requests: a rejection must leave no
/// mutation behind, which replay then checks.
fn apply(c: &mut Controller, op: &Op) {
    match *op {
        Op::Submit { tos, pin, demand } => {
            let _ = c.submit(intent(tos, pin, demand));
        }
        Op::Ticks(n) => c.run_ticks(n).unwrap(),
        Op::Reallocate(obj) => {
            let ids = c.flows_at_edge("MIA_edge").unwrap();
            let _ = c.reallocate(&ids, obj);
        }
        Op::Migrate { flow, tunnel } => {
            let _ = c.migrate_flow(FlowId(flow), tunnel);
        }
        Op::Stop(flow) => {
            let _ = c.stop_flow(FlowId(flow));
        }
    }
}

fn controller() -> Controller {
    Controller::new(p4lab(), ControllerConfig::default())
}

/// Each allocation decision is preceded by the telemetry query and the
/// forecasts it used, and followed by the PBR rule that enacts it.
fn check_allocation_order(log: &[BusMessage]) -> Result<(), String> {
    let pos = |pred: &dyn Fn(&Event) -> bool, range: std::ops::Range<usize>| range.clone().find(|&i| pred(&log[i].event));
    for (i, m) in log.iter().enumerate() {
        let Event::PathSelected { flow, tunnel, .. } = &m.event else { continue };
        let (flow, tunnel) = (*flow, *tunnel);
        let queried = (0..i).rev().find(|&j| matches!(&log[j].event, Event::TelemetryQueried { flows, .. } if flows.contains(&flow)));
        let predicted = (0..i).rev().find(|&j| matches!(&log[j].event, Event::PredictionReady { flows, .. } if flows.contains(&flow)));
        let (Some(q), Some(p)) = (queried, predicted) else {
            return Err(format!("seq {}: selection without query/prediction", m.seq));
        };
        if q >= p {
            return Err(format!("seq {}: prediction before query", m.seq));
        }
        let installed = pos(
            &|e| match e {
                Event::PbrInstalled { flow: f, rule } => *f == flow && rule.tunnel_id == tunnel,
                Event::FlowMigrated { flow: f, to, .. } => *f == flow && *to == tunnel,
                _ => false,
            },
            i + 1..log.len(),
        );
        // a selection that keeps the current tunnel installs nothing
        let kept = (0..i).rev().find_map(|j| match &log[j].event {
            Event::PbrInstalled { flow: f, rule } if *f == flow => Some(rule.tunnel_id),
            Event::FlowMigrated { flow: f, to, .. } if *f == flow => Some(*to),
            _ => None,
        }) == Some(tunnel);
        if installed.is_none() && !kept {
            return Err(format!("seq {}: selection of tunnel {tunnel} never enacted", m.seq));
        }
    }
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn random_sessions_replay_exactly(ops in prop::collection::vec(op(), 1..14)) {
        let mut c = controller();
        for op in &ops {
            apply(&mut c, op);
        }
        let log = c.bus().log();
        prop_assert!(log.windows(2).all(|w| w[1].seq == w[0].seq + 1 && w[1].t >= w[0].t));
        if let Err(e) = check_allocation_order(log) {
            return Err(TestCaseError::fail(e));
        }

        let mut text = Vec::new();
        c.bus().write_ndjson(&mut text).unwrap();
        let parsed = read_ndjson(text.as_slice()).unwrap();
        prop_assert_eq!(parsed.as_slice(), log);
        let rebuilt = replay(p4lab(), &parsed).unwrap();
        prop_assert_eq!(&rebuilt, c.sim());
        // the same ops from scratch give the same log, byte for byte
        let mut again = controller();
        for op in &ops {
            apply(&mut again, op);
        }
        let mut text2 = Vec::new();
        again.bus().write_ndjson(&mut text2).unwrap();
        prop_assert_eq!(text, text2);
    }
}

#[test]
fn replay_detects_a_tampered_clock() {
    let mut c = controller();
    c.submit(intent(1, None, 100.0)).unwrap();
    c.run_ticks(3).unwrap();
    let mut log = c.bus().log().to_vec();
    let tick = log.iter_mut().rev().find(|m| m.topic() == "telemetry.tick").unwrap();
    if let Event::TelemetryTick { clock, .. } = &mut tick.event {
        *clock += 1.0;
    }
    assert!(replay(p4lab(), &log).is_err());
}

#[test]
fn migrations_touch_only_the_ingress_rule() {
    let mut c = controller();
    for tos in 1..=3 {
        c.submit(intent(tos, Some(1), 100.0)).unwrap();
    }
    c.run_ticks(25).unwrap();
    let nodes_before = c.topology().nodes().to_vec();
    let tunnels_before: Vec<_> = c.topology().tunnels().cloned().collect();
    for (flow, tunnel) in [(1, 2), (2, 3), (1, 3), (3, 2), (2, 1)] {
        let rules_before = c.sim().rules().to_vec();
        assert!(c.migrate_flow(FlowId(flow), tunnel).unwrap());
        let after = c.sim().rules();
        let changed: Vec<_> = rules_before.iter().zip(after).filter(|(a, b)| a != b).collect();
        assert_eq!(rules_before.len(), after.len());
        assert_eq!(changed.len(), 1);
        let (old, new) = changed[0];
        assert_eq!((old.edge.as_str(), new.edge.as_str()), ("MIA_edge", "MIA_edge"));
        assert_eq!(old.matcher, new.matcher);
        assert_eq!(new.tunnel_id, tunnel);
    }
    assert_eq!(c.topology().nodes(), nodes_before.as_slice());
    assert_eq!(c.topology().tunnels().cloned().collect::<Vec<_>>(), tunnels_before);
}

async fn post(router: &Router, uri: &str, body: &str) -> (StatusCode, serde_json::Value) {
    let req = Request::builder()
        .method(Method::POST)
        .uri(uri)
        .header("content-type", "application/json")
        .body(Body::from(body.to_string()))
        .unwrap();
    let resp = router.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    (status, serde_json::from_slice(&bytes).unwrap())
}

#[tokio::test(flavor = "multi_thread")]
async fn gateway_session_matches_headless_run() {
    // headless
    let mut direct = controller();
    for tos in 1..=3 {
        direct.submit(intent(tos, Some(1), 100.0)).unwrap();
    }
    direct.run_ticks(30).unwrap();
    direct.reallocate(&[FlowId(2)], Objective::MaxPredictedBandwidth).unwrap();
    direct.migrate_flow(FlowId(3), 3).unwrap();
    direct.run_ticks(5).unwrap();

    // the same session driven over HTTP
    let gw = Gateway::new(controller());
    let router = gw.router();
    let handle = gw.handle();
    for tos in 1..=3 {
        let body = format!(r#"{{"src":"host1","dst":"host2","protocol":6,"tos":{tos},"demand_mbps":100,"tunnel":1}}"#);
        let (status, v) = post(&router, "/flows", &body).await;
        assert_eq!(status, StatusCode::ACCEPTED);
        assert_eq!(v["flow_id"], tos);
    }
    handle.call(|c| c.run_ticks(30)).await.unwrap().unwrap();
    let (status, _) = post(&router, "/flows/2/reallocate", r#"{"objective":"max_predicted_bandwidth"}"#).await;
    assert_eq!(status, StatusCode::OK);
    let (status, v) = post(&router, "/flows/3/migrate", r#"{"tunnel":3}"#).await;
    assert_eq!((status, v["migrated"].as_bool()), (StatusCode::OK, Some(true)));
    handle.call(|c| c.run_ticks(5)).await.unwrap().unwrap();
    let served = tokio::task::spawn_blocking(move || gw.shutdown()).await.unwrap();

    assert_eq!(served.bus().log(), direct.bus().log());
    assert_eq!(served.sim(), direct.sim());
    let states: BTreeMap<_, _> = served.flows().map(|f| (f.id, (f.state, f.tunnel))).collect();
    assert_eq!(states, direct.flows().map(|f| (f.id, (f.state, f.tunnel))).collect());
    assert!(states.values().all(|(s, _)| *s == FlowState::Allocated));
}
