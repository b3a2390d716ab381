use std::sync::mpsc;

use super::*;
use crate::bundled;

fn p4lab() -> Controller {
    Controller::new(bundled::p4lab(), ControllerConfig::default())
}

fn tcp(tos: u8) -> FlowIntent {
    FlowIntent::new("host1", "host2", 6, tos, 100.0)
}

fn topics(c: &Controller, from: usize) -> Vec<&'static str> {
    c.bus().log()[from..].iter().map(BusMessage::topic).collect()
}

#[test]
fn request_then_allocate() {
    let mut c = p4lab();
    let id = c.request_flow(tcp(1)).unwrap();
    assert_eq!(id, FlowId(1));
    assert_eq!(c.flow(id).unwrap().state, FlowState::Pending);
    assert!(c.sim().flows().next().is_none());

    let record = c.allocate_flow(id).unwrap();
    let entry = c.flow(id).unwrap();
    assert_eq!(entry.state, FlowState::Allocated);
    assert_eq!(entry.tunnel, Some(record.tunnel));
    // no telemetry yet: static capacities, widest tunnel wins
    assert!(record.fallback);
    assert_eq!(record.tunnel, 1);
    assert_eq!(
        topics(&c, 0),
        [
            "flow.requested",
            "telemetry.queried",
            "prediction.ready",
            "path.selected",
            "pbr.installed",
            "flow.allocated"
        ]
    );
    assert!(c.allocate_flow(id).is_err());
}

#[test]
fn intent_validation() {
    let mut c = p4lab();
    c.submit(tcp(1)).unwrap();
    assert!(matches!(
        c.request_flow(tcp(1)),
        Err(ControllerError::DuplicateFlow { existing: FlowId(1), .. })
    ));
    let mut zero = tcp(2);
    zero.demand_mbps = 0.0;
    assert!(matches!(c.request_flow(zero), Err(ControllerError::InvalidIntent(_))));
    assert!(c.request_flow(FlowIntent::new("host9", "host2", 6, 0, 1.0)).is_err());
    assert!(c.request_flow(FlowIntent::new("MIA", "host2", 6, 0, 1.0)).is_err());
    // rejected intents leave no trace
    assert_eq!(c.flows().count(), 1);
}

#[test]
fn split_objectives_are_rejected_for_allocation() {
    let mut c = p4lab();
    let id = c.request_flow(tcp(1).objective(Objective::MinCost)).unwrap();
    assert!(matches!(
        c.allocate_flow(id),
        Err(ControllerError::Optimizer(OptimizerError::NotSelection(Objective::MinCost)))
    ));
}

#[test]
fn pinned_tunnel_must_be_a_candidate() {
    let mut c = p4lab();
    let id = c.request_flow(tcp(1).pinned(9)).unwrap();
    assert!(c.allocate_flow(id).is_err());
    let entry = c.flow(id).unwrap();
    assert_eq!(entry.state, FlowState::Failed);
    assert!(entry.reason.is_some());
    assert_eq!(c.bus().log().last().unwrap().topic(), "flow.failed");
}

#[test]
fn no_candidate_fails_the_flow() {
    let topo = Topology::from_json(
        r#"{"schema_version":1,"name":"stub","nodes":[
            {"label":"h1","kind":"host","addr":"10.0.1.2/24"},
            {"label":"e1","kind":"edge"},
            {"label":"c1","kind":"core"},
            {"label":"e2","kind":"edge"},
            {"label":"h2","kind":"host","addr":"10.0.2.2/24"}],
          "links":[{"a":"h1","b":"e1","capacity_mbps":100},{"a":"e1","b":"c1","capacity_mbps":10},
                   {"a":"c1","b":"e2","capacity_mbps":10},{"a":"e2","b":"h2","capacity_mbps":100}]}"#,
    )
    .unwrap();
    let mut c = Controller::new(topo, ControllerConfig::default());
    let id = c.request_flow(FlowIntent::new("h1", "h2", 6, 0, 1.0)).unwrap();
    assert!(matches!(c.allocate_flow(id), Err(ControllerError::NoCandidates { .. })));
    assert_eq!(c.flow(id).unwrap().state, FlowState::Failed);

    // one tunnel: chosen directly, record still produced
    let t = c.add_tunnel("e1", "e2", &["c1"]).unwrap();
    let (_, record) = c.submit(FlowIntent::new("h1", "h2", 6, 1, 1.0)).unwrap();
    assert_eq!(record.tunnel, t);
}

#[test]
fn ticks_fill_series() {
    let mut c = p4lab();
    c.run_ticks(5).unwrap();
    for t in 1..=3 {
        assert_eq!(c.store().len(&format!("path:{t}:bandwidth")), 5);
    }
    assert_eq!(c.store().window("link:MIA-SAO:utilization", 5).unwrap(), [0.0; 5]);
    assert_eq!(c.sim().clock(), 5.0);
    assert_eq!(c.bus().log().iter().filter(|m| m.topic() == "telemetry.tick").count(), 5);
}

#[test]
fn forecasts_switch_from_fallback_to_model() {
    let mut c = p4lab();
    assert_eq!(c.forecast_series("path:2:bandwidth").unwrap().source, ForecastSource::Static);
    assert_eq!(c.forecast_series("path:2:bandwidth").unwrap().values, [10.0; 10]);
    c.run_ticks(3).unwrap();
    assert_eq!(c.forecast_series("path:2:bandwidth").unwrap().source, ForecastSource::LatestSample);
    c.run_ticks(30).unwrap();
    let f = c.forecast_series("path:2:bandwidth").unwrap();
    assert_eq!(f.source, ForecastSource::Model);
    assert_eq!(f.values, [10.0; 10]);
}

#[test]
fn migration_changes_one_rule() {
    let mut c = p4lab();
    let (id, _) = c.submit(tcp(1).pinned(1)).unwrap();
    let before = c.sim().rules().to_vec();
    let tunnels_before: Vec<_> = c.topology().tunnels().cloned().collect();
    assert!(c.migrate_flow(id, 2).unwrap());
    let after = c.sim().rules();
    assert_eq!(before.len(), after.len());
    let changed: Vec<_> = before.iter().zip(after).filter(|(a, b)| a != b).collect();
    assert_eq!(changed.len(), 1);
    let (old, new) = changed[0];
    assert_eq!(old.matcher, new.matcher);
    assert_eq!((old.tunnel_id, new.tunnel_id), (1, 2));
    assert_eq!(tunnels_before, c.topology().tunnels().cloned().collect::<Vec<_>>());

    let n = c.bus().log().len();
    assert!(!c.migrate_flow(id, 2).unwrap());
    assert_eq!(c.bus().log().len(), n);
    assert!(c.migrate_flow(id, 7).is_err());
    assert!(c.migrate_flow(FlowId(99), 1).is_err());
}

#[test]
fn migrating_a_failed_flow_is_an_error() {
    let mut c = p4lab();
    let id = c.request_flow(tcp(1).pinned(42)).unwrap();
    let _ = c.allocate_flow(id);
    assert!(matches!(
        c.migrate_flow(id, 1),
        Err(ControllerError::InvalidState { state: FlowState::Failed, .. })
    ));
}

#[test]
fn foreign_tunnel_is_rejected() {
    let mut c = p4lab();
    let back = c.add_tunnel("AMS_edge", "MIA_edge", &["AMS", "SAO", "MIA"]).unwrap();
    let (id, _) = c.submit(tcp(1).pinned(1)).unwrap();
    assert!(matches!(
        c.migrate_flow(id, back),
        Err(ControllerError::Netsim(NetsimError::ForeignTunnel { .. }))
    ));
}

#[test]
fn latency_reallocation_moves_to_fastest_tunnel() {
    let mut c = p4lab();
    let (id, _) = c.submit(FlowIntent::new("host1", "host2", 1, 0, 0.1).pinned(1)).unwrap();
    c.run_ticks(60).unwrap();
    assert_eq!(c.store().window("path:1:latency", 1).unwrap(), [23.0]);
    let report = c.reallocate(&[id], Objective::MinLatency).unwrap();
    assert_eq!(report.migrations, 1);
    assert_eq!(c.flow(id).unwrap().tunnel, Some(2));
    c.run_ticks(1).unwrap();
    assert_eq!(c.store().window("flow:1:tunnel", 1).unwrap(), [2.0]);
}

#[test]
fn aggregation_spreads_flows_over_three_tunnels() {
    let mut c = p4lab();
    for tos in 1..=3 {
        c.submit(tcp(tos).pinned(1)).unwrap();
    }
    c.run_ticks(60).unwrap();
    assert!((c.sim().compute_allocations().unwrap().total_mbps() - 20.0).abs() < 1e-9);

    let start = c.bus().log().len();
    let flows = c.flows_at_edge("MIA_edge").unwrap();
    let report = c.reallocate(&flows, Objective::MaxPredictedBandwidth).unwrap();
    let targets: Vec<u32> = report.decisions.iter().map(|d| d.to).collect();
    assert_eq!(targets, [1, 2, 3]);
    assert_eq!(report.migrations, 2);
    assert!(report.forecasts.iter().all(|f| f.source == ForecastSource::Model));
    assert_eq!(c.sim().compute_allocations().unwrap().total_mbps(), 35.0);
    assert_eq!(
        topics(&c, start),
        [
            "telemetry.queried",
            "prediction.ready",
            "path.selected",
            "path.selected",
            "path.selected",
            "flow.migrated",
            "flow.migrated"
        ]
    );
}

#[test]
fn edge_config_after_aggregation() {
    let mut c = p4lab();
    for tos in 1..=3 {
        c.submit(tcp(tos).pinned(1)).unwrap();
    }
    c.migrate_flow(FlowId(2), 2).unwrap();
    c.migrate_flow(FlowId(3), 3).unwrap();
    let text = c.render_edge_config("MIA_edge").unwrap();
    assert_eq!(text.matches("access-list flow").count(), 3);
    assert_eq!(text.matches("interface tunnel").count(), 3);
    assert_eq!(text.matches("ipv4 pbr v1").count(), 3);
    assert!(text.contains(" sequence 10 permit 6 40.40.1.0 255.255.255.0 all 40.40.2.2 255.255.255.255 all tos 2"));
    assert_eq!(text, c.render_edge_config("MIA_edge").unwrap());
    let ams = c.render_edge_config("AMS_edge").unwrap();
    assert_eq!(ams.lines().count(), 3);
}

#[test]
fn bus_log_replays_to_same_state() {
    let mut c = p4lab();
    for tos in 1..=3 {
        c.submit(tcp(tos).pinned(1)).unwrap();
    }
    c.run_ticks(30).unwrap();
    let flows = c.flows_at_edge("MIA_edge").unwrap();
    c.reallocate(&flows, Objective::MaxPredictedBandwidth).unwrap();
    c.run_ticks(5).unwrap();
    c.stop_flow(FlowId(3)).unwrap();
    c.run_ticks(2).unwrap();

    let mut text = Vec::new();
    c.bus().write_ndjson(&mut text).unwrap();
    let log = read_ndjson(text.as_slice()).unwrap();
    assert_eq!(log, c.bus().log());
    let rebuilt = replay(bundled::p4lab(), &log).unwrap();
    assert_eq!(&rebuilt, c.sim());
}

#[test]
fn seq_numbers_are_strictly_increasing() {
    let mut c = p4lab();
    c.submit(tcp(1)).unwrap();
    c.run_ticks(3).unwrap();
    let seqs: Vec<u64> = c.bus().log().iter().map(|m| m.seq).collect();
    assert!(seqs.windows(2).all(|w| w[1] == w[0] + 1));
    assert_eq!(seqs[0], 1);
    assert_eq!(c.bus().since(seqs.len() as u64 - 1).len(), 1);
}

#[test]
fn control_loop_allocates_in_background() {
    let mut controller = p4lab();
    let (tx, rx) = mpsc::channel();
    controller.bus_mut().subscribe(move |m| {
        let _ = tx.send(m.topic());
    });
    let control = ControlLoop::spawn(controller);
    let handle = control.handle();
    let id = handle.request_flow(tcp(1)).unwrap().blocking_recv().unwrap().unwrap();
    assert_eq!(id, FlowId(1));
    let seen: Vec<&str> = rx.iter().take(6).collect();
    assert_eq!(seen.last(), Some(&"flow.allocated"));
    handle.call_blocking(|c| c.run_ticks(2)).unwrap().unwrap();
    assert_eq!(handle.store().len("flow:1:throughput"), 2);
    let c = control.shutdown();
    assert_eq!(c.flow(id).unwrap().state, FlowState::Allocated);
}
