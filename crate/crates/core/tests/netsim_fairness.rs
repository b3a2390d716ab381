//! Allocation invariants of the fluid simulator, checked against the
//! bottleneck characterisation of max-min fairness and an independent walk
//! of the PolKA forwarding function.

use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use proptest::prelude::*;

use polka_te::bundled::p4lab;
use polka_te::netsim::fairness::{max_min_fair, Demand};
use polka_te::netsim::{DirLink, Flow, FlowId, PbrMatch, PbrRule, Simulator, Topology};
use polka_te::polka;

fn q(n: i64) -> BigRational {
    BigRational::from_integer(n.into())
}

/// An allocation is max-min fair iff it is feasible and every flow either
/// meets its demand or crosses a saturated link on which no other flow gets
/// more.
fn assert_max_min(capacities: &[BigRational], demands: &[Demand], rates: &[BigRational]) {
    let mut load = vec![BigRational::zero(); capacities.len()];
    for (d, r) in demands.iter().zip(rates) {
        assert!(*r >= BigRational::zero());
        assert!(*r <= d.cap, "rate {r} above demand {}", d.cap);
        for &l in &d.links {
            load[l] += r;
        }
    }
    for (l, c) in capacities.iter().enumerate() {
        assert!(load[l] <= *c, "link {l} overloaded: {} > {c}", load[l]);
    }
    for (i, (d, r)) in demands.iter().zip(rates).enumerate() {
        if *r == d.cap {
            continue;
        }
        let bottleneck = d.links.iter().any(|&l| {
            load[l] == capacities[l]
                && demands
                    .iter()
                    .zip(rates)
                    .filter(|(o, _)| o.links.contains(&l))
                    .all(|(_, ro)| ro <= r)
        });
        assert!(bottleneck, "flow {i} at {r} has no bottleneck");
    }
}

fn instance() -> impl Strategy<Value = (Vec<BigRational>, Vec<Demand>)> {
    (2usize..=5).prop_flat_map(|n_links| {
        let caps = prop::collection::vec(1i64..=20, n_links);
        let flows = prop::collection::vec(
            (
                prop::collection::btree_set(0..n_links, 1..=n_links),
                prop_oneof![1i64..=30, Just(1_000_000)],
            ),
            1..=6,
        );
        (caps, flows).prop_map(|(caps, flows)| {
            let caps = caps.into_iter().map(q).collect();
            let demands = flows
                .into_iter()
                .map(|(links, cap)| Demand {
                    cap: q(cap),
                    links: links.into_iter().collect(),
                })
                .collect();
            (caps, demands)
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn water_filling_is_max_min_fair((caps, demands) in instance()) {
        let rates = max_min_fair(&caps, &demands);
        assert_max_min(&caps, &demands, &rates);
    }
}

#[test]
fn textbook_instance() {
    // links A (cap 10) and B (cap 4); f0 on A, f1 on A+B, f2 on B
    let caps = [q(10), q(4)];
    let demands = vec![
        Demand { cap: q(100), links: vec![0] },
        Demand { cap: q(100), links: vec![0, 1] },
        Demand { cap: q(100), links: vec![1] },
    ];
    let rates = max_min_fair(&caps, &demands);
    assert_eq!(rates, vec![q(8), q(2), q(2)]);
}

fn rule(edge: &str, src: &str, dst: &str, protocol: u8, tos: u8, tunnel: u32) -> PbrRule {
    PbrRule {
        edge: edge.into(),
        name: format!("r{protocol}_{tos}_{tunnel}"),
        matcher: PbrMatch {
            src_net: src.parse().unwrap(),
            dst_addr: dst.parse().unwrap(),
            protocol,
            tos,
        },
        tunnel_id: tunnel,
    }
}

/// p4lab plus return tunnels, with one flow per (direction, tos) pinned to
/// the given tunnel indices.
fn loaded_sim(choices: &[(bool, u8, f64)]) -> Simulator {
    let mut sim = Simulator::new(p4lab());
    let back = [
        sim.add_tunnel("AMS_edge", "MIA_edge", &["AMS", "SAO", "MIA"]).unwrap().id,
        sim.add_tunnel("AMS_edge", "MIA_edge", &["AMS", "CHI", "MIA"]).unwrap().id,
    ];
    for (i, &(forward, pick, demand)) in choices.iter().enumerate() {
        let tos = i as u8;
        let (src, dst, edge, tunnel, from, to) = if forward {
            ("host1", "host2", "MIA_edge", u32::from(pick % 3) + 1, "40.40.1.0/24", "40.40.2.2")
        } else {
            ("host2", "host1", "AMS_edge", back[usize::from(pick % 2)], "40.40.2.0/24", "40.40.1.2")
        };
        sim.set_pbr(rule(edge, from, to, 6, tos, tunnel)).unwrap();
        sim.add_flow(Flow {
            id: FlowId(i as u64 + 1),
            src_host: src.into(),
            dst_host: dst.into(),
            protocol: 6,
            tos,
            demand_mbps: demand,
            active: true,
        })
        .unwrap();
    }
    sim
}

/// Links a packet crosses inside the core, found by applying the forwarding
/// function hop by hop from the ingress edge.
fn walk(topo: &Topology, tunnel: u32) -> Vec<DirLink> {
    let t = topo.tunnel(tunnel).unwrap();
    let ingress = topo.index(&t.ingress).unwrap();
    let first = topo.index(&t.core[0]).unwrap();
    let link = topo
        .links()
        .iter()
        .position(|l| (l.a, l.b) == (ingress, first) || (l.b, l.a) == (ingress, first))
        .unwrap();
    let mut out = vec![topo.dir_link(link, ingress)];
    let mut at = first;
    while let Some(id) = &topo.nodes()[at].node_id {
        let port = polka::forward(t.route_id, id);
        let (link, next) = topo.port_neighbor(at, port).unwrap();
        out.push(topo.dir_link(link, at));
        at = next;
        assert!(out.len() <= topo.nodes().len(), "forwarding loop");
    }
    assert_eq!(topo.nodes()[at].label, t.egress);
    out
}

fn flows_strategy() -> impl Strategy<Value = Vec<(bool, u8, f64)>> {
    prop::collection::vec((any::<bool>(), 0u8..6, prop_oneof![0.5f64..40.0, Just(1000.0)]), 1..=6)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn simulator_respects_capacity_and_demand(choices in flows_strategy()) {
        let sim = loaded_sim(&choices);
        let alloc = sim.compute_allocations().unwrap();
        let topo = sim.topology();
        for (li, link) in topo.links().iter().enumerate() {
            for from_a in [true, false] {
                let load = &alloc.load[DirLink { link: li, from_a }.resource()];
                prop_assert!(load.to_f64().unwrap() <= link.capacity_mbps);
            }
        }
        for f in sim.flows() {
            prop_assert!(alloc.rate_mbps(f.id) <= f.demand_mbps + 1e-12);
        }
        // the simulator's own accounting is also max-min fair
        let caps: Vec<BigRational> = topo
            .links()
            .iter()
            .flat_map(|l| {
                let c = BigRational::from_float(l.capacity_mbps).unwrap();
                [c.clone(), c]
            })
            .collect();
        let ids: Vec<FlowId> = alloc.rates.keys().copied().collect();
        let demands: Vec<Demand> = ids
            .iter()
            .map(|id| Demand {
                cap: BigRational::from_float(sim.flow(*id).unwrap().demand_mbps).unwrap(),
                links: alloc.routes[id].links.iter().map(|d| d.resource()).collect(),
            })
            .collect();
        let rates: Vec<BigRational> = ids.iter().map(|id| alloc.rates[id].clone()).collect();
        assert_max_min(&caps, &demands, &rates);
    }

    #[test]
    fn charged_links_follow_forwarding(choices in flows_strategy()) {
        let sim = loaded_sim(&choices);
        let alloc = sim.compute_allocations().unwrap();
        for (id, route) in &alloc.routes {
            let core = walk(sim.topology(), route.tunnel_id);
            // host access link, the tunnel, egress access link
            prop_assert_eq!(route.links.len(), core.len() + 2, "flow {}", id);
            prop_assert_eq!(&route.links[1..=core.len()], core.as_slice());
        }
    }

    #[test]
    fn identical_inputs_give_identical_samples(choices in flows_strategy()) {
        let mut a = loaded_sim(&choices);
        let mut b = loaded_sim(&choices);
        for dt in [1.0, 0.5, 2.0] {
            let sa = a.advance(dt).unwrap();
            let sb = b.advance(dt).unwrap();
            prop_assert_eq!(sa.len(), sb.len());
            for (x, y) in sa.iter().zip(&sb) {
                prop_assert_eq!(&x.series_key, &y.series_key);
                prop_assert_eq!(x.t.to_bits(), y.t.to_bits());
                prop_assert_eq!(x.value.to_bits(), y.value.to_bits());
            }
        }
    }
}

#[test]
fn shared_tunnel_splits_evenly_and_spread_sums_to_bottlenecks() {
    let shared = loaded_sim(&[(true, 0, 100.0), (true, 3, 100.0), (true, 6, 100.0)]);
    let alloc = shared.compute_allocations().unwrap();
    assert_eq!(alloc.total_mbps(), 20.0);
    for id in 1..=3 {
        assert_eq!(alloc.rates[&FlowId(id)], BigRational::new(20.into(), 3.into()));
    }
    let spread = loaded_sim(&[(true, 0, 100.0), (true, 1, 100.0), (true, 2, 100.0)]);
    assert_eq!(spread.compute_allocations().unwrap().total_mbps(), 35.0);
}
