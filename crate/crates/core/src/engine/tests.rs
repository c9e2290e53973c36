use proptest::prelude::*;

use super::*;
use crate::baselines::{NodeRankPolicy, RandomPolicy};
use crate::substrate::tests::line3;
use crate::substrate::{SubstrateError, SubstrateNode};
use crate::workload::{generate_substrate, generate_vnr_stream, SubstrateConfig, VirtualLink, VnrConfig};

fn vnr(id: u64, demands: &[f64], links: &[(usize, usize, f64)], t_s: f64, t_e: f64) -> VirtualNetworkRequest {
    VirtualNetworkRequest {
        id,
        node_demands: demands.to_vec(),
        links: links
            .iter()
            .map(|&(a, b, bw_demand)| VirtualLink { a, b, bw_demand })
            .collect(),
        t_s,
        t_e,
    }
}

/// Ranks every node in a fixed order, keeping only those with enough cpu.
struct Fixed(Vec<NodeId>);

impl PolicyProvider for Fixed {
    fn name(&self) -> &str {
        "fixed"
    }

    fn rank(&mut self, s: &MultiDomainSubstrate, v: &VirtualNetworkRequest) -> Vec<Vec<NodeId>> {
        v.node_demands
            .iter()
            .map(|&d| {
                self.0
                    .iter()
                    .copied()
                    .filter(|&n| s.nodes()[n].cpu_available >= d)
                    .collect()
            })
            .collect()
    }
}

/// Every simple path from `src` to `dst` whose links all carry `demand`,
/// as (node sequence, link sequence).
fn all_paths(s: &MultiDomainSubstrate, src: NodeId, dst: NodeId, demand: f64) -> Vec<(Vec<NodeId>, Vec<LinkId>)> {
    fn go(
        s: &MultiDomainSubstrate,
        at: NodeId,
        dst: NodeId,
        demand: f64,
        nodes: &mut Vec<NodeId>,
        links: &mut Vec<LinkId>,
        out: &mut Vec<(Vec<NodeId>, Vec<LinkId>)>,
    ) {
        if at == dst {
            out.push((nodes.clone(), links.clone()));
            return;
        }
        for l in s.links() {
            let Some(next) = l.other(at) else { continue };
            if l.bw_available < demand || nodes.contains(&next) {
                continue;
            }
            nodes.push(next);
            links.push(l.id);
            go(s, next, dst, demand, nodes, links, out);
            nodes.pop();
            links.pop();
        }
    }
    let mut out = Vec::new();
    go(s, src, dst, demand, &mut vec![src], &mut Vec::new(), &mut out);
    out
}

/// Minimum hop count, and the smallest node sequence achieving it.
fn oracle_path(s: &MultiDomainSubstrate, src: NodeId, dst: NodeId, demand: f64) -> Option<(Vec<NodeId>, Vec<LinkId>)> {
    all_paths(s, src, dst, demand)
        .into_iter()
        .min_by(|a, b| a.1.len().cmp(&b.1.len()).then(a.0.cmp(&b.0)))
}

#[test]
fn embed_nodes_two_demands_on_two_nodes() {
    let nodes = vec![
        SubstrateNode::new(0, 0, (0.0, 0.0), 45.0),
        SubstrateNode::new(1, 0, (1.0, 0.0), 60.0),
    ];
    let mut s = MultiDomainSubstrate::new(1, nodes, &[(0, 1, 100.0)]).unwrap();
    let v = vnr(0, &[40.0, 10.0], &[(0, 1, 5.0)], 0.0, 1.0);
    let map = embed_nodes(&mut s, &v, &[vec![0, 1], vec![0, 1]]).unwrap();
    assert_eq!(map, vec![0, 1]);
    assert_eq!(s.node(0).unwrap().cpu_available, 5.0);
    assert_eq!(s.node(1).unwrap().cpu_available, 50.0);

    // Enumerate every injective assignment of the two virtual nodes: the
    // greedy answer must be one of the cpu-feasible ones.
    let caps = [45.0, 60.0];
    let feasible: Vec<[usize; 2]> = (0..2)
        .flat_map(|a| (0..2).map(move |b| [a, b]))
        .filter(|m| m[0] != m[1] && caps[m[0]] >= 40.0 && caps[m[1]] >= 10.0)
        .collect();
    assert_eq!(feasible, vec![[0, 1], [1, 0]]);
    assert!(feasible.contains(&[map[0], map[1]]));
}

#[test]
fn embed_nodes_failure_rolls_back() {
    let mut s = line3();
    let before = s.resource_vector();
    let v = vnr(0, &[20.0, 20.0, 20.0], &[(0, 1, 1.0), (1, 2, 1.0)], 0.0, 1.0);
    let err = embed_nodes(&mut s, &v, &[vec![0, 1, 2], vec![0, 1, 2], vec![0, 1, 2]]).unwrap_err();
    match err {
        EmbedError::NodeMappingFailed { vnode, partial } => {
            assert_eq!(vnode, 2);
            assert_eq!(partial, vec![Some(0), Some(1), None]);
        }
        other => panic!("unexpected {other:?}"),
    }
    assert!(s.resource_vector().bit_identical(&before));
}

#[test]
fn bfs_examples() {
    let s = line3();
    assert_eq!(bfs_path(&s, 0, 1, 50.0), Some(vec![0]));
    assert_eq!(bfs_path(&s, 0, 1, 50.5), None);
    assert_eq!(bfs_path(&s, 2, 0, 10.0), Some(vec![1, 0]));
    assert_eq!(bfs_path(&s, 1, 1, 1e9), Some(vec![]));

    // 0-1-4 is two hops, 0-2-3-4 three.
    let nodes = (0..5).map(|i| SubstrateNode::new(i, 0, (i as f64, 0.0), 10.0)).collect();
    let mut s = MultiDomainSubstrate::new(
        1,
        nodes,
        &[(0, 1, 20.0), (1, 4, 20.0), (0, 2, 20.0), (2, 3, 20.0), (3, 4, 20.0)],
    )
    .unwrap();
    let p = bfs_path(&s, 0, 4, 10.0).unwrap();
    assert_eq!(p, vec![0, 1]);
    assert_eq!(Some(p), oracle_path(&s, 0, 4, 10.0).map(|o| o.1));
    s.allocate_path(&[1], 15.0).unwrap();
    let p = bfs_path(&s, 0, 4, 10.0).unwrap();
    assert_eq!(p.len(), 3);
    assert_eq!(Some(p), oracle_path(&s, 0, 4, 10.0).map(|o| o.1));
}

#[test]
fn bfs_prefers_smallest_node_sequence_among_ties() {
    // Two 2-hop routes 0-2-3 and 0-1-3; the one through node 1 wins.
    let nodes = (0..4).map(|i| SubstrateNode::new(i, 0, (0.0, 0.0), 1.0)).collect();
    let s = MultiDomainSubstrate::new(1, nodes, &[(0, 2, 5.0), (2, 3, 5.0), (0, 1, 5.0), (1, 3, 5.0)]).unwrap();
    let p = bfs_path(&s, 0, 3, 1.0).unwrap();
    assert_eq!(s.walk(0, &p).unwrap(), vec![0, 1, 3]);
}

#[test]
fn embed_vnr_link_failure_keeps_substrate() {
    let mut s = line3();
    s.allocate_path(&[1], 45.0).unwrap();
    let before = s.resource_vector();
    let v = vnr(4, &[5.0, 5.0], &[(0, 1, 10.0)], 0.0, 3.0);
    let rec = embed_vnr(&mut s, &v, &[vec![0], vec![2]]);
    assert!(!rec.accepted);
    assert_eq!(rec.node_map, vec![Some(0), Some(2)]);
    assert_eq!(rec.link_paths, vec![None]);
    assert_eq!(rec.indicator_product(), 0);
    assert!(s.resource_vector().bit_identical(&before));
    assert_eq!(s.live_embeddings().count(), 0);
}

#[test]
fn empty_stream() {
    let s = line3();
    let out = run_simulation(s.clone(), &[], &mut Fixed(vec![0, 1, 2]), MetricsLedger::new(0.0));
    assert!(out.records.is_empty() && out.events.is_empty());
    assert_eq!(out.substrate, s);
    assert!(out.ledger.summary().acc.is_none());
}

#[test]
fn single_vnr_is_embedded_and_released() {
    let s = line3();
    let stream = [vnr(0, &[10.0, 5.0], &[(0, 1, 10.0)], 1.0, 4.0)];
    let out = run_simulation(s.clone(), &stream, &mut Fixed(vec![0, 1, 2]), MetricsLedger::new(0.0));
    assert!(out.records[0].accepted);
    assert_eq!(out.records[0].node_map, vec![Some(0), Some(1)]);
    assert_eq!(out.before_flush.cpu, vec![70.0, 25.0, 10.0]);
    assert!(out.substrate.resource_vector().bit_identical(&s.resource_vector()));
    assert_eq!(out.ledger.acc(3.0).unwrap(), 1.0);
}

#[test]
fn three_vnr_hand_trace() {
    // V1 takes nodes 0,1 and link 0. V2 needs 25 on link 0 which has 20
    // left, so it is rejected. V1 departs at 10, before V3 arrives at 12,
    // so V3's 60 cpu fits on node 0 again.
    let stream = [
        vnr(1, &[50.0, 20.0], &[(0, 1, 30.0)], 0.0, 10.0),
        vnr(2, &[20.0, 5.0], &[(0, 1, 25.0)], 5.0, 20.0),
        vnr(3, &[60.0], &[], 12.0, 30.0),
    ];
    let s = line3();
    let out = run_simulation(s.clone(), &stream, &mut Fixed(vec![0, 1, 2]), MetricsLedger::new(0.0));
    let acc: Vec<bool> = out.records.iter().map(|r| r.accepted).collect();
    assert_eq!(acc, vec![true, false, true]);
    assert_eq!(out.records[1].node_map, vec![Some(0), Some(1)]);
    let kinds: Vec<(f64, SimEventKind)> = out.events.iter().map(|e| (e.time, e.kind)).collect();
    assert_eq!(
        kinds,
        vec![
            (0.0, SimEventKind::Arrival { vnr_id: 1 }),
            (5.0, SimEventKind::Arrival { vnr_id: 2 }),
            (10.0, SimEventKind::Departure { vnr_id: 1 }),
            (12.0, SimEventKind::Arrival { vnr_id: 3 }),
            (30.0, SimEventKind::Departure { vnr_id: 3 }),
        ]
    );
    assert_eq!(out.before_flush.cpu, vec![20.0, 30.0, 10.0]);
    assert_eq!(out.records[0].revenue, 1000.0);
    assert_eq!(out.records[0].cost, 1000.0);
    assert_eq!(out.records[2].revenue, 1080.0);
    assert_eq!(out.ledger.total_revenue(), 2080.0);
    assert!((out.ledger.acc(12.0).unwrap() - 2.0 / 3.0).abs() < 1e-15);
    assert!(out.substrate.resource_vector().bit_identical(&s.resource_vector()));

    let report = validate_records(&s, &stream, &out.records);
    assert!(report.is_clean(), "{:?}", report.violations);
    assert!(report.before_flush.bit_identical(&out.before_flush));
}

#[test]
fn double_release_is_an_error() {
    let mut s = line3();
    let v = vnr(9, &[10.0, 10.0], &[(0, 1, 10.0)], 0.0, 1.0);
    let rec = embed_vnr(&mut s, &v, &[vec![0], vec![1]]);
    assert!(rec.accepted);
    s.release(&rec).unwrap();
    assert_eq!(s.release(&rec), Err(SubstrateError::DoubleRelease(9)));
}

#[test]
fn interleaved_release_matches_ledger() {
    let mut s = line3();
    let a = embed_vnr(&mut s, &vnr(1, &[30.0, 10.0], &[(0, 1, 20.0)], 0.0, 5.0), &[vec![0], vec![2]]);
    let b = embed_vnr(&mut s, &vnr(2, &[25.0, 5.0], &[(0, 1, 15.0)], 1.0, 9.0), &[vec![1], vec![0]]);
    assert!(a.accepted && b.accepted);
    s.release(&a).unwrap();
    // Only B remains: node 1 -25, node 0 -5, link 0 -15.
    let v = s.resource_vector();
    assert_eq!(v.cpu, vec![75.0, 5.0, 10.0]);
    assert_eq!(v.bw, vec![35.0, 50.0]);
    s.release(&b).unwrap();
    assert!(s.resource_vector().bit_identical(&line3().resource_vector()));
}

#[test]
fn release_of_rejected_record_is_refused() {
    let mut s = line3();
    let rec = embed_vnr(&mut s, &vnr(3, &[500.0], &[], 0.0, 1.0), &[vec![0]]);
    assert!(!rec.accepted);
    assert!(s.release(&rec).is_err());
}

fn small_world(seed: u64) -> MultiDomainSubstrate {
    let cfg = SubstrateConfig {
        num_domains: 2,
        nodes_per_domain: 5,
        total_links: 16,
        cpu_range: (20.0, 60.0),
        bw_range: (20.0, 60.0),
        ..SubstrateConfig::default()
    };
    generate_substrate(&cfg, seed).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn runs_validate_and_conserve(seed in any::<u64>(), random in any::<bool>()) {
        let s = small_world(seed);
        let stream = generate_vnr_stream(
            &VnrConfig { count: 60, vnode_range: (1, 4), arrival_rate: 0.2, mean_lifetime: 30.0, ..VnrConfig::default() },
            seed ^ 1,
        );
        let out = if random {
            run_simulation(s.clone(), &stream, &mut RandomPolicy { seed }, MetricsLedger::new(0.0))
        } else {
            run_simulation(s.clone(), &stream, &mut NodeRankPolicy, MetricsLedger::new(0.0))
        };
        let report = validate_records(&s, &stream, &out.records);
        prop_assert!(report.is_clean(), "{:?}", report.violations);
        prop_assert!(report.before_flush.bit_identical(&out.before_flush));
        prop_assert!(report.after_flush.bit_identical(&out.substrate.resource_vector()));
        prop_assert!(out.substrate.resource_vector().bit_identical(&s.resource_vector()));
        for r in &out.records {
            prop_assert_eq!(r.indicator_product() == 1, r.accepted);
            if r.accepted {
                prop_assert!(r.revenue <= r.cost);
            }
        }
    }

    #[test]
    fn bfs_matches_enumeration(seed in any::<u64>(), demand in 1u32..70, a in 0usize..10, b in 0usize..10) {
        let mut s = small_world(seed);
        // Thin out some links so that bandwidth matters.
        for l in 0..s.num_links() {
            if (seed >> (l % 64)) & 1 == 1 {
                let take = s.links()[l].bw_available / 2.0;
                s.allocate_path(&[l], take.floor()).unwrap();
            }
        }
        let got = bfs_path(&s, a, b, demand as f64);
        let want = oracle_path(&s, a, b, demand as f64);
        prop_assert_eq!(got, want.map(|o| o.1));
    }

    #[test]
    fn allocate_release_fuzz(ops in proptest::collection::vec((0usize..3, 1u32..40, any::<bool>()), 1..40)) {
        let mut s = line3();
        let initial = s.resource_vector();
        let mut held: Vec<EmbeddingRecord> = Vec::new();
        let mut next_id = 0u64;
        for (node, cpu, release) in ops {
            if release && !held.is_empty() {
                let r = held.remove(0);
                s.release(&r).unwrap();
                continue;
            }
            let other = (node + 1) % 3;
            let v = vnr(next_id, &[cpu as f64, 1.0], &[(0, 1, cpu as f64)], 0.0, 1.0);
            next_id += 1;
            let before = s.resource_vector();
            let r = embed_vnr(&mut s, &v, &[vec![node], vec![other]]);
            if r.accepted {
                held.push(r);
            } else {
                prop_assert!(s.resource_vector().bit_identical(&before));
            }
            let v = s.resource_vector();
            prop_assert!(v.cpu.iter().all(|&c| c >= 0.0));
            prop_assert!(v.bw.iter().all(|&b| b >= 0.0));
        }
        for r in held.drain(..) {
            s.release(&r).unwrap();
        }
        prop_assert!(s.resource_vector().bit_identical(&initial));
    }
}
