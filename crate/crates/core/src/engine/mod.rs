//! Discrete-event embedding engine.
//!
//! For every arriving request the engine asks a [`PolicyProvider`] for
//! ranked candidate nodes, maps virtual nodes greedily onto them, routes
//! every virtual link over a minimum-hop bandwidth-feasible path and keeps
//! the allocation until the request departs. Rejected requests leave the
//! substrate exactly as they found it.

mod log;
mod validate;

use std::cmp::Ordering;
use std::collections::{BinaryHeap, VecDeque};

use thiserror::Error;

pub use log::{read_decision_log, write_decision_log};
pub use validate::{replay, validate_records, Constraint, ValidationReport, Violation};

use crate::metrics::{self, MetricsLedger};
use crate::substrate::{MultiDomainSubstrate, ResourceVector};
use crate::workload::VirtualNetworkRequest;
use crate::{LinkId, NodeId};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EmbedError {
    #[error("no feasible candidate left for virtual node {vnode}")]
    NodeMappingFailed {
        vnode: usize,
        partial: Vec<Option<NodeId>>,
    },
    #[error("no bandwidth-feasible path for virtual link {vlink}")]
    LinkMappingFailed {
        vlink: usize,
        partial: Vec<Option<Vec<LinkId>>>,
    },
}

/// Outcome of one embedding attempt.
///
/// `node_map[v]` is the substrate node hosting virtual node `v`, and
/// `link_paths[e]` the substrate path carrying virtual link `e`. A rejected
/// record keeps whatever was mapped before the failure (with no resources
/// held), so its indicator product is 0.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingRecord {
    pub vnr_id: u64,
    pub t_s: f64,
    pub t_e: f64,
    pub node_map: Vec<Option<NodeId>>,
    pub node_demands: Vec<f64>,
    pub link_paths: Vec<Option<Vec<LinkId>>>,
    pub link_demands: Vec<f64>,
    pub revenue: f64,
    pub cost: f64,
    pub accepted: bool,
}

impl EmbeddingRecord {
    fn skeleton(vnr: &VirtualNetworkRequest) -> Self {
        Self {
            vnr_id: vnr.id,
            t_s: vnr.t_s,
            t_e: vnr.t_e,
            node_map: vec![None; vnr.num_nodes()],
            node_demands: vnr.node_demands.clone(),
            link_paths: vec![None; vnr.links.len()],
            link_demands: vnr.links.iter().map(|l| l.bw_demand).collect(),
            revenue: 0.0,
            cost: 0.0,
            accepted: false,
        }
    }

    /// Hop count per virtual link (`None` where unmapped).
    pub fn path_hops(&self) -> Vec<Option<usize>> {
        self.link_paths
            .iter()
            .map(|p| p.as_ref().map(Vec::len))
            .collect()
    }

    /// Product of all node and link mapping indicators: 1 only when every
    /// virtual node has a host and every virtual link a non-empty path.
    pub fn indicator_product(&self) -> u8 {
        let nodes = self.node_map.iter().all(Option::is_some);
        let links = self
            .link_paths
            .iter()
            .all(|p| p.as_ref().is_some_and(|p| !p.is_empty()));
        u8::from(nodes && links)
    }
}

/// Anything that ranks substrate nodes for a request: the learned agents
/// and the heuristic baselines all plug into the engine through this.
pub trait PolicyProvider {
    fn name(&self) -> &str;

    /// One descending-priority candidate list per virtual node.
    fn rank(
        &mut self,
        substrate: &MultiDomainSubstrate,
        vnr: &VirtualNetworkRequest,
    ) -> Vec<Vec<NodeId>>;

    /// Called after every embedding attempt with the substrate as it stands
    /// after the attempt.
    fn observe(
        &mut self,
        _substrate: &MultiDomainSubstrate,
        _vnr: &VirtualNetworkRequest,
        _record: &EmbeddingRecord,
    ) {
    }
}

/// Virtual node indices by descending cpu demand (ties by index).
pub fn node_order(vnr: &VirtualNetworkRequest) -> Vec<usize> {
    let mut order: Vec<usize> = (0..vnr.num_nodes()).collect();
    order.sort_by(|&a, &b| {
        vnr.node_demands[b]
            .total_cmp(&vnr.node_demands[a])
            .then(a.cmp(&b))
    });
    order
}

/// Virtual link indices by descending bandwidth demand (ties by index).
pub fn link_order(vnr: &VirtualNetworkRequest) -> Vec<usize> {
    let mut order: Vec<usize> = (0..vnr.links.len()).collect();
    order.sort_by(|&a, &b| {
        vnr.links[b]
            .bw_demand
            .total_cmp(&vnr.links[a].bw_demand)
            .then(a.cmp(&b))
    });
    order
}

/// Maps each virtual node (largest cpu demand first) to its highest-ranked
/// candidate that is unused by this request and still has enough cpu.
/// Allocations stay applied on success and are rolled back on failure.
pub fn embed_nodes(
    substrate: &mut MultiDomainSubstrate,
    vnr: &VirtualNetworkRequest,
    ranked: &[Vec<NodeId>],
) -> Result<Vec<NodeId>, EmbedError> {
    let mut map: Vec<Option<NodeId>> = vec![None; vnr.num_nodes()];
    let mut used = vec![false; substrate.num_nodes()];
    for v in node_order(vnr) {
        let demand = vnr.node_demands[v];
        let pick = ranked.get(v).and_then(|list| {
            list.iter().copied().find(|&n| {
                n < used.len()
                    && !used[n]
                    && substrate.node(n).is_some_and(|node| node.cpu_available >= demand)
            })
        });
        match pick {
            Some(n) => {
                substrate
                    .allocate_node(n, demand)
                    .expect("candidate was checked for cpu");
                used[n] = true;
                map[v] = Some(n);
            }
            None => {
                for (u, n) in map.iter().enumerate() {
                    if let Some(n) = n {
                        substrate.free_node(*n, vnr.node_demands[u]);
                    }
                }
                return Err(EmbedError::NodeMappingFailed {
                    vnode: v,
                    partial: map,
                });
            }
        }
    }
    Ok(map.into_iter().map(Option::unwrap).collect())
}

/// Minimum-hop path from `src` to `dst` over links with at least `demand`
/// available bandwidth. Among equal-hop paths the lexicographically smallest
/// node sequence wins.
pub fn bfs_path(
    substrate: &MultiDomainSubstrate,
    src: NodeId,
    dst: NodeId,
    demand: f64,
) -> Option<Vec<LinkId>> {
    if src == dst {
        return Some(Vec::new());
    }
    let n = substrate.num_nodes();
    // Neighbors are visited in ascending id order and each node keeps its
    // first discoverer, which yields the lexicographically smallest path.
    let mut via: Vec<Option<(NodeId, LinkId)>> = vec![None; n];
    let mut seen = vec![false; n];
    seen[src] = true;
    let mut queue = VecDeque::from([src]);
    while let Some(u) = queue.pop_front() {
        for &(v, l) in substrate.neighbors(u) {
            if seen[v] || substrate.links()[l].bw_available < demand {
                continue;
            }
            seen[v] = true;
            via[v] = Some((u, l));
            if v == dst {
                let mut path = Vec::new();
                let mut at = dst;
                while let Some((prev, link)) = via[at] {
                    path.push(link);
                    at = prev;
                }
                path.reverse();
                return Some(path);
            }
            queue.push_back(v);
        }
    }
    None
}

/// Routes every virtual link (largest bandwidth first) along a BFS path
/// between its mapped endpoints and allocates it. All-or-nothing for the
/// request's links.
pub fn embed_links(
    substrate: &mut MultiDomainSubstrate,
    vnr: &VirtualNetworkRequest,
    node_map: &[NodeId],
) -> Result<Vec<Vec<LinkId>>, EmbedError> {
    let mut paths: Vec<Option<Vec<LinkId>>> = vec![None; vnr.links.len()];
    for e in link_order(vnr) {
        let link = vnr.links[e];
        let found = bfs_path(substrate, node_map[link.a], node_map[link.b], link.bw_demand);
        match found {
            Some(path) => {
                substrate
                    .allocate_path(&path, link.bw_demand)
                    .expect("path was checked for bandwidth");
                paths[e] = Some(path);
            }
            None => {
                for (k, p) in paths.iter().enumerate() {
                    if let Some(p) = p {
                        substrate.free_path(p, vnr.links[k].bw_demand);
                    }
                }
                return Err(EmbedError::LinkMappingFailed {
                    vlink: e,
                    partial: paths,
                });
            }
        }
    }
    Ok(paths.into_iter().map(Option::unwrap).collect())
}

/// Runs both embedding stages for one request. On success the allocation is
/// live on the substrate; on failure the substrate is untouched and the
/// returned record is marked rejected.
pub fn embed_vnr(
    substrate: &mut MultiDomainSubstrate,
    vnr: &VirtualNetworkRequest,
    ranked: &[Vec<NodeId>],
) -> EmbeddingRecord {
    let mut record = EmbeddingRecord::skeleton(vnr);
    let node_map = match embed_nodes(substrate, vnr, ranked) {
        Ok(map) => map,
        Err(EmbedError::NodeMappingFailed { partial, .. }) => {
            record.node_map = partial;
            return record;
        }
        Err(e) => unreachable!("{e}"),
    };
    record.node_map = node_map.iter().copied().map(Some).collect();
    match embed_links(substrate, vnr, &node_map) {
        Ok(paths) => {
            record.link_paths = paths.into_iter().map(Some).collect();
            if let Err(e) = substrate.commit(vnr.id) {
                // A duplicate id cannot hold resources twice; undo this one.
                for (k, p) in record.link_paths.iter().enumerate() {
                    substrate.free_path(p.as_ref().unwrap(), record.link_demands[k]);
                }
                for (v, n) in node_map.iter().enumerate() {
                    substrate.free_node(*n, vnr.node_demands[v]);
                }
                debug_assert!(false, "{e}");
                return EmbeddingRecord::skeleton(vnr);
            }
            record.accepted = true;
            record.revenue = metrics::vnr_revenue(vnr);
            record.cost = metrics::vnr_cost(vnr, &record).expect("record is accepted");
        }
        Err(EmbedError::LinkMappingFailed { partial, .. }) => {
            for (v, n) in node_map.iter().enumerate() {
                substrate.free_node(*n, vnr.node_demands[v]);
            }
            record.link_paths = partial;
        }
        Err(e) => unreachable!("{e}"),
    }
    record
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SimEventKind {
    Arrival { vnr_id: u64 },
    Departure { vnr_id: u64 },
}

/// One processed event, in processing order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimEvent {
    pub time: f64,
    pub kind: SimEventKind,
}

struct Departure {
    time: f64,
    vnr_id: u64,
    record: usize,
}

impl PartialEq for Departure {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Departure {}
impl PartialOrd for Departure {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Departure {
    // Reversed so the max-heap pops the earliest departure first.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .time
            .total_cmp(&self.time)
            .then(other.vnr_id.cmp(&self.vnr_id))
    }
}

pub struct SimulationOutcome {
    /// Substrate after every outstanding departure was flushed.
    pub substrate: MultiDomainSubstrate,
    /// Resources right after the last arrival was handled, before the
    /// end-of-run flush.
    pub before_flush: ResourceVector,
    pub ledger: MetricsLedger,
    pub records: Vec<EmbeddingRecord>,
    pub events: Vec<SimEvent>,
}

/// Event loop over a stream sorted by arrival. Departures due at or before
/// an arrival are released first; the remaining ones are flushed at the end.
pub fn run_simulation(
    mut substrate: MultiDomainSubstrate,
    stream: &[VirtualNetworkRequest],
    provider: &mut dyn PolicyProvider,
    mut ledger: MetricsLedger,
) -> SimulationOutcome {
    let mut records: Vec<EmbeddingRecord> = Vec::with_capacity(stream.len());
    let mut events = Vec::with_capacity(2 * stream.len());
    let mut pending = BinaryHeap::new();

    let depart = |d: Departure,
                  substrate: &mut MultiDomainSubstrate,
                  records: &[EmbeddingRecord],
                  events: &mut Vec<SimEvent>| {
        substrate
            .release(&records[d.record])
            .expect("scheduled departure holds resources");
        events.push(SimEvent {
            time: d.time,
            kind: SimEventKind::Departure { vnr_id: d.vnr_id },
        });
    };

    for vnr in stream {
        while pending
            .peek()
            .is_some_and(|d: &Departure| d.time <= vnr.t_s)
        {
            let d = pending.pop().unwrap();
            depart(d, &mut substrate, &records, &mut events);
        }
        events.push(SimEvent {
            time: vnr.t_s,
            kind: SimEventKind::Arrival { vnr_id: vnr.id },
        });
        let ranked = provider.rank(&substrate, vnr);
        let record = embed_vnr(&mut substrate, vnr, &ranked);
        ledger.record(vnr.t_s, record.revenue, record.cost, record.accepted);
        provider.observe(&substrate, vnr, &record);
        if record.accepted {
            pending.push(Departure {
                time: vnr.t_e,
                vnr_id: vnr.id,
                record: records.len(),
            });
        }
        records.push(record);
    }

    let before_flush = substrate.resource_vector();
    while let Some(d) = pending.pop() {
        depart(d, &mut substrate, &records, &mut events);
    }
    SimulationOutcome {
        substrate,
        before_flush,
        ledger,
        records,
        events,
    }
}

#[cfg(test)]
mod tests;
