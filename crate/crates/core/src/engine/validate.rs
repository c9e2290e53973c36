//! Independent re-check of a decision log against the substrate and the
//! requests that produced it.
//!
//! The replay keeps its own availability vectors and never calls the
//! substrate's allocation routines, so it can catch bookkeeping bugs in
//! them.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use super::EmbeddingRecord;
use crate::metrics;
use crate::substrate::{MultiDomainSubstrate, ResourceVector};
use crate::workload::VirtualNetworkRequest;
use crate::{LinkId, NodeId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Constraint {
    /// Every virtual node is hosted by exactly one substrate node.
    SingleHost,
    /// Distinct virtual nodes of one request use distinct hosts.
    Injective,
    /// Every virtual link is carried by at least one substrate link.
    PathPresent,
    /// A path is a simple walk between the hosts of its virtual link.
    PathEndpoints,
    /// Available cpu equals capacity minus live demands.
    CpuLedger,
    CpuNonNegative,
    /// A host has at least the requested cpu available.
    CpuDemandFits,
    /// Available bandwidth equals capacity minus live demands.
    BwLedger,
    BwNonNegative,
    /// Every link on a path has the requested bandwidth available.
    BwDemandFits,
    /// The accepted flag equals the node/link indicator product.
    IndicatorProduct,
    Revenue,
    Cost,
    UnknownRequest,
}

impl fmt::Display for Constraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub vnr_id: u64,
    pub constraint: Constraint,
    pub detail: String,
}

#[derive(Debug, Clone)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
    pub records_checked: usize,
    /// Replayed availability right after the last arrival.
    pub before_flush: ResourceVector,
    /// Replayed availability after every accepted request departed.
    pub after_flush: ResourceVector,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }
}

struct Replay {
    cpu_cap: Vec<f64>,
    bw_cap: Vec<f64>,
    cpu: Vec<f64>,
    bw: Vec<f64>,
    ends: Vec<(NodeId, NodeId)>,
    /// Live allocations per vnr: (node, demand) and (link, demand) lists.
    live: BTreeMap<u64, (Vec<(NodeId, f64)>, Vec<(LinkId, f64)>)>,
}

impl Replay {
    fn new(s: &MultiDomainSubstrate) -> Self {
        let cpu_cap: Vec<f64> = s.nodes().iter().map(|n| n.cpu_capacity).collect();
        let bw_cap: Vec<f64> = s.links().iter().map(|l| l.bw_capacity).collect();
        Self {
            cpu: cpu_cap.clone(),
            bw: bw_cap.clone(),
            cpu_cap,
            bw_cap,
            ends: s.links().iter().map(|l| (l.a, l.b)).collect(),
            live: BTreeMap::new(),
        }
    }

    fn vector(&self) -> ResourceVector {
        ResourceVector {
            cpu: self.cpu.clone(),
            bw: self.bw.clone(),
        }
    }

    fn hold(&mut self, id: u64, nodes: Vec<(NodeId, f64)>, links: Vec<(LinkId, f64)>) {
        for &(n, d) in &nodes {
            self.cpu[n] -= d;
        }
        for &(l, d) in &links {
            self.bw[l] -= d;
        }
        self.live.insert(id, (nodes, links));
    }

    fn drop_hold(&mut self, id: u64) {
        if let Some((nodes, links)) = self.live.remove(&id) {
            for (n, d) in nodes {
                self.cpu[n] += d;
            }
            for (l, d) in links {
                self.bw[l] += d;
            }
        }
    }

    /// Walks `path` from `start`; returns the end node if it is a simple walk.
    fn walk(&self, start: NodeId, path: &[LinkId]) -> Option<NodeId> {
        let mut visited = vec![start];
        let mut at = start;
        for &l in path {
            let &(a, b) = self.ends.get(l)?;
            at = if a == at {
                b
            } else if b == at {
                a
            } else {
                return None;
            };
            if visited.contains(&at) {
                return None;
            }
            visited.push(at);
        }
        Some(at)
    }

    fn check_ledger(&self, id: u64, out: &mut Vec<Violation>) {
        let mut cpu_used = vec![0.0; self.cpu.len()];
        let mut bw_used = vec![0.0; self.bw.len()];
        for (nodes, links) in self.live.values() {
            for &(n, d) in nodes {
                cpu_used[n] += d;
            }
            for &(l, d) in links {
                bw_used[l] += d;
            }
        }
        let close = |a: f64, b: f64, scale: f64| (a - b).abs() <= 1e-9 * scale.max(1.0);
        for n in 0..self.cpu.len() {
            if self.cpu[n] < 0.0 {
                out.push(violation(id, Constraint::CpuNonNegative, format!("node {n} at {}", self.cpu[n])));
            }
            if !close(self.cpu[n], self.cpu_cap[n] - cpu_used[n], self.cpu_cap[n]) {
                out.push(violation(id, Constraint::CpuLedger, format!("node {n}")));
            }
        }
        for l in 0..self.bw.len() {
            if self.bw[l] < 0.0 {
                out.push(violation(id, Constraint::BwNonNegative, format!("link {l} at {}", self.bw[l])));
            }
            if !close(self.bw[l], self.bw_cap[l] - bw_used[l], self.bw_cap[l]) {
                out.push(violation(id, Constraint::BwLedger, format!("link {l}")));
            }
        }
    }
}

fn violation(vnr_id: u64, constraint: Constraint, detail: String) -> Violation {
    Violation {
        vnr_id,
        constraint,
        detail,
    }
}

/// Checks one accepted record against the replay state at its arrival.
/// Returns the allocations it would hold when every check passes the
/// structural stage (capacity violations are reported but still applied so
/// the replay stays aligned with the log).
fn check_accepted(
    replay: &Replay,
    vnr: &VirtualNetworkRequest,
    r: &EmbeddingRecord,
    out: &mut Vec<Violation>,
) -> Option<(Vec<(NodeId, f64)>, Vec<(LinkId, f64)>)> {
    let id = r.vnr_id;
    let n_nodes = replay.cpu.len();
    if r.node_map.len() != vnr.num_nodes() || r.node_map.iter().any(|n| n.is_none_or(|n| n >= n_nodes)) {
        out.push(violation(id, Constraint::SingleHost, "virtual node without a valid host".into()));
        return None;
    }
    let hosts: Vec<NodeId> = r.node_map.iter().map(|n| n.unwrap()).collect();
    let mut sorted = hosts.clone();
    sorted.sort_unstable();
    sorted.dedup();
    if sorted.len() != hosts.len() {
        out.push(violation(id, Constraint::Injective, format!("hosts {hosts:?}")));
    }
    let mut nodes = Vec::new();
    for (v, &h) in hosts.iter().enumerate() {
        let demand = vnr.node_demands[v];
        if demand > replay.cpu[h] {
            out.push(violation(
                id,
                Constraint::CpuDemandFits,
                format!("virtual node {v} needs {demand}, node {h} has {}", replay.cpu[h]),
            ));
        }
        nodes.push((h, demand));
    }

    if r.link_paths.len() != vnr.links.len() {
        out.push(violation(id, Constraint::PathPresent, "path count mismatch".into()));
        return None;
    }
    let mut per_link: HashMap<LinkId, f64> = HashMap::new();
    let mut links = Vec::new();
    for (e, (vl, path)) in vnr.links.iter().zip(&r.link_paths).enumerate() {
        let Some(path) = path.as_ref().filter(|p| !p.is_empty()) else {
            out.push(violation(id, Constraint::PathPresent, format!("virtual link {e}")));
            continue;
        };
        match replay.walk(hosts[vl.a], path) {
            Some(end) if end == hosts[vl.b] => {}
            _ => {
                out.push(violation(
                    id,
                    Constraint::PathEndpoints,
                    format!("virtual link {e} path {path:?}"),
                ));
                continue;
            }
        }
        for &l in path {
            *per_link.entry(l).or_default() += vl.bw_demand;
            links.push((l, vl.bw_demand));
        }
    }
    let mut over: Vec<_> = per_link
        .into_iter()
        .filter(|&(l, d)| d > replay.bw[l])
        .collect();
    over.sort_unstable_by_key(|&(l, _)| l);
    for (l, d) in over {
        out.push(violation(
            id,
            Constraint::BwDemandFits,
            format!("link {l} needs {d}, has {}", replay.bw[l]),
        ));
    }
    Some((nodes, links))
}

fn run(
    initial: &MultiDomainSubstrate,
    vnrs: &[VirtualNetworkRequest],
    records: &[EmbeddingRecord],
    check: bool,
) -> ValidationReport {
    let by_id: HashMap<u64, &VirtualNetworkRequest> = vnrs.iter().map(|v| (v.id, v)).collect();
    let mut replay = Replay::new(initial);
    let mut out = Vec::new();
    // (t_e, vnr_id) of live requests, ordered for release.
    let mut departures: Vec<(f64, u64)> = Vec::new();

    let mut order: Vec<usize> = (0..records.len()).collect();
    order.sort_by(|&a, &b| records[a].t_s.total_cmp(&records[b].t_s).then(a.cmp(&b)));

    for i in order {
        let r = &records[i];
        departures.sort_by(|a, b| b.0.total_cmp(&a.0).then(b.1.cmp(&a.1)));
        while departures.last().is_some_and(|&(t, _)| t <= r.t_s) {
            let (_, id) = departures.pop().unwrap();
            replay.drop_hold(id);
        }

        let vnr = by_id.get(&r.vnr_id).copied();
        if check {
            if u8::from(r.accepted) != r.indicator_product() {
                out.push(violation(
                    r.vnr_id,
                    Constraint::IndicatorProduct,
                    format!("accepted={} but indicator product {}", r.accepted, r.indicator_product()),
                ));
            }
            let Some(vnr) = vnr else {
                out.push(violation(r.vnr_id, Constraint::UnknownRequest, String::new()));
                continue;
            };
            let (revenue, cost) = if r.accepted {
                let cost = metrics::vnr_cost(vnr, r).unwrap_or(f64::NAN);
                (metrics::vnr_revenue(vnr), cost)
            } else {
                (0.0, 0.0)
            };
            let tol = |x: f64| 1e-9 * x.abs().max(1.0);
            if (r.revenue - revenue).abs() > tol(revenue) {
                out.push(violation(r.vnr_id, Constraint::Revenue, format!("{} vs {revenue}", r.revenue)));
            }
            if !((r.cost - cost).abs() <= tol(cost)) {
                out.push(violation(r.vnr_id, Constraint::Cost, format!("{} vs {cost}", r.cost)));
            }
        }
        if !r.accepted {
            continue;
        }
        let Some(vnr) = vnr else { continue };
        let mut scratch = Vec::new();
        let sink = if check { &mut out } else { &mut scratch };
        if let Some((nodes, links)) = check_accepted(&replay, vnr, r, sink) {
            replay.hold(r.vnr_id, nodes, links);
            departures.push((r.t_e, r.vnr_id));
            if check {
                replay.check_ledger(r.vnr_id, &mut out);
            }
        }
    }

    let before_flush = replay.vector();
    let ids: Vec<u64> = replay.live.keys().copied().collect();
    for id in ids {
        replay.drop_hold(id);
    }
    ValidationReport {
        violations: out,
        records_checked: records.len(),
        before_flush,
        after_flush: replay.vector(),
    }
}

/// Re-checks every capacity, mapping and accounting constraint for the
/// records in event order, starting from `initial`'s full capacities.
pub fn validate_records(
    initial: &MultiDomainSubstrate,
    vnrs: &[VirtualNetworkRequest],
    records: &[EmbeddingRecord],
) -> ValidationReport {
    run(&initial.pristine(), vnrs, records, true)
}

/// Replays the allocations and releases implied by `records` and returns the
/// resulting availability before and after the end-of-run flush.
pub fn replay(
    initial: &MultiDomainSubstrate,
    vnrs: &[VirtualNetworkRequest],
    records: &[EmbeddingRecord],
) -> (ResourceVector, ResourceVector) {
    let report = run(&initial.pristine(), vnrs, records, false);
    (report.before_flush, report.after_flush)
}
