//! Physical multi-domain network and its resource bookkeeping.

use std::collections::{BTreeSet, HashSet};

use thiserror::Error;

use crate::engine::EmbeddingRecord;
use crate::{DomainId, LinkId, NodeId};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SubstrateError {
    #[error("node {node}: cpu demand {demand} exceeds available {available}")]
    InsufficientCpu {
        node: NodeId,
        demand: f64,
        available: f64,
    },
    #[error("link {link}: bandwidth demand {demand} exceeds available {available}")]
    InsufficientBandwidth {
        link: LinkId,
        demand: f64,
        available: f64,
    },
    #[error("unknown node {0}")]
    UnknownNode(NodeId),
    #[error("unknown link {0}")]
    UnknownLink(LinkId),
    #[error("links {0:?} do not form a simple connected walk")]
    InvalidPath(Vec<LinkId>),
    #[error("negative demand {0}")]
    NegativeDemand(f64),
    #[error("vnr {0} is not holding resources on this substrate")]
    DoubleRelease(u64),
    #[error("vnr {0} is already holding resources on this substrate")]
    AlreadyApplied(u64),
    #[error("record for vnr {0} is not an accepted embedding")]
    NotAccepted(u64),
    #[error("invalid substrate: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubstrateNode {
    pub id: NodeId,
    pub domain: DomainId,
    pub coord: (f64, f64),
    pub cpu_capacity: f64,
    pub cpu_available: f64,
}

impl SubstrateNode {
    /// A node with all of its capacity available.
    pub fn new(id: NodeId, domain: DomainId, coord: (f64, f64), cpu_capacity: f64) -> Self {
        Self {
            id,
            domain,
            coord,
            cpu_capacity,
            cpu_available: cpu_capacity,
        }
    }

    pub fn distance_to(&self, other: &SubstrateNode) -> f64 {
        let dx = self.coord.0 - other.coord.0;
        let dy = self.coord.1 - other.coord.1;
        dx.hypot(dy)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LinkKind {
    Intra,
    Inter,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubstrateLink {
    pub id: LinkId,
    pub a: NodeId,
    pub b: NodeId,
    pub kind: LinkKind,
    pub bw_capacity: f64,
    pub bw_available: f64,
}

impl SubstrateLink {
    /// The endpoint opposite `node`, if `node` is an endpoint.
    pub fn other(&self, node: NodeId) -> Option<NodeId> {
        if node == self.a {
            Some(self.b)
        } else if node == self.b {
            Some(self.a)
        } else {
            None
        }
    }
}

/// Snapshot of every available cpu and bandwidth quantity, in id order.
#[derive(Debug, Clone, PartialEq)]
pub struct ResourceVector {
    pub cpu: Vec<f64>,
    pub bw: Vec<f64>,
}

impl ResourceVector {
    /// Equality on the raw bit patterns (so `-0.0 != 0.0` and NaN == NaN).
    pub fn bit_identical(&self, other: &ResourceVector) -> bool {
        fn same(a: &[f64], b: &[f64]) -> bool {
            a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits())
        }
        same(&self.cpu, &other.cpu) && same(&self.bw, &other.bw)
    }
}

/// The physical network: nodes partitioned into domains, joined by intra-
/// and inter-domain links.
///
/// Available resources change only through [`allocate_node`],
/// [`allocate_path`], [`apply`] and [`release`], which keep every
/// availability inside `[0, capacity]`.
///
/// [`allocate_node`]: MultiDomainSubstrate::allocate_node
/// [`allocate_path`]: MultiDomainSubstrate::allocate_path
/// [`apply`]: MultiDomainSubstrate::apply
/// [`release`]: MultiDomainSubstrate::release
#[derive(Debug, Clone)]
pub struct MultiDomainSubstrate {
    num_domains: usize,
    nodes: Vec<SubstrateNode>,
    links: Vec<SubstrateLink>,
    /// Per node, `(neighbor, link)` sorted by neighbor id.
    adjacency: Vec<Vec<(NodeId, LinkId)>>,
    domain_members: Vec<Vec<NodeId>>,
    // Outstanding allocation counts. When one drops to zero the
    // availability snaps back to capacity, so a full release is exact even
    // for non-integral demands.
    node_holds: Vec<u32>,
    link_holds: Vec<u32>,
    live: BTreeSet<u64>,
}

impl PartialEq for MultiDomainSubstrate {
    fn eq(&self, other: &Self) -> bool {
        self.num_domains == other.num_domains
            && self.nodes == other.nodes
            && self.links == other.links
            && self.live == other.live
    }
}

impl MultiDomainSubstrate {
    /// Builds a substrate from nodes (ids must be `0..n` in order) and
    /// `(a, b, bw_capacity)` link triples. Link kinds are derived from the
    /// endpoint domains. All structural invariants are checked.
    pub fn new(
        num_domains: usize,
        nodes: Vec<SubstrateNode>,
        links: &[(NodeId, NodeId, f64)],
    ) -> Result<Self, SubstrateError> {
        let invalid = |msg: String| Err(SubstrateError::Invalid(msg));
        if num_domains == 0 {
            return invalid("num_domains must be positive".into());
        }
        for (i, node) in nodes.iter().enumerate() {
            if node.id != i {
                return invalid(format!("node ids must be 0..n in order, found {} at {i}", node.id));
            }
            if node.domain >= num_domains {
                return invalid(format!("node {i} has domain {} >= {num_domains}", node.domain));
            }
            if !(node.cpu_capacity.is_finite() && node.cpu_capacity >= 0.0) {
                return invalid(format!("node {i} has invalid cpu capacity {}", node.cpu_capacity));
            }
            if !(node.cpu_available >= 0.0 && node.cpu_available <= node.cpu_capacity) {
                return invalid(format!("node {i} cpu_available outside [0, capacity]"));
            }
            if !(node.coord.0.is_finite() && node.coord.1.is_finite()) {
                return invalid(format!("node {i} has non-finite coordinates"));
            }
        }

        let n = nodes.len();
        let mut adjacency = vec![Vec::new(); n];
        let mut seen = HashSet::new();
        let mut built = Vec::with_capacity(links.len());
        for (id, &(a, b, bw)) in links.iter().enumerate() {
            if a >= n || b >= n {
                return invalid(format!("link {id} has dangling endpoint ({a}, {b})"));
            }
            if a == b {
                return invalid(format!("link {id} is a self-loop on node {a}"));
            }
            if !seen.insert((a.min(b), a.max(b))) {
                return invalid(format!("duplicate link between {a} and {b}"));
            }
            if !(bw.is_finite() && bw >= 0.0) {
                return invalid(format!("link {id} has invalid bandwidth {bw}"));
            }
            let kind = if nodes[a].domain == nodes[b].domain {
                LinkKind::Intra
            } else {
                LinkKind::Inter
            };
            adjacency[a].push((b, id));
            adjacency[b].push((a, id));
            built.push(SubstrateLink {
                id,
                a,
                b,
                kind,
                bw_capacity: bw,
                bw_available: bw,
            });
        }
        for adj in &mut adjacency {
            adj.sort_unstable();
        }

        let mut domain_members = vec![Vec::new(); num_domains];
        for node in &nodes {
            domain_members[node.domain].push(node.id);
        }

        let substrate = Self {
            num_domains,
            node_holds: vec![0; n],
            link_holds: vec![0; built.len()],
            nodes,
            links: built,
            adjacency,
            domain_members,
            live: BTreeSet::new(),
        };

        for (d, members) in substrate.domain_members.iter().enumerate() {
            if members.is_empty() {
                return invalid(format!("domain {d} has no nodes"));
            }
            if !substrate.is_connected(members, true) {
                return invalid(format!("domain {d} is not connected"));
            }
        }
        let all: Vec<NodeId> = (0..n).collect();
        if !substrate.is_connected(&all, false) {
            return invalid("substrate is not connected".into());
        }
        Ok(substrate)
    }

    fn is_connected(&self, members: &[NodeId], intra_only: bool) -> bool {
        let Some(&start) = members.first() else {
            return true;
        };
        let domain = self.nodes[start].domain;
        let mut visited = vec![false; self.nodes.len()];
        let mut stack = vec![start];
        visited[start] = true;
        let mut count = 1;
        while let Some(u) = stack.pop() {
            for &(v, _) in &self.adjacency[u] {
                if visited[v] || (intra_only && self.nodes[v].domain != domain) {
                    continue;
                }
                visited[v] = true;
                count += 1;
                stack.push(v);
            }
        }
        count == members.len()
    }

    pub fn num_domains(&self) -> usize {
        self.num_domains
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn num_links(&self) -> usize {
        self.links.len()
    }

    pub fn nodes(&self) -> &[SubstrateNode] {
        &self.nodes
    }

    pub fn links(&self) -> &[SubstrateLink] {
        &self.links
    }

    pub fn node(&self, id: NodeId) -> Option<&SubstrateNode> {
        self.nodes.get(id)
    }

    pub fn link(&self, id: LinkId) -> Option<&SubstrateLink> {
        self.links.get(id)
    }

    /// Nodes of one domain in ascending id order.
    pub fn domain_nodes(&self, domain: DomainId) -> &[NodeId] {
        self.domain_members
            .get(domain)
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    /// `(neighbor, link)` pairs incident to `node`, sorted by neighbor id.
    pub fn neighbors(&self, node: NodeId) -> &[(NodeId, LinkId)] {
        &self.adjacency[node]
    }

    pub fn link_between(&self, a: NodeId, b: NodeId) -> Option<LinkId> {
        let adj = self.adjacency.get(a)?;
        adj.binary_search_by_key(&b, |&(v, _)| v)
            .ok()
            .map(|i| adj[i].1)
    }

    /// Ids of VNRs currently holding resources.
    pub fn live_embeddings(&self) -> impl Iterator<Item = u64> + '_ {
        self.live.iter().copied()
    }

    pub fn resource_vector(&self) -> ResourceVector {
        ResourceVector {
            cpu: self.nodes.iter().map(|n| n.cpu_available).collect(),
            bw: self.links.iter().map(|l| l.bw_available).collect(),
        }
    }

    /// Sum of available cpu over a domain's nodes.
    pub fn domain_cpu_available(&self, domain: DomainId) -> f64 {
        self.domain_nodes(domain)
            .iter()
            .map(|&n| self.nodes[n].cpu_available)
            .sum()
    }

    /// Follows `path` from `start` and returns the visited node sequence, or
    /// `None` if the links do not chain into a simple walk from `start`.
    pub fn walk(&self, start: NodeId, path: &[LinkId]) -> Option<Vec<NodeId>> {
        if start >= self.nodes.len() {
            return None;
        }
        let mut seq = Vec::with_capacity(path.len() + 1);
        seq.push(start);
        let mut seen = HashSet::new();
        seen.insert(start);
        let mut at = start;
        for &l in path {
            let next = self.links.get(l)?.other(at)?;
            if !seen.insert(next) {
                return None;
            }
            seq.push(next);
            at = next;
        }
        Some(seq)
    }

    fn check_simple_walk(&self, path: &[LinkId]) -> Result<(), SubstrateError> {
        let Some(&first) = path.first() else {
            return Ok(());
        };
        let link = self.links.get(first).ok_or(SubstrateError::UnknownLink(first))?;
        if let Some(&l) = path.iter().find(|&&l| l >= self.links.len()) {
            return Err(SubstrateError::UnknownLink(l));
        }
        if self.walk(link.a, path).is_some() || self.walk(link.b, path).is_some() {
            Ok(())
        } else {
            Err(SubstrateError::InvalidPath(path.to_vec()))
        }
    }

    /// Reserves `cpu_demand` on one node.
    pub fn allocate_node(&mut self, node: NodeId, cpu_demand: f64) -> Result<(), SubstrateError> {
        if !(cpu_demand >= 0.0) {
            return Err(SubstrateError::NegativeDemand(cpu_demand));
        }
        let n = self
            .nodes
            .get_mut(node)
            .ok_or(SubstrateError::UnknownNode(node))?;
        if cpu_demand > n.cpu_available {
            return Err(SubstrateError::InsufficientCpu {
                node,
                demand: cpu_demand,
                available: n.cpu_available,
            });
        }
        n.cpu_available -= cpu_demand;
        self.node_holds[node] += 1;
        Ok(())
    }

    /// Reserves `bw_demand` on every link of `path`. Either every link is
    /// charged or, on error, none is.
    pub fn allocate_path(&mut self, path: &[LinkId], bw_demand: f64) -> Result<(), SubstrateError> {
        if !(bw_demand >= 0.0) {
            return Err(SubstrateError::NegativeDemand(bw_demand));
        }
        self.check_simple_walk(path)?;
        if let Some(link) = path
            .iter()
            .map(|&l| &self.links[l])
            .find(|l| bw_demand > l.bw_available)
        {
            return Err(SubstrateError::InsufficientBandwidth {
                link: link.id,
                demand: bw_demand,
                available: link.bw_available,
            });
        }
        for &l in path {
            self.links[l].bw_available -= bw_demand;
            self.link_holds[l] += 1;
        }
        Ok(())
    }

    /// Inverse of a successful [`allocate_node`](Self::allocate_node).
    pub(crate) fn free_node(&mut self, node: NodeId, cpu_demand: f64) {
        let n = &mut self.nodes[node];
        let holds = &mut self.node_holds[node];
        debug_assert!(*holds > 0, "free_node without matching allocation");
        *holds = holds.saturating_sub(1);
        n.cpu_available = if *holds == 0 {
            n.cpu_capacity
        } else {
            (n.cpu_available + cpu_demand).min(n.cpu_capacity)
        };
    }

    /// Inverse of a successful [`allocate_path`](Self::allocate_path).
    pub(crate) fn free_path(&mut self, path: &[LinkId], bw_demand: f64) {
        for &l in path {
            let link = &mut self.links[l];
            let holds = &mut self.link_holds[l];
            debug_assert!(*holds > 0, "free_path without matching allocation");
            *holds = holds.saturating_sub(1);
            link.bw_available = if *holds == 0 {
                link.bw_capacity
            } else {
                (link.bw_available + bw_demand).min(link.bw_capacity)
            };
        }
    }

    /// Marks an embedding whose resources the caller already allocated as
    /// live, so that it can later be released.
    pub(crate) fn commit(&mut self, vnr_id: u64) -> Result<(), SubstrateError> {
        if self.live.insert(vnr_id) {
            Ok(())
        } else {
            Err(SubstrateError::AlreadyApplied(vnr_id))
        }
    }

    /// Allocates everything an accepted record consumes and marks it live.
    /// All-or-nothing: on error the substrate is unchanged.
    pub fn apply(&mut self, record: &EmbeddingRecord) -> Result<(), SubstrateError> {
        if !record.accepted {
            return Err(SubstrateError::NotAccepted(record.vnr_id));
        }
        if self.live.contains(&record.vnr_id) {
            return Err(SubstrateError::AlreadyApplied(record.vnr_id));
        }
        let mut nodes_done = Vec::new();
        let mut paths_done = Vec::new();
        let outcome = (|| {
            for (v, mapped) in record.node_map.iter().enumerate() {
                let node = mapped.ok_or(SubstrateError::NotAccepted(record.vnr_id))?;
                self.allocate_node(node, record.node_demands[v])?;
                nodes_done.push(v);
            }
            for (e, path) in record.link_paths.iter().enumerate() {
                let path = path
                    .as_deref()
                    .ok_or(SubstrateError::NotAccepted(record.vnr_id))?;
                self.allocate_path(path, record.link_demands[e])?;
                paths_done.push(e);
            }
            Ok(())
        })();
        if let Err(err) = outcome {
            for e in paths_done {
                self.free_path(record.link_paths[e].as_deref().unwrap(), record.link_demands[e]);
            }
            for v in nodes_done {
                self.free_node(record.node_map[v].unwrap(), record.node_demands[v]);
            }
            return Err(err);
        }
        self.live.insert(record.vnr_id);
        Ok(())
    }

    /// Returns every resource a live record holds.
    pub fn release(&mut self, record: &EmbeddingRecord) -> Result<(), SubstrateError> {
        if !self.live.remove(&record.vnr_id) {
            return Err(SubstrateError::DoubleRelease(record.vnr_id));
        }
        for (e, path) in record.link_paths.iter().enumerate() {
            if let Some(path) = path {
                self.free_path(path, record.link_demands[e]);
            }
        }
        for (v, node) in record.node_map.iter().enumerate() {
            if let Some(node) = node {
                self.free_node(*node, record.node_demands[v]);
            }
        }
        Ok(())
    }

    /// A copy with every resource fully available and no live embeddings.
    pub fn pristine(&self) -> Self {
        let mut fresh = self.clone();
        for n in &mut fresh.nodes {
            n.cpu_available = n.cpu_capacity;
        }
        for l in &mut fresh.links {
            l.bw_available = l.bw_capacity;
        }
        fresh.node_holds.fill(0);
        fresh.link_holds.fill(0);
        fresh.live.clear();
        fresh
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    /// Path 0 - 1 - 2 in one domain, bandwidth 50 on both links.
    pub(crate) fn line3() -> MultiDomainSubstrate {
        let nodes = vec![
            SubstrateNode::new(0, 0, (0.0, 0.0), 80.0),
            SubstrateNode::new(1, 0, (1.0, 0.0), 30.0),
            SubstrateNode::new(2, 0, (2.0, 0.0), 10.0),
        ];
        MultiDomainSubstrate::new(1, nodes, &[(0, 1, 50.0), (1, 2, 50.0)]).unwrap()
    }

    #[test]
    fn allocate_node_examples() {
        let mut s = line3();
        s.allocate_node(0, 30.0).unwrap();
        assert_eq!(s.node(0).unwrap().cpu_available, 50.0);
        s.allocate_node(1, 30.0).unwrap();
        assert_eq!(s.node(1).unwrap().cpu_available, 0.0);
        let before = s.resource_vector();
        let err = s.allocate_node(2, 30.0).unwrap_err();
        assert!(matches!(err, SubstrateError::InsufficientCpu { node: 2, .. }));
        assert!(s.resource_vector().bit_identical(&before));
    }

    #[test]
    fn allocate_path_examples() {
        let mut s = line3();
        s.allocate_path(&[0, 1], 20.0).unwrap();
        assert_eq!(s.link(0).unwrap().bw_available, 30.0);
        assert_eq!(s.link(1).unwrap().bw_available, 30.0);

        let before = s.resource_vector();
        s.allocate_path(&[], 1000.0).unwrap();
        assert!(s.resource_vector().bit_identical(&before));

        let mut s = line3();
        s.allocate_path(&[1], 40.0).unwrap();
        let before = s.resource_vector();
        let err = s.allocate_path(&[0, 1], 20.0).unwrap_err();
        assert_eq!(
            err,
            SubstrateError::InsufficientBandwidth {
                link: 1,
                demand: 20.0,
                available: 10.0
            }
        );
        assert!(s.resource_vector().bit_identical(&before));
    }

    #[test]
    fn rejects_non_walks() {
        let nodes = (0..4)
            .map(|i| SubstrateNode::new(i, 0, (i as f64, 0.0), 10.0))
            .collect();
        let mut s =
            MultiDomainSubstrate::new(1, nodes, &[(0, 1, 5.0), (1, 2, 5.0), (2, 3, 5.0)]).unwrap();
        assert!(matches!(
            s.allocate_path(&[0, 2], 1.0),
            Err(SubstrateError::InvalidPath(_))
        ));
        assert!(matches!(
            s.allocate_path(&[0, 0], 1.0),
            Err(SubstrateError::InvalidPath(_))
        ));
        assert_eq!(s.allocate_path(&[9], 1.0), Err(SubstrateError::UnknownLink(9)));
        // Reversed orientation is still a walk.
        s.allocate_path(&[2, 1, 0], 1.0).unwrap();
    }

    #[test]
    fn construction_invariants() {
        let two = || {
            vec![
                SubstrateNode::new(0, 0, (0.0, 0.0), 10.0),
                SubstrateNode::new(1, 1, (1.0, 0.0), 10.0),
            ]
        };
        let s = MultiDomainSubstrate::new(2, two(), &[(0, 1, 5.0)]).unwrap();
        assert_eq!(s.link(0).unwrap().kind, LinkKind::Inter);
        assert!(MultiDomainSubstrate::new(2, two(), &[(0, 0, 5.0)]).is_err());
        assert!(MultiDomainSubstrate::new(2, two(), &[(0, 1, 5.0), (1, 0, 5.0)]).is_err());
        assert!(MultiDomainSubstrate::new(2, two(), &[(0, 7, 5.0)]).is_err());
        assert!(MultiDomainSubstrate::new(2, two(), &[]).is_err());
        assert!(MultiDomainSubstrate::new(1, two(), &[(0, 1, 5.0)]).is_err());
        // Domain 0 split in two pieces joined only through domain 1.
        let nodes = vec![
            SubstrateNode::new(0, 0, (0.0, 0.0), 1.0),
            SubstrateNode::new(1, 1, (0.0, 0.0), 1.0),
            SubstrateNode::new(2, 0, (0.0, 0.0), 1.0),
        ];
        let err = MultiDomainSubstrate::new(2, nodes, &[(0, 1, 1.0), (1, 2, 1.0)]).unwrap_err();
        assert!(err.to_string().contains("domain 0 is not connected"));
    }

    #[test]
    fn free_snaps_to_capacity_when_last_hold_leaves() {
        let mut s = line3();
        s.allocate_node(0, 0.1).unwrap();
        s.allocate_node(0, 0.2).unwrap();
        s.free_node(0, 0.1);
        s.free_node(0, 0.2);
        assert_eq!(s.node(0).unwrap().cpu_available.to_bits(), 80.0f64.to_bits());
    }
}
