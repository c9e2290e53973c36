use std::collections::HashSet;

use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};

use super::{find, VirtualLink, VirtualNetworkRequest, WorkloadError};
use crate::substrate::{MultiDomainSubstrate, SubstrateNode};
use crate::NodeId;

/// Shape and resource ranges of a generated substrate.
#[derive(Debug, Clone, PartialEq)]
pub struct SubstrateConfig {
    pub num_domains: usize,
    pub nodes_per_domain: usize,
    pub total_links: usize,
    /// Share of `total_links` placed between domains (at least enough to
    /// connect the domains).
    pub inter_link_fraction: f64,
    pub cpu_range: (f64, f64),
    pub bw_range: (f64, f64),
    /// Nodes are placed uniformly in a `grid_size x grid_size` square.
    pub grid_size: f64,
}

impl Default for SubstrateConfig {
    fn default() -> Self {
        Self {
            num_domains: 4,
            nodes_per_domain: 25,
            total_links: 600,
            inter_link_fraction: 0.1,
            cpu_range: (50.0, 100.0),
            bw_range: (50.0, 100.0),
            grid_size: 100.0,
        }
    }
}

/// Shape, demand ranges and timing of a generated VNR stream.
#[derive(Debug, Clone, PartialEq)]
pub struct VnrConfig {
    pub count: usize,
    pub vnode_range: (usize, usize),
    pub cpu_range: (f64, f64),
    pub bw_range: (f64, f64),
    pub link_probability: f64,
    /// Poisson arrival rate (arrivals per time unit).
    pub arrival_rate: f64,
    pub mean_lifetime: f64,
}

impl Default for VnrConfig {
    fn default() -> Self {
        Self {
            count: 2000,
            vnode_range: (2, 10),
            cpu_range: (1.0, 50.0),
            bw_range: (1.0, 50.0),
            link_probability: 0.5,
            arrival_rate: 0.05,
            mean_lifetime: 1000.0,
        }
    }
}

/// Uniform integer in `[ceil(lo), floor(hi)]`, returned as a real.
fn uniform_int(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    let (lo, hi) = (lo.ceil() as i64, hi.floor() as i64);
    if hi <= lo {
        return lo as f64;
    }
    rng.random_range(lo..=hi) as f64
}

/// Random multi-domain substrate: a random spanning tree per domain, extra
/// random intra-domain links, then inter-domain links (a random tree over
/// the domains first, the rest uniformly among unlinked cross-domain pairs).
pub fn generate_substrate(
    cfg: &SubstrateConfig,
    seed: u64,
) -> Result<MultiDomainSubstrate, WorkloadError> {
    let infeasible = |m: String| Err(WorkloadError::InfeasibleTopology(m));
    let domains = cfg.num_domains;
    let per = cfg.nodes_per_domain;
    if domains == 0 || per == 0 {
        return infeasible("need at least one domain and one node per domain".into());
    }
    let tree_intra = domains * (per - 1);
    let min_links = tree_intra + (domains - 1);
    if cfg.total_links < min_links {
        return infeasible(format!(
            "{} links cannot connect {domains} domains of {per} nodes (need {min_links})",
            cfg.total_links
        ));
    }
    let max_intra = domains * per * (per - 1) / 2;
    let max_inter = (domains * per) * (domains * per - 1) / 2 - max_intra;
    let budget = cfg.total_links - tree_intra;
    let mut inter = if domains == 1 {
        0
    } else {
        ((cfg.total_links as f64 * cfg.inter_link_fraction).round() as usize)
            .max(domains - 1)
            .min(budget)
    };
    inter = inter.min(max_inter);
    let extra_intra = budget - inter;
    if tree_intra + extra_intra > max_intra {
        return infeasible(format!(
            "{} links exceed the {} possible pairs",
            cfg.total_links,
            max_intra + max_inter
        ));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut nodes = Vec::with_capacity(domains * per);
    for d in 0..domains {
        for i in 0..per {
            let coord = (
                rng.random::<f64>() * cfg.grid_size,
                rng.random::<f64>() * cfg.grid_size,
            );
            let cpu = uniform_int(&mut rng, cfg.cpu_range);
            nodes.push(SubstrateNode::new(d * per + i, d, coord, cpu));
        }
    }

    let mut pairs: Vec<(NodeId, NodeId)> = Vec::with_capacity(cfg.total_links);
    let mut linked = HashSet::new();
    let push = |a: NodeId, b: NodeId, pairs: &mut Vec<(NodeId, NodeId)>, linked: &mut HashSet<_>| {
        let key = (a.min(b), a.max(b));
        if linked.insert(key) {
            pairs.push(key);
        }
    };

    for d in 0..domains {
        let mut order: Vec<NodeId> = (d * per..(d + 1) * per).collect();
        order.shuffle(&mut rng);
        for k in 1..order.len() {
            let parent = order[rng.random_range(0..k)];
            push(order[k], parent, &mut pairs, &mut linked);
        }
    }

    let free_intra: Vec<(NodeId, NodeId)> = (0..domains)
        .flat_map(|d| {
            let base = d * per;
            (base..base + per).flat_map(move |a| (a + 1..base + per).map(move |b| (a, b)))
        })
        .filter(|p| !linked.contains(p))
        .collect();
    for i in index::sample(&mut rng, free_intra.len(), extra_intra).into_iter() {
        let (a, b) = free_intra[i];
        push(a, b, &mut pairs, &mut linked);
    }

    if inter > 0 {
        let mut dorder: Vec<usize> = (0..domains).collect();
        dorder.shuffle(&mut rng);
        for k in 1..domains {
            let other = dorder[rng.random_range(0..k)];
            let a = dorder[k] * per + rng.random_range(0..per);
            let b = other * per + rng.random_range(0..per);
            push(a, b, &mut pairs, &mut linked);
        }
        let n = domains * per;
        let free_inter: Vec<(NodeId, NodeId)> = (0..n)
            .flat_map(|a| (a + 1..n).map(move |b| (a, b)))
            .filter(|&(a, b)| a / per != b / per)
            .filter(|p| !linked.contains(p))
            .collect();
        let remaining = inter - (domains - 1);
        for i in index::sample(&mut rng, free_inter.len(), remaining).into_iter() {
            let (a, b) = free_inter[i];
            push(a, b, &mut pairs, &mut linked);
        }
    }
    debug_assert_eq!(pairs.len(), cfg.total_links);

    let links: Vec<(NodeId, NodeId, f64)> = pairs
        .into_iter()
        .map(|(a, b)| (a, b, uniform_int(&mut rng, cfg.bw_range)))
        .collect();
    MultiDomainSubstrate::new(domains, nodes, &links)
        .map_err(|e| WorkloadError::InfeasibleTopology(e.to_string()))
}

/// Poisson-arriving VNRs with Erdős–Rényi topologies patched to be connected
/// and exponentially distributed lifetimes. Sorted by arrival.
pub fn generate_vnr_stream(cfg: &VnrConfig, seed: u64) -> Vec<VirtualNetworkRequest> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut stream = Vec::with_capacity(cfg.count);
    if cfg.count == 0 {
        return stream;
    }
    let gaps = Exp::new(cfg.arrival_rate).expect("arrival rate must be positive");
    let lifetimes = Exp::new(1.0 / cfg.mean_lifetime).expect("mean lifetime must be positive");
    let mut t = 0.0;
    for id in 0..cfg.count as u64 {
        t += gaps.sample(&mut rng);
        let n = rng.random_range(cfg.vnode_range.0.max(1)..=cfg.vnode_range.1.max(1));
        let node_demands: Vec<f64> = (0..n).map(|_| uniform_int(&mut rng, cfg.cpu_range)).collect();

        let mut edges = Vec::new();
        for a in 0..n {
            for b in a + 1..n {
                if rng.random_bool(cfg.link_probability) {
                    edges.push((a, b));
                }
            }
        }
        patch_connectivity(n, &mut edges, &mut rng);
        edges.sort_unstable();
        let links = edges
            .into_iter()
            .map(|(a, b)| VirtualLink {
                a,
                b,
                bw_demand: uniform_int(&mut rng, cfg.bw_range),
            })
            .collect();

        let mut t_e = t + lifetimes.sample(&mut rng);
        while t_e <= t {
            t_e = t + lifetimes.sample(&mut rng);
        }
        stream.push(VirtualNetworkRequest {
            id,
            node_demands,
            links,
            t_s: t,
            t_e,
        });
    }
    stream
}

/// Joins components by adding one uniformly chosen edge from each component
/// to the already-joined part.
fn patch_connectivity(n: usize, edges: &mut Vec<(usize, usize)>, rng: &mut ChaCha8Rng) {
    let mut parent: Vec<usize> = (0..n).collect();
    for &(a, b) in edges.iter() {
        let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
        parent[ra] = rb;
    }
    let mut components: Vec<Vec<usize>> = Vec::new();
    let mut root_slot = vec![usize::MAX; n];
    for v in 0..n {
        let r = find(&mut parent, v);
        if root_slot[r] == usize::MAX {
            root_slot[r] = components.len();
            components.push(Vec::new());
        }
        components[root_slot[r]].push(v);
    }
    let mut joined = components[0].clone();
    for comp in &components[1..] {
        let u = comp[rng.random_range(0..comp.len())];
        let w = joined[rng.random_range(0..joined.len())];
        edges.push((u.min(w), u.max(w)));
        joined.extend_from_slice(comp);
    }
}
