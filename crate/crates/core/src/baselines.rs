//! Non-learning rankings: a NodeRank-style resource/topology score and a
//! seeded random order.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::engine::{EmbeddingRecord, PolicyProvider};
use crate::substrate::MultiDomainSubstrate;
use crate::workload::VirtualNetworkRequest;
use crate::NodeId;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RankScore {
    pub node_id: NodeId,
    pub score: f64,
}

/// Weight of a node's own resource score in each propagation pass.
pub const NODERANK_DAMPING: f64 = 0.5;
pub const NODERANK_PASSES: usize = 2;

/// `s0(k) = A_N(k) * sum of incident available bandwidth`, then
/// `NODERANK_PASSES` rounds of
/// `s(k) <- d * s0(k) + (1 - d) * sum_{j ~ k} s(j) / deg(j)`.
pub fn noderank_scores(substrate: &MultiDomainSubstrate) -> Vec<RankScore> {
    let n = substrate.num_nodes();
    let s0: Vec<f64> = (0..n)
        .map(|k| {
            let bw: f64 = substrate
                .neighbors(k)
                .iter()
                .map(|&(_, l)| substrate.links()[l].bw_available)
                .sum();
            substrate.nodes()[k].cpu_available * bw
        })
        .collect();
    let mut s = s0.clone();
    for _ in 0..NODERANK_PASSES {
        s = (0..n)
            .map(|k| {
                let walk: f64 = substrate
                    .neighbors(k)
                    .iter()
                    .map(|&(j, _)| s[j] / substrate.neighbors(j).len() as f64)
                    .sum();
                NODERANK_DAMPING * s0[k] + (1.0 - NODERANK_DAMPING) * walk
            })
            .collect();
    }
    s.into_iter()
        .enumerate()
        .map(|(node_id, score)| RankScore { node_id, score })
        .collect()
}

/// Uniform scores in `[0, 1)` drawn from `seed`.
pub fn random_ranking(substrate: &MultiDomainSubstrate, seed: u64) -> Vec<RankScore> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..substrate.num_nodes())
        .map(|node_id| RankScore {
            node_id,
            score: rng.random(),
        })
        .collect()
}

/// Node ids by descending score, ties by ascending id.
pub fn order(scores: &[RankScore]) -> Vec<NodeId> {
    let mut s = scores.to_vec();
    s.sort_by(|a, b| b.score.total_cmp(&a.score).then(a.node_id.cmp(&b.node_id)));
    s.into_iter().map(|r| r.node_id).collect()
}

fn per_vnode(substrate: &MultiDomainSubstrate, vnr: &VirtualNetworkRequest, order: &[NodeId]) -> Vec<Vec<NodeId>> {
    vnr.node_demands
        .iter()
        .map(|&d| {
            order
                .iter()
                .copied()
                .filter(|&n| substrate.nodes()[n].cpu_available >= d)
                .collect()
        })
        .collect()
}

#[derive(Debug, Clone, Default)]
pub struct NodeRankPolicy;

impl PolicyProvider for NodeRankPolicy {
    fn name(&self) -> &str {
        "noderank-style"
    }

    fn rank(&mut self, substrate: &MultiDomainSubstrate, vnr: &VirtualNetworkRequest) -> Vec<Vec<NodeId>> {
        per_vnode(substrate, vnr, &order(&noderank_scores(substrate)))
    }
}

/// Draws a fresh ranking per request from `seed` and the request id, so the
/// ranking does not depend on how many requests came before.
#[derive(Debug, Clone)]
pub struct RandomPolicy {
    pub seed: u64,
}

impl PolicyProvider for RandomPolicy {
    fn name(&self) -> &str {
        "random"
    }

    fn rank(&mut self, substrate: &MultiDomainSubstrate, vnr: &VirtualNetworkRequest) -> Vec<Vec<NodeId>> {
        let seed = self.seed ^ vnr.id.wrapping_mul(0x9E37_79B9_7F4A_7C15);
        per_vnode(substrate, vnr, &order(&random_ranking(substrate, seed)))
    }

    fn observe(&mut self, _: &MultiDomainSubstrate, _: &VirtualNetworkRequest, _: &EmbeddingRecord) {}
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::substrate::SubstrateNode;
    use proptest::prelude::*;

    fn node(id: usize, cpu: f64) -> SubstrateNode {
        SubstrateNode::new(id, 0, (id as f64, 0.0), cpu)
    }

    #[test]
    fn symmetric_pair_scores_equal() {
        let s = MultiDomainSubstrate::new(1, vec![node(0, 70.0), node(1, 70.0)], &[(0, 1, 60.0)]).unwrap();
        let sc = noderank_scores(&s);
        assert_eq!(sc[0].score, sc[1].score);
    }

    #[test]
    fn isolated_node_scores_zero() {
        let s = MultiDomainSubstrate::new(1, vec![node(0, 70.0)], &[]).unwrap();
        assert_eq!(noderank_scores(&s)[0].score, 0.0);
    }

    #[test]
    fn star_center_outranks_leaves() {
        // Center 0 with leaves 1..=3, cpu 10 and bw 10 everywhere.
        // s0: center 10*30 = 300, leaf 10*10 = 100.
        // Pass 1: center 150 + 0.5*(3*100/1) = 300, leaf 50 + 0.5*(300/3) = 100.
        // Pass 2 repeats the same values.
        let nodes = (0..4).map(|i| node(i, 10.0)).collect();
        let s = MultiDomainSubstrate::new(1, nodes, &[(0, 1, 10.0), (0, 2, 10.0), (0, 3, 10.0)]).unwrap();
        let sc = noderank_scores(&s);
        assert_eq!(sc[0].score, 300.0);
        assert!(sc[1..].iter().all(|r| r.score == 100.0));
        assert_eq!(order(&sc)[0], 0);
    }

    #[test]
    fn path_hand_evaluation() {
        // Path 0-1-2, cpu {10, 20, 30}, bw 10 on both links.
        // s0 = {100, 400, 300}; degrees {1, 2, 1}.
        // Pass 1: {50 + 0.5*200, 200 + 0.5*(100 + 300), 150 + 0.5*200} = {150, 400, 250}.
        // Pass 2: {50 + 0.5*200, 200 + 0.5*400, 150 + 0.5*200} = {150, 400, 250}.
        let s = MultiDomainSubstrate::new(
            1,
            vec![node(0, 10.0), node(1, 20.0), node(2, 30.0)],
            &[(0, 1, 10.0), (1, 2, 10.0)],
        )
        .unwrap();
        let sc: Vec<f64> = noderank_scores(&s).iter().map(|r| r.score).collect();
        assert_eq!(sc, vec![150.0, 400.0, 250.0]);
    }

    #[test]
    fn random_ranking_examples() {
        let nodes = (0..8).map(|i| node(i, 10.0)).collect();
        let edges: Vec<_> = (1..8).map(|i| (i - 1, i, 5.0)).collect();
        let s = MultiDomainSubstrate::new(1, nodes, &edges).unwrap();
        assert_eq!(random_ranking(&s, 3), random_ranking(&s, 3));
        assert_ne!(order(&random_ranking(&s, 3)), order(&random_ranking(&s, 4)));
        let one = MultiDomainSubstrate::new(1, vec![node(0, 1.0)], &[]).unwrap();
        assert_eq!(order(&random_ranking(&one, 9)), vec![0]);
    }

    proptest! {
        #[test]
        fn noderank_is_relabeling_equivariant(
            n in 2usize..7,
            cpus in proptest::collection::vec(1u32..100, 7),
            extra in proptest::collection::vec((0usize..7, 0usize..7, 1u32..100), 0..8),
            perm_seed in any::<u64>(),
        ) {
            // Random tree plus extra edges.
            let mut edges: Vec<(usize, usize, f64)> = (1..n).map(|i| (i / 2, i, 10.0 + i as f64)).collect();
            for (a, b, w) in extra {
                let (a, b) = (a % n, b % n);
                if a != b && !edges.iter().any(|&(x, y, _)| (x, y) == (a, b) || (x, y) == (b, a)) {
                    edges.push((a, b, w as f64));
                }
            }
            let mut rng = ChaCha8Rng::seed_from_u64(perm_seed);
            let mut perm: Vec<usize> = (0..n).collect();
            rand::seq::SliceRandom::shuffle(perm.as_mut_slice(), &mut rng);
            let build = |label: &dyn Fn(usize) -> usize| {
                let mut nodes: Vec<SubstrateNode> = (0..n).map(|i| node(label(i), cpus[i] as f64)).collect();
                nodes.sort_by_key(|x| x.id);
                for x in nodes.iter_mut() { x.coord = (x.id as f64, 0.0); }
                let e: Vec<_> = edges.iter().map(|&(a, b, w)| (label(a), label(b), w)).collect();
                MultiDomainSubstrate::new(1, nodes, &e).unwrap()
            };
            let base = noderank_scores(&build(&|i| i));
            let relabeled = noderank_scores(&build(&|i| perm[i]));
            for i in 0..n {
                let a = base[i].score;
                let b = relabeled[perm[i]].score;
                prop_assert!((a - b).abs() <= 1e-9 * a.abs().max(1.0));
            }
        }
    }
}
