//! Multi-domain policy providers built from the per-domain agents.
//!
//! Candidates are ranked domain by domain: domains that can host every
//! virtual node of the request come first (largest total free cpu first),
//! and inside a domain nodes follow that domain's agent. [`HflTrainer`]
//! additionally explores with Gumbel noise, collects decision traces per
//! domain, trains locally and runs federated rounds as batches fill up.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::agent::{
    self, episode_reward, extract_state, forward, Baseline, Checkpoint, DecisionStep, DecisionTrace,
    PolicyParams, StateMatrix,
};
use crate::engine::{node_order, EmbeddingRecord, PolicyProvider};
use crate::federation::{assemble_snapshot, Coordinator, DomainReport, FederatedSnapshot, Upload};
use crate::substrate::MultiDomainSubstrate;
use crate::workload::VirtualNetworkRequest;
use crate::{DomainId, NodeId};

/// True when the domain has enough distinct nodes with enough cpu for
/// every virtual node (largest demand against largest free cpu).
pub fn domain_can_host(substrate: &MultiDomainSubstrate, domain: DomainId, vnr: &VirtualNetworkRequest) -> bool {
    let mut cpus: Vec<f64> = substrate
        .domain_nodes(domain)
        .iter()
        .map(|&n| substrate.nodes()[n].cpu_available)
        .collect();
    if cpus.len() < vnr.num_nodes() {
        return false;
    }
    cpus.sort_by(|a, b| b.total_cmp(a));
    let mut demands = vnr.node_demands.clone();
    demands.sort_by(|a, b| b.total_cmp(a));
    demands.iter().zip(&cpus).all(|(d, c)| d <= c)
}

/// Domains that can host the whole request first, then by descending free
/// cpu, then by id.
pub fn domain_order(substrate: &MultiDomainSubstrate, vnr: &VirtualNetworkRequest) -> Vec<DomainId> {
    let mut keyed: Vec<(bool, f64, DomainId)> = (0..substrate.num_domains())
        .map(|d| (domain_can_host(substrate, d, vnr), substrate.domain_cpu_available(d), d))
        .collect();
    keyed.sort_by(|a, b| b.0.cmp(&a.0).then(b.1.total_cmp(&a.1)).then(a.2.cmp(&b.2)));
    keyed.into_iter().map(|k| k.2).collect()
}

/// What a ranking call saw, kept so the outcome can be turned into traces.
#[derive(Debug, Clone)]
struct RankView {
    vnr_id: u64,
    states: Vec<Arc<StateMatrix>>,
    probs: Vec<Vec<f64>>,
}

fn rank_all(
    substrate: &MultiDomainSubstrate,
    vnr: &VirtualNetworkRequest,
    params: &[PolicyParams],
    mut noise: Option<&mut ChaCha8Rng>,
) -> (Vec<Vec<NodeId>>, RankView) {
    let mut states = Vec::with_capacity(params.len());
    let mut probs = Vec::with_capacity(params.len());
    let mut order: Vec<NodeId> = Vec::with_capacity(substrate.num_nodes());
    let mut per_domain: Vec<Vec<NodeId>> = Vec::with_capacity(params.len());
    for (d, p) in params.iter().enumerate() {
        let state = extract_state(substrate, d);
        let pr = forward(p, &state);
        let key: Vec<f64> = match noise.as_deref_mut() {
            // Sorting ln p + Gumbel noise samples an order without
            // replacement from the softmax.
            Some(rng) => pr
                .iter()
                .map(|&x| {
                    let u: f64 = rng.random_range(f64::MIN_POSITIVE..1.0);
                    x.ln() - (-u.ln()).ln()
                })
                .collect(),
            None => pr.clone(),
        };
        per_domain.push(agent::rank_by_key(&state, &key, f64::NEG_INFINITY));
        states.push(Arc::new(state));
        probs.push(pr);
    }
    for d in domain_order(substrate, vnr) {
        order.extend_from_slice(&per_domain[d]);
    }
    let lists = vnr
        .node_demands
        .iter()
        .map(|&demand| {
            order
                .iter()
                .copied()
                .filter(|&n| substrate.nodes()[n].cpu_available >= demand)
                .collect()
        })
        .collect();
    (
        lists,
        RankView {
            vnr_id: vnr.id,
            states,
            probs,
        },
    )
}

/// Frozen policy for evaluation: every domain uses its own parameters and
/// no exploration noise.
#[derive(Debug, Clone)]
pub struct HflPolicy {
    params: Vec<PolicyParams>,
}

impl HflPolicy {
    pub fn new(params: Vec<PolicyParams>) -> Self {
        Self { params }
    }

    /// Every domain runs the global model of the checkpoint.
    pub fn from_global(ckpt: &Checkpoint, num_domains: usize) -> Self {
        Self::new(vec![ckpt.global; num_domains])
    }

    pub fn params(&self) -> &[PolicyParams] {
        &self.params
    }
}

impl PolicyProvider for HflPolicy {
    fn name(&self) -> &str {
        "hfl"
    }

    fn rank(&mut self, substrate: &MultiDomainSubstrate, vnr: &VirtualNetworkRequest) -> Vec<Vec<NodeId>> {
        rank_all(substrate, vnr, &self.params, None).0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainerSettings {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub reject_penalty: f64,
    pub baseline: Baseline,
}

/// Online federated trainer. Plugged into the engine as a policy provider,
/// it ranks with exploration and learns from every embedding outcome.
///
/// A domain trains once it holds `batch_size` traces and uploads the result.
/// Until the round completes it keeps serving with its freshly trained
/// parameters but collects no new traces. The round runs as soon as every
/// domain has uploaded, and the global parameters replace all local ones.
#[derive(Debug, Clone)]
pub struct HflTrainer {
    settings: TrainerSettings,
    params: Vec<PolicyParams>,
    coordinator: Coordinator,
    buffers: Vec<Vec<DecisionTrace>>,
    batch_actions: Vec<Vec<NodeId>>,
    batch_rewards: Vec<f64>,
    batch_states: Vec<Option<Arc<StateMatrix>>>,
    rng: ChaCha8Rng,
    view: Option<RankView>,
    snapshots: Vec<FederatedSnapshot>,
    local_steps: usize,
}

impl HflTrainer {
    pub fn new(num_domains: usize, initial: PolicyParams, settings: TrainerSettings, exploration_seed: u64) -> Self {
        Self {
            settings,
            params: vec![initial; num_domains],
            coordinator: Coordinator::new(num_domains, initial),
            buffers: vec![Vec::new(); num_domains],
            batch_actions: vec![Vec::new(); num_domains],
            batch_rewards: vec![0.0; num_domains],
            batch_states: vec![None; num_domains],
            rng: ChaCha8Rng::seed_from_u64(exploration_seed),
            view: None,
            snapshots: Vec::new(),
            local_steps: 0,
        }
    }

    pub fn params(&self) -> &[PolicyParams] {
        &self.params
    }

    pub fn coordinator(&self) -> &Coordinator {
        &self.coordinator
    }

    pub fn snapshots(&self) -> &[FederatedSnapshot] {
        &self.snapshots
    }

    pub fn local_steps(&self) -> usize {
        self.local_steps
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint {
            domains: self.params.clone(),
            global: self.coordinator.global(),
        }
    }

    fn train_domain(&mut self, d: DomainId, substrate: &MultiDomainSubstrate) -> crate::Result<()> {
        let batch = std::mem::take(&mut self.buffers[d]);
        let out = agent::train_step(&self.params[d], &batch, self.settings.learning_rate, self.settings.baseline)?;
        self.local_steps += 1;
        self.params[d] = out.params;
        let reward_sum: f64 = batch.iter().map(|t| t.reward).sum();
        self.batch_rewards[d] = reward_sum;
        self.batch_states[d] = batch.last().and_then(|t| t.steps.first()).map(|s| s.state.clone());
        self.coordinator.submit(Upload {
            domain_id: d,
            params: out.params,
            sample_count: out.samples,
            local_loss: out.loss,
            reward_mean: reward_sum / batch.len() as f64,
        })?;
        if self.coordinator.ready() {
            self.coordinator.run_round(&mut self.params)?;
            let reports = (0..self.params.len())
                .map(|k| {
                    let next = extract_state(substrate, k);
                    DomainReport {
                        domain_id: k,
                        state: self.batch_states[k].as_deref().cloned().unwrap_or_else(|| next.clone()),
                        actions: std::mem::take(&mut self.batch_actions[k]),
                        reward_sum: self.batch_rewards[k],
                        next_state: next,
                    }
                })
                .collect();
            self.snapshots.push(assemble_snapshot(reports)?);
        }
        Ok(())
    }
}

impl PolicyProvider for HflTrainer {
    fn name(&self) -> &str {
        "hfl"
    }

    fn rank(&mut self, substrate: &MultiDomainSubstrate, vnr: &VirtualNetworkRequest) -> Vec<Vec<NodeId>> {
        let (lists, view) = rank_all(substrate, vnr, &self.params, Some(&mut self.rng));
        self.view = Some(view);
        lists
    }

    fn observe(&mut self, substrate: &MultiDomainSubstrate, vnr: &VirtualNetworkRequest, record: &EmbeddingRecord) {
        let Some(view) = self.view.take() else { return };
        if view.vnr_id != vnr.id {
            return;
        }
        let reward = episode_reward(record, self.settings.reject_penalty);
        let mut traces: Vec<Option<DecisionTrace>> = vec![None; self.params.len()];
        for v in node_order(vnr) {
            let Some(n) = record.node_map[v] else { continue };
            let d = substrate.nodes()[n].domain;
            let state = &view.states[d];
            let Some(row) = state.row_of(n) else { continue };
            traces[d]
                .get_or_insert_with(|| DecisionTrace {
                    steps: Vec::new(),
                    reward,
                })
                .steps
                .push(DecisionStep {
                    state: state.clone(),
                    chosen: row,
                    probabilities: view.probs[d].clone(),
                });
        }
        let mut ready = Vec::new();
        for (d, t) in traces.into_iter().enumerate() {
            let Some(t) = t else { continue };
            if self.coordinator.has_upload(d) {
                continue;
            }
            self.batch_actions[d].extend(t.steps.iter().map(|s| s.state.node_ids[s.chosen]));
            self.buffers[d].push(t);
            if self.buffers[d].len() >= self.settings.batch_size {
                ready.push(d);
            }
        }
        for d in ready {
            self.train_domain(d, substrate)
                .expect("a full batch of non-empty traces always trains and uploads");
        }
    }
}
