//! Per-domain policy: state extraction, a linear scoring layer followed by
//! softmax, candidate filtering, and a REINFORCE update.

use std::io::{BufRead, BufReader, Read, Write};
use std::sync::Arc;

use rand::Rng;
use thiserror::Error;

use crate::engine::EmbeddingRecord;
use crate::substrate::MultiDomainSubstrate;
use crate::{DomainId, NodeId};

/// Columns of a state row: available cpu, summed available bandwidth of
/// incident links, distance term.
pub const FEATURES: usize = 3;

#[derive(Debug, Error)]
pub enum AgentError {
    #[error("training batch is empty")]
    EmptyBatch,
    #[error("checkpoint line {line}: {message}")]
    Checkpoint { line: usize, message: String },
    #[error("checkpoint io: {0}")]
    Io(#[from] std::io::Error),
}

/// One row per node of a domain.
#[derive(Debug, Clone, PartialEq)]
pub struct StateMatrix {
    pub domain: DomainId,
    pub node_ids: Vec<NodeId>,
    pub rows: Vec<[f64; FEATURES]>,
    /// Raw available cpu per row, kept for the feasibility filter after the
    /// feature columns are normalized.
    pub cpu_available: Vec<f64>,
}

impl StateMatrix {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn row_of(&self, node: NodeId) -> Option<usize> {
        self.node_ids.binary_search(&node).ok()
    }
}

/// Unnormalized state. A node's distance term sums, over its incident links
/// (inter-domain included), the Euclidean length of the link divided by
/// `1 + hops`, with `hops = 1` for a direct link.
pub fn extract_raw_state(substrate: &MultiDomainSubstrate, domain: DomainId) -> StateMatrix {
    let node_ids = substrate.domain_nodes(domain).to_vec();
    let mut rows = Vec::with_capacity(node_ids.len());
    let mut cpu_available = Vec::with_capacity(node_ids.len());
    for &k in &node_ids {
        let node = &substrate.nodes()[k];
        let mut sum_bw = 0.0;
        let mut dis = 0.0;
        for &(j, l) in substrate.neighbors(k) {
            sum_bw += substrate.links()[l].bw_available;
            dis += node.distance_to(&substrate.nodes()[j]) / (1.0 + 1.0);
        }
        rows.push([node.cpu_available, sum_bw, dis]);
        cpu_available.push(node.cpu_available);
    }
    StateMatrix {
        domain,
        node_ids,
        rows,
        cpu_available,
    }
}

/// Min-max scales each column to `[0, 1]`; a constant column becomes 0.5.
pub fn normalize_columns(rows: &mut [[f64; FEATURES]]) {
    for c in 0..FEATURES {
        let (lo, hi) = rows
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| {
                (lo.min(r[c]), hi.max(r[c]))
            });
        let span = hi - lo;
        for r in rows.iter_mut() {
            r[c] = if span > 0.0 { (r[c] - lo) / span } else { 0.5 };
        }
    }
}

/// State with per-column min-max normalization over the domain.
pub fn extract_state(substrate: &MultiDomainSubstrate, domain: DomainId) -> StateMatrix {
    let mut state = extract_raw_state(substrate, domain);
    normalize_columns(&mut state.rows);
    state
}

/// Weights of the scoring layer: `score = row . kernel + bias`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolicyParams {
    pub kernel: [f64; FEATURES],
    pub bias: f64,
}

impl PolicyParams {
    pub const fn zeros() -> Self {
        Self {
            kernel: [0.0; FEATURES],
            bias: 0.0,
        }
    }

    /// Kernel uniform in `[-0.1, 0.1]`, bias 0.
    pub fn random(rng: &mut impl Rng) -> Self {
        let mut kernel = [0.0; FEATURES];
        for k in &mut kernel {
            *k = rng.random_range(-0.1..=0.1);
        }
        Self { kernel, bias: 0.0 }
    }

    pub fn to_array(&self) -> [f64; FEATURES + 1] {
        [self.kernel[0], self.kernel[1], self.kernel[2], self.bias]
    }

    pub fn from_array(a: [f64; FEATURES + 1]) -> Self {
        Self {
            kernel: [a[0], a[1], a[2]],
            bias: a[3],
        }
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }

    pub fn score(&self, row: &[f64; FEATURES]) -> f64 {
        row.iter().zip(&self.kernel).map(|(x, w)| x * w).sum::<f64>() + self.bias
    }
}

pub fn scores(params: &PolicyParams, state: &StateMatrix) -> Vec<f64> {
    state.rows.iter().map(|r| params.score(r)).collect()
}

/// Exponential normalization with max subtraction.
pub fn softmax(scores: &[f64]) -> Vec<f64> {
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// Probability of each row of `state`.
pub fn forward(params: &PolicyParams, state: &StateMatrix) -> Vec<f64> {
    softmax(&scores(params, state))
}

/// Nodes with enough cpu, by descending `key` then ascending node id.
pub fn rank_by_key(state: &StateMatrix, key: &[f64], cpu_demand: f64) -> Vec<NodeId> {
    let mut rows: Vec<usize> = (0..state.len())
        .filter(|&i| state.cpu_available[i] >= cpu_demand)
        .collect();
    rows.sort_by(|&a, &b| {
        key[b]
            .total_cmp(&key[a])
            .then(state.node_ids[a].cmp(&state.node_ids[b]))
    });
    rows.into_iter().map(|i| state.node_ids[i]).collect()
}

/// Feasible nodes of the domain by descending probability.
pub fn rank_candidates(params: &PolicyParams, state: &StateMatrix, cpu_demand: f64) -> Vec<NodeId> {
    rank_by_key(state, &forward(params, state), cpu_demand)
}

/// Revenue-to-cost ratio of an accepted embedding; `-reject_penalty` (0 by
/// default) for a rejected one.
pub fn episode_reward(record: &EmbeddingRecord, reject_penalty: f64) -> f64 {
    if record.accepted && record.cost > 0.0 {
        record.revenue / record.cost
    } else if record.accepted {
        1.0
    } else {
        -reject_penalty
    }
}

/// One node choice: the state the agent saw, the row it picked and the
/// probabilities it assigned.
#[derive(Debug, Clone, PartialEq)]
pub struct DecisionStep {
    pub state: Arc<StateMatrix>,
    pub chosen: usize,
    pub probabilities: Vec<f64>,
}

/// All of one domain's choices for one request, with the request's reward.
#[derive(Debug, Clone, PartialEq)]
pub struct DecisionTrace {
    pub steps: Vec<DecisionStep>,
    pub reward: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Baseline {
    /// Mean reward of the traces in the batch.
    BatchMean,
    Fixed(f64),
}

impl Baseline {
    fn value(self, traces: &[DecisionTrace]) -> f64 {
        match self {
            Baseline::Fixed(b) => b,
            Baseline::BatchMean => {
                traces.iter().map(|t| t.reward).sum::<f64>() / traces.len() as f64
            }
        }
    }
}

/// Mean over all decision steps of `-(reward - baseline) * ln p(chosen)`,
/// with probabilities recomputed under `params`.
pub fn local_loss(params: &PolicyParams, traces: &[DecisionTrace], baseline: Baseline) -> f64 {
    loss_and_gradient(params, traces, baseline).0
}

/// Loss and its gradient with respect to `(kernel, bias)`.
///
/// For one step with scores `z = X w + b` and `p = softmax(z)`,
/// `d(-ln p_c)/dz_k = p_k - [k == c]`, hence the kernel gradient is
/// `sum_k (p_k - [k == c]) x_k` and the bias gradient is always zero.
pub fn loss_and_gradient(
    params: &PolicyParams,
    traces: &[DecisionTrace],
    baseline: Baseline,
) -> (f64, [f64; FEATURES + 1]) {
    let b = baseline.value(traces);
    let mut loss = 0.0;
    let mut grad = [0.0; FEATURES + 1];
    let mut samples = 0usize;
    for trace in traces {
        let advantage = trace.reward - b;
        for step in &trace.steps {
            samples += 1;
            let p = forward(params, &step.state);
            loss -= advantage * p[step.chosen].ln();
            for (k, row) in step.state.rows.iter().enumerate() {
                let delta = p[k] - if k == step.chosen { 1.0 } else { 0.0 };
                for f in 0..FEATURES {
                    grad[f] += advantage * delta * row[f];
                }
                grad[FEATURES] += advantage * delta;
            }
        }
    }
    if samples == 0 {
        return (0.0, grad);
    }
    let m = samples as f64;
    grad.iter_mut().for_each(|g| *g /= m);
    (loss / m, grad)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub params: PolicyParams,
    pub loss: f64,
    pub samples: usize,
    /// Every reward equalled the baseline, so the step was a no-op.
    pub degenerate: bool,
}

/// One gradient-descent step on the local loss.
pub fn train_step(
    params: &PolicyParams,
    traces: &[DecisionTrace],
    learning_rate: f64,
    baseline: Baseline,
) -> Result<TrainOutcome, AgentError> {
    let samples: usize = traces.iter().map(|t| t.steps.len()).sum();
    if traces.is_empty() || samples == 0 {
        return Err(AgentError::EmptyBatch);
    }
    let b = baseline.value(traces);
    if traces.iter().all(|t| t.reward == b) {
        return Ok(TrainOutcome {
            params: *params,
            loss: 0.0,
            samples,
            degenerate: true,
        });
    }
    let (loss, grad) = loss_and_gradient(params, traces, baseline);
    let mut theta = params.to_array();
    for (t, g) in theta.iter_mut().zip(grad) {
        *t -= learning_rate * g;
    }
    Ok(TrainOutcome {
        params: PolicyParams::from_array(theta),
        loss,
        samples,
        degenerate: false,
    })
}

/// Per-domain parameters plus the global model.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub domains: Vec<PolicyParams>,
    pub global: PolicyParams,
}

/// One line `kernel_0 kernel_1 kernel_2 bias` per domain, then the global
/// model on the last line.
pub fn write_checkpoint(ckpt: &Checkpoint, mut w: impl Write) -> std::io::Result<()> {
    for p in ckpt.domains.iter().chain(std::iter::once(&ckpt.global)) {
        let [a, b, c, d] = p.to_array();
        writeln!(w, "{a} {b} {c} {d}")?;
    }
    Ok(())
}

pub fn read_checkpoint(r: impl Read) -> Result<Checkpoint, AgentError> {
    let mut params = Vec::new();
    for (i, line) in BufReader::new(r).lines().enumerate() {
        let line = line?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let vals: Vec<f64> = t
            .split_whitespace()
            .map(str::parse)
            .collect::<Result<_, _>>()
            .map_err(|e| AgentError::Checkpoint {
                line: i + 1,
                message: format!("{e}"),
            })?;
        let arr: [f64; FEATURES + 1] = vals.try_into().map_err(|v: Vec<f64>| AgentError::Checkpoint {
            line: i + 1,
            message: format!("expected 4 values, found {}", v.len()),
        })?;
        let p = PolicyParams::from_array(arr);
        if !p.is_finite() {
            return Err(AgentError::Checkpoint {
                line: i + 1,
                message: "non-finite parameter".into(),
            });
        }
        params.push(p);
    }
    let global = params.pop().ok_or(AgentError::Checkpoint {
        line: 0,
        message: "empty checkpoint".into(),
    })?;
    Ok(Checkpoint {
        domains: params,
        global,
    })
}
