//! Horizontal federated averaging over per-domain policy parameters.
//!
//! Domains only ever hand the coordinator an [`Upload`]: parameters and a
//! few scalars. States, actions and requests never cross a domain boundary
//! through this module.

use std::io::Write;

use thiserror::Error;

use crate::agent::{PolicyParams, StateMatrix, FEATURES};
use crate::{DomainId, NodeId};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FederationError {
    #[error("round has no uploads")]
    EmptyRound,
    #[error("domain {0} has no upload for this round")]
    MissingUpload(DomainId),
    #[error("domain {0} uploaded twice in one round")]
    DuplicateUpload(DomainId),
    #[error("domain {0} reported a zero sample count")]
    ZeroSamples(DomainId),
    #[error("unknown domain {0}")]
    UnknownDomain(DomainId),
}

/// What one domain sends to the coordinator after a local batch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Upload {
    pub domain_id: DomainId,
    pub params: PolicyParams,
    pub sample_count: usize,
    pub local_loss: f64,
    pub reward_mean: f64,
}

fn check(uploads: &[Upload]) -> Result<f64, FederationError> {
    if uploads.is_empty() {
        return Err(FederationError::EmptyRound);
    }
    if let Some(u) = uploads.iter().find(|u| u.sample_count == 0) {
        return Err(FederationError::ZeroSamples(u.domain_id));
    }
    Ok(uploads.iter().map(|u| u.sample_count as f64).sum())
}

/// Sample-count-weighted mean of the uploaded kernels and biases.
pub fn aggregate(uploads: &[Upload]) -> Result<PolicyParams, FederationError> {
    let total = check(uploads)?;
    let mut acc = [0.0; FEATURES + 1];
    for u in uploads {
        let w = u.sample_count as f64 / total;
        for (a, p) in acc.iter_mut().zip(u.params.to_array()) {
            *a += w * p;
        }
    }
    Ok(PolicyParams::from_array(acc))
}

/// `sum_i n_i * loss_i / sum_i n_i`.
pub fn global_loss(uploads: &[Upload]) -> Result<f64, FederationError> {
    let total = check(uploads)?;
    Ok(uploads
        .iter()
        .map(|u| u.sample_count as f64 * u.local_loss)
        .sum::<f64>()
        / total)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FederationRound {
    pub round_id: usize,
    /// Ordered by domain id.
    pub uploads: Vec<Upload>,
    pub global_params: PolicyParams,
    pub global_loss: f64,
}

/// Synchronous coordinator: collects exactly one upload per registered
/// domain, then aggregates and broadcasts.
#[derive(Debug, Clone)]
pub struct Coordinator {
    slots: Vec<Option<Upload>>,
    global: PolicyParams,
    rounds: Vec<FederationRound>,
}

impl Coordinator {
    pub fn new(num_domains: usize, initial: PolicyParams) -> Self {
        Self {
            slots: vec![None; num_domains],
            global: initial,
            rounds: Vec::new(),
        }
    }

    pub fn num_domains(&self) -> usize {
        self.slots.len()
    }

    pub fn global(&self) -> PolicyParams {
        self.global
    }

    pub fn rounds(&self) -> &[FederationRound] {
        &self.rounds
    }

    pub fn has_upload(&self, domain: DomainId) -> bool {
        self.slots.get(domain).is_some_and(Option::is_some)
    }

    pub fn ready(&self) -> bool {
        !self.slots.is_empty() && self.slots.iter().all(Option::is_some)
    }

    pub fn submit(&mut self, upload: Upload) -> Result<(), FederationError> {
        let slot = self
            .slots
            .get_mut(upload.domain_id)
            .ok_or(FederationError::UnknownDomain(upload.domain_id))?;
        if slot.is_some() {
            return Err(FederationError::DuplicateUpload(upload.domain_id));
        }
        if upload.sample_count == 0 {
            return Err(FederationError::ZeroSamples(upload.domain_id));
        }
        *slot = Some(upload);
        Ok(())
    }

    /// Aggregates the pending uploads and writes the global parameters into
    /// every entry of `domain_params`. Fails without consuming anything if a
    /// domain has not uploaded yet.
    pub fn run_round(
        &mut self,
        domain_params: &mut [PolicyParams],
    ) -> Result<&FederationRound, FederationError> {
        if self.slots.is_empty() {
            return Err(FederationError::EmptyRound);
        }
        if let Some(d) = self.slots.iter().position(Option::is_none) {
            return Err(FederationError::MissingUpload(d));
        }
        if domain_params.len() != self.slots.len() {
            return Err(FederationError::UnknownDomain(domain_params.len()));
        }
        let uploads: Vec<Upload> = self.slots.iter_mut().map(|s| s.take().unwrap()).collect();
        let global_params = aggregate(&uploads)?;
        let loss = global_loss(&uploads)?;
        for p in domain_params.iter_mut() {
            *p = global_params;
        }
        self.global = global_params;
        self.rounds.push(FederationRound {
            round_id: self.rounds.len(),
            uploads,
            global_params,
            global_loss: loss,
        });
        Ok(self.rounds.last().unwrap())
    }
}

/// What a domain exposes for the joint logging view of a round.
#[derive(Debug, Clone, PartialEq)]
pub struct DomainReport {
    pub domain_id: DomainId,
    pub state: StateMatrix,
    pub actions: Vec<NodeId>,
    pub reward_sum: f64,
    pub next_state: StateMatrix,
}

/// Per-domain states, actions, rewards and next states of one round,
/// all indexed by the same domain order.
#[derive(Debug, Clone, PartialEq)]
pub struct FederatedSnapshot {
    pub domains: Vec<DomainId>,
    pub states: Vec<StateMatrix>,
    pub actions: Vec<Vec<NodeId>>,
    pub rewards: Vec<f64>,
    pub next_states: Vec<StateMatrix>,
}

pub fn assemble_snapshot(reports: Vec<DomainReport>) -> Result<FederatedSnapshot, FederationError> {
    if reports.is_empty() {
        return Err(FederationError::EmptyRound);
    }
    let mut snap = FederatedSnapshot {
        domains: Vec::with_capacity(reports.len()),
        states: Vec::with_capacity(reports.len()),
        actions: Vec::with_capacity(reports.len()),
        rewards: Vec::with_capacity(reports.len()),
        next_states: Vec::with_capacity(reports.len()),
    };
    for r in reports {
        if snap.domains.contains(&r.domain_id) {
            return Err(FederationError::DuplicateUpload(r.domain_id));
        }
        snap.domains.push(r.domain_id);
        snap.states.push(r.state);
        snap.actions.push(r.actions);
        snap.rewards.push(r.reward_sum);
        snap.next_states.push(r.next_state);
    }
    Ok(snap)
}

/// Round log: `round_id,global_loss` followed by `local_loss_d` and
/// `reward_mean_d` for every domain.
pub fn write_round_log(rounds: &[FederationRound], num_domains: usize, w: impl Write) -> csv::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let mut header = vec!["round_id".to_string(), "global_loss".to_string()];
    header.extend((0..num_domains).map(|d| format!("local_loss_{d}")));
    header.extend((0..num_domains).map(|d| format!("reward_mean_{d}")));
    out.write_record(&header)?;
    for r in rounds {
        let mut row = vec![r.round_id.to_string(), r.global_loss.to_string()];
        row.extend(r.uploads.iter().map(|u| u.local_loss.to_string()));
        row.extend(r.uploads.iter().map(|u| u.reward_mean.to_string()));
        out.write_record(&row)?;
    }
    out.flush()?;
    Ok(())
}
