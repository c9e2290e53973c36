//! Multi-domain virtual network embedding (VNE) simulator.
//!
//! A physical network is split into domains. Each domain runs a small
//! policy-gradient agent that ranks its nodes for incoming virtual network
//! requests (VNRs); a coordinator averages the agents' parameters in
//! synchronous federated rounds. The crate also ships the discrete-event
//! embedding engine, the revenue/cost metrics, two non-learning baselines
//! and the experiment harness used by the `hflvne` binary.

pub mod agent;
pub mod baselines;
pub mod config;
pub mod engine;
pub mod error;
pub mod experiment;
pub mod federation;
pub mod hfl;
pub mod metrics;
pub mod substrate;
pub mod workload;

pub use agent::{PolicyParams, StateMatrix};
pub use config::ExperimentConfig;
pub use engine::{EmbeddingRecord, PolicyProvider};
pub use error::{Error, Result};
pub use metrics::MetricsLedger;
pub use substrate::MultiDomainSubstrate;
pub use workload::VirtualNetworkRequest;

/// Index of a substrate node. Node ids are contiguous `0..num_nodes`.
pub type NodeId = usize;
/// Index of a substrate link. Link ids are contiguous `0..num_links`.
pub type LinkId = usize;
/// Index of a physical domain, `0..num_domains`.
pub type DomainId = usize;
