//! Virtual network requests, substrate/VNR generation and the text formats.

mod format;
mod generate;

use std::collections::HashSet;

use thiserror::Error;

pub use format::{
    load_substrate, load_vnrs, read_substrate, read_vnrs, save_substrate, save_vnrs,
    write_substrate, write_vnrs,
};
pub use generate::{generate_substrate, generate_vnr_stream, SubstrateConfig, VnrConfig};

#[derive(Debug, Error)]
pub enum WorkloadError {
    #[error("infeasible topology: {0}")]
    InfeasibleTopology(String),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("validation failed: {0}")]
    Validation(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VirtualLink {
    pub a: usize,
    pub b: usize,
    pub bw_demand: f64,
}

/// A virtual network with cpu/bandwidth demands, alive during `[t_s, t_e)`.
#[derive(Debug, Clone, PartialEq)]
pub struct VirtualNetworkRequest {
    pub id: u64,
    pub node_demands: Vec<f64>,
    pub links: Vec<VirtualLink>,
    pub t_s: f64,
    pub t_e: f64,
}

impl VirtualNetworkRequest {
    pub fn num_nodes(&self) -> usize {
        self.node_demands.len()
    }

    pub fn lifetime(&self) -> f64 {
        self.t_e - self.t_s
    }

    pub fn total_cpu(&self) -> f64 {
        self.node_demands.iter().sum()
    }

    pub fn total_bw(&self) -> f64 {
        self.links.iter().map(|l| l.bw_demand).sum()
    }

    /// Checks lifetime, index ranges, duplicate links and connectivity.
    pub fn validate(&self) -> Result<(), WorkloadError> {
        let fail = |msg: String| Err(WorkloadError::Validation(format!("vnr {}: {msg}", self.id)));
        if !(self.t_s.is_finite() && self.t_e.is_finite()) {
            return fail("non-finite time".into());
        }
        if self.t_e <= self.t_s {
            return fail(format!("t_e {} must exceed t_s {}", self.t_e, self.t_s));
        }
        let n = self.num_nodes();
        if n == 0 {
            return fail("no virtual nodes".into());
        }
        if let Some(d) = self
            .node_demands
            .iter()
            .find(|d| !(d.is_finite() && **d >= 0.0))
        {
            return fail(format!("invalid cpu demand {d}"));
        }
        let mut seen = HashSet::new();
        let mut parent: Vec<usize> = (0..n).collect();
        for l in &self.links {
            if l.a >= n || l.b >= n {
                return fail(format!("virtual link ({}, {}) has dangling endpoint", l.a, l.b));
            }
            if l.a == l.b {
                return fail(format!("virtual self-loop on {}", l.a));
            }
            if !seen.insert((l.a.min(l.b), l.a.max(l.b))) {
                return fail(format!("duplicate virtual link ({}, {})", l.a, l.b));
            }
            if !(l.bw_demand.is_finite() && l.bw_demand >= 0.0) {
                return fail(format!("invalid bandwidth demand {}", l.bw_demand));
            }
            let (ra, rb) = (find(&mut parent, l.a), find(&mut parent, l.b));
            parent[ra] = rb;
        }
        let root = find(&mut parent, 0);
        if (1..n).any(|v| find(&mut parent, v) != root) {
            return fail("virtual topology is not connected".into());
        }
        Ok(())
    }
}

pub(crate) fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

/// Validates every request and checks the stream is sorted by arrival with
/// unique ids.
pub fn validate_stream(stream: &[VirtualNetworkRequest]) -> Result<(), WorkloadError> {
    let mut ids = HashSet::new();
    for (i, vnr) in stream.iter().enumerate() {
        vnr.validate()?;
        if !ids.insert(vnr.id) {
            return Err(WorkloadError::Validation(format!("duplicate vnr id {}", vnr.id)));
        }
        if i > 0 && vnr.t_s < stream[i - 1].t_s {
            return Err(WorkloadError::Validation(format!(
                "stream not sorted by arrival at vnr {}",
                vnr.id
            )));
        }
    }
    Ok(())
}

/// Train/test partition of a VNR stream.
#[derive(Debug, Clone, PartialEq)]
pub struct Split {
    pub train: Vec<VirtualNetworkRequest>,
    pub test: Vec<VirtualNetworkRequest>,
    /// Start of the test window: arrival time of the last training request
    /// (0 when there is none). Metrics for the test phase measure elapsed
    /// time from here.
    pub test_origin: f64,
}

/// First `train_size` requests train, the next `test_size` test.
pub fn split_stream(
    stream: &[VirtualNetworkRequest],
    train_size: usize,
    test_size: usize,
) -> Result<Split, WorkloadError> {
    if train_size + test_size > stream.len() {
        return Err(WorkloadError::Validation(format!(
            "split {train_size}+{test_size} exceeds stream length {}",
            stream.len()
        )));
    }
    let train = stream[..train_size].to_vec();
    let test = stream[train_size..train_size + test_size].to_vec();
    let test_origin = train.last().map_or(0.0, |v| v.t_s);
    Ok(Split {
        train,
        test,
        test_origin,
    })
}
