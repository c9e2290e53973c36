//! Per-request decision log (CSV).
//!
//! Columns: `vnr_id,t_s,t_e,accepted,revenue,cost,node_map,path_hops,link_paths`.
//! List columns use `;` between virtual elements and `-` for an unmapped
//! one; a path lists its link ids joined by `:`.

use std::collections::HashMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::EmbeddingRecord;
use crate::error::{Error, Result};
use crate::workload::VirtualNetworkRequest;

#[derive(Debug, Serialize, Deserialize)]
struct Row {
    vnr_id: u64,
    t_s: f64,
    t_e: f64,
    accepted: u8,
    revenue: f64,
    cost: f64,
    node_map: String,
    path_hops: String,
    link_paths: String,
}

fn join<T>(items: &[Option<T>], f: impl Fn(&T) -> String) -> String {
    items
        .iter()
        .map(|i| i.as_ref().map_or_else(|| "-".to_string(), &f))
        .collect::<Vec<_>>()
        .join(";")
}

fn split<T>(raw: &str, expected: usize, f: impl Fn(&str) -> Option<T>) -> Option<Vec<Option<T>>> {
    if expected == 0 {
        return raw.is_empty().then(Vec::new);
    }
    let parts: Vec<&str> = raw.split(';').collect();
    if parts.len() != expected {
        return None;
    }
    parts
        .into_iter()
        .map(|p| if p == "-" { Some(None) } else { f(p).map(Some) })
        .collect()
}

pub fn write_decision_log(records: &[EmbeddingRecord], w: impl Write) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for r in records {
        out.serialize(Row {
            vnr_id: r.vnr_id,
            t_s: r.t_s,
            t_e: r.t_e,
            accepted: u8::from(r.accepted),
            revenue: r.revenue,
            cost: r.cost,
            node_map: join(&r.node_map, |n| n.to_string()),
            path_hops: join(&r.path_hops(), |h| h.to_string()),
            link_paths: join(&r.link_paths, |p| {
                p.iter().map(|l| l.to_string()).collect::<Vec<_>>().join(":")
            }),
        })?;
    }
    out.flush().map_err(|e| Error::io("decision log", e))?;
    Ok(())
}

/// Parses a decision log. Demands are not part of the log; they are taken
/// from the matching request in `vnrs`.
pub fn read_decision_log(r: impl Read, vnrs: &[VirtualNetworkRequest]) -> Result<Vec<EmbeddingRecord>> {
    let by_id: HashMap<u64, &VirtualNetworkRequest> = vnrs.iter().map(|v| (v.id, v)).collect();
    let mut records = Vec::new();
    for (i, row) in csv::Reader::from_reader(r).deserialize::<Row>().enumerate() {
        let row = row?;
        let line = i + 2;
        let bad = |what: &str| Error::Invalid(format!("decision log line {line}: {what}"));
        let vnr = by_id
            .get(&row.vnr_id)
            .ok_or_else(|| bad(&format!("unknown vnr {}", row.vnr_id)))?;
        let node_map = split(&row.node_map, vnr.num_nodes(), |s| s.parse().ok())
            .ok_or_else(|| bad("malformed node_map"))?;
        let link_paths = split(&row.link_paths, vnr.links.len(), |s| {
            if s.is_empty() {
                return Some(Vec::new());
            }
            s.split(':').map(|l| l.parse().ok()).collect()
        })
        .ok_or_else(|| bad("malformed link_paths"))?;
        let record = EmbeddingRecord {
            vnr_id: row.vnr_id,
            t_s: row.t_s,
            t_e: row.t_e,
            node_map,
            node_demands: vnr.node_demands.clone(),
            link_paths,
            link_demands: vnr.links.iter().map(|l| l.bw_demand).collect(),
            revenue: row.revenue,
            cost: row.cost,
            accepted: row.accepted != 0,
        };
        let hops = split(&row.path_hops, vnr.links.len(), |s| s.parse::<usize>().ok())
            .ok_or_else(|| bad("malformed path_hops"))?;
        if hops != record.path_hops() {
            return Err(bad("path_hops disagree with link_paths"));
        }
        records.push(record);
    }
    Ok(records)
}
