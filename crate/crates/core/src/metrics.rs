//! Revenue, cost and the long-term indicators.
//!
//! `ltar` is accepted revenue per unit of elapsed time, `ltar2c` the ratio
//! of accepted revenue to accepted cost, and `acc` the share of requests
//! that were accepted. All three are computed from event sums over the
//! window `[origin, T]`.

use std::io::Write;

use thiserror::Error;

use crate::engine::EmbeddingRecord;
use crate::workload::VirtualNetworkRequest;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MetricsError {
    #[error("metric {0} is undefined for this window")]
    UndefinedMetric(&'static str),
    #[error("cost is only defined for accepted embeddings (vnr {0})")]
    RejectedRecord(u64),
    #[error("ledger events must be recorded in time order")]
    OutOfOrder,
}

/// Lifetime times the total requested cpu and bandwidth.
pub fn vnr_revenue(vnr: &VirtualNetworkRequest) -> f64 {
    vnr.lifetime() * (vnr.total_cpu() + vnr.total_bw())
}

/// Like revenue, but each link's bandwidth is paid once per substrate hop.
pub fn vnr_cost(vnr: &VirtualNetworkRequest, record: &EmbeddingRecord) -> Result<f64, MetricsError> {
    if !record.accepted {
        return Err(MetricsError::RejectedRecord(record.vnr_id));
    }
    let link_cost: f64 = vnr
        .links
        .iter()
        .zip(&record.link_paths)
        .map(|(l, p)| l.bw_demand * p.as_ref().map_or(0, Vec::len) as f64)
        .sum();
    Ok(vnr.lifetime() * (vnr.total_cpu() + link_cost))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LedgerEvent {
    pub t: f64,
    pub revenue: f64,
    pub cost: f64,
    pub accepted: bool,
}

/// Time-ordered embedding outcomes plus running totals.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsLedger {
    origin: f64,
    events: Vec<LedgerEvent>,
    revenue: f64,
    cost: f64,
    accepted: usize,
}

/// One sampled row of the metric time series. `t` is elapsed time since
/// the ledger origin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesPoint {
    pub t: f64,
    pub ltar: f64,
    pub ltar2c: Option<f64>,
    pub acc: f64,
}

/// Whole-window indicators.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub ltar: f64,
    pub ltar2c: Option<f64>,
    pub acc: Option<f64>,
    pub accepted: usize,
    pub total: usize,
}

impl Default for MetricsLedger {
    fn default() -> Self {
        Self::new(0.0)
    }
}

impl MetricsLedger {
    /// Empty ledger whose window starts at `origin`.
    pub fn new(origin: f64) -> Self {
        Self {
            origin,
            events: Vec::new(),
            revenue: 0.0,
            cost: 0.0,
            accepted: 0,
        }
    }

    pub fn origin(&self) -> f64 {
        self.origin
    }

    pub fn events(&self) -> &[LedgerEvent] {
        &self.events
    }

    pub fn total_revenue(&self) -> f64 {
        self.revenue
    }

    pub fn total_cost(&self) -> f64 {
        self.cost
    }

    pub fn accepted_count(&self) -> usize {
        self.accepted
    }

    pub fn total_count(&self) -> usize {
        self.events.len()
    }

    /// Appends one outcome. Rejected requests count towards the total only.
    ///
    /// # Panics
    /// If `t` is earlier than the previous event.
    pub fn record(&mut self, t: f64, revenue: f64, cost: f64, accepted: bool) {
        self.try_record(t, revenue, cost, accepted)
            .expect("ledger events must be recorded in time order");
    }

    pub fn try_record(
        &mut self,
        t: f64,
        revenue: f64,
        cost: f64,
        accepted: bool,
    ) -> Result<(), MetricsError> {
        if self.events.last().is_some_and(|e| t < e.t) {
            return Err(MetricsError::OutOfOrder);
        }
        let (revenue, cost) = if accepted { (revenue, cost) } else { (0.0, 0.0) };
        self.events.push(LedgerEvent {
            t,
            revenue,
            cost,
            accepted,
        });
        if accepted {
            self.revenue += revenue;
            self.cost += cost;
            self.accepted += 1;
        }
        Ok(())
    }

    /// Events with `t <= origin + elapsed`.
    fn window(&self, elapsed: f64) -> &[LedgerEvent] {
        let end = self.origin + elapsed;
        let k = self.events.partition_point(|e| e.t <= end);
        &self.events[..k]
    }

    /// Accepted revenue up to elapsed time `elapsed`, divided by `elapsed`.
    pub fn ltar(&self, elapsed: f64) -> Result<f64, MetricsError> {
        if !(elapsed > 0.0) {
            return Err(MetricsError::UndefinedMetric("ltar"));
        }
        let revenue: f64 = self.window(elapsed).iter().map(|e| e.revenue).sum();
        Ok(revenue / elapsed)
    }

    pub fn ltar2c(&self, elapsed: f64) -> Result<f64, MetricsError> {
        let w = self.window(elapsed);
        let cost: f64 = w.iter().map(|e| e.cost).sum();
        if !(cost > 0.0) {
            return Err(MetricsError::UndefinedMetric("ltar2c"));
        }
        Ok(w.iter().map(|e| e.revenue).sum::<f64>() / cost)
    }

    pub fn acc(&self, elapsed: f64) -> Result<f64, MetricsError> {
        let w = self.window(elapsed);
        if w.is_empty() {
            return Err(MetricsError::UndefinedMetric("acc"));
        }
        Ok(w.iter().filter(|e| e.accepted).count() as f64 / w.len() as f64)
    }

    /// Elapsed time of the last event (0 for an empty ledger).
    pub fn horizon(&self) -> f64 {
        self.events.last().map_or(0.0, |e| e.t - self.origin)
    }

    pub fn summary(&self) -> Summary {
        let total = self.events.len();
        Summary {
            ltar: if self.horizon() > 0.0 {
                self.revenue / self.horizon()
            } else {
                0.0
            },
            ltar2c: (self.cost > 0.0).then(|| self.revenue / self.cost),
            acc: (total > 0).then(|| self.accepted as f64 / total as f64),
            accepted: self.accepted,
            total,
        }
    }

    /// Samples every `interval` time units of elapsed time up to and
    /// including the first sample at or past the last event. Points before
    /// the first event are skipped.
    pub fn series(&self, interval: f64) -> Vec<SeriesPoint> {
        assert!(interval > 0.0, "sampling interval must be positive");
        let mut points = Vec::new();
        let horizon = self.horizon();
        if self.events.is_empty() {
            return points;
        }
        let mut k = 1u64;
        loop {
            let t = interval * k as f64;
            if let Ok(acc) = self.acc(t) {
                points.push(SeriesPoint {
                    t,
                    ltar: self.ltar(t).unwrap_or(0.0),
                    ltar2c: self.ltar2c(t).ok(),
                    acc,
                });
            }
            if t >= horizon {
                break;
            }
            k += 1;
        }
        points
    }

    /// Concatenates a ledger whose events all come at or after this one's.
    pub fn merge(&self, later: &MetricsLedger) -> Result<MetricsLedger, MetricsError> {
        let mut merged = self.clone();
        for e in &later.events {
            merged.try_record(e.t, e.revenue, e.cost, e.accepted)?;
        }
        Ok(merged)
    }
}

/// Acceptance ratio computed from each record's node and link indicator
/// product rather than from its accepted flag.
pub fn acc_from_indicators(records: &[EmbeddingRecord]) -> Option<f64> {
    if records.is_empty() {
        return None;
    }
    let accepted: usize = records.iter().map(|r| r.indicator_product() as usize).sum();
    Some(accepted as f64 / records.len() as f64)
}

/// Writes `t,ltar,ltar2c,acc`; undefined ltar2c is left empty.
pub fn write_series(points: &[SeriesPoint], mut w: impl Write) -> std::io::Result<()> {
    writeln!(w, "t,ltar,ltar2c,acc")?;
    for p in points {
        let r2c = p.ltar2c.map(|v| v.to_string()).unwrap_or_default();
        writeln!(w, "{},{},{},{}", p.t, p.ltar, r2c, p.acc)?;
    }
    Ok(())
}

/// Least-squares slope of `ys` against `xs`.
pub fn ls_slope(xs: &[f64], ys: &[f64]) -> Option<f64> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return None;
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    Some(sxy / sxx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::workload::VirtualLink;

    fn sample_vnr(lifetime: f64) -> VirtualNetworkRequest {
        VirtualNetworkRequest {
            id: 0,
            node_demands: vec![10.0, 20.0],
            links: vec![VirtualLink {
                a: 0,
                b: 1,
                bw_demand: 15.0,
            }],
            t_s: 1.0,
            t_e: 1.0 + lifetime,
        }
    }

    fn record_with_hops(vnr: &VirtualNetworkRequest, hops: usize, accepted: bool) -> EmbeddingRecord {
        EmbeddingRecord {
            vnr_id: vnr.id,
            t_s: vnr.t_s,
            t_e: vnr.t_e,
            node_map: vec![Some(0), Some(1)],
            node_demands: vnr.node_demands.clone(),
            link_paths: vec![Some((0..hops).collect())],
            link_demands: vec![15.0],
            revenue: 0.0,
            cost: 0.0,
            accepted,
        }
    }

    #[test]
    fn revenue_examples() {
        assert_eq!(vnr_revenue(&sample_vnr(5.0)), 225.0);
        let mut zero = sample_vnr(5.0);
        zero.t_e = zero.t_s;
        assert_eq!(vnr_revenue(&zero), 0.0);
        let single = VirtualNetworkRequest {
            id: 1,
            node_demands: vec![50.0],
            links: vec![],
            t_s: 0.0,
            t_e: 2.0,
        };
        assert_eq!(vnr_revenue(&single), 100.0);
    }

    #[test]
    fn cost_examples() {
        let v = sample_vnr(5.0);
        assert_eq!(vnr_cost(&v, &record_with_hops(&v, 2, true)).unwrap(), 300.0);
        assert_eq!(vnr_cost(&v, &record_with_hops(&v, 1, true)).unwrap(), vnr_revenue(&v));
        assert_eq!(
            vnr_cost(&v, &record_with_hops(&v, 1, false)),
            Err(MetricsError::RejectedRecord(0))
        );
        let single = VirtualNetworkRequest {
            id: 1,
            node_demands: vec![50.0],
            links: vec![],
            t_s: 0.0,
            t_e: 2.0,
        };
        let rec = EmbeddingRecord {
            vnr_id: 1,
            t_s: 0.0,
            t_e: 2.0,
            node_map: vec![Some(3)],
            node_demands: vec![50.0],
            link_paths: vec![],
            link_demands: vec![],
            revenue: 0.0,
            cost: 0.0,
            accepted: true,
        };
        assert_eq!(vnr_cost(&single, &rec).unwrap(), vnr_revenue(&single));
    }

    #[test]
    fn indicator_examples() {
        let mut ledger = MetricsLedger::new(0.0);
        ledger.record(10.0, 225.0, 300.0, true);
        assert_eq!(ledger.ltar(100.0).unwrap(), 2.25);

        let mut rejects = MetricsLedger::new(0.0);
        rejects.record(1.0, 500.0, 600.0, false);
        rejects.record(2.0, 500.0, 600.0, false);
        assert_eq!(rejects.acc(10.0).unwrap(), 0.0);
        assert_eq!(rejects.ltar(10.0).unwrap(), 0.0);
        assert_eq!(
            rejects.ltar2c(10.0),
            Err(MetricsError::UndefinedMetric("ltar2c"))
        );

        let mut two = MetricsLedger::new(0.0);
        two.record(1.0, 100.0, 100.0, true);
        two.record(2.0, 200.0, 400.0, true);
        assert!((two.ltar2c(10.0).unwrap() - 0.6).abs() < 1e-15);

        let empty = MetricsLedger::new(0.0);
        assert!(empty.ltar(0.0).is_err());
        assert!(empty.acc(5.0).is_err());
        assert!(empty.series(100.0).is_empty());
    }

    #[test]
    fn window_respects_origin_and_time() {
        let mut ledger = MetricsLedger::new(1000.0);
        ledger.record(1050.0, 10.0, 10.0, true);
        ledger.record(1150.0, 30.0, 60.0, true);
        assert_eq!(ledger.ltar(100.0).unwrap(), 0.1);
        assert_eq!(ledger.ltar(200.0).unwrap(), 0.2);
        assert_eq!(ledger.acc(60.0).unwrap(), 1.0);
        let s = ledger.series(100.0);
        assert_eq!(s.len(), 2);
        assert_eq!(s[1].t, 200.0);
        assert!(ledger.try_record(1100.0, 1.0, 1.0, true).is_err());
    }

    #[test]
    fn slope() {
        assert_eq!(ls_slope(&[0.0, 1.0, 2.0], &[1.0, 3.0, 5.0]), Some(2.0));
        assert_eq!(ls_slope(&[1.0], &[1.0]), None);
    }
}
