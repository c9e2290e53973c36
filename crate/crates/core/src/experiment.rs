//! Experiment pipelines shared by the CLI, the FFI layer and the tests:
//! workload generation, federated training, frozen-policy evaluation and
//! side-by-side policy comparison.

use std::io::Write;
use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::agent::{Baseline, Checkpoint, PolicyParams};
use crate::baselines::{NodeRankPolicy, RandomPolicy};
use crate::config::{ExperimentConfig, PolicyKind};
use crate::engine::{run_simulation, PolicyProvider, SimulationOutcome};
use crate::error::{Error, Result};
use crate::federation::FederationRound;
use crate::hfl::{HflPolicy, HflTrainer, TrainerSettings};
use crate::metrics::{MetricsLedger, SeriesPoint, Summary};
use crate::substrate::MultiDomainSubstrate;
use crate::workload::{generate_substrate, generate_vnr_stream, split_stream, Split, VirtualNetworkRequest};

/// Substrate and full VNR stream for `cfg`, from its derived seeds.
pub fn generate_workload(cfg: &ExperimentConfig) -> Result<(MultiDomainSubstrate, Vec<VirtualNetworkRequest>)> {
    cfg.validate()?;
    let seeds = cfg.seeds();
    let substrate = generate_substrate(&cfg.substrate, seeds.substrate)?;
    let stream = generate_vnr_stream(&cfg.vnr, seeds.workload);
    Ok((substrate, stream))
}

pub fn split(cfg: &ExperimentConfig, stream: &[VirtualNetworkRequest]) -> Result<Split> {
    Ok(split_stream(stream, cfg.train_size, cfg.test_size)?)
}

/// Training-window indicators of one pass over the training split.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    pub summary: Summary,
    pub rounds_completed: usize,
}

#[derive(Debug, Clone)]
pub struct TrainReport {
    pub checkpoint: Checkpoint,
    pub rounds: Vec<FederationRound>,
    pub epochs: Vec<EpochStats>,
    pub local_steps: usize,
}

/// Runs `cfg.epochs` passes over `train`, each on a fresh copy of the
/// substrate, with one federated trainer carried across passes.
pub fn train(cfg: &ExperimentConfig, substrate: &MultiDomainSubstrate, train: &[VirtualNetworkRequest]) -> Result<TrainReport> {
    cfg.validate()?;
    let seeds = cfg.seeds();
    let initial = PolicyParams::random(&mut ChaCha8Rng::seed_from_u64(seeds.policy));
    let settings = TrainerSettings {
        learning_rate: cfg.learning_rate,
        batch_size: cfg.batch_size,
        reject_penalty: cfg.reject_penalty,
        baseline: Baseline::BatchMean,
    };
    let mut trainer = HflTrainer::new(substrate.num_domains(), initial, settings, seeds.exploration);
    let mut epochs = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let out = run_simulation(substrate.pristine(), train, &mut trainer, MetricsLedger::new(0.0));
        epochs.push(EpochStats {
            epoch,
            summary: out.ledger.summary(),
            rounds_completed: trainer.coordinator().rounds().len(),
        });
    }
    Ok(TrainReport {
        checkpoint: trainer.checkpoint(),
        rounds: trainer.coordinator().rounds().to_vec(),
        epochs,
        local_steps: trainer.local_steps(),
    })
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// `epoch,ltar,ltar2c,acc,accepted,total,rounds`.
pub fn write_epoch_log(epochs: &[EpochStats], mut w: impl Write) -> std::io::Result<()> {
    writeln!(w, "epoch,ltar,ltar2c,acc,accepted,total,rounds")?;
    for e in epochs {
        let s = &e.summary;
        writeln!(
            w,
            "{},{},{},{},{},{},{}",
            e.epoch,
            s.ltar,
            opt(s.ltar2c),
            opt(s.acc),
            s.accepted,
            s.total,
            e.rounds_completed
        )?;
    }
    Ok(())
}

/// Builds the provider for `kind`. The learned policy needs a checkpoint.
pub fn make_policy(
    kind: PolicyKind,
    cfg: &ExperimentConfig,
    checkpoint: Option<&Checkpoint>,
    num_domains: usize,
) -> Result<Box<dyn PolicyProvider>> {
    Ok(match kind {
        PolicyKind::Hfl => {
            let ckpt = checkpoint.ok_or_else(|| Error::Invalid("policy hfl needs a checkpoint".into()))?;
            Box::new(HflPolicy::from_global(ckpt, num_domains))
        }
        PolicyKind::NodeRank => Box::new(NodeRankPolicy),
        PolicyKind::Random => Box::new(RandomPolicy {
            seed: cfg.seeds().exploration,
        }),
    })
}

pub struct EvalReport {
    pub policy: String,
    pub outcome: SimulationOutcome,
    pub series: Vec<SeriesPoint>,
    pub summary: Summary,
    pub wall_clock: Duration,
}

/// Frozen-policy run over `stream` on a fresh copy of `substrate`, with
/// metrics measured from `origin`.
pub fn evaluate(
    cfg: &ExperimentConfig,
    substrate: &MultiDomainSubstrate,
    stream: &[VirtualNetworkRequest],
    origin: f64,
    policy: &mut dyn PolicyProvider,
) -> EvalReport {
    let start = Instant::now();
    let outcome = run_simulation(substrate.pristine(), stream, policy, MetricsLedger::new(origin));
    let wall_clock = start.elapsed();
    EvalReport {
        policy: policy.name().to_string(),
        series: outcome.ledger.series(cfg.sample_interval),
        summary: outcome.ledger.summary(),
        outcome,
        wall_clock,
    }
}

/// Evaluates every policy in `kinds` on the same substrate and test split.
pub fn compare(
    cfg: &ExperimentConfig,
    substrate: &MultiDomainSubstrate,
    split: &Split,
    kinds: &[PolicyKind],
    checkpoint: Option<&Checkpoint>,
) -> Result<Vec<EvalReport>> {
    kinds
        .iter()
        .map(|&k| {
            let mut p = make_policy(k, cfg, checkpoint, substrate.num_domains())?;
            let mut r = evaluate(cfg, substrate, &split.test, split.test_origin, p.as_mut());
            r.policy = k.to_string();
            Ok(r)
        })
        .collect()
}

/// Which indicator a merged comparison table holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Indicator {
    Ltar,
    Ltar2c,
    Acc,
}

impl Indicator {
    pub const ALL: [Indicator; 3] = [Indicator::Ltar, Indicator::Ltar2c, Indicator::Acc];

    pub fn name(self) -> &'static str {
        match self {
            Indicator::Ltar => "ltar",
            Indicator::Ltar2c => "ltar2c",
            Indicator::Acc => "acc",
        }
    }

    fn of(self, p: &SeriesPoint) -> Option<f64> {
        match self {
            Indicator::Ltar => Some(p.ltar),
            Indicator::Ltar2c => p.ltar2c,
            Indicator::Acc => Some(p.acc),
        }
    }
}

/// One column per report, one row per sample time (`t` first). A column
/// whose run has no sample at some time is left empty there.
pub fn write_merged_series(reports: &[EvalReport], indicator: Indicator, mut w: impl Write) -> std::io::Result<()> {
    let mut header = vec!["t".to_string()];
    header.extend(reports.iter().map(|r| r.policy.clone()));
    writeln!(w, "{}", header.join(","))?;
    let mut times: Vec<f64> = reports.iter().flat_map(|r| r.series.iter().map(|p| p.t)).collect();
    times.sort_by(f64::total_cmp);
    times.dedup();
    for t in times {
        let mut row = vec![t.to_string()];
        for r in reports {
            let v = r.series.iter().find(|p| p.t == t).and_then(|p| indicator.of(p));
            row.push(opt(v));
        }
        writeln!(w, "{}", row.join(","))?;
    }
    Ok(())
}

/// `policy,ltar,ltar2c,acc,accepted,total`.
pub fn write_summary_table(reports: &[EvalReport], mut w: impl Write) -> std::io::Result<()> {
    writeln!(w, "policy,ltar,ltar2c,acc,accepted,total")?;
    for r in reports {
        let s = &r.summary;
        writeln!(w, "{},{},{},{},{},{}", r.policy, s.ltar, opt(s.ltar2c), opt(s.acc), s.accepted, s.total)?;
    }
    Ok(())
}

/// `policy,wall_clock_s,per_vnr_us`. Kept apart from the other outputs so
/// those stay byte-identical across runs.
pub fn write_timing(reports: &[EvalReport], mut w: impl Write) -> std::io::Result<()> {
    writeln!(w, "policy,wall_clock_s,per_vnr_us")?;
    for r in reports {
        let n = r.outcome.records.len().max(1) as f64;
        let secs = r.wall_clock.as_secs_f64();
        writeln!(w, "{},{},{}", r.policy, secs, secs * 1e6 / n)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> ExperimentConfig {
        let mut cfg = ExperimentConfig::default();
        for kv in [
            "num_domains=2",
            "nodes_per_domain=6",
            "total_links=20",
            "vnr_count=80",
            "train_size=40",
            "test_size=40",
            "vnodes=2,4",
            "batch_size=5",
            "epochs=2",
        ] {
            cfg.apply_override(kv).unwrap();
        }
        cfg
    }

    #[test]
    fn train_is_deterministic() {
        let cfg = tiny();
        let (s, stream) = generate_workload(&cfg).unwrap();
        let sp = split(&cfg, &stream).unwrap();
        let a = train(&cfg, &s, &sp.train).unwrap();
        let b = train(&cfg, &s, &sp.train).unwrap();
        assert_eq!(a.checkpoint, b.checkpoint);
        assert_eq!(a.rounds, b.rounds);
        assert_eq!(a.epochs, b.epochs);
        assert_eq!(a.epochs.len(), 2);
    }

    #[test]
    fn compare_same_policy_twice_gives_identical_columns() {
        let cfg = tiny();
        let (s, stream) = generate_workload(&cfg).unwrap();
        let sp = split(&cfg, &stream).unwrap();
        let reports = compare(&cfg, &s, &sp, &[PolicyKind::NodeRank, PolicyKind::NodeRank], None).unwrap();
        assert_eq!(reports[0].series, reports[1].series);
        let mut buf = Vec::new();
        write_merged_series(&reports, Indicator::Acc, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        for line in text.lines().skip(1) {
            let cols: Vec<&str> = line.split(',').collect();
            assert_eq!(cols[1], cols[2]);
        }
    }

    #[test]
    fn empty_test_split_gives_empty_series() {
        let mut cfg = tiny();
        cfg.apply_override("test_size=0").unwrap();
        let (s, stream) = generate_workload(&cfg).unwrap();
        let sp = split(&cfg, &stream).unwrap();
        let r = compare(&cfg, &s, &sp, &[PolicyKind::Random], None).unwrap();
        assert!(r[0].series.is_empty());
        assert_eq!(r[0].summary.total, 0);
    }

    #[test]
    fn hfl_without_checkpoint_is_an_error() {
        let cfg = tiny();
        assert!(make_policy(PolicyKind::Hfl, &cfg, None, 2).is_err());
    }
}
