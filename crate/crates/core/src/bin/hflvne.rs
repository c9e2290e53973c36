use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use sha2::{Digest, Sha256};

use hflvne::agent::{read_checkpoint, write_checkpoint};
use hflvne::config::{ConfigError, ExperimentConfig, PolicyKind};
use hflvne::engine::{read_decision_log, replay, validate_records, write_decision_log};
use hflvne::experiment::{self, Indicator};
use hflvne::federation::write_round_log;
use hflvne::metrics::{acc_from_indicators, write_series, Summary};
use hflvne::workload::{load_substrate, load_vnrs, save_substrate, save_vnrs, Split};
use hflvne::{Error, Result};

#[derive(Parser, Debug)]
#[command(name = "hflvne", version, about = "Multi-domain VNE simulator with federated policy training")]
struct Cli {
    /// Flat key=value config file.
    #[arg(long, global = true, env = "HFLVNE_CONFIG")]
    config: Option<PathBuf>,
    /// Override one config key, e.g. `--set seed=7`. Repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a substrate file and a VNR stream file.
    Generate {
        #[arg(long)]
        out: PathBuf,
    },
    /// Federated training on the training split.
    Train {
        #[arg(long)]
        substrate: PathBuf,
        #[arg(long)]
        vnrs: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a frozen policy on the test split.
    Evaluate {
        #[arg(long)]
        substrate: PathBuf,
        #[arg(long)]
        vnrs: PathBuf,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        policy: Option<PolicyKind>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run several policies on the same test split.
    Compare {
        #[arg(long)]
        substrate: PathBuf,
        #[arg(long)]
        vnrs: PathBuf,
        /// Checkpoint for `hfl`; trained from the config when absent.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long, value_delimiter = ',', default_value = "hfl,noderank,random")]
        policies: Vec<PolicyKind>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Re-check every capacity and mapping constraint of a decision log.
    Validate {
        #[arg(long)]
        substrate: PathBuf,
        #[arg(long)]
        vnrs: PathBuf,
        #[arg(long)]
        log: PathBuf,
    },
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig, ConfigError> {
    let mut cfg = match &cli.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    for o in &cli.overrides {
        cfg.apply_override(o)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    let f = File::create(path).map_err(|e| Error::Io {
        context: path.display().to_string(),
        source: e,
    })?;
    Ok(BufWriter::new(f))
}

fn io<T>(path: &Path, r: std::io::Result<T>) -> Result<T> {
    r.map_err(|e| Error::Io {
        context: path.display().to_string(),
        source: e,
    })
}

fn make_dir(dir: &Path) -> Result<()> {
    io(dir, fs::create_dir_all(dir))
}

fn sha256_file(path: &Path) -> Result<String> {
    let bytes = io(path, fs::read(path))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

fn load_split(cfg: &ExperimentConfig, substrate: &Path, vnrs: &Path) -> Result<(hflvne::MultiDomainSubstrate, Split)> {
    let s = load_substrate(substrate)?;
    let stream = load_vnrs(vnrs)?;
    let split = experiment::split(cfg, &stream)?;
    Ok((s, split))
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "undefined".to_string(), |x| format!("{x:.6}"))
}

fn summary_line(policy: &str, s: &Summary) -> String {
    format!(
        "policy={policy} ltar={:.6} ltar2c={} acc={} accepted={}/{}",
        s.ltar,
        fmt_opt(s.ltar2c),
        fmt_opt(s.acc),
        s.accepted,
        s.total
    )
}

fn run(cli: &Cli, cfg: &ExperimentConfig) -> Result<()> {
    match &cli.command {
        Command::Generate { out } => {
            make_dir(out)?;
            let (s, stream) = experiment::generate_workload(cfg)?;
            let sp = out.join("substrate.txt");
            let vp = out.join("vnrs.txt");
            save_substrate(&s, &sp)?;
            save_vnrs(&stream, &vp)?;
            io(out, fs::write(out.join("config.txt"), cfg.to_text()))?;
            for p in [&sp, &vp] {
                println!("{}  {}", sha256_file(p)?, p.display());
            }
        }
        Command::Train { substrate, vnrs, out } => {
            make_dir(out)?;
            let (s, split) = load_split(cfg, substrate, vnrs)?;
            let report = experiment::train(cfg, &s, &split.train)?;
            let ck = out.join("checkpoint.txt");
            let mut w = create(&ck)?;
            io(&ck, write_checkpoint(&report.checkpoint, &mut w).and_then(|_| w.flush()))?;
            let rl = out.join("rounds.csv");
            write_round_log(&report.rounds, s.num_domains(), create(&rl)?)?;
            let el = out.join("epochs.csv");
            let mut w = create(&el)?;
            io(&el, experiment::write_epoch_log(&report.epochs, &mut w).and_then(|_| w.flush()))?;
            println!(
                "epochs={} rounds={} local_steps={}",
                report.epochs.len(),
                report.rounds.len(),
                report.local_steps
            );
            if let Some(last) = report.epochs.last() {
                println!("{}", summary_line("hfl-train-last-epoch", &last.summary));
            }
        }
        Command::Evaluate {
            substrate,
            vnrs,
            checkpoint,
            policy,
            out,
        } => {
            make_dir(out)?;
            let (s, split) = load_split(cfg, substrate, vnrs)?;
            let kind = policy.unwrap_or(cfg.policy);
            let ckpt = match checkpoint {
                Some(p) => Some(read_checkpoint(io(p, File::open(p))?)?),
                None => None,
            };
            let mut provider = experiment::make_policy(kind, cfg, ckpt.as_ref(), s.num_domains())?;
            let report = experiment::evaluate(cfg, &s, &split.test, split.test_origin, provider.as_mut());
            let series = out.join("series.csv");
            let mut w = create(&series)?;
            io(&series, write_series(&report.series, &mut w).and_then(|_| w.flush()))?;
            write_decision_log(&report.outcome.records, create(&out.join("decisions.csv"))?)?;
            println!("{}", summary_line(&kind.to_string(), &report.summary));
        }
        Command::Compare {
            substrate,
            vnrs,
            checkpoint,
            policies,
            out,
        } => {
            make_dir(out)?;
            let (s, split) = load_split(cfg, substrate, vnrs)?;
            let ckpt = match checkpoint {
                Some(p) => Some(read_checkpoint(io(p, File::open(p))?)?),
                None if policies.contains(&PolicyKind::Hfl) => {
                    Some(experiment::train(cfg, &s, &split.train)?.checkpoint)
                }
                None => None,
            };
            let reports = experiment::compare(cfg, &s, &split, policies, ckpt.as_ref())?;
            for ind in Indicator::ALL {
                let p = out.join(format!("{}.csv", ind.name()));
                let mut w = create(&p)?;
                io(&p, experiment::write_merged_series(&reports, ind, &mut w).and_then(|_| w.flush()))?;
            }
            let p = out.join("summary.csv");
            let mut w = create(&p)?;
            io(&p, experiment::write_summary_table(&reports, &mut w).and_then(|_| w.flush()))?;
            let p = out.join("timing.csv");
            let mut w = create(&p)?;
            io(&p, experiment::write_timing(&reports, &mut w).and_then(|_| w.flush()))?;
            for r in &reports {
                println!("{}", summary_line(&r.policy, &r.summary));
            }
        }
        Command::Validate { substrate, vnrs, log } => {
            let s = load_substrate(substrate)?;
            let stream = load_vnrs(vnrs)?;
            let records = read_decision_log(io(log, File::open(log))?, &stream)?;
            let report = validate_records(&s, &stream, &records);
            let (_, after) = replay(&s, &stream, &records);
            let restored = after.bit_identical(&s.pristine().resource_vector());
            let flags = records.iter().filter(|r| r.accepted).count() as f64 / records.len().max(1) as f64;
            let indicators = acc_from_indicators(&records).unwrap_or(0.0);
            println!(
                "records={} violations={} restored={} acc_flags={} acc_indicators={}",
                report.records_checked,
                report.violations.len(),
                restored,
                flags,
                indicators
            );
            for v in &report.violations {
                println!("vnr {} {}: {}", v.vnr_id, v.constraint, v.detail);
            }
            if !report.is_clean() || !restored || flags != indicators {
                return Err(Error::Invalid("decision log failed validation".into()));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let cfg = match load_config(&cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    match run(&cli, &cfg) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_config_error() { 1 } else { 2 })
        }
    }
}
