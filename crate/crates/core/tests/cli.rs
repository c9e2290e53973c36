use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use sha2::{Digest, Sha256};

const SMALL: &[&str] = &[
    "--set", "num_domains=2",
    "--set", "nodes_per_domain=6",
    "--set", "total_links=20",
    "--set", "vnr_count=60",
    "--set", "train_size=30",
    "--set", "test_size=30",
    "--set", "batch_size=5",
    "--set", "epochs=2",
    "--set", "sample_interval=20",
];

fn hflvne(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hflvne"))
        .env_remove("HFLVNE_CONFIG")
        .args(args)
        .output()
        .unwrap()
}

fn small(sub: &str, rest: &[&str]) -> Output {
    let mut args = vec![sub];
    args.extend_from_slice(SMALL);
    args.extend_from_slice(rest);
    hflvne(&args)
}

fn ok(out: &Output) -> String {
    assert!(
        out.status.success(),
        "status {:?}\nstdout:\n{}\nstderr:\n{}",
        out.status,
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn generate(dir: &Path) -> String {
    ok(&small("generate", &["--out", p(dir)]))
}

#[test]
fn generate_prints_matching_checksums() {
    let dir = tempfile::tempdir().unwrap();
    let stdout = generate(dir.path());
    let lines: Vec<&str> = stdout.lines().collect();
    assert_eq!(lines.len(), 2);
    for line in lines {
        let (hash, path) = line.split_once("  ").unwrap();
        let digest = hex::encode(Sha256::digest(fs::read(path).unwrap()));
        assert_eq!(hash, digest);
    }
    assert!(dir.path().join("config.txt").exists());
}

#[test]
fn generate_is_deterministic_per_seed() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let c = tempfile::tempdir().unwrap();
    generate(a.path());
    generate(b.path());
    ok(&small("generate", &["--set", "seed=2", "--out", p(c.path())]));
    for f in ["substrate.txt", "vnrs.txt"] {
        assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap());
    }
    assert_ne!(fs::read(a.path().join("vnrs.txt")).unwrap(), fs::read(c.path().join("vnrs.txt")).unwrap());
}

#[test]
fn written_config_reproduces_the_workload() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    generate(a.path());
    let cfg = a.path().join("config.txt");
    ok(&hflvne(&["generate", "--config", p(&cfg), "--out", p(b.path())]));
    assert_eq!(fs::read(a.path().join("vnrs.txt")).unwrap(), fs::read(b.path().join("vnrs.txt")).unwrap());
}

#[test]
fn empty_stream_is_allowed() {
    let dir = tempfile::tempdir().unwrap();
    ok(&small(
        "generate",
        &["--set", "vnr_count=0", "--set", "train_size=0", "--set", "test_size=0", "--out", p(dir.path())],
    ));
    assert!(dir.path().join("vnrs.txt").exists());
}

#[test]
fn inverted_range_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = small("generate", &["--set", "node_cpu=100,50", "--out", p(dir.path())]);
    assert_eq!(out.status.code(), Some(1));
    assert!(!String::from_utf8_lossy(&out.stderr).is_empty());
}

#[test]
fn unknown_key_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = small("generate", &["--set", "warp_factor=9", "--out", p(dir.path())]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn missing_input_is_a_runtime_error() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.txt");
    let out = small(
        "evaluate",
        &["--substrate", p(&missing), "--vnrs", p(&missing), "--policy", "random", "--out", p(dir.path())],
    );
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn train_evaluate_validate_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    generate(d);
    let (sp, vp) = (d.join("substrate.txt"), d.join("vnrs.txt"));

    let t1 = d.join("t1");
    let t2 = d.join("t2");
    ok(&small("train", &["--substrate", p(&sp), "--vnrs", p(&vp), "--out", p(&t1)]));
    ok(&small("train", &["--substrate", p(&sp), "--vnrs", p(&vp), "--out", p(&t2)]));
    for f in ["checkpoint.txt", "rounds.csv", "epochs.csv"] {
        assert_eq!(fs::read(t1.join(f)).unwrap(), fs::read(t2.join(f)).unwrap(), "{f} differs");
    }
    let rounds = fs::read_to_string(t1.join("rounds.csv")).unwrap();
    assert!(rounds.starts_with("round_id,global_loss,local_loss_0,local_loss_1,reward_mean_0,reward_mean_1"));

    let ck = t1.join("checkpoint.txt");
    let e1 = d.join("e1");
    let e2 = d.join("e2");
    let args = |out: &Path| {
        small(
            "evaluate",
            &["--substrate", p(&sp), "--vnrs", p(&vp), "--checkpoint", p(&ck), "--policy", "hfl", "--out", p(out)],
        )
    };
    let s1 = ok(&args(&e1));
    let s2 = ok(&args(&e2));
    assert_eq!(s1, s2);
    for f in ["series.csv", "decisions.csv"] {
        assert_eq!(fs::read(e1.join(f)).unwrap(), fs::read(e2.join(f)).unwrap(), "{f} differs");
    }

    let log = e1.join("decisions.csv");
    let report = ok(&small("validate", &["--substrate", p(&sp), "--vnrs", p(&vp), "--log", p(&log)]));
    assert!(report.contains("violations=0"), "{report}");
    assert!(report.contains("restored=true"), "{report}");
}

#[test]
fn validate_rejects_a_tampered_log() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    generate(d);
    let (sp, vp) = (d.join("substrate.txt"), d.join("vnrs.txt"));
    let e = d.join("e");
    ok(&small("evaluate", &["--substrate", p(&sp), "--vnrs", p(&vp), "--policy", "noderank", "--out", p(&e)]));
    let log = e.join("decisions.csv");
    let text = fs::read_to_string(&log).unwrap();
    let mut lines: Vec<String> = text.lines().map(str::to_owned).collect();
    let header: Vec<&str> = lines[0].split(',').collect();
    let col = header.iter().position(|h| *h == "accepted").unwrap();
    let row = (1..lines.len())
        .find(|&i| lines[i].split(',').nth(col) == Some("0"))
        .expect("a rejected request");
    let mut cells: Vec<String> = lines[row].split(',').map(str::to_owned).collect();
    cells[col] = "1".into();
    lines[row] = cells.join(",");
    fs::write(&log, lines.join("\n") + "\n").unwrap();
    let out = small("validate", &["--substrate", p(&sp), "--vnrs", p(&vp), "--log", p(&log)]);
    assert!(!out.status.success());
}

#[test]
fn compare_writes_tables() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    generate(d);
    let (sp, vp) = (d.join("substrate.txt"), d.join("vnrs.txt"));
    let c = d.join("c");
    let stdout = ok(&small(
        "compare",
        &["--substrate", p(&sp), "--vnrs", p(&vp), "--policies", "noderank,random", "--out", p(&c)],
    ));
    assert_eq!(stdout.lines().count(), 2);
    for f in ["ltar.csv", "ltar2c.csv", "acc.csv", "summary.csv", "timing.csv"] {
        assert!(c.join(f).exists(), "{f} missing");
    }
    let acc = fs::read_to_string(c.join("acc.csv")).unwrap();
    let header = acc.lines().next().unwrap();
    assert!(header.contains("noderank") && header.contains("random"), "{header}");
    assert!(!fs::read_to_string(c.join("summary.csv")).unwrap().contains("wall"));
}
