use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn dunkl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dunkl"))
        .args(args)
        .env_remove("DUNKL_THREADS")
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, body: &str) -> String {
    let p = dir.join("exp.toml");
    fs::write(&p, body).unwrap();
    p.to_string_lossy().into_owned()
}

const SMALL: &str = "[grid]\nradius = 8.0\nnodes = 128\n[transform]\nk_sweep = [0.0, 1.0, 2.0]\n[cz]\ncount = 4\n";

#[test]
fn malformed_config_exits_two_with_location() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[grid]\nradius = 8.0\nnodez = 64\n");
    let out = dunkl(&["cz-demo", "--config", &cfg, "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 3") && err.contains("nodez"), "{err}");
}

#[test]
fn out_of_range_value_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[lp]\nflavor = \"square\"\n");
    let out = dunkl(&["lp-sweep", "--config", &cfg, "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("lp.flavor"));
}

#[test]
fn failed_class_check_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "[grid]\nradius = 8.0\nnodes = 128\n[weights]\nw = [\"power:10\", \"power:10\"]\npairs = 2\n",
    );
    let out = dunkl(&["weighted-probe", "--config", &cfg, "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn invariant_breach_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[grid]\nradius = 12.0\nnodes = 16\n");
    let out = dunkl(&["transform-selftest", "--config", &cfg, "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn csv_is_deterministic_and_carries_metadata() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let cfg = write_config(a.path(), SMALL);
    for d in [&a, &b] {
        let out = dunkl(&["cz-demo", "--config", &cfg, "--seed", "9", "--threads", "1", "--out", d.path().to_str().unwrap()]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let x = fs::read_to_string(a.path().join("cz_summary.csv")).unwrap();
    let y = fs::read_to_string(b.path().join("cz_summary.csv")).unwrap();
    assert_eq!(x, y);
    let lines: Vec<&str> = x.lines().collect();
    assert!(lines[0].starts_with("index,lambda,pieces"));
    assert!(lines[lines.len() - 2].starts_with("# config_hash="));
    assert_eq!(lines[lines.len() - 1], format!("# version={}", env!("CARGO_PKG_VERSION")));
}

#[test]
fn seed_changes_the_config_hash() {
    let a = tempfile::tempdir().unwrap();
    let cfg = write_config(a.path(), SMALL);
    let mut hashes = Vec::new();
    for seed in ["1", "2"] {
        dunkl(&["cz-demo", "--config", &cfg, "--seed", seed, "--out", a.path().to_str().unwrap()]);
        let text = fs::read_to_string(a.path().join("cz_summary.csv")).unwrap();
        hashes.push(text.lines().find(|l| l.starts_with("# config_hash=")).unwrap().to_string());
    }
    assert_ne!(hashes[0], hashes[1]);
}

#[test]
fn small_subcommands_write_their_tables() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out_dir = dir.path().to_str().unwrap();
    for (cmd, file, header) in [
        ("transform-selftest", "transform_selftest.csv", "k,plancherel_defect"),
        ("maximal-multiplier", "maximal_multiplier.csv", "x1,re,im"),
        ("weights-check", "weights_check.csv", "quantity,value"),
        ("weighted-probe", "weighted_probe.csv", ""),
    ] {
        let out = dunkl(&[cmd, "--config", &cfg, "--out", out_dir]);
        assert!(out.status.success(), "{cmd}: {}", String::from_utf8_lossy(&out.stderr));
        let text = fs::read_to_string(dir.path().join(file)).unwrap();
        assert!(text.starts_with(header), "{cmd}");
        assert!(text.contains("# config_hash="));
    }
}
