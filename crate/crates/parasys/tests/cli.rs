//! The `parasys` binary end to end: exit codes, output files and determinism.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use sha2::{Digest, Sha256};

fn config(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("configs").join(format!("{name}.toml"))
}

fn scratch(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("parasys-cli-{}-{tag}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    dir
}

fn run(args: &[&str], cfg: &Path, out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_parasys"))
        .args(args)
        .arg("--config")
        .arg(cfg)
        .arg("--out")
        .arg(out)
        .output()
        .unwrap()
}

fn hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn digests(dir: &Path) -> BTreeMap<String, String> {
    std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.file_name().unwrap() != "manifest.json")
        .map(|p| {
            let bytes = std::fs::read(&p).unwrap();
            (p.file_name().unwrap().to_string_lossy().into_owned(), hex(&bytes))
        })
        .collect()
}

#[test]
fn check_exit_codes() {
    let out = scratch("check");
    assert_eq!(run(&["check"], &config("power_law"), &out).status.code(), Some(0));
    let refuted = run(&["check"], &config("four_component_positive_row"), &out);
    assert_eq!(refuted.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&refuted.stderr);
    assert!(stderr.contains("row_sums_nonpositive") && stderr.contains("\"indices\":[3]"), "{stderr}");

    let empty = out.join("empty.toml");
    std::fs::create_dir_all(&out).unwrap();
    std::fs::write(&empty, "[model]\n").unwrap();
    assert_eq!(run(&["check"], &empty, &out).status.code(), Some(2));
    let typo = out.join("typo.toml");
    std::fs::write(&typo, std::fs::read_to_string(config("heat")).unwrap() + "\n[verify]\nps = [2]\n").unwrap();
    assert_eq!(run(&["check"], &typo, &out).status.code(), Some(2));
}

#[test]
fn solve_matches_the_tensor_oracle() {
    let out = scratch("solve");
    let o = run(&["solve"], &config("coupled_ou"), &out);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    // e^{tC} for C = [[-1, 1], [1/2, -1/2]]: eigenvalues 0 and -3/2
    let e = |t: f64| {
        let d = (-1.5 * t).exp();
        [[(1.0 + 2.0 * d) / 3.0, (2.0 - 2.0 * d) / 3.0], [(1.0 - d) / 3.0, (2.0 + d) / 3.0]]
    };
    let scalar = |t: f64, x: f64| {
        let (mean, var) = ((-t).exp() * x, 1.0 - (-2.0 * t).exp());
        let g = (1.0 / (1.0 + var)).sqrt() * (-mean * mean / (2.0 * (1.0 + var))).exp();
        [g, mean.sin() * (-var / 2.0).exp()]
    };
    let csv = std::fs::read_to_string(out.join("trajectory.csv")).unwrap();
    let (mut err, mut scale) = (0.0f64, 0.0f64);
    for line in csv.lines().skip(1) {
        let v: Vec<f64> = line.split(',').map(|s| s.parse().unwrap()).collect();
        let (t, k, x, u) = (v[0], v[1] as usize, v[2], v[3]);
        // final record, inner window of the L = 8 box
        if t != 1.0 || x.abs() > 7.2 {
            continue;
        }
        let (m, s) = (e(t), scalar(t, x));
        let want = m[k][0] * s[0] + m[k][1] * s[1];
        err = err.max((u - want).abs());
        scale = scale.max(want.abs());
    }
    assert!(err / scale <= 1e-3, "relative error {}", err / scale);
    assert!(out.join("exhaustion.json").exists());
}

#[test]
fn tightness_table_is_monotone() {
    let out = scratch("tight");
    assert_eq!(run(&["tightness"], &config("power_law"), &out).status.code(), Some(0));
    let csv = std::fs::read_to_string(out.join("tightness.csv")).unwrap();
    let mut by_key: BTreeMap<(String, String, String), Vec<(f64, f64)>> = BTreeMap::new();
    for line in csv.lines().skip(1) {
        let v: Vec<&str> = line.split(',').collect();
        by_key.entry((v[0].into(), v[2].into(), v[3].into())).or_default().push((v[1].parse().unwrap(), v[4].parse().unwrap()));
    }
    for rows in by_key.values_mut() {
        rows.sort_by(|a, b| a.0.total_cmp(&b.0));
        assert!(rows.windows(2).all(|w| w[1].1 <= w[0].1 + 1e-12));
    }
}

#[test]
fn verify_all_passes_on_shipped_configs() {
    for name in ["ou", "coupled_ou", "four_component", "power_law", "power_law_lp", "heat"] {
        let out = scratch(&format!("verify-{name}"));
        let o = run(&["verify", "all"], &config(name), &out);
        assert_eq!(o.status.code(), Some(0), "{name}: {}", String::from_utf8_lossy(&o.stdout));
        let lines = std::fs::read_to_string(out.join("verdicts.jsonl")).unwrap();
        for l in lines.lines() {
            let v: serde_json::Value = serde_json::from_str(l).unwrap();
            assert_eq!(v["pass"], serde_json::Value::Bool(true), "{name}: {l}");
        }
    }
}

#[test]
fn explicit_check_without_certificate_fails() {
    let out = scratch("missing");
    let o = run(&["verify", "lyapunov_bound"], &config("heat"), &out);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("lyapunov_dissipative"));
    assert_eq!(run(&["verify", "nonsense"], &config("heat"), &out).status.code(), Some(2));
}

#[test]
fn measures_converge_and_write_outputs() {
    let out = scratch("measures");
    let o = run(&["measures"], &config("ou_measure"), &out);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let j: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("measures.json")).unwrap()).unwrap();
    assert_eq!(j["converged"], serde_json::Value::Bool(true));
    assert_eq!(j["residuals"].as_array().unwrap().len(), 10);
}

#[test]
fn runs_are_deterministic_across_worker_counts() {
    for (cmd, name) in [("solve", "coupled_ou"), ("kernels", "coupled_ou"), ("measures", "coupled_ou"), ("verify", "power_law")] {
        let (a, b) = (scratch(&format!("det-a-{cmd}")), scratch(&format!("det-b-{cmd}")));
        let mut args_a = vec![cmd, "--jobs", "1"];
        let mut args_b = vec![cmd, "--jobs", "4"];
        if cmd == "verify" {
            args_a.insert(1, "all");
            args_b.insert(1, "all");
        }
        run(&args_a, &config(name), &a);
        run(&args_b, &config(name), &b);
        let (da, db) = (digests(&a), digests(&b));
        assert!(!da.is_empty());
        assert_eq!(da, db, "{cmd} on {name}");
    }
}

#[test]
fn manifest_lists_every_output_once() {
    let out = scratch("manifest");
    assert_eq!(run(&["kernels"], &config("coupled_ou"), &out).status.code(), Some(0));
    let m: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    let mut listed: Vec<String> = m["outputs"].as_array().unwrap().iter().map(|v| v.as_str().unwrap().to_string()).collect();
    let mut on_disk: Vec<String> =
        std::fs::read_dir(&out).unwrap().map(|e| e.unwrap().file_name().to_string_lossy().into_owned()).collect();
    listed.sort();
    on_disk.sort();
    assert_eq!(listed, on_disk);
    let text = std::fs::read_to_string(config("coupled_ou")).unwrap();
    assert_eq!(m["config_hash"].as_str().unwrap(), hex(text.as_bytes()));
}
