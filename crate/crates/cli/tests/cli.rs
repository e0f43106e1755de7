use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn seqbo(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_seqbo"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("run seqbo")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const WT_HEAVY: &str = "EVQLVESGGG";
const WT_LIGHT: &str = "DIQMTQSPSS";

/// 50 single mutants of a toy wild type with made-up values.
fn write_pool(dir: &Path) -> PathBuf {
    let residues = b"ACDEFGHIKLMNPQRSTVWY";
    let mut rows = vec!["heavy_chain,light_chain,ddg".to_string()];
    let mut k = 0usize;
    'outer: for pos in 0..WT_HEAVY.len() {
        for &r in residues {
            if rows.len() == 51 {
                break 'outer;
            }
            let mut heavy = WT_HEAVY.as_bytes().to_vec();
            if heavy[pos] == r {
                continue;
            }
            heavy[pos] = r;
            k += 1;
            let value = ((k * 37) % 101) as f64 / 10.0 - 5.0;
            rows.push(format!("{},{WT_LIGHT},{value}", String::from_utf8(heavy).unwrap()));
        }
    }
    let path = dir.join("pool.csv");
    fs::write(&path, rows.join("\n") + "\n").unwrap();
    path
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path
}

fn validation_config(dir: &Path) -> PathBuf {
    write(dir, "validate.toml", "mode = \"validation\"\niterations = 10\ntrials = 2\ninit_fraction = 0.1\nmaster_seed = 3\n")
}

fn full_config(dir: &Path) -> PathBuf {
    write(
        dir,
        "full.toml",
        "mode = \"full\"\niterations = 5\ntrials = 1\nmaster_seed = 4\n\n[ga]\npopulation_size = 32\ngenerations = 10\noffspring = 16\n",
    )
}

fn synthetic_oracle(dir: &Path) -> PathBuf {
    write(
        dir,
        "oracle.toml",
        &format!(
            "[wild_type]\nheavy = \"{WT_HEAVY}\"\nlight = \"{WT_LIGHT}\"\nmask = [1, 4, 13, 16]\n\n[synthetic]\ntarget_heavy = \"EWQLYESGGG\"\ntarget_light = \"DIHMTYSPSS\"\npairs = [[1, 4]]\n"
        ),
    )
}

fn lines(path: &Path) -> Vec<serde_json::Value> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

fn loop_lines(records: &[serde_json::Value]) -> usize {
    records.iter().filter(|r| r["phase"] == "loop").count()
}

#[test]
fn validate_writes_expected_records_and_is_reproducible() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path();
    let pool = write_pool(dir);
    let cfg = validation_config(dir);
    for out in ["a", "b"] {
        let o = seqbo(
            &["validate", cfg.to_str().unwrap(), "--pool", pool.to_str().unwrap(), "--out", out],
            dir,
        );
        assert!(o.status.success(), "{}", stderr(&o));
    }
    let records = lines(&dir.join("a/records.jsonl"));
    assert_eq!(loop_lines(&records), 20);
    for f in ["records.jsonl", "records/trial-000.jsonl", "records/trial-001.jsonl", "summary.csv", "curves.csv"] {
        assert_eq!(fs::read(dir.join("a").join(f)).unwrap(), fs::read(dir.join("b").join(f)).unwrap(), "{f}");
    }
    assert!(dir.join("a/timings.jsonl").exists());
}

#[test]
fn missing_pool_names_the_path() {
    let tmp = TempDir::new().unwrap();
    let cfg = validation_config(tmp.path());
    let o = seqbo(
        &["validate", cfg.to_str().unwrap(), "--pool", "no-such-pool.csv", "--out", "out"],
        tmp.path(),
    );
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("no-such-pool.csv"), "{}", stderr(&o));
}

#[test]
fn full_with_synthetic_oracle() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path();
    let cfg = full_config(dir);
    let oracle = synthetic_oracle(dir);
    let o = seqbo(&["full", cfg.to_str().unwrap(), "--oracle", oracle.to_str().unwrap(), "--out", "out"], dir);
    assert!(o.status.success(), "{}", stderr(&o));
    let records = lines(&dir.join("out/records.jsonl"));
    assert_eq!(records.len(), 12 + 5);
    assert_eq!(loop_lines(&records), 5);

    // The oracle subcommand reproduces the recorded values.
    let seq = records[13]["sequence"].as_str().unwrap();
    let o = seqbo(&["oracle-eval", "--oracle", oracle.to_str().unwrap(), seq], dir);
    assert!(o.status.success(), "{}", stderr(&o));
    let stdout = String::from_utf8(o.stdout).unwrap();
    let value: f64 = stdout.trim().split('\t').nth(1).unwrap().parse().unwrap();
    assert_eq!(value, records[13]["value"].as_f64().unwrap());
}

#[test]
fn external_stub_values_pass_through() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path();
    let cfg = full_config(dir);
    let oracle = write(
        dir,
        "stub.toml",
        &format!(
            "[wild_type]\nheavy = \"{WT_HEAVY}\"\nlight = \"{WT_LIGHT}\"\nmask = [1, 4, 13, 16]\n\n[external]\ncommand = \"cat > /dev/null; echo -1.25\"\ntimeout_s = 10\n"
        ),
    );
    let o = seqbo(&["full", cfg.to_str().unwrap(), "--oracle", oracle.to_str().unwrap(), "--out", "out"], dir);
    assert!(o.status.success(), "{}", stderr(&o));
    let records = lines(&dir.join("out/records.jsonl"));
    assert_eq!(records.len(), 17);
    assert!(records.iter().all(|r| r["value"].as_f64() == Some(-1.25)));
}

#[test]
fn invalid_override_fails_before_running() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path();
    let cfg = full_config(dir);
    let oracle = synthetic_oracle(dir);
    let o = seqbo(
        &["full", cfg.to_str().unwrap(), "--oracle", oracle.to_str().unwrap(), "--out", "out", "--set", "no_such_knob=3"],
        dir,
    );
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("no_such_knob"), "{}", stderr(&o));
    assert!(!dir.join("out").exists());
}

#[test]
fn unknown_flag_is_a_usage_error() {
    let tmp = TempDir::new().unwrap();
    let o = seqbo(&["validate", "--frobnicate"], tmp.path());
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn curves_aggregate_and_reject_empty_input() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path();
    let rec = |trial: usize, it: usize, phase: &str, value: f64, best: f64| {
        let (acq, size) = if phase == "loop" { ("0.1", format!("{}", it)) } else { ("null", "null".into()) };
        format!(
            "{{\"trial\":{trial},\"iteration\":{it},\"phase\":\"{phase}\",\"sequence\":\"s{trial}-{it}\",\"value\":{value},\"best_so_far\":{best},\"acquisition\":{acq},\"train_size\":{size}}}"
        )
    };
    // Three trials of one init record and two loop iterations each.
    let bests = [[3.0, 2.0, 1.0], [4.0, 4.0, 0.0], [2.0, 2.0, 2.0]];
    let mut text = String::new();
    for (t, b) in bests.iter().enumerate() {
        text += &rec(t, 0, "init", b[0], b[0]);
        text.push('\n');
        for (it, &v) in b.iter().enumerate().skip(1) {
            text += &rec(t, it, "loop", v, v);
            text.push('\n');
        }
    }
    let records = write(dir, "records.jsonl", &text);
    let o = seqbo(&["curves", records.to_str().unwrap(), "--out", "curves.csv", "--plot", "curves.svg"], dir);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = fs::read_to_string(dir.join("curves.csv")).unwrap();
    let rows: Vec<Vec<f64>> = csv
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(|x| x.parse().unwrap()).collect())
        .collect();
    for (it, row) in rows.iter().enumerate() {
        let col: Vec<f64> = bests.iter().map(|b| b[it]).collect();
        let mean = col.iter().sum::<f64>() / 3.0;
        assert_eq!(row[0], it as f64);
        assert!((row[1] - mean).abs() < 1e-12);
        assert_eq!(row[2], col.iter().cloned().fold(f64::INFINITY, f64::min));
        assert_eq!(row[3], col.iter().cloned().fold(f64::NEG_INFINITY, f64::max));
    }
    assert!(fs::read_to_string(dir.join("curves.svg")).unwrap().contains("<svg"));

    let empty = write(dir, "empty.jsonl", "");
    let o = seqbo(&["curves", empty.to_str().unwrap(), "--out", "e.csv"], dir);
    assert_ne!(o.status.code(), Some(0));
}

#[test]
fn encode_prints_one_hot_dimension() {
    let tmp = TempDir::new().unwrap();
    let joined = format!("{WT_HEAVY}|{WT_LIGHT}");
    let o = seqbo(&["encode", &joined], tmp.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["dimension"], 21 * 21);
    assert_eq!(v["values"].as_array().unwrap().iter().filter(|x| x.as_f64() == Some(1.0)).count(), 21);
}
