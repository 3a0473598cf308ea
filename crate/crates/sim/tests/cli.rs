//! Command-line behavior: exit codes, outputs and overrides.

use std::fs;
use std::path::Path;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_pon-timing-sim"))
}

fn write(dir: &Path, name: &str, text: &str) -> std::path::PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

#[test]
fn slots_run_writes_all_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "slots.toml",
        "preset = \"slots\"\n[slots]\nown_slot_symbols = 45056\nforeign_slot_symbols = 4096\n",
    );
    let out = dir.path().join("out");
    let status = bin().arg("--config").arg(&cfg).arg("--out").arg(&out).status().unwrap();
    assert_eq!(status.code(), Some(0));
    let summary = fs::read_to_string(out.join("summary.csv")).unwrap();
    let mut lines = summary.lines();
    assert_eq!(
        lines.next().unwrap(),
        "config_hash,baud_per_sc,n_sc,distance_km,mode,variance_symbols_sq,convergence_blocks,evm_db,mults_sparse,mults_full"
    );
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 2);
    assert!(rows.iter().all(|r| r.ends_with(",1554,2566")));
    let trace = fs::read_to_string(out.join("trace.csv")).unwrap();
    assert!(trace.starts_with(
        "config_hash,baud_per_sc,n_sc,distance_km,mode,block,raw_error_symbols,est_phase_symbols,true_phase_symbols\n"
    ));
    let report = fs::read_to_string(out.join("report.txt")).unwrap();
    assert!(report.contains("reconvergence entering the probe slot"));
    assert!(report.contains("total                               1554        2566"));
    // no temporary files left behind
    let names: Vec<String> = fs::read_dir(&out)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    assert_eq!(names.len(), 3, "{names:?}");
}

#[test]
fn seed_override_changes_hash_and_reruns_match() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "c.toml",
        "preset = \"custom\"\nn_symbols = 45056\ndistances_km = [80.0]\nmodes = [\"proposed\"]\n[[configs]]\nn_subcarriers = 1\nbaud_per_sc_gbd = 64\n",
    );
    let run = |seed: &str, out: &str| {
        let out = dir.path().join(out);
        let st = bin()
            .arg("--config")
            .arg(&cfg)
            .arg("--seed")
            .arg(seed)
            .arg("--out")
            .arg(&out)
            .status()
            .unwrap();
        assert_eq!(st.code(), Some(0));
        fs::read(out.join("summary.csv")).unwrap()
    };
    let a = run("5", "a");
    let b = run("5", "b");
    let c = run("6", "c");
    assert_eq!(a, b);
    assert_ne!(a[..200], c[..200]);
}

#[test]
fn config_errors_exit_1_and_name_fields() {
    let dir = tempfile::tempdir().unwrap();
    let empty = write(dir.path(), "empty.toml", "");
    let o = bin().arg("--config").arg(&empty).output().unwrap();
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("preset: required"));

    let bad = write(
        dir.path(),
        "bad.toml",
        "preset = \"fig2\"\ndistances_km = [-1.0]\nwhat = 2\n",
    );
    let o = bin().arg("--config").arg(&bad).output().unwrap();
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("distances_km[0]"), "{err}");
    assert!(err.contains("what: unknown key"), "{err}");

    let o = bin()
        .arg("--config")
        .arg(dir.path().join("missing.toml"))
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1));

    let o = bin()
        .arg("--config")
        .arg(&empty)
        .arg("--preset")
        .arg("fig9")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn unwritable_output_is_a_runtime_fault() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "c.toml",
        "preset = \"custom\"\nn_symbols = 45056\ndistances_km = [0.0]\nmodes = [\"no_comp\"]\n[[configs]]\nn_subcarriers = 1\nbaud_per_sc_gbd = 64\n",
    );
    let blocker = write(dir.path(), "file", "x");
    let o = bin()
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(blocker.join("sub"))
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
}
