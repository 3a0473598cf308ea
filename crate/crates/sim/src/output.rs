//! CSV and text outputs. Files are written to a temporary sibling and renamed
//! into place so a crashed run never leaves a truncated table.

use std::fmt::Write as _;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use pon_timing_core::metrics::wrap_symbols;
use pon_timing_core::rxdsp::RecoveryMode;

use crate::config::Preset;
use crate::runner::{Outcome, RunRow};

pub const TRACE_FILE: &str = "trace.csv";
pub const SUMMARY_FILE: &str = "summary.csv";
pub const REPORT_FILE: &str = "report.txt";

const TRACE_HEADER: [&str; 9] = [
    "config_hash",
    "baud_per_sc",
    "n_sc",
    "distance_km",
    "mode",
    "block",
    "raw_error_symbols",
    "est_phase_symbols",
    "true_phase_symbols",
];
const SUMMARY_HEADER: [&str; 10] = [
    "config_hash",
    "baud_per_sc",
    "n_sc",
    "distance_km",
    "mode",
    "variance_symbols_sq",
    "convergence_blocks",
    "evm_db",
    "mults_sparse",
    "mults_full",
];

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn gbd(row: &RunRow) -> String {
    (row.plan.baud_per_sc_hz / 1e9).to_string()
}

pub fn trace_csv(outcome: &Outcome) -> io::Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(TRACE_HEADER)?;
    for row in &outcome.rows {
        let r = &row.report;
        let (baud, n_sc, dist) = (gbd(row), row.plan.n_subcarriers.to_string(), r.distance_km.to_string());
        for (b, e) in r.trace.entries.iter().enumerate() {
            w.write_record([
                outcome.hash.as_str(),
                &baud,
                &n_sc,
                &dist,
                r.mode.as_str(),
                &b.to_string(),
                &e.raw_error_symbols.to_string(),
                &e.est_phase_symbols.to_string(),
                &e.true_phase_symbols.to_string(),
            ])?;
        }
    }
    w.into_inner().map_err(|e| e.into_error())
}

pub fn summary_csv(outcome: &Outcome) -> io::Result<Vec<u8>> {
    let c = &outcome.complexity;
    let (sparse, full) = (c.proposed_total().to_string(), c.full_total().to_string());
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(SUMMARY_HEADER)?;
    for row in &outcome.rows {
        let r = &row.report;
        w.write_record([
            outcome.hash.as_str(),
            &gbd(row),
            &row.plan.n_subcarriers.to_string(),
            &r.distance_km.to_string(),
            r.mode.as_str(),
            &opt(r.variance_symbols_sq),
            &opt(r.convergence_blocks),
            &opt(r.evm_db),
            &sparse,
            &full,
        ])?;
    }
    w.into_inner().map_err(|e| e.into_error())
}

fn plan_label(row: &RunRow) -> String {
    format!("{} x {} GBd", row.plan.n_subcarriers, row.plan.baud_per_sc_hz / 1e9)
}

fn fmt_opt_f(v: Option<f64>, prec: usize) -> String {
    match v {
        Some(x) => format!("{x:.prec$e}"),
        None => "-".into(),
    }
}

pub fn report_text(outcome: &Outcome) -> String {
    let cfg = &outcome.config;
    let mut s = String::new();
    let _ = writeln!(s, "pon-timing-sim report");
    let _ = writeln!(
        s,
        "preset {}  config_hash {}  seed {}",
        cfg.preset, outcome.hash, cfg.seed
    );
    let _ = writeln!(s);
    let _ = writeln!(s, "== complexity ==");
    s.push_str(&outcome.complexity.to_text());
    let _ = writeln!(s);
    let _ = writeln!(s, "measured per block (first run of each mode):");
    for mode in RecoveryMode::ALL {
        if let Some(row) = outcome.rows.iter().find(|r| r.report.mode == mode) {
            let o = &row.report.ops_per_block;
            let _ = writeln!(
                s,
                "  {:<10} sparse {:>6}  fft {:>5}  cd {:>5}  ifft {:>5}  reextract {:>6}  corr {:>3}  total {:>6}",
                mode.as_str(),
                o.sparse_dft,
                o.forward_fft,
                o.cd_multiply,
                o.inverse_fft,
                o.reextract,
                o.correlation,
                o.total()
            );
        }
    }
    let _ = writeln!(s);
    match cfg.preset {
        Preset::Fig2 | Preset::Custom => variance_tables(&mut s, outcome),
        Preset::Fig3 => step_tables(&mut s, outcome),
        Preset::Slots => slot_tables(&mut s, outcome),
    }
    let _ = writeln!(s);
    let _ = writeln!(s, "== faults ==");
    if outcome.faults.is_empty() {
        let _ = writeln!(s, "none");
    }
    for f in &outcome.faults {
        let _ = writeln!(s, "{f}");
    }
    let _ = writeln!(s);
    let _ = writeln!(s, "== resolved configuration ==");
    s.push_str(&cfg.to_toml());
    s
}

fn each_plan(outcome: &Outcome) -> Vec<(usize, &RunRow)> {
    let mut seen = Vec::new();
    for row in &outcome.rows {
        if !seen.iter().any(|(i, _)| *i == row.config_index) {
            seen.push((row.config_index, row));
        }
    }
    seen
}

fn variance_tables(s: &mut String, outcome: &Outcome) {
    let cfg = &outcome.config;
    let _ = writeln!(s, "== timing-error variance (symbols^2) vs distance ==");
    if let Some(first) = cfg.distances_km.first() {
        let _ = writeln!(s, "ratio column: variance relative to the same mode at {first} km");
    }
    for (ci, first) in each_plan(outcome) {
        let _ = writeln!(s, "{}", plan_label(first));
        let _ = write!(s, "{:>12}", "km");
        for m in &cfg.modes {
            let _ = write!(s, "{:>14}{:>9}", m.as_str(), "ratio");
        }
        let _ = writeln!(s);
        for &d in &cfg.distances_km {
            let _ = write!(s, "{d:>12}");
            for &m in &cfg.modes {
                let v = outcome.find(ci, d, m).and_then(|r| r.variance_symbols_sq);
                let base = outcome
                    .find(ci, cfg.distances_km[0], m)
                    .and_then(|r| r.variance_symbols_sq);
                let ratio = match (v, base) {
                    (Some(v), Some(b)) if b > 0.0 => format!("{:.2}", v / b),
                    _ => "-".into(),
                };
                let _ = write!(s, "{:>14}{ratio:>9}", fmt_opt_f(v, 3));
            }
            let _ = writeln!(s);
        }
    }
}

fn step_tables(s: &mut String, outcome: &Outcome) {
    let cfg = &outcome.config;
    let _ = writeln!(
        s,
        "== phase tracking after a {} symbol step (tolerance {} symbols) ==",
        cfg.timing.step_offset_symbols, cfg.convergence_tol_symbols
    );
    let _ = writeln!(
        s,
        "{:<16}{:>8}{:>11}{:>14}{:>16}{:>10}",
        "config", "km", "mode", "conv_blocks", "final |err|", "evm_db"
    );
    for row in &outcome.rows {
        let r = &row.report;
        let last = r.trace.entries.last();
        let err = last.map(|e| wrap_symbols(e.est_phase_symbols - e.true_phase_symbols).abs());
        let _ = writeln!(
            s,
            "{:<16}{:>8}{:>11}{:>14}{:>16}{:>10}",
            plan_label(row),
            r.distance_km,
            r.mode.as_str(),
            r.convergence_blocks.map_or("never".into(), |c| c.to_string()),
            fmt_opt_f(err, 2),
            r.evm_db.map_or("-".into(), |e| format!("{e:.1}")),
        );
    }
}

fn slot_tables(s: &mut String, outcome: &Outcome) {
    let sl = &outcome.config.slots;
    let _ = writeln!(
        s,
        "== reconvergence entering the probe slot (probe {} km, foreign slot pre-compensated for {} km) ==",
        sl.probe_distance_km, sl.foreign_distance_km
    );
    let _ = writeln!(
        s,
        "{:<16}{:>11}{:>16}{:>14}{:>10}",
        "config", "mode", "reconv_blocks", "variance", "evm_db"
    );
    for row in &outcome.rows {
        let r = &row.report;
        let _ = writeln!(
            s,
            "{:<16}{:>11}{:>16}{:>14}{:>10}",
            plan_label(row),
            r.mode.as_str(),
            r.convergence_blocks.map_or("never".into(), |c| c.to_string()),
            fmt_opt_f(r.variance_symbols_sq, 3),
            r.evm_db.map_or("-".into(), |e| format!("{e:.1}")),
        );
    }
}

/// Writes `bytes` to `dir/name` through a temporary file and rename.
pub fn write_atomic(dir: &Path, name: &str, bytes: &[u8]) -> io::Result<PathBuf> {
    let target = dir.join(name);
    let tmp = dir.join(format!(".{name}.tmp"));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, &target)?;
    Ok(target)
}

/// Writes all three outputs into the configured directory.
pub fn write_all(outcome: &Outcome) -> io::Result<Vec<PathBuf>> {
    let dir = &outcome.config.output_dir;
    fs::create_dir_all(dir)?;
    Ok(vec![
        write_atomic(dir, TRACE_FILE, &trace_csv(outcome)?)?,
        write_atomic(dir, SUMMARY_FILE, &summary_csv(outcome)?)?,
        write_atomic(dir, REPORT_FILE, report_text(outcome).as_bytes())?,
    ])
}
