//! TOML experiment configuration with preset defaults.
//!
//! Parsing is two-pass: unknown keys are collected over the whole document
//! first, then typed fields are resolved and validated. Every problem found is
//! reported at once, each prefixed with its dotted field path.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use pon_timing_core::channel::FiberSpec;
use pon_timing_core::rxdsp::{RecoveryMode, TimingLoopConfig};
use pon_timing_core::txchain::{DscmPlan, DEFAULT_SPAN_SYMBOLS};
use serde::{Deserialize, Serialize, Serializer};
use sha2::{Digest, Sha256};
use toml::{Table, Value};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("invalid TOML: {0}")]
    Syntax(String),
    #[error("{}", .0.join("\n"))]
    Invalid(Vec<String>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    Fig2,
    Fig3,
    Slots,
    Custom,
}

impl Preset {
    pub fn as_str(&self) -> &'static str {
        match self {
            Preset::Fig2 => "fig2",
            Preset::Fig3 => "fig3",
            Preset::Slots => "slots",
            Preset::Custom => "custom",
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Preset {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "fig2" => Ok(Preset::Fig2),
            "fig3" => Ok(Preset::Fig3),
            "slots" => Ok(Preset::Slots),
            "custom" => Ok(Preset::Custom),
            other => Err(format!(
                "unknown preset `{other}` (expected fig2, fig3, slots or custom)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FiberSection {
    pub dispersion_ps_nm_km: f64,
    pub wavelength_nm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlanSection {
    pub n_subcarriers: usize,
    pub baud_per_sc_gbd: f64,
    pub roll_off: f64,
    pub aggregate_rate_gsps: f64,
}

impl PlanSection {
    pub fn build(&self) -> pon_timing_core::Result<DscmPlan> {
        DscmPlan::new(
            self.n_subcarriers,
            self.baud_per_sc_gbd * 1e9,
            self.roll_off,
            self.aggregate_rate_gsps * 1e9,
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimingSection {
    pub initial_offset_symbols: f64,
    pub step_offset_symbols: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub step_at_symbol: Option<usize>,
    pub drift_ppm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LoopSection {
    pub dft_size: usize,
    pub k_points: usize,
    pub kp: f64,
    pub ki: f64,
    pub block_stride: usize,
    pub align_group_delay: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SlotsSection {
    pub probe_distance_km: f64,
    pub foreign_distance_km: f64,
    pub own_slot_symbols: usize,
    pub foreign_slot_symbols: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub subcarrier: Option<usize>,
}

/// Fully resolved configuration. Its TOML form is canonical and hashed.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimConfig {
    pub preset: Preset,
    pub seed: u64,
    pub n_symbols: usize,
    pub span_symbols: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub snr_db: Option<f64>,
    #[serde(serialize_with = "serialize_modes")]
    pub modes: Vec<RecoveryMode>,
    pub distances_km: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub probe_subcarrier: Option<usize>,
    pub discard_blocks: usize,
    pub convergence_tol_symbols: f64,
    pub fiber: FiberSection,
    pub timing: TimingSection,
    #[serde(rename = "loop")]
    pub timing_loop: LoopSection,
    pub slots: SlotsSection,
    pub configs: Vec<PlanSection>,
    /// Where outputs go; not part of the hash.
    #[serde(skip)]
    pub output_dir: PathBuf,
}

fn serialize_modes<S: Serializer>(modes: &[RecoveryMode], s: S) -> Result<S::Ok, S::Error> {
    s.collect_seq(modes.iter().map(|m| m.as_str()))
}

pub const DEFAULT_SEED: u64 = 1;
pub const DEFAULT_N_SYMBOLS: usize = 1 << 16;
pub const DEFAULT_OUTPUT_DIR: &str = "out";
/// Blocks required after the discard window for stable statistics.
pub const MIN_STAT_BLOCKS: usize = 500;

pub fn default_distances() -> Vec<f64> {
    (0..=8).map(|i| 40.0 * i as f64).collect()
}

fn reference_plans() -> Vec<PlanSection> {
    [(8, 8.0), (4, 16.0), (2, 32.0), (1, 64.0)]
        .into_iter()
        .map(|(n, baud)| PlanSection {
            n_subcarriers: n,
            baud_per_sc_gbd: baud,
            roll_off: 0.1,
            aggregate_rate_gsps: 128.0,
        })
        .collect()
}

impl SimConfig {
    /// Defaults the given preset starts from before file values apply.
    pub fn preset_defaults(preset: Preset) -> SimConfig {
        let mut cfg = SimConfig {
            preset,
            seed: DEFAULT_SEED,
            n_symbols: DEFAULT_N_SYMBOLS,
            span_symbols: DEFAULT_SPAN_SYMBOLS,
            snr_db: None,
            modes: vec![RecoveryMode::NoComp, RecoveryMode::Proposed],
            distances_km: default_distances(),
            probe_subcarrier: None,
            discard_blocks: pon_timing_core::metrics::DEFAULT_DISCARD_BLOCKS,
            convergence_tol_symbols: 0.02,
            fiber: FiberSection {
                dispersion_ps_nm_km: FiberSpec::DEFAULT_DISPERSION_PS_NM_KM,
                wavelength_nm: FiberSpec::DEFAULT_WAVELENGTH_NM,
            },
            timing: TimingSection {
                initial_offset_symbols: 0.0,
                step_offset_symbols: 0.0,
                step_at_symbol: None,
                drift_ppm: 0.0,
            },
            timing_loop: LoopSection {
                dft_size: 128,
                k_points: 12,
                kp: 0.05,
                ki: 1e-3,
                block_stride: 128,
                align_group_delay: true,
            },
            slots: SlotsSection {
                probe_distance_km: 280.0,
                foreign_distance_km: 40.0,
                own_slot_symbols: 1 << 16,
                foreign_slot_symbols: 1 << 14,
                subcarrier: None,
            },
            configs: reference_plans(),
            output_dir: PathBuf::from(DEFAULT_OUTPUT_DIR),
        };
        match preset {
            Preset::Fig2 => {}
            Preset::Fig3 => {
                cfg.distances_km = vec![320.0];
                cfg.timing.step_offset_symbols = 0.25;
            }
            Preset::Slots => {
                cfg.configs.retain(|p| p.n_subcarriers == 1);
                cfg.distances_km = Vec::new();
            }
            Preset::Custom => {
                cfg.modes = RecoveryMode::ALL.to_vec();
            }
        }
        cfg
    }

    /// Canonical TOML of the resolved configuration.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("resolved config serializes")
    }

    /// First 16 hex digits of the SHA-256 of [`to_toml`](Self::to_toml).
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.to_toml().as_bytes());
        hex::encode(&digest[..8])
    }

    pub fn plans(&self) -> Vec<DscmPlan> {
        self.configs.iter().map(|p| p.build().expect("validated")).collect()
    }

    pub fn fiber_spec(&self) -> FiberSpec {
        FiberSpec {
            dispersion_ps_nm_km: self.fiber.dispersion_ps_nm_km,
            wavelength_nm: self.fiber.wavelength_nm,
            length_km: 0.0,
        }
    }

    pub fn loop_template(&self) -> TimingLoopConfig {
        let l = &self.timing_loop;
        let mut cfg = TimingLoopConfig::new(RecoveryMode::Proposed, self.fiber_spec(), 0.0);
        cfg.dft_size = l.dft_size;
        cfg.k_points = l.k_points;
        cfg.kp = l.kp;
        cfg.ki = l.ki;
        cfg.block_stride = l.block_stride;
        cfg.align_group_delay = l.align_group_delay;
        if let Some(first) = self.configs.first() {
            cfg.roll_off = first.roll_off;
        }
        cfg
    }

    /// Collects every semantic problem with its field path.
    pub fn validate(&self) -> Vec<String> {
        let mut errs = Vec::new();
        let mut bad = |path: &str, msg: String| errs.push(format!("{path}: {msg}"));
        if self.modes.is_empty() {
            bad("modes", "at least one recovery mode is required".into());
        }
        if self.preset == Preset::Slots {
            if !self.distances_km.is_empty() {
                bad(
                    "distances_km",
                    "not used by preset slots; set slots.probe_distance_km".into(),
                );
            }
        } else if self.distances_km.is_empty() {
            bad("distances_km", "at least one distance is required".into());
        }
        for (i, d) in self.distances_km.iter().enumerate() {
            if !(d.is_finite() && *d >= 0.0) {
                bad(
                    &format!("distances_km[{i}]"),
                    format!("distance must be non-negative, got {d}"),
                );
            }
        }
        if self.distances_km.windows(2).any(|w| !(w[0] < w[1])) {
            bad("distances_km", "distances must be strictly ascending".into());
        }
        if self.span_symbols < 2 || !self.span_symbols.is_multiple_of(2) {
            bad(
                "span_symbols",
                format!("must be even and >= 2, got {}", self.span_symbols),
            );
        }
        if let Some(snr) = self.snr_db {
            if !snr.is_finite() {
                bad("snr_db", "must be finite; omit the key to disable noise".into());
            }
        }
        if !(self.convergence_tol_symbols > 0.0 && self.convergence_tol_symbols < 0.5) {
            bad("convergence_tol_symbols", "must be in (0, 0.5)".into());
        }
        if let Err(e) = self.fiber_spec().validate_coefficients() {
            bad("fiber", e.to_string());
        }
        let t = &self.timing;
        for (name, v) in [
            ("timing.initial_offset_symbols", t.initial_offset_symbols),
            ("timing.step_offset_symbols", t.step_offset_symbols),
        ] {
            if !(v.abs() < 0.5) {
                bad(name, format!("offset must be within (-0.5, 0.5) symbols, got {v}"));
            }
        }
        if !t.drift_ppm.is_finite() {
            bad("timing.drift_ppm", "must be finite".into());
        }
        if let Some(at) = t.step_at_symbol {
            if at >= self.n_symbols {
                bad(
                    "timing.step_at_symbol",
                    format!("{at} is beyond n_symbols = {}", self.n_symbols),
                );
            }
        }
        if self.configs.is_empty() {
            bad("configs", "at least one DSCM configuration is required".into());
        }
        for (i, p) in self.configs.iter().enumerate() {
            if let Err(e) = p.build() {
                bad(&format!("configs[{i}]"), e.to_string());
            }
            if let Some(sc) = self.probe_subcarrier {
                if sc >= p.n_subcarriers {
                    bad(
                        "probe_subcarrier",
                        format!(
                            "{sc} is out of range for configs[{i}] with {} subcarriers",
                            p.n_subcarriers
                        ),
                    );
                }
            }
        }
        if let Err(e) = self.loop_template().validate() {
            bad("loop", e.to_string());
        }
        let stride = self.timing_loop.block_stride.max(1);
        let blocks = |symbols: usize| 2 * symbols / stride;
        if self.preset == Preset::Slots {
            let s = &self.slots;
            for (name, v) in [
                ("slots.probe_distance_km", s.probe_distance_km),
                ("slots.foreign_distance_km", s.foreign_distance_km),
            ] {
                if !(v.is_finite() && v >= 0.0) {
                    bad(name, format!("distance must be non-negative, got {v}"));
                }
            }
            if blocks(s.own_slot_symbols) < self.discard_blocks + MIN_STAT_BLOCKS {
                bad(
                    "slots.own_slot_symbols",
                    format!(
                        "{} symbols give fewer than {MIN_STAT_BLOCKS} blocks after discard",
                        s.own_slot_symbols
                    ),
                );
            }
            if s.foreign_slot_symbols < 256 {
                bad("slots.foreign_slot_symbols", "must be at least 256".into());
            }
            if let Some(sc) = s.subcarrier {
                for (i, p) in self.configs.iter().enumerate() {
                    if sc >= p.n_subcarriers {
                        bad("slots.subcarrier", format!("{sc} is out of range for configs[{i}]"));
                    }
                }
            }
        } else if blocks(self.n_symbols) < self.discard_blocks + MIN_STAT_BLOCKS {
            bad(
                "n_symbols",
                format!(
                    "{} symbols give fewer than {MIN_STAT_BLOCKS} blocks after discard",
                    self.n_symbols
                ),
            );
        }
        errs
    }
}

const TOP_KEYS: &[&str] = &[
    "preset",
    "seed",
    "n_symbols",
    "span_symbols",
    "snr_db",
    "modes",
    "distances_km",
    "probe_subcarrier",
    "discard_blocks",
    "convergence_tol_symbols",
    "output_dir",
    "fiber",
    "timing",
    "loop",
    "slots",
    "configs",
];
const FIBER_KEYS: &[&str] = &["dispersion_ps_nm_km", "wavelength_nm"];
const TIMING_KEYS: &[&str] = &[
    "initial_offset_symbols",
    "step_offset_symbols",
    "step_at_symbol",
    "drift_ppm",
];
const LOOP_KEYS: &[&str] = &["dft_size", "k_points", "kp", "ki", "block_stride", "align_group_delay"];
const SLOTS_KEYS: &[&str] = &[
    "probe_distance_km",
    "foreign_distance_km",
    "own_slot_symbols",
    "foreign_slot_symbols",
    "subcarrier",
];
const PLAN_KEYS: &[&str] = &["n_subcarriers", "baud_per_sc_gbd", "roll_off", "aggregate_rate_gsps"];

fn unknown_keys(table: &Table, allowed: &[&str], prefix: &str, errs: &mut Vec<String>) {
    for k in table.keys() {
        if !allowed.contains(&k.as_str()) {
            errs.push(format!("{prefix}{k}: unknown key"));
        }
    }
}

/// Typed reader over a TOML table that records errors instead of failing.
struct Reader<'a> {
    table: &'a Table,
    prefix: String,
    errs: &'a mut Vec<String>,
}

impl<'a> Reader<'a> {
    fn path(&self, key: &str) -> String {
        format!("{}{key}", self.prefix)
    }

    fn get<T: for<'de> Deserialize<'de>>(&mut self, key: &str, expect: &str) -> Option<T> {
        let v = self.table.get(key)?;
        match v.clone().try_into::<T>() {
            Ok(t) => Some(t),
            Err(_) => {
                let p = self.path(key);
                self.errs
                    .push(format!("{p}: expected {expect}, found {}", v.type_str()));
                None
            }
        }
    }

    fn set<T: for<'de> Deserialize<'de>>(&mut self, key: &str, expect: &str, slot: &mut T) {
        if let Some(v) = self.get(key, expect) {
            *slot = v;
        }
    }

    fn sub(&mut self, key: &str, allowed: &[&str]) -> Option<Table> {
        match self.table.get(key)? {
            Value::Table(t) => {
                let prefix = format!("{}{key}.", self.prefix);
                unknown_keys(t, allowed, &prefix, self.errs);
                Some(t.clone())
            }
            other => {
                let p = self.path(key);
                self.errs
                    .push(format!("{p}: expected a table, found {}", other.type_str()));
                None
            }
        }
    }
}

/// Overrides applied on top of the file, from the command line.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub preset: Option<Preset>,
    pub seed: Option<u64>,
    pub output_dir: Option<PathBuf>,
}

pub fn load(path: &Path, overrides: &Overrides) -> Result<SimConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse(&text, overrides)
}

pub fn parse(text: &str, overrides: &Overrides) -> Result<SimConfig, ConfigError> {
    let table: Table = text
        .parse()
        .map_err(|e: toml::de::Error| ConfigError::Syntax(e.to_string()))?;
    let mut errs = Vec::new();
    unknown_keys(&table, TOP_KEYS, "", &mut errs);

    let file_preset = match table.get("preset") {
        Some(Value::String(s)) => match s.parse::<Preset>() {
            Ok(p) => Some(p),
            Err(e) => {
                errs.push(format!("preset: {e}"));
                None
            }
        },
        Some(other) => {
            errs.push(format!("preset: expected a string, found {}", other.type_str()));
            None
        }
        None => None,
    };
    let Some(preset) = overrides.preset.or(file_preset) else {
        if errs.is_empty() {
            errs.push("preset: required (fig2, fig3, slots or custom)".into());
        }
        return Err(ConfigError::Invalid(errs));
    };
    let mut cfg = SimConfig::preset_defaults(preset);
    let mut r = Reader {
        table: &table,
        prefix: String::new(),
        errs: &mut errs,
    };
    r.set("seed", "an unsigned integer", &mut cfg.seed);
    r.set("n_symbols", "an unsigned integer", &mut cfg.n_symbols);
    r.set("span_symbols", "an unsigned integer", &mut cfg.span_symbols);
    if let Some(v) = r.get::<f64>("snr_db", "a number") {
        cfg.snr_db = Some(v);
    }
    r.set("distances_km", "an array of numbers", &mut cfg.distances_km);
    if let Some(v) = r.get::<usize>("probe_subcarrier", "an unsigned integer") {
        cfg.probe_subcarrier = Some(v);
    }
    r.set("discard_blocks", "an unsigned integer", &mut cfg.discard_blocks);
    r.set("convergence_tol_symbols", "a number", &mut cfg.convergence_tol_symbols);
    if let Some(dir) = r.get::<String>("output_dir", "a string") {
        cfg.output_dir = PathBuf::from(dir);
    }
    if let Some(names) = r.get::<Vec<String>>("modes", "an array of strings") {
        let mut modes = Vec::new();
        for (i, n) in names.iter().enumerate() {
            match n.parse::<RecoveryMode>() {
                Ok(m) if !modes.contains(&m) => modes.push(m),
                Ok(_) => r.errs.push(format!("modes[{i}]: duplicate mode `{n}`")),
                Err(_) => r.errs.push(format!(
                    "modes[{i}]: unknown mode `{n}` (expected proposed, no_comp or full_comp)"
                )),
            }
        }
        cfg.modes = modes;
    }
    if let Some(t) = r.sub("fiber", FIBER_KEYS) {
        let mut s = Reader {
            table: &t,
            prefix: "fiber.".into(),
            errs: r.errs,
        };
        s.set("dispersion_ps_nm_km", "a number", &mut cfg.fiber.dispersion_ps_nm_km);
        s.set("wavelength_nm", "a number", &mut cfg.fiber.wavelength_nm);
    }
    if let Some(t) = r.sub("timing", TIMING_KEYS) {
        let mut s = Reader {
            table: &t,
            prefix: "timing.".into(),
            errs: r.errs,
        };
        s.set(
            "initial_offset_symbols",
            "a number",
            &mut cfg.timing.initial_offset_symbols,
        );
        s.set("step_offset_symbols", "a number", &mut cfg.timing.step_offset_symbols);
        if let Some(v) = s.get::<usize>("step_at_symbol", "an unsigned integer") {
            cfg.timing.step_at_symbol = Some(v);
        }
        s.set("drift_ppm", "a number", &mut cfg.timing.drift_ppm);
    }
    if let Some(t) = r.sub("loop", LOOP_KEYS) {
        let mut s = Reader {
            table: &t,
            prefix: "loop.".into(),
            errs: r.errs,
        };
        let l = &mut cfg.timing_loop;
        s.set("dft_size", "an unsigned integer", &mut l.dft_size);
        s.set("k_points", "an unsigned integer", &mut l.k_points);
        s.set("kp", "a number", &mut l.kp);
        s.set("ki", "a number", &mut l.ki);
        s.set("block_stride", "an unsigned integer", &mut l.block_stride);
        s.set("align_group_delay", "a boolean", &mut l.align_group_delay);
    }
    if let Some(t) = r.sub("slots", SLOTS_KEYS) {
        let mut s = Reader {
            table: &t,
            prefix: "slots.".into(),
            errs: r.errs,
        };
        let sl = &mut cfg.slots;
        s.set("probe_distance_km", "a number", &mut sl.probe_distance_km);
        s.set("foreign_distance_km", "a number", &mut sl.foreign_distance_km);
        s.set("own_slot_symbols", "an unsigned integer", &mut sl.own_slot_symbols);
        s.set(
            "foreign_slot_symbols",
            "an unsigned integer",
            &mut sl.foreign_slot_symbols,
        );
        if let Some(v) = s.get::<usize>("subcarrier", "an unsigned integer") {
            sl.subcarrier = Some(v);
        }
    }
    match table.get("configs") {
        None => {}
        Some(Value::Array(items)) => {
            let mut plans = Vec::new();
            for (i, item) in items.iter().enumerate() {
                let prefix = format!("configs[{i}].");
                let Value::Table(t) = item else {
                    errs.push(format!("configs[{i}]: expected a table, found {}", item.type_str()));
                    continue;
                };
                unknown_keys(t, PLAN_KEYS, &prefix, &mut errs);
                let mut s = Reader {
                    table: t,
                    prefix: prefix.clone(),
                    errs: &mut errs,
                };
                let mut plan = PlanSection {
                    n_subcarriers: 0,
                    baud_per_sc_gbd: 0.0,
                    roll_off: 0.1,
                    aggregate_rate_gsps: 128.0,
                };
                for key in ["n_subcarriers", "baud_per_sc_gbd"] {
                    if !t.contains_key(key) {
                        s.errs.push(format!("{prefix}{key}: required"));
                    }
                }
                s.set("n_subcarriers", "an unsigned integer", &mut plan.n_subcarriers);
                s.set("baud_per_sc_gbd", "a number", &mut plan.baud_per_sc_gbd);
                s.set("roll_off", "a number", &mut plan.roll_off);
                s.set("aggregate_rate_gsps", "a number", &mut plan.aggregate_rate_gsps);
                plans.push(plan);
            }
            cfg.configs = plans;
        }
        Some(other) => errs.push(format!(
            "configs: expected an array of tables, found {}",
            other.type_str()
        )),
    }

    if let Some(seed) = overrides.seed {
        cfg.seed = seed;
    }
    if let Some(dir) = &overrides.output_dir {
        cfg.output_dir = dir.clone();
    }
    // fields that failed to parse kept their defaults, so semantic checks
    // still run and every problem is reported together
    errs.extend(cfg.validate());
    if errs.is_empty() {
        Ok(cfg)
    } else {
        Err(ConfigError::Invalid(errs))
    }
}
