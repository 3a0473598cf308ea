use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use pon_timing_sim::{config, output, run, Overrides, Preset};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum PresetArg {
    Fig2,
    Fig3,
    Slots,
}

impl From<PresetArg> for Preset {
    fn from(p: PresetArg) -> Self {
        match p {
            PresetArg::Fig2 => Preset::Fig2,
            PresetArg::Fig3 => Preset::Fig3,
            PresetArg::Slots => Preset::Slots,
        }
    }
}

/// Simulates band-edge timing recovery for a coherent DSCM PON downstream.
#[derive(Debug, Parser)]
#[command(name = "pon-timing-sim", version)]
struct Cli {
    /// TOML experiment configuration.
    #[arg(long)]
    config: PathBuf,
    /// Overrides the preset named in the file.
    #[arg(long, value_enum)]
    preset: Option<PresetArg>,
    /// Output directory for trace.csv, summary.csv and report.txt.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
}

const EXIT_CONFIG: u8 = 1;
const EXIT_RUNTIME: u8 = 2;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if e.use_stderr() => {
            let _ = e.print();
            return ExitCode::from(EXIT_CONFIG);
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
    };
    let overrides = Overrides {
        preset: cli.preset.map(Preset::from),
        seed: cli.seed,
        output_dir: cli.out,
    };
    let cfg = match config::load(&cli.config, &overrides) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("configuration error in {}:\n{e}", cli.config.display());
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    let outcome = run(&cfg);
    match output::write_all(&outcome) {
        Ok(paths) => {
            for p in paths {
                println!("wrote {}", p.display());
            }
        }
        Err(e) => {
            eprintln!("cannot write outputs to {}: {e}", cfg.output_dir.display());
            return ExitCode::from(EXIT_RUNTIME);
        }
    }
    if !outcome.faults.is_empty() {
        eprintln!("{} run(s) faulted:", outcome.faults.len());
        for f in &outcome.faults {
            eprintln!("  {f}");
        }
        return ExitCode::from(EXIT_RUNTIME);
    }
    ExitCode::SUCCESS
}
