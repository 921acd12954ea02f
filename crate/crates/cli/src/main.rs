use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use meson_cli::config::{Backend, ExperimentConfig, Overrides};
use meson_cli::tools::{compress, mitigate_files, spectrum_file, CompressRequest};
use meson_cli::{compare, io, run, CliError, CliResult, Reference};
use meson_core::noise::DEFAULT_EPS_DEN;

#[derive(Parser)]
#[command(name = "meson", version, about = "Meson spectroscopy of the tilted-field Ising chain")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// TOML config, or a previous run's manifest.json.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    backend: Option<Backend>,
    #[arg(long)]
    t_cut: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate, mitigate and analyze one configuration.
    Run(RunArgs),
    /// Tabulate labelled peaks of several run directories.
    Compare {
        #[arg(required = true)]
        runs: Vec<PathBuf>,
        #[arg(long, value_enum, default_value = "table1")]
        reference: Reference,
        /// Directory for compare.md and compare.json; prints markdown if absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Optimize a brickwall circuit for one evolution time.
    Compress {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        time: f64,
        #[arg(long)]
        layers: Option<usize>,
        /// Emit RX/RZ/RZZ gates instead of dense two-qubit blocks.
        #[arg(long)]
        native: bool,
        /// Circuit file to write.
        #[arg(long)]
        out: PathBuf,
        /// Optional per-iteration cost trace CSV.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Divide a raw series by its normalized reference series.
    Mitigate {
        #[arg(long)]
        raw: PathBuf,
        #[arg(long)]
        reference: PathBuf,
        #[arg(long, default_value_t = DEFAULT_EPS_DEN)]
        eps: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Spectrum and peak report for a series CSV.
    Spectrum {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        t_cut: Option<f64>,
        /// Analysis settings are taken from this config's [analysis] table.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

fn load(path: Option<&PathBuf>) -> CliResult<ExperimentConfig> {
    match path {
        Some(p) => ExperimentConfig::load(p),
        None => Ok(ExperimentConfig::default()),
    }
}

fn execute(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Run(a) => {
            let overrides = Overrides { seed: a.seed, out: a.out, backend: a.backend, t_cut: a.t_cut };
            let cfg = load(a.config.as_ref())?.resolve(&overrides)?;
            let outcome = run(&cfg)?;
            let p = &outcome.report.peaks;
            println!("wrote {} files to {}", outcome.outputs.len(), cfg.output_dir.display());
            println!("m1 = {:.4}, d_omega = {:.4}", p.m1, p.d_omega);
            for d in &p.deviations {
                println!("  {:<8} {:.4} ({:+.3} m1)", d.label.as_str(), d.measured, d.deviation / p.m1);
            }
            for w in &outcome.report.warnings {
                eprintln!("warning: {w}");
            }
        }
        Command::Compare { runs, reference, out } => {
            let c = compare(&runs, reference)?;
            match out {
                Some(dir) => {
                    io::create_dir(&dir)?;
                    io::write_text(&dir.join("compare.md"), &c.to_markdown())?;
                    io::write_json(&dir.join("compare.json"), &c)?;
                }
                None => print!("{}", c.to_markdown()),
            }
        }
        Command::Compress { config, time, layers, native, out, trace } => {
            let cfg = load(config.as_ref())?;
            let r = compress(&cfg, &CompressRequest { time, layers, native, out, trace })?;
            println!(
                "{} layers, cost {:.3e} after {} iterations ({:?})",
                r.ansatz.n_layers(),
                r.final_cost(),
                r.iterations(),
                r.status
            );
        }
        Command::Mitigate { raw, reference, eps, out } => {
            let pair = mitigate_files(&raw, &reference, eps, &out)?;
            let invalid = (0..pair.mitigated.len()).filter(|&k| !pair.valid(k)).count();
            println!("mitigated {} samples ({invalid} masked)", pair.mitigated.len());
        }
        Command::Spectrum { input, t_cut, config, out } => {
            let cfg = load(config.as_ref())?;
            let r = spectrum_file(&input, &cfg, t_cut, &out)?;
            println!("m1 = {:.4}, {} labelled peaks", r.peaks.m1, r.peaks.deviations.len());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let code = match &e {
                CliError::Usage(_) => 2,
                other => other.exit_code(),
            };
            ExitCode::from(code as u8)
        }
    }
}
