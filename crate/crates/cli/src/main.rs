use std::fs::File;
use std::io;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use mmwave_core::harness::write_summary_csv;
use mmwave_core::{run_experiment, summarize, Dataset, ExperimentKind, ExperimentSpec};

/// Simulate MAC behaviour in directional mmWave networks.
#[derive(Parser)]
#[command(name = "mmwave-sim", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Probability that a reference link collides, per density and beamwidth.
    CollisionProbability(SweepArgs),
    /// Throughput-maximising ALOHA transmit probability.
    OptimalP(SweepArgs),
    /// Saturated per-link throughput of ALOHA at p* against TDMA.
    AlohaVsTdmaThroughput(SweepArgs),
    /// Throughput and delay of ALOHA and TDMA under constant bit rate traffic.
    ThroughputDelayCurve(SweepArgs),
    /// Distribution of collision domain sizes.
    CollisionDomains(SweepArgs),
    /// Winner backoff of RTS/CTS with and without collision notification.
    CnBackoff(SweepArgs),
    /// Channel utilization of one RTS/CTS/DATA exchange.
    UtilizationTable(SweepArgs),
    /// Run a spec file or a sidecar written by an earlier run.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the output path in the file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a named preset, or print its spec with --print.
    Preset {
        name: String,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        print: bool,
    },
    /// Group a dataset and report mean, sd and a 95% interval of one column.
    Summarize {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        group_by: Vec<String>,
        #[arg(long)]
        value: String,
        /// Write CSV here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct SweepArgs {
    /// Start from this spec or sidecar instead of the built-in defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Link densities, links per m^2.
    #[arg(long, value_delimiter = ',')]
    densities: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    beamwidths_deg: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    p_grid: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    blockage_probs: Option<Vec<f64>>,
    /// Payload sizes in bytes.
    #[arg(long, value_delimiter = ',')]
    payload_sizes: Option<Vec<u64>>,
    #[arg(long, value_delimiter = ',')]
    n_devices: Option<Vec<usize>>,
    #[arg(long)]
    replications: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Simulated time per MAC run, seconds.
    #[arg(long)]
    duration_s: Option<f64>,
    #[arg(long)]
    search_replications: Option<u64>,
    #[arg(long)]
    search_slots: Option<u64>,
    /// Metres; links are drawn with length uniform on (0, max].
    #[arg(long)]
    link_length_max: Option<f64>,
    /// Obstacles per m^2.
    #[arg(long)]
    obstacle_density: Option<f64>,
    #[arg(long)]
    arena_width: Option<f64>,
    #[arg(long)]
    arena_height: Option<f64>,
}

fn default_preset(kind: ExperimentKind) -> &'static str {
    match kind {
        ExperimentKind::CollisionProbability => "fig2a",
        ExperimentKind::OptimalP => "fig2b",
        ExperimentKind::AlohaVsTdmaThroughput => "fig3",
        ExperimentKind::ThroughputDelayCurve => "fig4",
        ExperimentKind::CollisionDomains => "fig5",
        ExperimentKind::CnBackoff => "fig6",
        ExperimentKind::UtilizationTable => "utilization",
    }
}

fn build_spec(kind: ExperimentKind, a: SweepArgs) -> anyhow::Result<ExperimentSpec> {
    let mut spec = match &a.config {
        Some(path) => {
            let spec = ExperimentSpec::load(path)
                .with_context(|| format!("loading {}", path.display()))?;
            if spec.kind != kind {
                bail!(
                    "{} describes a {} run, not {}",
                    path.display(),
                    spec.kind.name(),
                    kind.name()
                );
            }
            spec
        }
        None => {
            let mut spec = ExperimentSpec::preset(default_preset(kind))?;
            spec.output_path = PathBuf::from(format!("{}.csv", kind.name()));
            spec
        }
    };
    macro_rules! set {
        ($($field:ident => $target:expr),* $(,)?) => {
            $(if let Some(v) = a.$field { $target = v; })*
        };
    }
    set! {
        densities => spec.densities,
        beamwidths_deg => spec.beamwidths_deg,
        p_grid => spec.p_grid,
        blockage_probs => spec.blockage_probs,
        payload_sizes => spec.payload_sizes,
        n_devices => spec.n_devices,
        replications => spec.replications,
        seed => spec.master_seed,
        out => spec.output_path,
        duration_s => spec.duration_s,
        search_replications => spec.search_replications,
        search_slots => spec.search_slots,
        obstacle_density => spec.network.obstacle_density,
        arena_width => spec.network.arena_width,
        arena_height => spec.network.arena_height,
    }
    if let Some(r) = a.link_length_max {
        spec.network.link_length_max = Some(r);
    }
    Ok(spec)
}

fn execute(spec: &ExperimentSpec) -> anyhow::Result<()> {
    let out = run_experiment(spec)?;
    println!(
        "{} rows -> {} (spec: {})",
        out.rows,
        out.csv_path.display(),
        out.sidecar_path.display()
    );
    Ok(())
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let sweep = |kind, args| execute(&build_spec(kind, args)?);
    match cli.command {
        Command::CollisionProbability(a) => sweep(ExperimentKind::CollisionProbability, a),
        Command::OptimalP(a) => sweep(ExperimentKind::OptimalP, a),
        Command::AlohaVsTdmaThroughput(a) => sweep(ExperimentKind::AlohaVsTdmaThroughput, a),
        Command::ThroughputDelayCurve(a) => sweep(ExperimentKind::ThroughputDelayCurve, a),
        Command::CollisionDomains(a) => sweep(ExperimentKind::CollisionDomains, a),
        Command::CnBackoff(a) => sweep(ExperimentKind::CnBackoff, a),
        Command::UtilizationTable(a) => sweep(ExperimentKind::UtilizationTable, a),
        Command::Run { config, out } => {
            let mut spec = ExperimentSpec::load(&config)
                .with_context(|| format!("loading {}", config.display()))?;
            if let Some(out) = out {
                spec.output_path = out;
            }
            execute(&spec)
        }
        Command::Preset { name, out, print } => {
            let mut spec = ExperimentSpec::preset(&name)?;
            if let Some(out) = out {
                spec.output_path = out;
            }
            if print {
                println!("{}", spec.to_json()?);
                Ok(())
            } else {
                execute(&spec)
            }
        }
        Command::Summarize {
            input,
            group_by,
            value,
            out,
        } => {
            let data = Dataset::read_csv(&input)?;
            let keys: Vec<&str> = group_by.iter().map(String::as_str).collect();
            let records = summarize(&data, &keys, &value)?;
            match out {
                Some(path) => {
                    let file = File::create(&path)
                        .with_context(|| format!("creating {}", path.display()))?;
                    write_summary_csv(&records, &keys, file)?;
                }
                None => write_summary_csv(&records, &keys, io::stdout().lock())?,
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
