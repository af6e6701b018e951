use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use crashscope::ingest::CategoryFilter;
use crashscope::pipeline::{self, Overrides, RunConfig};
use crashscope::synth::{canonical_cluster_scenario, SynthScenario};
use crashscope::Error;

/// Temporal severity association, Gi* hotspots and IDW surfaces for incident
/// records.
#[derive(Debug, Parser)]
#[command(name = "crashscope", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Parse, filter and deduplicate the input events.
    Validate(RunArgs),
    /// Chi-square tests and severity shares per temporal factor.
    Temporal(RunArgs),
    /// Severity-weighted Gi* per grid cell.
    Hotspot(RunArgs),
    /// IDW raster of the Gi* field.
    Idw(RunArgs),
    /// Collate stage outputs into report.md.
    Report(RunArgs),
    /// All stages in order.
    Run(RunArgs),
    /// Generate a synthetic scenario into <out>/synth.
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
struct RunArgs {
    /// TOML run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Events file (delimited text with header).
    #[arg(long)]
    input: Option<PathBuf>,
    /// GeoJSON Polygon or MultiPolygon boundary.
    #[arg(long)]
    boundary: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// all, collision or pedestrian.
    #[arg(long)]
    category: Option<CategoryFilter>,
    /// Analysis cell edge in metres.
    #[arg(long)]
    cell_size: Option<f64>,
    /// Neighbourhood band in metres.
    #[arg(long)]
    band: Option<f64>,
    /// IDW power.
    #[arg(long)]
    power: Option<f64>,
    /// IDW neighbour count.
    #[arg(long)]
    neighbors: Option<usize>,
}

impl RunArgs {
    fn overrides(&self) -> Overrides {
        Overrides {
            events: self.input.clone(),
            boundary: self.boundary.clone(),
            output_dir: self.out.clone(),
            category: self.category,
            cell_size: self.cell_size,
            band: self.band,
            power: self.power,
            neighbors: self.neighbors,
        }
    }

    fn load(&self) -> crashscope::Result<RunConfig> {
        RunConfig::load(self.config.as_deref(), &self.overrides())
    }
}

#[derive(Debug, Args)]
struct SynthArgs {
    /// TOML scenario; the built-in planted-cluster scenario when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory; data goes to <out>/synth.
    #[arg(long)]
    out: PathBuf,
    /// Replaces the scenario seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Also run every stage on the generated data, writing into <out>.
    #[arg(long)]
    run: bool,
}

fn run(cli: Cli) -> crashscope::Result<()> {
    match cli.command {
        Command::Validate(a) => {
            let s = pipeline::cmd_validate(&a.load()?)?;
            println!(
                "validate: {} rows, {} rejected, {} outside window, {} duplicates, {} other category, {} outside boundary, {} retained",
                s.parsed + s.rejected_rows,
                s.rejected_rows,
                s.outside_window,
                s.duplicates,
                s.other_category,
                s.outside_boundary,
                s.retained
            );
        }
        Command::Temporal(a) => {
            for f in pipeline::cmd_temporal(&a.load()?)? {
                match (f.report, f.warning) {
                    (Some(r), _) => println!(
                        "temporal {}: chi2 = {:.2} ({}), p = {}, V = {:.3}, N = {}",
                        f.factor,
                        r.chi2,
                        r.df,
                        crashscope::temporal::format_p_value(r.p_value),
                        r.cramers_v,
                        r.n
                    ),
                    (None, w) => eprintln!("warning: {}: {}", f.factor, w.unwrap_or_default()),
                }
            }
        }
        Command::Hotspot(a) => {
            let summary = pipeline::cmd_hotspot(&a.load()?)?;
            if let Some(w) = &summary.warning {
                eprintln!("warning: {w}");
            }
            let parts: Vec<String> = summary.tally.iter().map(|(c, n)| format!("{c} {n}")).collect();
            println!("hotspot: {}", parts.join(", "));
        }
        Command::Idw(a) => {
            let r = pipeline::cmd_idw(&a.load()?)?;
            println!(
                "idw: {} x {} raster, cell {} m",
                r.spec.n_cols, r.spec.n_rows, r.spec.cell_size
            );
        }
        Command::Report(a) => {
            pipeline::cmd_report(&a.load()?)?;
            println!("report written");
        }
        Command::Run(a) => {
            let cfg = a.load()?;
            pipeline::cmd_run(&cfg)?;
            println!("run complete: {}", cfg.output_dir()?.display());
        }
        Command::Synth(a) => {
            let mut scenario = match &a.config {
                Some(p) => {
                    let text = std::fs::read_to_string(p).map_err(|e| Error::Io {
                        path: p.clone(),
                        source: e,
                    })?;
                    SynthScenario::from_toml_str(&text)?
                }
                None => canonical_cluster_scenario(),
            };
            if let Some(seed) = a.seed {
                scenario.seed = seed;
            }
            if a.run {
                pipeline::run_synthetic(&scenario, &a.out, &Overrides::default())?;
                println!("synthetic run complete: {}", a.out.display());
            } else {
                let m = pipeline::cmd_synth(&scenario, &a.out.join("synth"))?;
                println!("synth: {} rows, {} expected after cleaning", m.rows, m.retained);
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_data_error() { 2 } else { 1 })
        }
    }
}
