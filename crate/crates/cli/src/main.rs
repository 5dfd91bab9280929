use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use odflow::design::ZeroFlowPolicy;
use odflow::error::Error;
use odflow::pipeline::{self, io, RunConfig};
use odflow::synth::{self, DgpConfig};
use odflow::weights::{IsolatedPolicy, SpatialWeights};

/// Spatial Durbin error models for origin-destination flows.
#[derive(Parser)]
#[command(name = "odflow", version)]
struct Cli {
    /// Neighbor cutoff distance in km.
    #[arg(long, global = true)]
    cutoff_km: Option<f64>,
    /// Zero-flow handling: error | log1p.
    #[arg(long, global = true)]
    zero_flow: Option<ZeroFlowPolicy>,
    /// Isolated-unit handling: warn | error | nearest.
    #[arg(long, global = true)]
    isolated: Option<IsolatedPolicy>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build the spatial weights from centroids and write them as CSV triplets.
    Weights {
        #[arg(long)]
        centroids: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Centroids are `id,lon,lat`.
        #[arg(long)]
        lonlat: bool,
    },
    /// Fit every model of a run config and write the results.
    Estimate {
        #[arg(long)]
        config: PathBuf,
        /// Output directory; defaults to the config's `output`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write a synthetic dataset and a run config for it.
    Simulate {
        /// Data generating process (TOML); defaults apply when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Monte Carlo recovery study.
    Mc {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 200)]
        replications: usize,
        #[arg(long)]
        threads: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
}

fn dgp(path: Option<&PathBuf>, cutoff: Option<f64>, seed: Option<u64>) -> anyhow::Result<DgpConfig> {
    let mut cfg = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            DgpConfig::from_toml(&text)?
        }
        None => DgpConfig::default(),
    };
    if let Some(c) = cutoff {
        cfg.cutoff_km = c;
    }
    if let Some(s) = seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Weights { centroids, out, lonlat } => {
            let c = io::read_centroids(&centroids, lonlat)?;
            let w = SpatialWeights::from_centroids(
                &c,
                cli.cutoff_km.unwrap_or(odflow::weights::DEFAULT_CUTOFF_KM),
                cli.isolated.unwrap_or_default(),
            )?;
            w.write_csv(BufWriter::new(File::create(&out)?))?;
            log::info!("wrote {} units to {}", w.n(), out.display());
        }
        Command::Estimate { config, out } => {
            let mut cfg = RunConfig::load(&config)?;
            if let Some(c) = cli.cutoff_km {
                cfg.cutoff_km = c;
            }
            if let Some(z) = cli.zero_flow {
                cfg.zero_flow = z;
            }
            if let Some(i) = cli.isolated {
                cfg.isolated = i.to_string();
            }
            let result = pipeline::run_pipeline(&cfg)?;
            let dir = out.unwrap_or_else(|| cfg.output.clone());
            pipeline::write_outputs(&result, &cfg, &dir)?;
            print!("{}", result.table.to_text());
        }
        Command::Simulate { config, out, seed } => {
            let cfg = dgp(config.as_ref(), cli.cutoff_km, seed)?;
            let inst = synth::gen_instance(&cfg)?;
            let path = pipeline::write_dataset(&inst, &out)?;
            println!("{}", path.display());
        }
        Command::Mc {
            config,
            replications,
            threads,
            out,
        } => {
            let cfg = dgp(config.as_ref(), cli.cutoff_km, None)?;
            let summary = synth::mc_study(&cfg, replications, threads)?;
            std::fs::create_dir_all(&out)?;
            std::fs::write(out.join("summary.csv"), summary.to_csv()?)?;
            std::fs::write(out.join("summary.json"), serde_json::to_string_pretty(&summary)? + "\n")?;
            print!("{}", summary.to_csv()?);
            if summary.failed {
                anyhow::bail!(Error::NotConverged(format!(
                    "{} of {} replications failed",
                    summary.failures, summary.replications
                )));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let (kind, code) = match e.downcast_ref::<Error>() {
                Some(err) if err.is_validation() => (err.kind(), 2),
                Some(err) => (err.kind(), 1),
                None => ("io", 1),
            };
            let report = serde_json::json!({ "error": kind, "message": format!("{e:#}") });
            eprintln!("{report}");
            ExitCode::from(code)
        }
    }
}
