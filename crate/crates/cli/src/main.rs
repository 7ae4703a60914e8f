use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use chemdist::experiments::{
    model_from_keys, read_sections, run_experiment, ExperimentConfig, KeyMap,
};
use chemdist::graph_core::{distance_ratio_profile, write_profile_csv};
use chemdist::long_edges::{estimate_p_long_edge_with, write_long_edge_csv, LongEdgeMethod};
use chemdist::mixing::{estimate_mixing, write_mixing_csv, LocalEvent};
use chemdist::models::ModelSpec;
use chemdist::renorm::{estimate_psi, write_psi_csv, ScaleLadder};
use chemdist::{Error, Result};

/// Spatial random graph simulation.
#[derive(Parser)]
#[command(name = "chemdist", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Realize one graph and write its vertex and edge CSVs.
    Generate {
        #[command(flatten)]
        model: ModelArgs,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Median chemical-to-Euclidean distance ratio per radius.
    Distance {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, value_delimiter = ',', required = true)]
        radii: Vec<f64>,
        /// Sources sampled in the graph.
        #[arg(long, default_value_t = 200)]
        samples: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Monte Carlo estimate of the long-edge probability per box side.
    Longedges {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, value_delimiter = ',', required = true)]
        m: Vec<f64>,
        /// Length threshold as a multiple of the box side.
        #[arg(long, default_value_t = 1.0)]
        n_factor: f64,
        #[arg(long, default_value = "auto")]
        method: LongEdgeMethod,
        #[arg(long, default_value_t = 10_000)]
        reps: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Probability that the centered box is bad, per stage.
    Renorm {
        #[command(flatten)]
        model: ModelArgs,
        /// Base scale of the ladder.
        #[arg(long = "K", default_value_t = 100)]
        k: u64,
        /// Highest stage.
        #[arg(long, default_value_t = 1)]
        stage: usize,
        #[arg(long, default_value_t = 1000)]
        reps: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Covariance of a local event in two disjoint boxes.
    Mixing {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, default_value = "stage0-bad")]
        event: String,
        #[arg(long, value_delimiter = ',', required = true)]
        m: Vec<f64>,
        /// Displacement in units of m.
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true, required = true)]
        x: Vec<f64>,
        #[arg(long, default_value_t = 10_000)]
        reps: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a config-file experiment, resuming earlier output.
    Experiment {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        reps: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Model flags; they override the `[model]` section of `--config`.
#[derive(Args)]
struct ModelArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    gamma_prime: Option<f64>,
    #[arg(long)]
    delta: Option<String>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    amplitude: Option<f64>,
    /// Poisson intensity, or retention probability for lattice models.
    #[arg(long)]
    intensity: Option<f64>,
    /// Window side.
    #[arg(long)]
    window: Option<f64>,
    /// `auto` or a boundary pad width.
    #[arg(long)]
    pad: Option<String>,
    #[arg(long)]
    generator: Option<String>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl ModelArgs {
    fn spec(&self) -> Result<ModelSpec> {
        let mut keys = match &self.config {
            Some(p) => read_sections(&fs::read_to_string(p)?)?.1,
            None => KeyMap::new(),
        };
        keys.remove("seed");
        let mut set = |k: &str, v: Option<String>| {
            if let Some(v) = v {
                keys.insert(k.to_string(), v);
            }
        };
        set("model", self.model.clone());
        set("dim", self.dim.map(|v| v.to_string()));
        set("gamma", self.gamma.map(|v| v.to_string()));
        set("gamma_prime", self.gamma_prime.map(|v| v.to_string()));
        set("delta", self.delta.clone());
        set("beta", self.beta.map(|v| v.to_string()));
        set("amplitude", self.amplitude.map(|v| v.to_string()));
        set("window", self.window.map(|v| v.to_string()));
        set("pad", self.pad.clone());
        set("generator", self.generator.clone());
        if let Some(v) = self.intensity {
            let lattice = keys.get("model").is_some_and(|m| m == "lrp");
            let key = if lattice { "retention" } else { "intensity" };
            keys.remove("intensity");
            keys.remove("retention");
            keys.insert(key.to_string(), v.to_string());
        }
        model_from_keys(&keys)
    }
}

fn sink(out: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match out {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir)?;
            }
            Box::new(BufWriter::new(File::create(p)?))
        }
        None => Box::new(BufWriter::new(io::stdout())),
    })
}

fn generate(spec: &ModelSpec, seed: u64, out: &Path) -> Result<()> {
    fs::create_dir_all(out)?;
    let g = spec.realize(seed)?;
    let mut v = BufWriter::new(File::create(out.join("vertices.csv"))?);
    g.cloud().write_csv(&mut v)?;
    v.flush()?;
    let mut e = BufWriter::new(File::create(out.join("edges.csv"))?);
    g.write_edges_csv(&mut e)?;
    e.flush()?;
    eprintln!("{} vertices, {} edges", g.vertex_count(), g.edge_count());
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Generate { model, out } => generate(&model.spec()?, model.seed, &out),
        Command::Distance { model, radii, samples, out } => {
            let g = model.spec()?.realize(model.seed)?;
            let rows = distance_ratio_profile(&g, &radii, samples, model.seed)?;
            let mut w = sink(&out)?;
            write_profile_csv(&rows, &mut w)?;
            Ok(w.flush()?)
        }
        Command::Longedges { model, m, n_factor, method, reps, out } => {
            let spec = model.spec()?;
            let rows = m
                .iter()
                .map(|&m| estimate_p_long_edge_with(&spec, m, n_factor * m, reps, model.seed, method))
                .collect::<Result<Vec<_>>>()?;
            let mut w = sink(&out)?;
            write_long_edge_csv(&rows, &mut w)?;
            Ok(w.flush()?)
        }
        Command::Renorm { model, k, stage, reps, out } => {
            let spec = model.spec()?;
            let ladder = ScaleLadder::new(k, stage)?;
            let rows = (0..=stage)
                .map(|n| estimate_psi(&spec, &ladder, n, reps, model.seed))
                .collect::<Result<Vec<_>>>()?;
            let mut w = sink(&out)?;
            write_psi_csv(&rows, &mut w)?;
            Ok(w.flush()?)
        }
        Command::Mixing { model, event, m, x, reps, out } => {
            let spec = model.spec()?;
            let event = LocalEvent::parse(&event).map_err(|e| Error::config("event", e.to_string()))?;
            let rows = m
                .iter()
                .map(|&m| estimate_mixing(&spec, &event, m, &x, reps, model.seed))
                .collect::<Result<Vec<_>>>()?;
            let mut w = sink(&out)?;
            write_mixing_csv(&rows, &mut w)?;
            Ok(w.flush()?)
        }
        Command::Experiment { config, seed, reps, out } => {
            let mut cfg = ExperimentConfig::from_file(&config)?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(r) = reps {
                cfg.replicates = r;
            }
            if let Some(o) = out {
                cfg.out = o;
            }
            let res = run_experiment(&cfg)?;
            eprintln!(
                "{}: {} replicate rows computed, {} resumed; summary in {}",
                res.kind,
                res.computed,
                res.resumed,
                res.summary_csv.display()
            );
            Ok(())
        }
    }
}

fn init_pool() -> Result<()> {
    let Ok(v) = std::env::var("CHEMDIST_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Error::config("CHEMDIST_THREADS", format!("expected a positive integer, got {v:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::resource(e.to_string()))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match init_pool().and_then(|_| run(cli)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("chemdist: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
