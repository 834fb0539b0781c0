//! Thin command-line front end; all behaviour lives in the library.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use simcon::runner::{self, Experiment, RunError};

#[derive(Parser)]
#[command(
    name = "simcon",
    version,
    about = "Concentration-of-measure experiments on similarity-search workloads"
)]
struct Cli {
    #[command(subcommand)]
    verb: Verb,
}

#[derive(Subcommand)]
enum Verb {
    /// Profile a workload: median NN distance, half-measure radii, homogeneity.
    Profile(CommonArgs),
    /// Measure the fraction of eps-unstable queries.
    Instability(CommonArgs),
    /// Verify the neighbour-count lower bound against its mass bound.
    Theorem(CommonArgs),
    /// Sweep dimensions and fit the exponential count-growth check.
    Sweep(CommonArgs),
    /// Build a separated dataset and check the stability construction.
    StableCheck(CommonArgs),
    /// Bracket the concentration function over an epsilon grid.
    Alpha(CommonArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// Query domain kind (sphere-geodesic, sphere-euclidean, hamming-cube,
    /// hypercube-l2, hypercube-l1, torus, euclidean-ball).
    #[arg(long)]
    space: Option<String>,
    /// Dimension, or a comma-separated ascending list for sweeps.
    #[arg(long)]
    dim: Option<String>,
    /// Dataset: iid:N, sep:DELTA, or (sweeps) exp:RATE.
    #[arg(long)]
    dataset: Option<String>,
    /// Comma-separated epsilon list.
    #[arg(long)]
    eps: Option<String>,
    /// Number of query samples.
    #[arg(long)]
    queries: Option<String>,
    /// Run seed; all randomness derives from it.
    #[arg(long)]
    seed: Option<String>,
    /// Output directory.
    #[arg(long, value_name = "DIR")]
    out: Option<String>,
    /// Override C1 of the Levy upper bound.
    #[arg(long = "alpha-c1")]
    alpha_c1: Option<String>,
    /// Override C2 of the Levy upper bound.
    #[arg(long = "alpha-c2")]
    alpha_c2: Option<String>,
    /// Flat key-value config file, or a manifest.json from a previous run.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Monte-Carlo samples for measure estimates.
    #[arg(long = "mc-samples")]
    mc_samples: Option<String>,
    /// Bisection tolerance for half-measure radii.
    #[arg(long)]
    tol: Option<String>,
    /// Point cap for separated (packing) builds.
    #[arg(long = "max-points")]
    max_points: Option<String>,
    /// Consecutive-rejection stop for packing builds.
    #[arg(long = "max-rejections")]
    max_rejections: Option<String>,
    /// Permutations for the sweep slope test.
    #[arg(long)]
    permutations: Option<String>,
    /// Flag sweep rows whose median NN distance drops below this floor.
    #[arg(long = "m-floor")]
    m_floor: Option<String>,
}

impl CommonArgs {
    fn overrides(&self) -> Vec<(&'static str, Option<&String>)> {
        vec![
            ("space", self.space.as_ref()),
            ("dim", self.dim.as_ref()),
            ("dataset", self.dataset.as_ref()),
            ("eps", self.eps.as_ref()),
            ("queries", self.queries.as_ref()),
            ("seed", self.seed.as_ref()),
            ("out", self.out.as_ref()),
            ("alpha-c1", self.alpha_c1.as_ref()),
            ("alpha-c2", self.alpha_c2.as_ref()),
            ("mc-samples", self.mc_samples.as_ref()),
            ("tol", self.tol.as_ref()),
            ("max-points", self.max_points.as_ref()),
            ("max-rejections", self.max_rejections.as_ref()),
            ("permutations", self.permutations.as_ref()),
            ("m-floor", self.m_floor.as_ref()),
        ]
    }
}

fn execute(experiment: Experiment, args: &CommonArgs) -> Result<(), RunError> {
    let mut entries: BTreeMap<String, String> = BTreeMap::new();
    if let Some(path) = &args.config {
        let (manifest_experiment, file_entries) = runner::load_config_file(path)?;
        if let Some(from_manifest) = manifest_experiment {
            if from_manifest != experiment {
                return Err(RunError::Config(vec![format!(
                    "manifest records a {} run, but the {} verb was given",
                    from_manifest.name(),
                    experiment.name()
                )]));
            }
        }
        entries.extend(file_entries);
    }
    for (key, value) in args.overrides() {
        if let Some(v) = value {
            entries.insert(key.to_string(), v.clone());
        }
    }
    let config = runner::build_config(experiment, &entries).map_err(RunError::Config)?;
    let summary = runner::run(&config)?;
    for note in &summary.notes {
        println!("{note}");
    }
    for name in &summary.outputs {
        println!("wrote {}", summary.out_dir.join(name).display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (experiment, args) = match &cli.verb {
        Verb::Profile(a) => (Experiment::Profile, a),
        Verb::Instability(a) => (Experiment::Instability, a),
        Verb::Theorem(a) => (Experiment::Theorem, a),
        Verb::Sweep(a) => (Experiment::Sweep, a),
        Verb::StableCheck(a) => (Experiment::StableCheck, a),
        Verb::Alpha(a) => (Experiment::Alpha, a),
    };
    match execute(experiment, args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
