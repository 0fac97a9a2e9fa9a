use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use fgssc::spectral::misclassification;
use fgssc::{Algorithm, DataMatrix, SolverConfig};
use fgssc_cli::config::{apply, face_config, read_config};
use fgssc_cli::faces::{run_faces, write_synthetic_faces, DEFAULT_TARGET};
use fgssc_cli::sweep::{run_sweep, Grid, SweepModel, SweepSpec};
use fgssc_cli::{cluster_data, io, write_synthetic, CliError, CliResult, SynthSpec};

#[derive(Parser)]
#[command(name = "fgssc", version, about = "Sparse subspace clustering with erasures and errors")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Options shared by every solving subcommand.
#[derive(clap::Args)]
struct SolverArgs {
    #[arg(long, default_value = "fgssc", value_parser = parse_algorithm)]
    algorithm: Algorithm,
    /// `key = value` file; explicit flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Extra `key=value` overrides, applied last.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[arg(long)]
    alpha_e: Option<f64>,
    #[arg(long)]
    alpha_z: Option<f64>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
}

impl SolverArgs {
    fn resolve(&self, base: SolverConfig) -> CliResult<SolverConfig> {
        let mut config = match &self.config {
            Some(path) => read_config(path, base)?,
            None => base,
        };
        if self.algorithm != Algorithm::Ssc && config.greedy.is_none() {
            config.greedy = Some(Default::default());
        }
        let flags = [
            ("alpha_e", self.alpha_e.map(|v| v.to_string())),
            ("alpha_z", self.alpha_z.map(|v| v.to_string())),
            ("epsilon", self.epsilon.map(|v| v.to_string())),
            ("max_iter", self.max_iter.map(|v| v.to_string())),
        ];
        for (key, value) in flags {
            if let Some(value) = value {
                apply(&mut config, key, &value).map_err(CliError::Parse)?;
            }
        }
        for pair in &self.set {
            let (key, value) = pair
                .split_once('=')
                .ok_or_else(|| CliError::Parse(format!("--set {pair:?}: expected KEY=VALUE")))?;
            apply(&mut config, key.trim(), value.trim()).map_err(CliError::Parse)?;
        }
        config.validate()?;
        Ok(config)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Cluster the columns of a CSV data matrix.
    Cluster {
        #[arg(long)]
        data: PathBuf,
        /// 0/1 CSV of trusted entries; all entries are trusted when omitted.
        #[arg(long)]
        mask: Option<PathBuf>,
        #[arg(long)]
        k: usize,
        #[command(flatten)]
        solver: SolverArgs,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output label file, one label per line.
        #[arg(long)]
        out: PathBuf,
        /// Also write the affinity matrix as CSV.
        #[arg(long)]
        affinity: Option<PathBuf>,
        /// Ground-truth labels; prints the misclassification rate.
        #[arg(long)]
        truth: Option<PathBuf>,
    },
    /// Phase-transition sweep over error and erasure rates.
    Sweep {
        /// Comma-separated subspace angles in degrees (model I only).
        #[arg(long, value_delimiter = ',', default_value = "0")]
        theta: Vec<f64>,
        /// `v` or `min:max:steps`.
        #[arg(long, default_value = "0:0.5:11")]
        p_err: Grid,
        #[arg(long, default_value = "0:0.5:11")]
        p_ers: Grid,
        #[arg(long, default_value_t = 20)]
        trials: usize,
        /// `model1` or `model2:D`.
        #[arg(long, default_value = "model1")]
        model: SweepModel,
        #[arg(long)]
        noise_db: Option<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        jobs: Option<usize>,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        solver: SolverArgs,
    },
    /// Face clustering over all subject subsets of size `k`.
    Faces {
        #[arg(long)]
        root: PathBuf,
        #[arg(long)]
        k: usize,
        #[arg(long)]
        jobs: Option<usize>,
        /// Stop after this many experiments.
        #[arg(long)]
        limit: Option<usize>,
        #[command(flatten)]
        solver: SolverArgs,
    },
    /// Write a synthetic data set.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "model1")]
        model: SweepModel,
        #[arg(long, default_value_t = 0.0)]
        theta: f64,
        #[arg(long, default_value_t = 0.0)]
        p_err: f64,
        #[arg(long, default_value_t = 0.0)]
        p_ers: f64,
        #[arg(long)]
        noise_db: Option<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write a synthetic face directory with this many subjects instead.
        #[arg(long)]
        faces: Option<usize>,
        #[arg(long, default_value_t = 16)]
        images: usize,
    },
}

fn parse_algorithm(s: &str) -> Result<Algorithm, String> {
    s.parse().map_err(|e: fgssc::Error| e.to_string())
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Cluster { data, mask, k, solver, seed, out, affinity, truth } => {
            let config = solver.resolve(SolverConfig::default())?;
            let y = DataMatrix::new(io::read_matrix(&data)?)?;
            let mask = mask.as_deref().map(io::read_mask).transpose()?;
            let (labels, w) = cluster_data(y, mask, k, solver.algorithm, &config, seed)?;
            io::write_labels(&out, &labels)?;
            if let Some(path) = affinity {
                io::write_matrix(&path, w.values())?;
            }
            if let Some(path) = truth {
                let rate = misclassification(&labels, &io::read_labels(&path)?)?;
                println!("misclassification: {rate:.6}");
            }
        }
        Command::Sweep { theta, p_err, p_ers, trials, model, noise_db, seed, jobs, out, solver } => {
            let config = solver.resolve(SolverConfig::default())?;
            let spec = SweepSpec {
                theta_list: theta,
                p_err,
                p_ers,
                trials,
                algorithm: solver.algorithm,
                model,
                noise_db,
                base_seed: seed,
            };
            for path in run_sweep(&spec, &config, &out, jobs)? {
                println!("{}", path.display());
            }
        }
        Command::Faces { root, k, jobs, limit, solver } => {
            let config = solver.resolve(face_config())?;
            let report = run_faces(&root, DEFAULT_TARGET, k, solver.algorithm, &config, jobs, limit)?;
            print!("{}", report.table());
        }
        Command::Synth { out, model, theta, p_err, p_ers, noise_db, seed, faces, images } => match faces {
            Some(subjects) => write_synthetic_faces(&out, subjects, images, 3, seed)?,
            None => write_synthetic(&out, &SynthSpec { model, theta, p_err, p_ers, noise_db, seed })?,
        },
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("fgssc: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
