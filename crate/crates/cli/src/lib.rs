//! Command-line harness around the `fgssc` solvers: file I/O, configuration,
//! phase-transition sweeps and the face benchmark.

pub mod config;
pub mod error;
pub mod faces;
pub mod io;
pub mod sweep;

use std::fs;
use std::path::Path;

use fgssc::spectral::{build_affinity, spectral_cluster, AffinityMatrix, LabelVector};
use fgssc::synth::{corrupt, gen_model1, gen_model2, CorruptionSpec};
use fgssc::{self_representation, Algorithm, DataMatrix, ObservationMask, SolverConfig};

pub use error::{CliError, CliResult};
use sweep::SweepModel;

/// Clusters `data` into `k` groups; a missing mask trusts every entry.
pub fn cluster_data(
    data: DataMatrix,
    mask: Option<ObservationMask>,
    k: usize,
    algorithm: Algorithm,
    config: &SolverConfig,
    seed: u64,
) -> CliResult<(LabelVector, AffinityMatrix)> {
    let mask = mask.unwrap_or_else(|| ObservationMask::for_data(&data));
    if mask.shape() != (data.dim(), data.len()) {
        let (d, n) = mask.shape();
        return Err(CliError::Dimension(format!(
            "mask is {d}×{n} but data is {}×{}",
            data.dim(),
            data.len()
        )));
    }
    let c = self_representation(&data, &mask, config, algorithm)?;
    let w = build_affinity(&c);
    let labels = spectral_cluster(&w, k, seed)?;
    Ok((labels, w))
}

/// Corruption applied by [`write_synthetic`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthSpec {
    pub model: SweepModel,
    pub theta: f64,
    pub p_err: f64,
    pub p_ers: f64,
    pub noise_db: Option<f64>,
    pub seed: u64,
}

/// Writes `data.csv`, `mask.csv`, `labels.txt` and `clean.csv` to `out_dir`.
pub fn write_synthetic(out_dir: &Path, spec: &SynthSpec) -> CliResult<()> {
    let (y, truth) = match spec.model {
        SweepModel::ModelI => gen_model1(spec.theta, 35, spec.seed)?,
        SweepModel::ModelII(d) => gen_model2(d, 7, (3, 10), 200, spec.seed)?,
    };
    let corruption = CorruptionSpec {
        p_err: spec.p_err,
        p_ers: spec.p_ers,
        noise_db: spec.noise_db,
        seed: spec.seed.wrapping_add(1),
    };
    let (corrupted, mask, _) = corrupt(&y, &corruption)?;
    fs::create_dir_all(out_dir).map_err(|e| CliError::io(out_dir, e))?;
    io::write_matrix(&out_dir.join("data.csv"), corrupted.values())?;
    io::write_mask(&out_dir.join("mask.csv"), &mask)?;
    io::write_labels(&out_dir.join("labels.txt"), &truth.labels)?;
    io::write_matrix(&out_dir.join("clean.csv"), truth.clean.values())
}
