//! Phase-transition sweeps over `(θ, P_err, P_ers)` grids.
//!
//! Every trial gets its own seed derived from the base seed and its grid
//! position, so cells are independent and a sweep is reproducible regardless
//! of the worker count.

use std::fs;
use std::path::{Path, PathBuf};

use fgssc::greedy::{schedule_alphas, ScheduleModel};
use fgssc::spectral::misclassification;
use fgssc::synth::{corrupt, gen_model1, gen_model2, CorruptionSpec};
use fgssc::{cluster, Algorithm, SolverConfig};
use image::{GrayImage, Luma};
use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{CliError, CliResult};
use crate::io::write_pgm;

/// Pixels per grid cell in the rendered graymap.
pub const CELL_PX: u32 = 16;

/// Evenly spaced values `min..=max`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub min: f64,
    pub max: f64,
    pub steps: usize,
}

impl Grid {
    pub fn single(v: f64) -> Self {
        Grid { min: v, max: v, steps: 1 }
    }

    pub fn values(&self) -> Vec<f64> {
        if self.steps == 1 {
            return vec![self.min];
        }
        let h = (self.max - self.min) / (self.steps - 1) as f64;
        (0..self.steps).map(|i| self.min + h * i as f64).collect()
    }
}

impl std::str::FromStr for Grid {
    type Err = String;

    /// `v` or `min:max:steps`.
    fn from_str(s: &str) -> Result<Self, String> {
        let parts: Vec<&str> = s.split(':').collect();
        let num = |t: &str| t.trim().parse::<f64>().map_err(|_| format!("bad number {t:?} in grid {s:?}"));
        match parts.as_slice() {
            [v] => Ok(Grid::single(num(v)?)),
            [lo, hi, n] => Ok(Grid {
                min: num(lo)?,
                max: num(hi)?,
                steps: n.trim().parse().map_err(|_| format!("bad step count in grid {s:?}"))?,
            }),
            _ => Err(format!("grid {s:?}: expected v or min:max:steps")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepModel {
    /// Three 4-dimensional subspaces in `R^50`, 35 points each.
    ModelI,
    /// Seven random subspaces of dimension 3–10 in `R^D`, 200 points.
    ModelII(usize),
}

impl SweepModel {
    pub fn clusters(self) -> usize {
        match self {
            SweepModel::ModelI => 3,
            SweepModel::ModelII(_) => 7,
        }
    }
}

impl std::str::FromStr for SweepModel {
    type Err = String;

    /// `model1`, or `model2:D`.
    fn from_str(s: &str) -> Result<Self, String> {
        match s.split_once(':') {
            None if s == "model1" => Ok(SweepModel::ModelI),
            Some(("model2", d)) => d
                .parse()
                .map(SweepModel::ModelII)
                .map_err(|_| format!("bad ambient dimension in {s:?}")),
            _ => Err(format!("unknown model {s:?}; expected model1 or model2:D")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub theta_list: Vec<f64>,
    pub p_err: Grid,
    pub p_ers: Grid,
    pub trials: usize,
    pub algorithm: Algorithm,
    pub model: SweepModel,
    pub noise_db: Option<f64>,
    pub base_seed: u64,
}

impl SweepSpec {
    pub fn validate(&self) -> CliResult<()> {
        if self.theta_list.is_empty() {
            return Err(CliError::Parse("empty θ list".into()));
        }
        if self.p_err.steps == 0 || self.p_ers.steps == 0 {
            return Err(CliError::Parse("grid steps must be at least 1".into()));
        }
        if self.trials == 0 {
            return Err(CliError::Parse("trials must be at least 1".into()));
        }
        Ok(())
    }
}

/// Averaged misclassification for one θ: rows follow `P_ers`, columns `P_err`.
#[derive(Debug, Clone, PartialEq)]
pub struct ThetaGrid {
    pub theta: f64,
    pub p_err: Vec<f64>,
    pub p_ers: Vec<f64>,
    pub cells: DMatrix<f64>,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of one trial, hashed from its position in the sweep.
pub fn trial_seed(base_seed: u64, theta_idx: usize, cell_idx: usize, trial_idx: usize) -> u64 {
    [theta_idx, cell_idx, trial_idx]
        .iter()
        .fold(splitmix64(base_seed), |h, &i| splitmix64(h ^ i as u64))
}

/// Solver configuration for one cell: `α_e`, `α_z` follow the erasure schedule.
pub fn cell_config(base: &SolverConfig, algorithm: Algorithm, model: SweepModel, p_ers: f64) -> CliResult<SolverConfig> {
    let table = match (model, algorithm) {
        (SweepModel::ModelI, Algorithm::Fgssc) => ScheduleModel::ModelIFgssc,
        (SweepModel::ModelI, _) => ScheduleModel::ModelISsc,
        (SweepModel::ModelII(d), _) => ScheduleModel::ModelII(d),
    };
    let alphas = schedule_alphas(p_ers, table)?;
    let mut config = SolverConfig { alpha_e: alphas.alpha_e, alpha_z: alphas.alpha_z, ..base.clone() };
    if algorithm != Algorithm::Ssc && config.greedy.is_none() {
        config.greedy = Some(Default::default());
    }
    Ok(config)
}

/// One seeded trial: generate, corrupt, cluster, score.
pub fn run_trial(
    model: SweepModel,
    algorithm: Algorithm,
    config: &SolverConfig,
    theta: f64,
    corruption: (f64, f64, Option<f64>),
    seed: u64,
) -> fgssc::Result<f64> {
    let (y, truth) = match model {
        SweepModel::ModelI => gen_model1(theta, 35, seed)?,
        SweepModel::ModelII(d) => gen_model2(d, 7, (3, 10), 200, seed)?,
    };
    let (p_err, p_ers, noise_db) = corruption;
    let spec = CorruptionSpec { p_err, p_ers, noise_db, seed: splitmix64(seed ^ 0xC0FF_EE00) };
    let (y, mask, _) = corrupt(&y, &spec)?;
    let labels = cluster(&y, &mask, config, algorithm, model.clusters(), seed)?;
    misclassification(&labels, &truth.labels)
}

pub(crate) fn build_pool(jobs: Option<usize>) -> CliResult<rayon::ThreadPool> {
    let threads = jobs
        .or_else(|| std::thread::available_parallelism().ok().map(|n| n.get()))
        .unwrap_or(1)
        .max(1);
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::Io(format!("worker pool: {e}")))
}

/// Computes every grid without touching the filesystem.
pub fn compute_sweep(spec: &SweepSpec, base: &SolverConfig, jobs: Option<usize>) -> CliResult<Vec<ThetaGrid>> {
    spec.validate()?;
    let p_err = spec.p_err.values();
    let p_ers = spec.p_ers.values();
    let configs = p_ers
        .iter()
        .map(|&pe| cell_config(base, spec.algorithm, spec.model, pe))
        .collect::<CliResult<Vec<_>>>()?;

    let mut work = Vec::new();
    for t in 0..spec.theta_list.len() {
        for r in 0..p_ers.len() {
            for c in 0..p_err.len() {
                for trial in 0..spec.trials {
                    work.push((t, r, c, trial));
                }
            }
        }
    }
    let pool = build_pool(jobs)?;
    let scores: Vec<f64> = pool.install(|| {
        work.par_iter()
            .map(|&(t, r, c, trial)| {
                let cell = r * p_err.len() + c;
                let seed = trial_seed(spec.base_seed, t, cell, trial);
                let corruption = (p_err[c], p_ers[r], spec.noise_db);
                run_trial(spec.model, spec.algorithm, &configs[r], spec.theta_list[t], corruption, seed)
                    .unwrap_or(f64::NAN)
            })
            .collect()
    });

    let per_theta = p_ers.len() * p_err.len() * spec.trials;
    Ok(spec
        .theta_list
        .iter()
        .enumerate()
        .map(|(t, &theta)| {
            let block = &scores[t * per_theta..(t + 1) * per_theta];
            let cells = DMatrix::from_fn(p_ers.len(), p_err.len(), |r, c| {
                let start = (r * p_err.len() + c) * spec.trials;
                block[start..start + spec.trials].iter().sum::<f64>() / spec.trials as f64
            });
            ThetaGrid { theta, p_err: p_err.clone(), p_ers: p_ers.clone(), cells }
        })
        .collect())
}

pub fn format_grid_csv(grid: &ThetaGrid) -> String {
    let mut out = String::from("p_ers\\p_err");
    for v in &grid.p_err {
        out.push_str(&format!(",{v:.4}"));
    }
    out.push('\n');
    for (r, pe) in grid.p_ers.iter().enumerate() {
        out.push_str(&format!("{pe:.4}"));
        for c in 0..grid.p_err.len() {
            out.push_str(&format!(",{:.6}", grid.cells[(r, c)]));
        }
        out.push('\n');
    }
    out
}

/// Reads the cell values back from [`format_grid_csv`] output.
pub fn parse_grid_csv(text: &str) -> Result<DMatrix<f64>, String> {
    let rows: Vec<Vec<f64>> = text
        .lines()
        .skip(1)
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            l.split(',')
                .skip(1)
                .map(|f| f.trim().parse::<f64>().map_err(|_| format!("bad cell {f:?}")))
                .collect()
        })
        .collect::<Result<_, _>>()?;
    let cols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != cols) {
        return Err("ragged grid".into());
    }
    Ok(DMatrix::from_fn(rows.len(), cols, |r, c| rows[r][c]))
}

/// 0 → white, ≥ 0.5 → black, linear in between; failed cells are black.
pub fn intensity(misclassification: f64) -> u8 {
    if misclassification.is_nan() {
        return 0;
    }
    let level = 1.0 - (misclassification / 0.5).clamp(0.0, 1.0);
    (255.0 * level).round() as u8
}

pub fn render_graymap(cells: &DMatrix<f64>) -> GrayImage {
    let (rows, cols) = cells.shape();
    GrayImage::from_fn(cols as u32 * CELL_PX, rows as u32 * CELL_PX, |x, y| {
        Luma([intensity(cells[((y / CELL_PX) as usize, (x / CELL_PX) as usize)])])
    })
}

fn theta_stem(theta: f64) -> String {
    format!("theta_{}", format!("{theta}").replace('.', "p"))
}

/// Runs the sweep and writes `theta_<θ>.csv` and `theta_<θ>.pgm` per angle.
pub fn run_sweep(spec: &SweepSpec, base: &SolverConfig, out_dir: &Path, jobs: Option<usize>) -> CliResult<Vec<PathBuf>> {
    let grids = compute_sweep(spec, base, jobs)?;
    fs::create_dir_all(out_dir).map_err(|e| CliError::io(out_dir, e))?;
    let mut written = Vec::new();
    for grid in &grids {
        let stem = theta_stem(grid.theta);
        let csv_path = out_dir.join(format!("{stem}.csv"));
        let text = format_grid_csv(grid);
        fs::write(&csv_path, &text).map_err(|e| CliError::io(&csv_path, e))?;
        let cells = parse_grid_csv(&text).map_err(CliError::Parse)?;
        let pgm_path = out_dir.join(format!("{stem}.pgm"));
        write_pgm(&pgm_path, &render_graymap(&cells))?;
        written.push(csv_path);
        written.push(pgm_path);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_values() {
        assert_eq!(Grid::single(0.3).values(), vec![0.3]);
        let g: Grid = "0:0.5:3".parse().unwrap();
        assert_eq!(g.values(), vec![0.0, 0.25, 0.5]);
        assert!("0:1".parse::<Grid>().is_err());
    }

    #[test]
    fn model_names() {
        assert_eq!("model1".parse::<SweepModel>().unwrap(), SweepModel::ModelI);
        assert_eq!("model2:25".parse::<SweepModel>().unwrap(), SweepModel::ModelII(25));
        assert!("model3".parse::<SweepModel>().is_err());
    }

    #[test]
    fn seeds_differ_across_positions() {
        let mut seen = std::collections::HashSet::new();
        for t in 0..3 {
            for c in 0..5 {
                for k in 0..5 {
                    assert!(seen.insert(trial_seed(7, t, c, k)));
                }
            }
        }
        assert_ne!(trial_seed(7, 0, 0, 0), trial_seed(8, 0, 0, 0));
    }

    #[test]
    fn intensity_mapping() {
        assert_eq!(intensity(0.0), 255);
        assert_eq!(intensity(0.25), 128);
        assert_eq!(intensity(0.5), 0);
        assert_eq!(intensity(0.9), 0);
        assert_eq!(intensity(f64::NAN), 0);
    }

    #[test]
    fn csv_round_trip() {
        let grid = ThetaGrid {
            theta: 60.0,
            p_err: vec![0.0, 0.1],
            p_ers: vec![0.0],
            cells: DMatrix::from_row_slice(1, 2, &[0.0, 0.125]),
        };
        let text = format_grid_csv(&grid);
        assert_eq!(text, "p_ers\\p_err,0.0000,0.1000\n0.0000,0.000000,0.125000\n");
        assert_eq!(parse_grid_csv(&text).unwrap(), grid.cells);
    }
}
