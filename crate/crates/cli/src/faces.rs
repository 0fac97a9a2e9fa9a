//! Face-image ingestion and the grouped clustering protocol.
//!
//! The dataset root holds one directory per subject, each containing
//! portable graymaps of that subject under varying illumination. Subjects
//! are numbered from 1 in lexicographic directory order. Files whose name
//! contains `Ambient` are skipped.

use std::fs;
use std::path::{Path, PathBuf};

use fgssc::spectral::{misclassification, LabelVector};
use fgssc::{cluster, Algorithm, DataMatrix, ObservationMask, SolverConfig};
use image::{GrayImage, Luma};
use itertools::Itertools;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{CliError, CliResult};
use crate::io::{read_pgm, write_pgm};
use crate::sweep::build_pool;

/// Subject ranges (1-based, inclusive) processed as separate groups.
pub const GROUPS: [(usize, usize); 4] = [(1, 10), (11, 20), (21, 30), (31, 38)];

pub const SOURCE_SHAPE: (usize, usize) = (192, 168);
pub const DEFAULT_TARGET: (usize, usize) = (48, 42);

#[derive(Debug, Clone, PartialEq)]
pub struct FaceDatasetSpec {
    pub root: PathBuf,
    /// `(rows, cols)` after decimation.
    pub downsample_to: (usize, usize),
    /// 1-based subject numbers, in the order their columns should appear.
    pub subjects: Vec<usize>,
}

pub fn subject_dirs(root: &Path) -> CliResult<Vec<PathBuf>> {
    let entries = fs::read_dir(root).map_err(|e| CliError::io(root, e))?;
    let mut dirs = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| CliError::io(root, e))?.path();
        if path.is_dir() {
            dirs.push(path);
        }
    }
    dirs.sort();
    Ok(dirs)
}

pub fn subject_images(dir: &Path) -> CliResult<Vec<PathBuf>> {
    let entries = fs::read_dir(dir).map_err(|e| CliError::io(dir, e))?;
    let mut files = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| CliError::io(dir, e))?.path();
        let name = path.file_name().and_then(|n| n.to_str()).unwrap_or_default();
        let is_pgm = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("pgm"));
        if is_pgm && !name.contains("Ambient") {
            files.push(path);
        }
    }
    files.sort();
    Ok(files)
}

/// Strided decimation to `target`, flattened column-major.
pub fn decimate(img: &GrayImage, target: (usize, usize)) -> CliResult<Vec<f64>> {
    let (rows, cols) = (img.height() as usize, img.width() as usize);
    let (tr, tc) = target;
    if tr == 0 || tc == 0 || rows % tr != 0 || cols % tc != 0 {
        return Err(CliError::Dimension(format!(
            "cannot decimate {rows}×{cols} to {tr}×{tc}"
        )));
    }
    let (sr, sc) = (rows / tr, cols / tc);
    let mut out = Vec::with_capacity(tr * tc);
    for c in 0..tc {
        for r in 0..tr {
            out.push(f64::from(img.get_pixel((c * sc) as u32, (r * sr) as u32)[0]));
        }
    }
    Ok(out)
}

fn unit_column(mut v: Vec<f64>, origin: &Path) -> CliResult<Vec<f64>> {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Err(CliError::Parse(format!("{}: image is all black", origin.display())));
    }
    v.iter_mut().for_each(|x| *x /= norm);
    Ok(v)
}

/// Loads every usable image of one subject as unit-norm columns.
pub fn load_subject(dir: &Path, target: (usize, usize), expected: Option<(u32, u32)>) -> CliResult<Vec<Vec<f64>>> {
    let files = subject_images(dir)?;
    if files.is_empty() {
        return Err(CliError::Io(format!("{}: no images", dir.display())));
    }
    let mut shape = expected;
    files
        .iter()
        .map(|path| {
            let img = read_pgm(path)?;
            let dims = img.dimensions();
            match shape {
                Some(s) if s != dims => {
                    return Err(CliError::Dimension(format!(
                        "{}: {}×{} differs from {}×{}",
                        path.display(),
                        dims.1,
                        dims.0,
                        s.1,
                        s.0
                    )))
                }
                _ => shape = Some(dims),
            }
            unit_column(decimate(&img, target)?, path)
        })
        .collect()
}

/// Data matrix with one column per image, grouped by subject in the listed order.
pub fn ingest_faces(spec: &FaceDatasetSpec) -> CliResult<(DataMatrix, LabelVector)> {
    let dirs = subject_dirs(&spec.root)?;
    let mut columns = Vec::new();
    let mut labels = Vec::new();
    let mut shape = None;
    for &s in &spec.subjects {
        let dir = s
            .checked_sub(1)
            .and_then(|i| dirs.get(i))
            .ok_or_else(|| CliError::Parse(format!("subject {s} not in 1..={}", dirs.len())))?;
        let cols = load_subject(dir, spec.downsample_to, shape)?;
        if shape.is_none() {
            let first = subject_images(dir)?.remove(0);
            shape = Some(read_pgm(&first)?.dimensions());
        }
        labels.extend(std::iter::repeat_n(s, cols.len()));
        columns.extend(cols);
    }
    assemble(&columns, labels, spec.downsample_to)
}

fn assemble(columns: &[Vec<f64>], labels: Vec<usize>, target: (usize, usize)) -> CliResult<(DataMatrix, LabelVector)> {
    let d = target.0 * target.1;
    let y = DMatrix::from_fn(d, columns.len(), |i, j| columns[j][i]);
    Ok((DataMatrix::new(y)?, LabelVector(labels)))
}

/// One clustering job of the protocol.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Experiment {
    /// Index into [`GROUPS`].
    pub group: usize,
    pub subjects: Vec<usize>,
}

/// All `k`-subsets within each group; groups smaller than `k` contribute nothing.
pub fn enumerate_experiments(k: usize) -> Vec<Experiment> {
    GROUPS
        .iter()
        .enumerate()
        .flat_map(|(g, &(lo, hi))| {
            (lo..=hi)
                .combinations(k)
                .map(move |subjects| Experiment { group: g, subjects })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub count: usize,
    /// Percent.
    pub mean: f64,
    /// Percent.
    pub median: f64,
}

impl Summary {
    pub fn of(rates: &[f64]) -> Option<Summary> {
        if rates.is_empty() {
            return None;
        }
        let mut sorted: Vec<f64> = rates.iter().map(|r| 100.0 * r).collect();
        sorted.sort_by(f64::total_cmp);
        let n = sorted.len();
        let median = if n % 2 == 1 { sorted[n / 2] } else { 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]) };
        Some(Summary { count: n, mean: sorted.iter().sum::<f64>() / n as f64, median })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FaceReport {
    pub k: usize,
    pub algorithm: Algorithm,
    pub groups: Vec<Option<Summary>>,
    pub overall: Option<Summary>,
    /// Experiments that raised a solver error (excluded from the statistics).
    pub failed: usize,
}

impl FaceReport {
    /// Mean and median rows per group plus the pooled column, in percent.
    pub fn table(&self) -> String {
        let cell = |s: &Option<Summary>, pick: fn(&Summary) -> f64| {
            s.as_ref().map_or_else(|| format!("{:>8}", "-"), |s| format!("{:>8.3}", pick(s)))
        };
        let mut out = format!("{} subjects ({})\n{:<8}", self.k, self.algorithm.name(), "");
        for g in 1..=self.groups.len() {
            out.push_str(&format!("{g:>8}"));
        }
        out.push_str(&format!("{:>8}\n", "all"));
        for (name, pick) in [("Mean", (|s: &Summary| s.mean) as fn(&Summary) -> f64), ("Median", |s| s.median)] {
            out.push_str(&format!("{name:<8}"));
            for s in &self.groups {
                out.push_str(&cell(s, pick));
            }
            out.push_str(&cell(&self.overall, pick));
            out.push('\n');
        }
        let total = self.overall.as_ref().map_or(0, |s| s.count);
        out.push_str(&format!("experiments: {total}, failed: {}\n", self.failed));
        out
    }
}

/// Runs the protocol for subsets of size `k`; `limit` truncates the experiment list.
pub fn run_faces(
    root: &Path,
    target: (usize, usize),
    k: usize,
    algorithm: Algorithm,
    config: &SolverConfig,
    jobs: Option<usize>,
    limit: Option<usize>,
) -> CliResult<FaceReport> {
    let mut experiments = enumerate_experiments(k);
    if let Some(limit) = limit {
        experiments.truncate(limit);
    }
    let dirs = subject_dirs(root)?;
    let needed: Vec<usize> = experiments.iter().flat_map(|e| e.subjects.iter().copied()).unique().sorted().collect();
    if let Some(&missing) = needed.iter().find(|&&s| s > dirs.len()) {
        return Err(CliError::Io(format!(
            "{}: subject {missing} required but only {} present",
            root.display(),
            dirs.len()
        )));
    }
    let mut cache: Vec<Option<Vec<Vec<f64>>>> = vec![None; dirs.len() + 1];
    let mut shape = None;
    for &s in &needed {
        cache[s] = Some(load_subject(&dirs[s - 1], target, shape)?);
        if shape.is_none() {
            shape = Some(read_pgm(&subject_images(&dirs[s - 1])?[0])?.dimensions());
        }
    }

    let pool = build_pool(jobs)?;
    let rates: Vec<Option<f64>> = pool.install(|| {
        experiments
            .par_iter()
            .map(|e| {
                let mut columns = Vec::new();
                let mut labels = Vec::new();
                for &s in &e.subjects {
                    let cols = cache[s].as_ref().expect("loaded above");
                    labels.extend(std::iter::repeat_n(s, cols.len()));
                    columns.extend(cols.iter().cloned());
                }
                let (y, truth) = assemble(&columns, labels, target).ok()?;
                let mask = ObservationMask::for_data(&y);
                let pred = cluster(&y, &mask, config, algorithm, k, 0).ok()?;
                misclassification(&pred, &truth).ok()
            })
            .collect()
    });

    let mut per_group = vec![Vec::new(); GROUPS.len()];
    let mut failed = 0;
    for (e, r) in experiments.iter().zip(&rates) {
        match r {
            Some(r) => per_group[e.group].push(*r),
            None => failed += 1,
        }
    }
    let all: Vec<f64> = per_group.iter().flatten().copied().collect();
    Ok(FaceReport {
        k,
        algorithm,
        groups: per_group.iter().map(|g| Summary::of(g)).collect(),
        overall: Summary::of(&all),
        failed,
    })
}

/// Writes a synthetic illumination dataset: each subject's images are
/// nonnegative combinations of `rank` smooth random patterns.
pub fn write_synthetic_faces(
    root: &Path,
    subjects: usize,
    images_per_subject: usize,
    rank: usize,
    seed: u64,
) -> CliResult<()> {
    let (rows, cols) = SOURCE_SHAPE;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for s in 1..=subjects {
        let dir = root.join(format!("subject{s:02}"));
        fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
        let patterns: Vec<DMatrix<f64>> = (0..rank)
            .map(|_| {
                let (fr, fc, pr, pc): (f64, f64, f64, f64) =
                    (rng.random_range(0.5..4.0), rng.random_range(0.5..4.0), rng.random(), rng.random());
                DMatrix::from_fn(rows, cols, |r, c| {
                    let u = r as f64 / rows as f64;
                    let v = c as f64 / cols as f64;
                    0.5 + 0.5 * (std::f64::consts::TAU * (fr * u + pr)).sin() * (std::f64::consts::TAU * (fc * v + pc)).cos()
                })
            })
            .collect();
        for i in 0..images_per_subject {
            let weights: Vec<f64> = (0..rank).map(|_| rng.random_range(0.1..1.0)).collect();
            let scale = 255.0 / weights.iter().sum::<f64>();
            let img = GrayImage::from_fn(cols as u32, rows as u32, |x, y| {
                let v: f64 = patterns.iter().zip(&weights).map(|(p, w)| w * p[(y as usize, x as usize)]).sum();
                Luma([(v * scale).round().clamp(0.0, 255.0) as u8])
            });
            write_pgm(&dir.join(format!("subject{s:02}_img{i:02}.pgm")), &img)?;
        }
        let ambient = GrayImage::from_pixel(cols as u32, rows as u32, Luma([7]));
        write_pgm(&dir.join(format!("subject{s:02}_Ambient.pgm")), &ambient)?;
    }
    Ok(())
}
