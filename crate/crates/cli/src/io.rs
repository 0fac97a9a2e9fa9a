//! File formats: CSV matrices and masks, label lists and 8-bit graymaps.
//!
//! Matrices are row-major CSV of reals with an optional first line `# D N`.
//! Masks use the same layout with `0`/`1` entries.

use std::fs;
use std::path::Path;

use fgssc::spectral::LabelVector;
use fgssc::ObservationMask;
use image::GrayImage;
use nalgebra::DMatrix;

use crate::error::{CliError, CliResult};

fn parse_header(line: &str) -> Option<(usize, usize)> {
    let mut it = line.trim_start_matches('#').split_whitespace();
    let d = it.next()?.parse().ok()?;
    let n = it.next()?.parse().ok()?;
    it.next().is_none().then_some((d, n))
}

/// Parses CSV text into a matrix; `origin` only labels error messages.
pub fn parse_matrix(text: &str, origin: &Path) -> CliResult<DMatrix<f64>> {
    let (declared, body) = match text.split_once('\n') {
        Some((first, rest)) if first.trim_start().starts_with('#') => {
            let dims = parse_header(first.trim())
                .ok_or_else(|| CliError::parse(origin, format!("bad header {first:?}")))?;
            (Some(dims), rest)
        }
        _ if text.trim_start().starts_with('#') => {
            let dims = parse_header(text.trim())
                .ok_or_else(|| CliError::parse(origin, "bad header"))?;
            (Some(dims), "")
        }
        _ => (None, text),
    };

    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(body.as_bytes());
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| CliError::parse(origin, e))?;
        if record.len() == 1 && record[0].is_empty() {
            continue;
        }
        let row = record
            .iter()
            .map(|field| {
                field.parse::<f64>().map_err(|_| {
                    CliError::parse(origin, format!("row {}: {field:?} is not a number", line + 1))
                })
            })
            .collect::<CliResult<Vec<_>>>()?;
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(CliError::parse(
                    origin,
                    format!("row {} has {} fields, expected {}", line + 1, row.len(), first.len()),
                ));
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(CliError::parse(origin, "no data rows"));
    }
    let (d, n) = (rows.len(), rows[0].len());
    if let Some((hd, hn)) = declared {
        if (hd, hn) != (d, n) {
            return Err(CliError::Dimension(format!(
                "{}: header says {hd}×{hn}, found {d}×{n}",
                origin.display()
            )));
        }
    }
    Ok(DMatrix::from_fn(d, n, |i, j| rows[i][j]))
}

pub fn read_matrix(path: &Path) -> CliResult<DMatrix<f64>> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse_matrix(&text, path)
}

/// Formats a matrix with a `# D N` header; values use shortest round-trip form.
pub fn format_matrix(m: &DMatrix<f64>) -> String {
    let mut out = format!("# {} {}\n", m.nrows(), m.ncols());
    for row in m.row_iter() {
        let fields: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    out
}

pub fn write_matrix(path: &Path, m: &DMatrix<f64>) -> CliResult<()> {
    fs::write(path, format_matrix(m)).map_err(|e| CliError::io(path, e))
}

pub fn read_mask(path: &Path) -> CliResult<ObservationMask> {
    let m = read_matrix(path)?;
    if let Some(bad) = m.iter().find(|&&v| v != 0.0 && v != 1.0) {
        return Err(CliError::parse(path, format!("mask entry {bad} is neither 0 nor 1")));
    }
    Ok(ObservationMask::from_matrix(m.map(|v| v == 1.0)))
}

pub fn write_mask(path: &Path, mask: &ObservationMask) -> CliResult<()> {
    let (d, n) = mask.shape();
    let mut out = format!("# {d} {n}\n");
    for row in mask.values().row_iter() {
        let fields: Vec<&str> = row.iter().map(|&t| if t { "1" } else { "0" }).collect();
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| CliError::io(path, e))
}

pub fn read_labels(path: &Path) -> CliResult<LabelVector> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(|l| l.parse::<usize>().map_err(|_| CliError::parse(path, format!("bad label {l:?}"))))
        .collect::<CliResult<Vec<_>>>()
        .map(LabelVector)
}

pub fn write_labels(path: &Path, labels: &LabelVector) -> CliResult<()> {
    let mut out = String::with_capacity(labels.len() * 3);
    for l in labels.as_slice() {
        out.push_str(&l.to_string());
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| CliError::io(path, e))
}

/// Writes a binary (P5) graymap.
pub fn write_pgm(path: &Path, image: &GrayImage) -> CliResult<()> {
    image
        .save_with_format(path, image::ImageFormat::Pnm)
        .map_err(|e| CliError::io(path, e))
}

pub fn read_pgm(path: &Path) -> CliResult<GrayImage> {
    let img = image::open(path).map_err(|e| CliError::io(path, e))?;
    Ok(img.into_luma8())
}
