//! Flat `key = value` solver configuration files.
//!
//! Keys mirror [`SolverConfig`] and [`GreedyConfig`] field names. Blank lines
//! and lines starting with `#` are ignored. Any greedy key enables the greedy
//! block.

use std::fs;
use std::path::Path;

use fgssc::{ASolveStrategy, CorrectionRule, GreedyConfig, SolverConfig};

use crate::error::{CliError, CliResult};

fn parse_value<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, String> {
    value.parse().map_err(|_| format!("{key}: cannot parse {value:?}"))
}

/// Applies one `key = value` assignment.
pub fn apply(config: &mut SolverConfig, key: &str, value: &str) -> Result<(), String> {
    macro_rules! greedy {
        () => {
            config.greedy.get_or_insert_with(GreedyConfig::default)
        };
    }
    match key {
        "alpha_e" => config.alpha_e = parse_value(key, value)?,
        "alpha_z" => config.alpha_z = parse_value(key, value)?,
        "rho0" => config.rho0 = parse_value(key, value)?,
        "mu" => config.mu = parse_value(key, value)?,
        "epsilon" => config.epsilon = parse_value(key, value)?,
        "affine" => config.affine = parse_value(key, value)?,
        "max_iter" => config.max_iter = parse_value(key, value)?,
        "lambda_e" => config.lambda_e = Some(parse_value(key, value)?),
        "lambda_z" => config.lambda_z = Some(parse_value(key, value)?),
        "a_solve" => {
            config.a_solve = match value {
                "woodbury" => ASolveStrategy::Woodbury,
                "direct" => ASolveStrategy::Direct,
                "auto" => ASolveStrategy::Auto,
                _ => return Err(format!("a_solve: expected woodbury|direct|auto, got {value:?}")),
            }
        }
        "k0" => greedy!().k0 = parse_value(key, value)?,
        "alpha0" => greedy!().alpha0 = parse_value(key, value)?,
        "alpha1" => greedy!().alpha1 = parse_value(key, value)?,
        "alpha2" => greedy!().alpha2 = parse_value(key, value)?,
        "beta" => greedy!().beta = parse_value(key, value)?,
        "refresh_mu" => greedy!().refresh_mu = parse_value(key, value)?,
        "outer_iter" => greedy!().outer_iter = parse_value(key, value)?,
        "max_prune_fraction" => greedy!().max_prune_fraction = parse_value(key, value)?,
        "floor_at_k0" => greedy!().floor_at_k0 = parse_value(key, value)?,
        "correction" => {
            greedy!().correction = match value {
                "fill_untrusted" => CorrectionRule::FillUntrusted,
                "subtract_trusted" => CorrectionRule::SubtractTrusted,
                _ => {
                    return Err(format!(
                        "correction: expected fill_untrusted|subtract_trusted, got {value:?}"
                    ))
                }
            }
        }
        _ => return Err(format!("unknown key {key:?}")),
    }
    Ok(())
}

pub fn parse_config(text: &str, mut config: SolverConfig) -> Result<SolverConfig, String> {
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| format!("line {}: expected key = value", n + 1))?;
        apply(&mut config, key.trim(), value.trim()).map_err(|e| format!("line {}: {e}", n + 1))?;
    }
    Ok(config)
}

pub fn read_config(path: &Path, base: SolverConfig) -> CliResult<SolverConfig> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse_config(&text, base).map_err(|e| CliError::parse(path, e))
}

/// Parameters used for the face benchmark.
pub fn face_config() -> SolverConfig {
    SolverConfig {
        epsilon: 1e-3,
        alpha_e: 9.7,
        alpha_z: 81.0,
        rho0: 1.0,
        mu: 1.02,
        greedy: Some(GreedyConfig { alpha0: 0.6, alpha1: 1.0, ..Default::default() }),
        ..Default::default()
    }
}
