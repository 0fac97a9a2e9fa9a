use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use fgssc::spectral::misclassification;
use fgssc::Algorithm;
use fgssc_cli::faces::{enumerate_experiments, ingest_faces, run_faces, write_synthetic_faces, FaceDatasetSpec, DEFAULT_TARGET};
use fgssc_cli::io::{read_labels, read_pgm};
use fgssc_cli::sweep::{parse_grid_csv, render_graymap};
use fgssc_cli::{config::face_config, write_synthetic, SynthSpec};
use fgssc_cli::sweep::SweepModel;
use tempfile::tempdir;

fn fgssc(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fgssc"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn synth_model1(dir: &Path, theta: f64, p_err: f64, p_ers: f64) {
    let spec = SynthSpec { model: SweepModel::ModelI, theta, p_err, p_ers, noise_db: None, seed: 11 };
    write_synthetic(dir, &spec).unwrap();
}

#[test]
fn cluster_separates_clean_model_one() {
    let dir = tempdir().unwrap();
    synth_model1(dir.path(), 60.0, 0.0, 0.0);
    let out = fgssc(&["cluster", "--data", "data.csv", "--k", "3", "--out", "pred.txt", "--affinity", "w.csv"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let pred = read_labels(&dir.path().join("pred.txt")).unwrap();
    let truth = read_labels(&dir.path().join("labels.txt")).unwrap();
    assert_eq!(misclassification(&pred, &truth).unwrap(), 0.0);
    assert!(dir.path().join("w.csv").exists());
}

#[test]
fn missing_mask_means_all_trusted() {
    let dir = tempdir().unwrap();
    synth_model1(dir.path(), 30.0, 0.0, 0.0);
    let ones = fs::read_to_string(dir.path().join("mask.csv")).unwrap();
    assert!(!ones.lines().skip(1).any(|l| l.contains('0')));
    let with = fgssc(&["cluster", "--data", "data.csv", "--mask", "mask.csv", "--k", "3", "--out", "a.txt", "--algorithm", "ssc"], dir.path());
    let without = fgssc(&["cluster", "--data", "data.csv", "--k", "3", "--out", "b.txt", "--algorithm", "ssc"], dir.path());
    assert!(with.status.success() && without.status.success());
    assert_eq!(fs::read(dir.path().join("a.txt")).unwrap(), fs::read(dir.path().join("b.txt")).unwrap());
}

#[test]
fn exit_codes_follow_error_class() {
    let dir = tempdir().unwrap();
    fs::write(dir.path().join("ragged.csv"), "1,2\n3\n").unwrap();
    fs::write(dir.path().join("header.csv"), "# 3 2\n1,2\n3,4\n").unwrap();
    fs::write(dir.path().join("ok.csv"), "1,0\n0,1\n1,1\n").unwrap();
    fs::write(dir.path().join("mask.csv"), "1,1\n1,1\n").unwrap();
    let code = |args: &[&str]| fgssc(args, dir.path()).status.code();
    assert_eq!(code(&["cluster", "--data", "ragged.csv", "--k", "2", "--out", "x"]), Some(2));
    assert_eq!(code(&["cluster", "--data", "header.csv", "--k", "2", "--out", "x"]), Some(3));
    assert_eq!(code(&["cluster", "--data", "ok.csv", "--mask", "mask.csv", "--k", "2", "--out", "x"]), Some(3));
    assert_eq!(code(&["cluster", "--data", "absent.csv", "--k", "2", "--out", "x"]), Some(5));
    assert_eq!(code(&["cluster", "--data", "ok.csv", "--k", "2", "--out", "x", "--set", "mu=0.5"]), Some(2));
}

#[test]
fn config_file_and_flags_combine() {
    let dir = tempdir().unwrap();
    synth_model1(dir.path(), 60.0, 0.0, 0.0);
    fs::write(dir.path().join("solver.cfg"), "# overridden below\nalpha_e = 1000\nmax_iter = notanumber\n").unwrap();
    let out = fgssc(&["cluster", "--data", "data.csv", "--k", "3", "--out", "p", "--config", "solver.cfg"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    fs::write(dir.path().join("solver.cfg"), "alpha_e = 1000\nk0 = 6\n").unwrap();
    let out = fgssc(
        &["cluster", "--data", "data.csv", "--k", "3", "--out", "p", "--config", "solver.cfg", "--alpha-e", "20", "--truth", "labels.txt"],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).contains("misclassification: 0.000000"));
}

fn sweep_args<'a>(out: &'a str, algorithm: &'a str, p_err: &'a str) -> Vec<&'a str> {
    vec![
        "sweep", "--theta", "60", "--p-err", p_err, "--p-ers", "0", "--trials", "2", "--seed", "7",
        "--algorithm", algorithm, "--out", out, "--jobs", "2",
    ]
}

#[test]
fn sweep_is_deterministic_and_graymap_matches_csv() {
    let dir = tempdir().unwrap();
    for out in ["a", "b"] {
        let r = fgssc(&sweep_args(out, "ssc", "0:0.2:2"), dir.path());
        assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    }
    for file in ["theta_60.csv", "theta_60.pgm"] {
        let a = fs::read(dir.path().join("a").join(file)).unwrap();
        let b = fs::read(dir.path().join("b").join(file)).unwrap();
        assert_eq!(a, b, "{file}");
    }
    let csv = fs::read_to_string(dir.path().join("a/theta_60.csv")).unwrap();
    assert!(csv.starts_with("p_ers\\p_err,0.0000,0.2000\n0.0000,"));
    let cells = parse_grid_csv(&csv).unwrap();
    assert_eq!(cells.shape(), (1, 2));
    let pgm = read_pgm(&dir.path().join("a/theta_60.pgm")).unwrap();
    assert_eq!(pgm, render_graymap(&cells));
}

#[test]
fn single_clean_cell_is_white() {
    let dir = tempdir().unwrap();
    let r = fgssc(&sweep_args("g", "fgssc", "0"), dir.path());
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    let cells = parse_grid_csv(&fs::read_to_string(dir.path().join("g/theta_60.csv")).unwrap()).unwrap();
    assert!(cells[(0, 0)] <= 0.01, "{}", cells[(0, 0)]);
    let pgm = read_pgm(&dir.path().join("g/theta_60.pgm")).unwrap();
    assert!(pgm.pixels().all(|p| p[0] >= 250));
}

#[test]
fn synthetic_faces_ingest_as_unit_columns() {
    let dir = tempdir().unwrap();
    write_synthetic_faces(dir.path(), 2, 8, 3, 5).unwrap();
    let spec = FaceDatasetSpec { root: dir.path().to_path_buf(), downsample_to: DEFAULT_TARGET, subjects: vec![2, 1] };
    let (y, labels) = ingest_faces(&spec).unwrap();
    assert_eq!(y.dim(), 48 * 42);
    assert_eq!(y.len(), 16);
    assert_eq!(labels.as_slice()[..8], [2; 8]);
    assert_eq!(labels.as_slice()[8..], [1; 8]);
    for col in y.values().column_iter() {
        assert!((col.norm() - 1.0).abs() < 1e-12);
    }
    let bad = FaceDatasetSpec { downsample_to: (50, 42), ..spec };
    assert_eq!(ingest_faces(&bad).unwrap_err().exit_code(), 3);
}

#[test]
fn synthetic_faces_cluster_perfectly() {
    let dir = tempdir().unwrap();
    write_synthetic_faces(dir.path(), 2, 16, 3, 9).unwrap();
    for algorithm in [Algorithm::Ssc, Algorithm::Fgssc] {
        let report = run_faces(dir.path(), DEFAULT_TARGET, 2, algorithm, &face_config(), Some(1), Some(1)).unwrap();
        let overall = report.overall.as_ref().unwrap();
        assert_eq!((overall.count, report.failed), (1, 0));
        assert_eq!(overall.mean, 0.0);
        let table = report.table();
        assert!(table.lines().nth(2).unwrap().starts_with("Mean"));
        assert!(table.lines().nth(3).unwrap().starts_with("Median"));
    }
    let out = fgssc(&["faces", "--root", dir.path().to_str().unwrap(), "--k", "2", "--limit", "1"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let missing = fgssc(&["faces", "--root", dir.path().to_str().unwrap(), "--k", "3", "--limit", "1"], dir.path());
    assert_eq!(missing.status.code(), Some(5));
}

#[test]
fn face_protocol_enumerates_lexicographically() {
    let triplets = enumerate_experiments(3);
    assert_eq!(triplets.len(), 416);
    assert_eq!(triplets[0].subjects, vec![1, 2, 3]);
    assert_eq!(triplets[1].subjects, vec![1, 2, 4]);
    assert_eq!(triplets[119].subjects, vec![8, 9, 10]);
    assert_eq!(triplets[120].subjects, vec![11, 12, 13]);
    assert_eq!(triplets.last().unwrap().subjects, vec![36, 37, 38]);
    let tens: Vec<_> = enumerate_experiments(10).into_iter().map(|e| e.subjects).collect();
    assert_eq!(tens, vec![(1..=10).collect::<Vec<_>>(), (11..=20).collect(), (21..=30).collect()]);
}
