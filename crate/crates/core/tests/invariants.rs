use fgssc::admm::{ssc_solve, ssc_solve_observed, update_e, AUpdateSolver};
use fgssc::greedy::fgssc_solve_observed;
use fgssc::shrink::shrink_matrix;
use fgssc::spectral::{build_affinity, misclassification, spectral_cluster, LabelVector};
use fgssc::synth::{corrupt, gen_model1, CorruptionSpec};
use fgssc::{ASolveStrategy, CoefficientMatrix, DataMatrix, GreedyConfig, ObservationMask, SolverConfig};
use itertools::Itertools;
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn gaussian(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

fn dense_system(y: &DMatrix<f64>, lambda_z: f64, rho: f64, affine: bool) -> DMatrix<f64> {
    let n = y.ncols();
    let mut m = y.tr_mul(y) * lambda_z + DMatrix::identity(n, n) * rho;
    if affine {
        m.add_scalar_mut(rho);
    }
    m
}

fn small_problem(seed: u64) -> (DataMatrix, ObservationMask) {
    let (y, _) = gen_model1(45.0, 6, seed).unwrap();
    let (yc, mask, _) = corrupt(&y, &CorruptionSpec { p_err: 0.05, p_ers: 0.1, noise_db: None, seed }).unwrap();
    (yc, mask)
}

fn brute_force_misclassification(pred: &[usize], truth: &[usize], k: usize) -> f64 {
    let n = pred.len();
    (0..k)
        .permutations(k)
        .map(|perm| pred.iter().zip(truth).filter(|(&p, &t)| perm[p] != t).count())
        .min()
        .unwrap() as f64
        / n as f64
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn push_through_matches_dense_solve(
        seed in any::<u64>(),
        d in 1usize..8,
        n in 2usize..14,
        lambda_z in 0.1f64..10.0,
        rho in 0.1f64..100.0,
        affine in any::<bool>(),
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let y = gaussian(d, n, &mut rng);
        let rhs = gaussian(n, n, &mut rng);
        let oracle = dense_system(&y, lambda_z, rho, affine).lu().solve(&rhs).unwrap();
        for strategy in [ASolveStrategy::Woodbury, ASolveStrategy::Direct] {
            let solver = AUpdateSolver::new(&y, lambda_z, rho, affine, strategy).unwrap();
            let got = solver.solve(&rhs);
            let scale = oracle.amax().max(1.0);
            prop_assert!((got - &oracle).amax() <= 1e-8 * scale, "{strategy:?}");
        }
    }

    #[test]
    fn e_update_with_full_mask_is_plain_shrink(seed in any::<u64>(), le in 0.01f64..2.0, lz in 0.1f64..5.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let y = gaussian(4, 6, &mut rng);
        let a = gaussian(6, 6, &mut rng) * 0.3;
        let mask = ObservationMask::full(4, 6);
        let e = update_e(&y, &a, &mask, le, lz);
        prop_assert_eq!(e, shrink_matrix(&(&y - &y * &a), le / lz));
    }

    #[test]
    fn misclassification_matches_brute_force(seed in any::<u64>(), k in 1usize..=6, n in 1usize..40) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pred: Vec<usize> = (0..n).map(|_| rng.random_range(0..k)).collect();
        let truth: Vec<usize> = (0..n).map(|_| rng.random_range(0..k)).collect();
        let got = misclassification(&LabelVector(pred.clone()), &LabelVector(truth.clone())).unwrap();
        prop_assert_eq!(got, brute_force_misclassification(&pred, &truth, k));
    }

    #[test]
    fn model1_geometry(theta in 0f64..=60.0, seed in any::<u64>()) {
        let (y, truth) = gen_model1(theta, 5, seed).unwrap();
        let t = theta.to_radians();
        for b in &truth.bases {
            prop_assert!((b.tr_mul(b) - DMatrix::identity(4, 4)).amax() < 1e-12);
        }
        let e1: Vec<_> = truth.bases.iter().map(|b| b.column(0).clone_owned()).collect();
        prop_assert!((e1[0].dot(&e1[1]) - t.cos()).abs() < 1e-12);
        prop_assert!((e1[1].dot(&e1[2]) - t.cos()).abs() < 1e-12);
        prop_assert!((e1[0].dot(&e1[2]) - (2.0 * t).cos()).abs() < 1e-12);
        for j in 0..y.len() {
            let b = &truth.bases[truth.labels.as_slice()[j]];
            let col = y.values().column(j);
            prop_assert!((col - b * (b.transpose() * col)).norm() < 1e-12 * col.norm().max(1.0));
        }
    }

    #[test]
    fn corruption_rates_concentrate(p_err in 0f64..0.6, p_ers in 0f64..0.6, seed in any::<u64>()) {
        let (y, _) = gen_model1(60.0, 35, seed).unwrap();
        let spec = CorruptionSpec { p_err, p_ers, noise_db: None, seed };
        let (_, mask, record) = corrupt(&y, &spec).unwrap();
        let total = (y.dim() * y.len()) as f64;
        let erased = record.erasure_mask.iter().filter(|&&e| e).count() as f64;
        let errors = record.error_mask.iter().filter(|&&e| e).count() as f64;
        prop_assert_eq!(mask.trusted_count() as f64, total - erased);
        prop_assert!(!record.error_mask.zip_map(&record.erasure_mask, |a, b| a && b).iter().any(|&x| x));
        let tol = |p: f64, n: f64| 6.0 * (p * (1.0 - p) / n).sqrt() + 1e-12;
        prop_assert!((erased / total - p_ers).abs() <= tol(p_ers, total));
        let kept = total - erased;
        prop_assert!((errors / kept - p_err).abs() <= tol(p_err, kept));
    }
}

#[test]
fn diagonal_stays_zero_and_rho_follows_schedule() {
    let (y, mask) = small_problem(3);
    let config = SolverConfig { max_iter: 60, ..Default::default() };
    let mut steps = 0;
    ssc_solve_observed(&y, &mask, &config, &mut |view| {
        assert!(view.state.c.diagonal().iter().all(|&v| v == 0.0));
        let expected = config.rho0 * config.mu.powi(steps);
        assert!((view.state.rho - expected).abs() <= 1e-12 * expected);
        steps += 1;
    })
    .unwrap();
    assert!(steps > 0);
}

#[test]
fn fgssc_mask_only_shrinks() {
    let (y, mask) = small_problem(5);
    let config = SolverConfig { max_iter: 80, greedy: Some(GreedyConfig::default()), ..Default::default() };
    let mut previous = mask.clone();
    let mut diag_ok = true;
    fgssc_solve_observed(&y, &mask, &config, &mut |view| {
        assert!(view.mask.is_subset_of(&previous));
        diag_ok &= view.state.c.diagonal().iter().all(|&v| v == 0.0);
        previous = view.mask.clone();
    })
    .unwrap();
    assert!(diag_ok);
}

#[test]
fn ssc_is_column_permutation_equivariant() {
    let (y, mask) = small_problem(7);
    let config = SolverConfig { max_iter: 100, ..Default::default() };
    let base = ssc_solve(&y, &mask, &config).unwrap().c_star;

    let n = y.len();
    let mut perm: Vec<usize> = (0..n).collect();
    perm.reverse();
    perm.swap(0, n / 2);
    let permuted = ssc_solve(&y.permute_columns(&perm), &mask.permute_columns(&perm), &config)
        .unwrap()
        .c_star;
    for i in 0..n {
        for j in 0..n {
            assert!((permuted[(i, j)] - base[(perm[i], perm[j])]).abs() < 1e-8);
        }
    }
}

#[test]
fn spectral_partition_is_permutation_equivariant() {
    let (y, _) = gen_model1(60.0, 10, 11).unwrap();
    let config = SolverConfig { max_iter: 150, ..Default::default() };
    let c = ssc_solve(&y, &ObservationMask::for_data(&y), &config).unwrap().c_star;
    let n = c.nrows();
    let perm: Vec<usize> = (0..n).map(|j| (j * 7 + 3) % n).collect();
    let permuted = CoefficientMatrix(DMatrix::from_fn(n, n, |i, j| c[(perm[i], perm[j])]));

    let base = spectral_cluster(&build_affinity(&CoefficientMatrix(c)), 3, 1).unwrap();
    let other = spectral_cluster(&build_affinity(&permuted), 3, 1).unwrap();
    let mapped = LabelVector(perm.iter().map(|&p| base.0[p]).collect());
    assert_eq!(misclassification(&other, &mapped).unwrap(), 0.0);
}
