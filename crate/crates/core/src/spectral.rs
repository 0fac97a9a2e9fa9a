//! Affinity graph, random-walk spectral clustering and the misclassification
//! metric.

use nalgebra::{DMatrix, SymmetricEigen};
use pathfinding::kuhn_munkres::kuhn_munkres;
use pathfinding::matrix::Matrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::types::CoefficientMatrix;

/// k-means restarts per clustering call.
pub const KMEANS_RESTARTS: usize = 100;
/// Lloyd iteration cap per restart.
pub const KMEANS_MAX_ITER: usize = 300;

/// Symmetric nonnegative graph weights `W = |C| + |Cᵀ|`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffinityMatrix(DMatrix<f64>);

impl AffinityMatrix {
    /// Checks symmetry and nonnegativity.
    pub fn new(w: DMatrix<f64>) -> Result<Self> {
        if !w.is_square() {
            return Err(Error::DimensionMismatch {
                expected: "square matrix".into(),
                found: format!("{}×{}", w.nrows(), w.ncols()),
            });
        }
        if w.iter().any(|&v| !(v >= 0.0) || !v.is_finite()) || w != w.transpose() {
            return Err(Error::InvalidData("affinity must be symmetric, finite and nonnegative".into()));
        }
        Ok(AffinityMatrix(w))
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.0.nrows() == 0
    }
}

/// Cluster assignment, one label in `[0, K)` per point.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelVector(pub Vec<usize>);

impl LabelVector {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }
}

pub fn build_affinity(c: &CoefficientMatrix) -> AffinityMatrix {
    let a = c.0.abs();
    let w = &a + a.transpose();
    AffinityMatrix(w)
}

/// Spectral embedding: rows of the `K` eigenvectors of `L_rw = I − Deg⁻¹W`
/// with the smallest eigenvalues.
///
/// Computed through the similar symmetric matrix `I − Deg^{-1/2} W Deg^{-1/2}`.
/// Zero-degree points get a zero row. Returns the embedding and the mask of
/// zero-degree points.
pub fn random_walk_embedding(w: &AffinityMatrix, k: usize) -> (DMatrix<f64>, Vec<bool>) {
    let n = w.len();
    let degree: Vec<f64> = w.0.row_iter().map(|r| r.sum()).collect();
    let isolated: Vec<bool> = degree.iter().map(|&d| d <= 0.0).collect();
    let inv_sqrt: Vec<f64> = degree
        .iter()
        .map(|&d| if d > 0.0 { 1.0 / d.sqrt() } else { 0.0 })
        .collect();
    let mut sym = DMatrix::from_fn(n, n, |i, j| -inv_sqrt[i] * w.0[(i, j)] * inv_sqrt[j]);
    for i in 0..n {
        sym[(i, i)] += 1.0;
    }
    // keep the matrix exactly symmetric for the eigensolver
    let sym = (&sym + sym.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let embedding = DMatrix::from_fn(n, k, |i, c| eig.eigenvectors[(i, order[c])] * inv_sqrt[i]);
    (embedding, isolated)
}

/// Clusters the graph into `k` groups.
///
/// Points with zero degree are left out of k-means and assigned to the
/// nearest centroid of their (zero) embedding row at the end.
pub fn spectral_cluster(w: &AffinityMatrix, k: usize, seed: u64) -> Result<LabelVector> {
    let n = w.len();
    if k == 0 || k > n {
        return Err(Error::InvalidConfig(format!("cluster count {k} not in 1..={n}")));
    }
    let (embedding, isolated) = random_walk_embedding(w, k);
    let n_isolated = isolated.iter().filter(|&&b| b).count();
    if n_isolated > k {
        return Err(Error::DisconnectedDegenerate { isolated: n_isolated, k });
    }
    let active: Vec<usize> = (0..n).filter(|&i| !isolated[i]).collect();
    let mut labels = vec![0; n];
    if active.len() <= k {
        for (c, &i) in active.iter().enumerate() {
            labels[i] = c;
        }
        let mut next = active.len();
        for i in (0..n).filter(|&i| isolated[i]) {
            labels[i] = next.min(k - 1);
            next += 1;
        }
        return Ok(LabelVector(labels));
    }
    let points = DMatrix::from_fn(active.len(), k, |r, c| embedding[(active[r], c)]);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let fit = kmeans(&points, k, KMEANS_RESTARTS, KMEANS_MAX_ITER, &mut rng);
    for (r, &i) in active.iter().enumerate() {
        labels[i] = fit.labels[r];
    }
    for i in (0..n).filter(|&i| isolated[i]) {
        labels[i] = nearest(&fit.centroids, embedding.row(i).iter().copied());
    }
    Ok(LabelVector(labels))
}

/// Output of [`kmeans`].
#[derive(Debug, Clone)]
pub struct KMeansFit {
    pub labels: Vec<usize>,
    /// `k × dim`, one centroid per row.
    pub centroids: DMatrix<f64>,
    pub inertia: f64,
}

fn sq_dist(a: impl Iterator<Item = f64>, b: impl Iterator<Item = f64>) -> f64 {
    a.zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(centroids: &DMatrix<f64>, point: impl Iterator<Item = f64> + Clone) -> usize {
    (0..centroids.nrows())
        .map(|c| (c, sq_dist(point.clone(), centroids.row(c).iter().copied())))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(c, _)| c)
        .unwrap_or(0)
}

fn kmeans_plus_plus(points: &DMatrix<f64>, k: usize, rng: &mut impl Rng) -> DMatrix<f64> {
    let n = points.nrows();
    let mut centroids = DMatrix::zeros(k, points.ncols());
    let first = rng.random_range(0..n);
    centroids.row_mut(0).copy_from(&points.row(first));
    let mut d2: Vec<f64> = (0..n)
        .map(|i| sq_dist(points.row(i).iter().copied(), centroids.row(0).iter().copied()))
        .collect();
    for c in 1..k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut chosen = n - 1;
            for (i, &d) in d2.iter().enumerate() {
                if target < d {
                    chosen = i;
                    break;
                }
                target -= d;
            }
            chosen
        } else {
            rng.random_range(0..n)
        };
        centroids.row_mut(c).copy_from(&points.row(pick));
        for (i, d) in d2.iter_mut().enumerate() {
            *d = d.min(sq_dist(points.row(i).iter().copied(), centroids.row(c).iter().copied()));
        }
    }
    centroids
}

fn lloyd(points: &DMatrix<f64>, mut centroids: DMatrix<f64>, max_iter: usize) -> KMeansFit {
    let (n, dim) = points.shape();
    let k = centroids.nrows();
    let mut labels = vec![usize::MAX; n];
    for _ in 0..max_iter {
        let mut changed = false;
        for (i, label) in labels.iter_mut().enumerate() {
            let best = nearest(&centroids, points.row(i).iter().copied());
            if *label != best {
                *label = best;
                changed = true;
            }
        }
        if !changed {
            break;
        }
        let mut sums = DMatrix::zeros(k, dim);
        let mut counts = vec![0usize; k];
        for (i, &l) in labels.iter().enumerate() {
            let mut row = sums.row_mut(l);
            row += points.row(i);
            counts[l] += 1;
        }
        for c in 0..k {
            if counts[c] > 0 {
                centroids.row_mut(c).copy_from(&(sums.row(c) / counts[c] as f64));
            } else {
                // reseed an empty cluster at the point farthest from its centroid
                let far = (0..n)
                    .max_by(|&a, &b| {
                        let da = sq_dist(points.row(a).iter().copied(), centroids.row(labels[a]).iter().copied());
                        let db = sq_dist(points.row(b).iter().copied(), centroids.row(labels[b]).iter().copied());
                        da.total_cmp(&db)
                    })
                    .unwrap_or(0);
                centroids.row_mut(c).copy_from(&points.row(far));
                labels[far] = c;
            }
        }
    }
    let inertia = labels
        .iter()
        .enumerate()
        .map(|(i, &l)| sq_dist(points.row(i).iter().copied(), centroids.row(l).iter().copied()))
        .sum();
    KMeansFit { labels, centroids, inertia }
}

/// Seeded k-means++ with restarts; the lowest inertia wins.
pub fn kmeans(points: &DMatrix<f64>, k: usize, restarts: usize, max_iter: usize, rng: &mut impl Rng) -> KMeansFit {
    assert!(k >= 1 && k <= points.nrows(), "k must be in 1..=n");
    let mut best: Option<KMeansFit> = None;
    for _ in 0..restarts.max(1) {
        let fit = lloyd(points, kmeans_plus_plus(points, k, rng), max_iter);
        if best.as_ref().is_none_or(|b| fit.inertia < b.inertia) {
            best = Some(fit);
        }
    }
    best.expect("at least one restart")
}

/// Fraction of misassigned points under the best matching of predicted to
/// true labels.
pub fn misclassification(pred: &LabelVector, truth: &LabelVector) -> Result<f64> {
    if pred.len() != truth.len() {
        return Err(Error::LengthMismatch(pred.len(), truth.len()));
    }
    if pred.is_empty() {
        return Ok(0.0);
    }
    let size = pred.0.iter().chain(truth.0.iter()).max().map_or(1, |m| m + 1);
    let mut confusion = Matrix::new(size, size, 0i64);
    for (&p, &t) in pred.0.iter().zip(truth.0.iter()) {
        confusion[(p, t)] += 1;
    }
    let (matched, _) = kuhn_munkres(&confusion);
    Ok((pred.len() as i64 - matched) as f64 / pred.len() as f64)
}
