use ndarray::{Array2, ArrayView1, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KMeansConfig {
    pub k: usize,
    pub seed: u64,
    pub max_iters: usize,
    /// Convergence threshold on the largest Euclidean centroid shift.
    pub tol: f64,
    /// Independent seeded runs; the one with the lowest final inertia wins.
    pub n_init: usize,
}

impl KMeansConfig {
    pub fn new(k: usize, seed: u64) -> Self {
        Self {
            k,
            seed,
            max_iters: 100,
            tol: 1e-6,
            n_init: 1,
        }
    }

    pub fn with_restarts(mut self, n_init: usize) -> Self {
        self.n_init = n_init;
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansModel {
    pub k: usize,
    pub centroids: Array2<f64>,
    pub assignments: Vec<usize>,
    /// Sum of squared distances from each row to its assigned centroid.
    pub inertia: f64,
    /// Inertia after every assignment step, in order.
    pub inertia_history: Vec<f64>,
    pub iterations: usize,
}

impl KMeansModel {
    pub fn n_rows(&self) -> usize {
        self.assignments.len()
    }

    pub fn cluster_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &a in &self.assignments {
            sizes[a] += 1;
        }
        sizes
    }

    /// Row ids of each cluster, ascending.
    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut members = vec![Vec::new(); self.k];
        for (row, &a) in self.assignments.iter().enumerate() {
            members[a].push(row);
        }
        members
    }
}

fn sq_dist(a: ArrayView1<f64>, b: ArrayView1<f64>) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Lloyd's algorithm with k-means++ seeding.
///
/// An empty cluster is moved onto the row farthest from its own centroid.
/// With `n_init > 1` the run with the lowest final inertia is kept (earliest
/// on ties); run `r` is seeded from `seed` and `r`.
pub fn kmeans_fit(features: ArrayView2<f64>, config: &KMeansConfig) -> Result<KMeansModel> {
    let n = features.nrows();
    let k = config.k;
    if k == 0 {
        return Err(Error::Domain("k-means needs k >= 1".into()));
    }
    if k > n {
        return Err(Error::Domain(format!("k = {k} exceeds the {n} rows to cluster")));
    }
    if let Some(row) = features
        .outer_iter()
        .position(|r| r.iter().any(|v| !v.is_finite()))
    {
        return Err(Error::NonFinite {
            tensor: format!("k-means input row {row}"),
        });
    }

    if config.n_init == 0 {
        return Err(Error::Domain("k-means needs at least one initialization".into()));
    }

    let mut best: Option<KMeansModel> = None;
    for run in 0..config.n_init {
        let seed = if run == 0 {
            config.seed
        } else {
            config.seed ^ (run as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
        };
        let model = lloyd(features, config, seed);
        if best.as_ref().is_none_or(|b| model.inertia < b.inertia) {
            best = Some(model);
        }
    }
    Ok(best.expect("n_init >= 1"))
}

fn lloyd(features: ArrayView2<f64>, config: &KMeansConfig, seed: u64) -> KMeansModel {
    let (n, k) = (features.nrows(), config.k);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids = plus_plus_init(features, k, &mut rng);
    let mut assignments = vec![0usize; n];
    let mut history = Vec::new();
    let mut iterations = 0;

    loop {
        let inertia = assign(features, centroids.view(), &mut assignments);
        history.push(inertia);
        if iterations == config.max_iters {
            break;
        }
        iterations += 1;
        let updated = update_centroids(features, &centroids, &assignments);
        let shift = centroids
            .outer_iter()
            .zip(updated.outer_iter())
            .map(|(a, b)| sq_dist(a, b).sqrt())
            .fold(0.0, f64::max);
        centroids = updated;
        if shift < config.tol {
            let inertia = assign(features, centroids.view(), &mut assignments);
            history.push(inertia);
            break;
        }
    }

    KMeansModel {
        k,
        centroids,
        assignments,
        inertia: *history.last().unwrap(),
        inertia_history: history,
        iterations,
    }
}

fn plus_plus_init(features: ArrayView2<f64>, k: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
    let n = features.nrows();
    let mut chosen = Vec::with_capacity(k);
    chosen.push(rng.random_range(0..n));
    let mut d2: Vec<f64> = features
        .outer_iter()
        .map(|r| sq_dist(r, features.row(chosen[0])))
        .collect();
    while chosen.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = None;
            for (i, &w) in d2.iter().enumerate() {
                acc += w;
                if w > 0.0 && acc > target {
                    pick = Some(i);
                    break;
                }
            }
            // Rounding can leave the target just past the last positive weight.
            pick.unwrap_or_else(|| d2.iter().rposition(|&w| w > 0.0).unwrap())
        } else {
            // Every row coincides with a chosen centroid.
            let free: Vec<usize> = (0..n).filter(|i| !chosen.contains(i)).collect();
            free[rng.random_range(0..free.len())]
        };
        chosen.push(next);
        for (i, r) in features.outer_iter().enumerate() {
            d2[i] = d2[i].min(sq_dist(r, features.row(next)));
        }
    }
    features.select(Axis(0), &chosen)
}

fn assign(features: ArrayView2<f64>, centroids: ArrayView2<f64>, out: &mut [usize]) -> f64 {
    let mut inertia = 0.0;
    for (i, row) in features.outer_iter().enumerate() {
        let mut best = (0, f64::INFINITY);
        for (c, centroid) in centroids.outer_iter().enumerate() {
            let d = sq_dist(row, centroid);
            if d < best.1 {
                best = (c, d);
            }
        }
        out[i] = best.0;
        inertia += best.1;
    }
    inertia
}

fn update_centroids(
    features: ArrayView2<f64>,
    centroids: &Array2<f64>,
    assignments: &[usize],
) -> Array2<f64> {
    let k = centroids.nrows();
    let mut sums = Array2::<f64>::zeros(centroids.raw_dim());
    let mut counts = vec![0usize; k];
    for (row, &a) in features.outer_iter().zip(assignments) {
        sums.row_mut(a).scaled_add(1.0, &row);
        counts[a] += 1;
    }
    let mut updated = sums;
    for (c, &count) in counts.iter().enumerate() {
        if count > 0 {
            updated.row_mut(c).mapv_inplace(|v| v / count as f64);
        }
    }

    let empty: Vec<usize> = (0..k).filter(|&c| counts[c] == 0).collect();
    if !empty.is_empty() {
        let mut far: Vec<(usize, f64)> = features
            .outer_iter()
            .zip(assignments)
            .enumerate()
            .map(|(i, (row, &a))| (i, sq_dist(row, centroids.row(a))))
            .collect();
        // Farthest first; lower row id on ties.
        far.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        for (c, (row, _)) in empty.into_iter().zip(far) {
            updated.row_mut(c).assign(&features.row(row));
        }
    }
    updated
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn every_point_its_own_cluster() {
        let x = array![[0.0, 0.0], [1.0, 5.0], [-3.0, 2.0], [4.0, 4.0]];
        let model = kmeans_fit(x.view(), &KMeansConfig::new(4, 3)).unwrap();
        assert_eq!(model.inertia, 0.0);
        let mut a = model.assignments.clone();
        a.sort();
        a.dedup();
        assert_eq!(a.len(), 4);
    }

    #[test]
    fn single_cluster_is_the_mean() {
        let x = array![[1.0, 2.0], [3.0, -2.0], [5.0, 3.0]];
        let model = kmeans_fit(x.view(), &KMeansConfig::new(1, 0)).unwrap();
        assert!((model.centroids[[0, 0]] - 3.0).abs() < 1e-6);
        assert!((model.centroids[[0, 1]] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn k_above_n_is_rejected() {
        let x = array![[1.0], [2.0]];
        assert!(matches!(
            kmeans_fit(x.view(), &KMeansConfig::new(3, 0)),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn nan_rows_are_rejected() {
        let x = array![[1.0], [f64::NAN]];
        assert!(kmeans_fit(x.view(), &KMeansConfig::new(1, 0)).is_err());
    }

    #[test]
    fn duplicate_points_do_not_break_seeding() {
        let x = Array2::from_elem((5, 2), 1.5);
        let model = kmeans_fit(x.view(), &KMeansConfig::new(3, 9)).unwrap();
        assert_eq!(model.inertia, 0.0);
    }

    #[test]
    fn empty_cluster_is_reseeded_to_farthest_row() {
        let x = array![[0.0], [1.0], [10.0]];
        // Cluster 1 sits far from all rows and receives none of them.
        let centroids = array![[0.5], [100.0]];
        let assignments = vec![0, 0, 0];
        let updated = update_centroids(x.view(), &centroids, &assignments);
        assert_eq!(updated[[1, 0]], 10.0);
        assert!((updated[[0, 0]] - 11.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn restarts_never_worsen_inertia() {
        let x = Array2::from_shape_fn((60, 2), |(i, j)| (((i * 31 + j * 17) % 23) as f64).sin() * 5.0);
        let single = kmeans_fit(x.view(), &KMeansConfig::new(5, 2)).unwrap();
        let multi = kmeans_fit(x.view(), &KMeansConfig::new(5, 2).with_restarts(8)).unwrap();
        assert!(multi.inertia <= single.inertia);
    }

    #[test]
    fn seeded_runs_agree() {
        let x = Array2::from_shape_fn((40, 3), |(i, j)| ((i * 7 + j * 13) % 11) as f64);
        let a = kmeans_fit(x.view(), &KMeansConfig::new(4, 5)).unwrap();
        let b = kmeans_fit(x.view(), &KMeansConfig::new(4, 5)).unwrap();
        assert_eq!(a, b);
    }
}
