use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::stream;

/// A home in a training or query set.
#[derive(Debug, Clone, PartialEq)]
pub struct HomeRecord {
    pub home_id: u64,
    pub features: Vec<f64>,
    pub true_value: f64,
    pub last_sale_price: Option<f64>,
    pub cluster_id: Option<usize>,
}

impl HomeRecord {
    pub fn new(home_id: u64, features: Vec<f64>, true_value: f64, sale_price: Option<f64>) -> Self {
        Self {
            home_id,
            features,
            true_value,
            last_sale_price: sale_price,
            cluster_id: None,
        }
    }
}

/// Fitted clusters with their mean sale prices.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterModel {
    pub centroids: Vec<Vec<f64>>,
    pub mean_prices: Vec<f64>,
    /// Training homes per cluster.
    pub members: Vec<usize>,
    /// Cluster of each training home, in input order.
    pub assignment: Vec<usize>,
}

impl ClusterModel {
    pub fn cluster_count(&self) -> usize {
        self.centroids.len()
    }

    /// Nominal cluster size `N / Q`.
    pub fn members_per_cluster(&self) -> f64 {
        self.assignment.len() as f64 / self.centroids.len() as f64
    }

    /// Nearest centroid; ties go to the lowest cluster id.
    pub fn nearest(&self, x: &[f64]) -> usize {
        nearest(&self.centroids, x).0
    }

    /// Recompute mean prices for a new set of sale prices on the same training homes.
    pub fn refresh_prices(&mut self, prices: &[f64]) {
        let q = self.centroids.len();
        let mut sum = vec![0.0; q];
        for (&k, &p) in self.assignment.iter().zip(prices) {
            sum[k] += p;
        }
        for (m, (s, &n)) in self.mean_prices.iter_mut().zip(sum.iter().zip(&self.members)) {
            *m = if n > 0 { s / n as f64 } else { f64::NAN };
        }
    }
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(centroids: &[Vec<f64>], x: &[f64]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (i, c) in centroids.iter().enumerate() {
        let d = dist2(c, x);
        if d < best.1 {
            best = (i, d);
        }
    }
    best
}

const MAX_LLOYD: usize = 300;

/// Lloyd's algorithm with farthest-point initialisation.
///
/// The first centroid is a seeded random training home; each further centroid is
/// the home farthest from the centroids chosen so far. A cluster that empties is
/// re-seeded with the home farthest from its current centroid. Ties break to the
/// lowest index throughout.
pub fn fit_clusters(homes: &[HomeRecord], q: usize, seed: u64) -> Result<ClusterModel> {
    let n = homes.len();
    if q == 0 || q > n {
        return Err(Error::Config(format!("cluster count {q} must lie in [1, {n}]")));
    }
    let dim = homes[0].features.len();
    if homes.iter().any(|h| h.features.len() != dim) {
        return Err(Error::Data("feature dimension differs across homes".into()));
    }
    let prices: Vec<f64> = homes
        .iter()
        .map(|h| {
            h.last_sale_price
                .ok_or_else(|| Error::Data(format!("home {} has no sale price", h.home_id)))
        })
        .collect::<Result<_>>()?;
    let xs: Vec<&[f64]> = homes.iter().map(|h| h.features.as_slice()).collect();

    let mut rng = stream(seed, "kmeans-init", 0);
    let first = rng.random_range(0..n);
    let mut centroids = vec![xs[first].to_vec()];
    let mut mind: Vec<f64> = xs.iter().map(|x| dist2(x, xs[first])).collect();
    while centroids.len() < q {
        let (far, _) = mind
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |b, (i, &d)| if d > b.1 { (i, d) } else { b });
        centroids.push(xs[far].to_vec());
        for (m, x) in mind.iter_mut().zip(&xs) {
            *m = m.min(dist2(x, xs[far]));
        }
    }

    let mut assignment = vec![usize::MAX; n];
    for _ in 0..MAX_LLOYD {
        let mut changed = false;
        let mut dists = vec![0.0; n];
        for (i, x) in xs.iter().enumerate() {
            let (k, d) = nearest(&centroids, x);
            dists[i] = d;
            if assignment[i] != k {
                assignment[i] = k;
                changed = true;
            }
        }
        let mut counts = vec![0usize; q];
        for &k in &assignment {
            counts[k] += 1;
        }
        if let Some(empty) = counts.iter().position(|&c| c == 0) {
            let (far, _) = dists
                .iter()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |b, (i, &d)| if d > b.1 { (i, d) } else { b });
            centroids[empty] = xs[far].to_vec();
            continue;
        }
        let mut sums = vec![vec![0.0; dim]; q];
        for (x, &k) in xs.iter().zip(&assignment) {
            for (s, v) in sums[k].iter_mut().zip(x.iter()) {
                *s += v;
            }
        }
        for (c, (s, &m)) in centroids.iter_mut().zip(sums.iter().zip(&counts)) {
            for (ci, si) in c.iter_mut().zip(s) {
                *ci = si / m as f64;
            }
        }
        if !changed {
            break;
        }
    }

    for (a, x) in assignment.iter_mut().zip(&xs) {
        *a = nearest(&centroids, x).0;
    }
    let mut members = vec![0usize; q];
    for &k in &assignment {
        members[k] += 1;
    }
    let mut model = ClusterModel {
        centroids,
        mean_prices: vec![0.0; q],
        members,
        assignment,
    };
    model.refresh_prices(&prices);
    Ok(model)
}

/// Mean sale price of the query's nearest cluster.
pub fn predict_price(query: &HomeRecord, model: &ClusterModel) -> f64 {
    model.mean_prices[model.nearest(&query.features)]
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::{Distribution, Normal};

    fn home(id: u64, f: Vec<f64>, p: f64) -> HomeRecord {
        HomeRecord::new(id, f, p, Some(p))
    }

    #[test]
    fn one_cluster_per_home() {
        let homes: Vec<_> = (0..12).map(|i| home(i, vec![i as f64, (i * i) as f64], 100.0 + i as f64)).collect();
        let m = fit_clusters(&homes, homes.len(), 5).unwrap();
        for h in &homes {
            assert_eq!(predict_price(h, &m), h.last_sale_price.unwrap());
        }
    }

    #[test]
    fn single_cluster_predicts_global_mean() {
        let homes: Vec<_> = (0..10).map(|i| home(i, vec![i as f64], i as f64)).collect();
        let m = fit_clusters(&homes, 1, 0).unwrap();
        assert!((predict_price(&homes[3], &m) - 4.5).abs() < 1e-12);
    }

    #[test]
    fn two_blobs_recovered_exactly() {
        let mut rng = stream(11, "blobs", 0);
        let noise = Normal::new(0.0, 1.0).unwrap();
        let mut homes = Vec::new();
        let mut labels = Vec::new();
        for i in 0..400u64 {
            let l = (i % 2) as usize;
            let c = if l == 0 { -20.0 } else { 20.0 };
            let f = vec![c + noise.sample(&mut rng), c + noise.sample(&mut rng)];
            homes.push(home(i, f, 0.0));
            labels.push(l);
        }
        let m = fit_clusters(&homes, 2, 1).unwrap();
        let map = [m.assignment[0], 1 - m.assignment[0]];
        for (a, l) in m.assignment.iter().zip(&labels) {
            assert_eq!(*a, map[*l]);
        }
    }

    #[test]
    fn prediction_is_cluster_mean_by_direct_sum() {
        let mut rng = stream(2, "t", 0);
        let homes: Vec<_> = (0..300)
            .map(|i| home(i, vec![rng.random::<f64>() * 10.0, rng.random::<f64>()], rng.random::<f64>() * 50.0))
            .collect();
        let m = fit_clusters(&homes, 7, 3).unwrap();
        for h in homes.iter().take(20) {
            let k = m.nearest(&h.features);
            let (s, n) = homes
                .iter()
                .zip(&m.assignment)
                .filter(|(_, &a)| a == k)
                .fold((0.0, 0usize), |acc, (g, _)| (acc.0 + g.last_sale_price.unwrap(), acc.1 + 1));
            assert!((predict_price(h, &m) - s / n as f64).abs() < 1e-9);
        }
    }

    #[test]
    fn centroid_query_and_tie_rule() {
        let homes = vec![home(0, vec![0.0], 1.0), home(1, vec![2.0], 3.0)];
        let m = fit_clusters(&homes, 2, 0).unwrap();
        let at = HomeRecord::new(9, m.centroids[1].clone(), 0.0, None);
        assert_eq!(predict_price(&at, &m), m.mean_prices[1]);
        let mid = HomeRecord::new(9, vec![1.0], 0.0, None);
        assert_eq!(m.nearest(&mid.features), 0);
    }

    #[test]
    fn deterministic_under_seed_and_rejects_bad_input() {
        let mut rng = stream(4, "t", 0);
        let homes: Vec<_> = (0..200).map(|i| home(i, vec![rng.random(), rng.random(), rng.random()], 1.0)).collect();
        assert_eq!(fit_clusters(&homes, 9, 8).unwrap(), fit_clusters(&homes, 9, 8).unwrap());
        assert!(fit_clusters(&homes, 0, 0).is_err());
        assert!(fit_clusters(&homes, 201, 0).is_err());
        let mut bad = homes.clone();
        bad[3].last_sale_price = None;
        assert!(fit_clusters(&bad, 3, 0).is_err());
    }

    #[test]
    fn every_home_assigned_to_a_nonempty_cluster() {
        let homes: Vec<_> = (0..50).map(|i| home(i, vec![(i % 5) as f64], 1.0)).collect();
        let m = fit_clusters(&homes, 8, 2).unwrap();
        assert_eq!(m.assignment.len(), 50);
        assert_eq!(m.members.iter().sum::<usize>(), 50);
        assert!(m.assignment.iter().all(|&k| k < 8));
    }
}
