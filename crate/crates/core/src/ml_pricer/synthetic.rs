use rand::Rng;

use super::{HomeRecord, MlConfig};
use crate::error::{Error, Result};
use crate::rng::{std_normal, stream};

/// Synthetic housing stock built to realise `h(Q) = h_scale / Q`.
///
/// Homes sit in `Q` well-separated feature blobs. A home's value is its blob
/// level plus a residual carried by its within-blob feature offsets, with
/// variance `h(Q) sigma_v^2`; blob levels make up the rest of `sigma_v^2`.
/// Value drift is a random walk shared by all homes of a blob, so the
/// within-blob residual stays stationary.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticMarket {
    pub homes: Vec<HomeRecord>,
    /// Generating blob of each home.
    pub blob: Vec<usize>,
    levels: Vec<f64>,
    residual: Vec<f64>,
}

impl SyntheticMarket {
    pub fn generate(cfg: &MlConfig, n_homes: usize, base_value: f64, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let q = cfg.q_clusters as usize;
        if n_homes < q {
            return Err(Error::Config(format!("{n_homes} homes cannot fill {q} clusters")));
        }
        let dim = cfg.feature_dim;
        let mut rng = stream(seed, "synthetic-homes", 0);
        let min_sep = 30.0 * (dim as f64).sqrt();
        let half_width = 50.0 * (dim as f64).sqrt() * q as f64;
        let mut centers: Vec<Vec<f64>> = Vec::with_capacity(q);
        while centers.len() < q {
            let c: Vec<f64> = (0..dim).map(|_| rng.random_range(-half_width..half_width)).collect();
            let ok = centers
                .iter()
                .all(|o| o.iter().zip(&c).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() >= min_sep * min_sep);
            if ok {
                centers.push(c);
            }
        }

        let h = cfg.h(cfg.q_clusters);
        let within = h * cfg.sigma_v2;
        let between = (cfg.sigma_v2 - within).max(0.0);
        let levels: Vec<f64> = (0..q)
            .map(|_| base_value + between.sqrt() * std_normal(&mut rng))
            .collect();
        let loading = (within / dim as f64).sqrt();

        let mut homes = Vec::with_capacity(n_homes);
        let mut blob = Vec::with_capacity(n_homes);
        let mut residual = Vec::with_capacity(n_homes);
        for id in 0..n_homes {
            let b = id % q;
            let w: Vec<f64> = (0..dim).map(|_| std_normal(&mut rng)).collect();
            let u = loading * w.iter().sum::<f64>();
            let features = centers[b].iter().zip(&w).map(|(c, x)| c + x).collect();
            homes.push(HomeRecord::new(id as u64, features, levels[b] + u, None));
            blob.push(b);
            residual.push(u);
        }
        Ok(Self { homes, blob, levels, residual })
    }

    pub fn blob_count(&self) -> usize {
        self.levels.len()
    }

    /// Advance every blob level by an independent `N(0, sigma_rw2)` step.
    pub fn advance<R: Rng + ?Sized>(&mut self, sigma_rw2: f64, rng: &mut R) {
        let sd = sigma_rw2.sqrt();
        for l in &mut self.levels {
            *l += sd * std_normal(rng);
        }
        for ((h, &b), &u) in self.homes.iter_mut().zip(&self.blob).zip(&self.residual) {
            h.true_value = self.levels[b] + u;
        }
    }

    pub fn value(&self, k: usize) -> f64 {
        self.homes[k].true_value
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::RunningStats;

    fn cfg() -> MlConfig {
        MlConfig {
            n_training: 4000,
            q_clusters: 20,
            feature_dim: 3,
            sigma_rw2: 4.0,
            sigma_v2: 100.0,
            h_scale: 4.0,
            delta: 1.0 / 12.0,
            sigma_e2: 170.0,
            exact_denominator: false,
        }
    }

    #[test]
    fn within_blob_variance_matches_h() {
        let m = SyntheticMarket::generate(&cfg(), 4000, 100.0, 1).unwrap();
        let mut pooled = RunningStats::new();
        for b in 0..m.blob_count() {
            let vals: RunningStats = (0..4000).filter(|&k| m.blob[k] == b).map(|k| m.value(k)).collect();
            let mean = vals.mean();
            for k in (0..4000).filter(|&k| m.blob[k] == b) {
                pooled.push(m.value(k) - mean);
            }
        }
        let target = 4.0 / 20.0 * 100.0;
        assert!((pooled.variance() / target - 1.0).abs() < 0.08, "{}", pooled.variance());
    }

    #[test]
    fn drift_is_shared_within_blob() {
        let mut m = SyntheticMarket::generate(&cfg(), 200, 100.0, 2).unwrap();
        let before: Vec<f64> = (0..200).map(|k| m.value(k)).collect();
        m.advance(4.0, &mut stream(0, "t", 0));
        let d0 = m.value(0) - before[0];
        let d20 = m.value(20) - before[20];
        assert!((d0 - d20).abs() < 1e-9);
    }
}
