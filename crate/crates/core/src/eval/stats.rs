use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Negative eigenvalues down to this bound are rounding noise and clamped to zero.
pub const EIGEN_CLAMP: f64 = -1e-8;
/// Eigenvalues below this bound make the covariance invalid; between the two
/// bounds they are clamped with a warning.
pub const EIGEN_ERROR: f64 = -1e-4;

/// Mean and covariance of a set of feature vectors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureStats {
    pub mu: Vec<f64>,
    /// Row-major `F x F` sample covariance (divisor `n - 1`).
    pub sigma: Vec<f64>,
    pub n: usize,
}

/// Streaming accumulator (Welford updates, Chan merge).
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureAccumulator {
    dim: usize,
    n: usize,
    mean: Vec<f64>,
    /// Sum of outer products of deviations.
    comoment: Vec<f64>,
}

impl FeatureAccumulator {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            n: 0,
            mean: vec![0.0; dim],
            comoment: vec![0.0; dim * dim],
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn push(&mut self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::invalid(format!(
                "feature has dimension {}, expected {}",
                x.len(),
                self.dim
            )));
        }
        self.n += 1;
        let n = self.n as f64;
        let delta: Vec<f64> = x.iter().zip(&self.mean).map(|(a, m)| a - m).collect();
        for (m, d) in self.mean.iter_mut().zip(&delta) {
            *m += d / n;
        }
        let after: Vec<f64> = x.iter().zip(&self.mean).map(|(a, m)| a - m).collect();
        for i in 0..self.dim {
            let row = &mut self.comoment[i * self.dim..(i + 1) * self.dim];
            for (c, a) in row.iter_mut().zip(&after) {
                *c += delta[i] * a;
            }
        }
        Ok(())
    }

    pub fn merge(&self, other: &Self) -> Result<Self> {
        if self.dim != other.dim {
            return Err(Error::invalid("cannot merge accumulators of different dimension"));
        }
        if other.n == 0 {
            return Ok(self.clone());
        }
        if self.n == 0 {
            return Ok(other.clone());
        }
        let (na, nb) = (self.n as f64, other.n as f64);
        let n = na + nb;
        let delta: Vec<f64> = other.mean.iter().zip(&self.mean).map(|(b, a)| b - a).collect();
        let mean = self.mean.iter().zip(&delta).map(|(a, d)| a + d * nb / n).collect();
        let w = na * nb / n;
        let mut comoment = self.comoment.clone();
        for i in 0..self.dim {
            for j in 0..self.dim {
                comoment[i * self.dim + j] += other.comoment[i * self.dim + j] + delta[i] * delta[j] * w;
            }
        }
        Ok(Self {
            dim: self.dim,
            n: self.n + other.n,
            mean,
            comoment,
        })
    }

    pub fn finish(&self) -> Result<FeatureStats> {
        if self.n < 2 {
            return Err(Error::invalid(format!("need at least 2 samples, have {}", self.n)));
        }
        let d = (self.n - 1) as f64;
        let mut sigma: Vec<f64> = self.comoment.iter().map(|c| c / d).collect();
        // Symmetrize away rounding asymmetry.
        for i in 0..self.dim {
            for j in 0..i {
                let v = 0.5 * (sigma[i * self.dim + j] + sigma[j * self.dim + i]);
                sigma[i * self.dim + j] = v;
                sigma[j * self.dim + i] = v;
            }
        }
        Ok(FeatureStats {
            mu: self.mean.clone(),
            sigma,
            n: self.n,
        })
    }
}

impl FeatureStats {
    pub fn dim(&self) -> usize {
        self.mu.len()
    }

    pub fn from_features<'a>(features: impl IntoIterator<Item = &'a [f64]>) -> Result<Self> {
        let mut it = features.into_iter().peekable();
        let dim = it.peek().map_or(0, |f| f.len());
        let mut acc = FeatureAccumulator::new(dim);
        for f in it {
            acc.push(f)?;
        }
        acc.finish()
    }

    pub fn covariance(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.dim(), self.dim(), &self.sigma)
    }
}

/// Principal square root of a symmetric PSD matrix by eigendecomposition.
pub fn sqrt_psd(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let eig = SymmetricEigen::new(m.clone());
    // Thresholds are absolute for unit-sized matrices and grow with the spectrum.
    let scale = eig.eigenvalues.iter().fold(1.0f64, |a, v| a.max(v.abs()));
    let mut roots = DVector::zeros(eig.eigenvalues.len());
    for (i, &l) in eig.eigenvalues.iter().enumerate() {
        if l < EIGEN_ERROR * scale {
            return Err(Error::Numerical(format!(
                "covariance has eigenvalue {l:e}; not positive semidefinite"
            )));
        }
        if l < EIGEN_CLAMP * scale {
            log::warn!("clamping eigenvalue {l:e} to zero");
        }
        roots[i] = l.max(0.0).sqrt();
    }
    let q = &eig.eigenvectors;
    Ok(q * DMatrix::from_diagonal(&roots) * q.transpose())
}

/// Frechet distance between the Gaussians described by `a` and `b`.
///
/// `Tr((S1 S2)^(1/2))` is the sum of singular values of `S1^(1/2) S2^(1/2)`,
/// which avoids taking the square root of a non-symmetric product.
pub fn frechet_distance(a: &FeatureStats, b: &FeatureStats) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::invalid(format!(
            "feature dimensions differ: {} vs {}",
            a.dim(),
            b.dim()
        )));
    }
    let mean_term: f64 = a.mu.iter().zip(&b.mu).map(|(x, y)| (x - y) * (x - y)).sum();
    let s1 = a.covariance();
    let s2 = b.covariance();
    let r1 = sqrt_psd(&s1)?;
    let r2 = sqrt_psd(&s2)?;
    let nuclear: f64 = (&r1 * &r2).singular_values().iter().sum();
    let d = mean_term + s1.trace() + s2.trace() - 2.0 * nuclear;
    Ok(d.max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn stats(mu: Vec<f64>, sigma: Vec<f64>) -> FeatureStats {
        FeatureStats { mu, sigma, n: 10 }
    }

    fn random_psd(dim: usize, rank: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
        let g: DMatrix<f64> = DMatrix::from_fn(dim, rank, |_, _| StandardNormal.sample(rng));
        &g * g.transpose()
    }

    /// Square root by Denman-Beavers iteration, independent of eigensolvers.
    fn sqrt_iterative(m: &DMatrix<f64>) -> DMatrix<f64> {
        let mut y = m.clone();
        let mut z = DMatrix::identity(m.nrows(), m.ncols());
        for _ in 0..100 {
            let yi = y.clone().try_inverse().unwrap();
            let zi = z.clone().try_inverse().unwrap();
            y = (&y + zi) * 0.5;
            z = (&z + yi) * 0.5;
        }
        y
    }

    /// `||mu1 - mu2||^2 + Tr S1 + Tr S2 - 2 Tr sqrt(S1^(1/2) S2 S1^(1/2))`.
    fn oracle(a: &FeatureStats, b: &FeatureStats) -> f64 {
        let s1 = a.covariance();
        let s2 = b.covariance();
        let r = sqrt_iterative(&s1);
        let inner = &r * &s2 * &r;
        let inner = (&inner + inner.transpose()) * 0.5;
        let eig = inner.symmetric_eigenvalues();
        let tr: f64 = eig.iter().map(|l| l.max(0.0).sqrt()).sum();
        let dm: f64 = a.mu.iter().zip(&b.mu).map(|(x, y)| (x - y).powi(2)).sum();
        dm + s1.trace() + s2.trace() - 2.0 * tr
    }

    #[test]
    fn one_dimensional_closed_form() {
        let a = stats(vec![0.0], vec![1.0]);
        let b = stats(vec![3.0], vec![1.0]);
        assert_eq!(frechet_distance(&a, &b).unwrap(), 9.0);
        let c = stats(vec![0.0], vec![4.0]);
        // (sigma1 - sigma2)^2 = 1
        assert!((frechet_distance(&a, &c).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(frechet_distance(&a, &a).unwrap(), 0.0);
    }

    #[test]
    fn matches_symmetric_product_formulation() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..10 {
            let s1 = random_psd(4, 6, &mut rng);
            let s2 = random_psd(4, 6, &mut rng);
            let a = stats((0..4).map(|_| rng.random()).collect(), s1.as_slice().to_vec());
            let b = stats((0..4).map(|_| rng.random()).collect(), s2.as_slice().to_vec());
            let d = frechet_distance(&a, &b).unwrap();
            let o = oracle(&a, &b);
            assert!((d - o).abs() <= 1e-8 * o.abs().max(1e-12), "{d} vs {o}");
            let ds = frechet_distance(&b, &a).unwrap();
            assert!((d - ds).abs() <= 1e-10 * d.max(1.0));
        }
    }

    #[test]
    fn rejects_mismatch_and_indefinite() {
        let a = stats(vec![0.0], vec![1.0]);
        let b = stats(vec![0.0, 0.0], vec![1.0, 0.0, 0.0, 1.0]);
        assert!(frechet_distance(&a, &b).is_err());
        let bad = stats(vec![0.0, 0.0], vec![1.0, 0.0, 0.0, -0.5]);
        assert!(matches!(frechet_distance(&bad, &bad), Err(Error::Numerical(_))));
        let tiny_neg = stats(vec![0.0, 0.0], vec![1.0, 0.0, 0.0, -1e-12]);
        assert!(frechet_distance(&tiny_neg, &tiny_neg).is_ok());
    }

    #[test]
    fn identical_samples_have_zero_covariance() {
        let f = vec![0.3, -1.0, 2.0];
        let s = FeatureStats::from_features((0..5).map(|_| f.as_slice())).unwrap();
        assert!(s.sigma.iter().all(|&v| v.abs() < 1e-15));
        assert!(FeatureStats::from_features([f.as_slice()]).is_err());
    }

    #[test]
    fn merge_matches_single_pass() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let xs: Vec<Vec<f64>> = (0..301)
            .map(|_| (0..5).map(|_| rng.random::<f64>() * 3.0 + 1.0).collect())
            .collect();
        let mut all = FeatureAccumulator::new(5);
        let mut left = FeatureAccumulator::new(5);
        let mut right = FeatureAccumulator::new(5);
        for (i, x) in xs.iter().enumerate() {
            all.push(x).unwrap();
            if i < 120 { left.push(x).unwrap() } else { right.push(x).unwrap() }
        }
        let a = all.finish().unwrap();
        let m = left.merge(&right).unwrap().finish().unwrap();
        for (x, y) in a.mu.iter().zip(&m.mu).chain(a.sigma.iter().zip(&m.sigma)) {
            assert!((x - y).abs() <= 1e-10);
        }
        // Two-pass reference for the covariance.
        let n = xs.len() as f64;
        for i in 0..5 {
            for j in 0..5 {
                let c: f64 = xs.iter().map(|x| (x[i] - a.mu[i]) * (x[j] - a.mu[j])).sum::<f64>() / (n - 1.0);
                assert!((c - a.sigma[i * 5 + j]).abs() <= 1e-10);
            }
        }
    }

    #[test]
    fn standard_normal_features() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut acc = FeatureAccumulator::new(8);
        for _ in 0..10_000 {
            let x: Vec<f64> = (0..8).map(|_| StandardNormal.sample(&mut rng)).collect();
            acc.push(&x).unwrap();
        }
        let s = acc.finish().unwrap();
        for i in 0..8 {
            assert!(s.mu[i].abs() < 0.05);
            for j in 0..8 {
                let target = if i == j { 1.0 } else { 0.0 };
                assert!((s.sigma[i * 8 + j] - target).abs() < 0.05);
            }
        }
    }

    proptest::proptest! {
        #[test]
        fn distance_is_symmetric_and_nonnegative(seed in 0u64..1000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let s1 = random_psd(3, 2, &mut rng);
            let s2 = random_psd(3, 4, &mut rng);
            let a = stats((0..3).map(|_| rng.random()).collect(), s1.as_slice().to_vec());
            let b = stats((0..3).map(|_| rng.random()).collect(), s2.as_slice().to_vec());
            let d1 = frechet_distance(&a, &b).unwrap();
            let d2 = frechet_distance(&b, &a).unwrap();
            proptest::prop_assert!(d1 >= 0.0);
            proptest::prop_assert!((d1 - d2).abs() <= 1e-9 * d1.max(1.0));
        }
    }
}
