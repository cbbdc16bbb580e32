//! A minimal transform coder and the source model used to exercise it.
//!
//! The coder applies an orthonormal analysis transform to each block,
//! quantizes every coefficient uniformly with midpoint reconstruction, and
//! inverts the transform. Decoded blocks therefore sit exactly on the
//! lattice whose basis columns are the transform rows scaled by their
//! quantizer steps; that lattice is what the identification side recovers.

mod observations;

pub use observations::ObservationSet;

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{LatticeBasis, Tolerances};
use crate::matrix::Matrix;
use crate::scalar::{cast, Scalar};

/// Analysis transforms the simulator can build.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TransformKind {
    /// Orthonormal DCT-II, the workhorse of block codecs.
    Dct2,
    /// Sylvester-Hadamard, normalized. Dimension must be a power of two.
    Hadamard,
    /// No transform: plain per-sample quantization.
    Identity,
    /// Seeded Haar-ish random rotation, for transforms with no structure.
    RandomOrthonormal { seed: u64 },
}

impl TransformKind {
    pub fn label(&self) -> String {
        match self {
            TransformKind::Dct2 => "dct2".into(),
            TransformKind::Hadamard => "hadamard".into(),
            TransformKind::Identity => "identity".into(),
            TransformKind::RandomOrthonormal { seed } => format!("random_orthonormal[{seed}]"),
        }
    }
}

/// Builds the `dim` x `dim` transform matrix whose rows are the analysis
/// basis. Every construction is checked orthonormal before being returned.
pub fn build_transform<T: Scalar>(kind: TransformKind, dim: usize) -> Result<Matrix<T>> {
    if dim == 0 {
        return Err(Error::InvalidConfig("transform dimension must be positive".into()));
    }
    let t = match kind {
        TransformKind::Identity => Matrix::identity(dim),
        TransformKind::Dct2 => dct2_matrix(dim),
        TransformKind::Hadamard => {
            if !dim.is_power_of_two() {
                return Err(Error::InvalidConfig(format!(
                    "Hadamard transform needs a power-of-two dimension, got {dim}"
                )));
            }
            hadamard_matrix(dim)
        }
        TransformKind::RandomOrthonormal { seed } => random_orthonormal(dim, seed),
    };
    let err = t.orthonormality_error();
    if err > T::orthonormality_tol() {
        return Err(Error::InvalidConfig(format!(
            "constructed {} transform deviates from orthonormality by {err}",
            kind.label()
        )));
    }
    Ok(t)
}

fn dct2_matrix<T: Scalar>(n: usize) -> Matrix<T> {
    let mut m = Matrix::zeros(n, n);
    let nf = n as f64;
    for k in 0..n {
        let scale = if k == 0 { (1.0 / nf).sqrt() } else { (2.0 / nf).sqrt() };
        for j in 0..n {
            let angle = PI * (j as f64 + 0.5) * k as f64 / nf;
            m[(k, j)] = cast(scale * angle.cos());
        }
    }
    m
}

fn hadamard_matrix<T: Scalar>(n: usize) -> Matrix<T> {
    // Sylvester doubling; entry (i, j) is (−1)^popcount(i & j).
    let scale = cast::<T>(1.0 / (n as f64).sqrt());
    let mut m = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let sign = if (i & j).count_ones() % 2 == 0 { scale } else { -scale };
            m[(i, j)] = sign;
        }
    }
    m
}

fn random_orthonormal<T: Scalar>(n: usize, seed: u64) -> Matrix<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cols: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..n).map(|_| rng.sample(StandardNormal)).collect())
        .collect();
    // Modified Gram-Schmidt, run twice; the second pass scrubs the loss of
    // orthogonality the first one leaves behind.
    for _pass in 0..2 {
        for j in 0..n {
            for i in 0..j {
                let d: f64 = cols[j].iter().zip(&cols[i]).map(|(a, b)| a * b).sum();
                for t in 0..n {
                    cols[j][t] -= d * cols[i][t];
                }
            }
            let nrm: f64 = cols[j].iter().map(|x| x * x).sum::<f64>().sqrt();
            for x in cols[j].iter_mut() {
                *x /= nrm;
            }
        }
    }
    let mut m = Matrix::zeros(n, n);
    for (j, c) in cols.iter().enumerate() {
        for (i, &x) in c.iter().enumerate() {
            m[(i, j)] = cast(x);
        }
    }
    m
}

/// Stationary AR(1) Gaussian source, serialized test-signal generator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SourceSpec {
    /// Lag-one correlation, in (-1, 1).
    pub rho: f64,
    /// Stationary variance.
    pub variance: f64,
    pub seed: u64,
}

impl Default for SourceSpec {
    /// Variance is deliberately large relative to the default step range so
    /// even the flattest high-frequency coefficient spans several quantizer
    /// cells per block; otherwise those coefficients quantize to zero and
    /// the decoded set cannot span the lattice.
    fn default() -> Self {
        SourceSpec {
            rho: 0.9,
            variance: 1e4,
            seed: 0,
        }
    }
}

impl SourceSpec {
    fn validate(&self) -> Result<()> {
        if !(self.rho > -1.0 && self.rho < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "AR(1) correlation must lie in (-1, 1), got {}",
                self.rho
            )));
        }
        if !(self.variance > 0.0 && self.variance.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "source variance must be positive and finite, got {}",
                self.variance
            )));
        }
        Ok(())
    }

    /// Samples `len` points of the stationary process.
    pub fn sample(&self, len: usize) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let sigma = self.variance.sqrt();
        let innovation = sigma * (1.0 - self.rho * self.rho).sqrt();
        let mut out = Vec::with_capacity(len);
        let mut prev = sigma * rng.sample::<f64, _>(StandardNormal);
        for _ in 0..len {
            out.push(prev);
            prev = self.rho * prev + innovation * rng.sample::<f64, _>(StandardNormal);
        }
        out
    }
}

/// Complete description of one simulated coder run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoderConfig<T> {
    pub dim: usize,
    pub transform: TransformKind,
    /// Quantizer step per coefficient, strictly positive.
    pub steps: Vec<T>,
    pub source: SourceSpec,
}

impl<T: Scalar> CoderConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::InvalidConfig("block dimension must be positive".into()));
        }
        if self.steps.len() != self.dim {
            return Err(Error::DimensionMismatch {
                context: "CoderConfig steps",
                expected: self.dim,
                got: self.steps.len(),
            });
        }
        if self.steps.iter().any(|s| !(s.is_finite() && *s > T::zero())) {
            return Err(Error::InvalidConfig(
                "quantizer steps must be positive and finite".into(),
            ));
        }
        self.source.validate()
    }
}

/// Quantizes one block: indices `q_k = round((T x)_k / step_k)`, ties to
/// even.
pub fn encode_block<T: Scalar>(transform: &Matrix<T>, steps: &[T], x: &[T]) -> Vec<i64> {
    let coeffs = transform.matvec(x);
    coeffs
        .iter()
        .zip(steps)
        .map(|(&c, &s)| {
            (c / s)
                .round_half_even()
                .to_i64()
                .expect("quantizer index exceeds i64 range")
        })
        .collect()
}

/// Midpoint reconstruction: `x_hat = T' (steps .* q)`.
pub fn decode_block<T: Scalar>(transform: &Matrix<T>, steps: &[T], q: &[i64]) -> Vec<T> {
    let scaled: Vec<T> = q
        .iter()
        .zip(steps)
        .map(|(&qi, &s)| cast::<T>(qi as f64) * s)
        .collect();
    transform.transpose_matvec(&scaled)
}

/// Output of [`simulate`]: the decoded observations plus the ground truth
/// they were drawn from.
#[derive(Debug, Clone)]
pub struct Simulation<T> {
    pub config: CoderConfig<T>,
    pub transform: Matrix<T>,
    pub observations: ObservationSet<T>,
    /// The lattice the decoder output lives on: transform rows scaled by
    /// their steps.
    pub lattice: LatticeBasis<T>,
}

/// Runs the coder over `num_blocks` consecutive blocks of one source
/// realization and returns the decoded output.
pub fn simulate<T: Scalar>(config: &CoderConfig<T>, num_blocks: usize) -> Result<Simulation<T>> {
    config.validate()?;
    if num_blocks == 0 {
        return Err(Error::InvalidConfig("need at least one block".into()));
    }
    let n = config.dim;
    let transform = build_transform::<T>(config.transform, n)?;
    let signal = config.source.sample(n * num_blocks);

    let mut vectors = Vec::with_capacity(num_blocks);
    for block in signal.chunks_exact(n) {
        let x: Vec<T> = block.iter().map(|&v| cast(v)).collect();
        let q = encode_block(&transform, &config.steps, &x);
        vectors.push(decode_block(&transform, &config.steps, &q));
    }

    let lattice = LatticeBasis::new(ground_truth_basis(&transform, &config.steps), &Tolerances::default())?;
    Ok(Simulation {
        config: config.clone(),
        transform,
        observations: ObservationSet::new(n, vectors)?,
        lattice,
    })
}

/// Basis of the decoded-output lattice: column k is step_k times transform
/// row k.
pub fn ground_truth_basis<T: Scalar>(transform: &Matrix<T>, steps: &[T]) -> Matrix<T> {
    let n = transform.rows();
    let mut b = Matrix::zeros(n, n);
    for k in 0..n {
        for i in 0..n {
            b[(i, k)] = transform[(k, i)] * steps[k];
        }
    }
    b
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::norm;

    #[test]
    fn dct2_small_cases_match_hand_values() {
        let t: Matrix<f64> = build_transform(TransformKind::Dct2, 2).unwrap();
        let s = 0.5f64.sqrt();
        assert!((t[(0, 0)] - s).abs() < 1e-15);
        assert!((t[(0, 1)] - s).abs() < 1e-15);
        assert!((t[(1, 0)] - s).abs() < 1e-15);
        assert!((t[(1, 1)] + s).abs() < 1e-15);

        let t4: Matrix<f64> = build_transform(TransformKind::Dct2, 4).unwrap();
        // Row 1, first entry: sqrt(2/4) cos(pi/8).
        let expect = (0.5f64).sqrt() * (PI / 8.0).cos();
        assert!((t4[(1, 0)] - expect).abs() < 1e-15);
    }

    #[test]
    fn transforms_are_orthonormal() {
        for kind in [
            TransformKind::Dct2,
            TransformKind::Hadamard,
            TransformKind::Identity,
            TransformKind::RandomOrthonormal { seed: 7 },
        ] {
            let t: Matrix<f64> = build_transform(kind, 8).unwrap();
            assert!(
                t.orthonormality_error() < 1e-12,
                "{}: {}",
                kind.label(),
                t.orthonormality_error()
            );
        }
    }

    #[test]
    fn hadamard_rejects_non_power_of_two() {
        assert!(build_transform::<f64>(TransformKind::Hadamard, 6).is_err());
        assert!(build_transform::<f64>(TransformKind::Hadamard, 8).is_ok());
    }

    #[test]
    fn random_orthonormal_is_seed_deterministic() {
        let a: Matrix<f64> = build_transform(TransformKind::RandomOrthonormal { seed: 3 }, 6).unwrap();
        let b: Matrix<f64> = build_transform(TransformKind::RandomOrthonormal { seed: 3 }, 6).unwrap();
        let c: Matrix<f64> = build_transform(TransformKind::RandomOrthonormal { seed: 4 }, 6).unwrap();
        assert_eq!(a, b);
        assert!((&a.to_row_major()[..]) != (&c.to_row_major()[..]));
    }

    #[test]
    fn encode_decode_identity_transform() {
        let t: Matrix<f64> = build_transform(TransformKind::Identity, 3).unwrap();
        let steps = vec![0.5, 1.0, 2.0];
        let q = encode_block(&t, &steps, &[0.6, -1.4, 3.1]);
        assert_eq!(q, vec![1, -1, 2]);
        let x = decode_block(&t, &steps, &q);
        assert_eq!(x, vec![0.5, -1.0, 4.0]);
    }

    #[test]
    fn quantizer_ties_round_to_even() {
        let t: Matrix<f64> = build_transform(TransformKind::Identity, 2).unwrap();
        let q = encode_block(&t, &[1.0, 1.0], &[0.5, 1.5]);
        assert_eq!(q, vec![0, 2]);
    }

    #[test]
    fn requantizing_decoded_output_is_identity() {
        let cfg = CoderConfig {
            dim: 4,
            transform: TransformKind::Dct2,
            steps: vec![0.7, 1.3, 0.4, 2.1],
            source: SourceSpec { seed: 11, ..SourceSpec::default() },
        };
        let sim = simulate(&cfg, 16).unwrap();
        for x in sim.observations.vectors() {
            let q = encode_block(&sim.transform, &cfg.steps, x);
            let y = decode_block(&sim.transform, &cfg.steps, &q);
            let diff = norm(&x.iter().zip(&y).map(|(a, b)| a - b).collect::<Vec<_>>());
            assert!(diff < 1e-9, "requantization moved a decoded point by {diff}");
        }
    }

    #[test]
    fn decoded_blocks_lie_on_ground_truth_lattice() {
        let cfg = CoderConfig {
            dim: 8,
            transform: TransformKind::Dct2,
            steps: vec![0.3, 0.9, 1.7, 0.5, 2.2, 1.1, 0.8, 1.4],
            source: SourceSpec { seed: 5, ..SourceSpec::default() },
        };
        let sim = simulate(&cfg, 24).unwrap();
        let tol = Tolerances::default();
        for x in sim.observations.vectors() {
            assert!(sim.lattice.contains(x, &tol).unwrap());
        }
    }

    #[test]
    fn source_is_stationary_and_correlated() {
        let spec = SourceSpec { rho: 0.9, variance: 4.0, seed: 42 };
        let xs = spec.sample(200_000);
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / xs.len() as f64;
        let lag1 = xs
            .windows(2)
            .map(|w| (w[0] - mean) * (w[1] - mean))
            .sum::<f64>()
            / (xs.len() - 1) as f64;
        assert!((var - 4.0).abs() < 0.15, "variance {var}");
        assert!((lag1 / var - 0.9).abs() < 0.01, "lag-1 correlation {}", lag1 / var);
    }

    #[test]
    fn config_validation() {
        let mut cfg = CoderConfig::<f64> {
            dim: 4,
            transform: TransformKind::Dct2,
            steps: vec![1.0; 4],
            source: SourceSpec::default(),
        };
        assert!(cfg.validate().is_ok());
        cfg.steps = vec![1.0; 3];
        assert!(cfg.validate().is_err());
        cfg.steps = vec![1.0, -1.0, 1.0, 1.0];
        assert!(cfg.validate().is_err());
        cfg.steps = vec![1.0; 4];
        cfg.source.rho = 1.0;
        assert!(cfg.validate().is_err());
    }
}
