use rand_distr::{Distribution, StandardNormal};

use super::{EncodedSequence, Features};
use crate::error::{Error, Result};
use crate::rng::RngStream;

/// Gaussian random projection matrix, `n_emb × n_low`, entries drawn from
/// `N(0, 1/n_low)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RandomProjection {
    n_emb: usize,
    n_low: usize,
    /// Row-major, `n_emb` rows of `n_low`.
    matrix: Vec<f64>,
    seed: u64,
    label: String,
}

impl RandomProjection {
    pub fn new(n_emb: usize, n_low: usize, rng: &mut RngStream) -> Result<Self> {
        if n_emb == 0 || n_low == 0 {
            return Err(Error::InvalidValue(format!(
                "projection dimensions must be positive, got {n_emb} x {n_low}"
            )));
        }
        let scale = 1.0 / (n_low as f64).sqrt();
        let matrix = (0..n_emb * n_low)
            .map(|_| {
                let z: f64 = StandardNormal.sample(rng);
                z * scale
            })
            .collect();
        Ok(RandomProjection {
            n_emb,
            n_low,
            matrix,
            seed: rng.seed(),
            label: rng.label().to_string(),
        })
    }

    pub fn input_dim(&self) -> usize {
        self.n_emb
    }

    pub fn output_dim(&self) -> usize {
        self.n_low
    }

    /// Seed and label of the stream the matrix was drawn from.
    pub fn provenance(&self) -> (u64, &str) {
        (self.seed, &self.label)
    }

    pub fn entry(&self, row: usize, col: usize) -> f64 {
        self.matrix[row * self.n_low + col]
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.matrix[i * self.n_low..(i + 1) * self.n_low]
    }
}

/// `xᵀ · matrix`.
pub fn project(x: &EncodedSequence, proj: &RandomProjection) -> Result<EncodedSequence> {
    if x.dimension() != proj.n_emb {
        return Err(Error::DimensionMismatch {
            expected: proj.n_emb,
            found: x.dimension(),
        });
    }
    let mut out = vec![0.0; proj.n_low];
    let mut accumulate = |i: usize, v: f64| {
        if v != 0.0 {
            for (o, m) in out.iter_mut().zip(proj.row(i)) {
                *o += v * m;
            }
        }
    };
    match x.features() {
        Features::Dense(values) => values.iter().enumerate().for_each(|(i, &v)| accumulate(i, v)),
        Features::Sparse(entries) => entries.iter().for_each(|&(i, v)| accumulate(i, v)),
    }
    let mut y = EncodedSequence::dense(x.encoder(), out)?;
    y.projected = true;
    Ok(y)
}
