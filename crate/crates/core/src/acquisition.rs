//! Acquisition functions for minimization.
//!
//! Lower objective values are better throughout, so improvement over the
//! incumbent `y*` is `max(y* − f, 0)`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};
use statrs::function::erf::erfc;

use crate::encoders::EncodedSequence;
use crate::error::{Error, Result};
use crate::rng::RngStream;
use crate::surrogate::{CrossCovariance, FittedGp};

pub const DEFAULT_MC_SAMPLES: usize = 128;
pub const MIN_MC_SAMPLES: usize = 16;
/// Largest sample count supported by the Sobol generator.
pub const MAX_MC_SAMPLES: usize = 1 << 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AcquisitionKind {
    Ei,
    NoisyEi,
    Random,
}

impl AcquisitionKind {
    pub fn name(self) -> &'static str {
        match self {
            AcquisitionKind::Ei => "ei",
            AcquisitionKind::NoisyEi => "noisy_ei",
            AcquisitionKind::Random => "random",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AcquisitionSpec {
    pub kind: AcquisitionKind,
    pub mc_samples: usize,
}

impl AcquisitionSpec {
    pub fn new(kind: AcquisitionKind, mc_samples: usize) -> Result<Self> {
        let spec = AcquisitionSpec { kind, mc_samples };
        spec.validate()?;
        Ok(spec)
    }

    pub fn ei() -> Self {
        AcquisitionSpec {
            kind: AcquisitionKind::Ei,
            mc_samples: DEFAULT_MC_SAMPLES,
        }
    }

    pub fn noisy_ei(mc_samples: usize) -> Result<Self> {
        AcquisitionSpec::new(AcquisitionKind::NoisyEi, mc_samples)
    }

    pub fn random() -> Self {
        AcquisitionSpec {
            kind: AcquisitionKind::Random,
            mc_samples: DEFAULT_MC_SAMPLES,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.kind == AcquisitionKind::NoisyEi
            && !(MIN_MC_SAMPLES..=MAX_MC_SAMPLES).contains(&self.mc_samples)
        {
            return Err(Error::Config(format!(
                "noisy_ei needs between {MIN_MC_SAMPLES} and {MAX_MC_SAMPLES} samples, got {}",
                self.mc_samples
            )));
        }
        Ok(())
    }
}

fn std_normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

fn std_normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

/// Analytic expected improvement below `incumbent`.
pub fn expected_improvement(mean: f64, variance: f64, incumbent: f64) -> Result<f64> {
    if !(mean.is_finite() && variance.is_finite() && incumbent.is_finite()) {
        return Err(Error::InvalidValue(format!(
            "non-finite EI input (mean {mean}, variance {variance}, incumbent {incumbent})"
        )));
    }
    if variance < -1e-12 {
        return Err(Error::InvalidValue(format!("negative variance {variance}")));
    }
    let sigma = variance.max(0.0).sqrt();
    let gap = incumbent - mean;
    if sigma == 0.0 {
        return Ok(gap.max(0.0));
    }
    let z = gap / sigma;
    // σ(φ(z) + zΦ(z)) stays accurate far into the lower tail
    let ei = sigma * (std_normal_pdf(z) + z * std_normal_cdf(z));
    Ok(ei.max(0.0).max(gap))
}

/// Best (minimum) observed target, the incumbent for analytic EI.
pub fn incumbent(targets: &[f64]) -> Option<f64> {
    targets.iter().copied().reduce(f64::min)
}

/// Monte-Carlo estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub mean: f64,
    pub std_error: f64,
}

/// Quasi-Monte-Carlo noisy expected improvement.
///
/// Each sample draws the latent function jointly at the training inputs and
/// a candidate from the GP posterior. The improvement is the sampled best
/// training value minus the sampled candidate value, floored at zero. All
/// candidates scored by one sampler share the same normals, so their scores
/// are directly comparable.
#[derive(Debug, Clone)]
pub struct NoisyEiSampler<'a> {
    gp: &'a FittedGp,
    /// Normals for the training block, one row per sample.
    z_train: DMatrix<f64>,
    /// Normals for the candidate coordinate.
    z_cand: DVector<f64>,
    /// Sampled minimum over the training inputs, per sample.
    best_train: DVector<f64>,
    /// Maps `k_c` to the loadings of the candidate on `z_train`.
    loading: DMatrix<f64>,
}

fn qmc_normals(samples: usize, dims: usize, rng: &mut RngStream) -> DMatrix<f64> {
    let normal = Normal::standard();
    let seed = rng.next_u32();
    let per_seed = sobol_burley::NUM_DIMENSIONS as usize;
    DMatrix::from_fn(samples, dims, |i, d| {
        let dim = (d % per_seed) as u32;
        let s = seed.wrapping_add((d / per_seed) as u32);
        let u = f64::from(sobol_burley::sample(i as u32, dim, s)).clamp(1e-10, 1.0 - 1e-10);
        normal.inverse_cdf(u)
    })
}

impl<'a> NoisyEiSampler<'a> {
    pub fn new(gp: &'a FittedGp, spec: &AcquisitionSpec, rng: &mut RngStream) -> Result<Self> {
        spec.validate()?;
        let n = gp.len();
        let s = spec.mc_samples;
        let z = qmc_normals(s, n + 1, rng);
        let z_train = z.columns(0, n).into_owned();
        let z_cand = z.column(n).into_owned();

        let (best_train, loading) = if n == 0 {
            (
                DVector::from_element(s, f64::INFINITY),
                DMatrix::zeros(0, 0),
            )
        } else {
            let cov = gp.posterior_training_covariance();
            let eig = SymmetricEigen::new(cov);
            let tol = 1e-12 * eig.eigenvalues.amax().max(1e-300);
            let root: Vec<f64> = eig.eigenvalues.iter().map(|l| l.max(0.0).sqrt()).collect();
            let mut factor = eig.eigenvectors.clone();
            for (k, r) in root.iter().enumerate() {
                factor.column_mut(k).scale_mut(*r);
            }
            let mean = gp.posterior_training_mean();
            let samples = &z_train * factor.transpose();
            let best = DVector::from_iterator(
                s,
                (0..s).map(|i| (0..n).map(|j| mean[j] + samples[(i, j)]).fold(f64::INFINITY, f64::min)),
            );
            // Σ_Xc = c (K + cI)⁻¹ k_c; its loadings are Λ^{+1/2} Qᵀ Σ_Xc.
            let mut pinv_root_qt = eig.eigenvectors.transpose();
            for (k, l) in eig.eigenvalues.iter().enumerate() {
                let w = if *l > tol { 1.0 / l.sqrt() } else { 0.0 };
                pinv_root_qt.row_mut(k).scale_mut(w);
            }
            let chol_inv = gp.solve_matrix(&DMatrix::identity(n, n));
            let loading = pinv_root_qt * chol_inv * gp.effective_noise();
            (best, loading)
        };
        Ok(NoisyEiSampler {
            gp,
            z_train,
            z_cand,
            best_train,
            loading,
        })
    }

    pub fn gp(&self) -> &'a FittedGp {
        self.gp
    }

    pub fn samples(&self) -> usize {
        self.z_cand.len()
    }

    pub fn estimate_cross(&self, cross: &CrossCovariance) -> McEstimate {
        let pred = self.gp.predict_cross(cross);
        let (shift, resid_sd) = if self.gp.is_empty() {
            (DVector::zeros(self.samples()), pred.variance.sqrt())
        } else {
            let a = &self.loading * &cross.k_train;
            let d2 = (pred.variance - a.norm_squared()).max(0.0);
            (&self.z_train * a, d2.sqrt())
        };
        let s = self.samples();
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        for i in 0..s {
            let f = pred.mean + shift[i] + resid_sd * self.z_cand[i];
            let imp = (self.best_train[i] - f).max(0.0);
            let imp = if imp.is_finite() { imp } else { 0.0 };
            sum += imp;
            sum_sq += imp * imp;
        }
        let mean = sum / s as f64;
        let var = (sum_sq / s as f64 - mean * mean).max(0.0);
        McEstimate {
            mean,
            std_error: (var / (s as f64 - 1.0).max(1.0)).sqrt(),
        }
    }

    pub fn score_cross(&self, cross: &CrossCovariance) -> f64 {
        self.estimate_cross(cross).mean
    }

    pub fn score(&self, x: &EncodedSequence) -> Result<f64> {
        Ok(self.score_cross(&self.gp.cross_covariance(x)?))
    }
}

/// Noisy EI of every candidate, sharing one set of quasi-random normals.
pub fn noisy_expected_improvement(
    gp: &FittedGp,
    candidates: &[EncodedSequence],
    spec: &AcquisitionSpec,
    rng: &mut RngStream,
) -> Result<Vec<f64>> {
    Ok(noisy_expected_improvement_with_error(gp, candidates, spec, rng)?
        .into_iter()
        .map(|e| e.mean)
        .collect())
}

pub fn noisy_expected_improvement_with_error(
    gp: &FittedGp,
    candidates: &[EncodedSequence],
    spec: &AcquisitionSpec,
    rng: &mut RngStream,
) -> Result<Vec<McEstimate>> {
    if candidates.is_empty() {
        return Err(Error::EmptyPool);
    }
    let sampler = NoisyEiSampler::new(gp, spec, rng)?;
    candidates
        .iter()
        .map(|x| Ok(sampler.estimate_cross(&gp.cross_covariance(x)?)))
        .collect()
}

/// Independent uniform scores in `[0, 1)`, the random baseline.
pub fn random_score(count: usize, rng: &mut RngStream) -> Result<Vec<f64>> {
    if count == 0 {
        return Err(Error::EmptyPool);
    }
    Ok((0..count).map(|_| rng.random::<f64>()).collect())
}

/// Index of the largest score; ties go to the lowest index. NaN never wins.
pub fn argmax(scores: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, s) in scores.iter().enumerate() {
        if s.is_nan() {
            continue;
        }
        if best.is_none_or(|b| *s > scores[b]) {
            best = Some(i);
        }
    }
    best
}
