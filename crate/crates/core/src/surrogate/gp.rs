use std::f64::consts::PI;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::kernel::{KernelFamily, KernelSpec};
use super::optim::{minimize_bounded, OptimOptions};
use crate::encoders::EncodedSequence;
use crate::error::{Error, Result};
use crate::rng::RngStream;

pub const DEFAULT_NOISE_VARIANCE: f64 = 1e-4;
/// Bounds on σ² when it is learned.
pub const NOISE_BOUNDS: (f64, f64) = (1e-6, 10.0);
pub const LENGTHSCALE_BOUNDS: (f64, f64) = (1e-2, 1e3);
pub const OUTPUT_SCALE_BOUNDS: (f64, f64) = (1e-4, 1e4);
/// Log-uniform ranges that restart points are drawn from.
pub const LENGTHSCALE_PRIOR: (f64, f64) = (1e-1, 1e2);
pub const OUTPUT_SCALE_PRIOR: (f64, f64) = (1e-2, 1e2);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseMode {
    Fixed,
    Learned,
}

#[derive(Debug, Clone)]
pub struct GpConfig {
    /// σ² in fixed mode.
    pub noise_variance: f64,
    pub noise_mode: NoiseMode,
    /// Initial diagonal jitter; escalated ×10 up to `max_jitter` on failure.
    pub jitter: f64,
    pub max_jitter: f64,
    pub restarts: usize,
    pub optim: OptimOptions,
}

impl Default for GpConfig {
    fn default() -> Self {
        GpConfig {
            noise_variance: DEFAULT_NOISE_VARIANCE,
            noise_mode: NoiseMode::Fixed,
            jitter: 1e-8,
            max_jitter: 1e-3,
            restarts: 5,
            optim: OptimOptions::default(),
        }
    }
}

impl GpConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.noise_variance >= 0.0 && self.noise_variance.is_finite()) {
            return Err(Error::Config(format!(
                "noise variance must be non-negative, got {}",
                self.noise_variance
            )));
        }
        if !(self.jitter > 0.0 && self.jitter <= self.max_jitter) {
            return Err(Error::Config("jitter must be positive and at most max_jitter".into()));
        }
        if self.restarts == 0 {
            return Err(Error::Config("at least one optimizer restart is required".into()));
        }
        Ok(())
    }
}

/// Hyperparameters of a GP with constant mean.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GpParams {
    pub mean: f64,
    pub kernel: KernelSpec,
    pub noise_variance: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub mean: f64,
    /// Latent (noise-free) posterior variance, clamped at zero.
    pub variance: f64,
}

/// Kernel values of one query point against the training inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct CrossCovariance {
    pub k_train: DVector<f64>,
    pub k_self: f64,
}

/// A GP conditioned on its training data.
#[derive(Debug, Clone)]
pub struct FittedGp {
    inputs: Vec<EncodedSequence>,
    targets: DVector<f64>,
    params: GpParams,
    jitter: f64,
    chol: Option<Cholesky<f64, Dyn>>,
    l: DMatrix<f64>,
    alpha: DVector<f64>,
}

fn inner_products(inputs: &[EncodedSequence]) -> Result<(DMatrix<f64>, Vec<f64>)> {
    if let Some(first) = inputs.first() {
        for x in &inputs[1..] {
            first.check_compatible(x)?;
        }
    }
    let n = inputs.len();
    let mut dots = DMatrix::zeros(n, n);
    for i in 0..n {
        dots[(i, i)] = inputs[i].sq_norm();
        for j in 0..i {
            let d = inputs[i].dot(&inputs[j]);
            dots[(i, j)] = d;
            dots[(j, i)] = d;
        }
    }
    let sq = (0..n).map(|i| dots[(i, i)]).collect();
    Ok((dots, sq))
}

fn kernel_matrix(spec: &KernelSpec, dots: &DMatrix<f64>, sq: &[f64]) -> DMatrix<f64> {
    let n = sq.len();
    DMatrix::from_fn(n, n, |i, j| spec.from_inner(dots[(i, j)], sq[i], sq[j]))
}

fn check_targets(targets: &[f64]) -> Result<()> {
    match targets.iter().position(|t| !t.is_finite()) {
        Some(i) => Err(Error::InvalidValue(format!("target {i} is not finite"))),
        None => Ok(()),
    }
}

impl FittedGp {
    /// Conditions a GP with the given hyperparameters on the data.
    pub fn condition(
        inputs: Vec<EncodedSequence>,
        targets: Vec<f64>,
        params: GpParams,
        cfg: &GpConfig,
    ) -> Result<Self> {
        if inputs.len() != targets.len() {
            return Err(Error::DimensionMismatch {
                expected: inputs.len(),
                found: targets.len(),
            });
        }
        check_targets(&targets)?;
        let (dots, sq) = inner_products(&inputs)?;
        let n = inputs.len();
        let targets = DVector::from_vec(targets);
        if n == 0 {
            return Ok(FittedGp {
                inputs,
                targets,
                params,
                jitter: 0.0,
                chol: None,
                l: DMatrix::zeros(0, 0),
                alpha: DVector::zeros(0),
            });
        }
        let kf = kernel_matrix(&params.kernel, &dots, &sq);
        let mut jitter = cfg.jitter;
        let chol = loop {
            let mut k = kf.clone();
            for i in 0..n {
                k[(i, i)] += params.noise_variance + jitter;
            }
            if let Some(c) = Cholesky::new(k) {
                break c;
            }
            jitter *= 10.0;
            if jitter > cfg.max_jitter * (1.0 + 1e-9) {
                return Err(Error::Cholesky {
                    jitter: cfg.max_jitter,
                });
            }
        };
        let resid = targets.map(|y| y - params.mean);
        let alpha = chol.solve(&resid);
        let l = chol.l();
        Ok(FittedGp {
            inputs,
            targets,
            params,
            jitter,
            chol: Some(chol),
            l,
            alpha,
        })
    }

    /// Maximizes the log marginal likelihood over the hyperparameters and
    /// conditions on the result. The constant mean is profiled out in closed
    /// form; the remaining parameters are optimized in log space from
    /// `cfg.restarts` random starts.
    pub fn fit(
        inputs: Vec<EncodedSequence>,
        targets: Vec<f64>,
        family: KernelFamily,
        cfg: &GpConfig,
        rng: &mut RngStream,
    ) -> Result<Self> {
        cfg.validate()?;
        if inputs.is_empty() {
            return Err(Error::InvalidValue("cannot fit a GP to zero observations".into()));
        }
        let surface = LikelihoodSurface::new(&inputs, &targets, family, cfg)?;
        let (lower, upper) = surface.bounds();
        let mut best: Option<(f64, Vec<f64>)> = None;
        for _ in 0..cfg.restarts {
            let start = surface.sample_start(rng);
            let result = minimize_bounded(
                |theta| {
                    surface
                        .evaluate(theta)
                        .map(|e| (-e.value, e.gradient.iter().map(|g| -g).collect()))
                },
                &start,
                &lower,
                &upper,
                cfg.optim,
            );
            if let Some(r) = result {
                if best.as_ref().is_none_or(|(v, _)| r.value < *v) {
                    best = Some((r.value, r.x));
                }
            }
        }
        let Some((_, theta)) = best else {
            return Err(Error::Cholesky { jitter: cfg.jitter });
        };
        let params = surface.params_at(&theta)?;
        FittedGp::condition(inputs, targets, params, cfg)
    }

    pub fn params(&self) -> &GpParams {
        &self.params
    }

    pub fn inputs(&self) -> &[EncodedSequence] {
        &self.inputs
    }

    pub fn targets(&self) -> &DVector<f64> {
        &self.targets
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    /// Jitter actually added to the diagonal.
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    /// Total diagonal term σ² + jitter.
    pub fn effective_noise(&self) -> f64 {
        self.params.noise_variance + self.jitter
    }

    /// Lower Cholesky factor of `K + (σ² + jitter) I`.
    pub fn cholesky_factor(&self) -> &DMatrix<f64> {
        &self.l
    }

    /// `(K + (σ² + jitter) I)⁻¹ v`.
    pub fn solve(&self, v: &DVector<f64>) -> DVector<f64> {
        match &self.chol {
            Some(c) => c.solve(v),
            None => DVector::zeros(0),
        }
    }

    /// `(K + (σ² + jitter) I)⁻¹ B`.
    pub fn solve_matrix(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        match &self.chol {
            Some(c) => c.solve(b),
            None => DMatrix::zeros(0, b.ncols()),
        }
    }

    pub fn cross_covariance(&self, x: &EncodedSequence) -> Result<CrossCovariance> {
        if let Some(first) = self.inputs.first() {
            first.check_compatible(x)?;
        }
        let dots: Vec<f64> = self.inputs.iter().map(|xi| xi.dot(x)).collect();
        Ok(self.cross_covariance_from_inner(&dots, x.sq_norm()))
    }

    /// Like [`cross_covariance`](Self::cross_covariance) from precomputed
    /// inner products `⟨x, x_i⟩` with every training input.
    pub fn cross_covariance_from_inner(&self, dots: &[f64], sq_norm: f64) -> CrossCovariance {
        let spec = &self.params.kernel;
        let k_train = DVector::from_iterator(
            self.inputs.len(),
            dots.iter()
                .zip(&self.inputs)
                .map(|(&d, xi)| spec.from_inner(d, sq_norm, xi.sq_norm())),
        );
        CrossCovariance {
            k_train,
            k_self: spec.from_inner(sq_norm, sq_norm, sq_norm),
        }
    }

    pub fn predict_cross(&self, c: &CrossCovariance) -> Prediction {
        if self.inputs.is_empty() {
            return Prediction {
                mean: self.params.mean,
                variance: c.k_self.max(0.0),
            };
        }
        let mean = self.params.mean + c.k_train.dot(&self.alpha);
        let v = self
            .l
            .solve_lower_triangular(&c.k_train)
            .expect("Cholesky factor has a positive diagonal");
        Prediction {
            mean,
            variance: (c.k_self - v.norm_squared()).max(0.0),
        }
    }

    pub fn predict(&self, x: &EncodedSequence) -> Result<Prediction> {
        Ok(self.predict_cross(&self.cross_covariance(x)?))
    }

    pub fn predict_all(&self, xs: &[EncodedSequence]) -> Result<Vec<Prediction>> {
        xs.iter().map(|x| self.predict(x)).collect()
    }

    /// Exact log marginal likelihood of the targets under the prior.
    pub fn log_marginal_likelihood(&self) -> f64 {
        let n = self.inputs.len();
        if n == 0 {
            return 0.0;
        }
        let resid = self.targets.map(|y| y - self.params.mean);
        let log_det: f64 = (0..n).map(|i| self.l[(i, i)].ln()).sum();
        -0.5 * resid.dot(&self.alpha) - log_det - 0.5 * n as f64 * (2.0 * PI).ln()
    }

    /// Latent posterior covariance at the training inputs,
    /// `s I − s² (K + s I)⁻¹` with `s` the effective noise.
    pub fn posterior_training_covariance(&self) -> DMatrix<f64> {
        let n = self.inputs.len();
        let Some(chol) = &self.chol else {
            return DMatrix::zeros(0, 0);
        };
        let s = self.effective_noise();
        let mut cov = chol.inverse() * (-s * s);
        for i in 0..n {
            cov[(i, i)] += s;
        }
        (&cov + cov.transpose()) * 0.5
    }

    /// Latent posterior means at the training inputs.
    pub fn posterior_training_mean(&self) -> DVector<f64> {
        // y − s α, since K_f α = (K − s I) α = (y − m) − s α
        let s = self.effective_noise();
        &self.targets - &self.alpha * s
    }
}

/// Value and gradient of the profiled log marginal likelihood.
#[derive(Debug, Clone, PartialEq)]
pub struct LikelihoodEval {
    pub value: f64,
    /// Gradient with respect to the log-space parameters.
    pub gradient: Vec<f64>,
    /// Maximizing constant mean at these parameters.
    pub mean: f64,
}

/// Log marginal likelihood as a function of log-space hyperparameters, with
/// the constant mean profiled out.
///
/// Parameter order: log output scale, then log lengthscale (stationary
/// families), then log σ² (learned noise).
#[derive(Debug, Clone)]
pub struct LikelihoodSurface {
    family: KernelFamily,
    learn_noise: bool,
    fixed_noise: f64,
    jitter: f64,
    targets: DVector<f64>,
    dots: DMatrix<f64>,
    sq: Vec<f64>,
    /// Tanimoto only: eigendecomposition of the unit-scale Gram matrix, which
    /// stays fixed because the family has no lengthscale.
    eigen: Option<TanimotoEigen>,
}

#[derive(Debug, Clone)]
struct TanimotoEigen {
    values: DVector<f64>,
    rotated_targets: DVector<f64>,
    rotated_ones: DVector<f64>,
}

impl LikelihoodSurface {
    pub fn new(
        inputs: &[EncodedSequence],
        targets: &[f64],
        family: KernelFamily,
        cfg: &GpConfig,
    ) -> Result<Self> {
        if inputs.len() != targets.len() {
            return Err(Error::DimensionMismatch {
                expected: inputs.len(),
                found: targets.len(),
            });
        }
        check_targets(targets)?;
        let (dots, sq) = inner_products(inputs)?;
        let targets = DVector::from_column_slice(targets);
        let eigen = (family == KernelFamily::Tanimoto).then(|| {
            let unit = kernel_matrix(&KernelSpec::tanimoto(1.0).expect("valid"), &dots, &sq);
            let eig = SymmetricEigen::new(unit);
            let qt = eig.eigenvectors.transpose();
            TanimotoEigen {
                values: eig.eigenvalues,
                rotated_targets: &qt * &targets,
                rotated_ones: &qt * DVector::from_element(targets.len(), 1.0),
            }
        });
        Ok(LikelihoodSurface {
            family,
            learn_noise: cfg.noise_mode == NoiseMode::Learned,
            fixed_noise: cfg.noise_variance,
            jitter: cfg.jitter,
            targets,
            dots,
            sq,
            eigen,
        })
    }

    pub fn dim(&self) -> usize {
        1 + usize::from(self.family.has_lengthscale()) + usize::from(self.learn_noise)
    }

    pub fn bounds(&self) -> (Vec<f64>, Vec<f64>) {
        let mut lo = vec![OUTPUT_SCALE_BOUNDS.0.ln()];
        let mut hi = vec![OUTPUT_SCALE_BOUNDS.1.ln()];
        if self.family.has_lengthscale() {
            lo.push(LENGTHSCALE_BOUNDS.0.ln());
            hi.push(LENGTHSCALE_BOUNDS.1.ln());
        }
        if self.learn_noise {
            lo.push(NOISE_BOUNDS.0.ln());
            hi.push(NOISE_BOUNDS.1.ln());
        }
        (lo, hi)
    }

    /// Random start drawn log-uniformly from the restart priors.
    pub fn sample_start(&self, rng: &mut RngStream) -> Vec<f64> {
        let mut draw = |(a, b): (f64, f64)| rng.random_range(a.ln()..b.ln());
        let mut x = vec![draw(OUTPUT_SCALE_PRIOR)];
        if self.family.has_lengthscale() {
            x.push(draw(LENGTHSCALE_PRIOR));
        }
        if self.learn_noise {
            x.push(draw(NOISE_BOUNDS));
        }
        x
    }

    fn unpack(&self, theta: &[f64]) -> Result<(KernelSpec, f64)> {
        let output_scale = theta[0].exp();
        let lengthscale = self.family.has_lengthscale().then(|| theta[1].exp());
        let noise = if self.learn_noise {
            theta[theta.len() - 1].exp()
        } else {
            self.fixed_noise
        };
        Ok((KernelSpec::new(self.family, lengthscale, output_scale)?, noise))
    }

    /// Hyperparameters at `theta`, including the profiled mean.
    pub fn params_at(&self, theta: &[f64]) -> Result<GpParams> {
        let (kernel, noise_variance) = self.unpack(theta)?;
        let eval = self
            .evaluate(theta)
            .ok_or(Error::Cholesky { jitter: self.jitter })?;
        Ok(GpParams {
            mean: eval.mean,
            kernel,
            noise_variance,
        })
    }

    pub fn evaluate(&self, theta: &[f64]) -> Option<LikelihoodEval> {
        if theta.len() != self.dim() || theta.iter().any(|t| !t.is_finite()) {
            return None;
        }
        if self.eigen.is_some() {
            self.evaluate_eigen(theta)
        } else {
            self.evaluate_cholesky(theta)
        }
    }

    fn evaluate_eigen(&self, theta: &[f64]) -> Option<LikelihoodEval> {
        let eig = self.eigen.as_ref()?;
        let (kernel, noise) = self.unpack(theta).ok()?;
        let s = kernel.output_scale();
        let c = noise + self.jitter;
        let d: Vec<f64> = eig.values.iter().map(|l| s * l + c).collect();
        if d.iter().any(|v| *v <= 0.0) {
            return None;
        }
        let (yt, ot) = (&eig.rotated_targets, &eig.rotated_ones);
        let oky: f64 = (0..d.len()).map(|i| ot[i] * yt[i] / d[i]).sum();
        let oko: f64 = (0..d.len()).map(|i| ot[i] * ot[i] / d[i]).sum();
        let mean = oky / oko;
        let n = d.len() as f64;
        let mut value = -0.5 * n * (2.0 * PI).ln();
        let mut g_scale = 0.0;
        let mut g_noise = 0.0;
        for i in 0..d.len() {
            let r = yt[i] - mean * ot[i];
            let a = r / d[i];
            value -= 0.5 * (r * a + d[i].ln());
            let w = a * a - 1.0 / d[i];
            g_scale += 0.5 * w * s * eig.values[i];
            g_noise += 0.5 * w * noise;
        }
        let mut gradient = vec![g_scale];
        if self.learn_noise {
            gradient.push(g_noise);
        }
        Some(LikelihoodEval {
            value,
            gradient,
            mean,
        })
    }

    fn evaluate_cholesky(&self, theta: &[f64]) -> Option<LikelihoodEval> {
        let (kernel, noise) = self.unpack(theta).ok()?;
        let n = self.sq.len();
        let kf = kernel_matrix(&kernel, &self.dots, &self.sq);
        let mut k = kf.clone();
        for i in 0..n {
            k[(i, i)] += noise + self.jitter;
        }
        let chol = Cholesky::new(k)?;
        let ones = DVector::from_element(n, 1.0);
        let ky = chol.solve(&self.targets);
        let ko = chol.solve(&ones);
        let mean = ones.dot(&ky) / ones.dot(&ko);
        let alpha = &ky - &ko * mean;
        let resid = self.targets.map(|y| y - mean);
        let l = chol.l_dirty();
        let log_det: f64 = (0..n).map(|i| l[(i, i)].ln()).sum();
        let value = -0.5 * resid.dot(&alpha) - log_det - 0.5 * n as f64 * (2.0 * PI).ln();

        // d/dθ = ½ tr((ααᵀ − K⁻¹) ∂K/∂θ)
        let mut w = chol.inverse();
        w.ger(1.0, &alpha, &alpha, -1.0);
        let mut gradient = vec![0.5 * w.component_mul(&kf).sum()];
        if self.family.has_lengthscale() {
            let s = kernel.output_scale();
            let mut acc = 0.0;
            for i in 0..n {
                for j in 0..n {
                    let dk = kernel.correlation_dlog_lengthscale(
                        self.dots[(i, j)],
                        self.sq[i],
                        self.sq[j],
                    );
                    acc += w[(i, j)] * s * dk;
                }
            }
            gradient.push(0.5 * acc);
        }
        if self.learn_noise {
            gradient.push(0.5 * noise * w.trace());
        }
        Some(LikelihoodEval {
            value,
            gradient,
            mean,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoders::EncoderKind;
    use crate::surrogate::kernel_eval;
    use rand::Rng;

    fn random_inputs(rng: &mut RngStream, n: usize, dim: usize, nonneg: bool) -> Vec<EncodedSequence> {
        (0..n)
            .map(|_| {
                let v = (0..dim)
                    .map(|_| {
                        if nonneg {
                            rng.random_range(0.0..2.0)
                        } else {
                            rng.random_range(-2.0..2.0)
                        }
                    })
                    .collect();
                EncodedSequence::dense(EncoderKind::External, v).unwrap()
            })
            .collect()
    }

    fn x(v: &[f64]) -> EncodedSequence {
        EncodedSequence::dense(EncoderKind::External, v.to_vec()).unwrap()
    }

    #[test]
    fn prior_prediction_without_data() {
        let params = GpParams {
            mean: 0.7,
            kernel: KernelSpec::rbf(1.0, 2.0).unwrap(),
            noise_variance: 1e-4,
        };
        let gp = FittedGp::condition(vec![], vec![], params, &GpConfig::default()).unwrap();
        let p = gp.predict(&x(&[1.0, 2.0])).unwrap();
        assert_eq!(p, Prediction { mean: 0.7, variance: 2.0 });
        assert_eq!(gp.log_marginal_likelihood(), 0.0);
    }

    #[test]
    fn single_point_standard_normal_density() {
        // K + σ² = 1 and mean equal to the target
        let params = GpParams {
            mean: 3.0,
            kernel: KernelSpec::rbf(1.0, 1.0 - 1e-4).unwrap(),
            noise_variance: 1e-4,
        };
        let gp = FittedGp::condition(vec![x(&[0.5])], vec![3.0], params, &GpConfig::default()).unwrap();
        assert!((gp.log_marginal_likelihood() + 0.5 * (2.0 * PI).ln()).abs() < 1e-7);
    }

    #[test]
    fn constant_targets_fit_constant_mean() {
        let mut rng = RngStream::new(11, "gp");
        let inputs = random_inputs(&mut rng, 3, 4, true);
        for family in [KernelFamily::Tanimoto, KernelFamily::Rbf, KernelFamily::Matern32] {
            let gp = FittedGp::fit(inputs.clone(), vec![-1.5; 3], family, &GpConfig::default(), &mut rng)
                .unwrap();
            assert!((gp.params().mean + 1.5).abs() < 1e-6, "{family:?}");
            let p = gp.predict(&x(&[0.1, 0.9, 1.4, 0.2])).unwrap();
            assert!((p.mean + 1.5).abs() < 10.0 * 1e-2, "{family:?}: {}", p.mean);
        }
    }

    #[test]
    fn single_observation_is_interpolated() {
        let mut rng = RngStream::new(5, "gp");
        let inputs = random_inputs(&mut rng, 1, 3, true);
        for family in [KernelFamily::Tanimoto, KernelFamily::Rbf, KernelFamily::Matern32] {
            let gp = FittedGp::fit(inputs.clone(), vec![2.3], family, &GpConfig::default(), &mut rng)
                .unwrap();
            let p = gp.predict(&inputs[0]).unwrap();
            assert!((p.mean - 2.3).abs() < 1e-2);
            assert!(p.variance <= 2e-4, "{family:?}: {}", p.variance);
            assert_eq!(gp.params().noise_variance, 1e-4);
        }
    }

    #[test]
    fn fixed_noise_is_never_changed() {
        let mut rng = RngStream::new(8, "gp");
        let inputs = random_inputs(&mut rng, 10, 3, false);
        let targets: Vec<f64> = (0..10).map(|i| (i as f64).sin()).collect();
        let cfg = GpConfig {
            noise_variance: 0.0123,
            ..Default::default()
        };
        let gp = FittedGp::fit(inputs, targets, KernelFamily::Matern32, &cfg, &mut rng).unwrap();
        assert_eq!(gp.params().noise_variance, 0.0123);
    }

    #[test]
    fn learned_noise_stays_in_bounds() {
        let mut rng = RngStream::new(8, "gp");
        let inputs = random_inputs(&mut rng, 12, 2, false);
        let targets: Vec<f64> = (0..12).map(|_| rng.random_range(-1.0..1.0)).collect();
        let cfg = GpConfig {
            noise_mode: NoiseMode::Learned,
            ..Default::default()
        };
        let gp = FittedGp::fit(inputs, targets, KernelFamily::Rbf, &cfg, &mut rng).unwrap();
        let s2 = gp.params().noise_variance;
        assert!((NOISE_BOUNDS.0..=NOISE_BOUNDS.1).contains(&s2));
    }

    #[test]
    fn eigen_and_cholesky_routes_agree() {
        let mut rng = RngStream::new(21, "gp");
        for learn in [false, true] {
            let inputs = random_inputs(&mut rng, 9, 6, true);
            let targets: Vec<f64> = (0..9).map(|_| rng.random_range(-2.0..1.0)).collect();
            let cfg = GpConfig {
                noise_mode: if learn { NoiseMode::Learned } else { NoiseMode::Fixed },
                ..Default::default()
            };
            let surface = LikelihoodSurface::new(&inputs, &targets, KernelFamily::Tanimoto, &cfg).unwrap();
            for _ in 0..5 {
                let theta = surface.sample_start(&mut rng);
                let a = surface.evaluate_eigen(&theta).unwrap();
                let b = surface.evaluate_cholesky(&theta).unwrap();
                assert!((a.value - b.value).abs() < 1e-8 * (1.0 + b.value.abs()));
                assert!((a.mean - b.mean).abs() < 1e-8 * (1.0 + b.mean.abs()));
                for (ga, gb) in a.gradient.iter().zip(&b.gradient) {
                    assert!((ga - gb).abs() < 1e-7 * (1.0 + gb.abs()), "{ga} vs {gb}");
                }
            }
        }
    }

    #[test]
    fn prediction_matches_dense_inverse() {
        let mut rng = RngStream::new(2, "gp");
        let inputs = random_inputs(&mut rng, 7, 3, false);
        let targets: Vec<f64> = (0..7).map(|_| rng.random_range(-1.0..1.0)).collect();
        let kernel = KernelSpec::matern32(1.3, 0.8).unwrap();
        let params = GpParams { mean: 0.2, kernel, noise_variance: 1e-2 };
        let gp = FittedGp::condition(inputs.clone(), targets.clone(), params, &GpConfig::default()).unwrap();
        let s = gp.effective_noise();
        let k = DMatrix::from_fn(7, 7, |i, j| {
            kernel_eval(&kernel, &inputs[i], &inputs[j]).unwrap() + if i == j { s } else { 0.0 }
        });
        let kinv = k.try_inverse().unwrap();
        let q = x(&[0.3, -0.4, 1.1]);
        let kx = DVector::from_iterator(7, inputs.iter().map(|xi| kernel_eval(&kernel, xi, &q).unwrap()));
        let r = DVector::from_iterator(7, targets.iter().map(|t| t - 0.2));
        let mean = 0.2 + (kx.transpose() * &kinv * r)[(0, 0)];
        let var = 0.8 - (kx.transpose() * &kinv * &kx)[(0, 0)];
        let p = gp.predict(&q).unwrap();
        assert!((p.mean - mean).abs() < 1e-9);
        assert!((p.variance - var).abs() < 1e-9);
        let post = gp.posterior_training_covariance();
        let direct = DMatrix::identity(7, 7) * s - &kinv * (s * s);
        assert!((post - direct).amax() < 1e-9);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = RngStream::new(4, "gp");
        let inputs = random_inputs(&mut rng, 8, 3, true);
        let targets: Vec<f64> = (0..8).map(|_| rng.random_range(-1.0..1.0)).collect();
        let cfg = GpConfig { noise_mode: NoiseMode::Learned, ..Default::default() };
        for family in [KernelFamily::Tanimoto, KernelFamily::Rbf, KernelFamily::Matern32] {
            let surface = LikelihoodSurface::new(&inputs, &targets, family, &cfg).unwrap();
            let theta = surface.sample_start(&mut rng);
            let g = surface.evaluate(&theta).unwrap().gradient;
            for i in 0..theta.len() {
                let h = 1e-5;
                let mut tp = theta.clone();
                let mut tm = theta.clone();
                tp[i] += h;
                tm[i] -= h;
                let fd = (surface.evaluate(&tp).unwrap().value - surface.evaluate(&tm).unwrap().value)
                    / (2.0 * h);
                assert!((fd - g[i]).abs() <= 1e-5 * fd.abs().max(g[i].abs()).max(1.0), "{family:?} {i}: {fd} vs {}", g[i]);
            }
        }
    }

    #[test]
    fn cholesky_escalates_jitter_for_duplicates() {
        let params = GpParams {
            mean: 0.0,
            kernel: KernelSpec::tanimoto(1.0).unwrap(),
            noise_variance: 0.0,
        };
        let cfg = GpConfig {
            noise_variance: 0.0,
            ..Default::default()
        };
        let p = x(&[1.0, 0.0, 1.0]);
        let gp = FittedGp::condition(vec![p.clone(), p.clone(), p], vec![0.0, 0.1, 0.2], params, &cfg)
            .unwrap();
        assert!(gp.jitter() >= 1e-8 && gp.jitter() <= 1e-3);
        let l = gp.cholesky_factor();
        for i in 0..3 {
            assert!(l[(i, i)] > 0.0);
            for j in (i + 1)..3 {
                assert_eq!(l[(i, j)], 0.0);
            }
        }
    }

    #[test]
    fn rejects_mismatched_inputs() {
        let params = GpParams {
            mean: 0.0,
            kernel: KernelSpec::rbf(1.0, 1.0).unwrap(),
            noise_variance: 1e-4,
        };
        let cfg = GpConfig::default();
        assert!(FittedGp::condition(vec![x(&[1.0])], vec![0.0, 1.0], params, &cfg).is_err());
        assert!(FittedGp::condition(vec![x(&[1.0]), x(&[1.0, 2.0])], vec![0.0, 1.0], params, &cfg).is_err());
        assert!(FittedGp::condition(vec![x(&[1.0])], vec![f64::NAN], params, &cfg).is_err());
        let gp = FittedGp::condition(vec![x(&[1.0])], vec![0.0], params, &cfg).unwrap();
        assert!(gp.predict(&x(&[1.0, 2.0])).is_err());
    }
}
