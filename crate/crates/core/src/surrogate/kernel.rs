use serde::{Deserialize, Serialize};

use crate::encoders::EncodedSequence;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelFamily {
    Tanimoto,
    Rbf,
    Matern32,
}

impl KernelFamily {
    pub fn has_lengthscale(self) -> bool {
        !matches!(self, KernelFamily::Tanimoto)
    }

    pub fn name(self) -> &'static str {
        match self {
            KernelFamily::Tanimoto => "tanimoto",
            KernelFamily::Rbf => "rbf",
            KernelFamily::Matern32 => "matern32",
        }
    }
}

/// Kernel family with its hyperparameters.
///
/// Every family here is a function of `⟨x, y⟩`, `‖x‖²` and `‖y‖²` only, which
/// is what lets callers cache inner products instead of feature vectors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelSpec {
    family: KernelFamily,
    lengthscale: Option<f64>,
    output_scale: f64,
}

impl KernelSpec {
    pub fn new(family: KernelFamily, lengthscale: Option<f64>, output_scale: f64) -> Result<Self> {
        if !(output_scale > 0.0 && output_scale.is_finite()) {
            return Err(Error::InvalidKernel(format!(
                "output scale must be positive, got {output_scale}"
            )));
        }
        match (family.has_lengthscale(), lengthscale) {
            (false, Some(_)) => {
                return Err(Error::InvalidKernel("tanimoto kernel has no lengthscale".into()))
            }
            (true, None) => {
                return Err(Error::InvalidKernel(format!(
                    "{} kernel needs a lengthscale",
                    family.name()
                )))
            }
            (true, Some(l)) if !(l > 0.0 && l.is_finite()) => {
                return Err(Error::InvalidKernel(format!(
                    "lengthscale must be positive, got {l}"
                )))
            }
            _ => {}
        }
        Ok(KernelSpec {
            family,
            lengthscale,
            output_scale,
        })
    }

    pub fn tanimoto(output_scale: f64) -> Result<Self> {
        Self::new(KernelFamily::Tanimoto, None, output_scale)
    }

    pub fn rbf(lengthscale: f64, output_scale: f64) -> Result<Self> {
        Self::new(KernelFamily::Rbf, Some(lengthscale), output_scale)
    }

    pub fn matern32(lengthscale: f64, output_scale: f64) -> Result<Self> {
        Self::new(KernelFamily::Matern32, Some(lengthscale), output_scale)
    }

    pub fn family(&self) -> KernelFamily {
        self.family
    }

    pub fn lengthscale(&self) -> Option<f64> {
        self.lengthscale
    }

    pub fn output_scale(&self) -> f64 {
        self.output_scale
    }

    /// Kernel value from an inner product and the two squared norms.
    pub fn from_inner(&self, dot: f64, sq_x: f64, sq_y: f64) -> f64 {
        self.output_scale * self.correlation(dot, sq_x, sq_y)
    }

    /// Kernel value with unit output scale.
    pub fn correlation(&self, dot: f64, sq_x: f64, sq_y: f64) -> f64 {
        match self.family {
            KernelFamily::Tanimoto => tanimoto_similarity(dot, sq_x, sq_y),
            KernelFamily::Rbf => {
                let l = self.lengthscale.unwrap_or(1.0);
                (-0.5 * sq_distance(dot, sq_x, sq_y) / (l * l)).exp()
            }
            KernelFamily::Matern32 => {
                let l = self.lengthscale.unwrap_or(1.0);
                let a = 3f64.sqrt() * sq_distance(dot, sq_x, sq_y).sqrt() / l;
                (1.0 + a) * (-a).exp()
            }
        }
    }

    /// Derivative of [`correlation`](Self::correlation) with respect to the
    /// log lengthscale. Zero for tanimoto.
    pub fn correlation_dlog_lengthscale(&self, dot: f64, sq_x: f64, sq_y: f64) -> f64 {
        match self.family {
            KernelFamily::Tanimoto => 0.0,
            KernelFamily::Rbf => {
                let l = self.lengthscale.unwrap_or(1.0);
                let q = sq_distance(dot, sq_x, sq_y) / (l * l);
                q * (-0.5 * q).exp()
            }
            KernelFamily::Matern32 => {
                let l = self.lengthscale.unwrap_or(1.0);
                let a = 3f64.sqrt() * sq_distance(dot, sq_x, sq_y).sqrt() / l;
                a * a * (-a).exp()
            }
        }
    }
}

fn sq_distance(dot: f64, sq_x: f64, sq_y: f64) -> f64 {
    (sq_x + sq_y - 2.0 * dot).max(0.0)
}

/// `⟨x,y⟩ / (‖x‖² + ‖y‖² − ⟨x,y⟩)`; two zero vectors count as identical.
pub fn tanimoto_similarity(dot: f64, sq_x: f64, sq_y: f64) -> f64 {
    let denom = sq_x + sq_y - dot;
    if denom <= 0.0 {
        1.0
    } else {
        dot / denom
    }
}

pub fn kernel_eval(spec: &KernelSpec, x: &EncodedSequence, y: &EncodedSequence) -> Result<f64> {
    x.check_compatible(y)?;
    Ok(spec.from_inner(x.dot(y), x.sq_norm(), y.sq_norm()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoders::{encode_one_hot, EncoderKind};
    use crate::sequence::{Alphabet, AntibodySequence};
    use proptest::prelude::*;

    fn dense(v: Vec<f64>) -> EncodedSequence {
        EncodedSequence::dense(EncoderKind::External, v).unwrap()
    }

    #[test]
    fn spec_validation() {
        assert!(KernelSpec::tanimoto(0.0).is_err());
        assert!(KernelSpec::rbf(-1.0, 1.0).is_err());
        assert!(KernelSpec::new(KernelFamily::Tanimoto, Some(1.0), 1.0).is_err());
        assert!(KernelSpec::new(KernelFamily::Matern32, None, 1.0).is_err());
    }

    #[test]
    fn tanimoto_self_similarity_is_one() {
        let k = KernelSpec::tanimoto(1.0).unwrap();
        let x = dense(vec![0.3, 2.0, 0.0, 1.5]);
        assert!((kernel_eval(&k, &x, &x).unwrap() - 1.0).abs() < 1e-15);
        let z = dense(vec![0.0; 4]);
        assert_eq!(kernel_eval(&k, &z, &z).unwrap(), 1.0);
        assert_eq!(kernel_eval(&k, &x, &z).unwrap(), 0.0);
    }

    #[test]
    fn tanimoto_on_binary_sets() {
        // |x ∩ y| = 2, |x| = |y| = 3, by set arithmetic: 2 / (3 + 3 - 2)
        let x = dense(vec![1.0, 1.0, 1.0, 0.0]);
        let y = dense(vec![0.0, 1.0, 1.0, 1.0]);
        let k = KernelSpec::tanimoto(1.0).unwrap();
        assert_eq!(kernel_eval(&k, &x, &y).unwrap(), 0.5);
    }

    #[test]
    fn tanimoto_one_hot_single_mutant() {
        let a = Alphabet::standard();
        let heavy: String = "EVQLVESGGG".chars().cycle().take(120).collect();
        let light: String = "DIQMTQSPSS".chars().cycle().take(117).collect();
        let wt = AntibodySequence::parse(&heavy, &light, &a).unwrap();
        let mutant = wt.apply_mutation(30, b'W', &a).unwrap();
        let x = encode_one_hot(&wt, &a).unwrap().to_dense();
        let y = encode_one_hot(&mutant, &a).unwrap().to_dense();
        // brute-force dot products of the two vectors
        let dot: f64 = x.iter().zip(&y).map(|(p, q)| p * q).sum();
        let xx: f64 = x.iter().map(|p| p * p).sum();
        let yy: f64 = y.iter().map(|p| p * p).sum();
        assert_eq!((dot, xx, yy), (237.0, 238.0, 238.0));
        let k = KernelSpec::tanimoto(1.0).unwrap();
        let v = kernel_eval(
            &k,
            &encode_one_hot(&wt, &a).unwrap(),
            &encode_one_hot(&mutant, &a).unwrap(),
        )
        .unwrap();
        assert!((v - 237.0 / 239.0).abs() < 1e-15);
    }

    #[test]
    fn stationary_kernels_at_zero_distance() {
        let x = dense(vec![0.5, -1.0, 2.0]);
        for spec in [KernelSpec::rbf(0.7, 2.5).unwrap(), KernelSpec::matern32(3.0, 2.5).unwrap()] {
            assert!((kernel_eval(&spec, &x, &x).unwrap() - 2.5).abs() < 1e-12);
        }
    }

    #[test]
    fn closed_forms() {
        let x = dense(vec![0.0, 0.0]);
        let y = dense(vec![3.0, 4.0]);
        let rbf = KernelSpec::rbf(2.0, 1.0).unwrap();
        assert!((kernel_eval(&rbf, &x, &y).unwrap() - (-25.0f64 / 8.0).exp()).abs() < 1e-15);
        let m = KernelSpec::matern32(2.0, 1.0).unwrap();
        let a = 3f64.sqrt() * 5.0 / 2.0;
        assert!((kernel_eval(&m, &x, &y).unwrap() - (1.0 + a) * (-a).exp()).abs() < 1e-15);
    }

    #[test]
    fn dimension_mismatch() {
        let k = KernelSpec::tanimoto(1.0).unwrap();
        assert!(matches!(
            kernel_eval(&k, &dense(vec![1.0]), &dense(vec![1.0, 2.0])),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn lengthscale_derivative_matches_finite_difference() {
        for family in [KernelFamily::Rbf, KernelFamily::Matern32] {
            let (dot, sx, sy) = (0.4, 1.3, 2.1);
            let l = 0.8f64;
            let h: f64 = 1e-6;
            let at = |ll: f64| {
                KernelSpec::new(family, Some(ll), 1.0).unwrap().correlation(dot, sx, sy)
            };
            let fd = (at(l * h.exp()) - at(l * (-h).exp())) / (2.0 * h);
            let analytic = KernelSpec::new(family, Some(l), 1.0)
                .unwrap()
                .correlation_dlog_lengthscale(dot, sx, sy);
            assert!((fd - analytic).abs() < 1e-8, "{family:?}: {fd} vs {analytic}");
        }
    }

    proptest! {
        #[test]
        fn tanimoto_in_unit_interval_for_nonnegative(
            x in proptest::collection::vec(0.0f64..3.0, 8),
            y in proptest::collection::vec(0.0f64..3.0, 8),
        ) {
            let k = KernelSpec::tanimoto(1.0).unwrap();
            let v = kernel_eval(&k, &dense(x), &dense(y)).unwrap();
            prop_assert!((0.0..=1.0 + 1e-12).contains(&v));
        }
    }
}
