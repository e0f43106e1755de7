use rand::Rng;

use crate::acquisition::{expected_improvement, incumbent, AcquisitionKind, AcquisitionSpec, NoisyEiSampler};
use crate::error::{Error, Result};
use crate::rng::RngStream;
use crate::surrogate::{CrossCovariance, FittedGp};

/// Acquisition scorer for one iteration. Noisy EI fixes its quasi-random
/// normals at construction, so every candidate of the iteration is scored
/// against the same posterior draws.
pub(crate) enum Scorer<'a> {
    Ei { gp: &'a FittedGp, incumbent: f64 },
    NoisyEi(NoisyEiSampler<'a>),
    Random(RngStream),
}

impl<'a> Scorer<'a> {
    /// `gp` may be `None` only for the random baseline.
    pub(crate) fn new(
        gp: Option<&'a FittedGp>,
        spec: &AcquisitionSpec,
        rng: RngStream,
    ) -> Result<Self> {
        let need_gp = || gp.ok_or_else(|| Error::InvalidValue("acquisition needs a fitted GP".into()));
        Ok(match spec.kind {
            AcquisitionKind::Random => Scorer::Random(rng),
            AcquisitionKind::Ei => {
                let gp = need_gp()?;
                let incumbent = incumbent(gp.targets().as_slice()).ok_or(Error::EmptyPool)?;
                Scorer::Ei { gp, incumbent }
            }
            AcquisitionKind::NoisyEi => {
                let mut rng = rng;
                Scorer::NoisyEi(NoisyEiSampler::new(need_gp()?, spec, &mut rng)?)
            }
        })
    }

    pub(crate) fn needs_cross(&self) -> bool {
        !matches!(self, Scorer::Random(_))
    }

    pub(crate) fn gp(&self) -> Option<&'a FittedGp> {
        match self {
            Scorer::Ei { gp, .. } => Some(gp),
            Scorer::NoisyEi(s) => Some(s.gp()),
            Scorer::Random(_) => None,
        }
    }

    /// Scores one candidate; `cross` is ignored by the random baseline.
    pub(crate) fn score(&mut self, cross: Option<&CrossCovariance>) -> Result<f64> {
        match self {
            Scorer::Random(rng) => Ok(rng.random::<f64>()),
            Scorer::Ei { gp, incumbent } => {
                let cross = cross.ok_or_else(|| Error::InvalidValue("missing cross-covariance".into()))?;
                let p = gp.predict_cross(cross);
                expected_improvement(p.mean, p.variance, *incumbent)
            }
            Scorer::NoisyEi(s) => {
                let cross = cross.ok_or_else(|| Error::InvalidValue("missing cross-covariance".into()))?;
                Ok(s.score_cross(cross))
            }
        }
    }
}
