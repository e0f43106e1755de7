//! Sequence encoders: sequences to real feature vectors.
//!
//! All encoders produce an [`EncodedSequence`]. The kernels in
//! [`crate::surrogate`] only ever need inner products and squared norms, so a
//! feature vector may be stored dense or sparse.

mod blosum;
mod external;
mod ngram;
mod onehot;
mod projection;

pub use blosum::{
    blosum62, build_flip_spectrum, encode_blosum, FlipSpectrumEmbedding, SubstitutionMatrix,
};
pub use external::{load_external_embeddings, ExternalEmbeddings};
pub use ngram::{encode_bag_of_ngrams, NgramVocabulary, DEFAULT_NGRAM};
pub use onehot::encode_one_hot;
pub use projection::{project, RandomProjection};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sequence::{Alphabet, AntibodySequence};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EncoderKind {
    OneHot,
    BagOfNgrams,
    Blosum,
    External,
}

impl EncoderKind {
    pub fn name(self) -> &'static str {
        match self {
            EncoderKind::OneHot => "one_hot",
            EncoderKind::BagOfNgrams => "bag_of_ngrams",
            EncoderKind::Blosum => "blosum",
            EncoderKind::External => "external",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Features {
    Dense(Vec<f64>),
    /// `(index, value)` pairs sorted by index; absent indices are zero.
    Sparse(Vec<(usize, f64)>),
}

/// A feature vector tagged with the encoder that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedSequence {
    encoder: EncoderKind,
    projected: bool,
    dimension: usize,
    features: Features,
    sq_norm: f64,
}

impl EncodedSequence {
    pub fn dense(encoder: EncoderKind, values: Vec<f64>) -> Result<Self> {
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidValue(format!(
                "non-finite feature at index {i}"
            )));
        }
        let sq_norm = values.iter().map(|v| v * v).sum();
        Ok(EncodedSequence {
            encoder,
            projected: false,
            dimension: values.len(),
            features: Features::Dense(values),
            sq_norm,
        })
    }

    pub(crate) fn sparse(encoder: EncoderKind, dimension: usize, entries: Vec<(usize, f64)>) -> Self {
        debug_assert!(entries.windows(2).all(|w| w[0].0 < w[1].0));
        let sq_norm = entries.iter().map(|(_, v)| v * v).sum();
        EncodedSequence {
            encoder,
            projected: false,
            dimension,
            features: Features::Sparse(entries),
            sq_norm,
        }
    }

    pub fn encoder(&self) -> EncoderKind {
        self.encoder
    }

    pub fn is_projected(&self) -> bool {
        self.projected
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn features(&self) -> &Features {
        &self.features
    }

    pub fn sq_norm(&self) -> f64 {
        self.sq_norm
    }

    /// Dense copy of the values.
    pub fn to_dense(&self) -> Vec<f64> {
        match &self.features {
            Features::Dense(v) => v.clone(),
            Features::Sparse(entries) => {
                let mut v = vec![0.0; self.dimension];
                for &(i, x) in entries {
                    v[i] = x;
                }
                v
            }
        }
    }

    /// Checks that two encodings live in the same feature space.
    ///
    /// Sparse n-gram encodings from a growing vocabulary may have been made
    /// at different vocabulary sizes; missing coordinates are zero.
    pub fn check_compatible(&self, other: &EncodedSequence) -> Result<()> {
        let open = matches!(
            (&self.features, &other.features),
            (Features::Sparse(_), Features::Sparse(_))
        );
        if self.encoder != other.encoder
            || self.projected != other.projected
            || (!open && self.dimension != other.dimension)
        {
            return Err(Error::DimensionMismatch {
                expected: self.dimension,
                found: other.dimension,
            });
        }
        Ok(())
    }

    pub fn dot(&self, other: &EncodedSequence) -> f64 {
        match (&self.features, &other.features) {
            (Features::Dense(a), Features::Dense(b)) => {
                a.iter().zip(b).map(|(x, y)| x * y).sum()
            }
            (Features::Sparse(a), Features::Sparse(b)) => sparse_dot(a, b),
            (Features::Dense(d), Features::Sparse(s)) | (Features::Sparse(s), Features::Dense(d)) => s
                .iter()
                .filter(|(i, _)| *i < d.len())
                .map(|&(i, v)| v * d[i])
                .sum(),
        }
    }
}

fn sparse_dot(a: &[(usize, f64)], b: &[(usize, f64)]) -> f64 {
    let (mut i, mut j, mut acc) = (0, 0, 0.0);
    while i < a.len() && j < b.len() {
        match a[i].0.cmp(&b[j].0) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                acc += a[i].1 * b[j].1;
                i += 1;
                j += 1;
            }
        }
    }
    acc
}

/// One of the four sequence encoders.
#[derive(Debug, Clone)]
pub enum SequenceEncoder {
    OneHot(Alphabet),
    BagOfNgrams {
        vocab: NgramVocabulary,
        /// Append unseen grams to the vocabulary while encoding.
        extend: bool,
    },
    Blosum(FlipSpectrumEmbedding),
    External(ExternalEmbeddings),
}

impl SequenceEncoder {
    pub fn kind(&self) -> EncoderKind {
        match self {
            SequenceEncoder::OneHot(_) => EncoderKind::OneHot,
            SequenceEncoder::BagOfNgrams { .. } => EncoderKind::BagOfNgrams,
            SequenceEncoder::Blosum(_) => EncoderKind::Blosum,
            SequenceEncoder::External(_) => EncoderKind::External,
        }
    }

    pub fn encode(&mut self, seq: &AntibodySequence) -> Result<EncodedSequence> {
        match self {
            SequenceEncoder::OneHot(alphabet) => encode_one_hot(seq, alphabet),
            SequenceEncoder::BagOfNgrams { vocab, extend } => {
                encode_bag_of_ngrams(seq, vocab, *extend)
            }
            SequenceEncoder::Blosum(emb) => encode_blosum(seq, emb),
            SequenceEncoder::External(table) => table.lookup(seq),
        }
    }

    /// Output dimension for sequences of `seq_len`, when it is fixed.
    pub fn dimension(&self, seq_len: usize) -> Option<usize> {
        match self {
            SequenceEncoder::OneHot(_) => Some(seq_len * Alphabet::SIZE),
            SequenceEncoder::BagOfNgrams { vocab, extend } => (!extend).then(|| vocab.len()),
            SequenceEncoder::Blosum(emb) => Some(seq_len * emb.width()),
            SequenceEncoder::External(table) => Some(table.dimension()),
        }
    }
}

/// An encoder optionally followed by a random projection.
#[derive(Debug, Clone)]
pub struct FeatureMap {
    encoder: SequenceEncoder,
    projection: Option<RandomProjection>,
}

impl FeatureMap {
    pub fn new(encoder: SequenceEncoder, projection: Option<RandomProjection>) -> Self {
        FeatureMap {
            encoder,
            projection,
        }
    }

    pub fn encoder(&self) -> &SequenceEncoder {
        &self.encoder
    }

    pub fn projection(&self) -> Option<&RandomProjection> {
        self.projection.as_ref()
    }

    pub fn encode(&mut self, seq: &AntibodySequence) -> Result<EncodedSequence> {
        let x = self.encoder.encode(seq)?;
        match &self.projection {
            Some(p) => project(&x, p),
            None => Ok(x),
        }
    }

    pub fn encode_all<'a>(
        &mut self,
        seqs: impl IntoIterator<Item = &'a AntibodySequence>,
    ) -> Result<Vec<EncodedSequence>> {
        seqs.into_iter().map(|s| self.encode(s)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mixed_storage_dot_agrees() {
        let d = EncodedSequence::dense(EncoderKind::BagOfNgrams, vec![1.0, 0.0, 2.0, 3.0]).unwrap();
        let s = EncodedSequence::sparse(EncoderKind::BagOfNgrams, 6, vec![(0, 2.0), (3, 1.0), (5, 4.0)]);
        assert_eq!(d.dot(&s), 5.0);
        assert_eq!(s.dot(&d), 5.0);
        let s2 = EncodedSequence::dense(EncoderKind::BagOfNgrams, s.to_dense()).unwrap();
        assert_eq!(s.dot(&s), s2.dot(&s2));
        assert_eq!(s.sq_norm(), 21.0);
    }

    #[test]
    fn rejects_non_finite() {
        assert!(EncodedSequence::dense(EncoderKind::External, vec![f64::NAN]).is_err());
    }

    #[test]
    fn compatibility_rules() {
        let a = EncodedSequence::dense(EncoderKind::OneHot, vec![1.0; 4]).unwrap();
        let b = EncodedSequence::dense(EncoderKind::OneHot, vec![1.0; 5]).unwrap();
        let c = EncodedSequence::dense(EncoderKind::Blosum, vec![1.0; 4]).unwrap();
        assert!(a.check_compatible(&a).is_ok());
        assert!(a.check_compatible(&b).is_err());
        assert!(a.check_compatible(&c).is_err());
        let s = EncodedSequence::sparse(EncoderKind::BagOfNgrams, 3, vec![(1, 1.0)]);
        let t = EncodedSequence::sparse(EncoderKind::BagOfNgrams, 7, vec![(6, 1.0)]);
        assert!(s.check_compatible(&t).is_ok());
    }
}
