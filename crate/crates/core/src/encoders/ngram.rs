use std::collections::BTreeMap;

use indexmap::IndexSet;

use super::{EncodedSequence, EncoderKind};
use crate::error::{Error, Result};
use crate::sequence::AntibodySequence;

/// Window size used for the bag-of-amino-acids encoding.
pub const DEFAULT_NGRAM: usize = 5;

/// Insertion-ordered set of n-grams. Indices are stable: grams are only ever
/// appended.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NgramVocabulary {
    n: usize,
    grams: IndexSet<Box<[u8]>>,
}

impl NgramVocabulary {
    pub fn new(n: usize) -> Self {
        assert!(n > 0, "n-gram window must be positive");
        NgramVocabulary {
            n,
            grams: IndexSet::new(),
        }
    }

    /// Vocabulary of every window occurring in `seqs`, in first-seen order.
    pub fn build<'a>(
        n: usize,
        seqs: impl IntoIterator<Item = &'a AntibodySequence>,
    ) -> Result<Self> {
        let mut vocab = Self::new(n);
        for s in seqs {
            vocab.extend_from(s)?;
        }
        Ok(vocab)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.grams.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grams.is_empty()
    }

    pub fn index_of(&self, gram: &[u8]) -> Option<usize> {
        self.grams.get_index_of(gram)
    }

    pub fn gram(&self, index: usize) -> Option<&[u8]> {
        self.grams.get_index(index).map(|g| &g[..])
    }

    fn windows<'s>(&self, seq: &'s AntibodySequence) -> Result<std::slice::Windows<'s, u8>> {
        if seq.len() < self.n {
            return Err(Error::SequenceTooShort {
                len: seq.len(),
                n: self.n,
            });
        }
        Ok(seq.as_bytes().windows(self.n))
    }

    fn extend_from(&mut self, seq: &AntibodySequence) -> Result<()> {
        for w in self.windows(seq)? {
            if !self.grams.contains(w) {
                self.grams.insert(w.into());
            }
        }
        Ok(())
    }

    /// Counts of vocabulary grams in `seq`; unseen grams are dropped.
    pub fn encode(&self, seq: &AntibodySequence) -> Result<EncodedSequence> {
        let mut counts: BTreeMap<usize, f64> = BTreeMap::new();
        for w in self.windows(seq)? {
            if let Some(i) = self.index_of(w) {
                *counts.entry(i).or_default() += 1.0;
            }
        }
        Ok(EncodedSequence::sparse(
            EncoderKind::BagOfNgrams,
            self.len(),
            counts.into_iter().collect(),
        ))
    }

    /// Appends unseen grams of `seq`, then encodes it.
    pub fn encode_extending(&mut self, seq: &AntibodySequence) -> Result<EncodedSequence> {
        self.extend_from(seq)?;
        self.encode(seq)
    }
}

impl Default for NgramVocabulary {
    fn default() -> Self {
        Self::new(DEFAULT_NGRAM)
    }
}

/// Bag-of-n-grams counts. With `extend`, unseen grams are added to `vocab`
/// first; otherwise they contribute nothing.
pub fn encode_bag_of_ngrams(
    seq: &AntibodySequence,
    vocab: &mut NgramVocabulary,
    extend: bool,
) -> Result<EncodedSequence> {
    if extend {
        vocab.encode_extending(seq)
    } else {
        vocab.encode(seq)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sequence::{Alphabet, CANONICAL_RESIDUES};
    use proptest::prelude::*;

    fn seq(h: &str, l: &str) -> AntibodySequence {
        AntibodySequence::parse(h, l, &Alphabet::standard()).unwrap()
    }

    #[test]
    fn single_window() {
        // joined "AA|AA" is a single 5-window
        let mut vocab = NgramVocabulary::default();
        let x = encode_bag_of_ngrams(&seq("AA", "AA"), &mut vocab, true).unwrap();
        assert_eq!(vocab.len(), 1);
        assert_eq!(x.to_dense(), vec![1.0]);
    }

    #[test]
    fn repeated_window_counts_twice() {
        let s = seq("AAAAAA", "C");
        let mut vocab = NgramVocabulary::default();
        let x = encode_bag_of_ngrams(&s, &mut vocab, true).unwrap();
        let i = vocab.index_of(b"AAAAA").unwrap();
        assert_eq!(x.to_dense()[i], 2.0);
        assert_eq!(x.to_dense().iter().sum::<f64>(), (s.len() - 4) as f64);
    }

    #[test]
    fn too_short_is_an_error() {
        let mut vocab = NgramVocabulary::default();
        assert!(matches!(
            encode_bag_of_ngrams(&seq("A", "A"), &mut vocab, true),
            Err(Error::SequenceTooShort { len: 3, n: 5 })
        ));
    }

    #[test]
    fn frozen_vocabulary_drops_unseen_grams() {
        let mut vocab = NgramVocabulary::build(5, [&seq("AAAA", "AAAA")]).unwrap();
        let before = vocab.len();
        let x = encode_bag_of_ngrams(&seq("AAAA", "AAAW"), &mut vocab, false).unwrap();
        assert_eq!(vocab.len(), before);
        assert_eq!(x.to_dense().iter().sum::<f64>(), 4.0);
        let y = encode_bag_of_ngrams(&seq("AAAA", "AAAW"), &mut vocab, true).unwrap();
        assert_eq!(y.to_dense().iter().sum::<f64>(), 5.0);
        // earlier indices are untouched by extension
        assert_eq!(vocab.gram(0), Some(&b"AAAA|"[..]));
    }

    fn chain() -> impl Strategy<Value = String> {
        proptest::collection::vec(0usize..4, 2..25)
            .prop_map(|v| v.into_iter().map(|i| CANONICAL_RESIDUES[i] as char).collect())
    }

    proptest! {
        #[test]
        fn counts_sum_to_window_count(h in chain(), l in chain()) {
            let s = seq(&h, &l);
            let mut vocab = NgramVocabulary::default();
            let x = encode_bag_of_ngrams(&s, &mut vocab, true).unwrap();
            let dense = x.to_dense();
            prop_assert!(dense.iter().all(|v| *v >= 0.0 && v.fract() == 0.0));
            prop_assert_eq!(dense.iter().sum::<f64>(), (s.len() - 4) as f64);
        }
    }
}
