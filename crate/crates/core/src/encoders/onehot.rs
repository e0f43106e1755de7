use super::{EncodedSequence, EncoderKind};
use crate::error::{Error, Result};
use crate::sequence::{Alphabet, AntibodySequence};

/// Concatenated one-hot blocks, one 21-wide block per position.
pub fn encode_one_hot(seq: &AntibodySequence, alphabet: &Alphabet) -> Result<EncodedSequence> {
    let width = Alphabet::SIZE;
    let mut values = vec![0.0; seq.len() * width];
    for (pos, &symbol) in seq.as_bytes().iter().enumerate() {
        let idx = alphabet.index_of(symbol).ok_or(Error::InvalidResidue {
            position: pos,
            ch: symbol as char,
        })?;
        values[pos * width + idx] = 1.0;
    }
    EncodedSequence::dense(EncoderKind::OneHot, values)
}
