//! Amino-acid alphabet, joined heavy/light sequences and CDR masks.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

/// The 20 canonical residues in the order used for every index mapping.
pub const CANONICAL_RESIDUES: &[u8; 20] = b"ACDEFGHIKLMNPQRSTVWY";

/// Character joining the heavy and light chains.
pub const SEPARATOR: u8 = b'|';

const NO_INDEX: u8 = u8::MAX;

/// Twenty residues plus the chain separator, indexed `0..21`.
///
/// Residues occupy indices `0..20` in the order given at construction; the
/// separator is always index 20.
#[derive(Clone, PartialEq, Eq)]
pub struct Alphabet {
    symbols: [u8; 21],
    index: [u8; 256],
}

impl Alphabet {
    pub const SIZE: usize = 21;

    pub fn new(residues: &[u8; 20], separator: u8) -> Result<Self> {
        let mut symbols = [0u8; 21];
        symbols[..20].copy_from_slice(residues);
        symbols[20] = separator;
        let mut index = [NO_INDEX; 256];
        for (i, &s) in symbols.iter().enumerate() {
            if !s.is_ascii_graphic() {
                return Err(Error::InvalidAlphabet(format!(
                    "symbol {s:#04x} is not printable ASCII"
                )));
            }
            if index[s as usize] != NO_INDEX {
                return Err(Error::InvalidAlphabet(format!(
                    "symbol '{}' appears twice",
                    s as char
                )));
            }
            index[s as usize] = i as u8;
        }
        Ok(Alphabet { symbols, index })
    }

    /// Canonical residues `ACDEFGHIKLMNPQRSTVWY` with `|` as separator.
    pub fn standard() -> Self {
        Self::new(CANONICAL_RESIDUES, SEPARATOR).expect("canonical alphabet is valid")
    }

    pub fn symbols(&self) -> &[u8; 21] {
        &self.symbols
    }

    pub fn residues(&self) -> &[u8] {
        &self.symbols[..20]
    }

    pub fn separator(&self) -> u8 {
        self.symbols[20]
    }

    pub fn index_of(&self, symbol: u8) -> Option<usize> {
        match self.index[symbol as usize] {
            NO_INDEX => None,
            i => Some(i as usize),
        }
    }

    pub fn symbol(&self, index: usize) -> u8 {
        self.symbols[index]
    }

    pub fn is_residue(&self, symbol: u8) -> bool {
        matches!(self.index_of(symbol), Some(i) if i < 20)
    }
}

impl Default for Alphabet {
    fn default() -> Self {
        Self::standard()
    }
}

impl fmt::Debug for Alphabet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Alphabet")
            .field("symbols", &String::from_utf8_lossy(&self.symbols))
            .finish()
    }
}

/// Heavy and light chain joined as `heavy + separator + light`.
///
/// Values are immutable and cheap to clone; equality and hashing use the
/// joined form.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct AntibodySequence {
    joined: Arc<[u8]>,
    separator: usize,
}

impl AntibodySequence {
    /// Joins and validates the two chains.
    pub fn parse(heavy: &str, light: &str, alphabet: &Alphabet) -> Result<Self> {
        if heavy.is_empty() {
            return Err(Error::EmptyChain("heavy"));
        }
        if light.is_empty() {
            return Err(Error::EmptyChain("light"));
        }
        let mut joined = Vec::with_capacity(heavy.len() + light.len() + 1);
        joined.extend_from_slice(heavy.as_bytes());
        joined.push(alphabet.separator());
        joined.extend_from_slice(light.as_bytes());
        let separator = heavy.len();
        for (position, &b) in joined.iter().enumerate() {
            if position != separator && !alphabet.is_residue(b) {
                return Err(Error::InvalidResidue {
                    position,
                    ch: invalid_char(heavy, light, position, separator),
                });
            }
        }
        Ok(AntibodySequence {
            joined: joined.into(),
            separator,
        })
    }

    /// Like [`parse`](Self::parse), additionally enforcing the run-level
    /// joined length.
    pub fn parse_with_length(
        heavy: &str,
        light: &str,
        alphabet: &Alphabet,
        expected_len: usize,
    ) -> Result<Self> {
        let seq = Self::parse(heavy, light, alphabet)?;
        if seq.len() != expected_len {
            return Err(Error::LengthMismatch {
                expected: expected_len,
                found: seq.len(),
            });
        }
        Ok(seq)
    }

    /// Splits an already joined sequence at its single separator.
    pub fn from_joined(joined: &str, alphabet: &Alphabet) -> Result<Self> {
        let sep = alphabet.separator() as char;
        let mut parts = joined.splitn(2, sep);
        let heavy = parts.next().unwrap_or_default();
        let Some(light) = parts.next() else {
            return Err(Error::InvalidValue(format!(
                "sequence {joined:?} has no '{sep}' separator"
            )));
        };
        Self::parse(heavy, light, alphabet)
    }

    pub fn len(&self) -> usize {
        self.joined.len()
    }

    pub fn is_empty(&self) -> bool {
        self.joined.is_empty()
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.joined
    }

    pub fn joined(&self) -> &str {
        // Only ASCII symbols survive validation.
        std::str::from_utf8(&self.joined).expect("validated ASCII")
    }

    pub fn heavy(&self) -> &str {
        &self.joined()[..self.separator]
    }

    pub fn light(&self) -> &str {
        &self.joined()[self.separator + 1..]
    }

    pub fn separator_position(&self) -> usize {
        self.separator
    }

    pub fn residue(&self, position: usize) -> u8 {
        self.joined[position]
    }

    /// Returns a copy with `position` changed to `residue`.
    pub fn apply_mutation(
        &self,
        position: usize,
        residue: u8,
        alphabet: &Alphabet,
    ) -> Result<Self> {
        if position >= self.len() {
            return Err(Error::PositionOutOfRange {
                position,
                len: self.len(),
            });
        }
        if position == self.separator {
            return Err(Error::SeparatorPosition(position));
        }
        if !alphabet.is_residue(residue) {
            return Err(Error::InvalidResidue {
                position,
                ch: residue as char,
            });
        }
        if self.joined[position] == residue {
            return Err(Error::UnchangedResidue {
                position,
                residue: residue as char,
            });
        }
        let mut joined = self.joined.to_vec();
        joined[position] = residue;
        Ok(AntibodySequence {
            joined: joined.into(),
            separator: self.separator,
        })
    }

    /// Builds a sequence from raw joined bytes that are known to share this
    /// sequence's layout (same length and separator position).
    pub(crate) fn with_same_layout(&self, joined: Vec<u8>) -> Self {
        debug_assert_eq!(joined.len(), self.len());
        debug_assert_eq!(joined[self.separator], self.joined[self.separator]);
        AntibodySequence {
            joined: joined.into(),
            separator: self.separator,
        }
    }
}

fn invalid_char(heavy: &str, light: &str, position: usize, separator: usize) -> char {
    let chain = if position < separator {
        heavy
    } else {
        light
    };
    let offset = if position < separator {
        position
    } else {
        position - separator - 1
    };
    // Walk chars so multi-byte input reports the offending character intact.
    let mut byte = 0;
    for ch in chain.chars() {
        if byte + ch.len_utf8() > offset {
            return ch;
        }
        byte += ch.len_utf8();
    }
    '?'
}

impl fmt::Display for AntibodySequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.joined())
    }
}

impl fmt::Debug for AntibodySequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "AntibodySequence({})", self.joined())
    }
}

/// Number of positions at which two equal-length sequences differ.
pub fn hamming_distance(a: &AntibodySequence, b: &AntibodySequence) -> Result<usize> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            expected: a.len(),
            found: b.len(),
        });
    }
    Ok(a
        .as_bytes()
        .iter()
        .zip(b.as_bytes())
        .filter(|(x, y)| x != y)
        .count())
}

/// Mutable positions of the joined sequence, sorted and distinct.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CdrMask {
    positions: Vec<usize>,
}

impl CdrMask {
    /// Validates `positions` against the layout of `reference`.
    pub fn new(
        positions: impl IntoIterator<Item = usize>,
        reference: &AntibodySequence,
    ) -> Result<Self> {
        let mut positions: Vec<usize> = positions.into_iter().collect();
        positions.sort_unstable();
        positions.dedup();
        if positions.is_empty() {
            return Err(Error::InvalidMask("mask is empty".into()));
        }
        for &p in &positions {
            if p >= reference.len() {
                return Err(Error::InvalidMask(format!(
                    "position {p} is beyond sequence length {}",
                    reference.len()
                )));
            }
            if p == reference.separator_position() {
                return Err(Error::InvalidMask(format!(
                    "position {p} is the chain separator"
                )));
            }
        }
        Ok(CdrMask { positions })
    }

    /// Every non-separator position of `reference`.
    pub fn all_residues(reference: &AntibodySequence) -> Self {
        let sep = reference.separator_position();
        CdrMask {
            positions: (0..reference.len()).filter(|&p| p != sep).collect(),
        }
    }

    pub fn positions(&self) -> &[usize] {
        &self.positions
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn contains(&self, position: usize) -> bool {
        self.positions.binary_search(&position).is_ok()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn seq(h: &str, l: &str) -> AntibodySequence {
        AntibodySequence::parse(h, l, &Alphabet::standard()).unwrap()
    }

    #[test]
    fn alphabet_has_21_distinct_symbols() {
        let a = Alphabet::standard();
        for i in 0..Alphabet::SIZE {
            assert_eq!(a.index_of(a.symbol(i)), Some(i));
        }
        assert_eq!(a.index_of(b'|'), Some(20));
        assert!(!a.is_residue(b'|'));
        assert!(Alphabet::new(CANONICAL_RESIDUES, b'A').is_err());
    }

    #[test]
    fn joins_heavy_first() {
        let s = seq("EV", "DI");
        assert_eq!(s.joined(), "EV|DI");
        assert_eq!(s.len(), 5);
        assert_eq!(s.heavy(), "EV");
        assert_eq!(s.light(), "DI");
    }

    #[test]
    fn full_length_antibody_is_238() {
        let heavy = "A".repeat(120);
        let light = "C".repeat(117);
        let s = AntibodySequence::parse_with_length(&heavy, &light, &Alphabet::standard(), 238)
            .unwrap();
        assert_eq!(s.len(), 238);
        let short = AntibodySequence::parse_with_length("AA", "CC", &Alphabet::standard(), 238);
        assert!(matches!(short, Err(Error::LengthMismatch { expected: 238, found: 5 })));
    }

    #[test]
    fn rejects_non_canonical_residue() {
        let err = AntibodySequence::parse("EVB", "DI", &Alphabet::standard()).unwrap_err();
        assert!(matches!(err, Error::InvalidResidue { position: 2, ch: 'B' }));
        let err = AntibodySequence::parse("EV", "D|", &Alphabet::standard()).unwrap_err();
        assert!(matches!(err, Error::InvalidResidue { position: 4, ch: '|' }));
        assert!(AntibodySequence::parse("", "D", &Alphabet::standard()).is_err());
    }

    #[test]
    fn mutation_cases() {
        let a = Alphabet::standard();
        let s = seq("EV", "DI");
        assert_eq!(s.apply_mutation(0, b'Q', &a).unwrap().joined(), "QV|DI");
        assert_eq!(s.joined(), "EV|DI");
        assert!(matches!(
            s.apply_mutation(2, b'A', &a),
            Err(Error::SeparatorPosition(2))
        ));
        assert!(matches!(
            s.apply_mutation(1, b'V', &a),
            Err(Error::UnchangedResidue { position: 1, .. })
        ));
        assert!(s.apply_mutation(1, b'X', &a).is_err());
        assert!(s.apply_mutation(9, b'A', &a).is_err());
    }

    #[test]
    fn hamming_cases() {
        let s = seq("EV", "DI");
        assert_eq!(hamming_distance(&s, &s).unwrap(), 0);
        let m = s.apply_mutation(3, b'W', &Alphabet::standard()).unwrap();
        assert_eq!(hamming_distance(&s, &m).unwrap(), 1);
        assert_eq!(hamming_distance(&seq("AA", "AA"), &seq("CC", "CC")).unwrap(), 4);
        assert!(hamming_distance(&s, &seq("E", "DI")).is_err());
    }

    #[test]
    fn mask_validation() {
        let s = seq("EV", "DI");
        assert!(CdrMask::new([2], &s).is_err());
        assert!(CdrMask::new([], &s).is_err());
        assert!(CdrMask::new([5], &s).is_err());
        let m = CdrMask::new([4, 0, 4], &s).unwrap();
        assert_eq!(m.positions(), &[0, 4]);
        assert!(m.contains(4) && !m.contains(1));
        assert_eq!(CdrMask::all_residues(&s).positions(), &[0, 1, 3, 4]);
    }

    #[test]
    fn from_joined_round_trips() {
        let s = seq("EVQ", "DI");
        let t = AntibodySequence::from_joined(s.joined(), &Alphabet::standard()).unwrap();
        assert_eq!(s, t);
        assert!(AntibodySequence::from_joined("EVQDI", &Alphabet::standard()).is_err());
    }

    fn chain() -> impl Strategy<Value = String> {
        proptest::collection::vec(0usize..20, 1..30).prop_map(|v| {
            v.into_iter()
                .map(|i| CANONICAL_RESIDUES[i] as char)
                .collect()
        })
    }

    proptest! {
        #[test]
        fn joined_has_one_separator(h in chain(), l in chain()) {
            let s = seq(&h, &l);
            prop_assert_eq!(s.joined().matches('|').count(), 1);
            prop_assert_eq!(s.separator_position(), h.len());
        }

        #[test]
        fn mutation_swap_is_involution(h in chain(), l in chain(), pos in 0usize..64, r in 0usize..20) {
            let a = Alphabet::standard();
            let s = seq(&h, &l);
            let pos = pos % s.len();
            prop_assume!(pos != s.separator_position());
            let new = CANONICAL_RESIDUES[r];
            prop_assume!(s.residue(pos) != new);
            let m = s.apply_mutation(pos, new, &a).unwrap();
            prop_assert_eq!(hamming_distance(&s, &m).unwrap(), 1);
            let back = m.apply_mutation(pos, s.residue(pos), &a).unwrap();
            prop_assert_eq!(back, s);
        }
    }
}
