use nalgebra::{DMatrix, SymmetricEigen};

use super::{EncodedSequence, EncoderKind};
use crate::error::{Error, Result};
use crate::sequence::{Alphabet, AntibodySequence};

const BLOSUM62_ASSET: &str = include_str!("../../data/BLOSUM62");

/// A symmetric symbol-by-symbol score table.
#[derive(Debug, Clone, PartialEq)]
pub struct SubstitutionMatrix {
    symbols: Vec<u8>,
    scores: DMatrix<f64>,
}

impl SubstitutionMatrix {
    pub fn new(symbols: Vec<u8>, scores: DMatrix<f64>) -> Result<Self> {
        let n = symbols.len();
        if scores.nrows() != n || scores.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: scores.nrows(),
            });
        }
        if let Some(i) = scores.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidValue(format!("non-finite score at flat index {i}")));
        }
        Ok(SubstitutionMatrix { symbols, scores })
    }

    /// Parses the NCBI text layout: `#` comments, a header row of symbols,
    /// then one row per symbol. Rows may be full, lower-triangular or
    /// upper-triangular.
    pub fn parse_ncbi(text: &str, source_name: &str) -> Result<Self> {
        let parse_err = |line: usize, message: String| Error::Parse {
            source_name: source_name.to_string(),
            line,
            message,
        };
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));

        let (header_line, header) = lines
            .next()
            .ok_or_else(|| parse_err(0, "missing header row".into()))?;
        let symbols = header
            .split_whitespace()
            .map(|tok| match tok.as_bytes() {
                [b] => Ok(*b),
                _ => Err(parse_err(header_line, format!("bad header symbol {tok:?}"))),
            })
            .collect::<Result<Vec<u8>>>()?;
        let n = symbols.len();
        let mut cells: Vec<Option<f64>> = vec![None; n * n];
        let mut rows_read = 0;

        for (row, (line_no, line)) in lines.enumerate() {
            if row >= n {
                return Err(parse_err(line_no, "more rows than header symbols".into()));
            }
            let mut tokens = line.split_whitespace();
            let label = tokens.next().unwrap_or_default();
            if label.as_bytes() != [symbols[row]] {
                return Err(parse_err(
                    line_no,
                    format!("row label {label:?}, expected '{}'", symbols[row] as char),
                ));
            }
            let values = tokens
                .map(|t| {
                    t.parse::<f64>()
                        .map_err(|_| parse_err(line_no, format!("bad score {t:?}")))
                })
                .collect::<Result<Vec<f64>>>()?;
            let first_col = if values.len() == n || values.len() == row + 1 {
                0
            } else if values.len() == n - row {
                row
            } else {
                return Err(parse_err(
                    line_no,
                    format!("row has {} scores for {n} symbols", values.len()),
                ));
            };
            for (k, v) in values.into_iter().enumerate() {
                cells[row * n + first_col + k] = Some(v);
            }
            rows_read += 1;
        }
        if rows_read < n {
            return Err(parse_err(
                0,
                format!("no row for symbol '{}'", symbols[rows_read] as char),
            ));
        }
        let mut scores = DMatrix::<f64>::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                scores[(i, j)] = match (cells[i * n + j], cells[j * n + i]) {
                    (Some(a), Some(b)) if a != b => {
                        return Err(Error::NotSymmetric { row: i, col: j })
                    }
                    (Some(a), _) | (None, Some(a)) => a,
                    (None, None) => {
                        return Err(parse_err(0, format!("no score for ({i}, {j})")))
                    }
                };
            }
        }
        SubstitutionMatrix::new(symbols, scores)
    }

    pub fn symbols(&self) -> &[u8] {
        &self.symbols
    }

    pub fn scores(&self) -> &DMatrix<f64> {
        &self.scores
    }

    pub fn index_of(&self, symbol: u8) -> Option<usize> {
        self.symbols.iter().position(|&s| s == symbol)
    }

    pub fn score(&self, a: u8, b: u8) -> Option<f64> {
        Some(self.scores[(self.index_of(a)?, self.index_of(b)?)])
    }

    /// Square table over `alphabet` in alphabet order. The separator row and
    /// column score 1 against itself and 0 against every residue.
    pub fn restricted_to(&self, alphabet: &Alphabet) -> Result<Self> {
        let n = Alphabet::SIZE;
        let sep = alphabet.separator();
        let mut scores = DMatrix::<f64>::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                let (a, b) = (alphabet.symbol(i), alphabet.symbol(j));
                scores[(i, j)] = if a == sep || b == sep {
                    if a == b {
                        1.0
                    } else {
                        0.0
                    }
                } else {
                    self.score(a, b).ok_or_else(|| {
                        let missing = if self.index_of(a).is_none() { a } else { b };
                        Error::UnknownSymbol(missing as char)
                    })?
                };
            }
        }
        SubstitutionMatrix::new(alphabet.symbols().to_vec(), scores)
    }
}

/// BLOSUM62 as shipped in NCBI layout (24 symbols, including B, Z, X, *).
pub fn blosum62() -> SubstitutionMatrix {
    SubstitutionMatrix::parse_ncbi(BLOSUM62_ASSET, "BLOSUM62").expect("bundled BLOSUM62 parses")
}

/// Per-symbol vectors whose Gram matrix is the flip-spectrum transform
/// `U |D| Uᵀ` of a symmetric substitution matrix `U D Uᵀ`.
#[derive(Debug, Clone, PartialEq)]
pub struct FlipSpectrumEmbedding {
    symbols: Vec<u8>,
    index: [Option<u8>; 256],
    /// Row `i` is the embedding of `symbols[i]`: row `i` of `U |D|^{1/2}`.
    rows: DMatrix<f64>,
    eigenvalues: Vec<f64>,
}

impl FlipSpectrumEmbedding {
    pub fn rows(&self) -> &DMatrix<f64> {
        &self.rows
    }

    pub fn symbols(&self) -> &[u8] {
        &self.symbols
    }

    /// Width of each per-symbol vector.
    pub fn width(&self) -> usize {
        self.rows.ncols()
    }

    /// Eigenvalues of the input matrix (ascending).
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn gram(&self) -> DMatrix<f64> {
        &self.rows * self.rows.transpose()
    }

    pub fn row_of(&self, symbol: u8) -> Option<usize> {
        self.index[symbol as usize].map(usize::from)
    }
}

pub fn build_flip_spectrum(matrix: &SubstitutionMatrix) -> Result<FlipSpectrumEmbedding> {
    let s = matrix.scores();
    let n = s.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let tol = 1e-12 * (1.0 + s[(i, j)].abs());
            if (s[(i, j)] - s[(j, i)]).abs() > tol {
                return Err(Error::NotSymmetric { row: i, col: j });
            }
        }
    }
    let eig = SymmetricEigen::new(s.clone());
    let mut rows = eig.eigenvectors.clone();
    for (k, &lambda) in eig.eigenvalues.iter().enumerate() {
        let scale = lambda.abs().sqrt();
        rows.column_mut(k).scale_mut(scale);
    }
    let mut eigenvalues: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    eigenvalues.sort_by(f64::total_cmp);

    let mut index = [None; 256];
    for (i, &sym) in matrix.symbols().iter().enumerate() {
        index[sym as usize] = Some(i as u8);
    }
    Ok(FlipSpectrumEmbedding {
        symbols: matrix.symbols().to_vec(),
        index,
        rows,
        eigenvalues,
    })
}

/// Concatenates the per-symbol flip-spectrum vectors in sequence order.
pub fn encode_blosum(seq: &AntibodySequence, emb: &FlipSpectrumEmbedding) -> Result<EncodedSequence> {
    let width = emb.width();
    let mut values = Vec::with_capacity(seq.len() * width);
    for &symbol in seq.as_bytes() {
        let r = emb.row_of(symbol).ok_or(Error::UnknownSymbol(symbol as char))?;
        values.extend(emb.rows.row(r).iter());
    }
    EncodedSequence::dense(EncoderKind::Blosum, values)
}
