use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid character '{ch}' at position {position}")]
    InvalidResidue { position: usize, ch: char },

    #[error("sequence length {found} does not match expected length {expected}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("{0} chain is empty")]
    EmptyChain(&'static str),

    #[error("position {0} is the chain separator")]
    SeparatorPosition(usize),

    #[error("position {position} is out of range for a sequence of length {len}")]
    PositionOutOfRange { position: usize, len: usize },

    #[error("mutation at position {position} keeps residue '{residue}'")]
    UnchangedResidue { position: usize, residue: char },

    #[error("invalid alphabet: {0}")]
    InvalidAlphabet(String),

    #[error("invalid mask: {0}")]
    InvalidMask(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("sequence of length {len} is shorter than the n-gram window {n}")]
    SequenceTooShort { len: usize, n: usize },

    #[error("matrix is not symmetric at ({row}, {col})")]
    NotSymmetric { row: usize, col: usize },

    #[error("symbol '{0}' has no embedding")]
    UnknownSymbol(char),

    #[error("no embedding for sequence {0}")]
    MissingEmbedding(String),

    #[error("{source_name}:{line}: {message}")]
    Parse {
        source_name: String,
        line: usize,
        message: String,
    },

    #[error("duplicate sequence {sequence} at line {line}")]
    DuplicateSequence { sequence: String, line: usize },

    #[error("Cholesky factorization failed with jitter up to {jitter:e}")]
    Cholesky { jitter: f64 },

    #[error("invalid kernel parameters: {0}")]
    InvalidKernel(String),

    #[error("invalid value: {0}")]
    InvalidValue(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("genetic algorithm found no sequence outside the forbidden set")]
    SearchExhausted,

    #[error("pool is empty")]
    EmptyPool,

    #[error("simulator failed after {attempts} attempt(s): {message}; output: {output:?}")]
    Simulator {
        attempts: usize,
        message: String,
        output: String,
    },

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn context(self, context: impl Into<String>) -> Self {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }
}
