//! Bayesian optimization over fixed-length antibody sequences.
//!
//! The crate is organised bottom-up:
//!
//! * [`sequence`] and [`rng`]: the alphabet, joined heavy/light sequences,
//!   CDR masks and labelled deterministic random streams.
//! * [`encoders`]: one-hot, bag of n-grams, BLOSUM flip-spectrum and
//!   externally computed embeddings, plus Gaussian random projection.
//! * [`surrogate`]: exact Gaussian-process regression with Tanimoto, RBF and
//!   Matérn-3/2 kernels.
//! * [`acquisition`]: expected improvement, quasi-Monte-Carlo noisy expected
//!   improvement and the random baseline.
//! * [`evolve`]: the genetic algorithm that maximizes an acquisition function
//!   over CDR-restricted mutants.
//! * [`oracles`]: pooled datasets, a synthetic ΔΔG oracle and an
//!   external-command simulator client.
//! * [`loops`]: the pool-replay validation loop and the simulator-in-the-loop
//!   full loop, with record persistence and curve aggregation.

pub mod acquisition;
pub mod encoders;
pub mod error;
pub mod evolve;
pub mod loops;
pub mod oracles;
pub mod rng;
pub mod sequence;
pub mod surrogate;

pub use error::{Error, Result};
pub use rng::RngStream;
pub use sequence::{hamming_distance, Alphabet, AntibodySequence, CdrMask};
