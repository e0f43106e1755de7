//! Sources of ΔΔG values (kcal/mol; lower is better).

mod external;
mod pool;
mod synthetic;

pub use external::{query_external, SimulatorClient, SimulatorClientSpec};
pub use pool::{load_pool, PoolDataset, PoolEntry, POOL_HEADER};
pub use synthetic::{synthetic_ddg, SyntheticOracle, SyntheticOracleSpec, DEFAULT_COUPLING};

use crate::error::Result;
use crate::sequence::AntibodySequence;

/// Anything that can score an arbitrary sequence.
pub trait DdgOracle {
    fn evaluate(&self, seq: &AntibodySequence) -> Result<f64>;
}

impl DdgOracle for SyntheticOracle {
    fn evaluate(&self, seq: &AntibodySequence) -> Result<f64> {
        SyntheticOracle::evaluate(self, seq)
    }
}

impl DdgOracle for SimulatorClient {
    fn evaluate(&self, seq: &AntibodySequence) -> Result<f64> {
        self.query(seq)
    }
}
