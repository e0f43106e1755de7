//! Experiment orchestration: pool-replay validation, the simulator-in-the-loop
//! full loop, trial repetition and record keeping.

mod config;
mod experiment;
mod full;
mod records;
mod score;
mod validation;

pub use config::{
    apply_override, ExternalSection, GaSettings, LoopConfig, Mode, OracleFile, OracleSpec, Problem,
    SyntheticSection, WildTypeSection,
};
pub use experiment::{
    build_feature_map, make_oracle, run_experiment, trial_rng, DataSource, ExperimentOutcome,
    OutputLayout,
};
pub use full::{full_step, init_full, run_full_trial, FullSettings, Observation};
pub use records::{
    aggregate_curves, audit_records, best_curve, read_records, write_curves, write_records,
    write_summary, AuditReport, CurvePoint, JsonlWriter, Phase, RunRecord, TimingRecord,
    TrialSummary,
};
pub use validation::{
    init_size, init_validation, run_validation_trial, split_pool, validation_step,
    ValidationSettings,
};
