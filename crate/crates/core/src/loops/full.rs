//! Simulator in the loop: the GA proposes arbitrary masked mutants and each
//! proposal is sent to the oracle.

use std::collections::HashSet;
use std::time::Instant;

use rand::seq::index;

use crate::acquisition::{AcquisitionKind, AcquisitionSpec};
use crate::encoders::{EncodedSequence, FeatureMap};
use crate::error::{Error, Result};
use crate::evolve::{ga_maximize, GaConfig};
use crate::oracles::DdgOracle;
use crate::rng::RngStream;
use crate::sequence::{Alphabet, AntibodySequence, CdrMask};
use crate::surrogate::{FittedGp, GpConfig, KernelFamily};

use super::records::{Phase, RunRecord};
use super::score::Scorer;

#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub sequence: AntibodySequence,
    pub value: f64,
}

/// Queries `per_residue` distinct random single mutants at every mask
/// position.
pub fn init_full(
    wild_type: &AntibodySequence,
    mask: &CdrMask,
    per_residue: usize,
    alphabet: &Alphabet,
    oracle: &dyn DdgOracle,
    rng: &mut RngStream,
) -> Result<Vec<Observation>> {
    if mask.is_empty() {
        return Err(Error::InvalidMask("full-mode initialization needs a mask".into()));
    }
    let mut out = Vec::with_capacity(per_residue * mask.len());
    for &p in mask.positions() {
        let current = wild_type.residue(p);
        let choices: Vec<u8> = alphabet.residues().iter().copied().filter(|r| *r != current).collect();
        if per_residue > choices.len() {
            return Err(Error::Config(format!(
                "cannot draw {per_residue} distinct mutations at one position"
            )));
        }
        for k in index::sample(rng, choices.len(), per_residue) {
            let sequence = wild_type.apply_mutation(p, choices[k], alphabet)?;
            let value = oracle
                .evaluate(&sequence)
                .map_err(|e| e.context(format!("initial query at position {p}")))?;
            out.push(Observation { sequence, value });
        }
    }
    Ok(out)
}

/// Settings of one full-loop trial.
#[derive(Debug, Clone)]
pub struct FullSettings {
    pub iterations: usize,
    pub init_per_residue: usize,
    pub kernel: KernelFamily,
    pub gp: GpConfig,
    pub acquisition: AcquisitionSpec,
    pub ga: GaConfig,
}

/// Proposes the next query by maximizing the acquisition with the GA over
/// sequences not yet seen. Returns the proposal and its acquisition value.
#[allow(clippy::too_many_arguments)]
pub fn full_step(
    scorer_gp: Option<&FittedGp>,
    features: &mut FeatureMap,
    observations: &[Observation],
    wild_type: &AntibodySequence,
    alphabet: &Alphabet,
    seen: &HashSet<AntibodySequence>,
    settings: &FullSettings,
    rng: &RngStream,
) -> Result<(AntibodySequence, f64)> {
    let mut scorer = Scorer::new(scorer_gp, &settings.acquisition, rng.derive("acquisition"))?;
    let mut ranked: Vec<&Observation> = observations.iter().collect();
    ranked.sort_by(|a, b| a.value.total_cmp(&b.value));
    let seeds: Vec<AntibodySequence> = ranked
        .iter()
        .take(settings.ga.population_size)
        .map(|o| o.sequence.clone())
        .collect();
    let fitness = |batch: &[AntibodySequence]| -> Result<Vec<f64>> {
        batch
            .iter()
            .map(|s| {
                let cross = match scorer.gp() {
                    Some(gp) => Some(gp.cross_covariance(&features.encode(s)?)?),
                    None => None,
                };
                scorer.score(cross.as_ref())
            })
            .collect()
    };
    let best = ga_maximize(
        fitness,
        &seeds,
        &settings.ga,
        wild_type,
        alphabet,
        seen,
        &mut rng.derive("ga"),
    )?;
    Ok((best.sequence, best.fitness))
}

/// Runs one full-loop trial, passing every record and its wall time to
/// `sink` as soon as it exists.
#[allow(clippy::too_many_arguments)]
pub fn run_full_trial(
    wild_type: &AntibodySequence,
    alphabet: &Alphabet,
    oracle: &dyn DdgOracle,
    features: &mut FeatureMap,
    settings: &FullSettings,
    trial: usize,
    rng: &RngStream,
    sink: &mut dyn FnMut(RunRecord, f64) -> Result<()>,
) -> Result<()> {
    let clock = Instant::now();
    let init = init_full(
        wild_type,
        &settings.ga.mask,
        settings.init_per_residue,
        alphabet,
        oracle,
        &mut rng.derive("init"),
    )?;
    let mut best = f64::INFINITY;
    let mut seen = HashSet::new();
    let mut observations = Vec::new();
    let mut encodings: Vec<EncodedSequence> = Vec::new();
    for o in init {
        if !seen.insert(o.sequence.clone()) {
            continue;
        }
        best = best.min(o.value);
        let rec = RunRecord {
            trial,
            iteration: 0,
            phase: Phase::Init,
            sequence: o.sequence.joined().to_string(),
            value: o.value,
            best_so_far: best,
            acquisition: None,
            train_size: None,
        };
        encodings.push(features.encode(&o.sequence)?);
        observations.push(o);
        sink(rec, clock.elapsed().as_secs_f64())?;
    }

    for iteration in 1..=settings.iterations {
        let start = Instant::now();
        let step_rng = rng.derive(&format!("iteration/{iteration}"));
        let gp = if settings.acquisition.kind == AcquisitionKind::Random {
            None
        } else {
            let targets = observations.iter().map(|o| o.value).collect();
            Some(
                FittedGp::fit(
                    encodings.clone(),
                    targets,
                    settings.kernel,
                    &settings.gp,
                    &mut step_rng.derive("fit"),
                )
                .map_err(|e| e.context(format!("fitting the surrogate at iteration {iteration}")))?,
            )
        };
        let (sequence, acquisition) = full_step(
            gp.as_ref(),
            features,
            &observations,
            wild_type,
            alphabet,
            &seen,
            settings,
            &step_rng,
        )
        .map_err(|e| e.context(format!("proposing at iteration {iteration}")))?;
        let value = oracle
            .evaluate(&sequence)
            .map_err(|e| e.context(format!("querying the oracle at iteration {iteration}")))?;
        best = best.min(value);
        let rec = RunRecord {
            trial,
            iteration,
            phase: Phase::Loop,
            sequence: sequence.joined().to_string(),
            value,
            best_so_far: best,
            acquisition: Some(acquisition),
            train_size: Some(observations.len()),
        };
        seen.insert(sequence.clone());
        encodings.push(features.encode(&sequence)?);
        observations.push(Observation { sequence, value });
        sink(rec, start.elapsed().as_secs_f64())?;
    }
    Ok(())
}
