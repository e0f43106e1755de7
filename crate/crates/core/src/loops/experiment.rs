use std::fs;
use std::path::{Path, PathBuf};

use crate::encoders::{
    blosum62, build_flip_spectrum, load_external_embeddings, EncoderKind, FeatureMap, NgramVocabulary,
    RandomProjection, SequenceEncoder,
};
use crate::error::{Error, Result};
use crate::oracles::{DdgOracle, PoolDataset, SimulatorClient, SyntheticOracle};
use crate::rng::RngStream;
use crate::sequence::{Alphabet, AntibodySequence, CdrMask};

use super::config::{LoopConfig, Mode, OracleSpec};
use super::full::{run_full_trial, FullSettings};
use super::records::{
    aggregate_curves, write_curves, write_records, write_summary, CurvePoint, JsonlWriter, RunRecord,
    TimingRecord, TrialSummary,
};
use super::validation::{run_validation_trial, ValidationSettings};

/// What the experiment queries.
pub enum DataSource<'a> {
    Pool(&'a PoolDataset),
    Oracle {
        wild_type: &'a AntibodySequence,
        mask: &'a CdrMask,
        oracle: &'a dyn DdgOracle,
    },
}

/// Builds the oracle named by an oracle file.
pub fn make_oracle(spec: &OracleSpec) -> Result<Box<dyn DdgOracle>> {
    Ok(match spec {
        OracleSpec::Synthetic(s) => Box::new(SyntheticOracle::new(s.clone())?),
        OracleSpec::External(s) => Box::new(SimulatorClient::new(s.clone())?),
    })
}

#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub records: Vec<RunRecord>,
    pub summaries: Vec<TrialSummary>,
    /// Absent when no records were produced.
    pub curves: Option<Vec<CurvePoint>>,
}

impl ExperimentOutcome {
    pub fn failed_trials(&self) -> usize {
        self.summaries.iter().filter(|s| s.failure.is_some()).count()
    }
}

/// Random stream of one trial; depends only on the master seed and index.
pub fn trial_rng(master_seed: u64, trial: usize) -> RngStream {
    RngStream::new(master_seed, "experiment").derive(&format!("trial-{trial}"))
}

/// Encoder (and projection) selected by the config. `sample` seeds the
/// n-gram vocabulary.
pub fn build_feature_map(
    cfg: &LoopConfig,
    alphabet: &Alphabet,
    sample: &[&AntibodySequence],
    seq_len: usize,
) -> Result<FeatureMap> {
    let encoder = match cfg.encoder {
        EncoderKind::OneHot => SequenceEncoder::OneHot(alphabet.clone()),
        EncoderKind::BagOfNgrams => SequenceEncoder::BagOfNgrams {
            vocab: NgramVocabulary::build(cfg.ngram, sample.iter().copied())?,
            extend: cfg.mode == Mode::Full,
        },
        EncoderKind::Blosum => {
            SequenceEncoder::Blosum(build_flip_spectrum(&blosum62().restricted_to(alphabet)?)?)
        }
        EncoderKind::External => {
            let path = cfg
                .embeddings
                .as_ref()
                .ok_or_else(|| Error::Config("the external encoder needs an embeddings file".into()))?;
            SequenceEncoder::External(load_external_embeddings(path)?)
        }
    };
    let projection = match cfg.projection_dim {
        None => None,
        Some(n_low) => {
            let n_emb = encoder.dimension(seq_len).ok_or_else(|| {
                Error::Config("this encoder has no fixed dimension to project from".into())
            })?;
            let mut rng = RngStream::new(cfg.master_seed, "experiment").derive("projection");
            Some(RandomProjection::new(n_emb, n_low, &mut rng)?)
        }
    };
    Ok(FeatureMap::new(encoder, projection))
}

/// Output files written under the output directory.
pub struct OutputLayout {
    pub root: PathBuf,
}

impl OutputLayout {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        OutputLayout { root: root.into() }
    }

    pub fn trial_records(&self, trial: usize) -> PathBuf {
        self.root.join("records").join(format!("trial-{trial:03}.jsonl"))
    }

    pub fn records(&self) -> PathBuf {
        self.root.join("records.jsonl")
    }

    pub fn timings(&self) -> PathBuf {
        self.root.join("timings.jsonl")
    }

    pub fn summary(&self) -> PathBuf {
        self.root.join("summary.csv")
    }

    pub fn curves(&self) -> PathBuf {
        self.root.join("curves.csv")
    }

    pub fn config(&self) -> PathBuf {
        self.root.join("config.toml")
    }
}

/// Runs every trial of an experiment. A failing trial keeps its partial
/// records and does not stop the others. With `out`, records are persisted
/// after every query and the merged records, summary and curves are written
/// at the end.
pub fn run_experiment(
    cfg: &LoopConfig,
    source: &DataSource<'_>,
    alphabet: &Alphabet,
    out: Option<&Path>,
) -> Result<ExperimentOutcome> {
    cfg.validate()?;
    match (cfg.mode, source) {
        (Mode::Validation, DataSource::Pool(_)) | (Mode::Full, DataSource::Oracle { .. }) => {}
        _ => {
            return Err(Error::Config(
                "validation mode needs a pool and full mode needs an oracle".into(),
            ))
        }
    }
    let layout = out.map(OutputLayout::new);
    let mut timings = None;
    if let Some(l) = &layout {
        fs::create_dir_all(l.root.join("records")).map_err(|e| Error::io(&l.root, e))?;
        fs::write(l.config(), cfg.to_toml()).map_err(|e| Error::io(l.config(), e))?;
        timings = Some(JsonlWriter::create(l.timings())?);
    }

    let gp = cfg.gp_config();
    let acquisition = cfg.acquisition_spec();
    let mut records: Vec<RunRecord> = Vec::new();
    let mut summaries = Vec::new();

    // Static pools are encoded once for all trials.
    let pool_setup = match source {
        DataSource::Pool(pool) => {
            if pool.is_empty() {
                return Err(Error::EmptyPool);
            }
            let seqs: Vec<&AntibodySequence> = pool.entries().iter().map(|e| &e.sequence).collect();
            let mut fm = build_feature_map(cfg, alphabet, &seqs, seqs[0].len())?;
            Some(fm.encode_all(seqs.iter().copied())?)
        }
        DataSource::Oracle { .. } => None,
    };

    for trial in 0..cfg.trials() {
        let rng = trial_rng(cfg.master_seed, trial);
        let mut trial_out = match &layout {
            Some(l) => Some(JsonlWriter::create(l.trial_records(trial))?),
            None => None,
        };
        let first = records.len();
        let mut sink = |rec: RunRecord, seconds: f64| -> Result<()> {
            if let Some(w) = trial_out.as_mut() {
                w.append(&rec)?;
            }
            if let Some(w) = timings.as_mut() {
                w.append(&TimingRecord {
                    trial,
                    iteration: rec.iteration,
                    seconds,
                })?;
            }
            records.push(rec);
            Ok(())
        };
        let result = match source {
            DataSource::Pool(pool) => {
                let settings = ValidationSettings {
                    iterations: cfg.iterations(),
                    init_fraction: cfg.init_fraction,
                    kernel: cfg.kernel,
                    gp: gp.clone(),
                    acquisition,
                };
                let encodings = pool_setup.as_deref().expect("pool encodings");
                run_validation_trial(pool, encodings, &settings, trial, &rng, &mut sink)
            }
            DataSource::Oracle {
                wild_type,
                mask,
                oracle,
            } => {
                let settings = FullSettings {
                    iterations: cfg.iterations(),
                    init_per_residue: cfg.init_mutations_per_residue,
                    kernel: cfg.kernel,
                    gp: gp.clone(),
                    acquisition,
                    ga: cfg.ga.with_mask((*mask).clone()),
                };
                build_feature_map(cfg, alphabet, &[wild_type], wild_type.len()).and_then(|mut fm| {
                    run_full_trial(wild_type, alphabet, *oracle, &mut fm, &settings, trial, &rng, &mut sink)
                })
            }
        };
        let failure = result.err().map(|e| e.to_string());
        summaries.push(TrialSummary::from_records(trial, &records[first..], failure));
    }

    let curves = if records.is_empty() {
        None
    } else {
        Some(aggregate_curves(&[("experiment".to_string(), records.clone())])?)
    };
    if let Some(l) = &layout {
        write_records(l.records(), &records)?;
        write_summary(l.summary(), &summaries)?;
        if let Some(c) = &curves {
            write_curves(l.curves(), c)?;
        }
    }
    Ok(ExperimentOutcome {
        records,
        summaries,
        curves,
    })
}
