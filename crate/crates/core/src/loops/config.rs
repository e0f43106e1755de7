use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::acquisition::{AcquisitionKind, AcquisitionSpec, DEFAULT_MC_SAMPLES};
use crate::encoders::{EncoderKind, DEFAULT_NGRAM};
use crate::error::{Error, Result};
use crate::evolve::GaConfig;
use crate::oracles::{SimulatorClientSpec, SyntheticOracleSpec, DEFAULT_COUPLING};
use crate::sequence::{Alphabet, AntibodySequence, CdrMask};
use crate::surrogate::{GpConfig, KernelFamily, NoiseMode, DEFAULT_NOISE_VARIANCE};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Validation,
    Full,
}

/// GA knobs of the full loop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GaSettings {
    pub population_size: usize,
    pub generations: usize,
    pub offspring: usize,
    pub crossover_probability: f64,
    pub elite_fraction: f64,
}

impl Default for GaSettings {
    fn default() -> Self {
        GaSettings {
            population_size: 128,
            generations: 50,
            offspring: 64,
            crossover_probability: 0.5,
            elite_fraction: 0.25,
        }
    }
}

impl GaSettings {
    pub fn validate(&self) -> Result<()> {
        if self.population_size == 0 || self.generations == 0 || self.offspring == 0 {
            return Err(Error::Config("ga counts must be positive".into()));
        }
        for (name, p) in [
            ("ga.crossover_probability", self.crossover_probability),
            ("ga.elite_fraction", self.elite_fraction),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Config(format!("{name} must lie in [0, 1], got {p}")));
            }
        }
        Ok(())
    }

    pub fn with_mask(&self, mask: CdrMask) -> GaConfig {
        GaConfig {
            population_size: self.population_size,
            generations: self.generations,
            offspring: self.offspring,
            crossover_probability: self.crossover_probability,
            elite_fraction: self.elite_fraction,
            mask,
        }
    }
}

/// Experiment configuration, read from TOML.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoopConfig {
    pub mode: Mode,
    /// Defaults to 200 (validation) or 50 (full).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub iterations: Option<usize>,
    /// Defaults to 10 (validation) or 3 (full).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trials: Option<usize>,
    /// Validation mode: share of the pool used as the initial training set.
    #[serde(default = "defaults::init_fraction")]
    pub init_fraction: f64,
    /// Full mode: random single mutants queried per mask position.
    #[serde(default = "defaults::init_mutations_per_residue")]
    pub init_mutations_per_residue: usize,
    #[serde(default = "defaults::encoder")]
    pub encoder: EncoderKind,
    #[serde(default = "defaults::ngram")]
    pub ngram: usize,
    /// Embedding table for the external encoder.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub embeddings: Option<PathBuf>,
    #[serde(default = "defaults::kernel")]
    pub kernel: KernelFamily,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub projection_dim: Option<usize>,
    #[serde(default = "defaults::acquisition")]
    pub acquisition: AcquisitionKind,
    #[serde(default = "defaults::mc_samples")]
    pub mc_samples: usize,
    #[serde(default = "defaults::noise_mode")]
    pub noise_mode: NoiseMode,
    /// σ² when `noise_mode = "fixed"`.
    #[serde(default = "defaults::noise_variance")]
    pub noise_variance: f64,
    #[serde(default = "defaults::restarts")]
    pub restarts: usize,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default)]
    pub ga: GaSettings,
}

mod defaults {
    use super::*;

    pub fn init_fraction() -> f64 {
        0.01
    }
    pub fn init_mutations_per_residue() -> usize {
        3
    }
    pub fn encoder() -> EncoderKind {
        EncoderKind::OneHot
    }
    pub fn ngram() -> usize {
        DEFAULT_NGRAM
    }
    pub fn kernel() -> KernelFamily {
        KernelFamily::Tanimoto
    }
    pub fn acquisition() -> AcquisitionKind {
        AcquisitionKind::Ei
    }
    pub fn mc_samples() -> usize {
        DEFAULT_MC_SAMPLES
    }
    pub fn noise_mode() -> NoiseMode {
        NoiseMode::Fixed
    }
    pub fn noise_variance() -> f64 {
        DEFAULT_NOISE_VARIANCE
    }
    pub fn restarts() -> usize {
        5
    }
}

impl LoopConfig {
    /// Configuration with every optional key at its default.
    pub fn new(mode: Mode) -> Self {
        LoopConfig {
            mode,
            iterations: None,
            trials: None,
            init_fraction: defaults::init_fraction(),
            init_mutations_per_residue: defaults::init_mutations_per_residue(),
            encoder: defaults::encoder(),
            ngram: defaults::ngram(),
            embeddings: None,
            kernel: defaults::kernel(),
            projection_dim: None,
            acquisition: defaults::acquisition(),
            mc_samples: defaults::mc_samples(),
            noise_mode: defaults::noise_mode(),
            noise_variance: defaults::noise_variance(),
            restarts: defaults::restarts(),
            master_seed: 0,
            ga: GaSettings::default(),
        }
    }

    pub fn iterations(&self) -> usize {
        self.iterations.unwrap_or(match self.mode {
            Mode::Validation => 200,
            Mode::Full => 50,
        })
    }

    pub fn trials(&self) -> usize {
        self.trials.unwrap_or(match self.mode {
            Mode::Validation => 10,
            Mode::Full => 3,
        })
    }

    pub fn acquisition_spec(&self) -> AcquisitionSpec {
        AcquisitionSpec {
            kind: self.acquisition,
            mc_samples: self.mc_samples,
        }
    }

    pub fn gp_config(&self) -> GpConfig {
        GpConfig {
            noise_variance: self.noise_variance,
            noise_mode: self.noise_mode,
            restarts: self.restarts,
            ..GpConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.iterations() == 0 || self.trials() == 0 {
            return bad("iterations and trials must be at least 1".into());
        }
        if !(self.init_fraction > 0.0 && self.init_fraction <= 1.0) {
            return bad(format!("init_fraction must lie in (0, 1], got {}", self.init_fraction));
        }
        if !(1..=19).contains(&self.init_mutations_per_residue) {
            return bad("init_mutations_per_residue must lie in 1..=19".into());
        }
        if self.ngram == 0 {
            return bad("ngram must be positive".into());
        }
        if self.projection_dim == Some(0) {
            return bad("projection_dim must be positive".into());
        }
        if self.encoder == EncoderKind::External && self.embeddings.is_none() {
            return bad("the external encoder needs an embeddings file".into());
        }
        if self.mode == Mode::Full && self.encoder == EncoderKind::External {
            return bad("full mode proposes new sequences, which have no precomputed embedding".into());
        }
        if self.mode == Mode::Full
            && self.encoder == EncoderKind::BagOfNgrams
            && self.projection_dim.is_some()
        {
            return bad(
                "full mode grows the n-gram vocabulary, so it cannot be projected to a fixed size"
                    .into(),
            );
        }
        self.acquisition_spec().validate()?;
        self.gp_config().validate()?;
        self.ga.validate()
    }

    /// Parses TOML text, applies `key=value` overrides and validates.
    pub fn from_toml_str(text: &str, overrides: &[String]) -> Result<Self> {
        let mut table: toml::Table = toml::from_str(text)
            .map_err(|e| Error::Config(format!("config is not valid TOML: {e}")))?;
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        let cfg = LoopConfig::deserialize(toml::Value::Table(table))
            .map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>, overrides: &[String]) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text, overrides).map_err(|e| e.context(path.display().to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

/// Sets `key=value` in a TOML table. Dotted keys address nested tables; the
/// value is read as a TOML literal and falls back to a bare string.
pub fn apply_override(table: &mut toml::Table, assignment: &str) -> Result<()> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override {assignment:?} is not key=value")))?;
    let key = key.trim();
    let raw = raw.trim();
    if key.is_empty() {
        return Err(Error::Config(format!("override {assignment:?} has an empty key")));
    }
    let value = match toml::from_str::<toml::Table>(&format!("v = {raw}")) {
        Ok(mut t) => t.remove("v").expect("parsed key"),
        Err(_) => toml::Value::String(raw.to_string()),
    };
    let parts: Vec<&str> = key.split('.').collect();
    let mut cur = table;
    for part in &parts[..parts.len() - 1] {
        let entry = cur
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| Error::Config(format!("override {key:?}: {part:?} is not a table")))?;
    }
    cur.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

/// Full-mode problem definition: the wild type, its mask and the oracle.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleFile {
    pub wild_type: WildTypeSection,
    #[serde(default)]
    pub synthetic: Option<SyntheticSection>,
    #[serde(default)]
    pub external: Option<ExternalSection>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WildTypeSection {
    pub heavy: String,
    pub light: String,
    /// Mutable positions as indices into `heavy + separator + light`.
    pub mask: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSection {
    pub target_heavy: String,
    pub target_light: String,
    #[serde(default = "default_coupling")]
    pub coupling: f64,
    #[serde(default)]
    pub pairs: Vec<(usize, usize)>,
    #[serde(default)]
    pub noise_sd: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_coupling() -> f64 {
    DEFAULT_COUPLING
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExternalSection {
    pub command: String,
    pub timeout_s: f64,
    #[serde(default)]
    pub retries: usize,
}

/// A resolved oracle description.
#[derive(Debug, Clone, PartialEq)]
pub enum OracleSpec {
    Synthetic(SyntheticOracleSpec),
    External(SimulatorClientSpec),
}

/// Wild type, mask and oracle read from an oracle file.
#[derive(Debug, Clone, PartialEq)]
pub struct Problem {
    pub wild_type: AntibodySequence,
    pub mask: CdrMask,
    pub oracle: OracleSpec,
}

impl OracleFile {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(format!("oracle file: {e}")))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text).map_err(|e| e.context(path.display().to_string()))
    }

    pub fn resolve(&self, alphabet: &Alphabet) -> Result<Problem> {
        let wild_type = AntibodySequence::parse(&self.wild_type.heavy, &self.wild_type.light, alphabet)?;
        let mask = CdrMask::new(self.wild_type.mask.clone(), &wild_type)?;
        let oracle = match (&self.synthetic, &self.external) {
            (Some(s), None) => {
                let target = AntibodySequence::parse(&s.target_heavy, &s.target_light, alphabet)?;
                let spec = SyntheticOracleSpec {
                    wild_type: wild_type.clone(),
                    target,
                    mask: mask.clone(),
                    coupling: s.coupling,
                    pairs: s.pairs.clone(),
                    noise_sd: s.noise_sd,
                    seed: s.seed,
                };
                spec.validate()?;
                OracleSpec::Synthetic(spec)
            }
            (None, Some(e)) => {
                if !(e.timeout_s.is_finite() && e.timeout_s > 0.0) {
                    return Err(Error::Config("timeout_s must be positive".into()));
                }
                let spec = SimulatorClientSpec {
                    command: e.command.clone(),
                    timeout: Duration::from_secs_f64(e.timeout_s),
                    retries: e.retries,
                };
                spec.validate()?;
                OracleSpec::External(spec)
            }
            _ => {
                return Err(Error::Config(
                    "oracle file needs exactly one of [synthetic] or [external]".into(),
                ))
            }
        };
        Ok(Problem {
            wild_type,
            mask,
            oracle,
        })
    }
}
