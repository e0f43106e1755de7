use std::collections::{BTreeMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Init,
    Loop,
}

/// One oracle query. Init queries carry iteration 0; loop iterations count
/// from 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub trial: usize,
    pub iteration: usize,
    pub phase: Phase,
    pub sequence: String,
    /// ΔΔG in kcal/mol.
    pub value: f64,
    pub best_so_far: f64,
    #[serde(default)]
    pub acquisition: Option<f64>,
    /// Observations the surrogate was trained on when this query was chosen.
    #[serde(default)]
    pub train_size: Option<usize>,
}

/// Wall-clock cost of a record, kept apart so record files stay
/// reproducible.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingRecord {
    pub trial: usize,
    pub iteration: usize,
    pub seconds: f64,
}

/// Line-delimited JSON writer that flushes after every line.
pub struct JsonlWriter {
    path: PathBuf,
    out: BufWriter<File>,
}

impl JsonlWriter {
    pub fn create(path: impl Into<PathBuf>) -> Result<Self> {
        let path = path.into();
        let file = File::create(&path).map_err(|e| Error::io(&path, e))?;
        Ok(JsonlWriter {
            path,
            out: BufWriter::new(file),
        })
    }

    pub fn append<T: Serialize>(&mut self, item: &T) -> Result<()> {
        serde_json::to_writer(&mut self.out, item)?;
        self.out
            .write_all(b"\n")
            .and_then(|_| self.out.flush())
            .map_err(|e| Error::io(&self.path, e))
    }
}

pub fn read_records(path: impl AsRef<Path>) -> Result<Vec<RunRecord>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec = serde_json::from_str(&line).map_err(|e| Error::Parse {
            source_name: path.display().to_string(),
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push(rec);
    }
    Ok(out)
}

pub fn write_records(path: impl AsRef<Path>, records: &[RunRecord]) -> Result<()> {
    let mut w = JsonlWriter::create(path.as_ref())?;
    for r in records {
        w.append(r)?;
    }
    Ok(())
}

/// Per-trial outcome for the summary table.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialSummary {
    pub trial: usize,
    /// `None` on success, otherwise the error message.
    pub failure: Option<String>,
    pub final_best: Option<f64>,
    /// First iteration whose best-so-far equals the final best.
    pub first_iteration_at_best: Option<usize>,
    pub records: usize,
}

impl TrialSummary {
    pub fn from_records(trial: usize, records: &[RunRecord], failure: Option<String>) -> Self {
        let mine: Vec<&RunRecord> = records.iter().filter(|r| r.trial == trial).collect();
        let final_best = mine.last().map(|r| r.best_so_far);
        let first_iteration_at_best =
            final_best.and_then(|b| mine.iter().find(|r| r.best_so_far == b).map(|r| r.iteration));
        TrialSummary {
            trial,
            failure,
            final_best,
            first_iteration_at_best,
            records: mine.len(),
        }
    }
}

fn fmt_opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn write_summary(path: impl AsRef<Path>, summaries: &[TrialSummary]) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::io(path, std::io::Error::other(e)))?;
    let wrap = |e: csv::Error| Error::io(path, std::io::Error::other(e));
    w.write_record(["trial", "status", "final_best", "first_iteration_at_best", "records"])
        .map_err(wrap)?;
    for s in summaries {
        let status = match &s.failure {
            None => "completed".to_string(),
            Some(m) => format!("failed: {m}"),
        };
        w.write_record([
            s.trial.to_string(),
            status,
            fmt_opt(s.final_best),
            fmt_opt(s.first_iteration_at_best),
            s.records.to_string(),
        ])
        .map_err(wrap)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Best-so-far after each iteration of one trial; index 0 is the end of
/// initialization.
pub fn best_curve(records: &[RunRecord], trial: usize) -> Vec<(usize, f64)> {
    let mut by_iter: BTreeMap<usize, f64> = BTreeMap::new();
    for r in records.iter().filter(|r| r.trial == trial) {
        by_iter.insert(r.iteration, r.best_so_far);
    }
    by_iter.into_iter().collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurvePoint {
    pub iteration: usize,
    pub mean: f64,
    pub min: f64,
    pub max: f64,
    pub trials: usize,
}

/// Aggregates best-so-far across every trial of every record set.
///
/// Trials that stop early contribute only to the iterations they reached.
/// All sets must span the same iteration range.
pub fn aggregate_curves(sets: &[(String, Vec<RunRecord>)]) -> Result<Vec<CurvePoint>> {
    if sets.is_empty() {
        return Err(Error::InvalidValue("no record files given".into()));
    }
    let mut ranges = Vec::new();
    let mut per_iter: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    for (name, records) in sets {
        if records.is_empty() {
            return Err(Error::InvalidValue(format!("{name} contains no records")));
        }
        let trials: Vec<usize> = {
            let mut t: Vec<usize> = records.iter().map(|r| r.trial).collect();
            t.sort_unstable();
            t.dedup();
            t
        };
        let mut max_iter = 0;
        for t in trials {
            for (iteration, best) in best_curve(records, t) {
                per_iter.entry(iteration).or_default().push(best);
                max_iter = max_iter.max(iteration);
            }
        }
        ranges.push((name.clone(), max_iter));
    }
    if ranges.iter().any(|(_, m)| *m != ranges[0].1) {
        let listing: Vec<String> = ranges
            .iter()
            .map(|(n, m)| format!("{n} (iterations 0..={m})"))
            .collect();
        return Err(Error::InvalidValue(format!(
            "record files cover different iteration ranges: {}",
            listing.join(", ")
        )));
    }
    Ok(per_iter
        .into_iter()
        .map(|(iteration, v)| CurvePoint {
            iteration,
            mean: v.iter().sum::<f64>() / v.len() as f64,
            min: v.iter().copied().fold(f64::INFINITY, f64::min),
            max: v.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            trials: v.len(),
        })
        .collect())
}

pub fn write_curves(path: impl AsRef<Path>, points: &[CurvePoint]) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::io(path, std::io::Error::other(e)))?;
    let wrap = |e: csv::Error| Error::io(path, std::io::Error::other(e));
    w.write_record(["iteration", "mean", "min", "max", "trials"]).map_err(wrap)?;
    for p in points {
        w.write_record([
            p.iteration.to_string(),
            p.mean.to_string(),
            p.min.to_string(),
            p.max.to_string(),
            p.trials.to_string(),
        ])
        .map_err(wrap)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Counts from a successful audit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct AuditReport {
    pub trials: usize,
    pub records: usize,
}

/// Checks the bookkeeping invariants of a record stream: no sequence
/// queried twice within a trial, best-so-far equal to the running minimum
/// (hence non-increasing), and a training set of `init + iteration − 1`
/// observations behind every loop query.
pub fn audit_records(records: &[RunRecord]) -> Result<AuditReport> {
    let fail = |r: &RunRecord, m: String| {
        Err(Error::InvalidValue(format!(
            "trial {} iteration {}: {m}",
            r.trial, r.iteration
        )))
    };
    let mut trials: BTreeMap<usize, Vec<&RunRecord>> = BTreeMap::new();
    for r in records {
        trials.entry(r.trial).or_default().push(r);
    }
    for recs in trials.values() {
        let mut seen = HashSet::new();
        let mut best = f64::INFINITY;
        let mut init = 0usize;
        let mut last_iter = 0usize;
        let mut in_loop = false;
        for r in recs {
            if !seen.insert(r.sequence.as_str()) {
                return fail(r, format!("sequence {} queried twice", r.sequence));
            }
            best = best.min(r.value);
            if r.best_so_far != best {
                return fail(r, format!("best_so_far {} but running minimum {best}", r.best_so_far));
            }
            match r.phase {
                Phase::Init => {
                    if in_loop || r.iteration != 0 {
                        return fail(r, "init record out of place".into());
                    }
                    init += 1;
                }
                Phase::Loop => {
                    if r.iteration != last_iter + 1 {
                        return fail(r, format!("iteration follows {last_iter}"));
                    }
                    in_loop = true;
                    last_iter = r.iteration;
                    let expected = init + r.iteration - 1;
                    if r.train_size != Some(expected) {
                        return fail(r, format!("train_size {:?}, expected {expected}", r.train_size));
                    }
                }
            }
        }
    }
    Ok(AuditReport {
        trials: trials.len(),
        records: records.len(),
    })
}
