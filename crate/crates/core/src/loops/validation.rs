//! Pool replay: the loop may only pick sequences from a fixed dataset, whose
//! values are revealed as they are chosen.

use std::time::Instant;

use crate::acquisition::{argmax, AcquisitionSpec};
use crate::encoders::EncodedSequence;
use crate::error::{Error, Result};
use crate::oracles::{PoolDataset, PoolEntry};
use crate::rng::RngStream;
use crate::surrogate::{FittedGp, GpConfig, KernelFamily};

use super::records::{Phase, RunRecord};
use super::score::Scorer;

/// `⌈fraction · n⌉`, tolerant of rounding error in the product.
pub fn init_size(n: usize, fraction: f64) -> usize {
    let x = fraction * n as f64;
    let k = if (x - x.round()).abs() < 1e-9 { x.round() } else { x.ceil() };
    k as usize
}

/// Draws `⌈fraction · n⌉` indices uniformly without replacement. Returns
/// them in draw order, with the remaining indices in pool order.
pub fn split_pool(n: usize, fraction: f64, rng: &mut RngStream) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::Config(format!("init fraction must lie in (0, 1], got {fraction}")));
    }
    let k = init_size(n, fraction).min(n);
    if k == 0 {
        return Err(Error::EmptyPool.context("initial training set"));
    }
    let train = rand::seq::index::sample(rng, n, k).into_vec();
    let mut taken = vec![false; n];
    for &i in &train {
        taken[i] = true;
    }
    let heldout = (0..n).filter(|&i| !taken[i]).collect();
    Ok((train, heldout))
}

/// Splits a pool into an initial training set and the held-out remainder.
pub fn init_validation(
    pool: &PoolDataset,
    fraction: f64,
    rng: &mut RngStream,
) -> Result<(Vec<PoolEntry>, PoolDataset)> {
    let (train, heldout) = split_pool(pool.len(), fraction, rng)?;
    let entries = pool.entries();
    let rest = heldout.iter().map(|&i| entries[i].clone()).collect();
    Ok((
        train.iter().map(|&i| entries[i].clone()).collect(),
        PoolDataset::new(rest, pool.provenance())?,
    ))
}

/// Index of the held-out candidate maximizing the acquisition, with its
/// score. Ties go to the lowest index.
pub fn validation_step(
    gp: &FittedGp,
    heldout: &[EncodedSequence],
    acq: &AcquisitionSpec,
    rng: &mut RngStream,
) -> Result<(usize, f64)> {
    if heldout.is_empty() {
        return Err(Error::EmptyPool);
    }
    let mut scorer = Scorer::new(Some(gp), acq, rng.derive("acquisition"))?;
    let mut scores = Vec::with_capacity(heldout.len());
    for x in heldout {
        let cross = if scorer.needs_cross() {
            Some(gp.cross_covariance(x)?)
        } else {
            None
        };
        scores.push(scorer.score(cross.as_ref())?);
    }
    let i = argmax(&scores).ok_or(Error::EmptyPool)?;
    Ok((i, scores[i]))
}

/// Settings of one validation trial.
#[derive(Debug, Clone)]
pub struct ValidationSettings {
    pub iterations: usize,
    pub init_fraction: f64,
    pub kernel: KernelFamily,
    pub gp: GpConfig,
    pub acquisition: AcquisitionSpec,
}

/// Runs one trial over a pool with precomputed encodings, passing every
/// record and its wall time to `sink` as soon as it exists.
pub fn run_validation_trial(
    pool: &PoolDataset,
    encodings: &[EncodedSequence],
    settings: &ValidationSettings,
    trial: usize,
    rng: &RngStream,
    sink: &mut dyn FnMut(RunRecord, f64) -> Result<()>,
) -> Result<()> {
    if encodings.len() != pool.len() {
        return Err(Error::DimensionMismatch {
            expected: pool.len(),
            found: encodings.len(),
        });
    }
    let entries = pool.entries();
    let clock = Instant::now();
    let (mut train, mut heldout) =
        split_pool(pool.len(), settings.init_fraction, &mut rng.derive("init"))?;

    let mut best = f64::INFINITY;
    for &i in &train {
        best = best.min(entries[i].ddg);
        let rec = RunRecord {
            trial,
            iteration: 0,
            phase: Phase::Init,
            sequence: entries[i].sequence.joined().to_string(),
            value: entries[i].ddg,
            best_so_far: best,
            acquisition: None,
            train_size: None,
        };
        sink(rec, clock.elapsed().as_secs_f64())?;
    }

    // Inner products of every held-out encoding with the training inputs,
    // in training order; extended by one column per iteration.
    let mut dots: Vec<Vec<f64>> = vec![Vec::new(); pool.len()];
    for &h in &heldout {
        dots[h] = train.iter().map(|&j| encodings[h].dot(&encodings[j])).collect();
    }

    for iteration in 1..=settings.iterations {
        if heldout.is_empty() {
            break;
        }
        let start = Instant::now();
        let targets: Vec<f64> = train.iter().map(|&i| entries[i].ddg).collect();
        let gp = if settings.acquisition.kind == crate::acquisition::AcquisitionKind::Random {
            None
        } else {
            let inputs = train.iter().map(|&i| encodings[i].clone()).collect();
            Some(
                FittedGp::fit(
                    inputs,
                    targets,
                    settings.kernel,
                    &settings.gp,
                    &mut rng.derive(&format!("fit/{iteration}")),
                )
                .map_err(|e| e.context(format!("fitting the surrogate at iteration {iteration}")))?,
            )
        };
        let mut scorer = Scorer::new(
            gp.as_ref(),
            &settings.acquisition,
            rng.derive(&format!("acquisition/{iteration}")),
        )?;
        let mut scores = Vec::with_capacity(heldout.len());
        for &h in &heldout {
            let cross = scorer
                .gp()
                .map(|gp| gp.cross_covariance_from_inner(&dots[h], encodings[h].sq_norm()));
            scores.push(scorer.score(cross.as_ref())?);
        }
        let pos = argmax(&scores).ok_or(Error::EmptyPool)?;
        let chosen = heldout.remove(pos);
        let train_size = train.len();
        best = best.min(entries[chosen].ddg);
        let rec = RunRecord {
            trial,
            iteration,
            phase: Phase::Loop,
            sequence: entries[chosen].sequence.joined().to_string(),
            value: entries[chosen].ddg,
            best_so_far: best,
            acquisition: Some(scores[pos]),
            train_size: Some(train_size),
        };
        train.push(chosen);
        for &h in &heldout {
            let d = encodings[h].dot(&encodings[chosen]);
            dots[h].push(d);
        }
        sink(rec, start.elapsed().as_secs_f64())?;
    }
    Ok(())
}
