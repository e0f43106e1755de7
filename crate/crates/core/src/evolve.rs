//! Genetic-algorithm search over masked sequence space.

use std::collections::{HashMap, HashSet};

use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::RngStream;
use crate::sequence::{Alphabet, AntibodySequence, CdrMask};

#[derive(Debug, Clone, PartialEq)]
pub struct GaConfig {
    pub population_size: usize,
    pub generations: usize,
    pub offspring: usize,
    pub crossover_probability: f64,
    pub elite_fraction: f64,
    pub mask: CdrMask,
}

impl GaConfig {
    pub fn new(mask: CdrMask) -> Self {
        GaConfig {
            population_size: 128,
            generations: 50,
            offspring: 64,
            crossover_probability: 0.5,
            elite_fraction: 0.25,
            mask,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.population_size == 0 || self.generations == 0 || self.offspring == 0 {
            return Err(Error::Config(
                "GA population, generations and offspring must be positive".into(),
            ));
        }
        for (name, p) in [
            ("crossover probability", self.crossover_probability),
            ("elite fraction", self.elite_fraction),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Config(format!("{name} must lie in [0, 1], got {p}")));
            }
        }
        if self.mask.is_empty() {
            return Err(Error::InvalidMask("GA needs a non-empty mask".into()));
        }
        Ok(())
    }

    /// Number of parents eligible for selection.
    fn elite_count(&self, population: usize) -> usize {
        ((self.elite_fraction * population as f64).ceil() as usize).clamp(1, population)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoredIndividual {
    pub sequence: AntibodySequence,
    pub fitness: f64,
}

/// Changes one uniformly chosen mask position to a uniformly chosen
/// different residue.
pub fn ga_mutate(
    seq: &AntibodySequence,
    mask: &CdrMask,
    alphabet: &Alphabet,
    rng: &mut RngStream,
) -> Result<AntibodySequence> {
    if mask.is_empty() {
        return Err(Error::InvalidMask("cannot mutate with an empty mask".into()));
    }
    let position = mask.positions()[rng.random_range(0..mask.len())];
    let current = seq.residue(position);
    let choices: Vec<u8> = alphabet
        .residues()
        .iter()
        .copied()
        .filter(|r| *r != current)
        .collect();
    let residue = choices[rng.random_range(0..choices.len())];
    seq.apply_mutation(position, residue, alphabet)
}

/// Single-point splice `a[0..c) + b[c..L)` at a fixed index.
pub fn crossover_at(a: &AntibodySequence, b: &AntibodySequence, c: usize) -> Result<AntibodySequence> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            expected: a.len(),
            found: b.len(),
        });
    }
    if a.separator_position() != b.separator_position() {
        return Err(Error::SeparatorPosition(b.separator_position()));
    }
    if c > a.len() {
        return Err(Error::PositionOutOfRange {
            position: c,
            len: a.len(),
        });
    }
    let mut joined = a.as_bytes()[..c].to_vec();
    joined.extend_from_slice(&b.as_bytes()[c..]);
    Ok(a.with_same_layout(joined))
}

/// Splice at an index drawn uniformly from `1..=L−1`.
pub fn ga_crossover(
    a: &AntibodySequence,
    b: &AntibodySequence,
    rng: &mut RngStream,
) -> Result<AntibodySequence> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            expected: a.len(),
            found: b.len(),
        });
    }
    let c = rng.random_range(1..a.len().max(2));
    crossover_at(a, b, c)
}

/// Resets every non-mask position to the wild type.
pub fn repair(
    seq: &AntibodySequence,
    wild_type: &AntibodySequence,
    mask: &CdrMask,
) -> Result<AntibodySequence> {
    if seq.len() != wild_type.len() {
        return Err(Error::LengthMismatch {
            expected: wild_type.len(),
            found: seq.len(),
        });
    }
    let mut joined = wild_type.as_bytes().to_vec();
    for &p in mask.positions() {
        joined[p] = seq.residue(p);
    }
    Ok(wild_type.with_same_layout(joined))
}

/// Memoizes fitness values and evaluates misses in one batch.
struct FitnessCache<F> {
    fitness: F,
    values: HashMap<AntibodySequence, f64>,
    evaluations: usize,
}

impl<F> FitnessCache<F>
where
    F: FnMut(&[AntibodySequence]) -> Result<Vec<f64>>,
{
    fn evaluate(&mut self, batch: &[AntibodySequence]) -> Result<Vec<f64>> {
        let mut missing = Vec::new();
        let mut queued = HashSet::new();
        for s in batch {
            if !self.values.contains_key(s) && queued.insert(s.clone()) {
                missing.push(s.clone());
            }
        }
        if !missing.is_empty() {
            let scores = (self.fitness)(&missing)?;
            if scores.len() != missing.len() {
                return Err(Error::DimensionMismatch {
                    expected: missing.len(),
                    found: scores.len(),
                });
            }
            for (s, v) in missing.into_iter().zip(scores) {
                if !v.is_finite() {
                    return Err(Error::InvalidValue(format!("non-finite fitness for {s}")));
                }
                self.values.insert(s, v);
                self.evaluations += 1;
            }
        }
        Ok(batch.iter().map(|s| self.values[s]).collect())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaOutcome {
    pub best: ScoredIndividual,
    /// Distinct sequences whose fitness was computed.
    pub evaluations: usize,
}

/// Elitist GA maximizing `fitness`.
///
/// `fitness` receives batches of distinct, never-before-seen sequences and
/// must be deterministic. Every evaluated sequence matches `wild_type`
/// outside the mask. Returns the best evaluated sequence not in `forbidden`.
pub fn ga_maximize<F>(
    fitness: F,
    seedpop: &[AntibodySequence],
    cfg: &GaConfig,
    wild_type: &AntibodySequence,
    alphabet: &Alphabet,
    forbidden: &HashSet<AntibodySequence>,
    rng: &mut RngStream,
) -> Result<ScoredIndividual>
where
    F: FnMut(&[AntibodySequence]) -> Result<Vec<f64>>,
{
    Ok(ga_maximize_detailed(fitness, seedpop, cfg, wild_type, alphabet, forbidden, rng)?.best)
}

pub fn ga_maximize_detailed<F>(
    fitness: F,
    seedpop: &[AntibodySequence],
    cfg: &GaConfig,
    wild_type: &AntibodySequence,
    alphabet: &Alphabet,
    forbidden: &HashSet<AntibodySequence>,
    rng: &mut RngStream,
) -> Result<GaOutcome>
where
    F: FnMut(&[AntibodySequence]) -> Result<Vec<f64>>,
{
    cfg.validate()?;
    if seedpop.is_empty() {
        return Err(Error::EmptyPool);
    }
    let mut cache = FitnessCache {
        fitness,
        values: HashMap::new(),
        evaluations: 0,
    };

    let mut population: Vec<AntibodySequence> = Vec::new();
    let mut members = HashSet::new();
    for s in seedpop {
        let s = repair(s, wild_type, &cfg.mask)?;
        if members.insert(s.clone()) {
            population.push(s);
        }
    }
    let seeds = population.len();
    let mut attempts = 0;
    while population.len() < cfg.population_size && attempts < 20 * cfg.population_size {
        attempts += 1;
        let parent = &population[rng.random_range(0..seeds)];
        let child = ga_mutate(parent, &cfg.mask, alphabet, rng)?;
        if members.insert(child.clone()) {
            population.push(child);
        }
    }

    let mut best: Option<ScoredIndividual> = None;
    let mut consider = |batch: &[AntibodySequence], scores: &[f64]| {
        for (s, &f) in batch.iter().zip(scores) {
            if !forbidden.contains(s) && best.as_ref().is_none_or(|b| f > b.fitness) {
                best = Some(ScoredIndividual {
                    sequence: s.clone(),
                    fitness: f,
                });
            }
        }
    };

    let scores = cache.evaluate(&population)?;
    consider(&population, &scores);
    let mut ranked: Vec<(AntibodySequence, f64)> = population.into_iter().zip(scores).collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1));
    ranked.truncate(cfg.population_size);

    for _ in 0..cfg.generations {
        let elite = cfg.elite_count(ranked.len());
        let tournament = |rng: &mut RngStream| {
            let i = rng.random_range(0..elite);
            let j = rng.random_range(0..elite);
            // ranked is sorted by fitness, so the lower index wins
            &ranked[i.min(j)].0
        };
        let mut children = Vec::with_capacity(cfg.offspring);
        for _ in 0..cfg.offspring {
            let first = tournament(rng).clone();
            let base = if rng.random::<f64>() < cfg.crossover_probability {
                let second = tournament(rng).clone();
                let spliced = ga_crossover(&first, &second, rng)?;
                repair(&spliced, wild_type, &cfg.mask)?
            } else {
                first
            };
            children.push(ga_mutate(&base, &cfg.mask, alphabet, rng)?);
        }
        let scores = cache.evaluate(&children)?;
        consider(&children, &scores);
        let present: HashSet<AntibodySequence> = ranked.iter().map(|(s, _)| s.clone()).collect();
        let mut added = HashSet::new();
        for (c, f) in children.into_iter().zip(scores) {
            if !present.contains(&c) && added.insert(c.clone()) {
                ranked.push((c, f));
            }
        }
        ranked.sort_by(|a, b| b.1.total_cmp(&a.1));
        ranked.truncate(cfg.population_size);
    }

    let best = best.ok_or(Error::SearchExhausted)?;
    Ok(GaOutcome {
        best,
        evaluations: cache.evaluations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sequence::hamming_distance;
    use proptest::prelude::{any, prop_assert, prop_assert_eq, proptest};

    fn alphabet() -> Alphabet {
        Alphabet::standard()
    }

    fn wt() -> AntibodySequence {
        AntibodySequence::parse("EVQLVESGGG", "DIQMTQSPSS", &alphabet()).unwrap()
    }

    #[test]
    fn mutate_changes_one_masked_position() {
        let wt = wt();
        let mask = CdrMask::new(vec![2, 5, 13], &wt).unwrap();
        let mut rng = RngStream::new(1, "mut");
        for _ in 0..200 {
            let m = ga_mutate(&wt, &mask, &alphabet(), &mut rng).unwrap();
            assert_eq!(hamming_distance(&wt, &m).unwrap(), 1);
            let pos = (0..wt.len()).find(|&i| wt.residue(i) != m.residue(i)).unwrap();
            assert!(mask.contains(pos));
        }
        let single = CdrMask::new(vec![7], &wt).unwrap();
        for _ in 0..50 {
            let m = ga_mutate(&wt, &single, &alphabet(), &mut rng).unwrap();
            assert_ne!(m.residue(7), wt.residue(7));
        }
    }

    #[test]
    fn mutate_positions_are_uniform() {
        let wt = wt();
        let mask = CdrMask::new(vec![1, 4, 12, 18], &wt).unwrap();
        let mut rng = RngStream::new(2, "mut");
        let mut counts = HashMap::new();
        let n = 10_000;
        for _ in 0..n {
            let m = ga_mutate(&wt, &mask, &alphabet(), &mut rng).unwrap();
            let pos = (0..wt.len()).find(|&i| wt.residue(i) != m.residue(i)).unwrap();
            *counts.entry(pos).or_insert(0usize) += 1;
        }
        for p in mask.positions() {
            assert!((counts[p] as f64 / n as f64 - 0.25).abs() < 0.02);
        }
    }

    #[test]
    fn crossover_definition() {
        let a = AntibodySequence::parse("AA", "AA", &alphabet()).unwrap();
        let c = AntibodySequence::parse("CC", "CC", &alphabet()).unwrap();
        assert_eq!(crossover_at(&a, &c, 2).unwrap().joined(), "AA|CC");
        let mut rng = RngStream::new(3, "x");
        assert_eq!(ga_crossover(&a, &a, &mut rng).unwrap(), a);
        let long = AntibodySequence::parse("AAA", "AA", &alphabet()).unwrap();
        assert!(ga_crossover(&a, &long, &mut rng).is_err());
        let shifted = AntibodySequence::parse("A", "AAA", &alphabet()).unwrap();
        assert!(ga_crossover(&a, &shifted, &mut rng).is_err());
    }

    #[test]
    fn crossover_respects_splice() {
        let wt = wt();
        let mask = CdrMask::all_residues(&wt);
        let mut rng = RngStream::new(4, "x");
        let mut a = wt.clone();
        let mut b = wt.clone();
        for _ in 0..8 {
            a = ga_mutate(&a, &mask, &alphabet(), &mut rng).unwrap();
            b = ga_mutate(&b, &mask, &alphabet(), &mut rng).unwrap();
        }
        for _ in 0..100 {
            let child = ga_crossover(&a, &b, &mut rng).unwrap();
            assert_eq!(child.len(), a.len());
            // Some splice index c must explain the child.
            let ok = (1..a.len()).any(|c| {
                (0..c).all(|i| child.residue(i) == a.residue(i))
                    && (c..a.len()).all(|i| child.residue(i) == b.residue(i))
            });
            assert!(ok);
        }
    }

    fn small_mask(wt: &AntibodySequence) -> CdrMask {
        CdrMask::new(vec![1, 3, 6, 12, 16, 19], wt).unwrap()
    }

    #[test]
    fn constant_fitness_returns_valid_sequence() {
        let wt = wt();
        let mut cfg = GaConfig::new(small_mask(&wt));
        cfg.generations = 5;
        let forbidden: HashSet<_> = [wt.clone()].into();
        let mut rng = RngStream::new(5, "ga");
        let best = ga_maximize(
            |b: &[AntibodySequence]| Ok(vec![1.0; b.len()]),
            std::slice::from_ref(&wt),
            &cfg,
            &wt,
            &alphabet(),
            &forbidden,
            &mut rng,
        )
        .unwrap();
        assert!(!forbidden.contains(&best.sequence));
        assert_eq!(best.sequence.len(), wt.len());
    }

    #[test]
    fn all_forbidden_is_exhausted() {
        let wt = AntibodySequence::parse("AC", "D", &alphabet()).unwrap();
        let mask = CdrMask::new(vec![0], &wt).unwrap();
        let mut cfg = GaConfig::new(mask.clone());
        cfg.generations = 3;
        let forbidden: HashSet<_> = alphabet()
            .residues()
            .iter()
            .map(|r| {
                let mut j = wt.as_bytes().to_vec();
                j[0] = *r;
                wt.with_same_layout(j)
            })
            .collect();
        let mut rng = RngStream::new(6, "ga");
        let err = ga_maximize(
            |b: &[AntibodySequence]| Ok(vec![0.0; b.len()]),
            std::slice::from_ref(&wt),
            &cfg,
            &wt,
            &alphabet(),
            &forbidden,
            &mut rng,
        )
        .unwrap_err();
        assert!(matches!(err, Error::SearchExhausted));
    }

    #[test]
    fn forbidden_best_yields_runner_up() {
        // Fitness on single mutants of a 1-position mask is a lookup table
        // with a known top-2.
        let wt = AntibodySequence::parse("ACDE", "FG", &alphabet()).unwrap();
        let mask = CdrMask::new(vec![2], &wt).unwrap();
        let score = |s: &AntibodySequence| -> f64 {
            match s.residue(2) {
                b'W' => 10.0,
                b'Y' => 9.0,
                r => f64::from(r) / 100.0,
            }
        };
        let top = {
            let mut j = wt.as_bytes().to_vec();
            j[2] = b'W';
            wt.with_same_layout(j)
        };
        let forbidden: HashSet<_> = [top].into();
        let mut cfg = GaConfig::new(mask);
        cfg.generations = 10;
        let mut rng = RngStream::new(7, "ga");
        let best = ga_maximize(
            |b: &[AntibodySequence]| Ok(b.iter().map(score).collect()),
            std::slice::from_ref(&wt),
            &cfg,
            &wt,
            &alphabet(),
            &forbidden,
            &mut rng,
        )
        .unwrap();
        assert_eq!(best.sequence.residue(2), b'Y');
        assert_eq!(best.fitness, 9.0);
    }

    proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(24))]
        #[test]
        fn evaluations_respect_mask_and_elitism(seed in any::<u64>()) {
            let wt = wt();
            let mask = small_mask(&wt);
            let mut cfg = GaConfig::new(mask.clone());
            cfg.generations = 4;
            cfg.population_size = 16;
            cfg.offspring = 8;
            let target = b"WWWWWWWWWWWWWWWWWWWWW";
            let score = |s: &AntibodySequence| -> f64 {
                s.as_bytes().iter().zip(target).filter(|(a, b)| a == b).count() as f64
            };
            let seeds: Vec<AntibodySequence> = {
                let mut r = RngStream::new(seed, "seeds");
                (0..3).map(|_| ga_mutate(&wt, &mask, &alphabet(), &mut r).unwrap()).collect()
            };
            let seed_best = seeds.iter().map(score).fold(f64::MIN, f64::max);
            let mut seen = Vec::new();
            let run = |seen: &mut Vec<AntibodySequence>| {
                let mut rng = RngStream::new(seed, "ga");
                ga_maximize(
                    |b: &[AntibodySequence]| {
                        seen.extend_from_slice(b);
                        Ok(b.iter().map(score).collect())
                    },
                    &seeds, &cfg, &wt, &alphabet(), &HashSet::new(), &mut rng,
                ).unwrap()
            };
            let first = run(&mut seen);
            for s in &seen {
                for i in 0..wt.len() {
                    if !mask.contains(i) {
                        prop_assert_eq!(s.residue(i), wt.residue(i));
                    }
                }
            }
            prop_assert!(first.fitness >= seed_best);
            let second = run(&mut Vec::new());
            prop_assert_eq!(first, second);
        }
    }
}
