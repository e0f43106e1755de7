use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::sequence::{Alphabet, AntibodySequence};

pub const POOL_HEADER: [&str; 3] = ["heavy_chain", "light_chain", "ddg"];

#[derive(Debug, Clone, PartialEq)]
pub struct PoolEntry {
    pub sequence: AntibodySequence,
    pub ddg: f64,
}

/// Pre-computed ΔΔG values for a fixed set of sequences.
#[derive(Debug, Clone, PartialEq)]
pub struct PoolDataset {
    entries: Vec<PoolEntry>,
    provenance: String,
}

impl PoolDataset {
    /// Validates that sequences are distinct, equally long and that every
    /// value is finite.
    pub fn new(entries: Vec<PoolEntry>, provenance: impl Into<String>) -> Result<Self> {
        let mut seen = HashMap::new();
        for (i, e) in entries.iter().enumerate() {
            if !e.ddg.is_finite() {
                return Err(Error::InvalidValue(format!("entry {i} has non-finite ddg")));
            }
            if e.sequence.len() != entries[0].sequence.len() {
                return Err(Error::LengthMismatch {
                    expected: entries[0].sequence.len(),
                    found: e.sequence.len(),
                });
            }
            if seen.insert(e.sequence.clone(), i).is_some() {
                return Err(Error::DuplicateSequence {
                    sequence: e.sequence.joined().to_string(),
                    line: i + 1,
                });
            }
        }
        Ok(PoolDataset {
            entries,
            provenance: provenance.into(),
        })
    }

    pub fn from_reader(reader: impl Read, source_name: &str, alphabet: &Alphabet) -> Result<Self> {
        let parse_err = |line: u64, message: String| Error::Parse {
            source_name: source_name.to_string(),
            line: line as usize,
            message,
        };
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let header = rdr
            .headers()
            .map_err(|e| parse_err(1, e.to_string()))?
            .clone();
        if header.iter().collect::<Vec<_>>() != POOL_HEADER {
            return Err(parse_err(
                1,
                format!("header must be {}", POOL_HEADER.join(",")),
            ));
        }
        let mut entries: Vec<PoolEntry> = Vec::new();
        let mut lines: HashMap<AntibodySequence, u64> = HashMap::new();
        for record in rdr.records() {
            let record = record.map_err(|e| {
                let line = e.position().map_or(0, |p| p.line());
                parse_err(line, e.to_string())
            })?;
            let line = record.position().map_or(0, |p| p.line());
            let sequence = AntibodySequence::parse(&record[0], &record[1], alphabet)
                .map_err(|e| parse_err(line, e.to_string()))?;
            let ddg: f64 = record[2]
                .parse()
                .map_err(|_| parse_err(line, format!("ddg {:?} is not a number", &record[2])))?;
            if !ddg.is_finite() {
                return Err(parse_err(line, format!("ddg {ddg} is not finite")));
            }
            if let Some(first) = entries.first() {
                if first.sequence.len() != sequence.len()
                    || first.sequence.separator_position() != sequence.separator_position()
                {
                    return Err(parse_err(
                        line,
                        format!(
                            "sequence layout {}+{} differs from the first row's {}+{}",
                            sequence.heavy().len(),
                            sequence.light().len(),
                            first.sequence.heavy().len(),
                            first.sequence.light().len()
                        ),
                    ));
                }
            }
            if let Some(prev) = lines.insert(sequence.clone(), line) {
                return Err(parse_err(
                    line,
                    format!("duplicate of the sequence on line {prev}"),
                ));
            }
            entries.push(PoolEntry { sequence, ddg });
        }
        if entries.is_empty() {
            return Err(Error::EmptyPool.context(source_name.to_string()));
        }
        Ok(PoolDataset {
            entries,
            provenance: source_name.to_string(),
        })
    }

    pub fn write_csv(&self, writer: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let to_io = |e: csv::Error| Error::io("pool csv", std::io::Error::other(e));
        w.write_record(POOL_HEADER).map_err(to_io)?;
        for e in &self.entries {
            w.write_record([e.sequence.heavy(), e.sequence.light(), &format!("{}", e.ddg)])
                .map_err(to_io)?;
        }
        w.flush().map_err(|e| Error::io("pool csv", e))
    }

    pub fn entries(&self) -> &[PoolEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn provenance(&self) -> &str {
        &self.provenance
    }

    /// Smallest ΔΔG in the pool.
    pub fn minimum(&self) -> Option<f64> {
        self.entries.iter().map(|e| e.ddg).reduce(f64::min)
    }
}

/// Reads a pool CSV with header `heavy_chain,light_chain,ddg`.
pub fn load_pool(path: impl AsRef<Path>, alphabet: &Alphabet) -> Result<PoolDataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    PoolDataset::from_reader(std::io::BufReader::new(file), &path.display().to_string(), alphabet)
}
