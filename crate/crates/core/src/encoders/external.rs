use std::collections::HashMap;
use std::io::BufRead;
use std::path::Path;

use super::{EncodedSequence, EncoderKind};
use crate::error::{Error, Result};
use crate::sequence::AntibodySequence;

/// Precomputed per-sequence embeddings, keyed by the joined sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct ExternalEmbeddings {
    dimension: usize,
    table: HashMap<String, Vec<f64>>,
}

impl ExternalEmbeddings {
    /// Reads tab-separated rows: joined sequence, then the vector values.
    /// Blank lines and lines starting with `#` are skipped.
    pub fn from_reader(reader: impl BufRead, source_name: &str) -> Result<Self> {
        let parse_err = |line: usize, message: String| Error::Parse {
            source_name: source_name.to_string(),
            line,
            message,
        };
        let mut dimension = None;
        let mut table: HashMap<String, Vec<f64>> = HashMap::new();
        for (i, line) in reader.lines().enumerate() {
            let line_no = i + 1;
            let line = line.map_err(|e| parse_err(line_no, e.to_string()))?;
            let line = line.trim_end_matches(['\r', '\n']);
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let mut fields = line.split('\t');
            let key = fields.next().unwrap_or_default().trim().to_string();
            if key.is_empty() {
                return Err(parse_err(line_no, "empty sequence field".into()));
            }
            let values = fields
                .map(|f| {
                    let v: f64 = f
                        .trim()
                        .parse()
                        .map_err(|_| parse_err(line_no, format!("bad value {f:?}")))?;
                    if v.is_finite() {
                        Ok(v)
                    } else {
                        Err(parse_err(line_no, format!("non-finite value {f:?}")))
                    }
                })
                .collect::<Result<Vec<f64>>>()?;
            if values.is_empty() {
                return Err(parse_err(line_no, "row has no values".into()));
            }
            match dimension {
                None => dimension = Some(values.len()),
                Some(d) if d != values.len() => {
                    return Err(parse_err(
                        line_no,
                        format!("row has {} values, earlier rows have {d}", values.len()),
                    ))
                }
                Some(_) => {}
            }
            if let Some(prev) = table.get(&key) {
                if prev != &values {
                    return Err(Error::DuplicateSequence {
                        sequence: key,
                        line: line_no,
                    });
                }
                continue;
            }
            table.insert(key, values);
        }
        let dimension =
            dimension.ok_or_else(|| parse_err(0, "file contains no embeddings".into()))?;
        Ok(ExternalEmbeddings { dimension, table })
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }

    pub fn contains(&self, seq: &AntibodySequence) -> bool {
        self.table.contains_key(seq.joined())
    }

    pub fn lookup(&self, seq: &AntibodySequence) -> Result<EncodedSequence> {
        let values = self
            .table
            .get(seq.joined())
            .ok_or_else(|| Error::MissingEmbedding(seq.joined().to_string()))?;
        EncodedSequence::dense(EncoderKind::External, values.clone())
    }
}

pub fn load_external_embeddings(path: impl AsRef<Path>) -> Result<ExternalEmbeddings> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    ExternalEmbeddings::from_reader(std::io::BufReader::new(file), &path.display().to_string())
}
