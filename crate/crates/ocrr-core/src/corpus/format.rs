//! Binary embedding file format and its CSV converter.
//!
//! Layout (little-endian): magic `OCRREMB1`, u32 dim, u64 record count, then
//! per record a u32 label byte length, the UTF-8 label, a u8 split flag
//! (0 = train, 1 = test), and dim f32 components. A plain-text sidecar
//! `<file>.manifest` lists the class names.

use std::collections::BTreeSet;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::embedding::{EmbeddingError, EmbeddingVector};

use super::{CorpusError, LabeledExample, Split};

pub const EMBEDDING_MAGIC: &[u8; 8] = b"OCRREMB1";

/// Writes a corpus and its class-name manifest. All records must share one
/// dimension; an empty corpus writes a header with dim 0.
pub fn write_embedding_file(path: &Path, examples: &[LabeledExample]) -> Result<(), CorpusError> {
    let dim = examples.first().map(|e| e.embedding.dim()).unwrap_or(0);
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(EMBEDDING_MAGIC)?;
    w.write_all(&(dim as u32).to_le_bytes())?;
    w.write_all(&(examples.len() as u64).to_le_bytes())?;
    for (record, example) in examples.iter().enumerate() {
        if example.embedding.dim() != dim {
            return Err(CorpusError::DimensionMismatch {
                record,
                expected: dim,
                actual: example.embedding.dim(),
            });
        }
        if example.label.is_empty() {
            return Err(CorpusError::BadLabel {
                record,
                reason: "empty label".into(),
            });
        }
        let label = example.label.as_bytes();
        w.write_all(&(label.len() as u32).to_le_bytes())?;
        w.write_all(label)?;
        w.write_all(&[example.split.flag()])?;
        for c in example.embedding.as_slice() {
            w.write_all(&c.to_le_bytes())?;
        }
    }
    w.flush()?;

    let classes: BTreeSet<&str> = examples.iter().map(|e| e.label.as_str()).collect();
    let manifest_path = sidecar_manifest_path(path);
    let mut m = BufWriter::new(File::create(manifest_path)?);
    for class in classes {
        writeln!(m, "{class}")?;
    }
    m.flush()?;
    Ok(())
}

pub fn sidecar_manifest_path(path: &Path) -> std::path::PathBuf {
    let mut os = path.as_os_str().to_owned();
    os.push(".manifest");
    os.into()
}

/// Loads every record, normalizing embeddings at ingestion. Record order is
/// preserved; malformed data is reported with the offending record index.
pub fn load_embedding_file(path: &Path) -> Result<Vec<LabeledExample>, CorpusError> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)
        .map_err(|_| CorpusError::MalformedHeader("file shorter than magic".into()))?;
    if &magic != EMBEDDING_MAGIC {
        return Err(CorpusError::MalformedHeader(format!(
            "bad magic {:02x?}",
            magic
        )));
    }
    let mut u32buf = [0u8; 4];
    r.read_exact(&mut u32buf)
        .map_err(|_| CorpusError::MalformedHeader("missing dim".into()))?;
    let dim = u32::from_le_bytes(u32buf) as usize;
    let mut u64buf = [0u8; 8];
    r.read_exact(&mut u64buf)
        .map_err(|_| CorpusError::MalformedHeader("missing record count".into()))?;
    let count = u64::from_le_bytes(u64buf) as usize;

    let mut out = Vec::with_capacity(count);
    for record in 0..count {
        r.read_exact(&mut u32buf).map_err(|_| CorpusError::Truncated {
            record,
            what: "label length",
        })?;
        let label_len = u32::from_le_bytes(u32buf) as usize;
        if label_len > 1 << 20 {
            return Err(CorpusError::BadLabel {
                record,
                reason: format!("label length {label_len} implausibly large"),
            });
        }
        let mut label_bytes = vec![0u8; label_len];
        r.read_exact(&mut label_bytes).map_err(|_| CorpusError::Truncated {
            record,
            what: "label",
        })?;
        let label = String::from_utf8(label_bytes).map_err(|_| CorpusError::BadLabel {
            record,
            reason: "label is not UTF-8".into(),
        })?;
        if label.is_empty() {
            return Err(CorpusError::BadLabel {
                record,
                reason: "empty label".into(),
            });
        }
        let mut flag = [0u8; 1];
        r.read_exact(&mut flag).map_err(|_| CorpusError::Truncated {
            record,
            what: "split flag",
        })?;
        let split = Split::from_flag(flag[0]).ok_or(CorpusError::BadSplitFlag {
            record,
            value: flag[0],
        })?;
        let mut components = Vec::with_capacity(dim);
        let mut f32buf = [0u8; 4];
        for read in 0..dim {
            if r.read_exact(&mut f32buf).is_err() {
                // Components cut short: the record's real length disagrees
                // with the header's dimension.
                return Err(CorpusError::DimensionMismatch {
                    record,
                    expected: dim,
                    actual: read,
                });
            }
            components.push(f32::from_le_bytes(f32buf));
        }
        let embedding = EmbeddingVector::new(components).map_err(|e| match e {
            EmbeddingError::NonFinite { index } => CorpusError::NonFiniteComponent {
                record,
                component: index,
            },
            EmbeddingError::ZeroNorm => CorpusError::ZeroNormRecord { record },
            EmbeddingError::DimMismatch { expected, actual } => CorpusError::DimensionMismatch {
                record,
                expected,
                actual,
            },
        })?;
        out.push(LabeledExample {
            embedding,
            label,
            split,
        });
    }
    Ok(out)
}

/// Converts a headerless CSV of `label,split,c0,c1,...` rows into the binary
/// format. `split` accepts `train`/`test` or `0`/`1`. Returns (records, dim).
pub fn convert_csv_to_embeddings(
    csv_path: &Path,
    out_path: &Path,
) -> Result<(usize, usize), CorpusError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_path(csv_path)?;
    let mut examples = Vec::new();
    let mut dim: Option<usize> = None;
    for (record, row) in reader.records().enumerate() {
        let row = row?;
        if row.len() < 3 {
            return Err(CorpusError::BadLabel {
                record,
                reason: format!("row has {} fields, need label, split, components", row.len()),
            });
        }
        let label = row[0].trim().to_string();
        if label.is_empty() {
            return Err(CorpusError::BadLabel {
                record,
                reason: "empty label".into(),
            });
        }
        let split = match row[1].trim() {
            "train" | "0" => Split::Train,
            "test" | "1" => Split::Test,
            other => {
                return Err(CorpusError::BadLabel {
                    record,
                    reason: format!("unknown split {other:?}"),
                })
            }
        };
        let mut components = Vec::with_capacity(row.len() - 2);
        for (i, field) in row.iter().skip(2).enumerate() {
            let value: f32 = field.trim().parse().map_err(|_| CorpusError::BadLabel {
                record,
                reason: format!("component {i} is not a float: {field:?}"),
            })?;
            components.push(value);
        }
        match dim {
            None => dim = Some(components.len()),
            Some(d) if d != components.len() => {
                return Err(CorpusError::DimensionMismatch {
                    record,
                    expected: d,
                    actual: components.len(),
                })
            }
            _ => {}
        }
        let embedding = EmbeddingVector::new(components).map_err(|e| match e {
            EmbeddingError::NonFinite { index } => CorpusError::NonFiniteComponent {
                record,
                component: index,
            },
            EmbeddingError::ZeroNorm => CorpusError::ZeroNormRecord { record },
            EmbeddingError::DimMismatch { expected, actual } => CorpusError::DimensionMismatch {
                record,
                expected,
                actual,
            },
        })?;
        examples.push(LabeledExample {
            embedding,
            label,
            split,
        });
    }
    write_embedding_file(out_path, &examples)?;
    Ok((examples.len(), dim.unwrap_or(0)))
}
