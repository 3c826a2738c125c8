//! On-disk formats.
//!
//! A dataset is stored as two files sharing a base path:
//!
//! * `<base>.latd`: little-endian binary. A 24-byte header (`b"LATD"`,
//!   version `u32` = 1, dim `u32`, count `u64`, flags `u32` with bit 0 set
//!   when confidences follow), then `count * dim` IEEE-754 `f64` codes in row
//!   order, then `count * m` confidences when flagged.
//! * `<base>.labels.csv`: a header row of attribute names followed by one row
//!   of `0`/`1` tokens per code.
//!
//! Every write goes to a temporary file in the target directory and is
//! renamed into place.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;

use crate::dataset::{validate_dataset, AttributeSchema, LatentDataset};
use crate::directions::SemanticDirection;
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"LATD";
pub const VERSION: u32 = 1;
pub const HEADER_LEN: usize = 24;
pub const FLAG_CONFIDENCES: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LatentFileHeader {
    pub version: u32,
    pub dim: u32,
    pub count: u64,
    pub flags: u32,
}

impl LatentFileHeader {
    pub fn to_bytes(&self) -> [u8; HEADER_LEN] {
        let mut out = [0u8; HEADER_LEN];
        out[0..4].copy_from_slice(MAGIC);
        out[4..8].copy_from_slice(&self.version.to_le_bytes());
        out[8..12].copy_from_slice(&self.dim.to_le_bytes());
        out[12..20].copy_from_slice(&self.count.to_le_bytes());
        out[20..24].copy_from_slice(&self.flags.to_le_bytes());
        out
    }

    pub fn parse(bytes: &[u8], path: &Path) -> Result<Self> {
        if bytes.len() < HEADER_LEN {
            return Err(Error::Truncated {
                path: path.to_path_buf(),
                expected: HEADER_LEN as u64,
                actual: bytes.len() as u64,
            });
        }
        if &bytes[0..4] != MAGIC {
            return Err(Error::format(path, format!("bad magic {:?}, expected \"LATD\"", &bytes[0..4])));
        }
        let u32_at = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().unwrap());
        let header = LatentFileHeader {
            version: u32_at(4),
            dim: u32_at(8),
            count: u64::from_le_bytes(bytes[12..20].try_into().unwrap()),
            flags: u32_at(20),
        };
        if header.version != VERSION {
            return Err(Error::UnsupportedVersion {
                path: path.to_path_buf(),
                version: header.version,
            });
        }
        Ok(header)
    }

    pub fn has_confidences(&self) -> bool {
        self.flags & FLAG_CONFIDENCES != 0
    }
}

pub fn latd_path(base: &Path) -> PathBuf {
    with_suffix(base, ".latd")
}

pub fn labels_path(base: &Path) -> PathBuf {
    with_suffix(base, ".labels.csv")
}

/// Appends `suffix` to the final path component.
pub fn with_suffix(base: &Path, suffix: &str) -> PathBuf {
    let mut s = base.as_os_str().to_os_string();
    s.push(suffix);
    PathBuf::from(s)
}

/// Writes `bytes` to `path` through a sibling temporary file and a rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(path, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(path, e))?;
    tmp.as_file().sync_all().map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

pub fn encode_latd(dataset: &LatentDataset) -> Vec<u8> {
    let header = LatentFileHeader {
        version: VERSION,
        dim: dataset.dim() as u32,
        count: dataset.len() as u64,
        flags: if dataset.confidences().is_some() { FLAG_CONFIDENCES } else { 0 },
    };
    let conf = dataset.confidences().unwrap_or(&[]);
    let mut out = Vec::with_capacity(HEADER_LEN + 8 * (dataset.codes().len() + conf.len()));
    out.extend_from_slice(&header.to_bytes());
    for x in dataset.codes().iter().chain(conf) {
        out.extend_from_slice(&x.to_le_bytes());
    }
    out
}

pub fn encode_labels(dataset: &LatentDataset) -> Result<Vec<u8>> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| Error::format("<labels>", e.to_string());
    writer.write_record(dataset.schema().names()).map_err(csv_err)?;
    let m = dataset.m();
    for row in 0..dataset.len() {
        let label = dataset.label(row);
        writer
            .write_record((0..m).map(|k| if label.bit(k) { "1" } else { "0" }))
            .map_err(csv_err)?;
    }
    writer
        .into_inner()
        .map_err(|e| Error::format("<labels>", e.to_string()))
}

pub fn write_dataset(dataset: &LatentDataset, base: &Path) -> Result<()> {
    let report = validate_dataset(dataset);
    if !report.is_ok() {
        return Err(Error::InvalidDataset(report));
    }
    write_atomic(&latd_path(base), &encode_latd(dataset))?;
    write_atomic(&labels_path(base), &encode_labels(dataset)?)
}

/// Reads attribute names and packed labels from a labels CSV.
pub fn read_labels(path: &Path) -> Result<(AttributeSchema, Vec<u32>)> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| Error::format(path, e.to_string()))?;
    let names: Vec<String> = reader
        .headers()
        .map_err(|e| Error::format(path, e.to_string()))?
        .iter()
        .map(|s| s.trim().to_string())
        .collect();
    let schema = AttributeSchema::new(names).map_err(|e| Error::format(path, e.to_string()))?;
    let m = schema.len();
    let mut labels = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::format(path, e.to_string()))?;
        if record.len() != m {
            return Err(Error::format(
                path,
                format!("row {row}: expected {m} fields, found {}", record.len()),
            ));
        }
        let mut label = 0u32;
        for (k, token) in record.iter().enumerate() {
            match token.trim() {
                "0" => {}
                "1" => label |= 1 << k,
                other => {
                    return Err(Error::format(
                        path,
                        format!("row {row}, column {k}: label token {other:?} is not 0 or 1"),
                    ))
                }
            }
        }
        labels.push(label);
    }
    Ok((schema, labels))
}

pub fn read_dataset(base: &Path) -> Result<LatentDataset> {
    let bin_path = latd_path(base);
    let bytes = fs::read(&bin_path).map_err(|e| Error::io(&bin_path, e))?;
    let header = LatentFileHeader::parse(&bytes, &bin_path)?;
    let csv_path = labels_path(base);
    let (schema, labels) = read_labels(&csv_path)?;

    if labels.len() as u64 != header.count {
        return Err(Error::format(
            &csv_path,
            format!(
                "count mismatch: labels file has {} rows but the binary holds {} codes",
                labels.len(),
                header.count
            ),
        ));
    }
    let dim = header.dim as u64;
    let m = schema.len() as u64;
    let values = header.count * dim + if header.has_confidences() { header.count * m } else { 0 };
    let expected = HEADER_LEN as u64 + 8 * values;
    let actual = bytes.len() as u64;
    if actual < expected {
        return Err(Error::Truncated {
            path: bin_path,
            expected,
            actual,
        });
    }
    if actual > expected {
        return Err(Error::format(
            &bin_path,
            format!("{} trailing bytes after payload", actual - expected),
        ));
    }
    let mut floats = bytes[HEADER_LEN..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()));
    let codes: Vec<f64> = floats.by_ref().take((header.count * dim) as usize).collect();
    let confidences = header.has_confidences().then(|| floats.collect::<Vec<f64>>());

    LatentDataset::new(schema, header.dim as usize, codes, labels, confidences).map_err(|e| match e {
        Error::InvalidDataset(report) => Error::format(&bin_path, report.to_string()),
        other => other,
    })
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    write_atomic(path, text.as_bytes())
}

pub fn read_direction(path: &Path) -> Result<SemanticDirection> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    SemanticDirection::from_json(&text).map_err(|msg| Error::format(path, msg))
}

pub fn write_direction(direction: &SemanticDirection, path: &Path) -> Result<()> {
    write_text(path, &direction.to_json())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::LabelCombination;

    fn sample() -> LatentDataset {
        let labels = ["1010", "0111", "0000"]
            .iter()
            .map(|b| LabelCombination::parse(b).unwrap().index())
            .collect();
        LatentDataset::new(
            AttributeSchema::new(["glasses", "gender", "smile", "age"]).unwrap(),
            2,
            vec![0.1, -2.5, 1e-310, f64::MAX, -0.0, 3.0],
            labels,
            Some(vec![0.5; 12]),
        )
        .unwrap()
    }

    #[test]
    fn empty_dataset_is_header_only() {
        let dir = tempfile::tempdir().unwrap();
        let base = dir.path().join("empty");
        let ds = LatentDataset::empty(AttributeSchema::numbered(4).unwrap(), 512);
        write_dataset(&ds, &base).unwrap();
        assert_eq!(fs::read(latd_path(&base)).unwrap().len(), 24);
        assert_eq!(fs::read_to_string(labels_path(&base)).unwrap(), "attr0,attr1,attr2,attr3\n");
        assert_eq!(read_dataset(&base).unwrap(), ds);
    }

    #[test]
    fn header_layout_is_little_endian() {
        let bytes = encode_latd(&sample());
        assert_eq!(&bytes[0..4], b"LATD");
        assert_eq!(&bytes[4..8], &[1, 0, 0, 0]);
        assert_eq!(&bytes[8..12], &[2, 0, 0, 0]);
        assert_eq!(&bytes[12..20], &[3, 0, 0, 0, 0, 0, 0, 0]);
        assert_eq!(&bytes[20..24], &[1, 0, 0, 0]);
        assert_eq!(&bytes[24..32], &0.1f64.to_le_bytes());
        assert_eq!(bytes.len(), 24 + 8 * (6 + 12));
    }

    #[test]
    fn round_trip_preserves_bits() {
        let dir = tempfile::tempdir().unwrap();
        let base = dir.path().join("ds");
        let ds = sample();
        write_dataset(&ds, &base).unwrap();
        let back = read_dataset(&base).unwrap();
        let bits = |d: &LatentDataset| d.codes().iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&back), bits(&ds));
        assert_eq!(back, ds);
        assert_eq!(
            fs::read_to_string(labels_path(&base)).unwrap(),
            "glasses,gender,smile,age\n1,0,1,0\n0,1,1,1\n0,0,0,0\n"
        );
    }

    #[test]
    fn version_and_magic_errors() {
        let dir = tempfile::tempdir().unwrap();
        let base = dir.path().join("ds");
        write_dataset(&sample(), &base).unwrap();
        let mut bytes = fs::read(latd_path(&base)).unwrap();
        bytes[4] = 2;
        fs::write(latd_path(&base), &bytes).unwrap();
        assert!(matches!(read_dataset(&base), Err(Error::UnsupportedVersion { version: 2, .. })));
        bytes[4] = 1;
        bytes[0] = b'X';
        fs::write(latd_path(&base), &bytes).unwrap();
        assert!(matches!(read_dataset(&base), Err(Error::Format { .. })));
    }

    #[test]
    fn truncation_names_byte_counts() {
        let dir = tempfile::tempdir().unwrap();
        let base = dir.path().join("ds");
        write_dataset(&sample(), &base).unwrap();
        let bytes = fs::read(latd_path(&base)).unwrap();
        fs::write(latd_path(&base), &bytes[..bytes.len() - 5]).unwrap();
        let err = read_dataset(&base).unwrap_err();
        assert!(matches!(err, Error::Truncated { expected: 168, actual: 163, .. }), "{err}");
        assert!(err.to_string().contains("expected 168 bytes but found 163"));
    }

    #[test]
    fn csv_errors() {
        let dir = tempfile::tempdir().unwrap();
        let base = dir.path().join("ds");
        write_dataset(&sample(), &base).unwrap();
        fs::write(labels_path(&base), "glasses,gender,smile,age\n1,0,1,0\n0,1,1,1\n").unwrap();
        let err = read_dataset(&base).unwrap_err();
        assert!(err.to_string().contains("count mismatch"), "{err}");
        fs::write(labels_path(&base), "glasses,gender,smile,age\n1,0,1,0\n0,1,2,1\n0,0,0,0\n").unwrap();
        let err = read_dataset(&base).unwrap_err();
        assert!(err.to_string().contains("not 0 or 1"), "{err}");
    }

    #[test]
    fn schema_follows_csv_column_order() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("l.csv");
        fs::write(&path, "glasses,gender,smile,age\n0,1,0,1\n").unwrap();
        let (schema, labels) = read_labels(&path).unwrap();
        assert_eq!(schema.names(), &["glasses", "gender", "smile", "age"]);
        assert_eq!(labels, vec![0b1010]);
    }

    #[test]
    fn atomic_write_replaces() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.txt");
        write_text(&path, "one").unwrap();
        write_text(&path, "two").unwrap();
        assert_eq!(fs::read_to_string(&path).unwrap(), "two");
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}
