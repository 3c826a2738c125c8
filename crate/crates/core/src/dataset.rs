//! Attribute schema, label combinations and the labeled latent dataset.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Upper bound on the number of attributes; the contingency table is dense
/// over `2^m` cells.
pub const MAX_ATTRIBUTES: usize = 20;

/// Ordered, named binary attributes.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<String>", into = "Vec<String>")]
pub struct AttributeSchema {
    names: Vec<String>,
}

impl AttributeSchema {
    pub fn new<S: Into<String>>(names: impl IntoIterator<Item = S>) -> Result<Self> {
        let names: Vec<String> = names.into_iter().map(Into::into).collect();
        if names.is_empty() || names.len() > MAX_ATTRIBUTES {
            return Err(Error::InvalidSchema(format!(
                "expected between 1 and {MAX_ATTRIBUTES} attributes, got {}",
                names.len()
            )));
        }
        for (i, name) in names.iter().enumerate() {
            if name.trim().is_empty() {
                return Err(Error::InvalidSchema(format!("attribute {i} has an empty name")));
            }
            if names[..i].contains(name) {
                return Err(Error::InvalidSchema(format!("duplicate attribute name {name:?}")));
            }
        }
        Ok(AttributeSchema { names })
    }

    /// Schema with names `attr0, attr1, ...`.
    pub fn numbered(m: usize) -> Result<Self> {
        Self::new((0..m).map(|i| format!("attr{i}")))
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn name(&self, index: usize) -> Option<&str> {
        self.names.get(index).map(String::as_str)
    }

    pub fn position(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    /// Number of contingency cells, `2^m`.
    pub fn cells(&self) -> usize {
        1 << self.names.len()
    }

    pub fn check_index(&self, index: usize) -> Result<()> {
        if index < self.len() {
            Ok(())
        } else {
            Err(Error::AttributeOutOfRange {
                index,
                count: self.len(),
            })
        }
    }
}

impl TryFrom<Vec<String>> for AttributeSchema {
    type Error = Error;

    fn try_from(names: Vec<String>) -> Result<Self> {
        AttributeSchema::new(names)
    }
}

impl From<AttributeSchema> for Vec<String> {
    fn from(schema: AttributeSchema) -> Self {
        schema.names
    }
}

/// One joint assignment of the `m` binary attributes. Attribute 0 is the
/// least significant bit of `index`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LabelCombination {
    index: u32,
    m: u8,
}

impl LabelCombination {
    pub fn from_index(index: u32, m: usize) -> Self {
        debug_assert!(m <= MAX_ATTRIBUTES && (index as u64) < (1u64 << m));
        LabelCombination { index, m: m as u8 }
    }

    pub fn from_bits(bits: &[bool]) -> Self {
        debug_assert!(bits.len() <= MAX_ATTRIBUTES);
        let index = bits
            .iter()
            .enumerate()
            .fold(0u32, |acc, (k, &b)| acc | ((b as u32) << k));
        LabelCombination {
            index,
            m: bits.len() as u8,
        }
    }

    /// Parses an attribute-0-first string of `0`/`1` characters.
    pub fn parse(text: &str) -> Option<Self> {
        let bits = text
            .chars()
            .map(|c| match c {
                '0' => Some(false),
                '1' => Some(true),
                _ => None,
            })
            .collect::<Option<Vec<bool>>>()?;
        (bits.len() <= MAX_ATTRIBUTES).then(|| Self::from_bits(&bits))
    }

    pub fn index(self) -> u32 {
        self.index
    }

    pub fn m(self) -> usize {
        self.m as usize
    }

    pub fn bit(self, k: usize) -> bool {
        (self.index >> k) & 1 == 1
    }

    pub fn bits(self) -> Vec<bool> {
        (0..self.m()).map(|k| self.bit(k)).collect()
    }
}

impl fmt::Display for LabelCombination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for k in 0..self.m() {
            f.write_str(if self.bit(k) { "1" } else { "0" })?;
        }
        Ok(())
    }
}

/// `N` latent codes of dimension `dim`, each with an `m`-bit label and
/// optionally per-attribute confidences.
///
/// Codes are stored row-major in one buffer; labels are stored as
/// [`LabelCombination`] indices.
#[derive(Clone, Debug, PartialEq)]
pub struct LatentDataset {
    schema: AttributeSchema,
    dim: usize,
    codes: Vec<f64>,
    labels: Vec<u32>,
    confidences: Option<Vec<f64>>,
}

impl LatentDataset {
    /// Builds a dataset and rejects it if [`validate_dataset`] finds anything.
    pub fn new(
        schema: AttributeSchema,
        dim: usize,
        codes: Vec<f64>,
        labels: Vec<u32>,
        confidences: Option<Vec<f64>>,
    ) -> Result<Self> {
        let dataset = Self::from_parts_unchecked(schema, dim, codes, labels, confidences);
        let report = validate_dataset(&dataset);
        if report.is_ok() {
            Ok(dataset)
        } else {
            Err(Error::InvalidDataset(report))
        }
    }

    /// Assembles a dataset without validation. Accessors assume a valid
    /// dataset; call [`validate_dataset`] before using one built this way.
    pub fn from_parts_unchecked(
        schema: AttributeSchema,
        dim: usize,
        codes: Vec<f64>,
        labels: Vec<u32>,
        confidences: Option<Vec<f64>>,
    ) -> Self {
        LatentDataset {
            schema,
            dim,
            codes,
            labels,
            confidences,
        }
    }

    pub fn empty(schema: AttributeSchema, dim: usize) -> Self {
        Self::from_parts_unchecked(schema, dim, Vec::new(), Vec::new(), None)
    }

    pub fn schema(&self) -> &AttributeSchema {
        &self.schema
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn m(&self) -> usize {
        self.schema.len()
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn codes(&self) -> &[f64] {
        &self.codes
    }

    pub fn code(&self, row: usize) -> &[f64] {
        &self.codes[row * self.dim..(row + 1) * self.dim]
    }

    pub fn rows(&self, indices: &[usize]) -> Vec<&[f64]> {
        indices.iter().map(|&i| self.code(i)).collect()
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn label(&self, row: usize) -> LabelCombination {
        LabelCombination::from_index(self.labels[row], self.m())
    }

    pub fn confidences(&self) -> Option<&[f64]> {
        self.confidences.as_deref()
    }

    pub fn confidence_row(&self, row: usize) -> Option<&[f64]> {
        let m = self.m();
        self.confidences
            .as_deref()
            .map(|c| &c[row * m..(row + 1) * m])
    }

    /// New dataset holding `indices` in the given order; repeats allowed.
    pub fn subset(&self, indices: &[usize]) -> LatentDataset {
        let mut codes = Vec::with_capacity(indices.len() * self.dim);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            codes.extend_from_slice(self.code(i));
            labels.push(self.labels[i]);
        }
        let confidences = self.confidences.as_ref().map(|_| {
            indices
                .iter()
                .flat_map(|&i| self.confidence_row(i).unwrap().iter().copied())
                .collect()
        });
        Self::from_parts_unchecked(self.schema.clone(), self.dim, codes, labels, confidences)
    }

    /// Same labels, replaced codes.
    pub fn with_codes(&self, codes: Vec<f64>) -> Result<LatentDataset> {
        Self::new(
            self.schema.clone(),
            self.dim,
            codes,
            self.labels.clone(),
            self.confidences.clone(),
        )
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Violation {
    ZeroDimension,
    /// Code buffer length does not equal `labels * dim`.
    RowCountMismatch { codes: usize, labels: usize },
    ConfidenceCountMismatch { expected: usize, actual: usize },
    NonFiniteCode { row: usize, component: usize },
    LabelOutOfRange { row: usize, index: u32 },
    ConfidenceOutOfRange { row: usize, attribute: usize, value: f64 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::ZeroDimension => write!(f, "latent dimension is zero"),
            Violation::RowCountMismatch { codes, labels } => write!(
                f,
                "row-count mismatch: {codes} code values for {labels} label rows"
            ),
            Violation::ConfidenceCountMismatch { expected, actual } => write!(
                f,
                "confidence count mismatch: expected {expected} values, got {actual}"
            ),
            Violation::NonFiniteCode { row, component } => {
                write!(f, "row {row}: non-finite component {component}")
            }
            Violation::LabelOutOfRange { row, index } => {
                write!(f, "row {row}: label index {index} exceeds the cell count")
            }
            Violation::ConfidenceOutOfRange {
                row,
                attribute,
                value,
            } => write!(
                f,
                "row {row}: confidence {value} for attribute {attribute} outside [0, 1]"
            ),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_ok() {
            return f.write_str("ok");
        }
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                f.write_str("; ")?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

/// Lists every invariant violation of `dataset`.
pub fn validate_dataset(dataset: &LatentDataset) -> ValidationReport {
    let mut violations = Vec::new();
    let dim = dataset.dim;
    let n = dataset.labels.len();
    let m = dataset.m();

    if dim == 0 {
        violations.push(Violation::ZeroDimension);
    }
    let shape_ok = dim > 0 && dataset.codes.len() == n * dim;
    if dim > 0 && !shape_ok {
        violations.push(Violation::RowCountMismatch {
            codes: dataset.codes.len(),
            labels: n,
        });
    }
    if shape_ok {
        for (row, code) in dataset.codes.chunks_exact(dim).enumerate() {
            if let Some(component) = code.iter().position(|x| !x.is_finite()) {
                violations.push(Violation::NonFiniteCode { row, component });
            }
        }
    }
    let cells = 1u64 << m;
    for (row, &index) in dataset.labels.iter().enumerate() {
        if index as u64 >= cells {
            violations.push(Violation::LabelOutOfRange { row, index });
        }
    }
    if let Some(conf) = &dataset.confidences {
        if conf.len() != n * m {
            violations.push(Violation::ConfidenceCountMismatch {
                expected: n * m,
                actual: conf.len(),
            });
        } else {
            for (i, &value) in conf.iter().enumerate() {
                if !(0.0..=1.0).contains(&value) {
                    violations.push(Violation::ConfidenceOutOfRange {
                        row: i / m,
                        attribute: i % m,
                        value,
                    });
                }
            }
        }
    }
    ValidationReport { violations }
}

/// Keeps the rows whose confidence reaches `threshold` for every attribute.
pub fn filter_by_confidence(dataset: &LatentDataset, threshold: f64) -> Result<LatentDataset> {
    if !(0.0..=1.0).contains(&threshold) {
        return Err(Error::InvalidParameter(format!(
            "confidence threshold {threshold} outside [0, 1]"
        )));
    }
    if dataset.confidences.is_none() {
        return Err(Error::MissingConfidences);
    }
    let keep: Vec<usize> = (0..dataset.len())
        .filter(|&row| {
            dataset
                .confidence_row(row)
                .unwrap()
                .iter()
                .all(|&c| c >= threshold)
        })
        .collect();
    Ok(dataset.subset(&keep))
}

/// Row indices with attribute `j` set and unset, each in dataset order.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct AttributeSplit {
    pub positive: Vec<usize>,
    pub negative: Vec<usize>,
}

pub fn split_by_attribute(dataset: &LatentDataset, j: usize) -> Result<AttributeSplit> {
    split_rows(dataset, 0..dataset.len(), j)
}

/// Like [`split_by_attribute`] restricted to `rows` (repeats are kept).
pub fn split_rows(
    dataset: &LatentDataset,
    rows: impl IntoIterator<Item = usize>,
    j: usize,
) -> Result<AttributeSplit> {
    dataset.schema.check_index(j)?;
    let mut split = AttributeSplit::default();
    for row in rows {
        if (dataset.labels[row] >> j) & 1 == 1 {
            split.positive.push(row);
        } else {
            split.negative.push(row);
        }
    }
    Ok(split)
}
