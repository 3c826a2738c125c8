//! Semantic directions: estimation, conditional projection and editing.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::svm::{dot, train_svm, SvmParams};

const UNIT_TOL: f64 = 1e-12;
const DEGENERATE_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DirectionMethod {
    Centroid,
    Svm,
    Conditional,
}

impl std::fmt::Display for DirectionMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            DirectionMethod::Centroid => "centroid",
            DirectionMethod::Svm => "svm",
            DirectionMethod::Conditional => "conditional",
        })
    }
}

/// Unit vector in latent space controlling one attribute.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SemanticDirection {
    pub attribute: usize,
    pub method: DirectionMethod,
    vector: Vec<f64>,
    pub meta: BTreeMap<String, Value>,
}

impl SemanticDirection {
    /// Normalizes `vector`; fails if its norm is below `1e-12`.
    pub fn new(attribute: usize, method: DirectionMethod, vector: Vec<f64>) -> Result<Self> {
        let mut vector = vector;
        let norm = normalize(&mut vector);
        if !(norm >= UNIT_TOL) {
            return Err(Error::ZeroDifference(norm));
        }
        Ok(SemanticDirection {
            attribute,
            method,
            vector,
            meta: BTreeMap::new(),
        })
    }

    pub fn vector(&self) -> &[f64] {
        &self.vector
    }

    pub fn dim(&self) -> usize {
        self.vector.len()
    }

    pub fn with_meta(mut self, key: &str, value: impl Into<Value>) -> Self {
        self.meta.insert(key.to_string(), value.into());
        self
    }

    pub fn cosine(&self, other: &SemanticDirection) -> f64 {
        dot(&self.vector, &other.vector)
    }
}

/// Normalizes in place and returns the original norm.
fn normalize(v: &mut [f64]) -> f64 {
    let norm = dot(v, v).sqrt();
    if norm > 0.0 && norm.is_finite() {
        v.iter_mut().for_each(|x| *x /= norm);
        // one more pass pins the norm to 1 within a few ulps
        let again = dot(v, v).sqrt();
        v.iter_mut().for_each(|x| *x /= again);
    }
    norm
}

fn common_dim(sets: &[&[&[f64]]]) -> Result<usize> {
    let dim = sets
        .iter()
        .find_map(|s| s.first())
        .map(|x| x.len())
        .unwrap_or(0);
    for set in sets {
        if let Some(bad) = set.iter().find(|x| x.len() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: bad.len(),
            });
        }
    }
    Ok(dim)
}

pub fn mean(rows: &[&[f64]], dim: usize) -> Vec<f64> {
    let mut acc = vec![0.0; dim];
    for row in rows {
        for (a, x) in acc.iter_mut().zip(row.iter()) {
            *a += x;
        }
    }
    let n = rows.len() as f64;
    acc.iter_mut().for_each(|a| *a /= n);
    acc
}

/// Normalized difference of the positive and negative class means.
pub fn centroid_direction(pos: &[&[f64]], neg: &[&[f64]], attribute: usize) -> Result<SemanticDirection> {
    if pos.is_empty() {
        return Err(Error::EmptyClass("positive"));
    }
    if neg.is_empty() {
        return Err(Error::EmptyClass("negative"));
    }
    let dim = common_dim(&[pos, neg])?;
    let mp = mean(pos, dim);
    let mn = mean(neg, dim);
    let diff: Vec<f64> = mp.iter().zip(&mn).map(|(a, b)| a - b).collect();
    let raw_norm = dot(&diff, &diff).sqrt();
    let dir = SemanticDirection::new(attribute, DirectionMethod::Centroid, diff)
        .map_err(|_| Error::ZeroDifference(raw_norm))?;
    Ok(dir
        .with_meta("n_pos", pos.len())
        .with_meta("n_neg", neg.len())
        .with_meta("raw_norm", raw_norm))
}

/// Unit normal of a linear SVM boundary, oriented so the positive class mean
/// projects at least as high as the negative one.
pub fn svm_direction(
    pos: &[&[f64]],
    neg: &[&[f64]],
    attribute: usize,
    params: &SvmParams,
) -> Result<SemanticDirection> {
    let model = train_svm(pos, neg, params)?;
    let norm = model.weight_norm();
    if !(norm >= UNIT_TOL) {
        return Err(Error::ZeroWeight(norm));
    }
    let dim = model.weights.len();
    let mp = mean(pos, dim);
    let mn = mean(neg, dim);
    let mut vector = model.weights.clone();
    if dot(&mp, &vector) < dot(&mn, &vector) {
        vector.iter_mut().for_each(|x| *x = -*x);
    }
    let dir = SemanticDirection::new(attribute, DirectionMethod::Svm, vector)?;
    Ok(dir
        .with_meta("c", params.c)
        .with_meta("tol", params.tol)
        .with_meta("seed", params.seed)
        .with_meta("duality_gap", model.duality_gap)
        .with_meta("iterations", model.iterations)
        .with_meta("converged", model.converged)
        .with_meta("bias", model.bias)
        .with_meta("n_pos", pos.len())
        .with_meta("n_neg", neg.len()))
}

/// Orthonormal basis of `span(vectors)` by modified Gram-Schmidt with one
/// re-orthogonalization pass. Vectors whose residual falls below `drop_tol`
/// relative to their norm are dropped.
pub fn orthonormal_basis(vectors: &[&[f64]], drop_tol: f64) -> Vec<Vec<f64>> {
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(vectors.len());
    for v in vectors {
        let scale = dot(v, v).sqrt();
        let mut r = v.to_vec();
        for _ in 0..2 {
            for q in &basis {
                let p = dot(q, &r);
                r.iter_mut().zip(q).for_each(|(x, qk)| *x -= p * qk);
            }
        }
        let norm = dot(&r, &r).sqrt();
        if scale > 0.0 && norm > drop_tol * scale {
            r.iter_mut().for_each(|x| *x /= norm);
            basis.push(r);
        }
    }
    basis
}

/// Removes from `target` its component in the span of `others`.
pub fn conditional_project(
    target: &SemanticDirection,
    others: &[SemanticDirection],
) -> Result<SemanticDirection> {
    if others.is_empty() {
        return Err(Error::InvalidParameter("conditional projection needs at least one other direction".into()));
    }
    let dim = target.dim();
    if let Some(bad) = others.iter().find(|o| o.dim() != dim) {
        return Err(Error::DimensionMismatch {
            expected: dim,
            actual: bad.dim(),
        });
    }
    let rows: Vec<&[f64]> = others.iter().map(|o| o.vector()).collect();
    let basis = orthonormal_basis(&rows, 1e-12);
    let mut r = target.vector().to_vec();
    for _ in 0..2 {
        for q in &basis {
            let p = dot(q, &r);
            r.iter_mut().zip(q).for_each(|(x, qk)| *x -= p * qk);
        }
    }
    let residual = dot(&r, &r).sqrt();
    if residual < DEGENERATE_TOL {
        return Err(Error::DegenerateProjection(residual));
    }
    let parents: Vec<usize> = others.iter().map(|o| o.attribute).collect();
    let mut dir = SemanticDirection::new(target.attribute, DirectionMethod::Conditional, r)?;
    dir.meta = target.meta.clone();
    Ok(dir
        .with_meta("parent_method", target.method.to_string())
        .with_meta("conditioned_on", parents)
        .with_meta("residual_norm", residual))
}

/// `z + alpha * u`.
pub fn edit_latent(z: &[f64], direction: &SemanticDirection, alpha: f64) -> Result<Vec<f64>> {
    if z.len() != direction.dim() {
        return Err(Error::DimensionMismatch {
            expected: direction.dim(),
            actual: z.len(),
        });
    }
    Ok(z.iter()
        .zip(direction.vector())
        .map(|(x, u)| x + alpha * u)
        .collect())
}

/// Pairwise cosines; row-major `k x k`.
pub fn cosine_matrix(directions: &[SemanticDirection]) -> Result<Vec<Vec<f64>>> {
    if let Some(first) = directions.first() {
        if let Some(bad) = directions.iter().find(|d| d.dim() != first.dim()) {
            return Err(Error::DimensionMismatch {
                expected: first.dim(),
                actual: bad.dim(),
            });
        }
    }
    let k = directions.len();
    let mut out = vec![vec![0.0; k]; k];
    for i in 0..k {
        for j in i..k {
            let c = directions[i].cosine(&directions[j]);
            out[i][j] = c;
            out[j][i] = c;
        }
    }
    Ok(out)
}

pub const DIRECTION_SCHEMA_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct DirectionFile {
    schema_version: u32,
    attribute: usize,
    method: DirectionMethod,
    dim: usize,
    vector: Vec<f64>,
    meta: BTreeMap<String, Value>,
}

impl SemanticDirection {
    pub fn to_json(&self) -> String {
        let file = DirectionFile {
            schema_version: DIRECTION_SCHEMA_VERSION,
            attribute: self.attribute,
            method: self.method,
            dim: self.dim(),
            vector: self.vector.clone(),
            meta: self.meta.clone(),
        };
        serde_json::to_string_pretty(&file).expect("direction serializes")
    }

    pub fn from_json(text: &str) -> std::result::Result<Self, String> {
        let file: DirectionFile = serde_json::from_str(text).map_err(|e| e.to_string())?;
        if file.schema_version != DIRECTION_SCHEMA_VERSION {
            return Err(format!("unsupported direction schema_version {}", file.schema_version));
        }
        if file.vector.len() != file.dim {
            return Err(format!("dim {} but vector has {} entries", file.dim, file.vector.len()));
        }
        let norm = dot(&file.vector, &file.vector).sqrt();
        if (norm - 1.0).abs() > 1e-9 {
            return Err(format!("direction vector is not unit length (norm {norm})"));
        }
        Ok(SemanticDirection {
            attribute: file.attribute,
            method: file.method,
            vector: file.vector,
            meta: file.meta,
        })
    }
}
