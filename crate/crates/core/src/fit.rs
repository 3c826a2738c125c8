//! Subsample-then-fit pipeline shared by the CLI and the sweeps.

use serde::{Deserialize, Serialize};

use crate::contingency::ContingencyTable;
use crate::dataset::{split_rows, LatentDataset};
use crate::directions::{centroid_direction, svm_direction, SemanticDirection};
use crate::error::Result;
use crate::sampler::{balanced_subsample, uniform_subsample, ExhaustionPolicy, SamplePlan, SubsampleResult};
use crate::svm::SvmParams;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sampling {
    Uniform,
    Balanced(ExhaustionPolicy),
}

impl std::fmt::Display for Sampling {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Sampling::Uniform => f.write_str("uniform"),
            Sampling::Balanced(p) => write!(f, "balanced-{p}"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum FitMethod {
    Centroid,
    Svm(SvmParams),
}

impl std::fmt::Display for FitMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            FitMethod::Centroid => f.write_str("centroid"),
            FitMethod::Svm(p) => write!(f, "svm(C={})", p.c),
        }
    }
}

pub fn draw_subsample(
    dataset: &LatentDataset,
    table: &ContingencyTable,
    sampling: Sampling,
    n0: usize,
    seed: u64,
) -> Result<SubsampleResult> {
    match sampling {
        Sampling::Uniform => uniform_subsample(dataset, n0, seed),
        Sampling::Balanced(policy) => {
            let plan = SamplePlan::new(n0, policy, seed)?;
            Ok(balanced_subsample(dataset, table, &plan))
        }
    }
}

/// Fits one direction per attribute on `rows` (repeats allowed) of `dataset`.
pub fn fit_directions(
    dataset: &LatentDataset,
    rows: &[usize],
    method: &FitMethod,
) -> Result<Vec<SemanticDirection>> {
    (0..dataset.m())
        .map(|j| fit_attribute(dataset, rows, j, method))
        .collect()
}

pub fn fit_attribute(
    dataset: &LatentDataset,
    rows: &[usize],
    j: usize,
    method: &FitMethod,
) -> Result<SemanticDirection> {
    let split = split_rows(dataset, rows.iter().copied(), j)?;
    let pos = dataset.rows(&split.positive);
    let neg = dataset.rows(&split.negative);
    let dir = match method {
        FitMethod::Centroid => centroid_direction(&pos, &neg, j)?,
        FitMethod::Svm(params) => svm_direction(&pos, &neg, j, params)?,
    };
    Ok(match dataset.schema().name(j) {
        Some(name) => dir.with_meta("attribute_name", name),
        None => dir,
    })
}
