//! Re-scoring, effect and entanglement, and the experiment sweeps.
//!
//! Re-scoring entry `(j, k)` is the mean change of attribute score `k` when
//! every evaluation code is moved by `alpha` along direction `j`, measured as
//! edited minus original so that a direction which turns its attribute on has
//! a positive diagonal.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::contingency::build_contingency;
use crate::dataset::LatentDataset;
use crate::directions::SemanticDirection;
use crate::error::{Error, Result};
use crate::fit::{draw_subsample, fit_directions, FitMethod, Sampling};
use crate::oracle::gaussian_codes;
use crate::rng::derive_seed;
use crate::sampler::ExhaustionPolicy;
use crate::svm::{dot, SvmParams};

/// Per-attribute scores of a latent code.
pub trait AttributeScorer: Sync {
    fn dim(&self) -> usize;
    fn attributes(&self) -> usize;
    fn score_into(&self, z: &[f64], out: &mut [f64]);
}

pub const EDITED_MINUS_ORIGINAL: &str = "edited_minus_original";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RescoreMatrix {
    /// One row per direction, one column per measured attribute.
    pub values: Vec<Vec<f64>>,
    pub alpha: f64,
    pub n: usize,
    pub convention: String,
    /// Target attribute of each row's direction.
    pub row_attributes: Vec<usize>,
    pub attribute_names: Vec<String>,
}

impl RescoreMatrix {
    /// Wraps a square table whose row `j` is the direction for attribute `j`.
    pub fn from_values(values: Vec<Vec<f64>>) -> Self {
        let m = values.len();
        RescoreMatrix {
            values,
            alpha: f64::NAN,
            n: 0,
            convention: EDITED_MINUS_ORIGINAL.to_string(),
            row_attributes: (0..m).collect(),
            attribute_names: (0..m).map(|k| format!("attr{k}")).collect(),
        }
    }

    pub fn with_names(mut self, names: &[String]) -> Self {
        if names.len() == self.attributes() {
            self.attribute_names = names.to_vec();
        }
        self
    }

    pub fn rows(&self) -> usize {
        self.values.len()
    }

    pub fn attributes(&self) -> usize {
        self.values.first().map_or(0, Vec::len)
    }

    fn row_label(&self, row: usize) -> &str {
        &self.attribute_names[self.row_attributes[row]]
    }

    /// Long format `direction,attribute,value`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("direction,attribute,value\n");
        for (j, row) in self.values.iter().enumerate() {
            for (k, v) in row.iter().enumerate() {
                out.push_str(&format!("{},{},{v}\n", self.row_label(j), self.attribute_names[k]));
            }
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("matrix serializes")
    }
}

pub fn rescore(
    scorer: &dyn AttributeScorer,
    directions: &[SemanticDirection],
    latents: &[f64],
    alpha: f64,
) -> Result<RescoreMatrix> {
    let d = scorer.dim();
    let m = scorer.attributes();
    if !latents.len().is_multiple_of(d) {
        return Err(Error::DimensionMismatch {
            expected: d,
            actual: latents.len() % d,
        });
    }
    let n = latents.len() / d;
    if n == 0 {
        return Err(Error::EmptyLatents);
    }
    if let Some(bad) = directions.iter().find(|u| u.dim() != d) {
        return Err(Error::DimensionMismatch {
            expected: d,
            actual: bad.dim(),
        });
    }

    let mut base = vec![0.0; n * m];
    for (z, out) in latents.chunks_exact(d).zip(base.chunks_exact_mut(m)) {
        scorer.score_into(z, out);
    }
    let values = directions
        .iter()
        .map(|u| {
            let mut sums = vec![0.0; m];
            let mut moved = vec![0.0; d];
            let mut edited = vec![0.0; m];
            for (z, before) in latents.chunks_exact(d).zip(base.chunks_exact(m)) {
                for ((e, x), uk) in moved.iter_mut().zip(z).zip(u.vector()) {
                    *e = x + alpha * uk;
                }
                scorer.score_into(&moved, &mut edited);
                for ((s, a), b) in sums.iter_mut().zip(&edited).zip(before) {
                    *s += a - b;
                }
            }
            sums.iter().map(|s| s / n as f64).collect()
        })
        .collect();
    Ok(RescoreMatrix {
        values,
        alpha,
        n,
        convention: EDITED_MINUS_ORIGINAL.to_string(),
        row_attributes: directions.iter().map(|u| u.attribute).collect(),
        attribute_names: (0..m).map(|k| format!("attr{k}")).collect(),
    })
}

/// Score change on the direction's own attribute.
pub fn effect(matrix: &RescoreMatrix, row: usize) -> Result<f64> {
    let target = *matrix.row_attributes.get(row).ok_or(Error::AttributeOutOfRange {
        index: row,
        count: matrix.rows(),
    })?;
    matrix.values[row]
        .get(target)
        .copied()
        .ok_or(Error::AttributeOutOfRange {
            index: target,
            count: matrix.attributes(),
        })
}

/// Mean absolute score change over the non-target attributes.
pub fn overall_entanglement(matrix: &RescoreMatrix, row: usize) -> Result<f64> {
    let target = *matrix.row_attributes.get(row).ok_or(Error::AttributeOutOfRange {
        index: row,
        count: matrix.rows(),
    })?;
    entanglement_of_row(&matrix.values[row], target)
}

pub fn entanglement_of_row(row: &[f64], target: usize) -> Result<f64> {
    let m = row.len();
    if m < 2 {
        return Err(Error::InvalidParameter("entanglement needs at least two attributes".into()));
    }
    if target >= m {
        return Err(Error::AttributeOutOfRange { index: target, count: m });
    }
    let total: f64 = row
        .iter()
        .enumerate()
        .filter(|&(k, _)| k != target)
        .map(|(_, v)| v.abs())
        .sum();
    Ok(total / (m - 1) as f64)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimilarityStats {
    pub mean: f64,
    pub std: f64,
    pub n: usize,
}

/// Cosine similarity between paired embeddings; `std` is the population
/// standard deviation.
pub fn embedding_similarity(before: &[&[f64]], after: &[&[f64]]) -> Result<SimilarityStats> {
    if before.len() != after.len() {
        return Err(Error::InvalidParameter(format!(
            "{} embeddings before editing but {} after",
            before.len(),
            after.len()
        )));
    }
    if before.is_empty() {
        return Err(Error::EmptyLatents);
    }
    let dim = before[0].len();
    let mut cosines = Vec::with_capacity(before.len());
    for (i, (a, b)) in before.iter().zip(after).enumerate() {
        for v in [a, b] {
            if v.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    actual: v.len(),
                });
            }
        }
        let (na, nb) = (dot(a, a).sqrt(), dot(b, b).sqrt());
        if na == 0.0 || nb == 0.0 {
            return Err(Error::ZeroNorm(i));
        }
        cosines.push(dot(a, b) / (na * nb));
    }
    let (mean, std) = mean_std(&cosines, false);
    Ok(SimilarityStats {
        mean,
        std,
        n: cosines.len(),
    })
}

fn mean_std(xs: &[f64], sample: bool) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    let denom = if sample { n.saturating_sub(1) } else { n };
    let std = if denom == 0 {
        0.0
    } else {
        (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / denom as f64).sqrt()
    };
    (mean, std)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalSettings {
    pub alpha: f64,
    /// Fresh standard Gaussian codes per run.
    pub n: usize,
}

impl Default for EvalSettings {
    fn default() -> Self {
        EvalSettings { alpha: 0.2, n: 2000 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    /// `N0` for sample-size sweeps, `C` for regularization sweeps (0 marks
    /// the centroid, the small-C limit).
    pub parameter: f64,
    pub sampling: String,
    pub method: String,
    pub attribute: usize,
    pub attribute_name: String,
    pub effect: f64,
    pub entanglement: f64,
    pub effect_std: f64,
    pub entanglement_std: f64,
    /// Runs that produced a value.
    pub runs: usize,
    pub error: Option<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
}

pub const SWEEP_CSV_HEADER: &str =
    "parameter,sampling,method,attribute,effect,entanglement,effect_std,entanglement_std,runs,error";

impl SweepReport {
    pub fn to_csv(&self) -> String {
        let mut out = format!("{SWEEP_CSV_HEADER}\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{}\n",
                r.parameter,
                r.sampling,
                r.method,
                r.attribute_name,
                r.effect,
                r.entanglement,
                r.effect_std,
                r.entanglement_std,
                r.runs,
                r.error.as_deref().unwrap_or("").replace([',', '\n'], ";"),
            ));
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn find(&self, parameter: f64, sampling: &str, method: &str, attribute: usize) -> Option<&SweepRow> {
        self.rows.iter().find(|r| {
            r.parameter == parameter && r.sampling == sampling && r.method == method && r.attribute == attribute
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleSizeSweep {
    pub sizes: Vec<usize>,
    pub methods: Vec<FitMethod>,
    pub samplings: Vec<Sampling>,
    pub runs: usize,
    pub seed: u64,
    pub eval: EvalSettings,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegularizationSweep {
    pub c_values: Vec<f64>,
    pub n0: usize,
    pub policy: ExhaustionPolicy,
    pub runs: usize,
    pub seed: u64,
    /// Tolerance, iteration cap and seed of the SVM; `c` is overridden.
    pub svm: SvmParams,
    pub eval: EvalSettings,
}

const SAMPLE_TAG: u64 = 1;
const EVAL_TAG: u64 = 2;

/// Per-run evaluation codes, shared by every grid point of a sweep.
pub fn eval_codes(dim: usize, settings: &EvalSettings, seed: u64, run: usize) -> Vec<f64> {
    gaussian_codes(dim, settings.n, derive_seed(seed, &[EVAL_TAG, run as u64]))
}

type RunOutcome = std::result::Result<Vec<(f64, f64)>, String>;

fn evaluate(
    scorer: &dyn AttributeScorer,
    directions: Result<Vec<SemanticDirection>>,
    latents: &[f64],
    alpha: f64,
) -> RunOutcome {
    let run = || -> Result<Vec<(f64, f64)>> {
        let matrix = rescore(scorer, &directions?, latents, alpha)?;
        (0..matrix.rows())
            .map(|j| Ok((effect(&matrix, j)?, overall_entanglement(&matrix, j)?)))
            .collect()
    };
    run().map_err(|e| e.to_string())
}

fn aggregate(
    dataset: &LatentDataset,
    parameter: f64,
    sampling: String,
    method: String,
    outcomes: &[&RunOutcome],
) -> Vec<SweepRow> {
    let ok: Vec<&Vec<(f64, f64)>> = outcomes.iter().filter_map(|o| o.as_ref().ok()).collect();
    let error = outcomes
        .iter()
        .find_map(|o| o.as_ref().err())
        .cloned();
    (0..dataset.m())
        .map(|k| {
            let effects: Vec<f64> = ok.iter().map(|r| r[k].0).collect();
            let tangles: Vec<f64> = ok.iter().map(|r| r[k].1).collect();
            let (effect, effect_std) = mean_std(&effects, true);
            let (entanglement, entanglement_std) = mean_std(&tangles, true);
            SweepRow {
                parameter,
                sampling: sampling.clone(),
                method: method.clone(),
                attribute: k,
                attribute_name: dataset.schema().name(k).unwrap_or_default().to_string(),
                effect,
                entanglement,
                effect_std,
                entanglement_std,
                runs: ok.len(),
                error: error.clone(),
            }
        })
        .collect()
}

fn check_scorer(dataset: &LatentDataset, scorer: &dyn AttributeScorer, runs: usize) -> Result<()> {
    if scorer.dim() != dataset.dim() {
        return Err(Error::DimensionMismatch {
            expected: dataset.dim(),
            actual: scorer.dim(),
        });
    }
    if scorer.attributes() != dataset.m() {
        return Err(Error::InvalidParameter(format!(
            "scorer rates {} attributes but the dataset has {}",
            scorer.attributes(),
            dataset.m()
        )));
    }
    if runs == 0 {
        return Err(Error::InvalidParameter("runs must be at least 1".into()));
    }
    Ok(())
}

/// Effect and entanglement as a function of the subsample size.
///
/// For each run a subsample is drawn per (size, sampling); every method is
/// fitted on that same subsample and evaluated on the run's shared codes.
/// Failures are recorded on the affected rows.
pub fn sweep_sample_size(
    dataset: &LatentDataset,
    scorer: &dyn AttributeScorer,
    config: &SampleSizeSweep,
) -> Result<SweepReport> {
    check_scorer(dataset, scorer, config.runs)?;
    if config.sizes.is_empty() || config.methods.is_empty() || config.samplings.is_empty() {
        return Err(Error::InvalidParameter("sweep grid is empty".into()));
    }
    let table = build_contingency(dataset);
    let latents: Vec<Vec<f64>> = (0..config.runs)
        .map(|run| eval_codes(dataset.dim(), &config.eval, config.seed, run))
        .collect();

    let tasks: Vec<(usize, usize, usize)> = (0..config.sizes.len())
        .flat_map(|s| (0..config.samplings.len()).flat_map(move |p| (0..config.runs).map(move |r| (s, p, r))))
        .collect();
    // outcome[task][method]
    let outcomes: Vec<Vec<RunOutcome>> = tasks
        .par_iter()
        .map(|&(s, p, run)| {
            let n0 = config.sizes[s];
            let seed = derive_seed(config.seed, &[SAMPLE_TAG, n0 as u64, run as u64]);
            let sample = draw_subsample(dataset, &table, config.samplings[p], n0, seed);
            config
                .methods
                .iter()
                .map(|method| {
                    let sample = sample.as_ref().map_err(|e| e.to_string())?;
                    let dirs = fit_directions(dataset, &sample.indices, method);
                    evaluate(scorer, dirs, &latents[run], config.eval.alpha)
                })
                .collect()
        })
        .collect();

    let mut rows = Vec::new();
    for (s, &n0) in config.sizes.iter().enumerate() {
        for (p, sampling) in config.samplings.iter().enumerate() {
            for (mi, method) in config.methods.iter().enumerate() {
                let runs: Vec<&RunOutcome> = tasks
                    .iter()
                    .zip(&outcomes)
                    .filter(|((ts, tp, _), _)| *ts == s && *tp == p)
                    .map(|(_, o)| &o[mi])
                    .collect();
                rows.extend(aggregate(dataset, n0 as f64, sampling.to_string(), method.to_string(), &runs));
            }
        }
    }
    Ok(SweepReport { rows })
}

/// Balanced-sample SVM directions across a grid of `C`, plus centroid rows
/// (parameter 0) fitted on the same subsamples.
pub fn sweep_regularization(
    dataset: &LatentDataset,
    scorer: &dyn AttributeScorer,
    config: &RegularizationSweep,
) -> Result<SweepReport> {
    check_scorer(dataset, scorer, config.runs)?;
    if config.c_values.is_empty() {
        return Err(Error::InvalidParameter("C grid is empty".into()));
    }
    if let Some(c) = config.c_values.iter().find(|c| !(**c > 0.0)) {
        return Err(Error::InvalidParameter(format!("C must be positive, got {c}")));
    }
    let table = build_contingency(dataset);
    let sampling = Sampling::Balanced(config.policy);
    let methods: Vec<FitMethod> = config
        .c_values
        .iter()
        .map(|&c| FitMethod::Svm(SvmParams { c, ..config.svm }))
        .chain(std::iter::once(FitMethod::Centroid))
        .collect();

    let outcomes: Vec<Vec<RunOutcome>> = (0..config.runs)
        .into_par_iter()
        .map(|run| {
            let latents = eval_codes(dataset.dim(), &config.eval, config.seed, run);
            let seed = derive_seed(config.seed, &[SAMPLE_TAG, config.n0 as u64, run as u64]);
            let sample = draw_subsample(dataset, &table, sampling, config.n0, seed);
            methods
                .par_iter()
                .map(|method| {
                    let sample = sample.as_ref().map_err(|e| e.to_string())?;
                    let dirs = fit_directions(dataset, &sample.indices, method);
                    evaluate(scorer, dirs, &latents, config.eval.alpha)
                })
                .collect()
        })
        .collect();

    let mut rows = Vec::new();
    for (mi, method) in methods.iter().enumerate() {
        let parameter = match method {
            FitMethod::Svm(p) => p.c,
            FitMethod::Centroid => 0.0,
        };
        let runs: Vec<&RunOutcome> = outcomes.iter().map(|o| &o[mi]).collect();
        let label = match method {
            FitMethod::Svm(_) => "svm".to_string(),
            FitMethod::Centroid => "centroid".to_string(),
        };
        rows.extend(aggregate(dataset, parameter, sampling.to_string(), label, &runs));
    }
    Ok(SweepReport { rows })
}
