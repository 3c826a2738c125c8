//! Synthetic linear attribute world.
//!
//! Stands in for a generator plus attribute classifiers: latent codes are
//! standard Gaussian in `R^d`, attribute `k` is on when `<v_k, z> > b_k`, and
//! its score is `logistic(kappa * (<v_k, z> - b_k))`. Correlation between
//! attributes comes from the pairwise cosines of the `v_k`, which are built to
//! match a requested Gram matrix.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::dataset::{AttributeSchema, LatentDataset};
use crate::directions::orthonormal_basis;
use crate::error::{Error, Result};
use crate::eval::AttributeScorer;
use crate::rng::{normal_quantile, Stream};
use crate::svm::dot;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WorldConfig {
    pub dim: usize,
    pub names: AttributeSchema,
    /// Requested `m x m` Gram matrix of the attribute vectors, row-major.
    pub gram: Vec<Vec<f64>>,
    pub positive_rates: Vec<f64>,
    pub sharpness: f64,
    pub seed: u64,
}

impl WorldConfig {
    /// `d = 64`, four attributes with cosine 0.6 inside the pairs (0, 1) and
    /// (2, 3), positive rates (0.5, 0.3, 0.5, 0.2), `kappa = 1`.
    pub fn reference(seed: u64) -> Self {
        let mut gram = identity(4);
        gram[0][1] = 0.6;
        gram[1][0] = 0.6;
        gram[2][3] = 0.6;
        gram[3][2] = 0.6;
        WorldConfig {
            dim: 64,
            names: AttributeSchema::new(["glasses", "gender", "smile", "age"]).unwrap(),
            gram,
            positive_rates: vec![0.5, 0.3, 0.5, 0.2],
            sharpness: 1.0,
            seed,
        }
    }

    /// Same as [`WorldConfig::reference`] with mutually orthogonal vectors.
    pub fn reference_orthogonal(seed: u64) -> Self {
        WorldConfig {
            gram: identity(4),
            ..Self::reference(seed)
        }
    }
}

pub fn identity(m: usize) -> Vec<Vec<f64>> {
    (0..m)
        .map(|i| (0..m).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearAttributeWorld {
    pub config: WorldConfig,
    /// Unit attribute vectors, one per attribute.
    pub vectors: Vec<Vec<f64>>,
    pub biases: Vec<f64>,
}

pub fn make_world(config: WorldConfig) -> Result<LinearAttributeWorld> {
    let m = config.names.len();
    let d = config.dim;
    if d < m {
        return Err(Error::InvalidParameter(format!("dim {d} is smaller than attribute count {m}")));
    }
    if config.gram.len() != m || config.gram.iter().any(|r| r.len() != m) {
        return Err(Error::InvalidParameter(format!("gram must be {m}x{m}")));
    }
    if config.positive_rates.len() != m {
        return Err(Error::InvalidParameter(format!("need {m} positive rates")));
    }
    if let Some(r) = config.positive_rates.iter().find(|r| !(**r > 0.0 && **r < 1.0)) {
        return Err(Error::InvalidParameter(format!("positive rate {r} outside (0, 1)")));
    }
    if !(config.sharpness > 0.0 && config.sharpness.is_finite()) {
        return Err(Error::InvalidParameter(format!("sharpness must be positive, got {}", config.sharpness)));
    }
    for i in 0..m {
        if (config.gram[i][i] - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParameter(format!("gram diagonal entry {i} is not 1")));
        }
        for j in 0..i {
            if (config.gram[i][j] - config.gram[j][i]).abs() > 1e-12 {
                return Err(Error::InvalidParameter(format!("gram is not symmetric at ({i}, {j})")));
            }
        }
    }

    let g = DMatrix::from_fn(m, m, |i, j| config.gram[i][j]);
    let eigen = SymmetricEigen::new(g);
    let smallest = eigen.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    if smallest < -1e-10 {
        return Err(Error::NotPsd(smallest));
    }
    let root_values = eigen.eigenvalues.map(|l| l.max(0.0).sqrt());
    let root = &eigen.eigenvectors * DMatrix::from_diagonal(&root_values) * eigen.eigenvectors.transpose();

    // Random orthonormal frame of m directions in R^d. Stream 1 keeps it
    // independent of codes sampled with the same seed.
    let mut stream = Stream::new(config.seed, 1);
    let frame = loop {
        let raw: Vec<Vec<f64>> = (0..m)
            .map(|_| (0..d).map(|_| stream.standard_normal()).collect())
            .collect();
        let rows: Vec<&[f64]> = raw.iter().map(Vec::as_slice).collect();
        let basis = orthonormal_basis(&rows, 1e-8);
        if basis.len() == m {
            break basis;
        }
    };

    let vectors: Vec<Vec<f64>> = (0..m)
        .map(|k| {
            let mut v = vec![0.0; d];
            for (l, q) in frame.iter().enumerate() {
                let coef = root[(l, k)];
                v.iter_mut().zip(q).for_each(|(x, qi)| *x += coef * qi);
            }
            v
        })
        .collect();
    let biases = config
        .positive_rates
        .iter()
        .map(|&r| normal_quantile(1.0 - r))
        .collect();
    Ok(LinearAttributeWorld {
        config,
        vectors,
        biases,
    })
}

fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

impl LinearAttributeWorld {
    pub fn dim(&self) -> usize {
        self.config.dim
    }

    pub fn m(&self) -> usize {
        self.vectors.len()
    }

    pub fn schema(&self) -> &AttributeSchema {
        &self.config.names
    }

    pub fn sharpness(&self) -> f64 {
        self.config.sharpness
    }

    /// `kappa * (<v_k, z> - b_k)` for every attribute.
    pub fn logits_into(&self, z: &[f64], out: &mut [f64]) {
        let kappa = self.config.sharpness;
        for ((o, v), b) in out.iter_mut().zip(&self.vectors).zip(&self.biases) {
            *o = kappa * (dot(v, z) - b);
        }
    }

    pub fn realized_gram(&self) -> Vec<Vec<f64>> {
        self.vectors
            .iter()
            .map(|a| self.vectors.iter().map(|b| dot(a, b)).collect())
            .collect()
    }

    /// Logit-domain scorer; rescoring with it is exactly linear in the edit.
    pub fn logit_scorer(&self) -> LogitScorer<'_> {
        LogitScorer(self)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("world serializes")
    }
}

impl AttributeScorer for LinearAttributeWorld {
    fn dim(&self) -> usize {
        self.config.dim
    }

    fn attributes(&self) -> usize {
        self.vectors.len()
    }

    fn score_into(&self, z: &[f64], out: &mut [f64]) {
        self.logits_into(z, out);
        out.iter_mut().for_each(|x| *x = logistic(*x));
    }
}

pub struct LogitScorer<'a>(&'a LinearAttributeWorld);

impl AttributeScorer for LogitScorer<'_> {
    fn dim(&self) -> usize {
        self.0.dim()
    }

    fn attributes(&self) -> usize {
        self.0.m()
    }

    fn score_into(&self, z: &[f64], out: &mut [f64]) {
        self.0.logits_into(z, out);
    }
}

pub fn oracle_score(world: &LinearAttributeWorld, z: &[f64]) -> Result<Vec<f64>> {
    if z.len() != world.dim() {
        return Err(Error::DimensionMismatch {
            expected: world.dim(),
            actual: z.len(),
        });
    }
    let mut out = vec![0.0; world.m()];
    world.score_into(z, &mut out);
    Ok(out)
}

/// `n` row-major standard Gaussian latent codes from stream 0 of `seed`.
pub fn gaussian_codes(dim: usize, n: usize, seed: u64) -> Vec<f64> {
    let mut stream = Stream::new(seed, 0);
    (0..n * dim).map(|_| stream.standard_normal()).collect()
}

/// Draws `n` labeled codes. Confidence of attribute `k` is `|2 s_k - 1|`.
pub fn sample_world(world: &LinearAttributeWorld, n: usize, seed: u64) -> LatentDataset {
    let d = world.dim();
    let m = world.m();
    let codes = gaussian_codes(d, n, seed);
    let mut labels = Vec::with_capacity(n);
    let mut confidences = Vec::with_capacity(n * m);
    let mut scores = vec![0.0; m];
    for z in codes.chunks_exact(d) {
        let mut label = 0u32;
        for (k, (v, b)) in world.vectors.iter().zip(&world.biases).enumerate() {
            if dot(v, z) > *b {
                label |= 1 << k;
            }
        }
        world.score_into(z, &mut scores);
        confidences.extend(scores.iter().map(|s| (2.0 * s - 1.0).abs()));
        labels.push(label);
    }
    LatentDataset::from_parts_unchecked(world.schema().clone(), d, codes, labels, Some(confidences))
}
