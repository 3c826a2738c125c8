//! Multi-attribute balanced subsampling and the uniform baseline.
//!
//! Balanced sampling runs exactly `n0` iterations. Each iteration draws a
//! contingency cell uniformly over all `2^m` cells, then draws one member of
//! that cell without replacement. When the chosen cell has nothing left the
//! exhaustion policy decides: [`ExhaustionPolicy::Skip`] forfeits the
//! iteration, [`ExhaustionPolicy::Oversample`] draws uniformly from the cell's
//! full member list with replacement. A cell that never had any member is
//! skipped under both policies.
//!
//! Randomness: stream 0 of the plan seed drives cell draws, stream `1 + c`
//! drives member draws inside cell `c` (see [`crate::rng`]).

use serde::{Deserialize, Serialize};

use crate::contingency::{count_rows, ContingencyTable};
use crate::dataset::LatentDataset;
use crate::error::{Error, Result};
use crate::rng::{self, Stream};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExhaustionPolicy {
    Skip,
    Oversample,
}

impl std::str::FromStr for ExhaustionPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "skip" => Ok(ExhaustionPolicy::Skip),
            "oversample" => Ok(ExhaustionPolicy::Oversample),
            other => Err(Error::InvalidParameter(format!("unknown policy {other:?}"))),
        }
    }
}

impl std::fmt::Display for ExhaustionPolicy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ExhaustionPolicy::Skip => "skip",
            ExhaustionPolicy::Oversample => "oversample",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SamplePlan {
    pub n0: usize,
    pub policy: ExhaustionPolicy,
    pub seed: u64,
}

impl SamplePlan {
    pub fn new(n0: usize, policy: ExhaustionPolicy, seed: u64) -> Result<Self> {
        if n0 == 0 {
            return Err(Error::InvalidParameter("n0 must be at least 1".into()));
        }
        Ok(SamplePlan { n0, policy, seed })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubsampleResult {
    /// Selected dataset rows in draw order.
    pub indices: Vec<usize>,
    pub per_cell_counts: Vec<usize>,
    pub skipped_iterations: usize,
    pub rng: String,
}

struct CellDrawer {
    pool: Vec<usize>,
    remaining: usize,
    stream: Stream,
}

impl CellDrawer {
    fn new(members: &[usize], seed: u64, cell: usize) -> Self {
        CellDrawer {
            pool: members.to_vec(),
            remaining: members.len(),
            stream: Stream::new(seed, 1 + cell as u64),
        }
    }

    /// Partial Fisher-Yates step: the drawn member is swapped to the tail of
    /// the live region so the pool stays a permutation of the cell.
    fn without_replacement(&mut self) -> Option<usize> {
        if self.remaining == 0 {
            return None;
        }
        let k = self.stream.index(self.remaining);
        self.remaining -= 1;
        self.pool.swap(k, self.remaining);
        Some(self.pool[self.remaining])
    }

    fn with_replacement(&mut self) -> Option<usize> {
        if self.pool.is_empty() {
            return None;
        }
        let k = self.stream.index(self.pool.len());
        Some(self.pool[k])
    }
}

pub fn balanced_subsample(
    dataset: &LatentDataset,
    table: &ContingencyTable,
    plan: &SamplePlan,
) -> SubsampleResult {
    debug_assert_eq!(table.total(), dataset.len());
    let cells = table.cells();
    let mut cell_stream = Stream::new(plan.seed, 0);
    let mut drawers: Vec<Option<CellDrawer>> = (0..cells).map(|_| None).collect();
    let mut indices = Vec::with_capacity(plan.n0);
    let mut per_cell_counts = vec![0; cells];
    let mut skipped_iterations = 0;

    for _ in 0..plan.n0 {
        let cell = cell_stream.index(cells);
        let drawer = drawers[cell]
            .get_or_insert_with(|| CellDrawer::new(table.members(cell), plan.seed, cell));
        let drawn = drawer.without_replacement().or_else(|| match plan.policy {
            ExhaustionPolicy::Skip => None,
            ExhaustionPolicy::Oversample => drawer.with_replacement(),
        });
        match drawn {
            Some(row) => {
                indices.push(row);
                per_cell_counts[cell] += 1;
            }
            None => skipped_iterations += 1,
        }
    }

    SubsampleResult {
        indices,
        per_cell_counts,
        skipped_iterations,
        rng: rng::ALGORITHM.to_string(),
    }
}

/// `n0` distinct rows drawn uniformly without replacement.
pub fn uniform_subsample(dataset: &LatentDataset, n0: usize, seed: u64) -> Result<SubsampleResult> {
    let n = dataset.len();
    if n0 > n {
        return Err(Error::SampleSize {
            requested: n0,
            available: n,
        });
    }
    let mut stream = Stream::new(seed, 0);
    let mut pool: Vec<usize> = (0..n).collect();
    for i in 0..n0 {
        let k = i + stream.index(n - i);
        pool.swap(i, k);
    }
    pool.truncate(n0);
    Ok(SubsampleResult {
        per_cell_counts: count_rows(dataset, &pool),
        indices: pool,
        skipped_iterations: 0,
        rng: rng::ALGORITHM.to_string(),
    })
}

impl SubsampleResult {
    /// `position,row_index` CSV.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("position,row_index\n");
        for (pos, row) in self.indices.iter().enumerate() {
            out.push_str(&format!("{pos},{row}\n"));
        }
        out
    }
}
