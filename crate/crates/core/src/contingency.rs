//! Joint label counts over all `2^m` attribute combinations.

use serde::{Deserialize, Serialize};

use crate::dataset::{LabelCombination, LatentDataset};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ContingencyTable {
    m: usize,
    counts: Vec<usize>,
    members: Vec<Vec<usize>>,
}

impl ContingencyTable {
    pub fn m(&self) -> usize {
        self.m
    }

    pub fn cells(&self) -> usize {
        self.counts.len()
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    /// Dataset rows in cell `cell`, in dataset order.
    pub fn members(&self, cell: usize) -> &[usize] {
        &self.members[cell]
    }

    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }

    pub fn combination(&self, cell: usize) -> LabelCombination {
        LabelCombination::from_index(cell as u32, self.m)
    }

    /// Counts-only table, e.g. for summarizing a subsample.
    pub fn from_counts(m: usize, counts: Vec<usize>) -> Self {
        assert_eq!(counts.len(), 1 << m, "need 2^m counts");
        ContingencyTable {
            m,
            members: vec![Vec::new(); counts.len()],
            counts,
        }
    }

    /// `cell_index,bits,count` rows with bits rendered attribute-0-first.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("cell_index,bits,count\n");
        for (cell, count) in self.counts.iter().enumerate() {
            out.push_str(&format!("{cell},{},{count}\n", self.combination(cell)));
        }
        out
    }
}

pub fn build_contingency(dataset: &LatentDataset) -> ContingencyTable {
    let m = dataset.m();
    let cells = 1usize << m;
    let mut members = vec![Vec::new(); cells];
    for (row, &label) in dataset.labels().iter().enumerate() {
        members[label as usize].push(row);
    }
    ContingencyTable {
        m,
        counts: members.iter().map(Vec::len).collect(),
        members,
    }
}

/// Cell counts of `rows` (repeats counted) under the dataset's labels.
pub fn count_rows(dataset: &LatentDataset, rows: &[usize]) -> Vec<usize> {
    let mut counts = vec![0; 1usize << dataset.m()];
    for &row in rows {
        counts[dataset.labels()[row] as usize] += 1;
    }
    counts
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImbalanceStats {
    pub min_cell: usize,
    pub max_cell: usize,
    pub nonempty_cells: usize,
    /// Max over min among non-empty cells; `None` when every cell is empty.
    pub max_min_ratio: Option<f64>,
    /// Pearson statistic against `N / 2^m` in every cell, empty cells included.
    pub chi_square_vs_uniform: f64,
}

pub fn imbalance_stats(table: &ContingencyTable) -> ImbalanceStats {
    imbalance_of_counts(table.counts())
}

pub fn imbalance_of_counts(counts: &[usize]) -> ImbalanceStats {
    let total: usize = counts.iter().sum();
    let nonempty: Vec<usize> = counts.iter().copied().filter(|&c| c > 0).collect();
    let min_cell = counts.iter().copied().min().unwrap_or(0);
    let max_cell = counts.iter().copied().max().unwrap_or(0);
    let max_min_ratio = match (nonempty.iter().min(), nonempty.iter().max()) {
        (Some(&lo), Some(&hi)) => Some(hi as f64 / lo as f64),
        _ => None,
    };
    let chi_square_vs_uniform = if total == 0 {
        0.0
    } else {
        let expected = total as f64 / counts.len() as f64;
        counts
            .iter()
            .map(|&c| (c as f64 - expected).powi(2) / expected)
            .sum()
    };
    ImbalanceStats {
        min_cell,
        max_cell,
        nonempty_cells: nonempty.len(),
        max_min_ratio,
        chi_square_vs_uniform,
    }
}
