use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Average accuracy over completed tasks: `(1/(T+1)) Σ_{t=0..T} A_t`.
pub fn acc_metric(a: &[f64]) -> Result<f64> {
    if a.is_empty() {
        return Err(Error::MetricUndefined("ACC needs at least one task"));
    }
    Ok(a.iter().sum::<f64>() / a.len() as f64)
}

/// Backward transfer: `(1/T) Σ_{t=1..T} (A_T − A_t)`.
///
/// Task 0 is excluded from the sum, and the `t = T` term is zero.
pub fn bwt_metric(a: &[f64]) -> Result<f64> {
    if a.len() < 2 {
        return Err(Error::MetricUndefined("BWT needs at least one incremental task"));
    }
    let t = a.len() - 1;
    let last = a[t];
    Ok(a[1..].iter().map(|&at| last - at).sum::<f64>() / t as f64)
}

/// BWT with the single-task case reported as zero and flagged.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bwt {
    pub value: f64,
    pub defined: bool,
}

impl Bwt {
    pub fn from_accuracies(a: &[f64]) -> Self {
        match bwt_metric(a) {
            Ok(value) => Self { value, defined: true },
            Err(_) => Self {
                value: 0.0,
                defined: false,
            },
        }
    }
}

/// Per-step evaluation results.
///
/// `grid[t][i]` is the accuracy on task `i`'s test set after training task
/// `t` (lower triangular, `i ≤ t`). `a[t]` is the accuracy over the union of
/// test sets `0..=t`, weighted by sample count.
#[derive(Clone, Debug, PartialEq)]
pub struct AccuracyMatrix {
    grid: Vec<Vec<f64>>,
    test_counts: Vec<usize>,
    a: Vec<f64>,
}

impl AccuracyMatrix {
    /// From correct-prediction counts: `correct[t][i]` for `i ≤ t`.
    pub fn from_correct_counts(correct: &[Vec<usize>], test_counts: &[usize]) -> Result<Self> {
        check_shape(correct.iter().map(Vec::len), test_counts.len())?;
        if test_counts.iter().any(|&n| n == 0) {
            return Err(Error::InvalidSplit("a task has an empty test set".into()));
        }
        let mut grid = Vec::with_capacity(correct.len());
        let mut a = Vec::with_capacity(correct.len());
        for row in correct {
            if row.iter().zip(test_counts).any(|(&c, &n)| c > n) {
                return Err(Error::Shape("more correct predictions than samples".into()));
            }
            grid.push(row.iter().zip(test_counts).map(|(&c, &n)| c as f64 / n as f64).collect());
            let hits: usize = row.iter().sum();
            let total: usize = test_counts[..row.len()].iter().sum();
            a.push(hits as f64 / total as f64);
        }
        Ok(Self {
            grid,
            test_counts: test_counts.to_vec(),
            a,
        })
    }

    /// From per-task accuracies; `A_t` is their sample-weighted mean.
    pub fn from_grid(grid: Vec<Vec<f64>>, test_counts: Vec<usize>) -> Result<Self> {
        check_shape(grid.iter().map(Vec::len), test_counts.len())?;
        if grid.iter().flatten().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::Shape("accuracies must lie in [0, 1]".into()));
        }
        let a = grid
            .iter()
            .map(|row| {
                let weights = &test_counts[..row.len()];
                let total: usize = weights.iter().sum();
                if total == 0 {
                    return Err(Error::MetricUndefined("zero total weight in grid row"));
                }
                Ok(row.iter().zip(weights).map(|(acc, &n)| acc * n as f64).sum::<f64>() / total as f64)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { grid, test_counts, a })
    }

    pub fn grid(&self) -> &[Vec<f64>] {
        &self.grid
    }

    pub fn test_counts(&self) -> &[usize] {
        &self.test_counts
    }

    /// `A_t` for every step.
    pub fn accuracies(&self) -> &[f64] {
        &self.a
    }

    pub fn acc(&self) -> Result<f64> {
        acc_metric(&self.a)
    }

    pub fn bwt(&self) -> Bwt {
        Bwt::from_accuracies(&self.a)
    }
}

fn check_shape(row_lens: impl Iterator<Item = usize>, tasks: usize) -> Result<()> {
    let mut rows = 0;
    for (t, len) in row_lens.enumerate() {
        if len != t + 1 {
            return Err(Error::Shape(format!("grid row {t} has {len} entries, expected {}", t + 1)));
        }
        rows += 1;
    }
    if rows != tasks {
        return Err(Error::Shape(format!("{rows} grid rows for {tasks} tasks")));
    }
    Ok(())
}

/// Headline numbers of one run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub acc: f64,
    pub bwt: Bwt,
    pub tt_per_task: Vec<f64>,
    pub extra_memory_elements: usize,
}
