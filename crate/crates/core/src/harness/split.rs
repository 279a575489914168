use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::ClassId;
use crate::rng::Xoshiro256StarStar;

/// Base task classes followed by the class set of every incremental step.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskSplit {
    pub base: Vec<ClassId>,
    pub steps: Vec<Vec<ClassId>>,
    pub seed: u64,
}

impl TaskSplit {
    /// Validates that every set is nonempty and all sets are pairwise disjoint.
    pub fn new(base: Vec<ClassId>, steps: Vec<Vec<ClassId>>, seed: u64) -> Result<Self> {
        let split = Self { base, steps, seed };
        if split.base.is_empty() {
            return Err(Error::InvalidSplit("base task has no classes".into()));
        }
        let mut seen = HashSet::new();
        for (t, classes) in split.tasks().enumerate() {
            if classes.is_empty() {
                return Err(Error::InvalidSplit(format!("task {t} has no classes")));
            }
            for &c in classes {
                if !seen.insert(c) {
                    return Err(Error::InvalidSplit(format!("class {c} appears in more than one task")));
                }
            }
        }
        Ok(split)
    }

    /// Base first, then the steps in order.
    pub fn tasks(&self) -> impl Iterator<Item = &[ClassId]> {
        std::iter::once(self.base.as_slice()).chain(self.steps.iter().map(Vec::as_slice))
    }

    pub fn num_tasks(&self) -> usize {
        1 + self.steps.len()
    }

    /// Every class, ascending.
    pub fn all_classes(&self) -> Vec<ClassId> {
        let mut all: Vec<ClassId> = self.tasks().flatten().copied().collect();
        all.sort_unstable();
        all
    }

    /// Same base task, incremental steps presented in reverse.
    pub fn with_reversed_steps(&self) -> Self {
        let mut s = self.clone();
        s.steps.reverse();
        s
    }
}

/// Shuffles the classes with `seed`, takes the first `base_count` as the base
/// task and chunks the rest into `step_count` steps of `classes_per_step`.
pub fn split_tasks(
    all_classes: &[ClassId],
    base_count: usize,
    step_count: usize,
    classes_per_step: usize,
    seed: u64,
) -> Result<TaskSplit> {
    if base_count + step_count * classes_per_step != all_classes.len() {
        return Err(Error::InvalidSplit(format!(
            "{base_count} + {step_count} x {classes_per_step} does not cover {} classes",
            all_classes.len()
        )));
    }
    if step_count > 0 && classes_per_step == 0 {
        return Err(Error::InvalidSplit("steps need at least one class each".into()));
    }
    let mut classes = all_classes.to_vec();
    classes.sort_unstable();
    if classes.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::InvalidSplit("duplicate class ids".into()));
    }
    Xoshiro256StarStar::derive(seed, 3).shuffle(&mut classes);
    let mut base = classes[..base_count].to_vec();
    base.sort_unstable();
    let steps = classes[base_count..]
        .chunks(classes_per_step.max(1))
        .map(|c| {
            let mut c = c.to_vec();
            c.sort_unstable();
            c
        })
        .collect();
    TaskSplit::new(base, steps, seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn thirty_classes_fifteen_plus_five_by_three() {
        let all: Vec<ClassId> = (0..30).collect();
        let s = split_tasks(&all, 15, 3, 5, 0).unwrap();
        assert_eq!(s.base.len(), 15);
        assert_eq!(s.steps.len(), 3);
        assert!(s.steps.iter().all(|st| st.len() == 5));
        assert_eq!(s.all_classes(), all);
    }

    #[test]
    fn hundred_classes_fifty_single_steps() {
        let all: Vec<ClassId> = (0..100).collect();
        let s = split_tasks(&all, 50, 50, 1, 9).unwrap();
        assert_eq!(s.num_tasks(), 51);
        assert!(s.steps.iter().all(|st| st.len() == 1));
    }

    #[test]
    fn arithmetic_mismatch() {
        let all: Vec<ClassId> = (0..10).collect();
        assert!(matches!(split_tasks(&all, 5, 2, 2, 0), Err(Error::InvalidSplit(_))));
    }

    #[test]
    fn seeded_shuffle() {
        let all: Vec<ClassId> = (0..20).collect();
        let a = split_tasks(&all, 10, 10, 1, 4).unwrap();
        assert_eq!(a, split_tasks(&all, 10, 10, 1, 4).unwrap());
        assert_ne!(a, split_tasks(&all, 10, 10, 1, 5).unwrap());
    }

    #[test]
    fn rejects_overlap_and_empty_sets() {
        assert!(TaskSplit::new(vec![0, 1], vec![vec![1]], 0).is_err());
        assert!(TaskSplit::new(vec![], vec![vec![1]], 0).is_err());
        assert!(TaskSplit::new(vec![0], vec![vec![]], 0).is_err());
        let s = TaskSplit::new(vec![0], vec![vec![1], vec![2]], 0).unwrap();
        assert_eq!(s.with_reversed_steps().steps, vec![vec![2], vec![1]]);
    }
}
