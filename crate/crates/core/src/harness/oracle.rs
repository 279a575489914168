//! The recursive classifier checked against joint training at every prefix.

use serde::Serialize;

use crate::classifier::AnalyticClassifier;
use crate::error::Result;
use crate::matrix::{relative_frobenius, FeatureMatrix, LabelMatrix};
use crate::rng::Xoshiro256StarStar;

use super::experiment::{evaluate, PreparedRun};
use super::metrics::AccuracyMatrix;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PrefixCheck {
    /// Index of the last task included.
    pub prefix: usize,
    pub weight_deviation: f64,
    pub afam_deviation: f64,
    pub disagreements: usize,
    pub samples: usize,
}

impl PrefixCheck {
    pub fn agreement(&self) -> f64 {
        if self.samples == 0 {
            1.0
        } else {
            1.0 - self.disagreements as f64 / self.samples as f64
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OracleReport {
    pub prefixes: Vec<PrefixCheck>,
    pub tolerance: f64,
    pub max_deviation: f64,
    pub worst_prefix: usize,
    pub passed: bool,
}

fn joint_at(prepared: &PreparedRun, t: usize) -> Result<AnalyticClassifier> {
    let batches: Vec<(&FeatureMatrix, &LabelMatrix)> = prepared.tasks[..=t]
        .iter()
        .map(|task| (&task.train_features, &task.train_labels))
        .collect();
    AnalyticClassifier::joint_solve(prepared.expansion.expansion_size(), &batches, prepared.gamma)
}

/// Replays recalibration and the recursive updates, and after every task
/// compares against a joint solve over tasks `0..=t`: relative Frobenius
/// deviation of the weights and argmax agreement on all seen test samples.
///
/// `inject_noise` perturbs a copy of the recursive weights before each
/// comparison by `scale · max|W| · z` with standard-normal `z`.
pub fn oracle_check(prepared: &PreparedRun, tolerance: f64, inject_noise: Option<f64>) -> Result<OracleReport> {
    let mut noise_rng = Xoshiro256StarStar::derive(prepared.expansion.seed(), 0x0bad);
    let mut prefixes = Vec::with_capacity(prepared.tasks.len());
    let base = &prepared.tasks[0];
    let mut recursive = AnalyticClassifier::recalibrate(&base.train_features, &base.train_labels, prepared.gamma)?;
    for t in 0..prepared.tasks.len() {
        if t > 0 {
            let task = &prepared.tasks[t];
            recursive.update(&task.train_features, &task.train_labels)?;
        }
        let joint = joint_at(prepared, t)?;
        let mut probe = recursive.clone();
        if let Some(scale) = inject_noise {
            let amp = scale * probe.weights().amax();
            probe.weights_mut().apply(|w| *w += amp * noise_rng.next_normal());
        }
        let mut disagreements = 0;
        let mut samples = 0;
        for task in &prepared.tasks[..=t] {
            let a = probe.predict(&task.test_features)?;
            let b = joint.predict(&task.test_features)?;
            disagreements += a.iter().zip(&b).filter(|(x, y)| x != y).count();
            samples += a.len();
        }
        prefixes.push(PrefixCheck {
            prefix: t,
            weight_deviation: relative_frobenius(probe.weights(), joint.weights()),
            afam_deviation: relative_frobenius(probe.afam().matrix(), joint.afam().matrix()),
            disagreements,
            samples,
        });
    }
    let (worst_prefix, max_deviation) = prefixes
        .iter()
        .map(|p| (p.prefix, p.weight_deviation))
        .fold((0, f64::NEG_INFINITY), |best, cur| if cur.1 > best.1 { cur } else { best });
    let passed = prefixes
        .iter()
        .all(|p| p.weight_deviation <= tolerance && p.disagreements == 0);
    let worst_prefix = prefixes
        .iter()
        .find(|p| p.disagreements > 0 && p.weight_deviation <= tolerance)
        .filter(|_| max_deviation <= tolerance)
        .map_or(worst_prefix, |p| p.prefix);
    Ok(OracleReport {
        prefixes,
        tolerance,
        max_deviation,
        worst_prefix,
        passed,
    })
}

/// Accuracy grid of joint-trained classifiers, one per checkpoint.
pub fn joint_accuracy(prepared: &PreparedRun) -> Result<AccuracyMatrix> {
    let counts: Vec<usize> = prepared.tasks.iter().map(|t| t.test_labels.len()).collect();
    let correct = (0..prepared.tasks.len())
        .map(|t| evaluate(&joint_at(prepared, t)?, &prepared.tasks[..=t]))
        .collect::<Result<Vec<_>>>()?;
    AccuracyMatrix::from_correct_counts(&correct, &counts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expansion::Activation;
    use crate::features::SynthSpec;
    use crate::harness::{prepare, run_prepared, split_tasks, DataPool, Hyper};

    fn prepared(seed: u64, steps: usize) -> PreparedRun {
        let pool = DataPool::from_synth(
            &SynthSpec {
                n_classes: 4 + steps,
                samples_per_class: 40,
                raw_dim: 6,
                cluster_separation: 3.0,
                noise_sigma: 1.0,
                seed,
            },
            0.25,
        )
        .unwrap();
        let classes: Vec<u32> = (0..(4 + steps) as u32).collect();
        let split = split_tasks(&classes, 4, steps, 1, seed).unwrap();
        let hyper = Hyper {
            gamma: 0.1,
            expansion_size: 32,
            activation: Activation::Relu,
            expansion_seed: seed,
            extractor: None,
        };
        prepare(&pool, &split, &hyper).unwrap()
    }

    #[test]
    fn recursion_passes_its_oracle() {
        let p = prepared(5, 4);
        let report = oracle_check(&p, 1e-9, None).unwrap();
        assert!(report.passed, "{report:?}");
        assert_eq!(report.prefixes.len(), 5);
        assert!(report.prefixes.iter().all(|c| c.agreement() == 1.0));
    }

    #[test]
    fn single_task_trivially_passes() {
        let p = prepared(6, 0);
        let report = oracle_check(&p, 1e-9, None).unwrap();
        assert!(report.passed);
        assert_eq!(report.prefixes[0].weight_deviation, 0.0);
    }

    #[test]
    fn injected_noise_fails() {
        let p = prepared(7, 3);
        let report = oracle_check(&p, 1e-9, Some(1e-3)).unwrap();
        assert!(!report.passed);
        assert!(report.max_deviation > 1e-6);
    }

    #[test]
    fn joint_grid_matches_incremental_grid() {
        let p = prepared(8, 5);
        let run = run_prepared(&p).unwrap();
        let joint = joint_accuracy(&p).unwrap();
        assert_eq!(run.accuracy.grid(), joint.grid());
        assert_eq!(run.accuracy.bwt(), joint.bwt());
    }
}
