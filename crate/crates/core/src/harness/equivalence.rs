//! Randomized recursion-versus-joint sweep over the classifier core.

use serde::Serialize;

use crate::afam::Afam;
use crate::classifier::AnalyticClassifier;
use crate::error::Result;
use crate::expansion::{Activation, ExpansionMap};
use crate::matrix::{relative_frobenius, ClassId, FeatureMatrix, LabelMatrix};
use crate::rng::Xoshiro256StarStar;

const RAW_DIM: usize = 8;
const TEST_PER_CLASS: usize = 4;

/// One randomized configuration.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EquivalenceCase {
    pub expansion: usize,
    pub tasks: usize,
    /// Each task gets between 1 and this many classes.
    pub max_classes: usize,
    pub gamma: f64,
    pub seed: u64,
}

impl EquivalenceCase {
    /// `count` cases drawn from E ∈ {16, 64, 128}, 2–6 tasks, 1–5 classes per
    /// task and γ ∈ {1e-3, 0.1, 1, 10}.
    pub fn sweep(count: usize, master_seed: u64) -> Vec<Self> {
        let mut rng = Xoshiro256StarStar::seed_from_u64(master_seed);
        (0..count)
            .map(|_| Self {
                expansion: [16, 64, 128][rng.next_below(3) as usize],
                tasks: 2 + rng.next_below(5) as usize,
                max_classes: 1 + rng.next_below(5) as usize,
                gamma: [1e-3, 0.1, 1.0, 10.0][rng.next_below(4) as usize],
                seed: rng.next_u64(),
            })
            .collect()
    }
}

/// Deviations measured for one case.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EquivalenceResult {
    pub case: EquivalenceCase,
    /// Chained updates against the joint solve, relative Frobenius.
    pub weight_deviation: f64,
    /// Chained Woodbury updates against the direct inverse.
    pub afam_deviation: f64,
    /// Reverse task order against forward order, after aligning columns.
    pub order_deviation: f64,
    pub disagreements: usize,
    pub test_samples: usize,
    /// Largest relative asymmetry seen before symmetrization.
    pub max_asymmetry: f64,
    pub positive_definite: bool,
}

struct Task {
    features: FeatureMatrix,
    labels: LabelMatrix,
}

/// Tasks of disjoint classes, each class a Gaussian blob around a random
/// center, pushed through a relu expansion; plus held-out samples.
fn scenario(case: &EquivalenceCase) -> Result<(Vec<Task>, FeatureMatrix)> {
    let mut rng = Xoshiro256StarStar::seed_from_u64(case.seed);
    let map = ExpansionMap::build(RAW_DIM, case.expansion, case.seed ^ 0x9e37, Activation::Relu)?;
    let sample = |rng: &mut Xoshiro256StarStar, center: &[f64], n: usize| -> Result<FeatureMatrix> {
        let values: Vec<f64> = (0..n)
            .flat_map(|_| center.iter().map(|c| c + rng.next_normal()).collect::<Vec<_>>())
            .collect();
        map.expand(&FeatureMatrix::from_row_slice(n, RAW_DIM, &values)?)
    };
    let mut next: ClassId = 0;
    let mut tasks = Vec::with_capacity(case.tasks);
    let mut test = Vec::new();
    for _ in 0..case.tasks {
        let k = 1 + rng.next_below(case.max_classes as u64) as ClassId;
        let ids: Vec<ClassId> = (next..next + k).collect();
        next += k;
        let mut parts = Vec::new();
        let mut labels = Vec::new();
        for &c in &ids {
            let center: Vec<f64> = (0..RAW_DIM).map(|_| 2.0 * rng.next_normal()).collect();
            let n = 3 + rng.next_below(10) as usize;
            parts.push(sample(&mut rng, &center, n)?);
            labels.extend(std::iter::repeat(c).take(n));
            test.push(sample(&mut rng, &center, TEST_PER_CLASS)?);
        }
        tasks.push(Task {
            features: FeatureMatrix::vstack(&parts.iter().collect::<Vec<_>>())?,
            labels: LabelMatrix::one_hot(&labels, &ids)?,
        });
    }
    let test = FeatureMatrix::vstack(&test.iter().collect::<Vec<_>>())?;
    Ok((tasks, test))
}

fn chained(tasks: &[Task], order: impl Iterator<Item = usize>, gamma: f64) -> Result<AnalyticClassifier> {
    let mut order = order;
    let first = &tasks[order.next().expect("at least one task")];
    let mut c = AnalyticClassifier::recalibrate(&first.features, &first.labels, gamma)?;
    for i in order {
        c.update(&tasks[i].features, &tasks[i].labels)?;
    }
    Ok(c)
}

/// Runs one case: forward and reverse chains, the joint solve, and a
/// standalone Woodbury chain from the `I/γ` prior.
pub fn check_equivalence(case: &EquivalenceCase) -> Result<EquivalenceResult> {
    let (tasks, test) = scenario(case)?;
    let forward = chained(&tasks, 0..tasks.len(), case.gamma)?;
    let backward = chained(&tasks, (0..tasks.len()).rev(), case.gamma)?;
    let pairs: Vec<_> = tasks.iter().map(|t| (&t.features, &t.labels)).collect();
    let joint = AnalyticClassifier::joint_solve(case.expansion, &pairs, case.gamma)?;

    let classes: Vec<ClassId> = forward.registry().classes().collect();
    let aligned = backward.weights_for(&classes).expect("same classes");
    let a = forward.predict(&test)?;
    let b = joint.predict(&test)?;

    let mut afam = Afam::prior(case.expansion, case.gamma)?;
    let mut max_asymmetry = 0.0f64;
    for t in &tasks {
        max_asymmetry = max_asymmetry.max(afam.absorb(&t.features)?);
    }
    let batches: Vec<&FeatureMatrix> = tasks.iter().map(|t| &t.features).collect();
    let direct = Afam::direct(case.expansion, &batches, case.gamma)?;

    Ok(EquivalenceResult {
        case: *case,
        weight_deviation: relative_frobenius(forward.weights(), joint.weights()),
        afam_deviation: relative_frobenius(afam.matrix(), direct.matrix())
            .max(relative_frobenius(forward.afam().matrix(), direct.matrix())),
        order_deviation: relative_frobenius(&aligned, forward.weights()),
        disagreements: a.iter().zip(&b).filter(|(x, y)| x != y).count(),
        test_samples: a.len(),
        max_asymmetry,
        positive_definite: afam.is_positive_definite() && forward.afam().is_positive_definite(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sweep_covers_the_grid() {
        let cases = EquivalenceCase::sweep(200, 1);
        for e in [16, 64, 128] {
            assert!(cases.iter().any(|c| c.expansion == e));
        }
        for g in [1e-3, 0.1, 1.0, 10.0] {
            assert!(cases.iter().any(|c| c.gamma == g));
        }
        assert!(cases.iter().all(|c| (2..=6).contains(&c.tasks) && (1..=5).contains(&c.max_classes)));
        assert_eq!(cases, EquivalenceCase::sweep(200, 1));
    }

    #[test]
    fn well_conditioned_case_is_tight() {
        let case = EquivalenceCase {
            expansion: 64,
            tasks: 4,
            max_classes: 3,
            gamma: 1.0,
            seed: 3,
        };
        let r = check_equivalence(&case).unwrap();
        assert!(r.weight_deviation < 1e-11, "{r:?}");
        assert!(r.afam_deviation < 1e-11, "{r:?}");
        assert!(r.order_deviation < 1e-11, "{r:?}");
        assert_eq!(r.disagreements, 0);
        assert!(r.positive_definite);
    }
}
