//! Closed-form ridge classifier with recursive, exemplar-free task updates.

use indexmap::IndexSet;
use nalgebra::DMatrix;

use crate::afam::{check_gamma, regularized_cholesky, Afam};
use crate::error::{Error, Result};
use crate::matrix::{ClassId, FeatureMatrix, LabelMatrix};

/// Global class id → weight column, in registration order.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ClassRegistry(IndexSet<ClassId>);

impl ClassRegistry {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn column(&self, class: ClassId) -> Option<usize> {
        self.0.get_index_of(&class)
    }

    pub fn class_at(&self, column: usize) -> Option<ClassId> {
        self.0.get_index(column).copied()
    }

    pub fn contains(&self, class: ClassId) -> bool {
        self.0.contains(&class)
    }

    /// Class ids in column order.
    pub fn classes(&self) -> impl Iterator<Item = ClassId> + '_ {
        self.0.iter().copied()
    }

    fn register(&mut self, class: ClassId) -> usize {
        self.0.insert_full(class).0
    }
}

impl FromIterator<ClassId> for ClassRegistry {
    fn from_iter<I: IntoIterator<Item = ClassId>>(iter: I) -> Self {
        Self(iter.into_iter().collect())
    }
}

/// Linear classifier `x ↦ argmax(x · W)` over expanded features.
///
/// After every call to [`recalibrate`](Self::recalibrate) or
/// [`update`](Self::update) the weights equal the ridge solution over all
/// batches presented so far:
///
/// `W = (Σ SᵢᵀSᵢ + γI)⁻¹ Σ SᵢᵀYᵢ`
///
/// with each `Yᵢ` placed in the columns of its own classes. The persistent
/// state is the `E × C` weights, the `E × E` autocorrelation inverse and the
/// class registry; it does not grow with the number of samples.
#[derive(Clone, Debug, PartialEq)]
pub struct AnalyticClassifier {
    weights: DMatrix<f64>,
    afam: Afam,
    registry: ClassRegistry,
    tasks_seen: u32,
}

impl AnalyticClassifier {
    /// Ridge fit on the base task: `W = (SᵀS + γI)⁻¹ SᵀY`.
    ///
    /// The solve goes through a Cholesky factor; the autocorrelation inverse
    /// is then materialized from the same factor since it is carried state.
    pub fn recalibrate(s: &FeatureMatrix, y: &LabelMatrix, gamma: f64) -> Result<Self> {
        check_gamma(gamma)?;
        check_rows(s, y)?;
        if s.rows() == 0 {
            return Err(Error::Shape("recalibration needs at least one sample".into()));
        }
        let x = s.as_matrix();
        let chol = regularized_cholesky(x.tr_mul(x), gamma)?;
        let weights = chol.solve(&x.tr_mul(y.targets()));
        Ok(Self {
            weights,
            afam: Afam::from_factor(&chol, gamma),
            registry: y.class_ids().iter().copied().collect(),
            tasks_seen: 1,
        })
    }

    /// Absorbs one class-incremental task.
    ///
    /// Every class in `y` must be new. Only the current batch is read.
    pub fn update(&mut self, s: &FeatureMatrix, y: &LabelMatrix) -> Result<()> {
        if let Some(&c) = y.class_ids().iter().find(|&&c| self.registry.contains(c)) {
            return Err(Error::ClassCollision(c));
        }
        self.absorb(s, y)
    }

    /// Absorbs a batch whose classes may already be registered.
    ///
    /// This is plain recursive least squares over a sample stream: the
    /// weights become the ridge solution over the union of all batches, and
    /// classes not yet seen get new columns.
    pub fn update_streaming(&mut self, s: &FeatureMatrix, y: &LabelMatrix) -> Result<()> {
        self.absorb(s, y)
    }

    fn absorb(&mut self, s: &FeatureMatrix, y: &LabelMatrix) -> Result<()> {
        if s.cols() != self.expansion_size() {
            return Err(Error::Shape(format!(
                "batch has {} columns, classifier expects {}",
                s.cols(),
                self.expansion_size()
            )));
        }
        check_rows(s, y)?;
        let new_classes: Vec<(usize, ClassId)> = y
            .class_ids()
            .iter()
            .copied()
            .enumerate()
            .filter(|(_, c)| !self.registry.contains(*c))
            .collect();

        if s.rows() == 0 {
            if new_classes.is_empty() {
                return Ok(());
            }
            let c_old = self.weights.ncols();
            self.weights = self.weights.clone().resize_horizontally(c_old + new_classes.len(), 0.0);
            for (_, c) in &new_classes {
                self.registry.register(*c);
            }
            self.tasks_seen += 1;
            return Ok(());
        }

        // A_t Sᵀ, E × n
        let (_, gain) = self.afam.absorb_with_gain(s)?;
        let x = s.as_matrix();

        // Old columns: W ← W − (A_t Sᵀ S) W, plus A_t Sᵀ y for any batch
        // targets that land in registered columns (streaming case). Forming
        // the E × E product first keeps the class-dependent cost at E²C
        // rather than E·n·C.
        if self.weights.ncols() > 0 {
            let projector = &gain * x;
            self.weights -= &projector * &self.weights;
            for (col_in_batch, &c) in y.class_ids().iter().enumerate() {
                if let Some(col) = self.registry.column(c) {
                    let mut w = self.weights.column_mut(col);
                    w += &gain * y.targets().column(col_in_batch);
                }
            }
        }

        if !new_classes.is_empty() {
            let c_old = self.weights.ncols();
            let mut targets = DMatrix::zeros(x.nrows(), new_classes.len());
            for (j, (col_in_batch, _)) in new_classes.iter().enumerate() {
                targets.set_column(j, &y.targets().column(*col_in_batch));
            }
            let appended = &gain * targets;
            self.weights = self.weights.clone().resize_horizontally(c_old + new_classes.len(), 0.0);
            self.weights.columns_mut(c_old, new_classes.len()).copy_from(&appended);
            for (_, c) in &new_classes {
                self.registry.register(*c);
            }
        }
        self.tasks_seen += 1;
        Ok(())
    }

    /// Joint ridge solution over all batches at once.
    ///
    /// Columns follow the order in which classes first appear across the
    /// batches. This is the reference the recursive path must reproduce.
    pub fn joint_solve(dim: usize, batches: &[(&FeatureMatrix, &LabelMatrix)], gamma: f64) -> Result<Self> {
        check_gamma(gamma)?;
        if dim == 0 {
            return Err(Error::InvalidDimension);
        }
        let mut registry = ClassRegistry::default();
        let mut gram = DMatrix::zeros(dim, dim);
        for (s, y) in batches {
            if s.cols() != dim {
                return Err(Error::Shape(format!("batch has {} columns, expected {dim}", s.cols())));
            }
            check_rows(s, y)?;
            for &c in y.class_ids() {
                if registry.contains(c) {
                    return Err(Error::ClassCollision(c));
                }
                registry.register(c);
            }
            gram += s.as_matrix().tr_mul(s.as_matrix());
        }
        let mut cross = DMatrix::zeros(dim, registry.len());
        for (s, y) in batches {
            let block = s.as_matrix().tr_mul(y.targets());
            for (j, &c) in y.class_ids().iter().enumerate() {
                let col = registry.column(c).expect("registered above");
                cross.set_column(col, &block.column(j));
            }
        }
        let chol = regularized_cholesky(gram, gamma)?;
        Ok(Self {
            weights: chol.solve(&cross),
            afam: Afam::from_factor(&chol, gamma),
            registry,
            tasks_seen: batches.len() as u32,
        })
    }

    /// Raw scores `x · W`.
    pub fn scores(&self, x: &FeatureMatrix) -> Result<DMatrix<f64>> {
        if x.cols() != self.expansion_size() {
            return Err(Error::Shape(format!(
                "features have {} columns, classifier expects {}",
                x.cols(),
                self.expansion_size()
            )));
        }
        Ok(x.as_matrix() * &self.weights)
    }

    /// Argmax class per row; ties go to the lowest column.
    pub fn predict(&self, x: &FeatureMatrix) -> Result<Vec<ClassId>> {
        if self.registry.is_empty() {
            return Err(Error::UntrainedClassifier);
        }
        let scores = self.scores(x)?;
        Ok(scores
            .row_iter()
            .map(|row| {
                let mut best = 0;
                for (j, &v) in row.iter().enumerate().skip(1) {
                    if v > row[best] {
                        best = j;
                    }
                }
                self.registry.class_at(best).expect("column is registered")
            })
            .collect())
    }

    pub fn weights(&self) -> &DMatrix<f64> {
        &self.weights
    }

    /// Weights with columns rearranged into the given class order.
    pub fn weights_for(&self, classes: &[ClassId]) -> Option<DMatrix<f64>> {
        let cols: Option<Vec<usize>> = classes.iter().map(|&c| self.registry.column(c)).collect();
        Some(self.weights.select_columns(&cols?))
    }

    pub fn afam(&self) -> &Afam {
        &self.afam
    }

    pub fn registry(&self) -> &ClassRegistry {
        &self.registry
    }

    pub fn tasks_seen(&self) -> u32 {
        self.tasks_seen
    }

    pub fn gamma(&self) -> f64 {
        self.afam.gamma()
    }

    pub fn expansion_size(&self) -> usize {
        self.afam.dim()
    }

    pub fn num_classes(&self) -> usize {
        self.registry.len()
    }

    /// Element count of everything kept between tasks: `E² + E·C + |registry|`.
    pub fn persistent_elements(&self) -> usize {
        self.afam.matrix().len() + self.weights.len() + self.registry.len()
    }

    /// Mutable access to the weights, for fault-injection checks.
    pub fn weights_mut(&mut self) -> &mut DMatrix<f64> {
        &mut self.weights
    }

    pub(crate) fn from_parts(weights: DMatrix<f64>, afam: Afam, registry: ClassRegistry, tasks_seen: u32) -> Self {
        Self {
            weights,
            afam,
            registry,
            tasks_seen,
        }
    }
}

fn check_rows(s: &FeatureMatrix, y: &LabelMatrix) -> Result<()> {
    if s.rows() == y.rows() {
        Ok(())
    } else {
        Err(Error::Shape(format!(
            "{} feature rows but {} label rows",
            s.rows(),
            y.rows()
        )))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::relative_frobenius;
    use crate::rng::Xoshiro256StarStar;

    fn random_task(rng: &mut Xoshiro256StarStar, n: usize, e: usize, classes: &[ClassId]) -> (FeatureMatrix, LabelMatrix) {
        let v: Vec<f64> = (0..n * e).map(|_| rng.next_normal()).collect();
        let labels: Vec<ClassId> = (0..n).map(|i| classes[i % classes.len()]).collect();
        (
            FeatureMatrix::from_row_slice(n, e, &v).unwrap(),
            LabelMatrix::one_hot(&labels, classes).unwrap(),
        )
    }

    /// Plain Gaussian elimination with partial pivoting on the normal equations.
    fn normal_equations_oracle(s: &FeatureMatrix, y: &LabelMatrix, gamma: f64) -> DMatrix<f64> {
        let (n, e) = (s.rows(), s.cols());
        let c = y.class_ids().len();
        let mut aug = vec![vec![0.0; e + c]; e];
        for i in 0..e {
            for j in 0..e {
                aug[i][j] = (0..n).map(|k| s.as_matrix()[(k, i)] * s.as_matrix()[(k, j)]).sum();
            }
            aug[i][i] += gamma;
            for j in 0..c {
                aug[i][e + j] = (0..n).map(|k| s.as_matrix()[(k, i)] * y.targets()[(k, j)]).sum();
            }
        }
        for col in 0..e {
            let pivot = (col..e)
                .max_by(|&a, &b| aug[a][col].abs().total_cmp(&aug[b][col].abs()))
                .unwrap();
            aug.swap(col, pivot);
            for r in 0..e {
                if r != col {
                    let f = aug[r][col] / aug[col][col];
                    for k in col..e + c {
                        aug[r][k] -= f * aug[col][k];
                    }
                }
            }
        }
        DMatrix::from_fn(e, c, |i, j| aug[i][e + j] / aug[i][i])
    }

    #[test]
    fn identity_features() {
        let s = FeatureMatrix::new(DMatrix::identity(2, 2)).unwrap();
        let y = LabelMatrix::one_hot(&[0, 1], &[0, 1]).unwrap();
        let c = AnalyticClassifier::recalibrate(&s, &y, 1.0).unwrap();
        let half = DMatrix::identity(2, 2) * 0.5;
        assert!(relative_frobenius(c.weights(), &half) < 1e-15);
        assert!(relative_frobenius(c.afam().matrix(), &half) < 1e-15);
        assert_eq!(c.tasks_seen(), 1);
        assert_eq!(c.registry().classes().collect::<Vec<_>>(), vec![0, 1]);
    }

    #[test]
    fn vanishing_gamma_is_least_squares() {
        let s = FeatureMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 1.0]).unwrap();
        let y = LabelMatrix::one_hot(&[0, 1], &[0, 1]).unwrap();
        let c = AnalyticClassifier::recalibrate(&s, &y, 1e-12).unwrap();
        let expected = DMatrix::from_row_slice(2, 2, &[0.5, 0.0, 0.0, 1.0]);
        assert!(relative_frobenius(c.weights(), &expected) < 1e-9);
    }

    #[test]
    fn recalibrate_matches_normal_equations() {
        let mut rng = Xoshiro256StarStar::seed_from_u64(2024);
        let (s, y) = random_task(&mut rng, 20, 8, &[0, 1, 2]);
        let c = AnalyticClassifier::recalibrate(&s, &y, 0.1).unwrap();
        let oracle = normal_equations_oracle(&s, &y, 0.1);
        assert!(relative_frobenius(c.weights(), &oracle) < 1e-10);
    }

    #[test]
    fn recalibrate_errors() {
        let s = FeatureMatrix::zeros(2, 3).unwrap();
        let y = LabelMatrix::one_hot(&[0, 1], &[0, 1]).unwrap();
        assert!(matches!(
            AnalyticClassifier::recalibrate(&s, &y, 0.0),
            Err(Error::InvalidRegularizer(_))
        ));
        let y3 = LabelMatrix::one_hot(&[0, 1, 0], &[0, 1]).unwrap();
        assert!(matches!(
            AnalyticClassifier::recalibrate(&s, &y3, 1.0),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn two_tasks_match_joint() {
        let mut rng = Xoshiro256StarStar::seed_from_u64(8);
        let (s0, y0) = random_task(&mut rng, 20, 8, &[0, 1, 2]);
        let (s1, y1) = random_task(&mut rng, 15, 8, &[3, 4]);
        let mut c = AnalyticClassifier::recalibrate(&s0, &y0, 0.1).unwrap();
        c.update(&s1, &y1).unwrap();
        let joint = AnalyticClassifier::joint_solve(8, &[(&s0, &y0), (&s1, &y1)], 0.1).unwrap();
        assert!(relative_frobenius(c.weights(), joint.weights()) < 1e-9);
        assert!(relative_frobenius(c.afam().matrix(), joint.afam().matrix()) < 1e-10);
        assert_eq!(c.tasks_seen(), 2);
        assert_eq!(c.num_classes(), 5);
    }

    #[test]
    fn streamed_halves_match_one_shot() {
        let mut rng = Xoshiro256StarStar::seed_from_u64(31);
        let classes = [0, 1, 2, 3];
        let (s, y) = random_task(&mut rng, 40, 10, &classes);
        let labels = y.labels();
        let first: Vec<usize> = (0..20).collect();
        let second: Vec<usize> = (20..40).collect();
        // first half only carries classes 0..3 in its rows, but all four
        // columns are declared so the second half lands in existing columns
        let y_first = LabelMatrix::one_hot(&first.iter().map(|&i| labels[i]).collect::<Vec<_>>(), &classes).unwrap();
        let y_second = LabelMatrix::one_hot(&second.iter().map(|&i| labels[i]).collect::<Vec<_>>(), &classes).unwrap();
        let mut c = AnalyticClassifier::recalibrate(&s.select_rows(&first), &y_first, 0.2).unwrap();
        assert!(matches!(
            c.clone().update(&s.select_rows(&second), &y_second),
            Err(Error::ClassCollision(0))
        ));
        c.update_streaming(&s.select_rows(&second), &y_second).unwrap();
        let full = AnalyticClassifier::recalibrate(&s, &y, 0.2).unwrap();
        assert!(relative_frobenius(c.weights(), full.weights()) < 1e-9);
    }

    #[test]
    fn empty_batch_semantics() {
        let mut rng = Xoshiro256StarStar::seed_from_u64(1);
        let (s0, y0) = random_task(&mut rng, 10, 6, &[0, 1]);
        let c0 = AnalyticClassifier::recalibrate(&s0, &y0, 0.1).unwrap();

        let mut c = c0.clone();
        let empty = FeatureMatrix::zeros(0, 6).unwrap();
        c.update(&empty, &LabelMatrix::one_hot(&[], &[]).unwrap()).unwrap();
        assert_eq!(c, c0);

        c.update(&empty, &LabelMatrix::one_hot(&[], &[7, 8]).unwrap()).unwrap();
        assert_eq!(c.num_classes(), 4);
        assert!(c.weights().columns(2, 2).iter().all(|&v| v == 0.0));
        assert_eq!(c.weights().columns(0, 2), c0.weights().columns(0, 2));
        assert_eq!(c.registry().column(8), Some(3));
    }

    #[test]
    fn all_zero_batch_appends_zero_columns() {
        let mut rng = Xoshiro256StarStar::seed_from_u64(2);
        let (s0, y0) = random_task(&mut rng, 10, 6, &[0, 1]);
        let c0 = AnalyticClassifier::recalibrate(&s0, &y0, 0.1).unwrap();
        let mut c = c0.clone();
        let zeros = FeatureMatrix::zeros(4, 6).unwrap();
        c.update(&zeros, &LabelMatrix::one_hot(&[5, 5, 6, 6], &[5, 6]).unwrap()).unwrap();
        assert_eq!(c.afam(), c0.afam());
        assert_eq!(c.weights().columns(0, 2), c0.weights().columns(0, 2));
        assert!(c.weights().columns(2, 2).iter().all(|&v| v == 0.0));
        let joint = AnalyticClassifier::joint_solve(
            6,
            &[(&s0, &y0), (&zeros, &LabelMatrix::one_hot(&[5, 5, 6, 6], &[5, 6]).unwrap())],
            0.1,
        )
        .unwrap();
        assert!(relative_frobenius(c.weights(), joint.weights()) < 1e-9);
    }

    #[test]
    fn update_errors() {
        let mut rng = Xoshiro256StarStar::seed_from_u64(3);
        let (s0, y0) = random_task(&mut rng, 10, 6, &[0, 1]);
        let mut c = AnalyticClassifier::recalibrate(&s0, &y0, 0.1).unwrap();
        let (s1, _) = random_task(&mut rng, 4, 6, &[1]);
        let y1 = LabelMatrix::one_hot(&[1, 1, 1, 1], &[1]).unwrap();
        assert!(matches!(c.update(&s1, &y1), Err(Error::ClassCollision(1))));
        let (s2, y2) = random_task(&mut rng, 4, 5, &[9]);
        assert!(matches!(c.update(&s2, &y2), Err(Error::Shape(_))));
    }

    #[test]
    fn joint_single_batch_is_recalibrate() {
        let mut rng = Xoshiro256StarStar::seed_from_u64(5);
        let (s, y) = random_task(&mut rng, 12, 7, &[4, 2]);
        let a = AnalyticClassifier::recalibrate(&s, &y, 0.5).unwrap();
        let b = AnalyticClassifier::joint_solve(7, &[(&s, &y)], 0.5).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn joint_order_is_a_column_permutation() {
        let mut rng = Xoshiro256StarStar::seed_from_u64(6);
        let (sa, ya) = random_task(&mut rng, 12, 7, &[0, 1]);
        let (sb, yb) = random_task(&mut rng, 9, 7, &[2]);
        let ab = AnalyticClassifier::joint_solve(7, &[(&sa, &ya), (&sb, &yb)], 0.5).unwrap();
        let ba = AnalyticClassifier::joint_solve(7, &[(&sb, &yb), (&sa, &ya)], 0.5).unwrap();
        assert_eq!(ba.registry().classes().collect::<Vec<_>>(), vec![2, 0, 1]);
        let reordered = ba.weights_for(&[0, 1, 2]).unwrap();
        assert!(relative_frobenius(&reordered, ab.weights()) < 1e-9);
    }

    #[test]
    fn three_batches_chain() {
        let mut rng = Xoshiro256StarStar::seed_from_u64(7);
        let tasks = [
            random_task(&mut rng, 15, 9, &[0, 1]),
            random_task(&mut rng, 11, 9, &[2, 3]),
            random_task(&mut rng, 8, 9, &[4]),
        ];
        let mut c = AnalyticClassifier::recalibrate(&tasks[0].0, &tasks[0].1, 0.5).unwrap();
        for (s, y) in &tasks[1..] {
            c.update(s, y).unwrap();
        }
        let batches: Vec<_> = tasks.iter().map(|(s, y)| (s, y)).collect();
        let joint = AnalyticClassifier::joint_solve(9, &batches, 0.5).unwrap();
        assert!(relative_frobenius(c.weights(), joint.weights()) < 1e-9);
    }

    #[test]
    fn predict_rules() {
        let s = FeatureMatrix::new(DMatrix::identity(2, 2)).unwrap();
        let y = LabelMatrix::one_hot(&[10, 20], &[10, 20]).unwrap();
        let mut c = AnalyticClassifier::recalibrate(&s, &y, 1.0).unwrap();
        *c.weights_mut() = DMatrix::identity(2, 2);
        let x = FeatureMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.5, 0.5]).unwrap();
        assert_eq!(c.predict(&x).unwrap(), vec![10, 10]);
        let x = FeatureMatrix::from_row_slice(1, 2, &[0.1, 0.9]).unwrap();
        assert_eq!(c.predict(&x).unwrap(), vec![20]);

        let empty = AnalyticClassifier::joint_solve(2, &[], 1.0).unwrap();
        assert!(matches!(empty.predict(&x), Err(Error::UntrainedClassifier)));
    }

    #[test]
    fn persistent_state_is_independent_of_sample_count() {
        let mut rng = Xoshiro256StarStar::seed_from_u64(9);
        let (s_small, y_small) = random_task(&mut rng, 5, 8, &[0, 1]);
        let (s_big, y_big) = random_task(&mut rng, 500, 8, &[0, 1]);
        let small = AnalyticClassifier::recalibrate(&s_small, &y_small, 0.1).unwrap();
        let big = AnalyticClassifier::recalibrate(&s_big, &y_big, 0.1).unwrap();
        assert_eq!(small.persistent_elements(), big.persistent_elements());
        assert_eq!(big.persistent_elements(), 64 + 16 + 2);
    }
}
