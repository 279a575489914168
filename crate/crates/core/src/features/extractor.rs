//! One-hidden-layer rectifier network used as the frozen feature extractor.
//!
//! It is trained once on the base task with softmax cross-entropy and plain
//! mini-batch SGD, then frozen. Extraction returns the hidden activations;
//! the output layer only exists to give pretraining a target.

use nalgebra::{DMatrix, RowDVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{ClassId, FeatureMatrix};
use crate::rng::Xoshiro256StarStar;

use super::LabeledDataset;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PretrainConfig {
    pub hidden: usize,
    pub epochs: usize,
    pub lr: f64,
    pub seed: u64,
    #[serde(default = "default_batch_size")]
    pub batch_size: usize,
}

fn default_batch_size() -> usize {
    32
}

impl PretrainConfig {
    pub fn new(hidden: usize, epochs: usize, lr: f64, seed: u64) -> Self {
        Self {
            hidden,
            epochs,
            lr,
            seed,
            batch_size: default_batch_size(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExtractorModel {
    w1: DMatrix<f64>,
    b1: RowDVector<f64>,
    w2: DMatrix<f64>,
    b2: RowDVector<f64>,
    frozen: bool,
}

/// Gradients of the mean cross-entropy, same shapes as the parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    pub w1: DMatrix<f64>,
    pub b1: RowDVector<f64>,
    pub w2: DMatrix<f64>,
    pub b2: RowDVector<f64>,
}

impl Gradients {
    /// Flattened in the order of [`ExtractorModel::parameters`].
    pub fn flatten(&self) -> Vec<f64> {
        flatten(&self.w1, &self.b1, &self.w2, &self.b2)
    }
}

/// Result of pretraining: the frozen model, its output-index → class map and
/// the mean training loss of every epoch.
#[derive(Clone, Debug)]
pub struct Pretrained {
    pub model: ExtractorModel,
    pub classes: Vec<ClassId>,
    pub epoch_losses: Vec<f64>,
}

impl ExtractorModel {
    /// He-initialized, unfrozen model with zero biases.
    pub fn init(input_dim: usize, hidden: usize, outputs: usize, seed: u64) -> Result<Self> {
        if input_dim == 0 || hidden == 0 || outputs == 0 {
            return Err(Error::InvalidTrainingConfig(
                "input, hidden and output widths must be positive".into(),
            ));
        }
        let mut rng = Xoshiro256StarStar::derive(seed, 1);
        let s1 = (2.0 / input_dim as f64).sqrt();
        let s2 = (1.0 / hidden as f64).sqrt();
        let w1 = DMatrix::from_fn(input_dim, hidden, |_, _| s1 * rng.next_normal());
        let w2 = DMatrix::from_fn(hidden, outputs, |_, _| s2 * rng.next_normal());
        Ok(Self {
            w1,
            b1: RowDVector::zeros(hidden),
            w2,
            b2: RowDVector::zeros(outputs),
            frozen: false,
        })
    }

    /// Unfrozen model from explicit parameters.
    pub fn from_parameters(
        w1: DMatrix<f64>,
        b1: RowDVector<f64>,
        w2: DMatrix<f64>,
        b2: RowDVector<f64>,
    ) -> Result<Self> {
        if b1.len() != w1.ncols() || w2.nrows() != w1.ncols() || b2.len() != w2.ncols() {
            return Err(Error::Shape("inconsistent extractor parameter shapes".into()));
        }
        Ok(Self {
            w1,
            b1,
            w2,
            b2,
            frozen: false,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.w1.nrows()
    }

    pub fn hidden_width(&self) -> usize {
        self.w1.ncols()
    }

    pub fn outputs(&self) -> usize {
        self.w2.ncols()
    }

    pub fn is_frozen(&self) -> bool {
        self.frozen
    }

    pub fn freeze(&mut self) {
        self.frozen = true;
    }

    /// All parameters flattened: `w1` row-major, `b1`, `w2` row-major, `b2`.
    pub fn parameters(&self) -> Vec<f64> {
        flatten(&self.w1, &self.b1, &self.w2, &self.b2)
    }

    /// Overwrites all parameters from the flat layout of [`parameters`](Self::parameters).
    pub fn set_parameters(&mut self, flat: &[f64]) -> Result<()> {
        if self.frozen {
            return Err(Error::InvalidTrainingConfig("model is frozen".into()));
        }
        if flat.len() != self.parameters().len() {
            return Err(Error::Shape(format!("expected {} parameters", self.parameters().len())));
        }
        let mut it = flat.iter().copied();
        let (d, h, c) = (self.input_dim(), self.hidden_width(), self.outputs());
        for i in 0..d {
            for j in 0..h {
                self.w1[(i, j)] = it.next().expect("length checked");
            }
        }
        for j in 0..h {
            self.b1[j] = it.next().expect("length checked");
        }
        for i in 0..h {
            for j in 0..c {
                self.w2[(i, j)] = it.next().expect("length checked");
            }
        }
        for j in 0..c {
            self.b2[j] = it.next().expect("length checked");
        }
        Ok(())
    }

    /// Little-endian dump of every parameter plus the frozen flag.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out: Vec<u8> = self.parameters().iter().flat_map(|v| v.to_le_bytes()).collect();
        out.push(self.frozen as u8);
        out
    }

    fn hidden_pre(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let mut z = x * &self.w1;
        for mut row in z.row_iter_mut() {
            row += &self.b1;
        }
        z
    }

    fn logits_from_hidden(&self, h: &DMatrix<f64>) -> DMatrix<f64> {
        let mut z = h * &self.w2;
        for mut row in z.row_iter_mut() {
            row += &self.b2;
        }
        z
    }

    /// Output-layer logits, `n × outputs`.
    pub fn logits(&self, x: &FeatureMatrix) -> Result<DMatrix<f64>> {
        self.check_input(x)?;
        let h = relu(self.hidden_pre(x.as_matrix()));
        Ok(self.logits_from_hidden(&h))
    }

    /// Mean softmax cross-entropy of `targets` (output indices).
    pub fn loss(&self, x: &DMatrix<f64>, targets: &[usize]) -> f64 {
        let h = relu(self.hidden_pre(x));
        let probs = softmax_rows(self.logits_from_hidden(&h));
        mean_nll(&probs, targets)
    }

    /// Mean cross-entropy and its gradient with respect to every parameter.
    pub fn loss_and_gradients(&self, x: &DMatrix<f64>, targets: &[usize]) -> (f64, Gradients) {
        let n = x.nrows();
        let pre = self.hidden_pre(x);
        let h = relu(pre.clone());
        let probs = softmax_rows(self.logits_from_hidden(&h));
        let loss = mean_nll(&probs, targets);

        let mut d_logits = probs;
        for (i, &t) in targets.iter().enumerate() {
            d_logits[(i, t)] -= 1.0;
        }
        d_logits /= n as f64;
        let w2 = h.tr_mul(&d_logits);
        let b2 = column_sums(&d_logits);
        let mut d_hidden = &d_logits * self.w2.transpose();
        d_hidden.zip_apply(&pre, |g, z| {
            if z <= 0.0 {
                *g = 0.0;
            }
        });
        let w1 = x.tr_mul(&d_hidden);
        let b1 = column_sums(&d_hidden);
        (loss, Gradients { w1, b1, w2, b2 })
    }

    fn sgd_step(&mut self, g: &Gradients, lr: f64) {
        self.w1 -= &g.w1 * lr;
        self.b1 -= &g.b1 * lr;
        self.w2 -= &g.w2 * lr;
        self.b2 -= &g.b2 * lr;
    }

    /// Hidden-layer activations, `n × H`. Requires a frozen model.
    pub fn extract(&self, x: &FeatureMatrix) -> Result<FeatureMatrix> {
        if !self.frozen {
            return Err(Error::ExtractorNotFrozen);
        }
        self.check_input(x)?;
        FeatureMatrix::new(relu(self.hidden_pre(x.as_matrix())))
    }

    fn check_input(&self, x: &FeatureMatrix) -> Result<()> {
        if x.cols() == self.input_dim() {
            Ok(())
        } else {
            Err(Error::Shape(format!(
                "extractor expects {} input columns, got {}",
                self.input_dim(),
                x.cols()
            )))
        }
    }
}

/// Trains an extractor on the base task and returns it frozen.
///
/// Mini-batch SGD without momentum; the sample order is reshuffled from
/// `cfg.seed` every epoch.
pub fn pretrain_extractor(d0: &LabeledDataset, cfg: &PretrainConfig) -> Result<Pretrained> {
    if !(cfg.lr > 0.0 && cfg.lr.is_finite()) {
        return Err(Error::InvalidLearningRate(cfg.lr));
    }
    if cfg.epochs == 0 || cfg.batch_size == 0 {
        return Err(Error::InvalidTrainingConfig(
            "epochs and batch_size must be at least 1".into(),
        ));
    }
    let classes = d0.classes();
    if classes.len() < 2 {
        return Err(Error::InvalidPretrainSet(classes.len()));
    }
    let targets: Vec<usize> = d0
        .labels()
        .iter()
        .map(|l| classes.binary_search(l).expect("label from the class list"))
        .collect();
    let mut model = ExtractorModel::init(d0.dim(), cfg.hidden, classes.len(), cfg.seed)?;
    let mut order_rng = Xoshiro256StarStar::derive(cfg.seed, 2);
    let mut order: Vec<usize> = (0..d0.len()).collect();
    let x = d0.features().as_matrix();
    let mut epoch_losses = Vec::with_capacity(cfg.epochs);
    for _ in 0..cfg.epochs {
        order_rng.shuffle(&mut order);
        let mut total = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            let xb = x.select_rows(chunk);
            let tb: Vec<usize> = chunk.iter().map(|&i| targets[i]).collect();
            let (loss, grads) = model.loss_and_gradients(&xb, &tb);
            total += loss * chunk.len() as f64;
            model.sgd_step(&grads, cfg.lr);
        }
        epoch_losses.push(total / d0.len() as f64);
    }
    model.freeze();
    Ok(Pretrained {
        model,
        classes,
        epoch_losses,
    })
}

fn flatten(w1: &DMatrix<f64>, b1: &RowDVector<f64>, w2: &DMatrix<f64>, b2: &RowDVector<f64>) -> Vec<f64> {
    let mut out = Vec::with_capacity(w1.len() + b1.len() + w2.len() + b2.len());
    // column-major storage of the transpose is row-major order
    out.extend(w1.transpose().iter().copied());
    out.extend(b1.iter().copied());
    out.extend(w2.transpose().iter().copied());
    out.extend(b2.iter().copied());
    out
}

fn relu(mut m: DMatrix<f64>) -> DMatrix<f64> {
    m.apply(|v| *v = v.max(0.0));
    m
}

fn softmax_rows(mut z: DMatrix<f64>) -> DMatrix<f64> {
    for mut row in z.row_iter_mut() {
        let max = row.max();
        row.apply(|v| *v = (*v - max).exp());
        let sum = row.sum();
        row /= sum;
    }
    z
}

fn mean_nll(probs: &DMatrix<f64>, targets: &[usize]) -> f64 {
    let total: f64 = targets
        .iter()
        .enumerate()
        .map(|(i, &t)| -probs[(i, t)].max(f64::MIN_POSITIVE).ln())
        .sum();
    total / targets.len().max(1) as f64
}

fn column_sums(m: &DMatrix<f64>) -> RowDVector<f64> {
    m.row_sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{gen_synth, SynthSpec};

    fn synth(n_classes: usize, per: usize, seed: u64) -> LabeledDataset {
        gen_synth(&SynthSpec {
            n_classes,
            samples_per_class: per,
            raw_dim: 8,
            cluster_separation: 4.0,
            noise_sigma: 1.0,
            seed,
        })
        .unwrap()
    }

    fn accuracy(p: &Pretrained, ds: &LabeledDataset) -> f64 {
        let logits = p.model.logits(ds.features()).unwrap();
        let correct = logits
            .row_iter()
            .zip(ds.labels())
            .filter(|(row, &label)| p.classes[row.transpose().argmax().0] == label)
            .count();
        correct as f64 / ds.len() as f64
    }

    #[test]
    fn learns_separable_task() {
        let train = synth(3, 100, 1);
        let holdout = synth(3, 50, 2);
        let cfg = PretrainConfig::new(32, 20, 0.05, 7);
        let p = pretrain_extractor(&train, &cfg).unwrap();
        assert!(p.model.is_frozen());
        assert_eq!(p.epoch_losses.len(), 20);
        assert!(p.epoch_losses.last().unwrap() <= p.epoch_losses.first().unwrap());
        assert!(*p.epoch_losses.last().unwrap() < (3f64).ln());
        let acc = accuracy(&p, &holdout);
        assert!(acc >= 0.95, "holdout accuracy {acc}");
    }

    #[test]
    fn gradient_matches_central_differences() {
        let ds = synth(3, 2, 4).select(&[0, 1, 2, 3, 4]);
        let targets: Vec<usize> = ds.labels().iter().map(|&l| l as usize).collect();
        let mut model = ExtractorModel::init(8, 6, 3, 11).unwrap();
        // nonzero biases so every bias gradient is exercised
        let mut params = model.parameters();
        let n = params.len();
        for (k, p) in params.iter_mut().enumerate().skip(8 * 6) {
            *p += 0.05 * ((k % 7) as f64 - 3.0);
        }
        model.set_parameters(&params).unwrap();
        let x = ds.features().as_matrix();
        let (_, grads) = model.loss_and_gradients(x, &targets);
        let analytic = grads.flatten();
        assert_eq!(analytic.len(), n);
        let h = 1e-5;
        for k in 0..n {
            let mut plus = model.clone();
            let mut minus = model.clone();
            let mut p = params.clone();
            p[k] += h;
            plus.set_parameters(&p).unwrap();
            p[k] -= 2.0 * h;
            minus.set_parameters(&p).unwrap();
            let fd = (plus.loss(x, &targets) - minus.loss(x, &targets)) / (2.0 * h);
            let scale = analytic[k].abs().max(fd.abs());
            if scale > 1e-8 {
                assert!(
                    (analytic[k] - fd).abs() / scale <= 1e-4,
                    "param {k}: analytic {} vs fd {fd}",
                    analytic[k]
                );
            }
        }
    }

    #[test]
    fn rejects_bad_configs() {
        let ds = synth(3, 5, 1);
        assert!(matches!(
            pretrain_extractor(&ds, &PretrainConfig::new(4, 1, 0.0, 0)),
            Err(Error::InvalidLearningRate(_))
        ));
        let single = ds.filter_classes(&[1]);
        assert!(matches!(
            pretrain_extractor(&single, &PretrainConfig::new(4, 1, 0.1, 0)),
            Err(Error::InvalidPretrainSet(1))
        ));
        assert!(pretrain_extractor(&ds, &PretrainConfig::new(4, 0, 0.1, 0)).is_err());
    }

    #[test]
    fn extraction_requires_frozen_model() {
        let model = ExtractorModel::init(3, 4, 2, 0).unwrap();
        let x = FeatureMatrix::zeros(2, 3).unwrap();
        assert!(matches!(model.extract(&x), Err(Error::ExtractorNotFrozen)));
    }

    #[test]
    fn zero_input_zero_bias() {
        let mut model = ExtractorModel::init(3, 4, 2, 0).unwrap();
        model.freeze();
        let out = model.extract(&FeatureMatrix::zeros(2, 3).unwrap()).unwrap();
        assert_eq!(out.cols(), 4);
        assert!(out.as_matrix().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn tiny_model_by_hand() {
        let mut model = ExtractorModel::from_parameters(
            DMatrix::from_row_slice(2, 1, &[2.0, -1.0]),
            RowDVector::from_row_slice(&[0.5]),
            DMatrix::from_row_slice(1, 2, &[1.0, -1.0]),
            RowDVector::zeros(2),
        )
        .unwrap();
        model.freeze();
        let x = FeatureMatrix::from_row_slice(2, 2, &[1.0, 1.0, -1.0, 3.0]).unwrap();
        let out = model.extract(&x).unwrap();
        // relu(2 - 1 + 0.5) = 1.5, relu(-2 - 3 + 0.5) = 0
        assert_eq!(out.row_values(0), vec![1.5]);
        assert_eq!(out.row_values(1), vec![0.0]);
    }

    #[test]
    fn extraction_is_batch_invariant_and_pure() {
        let p = pretrain_extractor(&synth(3, 20, 3), &PretrainConfig::new(16, 3, 0.05, 1)).unwrap();
        let bytes = p.model.to_bytes();
        let a = synth(3, 4, 10);
        let b = synth(3, 3, 11);
        let joined = LabeledDataset::concat(&[&a, &b]).unwrap();
        let whole = p.model.extract(joined.features()).unwrap();
        let parts = FeatureMatrix::vstack(&[
            &p.model.extract(a.features()).unwrap(),
            &p.model.extract(b.features()).unwrap(),
        ])
        .unwrap();
        assert_eq!(whole, parts);
        for _ in 0..5 {
            p.model.extract(joined.features()).unwrap();
        }
        assert_eq!(p.model.to_bytes(), bytes);
    }

    #[test]
    fn frozen_model_rejects_parameter_writes() {
        let mut m = ExtractorModel::init(2, 3, 2, 0).unwrap();
        m.freeze();
        let p = m.parameters();
        assert!(m.set_parameters(&p).is_err());
    }
}
