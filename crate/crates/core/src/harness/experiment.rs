use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::classifier::AnalyticClassifier;
use crate::error::{Error, Result};
use crate::expansion::{Activation, ExpansionMap};
use crate::features::{gen_synth, load_manifest, pretrain_extractor, LabeledDataset, PretrainConfig, Pretrained, SynthSpec};
use crate::matrix::{ClassId, FeatureMatrix, LabelMatrix};
use crate::snapshot::Snapshot;

use super::metrics::{AccuracyMatrix, MetricsReport};
use super::split::TaskSplit;

/// Train and test samples for every class of an experiment.
#[derive(Clone, Debug, PartialEq)]
pub struct DataPool {
    pub train: LabeledDataset,
    pub test: LabeledDataset,
}

impl DataPool {
    /// Generates clusters and holds out the last `test_fraction` of every
    /// class for testing.
    pub fn from_synth(spec: &SynthSpec, test_fraction: f64) -> Result<Self> {
        let ds = gen_synth(spec)?;
        let per = spec.samples_per_class;
        let n_test = (per as f64 * test_fraction).round() as usize;
        if !(test_fraction > 0.0 && test_fraction < 1.0) || n_test == 0 || n_test >= per {
            return Err(Error::InvalidSynthSpec(format!(
                "test_fraction {test_fraction} leaves no train or no test samples out of {per} per class"
            )));
        }
        let (mut train_rows, mut test_rows) = (Vec::new(), Vec::new());
        for c in 0..spec.n_classes {
            let start = c * per;
            train_rows.extend(start..start + per - n_test);
            test_rows.extend(start + per - n_test..start + per);
        }
        Ok(Self {
            train: ds.select(&train_rows),
            test: ds.select(&test_rows),
        })
    }

    /// Loads a manifest; its task list becomes the split.
    pub fn from_manifest(path: &Path) -> Result<(Self, TaskSplit)> {
        let (manifest, data) = load_manifest(path)?;
        let trains: Vec<&LabeledDataset> = data.iter().map(|(tr, _)| tr).collect();
        let tests: Vec<&LabeledDataset> = data.iter().map(|(_, te)| te).collect();
        let pool = Self {
            train: LabeledDataset::concat(&trains)?,
            test: LabeledDataset::concat(&tests)?,
        };
        let mut tasks = manifest.tasks.iter().map(|t| t.classes.clone());
        let base = tasks.next().expect("manifest has tasks");
        let split = TaskSplit::new(base, tasks.collect(), 0)?;
        Ok((pool, split))
    }

    pub fn dim(&self) -> usize {
        self.train.dim()
    }

    pub fn classes(&self) -> Vec<ClassId> {
        let mut c = self.train.classes();
        c.extend(self.test.classes());
        c.sort_unstable();
        c.dedup();
        c
    }
}

/// Hyperparameters of one run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Hyper {
    pub gamma: f64,
    pub expansion_size: usize,
    pub activation: Activation,
    pub expansion_seed: u64,
    /// Absent: features go straight into the expansion.
    pub extractor: Option<PretrainConfig>,
}

/// One task after feature extraction and expansion.
#[derive(Clone, Debug)]
pub struct PreparedTask {
    pub classes: Vec<ClassId>,
    pub train_features: FeatureMatrix,
    pub train_labels: LabelMatrix,
    pub test_features: FeatureMatrix,
    pub test_labels: Vec<ClassId>,
}

/// Output of the pretraining stage plus every task's expanded features.
#[derive(Clone, Debug)]
pub struct PreparedRun {
    pub expansion: ExpansionMap,
    pub extractor: Option<Pretrained>,
    pub tasks: Vec<PreparedTask>,
    pub pretrain_seconds: f64,
    pub gamma: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StageSeconds {
    pub pretrain: f64,
    pub recalibrate: f64,
    pub adaptation: f64,
    pub evaluation: f64,
}

#[derive(Clone, Debug)]
pub struct ExperimentOutcome {
    pub report: MetricsReport,
    pub accuracy: AccuracyMatrix,
    pub snapshot: Snapshot,
    pub stage_seconds: StageSeconds,
}

impl ExperimentOutcome {
    /// Wall-clock seconds of each incremental update.
    pub fn measure_tt(&self) -> &[f64] {
        &self.report.tt_per_task
    }
}

/// Stage 1 and the feature path: pretrains the extractor on the base task
/// (when configured), then extracts and expands every task's samples.
pub fn prepare(pool: &DataPool, split: &TaskSplit, hyper: &Hyper) -> Result<PreparedRun> {
    let pool_classes = pool.classes();
    if split.all_classes() != pool_classes {
        return Err(Error::InvalidSplit(format!(
            "split covers {} classes, data has {}",
            split.all_classes().len(),
            pool_classes.len()
        )));
    }
    let raw: Vec<(&[ClassId], LabeledDataset, LabeledDataset)> = split
        .tasks()
        .map(|classes| (classes, pool.train.filter_classes(classes), pool.test.filter_classes(classes)))
        .collect();
    for (t, (_, train, test)) in raw.iter().enumerate() {
        if train.is_empty() {
            return Err(Error::EmptyTask { task: t, set: "train" });
        }
        if test.is_empty() {
            return Err(Error::EmptyTask { task: t, set: "test" });
        }
    }

    let started = Instant::now();
    let extractor = match &hyper.extractor {
        Some(cfg) => Some(pretrain_extractor(&raw[0].1, cfg)?),
        None => None,
    };
    let pretrain_seconds = started.elapsed().as_secs_f64();

    let feature_dim = extractor.as_ref().map_or(pool.dim(), |p| p.model.hidden_width());
    let expansion = ExpansionMap::build(feature_dim, hyper.expansion_size, hyper.expansion_seed, hyper.activation)?;
    let featurize = |x: &FeatureMatrix| -> Result<FeatureMatrix> {
        match &extractor {
            Some(p) => expansion.expand(&p.model.extract(x)?),
            None => expansion.expand(x),
        }
    };
    let tasks = raw
        .iter()
        .map(|(classes, train, test)| {
            Ok(PreparedTask {
                classes: classes.to_vec(),
                train_features: featurize(train.features())?,
                train_labels: LabelMatrix::one_hot(train.labels(), classes)?,
                test_features: featurize(test.features())?,
                test_labels: test.labels().to_vec(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PreparedRun {
        expansion,
        extractor,
        tasks,
        pretrain_seconds,
        gamma: hyper.gamma,
    })
}

/// Runs the full pipeline: pretraining, recalibration on the base task and
/// one recursive update per step, evaluating on every seen task after each.
pub fn run_experiment(pool: &DataPool, split: &TaskSplit, hyper: &Hyper) -> Result<ExperimentOutcome> {
    let prepared = prepare(pool, split, hyper)?;
    run_prepared(&prepared)
}

/// Stages 2 and 3 over already prepared features.
pub fn run_prepared(prepared: &PreparedRun) -> Result<ExperimentOutcome> {
    let mut stages = StageSeconds {
        pretrain: prepared.pretrain_seconds,
        ..Default::default()
    };
    let test_counts: Vec<usize> = prepared.tasks.iter().map(|t| t.test_labels.len()).collect();
    let mut correct: Vec<Vec<usize>> = Vec::with_capacity(prepared.tasks.len());
    let mut tt = Vec::with_capacity(prepared.tasks.len().saturating_sub(1));

    let base = &prepared.tasks[0];
    let started = Instant::now();
    let mut classifier = AnalyticClassifier::recalibrate(&base.train_features, &base.train_labels, prepared.gamma)?;
    stages.recalibrate = started.elapsed().as_secs_f64();

    for t in 0..prepared.tasks.len() {
        if t > 0 {
            let task = &prepared.tasks[t];
            let started = Instant::now();
            classifier.update(&task.train_features, &task.train_labels)?;
            let secs = started.elapsed().as_secs_f64();
            tt.push(secs);
            stages.adaptation += secs;
        }
        let started = Instant::now();
        correct.push(evaluate(&classifier, &prepared.tasks[..=t])?);
        stages.evaluation += started.elapsed().as_secs_f64();
    }

    let accuracy = AccuracyMatrix::from_correct_counts(&correct, &test_counts)?;
    let snapshot = Snapshot::new(&prepared.expansion, classifier)?;
    let report = MetricsReport {
        acc: accuracy.acc()?,
        bwt: accuracy.bwt(),
        tt_per_task: tt,
        extra_memory_elements: snapshot.element_count(),
    };
    Ok(ExperimentOutcome {
        report,
        accuracy,
        snapshot,
        stage_seconds: stages,
    })
}

/// Correct predictions on each task's test set.
pub(crate) fn evaluate(classifier: &AnalyticClassifier, tasks: &[PreparedTask]) -> Result<Vec<usize>> {
    tasks
        .iter()
        .map(|task| {
            let pred = classifier.predict(&task.test_features)?;
            Ok(pred.iter().zip(&task.test_labels).filter(|(p, l)| p == l).count())
        })
        .collect()
}
