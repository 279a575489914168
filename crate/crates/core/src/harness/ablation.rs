//! Expansion-size sweep on a nonlinear synthetic benchmark.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expansion::{Activation, ExpansionMap};
use crate::features::{LabeledDataset, SynthSpec};
use crate::matrix::ClassId;

use super::experiment::{prepare, run_prepared, DataPool, Hyper};
use super::split::split_tasks;

/// Several Gaussian clusters per class, assigned round-robin so that no
/// class is linearly separable, then pushed through a frozen random
/// rectifier map.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NonlinearBenchmark {
    pub n_classes: usize,
    pub clusters_per_class: usize,
    pub samples_per_cluster: usize,
    pub raw_dim: usize,
    pub warp_dim: usize,
    pub warp_seed: u64,
    pub cluster_separation: f64,
    pub noise_sigma: f64,
    pub test_fraction: f64,
    pub base_classes: usize,
}

impl Default for NonlinearBenchmark {
    fn default() -> Self {
        Self {
            n_classes: 10,
            clusters_per_class: 4,
            samples_per_cluster: 100,
            raw_dim: 8,
            warp_dim: 16,
            warp_seed: 0x5eed,
            cluster_separation: 3.0,
            noise_sigma: 0.7,
            test_fraction: 0.25,
            base_classes: 5,
        }
    }
}

impl NonlinearBenchmark {
    /// Draws the data for one seed. The warp map does not depend on it.
    pub fn pool(&self, seed: u64) -> Result<DataPool> {
        if self.clusters_per_class == 0 {
            return Err(Error::InvalidSynthSpec("clusters_per_class must be at least 1".into()));
        }
        let spec = SynthSpec {
            n_classes: self.n_classes * self.clusters_per_class,
            samples_per_class: self.samples_per_cluster,
            raw_dim: self.raw_dim,
            cluster_separation: self.cluster_separation,
            noise_sigma: self.noise_sigma,
            seed,
        };
        let clusters = DataPool::from_synth(&spec, self.test_fraction)?;
        let warp = ExpansionMap::build(self.raw_dim, self.warp_dim, self.warp_seed, Activation::Relu)?;
        let n = self.n_classes as ClassId;
        let remap = |ds: &LabeledDataset| -> Result<LabeledDataset> {
            let labels = ds.labels().iter().map(|c| c % n).collect();
            LabeledDataset::new(warp.expand(ds.features())?, labels)
        };
        Ok(DataPool {
            train: remap(&clusters.train)?,
            test: remap(&clusters.test)?,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepPoint {
    pub expansion: usize,
    pub mean_acc: f64,
    pub std_err: f64,
    /// Final `A_T` per seed.
    pub accs: Vec<f64>,
}

/// Final accuracy for every expansion size and seed. The seed drives the
/// data draw, the class split and the expansion map.
pub fn expansion_sweep(bench: &NonlinearBenchmark, sizes: &[usize], gamma: f64, seeds: &[u64]) -> Result<Vec<SweepPoint>> {
    let mut accs = vec![Vec::with_capacity(seeds.len()); sizes.len()];
    for &seed in seeds {
        let pool = bench.pool(seed)?;
        let steps = bench.n_classes.saturating_sub(bench.base_classes);
        let split = split_tasks(&pool.classes(), bench.base_classes, steps, 1, seed)?;
        for (i, &e) in sizes.iter().enumerate() {
            let hyper = Hyper {
                gamma,
                expansion_size: e,
                activation: Activation::Relu,
                expansion_seed: seed,
                extractor: None,
            };
            let outcome = run_prepared(&prepare(&pool, &split, &hyper)?)?;
            let a = outcome.accuracy.accuracies();
            accs[i].push(a[a.len() - 1]);
        }
    }
    Ok(sizes
        .iter()
        .zip(accs)
        .map(|(&expansion, accs)| {
            let n = accs.len() as f64;
            let mean = accs.iter().sum::<f64>() / n;
            let var = if accs.len() > 1 {
                accs.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / (n - 1.0)
            } else {
                0.0
            };
            SweepPoint {
                expansion,
                mean_acc: mean,
                std_err: (var / n).sqrt(),
                accs,
            }
        })
        .collect())
}
