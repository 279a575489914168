use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{ClassId, FeatureMatrix};
use crate::rng::Xoshiro256StarStar;

use super::LabeledDataset;

/// Isotropic Gaussian clusters, one per class.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthSpec {
    pub n_classes: usize,
    pub samples_per_class: usize,
    pub raw_dim: usize,
    pub cluster_separation: f64,
    pub noise_sigma: f64,
    pub seed: u64,
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_classes < 2 {
            return Err(Error::InvalidSynthSpec(format!(
                "n_classes must be at least 2, got {}",
                self.n_classes
            )));
        }
        if self.raw_dim == 0 {
            return Err(Error::InvalidSynthSpec("raw_dim must be at least 1".into()));
        }
        if self.samples_per_class == 0 {
            return Err(Error::InvalidSynthSpec("samples_per_class must be at least 1".into()));
        }
        if !(self.cluster_separation > 0.0 && self.cluster_separation.is_finite()) {
            return Err(Error::InvalidSynthSpec("cluster_separation must be positive".into()));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(Error::InvalidSynthSpec("noise_sigma must be non-negative".into()));
        }
        Ok(())
    }

    /// Class means. The first `raw_dim` classes sit on `separation · e_c`;
    /// each further block of `raw_dim` classes reuses those axes under its
    /// own random rotation.
    pub fn anchors(&self) -> Result<Vec<DVector<f64>>> {
        self.validate()?;
        let d = self.raw_dim;
        let mut rot_rng = Xoshiro256StarStar::derive(self.seed, 1);
        let cycles = self.n_classes.div_ceil(d);
        let mut rotations = vec![DMatrix::identity(d, d)];
        for _ in 1..cycles {
            let g = DMatrix::from_fn(d, d, |_, _| rot_rng.next_normal());
            rotations.push(g.qr().q());
        }
        Ok((0..self.n_classes)
            .map(|c| {
                let axis = DVector::from_fn(d, |i, _| if i == c % d { self.cluster_separation } else { 0.0 });
                &rotations[c / d] * axis
            })
            .collect())
    }
}

/// Generates `samples_per_class` draws of `N(μ_c, σ²I)` per class, class-major.
/// Labels are `0..n_classes`.
pub fn gen_synth(spec: &SynthSpec) -> Result<LabeledDataset> {
    let anchors = spec.anchors()?;
    let d = spec.raw_dim;
    let n = spec.n_classes * spec.samples_per_class;
    let mut noise = Xoshiro256StarStar::derive(spec.seed, 2);
    let mut values = Vec::with_capacity(n * d);
    let mut labels = Vec::with_capacity(n);
    for (c, mu) in anchors.iter().enumerate() {
        for _ in 0..spec.samples_per_class {
            values.extend(mu.iter().map(|m| m + spec.noise_sigma * noise.next_normal()));
            labels.push(c as ClassId);
        }
    }
    LabeledDataset::new(FeatureMatrix::from_row_slice(n, d, &values)?, labels)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(n_classes: usize, sep: f64, sigma: f64, per: usize, seed: u64) -> SynthSpec {
        SynthSpec {
            n_classes,
            samples_per_class: per,
            raw_dim: 4,
            cluster_separation: sep,
            noise_sigma: sigma,
            seed,
        }
    }

    #[test]
    fn nearest_centroid_separates_holdout() {
        let train = gen_synth(&spec(2, 10.0, 0.1, 50, 1)).unwrap();
        let test = gen_synth(&spec(2, 10.0, 0.1, 50, 1001)).unwrap();
        let centroid = |c: ClassId| {
            let rows: Vec<usize> = (0..train.len()).filter(|&i| train.labels()[i] == c).collect();
            let sub = train.select(&rows);
            sub.features().as_matrix().row_mean()
        };
        let centroids = [centroid(0), centroid(1)];
        let correct = (0..test.len())
            .filter(|&i| {
                let x = test.features().as_matrix().row(i);
                let d0 = (x - &centroids[0]).norm();
                let d1 = (x - &centroids[1]).norm();
                let pred = if d0 <= d1 { 0 } else { 1 };
                pred == test.labels()[i]
            })
            .count();
        assert!(correct as f64 / test.len() as f64 >= 0.99);
    }

    #[test]
    fn zero_noise_gives_means() {
        let s = spec(3, 2.0, 0.0, 5, 9);
        let ds = gen_synth(&s).unwrap();
        let anchors = s.anchors().unwrap();
        for i in 0..ds.len() {
            let mu = &anchors[ds.labels()[i] as usize];
            assert_eq!(ds.features().row_values(i), mu.iter().copied().collect::<Vec<_>>());
        }
    }

    #[test]
    fn deterministic_in_seed() {
        let a = gen_synth(&spec(6, 3.0, 1.0, 10, 5)).unwrap();
        let b = gen_synth(&spec(6, 3.0, 1.0, 10, 5)).unwrap();
        assert_eq!(a, b);
        let c = gen_synth(&spec(6, 3.0, 1.0, 10, 6)).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn anchors_beyond_dimension_are_rotated() {
        let s = spec(10, 5.0, 0.0, 1, 2);
        let anchors = s.anchors().unwrap();
        for a in &anchors {
            assert!((a.norm() - 5.0).abs() < 1e-12);
        }
        assert!((&anchors[4] - &anchors[0]).norm() > 1e-6);
        assert_eq!(anchors[0][0], 5.0);
    }

    #[test]
    fn validation() {
        assert!(gen_synth(&spec(1, 1.0, 0.1, 5, 0)).is_err());
        assert!(gen_synth(&spec(2, 0.0, 0.1, 5, 0)).is_err());
        assert!(gen_synth(&spec(2, 1.0, -0.1, 5, 0)).is_err());
    }
}
