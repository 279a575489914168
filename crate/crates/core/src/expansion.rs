//! Fixed random feature expansion applied in front of the analytic classifier.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::FeatureMatrix;
use crate::rng::Xoshiro256StarStar;

/// Elementwise map applied after the random projection.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Identity,
    #[default]
    #[serde(alias = "rectifier")]
    Relu,
}

impl Activation {
    pub fn code(self) -> u8 {
        match self {
            Activation::Identity => 0,
            Activation::Relu => 1,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(Activation::Identity),
            1 => Some(Activation::Relu),
            _ => None,
        }
    }

    fn apply(self, m: &mut DMatrix<f64>) {
        if self == Activation::Relu {
            m.apply(|v| *v = v.max(0.0));
        }
    }
}

impl std::str::FromStr for Activation {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "identity" => Ok(Activation::Identity),
            "relu" | "rectifier" => Ok(Activation::Relu),
            other => Err(format!("unknown activation `{other}` (expected identity|relu)")),
        }
    }
}

impl std::fmt::Display for Activation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Activation::Identity => "identity",
            Activation::Relu => "relu",
        })
    }
}

/// Immutable `d × E` standard-normal projection.
///
/// Entries are drawn in row-major order from the Box–Muller normal stream of
/// a xoshiro256** generator seeded through SplitMix64, so `(d, E, seed)`
/// reproduces the matrix bit for bit.
#[derive(Clone, Debug, PartialEq)]
pub struct ExpansionMap {
    matrix: DMatrix<f64>,
    seed: u64,
    activation: Activation,
}

impl ExpansionMap {
    pub fn build(dim: usize, expansion_size: usize, seed: u64, activation: Activation) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidDimension);
        }
        if expansion_size <= dim {
            return Err(Error::InvalidExpansionSize {
                dim,
                expansion: expansion_size,
            });
        }
        let mut rng = Xoshiro256StarStar::seed_from_u64(seed);
        let values: Vec<f64> = (0..dim * expansion_size).map(|_| rng.next_normal()).collect();
        Ok(Self {
            matrix: DMatrix::from_row_slice(dim, expansion_size, &values),
            seed,
            activation,
        })
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn expansion_size(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    /// `act(x · W)`, an `n × E` matrix.
    pub fn expand(&self, x: &FeatureMatrix) -> Result<FeatureMatrix> {
        if x.cols() != self.dim() {
            return Err(Error::Shape(format!(
                "expansion expects {} input columns, got {}",
                self.dim(),
                x.cols()
            )));
        }
        let mut out = x.as_matrix() * &self.matrix;
        self.activation.apply(&mut out);
        FeatureMatrix::new(out)
    }
}
