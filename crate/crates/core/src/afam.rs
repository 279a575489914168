//! The autocorrelation inverse `(Σ SᵢᵀSᵢ + γI)⁻¹` carried between tasks.

use nalgebra::{Cholesky, DMatrix, Dyn};

use crate::error::{Error, Result};
use crate::matrix::FeatureMatrix;

/// Inverse regularized autocorrelation of every expanded batch absorbed so far.
///
/// Symmetric positive definite for any `γ > 0`. Together with the classifier
/// weights it is the only state that survives from one task to the next.
#[derive(Clone, Debug, PartialEq)]
pub struct Afam {
    matrix: DMatrix<f64>,
    gamma: f64,
}

impl Afam {
    /// State before any data: `I / γ`.
    pub fn prior(dim: usize, gamma: f64) -> Result<Self> {
        check_gamma(gamma)?;
        if dim == 0 {
            return Err(Error::InvalidDimension);
        }
        Ok(Self {
            matrix: DMatrix::identity(dim, dim) / gamma,
            gamma,
        })
    }

    /// Direct form: inverts `Σ SᵢᵀSᵢ + γI` through a Cholesky factorization.
    pub fn direct(dim: usize, batches: &[&FeatureMatrix], gamma: f64) -> Result<Self> {
        check_gamma(gamma)?;
        if dim == 0 {
            return Err(Error::InvalidDimension);
        }
        let mut gram = DMatrix::zeros(dim, dim);
        for s in batches {
            check_width(s, dim)?;
            gram += s.as_matrix().tr_mul(s.as_matrix());
        }
        let chol = regularized_cholesky(gram, gamma)?;
        Ok(Self::from_factor(&chol, gamma))
    }

    pub(crate) fn from_factor(chol: &Cholesky<f64, Dyn>, gamma: f64) -> Self {
        let mut matrix = chol.inverse();
        symmetrize(&mut matrix);
        Self { matrix, gamma }
    }

    pub(crate) fn from_parts(matrix: DMatrix<f64>, gamma: f64) -> Self {
        Self { matrix, gamma }
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// Absorbs a batch with the Woodbury identity:
    ///
    /// `A ← A − A Sᵀ (I + S A Sᵀ)⁻¹ S A`
    ///
    /// The `n × n` inner system is SPD and solved by Cholesky. The result is
    /// symmetrized afterwards; the returned value is the relative asymmetry
    /// `‖A − Aᵀ‖_F / ‖A‖_F` measured just before that step.
    pub fn absorb(&mut self, s: &FeatureMatrix) -> Result<f64> {
        self.absorb_with_gain(s).map(|(asym, _)| asym)
    }

    /// As [`absorb`](Self::absorb), also returning the gain
    /// `A Sᵀ (I + S A Sᵀ)⁻¹`, which equals `A_t Sᵀ` for the updated matrix.
    pub(crate) fn absorb_with_gain(&mut self, s: &FeatureMatrix) -> Result<(f64, DMatrix<f64>)> {
        check_width(s, self.dim())?;
        if s.rows() == 0 {
            return Ok((0.0, DMatrix::zeros(self.dim(), 0)));
        }
        let s = s.as_matrix();
        // A Sᵀ, E × n. Its transpose is S A since A is symmetric.
        let a_st = &self.matrix * s.transpose();
        let mut inner = s * &a_st;
        for i in 0..inner.nrows() {
            inner[(i, i)] += 1.0;
        }
        symmetrize(&mut inner);
        let chol = Cholesky::new(inner).ok_or(Error::NotPositiveDefinite("I + S A Sᵀ"))?;
        let gain_t = chol.solve(&a_st.transpose());
        self.matrix -= &a_st * &gain_t;
        let asym = asymmetry(&self.matrix);
        symmetrize(&mut self.matrix);
        Ok((asym, gain_t.transpose()))
    }

    /// Checks positive definiteness by attempting a Cholesky factorization.
    pub fn is_positive_definite(&self) -> bool {
        Cholesky::new(self.matrix.clone()).is_some()
    }
}

/// Relative asymmetry `‖M − Mᵀ‖_F / ‖M‖_F`.
pub fn asymmetry(m: &DMatrix<f64>) -> f64 {
    let norm = m.norm();
    if norm == 0.0 {
        return 0.0;
    }
    (m - m.transpose()).norm() / norm
}

pub(crate) fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

/// Cholesky factor of `gram + γI`.
pub(crate) fn regularized_cholesky(mut gram: DMatrix<f64>, gamma: f64) -> Result<Cholesky<f64, Dyn>> {
    for i in 0..gram.nrows() {
        gram[(i, i)] += gamma;
    }
    symmetrize(&mut gram);
    Cholesky::new(gram).ok_or(Error::NotPositiveDefinite("SᵀS + γI"))
}

pub(crate) fn check_gamma(gamma: f64) -> Result<()> {
    if gamma > 0.0 && gamma.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidRegularizer(gamma))
    }
}

fn check_width(s: &FeatureMatrix, dim: usize) -> Result<()> {
    if s.cols() == dim {
        Ok(())
    } else {
        Err(Error::Shape(format!(
            "batch has {} columns, autocorrelation is {dim}x{dim}",
            s.cols()
        )))
    }
}
