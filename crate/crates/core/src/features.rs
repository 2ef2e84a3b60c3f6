use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};

const NORM_SLACK: f64 = 1e-12;
const RANK_TOL: f64 = 1e-9;

/// `Φ`, one feature row `φ(s)ᵀ` per state.
#[derive(Debug, Clone)]
pub struct FeatureMap {
    phi: Matrix,
    // row-major copy for the sampling loop
    rows: Vec<f64>,
}

impl FeatureMap {
    pub fn new(phi: Matrix) -> Result<Self> {
        if phi.nrows() == 0 || phi.ncols() == 0 {
            return Err(Error::invalid("features", "empty feature matrix"));
        }
        if phi.ncols() > phi.nrows() {
            return Err(Error::invalid(
                "features",
                format!(
                    "{} columns cannot be independent over {} states",
                    phi.ncols(),
                    phi.nrows()
                ),
            ));
        }
        for s in 0..phi.nrows() {
            let norm = phi.row(s).norm();
            if norm > 1.0 + NORM_SLACK {
                return Err(Error::invalid("features", format!("‖φ({s})‖ = {norm} exceeds 1")));
            }
        }
        let smallest = linalg::min_singular_value(&phi);
        if smallest <= RANK_TOL {
            return Err(Error::invalid(
                "features",
                format!("columns are linearly dependent (smallest singular value {smallest:e})"),
            ));
        }
        let rows = (0..phi.nrows())
            .flat_map(|s| phi.row(s).iter().copied().collect::<Vec<_>>())
            .collect();
        Ok(FeatureMap { phi, rows })
    }

    /// One-hot features.
    pub fn tabular(num_states: usize) -> Self {
        Self::new(Matrix::identity(num_states, num_states)).expect("identity features are valid")
    }

    pub fn matrix(&self) -> &Matrix {
        &self.phi
    }

    pub fn num_states(&self) -> usize {
        self.phi.nrows()
    }

    pub fn dim(&self) -> usize {
        self.phi.ncols()
    }

    #[inline]
    pub fn row(&self, s: usize) -> &[f64] {
        let d = self.dim();
        &self.rows[s * d..(s + 1) * d]
    }

    /// `Φθ` as a plain vector.
    pub fn values(&self, theta: &[f64]) -> Vec<f64> {
        (0..self.num_states())
            .map(|s| linalg::dot(self.row(s), theta))
            .collect()
    }
}
