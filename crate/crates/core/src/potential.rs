//! Truncated power-series nonlinearity `V(x, z) = Σ_{k=2}^{K} V_k(x) z^k / k!`.

use crate::error::{Error, Result};
use crate::geometry::{Grid2D, ScalarField};

/// Coefficient fields `V_2 ..= V_K` sampled on a grid.
///
/// The series starts at `k = 2`, so `V(x, 0) = ∂_z V(x, 0) = 0` holds by construction.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialSeries {
    grid: Grid2D,
    coeffs: Vec<ScalarField>,
}

impl PotentialSeries {
    /// All-zero series with `kmax = K >= 2`.
    pub fn zero(grid: &Grid2D, kmax: usize) -> Result<Self> {
        if kmax < 2 {
            return Err(Error::InvalidArgument(format!("kmax must be at least 2, got {kmax}")));
        }
        Ok(Self {
            grid: grid.clone(),
            coeffs: vec![ScalarField::zeros(grid); kmax - 1],
        })
    }

    /// Series from `[V_2, V_3, ..]`. An empty list gives the empty series
    /// (`kmax = 1`), which is the starting point of the reconstruction.
    pub fn from_coeffs(grid: &Grid2D, coeffs: Vec<ScalarField>) -> Result<Self> {
        for c in &coeffs {
            c.check_grid(grid)?;
            if c.values().iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite("potential coefficient"));
            }
        }
        Ok(Self {
            grid: grid.clone(),
            coeffs,
        })
    }

    /// The empty series, `V ≡ 0`.
    pub fn empty(grid: &Grid2D) -> Self {
        Self {
            grid: grid.clone(),
            coeffs: Vec::new(),
        }
    }

    pub fn grid(&self) -> &Grid2D {
        &self.grid
    }

    /// Highest stored order `K`. The empty series reports 1.
    pub fn kmax(&self) -> usize {
        self.coeffs.len() + 1
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|c| c.values().iter().all(|&v| v == 0.0))
    }

    /// Replaces `V_k`, growing the series with zero fields when `k > K`.
    pub fn set_coefficient(&mut self, k: usize, field: ScalarField) -> Result<()> {
        if k < 2 {
            return Err(Error::InvalidArgument(format!("coefficient index must be >= 2, got {k}")));
        }
        field.check_grid(&self.grid)?;
        while self.coeffs.len() < k - 1 {
            self.coeffs.push(ScalarField::zeros(&self.grid));
        }
        self.coeffs[k - 2] = field;
        Ok(())
    }

    /// Appends `V_{K+1}`.
    pub fn push(&mut self, field: ScalarField) -> Result<()> {
        field.check_grid(&self.grid)?;
        self.coeffs.push(field);
        Ok(())
    }

    /// `V_k`; the zero field when `k > K`.
    pub fn coefficient(&self, k: usize) -> Result<ScalarField> {
        if k < 2 {
            return Err(Error::InvalidArgument(format!("coefficient index must be >= 2, got {k}")));
        }
        Ok(self
            .coeffs
            .get(k - 2)
            .cloned()
            .unwrap_or_else(|| ScalarField::zeros(&self.grid)))
    }

    /// Borrowing accessor; `None` when `k < 2` or `k > K`.
    pub fn coefficient_ref(&self, k: usize) -> Option<&ScalarField> {
        if k < 2 {
            None
        } else {
            self.coeffs.get(k - 2)
        }
    }

    pub fn coeffs(&self) -> &[ScalarField] {
        &self.coeffs
    }

    /// Series keeping only `V_2 ..= V_kmax`.
    pub fn truncated(&self, kmax: usize) -> Self {
        Self {
            grid: self.grid.clone(),
            coeffs: self.coeffs.iter().take(kmax.saturating_sub(1)).cloned().collect(),
        }
    }

    /// `V(x_node, z)`.
    pub fn eval(&self, node: usize, z: f64) -> f64 {
        let Some((last, rest)) = self.coeffs.split_last() else {
            return 0.0;
        };
        // V_2 + z/3 (V_3 + z/4 (V_4 + ...)), then times z²/2
        let mut acc = last.values()[node];
        for (offset, c) in rest.iter().enumerate().rev() {
            let k = offset + 2;
            acc = c.values()[node] + acc * z / (k + 1) as f64;
        }
        acc * z * z / 2.0
    }

    /// `∂_z V(x_node, z) = Σ V_k z^{k-1} / (k-1)!`.
    pub fn eval_dz(&self, node: usize, z: f64) -> f64 {
        let Some((last, rest)) = self.coeffs.split_last() else {
            return 0.0;
        };
        let mut acc = last.values()[node];
        for (offset, c) in rest.iter().enumerate().rev() {
            let k = offset + 2;
            acc = c.values()[node] + acc * z / k as f64;
        }
        acc * z
    }
}
