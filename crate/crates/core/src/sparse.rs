//! Compressed-row matrices and Jacobi-preconditioned conjugate gradients.

use crate::error::{Error, Result};
use crate::geometry::{Grid2D, ScalarField};

/// Default relative residual tolerance for [`solve_spd`].
pub const DEFAULT_CG_TOL: f64 = 1e-10;

/// Square matrix in compressed-row storage.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    dim: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
    values: Vec<f64>,
}

/// The discrete operator `-Δ + c` over interior unknowns.
pub type SparseOperator = CsrMatrix;

impl CsrMatrix {
    /// Builds from per-row `(column, value)` lists. Columns within a row are sorted.
    pub fn from_rows(rows: Vec<Vec<(usize, f64)>>) -> Self {
        let dim = rows.len();
        let mut row_offsets = Vec::with_capacity(dim + 1);
        let mut col_indices = Vec::new();
        let mut values = Vec::new();
        row_offsets.push(0);
        for mut row in rows {
            row.sort_by_key(|&(c, _)| c);
            for (c, v) in row {
                assert!(c < dim, "column {c} out of range for dimension {dim}");
                col_indices.push(c);
                values.push(v);
            }
            row_offsets.push(col_indices.len());
        }
        Self {
            dim,
            row_offsets,
            col_indices,
            values,
        }
    }

    /// Row-major dense square matrix; exact zeros are dropped.
    pub fn from_dense(dim: usize, dense: &[f64]) -> Self {
        assert_eq!(dense.len(), dim * dim);
        let rows = (0..dim)
            .map(|r| {
                (0..dim)
                    .filter_map(|c| {
                        let v = dense[r * dim + c];
                        (v != 0.0).then_some((c, v))
                    })
                    .collect()
            })
            .collect();
        Self::from_rows(rows)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.row_offsets[r]..self.row_offsets[r + 1];
        self.col_indices[range.clone()]
            .iter()
            .copied()
            .zip(self.values[range].iter().copied())
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.row(r).find(|&(col, _)| col == c).map_or(0.0, |(_, v)| v)
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim).map(|r| self.get(r, r)).collect()
    }

    /// `y = A x`
    pub fn matvec_into(&self, x: &[f64], y: &mut [f64]) {
        for (r, out) in y.iter_mut().enumerate().take(self.dim) {
            let mut acc = 0.0;
            for idx in self.row_offsets[r]..self.row_offsets[r + 1] {
                acc += self.values[idx] * x[self.col_indices[idx]];
            }
            *out = acc;
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.dim];
        self.matvec_into(x, &mut y);
        y
    }

    /// Whether every stored `(i, j, v)` has a partner `(j, i, v')` with `|v - v'| <= tol`.
    pub fn is_symmetric(&self, tol: f64) -> bool {
        (0..self.dim).all(|r| self.row(r).all(|(c, v)| (self.get(c, r) - v).abs() <= tol))
    }
}

/// Assembles the 5-point `-Δ + c` operator on interior nodes.
///
/// Diagonal `4/h² + c`, off-diagonals `-1/h²` to interior neighbours. Every
/// row must keep a strictly positive diagonal.
pub fn assemble(c: &ScalarField, grid: &Grid2D) -> Result<SparseOperator> {
    c.check_grid(grid)?;
    let n = grid.n();
    let inv_h2 = 1.0 / (grid.h() * grid.h());
    let mut rows = Vec::with_capacity(grid.interior_count());
    for j in 1..n {
        for i in 1..n {
            let cv = c.values()[grid.index(i, j)];
            if !cv.is_finite() {
                return Err(Error::NonFinite("reaction coefficient"));
            }
            let diag = 4.0 * inv_h2 + cv;
            if diag <= 0.0 {
                return Err(Error::Conditioning {
                    node: grid.index(i, j),
                    value: cv,
                    margin: 4.0 * inv_h2,
                });
            }
            let mut row = Vec::with_capacity(5);
            if j > 1 {
                row.push((grid.interior_index(i, j - 1), -inv_h2));
            }
            if i > 1 {
                row.push((grid.interior_index(i - 1, j), -inv_h2));
            }
            row.push((grid.interior_index(i, j), diag));
            if i < n - 1 {
                row.push((grid.interior_index(i + 1, j), -inv_h2));
            }
            if j < n - 1 {
                row.push((grid.interior_index(i, j + 1), -inv_h2));
            }
            rows.push(row);
        }
    }
    Ok(CsrMatrix::from_rows(rows))
}

/// Result of a conjugate-gradient solve.
#[derive(Debug, Clone, PartialEq)]
pub struct CgOutcome {
    pub x: Vec<f64>,
    pub iterations: usize,
    /// Final relative residual `‖b - A x‖ / ‖b‖`.
    pub relative_residual: f64,
    /// Relative residual after every iteration, starting with the initial guess.
    pub residual_history: Vec<f64>,
    /// Quadratic energy `½ xᵀA x - bᵀx` after every iteration.
    pub energy_history: Vec<f64>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Jacobi-preconditioned CG for a symmetric positive definite `a`.
///
/// Stops once `‖b - A x‖ ≤ tol ‖b‖`; fails after `10 × dim` iterations.
pub fn solve_spd(a: &CsrMatrix, b: &[f64], tol: f64) -> Result<CgOutcome> {
    if b.len() != a.dim() {
        return Err(Error::LengthMismatch {
            what: "right-hand side",
            expected: a.dim(),
            actual: b.len(),
        });
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!("CG tolerance must be positive, got {tol}")));
    }
    if b.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("right-hand side"));
    }
    let dim = a.dim();
    let b_norm = dot(b, b).sqrt();
    if b_norm == 0.0 {
        return Ok(CgOutcome {
            x: vec![0.0; dim],
            iterations: 0,
            relative_residual: 0.0,
            residual_history: vec![0.0],
            energy_history: vec![0.0],
        });
    }

    let inv_diag: Vec<f64> = a
        .diagonal()
        .iter()
        .map(|&d| if d > 0.0 { 1.0 / d } else { 1.0 })
        .collect();

    let mut x = vec![0.0; dim];
    let mut r = b.to_vec();
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(r, d)| r * d).collect();
    let mut p = z.clone();
    let mut ap = vec![0.0; dim];
    let mut rz = dot(&r, &z);

    let mut residual_history = vec![1.0];
    let mut energy_history = vec![0.0];
    let max_iter = 10 * dim.max(1);

    for it in 1..=max_iter {
        a.matvec_into(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return Err(Error::CgNotConverged {
                iterations: it,
                residual: dot(&r, &r).sqrt() / b_norm,
            });
        }
        let alpha = rz / pap;
        for k in 0..dim {
            x[k] += alpha * p[k];
            r[k] -= alpha * ap[k];
        }
        let rel = dot(&r, &r).sqrt() / b_norm;
        residual_history.push(rel);
        // ½ xᵀAx - bᵀx = -½ (xᵀb + xᵀr) since Ax = b - r
        energy_history.push(-0.5 * (dot(&x, b) + dot(&x, &r)));
        if rel <= tol {
            return Ok(CgOutcome {
                x,
                iterations: it,
                relative_residual: rel,
                residual_history,
                energy_history,
            });
        }
        for k in 0..dim {
            z[k] = r[k] * inv_diag[k];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for k in 0..dim {
            p[k] = z[k] + beta * p[k];
        }
    }
    Err(Error::CgNotConverged {
        iterations: max_iter,
        residual: *residual_history.last().unwrap(),
    })
}

/// Smallest eigenvalue of the discrete Dirichlet Laplacian, `4 (1 - cos πh) / h²`.
pub fn discrete_laplacian_min_eigenvalue(grid: &Grid2D) -> f64 {
    let h = grid.h();
    (2.0 - 2.0 * (std::f64::consts::PI * h).cos()) * 2.0 / (h * h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn diagonal_entries() {
        let g = Grid2D::new(4).unwrap();
        let a = assemble(&ScalarField::zeros(&g), &g).unwrap();
        assert_eq!(a.dim(), 9);
        assert!(a.diagonal().iter().all(|&d| d == 64.0));
        let a1 = assemble(&ScalarField::constant(&g, 1.0), &g).unwrap();
        assert!(a1.diagonal().iter().all(|&d| d == 65.0));
        assert!(a.is_symmetric(0.0));
        assert_eq!(a.nnz(), 9 + 2 * 12);
    }

    #[test]
    fn rejects_non_finite_reaction() {
        let g = Grid2D::new(4).unwrap();
        let mut c = ScalarField::zeros(&g);
        c.values_mut()[g.index(2, 2)] = f64::NAN;
        assert_eq!(assemble(&c, &g), Err(Error::NonFinite("reaction coefficient")));
    }

    #[test]
    fn rayleigh_quotient_of_sine_mode() {
        let g = Grid2D::new(64).unwrap();
        let a = assemble(&ScalarField::zeros(&g), &g).unwrap();
        let pi = std::f64::consts::PI;
        let v: Vec<f64> = (0..g.interior_count())
            .map(|p| {
                let (x, y) = g.coords(g.interior_node(p));
                (pi * x).sin() * (pi * y).sin()
            })
            .collect();
        let av = a.matvec(&v);
        let rq = dot(&v, &av) / dot(&v, &v);
        let discrete = discrete_laplacian_min_eigenvalue(&g);
        assert!((rq - discrete).abs() < 1e-8 * discrete);
        assert!((rq - 2.0 * pi * pi).abs() < 0.05 * 2.0 * pi * pi);
    }

    #[test]
    fn zero_rhs_returns_zero() {
        let g = Grid2D::new(8).unwrap();
        let a = assemble(&ScalarField::zeros(&g), &g).unwrap();
        let out = solve_spd(&a, &vec![0.0; a.dim()], 1e-10).unwrap();
        assert_eq!(out.iterations, 0);
        assert!(out.x.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn recovers_manufactured_solution() {
        let g = Grid2D::new(16).unwrap();
        let a = assemble(&ScalarField::zeros(&g), &g).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let xs: Vec<f64> = (0..a.dim()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let b = a.matvec(&xs);
        let out = solve_spd(&a, &b, 1e-12).unwrap();
        let err = out
            .x
            .iter()
            .zip(&xs)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        assert!(err < 1e-8, "err = {err}");
    }

    #[test]
    fn residual_contract_and_energy_decrease() {
        let g = Grid2D::new(32).unwrap();
        let a = assemble(&ScalarField::zeros(&g), &g).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let b: Vec<f64> = (0..a.dim()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let out = solve_spd(&a, &b, 1e-10).unwrap();
        let ax = a.matvec(&out.x);
        let res: f64 = ax.iter().zip(&b).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt();
        let bn = dot(&b, &b).sqrt();
        assert!(res <= 1e-10 * bn * 1.0001);
        let scale = out.energy_history.iter().fold(0.0f64, |m, e| m.max(e.abs()));
        for w in out.energy_history.windows(2) {
            assert!(w[1] <= w[0] + 1e-12 * scale);
        }
        let again = solve_spd(&a, &b, 1e-10).unwrap();
        assert_eq!(out, again);
    }

    #[test]
    fn reports_non_convergence() {
        // Indefinite diagonal makes pᵀAp vanish or go negative.
        let a = CsrMatrix::from_rows(vec![vec![(0, 1.0)], vec![(1, -1.0)]]);
        let err = solve_spd(&a, &[1.0, 1.0], 1e-10).unwrap_err();
        assert!(matches!(err, Error::CgNotConverged { .. }));
    }
}
