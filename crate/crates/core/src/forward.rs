//! Dirichlet solves for `-Δv + c v = g` and the semilinear problem `-Δu + V(x, u) = 0`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geometry::{BoundaryTrace, Grid2D, ScalarField};
use crate::potential::PotentialSeries;
use crate::sparse::{self, assemble, discrete_laplacian_min_eigenvalue, solve_spd, CsrMatrix};

/// Tolerances and limits shared by the forward solvers.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverOptions {
    /// Relative residual target for every CG solve.
    pub cg_tol: f64,
    /// Target for the discrete L2 norm of `-Δu + V(x, u)`.
    pub newton_tol: f64,
    pub max_newton: usize,
    /// Smallness radius on `‖f‖_∞`.
    pub r0: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            cg_tol: sparse::DEFAULT_CG_TOL,
            newton_tol: 1e-11,
            max_newton: 25,
            r0: 0.1,
        }
    }
}

/// Diagnostics of a semilinear solve.
#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    /// Newton corrections applied.
    pub iterations: usize,
    /// Discrete L2 norm of `-Δu + V(x, u)` over interior nodes.
    pub final_residual: f64,
    /// `‖f‖_∞`
    pub boundary_norm: f64,
    /// `‖u‖_∞`
    pub solution_norm: f64,
    pub converged: bool,
    /// Residual norm before every Newton step and after the last one.
    pub residual_history: Vec<f64>,
}

/// Solves the lifted system `a x = g + boundary coupling` and writes the full field.
fn solve_dirichlet(
    a: &CsrMatrix,
    g: Option<&ScalarField>,
    f: &BoundaryTrace,
    grid: &Grid2D,
    tol: f64,
) -> Result<ScalarField> {
    let mut field = ScalarField::zeros(grid);
    for (k, &v) in f.values().iter().enumerate() {
        field.values_mut()[grid.boundary_node(k)] = v;
    }
    let n = grid.n();
    let inv_h2 = 1.0 / (grid.h() * grid.h());
    let mut rhs = vec![0.0; grid.interior_count()];
    for j in 1..n {
        for i in 1..n {
            let mut b = g.map_or(0.0, |g| g.values()[grid.index(i, j)]);
            let fv = field.values();
            if i == 1 {
                b += inv_h2 * fv[grid.index(0, j)];
            }
            if i == n - 1 {
                b += inv_h2 * fv[grid.index(n, j)];
            }
            if j == 1 {
                b += inv_h2 * fv[grid.index(i, 0)];
            }
            if j == n - 1 {
                b += inv_h2 * fv[grid.index(i, n)];
            }
            rhs[grid.interior_index(i, j)] = b;
        }
    }
    let out = solve_spd(a, &rhs, tol)?;
    for (p, v) in out.x.into_iter().enumerate() {
        field.values_mut()[grid.interior_node(p)] = v;
    }
    Ok(field)
}

/// `-Δv + c v = g` in Ω, `v = f` on ∂Ω, with default CG tolerance.
pub fn solve_linear(
    c: &ScalarField,
    g: &ScalarField,
    f: &BoundaryTrace,
    grid: &Grid2D,
) -> Result<ScalarField> {
    solve_linear_with(c, g, f, grid, sparse::DEFAULT_CG_TOL)
}

/// As [`solve_linear`] with an explicit CG tolerance. Requires `c >= 0` on interior nodes.
pub fn solve_linear_with(
    c: &ScalarField,
    g: &ScalarField,
    f: &BoundaryTrace,
    grid: &Grid2D,
    cg_tol: f64,
) -> Result<ScalarField> {
    c.check_grid(grid)?;
    g.check_grid(grid)?;
    f.check_grid(grid)?;
    if g.values().iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("source term"));
    }
    if f.values().iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("boundary data"));
    }
    for p in 0..grid.interior_count() {
        let node = grid.interior_node(p);
        let value = c.values()[node];
        if value < 0.0 {
            return Err(Error::NegativeReaction { node, value });
        }
    }
    let a = assemble(c, grid)?;
    solve_dirichlet(&a, Some(g), f, grid, cg_tol)
}

/// Harmonic extension of `f`.
pub fn harmonic_extension(f: &BoundaryTrace, grid: &Grid2D, cg_tol: f64) -> Result<ScalarField> {
    let zero = ScalarField::zeros(grid);
    solve_linear_with(&zero, &zero, f, grid, cg_tol)
}

/// `-Δ_h u + V(x, u)` at interior unknowns.
pub fn residual(p: &PotentialSeries, u: &ScalarField, grid: &Grid2D) -> Vec<f64> {
    let n = grid.n();
    let inv_h2 = 1.0 / (grid.h() * grid.h());
    let v = u.values();
    let mut out = vec![0.0; grid.interior_count()];
    for j in 1..n {
        for i in 1..n {
            let c = grid.index(i, j);
            let lap = 4.0 * v[c] - v[c - 1] - v[c + 1] - v[c - (n + 1)] - v[c + (n + 1)];
            out[grid.interior_index(i, j)] = lap * inv_h2 + p.eval(c, v[c]);
        }
    }
    out
}

/// Discrete L2 norm `sqrt(h² Σ r²)` of an interior vector.
pub fn interior_norm(r: &[f64], grid: &Grid2D) -> f64 {
    r.iter().map(|v| v * v).sum::<f64>().sqrt() * grid.h()
}

fn dz_field(p: &PotentialSeries, u: &ScalarField) -> ScalarField {
    let mut c = u.clone();
    for (node, value) in c.values_mut().iter_mut().enumerate() {
        *value = p.eval_dz(node, *value);
    }
    c
}

/// Newton solve of `-Δu + V(x, u) = 0`, `u = f` on ∂Ω.
///
/// Starts from the harmonic extension of `f`. Each step solves
/// `(-Δ + ∂_z V(x, u_k)) δ = -F(u_k)` with zero boundary data.
pub fn solve_semilinear(
    p: &PotentialSeries,
    f: &BoundaryTrace,
    grid: &Grid2D,
    opts: &SolverOptions,
) -> Result<(ScalarField, SolveReport)> {
    f.check_grid(grid)?;
    if !(opts.newton_tol > 0.0) {
        return Err(Error::InvalidArgument("newton_tol must be positive".into()));
    }
    let boundary_norm = f.max_abs();
    if boundary_norm > opts.r0 {
        return Err(Error::SmallnessViolated {
            norm: boundary_norm,
            radius: opts.r0,
        });
    }
    let margin = 0.5 * discrete_laplacian_min_eigenvalue(grid);
    let mut u = harmonic_extension(f, grid, opts.cg_tol)?;
    let mut r = residual(p, &u, grid);
    let mut rn = interior_norm(&r, grid);
    let mut history = vec![rn];
    let mut iterations = 0;
    let mut increases = 0;
    let zero_trace = BoundaryTrace::zeros(grid);

    while rn > opts.newton_tol {
        if iterations >= opts.max_newton {
            return Err(Error::NewtonNotConverged {
                iterations,
                residual: rn,
            });
        }
        let c = dz_field(p, &u);
        for q in 0..grid.interior_count() {
            let node = grid.interior_node(q);
            let value = c.values()[node];
            if value < -margin {
                return Err(Error::Conditioning { node, value, margin });
            }
        }
        let jac = assemble(&c, grid)?;
        let minus_r: ScalarField = {
            let mut g = ScalarField::zeros(grid);
            for (q, v) in r.iter().enumerate() {
                g.values_mut()[grid.interior_node(q)] = -v;
            }
            g
        };
        let delta = solve_dirichlet(&jac, Some(&minus_r), &zero_trace, grid, opts.cg_tol)?;
        u.axpy(1.0, &delta);
        r = residual(p, &u, grid);
        let next = interior_norm(&r, grid);
        iterations += 1;
        increases = if next > rn { increases + 1 } else { 0 };
        rn = next;
        history.push(rn);
        if !rn.is_finite() || increases >= 3 {
            return Err(Error::NewtonNotConverged {
                iterations,
                residual: rn,
            });
        }
    }

    let report = SolveReport {
        iterations,
        final_residual: rn,
        boundary_norm,
        solution_norm: u.max_abs(),
        converged: true,
        residual_history: history,
    };
    Ok((u, report))
}

/// Outcome of [`newton_jacobian_check`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JacobianCheck {
    /// `max ‖F(u+τδ) - F(u) - τJδ‖ / (τ² ‖δ‖)`, the second-order Taylor constant.
    pub taylor_constant: f64,
    /// `max ‖F(u+τδ) - F(u) - τJδ‖ / ‖τJδ‖`.
    pub relative_defect: f64,
}

/// Compares the analytic Jacobian `-Δ + ∂_z V(x, u)` with finite differences of
/// the residual along 10 seeded random interior directions, `τ = 1e-4`.
pub fn newton_jacobian_check(
    p: &PotentialSeries,
    u: &ScalarField,
    grid: &Grid2D,
) -> Result<JacobianCheck> {
    u.check_grid(grid)?;
    if u.values().iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("state field"));
    }
    const TAU: f64 = 1e-4;
    let jac = assemble(&dz_field(p, u), grid)?;
    let base = residual(p, u, grid);
    let mut rng = ChaCha8Rng::seed_from_u64(0x6a61_636f_6269);
    let mut taylor_constant = 0.0f64;
    let mut relative_defect = 0.0f64;
    for _ in 0..10 {
        let delta: Vec<f64> = (0..grid.interior_count())
            .map(|_| rng.random_range(-1.0..1.0))
            .collect();
        let mut shifted = u.clone();
        for (q, d) in delta.iter().enumerate() {
            shifted.values_mut()[grid.interior_node(q)] += TAU * d;
        }
        let moved = residual(p, &shifted, grid);
        let jd = jac.matvec(&delta);
        let defect: Vec<f64> = moved
            .iter()
            .zip(&base)
            .zip(&jd)
            .map(|((m, b), j)| m - b - TAU * j)
            .collect();
        let dn = interior_norm(&defect, grid);
        taylor_constant = taylor_constant.max(dn / (TAU * TAU * interior_norm(&delta, grid)));
        relative_defect = relative_defect.max(dn / (TAU * interior_norm(&jd, grid)));
    }
    Ok(JacobianCheck {
        taylor_constant,
        relative_defect,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn max_diff(a: &ScalarField, b: &ScalarField) -> f64 {
        a.sub(b).max_abs()
    }

    #[test]
    fn constants_are_harmonic() {
        let g = Grid2D::new(16).unwrap();
        let zero = ScalarField::zeros(&g);
        let v = solve_linear(&zero, &zero, &BoundaryTrace::constant(&g, 1.0), &g).unwrap();
        assert!(max_diff(&v, &ScalarField::constant(&g, 1.0)) < 1e-9);
    }

    #[test]
    fn quadratic_harmonic_is_reproduced() {
        let g = Grid2D::new(16).unwrap();
        let zero = ScalarField::zeros(&g);
        let exact = ScalarField::from_fn(&g, |x, y| x * x - y * y);
        let v = solve_linear_with(&zero, &zero, &exact.trace(&g), &g, 1e-13).unwrap();
        assert!(max_diff(&v, &exact) < 1e-11);
    }

    #[test]
    fn constant_solution_with_reaction() {
        let g = Grid2D::new(16).unwrap();
        let one = ScalarField::constant(&g, 1.0);
        let v = solve_linear(&one, &one, &BoundaryTrace::constant(&g, 1.0), &g).unwrap();
        assert!(max_diff(&v, &one) < 1e-9);
    }

    #[test]
    fn rejects_negative_reaction() {
        let g = Grid2D::new(8).unwrap();
        let c = ScalarField::constant(&g, -1.0);
        let zero = ScalarField::zeros(&g);
        let err = solve_linear(&c, &zero, &BoundaryTrace::zeros(&g), &g).unwrap_err();
        assert!(matches!(err, Error::NegativeReaction { .. }));
    }

    #[test]
    fn zero_data_zero_solution() {
        let g = Grid2D::new(16).unwrap();
        let p = PotentialSeries::from_coeffs(&g, vec![ScalarField::constant(&g, 1.0)]).unwrap();
        let (u, rep) = solve_semilinear(&p, &BoundaryTrace::zeros(&g), &g, &SolverOptions::default()).unwrap();
        assert_eq!(u.max_abs(), 0.0);
        assert!(rep.iterations <= 1);
        assert!(rep.converged);
    }

    #[test]
    fn linear_case_converges_in_one_step() {
        let g = Grid2D::new(16).unwrap();
        let p = PotentialSeries::zero(&g, 3).unwrap();
        let f = BoundaryTrace::from_xy(&g, |x, y| 0.03 * (x + 2.0 * y * y));
        let (u, rep) = solve_semilinear(&p, &f, &g, &SolverOptions::default()).unwrap();
        assert!(rep.iterations <= 1, "{rep:?}");
        let zero = ScalarField::zeros(&g);
        let v = solve_linear(&zero, &zero, &f, &g).unwrap();
        assert!(max_diff(&u, &v) < 1e-9);
    }

    #[test]
    fn smallness_gate() {
        let g = Grid2D::new(8).unwrap();
        let p = PotentialSeries::zero(&g, 2).unwrap();
        let err = solve_semilinear(&p, &BoundaryTrace::constant(&g, 0.2), &g, &SolverOptions::default());
        assert!(matches!(err, Err(Error::SmallnessViolated { .. })));
    }

    #[test]
    fn conditioning_gate() {
        let g = Grid2D::new(8).unwrap();
        // ∂_z V = -1000 z, so u ≈ 0.05 gives -50, beyond λ_min / 2 ≈ 9.9
        let p = PotentialSeries::from_coeffs(&g, vec![ScalarField::constant(&g, -1000.0)]).unwrap();
        let err = solve_semilinear(&p, &BoundaryTrace::constant(&g, 0.05), &g, &SolverOptions::default());
        assert!(matches!(err, Err(Error::Conditioning { .. })), "{err:?}");
    }

    #[test]
    fn newton_budget_exhaustion() {
        let g = Grid2D::new(8).unwrap();
        let p = PotentialSeries::from_coeffs(&g, vec![ScalarField::constant(&g, 1.0)]).unwrap();
        let opts = SolverOptions {
            max_newton: 1,
            ..SolverOptions::default()
        };
        let err = solve_semilinear(&p, &BoundaryTrace::constant(&g, 0.05), &g, &opts);
        assert!(matches!(err, Err(Error::NewtonNotConverged { .. })), "{err:?}");
    }

    #[test]
    fn jacobian_check_cases() {
        let g = Grid2D::new(16).unwrap();
        let u = ScalarField::from_fn(&g, |x, y| 0.05 * (x * y).sin());
        let zero = PotentialSeries::zero(&g, 3).unwrap();
        assert!(newton_jacobian_check(&zero, &u, &g).unwrap().taylor_constant < 1e-5);

        let quad = PotentialSeries::from_coeffs(&g, vec![ScalarField::constant(&g, 1.0)]).unwrap();
        let a = newton_jacobian_check(&quad, &u, &g).unwrap();
        assert!(a.taylor_constant <= 0.5 + 1e-5, "{a:?}");
        assert!(a.taylor_constant > 0.1);
        let b = newton_jacobian_check(&quad, &u.scale(3.0), &g).unwrap();
        assert!((a.taylor_constant - b.taylor_constant).abs() < 1e-5);
    }
}
