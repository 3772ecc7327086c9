//! Inductive recovery of `V_2, .., V_K` from partial boundary measurements.
//!
//! For harmonic `v^(1), .., v^(m+1)` with traces in the arc, Green's formula
//! applied to the `m`-th linearization gives
//!
//! ```text
//! ∫_Ω V_m v^(1) ⋯ v^(m+1) dx = ∫_∂Ω ∂_ν w v^(m+1) dS - ∫_Ω H_m v^(m+1) dx
//! ```
//!
//! where `∂_ν w` is the measured `m`-th order flux and `H_m` collects the
//! contributions of the already recovered `V_2, .., V_{m-1}`. Sampling many
//! tuples yields a linear system for the coefficients of `V_m` in a coarse
//! bilinear basis, solved by first-order Tikhonov least squares.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::forward::SolverOptions;
use crate::geometry::{boundary_integral, interior_integral, l2_norm, GammaMask, Grid2D, ScalarField};
use crate::harmonic::{gamma_supported_family, HarmonicFamily, HarmonicMember};
use crate::linearization::{
    extend_cascade, measured_linearized_flux, nonlinearity_derivative_blocks, CascadeState, Measurement,
};
use crate::potential::PotentialSeries;
use crate::sparse::{solve_spd, CsrMatrix};

/// Relative CG tolerance for the normal equations.
pub const NORMAL_EQUATIONS_TOL: f64 = 1e-12;

/// Rows whose product field has L1 mass below this are dropped.
pub const MIN_PRODUCT_MASS: f64 = 1e-12;

/// Tensor grid of bilinear hat functions, `per_side` hats per axis.
#[derive(Debug, Clone, PartialEq)]
pub struct CoeffBasis {
    per_side: usize,
    fields: Vec<ScalarField>,
}

impl CoeffBasis {
    pub fn new(per_side: usize, grid: &Grid2D) -> Result<Self> {
        if per_side < 2 {
            return Err(Error::InvalidArgument(format!(
                "basis needs at least 2 hats per side, got {per_side}"
            )));
        }
        let spacing = 1.0 / (per_side - 1) as f64;
        let hat = |t: f64, i: usize| (1.0 - (t - i as f64 * spacing).abs() / spacing).max(0.0);
        let mut fields = Vec::with_capacity(per_side * per_side);
        for j in 0..per_side {
            for i in 0..per_side {
                fields.push(ScalarField::from_fn(grid, |x, y| hat(x, i) * hat(y, j)));
            }
        }
        Ok(Self { per_side, fields })
    }

    pub fn per_side(&self) -> usize {
        self.per_side
    }

    pub fn size(&self) -> usize {
        self.fields.len()
    }

    pub fn field(&self, b: usize) -> &ScalarField {
        &self.fields[b]
    }

    /// `Σ c_b φ_b`
    pub fn combine(&self, coeffs: &[f64], grid: &Grid2D) -> ScalarField {
        let mut out = ScalarField::zeros(grid);
        for (c, f) in coeffs.iter().zip(&self.fields) {
            out.axpy(*c, f);
        }
        out
    }

    /// Edges `(a, b)` between horizontally or vertically adjacent hats.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let n = self.per_side;
        let mut out = Vec::new();
        for j in 0..n {
            for i in 0..n {
                let a = j * n + i;
                if i + 1 < n {
                    out.push((a, a + 1));
                }
                if j + 1 < n {
                    out.push((a, a + n));
                }
            }
        }
        out
    }
}

/// Linear system `A c ≈ y` for the coefficients of one `V_m`.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentSystem {
    pub m: usize,
    /// Family indices `(v^(1), .., v^(m+1))` per row.
    pub rows: Vec<Vec<usize>>,
    /// Row-major, `rows × basis_size`.
    pub matrix: Vec<f64>,
    pub rhs: Vec<f64>,
    pub basis_size: usize,
    pub lambda: f64,
}

impl MomentSystem {
    pub fn row_count(&self) -> usize {
        self.rows.len()
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.matrix[r * self.basis_size..(r + 1) * self.basis_size]
    }

    /// `AᵀA` (row-major, `basis_size²`).
    pub fn gram(&self) -> Vec<f64> {
        let nb = self.basis_size;
        let mut g = vec![0.0; nb * nb];
        for r in 0..self.row_count() {
            let row = self.row(r);
            for a in 0..nb {
                if row[a] == 0.0 {
                    continue;
                }
                for b in 0..nb {
                    g[a * nb + b] += row[a] * row[b];
                }
            }
        }
        g
    }

    /// `‖A c - y‖₂`
    pub fn residual_norm(&self, coeffs: &[f64]) -> f64 {
        (0..self.row_count())
            .map(|r| {
                let ac: f64 = self.row(r).iter().zip(coeffs).map(|(a, c)| a * c).sum();
                (ac - self.rhs[r]).powi(2)
            })
            .sum::<f64>()
            .sqrt()
    }
}

/// Induced ∞-norm (max absolute row sum) of a square row-major matrix.
pub fn inf_norm(dim: usize, m: &[f64]) -> f64 {
    (0..dim)
        .map(|r| m[r * dim..(r + 1) * dim].iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Settings for moment evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentOptions {
    pub eps: f64,
    pub cg_tol: f64,
    /// Subtract the lower-order correction `∫ H_m v^(m+1)`; disabling it is
    /// only useful to demonstrate that it matters.
    pub lower_order_correction: bool,
}

impl Default for MomentOptions {
    fn default() -> Self {
        Self {
            eps: 1e-2,
            cg_tol: crate::sparse::DEFAULT_CG_TOL,
            lower_order_correction: true,
        }
    }
}

/// Product `Π v^(l)` of member fields.
pub fn product_field(members: &[&HarmonicMember], grid: &Grid2D) -> ScalarField {
    let mut out = ScalarField::constant(grid, 1.0);
    for m in members {
        out = out.mul(&m.field);
    }
    out
}

/// `∫_Ω H_m v^(m+1) dx` for the tuple, with `H_m` built from `known`.
pub fn lower_order_moment(
    tuple: &[&HarmonicMember],
    known: &PotentialSeries,
    grid: &Grid2D,
    cg_tol: f64,
) -> Result<f64> {
    let m = tuple.len() - 1;
    if m < 3 {
        return Ok(0.0);
    }
    let (inputs, test) = tuple.split_at(m);
    let mut state = CascadeState::with_singletons(
        inputs.iter().map(|v| v.trace.clone()).collect(),
        inputs.iter().map(|v| v.field.clone()).collect(),
    );
    extend_cascade(known, &mut state, m - 1, grid, cg_tol)?;
    let h = nonlinearity_derivative_blocks(known, state.full_subset(), &state, 2..=m - 1)?;
    interior_integral(&h.mul(&test[0].field), grid)
}

/// Measured moment of `V_m` against the tuple `(v^(1), .., v^(m+1))`.
///
/// The first `m` traces are the boundary inputs; the last member is the test
/// function. In exact arithmetic the result is `∫_Ω V_m v^(1) ⋯ v^(m+1) dx`.
pub fn measured_moment(
    measure: &dyn Measurement,
    tuple: &[&HarmonicMember],
    mask: &GammaMask,
    grid: &Grid2D,
    known: &PotentialSeries,
    opts: &MomentOptions,
) -> Result<f64> {
    if tuple.len() < 3 {
        return Err(Error::InvalidArgument("a moment tuple needs at least 3 members".into()));
    }
    for v in tuple {
        let off = v.trace.off_arc_max(mask);
        if off != 0.0 {
            return Err(Error::SupportViolation(off));
        }
    }
    let m = tuple.len() - 1;
    let inputs: Vec<_> = tuple[..m].iter().map(|v| v.trace.clone()).collect();
    let test = tuple[m];
    let flux = measured_linearized_flux(measure, &inputs, opts.eps, mask, grid)?;
    let boundary = boundary_integral(&flux.mul(&test.trace), &GammaMask::full(grid), grid)?;
    let correction = if opts.lower_order_correction {
        lower_order_moment(tuple, known, grid, opts.cg_tol)?
    } else {
        0.0
    };
    Ok(boundary - correction)
}

/// Multisets of size `k` drawn from `0..n`, lexicographic.
pub fn multisets(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(n: usize, k: usize, start: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(n, k, i, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(n, k, 0, &mut Vec::with_capacity(k), &mut out);
    out
}

/// Settings for [`assemble_system`].
#[derive(Debug, Clone, PartialEq)]
pub struct SystemOptions {
    pub rows: usize,
    pub seed: u64,
    /// `λ = lambda_rel · ‖AᵀA‖_∞`
    pub lambda_rel: f64,
    pub moment: MomentOptions,
}

/// Picks `rows` distinct tuples by seeded shuffle, drops degenerate products and
/// fills the moment matrix and measured right-hand side.
#[allow(clippy::too_many_arguments)]
pub fn assemble_system(
    family: &HarmonicFamily,
    m: usize,
    basis: &CoeffBasis,
    measure: &dyn Measurement,
    mask: &GammaMask,
    grid: &Grid2D,
    known: &PotentialSeries,
    opts: &SystemOptions,
) -> Result<MomentSystem> {
    if m < 2 {
        return Err(Error::InvalidArgument(format!("moment order must be >= 2, got {m}")));
    }
    if family.is_empty() {
        return Err(Error::InvalidArgument("empty harmonic family".into()));
    }
    if family.len() * (m + 1) < basis.size() {
        log::warn!(
            "family of {} members is small for {} basis functions at order {m}",
            family.len(),
            basis.size()
        );
    }
    let mut candidates = multisets(family.len(), m + 1);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ (m as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15));
    candidates.shuffle(&mut rng);

    let mut rows = Vec::new();
    let mut products = Vec::new();
    for tuple in candidates {
        if rows.len() == opts.rows {
            break;
        }
        let members: Vec<&HarmonicMember> = tuple.iter().map(|&i| family.get(i)).collect();
        let prod = product_field(&members, grid);
        let mass = interior_integral(&ScalarField::from_values(grid, prod.values().iter().map(|v| v.abs()).collect())?, grid)?;
        if mass < MIN_PRODUCT_MASS {
            continue;
        }
        rows.push(tuple);
        products.push(prod);
    }
    if rows.is_empty() {
        return Err(Error::InvalidArgument("no admissible tuple in the family".into()));
    }

    let nb = basis.size();
    let computed: Vec<Result<(Vec<f64>, f64)>> = rows
        .par_iter()
        .zip(products.par_iter())
        .map(|(tuple, prod)| {
            let a_row = (0..nb)
                .map(|b| interior_integral(&basis.field(b).mul(prod), grid))
                .collect::<Result<Vec<_>>>()?;
            let members: Vec<&HarmonicMember> = tuple.iter().map(|&i| family.get(i)).collect();
            let y = measured_moment(measure, &members, mask, grid, known, &opts.moment)?;
            Ok((a_row, y))
        })
        .collect();
    let mut matrix = Vec::with_capacity(rows.len() * nb);
    let mut rhs = Vec::with_capacity(rows.len());
    for c in computed {
        let (a_row, y) = c?;
        matrix.extend(a_row);
        rhs.push(y);
    }
    let mut sys = MomentSystem {
        m,
        rows,
        matrix,
        rhs,
        basis_size: nb,
        lambda: 0.0,
    };
    sys.lambda = opts.lambda_rel * inf_norm(nb, &sys.gram());
    Ok(sys)
}

/// Coefficients and field of a solved moment system.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemSolution {
    pub coeffs: Vec<f64>,
    pub field: ScalarField,
    /// `‖A c - y‖₂`
    pub residual: f64,
    pub cg_iterations: usize,
}

/// `AᵀA + λ LᵀL`, row-major.
pub fn regularized_normal_matrix(sys: &MomentSystem, basis: &CoeffBasis) -> Vec<f64> {
    let nb = sys.basis_size;
    let mut normal = sys.gram();
    for (a, b) in basis.edges() {
        normal[a * nb + a] += sys.lambda;
        normal[b * nb + b] += sys.lambda;
        normal[a * nb + b] -= sys.lambda;
        normal[b * nb + a] -= sys.lambda;
    }
    normal
}

/// Minimizes `‖A c - y‖² + λ ‖L c‖²` with `L` the coarse-grid difference operator.
pub fn solve_system(sys: &MomentSystem, basis: &CoeffBasis, grid: &Grid2D) -> Result<SystemSolution> {
    if sys.row_count() == 0 {
        return Err(Error::InvalidArgument("empty moment system".into()));
    }
    if basis.size() != sys.basis_size {
        return Err(Error::LengthMismatch {
            what: "basis",
            expected: sys.basis_size,
            actual: basis.size(),
        });
    }
    let nb = sys.basis_size;
    let normal = regularized_normal_matrix(sys, basis);
    let mut aty = vec![0.0; nb];
    for r in 0..sys.row_count() {
        for (acc, a) in aty.iter_mut().zip(sys.row(r)) {
            *acc += a * sys.rhs[r];
        }
    }
    let op = CsrMatrix::from_dense(nb, &normal);
    let out = solve_spd(&op, &aty, NORMAL_EQUATIONS_TOL)?;
    let field = basis.combine(&out.x, grid);
    Ok(SystemSolution {
        residual: sys.residual_norm(&out.x),
        coeffs: out.x,
        field,
        cg_iterations: out.iterations,
    })
}

/// Configuration of [`reconstruct_all`].
#[derive(Debug, Clone, PartialEq)]
pub struct ReconstructionConfig {
    pub grid: Grid2D,
    pub mask: GammaMask,
    pub family_size: usize,
    pub basis_per_side: usize,
    /// Rows per basis function; `rows = rows_per_basis × basis size`.
    pub rows_per_basis: usize,
    pub lambda_rel: f64,
    pub eps: f64,
    pub seed: u64,
    pub solver: SolverOptions,
}

impl ReconstructionConfig {
    pub fn new(grid: Grid2D, mask: GammaMask) -> Self {
        Self {
            grid,
            mask,
            family_size: 12,
            basis_per_side: 8,
            rows_per_basis: 3,
            lambda_rel: 1e-6,
            eps: 1e-2,
            seed: 0,
            solver: SolverOptions::default(),
        }
    }
}

/// Per-stage diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StageDiagnostics {
    pub m: usize,
    pub rows: usize,
    pub basis_size: usize,
    pub lambda: f64,
    pub residual: f64,
    /// Ratio of extreme eigenvalues of the regularized normal matrix.
    pub condition_estimate: f64,
    pub rel_error_vs_truth: Option<f64>,
    pub l2_norm: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Reconstruction {
    pub series: PotentialSeries,
    pub stages: Vec<StageDiagnostics>,
    pub systems: Vec<MomentSystem>,
}

/// A failed run: the stages completed so far plus the error.
#[derive(Debug, Clone, PartialEq)]
pub struct ReconstructionFailure {
    pub partial: Reconstruction,
    pub error: Error,
}

/// Relative L2 distance `‖a - b‖ / ‖b‖`; `None` when `b` vanishes.
pub fn relative_l2_error(a: &ScalarField, b: &ScalarField, grid: &Grid2D) -> Result<Option<f64>> {
    let nb = l2_norm(b, grid)?;
    if nb == 0.0 {
        return Ok(None);
    }
    Ok(Some(l2_norm(&a.sub(b), grid)? / nb))
}

/// Extreme-eigenvalue ratio of a small SPD matrix by power iteration on `M` and
/// on `‖M‖ I - M`.
pub fn condition_estimate(dim: usize, m: &[f64]) -> f64 {
    let op = CsrMatrix::from_dense(dim, m);
    let power = |shift: f64| {
        let mut v: Vec<f64> = (0..dim).map(|i| 1.0 + (i as f64 * 0.618).fract()).collect();
        let mut lambda = 0.0;
        for _ in 0..500 {
            let mut w = op.matvec(&v);
            for (wi, vi) in w.iter_mut().zip(&v) {
                *wi = shift * vi - *wi;
            }
            if shift == 0.0 {
                w.iter_mut().for_each(|x| *x = -*x);
            }
            let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm == 0.0 {
                return 0.0;
            }
            lambda = v.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>() / v.iter().map(|x| x * x).sum::<f64>();
            v = w.into_iter().map(|x| x / norm).collect();
        }
        lambda
    };
    let largest = power(0.0);
    let smallest = largest - power(largest);
    if smallest <= 0.0 {
        f64::INFINITY
    } else {
        largest / smallest
    }
}

/// Runs the induction `m = 2..=kmax`, each stage using only the measurement
/// and the coefficients recovered by earlier stages.
pub fn reconstruct_all(
    measure: &dyn Measurement,
    kmax: usize,
    cfg: &ReconstructionConfig,
    truth: Option<&PotentialSeries>,
) -> std::result::Result<Reconstruction, Box<ReconstructionFailure>> {
    let grid = &cfg.grid;
    let mut partial = Reconstruction {
        series: PotentialSeries::empty(grid),
        stages: Vec::new(),
        systems: Vec::new(),
    };
    let fail = |partial: Reconstruction, error: Error| Box::new(ReconstructionFailure { partial, error });
    if kmax < 2 {
        return Err(fail(partial, Error::InvalidArgument(format!("kmax must be >= 2, got {kmax}"))));
    }
    let setup = (|| {
        let family = gamma_supported_family(&cfg.mask, cfg.family_size, grid, cfg.solver.cg_tol)?;
        let basis = CoeffBasis::new(cfg.basis_per_side, grid)?;
        Ok::<_, Error>((family, basis))
    })();
    let (family, basis) = match setup {
        Ok(v) => v,
        Err(e) => return Err(fail(partial, e)),
    };

    for m in 2..=kmax {
        let stage = (|| {
            let opts = SystemOptions {
                rows: cfg.rows_per_basis * basis.size(),
                seed: cfg.seed,
                lambda_rel: cfg.lambda_rel,
                moment: MomentOptions {
                    eps: cfg.eps,
                    cg_tol: cfg.solver.cg_tol,
                    lower_order_correction: true,
                },
            };
            let sys = assemble_system(&family, m, &basis, measure, &cfg.mask, grid, &partial.series, &opts)?;
            let sol = solve_system(&sys, &basis, grid)?;
            let rel = match truth {
                Some(t) => relative_l2_error(&sol.field, &t.coefficient(m)?, grid)?,
                None => None,
            };
            let normal = regularized_normal_matrix(&sys, &basis);
            let diag = StageDiagnostics {
                m,
                rows: sys.row_count(),
                basis_size: sys.basis_size,
                lambda: sys.lambda,
                residual: sol.residual,
                condition_estimate: condition_estimate(sys.basis_size, &normal),
                rel_error_vs_truth: rel,
                l2_norm: l2_norm(&sol.field, grid)?,
            };
            Ok::<_, Error>((sys, sol, diag))
        })();
        match stage {
            Ok((sys, sol, diag)) => {
                log::info!("stage m = {m}: {diag:?}");
                if let Err(e) = partial.series.push(sol.field) {
                    return Err(fail(partial, e));
                }
                partial.stages.push(diag);
                partial.systems.push(sys);
            }
            Err(e) => return Err(fail(partial, e)),
        }
    }
    Ok(partial)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn basis_partition_of_unity() {
        let g = Grid2D::new(20).unwrap();
        for per_side in [2, 3, 6, 8] {
            let b = CoeffBasis::new(per_side, &g).unwrap();
            let sum = b.combine(&vec![1.0; b.size()], &g);
            assert!(sum.values().iter().all(|v| (v - 1.0).abs() < 1e-14));
        }
        assert!(CoeffBasis::new(1, &g).is_err());
    }

    #[test]
    fn multiset_counts() {
        assert_eq!(multisets(1, 3), vec![vec![0, 0, 0]]);
        assert_eq!(multisets(12, 3).len(), 364);
        assert_eq!(multisets(3, 2).len(), 6);
    }

    #[test]
    fn consistent_system_is_recovered() {
        let g = Grid2D::new(8).unwrap();
        let basis = CoeffBasis::new(2, &g).unwrap();
        let truth = [0.3, -1.2, 2.0, 0.7];
        // well-conditioned full-rank A
        let matrix = vec![
            1.0, 0.2, 0.0, 0.1, //
            0.0, 1.0, 0.3, 0.0, //
            0.2, 0.0, 1.0, 0.4, //
            0.0, 0.1, 0.0, 1.0, //
            0.5, 0.5, 0.5, 0.5, //
            1.0, -1.0, 1.0, -1.0,
        ];
        let rhs: Vec<f64> = matrix
            .chunks(4)
            .map(|r| r.iter().zip(&truth).map(|(a, c)| a * c).sum())
            .collect();
        let sys = MomentSystem {
            m: 2,
            rows: vec![vec![0, 0, 0]; 6],
            matrix,
            rhs,
            basis_size: 4,
            lambda: 1e-12,
        };
        let sol = solve_system(&sys, &basis, &g).unwrap();
        for (c, t) in sol.coeffs.iter().zip(&truth) {
            assert!((c - t).abs() <= 1e-6 * t.abs(), "{c} vs {t}");
        }
        let zero = MomentSystem {
            rhs: vec![0.0; 6],
            ..sys.clone()
        };
        assert!(solve_system(&zero, &basis, &g).unwrap().coeffs.iter().all(|&c| c == 0.0));
    }

    #[test]
    fn condition_of_diagonal() {
        let m = vec![4.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 2.0];
        assert!((condition_estimate(3, &m) - 4.0).abs() < 1e-6);
    }
}
