use pdtn_core::forward::{solve_linear, solve_semilinear, SolverOptions};
use pdtn_core::sparse::{assemble, solve_spd};
use pdtn_core::{BoundaryTrace, Grid2D, PotentialSeries, ScalarField};
use proptest::prelude::*;

fn series(g: &Grid2D, v2: f64, v3: f64, v4: f64) -> PotentialSeries {
    let mut p = PotentialSeries::zero(g, 4).unwrap();
    p.set_coefficient(2, ScalarField::from_fn(g, |x, _| v2 * (1.0 + x))).unwrap();
    p.set_coefficient(3, ScalarField::from_fn(g, |x, y| v3 * (x * y).cos())).unwrap();
    p.set_coefficient(4, ScalarField::constant(g, v4)).unwrap();
    p
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn operators_are_weakly_diagonally_dominant(n in 4usize..24, scale in 0.0f64..50.0) {
        let g = Grid2D::new(n).unwrap();
        let c = ScalarField::from_fn(&g, |x, y| scale * x * y);
        let a = assemble(&c, &g).unwrap();
        prop_assert!(a.is_symmetric(0.0));
        for r in 0..a.dim() {
            let off: f64 = a.row(r).filter(|&(col, _)| col != r).map(|(_, v)| v.abs()).sum();
            prop_assert!(off <= a.get(r, r));
        }
    }

    #[test]
    fn cg_is_deterministic_and_energy_decreases(n in 4usize..20, seed in 0u64..500) {
        let g = Grid2D::new(n).unwrap();
        let a = assemble(&ScalarField::from_fn(&g, |x, _| 3.0 * x), &g).unwrap();
        let b: Vec<f64> = (0..a.dim()).map(|i| ((i as u64 * 31 + seed) % 17) as f64 - 8.0).collect();
        let first = solve_spd(&a, &b, 1e-10).unwrap();
        let second = solve_spd(&a, &b, 1e-10).unwrap();
        prop_assert_eq!(&first, &second);
        for w in first.energy_history.windows(2) {
            prop_assert!(w[1] <= w[0] + 1e-12 * w[0].abs().max(1.0));
        }
    }

    #[test]
    fn eval_dz_matches_central_differences(v2 in -2.0f64..2.0, v3 in -2.0f64..2.0, v4 in -2.0f64..2.0, z in -0.8f64..0.8) {
        let g = Grid2D::new(4).unwrap();
        let p = series(&g, v2, v3, v4);
        let node = g.index(2, 3);
        let err = |d: f64| (p.eval_dz(node, z) - (p.eval(node, z + d) - p.eval(node, z - d)) / (2.0 * d)).abs();
        let (e3, e4) = (err(1e-3), err(1e-4));
        // the O(δ²) term is (V₃ + V₄ z) δ²/6; skip draws where it nearly cancels
        let c = (v3 * (0.375f64).cos() + v4 * z).abs();
        prop_assume!(c > 0.05);
        let ratio = e3 / e4;
        prop_assert!((ratio - 100.0).abs() < 5.0, "ratio {ratio}, e3 {e3}, e4 {e4}");
    }

    #[test]
    fn eval_is_polynomial_of_degree_k(v2 in -2.0f64..2.0, v3 in -2.0f64..2.0, v4 in -2.0f64..2.0, z0 in -1.0f64..1.0) {
        let g = Grid2D::new(4).unwrap();
        let p = series(&g, v2, v3, v4);
        let node = g.index(1, 1);
        // fifth forward difference with unit step scaled to δ
        let d = 0.25;
        let binom = [1.0, -5.0, 10.0, -10.0, 5.0, -1.0];
        let diff: f64 = binom.iter().enumerate().map(|(i, c)| c * p.eval(node, z0 + (5 - i) as f64 * d)).sum();
        prop_assert!(diff.abs() < 1e-12, "{diff}");
    }

    #[test]
    fn zero_data_gives_zero_solution(v2 in 0.0f64..3.0, v3 in -3.0f64..3.0, n in 8usize..24) {
        let g = Grid2D::new(n).unwrap();
        let p = series(&g, v2, v3, 0.0);
        let (u, rep) = solve_semilinear(&p, &BoundaryTrace::zeros(&g), &g, &SolverOptions::default()).unwrap();
        prop_assert!(rep.iterations <= 1);
        prop_assert!(u.max_abs() == 0.0);
    }

    #[test]
    fn maximum_principle_smoke(v2 in 0.0f64..3.0, v3 in 0.0f64..3.0, amp in 0.0f64..0.1, n in 8usize..24) {
        let g = Grid2D::new(n).unwrap();
        let p = series(&g, v2, v3, 0.0);
        let f = BoundaryTrace::from_xy(&g, |x, y| amp * (x * (1.0 - y)).powi(2));
        let opts = SolverOptions::default();
        let (u, _) = solve_semilinear(&p, &f, &g, &opts).unwrap();
        let min = u.values().iter().cloned().fold(f64::INFINITY, f64::min);
        prop_assert!(min >= -10.0 * opts.newton_tol, "{min}");
    }
}

#[test]
fn zero_potential_matches_linear_solve() {
    let g = Grid2D::new(24).unwrap();
    let p = PotentialSeries::zero(&g, 3).unwrap();
    let f = BoundaryTrace::from_xy(&g, |x, y| 0.05 * (3.0 * x).sin() * (1.0 + y));
    let (u, _) = solve_semilinear(&p, &f, &g, &SolverOptions::default()).unwrap();
    let zero = ScalarField::zeros(&g);
    let v = solve_linear(&zero, &zero, &f, &g).unwrap();
    let diff = u.sub(&v).max_abs();
    assert!(diff < 1e-9, "{diff}");
}

#[test]
fn newton_converges_quadratically() {
    let g = Grid2D::new(32).unwrap();
    let mut p = PotentialSeries::zero(&g, 2).unwrap();
    p.set_coefficient(2, ScalarField::constant(&g, 1.0)).unwrap();
    let f = BoundaryTrace::from_xy(&g, |x, y| 0.05 * (1.0 - x * y));
    let (_, rep) = solve_semilinear(&p, &f, &g, &SolverOptions::default()).unwrap();
    let h = &rep.residual_history;
    assert!(h.len() >= 3, "{h:?}");
    let mut checked = 0;
    for w in h.windows(2) {
        // stop where the residual meets the CG floor
        if w[0] <= 1e-3 && w[1] > 1e-12 {
            assert!(w[1] <= 10.0 * w[0] * w[0], "{h:?}");
            checked += 1;
        }
    }
    assert!(checked >= 1, "{h:?}");
}
