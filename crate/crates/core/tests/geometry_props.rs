use pdtn_core::geometry::{boundary_integral, boundary_integral_flags, interior_integral, PERIMETER};
use pdtn_core::{BoundaryTrace, GammaMask, Grid2D, ScalarField};
use proptest::prelude::*;

fn smooth_boundary(x: f64, y: f64) -> f64 {
    (x + 0.3 * y).exp() * (2.0 * y).cos()
}

/// Perimeter integral of `smooth_boundary`, side by side with a fine Simpson rule.
fn smooth_boundary_exact() -> f64 {
    let simpson = |f: &dyn Fn(f64) -> f64| {
        let n = 20_000;
        let h = 1.0 / n as f64;
        let mut s = f(0.0) + f(1.0);
        for i in 1..n {
            s += f(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        s * h / 3.0
    };
    simpson(&|t| smooth_boundary(t, 0.0))
        + simpson(&|t| smooth_boundary(1.0, t))
        + simpson(&|t| smooth_boundary(t, 1.0))
        + simpson(&|t| smooth_boundary(0.0, t))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn complementary_masks_sum_to_full(n in 8usize..40, s0 in 0.0f64..4.0, len in 0.3f64..3.7, seed in 0u64..1000) {
        let g = Grid2D::new(n).unwrap();
        let mask = GammaMask::new(s0, s0 + len, &g).unwrap();
        let t = BoundaryTrace::from_arclength(&g, |s| ((s + seed as f64) * 1.7).sin() + 0.2 * s);
        let inside = boundary_integral(&t, &mask, &g).unwrap();
        let outside = boundary_integral_flags(&t, &mask.complement_flags(), &g).unwrap();
        let full = boundary_integral(&t, &GammaMask::full(&g), &g).unwrap();
        prop_assert!((inside + outside - full).abs() <= 1e-12 * (1.0 + full.abs()));
        let on_arc = (0..g.boundary_count()).filter(|&k| mask.contains(k)).count();
        prop_assert_eq!(on_arc, mask.count());
        prop_assert!((mask.count() as f64 * g.h() - len).abs() <= g.h() + 1e-12);
    }

    #[test]
    fn interior_integral_is_linear(n in 8usize..40, a in -3.0f64..3.0, b in -3.0f64..3.0) {
        let g = Grid2D::new(n).unwrap();
        let f = ScalarField::from_fn(&g, |x, y| (3.0 * x).sin() * y);
        let h = ScalarField::from_fn(&g, |x, y| (x - y).exp());
        let mut comb = f.scale(a);
        comb.axpy(b, &h);
        let lhs = interior_integral(&comb, &g).unwrap();
        let rhs = a * interior_integral(&f, &g).unwrap() + b * interior_integral(&h, &g).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs()));
    }

    #[test]
    fn boundary_walk_round_trips(n in 4usize..50, k_frac in 0.0f64..1.0) {
        let g = Grid2D::new(n).unwrap();
        let k = ((k_frac * g.boundary_count() as f64) as usize).min(g.boundary_count() - 1);
        let (x, y) = g.coords(g.boundary_node(k));
        let (px, py) = g.point_at(g.boundary_s(k));
        prop_assert!((x - px).abs() < 1e-12 && (y - py).abs() < 1e-12);
        prop_assert!(g.boundary_s(k) < PERIMETER);
    }
}

#[test]
fn bilinear_integrand_is_exact() {
    let g = Grid2D::new(8).unwrap();
    let f = ScalarField::from_fn(&g, |x, y| 1.0 + 2.0 * x + 3.0 * y + 4.0 * x * y);
    assert!((interior_integral(&f, &g).unwrap() - 4.5).abs() < 1e-14);
}

#[test]
fn quadratures_converge_at_second_order() {
    let exact_interior = (1.0f64.exp() - 1.0) * (1.0 - 2.0f64.cos()) / 2.0;
    let exact_boundary = smooth_boundary_exact();
    let mut int_err = Vec::new();
    let mut bnd_err = Vec::new();
    for n in [16, 32, 64] {
        let g = Grid2D::new(n).unwrap();
        let f = ScalarField::from_fn(&g, |x, y| x.exp() * (2.0 * y).sin());
        int_err.push((interior_integral(&f, &g).unwrap() - exact_interior).abs());
        let t = BoundaryTrace::from_xy(&g, smooth_boundary);
        bnd_err.push((boundary_integral(&t, &GammaMask::full(&g), &g).unwrap() - exact_boundary).abs());
    }
    for errs in [&int_err, &bnd_err] {
        for w in errs.windows(2) {
            let order = (w[0] / w[1]).log2();
            assert!(order >= 1.9, "{errs:?}");
        }
    }
}

#[test]
fn arclength_jump_at_origin_uses_midpoint_value() {
    // g(s) = s jumps from 4 to 0 at the origin; the node there takes the mean.
    let g = Grid2D::new(16).unwrap();
    let mut t = BoundaryTrace::from_arclength(&g, |s| s);
    t.values_mut()[0] = 0.5 * PERIMETER;
    let full = boundary_integral(&t, &GammaMask::full(&g), &g).unwrap();
    assert!((full - 8.0).abs() < 1e-12, "{full}");
}
