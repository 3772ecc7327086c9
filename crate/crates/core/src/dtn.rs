//! Partial Dirichlet-to-Neumann map: boundary data on the arc to normal
//! derivatives on the arc.

use std::io::Write;

use crate::error::{Error, Result};
use crate::forward::{solve_semilinear, SolveReport, SolverOptions};
use crate::geometry::{BoundaryTrace, GammaMask, Grid2D, ScalarField};
use crate::potential::PotentialSeries;

/// Smooth compactly supported profile `exp(1 - 1/(1 - t²))` on `|t| < 1`, peak 1 at `t = 0`.
pub fn bump_profile(t: f64) -> f64 {
    if t.abs() < 1.0 {
        (1.0 - 1.0 / (1.0 - t * t)).exp()
    } else {
        0.0
    }
}

/// Boundary bump `amplitude · b((s - center) / half_width)` measured along the arc.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bump {
    /// Arclength of the peak.
    pub center: f64,
    pub half_width: f64,
    pub amplitude: f64,
}

impl Bump {
    /// Samples the bump, with arclength measured from the start of the arc so
    /// that arcs through the origin are handled. Values off the arc are zero.
    pub fn trace(&self, mask: &GammaMask, grid: &Grid2D) -> BoundaryTrace {
        let c = mask.arc_offset(self.center);
        let mut out = BoundaryTrace::from_arclength(grid, |s| {
            self.amplitude * bump_profile((mask.arc_offset(s) - c) / self.half_width)
        });
        out = out.masked(mask);
        out
    }

    /// Whether `[center - w, center + w]` lies inside the arc.
    pub fn fits(&self, mask: &GammaMask) -> bool {
        let c = mask.arc_offset(self.center);
        c - self.half_width >= -1e-12 && c + self.half_width <= mask.length() + 1e-12
    }
}

/// Second-order one-sided normal derivative at every boundary node.
///
/// Uses `(3u₀ - 4u₁ + u₂) / (2h)` along the inward normal of the side owning
/// the node; corners follow the walk convention of [`Grid2D::boundary_side`].
pub fn normal_derivative(u: &ScalarField, grid: &Grid2D) -> Result<BoundaryTrace> {
    if grid.n() < 4 {
        return Err(Error::GridTooCoarse(grid.n()));
    }
    u.check_grid(grid)?;
    let v = u.values();
    let inv_2h = 0.5 / grid.h();
    let values = (0..grid.boundary_count())
        .map(|k| {
            let (i, j) = grid.boundary_ij(k);
            let (nx, ny) = grid.boundary_side(k).normal();
            let step = |m: i64| {
                let ii = (i as i64 - m * nx) as usize;
                let jj = (j as i64 - m * ny) as usize;
                v[grid.index(ii, jj)]
            };
            (3.0 * step(0) - 4.0 * step(1) + step(2)) * inv_2h
        })
        .collect();
    Ok(BoundaryTrace::from_values(grid, values)?)
}

/// One evaluation of the partial DtN map.
#[derive(Debug, Clone, PartialEq)]
pub struct DtnSample {
    pub input: BoundaryTrace,
    /// `∂_ν u` on the arc, zero elsewhere.
    pub output: BoundaryTrace,
    pub report: SolveReport,
}

/// `Λ_V^Γ f = ∂_ν u|_Γ` for data `f` supported in the arc.
pub fn dtn_apply(
    p: &PotentialSeries,
    f: &BoundaryTrace,
    mask: &GammaMask,
    grid: &Grid2D,
    opts: &SolverOptions,
) -> Result<DtnSample> {
    f.check_grid(grid)?;
    let off = f.off_arc_max(mask);
    if off != 0.0 {
        return Err(Error::SupportViolation(off));
    }
    let (u, report) = solve_semilinear(p, f, grid, opts)?;
    let output = normal_derivative(&u, grid)?.masked(mask);
    Ok(DtnSample {
        input: f.clone(),
        output,
        report,
    })
}

/// Writes samples as CSV with header `sample_id,s,in_gamma,f_value,dtn_value`,
/// one row per boundary node per sample.
pub fn write_dtn_csv<W: Write>(
    mut out: W,
    samples: &[DtnSample],
    mask: &GammaMask,
    grid: &Grid2D,
) -> Result<()> {
    writeln!(out, "sample_id,s,in_gamma,f_value,dtn_value")?;
    for (id, sample) in samples.iter().enumerate() {
        sample.input.check_grid(grid)?;
        sample.output.check_grid(grid)?;
        for k in 0..grid.boundary_count() {
            writeln!(
                out,
                "{},{},{},{:e},{:e}",
                id,
                grid.boundary_s(k),
                u8::from(mask.contains(k)),
                sample.input.values()[k],
                sample.output.values()[k]
            )?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Side;

    #[test]
    fn constant_field_has_zero_flux() {
        let g = Grid2D::new(8).unwrap();
        let d = normal_derivative(&ScalarField::constant(&g, 1.0), &g).unwrap();
        assert!(d.values().iter().all(|&v| v.abs() < 1e-12));
    }

    #[test]
    fn linear_field_flux() {
        let g = Grid2D::new(8).unwrap();
        let d = normal_derivative(&ScalarField::from_fn(&g, |x, _| x), &g).unwrap();
        for k in 0..g.boundary_count() {
            let expected = match g.boundary_side(k) {
                Side::Right => 1.0,
                Side::Left => -1.0,
                _ => 0.0,
            };
            assert!((d.values()[k] - expected).abs() < 1e-12, "k = {k}");
        }
    }

    #[test]
    fn quadratic_flux_is_exact() {
        let g = Grid2D::new(8).unwrap();
        let u = ScalarField::from_fn(&g, |x, y| x * x - y * y);
        let d = normal_derivative(&u, &g).unwrap();
        for k in 0..g.boundary_count() {
            let (x, y) = g.coords(g.boundary_node(k));
            let expected = match g.boundary_side(k) {
                Side::Bottom => 2.0 * y,
                Side::Right => 2.0 * x,
                Side::Top => -2.0 * y,
                Side::Left => -2.0 * x,
            };
            assert!((d.values()[k] - expected).abs() < 1e-12, "k = {k}");
        }
    }

    #[test]
    fn bump_support_and_peak() {
        let g = Grid2D::new(16).unwrap();
        let mask = GammaMask::new(0.0, 1.0, &g).unwrap();
        let b = Bump {
            center: 0.5,
            half_width: 0.25,
            amplitude: 0.05,
        };
        assert!(b.fits(&mask));
        let t = b.trace(&mask, &g);
        assert_eq!(t.values()[8], 0.05);
        assert_eq!(t.off_arc_max(&mask), 0.0);
        assert_eq!(t.values()[4], 0.0);
        assert!(t.values()[5] > 0.0);
    }

    #[test]
    fn support_violation_is_rejected() {
        let g = Grid2D::new(8).unwrap();
        let mask = GammaMask::new(0.0, 1.0, &g).unwrap();
        let p = PotentialSeries::zero(&g, 2).unwrap();
        let f = BoundaryTrace::constant(&g, 0.01);
        let err = dtn_apply(&p, &f, &mask, &g, &SolverOptions::default()).unwrap_err();
        assert!(matches!(err, Error::SupportViolation(_)));
    }

    #[test]
    fn csv_layout() {
        let g = Grid2D::new(4).unwrap();
        let mask = GammaMask::new(0.0, 1.0, &g).unwrap();
        let p = PotentialSeries::zero(&g, 2).unwrap();
        let s = dtn_apply(&p, &BoundaryTrace::zeros(&g), &mask, &g, &SolverOptions::default()).unwrap();
        let mut buf = Vec::new();
        write_dtn_csv(&mut buf, &[s.clone(), s], &mask, &g).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines.len(), 1 + 2 * 16);
        assert_eq!(lines[0], "sample_id,s,in_gamma,f_value,dtn_value");
        assert_eq!(lines[2], "0,0.25,1,0e0,0e0");
        assert!(lines[17].starts_with("1,0,1,"));
    }
}
