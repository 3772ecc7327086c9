//! Families of discrete harmonic test functions.

use rayon::prelude::*;
use serde::Serialize;

use crate::dtn::Bump;
use crate::error::{Error, Result};
use crate::forward::harmonic_extension;
use crate::geometry::{BoundaryTrace, GammaMask, Grid2D, ScalarField};

/// Where a family member came from.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Provenance {
    Bump {
        center: f64,
        half_width: f64,
    },
    /// `Re (x + iy)^degree` or `Im (x + iy)^degree`. Degrees up to 3 are
    /// annihilated exactly by the 5-point stencil; higher degrees leave an
    /// `O(h²)` residual.
    Polynomial {
        degree: usize,
        imaginary: bool,
        stencil_exact: bool,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct HarmonicMember {
    pub field: ScalarField,
    pub trace: BoundaryTrace,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct HarmonicFamily {
    pub members: Vec<HarmonicMember>,
}

impl HarmonicFamily {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn get(&self, i: usize) -> &HarmonicMember {
        &self.members[i]
    }
}

/// Discrete Laplacian `-Δ_h v` at interior unknowns.
pub fn laplacian_residual(v: &ScalarField, grid: &Grid2D) -> Vec<f64> {
    let n = grid.n();
    let inv_h2 = 1.0 / (grid.h() * grid.h());
    let vals = v.values();
    let mut out = Vec::with_capacity(grid.interior_count());
    for j in 1..n {
        for i in 1..n {
            let c = grid.index(i, j);
            out.push(
                (4.0 * vals[c] - vals[c - 1] - vals[c + 1] - vals[c - (n + 1)] - vals[c + (n + 1)])
                    * inv_h2,
            );
        }
    }
    out
}

/// The bump layout used by [`gamma_supported_family`]: members alternate
/// between half-widths `|Γ|/4` and `|Γ|/8`, and within each width the centers
/// are equispaced over the positions that keep the support inside the arc.
pub fn gamma_bumps(mask: &GammaMask, count: usize) -> Vec<Bump> {
    let len = mask.length();
    let widths = [len / 4.0, len / 8.0];
    let per_width = [count.div_ceil(2), count / 2];
    let mut placed = [0usize; 2];
    (0..count)
        .map(|i| {
            let scale = i % 2;
            let w = widths[scale];
            let slot = placed[scale];
            placed[scale] += 1;
            let offset = w + (slot as f64 + 0.5) * (len - 2.0 * w) / per_width[scale] as f64;
            Bump {
                center: mask.s0() + offset,
                half_width: w,
                amplitude: 1.0,
            }
        })
        .collect()
}

/// `count` harmonic functions whose boundary traces are unit bumps supported in the arc.
pub fn gamma_supported_family(
    mask: &GammaMask,
    count: usize,
    grid: &Grid2D,
    cg_tol: f64,
) -> Result<HarmonicFamily> {
    if count == 0 {
        return Err(Error::InvalidArgument("family count must be at least 1".into()));
    }
    if mask.count() < 4 {
        return Err(Error::InvalidArgument(format!(
            "arc holds {} nodes, need at least 4",
            mask.count()
        )));
    }
    let bumps = gamma_bumps(mask, count);
    let narrowest = bumps
        .iter()
        .map(|b| b.half_width)
        .fold(f64::INFINITY, f64::min);
    let probe = Bump {
        center: mask.s0() + mask.length() / 2.0,
        half_width: narrowest,
        amplitude: 1.0,
    };
    let support = probe
        .trace(mask, grid)
        .values()
        .iter()
        .filter(|&&v| v > 0.0)
        .count();
    if support < 3 {
        return Err(Error::InvalidArgument(format!(
            "arc too short: narrowest bump covers {support} nodes, need at least 3"
        )));
    }
    let members = bumps
        .par_iter()
        .map(|b| {
            let trace = b.trace(mask, grid);
            let field = harmonic_extension(&trace, grid, cg_tol)?;
            Ok(HarmonicMember {
                field,
                trace,
                provenance: Provenance::Bump {
                    center: b.center,
                    half_width: b.half_width,
                },
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(HarmonicFamily { members })
}

/// `Re (x + iy)^d` and `Im (x + iy)^d` for `d = 0..=max_degree` (the zero `Im` at `d = 0` is skipped).
pub fn polynomial_family(max_degree: usize, grid: &Grid2D) -> Result<HarmonicFamily> {
    if max_degree > 6 {
        return Err(Error::InvalidArgument(format!("max_degree must be <= 6, got {max_degree}")));
    }
    let power = |x: f64, y: f64, d: usize| {
        let (mut re, mut im) = (1.0, 0.0);
        for _ in 0..d {
            (re, im) = (re * x - im * y, re * y + im * x);
        }
        (re, im)
    };
    let mut members = Vec::new();
    for d in 0..=max_degree {
        for imaginary in [false, true] {
            if d == 0 && imaginary {
                continue;
            }
            let field = ScalarField::from_fn(grid, |x, y| {
                let (re, im) = power(x, y, d);
                if imaginary {
                    im
                } else {
                    re
                }
            });
            members.push(HarmonicMember {
                trace: field.trace(grid),
                field,
                provenance: Provenance::Polynomial {
                    degree: d,
                    imaginary,
                    stencil_exact: d <= 3,
                },
            });
        }
    }
    Ok(HarmonicFamily { members })
}

/// Writes `x,y,value` rows for every node.
pub fn write_field_csv<W: std::io::Write>(mut out: W, field: &ScalarField, grid: &Grid2D) -> Result<()> {
    field.check_grid(grid)?;
    writeln!(out, "x,y,value")?;
    for (p, v) in field.values().iter().enumerate() {
        let (x, y) = grid.coords(p);
        writeln!(out, "{x},{y},{v:e}")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::boundary_integral;

    #[test]
    fn single_bump_on_bottom_side() {
        let g = Grid2D::new(16).unwrap();
        let mask = GammaMask::new(0.0, 1.0, &g).unwrap();
        let fam = gamma_supported_family(&mask, 1, &g, 1e-10).unwrap();
        assert_eq!(fam.len(), 1);
        match fam.get(0).provenance {
            Provenance::Bump { center, .. } => assert!((center - 0.5).abs() < 1e-15),
            _ => panic!(),
        }
        let t = &fam.get(0).trace;
        for k in g.n()..g.boundary_count() {
            assert_eq!(t.values()[k], 0.0);
        }
        assert_eq!(t.values()[8], 1.0);
    }

    #[test]
    fn disjoint_supports_are_orthogonal() {
        let g = Grid2D::new(32).unwrap();
        let mask = GammaMask::new(0.0, 2.0, &g).unwrap();
        let a = Bump { center: 0.3, half_width: 0.25, amplitude: 1.0 }.trace(&mask, &g);
        let b = Bump { center: 1.4, half_width: 0.25, amplitude: 1.0 }.trace(&mask, &g);
        assert_eq!(boundary_integral(&a.mul(&b), &GammaMask::full(&g), &g).unwrap(), 0.0);
    }

    #[test]
    fn family_members_fit_the_arc() {
        let g = Grid2D::new(32).unwrap();
        let mask = GammaMask::new(0.5, 2.5, &g).unwrap();
        for b in gamma_bumps(&mask, 12) {
            assert!(b.fits(&mask), "{b:?}");
        }
    }

    #[test]
    fn tiny_arc_is_rejected() {
        let g = Grid2D::new(8).unwrap();
        let mask = GammaMask::new(0.0, 0.5, &g).unwrap();
        assert!(gamma_supported_family(&mask, 2, &g, 1e-10).is_err());
        assert!(gamma_supported_family(&GammaMask::full(&g), 0, &g, 1e-10).is_err());
    }

    #[test]
    fn polynomial_members() {
        let g = Grid2D::new(8).unwrap();
        let fam = polynomial_family(3, &g).unwrap();
        assert_eq!(fam.len(), 7);
        assert!(fam.get(0).field.values().iter().all(|&v| v == 1.0));
        let node = g.index(3, 5);
        let (x, y) = g.coords(node);
        assert!((fam.get(3).field.values()[node] - (x * x - y * y)).abs() < 1e-15);
        assert!((fam.get(4).field.values()[node] - 2.0 * x * y).abs() < 1e-15);
        assert!((fam.get(5).field.values()[node] - (x.powi(3) - 3.0 * x * y * y)).abs() < 1e-15);
        for m in &fam.members[..5] {
            assert!(laplacian_residual(&m.field, &g).iter().all(|r| r.abs() < 1e-10));
        }
        let cubic = laplacian_residual(&fam.get(5).field, &g);
        assert!(cubic.iter().all(|r| r.abs() < 1e-9));
        assert!(polynomial_family(7, &g).is_err());
    }
}
