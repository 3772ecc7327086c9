//! Experiment configuration (TOML).
//!
//! ```toml
//! scenario = "reconstruction"
//! seed = 7
//! output_dir = "out/reconstruction"
//!
//! [grid]
//! n = 64
//!
//! [gamma]
//! s0 = 0.0
//! s1 = 2.0
//!
//! [[potential]]
//! k = 2
//! expr = "gauss(10, 0.4, 0.6)"
//!
//! [[potential]]
//! k = 3
//! expr = "0.5 * sin(pi*x) * sin(pi*y)"
//!
//! [reconstruction]
//! kmax = 3
//! basis_per_side = 6
//! ```
//!
//! Every section except `grid` and `gamma` is optional and falls back to the
//! defaults below. Unknown keys are rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dtn::Bump;
use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::forward::SolverOptions;
use crate::geometry::{GammaMask, Grid2D};
use crate::potential::PotentialSeries;

/// Names accepted in the `scenario` key.
pub const SCENARIOS: [&str; 4] = [
    "forward_convergence",
    "linearization_check",
    "identity_check",
    "reconstruction",
];

/// Environment variable overriding `output_dir`.
pub const OUTPUT_DIR_ENV: &str = "PDTN_OUTPUT_DIR";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: String,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    pub grid: GridSection,
    pub gamma: GammaSection,
    #[serde(default)]
    pub potential: Vec<PotentialTerm>,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub forward: ForwardSection,
    #[serde(default)]
    pub linearization: LinearizationSection,
    #[serde(default)]
    pub identity: IdentitySection,
    #[serde(default)]
    pub reconstruction: ReconstructionSection,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GammaSection {
    pub s0: f64,
    pub s1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialTerm {
    pub k: usize,
    pub expr: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSection {
    pub cg_tol: f64,
    pub newton_tol: f64,
    pub max_newton: usize,
    pub r0: f64,
}

impl Default for SolverSection {
    fn default() -> Self {
        let d = SolverOptions::default();
        Self {
            cg_tol: d.cg_tol,
            newton_tol: d.newton_tol,
            max_newton: d.max_newton,
            r0: d.r0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ForwardSection {
    /// Successively doubled grids for self-convergence.
    pub grids: Vec<usize>,
    /// Peak of the boundary bump.
    pub amplitude: f64,
    /// Arclength position of the bump center.
    pub center: f64,
    pub half_width: f64,
}

impl Default for ForwardSection {
    fn default() -> Self {
        Self {
            grids: vec![16, 32, 64],
            amplitude: 0.05,
            center: 0.5,
            half_width: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LinearizationSection {
    pub m: usize,
    pub eps: f64,
}

impl Default for LinearizationSection {
    fn default() -> Self {
        Self { m: 2, eps: 1e-2 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IdentitySection {
    pub m: usize,
    pub eps: f64,
    pub tuples: usize,
    pub family_size: usize,
    /// Subtract the lower-order correction (only matters for `m >= 3`).
    pub correction: bool,
}

impl Default for IdentitySection {
    fn default() -> Self {
        Self {
            m: 2,
            eps: 1e-2,
            tuples: 20,
            family_size: 12,
            correction: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReconstructionSection {
    pub kmax: usize,
    pub eps: f64,
    pub family_size: usize,
    pub basis_per_side: usize,
    pub rows_per_basis: usize,
    pub lambda_rel: f64,
    pub noise_sigma: f64,
}

impl Default for ReconstructionSection {
    fn default() -> Self {
        Self {
            kmax: 3,
            eps: 1e-2,
            family_size: 12,
            basis_per_side: 8,
            rows_per_basis: 3,
            lambda_rel: 1e-6,
            noise_sigma: 0.0,
        }
    }
}

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::Config(msg()))
    }
}

fn check_grid_size(n: usize) -> Result<()> {
    check((8..=256).contains(&n), || format!("grid n = {n} outside [8, 256]"))
}

fn check_eps(eps: f64) -> Result<()> {
    check(eps > 0.0 && eps <= 0.05, || format!("eps = {eps} outside (0, 0.05]"))
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    /// Checks ranges, expressions and the arc.
    pub fn validate(&self) -> Result<()> {
        check(SCENARIOS.contains(&self.scenario.as_str()), || {
            format!("unknown scenario '{}'; expected one of {:?}", self.scenario, SCENARIOS)
        })?;
        check_grid_size(self.grid.n)?;
        let grid = self.grid()?;
        self.mask(&grid)?;
        for term in &self.potential {
            check(term.k >= 2, || format!("potential term k = {} must be >= 2", term.k))?;
            Expr::parse(&term.expr)?;
        }
        let mut ks: Vec<usize> = self.potential.iter().map(|t| t.k).collect();
        ks.sort_unstable();
        check(ks.windows(2).all(|w| w[0] != w[1]), || "duplicate potential order".into())?;
        let s = &self.solver;
        check(s.cg_tol > 0.0 && s.newton_tol > 0.0 && s.r0 > 0.0 && s.max_newton > 0, || {
            "solver tolerances, r0 and max_newton must be positive".into()
        })?;

        match self.scenario.as_str() {
            "forward_convergence" => {
                let f = &self.forward;
                check(f.grids.len() >= 3, || "forward.grids needs at least 3 grids".into())?;
                for &n in &f.grids {
                    check_grid_size(n)?;
                }
                check(f.grids.windows(2).all(|w| w[1] == 2 * w[0]), || {
                    "forward.grids must double successively".into()
                })?;
                check(f.amplitude > 0.0 && f.amplitude <= s.r0, || {
                    format!("forward.amplitude must lie in (0, r0 = {}]", s.r0)
                })?;
                check(self.forward_bump().fits(&self.mask(&grid)?), || {
                    "forward bump support must lie inside the arc".into()
                })?;
            }
            "linearization_check" => {
                let l = &self.linearization;
                check((1..=4).contains(&l.m), || format!("linearization.m = {} outside [1, 4]", l.m))?;
                check_eps(l.eps)?;
            }
            "identity_check" => {
                let i = &self.identity;
                check((2..=4).contains(&i.m), || format!("identity.m = {} outside [2, 4]", i.m))?;
                check_eps(i.eps)?;
                check(i.tuples > 0 && i.family_size > 0, || "identity.tuples and family_size must be positive".into())?;
            }
            "reconstruction" => {
                let r = &self.reconstruction;
                check((2..=4).contains(&r.kmax), || format!("reconstruction.kmax = {} outside [2, 4]", r.kmax))?;
                check_eps(r.eps)?;
                check(r.family_size > 0 && r.rows_per_basis > 0, || {
                    "reconstruction.family_size and rows_per_basis must be positive".into()
                })?;
                check(r.basis_per_side >= 2, || "reconstruction.basis_per_side must be >= 2".into())?;
                check(r.lambda_rel >= 0.0, || "reconstruction.lambda_rel must be >= 0".into())?;
                check(r.noise_sigma >= 0.0, || "reconstruction.noise_sigma must be >= 0".into())?;
            }
            _ => unreachable!(),
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<Grid2D> {
        Grid2D::new(self.grid.n)
    }

    pub fn mask(&self, grid: &Grid2D) -> Result<GammaMask> {
        GammaMask::new(self.gamma.s0, self.gamma.s1, grid)
    }

    pub fn solver_options(&self) -> SolverOptions {
        SolverOptions {
            cg_tol: self.solver.cg_tol,
            newton_tol: self.solver.newton_tol,
            max_newton: self.solver.max_newton,
            r0: self.solver.r0,
        }
    }

    /// Samples the potential terms onto `grid`; `K` is the largest listed order
    /// (at least 2).
    pub fn potential_on(&self, grid: &Grid2D) -> Result<PotentialSeries> {
        let kmax = self.potential.iter().map(|t| t.k).max().unwrap_or(2);
        let mut p = PotentialSeries::zero(grid, kmax)?;
        for term in &self.potential {
            p.set_coefficient(term.k, Expr::parse(&term.expr)?.sample(grid)?)?;
        }
        Ok(p)
    }

    pub fn forward_bump(&self) -> Bump {
        Bump {
            center: self.forward.center,
            half_width: self.forward.half_width,
            amplitude: self.forward.amplitude,
        }
    }

    /// `output_dir`, unless overridden by [`OUTPUT_DIR_ENV`].
    pub fn resolved_output_dir(&self) -> PathBuf {
        std::env::var_os(OUTPUT_DIR_ENV)
            .map(PathBuf::from)
            .unwrap_or_else(|| self.output_dir.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
scenario = "identity_check"
[grid]
n = 32
[gamma]
s0 = 0.0
s1 = 2.0
[[potential]]
k = 2
expr = "1 + x"
"#;

    #[test]
    fn parses_minimal_config() {
        let cfg = ExperimentConfig::from_toml_str(MINIMAL).unwrap();
        assert_eq!(cfg.identity, IdentitySection::default());
        let g = cfg.grid().unwrap();
        let p = cfg.potential_on(&g).unwrap();
        assert_eq!(p.kmax(), 2);
        assert_eq!(p.coefficient(2).unwrap().values()[g.index(32, 0)], 2.0);
    }

    #[test]
    fn rejects_bad_configs() {
        let bad = [
            MINIMAL.replace("identity_check", "nope"),
            MINIMAL.replace("n = 32", "n = 4"),
            MINIMAL.replace("s1 = 2.0", "s1 = 9.0"),
            MINIMAL.replace("1 + x", "1 + "),
            MINIMAL.replace("k = 2", "k = 1"),
            format!("{MINIMAL}\nunknown = 3\n"),
            format!("{MINIMAL}\n[identity]\neps = 0.5\n"),
            "not toml at all [".to_string(),
        ];
        for text in bad {
            assert!(ExperimentConfig::from_toml_str(&text).is_err(), "{text}");
        }
    }

    #[test]
    fn manifest_round_trip() {
        let cfg = ExperimentConfig::from_toml_str(MINIMAL).unwrap();
        let text = toml::to_string(&cfg).unwrap();
        assert_eq!(ExperimentConfig::from_toml_str(&text).unwrap(), cfg);
    }
}
