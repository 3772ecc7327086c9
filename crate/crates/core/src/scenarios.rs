//! Named experiments driven by an [`ExperimentConfig`].
//!
//! A scenario builds all of its artifacts in memory and only touches the
//! filesystem once it has succeeded, so a failed run leaves no partial output.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::ExperimentConfig;
use crate::dtn::{normal_derivative, write_dtn_csv, DtnSample};
use crate::error::{Error, Result};
use crate::forward::{newton_jacobian_check, solve_semilinear};
use crate::geometry::{interior_integral, BoundaryTrace, GammaMask, Grid2D, ScalarField};
use crate::harmonic::{gamma_supported_family, HarmonicMember};
use crate::linearization::{mixed_divided_difference, run_cascade, Measurement, SimulatedMeasurement};
use crate::noise::NoisyMeasurement;
use crate::reconstruction::{
    measured_moment, multisets, product_field, reconstruct_all, MomentOptions, ReconstructionConfig,
    MIN_PRODUCT_MASS,
};

/// Artifacts of a successful run.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioOutput {
    /// File name (relative to the output directory) and contents.
    pub files: Vec<(String, Vec<u8>)>,
    pub summary: Value,
}

impl ScenarioOutput {
    pub fn file(&self, name: &str) -> Option<&[u8]> {
        self.files.iter().find(|(n, _)| n == name).map(|(_, b)| b.as_slice())
    }
}

/// Runs the scenario named in `cfg` and appends `manifest.json`.
pub fn run_scenario(cfg: &ExperimentConfig) -> Result<ScenarioOutput> {
    cfg.validate()?;
    let (mut files, summary) = match cfg.scenario.as_str() {
        "forward_convergence" => forward_convergence(cfg)?,
        "linearization_check" => linearization_check(cfg)?,
        "identity_check" => identity_check(cfg)?,
        "reconstruction" => reconstruction(cfg)?,
        other => return Err(Error::Config(format!("unknown scenario '{other}'"))),
    };
    let manifest = json!({
        "scenario": cfg.scenario,
        "config": cfg,
        "files": files.iter().map(|(n, _)| n.clone()).collect::<Vec<_>>(),
        "summary": summary,
    });
    files.push(("manifest.json".into(), to_json(&manifest)?));
    Ok(ScenarioOutput { files, summary })
}

/// Writes every artifact under `dir`, creating it if needed.
pub fn write_outputs(dir: &Path, out: &ScenarioOutput) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    for (name, bytes) in &out.files {
        std::fs::write(dir.join(name), bytes)?;
    }
    Ok(())
}

type Artifacts = (Vec<(String, Vec<u8>)>, Value);

fn to_json<T: Serialize>(v: &T) -> Result<Vec<u8>> {
    let mut s = serde_json::to_string_pretty(v).map_err(|e| Error::Io(e.to_string()))?;
    s.push('\n');
    Ok(s.into_bytes())
}

fn csv_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:e}")).unwrap_or_default()
}

/// `max |u_coarse - u_fine|` over the coarse nodes; `fine` has twice the cells.
pub fn self_convergence_error(coarse: &ScalarField, cg: &Grid2D, fine: &ScalarField, fg: &Grid2D) -> Result<f64> {
    coarse.check_grid(cg)?;
    fine.check_grid(fg)?;
    if fg.n() != 2 * cg.n() {
        return Err(Error::InvalidArgument(format!(
            "fine grid must have twice the cells: {} vs {}",
            fg.n(),
            cg.n()
        )));
    }
    let mut err = 0.0f64;
    for (p, v) in coarse.values().iter().enumerate() {
        let (i, j) = cg.ij(p);
        err = err.max((v - fine.values()[fg.index(2 * i, 2 * j)]).abs());
    }
    Ok(err)
}

fn forward_convergence(cfg: &ExperimentConfig) -> Result<Artifacts> {
    let opts = cfg.solver_options();
    let bump = cfg.forward_bump();
    let mut files = Vec::new();
    let mut runs = Vec::new();
    for &n in &cfg.forward.grids {
        let grid = Grid2D::new(n)?;
        let mask = cfg.mask(&grid)?;
        let p = cfg.potential_on(&grid)?;
        let f = bump.trace(&mask, &grid);
        let (u, report) = solve_semilinear(&p, &f, &grid, &opts)?;
        let jac = newton_jacobian_check(&p, &u, &grid)?;
        let sample = DtnSample {
            input: f,
            output: normal_derivative(&u, &grid)?.masked(&mask),
            report: report.clone(),
        };
        let mut buf = Vec::new();
        write_dtn_csv(&mut buf, std::slice::from_ref(&sample), &mask, &grid)?;
        files.push((format!("dtn_n{n}.csv"), buf));
        runs.push((grid, u, report, jac));
    }

    let errors: Vec<f64> = runs
        .windows(2)
        .map(|w| self_convergence_error(&w[0].1, &w[0].0, &w[1].1, &w[1].0))
        .collect::<Result<_>>()?;
    let orders: Vec<f64> = errors.windows(2).map(|e| (e[0] / e[1]).log2()).collect();

    let mut csv = String::from(
        "n,h,newton_iterations,final_residual,jacobian_relative_defect,self_convergence_error,observed_order\n",
    );
    for (idx, (grid, _, report, jac)) in runs.iter().enumerate() {
        let err = errors.get(idx).copied();
        let order = idx.checked_sub(1).and_then(|k| orders.get(k)).copied();
        csv.push_str(&format!(
            "{},{},{},{:e},{:e},{},{}\n",
            grid.n(),
            grid.h(),
            report.iterations,
            report.final_residual,
            jac.relative_defect,
            csv_opt(err),
            csv_opt(order)
        ));
    }
    files.insert(0, ("forward_convergence.csv".into(), csv.into_bytes()));

    let max_defect = runs.iter().map(|r| r.3.relative_defect).fold(0.0, f64::max);
    let summary = json!({
        "grids": cfg.forward.grids,
        "self_convergence_errors": errors,
        "observed_orders": orders,
        "max_jacobian_relative_defect": max_defect,
    });
    Ok((files, summary))
}

/// Relative sup-norm gap between two traces on the arc.
pub fn relative_gap_on_arc(a: &BoundaryTrace, reference: &BoundaryTrace, mask: &GammaMask) -> f64 {
    let mut gap = 0.0f64;
    let mut scale = 0.0f64;
    for k in 0..a.len() {
        if mask.contains(k) {
            gap = gap.max((a.values()[k] - reference.values()[k]).abs());
            scale = scale.max(reference.values()[k].abs());
        }
    }
    gap / scale
}

fn linearization_check(cfg: &ExperimentConfig) -> Result<Artifacts> {
    let grid = cfg.grid()?;
    let mask = cfg.mask(&grid)?;
    let p = cfg.potential_on(&grid)?;
    let opts = cfg.solver_options();
    let m = cfg.linearization.m;
    let eps = cfg.linearization.eps;

    let family = gamma_supported_family(&mask, m, &grid, opts.cg_tol)?;
    let inputs: Vec<BoundaryTrace> = family.members.iter().map(|v| v.trace.clone()).collect();
    let state = run_cascade(&p, &inputs, &grid, opts.cg_tol)?;
    let w = state
        .get(state.full_subset())
        .ok_or(Error::MissingDerivative(state.full_subset()))?;
    let cascade = normal_derivative(w, &grid)?.masked(&mask);
    let divided = mixed_divided_difference(&p, &inputs, eps, &mask, &grid, &opts)?;
    let gap = relative_gap_on_arc(&divided, &cascade, &mask);

    let mut csv = String::from("s,in_gamma,cascade_flux,divided_difference\n");
    for k in 0..grid.boundary_count() {
        csv.push_str(&format!(
            "{},{},{:e},{:e}\n",
            grid.boundary_s(k),
            u8::from(mask.contains(k)),
            cascade.values()[k],
            divided.values()[k]
        ));
    }
    let summary = json!({ "m": m, "eps": eps, "n": grid.n(), "relative_gap": gap });
    Ok((vec![("linearization.csv".into(), csv.into_bytes())], summary))
}

/// One row of the identity check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IdentityRow {
    pub members: Vec<usize>,
    pub measured: f64,
    pub oracle: f64,
    pub gap: f64,
    pub bound: f64,
}

/// Seeded selection of `count` tuples of `size` family members with
/// non-negligible product mass.
pub fn select_tuples(
    family: &[HarmonicMember],
    size: usize,
    count: usize,
    seed: u64,
    grid: &Grid2D,
) -> Result<Vec<Vec<usize>>> {
    let mut candidates = multisets(family.len(), size);
    candidates.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut out = Vec::with_capacity(count);
    for t in candidates {
        if out.len() == count {
            break;
        }
        let members: Vec<&HarmonicMember> = t.iter().map(|&i| &family[i]).collect();
        let prod = product_field(&members, grid);
        let abs = ScalarField::from_values(grid, prod.values().iter().map(|v| v.abs()).collect())?;
        if interior_integral(&abs, grid)? >= MIN_PRODUCT_MASS {
            out.push(t);
        }
    }
    Ok(out)
}

/// Measured moments of `V_m` against seeded tuples, compared with the
/// quadrature of the true coefficient.
pub fn identity_rows(cfg: &ExperimentConfig) -> Result<Vec<IdentityRow>> {
    let grid = cfg.grid()?;
    let mask = cfg.mask(&grid)?;
    let p = cfg.potential_on(&grid)?;
    let opts = cfg.solver_options();
    let id = &cfg.identity;
    let m = id.m;
    let family = gamma_supported_family(&mask, id.family_size, &grid, opts.cg_tol)?;
    let tuples = select_tuples(&family.members, m + 1, id.tuples, cfg.seed, &grid)?;
    let measure = SimulatedMeasurement {
        potential: p.clone(),
        mask: mask.clone(),
        grid: grid.clone(),
        opts: opts.clone(),
    };
    let known = p.truncated(m - 1);
    let vm = p.coefficient(m)?;
    let h = grid.h();
    let moment = MomentOptions {
        eps: id.eps,
        cg_tol: opts.cg_tol,
        lower_order_correction: id.correction,
    };
    tuples
        .into_iter()
        .map(|t| {
            let members: Vec<&HarmonicMember> = t.iter().map(|&i| family.get(i)).collect();
            let measured = measured_moment(&measure, &members, &mask, &grid, &known, &moment)?;
            let oracle = interior_integral(&vm.mul(&product_field(&members, &grid)), &grid)?;
            let norms: f64 = members.iter().map(|v| v.field.max_abs()).product();
            let bound = 5.0 * (h * h + id.eps * id.eps) * vm.max_abs() * norms;
            Ok(IdentityRow {
                members: t,
                measured,
                oracle,
                gap: (measured - oracle).abs(),
                bound,
            })
        })
        .collect()
}

fn identity_check(cfg: &ExperimentConfig) -> Result<Artifacts> {
    let rows = identity_rows(cfg)?;
    let mut csv = String::from("tuple_id,members,measured,oracle,gap,bound\n");
    for (i, r) in rows.iter().enumerate() {
        let members: Vec<String> = r.members.iter().map(|x| x.to_string()).collect();
        csv.push_str(&format!(
            "{},{},{:e},{:e},{:e},{:e}\n",
            i,
            members.join("-"),
            r.measured,
            r.oracle,
            r.gap,
            r.bound
        ));
    }
    let max_gap = rows.iter().map(|r| r.gap).fold(0.0, f64::max);
    let max_ratio = rows.iter().map(|r| r.gap / r.bound).fold(0.0, f64::max);
    let max_oracle = rows.iter().map(|r| r.oracle.abs()).fold(0.0, f64::max);
    let summary = json!({
        "m": cfg.identity.m,
        "eps": cfg.identity.eps,
        "correction": cfg.identity.correction,
        "tuples": rows.len(),
        "max_gap": max_gap,
        "max_gap_over_bound": max_ratio,
        "relative_gap": if max_oracle > 0.0 { max_gap / max_oracle } else { f64::INFINITY },
        "within_bound": rows.iter().all(|r| r.gap <= r.bound),
    });
    Ok((vec![("identity.csv".into(), csv.into_bytes())], summary))
}

/// Writes `x,y,value,truth_value` rows.
pub fn field_comparison_csv(value: &ScalarField, truth: &ScalarField, grid: &Grid2D) -> Result<Vec<u8>> {
    value.check_grid(grid)?;
    truth.check_grid(grid)?;
    let mut s = String::from("x,y,value,truth_value\n");
    for p in 0..grid.node_count() {
        let (x, y) = grid.coords(p);
        s.push_str(&format!("{x},{y},{:e},{:e}\n", value.values()[p], truth.values()[p]));
    }
    Ok(s.into_bytes())
}

/// [`ReconstructionConfig`] described by the experiment config.
pub fn reconstruction_config(cfg: &ExperimentConfig) -> Result<ReconstructionConfig> {
    let grid = cfg.grid()?;
    let mask = cfg.mask(&grid)?;
    let r = &cfg.reconstruction;
    let mut rc = ReconstructionConfig::new(grid, mask);
    rc.family_size = r.family_size;
    rc.basis_per_side = r.basis_per_side;
    rc.rows_per_basis = r.rows_per_basis;
    rc.lambda_rel = r.lambda_rel;
    rc.eps = r.eps;
    rc.seed = cfg.seed;
    rc.solver = cfg.solver_options();
    Ok(rc)
}

fn reconstruction(cfg: &ExperimentConfig) -> Result<Artifacts> {
    let rc = reconstruction_config(cfg)?;
    let grid = rc.grid.clone();
    let truth = cfg.potential_on(&grid)?;
    let sim = SimulatedMeasurement {
        potential: truth.clone(),
        mask: rc.mask.clone(),
        grid: grid.clone(),
        opts: rc.solver.clone(),
    };
    let noisy;
    let measure: &dyn Measurement = if cfg.reconstruction.noise_sigma > 0.0 {
        noisy = NoisyMeasurement {
            inner: sim,
            sigma: cfg.reconstruction.noise_sigma,
            seed: cfg.seed,
        };
        &noisy
    } else {
        &sim
    };
    let rec = reconstruct_all(measure, cfg.reconstruction.kmax, &rc, Some(&truth)).map_err(|f| {
        log::error!("reconstruction stopped after {} stage(s)", f.partial.stages.len());
        f.error
    })?;

    let mut files = vec![("stages.json".into(), to_json(&rec.stages)?)];
    for stage in &rec.stages {
        let m = stage.m;
        files.push((
            format!("field_V{m}.csv"),
            field_comparison_csv(&rec.series.coefficient(m)?, &truth.coefficient(m)?, &grid)?,
        ));
    }
    let summary = json!({
        "kmax": cfg.reconstruction.kmax,
        "noise_sigma": cfg.reconstruction.noise_sigma,
        "stages": rec.stages,
    });
    Ok((files, summary))
}
