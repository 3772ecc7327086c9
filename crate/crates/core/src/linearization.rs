//! Higher-order linearization of the partial DtN map.
//!
//! Two independent routes to `∂_{ε_1} … ∂_{ε_m} u |_{ε=0}` for boundary data
//! `f = Σ ε_l f_l`:
//!
//! * the cascade: singletons are harmonic extensions of `f_l`; for `|S| >= 2`,
//!   `-Δ ∂^S u + ∂^S[V(x, u)] = 0` with zero boundary data, where
//!   `∂^S[V(x, u)]|_{ε=0} = Σ_π V_{|π|} Π_{B ∈ π} ∂^B u` over set partitions `π` of `S`;
//! * central mixed divided differences of the measured map over `2^m` sign patterns.
//!
//! Subsets of slots `0..m` are `u32` bitmasks.

use rayon::prelude::*;

use crate::dtn::{dtn_apply, DtnSample};
use crate::error::{Error, Result};
use crate::forward::{harmonic_extension, solve_linear_with, SolverOptions};
use crate::geometry::{BoundaryTrace, GammaMask, Grid2D, ScalarField};
use crate::potential::PotentialSeries;

/// Largest index set accepted by [`partitions`].
pub const MAX_PARTITION_SIZE: usize = 8;
/// Largest number of slots in the cascade.
pub const MAX_CASCADE_SLOTS: usize = 6;
/// Largest number of slots in divided differences.
pub const MAX_DIFFERENCE_SLOTS: usize = 4;

/// All set partitions of `elements`, in restricted-growth-string order.
///
/// `[1, 2]` yields `[[1, 2]]` then `[[1], [2]]`.
pub fn partitions(elements: &[usize]) -> Result<Vec<Vec<Vec<usize>>>> {
    let n = elements.len();
    if n == 0 || n > MAX_PARTITION_SIZE {
        return Err(Error::InvalidArgument(format!(
            "partitions need 1..={MAX_PARTITION_SIZE} elements, got {n}"
        )));
    }
    let mut out = Vec::new();
    let mut rgs = vec![0usize; n];
    restricted_growth(&mut rgs, 1, 0, &mut |rgs| {
        let blocks = rgs.iter().max().unwrap() + 1;
        let mut parts = vec![Vec::new(); blocks];
        for (e, &b) in elements.iter().zip(rgs) {
            parts[b].push(*e);
        }
        out.push(parts);
    });
    Ok(out)
}

fn restricted_growth(rgs: &mut [usize], pos: usize, max: usize, emit: &mut impl FnMut(&[usize])) {
    if pos == rgs.len() {
        emit(rgs);
        return;
    }
    for b in 0..=max + 1 {
        rgs[pos] = b;
        restricted_growth(rgs, pos + 1, max.max(b), emit);
    }
}

/// Set partitions of a bitmask subset, blocks as bitmasks.
pub fn mask_partitions(subset: u32) -> Result<Vec<Vec<u32>>> {
    let elements: Vec<usize> = (0..32).filter(|b| subset & (1 << b) != 0).collect();
    Ok(partitions(&elements)?
        .into_iter()
        .map(|p| {
            p.into_iter()
                .map(|block| block.iter().fold(0u32, |m, &e| m | (1 << e)))
                .collect()
        })
        .collect())
}

/// Partitions of `{0, .., s-1}` for every `s` in `1..=max_size`.
#[derive(Debug, Clone, PartialEq)]
pub struct PartitionTable {
    by_size: Vec<Vec<Vec<Vec<usize>>>>,
}

impl PartitionTable {
    pub fn new(max_size: usize) -> Result<Self> {
        let by_size = (1..=max_size)
            .map(|s| partitions(&(0..s).collect::<Vec<_>>()))
            .collect::<Result<_>>()?;
        Ok(Self { by_size })
    }

    pub fn get(&self, size: usize) -> Option<&[Vec<Vec<usize>>]> {
        size.checked_sub(1)
            .and_then(|i| self.by_size.get(i))
            .map(Vec::as_slice)
    }

    /// Partition counts for sizes `1..=max_size`.
    pub fn counts(&self) -> Vec<usize> {
        self.by_size.iter().map(Vec::len).collect()
    }
}

/// Mixed ε-derivatives of the solution at `ε = 0`, one field per subset.
#[derive(Debug, Clone, PartialEq)]
pub struct CascadeState {
    inputs: Vec<BoundaryTrace>,
    derivs: Vec<Option<ScalarField>>,
}

impl CascadeState {
    pub fn new(inputs: Vec<BoundaryTrace>) -> Self {
        let m = inputs.len();
        Self {
            inputs,
            derivs: vec![None; 1 << m],
        }
    }

    /// State with the harmonic singleton fields `v^(l)` already known.
    pub fn with_singletons(inputs: Vec<BoundaryTrace>, singletons: Vec<ScalarField>) -> Self {
        assert_eq!(inputs.len(), singletons.len());
        let mut state = Self::new(inputs);
        for (l, v) in singletons.into_iter().enumerate() {
            state.insert(1 << l, v);
        }
        state
    }

    pub fn slots(&self) -> usize {
        self.inputs.len()
    }

    pub fn inputs(&self) -> &[BoundaryTrace] {
        &self.inputs
    }

    /// Mask of all slots.
    pub fn full_subset(&self) -> u32 {
        (1u32 << self.slots()) - 1
    }

    pub fn get(&self, subset: u32) -> Option<&ScalarField> {
        self.derivs.get(subset as usize).and_then(Option::as_ref)
    }

    pub fn insert(&mut self, subset: u32, field: ScalarField) {
        self.derivs[subset as usize] = Some(field);
    }
}

/// `∂^S[V(x, u)]|_{ε=0}` summed over partitions with block count in `blocks`.
pub fn nonlinearity_derivative_blocks(
    p: &PotentialSeries,
    subset: u32,
    state: &CascadeState,
    blocks: std::ops::RangeInclusive<usize>,
) -> Result<ScalarField> {
    let grid = p.grid();
    let mut out = ScalarField::zeros(grid);
    for partition in mask_partitions(subset)? {
        let k = partition.len();
        if k < 2 || !blocks.contains(&k) {
            continue;
        }
        let Some(coeff) = p.coefficient_ref(k) else {
            continue;
        };
        let mut term = coeff.clone();
        for &b in &partition {
            let field = state.get(b).ok_or(Error::MissingDerivative(b))?;
            term = term.mul(field);
        }
        out.axpy(1.0, &term);
    }
    Ok(out)
}

/// `∂^S[V(x, u)]|_{ε=0} = Σ_{π, |π| >= 2} V_{|π|} Π_{B ∈ π} ∂^B u`; needs `|S| >= 2`.
pub fn nonlinearity_derivative(
    p: &PotentialSeries,
    subset: u32,
    state: &CascadeState,
) -> Result<ScalarField> {
    if subset.count_ones() < 2 {
        return Err(Error::InvalidArgument("nonlinearity derivative needs |S| >= 2".into()));
    }
    nonlinearity_derivative_blocks(p, subset, state, 2..=usize::MAX)
}

/// Solves the cascade for every nonempty subset of the inputs.
pub fn run_cascade(
    p: &PotentialSeries,
    inputs: &[BoundaryTrace],
    grid: &Grid2D,
    cg_tol: f64,
) -> Result<CascadeState> {
    run_cascade_upto(p, inputs, grid, inputs.len(), cg_tol)
}

/// Cascade restricted to subsets of size `<= max_size`.
pub fn run_cascade_upto(
    p: &PotentialSeries,
    inputs: &[BoundaryTrace],
    grid: &Grid2D,
    max_size: usize,
    cg_tol: f64,
) -> Result<CascadeState> {
    let m = inputs.len();
    if m == 0 || m > MAX_CASCADE_SLOTS {
        return Err(Error::InvalidArgument(format!(
            "cascade needs 1..={MAX_CASCADE_SLOTS} inputs, got {m}"
        )));
    }
    for f in inputs {
        f.check_grid(grid)?;
    }
    let singletons = inputs
        .par_iter()
        .map(|f| harmonic_extension(f, grid, cg_tol))
        .collect::<Result<Vec<_>>>()?;
    let mut state = CascadeState::with_singletons(inputs.to_vec(), singletons);
    extend_cascade(p, &mut state, max_size, grid, cg_tol)?;
    Ok(state)
}

/// Fills every missing subset of size `2..=max_size`, smallest first.
/// Singletons must already be present.
pub fn extend_cascade(
    p: &PotentialSeries,
    state: &mut CascadeState,
    max_size: usize,
    grid: &Grid2D,
    cg_tol: f64,
) -> Result<()> {
    let m = state.slots();
    let zero = ScalarField::zeros(grid);
    let zero_trace = BoundaryTrace::zeros(grid);
    for size in 2..=max_size.min(m) {
        let subsets: Vec<u32> = (1u32..(1 << m))
            .filter(|&s| s.count_ones() as usize == size && state.get(s).is_none())
            .collect();
        let fields: Vec<Result<ScalarField>> = subsets
            .par_iter()
            .map(|&s| {
                let source = nonlinearity_derivative(p, s, state)?.scale(-1.0);
                solve_linear_with(&zero, &source, &zero_trace, grid, cg_tol)
            })
            .collect();
        for (s, field) in subsets.into_iter().zip(fields) {
            state.insert(s, field?);
        }
    }
    Ok(())
}

/// A boundary measurement device: data `f` on the arc to a DtN sample.
pub trait Measurement: Sync {
    fn measure(&self, f: &BoundaryTrace) -> Result<DtnSample>;
}

impl<F> Measurement for F
where
    F: Fn(&BoundaryTrace) -> Result<DtnSample> + Sync,
{
    fn measure(&self, f: &BoundaryTrace) -> Result<DtnSample> {
        self(f)
    }
}

/// Simulated measurements from a known potential.
#[derive(Debug, Clone)]
pub struct SimulatedMeasurement {
    pub potential: PotentialSeries,
    pub mask: GammaMask,
    pub grid: Grid2D,
    pub opts: SolverOptions,
}

impl Measurement for SimulatedMeasurement {
    fn measure(&self, f: &BoundaryTrace) -> Result<DtnSample> {
        dtn_apply(&self.potential, f, &self.mask, &self.grid, &self.opts)
    }
}

/// Central mixed divided difference of an opaque measurement,
/// `Π_l (T_l^{+eps} - T_l^{-eps}) / (2 eps)` applied to `f ↦ Λ(f)`, masked to the arc.
pub fn measured_linearized_flux(
    measure: &dyn Measurement,
    inputs: &[BoundaryTrace],
    eps: f64,
    mask: &GammaMask,
    grid: &Grid2D,
) -> Result<BoundaryTrace> {
    let m = inputs.len();
    if m == 0 || m > MAX_DIFFERENCE_SLOTS {
        return Err(Error::InvalidArgument(format!(
            "divided differences need 1..={MAX_DIFFERENCE_SLOTS} inputs, got {m}"
        )));
    }
    if !(eps > 0.0) {
        return Err(Error::InvalidArgument(format!("eps must be positive, got {eps}")));
    }
    for f in inputs {
        f.check_grid(grid)?;
    }
    let patterns: Vec<u32> = (0..1u32 << m).collect();
    let outputs: Vec<Result<(f64, BoundaryTrace)>> = patterns
        .par_iter()
        .map(|&pattern| {
            // bit l set means ε_l = -eps
            let mut f = BoundaryTrace::zeros(grid);
            let mut sign = 1.0;
            for (l, fl) in inputs.iter().enumerate() {
                let s = if pattern & (1 << l) != 0 { -1.0 } else { 1.0 };
                sign *= s;
                f.axpy(s * eps, fl);
            }
            Ok((sign, measure.measure(&f)?.output))
        })
        .collect();
    let mut acc = BoundaryTrace::zeros(grid);
    for out in outputs {
        let (sign, trace) = out?;
        acc.axpy(sign, &trace);
    }
    let scale = (2.0 * eps).powi(m as i32);
    Ok(acc.scale(1.0 / scale).masked(mask))
}

/// [`measured_linearized_flux`] against the DtN map of a known potential.
pub fn mixed_divided_difference(
    p: &PotentialSeries,
    inputs: &[BoundaryTrace],
    eps: f64,
    mask: &GammaMask,
    grid: &Grid2D,
    opts: &SolverOptions,
) -> Result<BoundaryTrace> {
    let measure = SimulatedMeasurement {
        potential: p.clone(),
        mask: mask.clone(),
        grid: grid.clone(),
        opts: opts.clone(),
    };
    measured_linearized_flux(&measure, inputs, eps, mask, grid)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Set partitions by brute force: assign every element a label in `0..n`
    /// and keep canonical labelings (first occurrences increasing).
    fn brute_force_count(n: usize) -> usize {
        let total = n.pow(n as u32);
        (0..total)
            .filter(|&code| {
                let mut c = code;
                let mut labels = Vec::with_capacity(n);
                for _ in 0..n {
                    labels.push(c % n);
                    c /= n;
                }
                let mut next = 0;
                labels.iter().all(|&l| {
                    if l < next {
                        true
                    } else if l == next {
                        next += 1;
                        true
                    } else {
                        false
                    }
                })
            })
            .count()
    }

    #[test]
    fn small_partitions() {
        assert_eq!(partitions(&[1]).unwrap(), vec![vec![vec![1]]]);
        assert_eq!(
            partitions(&[1, 2]).unwrap(),
            vec![vec![vec![1, 2]], vec![vec![1], vec![2]]]
        );
        assert_eq!(partitions(&[0, 1, 2, 3]).unwrap().len(), brute_force_count(4));
        assert_eq!(brute_force_count(4), 15);
        assert!(partitions(&[]).is_err());
        assert!(partitions(&[0; 9]).is_err());
    }

    #[test]
    fn table_matches_bell_numbers() {
        let t = PartitionTable::new(6).unwrap();
        assert_eq!(t.counts(), vec![1, 2, 5, 15, 52, 203]);
        for n in 1..=6 {
            assert_eq!(t.get(n).unwrap().len(), brute_force_count(n));
        }
    }

    #[test]
    fn mask_partitions_cover_subset() {
        for parts in mask_partitions(0b1011).unwrap() {
            assert_eq!(parts.iter().fold(0, |m, b| m | b), 0b1011);
            assert_eq!(parts.iter().map(|b| b.count_ones()).sum::<u32>(), 3);
        }
    }
}
