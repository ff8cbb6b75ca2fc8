//! Eigenstates of the single-excitation Hamiltonian: classification into
//! bound states in/outside the band, reduction to atomic density matrices,
//! and fidelities.

pub mod density;
pub mod fidelity;

use std::f64::consts::PI;
use std::fmt;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

pub use density::{
    anti_bell_state, bell_state, excited_index, lowering_operator, single_excitation_vector,
    w_state, AtomicDensityMatrix, DensitySnapshot,
};
pub use fidelity::{pure_state_fidelity, uhlmann_fidelity};

use crate::error::{Error, Result};
use crate::model::{self, SingleExcitationState, SystemSpec};

const RESIDUAL_TOL: f64 = 1e-9;

/// One eigenpair of the single-excitation Hamiltonian.
#[derive(Debug, Clone)]
pub struct Eigenpair {
    pub energy: f64,
    pub state: SingleExcitationState,
}

/// Orthonormal eigenpairs of a real symmetric matrix, ascending in energy.
///
/// The first `n_atoms` components of each eigenvector are the atomic
/// amplitudes, the rest photonic.
pub fn eigendecompose(h: &DMatrix<f64>, n_atoms: usize) -> Result<Vec<Eigenpair>> {
    let n = h.nrows();
    if h.ncols() != n {
        return Err(Error::DimensionMismatch(n, h.ncols()));
    }
    let scale = h.camax().max(1.0);
    let asym = (h - h.transpose()).camax();
    if asym > 1e-12 * scale {
        return Err(Error::NotHermitian(asym));
    }
    let eig = h.clone().symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));

    let mut pairs = Vec::with_capacity(n);
    for k in order {
        let energy = eig.eigenvalues[k];
        let v = eig.eigenvectors.column(k);
        let residual = (h * v - v * energy).norm();
        if residual > RESIDUAL_TOL * scale {
            return Err(Error::EigenResidual(residual));
        }
        pairs.push(Eigenpair {
            energy,
            state: SingleExcitationState::from_real(v.as_slice(), n_atoms, Some(energy)),
        });
    }
    Ok(pairs)
}

/// Eigenpairs of the system Hamiltonian.
pub fn solve(spec: &SystemSpec) -> Result<Vec<Eigenpair>> {
    let h = model::build_single_excitation_hamiltonian(spec)?;
    eigendecompose(&h, spec.n_atoms())
}

/// Kind of a single-excitation eigenstate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum StateKind {
    Bic,
    BocAbove,
    BocBelow,
    Scattering,
}

impl fmt::Display for StateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StateKind::Bic => "BIC",
            StateKind::BocAbove => "BOC_above",
            StateKind::BocBelow => "BOC_below",
            StateKind::Scattering => "Scattering",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StateClass {
    pub kind: StateKind,
    /// Photonic weight outside the atomic region.
    pub localization_metric: f64,
    /// `E − ω_c`.
    pub band_position: f64,
    /// Set for eigenstates that live on an atom with `g = 0`.
    pub decoupled_atom: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassifyOptions {
    /// Sites added on each side of the leg span to form the atomic region.
    pub guard: usize,
    pub tol_loc: f64,
    /// Minimum distance outside the discrete band for a bound state.
    pub band_margin: f64,
    /// Eigenvalues closer than this are treated as one degenerate subspace.
    pub degeneracy_tol: f64,
}

impl Default for ClassifyOptions {
    fn default() -> Self {
        Self {
            guard: 2,
            tol_loc: 1e-4,
            band_margin: 1e-6,
            degeneracy_tol: 1e-8,
        }
    }
}

/// Thresholds separating the band from bound states.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BandEdges {
    /// Extreme eigenvalues of the bare lattice of this spec.
    pub lattice_min: f64,
    pub lattice_max: f64,
    /// States below/above these are bound outside the band.
    pub lower: f64,
    pub upper: f64,
}

impl BandEdges {
    /// Band thresholds for the lattice of `spec`.
    ///
    /// On a ring of `N` sites the discrete band edge sits `≈ ξ(π/N)²` inside
    /// the continuum edge, and band-edge lattice states get pushed by that
    /// order when atoms couple. A bound state therefore has to clear the
    /// discrete edge by `max(band_margin, ξ(π/N)²)`, and never sits inside
    /// `ω_c ± 2ξ`.
    pub fn for_spec(spec: &SystemSpec, band_margin: f64) -> Self {
        let wg = &spec.waveguide;
        let vals = wg.lattice_hamiltonian().symmetric_eigenvalues();
        let lattice_min = vals.min();
        let lattice_max = vals.max();
        let margin = band_margin.max(wg.xi * (PI / wg.n_sites as f64).powi(2));
        Self {
            lattice_min,
            lattice_max,
            lower: (lattice_min - margin).min(wg.omega_c - 2.0 * wg.xi),
            upper: (lattice_max + margin).max(wg.omega_c + 2.0 * wg.xi),
        }
    }

    pub fn contains(&self, energy: f64) -> bool {
        energy >= self.lower && energy <= self.upper
    }
}

/// Site interval `[min leg − guard, max leg + guard]` clamped to the lattice.
pub fn atomic_region(spec: &SystemSpec, guard: usize) -> (usize, usize) {
    let n = spec.waveguide.n_sites;
    match spec.leg_span() {
        Some((lo, hi)) => (lo.saturating_sub(guard), (hi + guard).min(n - 1)),
        None => (0, n - 1),
    }
}

/// Photonic weight outside the site interval `region`.
pub fn outside_weight(state: &SingleExcitationState, region: (usize, usize)) -> f64 {
    state
        .photonic_amps
        .iter()
        .enumerate()
        .filter(|(j, _)| *j < region.0 || *j > region.1)
        .map(|(_, c)| c.norm_sqr())
        .sum()
}

#[derive(Debug, Clone)]
pub struct Classification {
    pub classes: Vec<StateClass>,
    pub edges: BandEdges,
    pub region: (usize, usize),
    /// Raised when at least one atom has `g = 0`.
    pub decoupled_atoms: bool,
}

impl Classification {
    pub fn count(&self, kind: StateKind) -> usize {
        self.classes.iter().filter(|c| c.kind == kind).count()
    }

    pub fn indices(&self, kind: StateKind) -> Vec<usize> {
        (0..self.classes.len())
            .filter(|&k| self.classes[k].kind == kind)
            .collect()
    }
}

/// Rotate each in-band degenerate subspace onto the eigenbasis of the
/// outside-weight operator, most localized vector first.
fn localize_degenerate(pairs: &mut [Eigenpair], region: (usize, usize), edges: &BandEdges, tol: f64) {
    let mut start = 0;
    while start < pairs.len() {
        let mut end = start + 1;
        while end < pairs.len() && pairs[end].energy - pairs[end - 1].energy < tol {
            end += 1;
        }
        if end - start > 1 && edges.contains(pairs[start].energy) {
            rotate_subspace(&mut pairs[start..end], region);
        }
        start = end;
    }
}

fn rotate_subspace(group: &mut [Eigenpair], region: (usize, usize)) {
    let k = group.len();
    let outside: Vec<usize> = (0..group[0].state.photonic_amps.len())
        .filter(|j| *j < region.0 || *j > region.1)
        .collect();
    let q = DMatrix::from_fn(k, k, |a, b| {
        outside
            .iter()
            .map(|&j| group[a].state.photonic_amps[j].conj() * group[b].state.photonic_amps[j])
            .sum::<Complex64>()
    });
    let (_, u) = density::hermitian_eigen(&q);
    let vectors: Vec<DVector<Complex64>> = group
        .iter()
        .map(|p| DVector::from_vec(p.state.to_vector()))
        .collect();
    let m = group[0].state.atomic_amps.len();
    for (c, pair) in group.iter_mut().enumerate() {
        let mut v = DVector::from_element(vectors[0].len(), Complex64::new(0.0, 0.0));
        for (a, va) in vectors.iter().enumerate() {
            v += va * u[(a, c)];
        }
        pair.state = SingleExcitationState::from_vector(v.as_slice(), m, Some(pair.energy));
    }
}

/// Classify eigenstates as BIC, bound above/below the band, or scattering.
///
/// Degenerate in-band subspaces of `pairs` are rotated in place so that the
/// most localized combination is examined.
pub fn classify_states(
    pairs: &mut [Eigenpair],
    spec: &SystemSpec,
    opts: &ClassifyOptions,
) -> Classification {
    let edges = BandEdges::for_spec(spec, opts.band_margin);
    let region = atomic_region(spec, opts.guard);
    localize_degenerate(pairs, region, &edges, opts.degeneracy_tol);

    let decoupled: Vec<bool> = spec.atoms.iter().map(|a| a.g == 0.0).collect();
    let decoupled_atoms = decoupled.iter().any(|&d| d);
    let omega_c = spec.waveguide.omega_c;

    let classes = pairs
        .iter()
        .map(|p| {
            let loc = outside_weight(&p.state, region);
            let dead_weight: f64 = p
                .state
                .atomic_amps
                .iter()
                .zip(&decoupled)
                .filter(|(_, &d)| d)
                .map(|(c, _)| c.norm_sqr())
                .sum();
            let decoupled_atom = dead_weight > 0.5;
            let kind = if decoupled_atom {
                StateKind::Scattering
            } else if p.energy > edges.upper {
                StateKind::BocAbove
            } else if p.energy < edges.lower {
                StateKind::BocBelow
            } else if loc < opts.tol_loc && p.state.atomic_weight() > opts.tol_loc {
                StateKind::Bic
            } else {
                StateKind::Scattering
            };
            StateClass {
                kind,
                localization_metric: loc,
                band_position: p.energy - omega_c,
                decoupled_atom,
            }
        })
        .collect();
    Classification {
        classes,
        edges,
        region,
        decoupled_atoms,
    }
}

/// Partial trace over the lattice:
/// `ρ = |ψ_a⟩⟨ψ_a| + (Σ_j |f_j|²) |G⟩⟨G|` with `|ψ_a⟩ = Σ_i c_i |i excited⟩`.
pub fn reduced_atomic_density(state: &SingleExcitationState, n_atoms: usize) -> Result<AtomicDensityMatrix> {
    check_state(state, n_atoms)?;
    let psi = single_excitation_vector(&state.atomic_amps);
    let mut m = &psi * psi.adjoint();
    m[(0, 0)] += Complex64::new(state.photonic_weight(), 0.0);
    AtomicDensityMatrix::new_unchecked(n_atoms, m)
}

/// Atomic state conditioned on the lattice being in vacuum: the atomic
/// amplitudes renormalized to a pure state.
pub fn conditioned_atomic_density(
    state: &SingleExcitationState,
    n_atoms: usize,
) -> Result<AtomicDensityMatrix> {
    check_state(state, n_atoms)?;
    let w = state.atomic_weight();
    if w < 1e-14 {
        return Err(Error::NoAtomicWeight);
    }
    let scale = Complex64::new(1.0 / w.sqrt(), 0.0);
    let amps: Vec<Complex64> = state.atomic_amps.iter().map(|&c| c * scale).collect();
    AtomicDensityMatrix::pure(n_atoms, &single_excitation_vector(&amps))
}

fn check_state(state: &SingleExcitationState, n_atoms: usize) -> Result<()> {
    if state.atomic_amps.len() != n_atoms {
        return Err(Error::DimensionMismatch(state.atomic_amps.len(), n_atoms));
    }
    let norm = state.norm_sqr();
    if (norm - 1.0).abs() > 1e-8 {
        return Err(Error::Unnormalized(norm));
    }
    Ok(())
}

/// Target entangled state for `M` atoms: Bell for two, W for three.
pub fn entangled_target(n_atoms: usize) -> Option<DVector<Complex64>> {
    match n_atoms {
        2 => Some(bell_state()),
        3 => Some(w_state()),
        _ => None,
    }
}

/// Summary of the bound state in the continuum of one spec.
#[derive(Debug, Clone, Serialize)]
pub struct BicReport {
    pub n_bic: usize,
    pub n_boc_above: usize,
    pub n_boc_below: usize,
    pub energy: f64,
    pub localization_metric: f64,
    pub atomic_weight: f64,
    pub photonic_weight: f64,
    /// Fidelity of the vacuum-conditioned atomic state with the target.
    pub fidelity: f64,
    /// Fidelity of the full partial trace with the target.
    pub fidelity_partial_trace: f64,
}

/// Solve, classify, and report the BIC (the most localized one if several).
pub fn bic_report(spec: &SystemSpec, opts: &ClassifyOptions) -> Result<Option<BicReport>> {
    let m = spec.n_atoms();
    let target = entangled_target(m).ok_or_else(|| Error::WrongConfiguration {
        name: format!("{m} atoms"),
        reason: "BIC fidelity needs two or three atoms".into(),
    })?;
    let mut pairs = solve(spec)?;
    let class = classify_states(&mut pairs, spec, opts);
    let Some(best) = class
        .indices(StateKind::Bic)
        .into_iter()
        .min_by(|&a, &b| class.classes[a].localization_metric.total_cmp(&class.classes[b].localization_metric))
    else {
        return Ok(None);
    };
    let state = &pairs[best].state;
    let cond = conditioned_atomic_density(state, m)?;
    let full = reduced_atomic_density(state, m)?;
    Ok(Some(BicReport {
        n_bic: class.count(StateKind::Bic),
        n_boc_above: class.count(StateKind::BocAbove),
        n_boc_below: class.count(StateKind::BocBelow),
        energy: pairs[best].energy,
        localization_metric: class.classes[best].localization_metric,
        atomic_weight: state.atomic_weight(),
        photonic_weight: state.photonic_weight(),
        fidelity: pure_state_fidelity(&cond, &target),
        fidelity_partial_trace: pure_state_fidelity(&full, &target),
    }))
}

/// One row of a spectrum sweep.
#[derive(Debug, Clone)]
pub struct SweepRow {
    pub g: f64,
    pub energies: Vec<f64>,
    pub classes: Vec<StateClass>,
}

/// Eigenvalues and classes for each coupling strength in `g_values`.
pub fn spectrum_sweep(
    template: &SystemSpec,
    g_values: &[f64],
    opts: &ClassifyOptions,
) -> Result<Vec<SweepRow>> {
    if let Some(&g) = g_values.iter().find(|&&g| !(g >= 0.0)) {
        return Err(Error::Config(format!("coupling strength {g} must be nonnegative")));
    }
    g_values
        .par_iter()
        .map(|&g| {
            let spec = template.with_coupling(g);
            let mut pairs = solve(&spec)?;
            let class = classify_states(&mut pairs, &spec, opts);
            Ok(SweepRow {
                g,
                energies: pairs.iter().map(|p| p.energy).collect(),
                classes: class.classes,
            })
        })
        .collect()
}
