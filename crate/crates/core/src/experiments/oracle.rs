//! Exact single-excitation dynamics used to check the Markovian kernel.

use nalgebra::DVector;
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::lindblad::{
    coupling_matrix, evolve, lindblad_generator, Dopri5, IntegratorOptions, Target, Trajectory, EXCITATION,
};
use crate::model::{assemble, GiantAtomSpec, SingleExcitationState, SystemSpec, WaveguideSpec};
use crate::spectral::{pure_state_fidelity, reduced_atomic_density, single_excitation_vector, AtomicDensityMatrix};

/// Maximum tolerated drift of the wavefunction norm.
pub const NORM_TOL: f64 = 1e-9;
/// Extra sites beyond the light cone, for the tail of the wavefront.
pub const FRONT_MARGIN: usize = 32;
pub const NORM: &str = "norm";

pub fn population_key(atom: usize) -> String {
    format!("population:{atom}")
}

/// Smallest ring on which nothing emitted before `t_end` returns to the atoms.
pub fn required_sites(extent: usize, xi: f64, t_end: f64) -> usize {
    (4.0 * xi.abs() * t_end).ceil() as usize + extent + 1 + FRONT_MARGIN
}

#[derive(Debug, Clone)]
pub struct ExactDynamics {
    /// Partial-trace atomic states plus populations and norm.
    pub trajectory: Trajectory,
    /// Atomic amplitudes `c_i(t)`.
    pub amplitudes: Vec<Vec<Complex64>>,
    pub n_sites: usize,
    /// Largest `|‖ψ(t)‖² − 1|` on the grid.
    pub norm_drift: f64,
}

fn integrator_opts() -> IntegratorOptions {
    IntegratorOptions {
        rtol: 1e-13,
        atol: 1e-15,
        max_step: 1.0,
        ..IntegratorOptions::default()
    }
}

/// Evolve `Σ_i c_i σ_i⁺|G,vac⟩` under the full lattice Hamiltonian, in the
/// frame rotating at `ω_c`.
///
/// The atoms are recentered on a clean ring sized so that no wavefront wraps
/// around before the last grid time; `n_sites_override` fixes the size.
pub fn oracle_exact_dynamics(
    spec: &SystemSpec,
    initial: &[Complex64],
    t_grid: &[f64],
    targets: &[Target],
    n_sites_override: Option<usize>,
) -> Result<ExactDynamics> {
    let m = spec.n_atoms();
    if initial.len() != m {
        return Err(Error::DimensionMismatch(initial.len(), m));
    }
    let norm: f64 = initial.iter().map(|c| c.norm_sqr()).sum();
    if (norm - 1.0).abs() > 1e-12 {
        return Err(Error::Unnormalized(norm));
    }
    if !spec.waveguide.is_clean() {
        return Err(Error::Config("the exact oracle needs a clean waveguide".into()));
    }
    let Some(&t_end) = t_grid.last() else {
        return Err(Error::InvalidGrid("empty time grid".into()));
    };
    if t_grid[0] < 0.0 || t_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidGrid("times must be nonnegative and strictly increasing".into()));
    }

    let (lo, hi) = spec.leg_span().unwrap_or((0, 0));
    let extent = hi - lo;
    let wg = &spec.waveguide;
    let required = required_sites(extent, wg.xi, t_end);
    let n_sites = match n_sites_override {
        Some(n) if n < required => return Err(Error::RingTooSmall { required, got: n }),
        Some(n) => n,
        None => required,
    };
    let origin = (n_sites - 1 - extent) / 2;
    let shift = origin as isize - lo as isize;
    let ring = SystemSpec::new(
        WaveguideSpec::clean(n_sites, wg.omega_c, wg.xi, crate::model::Boundary::Ring),
        spec.atoms.iter().map(|a| a.shifted(shift)).collect(),
    );

    // Sparse real Hamiltonian minus ω_c.
    let h = assemble(&ring);
    let dim = ring.dim();
    let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); dim];
    for i in 0..dim {
        for j in 0..dim {
            let v = if i == j { h[(i, j)] - wg.omega_c } else { h[(i, j)] };
            if v != 0.0 {
                rows[i].push((j, v));
            }
        }
    }
    let mut solver = Dopri5::new(
        |_t, y: &DVector<Complex64>, out: &mut DVector<Complex64>| {
            for (i, row) in rows.iter().enumerate() {
                let mut acc = Complex64::new(0.0, 0.0);
                for &(j, v) in row {
                    acc += y[j] * v;
                }
                // −iH ψ
                out[i] = Complex64::new(acc.im, -acc.re);
            }
        },
        dim,
        integrator_opts(),
    );

    let mut y = DVector::from_element(dim, Complex64::new(0.0, 0.0));
    for (i, &c) in initial.iter().enumerate() {
        y[i] = c;
    }
    let mut t = 0.0;
    let mut out = ExactDynamics {
        trajectory: Trajectory::default(),
        amplitudes: Vec::with_capacity(t_grid.len()),
        n_sites,
        norm_drift: 0.0,
    };
    for &t_out in t_grid {
        solver.advance(&mut t, &mut y, t_out)?;
        let state = SingleExcitationState::from_vector(y.as_slice(), m, None);
        let n2 = state.norm_sqr();
        let drift = (n2 - 1.0).abs();
        if drift > NORM_TOL {
            return Err(Error::TraceDrift { t: t_out, drift: n2 - 1.0 });
        }
        out.norm_drift = out.norm_drift.max(drift);
        let rho = reduced_atomic_density(&state, m)?;
        let tr = &mut out.trajectory;
        tr.times.push(t_out);
        tr.push_observable(NORM, n2);
        tr.push_observable(EXCITATION, state.atomic_weight());
        for (i, c) in state.atomic_amps.iter().enumerate() {
            tr.push_observable(&population_key(i), c.norm_sqr());
        }
        for target in targets {
            tr.push_observable(
                &crate::lindblad::fidelity_key(&target.name),
                pure_state_fidelity(&rho, &target.state),
            );
        }
        tr.states.push(rho);
        out.amplitudes.push(state.atomic_amps);
    }
    Ok(out)
}

#[derive(Debug, Clone, Serialize)]
pub struct CalibrationReport {
    pub g: f64,
    pub legs: Vec<usize>,
    pub t_end: f64,
    pub n_sites: usize,
    /// `max_t |P_exact(t) − P_master(t)|`.
    pub max_abs_diff: f64,
    /// Decay rate from a log-linear fit of the exact population.
    pub fitted_rate: f64,
    /// `2Γ` of the Markovian kernel.
    pub markov_rate: f64,
    pub fitted_prefactor: f64,
    /// `g²/(2ξ)`.
    pub expected_prefactor: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct CalibrationSample {
    pub t: f64,
    pub exact: f64,
    pub master: f64,
}

/// Least-squares slope of `ln y` against `t`, through all points with `y > 0`.
pub fn log_linear_rate(t: &[f64], y: &[f64]) -> f64 {
    let pts: Vec<(f64, f64)> = t.iter().zip(y).filter(|(_, &v)| v > 0.0).map(|(&a, &b)| (a, b.ln())).collect();
    let n = pts.len() as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mt).powi(2)).sum();
    -sxy / sxx
}

/// Compare exact and Markovian decay of one excited resonant atom with the
/// given legs and fit the kernel prefactor from the exact curve.
pub fn calibrate(
    legs: &[usize],
    g: f64,
    t_end: f64,
    dt: f64,
) -> Result<(CalibrationReport, Vec<CalibrationSample>)> {
    if !(dt > 0.0) || !(t_end > dt) {
        return Err(Error::InvalidGrid(format!("bad calibration grid t_end={t_end} dt={dt}")));
    }
    let lo = *legs.iter().min().ok_or_else(|| Error::Config("atom needs at least one leg".into()))?;
    let atom = GiantAtomSpec::new(0.0, legs.iter().map(|p| p - lo).collect(), g);
    let extent = atom.legs.iter().copied().max().unwrap_or(0);
    let spec = SystemSpec::new(WaveguideSpec::ring(extent + 1), vec![atom.clone()]);
    let n = (t_end / dt).round() as usize;
    let grid: Vec<f64> = (0..=n).map(|k| k as f64 * t_end / n as f64).collect();

    let exact = oracle_exact_dynamics(&spec, &[Complex64::new(1.0, 0.0)], &grid, &[], None)?;
    let p_exact = exact.trajectory.observable(EXCITATION).expect("recorded").to_vec();

    let kernel = coupling_matrix(std::slice::from_ref(&atom), 0.0, 1.0)?;
    let gen = lindblad_generator(&kernel, None, 0.0, 0.0)?;
    let excited = single_excitation_vector(&[Complex64::new(1.0, 0.0)]);
    let rho0 = AtomicDensityMatrix::pure(1, &excited)?;
    let master = evolve(&rho0, &gen, &grid, &[], &IntegratorOptions::default())?;
    let p_master = master.observable(EXCITATION).expect("recorded").to_vec();

    let max_abs_diff = p_exact
        .iter()
        .zip(&p_master)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let fitted_rate = log_linear_rate(&grid, &p_exact);
    let phase = crate::lindblad::phase_sum(&atom.legs, &atom.legs).re;
    let fitted_prefactor = fitted_rate / (2.0 * phase);
    let expected_prefactor = g * g / 2.0;
    let samples = grid
        .iter()
        .zip(p_exact.iter().zip(&p_master))
        .map(|(&t, (&e, &m))| CalibrationSample { t, exact: e, master: m })
        .collect();
    Ok((
        CalibrationReport {
            g,
            legs: atom.legs,
            t_end,
            n_sites: exact.n_sites,
            max_abs_diff,
            fitted_rate,
            markov_rate: 2.0 * kernel.gamma[0][0],
            fitted_prefactor,
            expected_prefactor,
            ratio: fitted_prefactor / expected_prefactor,
        },
        samples,
    ))
}
