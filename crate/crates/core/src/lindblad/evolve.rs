use std::cell::Cell;
use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use super::generator::LindbladGenerator;
use super::integrate::{Dopri5, IntegratorOptions};
use crate::error::{Error, Result};
use crate::spectral::{pure_state_fidelity, AtomicDensityMatrix};

/// Maximum tolerated `|Tr ρ − 1|` during integration.
pub const TRACE_DRIFT_TOL: f64 = 1e-7;

pub const EXCITATION: &str = "excitation";
pub const TRACE: &str = "trace";

/// Observable name for the fidelity against a named target.
pub fn fidelity_key(target: &str) -> String {
    format!("fidelity:{target}")
}

/// A named pure target state.
#[derive(Debug, Clone)]
pub struct Target {
    pub name: String,
    pub state: DVector<Complex64>,
}

impl Target {
    pub fn new(name: impl Into<String>, state: DVector<Complex64>) -> Self {
        Self {
            name: name.into(),
            state,
        }
    }
}

/// Sampled density matrices plus named real observables on a time grid.
#[derive(Debug, Clone, Default)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<AtomicDensityMatrix>,
    pub observables: BTreeMap<String, Vec<f64>>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn observable(&self, name: &str) -> Option<&[f64]> {
        self.observables.get(name).map(Vec::as_slice)
    }

    pub fn fidelity(&self, target: &str) -> Option<&[f64]> {
        self.observable(&fidelity_key(target))
    }

    pub fn push_observable(&mut self, name: &str, value: f64) {
        self.observables.entry(name.to_string()).or_default().push(value);
    }

    /// Worst `(Hermiticity residual, |trace − 1|, −min eigenvalue)` over all states.
    pub fn invariant_violation(&self) -> (f64, f64, f64) {
        self.states.iter().fold((0.0f64, 0.0f64, 0.0f64), |(h, t, n), s| {
            (
                h.max(s.hermiticity_residual()),
                t.max((s.trace() - 1.0).abs()),
                n.max(-s.min_eigenvalue()),
            )
        })
    }

    /// Append another trajectory whose first time equals this one's last.
    pub fn append(&mut self, other: Trajectory) {
        let skip = usize::from(
            matches!((self.times.last(), other.times.first()), (Some(a), Some(b)) if a == b),
        );
        self.times.extend(other.times.iter().skip(skip));
        self.states.extend(other.states.into_iter().skip(skip));
        for (k, v) in other.observables {
            self.observables.entry(k).or_default().extend(v.into_iter().skip(skip));
        }
    }
}

fn check_grid(t_start: f64, grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::InvalidGrid("empty time grid".into()));
    }
    if grid[0] < t_start {
        return Err(Error::InvalidGrid(format!(
            "grid starts at {} before the initial time {t_start}",
            grid[0]
        )));
    }
    if grid.iter().any(|t| !t.is_finite()) || grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidGrid("times must be finite and strictly increasing".into()));
    }
    Ok(())
}

/// Integrate the master equation from `ρ(0) = rho0` and sample on `t_grid`.
pub fn evolve(
    rho0: &AtomicDensityMatrix,
    generator: &LindbladGenerator,
    t_grid: &[f64],
    targets: &[Target],
    opts: &IntegratorOptions,
) -> Result<Trajectory> {
    evolve_from(rho0, 0.0, generator, t_grid, targets, opts)
}

/// Same as [`evolve`] with the initial state given at `t_start`.
///
/// Integration is split exactly at the drive switch-off so no step straddles
/// the discontinuity.
pub fn evolve_from(
    rho0: &AtomicDensityMatrix,
    t_start: f64,
    generator: &LindbladGenerator,
    t_grid: &[f64],
    targets: &[Target],
    opts: &IntegratorOptions,
) -> Result<Trajectory> {
    check_grid(t_start, t_grid)?;
    if rho0.n_atoms() != generator.n_atoms() {
        return Err(Error::DimensionMismatch(rho0.n_atoms(), generator.n_atoms()));
    }
    rho0.validate()?;
    for target in targets {
        if target.state.len() != generator.dim() {
            return Err(Error::DimensionMismatch(target.state.len(), generator.dim()));
        }
    }

    let d = generator.dim();
    let m = generator.n_atoms();
    let switch = generator.switch_time();
    let drive_on = Cell::new(generator.drive().is_some() && t_start < switch);
    let mut solver = Dopri5::new(
        |_t, y: &DVector<Complex64>, out: &mut DVector<Complex64>| {
            generator.apply(drive_on.get(), y.as_slice(), out.as_mut_slice())
        },
        d * d,
        *opts,
    );

    let mut y = DVector::from_column_slice(rho0.matrix().as_slice());
    let mut t = t_start;
    let mut traj = Trajectory::default();
    for &t_out in t_grid {
        if drive_on.get() && t_out > switch {
            solver.advance(&mut t, &mut y, switch)?;
            drive_on.set(false);
            solver.invalidate();
        }
        solver.advance(&mut t, &mut y, t_out)?;

        let mat = DMatrix::from_column_slice(d, d, y.as_slice());
        let rho = AtomicDensityMatrix::new_unchecked(m, mat)?;
        let trace = rho.trace();
        if (trace - 1.0).abs() > TRACE_DRIFT_TOL {
            return Err(Error::TraceDrift {
                t: t_out,
                drift: trace - 1.0,
            });
        }
        traj.times.push(t_out);
        traj.push_observable(TRACE, trace);
        traj.push_observable(EXCITATION, rho.excitation_number());
        for target in targets {
            traj.push_observable(&fidelity_key(&target.name), pure_state_fidelity(&rho, &target.state));
        }
        traj.states.push(rho);
    }
    Ok(traj)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lindblad::generator::{lindblad_generator, DriveSpec};
    use crate::lindblad::kernel::{coupling_matrix, CouplingKernel};
    use crate::model::GiantAtomSpec;
    use crate::spectral::{bell_state, single_excitation_vector};

    fn braided_kernel() -> CouplingKernel {
        coupling_matrix(
            &[
                GiantAtomSpec::new(0.0, vec![0, 8], 0.5),
                GiantAtomSpec::new(0.0, vec![2, 10], 0.5),
            ],
            0.0,
            1.0,
        )
        .unwrap()
    }

    fn grid(t_end: f64, n: usize) -> Vec<f64> {
        (0..=n).map(|k| t_end * k as f64 / n as f64).collect()
    }

    #[test]
    fn single_atom_decay_matches_exponential() {
        let k = coupling_matrix(&[GiantAtomSpec::new(0.0, vec![3], 0.4)], 0.0, 1.0).unwrap();
        let gen = lindblad_generator(&k, None, 0.0, 0.0).unwrap();
        let excited = single_excitation_vector(&[Complex64::new(1.0, 0.0)]);
        let rho0 = AtomicDensityMatrix::pure(1, &excited).unwrap();
        let traj = evolve(&rho0, &gen, &grid(20.0, 40), &[], &IntegratorOptions::default()).unwrap();
        let rate = 0.16; // g²/ξ
        for (t, p) in traj.times.iter().zip(traj.observable(EXCITATION).unwrap()) {
            assert!((p - (-rate * t).exp()).abs() < 1e-9);
        }
    }

    #[test]
    fn bell_state_is_protected() {
        let gen = lindblad_generator(&braided_kernel(), None, 0.0, 0.0).unwrap();
        let rho0 = AtomicDensityMatrix::pure(2, &bell_state()).unwrap();
        let traj = evolve(
            &rho0,
            &gen,
            &grid(200.0, 20),
            &[Target::new("bell", bell_state())],
            &IntegratorOptions::default(),
        )
        .unwrap();
        assert!(traj.fidelity("bell").unwrap().iter().all(|f| (f - 1.0).abs() < 1e-12));
    }

    #[test]
    fn half_of_a_local_excitation_survives() {
        let gen = lindblad_generator(&braided_kernel(), None, 0.0, 0.0).unwrap();
        let eg = single_excitation_vector(&[Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)]);
        let rho0 = AtomicDensityMatrix::pure(2, &eg).unwrap();
        let traj = evolve(
            &rho0,
            &gen,
            &grid(100.0, 10),
            &[Target::new("bell", bell_state())],
            &IntegratorOptions::default(),
        )
        .unwrap();
        let f = *traj.fidelity("bell").unwrap().last().unwrap();
        assert!((f - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-8, "{f}");
        let (h, tr, neg) = traj.invariant_violation();
        assert!(h < 1e-12 && tr < 1e-9 && neg < 1e-8);
        let n = traj.observable(EXCITATION).unwrap();
        assert!(n.windows(2).all(|w| w[1] <= w[0] + 1e-9));
    }

    #[test]
    fn split_at_switch_off_matches_two_runs() {
        let k = braided_kernel();
        let drive = DriveSpec::continuous(0, 0.05, 0.0);
        let on = lindblad_generator(&k, Some(drive), 0.0, 0.0).unwrap();
        let off = lindblad_generator(&k, None, 0.0, 0.0).unwrap();
        let switched = on.with_switch_off(Some(12.5));
        let opts = IntegratorOptions::default();
        let rho0 = AtomicDensityMatrix::ground(2);
        let full = evolve(&rho0, &switched, &[10.0, 20.0], &[], &opts).unwrap();
        let first = evolve(&rho0, &on, &[12.5], &[], &opts).unwrap();
        let second = evolve_from(&first.states[0], 12.5, &off, &[20.0], &[], &opts).unwrap();
        let diff = (full.states[1].matrix() - second.states[0].matrix()).camax();
        assert!(diff < 1e-9, "{diff}");
    }

    #[test]
    fn rejects_bad_grid() {
        let gen = lindblad_generator(&braided_kernel(), None, 0.0, 0.0).unwrap();
        let rho0 = AtomicDensityMatrix::ground(2);
        let opts = IntegratorOptions::default();
        assert!(evolve(&rho0, &gen, &[], &[], &opts).is_err());
        assert!(evolve(&rho0, &gen, &[1.0, 1.0], &[], &opts).is_err());
        assert!(evolve(&rho0, &gen, &[-1.0, 1.0], &[], &opts).is_err());
    }

    #[test]
    fn append_drops_duplicate_time() {
        let gen = lindblad_generator(&braided_kernel(), None, 0.0, 0.0).unwrap();
        let rho0 = AtomicDensityMatrix::ground(2);
        let opts = IntegratorOptions::default();
        let mut a = evolve(&rho0, &gen, &[0.0, 1.0], &[], &opts).unwrap();
        let b = evolve_from(&a.states[1].clone(), 1.0, &gen, &[1.0, 2.0], &[], &opts).unwrap();
        a.append(b);
        assert_eq!(a.times, vec![0.0, 1.0, 2.0]);
        assert_eq!(a.observable(TRACE).unwrap().len(), 3);
    }
}
