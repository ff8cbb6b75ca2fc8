//! Drive-then-release protocols for Bell and W state generation.

use nalgebra::DVector;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::configs::NamedConfiguration;
use crate::error::{Error, Result};
use crate::lindblad::{
    evolve, evolve_from, lindblad_generator, CouplingKernel, DriveSpec, IntegratorOptions,
    LindbladGenerator, Target, Trajectory,
};
use crate::spectral::{bell_state, pure_state_fidelity, w_state, AtomicDensityMatrix};

pub const DEFAULT_T_END: f64 = 2000.0;
/// Coarse scan step of the optimal-duration search.
pub const SCAN_STEP: f64 = 1.0;
/// Half-width of the final bracket of the golden-section refinement.
pub const REFINE_TOL: f64 = 1e-3;

/// When to switch the drive off.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReleaseTime {
    /// At the first fidelity maximum under continuous drive.
    Auto,
    Fixed(f64),
    /// Never.
    Continuous,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProtocolOptions {
    pub eta: f64,
    pub release: ReleaseTime,
    pub t_end: f64,
    /// Sampling interval of the returned trajectory.
    pub dt: f64,
    pub target_atom: usize,
    pub coupling: f64,
    /// Search window for [`ReleaseTime::Auto`]; `None` uses `10/η`.
    pub search_window: Option<f64>,
    pub integrator: IntegratorOptions,
}

impl ProtocolOptions {
    pub fn new(eta: f64, release: ReleaseTime) -> Self {
        Self {
            eta,
            release,
            t_end: DEFAULT_T_END,
            dt: 1.0,
            target_atom: 0,
            coupling: super::configs::DEFAULT_G,
            search_window: None,
            integrator: IntegratorOptions::default(),
        }
    }

    pub fn window(&self) -> f64 {
        self.search_window.unwrap_or(10.0 / self.eta)
    }

    fn validate(&self) -> Result<()> {
        if !(self.eta > 0.0) || !self.eta.is_finite() {
            return Err(Error::Config(format!("drive strength {} must be positive", self.eta)));
        }
        if !(self.t_end > 0.0) || !(self.dt > 0.0) || !self.t_end.is_finite() {
            return Err(Error::InvalidGrid(format!("bad horizon t_end={} dt={}", self.t_end, self.dt)));
        }
        if let ReleaseTime::Fixed(t0) = self.release {
            if !(0.0..=self.t_end).contains(&t0) {
                return Err(Error::InvalidGrid(format!("release time {t0} outside [0, {}]", self.t_end)));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ProtocolMetadata {
    pub configuration: String,
    pub target: String,
    pub eta: f64,
    pub release: ReleaseTime,
    pub t_end: f64,
    pub dt: f64,
    pub target_atom: usize,
    pub coupling: f64,
}

#[derive(Debug, Clone)]
pub struct ProtocolResult {
    pub trajectory: Trajectory,
    /// Drive switch-off time, `None` for continuous drive.
    pub t_drive: Option<f64>,
    /// Time of the first fidelity maximum under drive.
    pub t_max: f64,
    pub f_max: f64,
    pub f_final: f64,
    pub metadata: ProtocolMetadata,
}

impl ProtocolResult {
    pub fn fidelity(&self) -> &[f64] {
        self.trajectory
            .fidelity(&self.metadata.target)
            .expect("protocol trajectories carry their target fidelity")
    }
}

/// First local maximum of the driven fidelity.
#[derive(Debug, Clone)]
pub struct OptimalDuration {
    pub t_max: f64,
    pub f_max: f64,
    pub state: AtomicDensityMatrix,
    /// Coarse scan used to bracket the maximum.
    pub scan_times: Vec<f64>,
    pub scan_fidelity: Vec<f64>,
}

fn uniform_grid(t_end: f64, dt: f64) -> Vec<f64> {
    let n = (t_end / dt).round() as usize;
    let mut grid: Vec<f64> = (0..=n).map(|k| k as f64 * dt).filter(|&t| t < t_end).collect();
    grid.push(t_end);
    grid
}

/// Index of the first strict rise followed by a non-rise.
fn first_local_max(f: &[f64]) -> Option<usize> {
    (1..f.len().saturating_sub(1)).find(|&k| f[k] > f[k - 1] && f[k] >= f[k + 1])
}

fn driven_generator(kernel: &CouplingKernel, opts: &ProtocolOptions) -> Result<LindbladGenerator> {
    let drive = DriveSpec::continuous(opts.target_atom, opts.eta, 0.0);
    lindblad_generator(kernel, Some(drive), 0.0, 0.0)
}

/// Locate the first maximum of `F(t) = F(ρ(t), target)` under continuous
/// drive from the ground state: coarse scan with step [`SCAN_STEP`], then
/// golden-section refinement restarted from the nearest scanned state.
pub fn find_optimal_duration(
    kernel: &CouplingKernel,
    target: &DVector<Complex64>,
    opts: &ProtocolOptions,
) -> Result<OptimalDuration> {
    opts.validate()?;
    let window = opts.window();
    let gen = driven_generator(kernel, opts)?;
    let m = kernel.n_atoms();
    let grid = uniform_grid(window, SCAN_STEP);
    let tgt = [Target::new("target", target.clone())];
    let scan = evolve(&AtomicDensityMatrix::ground(m), &gen, &grid, &tgt, &opts.integrator)?;
    let f = scan.fidelity("target").expect("target requested").to_vec();
    let Some(k) = first_local_max(&f) else {
        return Err(Error::NoLocalMaximum {
            window,
            times: scan.times,
            fidelity: f,
        });
    };

    let (t_lo, start) = (scan.times[k - 1], &scan.states[k - 1]);
    let eval = |t: f64| -> Result<(f64, AtomicDensityMatrix)> {
        let tr = evolve_from(start, t_lo, &gen, &[t], &[], &opts.integrator)?;
        let rho = tr.states.into_iter().next().expect("one sample");
        Ok((pure_state_fidelity(&rho, target), rho))
    };

    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (t_lo, scan.times[k + 1]);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = eval(c)?;
    let mut fd = eval(d)?;
    while b - a > 2.0 * REFINE_TOL {
        if fc.0 >= fd.0 {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = eval(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = eval(d)?;
        }
    }
    let (t_best, (f_best, rho_best)) = if fc.0 >= fd.0 { (c, fc) } else { (d, fd) };
    // The refined point can only improve on the scanned maximum.
    let (t_max, f_max, state) = if f_best >= f[k] {
        (t_best, f_best, rho_best)
    } else {
        (scan.times[k], f[k], scan.states[k].clone())
    };
    Ok(OptimalDuration {
        t_max,
        f_max,
        state,
        scan_times: scan.times,
        scan_fidelity: f,
    })
}

/// Drive target atom from `|g…g⟩`, release at the chosen time, evolve to
/// `t_end` and track the fidelity with `target`.
pub fn run_protocol(
    name: &str,
    kernel: &CouplingKernel,
    target_name: &str,
    target: &DVector<Complex64>,
    opts: &ProtocolOptions,
) -> Result<ProtocolResult> {
    opts.validate()?;
    let m = kernel.n_atoms();
    let gen = driven_generator(kernel, opts)?;
    let mut grid = uniform_grid(opts.t_end, opts.dt);

    let (t_drive, peak) = match opts.release {
        ReleaseTime::Auto => {
            let best = find_optimal_duration(kernel, target, opts)?;
            (Some(best.t_max), Some((best.t_max, best.f_max)))
        }
        ReleaseTime::Fixed(t0) => (Some(t0), None),
        ReleaseTime::Continuous => (None, None),
    };
    if let Some(t0) = t_drive {
        if t0 > opts.t_end {
            return Err(Error::InvalidGrid(format!(
                "optimal release time {t0} exceeds t_end {}",
                opts.t_end
            )));
        }
        if let Err(pos) = grid.binary_search_by(|t| t.total_cmp(&t0)) {
            grid.insert(pos, t0);
        }
    }
    let gen = gen.with_switch_off(t_drive);
    let tgt = [Target::new(target_name, target.clone())];
    let trajectory = evolve(&AtomicDensityMatrix::ground(m), &gen, &grid, &tgt, &opts.integrator)?;
    let f = trajectory.fidelity(target_name).expect("target requested");

    let (t_max, f_max) = match (peak, t_drive) {
        (Some(p), _) => p,
        (None, Some(t0)) => {
            let k = trajectory.times.iter().position(|&t| t == t0).expect("release time on grid");
            (t0, f[k])
        }
        (None, None) => match first_local_max(f) {
            Some(k) => (trajectory.times[k], f[k]),
            None => {
                let k = f.len() - 1;
                (trajectory.times[k], f[k])
            }
        },
    };
    let f_final = *f.last().expect("non-empty grid");
    Ok(ProtocolResult {
        trajectory,
        t_drive,
        t_max,
        f_max,
        f_final,
        metadata: ProtocolMetadata {
            configuration: name.to_string(),
            target: target_name.to_string(),
            eta: opts.eta,
            release: opts.release,
            t_end: opts.t_end,
            dt: opts.dt,
            target_atom: opts.target_atom,
            coupling: opts.coupling,
        },
    })
}

/// Bell-state generation in a two-atom configuration.
pub fn bell_protocol(config: NamedConfiguration, opts: &ProtocolOptions) -> Result<ProtocolResult> {
    config.require_atoms(2, "the Bell protocol")?;
    run_protocol(config.name(), &config.kernel(opts.coupling), "bell", &bell_state(), opts)
}

/// W-state generation in the three-atom configuration.
pub fn w_protocol(config: NamedConfiguration, opts: &ProtocolOptions) -> Result<ProtocolResult> {
    config.require_atoms(3, "the W protocol")?;
    run_protocol(config.name(), &config.kernel(opts.coupling), "w", &w_state(), opts)
}

/// Long-time fidelity after releasing `rho` (drive off) and evolving to `t_end`.
pub fn released_fidelity(
    kernel: &CouplingKernel,
    rho: &AtomicDensityMatrix,
    target: &DVector<Complex64>,
    t_end: f64,
    opts: &IntegratorOptions,
) -> Result<f64> {
    let gen = lindblad_generator(kernel, None, 0.0, 0.0)?;
    let tr = evolve(rho, &gen, &[t_end], &[], opts)?;
    Ok(pure_state_fidelity(&tr.states[0], target))
}
