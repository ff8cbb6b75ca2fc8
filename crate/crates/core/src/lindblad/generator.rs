use nalgebra::{DMatrix, DMatrixView};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::kernel::CouplingKernel;
use crate::error::{Error, Result};
use crate::spectral::lowering_operator;

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Coherent drive `η(σ⁺ + σ⁻)` on one atom, on for `t < t0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriveSpec {
    pub target_atom: usize,
    pub eta: f64,
    pub omega_d: f64,
    /// Switch-off time; `None` drives forever.
    pub t0: Option<f64>,
}

impl DriveSpec {
    pub fn continuous(target_atom: usize, eta: f64, omega_d: f64) -> Self {
        Self {
            target_atom,
            eta,
            omega_d,
            t0: None,
        }
    }

    pub fn until(self, t0: f64) -> Self {
        Self { t0: Some(t0), ..self }
    }

    pub fn switch_off(&self) -> f64 {
        self.t0.unwrap_or(f64::INFINITY)
    }
}

/// Piecewise-constant Lindblad generator in the frame rotating at the drive
/// frequency:
///
/// `dρ/dt = −i[H, ρ] + Σ_ij 2Γ_ij (σ_j⁻ ρ σ_i⁺ − ½{σ_i⁺σ_j⁻, ρ}) + γ_loc Σ_i D[σ_i⁻]ρ`
///
/// with `H = Δ Σ σ⁺σ⁻ + Σ_ij J_ij σ_i⁺σ_j⁻ + η(σ_t⁺ + σ_t⁻)` while the drive is on.
#[derive(Debug, Clone)]
pub struct LindbladGenerator {
    n_atoms: usize,
    kernel: CouplingKernel,
    drive: Option<DriveSpec>,
    detuning: f64,
    local_decay: f64,
    /// `H − (i/2) Σ L†L` without and with the drive.
    k_free: DMatrix<Complex64>,
    k_driven: DMatrix<Complex64>,
    /// `(B_i, σ_i⁺)` with `B_i = Σ_j 2Γ_ij σ_j⁻`.
    jumps: Vec<(DMatrix<Complex64>, DMatrix<Complex64>)>,
    lowering: Vec<DMatrix<Complex64>>,
}

/// Build the generator for `kernel`, an optional drive and the detuning
/// `Δ = Ω − ω_d`. `local_decay` adds independent decay at that rate.
pub fn lindblad_generator(
    kernel: &CouplingKernel,
    drive: Option<DriveSpec>,
    detuning: f64,
    local_decay: f64,
) -> Result<LindbladGenerator> {
    let m = kernel.n_atoms();
    if let Some(d) = &drive {
        if d.target_atom >= m {
            return Err(Error::Config(format!(
                "drive target {} out of range for {m} atoms",
                d.target_atom
            )));
        }
        if !(d.eta >= 0.0) {
            return Err(Error::Config(format!("drive strength {} must be nonnegative", d.eta)));
        }
    }
    if !(local_decay >= 0.0) {
        return Err(Error::Config(format!("local decay {local_decay} must be nonnegative")));
    }
    let dim = 1 << m;
    let lowering: Vec<DMatrix<Complex64>> = (0..m).map(|i| lowering_operator(i, m)).collect();
    let raising: Vec<DMatrix<Complex64>> = lowering.iter().map(|s| s.adjoint()).collect();
    let gamma = kernel.gamma_matrix();
    let j = kernel.j_matrix();

    let mut k_free = DMatrix::from_element(dim, dim, Complex64::new(0.0, 0.0));
    for a in 0..m {
        let number = &raising[a] * &lowering[a];
        k_free += &number * Complex64::new(detuning, -0.5 * local_decay);
        for b in 0..m {
            let hop = &raising[a] * &lowering[b];
            k_free += hop * Complex64::new(j[(a, b)], -gamma[(a, b)]);
        }
    }
    let mut k_driven = k_free.clone();
    if let Some(d) = &drive {
        let t = d.target_atom;
        k_driven += (&lowering[t] + &raising[t]) * Complex64::new(d.eta, 0.0);
    }
    let jumps = (0..m)
        .map(|a| {
            let mut b_op = DMatrix::from_element(dim, dim, Complex64::new(0.0, 0.0));
            for b in 0..m {
                if gamma[(a, b)] != 0.0 {
                    b_op += &lowering[b] * Complex64::new(2.0 * gamma[(a, b)], 0.0);
                }
            }
            (b_op, raising[a].clone())
        })
        .collect();
    Ok(LindbladGenerator {
        n_atoms: m,
        kernel: kernel.clone(),
        drive,
        detuning,
        local_decay,
        k_free,
        k_driven,
        jumps,
        lowering,
    })
}

impl LindbladGenerator {
    pub fn n_atoms(&self) -> usize {
        self.n_atoms
    }

    pub fn dim(&self) -> usize {
        1 << self.n_atoms
    }

    pub fn kernel(&self) -> &CouplingKernel {
        &self.kernel
    }

    pub fn drive(&self) -> Option<&DriveSpec> {
        self.drive.as_ref()
    }

    pub fn detuning(&self) -> f64 {
        self.detuning
    }

    /// Time at which the generator switches to its undriven form.
    pub fn switch_time(&self) -> f64 {
        self.drive.as_ref().map_or(f64::INFINITY, |d| d.switch_off())
    }

    pub fn is_driven_at(&self, t: f64) -> bool {
        self.drive.is_some() && t < self.switch_time()
    }

    /// Same generator with a different drive switch-off time.
    pub fn with_switch_off(&self, t0: Option<f64>) -> Self {
        let mut g = self.clone();
        if let Some(d) = g.drive.as_mut() {
            d.t0 = t0;
        }
        g
    }

    /// `dρ/dt` with the drive on or off; `rho` and `out` are column-major.
    pub fn apply(&self, drive_on: bool, rho: &[Complex64], out: &mut [Complex64]) {
        let d = self.dim();
        let rho = DMatrixView::from_slice(rho, d, d);
        let k = if drive_on { &self.k_driven } else { &self.k_free };
        let kr = k * rho;
        let rk = rho * k.adjoint();
        let mut res = (kr - rk) * (-I);
        for (b_op, raise) in &self.jumps {
            res += b_op * rho * raise;
        }
        if self.local_decay > 0.0 {
            let g = Complex64::new(self.local_decay, 0.0);
            for s in &self.lowering {
                res += (s * rho * s.adjoint()) * g;
            }
        }
        out.copy_from_slice(res.as_slice());
    }

    /// `dρ/dt` at time `t` as a matrix.
    pub fn derivative(&self, t: f64, rho: &DMatrix<Complex64>) -> DMatrix<Complex64> {
        let d = self.dim();
        let mut out = DMatrix::from_element(d, d, Complex64::new(0.0, 0.0));
        self.apply(self.is_driven_at(t), rho.as_slice(), out.as_mut_slice());
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lindblad::kernel::coupling_matrix;
    use crate::model::GiantAtomSpec;
    use crate::spectral::{anti_bell_state, bell_state, AtomicDensityMatrix};

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

    fn c(x: f64) -> Complex64 {
        Complex64::new(x, 0.0)
    }

    #[test]
    fn free_evolution_is_static_for_diagonal_states() {
        let gen = lindblad_generator(&CouplingKernel::zeros(2), None, 0.0, 0.0).unwrap();
        let mut rho = DMatrix::from_element(4, 4, c(0.0));
        for (k, p) in [0.1, 0.2, 0.3, 0.4].iter().enumerate() {
            rho[(k, k)] = c(*p);
        }
        assert_eq!(gen.derivative(0.0, &rho).camax(), 0.0);
    }

    #[test]
    fn dark_state_is_exactly_stationary() {
        let gen = lindblad_generator(&braided_kernel(), None, 0.0, 0.0).unwrap();
        let rho = AtomicDensityMatrix::pure(2, &bell_state()).unwrap();
        assert_eq!(gen.derivative(0.0, rho.matrix()).camax(), 0.0);
    }

    #[test]
    fn bright_state_decays_at_twice_gamma() {
        let gen = lindblad_generator(&braided_kernel(), None, 0.0, 0.0).unwrap();
        let rho = AtomicDensityMatrix::pure(2, &anti_bell_state()).unwrap();
        let drho = gen.derivative(0.0, rho.matrix());
        // d⟨n⟩/dt = −2·(8C)·⟨n⟩ with C = g²/(2ξ).
        let dn: f64 = (0..4usize).map(|k| k.count_ones() as f64 * drho[(k, k)].re).sum();
        assert!((dn + 2.0 * 8.0 * 0.125).abs() < 1e-14);
        assert!((drho[(0, 0)].re - 2.0).abs() < 1e-14);
    }

    #[test]
    fn derivative_is_traceless_and_hermitian() {
        let drive = DriveSpec::continuous(0, 0.3, 0.0);
        let gen = lindblad_generator(&braided_kernel(), Some(drive), 0.2, 0.05).unwrap();
        let psi = nalgebra::DVector::from_vec(vec![c(0.5), Complex64::new(0.1, 0.4), c(-0.3), Complex64::new(0.2, -0.6)]);
        let psi = &psi / c(psi.norm());
        let rho = &psi * psi.adjoint();
        let d = gen.derivative(1.0, &rho);
        assert!(d.trace().norm() < 1e-14);
        assert!((&d - d.adjoint()).camax() < 1e-14);
    }

    #[test]
    fn drive_switches_off() {
        let drive = DriveSpec::continuous(0, 0.1, 0.0).until(5.0);
        let gen = lindblad_generator(&CouplingKernel::zeros(2), Some(drive), 0.0, 0.0).unwrap();
        let rho = AtomicDensityMatrix::ground(2);
        assert!(gen.derivative(4.9, rho.matrix()).camax() > 0.0);
        assert_eq!(gen.derivative(5.0, rho.matrix()).camax(), 0.0);
    }

    #[test]
    fn bad_drive_target() {
        let drive = DriveSpec::continuous(2, 0.1, 0.0);
        assert!(lindblad_generator(&braided_kernel(), Some(drive), 0.0, 0.0).is_err());
    }
}
