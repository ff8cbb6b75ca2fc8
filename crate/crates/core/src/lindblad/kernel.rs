use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::GiantAtomSpec;
use crate::spectral::density::hermitian_eigen;

/// Tolerance on `|Ω − ω_c|` for an atom to count as resonant.
pub const RESONANCE_TOL: f64 = 1e-12;

/// `e^{iπd/2} = i^d`, exact for integer distances.
fn quarter_phase(d: usize) -> Complex64 {
    match d % 4 {
        0 => Complex64::new(1.0, 0.0),
        1 => Complex64::new(0.0, 1.0),
        2 => Complex64::new(-1.0, 0.0),
        _ => Complex64::new(0.0, -1.0),
    }
}

/// Collective coupling kernel `A` of the Markovian master equation.
///
/// `Γ = Re A` gives the collective decay (population decay rate of atom `i`
/// alone is `2Γ_ii`), `J = Im A` the Lamb shifts and exchange couplings.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CouplingKernel {
    #[serde(skip)]
    pub a: DMatrix<Complex64>,
    pub gamma: Vec<Vec<f64>>,
    pub j: Vec<Vec<f64>>,
}

impl CouplingKernel {
    pub fn from_matrix(a: DMatrix<Complex64>) -> Self {
        let m = a.nrows();
        let gamma = (0..m).map(|i| (0..m).map(|k| a[(i, k)].re).collect()).collect();
        let j = (0..m).map(|i| (0..m).map(|k| a[(i, k)].im).collect()).collect();
        Self { a, gamma, j }
    }

    pub fn zeros(n_atoms: usize) -> Self {
        Self::from_matrix(DMatrix::from_element(n_atoms, n_atoms, Complex64::new(0.0, 0.0)))
    }

    pub fn n_atoms(&self) -> usize {
        self.a.nrows()
    }

    pub fn gamma_matrix(&self) -> DMatrix<f64> {
        self.a.map(|z| z.re)
    }

    pub fn j_matrix(&self) -> DMatrix<f64> {
        self.a.map(|z| z.im)
    }

    /// Eigenvalues of `Γ`, ascending.
    pub fn gamma_eigenvalues(&self) -> Vec<f64> {
        let g = self.gamma_matrix().map(|x| Complex64::new(x, 0.0));
        hermitian_eigen(&g).0
    }

    pub fn is_symmetric(&self) -> bool {
        self.a == self.a.transpose()
    }

    pub fn is_gamma_psd(&self, tol: f64) -> bool {
        self.gamma_eigenvalues().first().is_none_or(|&e| e >= -tol)
    }
}

/// Pair sum `Σ_{p ∈ legs_i} Σ_{q ∈ legs_j} e^{iπ|p−q|/2}` without prefactor.
pub fn phase_sum(legs_i: &[usize], legs_j: &[usize]) -> Complex64 {
    legs_i
        .iter()
        .flat_map(|&p| legs_j.iter().map(move |&q| quarter_phase(p.abs_diff(q))))
        .sum()
}

/// Kernel `A_ij = g_i g_j/(2ξ) · Σ_p Σ_q e^{iπ|p−q|/2}` at band-center
/// resonance.
///
/// Every atom must satisfy `Ω = ω_c`; the phase `π/2` per site is the band
/// center wavenumber.
pub fn coupling_matrix(atoms: &[GiantAtomSpec], omega_c: f64, xi: f64) -> Result<CouplingKernel> {
    for (i, atom) in atoms.iter().enumerate() {
        let detuning = atom.omega - omega_c;
        if detuning.abs() > RESONANCE_TOL {
            return Err(Error::OffResonance { atom: i, detuning });
        }
    }
    let m = atoms.len();
    let a = DMatrix::from_fn(m, m, |i, j| {
        let c = atoms[i].g * atoms[j].g / (2.0 * xi);
        phase_sum(&atoms[i].legs, &atoms[j].legs) * c
    });
    Ok(CouplingKernel::from_matrix(a))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn atom(legs: &[usize], g: f64) -> GiantAtomSpec {
        GiantAtomSpec::new(0.0, legs.to_vec(), g)
    }

    #[test]
    fn one_leg_atom() {
        let k = coupling_matrix(&[atom(&[5], 0.1)], 0.0, 1.0).unwrap();
        let c = 0.01 / 2.0;
        assert!((k.a[(0, 0)] - Complex64::new(c, 0.0)).norm() < 1e-17);
        // Golden-rule rate g²/(ξ sin k₀) at k₀ = π/2.
        assert!((2.0 * k.gamma[0][0] - 0.01).abs() < 1e-15);
    }

    #[test]
    fn braided_pair() {
        let g = 0.5;
        let c = g * g / 2.0;
        let k = coupling_matrix(&[atom(&[0, 8], g), atom(&[2, 10], g)], 0.0, 1.0).unwrap();
        assert_eq!(k.gamma[0][0], 4.0 * c);
        assert_eq!(k.gamma[1][1], 4.0 * c);
        assert_eq!(k.gamma[0][1], -4.0 * c);
        assert!(k.j.iter().flatten().all(|&x| x == 0.0));
        let ev = k.gamma_eigenvalues();
        assert!(ev[0].abs() < 1e-14);
        assert!((ev[1] - 8.0 * c).abs() < 1e-14);
        assert!(k.is_symmetric());
    }

    #[test]
    fn two_leg_sum_matches_three_term_form() {
        // (2e^{iπ|Δ|/2} + e^{iπ|Δ+n|/2} + e^{iπ|Δ−n|/2}) for equal two-leg atoms.
        for (x1, x2, n) in [(0usize, 2usize, 8usize), (0, 10, 8), (3, 4, 5), (0, 1, 3)] {
            let general = phase_sum(&[x1, x1 + n], &[x2, x2 + n]);
            let d = x1 as isize - x2 as isize;
            let e = |x: isize| quarter_phase(x.unsigned_abs());
            let three = e(d) * 2.0 + e(d + n as isize) + e(d - n as isize);
            assert_eq!(general, three);
        }
    }

    #[test]
    fn three_atom_braided() {
        let g = 0.5;
        let c = g * g / 2.0;
        let k = coupling_matrix(
            &[atom(&[0, 8], g), atom(&[2, 10], g), atom(&[10, 18], g)],
            0.0,
            1.0,
        )
        .unwrap();
        assert_eq!(k.gamma[0][1], -4.0 * c);
        assert_eq!(k.gamma[0][2], -4.0 * c);
        assert_eq!(k.gamma[1][2], 4.0 * c);
        let ev = k.gamma_eigenvalues();
        assert!(ev[0].abs() < 1e-14 && ev[1].abs() < 1e-14);
        assert!((ev[2] - 12.0 * c).abs() < 1e-13);
    }

    #[test]
    fn unequal_couplings_are_bilinear() {
        let k = coupling_matrix(&[atom(&[0, 8], 0.5), atom(&[2, 6], 0.2)], 0.0, 1.0).unwrap();
        assert!((k.gamma[0][1] - 0.5 * 0.2 / 2.0 * -4.0).abs() < 1e-15);
        assert!((k.gamma[1][1] - 0.04 / 2.0 * 4.0).abs() < 1e-15);
    }

    #[test]
    fn odd_separation_gives_lamb_shift() {
        let k = coupling_matrix(&[atom(&[0, 1], 1.0)], 0.0, 1.0).unwrap();
        // 2 + 2i over 2ξ.
        assert_eq!(k.a[(0, 0)], Complex64::new(1.0, 1.0));
    }

    #[test]
    fn off_resonance_rejected() {
        let a = GiantAtomSpec::new(0.3, vec![0, 8], 0.5);
        assert!(matches!(
            coupling_matrix(&[a], 0.0, 1.0),
            Err(Error::OffResonance { atom: 0, .. })
        ));
    }
}
