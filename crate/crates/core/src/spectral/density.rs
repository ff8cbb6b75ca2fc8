//! Density matrices on the `2^M`-dimensional atomic space.
//!
//! Qubit tensor order is atom 1 ⊗ atom 2 ⊗ …, with `|g⟩ ↦ 0` and `|e⟩ ↦ 1`
//! per qubit, so atom 1 is the most significant bit of the basis index.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

pub const HERMITIAN_TOL: f64 = 1e-12;
pub const TRACE_TOL: f64 = 1e-10;
pub const NEGATIVITY_TOL: f64 = 1e-9;

/// Basis index of "atom `i` excited, all others ground".
pub fn excited_index(atom: usize, n_atoms: usize) -> usize {
    1 << (n_atoms - 1 - atom)
}

/// Pure state vector with amplitudes `amps[i]` on "atom i excited".
pub fn single_excitation_vector(amps: &[Complex64]) -> DVector<Complex64> {
    let m = amps.len();
    let mut v = DVector::from_element(1 << m, ZERO);
    for (i, &a) in amps.iter().enumerate() {
        v[excited_index(i, m)] = a;
    }
    v
}

/// `(|eg⟩ + |ge⟩)/√2`.
pub fn bell_state() -> DVector<Complex64> {
    let a = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    single_excitation_vector(&[a, a])
}

/// `(|eg⟩ − |ge⟩)/√2`.
pub fn anti_bell_state() -> DVector<Complex64> {
    let a = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    single_excitation_vector(&[a, -a])
}

/// `(|egg⟩ + |geg⟩ + |gge⟩)/√3`.
pub fn w_state() -> DVector<Complex64> {
    let a = Complex64::new(1.0 / 3f64.sqrt(), 0.0);
    single_excitation_vector(&[a, a, a])
}

/// Lowering operator `σ⁻` of one atom on the full atomic space.
pub fn lowering_operator(atom: usize, n_atoms: usize) -> DMatrix<Complex64> {
    let d = 1 << n_atoms;
    let bit = excited_index(atom, n_atoms);
    let mut s = DMatrix::from_element(d, d, ZERO);
    for idx in 0..d {
        if idx & bit != 0 {
            s[(idx & !bit, idx)] = ONE;
        }
    }
    s
}

/// Eigen-decomposition of a Hermitian complex matrix, eigenvalues ascending.
pub(crate) fn hermitian_eigen(m: &DMatrix<Complex64>) -> (Vec<f64>, DMatrix<Complex64>) {
    let sym = (m + m.adjoint()) * Complex64::new(0.5, 0.0);
    let eig = sym.symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let vectors = DMatrix::from_fn(m.nrows(), m.ncols(), |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

/// Hermitian, trace-one, positive semidefinite matrix on `M` qubits.
#[derive(Debug, Clone, PartialEq)]
pub struct AtomicDensityMatrix {
    n_atoms: usize,
    matrix: DMatrix<Complex64>,
}

impl AtomicDensityMatrix {
    /// Wrap a matrix after checking every density-matrix invariant.
    pub fn new(n_atoms: usize, matrix: DMatrix<Complex64>) -> Result<Self> {
        let rho = Self::new_unchecked(n_atoms, matrix)?;
        rho.validate()?;
        Ok(rho)
    }

    /// Wrap a matrix, checking only its shape.
    pub fn new_unchecked(n_atoms: usize, matrix: DMatrix<Complex64>) -> Result<Self> {
        let d = 1usize << n_atoms;
        if matrix.nrows() != d || matrix.ncols() != d {
            return Err(Error::DimensionMismatch(matrix.nrows(), d));
        }
        Ok(Self { n_atoms, matrix })
    }

    /// `|ψ⟩⟨ψ|` for a normalized `ψ`.
    pub fn pure(n_atoms: usize, psi: &DVector<Complex64>) -> Result<Self> {
        let norm = psi.norm_squared();
        if (norm - 1.0).abs() > 1e-8 {
            return Err(Error::Unnormalized(norm));
        }
        Self::new_unchecked(n_atoms, psi * psi.adjoint())
    }

    /// All atoms in the ground state.
    pub fn ground(n_atoms: usize) -> Self {
        let d = 1 << n_atoms;
        let mut m = DMatrix::from_element(d, d, ZERO);
        m[(0, 0)] = ONE;
        Self { n_atoms, matrix: m }
    }

    pub fn n_atoms(&self) -> usize {
        self.n_atoms
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> DMatrix<Complex64> {
        self.matrix
    }

    pub fn trace(&self) -> f64 {
        self.matrix.trace().re
    }

    /// Largest `|ρ_ij − conj(ρ_ji)|`.
    pub fn hermiticity_residual(&self) -> f64 {
        let d = self.dim();
        let mut worst = 0.0f64;
        for i in 0..d {
            for j in i..d {
                worst = worst.max((self.matrix[(i, j)] - self.matrix[(j, i)].conj()).norm());
            }
        }
        worst
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        hermitian_eigen(&self.matrix).0
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues()[0]
    }

    /// `⟨ψ|ρ|ψ⟩`.
    pub fn expectation(&self, psi: &DVector<Complex64>) -> f64 {
        (psi.adjoint() * &self.matrix * psi)[(0, 0)].re
    }

    /// Population of a computational basis state.
    pub fn population(&self, index: usize) -> f64 {
        self.matrix[(index, index)].re
    }

    /// Mean number of excited atoms.
    pub fn excitation_number(&self) -> f64 {
        (0..self.dim())
            .map(|k| k.count_ones() as f64 * self.matrix[(k, k)].re)
            .sum()
    }

    /// Check Hermiticity, unit trace and positivity at the default tolerances.
    pub fn validate(&self) -> Result<()> {
        self.validate_with(HERMITIAN_TOL, TRACE_TOL, NEGATIVITY_TOL)
    }

    pub fn validate_with(&self, herm_tol: f64, trace_tol: f64, neg_tol: f64) -> Result<()> {
        let h = self.hermiticity_residual();
        if h > herm_tol {
            return Err(Error::InvalidDensity(format!("Hermiticity residual {h:e}")));
        }
        let tr = self.trace();
        if (tr - 1.0).abs() > trace_tol {
            return Err(Error::InvalidDensity(format!("trace {tr}")));
        }
        let min = self.min_eigenvalue();
        if min < -neg_tol {
            return Err(Error::InvalidDensity(format!("eigenvalue {min:e}")));
        }
        Ok(())
    }
}

/// Serializable snapshot of a density matrix (row-major real/imag parts).
#[derive(Debug, Clone, Serialize)]
pub struct DensitySnapshot {
    pub re: Vec<Vec<f64>>,
    pub im: Vec<Vec<f64>>,
}

impl From<&AtomicDensityMatrix> for DensitySnapshot {
    fn from(rho: &AtomicDensityMatrix) -> Self {
        let d = rho.dim();
        let row = |f: fn(&Complex64) -> f64, i: usize| (0..d).map(|j| f(&rho.matrix[(i, j)])).collect();
        Self {
            re: (0..d).map(|i| row(|z| z.re, i)).collect(),
            im: (0..d).map(|i| row(|z| z.im, i)).collect(),
        }
    }
}
