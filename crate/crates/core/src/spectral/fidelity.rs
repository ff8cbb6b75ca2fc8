use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use super::density::{hermitian_eigen, AtomicDensityMatrix, NEGATIVITY_TOL};
use crate::error::{Error, Result};

/// Principal square root of a PSD Hermitian matrix; eigenvalues down to
/// `-NEGATIVITY_TOL` are clamped to zero.
fn psd_sqrt(m: &DMatrix<Complex64>) -> Result<DMatrix<Complex64>> {
    let (vals, vecs) = hermitian_eigen(m);
    if let Some(&min) = vals.first() {
        if min < -NEGATIVITY_TOL {
            return Err(Error::InvalidDensity(format!("eigenvalue {min:e}")));
        }
    }
    let roots = DVector::from_iterator(
        vals.len(),
        vals.iter().map(|&x| Complex64::new(x.max(0.0).sqrt(), 0.0)),
    );
    Ok(&vecs * DMatrix::from_diagonal(&roots) * vecs.adjoint())
}

/// Uhlmann fidelity `Tr √(√ρ σ √ρ)`, clamped to `[0, 1]`.
pub fn uhlmann_fidelity(rho: &AtomicDensityMatrix, sigma: &AtomicDensityMatrix) -> Result<f64> {
    if rho.dim() != sigma.dim() {
        return Err(Error::DimensionMismatch(rho.dim(), sigma.dim()));
    }
    let sqrt_rho = psd_sqrt(rho.matrix())?;
    // σ is validated through its own spectrum.
    let sigma_min = sigma.min_eigenvalue();
    if sigma_min < -NEGATIVITY_TOL {
        return Err(Error::InvalidDensity(format!("eigenvalue {sigma_min:e}")));
    }
    let inner = &sqrt_rho * sigma.matrix() * &sqrt_rho;
    let (vals, _) = hermitian_eigen(&inner);
    // Round-off eigenvalues would otherwise add O(√ε) each after the square root.
    let top = vals.iter().fold(0.0f64, |m, &x| m.max(x.abs()));
    let floor = 16.0 * f64::EPSILON * inner.nrows() as f64 * top.max(1.0);
    let f: f64 = vals.iter().filter(|&&x| x > floor).map(|&x| x.sqrt()).sum();
    Ok(f.clamp(0.0, 1.0))
}

/// Fidelity against a pure target, `√⟨ψ|ρ|ψ⟩`.
pub fn pure_state_fidelity(rho: &AtomicDensityMatrix, psi: &DVector<Complex64>) -> f64 {
    rho.expectation(psi).max(0.0).sqrt().min(1.0)
}
