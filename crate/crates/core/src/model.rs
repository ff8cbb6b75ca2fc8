//! Physical specification types and the single-excitation Hamiltonian.
//!
//! Basis ordering of every single-excitation vector and matrix in this crate:
//! indices `0..M` are "atom i excited, lattice in vacuum" (atoms in listed
//! order), indices `M..M + n_sites` are "all atoms ground, one photon on
//! site j".

use std::fmt;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Boundary condition of the resonator chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    #[default]
    Ring,
    Open,
}

/// Coupled-resonator waveguide: `n_sites` resonators at `omega_c` with
/// nearest-neighbour hopping `-xi`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaveguideSpec {
    pub n_sites: usize,
    pub omega_c: f64,
    pub xi: f64,
    pub boundary: Boundary,
    /// Added to `omega_c` on each site.
    pub onsite_offsets: Vec<f64>,
    /// Added to `xi` on each bond; bond `j` joins sites `j` and `j + 1`
    /// (and `n_sites - 1` to `0` on a ring).
    pub hopping_offsets: Vec<f64>,
}

impl WaveguideSpec {
    /// Clean lattice with zero disorder.
    pub fn clean(n_sites: usize, omega_c: f64, xi: f64, boundary: Boundary) -> Self {
        Self {
            n_sites,
            omega_c,
            xi,
            boundary,
            onsite_offsets: vec![0.0; n_sites],
            hopping_offsets: vec![0.0; Self::bond_count_for(n_sites, boundary)],
        }
    }

    pub fn ring(n_sites: usize) -> Self {
        Self::clean(n_sites, 0.0, 1.0, Boundary::Ring)
    }

    fn bond_count_for(n_sites: usize, boundary: Boundary) -> usize {
        match boundary {
            Boundary::Ring => n_sites,
            Boundary::Open => n_sites.saturating_sub(1),
        }
    }

    pub fn bond_count(&self) -> usize {
        Self::bond_count_for(self.n_sites, self.boundary)
    }

    pub fn is_clean(&self) -> bool {
        self.onsite_offsets.iter().all(|&x| x == 0.0)
            && self.hopping_offsets.iter().all(|&x| x == 0.0)
    }

    /// Iterator over bonds `(j, k, hopping)` with `hopping = xi + offset`.
    pub fn bonds(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.bond_count()).map(move |j| {
            let k = (j + 1) % self.n_sites;
            let offset = self.hopping_offsets.get(j).copied().unwrap_or(0.0);
            (j, k, self.xi + offset)
        })
    }

    /// Bare lattice Hamiltonian (no atoms).
    pub fn lattice_hamiltonian(&self) -> DMatrix<f64> {
        let n = self.n_sites;
        let mut h = DMatrix::zeros(n, n);
        for j in 0..n {
            h[(j, j)] = self.omega_c + self.onsite_offsets.get(j).copied().unwrap_or(0.0);
        }
        for (j, k, t) in self.bonds() {
            h[(j, k)] -= t;
            h[(k, j)] -= t;
        }
        h
    }
}

/// A giant atom coupled to the lattice at each site in `legs`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GiantAtomSpec {
    pub omega: f64,
    pub legs: Vec<usize>,
    pub g: f64,
}

impl GiantAtomSpec {
    pub fn new(omega: f64, legs: Vec<usize>, g: f64) -> Self {
        Self { omega, legs, g }
    }

    /// Atom with two legs at `x` and `x + n`.
    pub fn two_leg(omega: f64, x: usize, n: usize, g: f64) -> Self {
        Self::new(omega, vec![x, x + n], g)
    }

    pub fn shifted(&self, by: isize) -> Self {
        let legs = self
            .legs
            .iter()
            .map(|&p| (p as isize + by) as usize)
            .collect();
        Self { legs, ..self.clone() }
    }
}

/// Waveguide plus the list of atoms coupled to it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemSpec {
    pub waveguide: WaveguideSpec,
    pub atoms: Vec<GiantAtomSpec>,
}

impl SystemSpec {
    pub fn new(waveguide: WaveguideSpec, atoms: Vec<GiantAtomSpec>) -> Self {
        Self { waveguide, atoms }
    }

    pub fn n_atoms(&self) -> usize {
        self.atoms.len()
    }

    /// Dimension of the single-excitation sector.
    pub fn dim(&self) -> usize {
        self.atoms.len() + self.waveguide.n_sites
    }

    /// Smallest and largest leg index over all atoms.
    pub fn leg_span(&self) -> Option<(usize, usize)> {
        let legs = self.atoms.iter().flat_map(|a| a.legs.iter().copied());
        let (lo, hi) = legs.fold((usize::MAX, 0), |(lo, hi), p| (lo.min(p), hi.max(p)));
        (lo != usize::MAX).then_some((lo, hi))
    }

    pub fn with_waveguide(&self, waveguide: WaveguideSpec) -> Self {
        Self {
            waveguide,
            atoms: self.atoms.clone(),
        }
    }

    pub fn with_coupling(&self, g: f64) -> Self {
        let atoms = self
            .atoms
            .iter()
            .map(|a| GiantAtomSpec { g, ..a.clone() })
            .collect();
        Self {
            waveguide: self.waveguide.clone(),
            atoms,
        }
    }
}

/// One violation found by [`validate_spec`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Violation {
    TooFewSites(usize),
    NonPositiveHopping(f64),
    OnsiteLength { expected: usize, got: usize },
    HoppingLength { expected: usize, got: usize },
    NonFinite(&'static str),
    NoAtoms,
    NoLegs { atom: usize },
    LegOutOfRange { atom: usize, leg: usize, n_sites: usize },
    DuplicateLeg { atom: usize, leg: usize },
    UnsortedLegs { atom: usize },
    NegativeCoupling { atom: usize, g: f64 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::TooFewSites(n) => write!(f, "n_sites = {n} < 3"),
            Violation::NonPositiveHopping(xi) => write!(f, "xi = {xi} must be positive"),
            Violation::OnsiteLength { expected, got } => {
                write!(f, "onsite_offsets has length {got}, expected {expected}")
            }
            Violation::HoppingLength { expected, got } => {
                write!(f, "hopping_offsets has length {got}, expected {expected}")
            }
            Violation::NonFinite(what) => write!(f, "{what} is not finite"),
            Violation::NoAtoms => write!(f, "no atoms"),
            Violation::NoLegs { atom } => write!(f, "atom {atom} has no legs"),
            Violation::LegOutOfRange { atom, leg, n_sites } => {
                write!(f, "atom {atom}: leg out of range ({leg} >= {n_sites})")
            }
            Violation::DuplicateLeg { atom, leg } => write!(f, "atom {atom}: duplicate leg {leg}"),
            Violation::UnsortedLegs { atom } => {
                write!(f, "atom {atom}: legs are not strictly increasing")
            }
            Violation::NegativeCoupling { atom, g } => write!(f, "atom {atom}: g = {g} < 0"),
        }
    }
}

/// List of violations; empty means valid.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn into_result(self) -> Result<()> {
        if self.is_valid() {
            Ok(())
        } else {
            Err(Error::InvalidSpec(self))
        }
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.violations.iter().map(|v| v.to_string()).collect();
        f.write_str(&parts.join("; "))
    }
}

/// Check a system specification; never fails, reports every problem found.
pub fn validate_spec(spec: &SystemSpec) -> ValidationReport {
    let mut violations = Vec::new();
    let wg = &spec.waveguide;
    if wg.n_sites < 3 {
        violations.push(Violation::TooFewSites(wg.n_sites));
    }
    if !wg.xi.is_finite() || !wg.omega_c.is_finite() {
        violations.push(Violation::NonFinite("waveguide frequency or hopping"));
    }
    if !(wg.xi > 0.0) {
        violations.push(Violation::NonPositiveHopping(wg.xi));
    }
    if wg.onsite_offsets.len() != wg.n_sites {
        violations.push(Violation::OnsiteLength {
            expected: wg.n_sites,
            got: wg.onsite_offsets.len(),
        });
    }
    if wg.hopping_offsets.len() != wg.bond_count() {
        violations.push(Violation::HoppingLength {
            expected: wg.bond_count(),
            got: wg.hopping_offsets.len(),
        });
    }
    if wg
        .onsite_offsets
        .iter()
        .chain(&wg.hopping_offsets)
        .any(|x| !x.is_finite())
    {
        violations.push(Violation::NonFinite("disorder offset"));
    }
    if spec.atoms.is_empty() {
        violations.push(Violation::NoAtoms);
    }
    for (i, atom) in spec.atoms.iter().enumerate() {
        if atom.legs.is_empty() {
            violations.push(Violation::NoLegs { atom: i });
        }
        if !atom.omega.is_finite() || !atom.g.is_finite() {
            violations.push(Violation::NonFinite("atom frequency or coupling"));
        }
        if atom.g < 0.0 {
            violations.push(Violation::NegativeCoupling { atom: i, g: atom.g });
        }
        for &leg in &atom.legs {
            if leg >= wg.n_sites {
                violations.push(Violation::LegOutOfRange {
                    atom: i,
                    leg,
                    n_sites: wg.n_sites,
                });
            }
        }
        let mut sorted = true;
        for w in atom.legs.windows(2) {
            if w[0] == w[1] {
                violations.push(Violation::DuplicateLeg { atom: i, leg: w[0] });
            } else if w[0] > w[1] {
                sorted = false;
            }
        }
        if !sorted {
            let mut legs = atom.legs.clone();
            legs.sort_unstable();
            for w in legs.windows(2) {
                if w[0] == w[1] {
                    violations.push(Violation::DuplicateLeg { atom: i, leg: w[0] });
                }
            }
            violations.push(Violation::UnsortedLegs { atom: i });
        }
    }
    ValidationReport { violations }
}

/// Cosine band `ω_c − 2ξ cos k` of the clean lattice.
pub fn dispersion(k: f64, wg: &WaveguideSpec) -> Result<f64> {
    if !wg.is_clean() {
        return Err(Error::DisorderedDispersion);
    }
    Ok(wg.omega_c - 2.0 * wg.xi * k.cos())
}

/// Real symmetric single-excitation Hamiltonian of dimension `M + n_sites`.
pub fn build_single_excitation_hamiltonian(spec: &SystemSpec) -> Result<DMatrix<f64>> {
    validate_spec(spec).into_result()?;
    Ok(assemble(spec))
}

/// Hamiltonian of a spec whose atom list may be empty (bare lattice allowed).
pub(crate) fn assemble(spec: &SystemSpec) -> DMatrix<f64> {
    let m = spec.n_atoms();
    let n = spec.dim();
    let mut h = DMatrix::zeros(n, n);
    let lattice = spec.waveguide.lattice_hamiltonian();
    h.view_mut((m, m), (spec.waveguide.n_sites, spec.waveguide.n_sites))
        .copy_from(&lattice);
    for (i, atom) in spec.atoms.iter().enumerate() {
        h[(i, i)] = atom.omega;
        for &leg in &atom.legs {
            h[(i, m + leg)] += atom.g;
            h[(m + leg, i)] += atom.g;
        }
    }
    h
}

/// Bare lattice Hamiltonian with the atoms-first embedding of an empty atom list.
pub fn bare_lattice_hamiltonian(wg: &WaveguideSpec) -> DMatrix<f64> {
    wg.lattice_hamiltonian()
}

/// Amplitudes of one single-excitation wavefunction.
#[derive(Debug, Clone, PartialEq)]
pub struct SingleExcitationState {
    pub atomic_amps: Vec<Complex64>,
    pub photonic_amps: Vec<Complex64>,
    pub energy: Option<f64>,
}

impl SingleExcitationState {
    /// Split a full vector in the atoms-first ordering.
    pub fn from_vector(v: &[Complex64], n_atoms: usize, energy: Option<f64>) -> Self {
        Self {
            atomic_amps: v[..n_atoms].to_vec(),
            photonic_amps: v[n_atoms..].to_vec(),
            energy,
        }
    }

    pub fn from_real(v: &[f64], n_atoms: usize, energy: Option<f64>) -> Self {
        let c: Vec<Complex64> = v.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        Self::from_vector(&c, n_atoms, energy)
    }

    pub fn atomic_weight(&self) -> f64 {
        self.atomic_amps.iter().map(|c| c.norm_sqr()).sum()
    }

    pub fn photonic_weight(&self) -> f64 {
        self.photonic_amps.iter().map(|c| c.norm_sqr()).sum()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.atomic_weight() + self.photonic_weight()
    }

    pub fn to_vector(&self) -> Vec<Complex64> {
        self.atomic_amps
            .iter()
            .chain(&self.photonic_amps)
            .copied()
            .collect()
    }
}
