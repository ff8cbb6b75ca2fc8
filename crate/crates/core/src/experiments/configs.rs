use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lindblad::{coupling_matrix, CouplingKernel};
use crate::model::{validate_spec, GiantAtomSpec, SystemSpec, WaveguideSpec};

pub const DEFAULT_N_SITES: usize = 201;
pub const DEFAULT_G: f64 = 0.5;

/// Leg layout parameters; all distances in lattice sites.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Layout {
    /// Offset of the second atom's first leg from the first atom's.
    pub dx: usize,
    /// Leg separation of the first (outer) atom.
    pub n: usize,
    /// Leg separation of the second atom when it differs (nested).
    pub n_inner: Option<usize>,
    /// Gap between the first atom's last leg and the third atom's first.
    pub ds: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NamedConfiguration {
    Braided2,
    Separate2,
    Nested2,
    Braided3,
}

impl NamedConfiguration {
    pub const ALL: [NamedConfiguration; 4] = [
        NamedConfiguration::Braided2,
        NamedConfiguration::Separate2,
        NamedConfiguration::Nested2,
        NamedConfiguration::Braided3,
    ];

    pub const TWO_ATOM: [NamedConfiguration; 3] = [
        NamedConfiguration::Braided2,
        NamedConfiguration::Separate2,
        NamedConfiguration::Nested2,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            NamedConfiguration::Braided2 => "braided2",
            NamedConfiguration::Separate2 => "separate2",
            NamedConfiguration::Nested2 => "nested2",
            NamedConfiguration::Braided3 => "braided3",
        }
    }

    pub fn n_atoms(&self) -> usize {
        match self {
            NamedConfiguration::Braided3 => 3,
            _ => 2,
        }
    }

    pub fn layout(&self) -> Layout {
        match self {
            NamedConfiguration::Braided2 => Layout { dx: 2, n: 8, n_inner: None, ds: None },
            NamedConfiguration::Separate2 => Layout { dx: 10, n: 8, n_inner: None, ds: None },
            NamedConfiguration::Nested2 => Layout { dx: 2, n: 8, n_inner: Some(4), ds: None },
            NamedConfiguration::Braided3 => Layout { dx: 2, n: 8, n_inner: None, ds: Some(2) },
        }
    }

    /// Legs relative to the first atom's first leg.
    pub fn relative_legs(&self) -> Vec<Vec<usize>> {
        let l = self.layout();
        let x1 = 0;
        let x2 = x1 + l.dx;
        let mut legs = vec![vec![x1, x1 + l.n], vec![x2, x2 + l.n_inner.unwrap_or(l.n)]];
        if let Some(ds) = l.ds {
            let x3 = x1 + l.n + ds;
            legs.push(vec![x3, x3 + l.n]);
        }
        legs
    }

    /// Largest relative leg index.
    pub fn extent(&self) -> usize {
        self.relative_legs().iter().flatten().copied().max().unwrap_or(0)
    }

    /// Atoms with the first leg at `origin`, all resonant with the band center.
    pub fn atoms_at(&self, origin: usize, g: f64, omega_c: f64) -> Vec<GiantAtomSpec> {
        self.relative_legs()
            .into_iter()
            .map(|legs| GiantAtomSpec::new(omega_c, legs.into_iter().map(|p| p + origin).collect(), g))
            .collect()
    }

    /// Clean ring of `n_sites` (ω_c = 0, ξ = 1) with the atoms centered.
    pub fn resolve(&self, n_sites: usize, g: f64) -> Result<SystemSpec> {
        self.resolve_on(WaveguideSpec::ring(n_sites), g)
    }

    /// Place the atoms centered on an existing waveguide.
    pub fn resolve_on(&self, waveguide: WaveguideSpec, g: f64) -> Result<SystemSpec> {
        let extent = self.extent();
        if waveguide.n_sites <= extent {
            return Err(Error::RingTooSmall {
                required: extent + 1,
                got: waveguide.n_sites,
            });
        }
        let origin = (waveguide.n_sites - 1 - extent) / 2;
        let atoms = self.atoms_at(origin, g, waveguide.omega_c);
        let spec = SystemSpec::new(waveguide, atoms);
        validate_spec(&spec).into_result()?;
        Ok(spec)
    }

    /// Default spectral setup: 201-site ring, `g = 0.5ξ`.
    pub fn default_spec(&self) -> SystemSpec {
        self.resolve(DEFAULT_N_SITES, DEFAULT_G)
            .expect("named configurations fit the default ring")
    }

    /// Markovian kernel for coupling `g` (ξ = 1, resonant atoms).
    pub fn kernel(&self, g: f64) -> CouplingKernel {
        coupling_matrix(&self.atoms_at(0, g, 0.0), 0.0, 1.0).expect("resonant by construction")
    }

    pub(crate) fn require_atoms(&self, n_atoms: usize, purpose: &str) -> Result<()> {
        if self.n_atoms() == n_atoms {
            Ok(())
        } else {
            Err(Error::WrongConfiguration {
                name: self.name().to_string(),
                reason: format!("{purpose} needs {n_atoms} atoms, configuration has {}", self.n_atoms()),
            })
        }
    }
}

impl fmt::Display for NamedConfiguration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for NamedConfiguration {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown configuration '{s}'")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn legs_follow_layout() {
        assert_eq!(NamedConfiguration::Braided2.relative_legs(), vec![vec![0, 8], vec![2, 10]]);
        assert_eq!(NamedConfiguration::Separate2.relative_legs(), vec![vec![0, 8], vec![10, 18]]);
        assert_eq!(NamedConfiguration::Nested2.relative_legs(), vec![vec![0, 8], vec![2, 6]]);
        assert_eq!(
            NamedConfiguration::Braided3.relative_legs(),
            vec![vec![0, 8], vec![2, 10], vec![10, 18]]
        );
    }

    #[test]
    fn centered_on_default_ring() {
        let spec = NamedConfiguration::Braided2.default_spec();
        assert_eq!(spec.atoms[0].legs, vec![95, 103]);
        assert_eq!(spec.atoms[1].legs, vec![97, 105]);
        let (lo, hi) = spec.leg_span().unwrap();
        assert_eq!(lo, 200 - hi);
    }

    #[test]
    fn dark_vector_annihilated_by_all_two_atom_kernels() {
        for c in NamedConfiguration::TWO_ATOM {
            let k = c.kernel(0.5);
            let g = k.gamma_matrix();
            assert_eq!(g[(0, 0)] + g[(0, 1)], 0.0, "{c}");
            assert_eq!(g[(1, 0)] + g[(1, 1)], 0.0, "{c}");
            assert!(k.is_gamma_psd(1e-14));
        }
    }

    #[test]
    fn parse_round_trip() {
        for c in NamedConfiguration::ALL {
            assert_eq!(c.name().parse::<NamedConfiguration>().unwrap(), c);
        }
        assert!("braided4".parse::<NamedConfiguration>().is_err());
    }

    #[test]
    fn ring_too_small() {
        assert!(matches!(
            NamedConfiguration::Braided3.resolve(10, 0.5),
            Err(Error::RingTooSmall { required: 19, got: 10 })
        ));
    }
}
