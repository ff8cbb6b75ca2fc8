//! Gaussian waveguide disorder and Monte Carlo averages of the BIC fidelity.
//!
//! Each realization draws from its own ChaCha stream, keyed by the master
//! seed, the disorder width and the realization index. Realizations can
//! therefore run in any order (or in parallel) with identical results.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{SystemSpec, WaveguideSpec};
use crate::spectral::{
    self, atomic_region, conditioned_atomic_density, entangled_target, outside_weight,
    pure_state_fidelity, BandEdges, ClassifyOptions,
};

/// `2√(2 ln 2)`, the ratio of FWHM to standard deviation of a Gaussian.
pub const FWHM_PER_SIGMA: f64 = 2.354_820_045_030_949_4;

/// Realizations whose best candidate has more photonic weight than this
/// outside the atomic region are counted as having lost the BIC.
pub const OUTLIER_OUTSIDE_WEIGHT: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DisorderKind {
    Onsite,
    Hopping,
}

impl std::fmt::Display for DisorderKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            DisorderKind::Onsite => "onsite",
            DisorderKind::Hopping => "hopping",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DisorderSpec {
    pub kind: DisorderKind,
    /// Full width at half maximum, in units of ξ.
    pub delta: f64,
    pub n_realizations: usize,
    pub master_seed: u64,
}

impl DisorderSpec {
    pub fn new(kind: DisorderKind, delta: f64, master_seed: u64) -> Self {
        Self {
            kind,
            delta,
            n_realizations: 50,
            master_seed,
        }
    }

    pub fn sigma(&self) -> f64 {
        fwhm_to_sigma(self.delta)
    }

    fn validate(&self) -> Result<()> {
        if !(self.delta >= 0.0) || !self.delta.is_finite() {
            return Err(Error::Config(format!("disorder width {} must be >= 0", self.delta)));
        }
        if self.n_realizations == 0 {
            return Err(Error::Config("n_realizations must be >= 1".into()));
        }
        Ok(())
    }
}

pub fn fwhm_to_sigma(fwhm: f64) -> f64 {
    fwhm / FWHM_PER_SIGMA
}

/// SplitMix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn realization_rng(spec: &DisorderSpec, realization_index: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(mix(spec.master_seed ^ mix(spec.delta.to_bits())));
    rng.set_stream(realization_index);
    rng
}

/// I.i.d. Gaussian offsets (mean 0, FWHM `delta`) for the sites or bonds of `wg`.
pub fn sample_disorder(spec: &DisorderSpec, wg: &WaveguideSpec, realization_index: u64) -> Vec<f64> {
    let len = match spec.kind {
        DisorderKind::Onsite => wg.n_sites,
        DisorderKind::Hopping => wg.bond_count(),
    };
    let sigma = spec.sigma();
    let mut rng = realization_rng(spec, realization_index);
    (0..len)
        .map(|_| {
            let z: f64 = StandardNormal.sample(&mut rng);
            sigma * z
        })
        .collect()
}

/// Waveguide with the offsets of one realization applied.
pub fn disordered_waveguide(spec: &DisorderSpec, wg: &WaveguideSpec, realization_index: u64) -> WaveguideSpec {
    let offsets = sample_disorder(spec, wg, realization_index);
    let mut out = wg.clone();
    let target = match spec.kind {
        DisorderKind::Onsite => &mut out.onsite_offsets,
        DisorderKind::Hopping => &mut out.hopping_offsets,
    };
    for (o, d) in target.iter_mut().zip(offsets) {
        *o += d;
    }
    out
}

/// Outcome of one disorder realization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RealizationOutcome {
    pub index: u64,
    pub energy: f64,
    pub outside_weight: f64,
    pub fidelity: f64,
    pub flagged: bool,
}

/// Re-identify the BIC of a (disordered) spec as the in-band eigenstate with
/// the least photonic weight outside the atomic region, and compute its
/// fidelity with the entangled target.
pub fn bic_fidelity(spec: &SystemSpec, opts: &ClassifyOptions) -> Result<RealizationOutcome> {
    let m = spec.n_atoms();
    let target = entangled_target(m).ok_or_else(|| Error::WrongConfiguration {
        name: format!("{m} atoms"),
        reason: "disorder scan needs two or three atoms".into(),
    })?;
    let mut pairs = spectral::solve(spec)?;
    // Degenerate subspaces are rotated onto their most localized vectors.
    let class = spectral::classify_states(&mut pairs, spec, opts);
    let edges: BandEdges = class.edges;
    let region = atomic_region(spec, opts.guard);
    let best = pairs
        .iter()
        .filter(|p| edges.contains(p.energy) && p.state.atomic_weight() > opts.tol_loc)
        .map(|p| (p, outside_weight(&p.state, region)))
        .min_by(|a, b| a.1.total_cmp(&b.1));
    let Some((pair, outside)) = best else {
        return Ok(RealizationOutcome {
            index: 0,
            energy: f64::NAN,
            outside_weight: 1.0,
            fidelity: 0.0,
            flagged: true,
        });
    };
    let rho = conditioned_atomic_density(&pair.state, m)?;
    Ok(RealizationOutcome {
        index: 0,
        energy: pair.energy,
        outside_weight: outside,
        fidelity: pure_state_fidelity(&rho, &target),
        flagged: outside > OUTLIER_OUTSIDE_WEIGHT,
    })
}

/// Outcomes of every realization at one disorder width, in index order.
pub fn realizations(base: &SystemSpec, disorder: &DisorderSpec, opts: &ClassifyOptions) -> Result<Vec<RealizationOutcome>> {
    disorder.validate()?;
    (0..disorder.n_realizations as u64)
        .into_par_iter()
        .map(|r| {
            let wg = disordered_waveguide(disorder, &base.waveguide, r);
            let mut out = bic_fidelity(&base.with_waveguide(wg), opts)?;
            out.index = r;
            Ok(out)
        })
        .collect()
}

/// One row of a disorder scan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DisorderScanRow {
    pub delta: f64,
    pub kind: DisorderKind,
    pub mean_fidelity: f64,
    /// Sample standard deviation over the realizations used.
    pub std_fidelity: f64,
    pub n_used: usize,
    pub n_flagged: usize,
}

impl DisorderScanRow {
    /// Standard error of the mean.
    pub fn standard_error(&self) -> f64 {
        if self.n_used == 0 {
            f64::NAN
        } else {
            self.std_fidelity / (self.n_used as f64).sqrt()
        }
    }
}

/// Mean and standard deviation over unflagged realizations.
pub fn summarize(delta: f64, kind: DisorderKind, outcomes: &[RealizationOutcome]) -> DisorderScanRow {
    let used: Vec<f64> = outcomes.iter().filter(|o| !o.flagged).map(|o| o.fidelity).collect();
    let n = used.len();
    let mean = if n > 0 { used.iter().sum::<f64>() / n as f64 } else { f64::NAN };
    let std = if n > 1 {
        (used.iter().map(|f| (f - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
    } else {
        0.0
    };
    DisorderScanRow {
        delta,
        kind,
        mean_fidelity: mean,
        std_fidelity: std,
        n_used: n,
        n_flagged: outcomes.len() - n,
    }
}

/// Monte Carlo average of the BIC fidelity over each width in `delta_grid`.
///
/// `disorder.delta` is ignored; every grid width draws fresh streams.
pub fn disorder_fidelity_scan(
    base: &SystemSpec,
    disorder: &DisorderSpec,
    delta_grid: &[f64],
    opts: &ClassifyOptions,
) -> Result<Vec<DisorderScanRow>> {
    delta_grid
        .iter()
        .map(|&delta| {
            let spec = DisorderSpec { delta, ..*disorder };
            let outcomes = realizations(base, &spec, opts)?;
            Ok(summarize(delta, disorder.kind, &outcomes))
        })
        .collect()
}
