//! Dataset generation for each figure panel.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use nalgebra::DVector;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use super::configs::{NamedConfiguration, DEFAULT_G, DEFAULT_N_SITES};
use super::protocol::{bell_protocol, w_protocol, ProtocolOptions, ProtocolResult, ReleaseTime};
use crate::disorder::{disorder_fidelity_scan, DisorderKind, DisorderScanRow, DisorderSpec};
use crate::error::{Error, Result};
use crate::io::{fmt_f64, Metadata, OutputDir, Table};
use crate::lindblad::{evolve, lindblad_generator, CouplingKernel, IntegratorOptions, Target, Trajectory, EXCITATION};
use crate::model::SystemSpec;
use crate::spectral::{
    self, bell_state, conditioned_atomic_density, single_excitation_vector, spectrum_sweep, AtomicDensityMatrix,
    ClassifyOptions, StateKind,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum FigureName {
    Fig2a,
    Fig2b,
    Fig3,
    Fig4a,
    Fig4b,
    Fig5a,
    Fig5b,
    Fig6b,
    Fig6c,
}

impl FigureName {
    pub const ALL: [FigureName; 9] = [
        FigureName::Fig2a,
        FigureName::Fig2b,
        FigureName::Fig3,
        FigureName::Fig4a,
        FigureName::Fig4b,
        FigureName::Fig5a,
        FigureName::Fig5b,
        FigureName::Fig6b,
        FigureName::Fig6c,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            FigureName::Fig2a => "fig2a",
            FigureName::Fig2b => "fig2b",
            FigureName::Fig3 => "fig3",
            FigureName::Fig4a => "fig4a",
            FigureName::Fig4b => "fig4b",
            FigureName::Fig5a => "fig5a",
            FigureName::Fig5b => "fig5b",
            FigureName::Fig6b => "fig6b",
            FigureName::Fig6c => "fig6c",
        }
    }
}

impl fmt::Display for FigureName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FigureName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|n| n.name() == s)
            .ok_or_else(|| Error::UnknownFigure(s.to_string()))
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct FigureOptions {
    pub seed: u64,
    pub n_sites: usize,
    pub g: f64,
    pub n_realizations: usize,
    pub delta_grid: Vec<f64>,
    pub g_grid: Vec<f64>,
    pub etas: Vec<f64>,
    pub t_end: f64,
    pub dt: f64,
    /// Horizon of the stability comparison.
    pub stability_t_end: f64,
    /// Eigenstate index of the scattering initial state; `None` picks one.
    pub scattering_index: Option<usize>,
}

impl Default for FigureOptions {
    fn default() -> Self {
        Self {
            seed: 0,
            n_sites: DEFAULT_N_SITES,
            g: DEFAULT_G,
            n_realizations: 50,
            delta_grid: (0..=10).map(|k| k as f64 / 50.0).collect(),
            g_grid: (0..=50).map(|k| k as f64 / 50.0).collect(),
            etas: vec![0.01, 0.05],
            t_end: super::protocol::DEFAULT_T_END,
            dt: 1.0,
            stability_t_end: 1000.0,
            scattering_index: None,
        }
    }
}

/// Tables and summary values for one figure.
#[derive(Debug, Clone, Default)]
pub struct FigureData {
    pub panels: Vec<(String, Table)>,
    pub summary: serde_json::Map<String, serde_json::Value>,
}

impl FigureData {
    fn panel(&mut self, name: &str, table: Table) {
        self.panels.push((name.to_string(), table));
    }

    fn note<T: Serialize>(&mut self, key: &str, value: T) {
        self.summary
            .insert(key.to_string(), serde_json::to_value(value).expect("serializable summary"));
    }
}

/// Atomic state chosen as the scattering initial condition.
#[derive(Debug, Clone)]
pub struct ScatteringChoice {
    pub index: usize,
    pub energy: f64,
    pub state: DVector<Complex64>,
    /// Weight of the normalized atomic state in the null space of Γ.
    pub dark_weight: f64,
}

fn dark_weight(kernel: &CouplingKernel, amps: &[Complex64]) -> f64 {
    let g = kernel.gamma_matrix().map(|x| Complex64::new(x, 0.0));
    let (vals, vecs) = spectral::density::hermitian_eigen(&g);
    let scale = vals.iter().fold(0.0f64, |a, v| a.max(v.abs())).max(1e-300);
    let a = DVector::from_column_slice(amps);
    vals.iter()
        .enumerate()
        .filter(|(_, v)| v.abs() <= 1e-12 * scale)
        .map(|(k, _)| vecs.column(k).dotc(&a).norm_sqr())
        .sum()
}

/// In-band scattering eigenstate nearest `E = ω_c + ξ` whose atomic part is
/// mostly bright (dark weight ≤ 1/2), so that it decays under the master
/// equation. `index` forces a specific eigenstate instead.
pub fn scattering_initial_state(
    spec: &SystemSpec,
    kernel: &CouplingKernel,
    opts: &ClassifyOptions,
    index: Option<usize>,
) -> Result<ScatteringChoice> {
    let m = spec.n_atoms();
    let mut pairs = spectral::solve(spec)?;
    let class = spectral::classify_states(&mut pairs, spec, opts);
    let e_ref = spec.waveguide.omega_c + spec.waveguide.xi;
    let pick = |k: usize| -> Result<ScatteringChoice> {
        let rho = conditioned_atomic_density(&pairs[k].state, m)?;
        let w = pairs[k].state.atomic_weight().sqrt();
        let amps: Vec<Complex64> = pairs[k].state.atomic_amps.iter().map(|c| c / w).collect();
        debug_assert!((rho.trace() - 1.0).abs() < 1e-10);
        Ok(ScatteringChoice {
            index: k,
            energy: pairs[k].energy,
            dark_weight: dark_weight(kernel, &amps),
            state: single_excitation_vector(&amps),
        })
    };
    if let Some(k) = index {
        if k >= pairs.len() {
            return Err(Error::Config(format!("scattering index {k} out of range")));
        }
        return pick(k);
    }
    let mut candidates: Vec<usize> = class
        .indices(StateKind::Scattering)
        .into_iter()
        .filter(|&k| {
            !class.classes[k].decoupled_atom
                && class.edges.contains(pairs[k].energy)
                && pairs[k].state.atomic_weight() > 1e-6
        })
        .collect();
    candidates.sort_by(|&a, &b| (pairs[a].energy - e_ref).abs().total_cmp(&(pairs[b].energy - e_ref).abs()));
    for k in candidates {
        let choice = pick(k)?;
        if choice.dark_weight <= 0.5 {
            return Ok(choice);
        }
    }
    Err(Error::WrongConfiguration {
        name: format!("{m} atoms"),
        reason: "no bright in-band scattering state".into(),
    })
}

fn grid(t_end: f64, dt: f64) -> Vec<f64> {
    let n = (t_end / dt).round() as usize;
    (0..=n).map(|k| t_end * k as f64 / n as f64).collect()
}

/// Fig. 2(a): eigenvalues against coupling strength, braided pair.
fn fig2a(opts: &FigureOptions) -> Result<FigureData> {
    let template = NamedConfiguration::Braided2.resolve(opts.n_sites, opts.g)?;
    let rows = spectrum_sweep(&template, &opts.g_grid, &ClassifyOptions::default())?;
    let mut table = Table::new(["g", "index", "energy", "kind", "localization"]);
    let mut counts = Vec::new();
    for row in &rows {
        for (k, (e, c)) in row.energies.iter().zip(&row.classes).enumerate() {
            table.push(vec![
                fmt_f64(row.g),
                k.to_string(),
                fmt_f64(*e),
                c.kind.to_string(),
                fmt_f64(c.localization_metric),
            ]);
        }
        let n_bic = row.classes.iter().filter(|c| c.kind == StateKind::Bic).count();
        counts.push((row.g, n_bic));
    }
    let mut data = FigureData::default();
    data.panel("spectrum", table);
    data.note("bic_count_by_g", counts);
    Ok(data)
}

fn disorder_table(rows: &[DisorderScanRow]) -> Table {
    let mut t = Table::new(["delta", "kind", "mean_F", "std_F", "n_used", "n_flagged"]);
    for r in rows {
        t.push(vec![
            fmt_f64(r.delta),
            r.kind.to_string(),
            fmt_f64(r.mean_fidelity),
            fmt_f64(r.std_fidelity),
            r.n_used.to_string(),
            r.n_flagged.to_string(),
        ]);
    }
    t
}

/// Fig. 2(b): disorder-averaged BIC fidelity for both disorder kinds.
fn fig2b(opts: &FigureOptions) -> Result<FigureData> {
    let base = NamedConfiguration::Braided2.resolve(opts.n_sites, opts.g)?;
    let mut rows = Vec::new();
    for kind in [DisorderKind::Onsite, DisorderKind::Hopping] {
        let spec = DisorderSpec {
            n_realizations: opts.n_realizations,
            ..DisorderSpec::new(kind, 0.0, opts.seed)
        };
        rows.extend(disorder_fidelity_scan(&base, &spec, &opts.delta_grid, &ClassifyOptions::default())?);
    }
    let mut data = FigureData::default();
    data.panel("disorder", disorder_table(&rows));
    data.note("master_seed", opts.seed);
    Ok(data)
}

/// Fig. 3: master-equation fidelity from the BIC and from a scattering state.
pub fn stability_curves(opts: &FigureOptions) -> Result<(Trajectory, Trajectory, ScatteringChoice)> {
    let spec = NamedConfiguration::Braided2.resolve(opts.n_sites, opts.g)?;
    let kernel = NamedConfiguration::Braided2.kernel(opts.g);
    let copts = ClassifyOptions::default();
    let mut pairs = spectral::solve(&spec)?;
    let class = spectral::classify_states(&mut pairs, &spec, &copts);
    let bic = class
        .indices(StateKind::Bic)
        .into_iter()
        .min_by(|&a, &b| class.classes[a].localization_metric.total_cmp(&class.classes[b].localization_metric))
        .ok_or_else(|| Error::WrongConfiguration {
            name: "braided2".into(),
            reason: "no BIC".into(),
        })?;
    let rho_bic = conditioned_atomic_density(&pairs[bic].state, 2)?;
    let scat = scattering_initial_state(&spec, &kernel, &copts, opts.scattering_index)?;
    let rho_scat = AtomicDensityMatrix::pure(2, &scat.state)?;

    let gen = lindblad_generator(&kernel, None, 0.0, 0.0)?;
    let times = grid(opts.stability_t_end, opts.dt);
    let iopts = IntegratorOptions::default();
    let bic_traj = evolve(&rho_bic, &gen, &times, &[Target::new("bell", bell_state())], &iopts)?;
    let scat_traj = evolve(
        &rho_scat,
        &gen,
        &times,
        &[Target::new("initial", scat.state.clone())],
        &iopts,
    )?;
    Ok((bic_traj, scat_traj, scat))
}

fn fig3(opts: &FigureOptions) -> Result<FigureData> {
    let (bic, scat, choice) = stability_curves(opts)?;
    let fb = bic.fidelity("bell").expect("tracked");
    let fs = scat.fidelity("initial").expect("tracked");
    let mut table = Table::new(["t", "F_bic", "F_scattering"]);
    for (k, &t) in bic.times.iter().enumerate() {
        table.push_floats(&[t, fb[k], fs[k]]);
    }
    let mut data = FigureData::default();
    data.panel("stability", table);
    data.note("scattering_index", choice.index);
    data.note("scattering_energy", choice.energy);
    data.note("scattering_dark_weight", choice.dark_weight);
    Ok(data)
}

fn protocol_table(results: &[ProtocolResult], with_populations: bool) -> Table {
    let n_atoms = results[0].trajectory.states[0].n_atoms();
    let mut header = vec!["t".to_string()];
    for r in results {
        header.push(format!("F_eta{}", r.metadata.eta));
        if with_populations {
            header.push(format!("n_eta{}", r.metadata.eta));
            for i in 0..n_atoms {
                header.push(format!("p{}_eta{}", i + 1, r.metadata.eta));
            }
        }
    }
    let mut table = Table::new(header);
    // Protocols may insert their release times; tabulate on the shared grid.
    let times: Vec<f64> = results[0]
        .trajectory
        .times
        .iter()
        .copied()
        .filter(|t| results.iter().all(|r| r.trajectory.times.binary_search_by(|x| x.total_cmp(t)).is_ok()))
        .collect();
    for t in times {
        let mut row = vec![t];
        for r in results {
            let k = r.trajectory.times.binary_search_by(|x| x.total_cmp(&t)).expect("shared time");
            row.push(r.fidelity()[k]);
            if with_populations {
                let rho = &r.trajectory.states[k];
                row.push(r.trajectory.observable(EXCITATION).expect("tracked")[k]);
                for i in 0..n_atoms {
                    row.push(rho.population(crate::spectral::excited_index(i, n_atoms)));
                }
            }
        }
        table.push_floats(&row);
    }
    table
}

fn summary_table(results: &[ProtocolResult]) -> Table {
    let mut t = Table::new(["configuration", "eta", "t_drive", "t_max", "F_max", "F_final"]);
    for r in results {
        t.push(vec![
            r.metadata.configuration.clone(),
            fmt_f64(r.metadata.eta),
            r.t_drive.map_or_else(|| "inf".to_string(), fmt_f64),
            fmt_f64(r.t_max),
            fmt_f64(r.f_max),
            fmt_f64(r.f_final),
        ]);
    }
    t
}

fn protocol_opts(opts: &FigureOptions, eta: f64, release: ReleaseTime) -> ProtocolOptions {
    ProtocolOptions {
        t_end: opts.t_end,
        dt: opts.dt,
        coupling: opts.g,
        ..ProtocolOptions::new(eta, release)
    }
}

fn run_etas(
    config: NamedConfiguration,
    opts: &FigureOptions,
    etas: &[f64],
    release: ReleaseTime,
) -> Result<Vec<ProtocolResult>> {
    etas.par_iter()
        .map(|&eta| {
            let p = protocol_opts(opts, eta, release);
            if config.n_atoms() == 3 {
                w_protocol(config, &p)
            } else {
                bell_protocol(config, &p)
            }
        })
        .collect()
}

fn protocol_figure(
    config: NamedConfiguration,
    opts: &FigureOptions,
    etas: &[f64],
    panels: &[(&str, ReleaseTime, bool)],
) -> Result<FigureData> {
    let mut data = FigureData::default();
    let mut all = Vec::new();
    for &(name, release, pops) in panels {
        let results = run_etas(config, opts, etas, release)?;
        data.panel(name, protocol_table(&results, pops));
        all.extend(results);
    }
    data.panel("summary", summary_table(&all));
    Ok(data)
}

/// Build every panel of one figure in memory.
pub fn figure_data(name: FigureName, opts: &FigureOptions) -> Result<FigureData> {
    let first_eta = &opts.etas[..opts.etas.len().min(1)];
    match name {
        FigureName::Fig2a => fig2a(opts),
        FigureName::Fig2b => fig2b(opts),
        FigureName::Fig3 => fig3(opts),
        FigureName::Fig4a => protocol_figure(
            NamedConfiguration::Braided2,
            opts,
            first_eta,
            &[("continuous", ReleaseTime::Continuous, true), ("released", ReleaseTime::Auto, true)],
        ),
        FigureName::Fig4b => protocol_figure(
            NamedConfiguration::Braided2,
            opts,
            &opts.etas,
            &[("released", ReleaseTime::Auto, false)],
        ),
        FigureName::Fig5a => protocol_figure(
            NamedConfiguration::Separate2,
            opts,
            &opts.etas,
            &[("released", ReleaseTime::Auto, true)],
        ),
        FigureName::Fig5b => protocol_figure(
            NamedConfiguration::Nested2,
            opts,
            &opts.etas,
            &[("released", ReleaseTime::Auto, true)],
        ),
        FigureName::Fig6b => protocol_figure(
            NamedConfiguration::Braided3,
            opts,
            first_eta,
            &[("released", ReleaseTime::Auto, true)],
        ),
        FigureName::Fig6c => protocol_figure(
            NamedConfiguration::Braided3,
            opts,
            &opts.etas,
            &[("released", ReleaseTime::Auto, false)],
        ),
    }
}

/// Write `<out_root>/<figure>/<panel>.csv` and `metadata.json`.
pub fn reproduce_figure(name: FigureName, opts: &FigureOptions, out_root: &Path) -> Result<PathBuf> {
    if opts.etas.is_empty() {
        return Err(Error::Config("at least one drive strength is required".into()));
    }
    let start = Instant::now();
    let data = figure_data(name, opts)?;
    let mut out = OutputDir::new(out_root.join(name.name()))?;
    for (panel, table) in &data.panels {
        out.write_table(panel, table)?;
    }
    let mut meta = Metadata::new("figure", &serde_json::json!({ "figure": name, "options": opts }), Some(opts.seed))?;
    meta.wall_time_s = start.elapsed().as_secs_f64();
    meta.extra = serde_json::Value::Object(data.summary);
    out.finish(meta)
}
