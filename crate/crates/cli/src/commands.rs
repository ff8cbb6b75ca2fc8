use std::path::Path;
use std::time::Instant;

use gbic_core::config::{ReleaseKeyword, ReleaseSetting, RunConfig};
use gbic_core::disorder::disorder_fidelity_scan;
use gbic_core::experiments::oracle::calibrate;
use gbic_core::experiments::{
    reproduce_figure, run_protocol, FigureName, FigureOptions, ProtocolResult,
};
use gbic_core::io::{fmt_f64, Metadata, OutputDir, Table};
use gbic_core::lindblad::{
    evolve, lindblad_generator, DriveSpec, IntegratorOptions, Target, EXCITATION,
};
use gbic_core::spectral::{
    bic_report, entangled_target, excited_index, spectrum_sweep, w_state, bell_state, ClassifyOptions,
    StateKind,
};
use gbic_core::{Error, Result};

use crate::Command;

fn load(config: Option<&Path>, overrides: &[String]) -> Result<RunConfig> {
    match config {
        Some(p) => RunConfig::load(p, overrides),
        None => RunConfig::with_overrides("", overrides),
    }
}

struct Run {
    name: &'static str,
    cfg: RunConfig,
    out: OutputDir,
    start: Instant,
    summary: serde_json::Map<String, serde_json::Value>,
}

impl Run {
    fn table(&mut self, name: &str, table: &Table) -> Result<()> {
        self.out.write_table(name, table)?;
        Ok(())
    }

    fn note(&mut self, key: &str, value: impl serde::Serialize) {
        self.summary
            .insert(key.to_string(), serde_json::to_value(value).expect("serializable"));
    }

    fn finish(self) -> Result<()> {
        let spec = self.cfg.system_spec()?;
        let resolved = serde_json::json!({ "config": self.cfg, "system": spec });
        let mut meta = Metadata::new(self.name, &resolved, Some(self.cfg.seed))?;
        meta.wall_time_s = self.start.elapsed().as_secs_f64();
        meta.extra = serde_json::Value::Object(self.summary);
        let path = self.out.finish(meta)?;
        println!("wrote {}", path.parent().unwrap_or(&path).display());
        Ok(())
    }
}

pub fn run(command: &Command, config: Option<&Path>, overrides: &[String], out: &Path) -> Result<()> {
    let cfg = load(config, overrides)?;
    if let Command::Figure { name } = command {
        return figure(name, &cfg, out);
    }
    let mut run = Run {
        name: command.name(),
        out: OutputDir::new(out.join(command.name()))?,
        cfg,
        start: Instant::now(),
        summary: serde_json::Map::new(),
    };
    match command {
        Command::Spectrum => spectrum(&mut run)?,
        Command::Bic => bic(&mut run)?,
        Command::Disorder => disorder(&mut run)?,
        Command::Evolve => evolve_cmd(&mut run)?,
        Command::Bell => protocol(&mut run, 2)?,
        Command::Wstate => protocol(&mut run, 3)?,
        Command::Calibrate => calibrate_cmd(&mut run)?,
        Command::Figure { .. } => unreachable!(),
    }
    run.finish()
}

fn spectrum(run: &mut Run) -> Result<()> {
    let spec = run.cfg.system_spec()?;
    let rows = spectrum_sweep(&spec, &run.cfg.experiment.g_grid, &ClassifyOptions::default())?;
    let mut table = Table::new(["g", "index", "energy", "kind", "localization"]);
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
        let count = |k| row.classes.iter().filter(|c| c.kind == k).count();
        println!(
            "g = {:.4}: {} BIC, {} BOC above, {} BOC below",
            row.g,
            count(StateKind::Bic),
            count(StateKind::BocAbove),
            count(StateKind::BocBelow)
        );
    }
    run.table("spectrum", &table)
}

fn bic(run: &mut Run) -> Result<()> {
    let spec = run.cfg.system_spec()?;
    let mut table = Table::new([
        "n_bic",
        "n_boc_above",
        "n_boc_below",
        "energy",
        "localization",
        "atomic_weight",
        "fidelity",
        "fidelity_partial_trace",
    ]);
    match bic_report(&spec, &ClassifyOptions::default())? {
        Some(r) => {
            println!("BIC energy            {:.12}", r.energy);
            println!("localization metric   {:.3e}", r.localization_metric);
            println!("atomic weight         {:.12}", r.atomic_weight);
            println!("F(rho_BIC, target)    {:.12}", r.fidelity);
            println!("F (partial trace)     {:.12}", r.fidelity_partial_trace);
            println!("BIC / BOC+ / BOC-     {} / {} / {}", r.n_bic, r.n_boc_above, r.n_boc_below);
            table.push(vec![
                r.n_bic.to_string(),
                r.n_boc_above.to_string(),
                r.n_boc_below.to_string(),
                fmt_f64(r.energy),
                fmt_f64(r.localization_metric),
                fmt_f64(r.atomic_weight),
                fmt_f64(r.fidelity),
                fmt_f64(r.fidelity_partial_trace),
            ]);
            run.note("bic", &r);
        }
        None => println!("no BIC found"),
    }
    run.table("bic", &table)
}

fn disorder(run: &mut Run) -> Result<()> {
    let spec = run.cfg.system_spec()?;
    let grid = run.cfg.delta_grid();
    let mut table = Table::new(["delta", "kind", "mean_F", "std_F", "n_used", "n_flagged"]);
    for kind in run.cfg.disorder_kinds() {
        let rows = disorder_fidelity_scan(&spec, &run.cfg.disorder_spec(kind), &grid, &ClassifyOptions::default())?;
        for r in rows {
            println!(
                "{:<8} delta = {:.4}: F = {:.6} ± {:.6} ({} used, {} flagged)",
                r.kind, r.delta, r.mean_fidelity, r.std_fidelity, r.n_used, r.n_flagged
            );
            table.push(vec![
                fmt_f64(r.delta),
                r.kind.to_string(),
                fmt_f64(r.mean_fidelity),
                fmt_f64(r.std_fidelity),
                r.n_used.to_string(),
                r.n_flagged.to_string(),
            ]);
        }
    }
    let seed = run.cfg.seed;
    run.note("master_seed", seed);
    run.table("disorder", &table)
}

fn time_grid(t_end: f64, dt: f64) -> Result<Vec<f64>> {
    if !(t_end > 0.0) || !(dt > 0.0) || !t_end.is_finite() {
        return Err(Error::InvalidGrid(format!("bad horizon t_end={t_end} dt={dt}")));
    }
    let n = (t_end / dt).round().max(1.0) as usize;
    Ok((0..=n).map(|k| t_end * k as f64 / n as f64).collect())
}

fn evolve_cmd(run: &mut Run) -> Result<()> {
    let cfg = &run.cfg;
    let kernel = cfg.kernel()?;
    let m = kernel.n_atoms();
    let d = &cfg.drive;
    // The evolve command only drives for an explicit release time or forever.
    let drive = match d.t0 {
        ReleaseSetting::Time(t0) => Some(DriveSpec::continuous(d.target_atom, d.eta, 0.0).until(t0)),
        ReleaseSetting::Keyword(ReleaseKeyword::Continuous) => Some(DriveSpec::continuous(d.target_atom, d.eta, 0.0)),
        ReleaseSetting::Keyword(ReleaseKeyword::Auto) => None,
    };
    let gen = lindblad_generator(&kernel, drive, 0.0, 0.0)?;
    let rho0 = cfg.experiment.initial.density(m)?;
    let targets: Vec<Target> = entangled_target(m).map(|s| Target::new("target", s)).into_iter().collect();
    let grid = time_grid(cfg.experiment.t_end, cfg.experiment.dt)?;
    let traj = evolve(&rho0, &gen, &grid, &targets, &IntegratorOptions::default())?;

    let mut header = vec!["t".to_string(), "trace".into(), "excitation".into()];
    if !targets.is_empty() {
        header.push("F_target".into());
    }
    header.extend((0..m).map(|i| format!("p{}", i + 1)));
    let mut table = Table::new(header);
    for (k, &t) in traj.times.iter().enumerate() {
        let mut row = vec![t, traj.observable("trace").unwrap()[k], traj.observable(EXCITATION).unwrap()[k]];
        if let Some(f) = traj.fidelity("target") {
            row.push(f[k]);
        }
        row.extend((0..m).map(|i| traj.states[k].population(excited_index(i, m))));
        table.push_floats(&row);
    }
    let (h, tr, neg) = traj.invariant_violation();
    println!("{} samples to t = {}", traj.len(), grid.last().unwrap());
    println!("max |rho - rho^dag| {h:.2e}, max |tr - 1| {tr:.2e}, max negativity {neg:.2e}");
    if let Some(f) = traj.fidelity("target") {
        println!("final fidelity {:.12}", f.last().unwrap());
    }
    run.note("invariants", [h, tr, neg]);
    run.table("trajectory", &table)
}

fn protocol_tables(r: &ProtocolResult) -> (Table, Table) {
    let m = r.trajectory.states[0].n_atoms();
    let mut header = vec!["t".to_string(), "F".into(), "excitation".into()];
    header.extend((0..m).map(|i| format!("p{}", i + 1)));
    let mut traj = Table::new(header);
    let f = r.fidelity();
    let n = r.trajectory.observable(EXCITATION).unwrap();
    for (k, &t) in r.trajectory.times.iter().enumerate() {
        let mut row = vec![t, f[k], n[k]];
        row.extend((0..m).map(|i| r.trajectory.states[k].population(excited_index(i, m))));
        traj.push_floats(&row);
    }
    let mut summary = Table::new(["configuration", "eta", "t_drive", "t_max", "F_max", "F_final"]);
    summary.push(vec![
        r.metadata.configuration.clone(),
        fmt_f64(r.metadata.eta),
        r.t_drive.map_or_else(|| "inf".into(), fmt_f64),
        fmt_f64(r.t_max),
        fmt_f64(r.f_max),
        fmt_f64(r.f_final),
    ]);
    (traj, summary)
}

fn protocol(run: &mut Run, n_atoms: usize) -> Result<()> {
    let cfg = &run.cfg;
    let kernel = cfg.kernel()?;
    let name = cfg.configuration().map_or("custom", |c| c.name());
    if kernel.n_atoms() != n_atoms {
        return Err(Error::WrongConfiguration {
            name: name.to_string(),
            reason: format!("protocol needs {n_atoms} atoms, configuration has {}", kernel.n_atoms()),
        });
    }
    let (target_name, target) = if n_atoms == 2 { ("bell", bell_state()) } else { ("w", w_state()) };
    let r = run_protocol(name, &kernel, target_name, &target, &cfg.protocol_options())?;
    match r.t_drive {
        Some(t0) => println!("drive released at t = {t0:.4}"),
        None => println!("continuous drive"),
    }
    println!("t_max = {:.4}, F_max = {:.12}", r.t_max, r.f_max);
    println!("F(t = {}) = {:.12}", r.metadata.t_end, r.f_final);
    let (traj, summary) = protocol_tables(&r);
    run.note("protocol", &r.metadata);
    run.table("trajectory", &traj)?;
    run.table("summary", &summary)
}

fn calibrate_cmd(run: &mut Run) -> Result<()> {
    let e = &run.cfg.experiment;
    let (report, samples) = calibrate(&e.calibration_legs, e.calibration_g, e.calibration_t_end, 0.5)?;
    println!("legs {:?}, g = {}", report.legs, report.g);
    println!("max |P_exact - P_master| = {:.6}", report.max_abs_diff);
    println!(
        "fitted prefactor {:.6e}, g^2/2 = {:.6e}, ratio {:.6}",
        report.fitted_prefactor, report.expected_prefactor, report.ratio
    );
    let within = (report.ratio - 1.0).abs() <= 0.02 && report.max_abs_diff <= 0.01;
    println!("{}", if within { "consistent with g^2/(2 xi)" } else { "outside tolerance (2% / 0.01)" });
    let mut table = Table::new(["t", "P_exact", "P_master"]);
    for s in &samples {
        table.push_floats(&[s.t, s.exact, s.master]);
    }
    run.note("calibration", &report);
    run.table("calibration", &table)
}

fn figure(name: &str, cfg: &RunConfig, out: &Path) -> Result<()> {
    let figure: FigureName = name.parse()?;
    let defaults = FigureOptions::default();
    let opts = FigureOptions {
        seed: cfg.seed,
        n_sites: cfg.waveguide.n_sites,
        g: cfg.experiment.g,
        n_realizations: cfg.disorder.n_realizations,
        delta_grid: cfg.disorder.delta_grid.clone().unwrap_or(defaults.delta_grid),
        g_grid: cfg.experiment.g_grid.clone(),
        t_end: cfg.experiment.t_end,
        dt: cfg.experiment.dt,
        scattering_index: cfg.experiment.scattering_index,
        ..defaults
    };
    let path = reproduce_figure(figure, &opts, out)?;
    println!("wrote {}", path.parent().unwrap_or(&path).display());
    Ok(())
}
