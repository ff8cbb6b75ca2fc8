//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs without the libtest harness so every line is printed; the process
//! exits non-zero when any criterion fails.

use std::fs;
use std::path::Path;

use approx::abs_diff_eq;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestRng, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use gbic_core::disorder::{realizations, summarize, DisorderKind, DisorderSpec};
use gbic_core::experiments::oracle::calibrate;
use gbic_core::experiments::{
    bell_protocol, find_optimal_duration, released_fidelity, reproduce_figure, stability_curves, w_protocol,
    FigureName, FigureOptions, NamedConfiguration, ProtocolOptions, ReleaseTime,
};
use gbic_core::lindblad::{IntegratorOptions, Trajectory};
use gbic_core::spectral::{
    bell_state, bic_report, pure_state_fidelity, uhlmann_fidelity, w_state, AtomicDensityMatrix, ClassifyOptions,
};

const SEED: u64 = 20_240_611;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

/// Criterion 1: kernel prefactor from the exact two-leg dynamics.
fn prefactor_calibration() -> Outcome {
    let (two_leg, _) = calibrate(&[0, 8], 0.1, 50.0, 0.5).expect("calibration runs");
    let (one_leg, _) = calibrate(&[0], 0.1, 50.0, 0.5).expect("calibration runs");
    let pass = two_leg.max_abs_diff <= 0.01 && (two_leg.ratio - 1.0).abs() <= 0.02;
    outcome(
        pass,
        format!(
            "two-leg n=8, g=0.1: max|dP| = {:.4} (<= 0.01), prefactor ratio = {:.4} (1 ± 0.02); \
             one-leg reference: max|dP| = {:.4}, ratio = {:.4}",
            two_leg.max_abs_diff, two_leg.ratio, one_leg.max_abs_diff, one_leg.ratio
        ),
    )
}

/// Criterion 2: one BIC and two BOCs per two-atom configuration.
fn bic_census() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for c in NamedConfiguration::TWO_ATOM {
        let spec = c.resolve(201, 0.5).unwrap();
        let r = bic_report(&spec, &ClassifyOptions::default()).unwrap();
        let (n_bic, above, below) = r.as_ref().map_or((0, 0, 0), |r| (r.n_bic, r.n_boc_above, r.n_boc_below));
        let ok = n_bic == 1 && above + below == 2;
        pass &= ok;
        parts.push(format!("{c}: {n_bic} BIC, {above}+{below} BOC{}", if ok { "" } else { " (!)" }));
    }
    outcome(pass, parts.join("; "))
}

/// Criterion 3: BIC fidelity with the Bell state.
fn bic_bell_fidelity() -> Outcome {
    let spec = NamedConfiguration::Braided2.resolve(201, 0.5).unwrap();
    let r = bic_report(&spec, &ClassifyOptions::default()).unwrap().expect("braided pair has a BIC");
    outcome(
        r.fidelity >= 0.99,
        format!(
            "F = {:.12} (>= 0.99); full partial trace gives {:.6}",
            r.fidelity, r.fidelity_partial_trace
        ),
    )
}

/// Criterion 4: disorder-averaged fidelity at δ = 0.2ξ.
fn disorder_robustness() -> Outcome {
    let base = NamedConfiguration::Braided2.resolve(201, 0.5).unwrap();
    let run = |kind| {
        let spec = DisorderSpec::new(kind, 0.2, SEED);
        let out = realizations(&base, &spec, &ClassifyOptions::default()).unwrap();
        summarize(0.2, kind, &out)
    };
    let on = run(DisorderKind::Onsite);
    let hop = run(DisorderKind::Hopping);
    let slack = 2.0 * (on.standard_error().powi(2) + hop.standard_error().powi(2)).sqrt();
    let above = on.mean_fidelity >= 0.96 && hop.mean_fidelity >= 0.96;
    let ordered = hop.mean_fidelity >= on.mean_fidelity - slack;
    outcome(
        above && ordered,
        format!(
            "onsite {:.6} ± {:.6} (n={}, flagged {}), hopping {:.6} ± {:.6} (n={}, flagged {}); \
             both >= 0.96: {above}; hopping >= onsite within 2 s.e. ({:.2e}): {ordered} \
             (raw difference {:+.2e})",
            on.mean_fidelity,
            on.std_fidelity,
            on.n_used,
            on.n_flagged,
            hop.mean_fidelity,
            hop.std_fidelity,
            hop.n_used,
            hop.n_flagged,
            slack,
            hop.mean_fidelity - on.mean_fidelity
        ),
    )
}

/// Criterion 5: BIC-initialized dynamics frozen, scattering state decays.
fn bic_stability(trajectories: &mut Vec<Trajectory>) -> Outcome {
    let (bic, scat, choice) = stability_curves(&FigureOptions::default()).unwrap();
    let fb = bic.fidelity("bell").unwrap();
    let fs = scat.fidelity("initial").unwrap();
    let dev = fb.iter().map(|f| (f - 1.0).abs()).fold(0.0, f64::max);
    let fs_final = *fs.last().unwrap();
    let t_end = *bic.times.last().unwrap();
    trajectories.push(bic);
    trajectories.push(scat);
    outcome(
        dev <= 1e-6 && fs_final < 0.1,
        format!(
            "max |F_bic - 1| over [0, {t_end}] = {dev:.2e} (<= 1e-6); scattering state #{} (E = {:.4}) ends at F = {fs_final:.2e} (< 0.1)",
            choice.index, choice.energy
        ),
    )
}

fn protocol_opts(eta: f64) -> ProtocolOptions {
    ProtocolOptions::new(eta, ReleaseTime::Auto)
}

/// Criterion 6: Bell protocol in the braided configuration.
fn bell_protocol_braided(trajectories: &mut Vec<Trajectory>) -> Outcome {
    let slow = bell_protocol(NamedConfiguration::Braided2, &protocol_opts(0.01)).unwrap();
    let fast = bell_protocol(NamedConfiguration::Braided2, &protocol_opts(0.05)).unwrap();
    let t_ok = (slow.t_max - 223.0).abs() <= 0.05 * 223.0;
    let pass = t_ok
        && slow.f_max >= 0.99
        && slow.f_final >= 0.99
        && fast.f_final >= 0.95
        && fast.t_max < slow.t_max;
    let detail = format!(
        "eta=0.01: t_max = {:.3} (223 ± 5%), F_max = {:.6}, F(2000) = {:.6}; eta=0.05: t_max = {:.3}, F(2000) = {:.6}",
        slow.t_max, slow.f_max, slow.f_final, fast.t_max, fast.f_final
    );
    trajectories.push(slow.trajectory);
    trajectories.push(fast.trajectory);
    outcome(pass, detail)
}

/// Criterion 7: Bell protocol in the separate and nested configurations.
fn bell_protocol_other(trajectories: &mut Vec<Trajectory>) -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for c in [NamedConfiguration::Separate2, NamedConfiguration::Nested2] {
        let r = bell_protocol(c, &protocol_opts(0.01)).unwrap();
        pass &= r.f_final >= 0.98;
        parts.push(format!("{c}: t_max = {:.3}, F(2000) = {:.6}", r.t_max, r.f_final));
        trajectories.push(r.trajectory);
    }
    outcome(pass, format!("{} (>= 0.98)", parts.join("; ")))
}

/// Criterion 8: W protocol and the dark-projection check.
fn w_protocol_braided3(trajectories: &mut Vec<Trajectory>) -> Outcome {
    let slow = w_protocol(NamedConfiguration::Braided3, &protocol_opts(0.01)).unwrap();
    let fast = w_protocol(NamedConfiguration::Braided3, &protocol_opts(0.05)).unwrap();
    let kernel = NamedConfiguration::Braided3.kernel(0.5);
    let w = AtomicDensityMatrix::pure(3, &w_state()).unwrap();
    let forced = released_fidelity(&kernel, &w, &w_state(), 2000.0, &IntegratorOptions::default()).unwrap();
    let spread = (slow.f_final - fast.f_final).abs();
    let pass = slow.f_final >= 0.85 && spread < 0.02 && (forced - 8.0 / 9.0).abs() <= 1e-3;
    let detail = format!(
        "F_W(2000): eta=0.01 {:.6} (>= 0.85), eta=0.05 {:.6}, spread {:.4} (< 0.02); forced |W> release {:.6} (8/9 ± 1e-3)",
        slow.f_final, fast.f_final, spread, forced
    );
    trajectories.push(slow.trajectory);
    trajectories.push(fast.trajectory);
    outcome(pass, detail)
}

fn random_density(rng: &mut impl Rng, n_atoms: usize, rank: usize) -> AtomicDensityMatrix {
    let d = 1 << n_atoms;
    let a = DMatrix::from_fn(d, rank, |_, _| {
        Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
    });
    let m = &a * a.adjoint();
    let tr = m.trace();
    AtomicDensityMatrix::new(n_atoms, m / tr).unwrap()
}

/// Criterion 9: invariants of trajectories, kernels and fidelities.
fn invariant_suite(trajectories: &[Trajectory]) -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();

    let (mut h, mut t, mut n) = (0.0f64, 0.0f64, 0.0f64);
    for tr in trajectories {
        let (a, b, c) = tr.invariant_violation();
        h = h.max(a);
        t = t.max(b);
        n = n.max(c);
    }
    let traj_ok = h <= 1e-12 && t <= 1e-7 && n <= 1e-9;
    pass &= traj_ok;
    parts.push(format!(
        "{} trajectories: herm {h:.1e}, trace {t:.1e}, negativity {n:.1e}",
        trajectories.len()
    ));

    let psd = NamedConfiguration::ALL.iter().all(|c| c.kernel(0.5).is_gamma_psd(1e-12));
    let dark = NamedConfiguration::TWO_ATOM.iter().all(|c| {
        let g = c.kernel(0.5).gamma_matrix();
        (0..2).all(|i| g[(i, 0)] + g[(i, 1)] == 0.0)
    });
    pass &= psd && dark;
    parts.push(format!("Gamma PSD: {psd}; Gamma·(1,1) = 0 exactly: {dark}"));

    let mut runner = TestRunner::new_with_rng(
        Config { cases: 256, failure_persistence: None, ..Config::default() },
        TestRng::from_seed(RngAlgorithm::ChaCha, &[7; 32]),
    );
    let strategy = (1usize..=3, 1usize..=8, 1usize..=8, any::<u64>());
    let result = runner.run(&strategy, |(m, r1, r2, seed)| {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let rho = random_density(&mut rng, m, r1.min(1 << m));
        let sigma = random_density(&mut rng, m, r2.min(1 << m));
        let f12 = uhlmann_fidelity(&rho, &sigma).unwrap();
        let f21 = uhlmann_fidelity(&sigma, &rho).unwrap();
        prop_assert!(abs_diff_eq!(f12, f21, epsilon = 1e-8), "symmetry {f12} vs {f21}");
        prop_assert!((0.0..=1.0).contains(&f12));
        let psi = DVector::from_fn(1 << m, |_, _| {
            Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        });
        let psi = &psi / Complex64::new(psi.norm(), 0.0);
        let pure = AtomicDensityMatrix::pure(m, &psi).unwrap();
        let fu = uhlmann_fidelity(&rho, &pure).unwrap();
        let fp = pure_state_fidelity(&rho, &psi);
        prop_assert!(abs_diff_eq!(fu, fp, epsilon = 1e-8), "pure {fu} vs {fp}");
        Ok(())
    });
    let fid_ok = result.is_ok();
    pass &= fid_ok;
    parts.push(match result {
        Ok(()) => "Uhlmann symmetry and pure-state consistency on 256 random pairs".to_string(),
        Err(e) => format!("fidelity property failed: {e}"),
    });
    outcome(pass, parts.join("; "))
}

fn read_csvs(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}

/// Criterion 10: identical options and seed give byte-identical CSVs.
fn determinism() -> Outcome {
    let opts = FigureOptions {
        seed: SEED,
        n_realizations: 8,
        delta_grid: vec![0.0, 0.1, 0.2],
        t_end: 400.0,
        stability_t_end: 200.0,
        ..FigureOptions::default()
    };
    let mut pass = true;
    let mut parts = Vec::new();
    for fig in [FigureName::Fig2b, FigureName::Fig3, FigureName::Fig4b] {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        reproduce_figure(fig, &opts, a.path()).unwrap();
        reproduce_figure(fig, &opts, b.path()).unwrap();
        let fa = read_csvs(&a.path().join(fig.name()));
        let fb = read_csvs(&b.path().join(fig.name()));
        let same = !fa.is_empty() && fa == fb;
        pass &= same;
        parts.push(format!("{fig}: {} files {}", fa.len(), if same { "identical" } else { "DIFFER" }));
    }
    // A different seed must change the disorder table.
    let c = tempfile::tempdir().unwrap();
    let d = tempfile::tempdir().unwrap();
    reproduce_figure(FigureName::Fig2b, &opts, c.path()).unwrap();
    reproduce_figure(FigureName::Fig2b, &FigureOptions { seed: SEED + 1, ..opts.clone() }, d.path()).unwrap();
    let seed_matters = read_csvs(&c.path().join("fig2b")) != read_csvs(&d.path().join("fig2b"));
    pass &= seed_matters;
    parts.push(format!("other seed changes fig2b: {seed_matters}"));
    outcome(pass, parts.join("; "))
}

fn main() {
    // Respect `cargo test -- --list` and name filters enough to stay quiet.
    let args: Vec<String> = std::env::args().skip(1).collect();
    if args.iter().any(|a| a == "--list") {
        println!("acceptance: test");
        return;
    }

    let mut trajectories = Vec::new();
    let mut results: Vec<(usize, &str, Outcome)> = Vec::new();
    results.push((1, "prefactor calibration", prefactor_calibration()));
    results.push((2, "BIC census", bic_census()));
    results.push((3, "BIC-Bell fidelity", bic_bell_fidelity()));
    results.push((4, "disorder robustness", disorder_robustness()));
    results.push((5, "BIC stability", bic_stability(&mut trajectories)));
    results.push((6, "Bell protocol (braided)", bell_protocol_braided(&mut trajectories)));
    results.push((7, "Bell protocol (separate, nested)", bell_protocol_other(&mut trajectories)));
    results.push((8, "W protocol", w_protocol_braided3(&mut trajectories)));
    results.push((9, "invariant suite", invariant_suite(&trajectories)));
    results.push((10, "determinism", determinism()));

    // The continuous-drive search agrees with the protocol's release time.
    let k = NamedConfiguration::Braided2.kernel(0.5);
    let best = find_optimal_duration(&k, &bell_state(), &protocol_opts(0.01)).unwrap();
    println!("note: first continuous-drive maximum at t = {:.4}, F = {:.6}", best.t_max, best.f_max);

    let mut failed = 0;
    for (n, name, o) in &results {
        let tag = if o.pass { "PASS" } else { "FAIL" };
        println!("criterion {n:>2} [{tag}] {name}: {}", o.detail);
        failed += usize::from(!o.pass);
    }
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
