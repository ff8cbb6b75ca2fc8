use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn gbic(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gbic"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

#[test]
fn bic_writes_table_and_metadata() {
    let dir = tempfile::tempdir().unwrap();
    let out = gbic(dir.path(), &["bic", "--out", "o"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(dir.path().join("o/bic/bic.csv")).unwrap();
    let mut lines = csv.lines();
    assert!(lines.next().unwrap().starts_with("n_bic,n_boc_above,n_boc_below"));
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(row[0], "1");
    let fidelity: f64 = row[6].parse().unwrap();
    assert!(fidelity > 0.99);

    let meta: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("o/bic/metadata.json")).unwrap()).unwrap();
    assert_eq!(meta["subcommand"], "bic");
    assert_eq!(meta["config_hash"].as_str().unwrap().len(), 64);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(gbic(dir.path(), &["--help"]).status.code(), Some(0));
    assert_eq!(gbic(dir.path(), &["nonsense"]).status.code(), Some(1));
    assert_eq!(gbic(dir.path(), &["bic", "--set", "waveguide.xi=2"]).status.code(), Some(1));
    assert_eq!(gbic(dir.path(), &["bell", "--set", "drive.eta=0"]).status.code(), Some(1));
    assert_eq!(
        gbic(dir.path(), &["bic", "--set", "experiment.configuration=\"loop\""]).status.code(),
        Some(1)
    );
    // The fidelity peak lies far beyond a 5-unit search window.
    assert_eq!(gbic(dir.path(), &["bell", "--set", "drive.search_window=5", "--out", "o"]).status.code(), Some(2));
}

#[test]
fn config_file_and_overrides_combine() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("run.toml"),
        "seed = 3\n[experiment]\nconfiguration = \"nested2\"\ng = 0.4\n",
    )
    .unwrap();
    let out = gbic(dir.path(), &["bic", "--config", "run.toml", "--set", "experiment.g=0.3", "--out", "o"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let meta: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("o/bic/metadata.json")).unwrap()).unwrap();
    assert_eq!(meta["seed"], 3);
    assert_eq!(meta["config"]["config"]["experiment"]["g"], 0.3);
}

#[test]
fn disorder_output_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let args = |o: &'static str, seed: &'static str| {
        vec![
            "disorder",
            "--seed",
            seed,
            "--out",
            o,
            "--set",
            "waveguide.n_sites=81",
            "--set",
            "disorder.n_realizations=6",
            "--set",
            "disorder.delta_grid=[0.1, 0.3]",
        ]
    };
    for (o, seed) in [("a", "5"), ("b", "5"), ("c", "6")] {
        let out = gbic(dir.path(), &args(o, seed));
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let read = |o: &str| fs::read(dir.path().join(o).join("disorder/disorder.csv")).unwrap();
    assert_eq!(read("a"), read("b"));
    assert_ne!(read("a"), read("c"));
}

#[test]
fn figure_with_reduced_grid() {
    let dir = tempfile::tempdir().unwrap();
    let out = gbic(
        dir.path(),
        &[
            "figure",
            "fig2b",
            "--out",
            "o",
            "--set",
            "waveguide.n_sites=81",
            "--set",
            "disorder.n_realizations=4",
            "--set",
            "disorder.delta_grid=[0.0, 0.2]",
        ],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let fig = dir.path().join("o/fig2b");
    assert!(fig.join("metadata.json").exists());
    let n_csv = fs::read_dir(&fig)
        .unwrap()
        .filter(|e| e.as_ref().unwrap().path().extension().is_some_and(|x| x == "csv"))
        .count();
    assert!(n_csv >= 1);
    assert_eq!(gbic(dir.path(), &["figure", "fig9z", "--out", "o"]).status.code(), Some(1));
}
