use std::fs;
use std::path::Path;
use std::process::Command;

use ineqstat::cli::{verify_manifest, Manifest};

fn run(args: &[&str]) -> (i32, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_ineqstat")).args(args).output().unwrap();
    (out.status.code().unwrap(), String::from_utf8_lossy(&out.stdout).into_owned())
}

fn manifest(dir: &Path) -> Manifest {
    serde_json::from_str(&fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

fn assert_outputs(dir: &Path, names: &[&str]) {
    let m = manifest(dir);
    for n in names {
        assert!(dir.join(n).is_file(), "{n} missing");
        assert!(m.outputs.iter().any(|d| d.path == *n), "{n} not in manifest");
    }
    assert!(verify_manifest(&dir.join("manifest.json")).unwrap().is_empty());
}

#[test]
fn exit_codes() {
    assert_eq!(run(&["--help"]).0, 0);
    assert_eq!(run(&["simulate", "--bogus"]).0, 2);
    assert_eq!(run(&[]).0, 2);
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().to_str().unwrap();
    // zero agents is rejected by the library, not the parser
    assert_eq!(run(&["simulate", "--agents", "0", "--money", "10", "--steps", "1", "--seed", "0", "--out", out]).0, 1);
    assert_eq!(run(&["fit-income", "--synthetic", "1,2", "--out", out]).0, 1);
    assert_eq!(run(&["energy", "--fixture", "--year", "1999", "--out", out]).0, 1);
}

#[test]
fn simulate_writes_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("sim");
    let args = ["simulate", "--agents", "200", "--money", "2000", "--steps", "20000", "--seed", "3", "--out"];
    let mut a: Vec<&str> = args.to_vec();
    a.push(out.to_str().unwrap());
    assert_eq!(run(&a).0, 0);
    assert_outputs(&out, &["trajectory.csv", "histogram.csv", "summary.json"]);
    let traj = fs::read_to_string(out.join("trajectory.csv")).unwrap();
    assert_eq!(traj.lines().count(), 102);
    assert_eq!(traj.lines().next(), Some("step,entropy,temperature"));
    assert!(traj.lines().skip(1).all(|l| l.ends_with(",10")));
}

#[test]
fn fp_writes_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("fp");
    let (code, _) = run(&[
        "fp", "--kind", "combined", "--A0", "1", "--B0", "40", "--a", "0.01", "--b", "0.0077",
        "--pulse-at", "50", "--transient-steps", "200", "--out", out.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    assert_outputs(&out, &["stationary.csv", "delta_r2.csv", "transient.csv"]);
}

#[test]
fn fit_income_from_csv_and_tamper_detection() {
    let tmp = tempfile::tempdir().unwrap();
    let input = tmp.path().join("y1997.csv");
    fs::write(&input, "level_kusd,returns_at_or_above\n0,1000\n10,780\n20,600\n40,350\n60,200\n80,120\n100,70\n150,30\n200,15\n400,3\n800,1\n").unwrap();
    let out = tmp.path().join("fit");
    let (code, stdout) =
        run(&["fit-income", "--input", input.to_str().unwrap(), "--year", "1997", "--out", out.to_str().unwrap()]);
    assert_eq!(code, 0);
    assert!(stdout.contains("1997"));
    let m = manifest(&out);
    assert_eq!(m.inputs.len(), 1);
    assert!(!m.outputs.is_empty());
    assert_eq!(run(&["verify", out.join("manifest.json").to_str().unwrap()]).0, 0);
    fs::write(&input, "level_kusd,returns_at_or_above\n0,1000\n").unwrap();
    assert_eq!(run(&["verify", out.join("manifest.json").to_str().unwrap()]).0, 1);
}

#[test]
fn energy_csv_average_matches_hand_computation() {
    let tmp = tempfile::tempdir().unwrap();
    let (e, p) = ineqstat::energy::fixture::csv_texts(2005).unwrap();
    let (ep, pp) = (tmp.path().join("e.csv"), tmp.path().join("p.csv"));
    fs::write(&ep, &e).unwrap();
    fs::write(&pp, &p).unwrap();

    // spreadsheet-style oracle straight from the CSV text
    let col = |text: &str| -> Vec<f64> { text.lines().skip(1).map(|l| l.split(',').nth(2).unwrap().parse().unwrap()).collect() };
    let (kw, pop) = (col(&e), col(&p));
    let expect = kw.iter().zip(&pop).map(|(k, n)| k * n).sum::<f64>() / pop.iter().sum::<f64>();

    let out = tmp.path().join("energy");
    let code = run(&[
        "energy", "--energy", ep.to_str().unwrap(), "--population", pp.to_str().unwrap(), "--year", "2005",
        "--per-capita", "--out", out.to_str().unwrap(),
    ])
    .0;
    assert_eq!(code, 0);
    assert_outputs(&out, &["cdf.csv", "lorenz.csv", "summary.json"]);
    let summary: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    let got = summary["world_avg_kw"].as_f64().unwrap();
    assert!((got / expect - 1.0).abs() < 1e-12, "{got} vs {expect}");
}

#[test]
fn reruns_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let dirs: Vec<_> = (0..2).map(|i| tmp.path().join(format!("r{i}"))).collect();
    for d in &dirs {
        let code = run(&["fit-income", "--synthetic", "48,1.34,113", "--seed", "9", "--refine", "--out", d.to_str().unwrap()]).0;
        assert_eq!(code, 0);
    }
    let (a, b) = (manifest(&dirs[0]), manifest(&dirs[1]));
    assert_eq!(a.outputs, b.outputs);
    assert_eq!(a.config, b.config);
}
