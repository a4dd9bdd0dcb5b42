mod common;

use std::fs;

use common::*;
use fiberfit::cli::FitFile;

fn p(path: &std::path::Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn command_line_contract() {
    let dir = tempfile::tempdir().unwrap();
    criterion_9(dir.path()).unwrap();
}

#[test]
fn usage_errors_exit_two() {
    let o = run_cli(&["fit", "--data", "x.txt", "--out", "o"]);
    assert_eq!(o.code, 2);
    assert!(o.stderr.contains("--r"));
    assert_eq!(run_cli(&["simulate", "--scale", "v", "--par", "2.4,3.3,1.5", "--r", "2.5", "--n", "0", "--out", "/tmp/never"]).code, 2);
    assert_eq!(run_cli(&["density", "--scale", "x", "--par", "1.8,2.7,2.6", "--r", "6", "--at", "0"]).code, 2);
    let v_fines = ["density", "--scale", "v", "--component", "fines", "--par", "0.3,0.1,1.5,2,2,2.8,2.2", "--r", "6", "--at", "1"];
    assert_eq!(run_cli(&v_fines).code, 2);
    assert_eq!(run_cli(&["density", "--scale", "w", "--par", "1.8,2.7,2.6", "--at", "1"]).code, 2, "w needs --r");
    assert_eq!(run_cli(&["density", "--scale", "y", "--par", "1.8,2.7", "--at", "1"]).code, 2);
    assert_eq!(run_cli(&["--help"]).code, 0);
}

#[test]
fn density_grid_and_files() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("d.csv");
    let svg = dir.path().join("d.svg");
    let data = dir.path().join("data.txt");
    fs::write(&data, "# lengths\n1.0\n2.0\n2.5\n").unwrap();
    let args = [
        "density", "--scale", "x", "--par", "0.3,0.1,1.5,2,2,2.8,2.2", "--r", "6", "--grid", "0.1:11.9:60", "--out",
        p(&out), "--svg", p(&svg), "--data", p(&data),
    ];
    assert_eq!(run_cli(&args).code, 0);
    let curve = parse_curve(&fs::read_to_string(&out).unwrap());
    assert_eq!(curve.len(), 60);
    assert_eq!(curve[0].0, 0.1);
    assert!(curve.iter().all(|(_, f)| *f > 0.0));
    let s = fs::read_to_string(&svg).unwrap();
    assert!(s.contains("<polyline") && s.contains("<rect x="));
    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("d.csv.manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["command"], "density");
    assert_eq!(manifest["input_sha256"].as_str().unwrap().len(), 64);

    assert_eq!(run_cli(&args).code, 2, "existing output needs --force");
    let mut forced = args.to_vec();
    forced.push("--force");
    assert_eq!(run_cli(&forced).code, 0);
}

#[test]
fn fit_outputs_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("m.txt");
    let out = dir.path().join("fit");
    let sim = ["simulate", "--scale", "v", "--par", "2.4,3.3,1.5", "--r", "2.5", "--n", "300", "--seed", "3", "--out", p(&data)];
    assert_eq!(run_cli(&sim).code, 0);
    assert!(dir.path().join("m.txt.manifest.json").exists());
    let fit_args = ["fit", "--data", p(&data), "--data-type", "microscopy", "--r", "2.5", "--out", p(&out)];
    assert_eq!(run_cli(&fit_args).code, 0);

    let file: FitFile = serde_json::from_str(&fs::read_to_string(out.join("fit.json")).unwrap()).unwrap();
    assert_eq!(file.labels, ["b_fibers", "d_fibers", "k_fibers"]);
    let par: Vec<String> = file.estimates.iter().map(|v| v.to_string()).collect();
    for scale in ["w", "y", "x", "v"] {
        let stored = parse_curve(&fs::read_to_string(out.join(format!("density_{scale}_fibers.csv"))).unwrap());
        let at: Vec<String> = stored.iter().map(|(x, _)| x.to_string()).collect();
        let o = run_cli(&["density", "--scale", scale, "--par", &par.join(","), "--r", "2.5", "--at", &at.join(",")]);
        assert_eq!(o.code, 0, "{}", o.stderr);
        for ((x0, f0), (x1, f1)) in stored.iter().zip(parse_curve(&o.stdout)) {
            assert_eq!(*x0, x1);
            assert!((f0 - f1).abs() <= 1e-12 * f0.abs().max(1.0), "{scale} at {x0}: {f0} vs {f1}");
        }
    }

    let summary = fs::read_to_string(out.join("summary.txt")).unwrap();
    check_summary_layout(&summary).unwrap();
    let again = dir.path().join("fit2");
    let mut args2 = fit_args.to_vec();
    args2[8] = p(&again);
    assert_eq!(run_cli(&args2).code, 0);
    assert_eq!(summary, fs::read_to_string(again.join("summary.txt")).unwrap(), "summary is line-stable");
    let manifests: Vec<_> = fs::read_dir(&out)
        .unwrap()
        .filter(|e| e.as_ref().unwrap().file_name().to_string_lossy().contains("manifest"))
        .collect();
    assert_eq!(manifests.len(), 1);
}

#[test]
fn fixed_parameters_are_recorded() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("o.txt");
    let out = dir.path().join("fit");
    let sim = ["simulate", "--scale", "x", "--par", "0.3,0.1,1.5,2,2,2.8,2.2", "--r", "6", "--n", "800", "--seed", "2", "--out", p(&data)];
    assert_eq!(run_cli(&sim).code, 0);
    let o = run_cli(&[
        "fit", "--data", p(&data), "--r", "6", "--fixed", "F,F,T,F,F,T,F", "--par-start", ".5,.01,1,1,2,1,1", "--starts", "2", "--out",
        p(&out),
    ]);
    assert_eq!(o.code, 0, "{}", o.stderr);
    let file: FitFile = serde_json::from_str(&fs::read_to_string(out.join("fit.json")).unwrap()).unwrap();
    assert_eq!(file.fixed, [false, false, true, false, false, true, false]);
    assert_eq!((file.estimates[2], file.estimates[5]), (1.0, 1.0));
    let summary = fs::read_to_string(out.join("summary.txt")).unwrap();
    assert!(summary.contains("Summary statistics for FINE lengths"));
    assert!(summary.contains("Proportion of fines in the standing tree"));
    for name in ["density_x_mixture.csv", "density_w_fines.csv", "density_v_fibers.csv"] {
        assert!(out.join(name).exists(), "{name}");
    }
}

#[test]
fn bad_data_lists_lines() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("bad.txt");
    fs::write(&data, "1.0\n13.0\n2.0\nfoo\n").unwrap();
    let o = run_cli(&["fit", "--data", p(&data), "--r", "6", "--out", p(&dir.path().join("f"))]);
    assert_eq!(o.code, 2);
    assert!(o.stderr.contains("2, 4") && o.stderr.contains("(0, 2r)"), "{}", o.stderr);
}

#[test]
fn thread_variable_is_validated() {
    let o = std::process::Command::new(bin())
        .args(["density", "--scale", "y", "--par", "1.8,2.7,2.6", "--at", "2.5"])
        .env("FIBERFIT_THREADS", "many")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
    let o = std::process::Command::new(bin())
        .args(["density", "--scale", "y", "--par", "1.8,2.7,2.6", "--at", "2.5"])
        .env("FIBERFIT_THREADS", "2")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
}
