use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use sumlogcone::data::{sample_checkered_gmm, save_csv, CheckeredGmmSpec};
use sumlogcone_cli::output::ModelFile;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sumlogcone")).args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn files(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut found = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                found.push((path.strip_prefix(dir).unwrap().to_path_buf(), fs::read(&path).unwrap()));
            }
        }
    }
    found.sort();
    found
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let path = dir.join("config.toml");
    fs::write(&path, text).unwrap();
    path
}

#[test]
fn rps_rerun_is_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for out in [&a, &b] {
        let res = run(&["rps", "--seeds", "0", "--epochs", "200", "--out", out.to_str().unwrap()]);
        assert_eq!(code(&res), 0, "{}", stderr(&res));
    }
    let (fa, fb) = (files(&a), files(&b));
    assert!(fa.len() >= 5);
    assert_eq!(fa, fb);
}

#[test]
fn one_epoch_records_one_step_per_model() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("rps");
    let res = run(&["rps", "--seeds", "4,7", "--epochs", "1", "--out", out.to_str().unwrap()]);
    // One step cannot reach the smooth-XOR target; those checks only warn.
    assert_eq!(code(&res), 0, "{}", stderr(&res));
    for model in ["smooth_xor", "bradley_terry"] {
        for seed in ["seed4", "seed7", "mean"] {
            let text = fs::read_to_string(out.join(format!("metrics/{model}_{seed}.csv"))).unwrap();
            let lines: Vec<&str> = text.lines().collect();
            assert_eq!(lines[0], "t,loss,grad_norm,ms");
            assert_eq!(lines.len(), 2);
            assert!(lines[1].starts_with("1,") && lines[1].ends_with(",0"));
        }
    }
    let model = ModelFile::load(&out.join("models/smooth_xor_seed4.csv")).unwrap();
    assert_eq!((model.kind.as_str(), model.m, model.c, model.d), ("smooth-xor", 2, 2, 3));
    assert_eq!(model.rows.len(), 2);
    let summary = fs::read_to_string(out.join("summary.jsonl")).unwrap();
    for line in summary.lines() {
        serde_json::from_str::<serde_json::Value>(line).unwrap();
    }
    assert!(summary.contains("mean_final_loss"));
}

#[test]
fn timing_column_is_opt_in() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("timed");
    let config = write_config(tmp.path(), "record_timing = true\nseeds = [0]\nepochs = 50\n");
    let res = run(&["rps", "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code(&res), 0, "{}", stderr(&res));
    let text = fs::read_to_string(out.join("metrics/smooth_xor_seed0.csv")).unwrap();
    let last_ms: f64 = text.lines().last().unwrap().rsplit(',').next().unwrap().parse().unwrap();
    assert!(last_ms > 0.0);
}

#[test]
fn config_errors_exit_3() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("x");
    let out = out.to_str().unwrap();
    let unknown = write_config(tmp.path(), "epochs = 5\nlearning_rate = 0.1\n");
    let res = run(&["rps", "--config", unknown.to_str().unwrap(), "--out", out]);
    assert_eq!(code(&res), 3);
    assert!(stderr(&res).contains("learning_rate"));
    assert_eq!(code(&run(&["rps", "--seeds", "1,two", "--out", out])), 3);
    assert_eq!(code(&run(&["rps", "--epochs", "0", "--out", out])), 3);
    let bad_mu = write_config(tmp.path(), "[model]\nmu = [0.7, 0.7]\n");
    assert_eq!(code(&run(&["saddle", "--config", bad_mu.to_str().unwrap(), "--out", out])), 3);
    let wrong = write_config(tmp.path(), "experiment = \"rps\"\n");
    assert_eq!(code(&run(&["saddle", "--config", wrong.to_str().unwrap(), "--out", out])), 3);
}

#[test]
fn io_errors_exit_4() {
    let tmp = tempfile::tempdir().unwrap();
    let blocker = tmp.path().join("file");
    fs::write(&blocker, "not a directory").unwrap();
    let res = run(&["saddle", "--out", blocker.join("out").to_str().unwrap()]);
    assert_eq!(code(&res), 4, "{}", stderr(&res));
    let missing = tmp.path().join("missing.toml");
    assert_eq!(code(&run(&["saddle", "--config", missing.to_str().unwrap()])), 4);
}

#[test]
fn saddle_report() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("saddle");
    let res = run(&["saddle", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&res), 0, "{}", stderr(&res));
    let stdout = String::from_utf8_lossy(&res.stdout);
    assert!(stdout.contains("PASS duel_gd_stuck"));
    assert!(stdout.contains("PASS plane_xgd_escapes"));

    // A uniform law cannot leave the saddle, so the escape check fails.
    let config = write_config(tmp.path(), "[model]\nmu = [0.5, 0.5]\n");
    let res = run(&["saddle", "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code(&res), 2);
    assert!(stderr(&res).contains("xgd_escapes"));
}

#[test]
fn converge_reports_violations() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("converge");
    let res = run(&["converge", "--epochs", "2000", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&res), 0, "{}", stderr(&res));
    let text = fs::read_to_string(out.join("metrics/bound_seed0.csv")).unwrap();
    assert_eq!(text.lines().next(), Some("T,averaged_excess,theorem_bound"));
    assert_eq!(text.lines().count(), 2001);

    // Too small a Lipschitz constant makes the bound false.
    let config = write_config(tmp.path(), "[converge]\nlipschitz = 0.001\ntheta0 = [3.0, 3.0]\n");
    let res = run(&[
        "converge",
        "--config",
        config.to_str().unwrap(),
        "--epochs",
        "500",
        "--lr",
        "10",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&res), 2);
    assert!(stderr(&res).contains("at T = "));
}

#[test]
fn gradcheck_passes() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("gc");
    let res = run(&["gradcheck", "--seeds", "0,1", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&res), 0, "{}", stderr(&res));
    let text = fs::read_to_string(out.join("metrics/gradcheck_seed1.csv")).unwrap();
    assert_eq!(text.lines().count(), 101);
}

#[test]
fn xor_gmm_from_files() {
    let tmp = tempfile::tempdir().unwrap();
    let spec = CheckeredGmmSpec::xor_gmm();
    let train = tmp.path().join("train.csv");
    let test = tmp.path().join("test.csv");
    save_csv(&sample_checkered_gmm(&spec, 300, 11).unwrap(), &train).unwrap();
    save_csv(&sample_checkered_gmm(&spec, 300, 12).unwrap(), &test).unwrap();
    let config = write_config(
        tmp.path(),
        &format!(
            "epochs = 300\n[model]\nrestarts = 2\n[data]\ntrain_path = {:?}\ntest_path = {:?}\n",
            train.to_str().unwrap(),
            test.to_str().unwrap()
        ),
    );
    let out = tmp.path().join("out");
    let res = run(&["xor-gmm", "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code(&res), 0, "{}", stderr(&res));
    let model = ModelFile::load(&out.join("models/gd_seed0.csv")).unwrap();
    assert_eq!((model.kind.as_str(), model.m, model.c, model.d), ("binary", 2, 2, 2));
    let summary = fs::read_to_string(out.join("summary.jsonl")).unwrap();
    let first: serde_json::Value = serde_json::from_str(summary.lines().next().unwrap()).unwrap();
    assert!(first["gd_test_accuracy"].as_f64().unwrap() > 0.9);
    assert!(first["oracle_test_accuracy"].is_null());

    fs::write(&test, "f0,f1,label\n0.5,0.5,7\n").unwrap();
    let res = run(&["xor-gmm", "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code(&res), 3, "{}", stderr(&res));
}
