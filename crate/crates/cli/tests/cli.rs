use std::path::Path;
use std::process::{Command, Output};

fn ramq(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ramq"))
        .current_dir(dir)
        .env_remove("RAMQ_CONFIG")
        .args(args)
        .output()
        .expect("binary runs")
}

fn read(path: impl AsRef<Path>) -> String {
    std::fs::read_to_string(path).unwrap()
}

fn rows(csv: &str) -> Vec<Vec<f64>> {
    csv.lines().skip(1).map(|l| l.split(',').map(|v| v.parse().unwrap()).collect()).collect()
}

#[test]
fn compare_nn_writes_counts_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = ramq(dir.path(), &["compare-nn", "--out", "o"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = read(dir.path().join("o/compare_nn.csv"));
    assert_eq!(csv.lines().next().unwrap(), "j,nn_gates,F_nn_0.99,F_nn_0.98");
    let last = rows(&csv).pop().unwrap();
    assert_eq!(last[0], 9.0);
    assert_eq!(last[1], 15.0);
    assert!((last[2] - 0.99f64.powi(15)).abs() < 1e-12);
    let manifest: serde_json::Value = serde_json::from_str(&read(dir.path().join("o/compare-nn.manifest.json"))).unwrap();
    assert_eq!(manifest["scenario"], "compare-nn");
    assert_eq!(manifest["config"], "builtin");
    assert_eq!(manifest["outputs"][0]["file"], "compare_nn.csv");
    assert_eq!(manifest["device_hash"].as_str().unwrap().len(), 64);
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["rb", "--target", "6", "--lengths", "1,3,6", "--nseq", "3", "--seed", "5", "--out", "o"];
    assert!(ramq(dir.path(), &args).status.success());
    let names = ["rb_survival.csv", "rb_sequences.csv", "rb_fit.json", "rb.manifest.json"];
    let first: Vec<String> = names.iter().map(|n| read(dir.path().join("o").join(n))).collect();
    assert!(ramq(dir.path(), &args).status.success());
    for (n, a) in names.iter().zip(&first) {
        assert_eq!(&read(dir.path().join("o").join(n)), a, "{n}");
    }
}

#[test]
fn zero_noise_rb_survives() {
    let dir = tempfile::tempdir().unwrap();
    let out = ramq(dir.path(), &["rb", "--target", "mode:9", "--nseq", "2", "--lengths", "1,2,4", "--ideal", "--out", "o"]);
    assert!(out.status.success());
    let csv = read(dir.path().join("o/rb_survival.csv"));
    assert_eq!(csv.lines().next().unwrap(), "m,survival");
    assert!(rows(&csv).iter().all(|r| (r[1] - 1.0).abs() < 1e-9));
    let fit: serde_json::Value = serde_json::from_str(&read(dir.path().join("o/rb_fit.json"))).unwrap();
    assert_eq!(fit["fit"]["fidelity"], 1.0);
}

#[test]
fn ideal_cz_tomography_is_perfect() {
    let dir = tempfile::tempdir().unwrap();
    let out = ramq(dir.path(), &["cz-tomo", "--control", "1", "--target", "5", "--ideal", "--readout", "ramsey", "--out", "o"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let r = &rows(&read(dir.path().join("o/cz_tomo.csv")))[0];
    assert_eq!((r[0], r[1]), (1.0, 5.0));
    assert!((r[3] - 1.0).abs() < 1e-6);
}

#[test]
fn pair_file_and_preset() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("pairs.txt"), "# control target\n6 9\n9 6\n").unwrap();
    let out = ramq(dir.path(), &["cz-tomo", "--pairs", "pairs.txt", "--out", "o"]);
    assert!(out.status.success());
    let r = rows(&read(dir.path().join("o/cz_tomo.csv")));
    assert_eq!(r.len(), 2);
    assert!(r.iter().all(|row| (0.5..0.95).contains(&row[3])));
    let out = ramq(dir.path(), &["cz-tomo", "--preset", "nope", "--out", "o"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn ghz_half_angle_splits_population() {
    let dir = tempfile::tempdir().unwrap();
    let out = ramq(dir.path(), &["ghz", "--modes", "2,5,8", "--theta-steps", "3", "--ideal", "--out", "o"]);
    assert!(out.status.success());
    let csv = read(dir.path().join("o/ghz_theta.csv"));
    assert_eq!(csv.lines().next().unwrap(), "theta,P1_m2,P1_m5,P1_m8,P_all0,P_all1,parity_X");
    let mid = &rows(&csv)[1];
    for p in &mid[1..4] {
        assert!((p - 0.5).abs() < 1e-9);
    }
    assert!((mid[6].abs() - 1.0).abs() < 1e-9);
}

#[test]
fn off_resonant_chevron_is_flat() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["chevron", "--f-min", "3.3", "--f-max", "3.5", "--steps", "3", "--t-max", "50", "--t-steps", "6", "--out", "o"];
    assert!(ramq(dir.path(), &args).status.success());
    let csv = read(dir.path().join("o/chevron.csv"));
    assert_eq!(csv.lines().next().unwrap(), "nu_sb_GHz,duration_ns,P_e");
    let r = rows(&csv);
    assert_eq!(r.len(), 18);
    assert!(r.iter().all(|row| row[2] > 0.98), "{r:?}");
    let fits = rows(&read(dir.path().join("o/chevron_fits.csv")));
    assert_eq!(fits.len(), 11);
    assert!(fits.iter().all(|f| f[6] < 0.02));
}

#[test]
fn config_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let text = ramq::DeviceModel::default_config_text().replace("t1_transmon = 2.5", "t1_transmon = 2.0");
    assert_ne!(text, ramq::DeviceModel::default_config_text());
    std::fs::write(dir.path().join("dev.toml"), &text).unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_ramq"))
        .current_dir(dir.path())
        .env("RAMQ_CONFIG", "dev.toml")
        .args(["compare-nn", "--out", "o"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let m: serde_json::Value = serde_json::from_str(&read(dir.path().join("o/compare-nn.manifest.json"))).unwrap();
    assert_eq!(m["config"], "dev.toml");
    assert_ne!(m["device_hash"], ramq::DeviceModel::default_device().hash());
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(ramq(dir.path(), &["rb", "--bogus"]).status.code(), Some(2));
    assert_eq!(ramq(dir.path(), &[]).status.code(), Some(2));
    assert_eq!(ramq(dir.path(), &["cz-tomo", "--control", "6"]).status.code(), Some(2));
    let bad = ramq(dir.path(), &["cz-tomo", "--control", "6", "--target", "11", "--out", "o"]);
    assert_eq!(bad.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&bad.stderr).contains("not active"));
    assert_eq!(ramq(dir.path(), &["--config", "missing.toml", "compare-nn"]).status.code(), Some(1));
    assert_eq!(ramq(dir.path(), &["--help"]).status.code(), Some(0));
}
