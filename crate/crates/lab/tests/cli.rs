use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_duality-lab"));
    c.env_remove("DUALITY_LAB_OUT");
    c
}

fn data(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data").join(rel)
}

fn run(id: &str, config: &Path, out: &Path) -> Output {
    bin()
        .args(["run", id, "--config"])
        .arg(config)
        .arg("--out")
        .arg(out)
        .output()
        .unwrap()
}

fn csv_body(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap()
}

#[test]
fn list_is_sorted_and_has_the_experiments() {
    let out = bin().arg("list").output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let ids: Vec<&str> = text
        .lines()
        .filter(|l| !l.starts_with('\t'))
        .map(|l| l.split('\t').next().unwrap())
        .collect();
    assert!(ids.len() >= 5);
    let mut sorted = ids.clone();
    sorted.sort();
    assert_eq!(ids, sorted);
    for id in ["conjugate-suite", "finite-duality", "diffusion-duality", "density-bounds", "separation-test"] {
        assert!(ids.contains(&id), "{id} missing from {ids:?}");
    }
    let again = bin().arg("list").output().unwrap();
    assert_eq!(text.as_bytes(), again.stdout.as_slice());
}

#[test]
fn every_shipped_config_validates() {
    for entry in std::fs::read_dir(data("experiments")).unwrap() {
        let path = entry.unwrap().path();
        let out = bin().arg("validate-config").arg(&path).output().unwrap();
        assert!(out.status.success(), "{}: {}", path.display(), String::from_utf8_lossy(&out.stderr));
    }
}

#[test]
fn conjugate_log_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = run("conjugate-suite", &data("experiments/conjugate_log.toml"), dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = csv_body(&dir.path().join("conjugate-suite/results.csv"));
    assert!(csv.starts_with("# schema=duality-lab-csv/1\n"));
    for line in csv.lines().skip(2) {
        let f: Vec<&str> = line.split(',').collect();
        assert_eq!(f[2], "20240601");
        assert_eq!(f[8], "true", "{line}");
        if f[3] == "analytic_agreement" {
            assert!(f[6].parse::<f64>().unwrap() <= 1e-8);
        }
    }
    assert!(dir.path().join("conjugate-suite/manifest.md").is_file());
}

#[test]
fn binomial_duality_gap_is_tiny() {
    let dir = tempfile::tempdir().unwrap();
    let out = run("finite-duality", &data("experiments/finite_binomial_single.toml"), dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let csv = csv_body(&dir.path().join("finite-duality/results.csv"));
    let gaps: Vec<f64> = csv
        .lines()
        .filter(|l| l.contains(",duality_gap,"))
        .map(|l| l.split(',').nth(6).unwrap().parse().unwrap())
        .collect();
    assert_eq!(gaps.len(), 6);
    assert!(gaps.iter().all(|&g| g <= 1e-8), "{gaps:?}");
}

#[test]
fn missing_input_is_an_io_error_without_output() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("broken.toml");
    std::fs::write(&cfg, "experiment = \"finite-duality\"\ninput = \"nowhere.json\"\n").unwrap();
    let out_dir = dir.path().join("out");
    let out = run("finite-duality", &cfg, &out_dir);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("nowhere.json"));
    assert!(!out_dir.exists());
}

#[test]
fn unknown_experiment_and_bad_configs_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = run("no-such-thing", &data("experiments/conjugate_log.toml"), dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown experiment"));

    let mismatched = run("finite-duality", &data("experiments/conjugate_log.toml"), dir.path());
    assert_eq!(mismatched.status.code(), Some(2));

    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "experiment = \"conjugate-suite\"\n[tolerances]\nanalytic = -1.0\n").unwrap();
    assert_eq!(bin().arg("validate-config").arg(&bad).output().unwrap().status.code(), Some(2));

    let unknown_field = dir.path().join("typo.toml");
    std::fs::write(&unknown_field, "experiment = \"conjugate-suite\"\nsede = 3\n").unwrap();
    assert_eq!(bin().arg("validate-config").arg(&unknown_field).output().unwrap().status.code(), Some(2));

    let yaml = dir.path().join("c.yaml");
    std::fs::write(&yaml, "experiment: conjugate-suite\n").unwrap();
    assert_eq!(bin().arg("validate-config").arg(&yaml).output().unwrap().status.code(), Some(2));
}

#[test]
fn failing_check_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("strict.toml");
    std::fs::write(
        &cfg,
        "experiment = \"conjugate-suite\"\n[params]\nutilities = [{ kind = \"power\", p = 0.9 }]\nerror_mode = \"absolute\"\n",
    )
    .unwrap();
    let out = run("conjugate-suite", &cfg, &dir.path().join("out"));
    assert_eq!(out.status.code(), Some(1));
    assert!(dir.path().join("out/conjugate-suite/results.csv").is_file());
}

#[test]
fn runs_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for (id, cfg) in [
        ("finite-duality", "experiments/finite_binomial_two_prior.toml"),
        ("separation-test", "experiments/separation.toml"),
    ] {
        assert!(run(id, &data(cfg), a.path()).status.success());
        assert!(run(id, &data(cfg), b.path()).status.success());
        let rel = format!("{id}/results.csv");
        assert_eq!(csv_body(&a.path().join(&rel)), csv_body(&b.path().join(&rel)), "{id}");
    }
}

#[test]
fn seed_override_changes_hash_and_seed_column() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = data("experiments/separation.toml");
    let out = bin()
        .args(["run", "separation-test", "--config"])
        .arg(&cfg)
        .args(["--seed", "7", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success());
    let csv = csv_body(&dir.path().join("separation-test/results.csv"));
    let row: Vec<&str> = csv.lines().nth(2).unwrap().split(',').collect();
    assert_eq!(row[2], "7");
    let default = tempfile::tempdir().unwrap();
    run("separation-test", &cfg, default.path());
    let base = csv_body(&default.path().join("separation-test/results.csv"));
    assert_ne!(base.lines().nth(2).unwrap().split(',').nth(1), Some(row[1]));
}

#[test]
fn parallel_runs_use_separate_directories() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["run", "conjugate-suite", "bipolar-check", "conjugate-suite", "--parallel"])
        .arg("--config")
        .arg(data("experiments/conjugate_log.toml"))
        .arg("--config")
        .arg(data("experiments/bipolar.toml"))
        .arg("--config")
        .arg(data("experiments/conjugate_log.toml"))
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    for sub in ["conjugate-suite", "bipolar-check", "conjugate-suite-1"] {
        assert!(dir.path().join(sub).join("results.csv").is_file(), "{sub}");
    }
    assert_eq!(
        csv_body(&dir.path().join("conjugate-suite/results.csv")),
        csv_body(&dir.path().join("conjugate-suite-1/results.csv"))
    );
}

#[test]
fn output_root_comes_from_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .env("DUALITY_LAB_OUT", dir.path())
        .args(["run", "bipolar-check", "--config"])
        .arg(data("experiments/bipolar.toml"))
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(dir.path().join("bipolar-check/results.csv").is_file());
}
