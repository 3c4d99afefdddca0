use std::fs;
use std::path::Path;
use std::process::Command;

fn dave() -> Command {
    Command::new(env!("CARGO_BIN_EXE_dave"))
}

fn configs() -> &'static Path {
    Path::new(concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs"))
}

fn manifest_value(dir: &Path, key: &str) -> String {
    let text = fs::read_to_string(dir.join("manifest.txt")).unwrap();
    text.lines()
        .find_map(|l| l.strip_prefix(&format!("{key} = ")))
        .unwrap_or_else(|| panic!("{key} missing"))
        .to_string()
}

#[test]
fn fig2_config_writes_two_runs_on_one_problem() {
    let tmp = tempfile::tempdir().unwrap();
    let status = dave()
        .args(["run", "--config"])
        .arg(configs().join("fig2.conf"))
        .arg("--out")
        .arg(tmp.path())
        .args(["--budget-iters", "800"])
        .status()
        .unwrap();
    assert!(status.success());
    let a = tmp.path().join("dave-rpg_p1");
    let b = tmp.path().join("piag");
    for d in [&a, &b] {
        let trace = fs::read_to_string(d.join("trace.csv")).unwrap();
        assert!(trace.starts_with(
            "k,sim_time,worker,p,epoch_index,d_max,suboptimality,distance_sq,residual_norm\n"
        ));
        assert_eq!(trace.lines().count(), 802);
        let report = fs::read_to_string(d.join("report.csv")).unwrap();
        assert!(report
            .lines()
            .next()
            .unwrap()
            .ends_with("bound_thm32,bound_cor33,bound_thm36"));
    }
    assert_eq!(
        manifest_value(&a, "result.problem_sha256"),
        manifest_value(&b, "result.problem_sha256")
    );
    assert!(
        manifest_value(&b, "result.piag_delay")
            .parse::<usize>()
            .unwrap()
            > 10
    );
}

#[test]
fn p_sweep_shares_seed_and_delay_model() {
    let tmp = tempfile::tempdir().unwrap();
    let status = dave()
        .args(["run", "--config"])
        .arg(configs().join("p_sweep.conf"))
        .arg("--out")
        .arg(tmp.path())
        .args([
            "--budget-iters",
            "200",
            "--set",
            "examples=300",
            "--set",
            "features=30",
        ])
        .status()
        .unwrap();
    assert!(status.success());
    let mut boundaries = Vec::new();
    for p in [1, 4, 7, 10] {
        let d = tmp.path().join(format!("dave-rpg_p{p}"));
        assert_eq!(manifest_value(&d, "seed"), "1");
        assert_eq!(manifest_value(&d, "delay-model"), "exponential:1");
        assert_eq!(manifest_value(&d, "reps"), p.to_string());
        boundaries.push(manifest_value(&d, "result.epoch_boundaries"));
    }
    // round length grows with p, so the exchange order differs
    assert_ne!(boundaries[0], boundaries[3]);
}

#[test]
fn missing_dataset_fails_without_output() {
    let tmp = tempfile::tempdir().unwrap();
    let out = dave()
        .args([
            "run",
            "--set",
            "problem=libsvm",
            "--set",
            "dataset=/no/such/file.svm",
            "--out",
        ])
        .arg(tmp.path())
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("does not exist"));
    assert_eq!(fs::read_dir(tmp.path()).unwrap().count(), 0);
}

#[test]
fn manifest_reproduces_the_run() {
    let tmp = tempfile::tempdir().unwrap();
    let first = tmp.path().join("first");
    let status = dave()
        .args(["run", "--config"])
        .arg(configs().join("fig2.conf"))
        .args([
            "--budget-iters",
            "300",
            "--delay-model",
            "exponential:1",
            "--out",
        ])
        .arg(&first)
        .status()
        .unwrap();
    assert!(status.success());
    let run = first.join("dave-rpg_p1");
    let second = tmp.path().join("second");
    let status = dave()
        .args(["run", "--config"])
        .arg(run.join("manifest.txt"))
        .arg("--out")
        .arg(&second)
        .status()
        .unwrap();
    assert!(status.success());
    assert_eq!(
        fs::read(run.join("trace.csv")).unwrap(),
        fs::read(second.join("dave-rpg_p1").join("trace.csv")).unwrap()
    );
}

#[test]
fn libsvm_dataset_through_cli() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data.svm");
    let status = dave()
        .args([
            "gen-data",
            "--examples",
            "200",
            "--features",
            "20",
            "--seed",
            "3",
            "--out",
        ])
        .arg(&data)
        .status()
        .unwrap();
    assert!(status.success());
    let out = tmp.path().join("runs");
    let status = dave()
        .args(["run", "--set", "problem=libsvm", "--set"])
        .arg(format!("dataset={}", data.display()))
        .args([
            "--workers",
            "4",
            "--lambda1",
            "0.5",
            "--budget-iters",
            "100",
        ])
        .args(["--algo", "dave-rpg,sync-pg", "--out"])
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    assert!(out.join("sync-pg").join("report.csv").is_file());
    assert_eq!(
        manifest_value(&out.join("dave-rpg_p1"), "result.workers"),
        "4"
    );
}

#[test]
fn runtime_mode_writes_a_trace() {
    let tmp = tempfile::tempdir().unwrap();
    let status = dave()
        .args([
            "run",
            "--mode",
            "run",
            "--workers",
            "3",
            "--budget-iters",
            "200",
            "--out",
        ])
        .arg(tmp.path())
        .status()
        .unwrap();
    assert!(status.success());
    let d = tmp.path().join("dave-rpg_p1");
    assert_eq!(manifest_value(&d, "result.status"), "complete");
    assert_eq!(manifest_value(&d, "result.iterations"), "200");
}

#[test]
fn bad_flags_exit_nonzero() {
    let out = dave().args(["run", "--set", "workers"]).output().unwrap();
    assert!(!out.status.success());
    let out = dave().args(["run", "--algo", "sgd"]).output().unwrap();
    assert!(!out.status.success());
}
