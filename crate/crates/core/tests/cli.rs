use std::path::Path;
use std::process::{Command, Output};

fn dnnmg(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dnnmg"))
        .args(args)
        .current_dir(dir)
        .env_remove("DNNMG_THREADS")
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

#[test]
fn configuration_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.toml"), "[scenario]\nspeed = 3\n").unwrap();
    let cases: [&[&str]; 4] = [
        &["simulate", "--config", "bad.toml"],
        &["simulate", "--variant", "psi", "--levels", "2", "--end-time", "0.01"],
        &["simulate", "--variant", "psi", "--checkpoint", "missing.bin", "--levels", "2"],
        &["evaluate", "--levels", "2", "--end-time", "0.01"],
    ];
    for args in cases {
        let out = dnnmg(dir.path(), args);
        assert_eq!(code(&out), 2, "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    }
}

#[test]
fn invalid_thread_override_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_dnnmg"))
        .args(["simulate", "--levels", "2", "--end-time", "0.01"])
        .current_dir(dir.path())
        .env("DNNMG_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(code(&out), 2);
}

#[test]
fn short_simulation_writes_series_and_snapshots() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("run.toml"), "[output]\nvtk_every = 2\nstats_from = 0.0\n").unwrap();
    let out =
        dnnmg(dir.path(), &["simulate", "--config", "run.toml", "--levels", "2", "--end-time", "0.03", "--out", "o"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let series = std::fs::read_to_string(dir.path().join("o/series.csv")).unwrap();
    assert_eq!(series.lines().count(), 4, "header and three steps");
    assert!(dir.path().join("o/coarse_series.csv").exists());
    assert!(dir.path().join("o/vtk/step_00002.vtk").exists());
    assert!(!dir.path().join("o/vtk/step_00001.vtk").exists());
}
