use std::fs;
use std::process::{Command, Output};

fn nmqj(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nmqj")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn regions_reports_crossings() {
    let o = nmqj(&["regions"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.contains("t_P = 0.6019"), "{text}");
    assert!(text.contains("t_N = 0.9977"), "{text}");
    assert!(text.contains("= 602"), "{text}");
}

#[test]
fn presets_are_listed() {
    let text = stdout(&nmqj(&["presets"]));
    for p in ["fig3_k2map", "fig4_model1", "fig5_model2", "table1_bures", "fig7_benchmark"] {
        assert!(text.contains(p), "{p}");
    }
}

#[test]
fn run_file_writes_csv_and_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, "model = \"model_i\"\nengine = \"ledger\"\ntime.t_end = 0.05\n").unwrap();
    let out = dir.path().join("out");
    let o = nmqj(&["run", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--set", "output.stride=10"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let files: Vec<_> = stdout(&o).lines().map(String::from).collect();
    let csv = files.iter().find(|f| f.ends_with(".csv")).expect("csv listed");
    let text = fs::read_to_string(csv).unwrap();
    assert!(text.starts_with("t,delta,K0,K1,K2,sx,sy,sz,rho_re_00"));
    assert_eq!(text.lines().count(), 1 + 6);
    assert!(!text.contains("-0.0000000000000000e0"));
    assert!(files.iter().any(|f| f.ends_with(".json")));
}

#[test]
fn validation_errors_exit_2() {
    for args in [
        &["run", "fig4_model1", "--set", "no.such_key=1"][..],
        &["run", "fig4_model1", "--set", "time.dt=-1"],
        &["run", "not_a_preset"],
        &["regions", "--eta", "-3"],
    ] {
        let o = nmqj(args);
        assert_eq!(o.status.code(), Some(2), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    }
}

#[test]
fn numerical_guard_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let o = nmqj(&[
        "run",
        "fig4_model1",
        "--out",
        dir.path().to_str().unwrap(),
        "--set",
        "ledger.overflow_threshold=1e-6",
    ]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
}
