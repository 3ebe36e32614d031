use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn eventnet(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_eventnet"))
        .args(args)
        .current_dir(cwd)
        .env_remove("EVENTNET_OUT")
        .output()
        .unwrap()
}

const SMOKE: &[&str] = &["--epochs", "2", "--steps", "100", "--seeds", "1,2", "--test-iterations", "2", "--test-steps", "50"];

fn run_args<'a>(suite: &'a str, out: &'a str, extra: &[&'a str]) -> Vec<&'a str> {
    let mut v = vec!["run", suite, "--quiet", "--out", out];
    v.extend_from_slice(SMOKE);
    v.extend_from_slice(extra);
    v
}

#[test]
fn run_writes_table_shaped_output() {
    let dir = tempfile::tempdir().unwrap();
    let out = eventnet(&run_args("table1", "t1", &["--jobs", "2"]), dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let table = fs::read_to_string(dir.path().join("t1/table.csv")).unwrap();
    let mut lines = table.lines();
    assert_eq!(lines.next().unwrap(), "condition,lstm_mean,lstm_stdev,mlp_mean,mlp_stdev");
    let rows: Vec<&str> = lines.map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(rows, ["no-ci", "ci-fixed", "ci-random", "ci-early"]);
}

#[test]
fn unknown_suite_fails() {
    let dir = tempfile::tempdir().unwrap();
    let out = eventnet(&["run", "table7"], dir.path());
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown suite"));
}

#[test]
fn bad_config_reports_its_line() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("bad.toml"), "epochs = 3\nlr = \"fast\"\n").unwrap();
    let out = eventnet(&["run", "table2", "--config", "bad.toml"], dir.path());
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("bad.toml") && err.contains("line 2"), "{err}");
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("c.toml"), "epochs = 3\ntest_steps = 40\nupdate = \"fixed(25)\"\n").unwrap();
    let out = eventnet(
        &["run", "table2", "--quiet", "--config", "c.toml", "--epochs", "1", "--steps", "60", "--seeds", "4", "--test-iterations", "1", "--out", "o"],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let m = eventnet::harness::RunManifest::read(&dir.path().join("o/manifest.toml")).unwrap();
    assert_eq!(m.config.epochs, 1);
    assert_eq!(m.config.test_steps, 40);
    assert_eq!(m.config.update.to_string(), "fixed(25)");
    assert_eq!(m.config.lr, 1e-4);
    assert_eq!(m.seeds, vec![4]);
}

#[test]
fn output_dir_defaults_to_env_var() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec!["run", "table2", "--quiet"];
    args.extend_from_slice(SMOKE);
    let out = Command::new(env!("CARGO_BIN_EXE_eventnet"))
        .args(&args)
        .current_dir(dir.path())
        .env("EVENTNET_OUT", dir.path().join("base"))
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(dir.path().join("base/table2/manifest.toml").is_file());
}

#[test]
fn manifest_rerun_is_byte_identical_across_job_counts() {
    let dir = tempfile::tempdir().unwrap();
    assert!(eventnet(&run_args("table4", "first", &["--jobs", "1"]), dir.path()).status.success());
    for (jobs, name) in [("1", "serial"), ("8", "parallel")] {
        let out = eventnet(&["run", "--manifest", "first/manifest.toml", "--quiet", "--jobs", jobs, "--out", name], dir.path());
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let m = eventnet::harness::RunManifest::read(&dir.path().join("first/manifest.toml")).unwrap();
    for f in &m.files {
        let a = fs::read(dir.path().join("serial").join(f)).unwrap();
        assert_eq!(a, fs::read(dir.path().join("parallel").join(f)).unwrap(), "{f}");
        assert_eq!(a, fs::read(dir.path().join("first").join(f)).unwrap(), "{f}");
    }
}

#[test]
fn plot_renders_figures() {
    let dir = tempfile::tempdir().unwrap();
    assert!(eventnet(&run_args("table2", "r", &[]), dir.path()).status.success());
    let out = eventnet(&["plot", "r"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let plots = dir.path().join("r/plots");
    for name in ["error_open-at-switch.svg", "gates_gradual__seed1.svg", "compression_always-open__seed2.svg", "codes_open-at-switch.svg"] {
        let svg = fs::read_to_string(plots.join(name)).unwrap();
        assert!(svg.starts_with("<svg"), "{name}");
    }
}

#[test]
fn plot_rejects_empty_dir() {
    let dir = tempfile::tempdir().unwrap();
    fs::create_dir(dir.path().join("empty")).unwrap();
    let out = eventnet(&["plot", "empty"], dir.path());
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("runs/*.csv"));
}

#[test]
fn gradcheck_passes_and_lists_components() {
    let dir = tempfile::tempdir().unwrap();
    let out = eventnet(&["gradcheck", "--seeds", "2"], dir.path());
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    let lines: Vec<&str> = text.lines().collect();
    assert!(lines.len() >= 4);
    for comp in ["mlp", "lstm", "switch-gru", "hierarchy"] {
        assert!(lines.iter().any(|l| l.starts_with(comp) && l.ends_with("pass")), "{comp}: {text}");
    }
}

#[test]
fn gen_fixtures_exports_streams() {
    let dir = tempfile::tempdir().unwrap();
    let out = eventnet(&["gen-fixtures", "--out", "fx", "--steps", "30"], dir.path());
    assert!(out.status.success());
    let files: Vec<_> = fs::read_dir(dir.path().join("fx")).unwrap().collect();
    assert_eq!(files.len(), 2 * 3 * 4);
    let text = fs::read_to_string(dir.path().join("fx/fixed_early-switch_gradual_seed1.csv")).unwrap();
    assert_eq!(text.lines().count(), 31);
    assert!(text.starts_with("t,x,y,target,event,ci0,ci1,ci2,ci3,surprise\n"));
}
