//! The `rai-audit` binary over a generated demo workspace.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rai_audit::pipeline::demo::{write_demo_workspace, DemoOptions};

fn workspace(dir: &Path) -> PathBuf {
    let opts = DemoOptions {
        max_depth: 2,
        k_range: [3, 3],
        n_restarts: 3,
        ..Default::default()
    };
    write_demo_workspace(dir, &opts).unwrap()
}

fn cli(args: &[&str], config: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rai-audit"))
        .args(args)
        .arg("--config")
        .arg(config)
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn run_prints_the_report() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = workspace(tmp.path());
    let o = cli(&["run"], &cfg);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.contains("Number of Suggestions"), "{out}");
    assert!(out.contains("Gender: female"), "{out}");
    assert!(out.lines().last().unwrap().starts_with("config "));
    assert!(tmp.path().join("out/report/report.csv").exists());
    assert!(!tmp.path().join("out/.rai-audit.lock").exists());
}

#[test]
fn stages_run_one_at_a_time() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = workspace(tmp.path());
    for stage in ["crawl", "prune", "preprocess", "vectorize", "cluster", "analyze", "report"] {
        let o = cli(&[stage], &cfg);
        assert!(o.status.success(), "{stage}: {}", stderr(&o));
    }
    let o = cli(&["crawl", "--resume"], &cfg);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("crawled 54 roots"), "{}", stdout(&o));
}

#[test]
fn missing_input_names_the_producing_stage() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = workspace(tmp.path());
    let o = cli(&["cluster"], &cfg);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("run `vectorize` first"), "{}", stderr(&o));
}

#[test]
fn bad_config_is_reported() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = workspace(tmp.path());
    let text = std::fs::read_to_string(&cfg).unwrap();
    std::fs::write(&cfg, text.replace("max_depth", "max_dept")).unwrap();
    let o = cli(&["run"], &cfg);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("max_dept"), "{}", stderr(&o));

    let o = cli(&["run"], &tmp.path().join("absent.toml"));
    assert!(!o.status.success());
    assert!(stderr(&o).contains("absent.toml"), "{}", stderr(&o));
}

#[test]
fn flags_override_the_config() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = workspace(tmp.path());
    let o = cli(&["run", "--mode", "multivariate", "--alpha", "0.01"], &cfg);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("p <= 0.01"), "{}", stdout(&o));
    let bias = std::fs::read_to_string(tmp.path().join("out/analyze/bias.json")).unwrap();
    assert!(bias.contains("\"multivariate\""), "{bias}");
}
