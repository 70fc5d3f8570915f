use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_opinf-schwarz"))
}

/// Writes a small config whose outputs land in the temp dir.
fn config(dir: &TempDir, extra: &str) -> PathBuf {
    let path = dir.path().join("exp.cfg");
    let body = format!(
        "# small static case\nnx = 8\nny = 8\nt_final = 0.2\nlayout = vertical\noverlap = 2\nout = {}\n{extra}",
        dir.path().join("out").display()
    );
    fs::write(&path, body).unwrap();
    path
}

fn run(cfg: &Path, args: &[&str]) -> Output {
    bin().arg("--config").arg(cfg).args(args).output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn monolithic_then_run_then_render() {
    let dir = TempDir::new().unwrap();
    let cfg = config(&dir, "models = rom,fom\nrank = 3\ndata = 10\n");
    let out = run(&cfg, &["monolithic"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let snapshots = dir.path().join("out/snapshots.csv");
    assert!(snapshots.exists());

    let out = run(&cfg, &["run"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert!(String::from_utf8_lossy(&out.stdout).contains("e_avg"));
    let stats = fs::read_to_string(dir.path().join("out/stats.csv")).unwrap();
    assert!(stats.starts_with("layout,model_assignment,overlap"));
    assert_eq!(stats.lines().count(), 2);

    let out = run(&cfg, &["render", snapshots.to_str().unwrap(), "--time", "0.1"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let image = fs::read(dir.path().join("out/snapshots_t0.1.ppm")).unwrap();
    assert!(image.starts_with(b"P6\n9 9\n255\n"));
}

#[test]
fn out_flag_overrides_the_config() {
    let dir = TempDir::new().unwrap();
    let cfg = config(&dir, "");
    let other = dir.path().join("elsewhere");
    let out = run(&cfg, &["--out", other.to_str().unwrap(), "monolithic"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert!(other.join("snapshots.csv").exists());
    assert!(!dir.path().join("out/snapshots.csv").exists());
}

#[test]
fn sweep_keeps_going_past_a_failed_value() {
    let dir = TempDir::new().unwrap();
    // two centered training columns leave a rank one basis at most
    let cfg = config(&dir, "models = rom,rom\ndata = 2\n");
    assert_eq!(code(&run(&cfg, &["monolithic"])), 0);
    let out = run(&cfg, &["sweep", "--axis", "rank", "--values", "2"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let sweep = fs::read_to_string(dir.path().join("out/sweep_rank.csv")).unwrap();
    let rows: Vec<&str> = sweep.lines().collect();
    assert_eq!(rows.len(), 2);
    assert!(rows[1].contains("error"), "{}", rows[1]);
    assert!(dir.path().join("out/pareto_rank.csv").exists());
}

#[test]
fn sweep_over_overlap() {
    let dir = TempDir::new().unwrap();
    let cfg = config(&dir, "");
    let out = run(&cfg, &["sweep", "--axis", "overlap", "--values", "1,2,3"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let sweep = fs::read_to_string(dir.path().join("out/sweep_overlap.csv")).unwrap();
    assert_eq!(sweep.lines().count(), 4);
    assert!(sweep.lines().skip(1).all(|l| l.ends_with(",ok")));
}

#[test]
fn configuration_problems_exit_with_one() {
    let dir = TempDir::new().unwrap();
    let cfg = config(&dir, "colour = blue\n");
    let out = run(&cfg, &["monolithic"]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("colour"));

    // ROM training needs the stored snapshots
    let cfg = config(&dir, "models = rom,rom\n");
    let out = run(&cfg, &["run"]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("monolithic"));

    let out = run(&cfg, &["sweep", "--axis", "data", "--values", "ten"]);
    assert_eq!(code(&out), 1);
}

#[test]
fn non_convergence_exits_with_two() {
    let dir = TempDir::new().unwrap();
    let cfg = config(&dir, "max_sweeps = 1\n");
    let out = run(&cfg, &["run"]);
    assert_eq!(code(&out), 2, "{}", stderr(&out));
}

#[test]
fn render_errors() {
    let dir = TempDir::new().unwrap();
    let cfg = config(&dir, "");
    assert_eq!(code(&run(&cfg, &["monolithic"])), 0);
    let snapshots = dir.path().join("out/snapshots.csv");
    let out = run(&cfg, &["render", snapshots.to_str().unwrap(), "--time", "0.55"]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("available times"));

    let missing = dir.path().join("nothing.csv");
    let out = run(&cfg, &["render", missing.to_str().unwrap(), "--time", "0"]);
    assert_eq!(code(&out), 3);
}
