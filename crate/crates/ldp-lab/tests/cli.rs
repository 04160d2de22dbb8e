//! Drives the installed binary end to end: config parsing, artifact
//! shapes, exit codes, and seed determinism through the process boundary.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use ldp_lab::model::Dataset;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_ldp-lab"));
    c.env_remove("LDP_LAB_THREADS");
    c
}

fn write_config(dir: &Path, body: &str) -> PathBuf {
    let path = dir.join("run.toml");
    fs::write(&path, body).unwrap();
    path
}

fn small_config(out_dir: &Path) -> String {
    format!(
        r#"
seed = 5
out_dir = "{}"
trials = 2
[model]
n_items = 16
n_users = 3000
alpha = [1.0]
beta = [0.5, 0.5]
affinity = [[0.9, 0.1]]
rated_per_user = 4
epsilon = 1.0
"#,
        out_dir.display()
    )
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn version_and_help_exit_zero() {
    for flag in ["--version", "--help"] {
        let out = bin().arg(flag).output().unwrap();
        assert_eq!(out.status.code(), Some(0), "{flag}: {}", stderr(&out));
    }
    let out = bin().args(["gen", "--help"]).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn gen_writes_a_deterministic_readable_dataset() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), &small_config(tmp.path()));
    let first = tmp.path().join("a.txt");
    let second = tmp.path().join("b.txt");

    for out_path in [&first, &second] {
        let out = bin()
            .args(["gen", "--config"])
            .arg(&cfg)
            .arg("--out")
            .arg(out_path)
            .output()
            .unwrap();
        assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    }
    assert_eq!(
        fs::read(&first).unwrap(),
        fs::read(&second).unwrap(),
        "same seed must give byte-identical datasets"
    );

    let text = fs::read_to_string(&first).unwrap();
    assert!(text.starts_with("#ldp-dataset v1"), "missing format header");
    assert!(text.lines().nth(1).unwrap().starts_with('#'), "missing provenance line");

    let dataset = Dataset::read_file(&first).unwrap();
    assert_eq!(dataset.users.len(), 3000);
    assert_eq!(dataset.item_class.len(), 16);
    for user in &dataset.users {
        assert_eq!(user.items.len(), 4);
    }
}

#[test]
fn emitted_sample_config_is_accepted_back() {
    let tmp = tempfile::tempdir().unwrap();
    let out = bin().args(["gen", "--emit-config"]).output().unwrap();
    assert_eq!(out.status.code(), Some(0));

    // Shrink the sample so the round trip stays fast, keeping its shape.
    let sample = stdout(&out)
        .replace("n_users = 50000", "n_users = 500")
        .replace("out = \"out\"", "")
        .replace("out_dir = \"out\"", &format!("out_dir = \"{}\"", tmp.path().display()));
    let cfg = write_config(tmp.path(), &sample);
    let run = bin()
        .args(["gen", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(tmp.path().join("d.txt"))
        .output()
        .unwrap();
    assert_eq!(run.status.code(), Some(0), "{}", stderr(&run));
}

#[test]
fn single_trial_subcommands_print_results() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), &small_config(tmp.path()));

    let ms = bin()
        .args(["maxsense", "--config"])
        .arg(&cfg)
        .output()
        .unwrap();
    assert_eq!(ms.status.code(), Some(0), "{}", stderr(&ms));
    assert!(stdout(&ms).contains("maxsense N=16"));

    let pp = bin()
        .args(["pp", "--mode", "random-rated", "--config"])
        .arg(&cfg)
        .output()
        .unwrap();
    assert_eq!(pp.status.code(), Some(0), "{}", stderr(&pp));
    assert!(stdout(&pp).contains("pairwise N=16"));

    let mms = bin()
        .args(["mms", "--questions", "2", "--config"])
        .arg(&cfg)
        .output()
        .unwrap();
    assert_eq!(mms.status.code(), Some(0), "{}", stderr(&mms));
    assert!(stdout(&mms).contains("Q=2"));
}

#[test]
fn sweep_csv_ignores_the_thread_count() {
    let tmp = tempfile::tempdir().unwrap();
    let body = small_config(tmp.path())
        + r#"
[sweep]
algorithms = ["maxsense"]
users = [1000, 2000]
"#;
    let cfg = write_config(tmp.path(), &body);
    let one = tmp.path().join("t1.csv");
    let three = tmp.path().join("t3.csv");

    let a = bin()
        .args(["--threads", "1", "sweep", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&one)
        .output()
        .unwrap();
    assert_eq!(a.status.code(), Some(0), "{}", stderr(&a));

    let b = bin()
        .env("LDP_LAB_THREADS", "3")
        .args(["sweep", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&three)
        .output()
        .unwrap();
    assert_eq!(b.status.code(), Some(0), "{}", stderr(&b));

    let bytes_one = fs::read(&one).unwrap();
    assert_eq!(bytes_one, fs::read(&three).unwrap());

    let text = String::from_utf8(bytes_one).unwrap();
    assert!(text.starts_with("# ldp-lab "), "missing provenance header");
    assert!(text.contains("# seed 5"));
    assert!(
        text.contains("algorithm,N,U,K,L,w,epsilon,theta,Q,trials,successes,mean_misclass,ci_low,ci_high,seed0"),
        "sweep CSV header changed"
    );
}

#[test]
fn threshold_then_plot_produces_an_svg() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), &small_config(tmp.path()));
    let csv = tmp.path().join("threshold.csv");

    let th = bin()
        .args([
            "threshold",
            "--algorithm",
            "maxsense",
            "--items",
            "8,12,16",
            "--u0",
            "500",
            "--cap",
            "500000",
            "--config",
        ])
        .arg(&cfg)
        .arg("--out")
        .arg(&csv)
        .output()
        .unwrap();
    assert_eq!(th.status.code(), Some(0), "{}", stderr(&th));
    let text = fs::read_to_string(&csv).unwrap();
    assert!(text.contains("algorithm,N,w,epsilon,target,U_star,probes"));

    let svg_path = tmp.path().join("scaling.svg");
    let plot = bin()
        .args(["plot", "--x", "N", "--input"])
        .arg(&csv)
        .arg("--out")
        .arg(&svg_path)
        .output()
        .unwrap();
    assert_eq!(plot.status.code(), Some(0), "{}", stderr(&plot));
    assert!(stdout(&plot).contains("slope"), "expected a fitted slope line");
    let svg = fs::read_to_string(&svg_path).unwrap();
    assert!(svg.starts_with("<svg"), "not an SVG: {}", &svg[..svg.len().min(40)]);
}

#[test]
fn bounds_suite_exits_zero() {
    let out = bin()
        .args(["bounds", "--max-n", "2", "--kernels", "40"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert!(stdout(&out).contains("pass"));
}

#[test]
fn baseline_runs_both_schemes() {
    let out = bin()
        .args(["baseline", "--n-grid", "8,16", "--reps", "50"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("adaptive"));
    assert!(text.contains("coupon"));
}

#[test]
fn config_errors_exit_two() {
    let tmp = tempfile::tempdir().unwrap();

    let misspelled = small_config(tmp.path()).replace("n_items", "n_itemz");
    let cfg = write_config(tmp.path(), &misspelled);
    let out = bin().args(["gen", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("n_itemz"), "error must name the bad key");

    let body = small_config(tmp.path())
        + r#"
[sweep]
algorithms = []
users = []
"#;
    let empty_grid = write_config(tmp.path(), &body);
    let out = bin()
        .args(["sweep", "--config"])
        .arg(&empty_grid)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("empty"));

    let cfg_ok = write_config(tmp.path(), &small_config(tmp.path()));
    let out = bin()
        .args(["pp", "--mode", "bogus", "--config"])
        .arg(&cfg_ok)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn missing_files_exit_three() {
    let tmp = tempfile::tempdir().unwrap();
    let gone = tmp.path().join("nope.toml");
    let out = bin().args(["gen", "--config"]).arg(&gone).output().unwrap();
    assert_eq!(out.status.code(), Some(3), "{}", stderr(&out));

    let out = bin()
        .args(["plot", "--input"])
        .arg(tmp.path().join("nope.csv"))
        .arg("--out")
        .arg(tmp.path().join("x.svg"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3), "{}", stderr(&out));
}
