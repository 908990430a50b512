use std::path::Path;
use std::process::{Command, Output};

fn sord(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sord"))
        .args(args)
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn small_config(dir: &Path) -> std::path::PathBuf {
    let path = dir.join("small.cfg");
    std::fs::write(
        &path,
        "scheme = onehot, learned\nsizes = 40, 80\nseeds = 0, 1\nsteps = 40\n\
         checkpoint_interval = 20\nval_per_class = 10\ntest_per_class = 20\nhidden = 8\n",
    )
    .unwrap();
    path
}

#[test]
fn encode_matches_golden_file() {
    let o = sord(&[
        "encode",
        "--scheme",
        "sord_circular",
        "--k",
        "4",
        "--s",
        "1",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let golden = include_str!("golden/sord_circular_k4_s1.txt");
    assert_eq!(stdout(&o), golden);

    // Row 0 at distances 0, π/2, π, π/2 with s = 1.
    let w = [0.0f64, 1.0, 4.0, 1.0].map(|q| (-(q * std::f64::consts::FRAC_PI_2.powi(2))).exp());
    let z: f64 = w.iter().sum();
    let first: Vec<f64> = golden
        .lines()
        .next()
        .unwrap()
        .split_whitespace()
        .map(|v| v.parse().unwrap())
        .collect();
    for (got, want) in first.iter().zip(w.map(|v| v / z)) {
        assert!((got - want).abs() < 1e-15, "{got} vs {want}");
    }
}

#[test]
fn plsord_encode_lists_every_candidate() {
    let o = sord(&["encode", "--scheme", "plsord", "--k", "4", "--s", "1"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert_eq!(
        text.lines()
            .filter(|l| l.starts_with("# candidate"))
            .count(),
        3
    );
    assert_eq!(text.lines().filter(|l| !l.starts_with('#')).count(), 12);
}

#[test]
fn missing_scale_is_reported() {
    let o = sord(&["encode", "--scheme", "sord_linear", "--k", "4"]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("`s`"), "{}", stderr(&o));
}

#[test]
fn unknown_config_key_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.cfg");
    std::fs::write(&path, "scheme = onehot\nlearning_rte = 0.1\n").unwrap();
    let o = sord(&["sweep", "--config", path.to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("learning_rte"), "{}", stderr(&o));
}

#[test]
fn sweep_then_report_reproduces_summary() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let out = dir.path().join("out");
    let o = sord(&[
        "sweep",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let reports = std::fs::read_dir(out.join("runs")).unwrap().count();
    assert_eq!(reports, 2 * 2 * 2);
    let csv = std::fs::read_to_string(out.join("summary.csv")).unwrap();
    assert!(stdout(&o).ends_with(&csv));

    std::fs::remove_file(out.join("summary.csv")).unwrap();
    let o = sord(&["report", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(
        std::fs::read_to_string(out.join("summary.csv")).unwrap(),
        csv
    );
    assert_eq!(stdout(&o), csv);
}

#[test]
fn train_writes_one_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let out = dir.path().join("out");
    let o = sord(&[
        "train",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--scheme",
        "learned",
        "--size",
        "40",
        "--seed",
        "7",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(std::fs::read_dir(out.join("runs")).unwrap().count(), 1);
}

#[test]
fn generate_is_deterministic() {
    let a = sord(&["generate", "--seed", "3"]);
    let b = sord(&["generate", "--seed", "3"]);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    assert_ne!(a.stdout, sord(&["generate", "--seed", "4"]).stdout);
}

#[test]
fn gradcheck_passes() {
    let o = sord(&["gradcheck"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(stdout(&o).lines().count(), 4);
}
