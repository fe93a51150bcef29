use std::path::Path;
use std::process::{Command, Output};

fn svev(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_svev")).current_dir(dir).args(args).output().expect("run svev")
}

fn kv(path: &Path) -> Vec<(String, String)> {
    svev::ensembles::parse_kv(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn get(kv: &[(String, String)], key: &str) -> Option<String> {
    kv.iter().find(|(k, _)| k == key).map(|(_, v)| v.clone())
}

fn csv(path: &Path) -> (String, Vec<Vec<f64>>) {
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap().to_string();
    let rows = lines.map(|l| l.split(',').map(|v| v.parse().unwrap()).collect()).collect();
    (header, rows)
}

#[test]
fn density_writes_tables_and_sidecars() {
    let dir = tempfile::tempdir().unwrap();
    let out = svev(dir.path(), &["density", "--n", "3", "--alpha", "0.5", "--count", "40", "--out", "d"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let (header, rows) = csv(&dir.path().join("d/rho_sv.csv"));
    assert_eq!(header, "x,value");
    assert_eq!(rows.len(), 40);
    assert!(rows.iter().all(|r| r[1] >= 0.0 && r[1].is_finite()));
    let meta = kv(&dir.path().join("d/rho_ev.meta"));
    assert_eq!(get(&meta, "n").as_deref(), Some("3"));
    assert_eq!(get(&meta, "family").as_deref(), Some("laguerre"));
    assert_eq!(get(&meta, "grid_spacing").as_deref(), Some("log"));
}

#[test]
fn large_n_in_double_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = svev(dir.path(), &["density", "--n", "20"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("double-double"));
}

#[test]
fn config_file_and_flag_precedence() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("run.cfg"), "family=jacobi\nn=4\nalpha=0.5\nbeta=0.5\nlambda_count=6\nr_count=5\n").unwrap();
    let out = svev(dir.path(), &["cov-grid", "--config", "run.cfg", "--n", "3", "--out", "c"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let (header, rows) = csv(&dir.path().join("c/cov.csv"));
    assert_eq!(header, "lambda,r,value");
    assert_eq!(rows.len(), 30);
    let meta = kv(&dir.path().join("c/cov.meta"));
    assert_eq!(get(&meta, "n").as_deref(), Some("3"));
    assert_eq!(get(&meta, "family").as_deref(), Some("jacobi"));
    assert_eq!(get(&meta, "config_file").as_deref(), Some("run.cfg"));

    std::fs::write(dir.path().join("bad.cfg"), "no_such_key=1\n").unwrap();
    assert_eq!(svev(dir.path(), &["density", "--config", "bad.cfg"]).status.code(), Some(2));
}

#[test]
fn conditional_paths() {
    let dir = tempfile::tempdir().unwrap();
    let out = svev(dir.path(), &["conditional", "--a", "0.5,1,2", "--count", "2001", "--out", "k"]);
    assert_eq!(out.status.code(), Some(0));
    let meta = kv(&dir.path().join("k/conditional.meta"));
    let mass: f64 = get(&meta, "trapezoid_mass").unwrap().parse().unwrap();
    assert!((mass - 1.0).abs() < 1e-3, "{mass}");
    assert_eq!(get(&meta, "path").as_deref(), Some("determinant"));

    let out = svev(dir.path(), &["conditional", "--a", "1,1,2", "--count", "201", "--out", "t"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stderr).contains("warning"));
    let meta = kv(&dir.path().join("t/conditional.meta"));
    assert!(get(&meta, "warning").is_some());

    let out = svev(dir.path(), &["conditional", "--a", "0.4,1.6", "--out", "two"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(get(&kv(&dir.path().join("two/conditional.meta")), "path").as_deref(), Some("n2_closed"));

    assert_eq!(svev(dir.path(), &["conditional", "--a", "1"]).status.code(), Some(2));
}

#[test]
fn sample_is_reproducible_and_compared() {
    let dir = tempfile::tempdir().unwrap();
    let args = |o: &'static str, t: &'static str| ["--threads", t, "sample", "--n", "3", "--draws", "5000", "--bins", "8", "--seed", "11", "--out", o];
    let a = svev(dir.path(), &args("a", "1"));
    assert_eq!(a.status.code(), Some(0), "{}", String::from_utf8_lossy(&a.stdout));
    let b = svev(dir.path(), &args("b", "3"));
    assert_eq!(b.status.code(), Some(0));
    for f in ["joint.csv", "ev.csv", "sv.csv", "cov_estimate.csv"] {
        assert_eq!(std::fs::read(dir.path().join("a").join(f)).unwrap(), std::fs::read(dir.path().join("b").join(f)).unwrap(), "{f}");
    }
    let meta = kv(&dir.path().join("a/sample.meta"));
    assert_eq!(get(&meta, "seed").as_deref(), Some("11"));
    assert_eq!(get(&meta, "audits_clean").as_deref(), Some("true"));
    assert_eq!(get(&meta, "joint_vs_f11_pass").as_deref(), Some("true"));
    let (header, _) = csv(&dir.path().join("a/joint.csv"));
    assert_eq!(header, "r_lo,r_hi,a_lo,a_hi,density,stderr");

    let bad = svev(dir.path(), &["sample", "--model", "truncated", "--n", "3", "--m", "5"]);
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn verify_quick_and_mutation() {
    let dir = tempfile::tempdir().unwrap();
    let ok = svev(dir.path(), &["verify", "--suite", "quick"]);
    let table = String::from_utf8_lossy(&ok.stdout);
    assert_eq!(ok.status.code(), Some(0), "{table}");
    assert!(table.lines().filter(|l| l.starts_with("PASS")).count() > 20);
    let flipped = svev(dir.path(), &["verify", "--suite", "quick", "--inject-psi0-flip"]);
    assert_eq!(flipped.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&flipped.stdout).contains("FAIL triangle"));
}
