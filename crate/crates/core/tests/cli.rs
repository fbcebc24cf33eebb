use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn mpa(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mpa")).args(args).output().unwrap()
}

fn write_config(dir: &Path, name: &str, body: &str) -> String {
    let out = dir.join("runs");
    let text = format!("{body}\noutput.dir = {}\n", out.display());
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn run_dir(o: &Output) -> String {
    stdout(o)
        .lines()
        .find_map(|l| l.strip_prefix("output=").map(str::to_owned))
        .expect("output directory printed")
}

#[test]
fn solve_writes_all_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "v0.cfg",
        "# ground state\nproblem.kind = indefinite\nproblem.potential = 0\nmesh.n = 12",
    );
    let o = mpa(&["solve", &cfg]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).starts_with("grad_norm,steps,energy\n"));
    let dir = run_dir(&o);
    for f in ["config.txt", "solution.csv", "trace.csv", "summary.txt"] {
        assert!(Path::new(&dir).join(f).is_file(), "{f}");
    }
    let trace = fs::read_to_string(Path::new(&dir).join("trace.csv")).unwrap();
    assert!(trace.starts_with("iter,energy,grad_norm,step,sup_s,inner_iters,margin\n"));
    let solution = fs::read_to_string(Path::new(&dir).join("solution.csv")).unwrap();
    assert_eq!(solution.lines().count(), 13 * 13);
    // boundary vertex first, value zero
    assert_eq!(solution.lines().next().unwrap().split(',').count(), 3);
    assert!(solution.starts_with("0,0,0\n"));

    // the echoed config reproduces the run bit for bit
    let echo = Path::new(&dir).join("config.txt");
    let again = mpa(&["solve", echo.to_str().unwrap()]);
    assert_eq!(again.status.code(), Some(0));
    assert_eq!(run_dir(&again), dir);
    assert_eq!(fs::read_to_string(Path::new(&dir).join("trace.csv")).unwrap(), trace);
}

#[test]
fn system_summary_reports_maxima() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "sys.cfg",
        "[problem]\nkind = system\nmu = 1, 4\nbeta = 0, -1; -1, 0\n[mesh]\nn = 12",
    );
    let o = mpa(&["solve", &cfg]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).starts_with("grad_norm,steps,energy,max_u1,max_u2\n"));
    let solution = fs::read_to_string(Path::new(&run_dir(&o)).join("solution.csv")).unwrap();
    assert!(solution.lines().all(|l| l.split(',').count() == 4));
}

#[test]
fn max_iters_exit_code() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "short.cfg",
        "problem.kind = indefinite\nproblem.potential = -21\nmesh.n = 12\nmpa.max_iters = 1",
    );
    let o = mpa(&["solve", &cfg]);
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn config_errors_exit_64_without_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    for (name, body) in [
        ("unknown.cfg", "problem.kind = indefinite\nproblem.potental = 0"),
        ("alpha.cfg", "problem.kind = indefinite\nmpa.alpha = 1.5"),
        ("mesh.cfg", "problem.kind = indefinite\nmesh.n = 1"),
        ("dup.cfg", "problem.kind = indefinite\nmesh.n = 8\nmesh.n = 9"),
    ] {
        let cfg = write_config(tmp.path(), name, body);
        let o = mpa(&["solve", &cfg]);
        assert_eq!(o.status.code(), Some(64), "{name}: {}", String::from_utf8_lossy(&o.stderr));
    }
    assert!(!tmp.path().join("runs").exists());
    assert_eq!(mpa(&["solve", "/nonexistent/config"]).status.code(), Some(64));
}

#[test]
fn usage_errors_exit_64() {
    assert_eq!(mpa(&[]).status.code(), Some(64));
    assert_eq!(mpa(&["frobnicate"]).status.code(), Some(64));
    assert_eq!(mpa(&["reproduce", "table3"]).status.code(), Some(64));
    assert_eq!(mpa(&["--help"]).status.code(), Some(0));
}

#[test]
fn eig_reports_negative_dimension() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "eig.cfg", "problem.kind = indefinite\nproblem.potential = -80\nmesh.n = 48");
    let o = mpa(&["eig", &cfg]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("dim_negative=4"));
    let eigs = fs::read_to_string(Path::new(&run_dir(&o)).join("eigs.csv")).unwrap();
    assert!(eigs.starts_with("index,lambda,residual\n"));

    let cfg = write_config(tmp.path(), "eig0.cfg", "problem.kind = indefinite\nproblem.potential = 0\nmesh.n = 16");
    assert!(stdout(&mpa(&["eig", &cfg])).contains("dim_negative=0"));
}

#[test]
fn eig_rejects_systems() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "s.cfg", "problem.kind = system\nproblem.mu = 1, 4\nproblem.beta = 0, 0; 0, 0");
    assert_eq!(mpa(&["eig", &cfg]).status.code(), Some(64));
}

#[test]
fn seed_from_file() {
    let tmp = tempfile::tempdir().unwrap();
    let first = write_config(tmp.path(), "a.cfg", "problem.kind = indefinite\nproblem.potential = 0\nmesh.n = 10");
    let o = mpa(&["solve", &first]);
    let seed = Path::new(&run_dir(&o)).join("solution.csv");
    let second = write_config(
        tmp.path(),
        "b.cfg",
        &format!("problem.kind = indefinite\nproblem.potential = 0\nmesh.n = 10\nseed.u0 = file:{}", seed.display()),
    );
    let o = mpa(&["solve", &second]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    // starting at the solution: converged without a step
    assert!(stdout(&o).lines().nth(1).unwrap().split(',').nth(1) == Some("0"));
}
