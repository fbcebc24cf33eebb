//! Compiles a C program against the generated header and the shared library.

use std::path::PathBuf;
use std::process::Command;

const PROGRAM: &str = r#"
#include <stdio.h>
#include "mpa.h"

int main(void) {
    MpaProblem *p = NULL;
    if (mpa_problem_indefinite_new(12, 0.0, 4.0, &p) != MPA_STATUS_OK) return 10;
    MpaSettings s = mpa_settings_default();
    MpaSolution *sol = NULL;
    if (mpa_solve(p, &s, NULL, 0, &sol) != MPA_STATUS_OK) return 11;
    double u[13 * 13];
    if (mpa_solution_values(sol, 0, u, 13 * 13) != MPA_STATUS_OK) return 12;
    printf("%d %.6f %.6f\n", mpa_solution_converged(sol), mpa_solution_energy(sol), u[6 * 13 + 6]);
    if (mpa_problem_indefinite_new(0, 0.0, 4.0, &p) == MPA_STATUS_OK) return 13;
    printf("%s\n", mpa_last_error_message());
    mpa_solution_free(sol);
    mpa_problem_free(p);
    return 0;
}
"#;

fn lib_dir() -> PathBuf {
    // target/<profile>/deps/c_header-<hash> -> target/<profile>
    let exe = std::env::current_exe().unwrap();
    exe.parent().unwrap().parent().unwrap().to_path_buf()
}

#[test]
fn c_program_links_and_runs() {
    let lib = lib_dir();
    if !lib.join("libmpa_ffi.so").exists() {
        eprintln!("shared library not built at {}; skipping", lib.display());
        return;
    }
    let include = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("include");
    let tmp = tempfile::tempdir().unwrap();
    let src = tmp.path().join("main.c");
    std::fs::write(&src, PROGRAM).unwrap();
    let exe = tmp.path().join("main");
    let status = Command::new("cc")
        .arg("-std=c99")
        .arg("-Wall")
        .arg("-Werror")
        .arg(&src)
        .arg("-I")
        .arg(&include)
        .arg("-L")
        .arg(&lib)
        .arg(format!("-Wl,-rpath,{}", lib.display()))
        .arg("-lmpa_ffi")
        .arg("-o")
        .arg(&exe)
        .status()
        .expect("C compiler available");
    assert!(status.success());
    let out = Command::new(&exe).output().unwrap();
    assert!(out.status.success(), "exit {:?}", out.status.code());
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    let first: Vec<&str> = lines.next().unwrap().split(' ').collect();
    assert_eq!(first[0], "1");
    let e: f64 = first[1].parse().unwrap();
    assert!(e > 30.0 && e < 45.0);
    assert!(first[2].parse::<f64>().unwrap() > 0.0);
    assert!(!lines.next().unwrap().is_empty());
}
