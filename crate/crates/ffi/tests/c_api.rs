use std::ffi::{CStr, CString};
use std::ptr;

use mpa_ffi::*;

fn last_error() -> String {
    let p = mpa_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn indefinite_ground_state() {
    unsafe {
        let mut p = ptr::null_mut();
        assert_eq!(mpa_problem_indefinite_new(16, 0.0, 4.0, &mut p), MpaStatus::Ok);
        assert_eq!(mpa_problem_components(p), 1);
        assert_eq!(mpa_problem_vertices(p), 17 * 17);
        assert_eq!(mpa_problem_negative_dim(p), 0);
        let mut s = ptr::null_mut();
        assert_eq!(mpa_solve(p, ptr::null(), ptr::null(), 0, &mut s), MpaStatus::Ok);
        assert_eq!(mpa_solution_converged(s), 1);
        assert!(mpa_solution_grad_norm(s) <= 1e-4);
        let e = mpa_solution_energy(s);
        assert!(e > 30.0 && e < 45.0, "{e}");
        let mut values = vec![f64::NAN; 17 * 17];
        assert_eq!(mpa_solution_values(s, 0, values.as_mut_ptr(), values.len()), MpaStatus::Ok);
        assert_eq!(values[0], 0.0);
        assert!(values[8 * 17 + 8] > 0.0);
        assert_eq!(mpa_solution_values(s, 1, values.as_mut_ptr(), values.len()), MpaStatus::InvalidArgument);
        assert!(last_error().contains("component 1"));
        assert_eq!(mpa_solution_values(s, 0, values.as_mut_ptr(), 3), MpaStatus::InvalidArgument);

        // restarting from the solution takes no steps
        let mut again = ptr::null_mut();
        assert_eq!(mpa_solve(p, ptr::null(), values.as_ptr(), values.len(), &mut again), MpaStatus::Ok);
        assert_eq!(mpa_solution_steps(again), 0);
        mpa_solution_free(again);
        mpa_solution_free(s);
        mpa_problem_free(p);
    }
}

#[test]
fn system_with_settings() {
    unsafe {
        let mut p = ptr::null_mut();
        assert_eq!(mpa_problem_system_new(12, 1.0, 4.0, -1.0, 0, &mut p), MpaStatus::Ok);
        assert_eq!(mpa_problem_components(p), 2);
        assert_eq!(mpa_problem_negative_dim(p), -1);
        let mut settings = mpa_settings_default();
        settings.max_iters = 1;
        settings.rule = MpaStepRule::Tilde;
        let mut s = ptr::null_mut();
        assert_eq!(mpa_solve(p, &settings, ptr::null(), 0, &mut s), MpaStatus::Ok);
        assert_eq!(mpa_solution_converged(s), 0);
        assert_eq!(mpa_solution_steps(s), 1);
        mpa_solution_free(s);

        settings.alpha = 2.0;
        assert_eq!(mpa_solve(p, &settings, ptr::null(), 0, &mut s), MpaStatus::InvalidArgument);
        assert!(last_error().contains("alpha"));
        let bad = [0.0; 5];
        assert_eq!(mpa_solve(p, ptr::null(), bad.as_ptr(), bad.len(), &mut s), MpaStatus::InvalidArgument);
        mpa_problem_free(p);
    }
}

#[test]
fn errors_are_reported() {
    unsafe {
        let mut p = ptr::null_mut();
        assert_eq!(mpa_problem_indefinite_new(1, 0.0, 4.0, &mut p), MpaStatus::Config);
        assert!(p.is_null());
        assert!(!last_error().is_empty());
        assert_eq!(mpa_problem_indefinite_new(8, 0.0, 4.0, ptr::null_mut()), MpaStatus::NullPointer);
        assert_eq!(mpa_solve(ptr::null(), ptr::null(), ptr::null(), 0, ptr::null_mut()), MpaStatus::NullPointer);
        assert!(mpa_solution_energy(ptr::null()).is_nan());
        assert_eq!(mpa_problem_components(ptr::null()), 0);
        mpa_problem_free(ptr::null_mut());
        mpa_solution_free(ptr::null_mut());

        let text = CString::new("problem.kind = indefinite\nproblem.potental = 0\n").unwrap();
        assert_eq!(mpa_problem_from_config(text.as_ptr(), &mut p), MpaStatus::Config);
        assert!(last_error().contains("potental"));
        // success clears the message
        let text = CString::new("problem.kind = indefinite\nproblem.potential = -21\nmesh.n = 12\n").unwrap();
        assert_eq!(mpa_problem_from_config(text.as_ptr(), &mut p), MpaStatus::Ok);
        assert!(mpa_last_error_message().is_null());
        assert_eq!(mpa_problem_negative_dim(p), 1);
        mpa_problem_free(p);
    }
}
