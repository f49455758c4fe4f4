use std::ffi::{CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use switchopt_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(swo_last_error_message()) }
        .to_string_lossy()
        .into_owned()
}

fn example() -> *mut SwoProblem {
    let name = CString::new("paper_example").unwrap();
    let mut p = ptr::null_mut();
    assert_eq!(unsafe { swo_problem_builtin(name.as_ptr(), &mut p) }, SwoStatus::SwoOk);
    p
}

#[test]
fn errors_map_to_codes_and_messages() {
    unsafe {
        let name = CString::new("missing").unwrap();
        let mut p = ptr::null_mut();
        assert_eq!(swo_problem_builtin(name.as_ptr(), &mut p), SwoStatus::SwoUnknownProblem);
        assert!(p.is_null());
        assert!(last_error().contains("missing"), "{}", last_error());

        assert_eq!(swo_problem_builtin(ptr::null(), &mut p), SwoStatus::SwoNullPointer);

        let bad = [0.7, 0.7];
        let mut s = ptr::null_mut();
        assert_eq!(swo_signal_new(2.0, 1, 2, bad.as_ptr(), &mut s), SwoStatus::SwoInvalidArgument);

        let path = CString::new("/nonexistent/problem.toml").unwrap();
        assert_eq!(swo_problem_load(path.as_ptr(), &mut p), SwoStatus::SwoIo);

        let half = [0.5, 0.5];
        assert_eq!(swo_signal_new(2.0, 1, 2, half.as_ptr(), &mut s), SwoStatus::SwoOk);
        assert_eq!(last_error(), "");
        assert_eq!(swo_project(s, 0, &mut ptr::null_mut()), SwoStatus::SwoInvalidArgument);
        swo_signal_free(s);

        // Freeing null is a no-op.
        swo_signal_free(ptr::null_mut());
        swo_problem_free(ptr::null_mut());
        swo_result_free(ptr::null_mut());
    }
}

#[test]
fn projection_keeps_duty_cycles() {
    unsafe {
        let w = [0.25, 0.75, 1.0, 0.0];
        let mut s = ptr::null_mut();
        assert_eq!(swo_signal_new(2.0, 2, 2, w.as_ptr(), &mut s), SwoStatus::SwoOk);
        let mut pure = ptr::null_mut();
        assert_eq!(swo_project(s, 1, &mut pure), SwoStatus::SwoOk);
        let n = swo_signal_n_cells(pure);
        let mut b = vec![0.0; n + 1];
        let mut d = vec![0.0; 2 * n];
        assert_eq!(swo_signal_boundaries(pure, b.as_mut_ptr(), b.len()), SwoStatus::SwoOk);
        assert_eq!(swo_signal_weights(pure, d.as_mut_ptr(), d.len()), SwoStatus::SwoOk);
        let mode1_time: f64 = (0..n).map(|c| (b[c + 1] - b[c]) * d[2 * c]).sum();
        assert!((mode1_time - (0.25 + 1.0)).abs() < 1e-12);
        let mut short = [0.0; 1];
        assert_eq!(swo_signal_boundaries(pure, short.as_mut_ptr(), 1), SwoStatus::SwoBufferTooSmall);
        swo_signal_free(pure);
        swo_signal_free(s);
    }
}

#[test]
fn solve_through_the_c_interface() {
    unsafe {
        let p = example();
        let mut s0 = ptr::null_mut();
        assert_eq!(swo_signal_initial(p, 256, &mut s0), SwoStatus::SwoOk);
        let mut x = [0.0; 2];
        let mut j = 0.0;
        assert_eq!(swo_simulate(p, s0, 4, x.as_mut_ptr(), 2, &mut j), SwoStatus::SwoOk);
        assert!((j - 1.1228).abs() < 1e-3, "{j}");

        let mut r = ptr::null_mut();
        assert_eq!(swo_solve(p, s0, 7, 10, &mut r), SwoStatus::SwoInvalidArgument);
        assert_eq!(
            swo_solve(p, s0, SwoTopology::SwoFullTrajectory as u32, 50, &mut r),
            SwoStatus::SwoOk
        );
        let mut status = SwoSolveStatus::SwoStationary;
        let mut cost = 0.0;
        let mut iters = 0;
        assert_eq!(swo_result_summary(r, &mut status, &mut cost, &mut iters), SwoStatus::SwoOk);
        assert_eq!(status, SwoSolveStatus::SwoStalled);
        assert!(cost < j);
        let mut xt = [0.0; 2];
        assert_eq!(swo_result_terminal_state(r, xt.as_mut_ptr(), 2), SwoStatus::SwoOk);
        let mut sol = ptr::null_mut();
        assert_eq!(swo_result_solution(r, &mut sol), SwoStatus::SwoOk);
        let mut theta = 1.0;
        let mut dir = ptr::null_mut();
        assert_eq!(swo_theta(p, sol, 4, &mut theta, &mut dir), SwoStatus::SwoOk);
        assert!(theta <= 0.0);
        assert_eq!(swo_signal_n_cells(dir), swo_signal_n_cells(sol));

        swo_signal_free(dir);
        swo_signal_free(sol);
        swo_result_free(r);
        swo_signal_free(s0);
        swo_problem_free(p);
    }
}

/// Compiles a C program against the generated header and the static
/// library and runs it.
#[test]
fn c_program_links_and_runs() {
    let crate_dir = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let header_dir = crate_dir.join("include");
    assert!(header_dir.join("switchopt.h").is_file());
    // target/<profile>/deps/api-<hash> -> target/<profile>
    let exe = std::env::current_exe().unwrap();
    let profile_dir = exe.parent().and_then(|d| d.parent()).unwrap();
    let lib = profile_dir.join("libswitchopt_ffi.a");
    assert!(lib.is_file(), "static library not found at {}", lib.display());
    let out = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("swo_smoke");
    let cc = std::env::var("CC").unwrap_or_else(|_| "cc".into());
    let status = Command::new(cc)
        .arg("-std=c99")
        .arg("-Wall")
        .arg("-Werror")
        .arg("-I")
        .arg(&header_dir)
        .arg(crate_dir.join("tests/c/smoke.c"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&out)
        .status()
        .expect("C compiler runs");
    assert!(status.success());
    let run = Command::new(&out).output().unwrap();
    assert!(run.status.success(), "exit {:?}: {}", run.status.code(), String::from_utf8_lossy(&run.stderr));
    assert!(String::from_utf8_lossy(&run.stdout).starts_with("x(tf) = "));
}
