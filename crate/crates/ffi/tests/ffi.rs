use std::ffi::{CStr, CString};
use std::ptr;

use deadline_mdp::bundled;
use deadline_mdp_ffi::*;

fn parse(text: &str) -> *mut DmSpec {
    let json = CString::new(text).unwrap();
    let mut spec = ptr::null_mut();
    let st = unsafe { dm_spec_parse(json.as_ptr(), &mut spec) };
    assert_eq!(st, DmStatus::Ok);
    spec
}

fn last_error() -> String {
    unsafe { CStr::from_ptr(dm_last_error_message()) }
        .to_str()
        .unwrap()
        .to_string()
}

#[test]
fn example1_round_trip() {
    let spec = parse(bundled::EXAMPLE1);
    let (mut n, mut l, mut f) = (0, 0, 0);
    assert_eq!(unsafe { dm_spec_shape(spec, &mut n, &mut l, &mut f) }, DmStatus::Ok);
    assert_eq!((n, l, f), (3, 4, 2));

    let mut sol = ptr::null_mut();
    assert_eq!(unsafe { dm_solve(spec, &mut sol) }, DmStatus::Ok);
    let mut obj = 0.0;
    assert_eq!(unsafe { dm_solution_objective(sol, &mut obj) }, DmStatus::Ok);
    assert!((obj - 0.58).abs() < 1e-9);

    let mut prices = [0.0; 3];
    assert_eq!(unsafe { dm_solution_prices(sol, prices.as_mut_ptr(), 3) }, DmStatus::Ok);
    assert!((prices[0] - 0.04).abs() < 1e-9 && (prices[1] - 1.4).abs() < 1e-9);
    assert_eq!(
        unsafe { dm_solution_prices(sol, prices.as_mut_ptr(), 2) },
        DmStatus::BufferTooSmall
    );
    assert!(last_error().contains("need room"));

    let mut power = [0.0; 3];
    assert_eq!(
        unsafe { dm_solution_node_power(sol, power.as_mut_ptr(), 3) },
        DmStatus::Ok
    );
    assert!((power[2] - 1.0 / 3.0).abs() < 1e-9);

    let mut d = 0.0;
    let lambda = [0.04, 1.4, 0.0];
    assert_eq!(
        unsafe { dm_dual_function(spec, lambda.as_ptr(), 3, &mut d) },
        DmStatus::Ok
    );
    assert!((d - 0.58).abs() < 1e-12);

    let mut json = ptr::null_mut();
    assert_eq!(unsafe { dm_solution_policy_json(sol, &mut json) }, DmStatus::Ok);
    let rows: serde_json::Value = serde_json::from_str(unsafe { CStr::from_ptr(json) }.to_str().unwrap()).unwrap();
    assert!(rows
        .as_array()
        .unwrap()
        .iter()
        .any(|r| r["flow"] == 1 && r["node"] == 0 && r["ttg"] == 2));
    unsafe {
        dm_string_free(json);
        dm_solution_free(sol);
        dm_spec_free(spec);
    }
}

#[test]
fn simulate_returns_json_metrics() {
    let spec = parse(bundled::EXAMPLE1);
    let policy = CString::new("optimal").unwrap();
    let mut out = ptr::null_mut();
    assert_eq!(
        unsafe { dm_simulate(spec, policy.as_ptr(), 1000, 7, &mut out) },
        DmStatus::Ok
    );
    let m: serde_json::Value = serde_json::from_str(unsafe { CStr::from_ptr(out) }.to_str().unwrap()).unwrap();
    assert_eq!(m["horizon"], 1000);
    assert_eq!(m["policy"], "optimal");
    unsafe { dm_string_free(out) };

    let bad = CString::new("fifo").unwrap();
    assert_eq!(
        unsafe { dm_simulate(spec, bad.as_ptr(), 10, 7, &mut out) },
        DmStatus::InvalidArgument
    );
    assert!(out.is_null());
    assert!(last_error().contains("fifo"));
    unsafe { dm_spec_free(spec) };
}

#[test]
fn errors_map_to_status_codes() {
    let mut spec = ptr::null_mut();
    let bad = CString::new("{\"nodes\": 2,").unwrap();
    assert_eq!(unsafe { dm_spec_parse(bad.as_ptr(), &mut spec) }, DmStatus::InvalidSpec);
    assert!(spec.is_null());
    assert!(last_error().contains("line"));

    assert_eq!(unsafe { dm_spec_parse(ptr::null(), &mut spec) }, DmStatus::NullPointer);
    let invalid_utf8 = [0xffu8, 0xfe, 0];
    assert_eq!(
        unsafe { dm_spec_parse(invalid_utf8.as_ptr().cast(), &mut spec) },
        DmStatus::InvalidUtf8
    );

    let mut obj = 0.0;
    assert_eq!(
        unsafe { dm_solution_objective(ptr::null(), &mut obj) },
        DmStatus::NullPointer
    );

    // peak-only spec has no LP
    let mut v: serde_json::Value = serde_json::from_str(bundled::FIG6).unwrap();
    v.as_object_mut().unwrap().remove("link_capacity");
    let spec = parse(&v.to_string());
    let mut sol = ptr::null_mut();
    assert_eq!(unsafe { dm_solve(spec, &mut sol) }, DmStatus::InvalidArgument);
    assert!(sol.is_null());
    let p = [1.0; 6];
    let mut d = 0.0;
    assert_eq!(
        unsafe { dm_dual_function(spec, p.as_ptr(), 6, &mut d) },
        DmStatus::InvalidArgument
    );
    unsafe { dm_spec_free(spec) };

    // freeing null is a no-op
    unsafe {
        dm_spec_free(ptr::null_mut());
        dm_solution_free(ptr::null_mut());
        dm_string_free(ptr::null_mut());
    }
}

#[test]
fn header_declares_every_export() {
    let header = include_str!("../include/deadline_mdp.h");
    for name in [
        "dm_last_error_message",
        "dm_spec_parse",
        "dm_spec_free",
        "dm_spec_shape",
        "dm_solve",
        "dm_solution_free",
        "dm_solution_objective",
        "dm_solution_prices",
        "dm_solution_node_power",
        "dm_solution_policy_json",
        "dm_dual_function",
        "dm_simulate",
        "dm_string_free",
        "DM_STATUS_OK = 0",
    ] {
        assert!(header.contains(name), "{name} missing from header");
    }
}

#[test]
fn header_compiles_as_c() {
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("use.c");
    std::fs::write(
        &src,
        "#include \"deadline_mdp.h\"\nint main(void) { DmSpec *s = 0; return dm_spec_parse(\"{}\", &s) == DM_STATUS_OK; }\n",
    )
    .unwrap();
    let include = concat!(env!("CARGO_MANIFEST_DIR"), "/include");
    match std::process::Command::new("cc")
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-I", include])
        .arg(&src)
        .status()
    {
        Ok(st) => assert!(st.success()),
        Err(_) => eprintln!("no C compiler found, skipping"),
    }
}
