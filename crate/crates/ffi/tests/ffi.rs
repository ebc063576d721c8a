use std::ffi::{CStr, CString};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use townsim_ffi::*;

fn scenario_file() -> CString {
    let p = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios/reference.json");
    CString::new(p.to_str().unwrap()).unwrap()
}

fn last_error() -> String {
    let p = townsim_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn load(days: u32, seed: u64) -> *mut TownsimScenario {
    let mut sc = ptr::null_mut();
    unsafe {
        assert_eq!(
            townsim_scenario_load(scenario_file().as_ptr(), &mut sc),
            TownsimStatus::Ok
        );
        assert_eq!(townsim_scenario_set_days(sc, days), TownsimStatus::Ok);
        assert_eq!(townsim_scenario_set_seed(sc, seed), TownsimStatus::Ok);
    }
    sc
}

fn run(sc: *const TownsimScenario, mode: u32) -> *mut TownsimOutcome {
    let mut out = ptr::null_mut();
    assert_eq!(unsafe { townsim_run(sc, mode, &mut out) }, TownsimStatus::Ok);
    out
}

fn take(s: *mut std::ffi::c_char) -> String {
    let v = unsafe { CStr::from_ptr(s) }.to_string_lossy().into_owned();
    unsafe { townsim_string_free(s) };
    v
}

#[test]
fn price_through_the_abi() {
    let mut c = 0;
    unsafe {
        assert_eq!(townsim_final_price_cents(1200, 200_000, &mut c), TownsimStatus::Ok);
        assert_eq!(c, 960);
        assert_eq!(townsim_final_price_cents(0, 0, &mut c), TownsimStatus::InvalidArgument);
        assert!(last_error().contains("0.00"), "{}", last_error());
        assert_eq!(
            townsim_final_price_cents(100, 1_000_000, &mut c),
            TownsimStatus::InvalidArgument
        );
        assert_eq!(
            townsim_final_price_cents(100, 0, ptr::null_mut()),
            TownsimStatus::NullArgument
        );
    }
    assert!(townsim_last_error().is_null() || !last_error().is_empty());
}

#[test]
fn success_clears_the_error() {
    let mut c = 0;
    unsafe {
        townsim_final_price_cents(0, 0, &mut c);
        assert!(!townsim_last_error().is_null());
        townsim_final_price_cents(100, 0, &mut c);
    }
    assert!(townsim_last_error().is_null());
}

#[test]
fn bad_inputs_are_reported() {
    let mut sc = ptr::null_mut();
    unsafe {
        assert_eq!(townsim_scenario_load(ptr::null(), &mut sc), TownsimStatus::NullArgument);
        let bad = CString::new(r#"{"map": {"locations": []}}"#).unwrap();
        assert_eq!(
            townsim_scenario_from_json(bad.as_ptr(), &mut sc),
            TownsimStatus::InvalidScenario
        );
        assert!(sc.is_null());
        let latin1 = [0xe9u8, 0];
        assert_eq!(
            townsim_scenario_load(latin1.as_ptr().cast(), &mut sc),
            TownsimStatus::InvalidUtf8
        );
        assert_eq!(
            townsim_scenario_set_seed(ptr::null_mut(), 1),
            TownsimStatus::NullArgument
        );
        let mut out = ptr::null_mut();
        assert_eq!(townsim_run(ptr::null(), 0, &mut out), TownsimStatus::NullArgument);

        let sc = load(1, 1);
        assert_eq!(townsim_run(sc, 7, &mut out), TownsimStatus::InvalidArgument);
        assert!(last_error().contains("mode"));
        townsim_scenario_free(sc);
        townsim_scenario_free(ptr::null_mut());
        townsim_outcome_free(ptr::null_mut());
        townsim_string_free(ptr::null_mut());
        assert_eq!(townsim_outcome_event_count(ptr::null()), 0);
    }
}

#[test]
fn json_scenario_matches_the_file() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios/reference.json");
    let text = CString::new(std::fs::read_to_string(path).unwrap()).unwrap();
    let mut from_json = ptr::null_mut();
    unsafe {
        assert_eq!(
            townsim_scenario_from_json(text.as_ptr(), &mut from_json),
            TownsimStatus::Ok
        );
        townsim_scenario_set_days(from_json, 2);
    }
    let from_file = load(2, 42);
    let (a, b) = (
        run(from_json, TOWNSIM_MODE_DETERMINISTIC),
        run(from_file, TOWNSIM_MODE_DETERMINISTIC),
    );
    let (mut ja, mut jb) = (ptr::null_mut(), ptr::null_mut());
    unsafe {
        assert_eq!(townsim_outcome_events_jsonl(a, &mut ja), TownsimStatus::Ok);
        assert_eq!(townsim_outcome_events_jsonl(b, &mut jb), TownsimStatus::Ok);
    }
    assert_eq!(take(ja), take(jb));
    unsafe {
        townsim_outcome_free(a);
        townsim_outcome_free(b);
        townsim_scenario_free(from_json);
        townsim_scenario_free(from_file);
    }
}

#[test]
fn parallel_and_deterministic_agree() {
    let sc = load(2, 9);
    let (d, p) = (run(sc, TOWNSIM_MODE_DETERMINISTIC), run(sc, TOWNSIM_MODE_PARALLEL));
    let (mut rd, mut rp) = (0, 0);
    unsafe {
        assert_eq!(townsim_outcome_revenue_cents(d, &mut rd), TownsimStatus::Ok);
        assert_eq!(townsim_outcome_revenue_cents(p, &mut rp), TownsimStatus::Ok);
        assert_eq!(townsim_outcome_event_count(d), townsim_outcome_event_count(p));
    }
    assert!(rd > 0);
    assert_eq!(rd, rp);

    let mut s = ptr::null_mut();
    assert_eq!(unsafe { townsim_outcome_summary_json(d, &mut s) }, TownsimStatus::Ok);
    let summary: serde_json::Value = serde_json::from_str(&take(s)).unwrap();
    assert_eq!(summary["days"], 2);
    unsafe {
        townsim_outcome_free(d);
        townsim_outcome_free(p);
        townsim_scenario_free(sc);
    }
}

#[test]
fn outputs_land_on_disk() {
    let sc = load(1, 42);
    let out = run(sc, TOWNSIM_MODE_DETERMINISTIC);
    let dir = tempfile::tempdir().unwrap();
    let d = CString::new(dir.path().to_str().unwrap()).unwrap();
    unsafe {
        assert_eq!(townsim_outcome_write(out, d.as_ptr()), TownsimStatus::Ok);
    }
    for f in ["events.jsonl", "memory.jsonl", "summary.json", "daily_sales.csv"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
    let blocked = dir.path().join("events.jsonl").join("sub");
    let b = CString::new(blocked.to_str().unwrap()).unwrap();
    unsafe {
        assert_eq!(townsim_outcome_write(out, b.as_ptr()), TownsimStatus::Io);
        townsim_outcome_free(out);
        townsim_scenario_free(sc);
    }
}

#[test]
fn header_declares_every_export() {
    let header = std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("include/townsim.h")).unwrap();
    let src = std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("src/lib.rs")).unwrap();
    let exports: Vec<&str> = src
        .lines()
        .filter_map(|l| l.split("extern \"C\" fn ").nth(1))
        .map(|rest| rest.split('(').next().unwrap())
        .collect();
    assert!(exports.len() >= 15);
    for f in exports {
        assert!(
            header.contains(&format!(" {f}(")) || header.contains(&format!("*{f}(")),
            "{f} missing"
        );
    }
}

/// Directory holding this profile's build artifacts.
fn artifact_dir() -> PathBuf {
    let exe = std::env::current_exe().unwrap();
    exe.parent().and_then(Path::parent).unwrap().to_path_buf()
}

#[test]
fn c_program_links_and_runs() {
    let lib = artifact_dir();
    if !lib.join("libtownsim_ffi.so").exists() || Command::new("cc").arg("--version").output().is_err() {
        eprintln!("skipping: no C compiler or shared library");
        return;
    }
    let manifest = Path::new(env!("CARGO_MANIFEST_DIR"));
    let tmp = tempfile::tempdir().unwrap();
    let bin = tmp.path().join("smoke");
    let status = Command::new("cc")
        .arg(manifest.join("tests/c/smoke.c"))
        .arg("-I")
        .arg(manifest.join("include"))
        .arg("-L")
        .arg(&lib)
        .arg(format!("-Wl,-rpath,{}", lib.display()))
        .args(["-ltownsim_ffi", "-Wall", "-Werror", "-o"])
        .arg(&bin)
        .status()
        .unwrap();
    assert!(status.success());
    let out = Command::new(&bin)
        .arg(scenario_file().to_str().unwrap())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("ok 0.1.0"));
}
