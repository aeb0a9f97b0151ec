use std::ffi::{CStr, CString};
use std::ptr;

use netmfg_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(netmfg_last_error()) }.to_string_lossy().into_owned()
}

const SMALL: &str = "k = 2\nm_pg = 10\nl = 2\ne = 3\nn_agents = 4\ngrid_width = 3\ngrid_height = 3\nexploitability_every = 0\n";

fn parse(text: &str) -> (NetmfgStatus, *mut NetmfgConfig) {
    let text = CString::new(text).unwrap();
    let mut cfg = ptr::null_mut();
    let status = unsafe { netmfg_config_parse(text.as_ptr(), &mut cfg) };
    (status, cfg)
}

#[test]
fn parse_errors_set_status_and_message() {
    let (status, cfg) = parse("gamma = 1.5\n");
    assert_eq!(status, NetmfgStatus::Config);
    assert!(cfg.is_null());
    assert!(last_error().contains("gamma"));

    let (status, _) = parse("nonsense\n");
    assert_eq!(status, NetmfgStatus::Config);
    assert!(last_error().contains("line 1"));

    let status = unsafe { netmfg_config_parse(ptr::null(), &mut ptr::null_mut()) };
    assert_eq!(status, NetmfgStatus::NullPointer);
}

#[test]
fn trial_rows_match_the_library() {
    let (status, cfg) = parse(SMALL);
    assert_eq!(status, NetmfgStatus::Ok);
    let mut log = ptr::null_mut();
    assert_eq!(unsafe { netmfg_run_trial(cfg, 9, &mut log) }, NetmfgStatus::Ok);

    let lib = netmfg::parse_config(SMALL).unwrap();
    let expected: Vec<_> = netmfg::run_trial(&lib.scenario(9).unwrap(), &lib.metrics_options())
        .unwrap()
        .log
        .rows()
        .collect();
    let n = unsafe { netmfg_run_log_len(log) };
    assert_eq!(n, expected.len());
    for (i, &(k, metric, value)) in expected.iter().enumerate() {
        let (mut rk, mut rm, mut rv) = (0usize, NetmfgMetric::Exploitability, 0.0f64);
        assert_eq!(unsafe { netmfg_run_log_row(log, i, &mut rk, &mut rm, &mut rv) }, NetmfgStatus::Ok);
        assert_eq!(rk, k);
        assert_eq!(rm, NetmfgMetric::from(metric));
        assert_eq!(rv.to_bits(), value.to_bits());
    }
    let (mut rk, mut rm, mut rv) = (0usize, NetmfgMetric::Exploitability, 0.0f64);
    assert_eq!(unsafe { netmfg_run_log_row(log, n, &mut rk, &mut rm, &mut rv) }, NetmfgStatus::OutOfRange);

    let dir = tempfile::tempdir().unwrap();
    let path = CString::new(dir.path().join("t.csv").to_str().unwrap()).unwrap();
    assert_eq!(unsafe { netmfg_run_log_write_csv(log, path.as_ptr()) }, NetmfgStatus::Ok);
    let text = std::fs::read_to_string(dir.path().join("t.csv")).unwrap();
    assert!(text.starts_with("k,metric,value\n"));

    unsafe {
        netmfg_run_log_free(log);
        netmfg_config_free(cfg);
        netmfg_run_log_free(ptr::null_mut());
        netmfg_config_free(ptr::null_mut());
    }
}

#[test]
fn set_and_digest() {
    let mut cfg = ptr::null_mut();
    assert_eq!(unsafe { netmfg_config_default(&mut cfg) }, NetmfgStatus::Ok);
    let mut needed = 0usize;
    let status = unsafe { netmfg_config_digest(cfg, ptr::null_mut(), 0, &mut needed) };
    assert_eq!(status, NetmfgStatus::BufferTooSmall);
    let mut buf = vec![0 as std::ffi::c_char; needed];
    assert_eq!(unsafe { netmfg_config_digest(cfg, buf.as_mut_ptr(), needed, ptr::null_mut()) }, NetmfgStatus::Ok);
    let before = unsafe { CStr::from_ptr(buf.as_ptr()) }.to_str().unwrap().to_owned();
    assert_eq!(before, netmfg::ExperimentConfig::default().digest());

    let key = CString::new("broadcast_radius_fraction").unwrap();
    let bad = CString::new("2").unwrap();
    assert_eq!(unsafe { netmfg_config_set(cfg, key.as_ptr(), bad.as_ptr()) }, NetmfgStatus::Config);
    let good = CString::new("0.4").unwrap();
    assert_eq!(unsafe { netmfg_config_set(cfg, key.as_ptr(), good.as_ptr()) }, NetmfgStatus::Ok);
    assert_eq!(unsafe { netmfg_config_digest(cfg, buf.as_mut_ptr(), needed, ptr::null_mut()) }, NetmfgStatus::Ok);
    let after = unsafe { CStr::from_ptr(buf.as_ptr()) }.to_str().unwrap();
    assert_ne!(before, after);
    unsafe { netmfg_config_free(cfg) };
}

#[test]
fn experiment_directory() {
    let (_, cfg) = parse(&format!("{SMALL}trials = 2\n"));
    let dir = tempfile::tempdir().unwrap();
    let path = CString::new(dir.path().to_str().unwrap()).unwrap();
    assert_eq!(unsafe { netmfg_run_experiment(cfg, path.as_ptr()) }, NetmfgStatus::Ok);
    assert!(dir.path().join("aggregate.csv").exists());
    assert!(dir.path().join("trial_1.csv").exists());
    unsafe { netmfg_config_free(cfg) };
}

#[test]
fn simplex_projection() {
    let v = [0.5, 0.5, 0.5];
    let mut out = [0.0; 3];
    assert_eq!(unsafe { netmfg_project_simplex(v.as_ptr(), 3, out.as_mut_ptr()) }, NetmfgStatus::Ok);
    assert!(out.iter().all(|&x| (x - 1.0 / 3.0).abs() < 1e-15));
    let bad = [f64::NAN, 1.0];
    assert_eq!(
        unsafe { netmfg_project_simplex(bad.as_ptr(), 2, out.as_mut_ptr()) },
        NetmfgStatus::InvalidInput
    );
    assert_eq!(unsafe { netmfg_project_simplex(v.as_ptr(), 0, out.as_mut_ptr()) }, NetmfgStatus::InvalidInput);
}

#[test]
fn header_declares_the_abi() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/netmfg.h")).unwrap();
    for symbol in [
        "netmfg_config_parse",
        "netmfg_run_trial",
        "netmfg_run_log_row",
        "netmfg_last_error",
        "NETMFG_STATUS_OK",
        "typedef struct NetmfgConfig NetmfgConfig",
    ] {
        assert!(header.contains(symbol), "{symbol} missing from header");
    }
}

#[test]
fn header_compiles_as_c() {
    let Ok(cc) = which_cc() else {
        eprintln!("no C compiler on PATH; skipping");
        return;
    };
    let include = concat!(env!("CARGO_MANIFEST_DIR"), "/include");
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("use.c");
    std::fs::write(
        &src,
        "#include \"netmfg.h\"\nint main(void) { NetmfgConfig *c = 0; return netmfg_config_default(&c) == NETMFG_STATUS_OK ? 0 : 1; }\n",
    )
    .unwrap();
    let out = std::process::Command::new(cc)
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-I", include])
        .arg(&src)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

fn which_cc() -> Result<&'static str, ()> {
    ["cc", "gcc", "clang"]
        .into_iter()
        .find(|cc| std::process::Command::new(cc).arg("--version").output().is_ok_and(|o| o.status.success()))
        .ok_or(())
}
