use std::process::Command;

fn oscint(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_oscint")).args(args).env("RUST_LOG", "off").output().unwrap()
}

#[test]
fn drift_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("drift.csv");
    let res = oscint(&[
        "drift", "--system", "quartic4", "--integrator", "hj-symmetric", "--eps", "0.0142857", "--h", "0.142857",
        "--t-max", "2", "--sample-every", "2", "--out", out.to_str().unwrap(),
    ]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let text = std::fs::read_to_string(&out).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("# meta: "));
    assert_eq!(lines.next().unwrap(), "t,H,I,I_sqrt2,I124,I1,I2,I3,I4");
    assert_eq!(lines.count(), 8);
}

#[test]
fn incompatible_pair_fails_without_output() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x.csv");
    let res = oscint(&[
        "drift", "--system", "fpu", "--integrator", "hj-symmetric", "--eps", "1e-3", "--h", "5e-3", "--out",
        out.to_str().unwrap(),
    ]);
    assert!(!res.status.success());
    assert!(String::from_utf8_lossy(&res.stderr).contains("not available"));
    assert!(!out.exists());
}

#[test]
fn failing_drift_leaves_no_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x.csv");
    let res = oscint(&[
        "drift", "--system", "fpu", "--integrator", "impulse", "--eps", "1e-3", "--h", "1e-2", "--t-max", "1",
        "--inner-dt", "3e-3", "--out", out.to_str().unwrap(),
    ]);
    assert!(!res.status.success());
    assert!(!out.exists());
}

#[test]
fn diverged_scan_exits_nonzero_with_table() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("scan.csv");
    let res = oscint(&[
        "scan", "--system", "fpu", "--integrator", "impulse", "--eps", "1e-3", "--h", "1e-2", "--t-max", "1",
        "--inner-dt", "3e-3", "--scan", "eps:1e-3:1e-2:2", "--out", out.to_str().unwrap(),
    ]);
    assert_eq!(res.status.code(), Some(2));
    let text = std::fs::read_to_string(&out).unwrap();
    let rows: Vec<&str> = text.lines().skip(2).collect();
    assert!(rows[0].contains("NaN") && rows[0].ends_with(",1"));
    assert!(rows[1].ends_with(",0"));
}

#[test]
fn exchange_and_efficiency() {
    let dir = tempfile::tempdir().unwrap();
    let ex = dir.path().join("ex.csv");
    let res = oscint(&[
        "exchange", "--system", "fpu", "--integrator", "hj", "--eps", "1e-2", "--h", "0.02", "--t-max", "1",
        "--out", ex.to_str().unwrap(),
    ]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let text = std::fs::read_to_string(&ex).unwrap();
    assert_eq!(text.lines().nth(1).unwrap(), "t,I1_hj,I2_hj,I3_hj,I1_verlet,I2_verlet,I3_verlet");

    let eff = dir.path().join("eff.csv");
    let res = oscint(&[
        "efficiency", "--system", "pendulum", "--integrator", "verlet", "--eps", "1e-2", "--h", "1e-3", "--t-max",
        "1", "--scan", "h:5e-4:1e-3:2", "--out", eff.to_str().unwrap(),
    ]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let text = std::fs::read_to_string(&eff).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[1], "scan_value,eps,h,slow_gradient_calls,max_err_H,rel_err_H,diverged");
    assert!(lines[2].starts_with("0.0005,0.01,0.0005,2001,"));
    assert!(lines[3].starts_with("0.001,0.01,0.001,1001,"));
}

#[test]
fn rejects_malformed_scan() {
    let res = oscint(&[
        "scan", "--system", "fpu", "--integrator", "hj", "--eps", "1e-3", "--h", "5e-3", "--scan", "h:1", "--out",
        "/dev/null",
    ]);
    assert!(!res.status.success());
}
