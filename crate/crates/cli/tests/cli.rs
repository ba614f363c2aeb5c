use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn orbffd(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_orbffd")).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = orbffd(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

#[test]
fn disk_convergence_sweep_reaches_high_order() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    ok(&["convergence", "--domain", "disk", "--N", "500,1000,2000", "--n", "30", "--delta", "1", "--out", out]);
    let rows = csv_rows(&dir.path().join("convergence.csv"));
    assert_eq!(rows.len(), 3);
    let orders = csv_rows(&dir.path().join("orders.csv"));
    let order: f64 = orders[0][2].parse().unwrap();
    assert!(order >= 2.5, "fitted order {order}");
}

#[test]
fn full_overlap_matches_the_reference_byte_for_byte() {
    let dir = tempfile::tempdir().unwrap();
    let nodes = dir.path().join("nodes");
    ok(&["nodes", "--N", "400", "--out", nodes.to_str().unwrap()]);
    let file = nodes.join("nodes_400.txt");
    let a = dir.path().join("overlapped");
    let b = dir.path().join("reference");
    let common = ["--nodes", file.to_str().unwrap(), "--n", "20", "--delta", "1"];
    ok(&[&["assemble", "--out", a.to_str().unwrap()], &common[..]].concat());
    ok(&[&["assemble", "--reference", "--out", b.to_str().unwrap()], &common[..]].concat());
    for name in ["L_ii.mtx", "L_ib.mtx", "B_bi.mtx", "B_bb.mtx"] {
        let x = fs::read(a.join(name)).unwrap();
        assert!(!x.is_empty());
        assert_eq!(x, fs::read(b.join(name)).unwrap(), "{name}");
    }
}

#[test]
fn missing_node_file_is_reported_by_path() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("no_such_nodes.txt");
    let out = orbffd(&["heat", "--nodes", missing.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("no_such_nodes.txt"), "{err}");
}

#[test]
fn config_file_feeds_the_run_and_flags_override_it() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, "# small run\nN = 300\nn = 20\ndelta = 0.5\nT = 0.01\ndt = 0.001\nscheme = bdf2\n").unwrap();
    let out = dir.path().join("o");
    ok(&["heat", "--config", cfg.to_str().unwrap(), "--delta", "1", "--out", out.to_str().unwrap()]);
    let rows = csv_rows(&out.join("errors.csv"));
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0][2], "1.0");
    let l2: f64 = rows[0][3].parse().unwrap();
    assert!(l2 < 1e-2, "{l2}");
    assert!(out.join("field.csv").exists());
}

#[test]
fn invalid_settings_fail_with_a_message() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    for args in [
        vec!["heat", "--delta", "1.5", "--out", out],
        vec!["heat", "--scheme", "bdf7", "--out", out],
        vec!["heat", "--domain", "torus", "--out", out],
    ] {
        let o = orbffd(&args);
        assert!(!o.status.success(), "{args:?}");
        assert!(!o.stderr.is_empty());
    }
}

#[test]
fn eigs_lebesgue_and_decompose_write_their_tables() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    ok(&["eigs", "--N", "300", "--n", "20", "--delta", "0.5", "--bc", "dirichlet", "--out", out]);
    let spec = csv_rows(&dir.path().join("spectrum.csv"));
    let disks = csv_rows(&dir.path().join("gershgorin.csv"));
    assert_eq!(spec.len(), disks.len());

    ok(&["lebesgue", "--N", "300", "--n", "20", "--op", "normal", "--out", out]);
    let leb = csv_rows(&dir.path().join("lebesgue.csv"));
    assert!(!leb.is_empty());
    for r in &leb {
        let threshold: f64 = r[4].parse().unwrap();
        let max: f64 = r[5].parse().unwrap();
        assert!(threshold > 0.0 && threshold <= max, "{r:?}");
    }

    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    fs::write(&a, "x,value\n0,1\n1,2\n2,4\n").unwrap();
    fs::write(&b, "x,value\n0,1.5\n1,2.5\n2,4.5\n").unwrap();
    let text = ok(&["decompose", a.to_str().unwrap(), b.to_str().unwrap(), "--out", out]);
    assert!(text.contains("dissipation"));
    let row = &csv_rows(&dir.path().join("decomposition.csv"))[0];
    let dispersion: f64 = row[1].parse().unwrap();
    assert!(dispersion.abs() < 1e-12);
}
