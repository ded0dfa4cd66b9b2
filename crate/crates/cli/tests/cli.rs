use std::path::Path;
use std::process::{Command, Output};

fn surfjet(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_surfjet")).args(args).output().expect("binary runs")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn csv_rows(path: &Path) -> Vec<String> {
    std::fs::read_to_string(path).unwrap().lines().map(String::from).collect()
}

#[test]
fn genmesh_writes_off() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("s.off");
    let o = surfjet(&["genmesh", "--surface", "sphere", "--level", "1", "--out", p(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(&out).unwrap();
    assert!(text.starts_with("OFF\n42 80 120\n"), "{}", &text[..20]);
}

#[test]
fn genmesh_is_deterministic_per_seed() {
    let dir = tempfile::tempdir().unwrap();
    let gen = |name: &str, seed: &str| {
        let out = dir.path().join(name);
        let o = surfjet(&["genmesh", "--surface", "f1", "--style", "irregular", "--level", "1", "--seed", seed, "--out", p(&out)]);
        assert!(o.status.success());
        std::fs::read(out).unwrap()
    };
    assert_eq!(gen("a.off", "7"), gen("b.off", "7"));
    assert_ne!(gen("a.off", "7"), gen("c.off", "8"));
}

#[test]
fn estimate_writes_one_row_per_vertex() {
    let dir = tempfile::tempdir().unwrap();
    let mesh = dir.path().join("t.off");
    let out = dir.path().join("t.csv");
    assert!(surfjet(&["genmesh", "--surface", "torus", "--out", p(&mesh)]).status.success());
    let o = surfjet(&["estimate", p(&mesh), "--degree", "3", "--iterative", "--out", p(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = csv_rows(&out);
    assert_eq!(rows.len(), 768 + 1);
    assert!(rows[0].starts_with("vertex_id,x,y,z,nx,ny,nz,kappa1,kappa2,kappaH,kappaG,"));
    assert!(rows[1..].iter().all(|r| r.ends_with(",ok")));
}

#[test]
fn estimate_reads_obj() {
    let dir = tempfile::tempdir().unwrap();
    let mesh = dir.path().join("q.obj");
    let mut text = String::new();
    for j in 0..5 {
        for i in 0..5 {
            text += &format!("v {i} {j} 0\n");
        }
    }
    for j in 0..4 {
        for i in 0..4 {
            let a = j * 5 + i + 1;
            text += &format!("f {} {} {}\nf {} {} {}\n", a, a + 1, a + 6, a, a + 6, a + 5);
        }
    }
    std::fs::write(&mesh, text).unwrap();
    let out = dir.path().join("q.csv");
    let o = surfjet(&["estimate", p(&mesh), "--degree", "2", "--no-weights", "--out", p(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(csv_rows(&out).len(), 26);
}

#[test]
fn validation_errors_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let mesh = dir.path().join("s.off");
    let out = dir.path().join("s.csv");
    assert!(surfjet(&["genmesh", "--surface", "sphere", "--out", p(&mesh)]).status.success());

    for args in [
        vec!["estimate", p(&mesh), "--degree", "7", "--out", p(&out)],
        vec!["estimate", p(&mesh), "--degree", "0", "--out", p(&out)],
        vec!["estimate", p(&mesh), "--ring-cap", "1.2", "--out", p(&out)],
        vec!["estimate", "/nonexistent/m.off", "--out", p(&out)],
        vec!["estimate", p(&mesh)],
        vec!["convergence", "--surface", "sphere", "--degrees", "3..1", "--out", p(dir.path())],
        vec!["convergence", "--surface", "cube", "--out", p(dir.path())],
        vec!["genmesh", "--surface", "sphere", "--level", "99", "--out", p(&mesh)],
        vec!["frobnicate"],
    ] {
        let o = surfjet(&args);
        assert_eq!(o.status.code(), Some(1), "{args:?}");
        assert!(!o.stderr.is_empty());
    }
    let bad = dir.path().join("bad.off");
    std::fs::write(&bad, "OFF\n3 1 0\n0 0 0\n1 0 0\n0 1 0\n3 0 1 5\n").unwrap();
    let o = surfjet(&["estimate", p(&bad), "--out", p(&out)]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn help_exits_0() {
    let o = surfjet(&["--help"]);
    assert!(o.status.success());
    assert!(String::from_utf8_lossy(&o.stdout).contains("convergence"));
}

#[test]
fn fit_failures_exit_2_and_are_marked() {
    // A triangle folded flat over its neighbor: vertex 3 faces away from
    // every other vertex, so its fit has no usable points.
    let dir = tempfile::tempdir().unwrap();
    let mesh = dir.path().join("fold.off");
    std::fs::write(&mesh, "OFF\n4 2 0\n0 0 0\n1 0 0\n0 1 0\n0.1 0.1 0.01\n3 0 1 2\n3 2 1 3\n").unwrap();
    let out = dir.path().join("fold.csv");
    let o = surfjet(&["estimate", p(&mesh), "--degree", "1", "--out", p(&out)]);
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stderr).contains("[3]"));
    let rows = csv_rows(&out);
    assert_eq!(rows.len(), 5);
    assert!(rows[4].starts_with("3,0.1,0.1,0.01,FAILED,"), "{}", rows[4]);
    assert!(rows[4].contains("failed: "));
    assert!(!rows.iter().any(|r| r.contains("NaN")));
}

#[test]
fn convergence_writes_summary_deterministically() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let out = dir.path().join(name);
        let o = surfjet(&[
            "convergence", "--surface", "sphere", "--levels", "3", "--base-level", "0", "--degrees", "1..2", "--seed", "1",
            "--out", p(&out),
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        assert!(String::from_utf8_lossy(&o.stdout).contains("kappaH_l2"));
        out
    };
    let (a, b) = (run("a"), run("b"));
    let summary = csv_rows(&a.join("summary.csv"));
    assert_eq!(summary.len(), 1 + 2 * 3);
    assert!(summary[0].contains("rate_kappa1_l2"));
    for file in ["summary.csv", "sphere_d1_l1.csv", "sphere_d2_l3.csv"] {
        assert_eq!(std::fs::read(a.join(file)).unwrap(), std::fs::read(b.join(file)).unwrap(), "{file}");
    }
}
