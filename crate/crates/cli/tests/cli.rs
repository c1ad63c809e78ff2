use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

const INCOMPATIBLE_PAIR: &str = "\
dsimp 3
vertices 5
0 0 0
1 0 0
0 1 0
0 0 1
1 1 1
elements 2
0 1 2 3 t=0 g=0
2 1 4 3 t=0 g=0
";

fn nvb(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nvb"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("spawn nvb")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn kuhn(dir: &Path, name: &str, cells: &str) {
    let out = nvb(&["gen", "kuhn", "--dim", "3", "--cells", cells, "-o", name], dir);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn kuhn_grid_checks_compatible() {
    let dir = TempDir::new().unwrap();
    kuhn(dir.path(), "k.dsimp", "2");
    let out = nvb(&["check", "k.dsimp"], dir.path());
    assert_eq!(code(&out), 0);
    assert!(stdout(&out).contains("weakly compatible: true"));
}

#[test]
fn incompatible_pair_exits_one() {
    let dir = TempDir::new().unwrap();
    std::fs::write(dir.path().join("two.dsimp"), INCOMPATIBLE_PAIR).unwrap();
    let out = nvb(&["check", "two.dsimp"], dir.path());
    assert_eq!(code(&out), 1);
    assert!(stdout(&out).contains("incompatible face {1, 2, 3}"));
}

#[test]
fn input_errors_exit_two() {
    let dir = TempDir::new().unwrap();
    assert_eq!(code(&nvb(&["check", "missing.msh"], dir.path())), 2);
    std::fs::write(dir.path().join("bad.dsimp"), "dsimp 3\nvertices x\n").unwrap();
    let out = nvb(&["check", "bad.dsimp"], dir.path());
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));
    assert_eq!(code(&nvb(&["check", "mesh.obj"], dir.path())), 2);
}

#[test]
fn relabel_then_check_is_compatible() {
    let dir = TempDir::new().unwrap();
    std::fs::write(dir.path().join("two.dsimp"), INCOMPATIBLE_PAIR).unwrap();
    for (sets, order) in [("ot0", "srn"), ("ile", "srn2"), ("lae", "srn")] {
        let out = nvb(
            &["relabel", "two.dsimp", "-o", "r.dsimp", "--sets", sets, "--threshold", "1", "--order", order],
            dir.path(),
        );
        assert_eq!(code(&out), 0, "{sets}/{order}: {}", String::from_utf8_lossy(&out.stderr));
        assert_eq!(code(&nvb(&["check", "r.dsimp"], dir.path())), 0, "{sets}/{order}");
    }
}

#[test]
fn relabel_reads_announced_edges() {
    let dir = TempDir::new().unwrap();
    std::fs::write(dir.path().join("two.dsimp"), INCOMPATIBLE_PAIR).unwrap();
    std::fs::write(dir.path().join("edges.txt"), "# element a b\n1 2 4\n").unwrap();
    let args = ["relabel", "two.dsimp", "-o", "r.dsimp", "--sets", "ot0", "--order", "srn2", "--announce", "edges.txt"];
    assert_eq!(code(&nvb(&args, dir.path())), 0);
    assert_eq!(code(&nvb(&["check", "r.dsimp"], dir.path())), 0);

    // Not an edge of element 1.
    std::fs::write(dir.path().join("edges.txt"), "1 0 4\n").unwrap();
    assert_eq!(code(&nvb(&args, dir.path())), 2);
}

#[test]
fn refine_modes_keep_conformity() {
    let dir = TempDir::new().unwrap();
    kuhn(dir.path(), "k.dsimp", "2");
    std::fs::write(dir.path().join("marks.txt"), "0 5\n17\n").unwrap();
    for mode in [&["--uniform", "2"][..], &["--mark", "marks.txt"], &["--mark-random", "0.25", "--seed", "3"]] {
        let mut args = vec!["refine", "k.dsimp", "-o", "f.dsimp"];
        args.extend_from_slice(mode);
        assert_eq!(code(&nvb(&args, dir.path())), 0, "{mode:?}");
        assert_eq!(code(&nvb(&["check", "f.dsimp"], dir.path())), 0, "{mode:?}");
    }
    // Same seed, same mesh.
    let a = ["refine", "k.dsimp", "-o", "a.dsimp", "--mark-random", "0.3", "--seed", "11"];
    let b = ["refine", "k.dsimp", "-o", "b.dsimp", "--mark-random", "0.3", "--seed", "11"];
    nvb(&a, dir.path());
    nvb(&b, dir.path());
    let read = |n: &str| std::fs::read(dir.path().join(n)).unwrap();
    assert_eq!(read("a.dsimp"), read("b.dsimp"));

    std::fs::write(dir.path().join("marks.txt"), "999\n").unwrap();
    assert_eq!(code(&nvb(&["refine", "k.dsimp", "-o", "f.dsimp", "--mark", "marks.txt"], dir.path())), 2);
    assert_eq!(code(&nvb(&["refine", "k.dsimp", "-o", "f.dsimp"], dir.path())), 2);
}

#[test]
fn gen_and_convert_round_trip() {
    let dir = TempDir::new().unwrap();
    kuhn(dir.path(), "k.dsimp", "2");
    assert_eq!(code(&nvb(&["convert", "k.dsimp", "k.msh"], dir.path())), 0);
    assert_eq!(code(&nvb(&["convert", "k.msh", "back.dsimp"], dir.path())), 0);
    assert_eq!(code(&nvb(&["convert", "back.dsimp", "k.vtk"], dir.path())), 0);
    let a = std::fs::read_to_string(dir.path().join("k.dsimp")).unwrap();
    let b = std::fs::read_to_string(dir.path().join("back.dsimp")).unwrap();
    assert_eq!(a, b);
    let vtk = std::fs::read_to_string(dir.path().join("k.vtk")).unwrap();
    assert!(vtk.contains("CELLS 48 240"));
}

#[test]
fn metrics_and_closure_report() {
    let dir = TempDir::new().unwrap();
    kuhn(dir.path(), "k.dsimp", "1");
    let out = nvb(&["metrics", "k.dsimp", "--csv"], dir.path());
    assert_eq!(code(&out), 0);
    let text = stdout(&out);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 2);
    assert_eq!(lines[0].split(',').count(), lines[1].split(',').count());
    assert!(lines[0].starts_with("polar_sine_min"));

    let out = nvb(&["closure", "k.dsimp", "--level", "1", "--exact-average"], dir.path());
    assert_eq!(code(&out), 0);
    assert!(stdout(&out).contains("closure average (exact)"));
}

fn sweep_rows(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("# nvb-sweep v1"));
    let header: Vec<String> = lines.next().unwrap().split(',').map(String::from).collect();
    let rows = lines.map(|l| l.split(',').map(String::from).collect()).collect();
    (header, rows)
}

#[test]
fn sweep_is_deterministic_and_monotone() {
    let dir = TempDir::new().unwrap();
    kuhn(dir.path(), "k.dsimp", "2");
    for out in ["s1", "s2"] {
        let args = ["sweep", "k.dsimp", "--out", out, "--thresholds", "0..6", "--with-d2"];
        assert_eq!(code(&nvb(&args, dir.path())), 0);
    }
    for name in ["ile_srn.csv", "ile_srn2.csv", "lae_srn.csv", "lae_srn2.csv"] {
        let a = std::fs::read(dir.path().join("s1").join(name)).unwrap();
        let b = std::fs::read(dir.path().join("s2").join(name)).unwrap();
        assert_eq!(a, b, "{name} differs between runs");

        let (header, rows) = sweep_rows(&dir.path().join("s1").join(name));
        assert_eq!(rows.len(), 8, "baseline plus thresholds 0..=6");
        assert_eq!(rows[0][0], "-1");
        let col = |c: &str| header.iter().position(|h| h == c).unwrap();
        let (v0, err) = (col("v0_fraction"), col("error"));
        assert!(header.contains(&"d2_max".to_string()));
        let fractions: Vec<f64> = rows[1..]
            .iter()
            .map(|r| {
                assert_eq!(r.len(), header.len());
                assert!(r[err].is_empty(), "{name}: {}", r[err]);
                r[v0].parse().unwrap()
            })
            .collect();
        assert!(fractions.windows(2).all(|w| w[1] <= w[0]), "{name}: {fractions:?}");
    }
}

#[test]
fn bench_prints_one_row_per_size() {
    let dir = TempDir::new().unwrap();
    let out = nvb(&["bench", "--sizes", "1,2"], dir.path());
    assert_eq!(code(&out), 0);
    let text = stdout(&out);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "cells,n,seconds");
    assert!(lines[1].starts_with("1,6,"));
    assert!(lines[2].starts_with("2,48,"));
    let secs: f64 = lines[2].rsplit(',').next().unwrap().parse().unwrap();
    assert!(secs >= 0.0);
}
