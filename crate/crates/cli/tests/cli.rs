use std::path::Path;
use std::process::{Command, Output};

use sfann_cli::{EXIT_CONFIG, EXIT_IO, EXIT_USAGE};

fn sfann(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sfann")).args(args).current_dir(dir).output().unwrap()
}

fn ok(args: &[&str], dir: &Path) -> String {
    let out = sfann(args, dir);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn code(args: &[&str], dir: &Path) -> i32 {
    sfann(args, dir).status.code().unwrap()
}

#[test]
fn gen_geochain_example() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["gen", "--dist", "geochain", "--n", "4", "--dim", "1", "--seed", "1", "--out", "g.fvecs"], dir.path());
    let rows = sfann::io::read_rows(&dir.path().join("g.fvecs")).unwrap();
    assert_eq!(rows, vec![vec![0.0], vec![1.0], vec![3.0], vec![7.0]]);
}

#[test]
fn gen_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    for out in ["a.fvecs", "b.fvecs"] {
        ok(&["gen", "--dist", "clusters", "--n", "200", "--dim", "3", "--seed", "9", "--out", out], dir.path());
    }
    let a = std::fs::read(dir.path().join("a.fvecs")).unwrap();
    assert_eq!(a, std::fs::read(dir.path().join("b.fvecs")).unwrap());
    assert_eq!(a.len(), 200 * (4 + 3 * 4));
}

#[test]
fn usage_errors() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(code(&["gen", "--dist", "uniform", "--n", "1", "--out", "x.txt"], d), EXIT_USAGE);
    assert_eq!(code(&["gen", "--dist", "spiral", "--n", "10", "--out", "x.txt"], d), EXIT_USAGE);
    assert_eq!(code(&["frobnicate"], d), EXIT_USAGE);
    assert_eq!(code(&[], d), EXIT_USAGE);
    assert_eq!(code(&["--help"], d), 0);
}

#[test]
fn config_and_io_errors() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&["gen", "--dist", "uniform", "--n", "50", "--dim", "2", "--out", "p.txt"], d);
    for eps in ["0.5", "0", "-0.1", "0.7"] {
        assert_eq!(code(&["build", "--input", "p.txt", "--eps", eps, "--out", "i.sfan"], d), EXIT_CONFIG, "eps {eps}");
    }
    // eps * n < 1 rules out the multi-resolution index.
    assert_eq!(code(&["build", "--input", "p.txt", "--eps", "0.01", "--out", "i.sfan", "--multires"], d), EXIT_CONFIG);
    assert_eq!(code(&["build", "--input", "p.txt", "--eps", "0.2", "--out", "i.sfan", "--c", "10"], d), EXIT_CONFIG);
    assert_eq!(code(&["build", "--input", "missing.txt", "--eps", "0.2", "--out", "i.sfan"], d), EXIT_IO);
    std::fs::write(d.join("dup.txt"), "0 0\n1 1\n0 0\n").unwrap();
    assert_eq!(code(&["build", "--input", "dup.txt", "--eps", "0.2", "--out", "i.sfan"], d), EXIT_IO);

    ok(&["build", "--input", "p.txt", "--eps", "0.2", "--out", "i.sfan"], d);
    std::fs::write(d.join("q.txt"), "0.5 0.5\n").unwrap();
    assert_eq!(code(&["query", "--index", "nope.sfan", "--queries", "q.txt"], d), EXIT_IO);
    assert_eq!(code(&["query", "--index", "i.sfan", "--queries", "q.txt", "--mode", "multires"], d), EXIT_CONFIG);
    std::fs::write(d.join("q3.txt"), "0.5 0.5 0.5\n").unwrap();
    assert_eq!(code(&["query", "--index", "i.sfan", "--queries", "q3.txt"], d), EXIT_IO);
    std::fs::write(d.join("bad.sfan"), b"SFAN\x09\x00\x00\x00").unwrap();
    assert_eq!(code(&["query", "--index", "bad.sfan", "--queries", "q.txt"], d), EXIT_IO);
}

#[test]
fn build_reports_friend_total() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&["gen", "--dist", "uniform", "--n", "120", "--dim", "2", "--seed", "4", "--out", "p.txt"], d);
    let out = sfann(&["build", "--input", "p.txt", "--eps", "0.3", "--out", "i.sfan"], d);
    let log = String::from_utf8(out.stderr).unwrap();
    let edges: usize = log.lines().find_map(|l| l.strip_prefix("edges: ")).unwrap().parse().unwrap();
    let points = sfann::io::read_points(&d.join("p.txt")).unwrap();
    let g = sfann::GreedyOrder::build(&points, 0, 0.3, 26.0).unwrap();
    // Sum of friends-list sizes, counted from scratch.
    let mut total = 0;
    for i in 0..points.len() {
        let pi = g.id(i);
        total += (0..i).filter(|&j| points.dist(pi, g.id(j)) <= 26.0 * g.radii[i] / 0.3).count();
    }
    assert_eq!(edges, total);
    assert!(log.contains("build_time_s: "));
}

#[test]
fn verified_queries_in_every_mode() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(
        &["gen", "--dist", "clusters", "--n", "300", "--dim", "2", "--seed", "2", "--out", "p.txt", "--queries", "60", "--queries-out", "q.txt"],
        d,
    );
    ok(&["build", "--input", "p.txt", "--eps", "0.2", "--out", "i.sfan", "--multires"], d);
    let oracle = ok(&["query", "--index", "i.sfan", "--queries", "q.txt", "--mode", "oracle"], d);
    for mode in ["baseline", "spreadfree", "bootstrap", "multires", "oracle"] {
        let csv = ok(&["query", "--index", "i.sfan", "--queries", "q.txt", "--mode", mode, "--verify"], d);
        let mut lines = csv.lines();
        assert!(lines.next().unwrap().ends_with("stop_reason,oracle_distance,ok"));
        let rows: Vec<&str> = lines.collect();
        assert_eq!(rows.len(), 60);
        for (k, row) in rows.iter().enumerate() {
            let f: Vec<&str> = row.split(',').collect();
            assert_eq!(f[0], k.to_string(), "rows ordered by query id");
            assert_eq!(*f.last().unwrap(), "1", "{mode}: {row}");
        }
    }
    // Oracle answers are exact: the distance column equals the oracle distance column.
    let verified = ok(&["query", "--index", "i.sfan", "--queries", "q.txt", "--mode", "oracle", "--verify"], d);
    for row in verified.lines().skip(1) {
        let f: Vec<&str> = row.split(',').collect();
        assert_eq!(f[2], f[f.len() - 2]);
    }
    assert_eq!(oracle.lines().count(), 61);
}

#[test]
fn thread_count_does_not_change_output() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&["gen", "--dist", "uniform", "--n", "400", "--dim", "3", "--out", "p.txt", "--queries", "80", "--queries-out", "q.txt"], d);
    ok(&["build", "--input", "p.txt", "--eps", "0.25", "--out", "i.sfan"], d);
    let run = |threads: &str| {
        let out = Command::new(env!("CARGO_BIN_EXE_sfann"))
            .args(["query", "--index", "i.sfan", "--queries", "q.txt", "--mode", "bootstrap"])
            .env("SFAN_THREADS", threads)
            .current_dir(d)
            .output()
            .unwrap();
        assert!(out.status.success());
        out.stdout
    };
    assert_eq!(run("1"), run("4"));
    let bad = Command::new(env!("CARGO_BIN_EXE_sfann"))
        .args(["query", "--index", "i.sfan", "--queries", "q.txt"])
        .env("SFAN_THREADS", "many")
        .current_dir(d)
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(EXIT_CONFIG));
}

#[test]
fn rebuild_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&["gen", "--dist", "uniform", "--n", "150", "--dim", "2", "--seed", "5", "--out", "p.txt"], d);
    for out in ["a.sfan", "b.sfan"] {
        ok(&["build", "--input", "p.txt", "--eps", "0.1", "--out", out, "--multires", "--seed", "3"], d);
    }
    assert_eq!(std::fs::read(d.join("a.sfan")).unwrap(), std::fs::read(d.join("b.sfan")).unwrap());
}

#[test]
fn quick_bench_recall_is_one() {
    let mut out = Vec::new();
    let mut log = Vec::new();
    sfann_cli::run(["sfann", "bench", "--quick", "--queries", "20"], &mut out, &mut log).unwrap();
    let csv = String::from_utf8(out).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), sfann_cli::bench::BenchReport::CSV_HEADER);
    let rows: Vec<&str> = lines.collect();
    assert!(rows.iter().filter(|r| r.starts_with("geochain,")).count() >= 8);
    for r in rows {
        assert!(r.ends_with(",1"), "{r}");
    }
    assert!(String::from_utf8(log).unwrap().contains("geochain sweep"));
}
