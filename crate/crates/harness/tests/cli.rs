use std::process::Command;

fn spme() -> Command {
    Command::new(env!("CARGO_BIN_EXE_spme"))
}

#[test]
fn mass_dump_lists_the_pattern() {
    let out = spme().args(["mass", "--J", "8"]).output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let entries: Vec<(usize, usize, f64)> = text
        .lines()
        .map(|l| {
            let mut it = l.split_whitespace();
            (it.next().unwrap().parse().unwrap(), it.next().unwrap().parse().unwrap(), it.next().unwrap().parse().unwrap())
        })
        .collect();
    // rows have at most five entries, and the matrix is symmetric
    for i in 0..8 {
        assert!(entries.iter().filter(|e| e.0 == i).count() <= 5);
    }
    for &(i, j, v) in &entries {
        assert!(entries.iter().any(|&(a, b, w)| a == j && b == i && w == v));
    }
}

#[test]
fn run_writes_tables() {
    let dir = tempfile::tempdir().unwrap();
    let out = spme()
        .args(["run", "--experiment", "converge-det", "--J-list", "8,16", "--N-list", "8", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let wide = std::fs::read_to_string(dir.path().join("converge-det_1d.csv")).unwrap();
    assert_eq!(wide.lines().count(), 2);
    assert!(dir.path().join("converge-det_1d_long.csv").exists());
}

#[test]
fn flags_override_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    std::fs::write(&cfg, "experiment = \"support\"\nJ = [16]\nN = [8]\nsigma = 0.0\n").unwrap();
    let out = spme()
        .args(["run", "--config"])
        .arg(&cfg)
        .args(["--N-list", "4", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("support.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 5);
}

#[test]
fn bad_input_fails_cleanly() {
    let out = spme().args(["run", "--T", "0.001"]).output().unwrap();
    assert!(!out.status.success());
    let out = spme().args(["trajectory", "--J", "8", "--N", "2", "--sigma", "1", "--out", "/dev/null/x.csv"]).output().unwrap();
    assert!(!out.status.success());
}

#[test]
fn trajectory_rows_match_steps() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t.csv");
    let out = spme().args(["trajectory", "--J", "8", "--N", "12", "--sigma", "1", "--seed", "4", "--out"]).arg(&path).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&path).unwrap();
    assert_eq!(text.lines().count(), 14);
    assert!(text.starts_with("n,t,c_1,"));
}
