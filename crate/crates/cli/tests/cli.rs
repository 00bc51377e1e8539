use std::process::{Command, Output};

fn ahsecagg(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ahsecagg")).args(args).env_remove("AHSECAGG_SEED").output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn run_reports_a_checksum_and_oracle_match() {
    let o = ahsecagg(&["run", "--group", "desk", "-n", "8", "-m", "20", "--dropout-rate", "0.2", "--seed", "5"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let out = stdout(&o);
    assert!(out.contains("oracle match: yes"));
    let sum = out.lines().find_map(|l| l.strip_prefix("output checksum ")).unwrap().to_owned();
    let again = stdout(&ahsecagg(&["run", "--group", "desk", "-n", "8", "-m", "20", "--dropout-rate", "0.2", "--seed", "5"]));
    assert!(again.contains(&format!("output checksum {sum}")));
}

#[test]
fn run_reads_a_runfile() {
    let dir = std::env::temp_dir().join(format!("ahsecagg-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let cfg = dir.join("run.cfg");
    std::fs::write(&cfg, "scheme = secagg-tskg\nn = 6\nm = 4\nseed = 2\n").unwrap();
    let transcript = dir.join("t.csv");
    let o = ahsecagg(&["run", "--config", cfg.to_str().unwrap(), "--transcript", transcript.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("scheme secagg_tskg n=6"));
    assert!(std::fs::read_to_string(&transcript).unwrap().lines().count() > 1);
}

#[test]
fn rank_prints_rank_and_unknowns() {
    let o = ahsecagg(&["rank", "-m", "8"]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("rank 8, unknowns 9"), "{}", stdout(&o));
}

#[test]
fn verify_sss_passes() {
    let o = ahsecagg(&["verify", "--suite", "sss"]);
    assert!(o.status.success());
    let out = stdout(&o);
    assert!(out.lines().all(|l| l.starts_with("PASS")) && !out.is_empty());
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(ahsecagg(&["run", "--no-such-flag"]).status.code(), Some(2));
    assert_eq!(ahsecagg(&["run", "--group", "desk", "-n", "5", "-t", "9"]).status.code(), Some(2));
    assert_eq!(ahsecagg(&["rank", "-m", "4", "--layout", "sideways"]).status.code(), Some(2));
}
