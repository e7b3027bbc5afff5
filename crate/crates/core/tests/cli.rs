use std::process::Command;

fn magflow(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_magflow")).args(args).output().expect("binary runs")
}

#[test]
fn list_names_every_experiment() {
    let out = magflow(&["--list"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    for e in magflow::harness::registry() {
        assert!(text.contains(e.name), "{} missing from --list", e.name);
    }
}

#[test]
fn usage_errors_exit_with_two() {
    assert_eq!(magflow(&["no-such-experiment"]).status.code(), Some(2));
    assert_eq!(magflow(&[]).status.code(), Some(2));
    assert_eq!(magflow(&["symbols", "--bogus"]).status.code(), Some(2));
    let dir = std::env::temp_dir().join(format!("magflow-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let cfg = dir.join("bad.ini");
    std::fs::write(&cfg, "[symbols]\nradii = 1, x\n").unwrap();
    assert_eq!(magflow(&["symbols", "--config", cfg.to_str().unwrap()]).status.code(), Some(2));
    assert_eq!(magflow(&["symbols", "--config", dir.join("missing.ini").to_str().unwrap()]).status.code(), Some(2));
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn writes_csv_and_honours_config() {
    let dir = std::env::temp_dir().join(format!("magflow-out-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let cfg = dir.join("run.ini");
    std::fs::write(&cfg, "[symbols]\nradii = 0.25, 3\n").unwrap();
    let out = dir.join("symbols.csv");
    let status = magflow(&["symbols", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]).status;
    assert_eq!(status.code(), Some(0));
    let text = std::fs::read_to_string(&out).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("radius,sup_p,sharp_p,bound_p,sup_q,sharp_q,bound_q"));
    assert!(lines.next().unwrap().starts_with("2.5000000000000000e-1,"));
    assert!(text.lines().any(|l| l.starts_with("# check.sup_matches_sharp = pass")));
    let stdout = magflow(&["symbols", "--config", cfg.to_str().unwrap()]).stdout;
    assert_eq!(stdout, text.as_bytes());
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn failing_check_exits_with_one() {
    // epsilons this large are outside the asymptotic regime, so the order windows fail
    let dir = std::env::temp_dir().join(format!("magflow-fail-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let cfg = dir.join("coarse.ini");
    std::fs::write(&cfg, "[converge-fixed]\nepsilons = 0.5, 0.4, 0.3\n").unwrap();
    let out = magflow(&["converge-fixed", "--config", cfg.to_str().unwrap()]);
    std::fs::remove_dir_all(&dir).unwrap();
    assert_eq!(out.status.code(), Some(1), "{}", String::from_utf8_lossy(&out.stdout));
    assert!(String::from_utf8_lossy(&out.stderr).contains("slope_"));
}
