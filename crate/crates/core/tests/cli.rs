use std::process::Command;

fn data(name: &str) -> String {
    format!("{}/data/{name}", env!("CARGO_MANIFEST_DIR"))
}

fn stackroute(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_stackroute"))
        .args(args)
        .env("RUST_LOG", "error")
        .output()
        .unwrap();
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8(out.stdout).unwrap(),
        String::from_utf8(out.stderr).unwrap(),
    )
}

fn pigou(cmd: &str) -> Vec<String> {
    vec![
        cmd.into(),
        "--net".into(),
        data("pigou_net.tntp"),
        "--trips".into(),
        data("pigou_trips.tntp"),
    ]
}

#[test]
fn max_ue_on_pigou_files() {
    let args = pigou("max-ue");
    let (code, stdout, _) = stackroute(&args.iter().map(String::as_str).collect::<Vec<_>>());
    assert_eq!(code, 0);
    assert!(stdout.contains("\ncompliant_pct = 50\n"), "{stdout}");
    assert!(stdout.contains("\n1\t2\t1\t0.5\t0.5\n"));
}

#[test]
fn check_exit_codes() {
    for (file, code, word) in [
        ("pigou_compliant_half.tntp", 0, "sufficient"),
        ("pigou_compliant_low.tntp", 3, "insufficient"),
        ("pigou_trips.tntp", 0, "sufficient"),
    ] {
        let mut args = pigou("check");
        args.push("--compliant-demand".into());
        args.push(data(file));
        let (got, stdout, stderr) =
            stackroute(&args.iter().map(String::as_str).collect::<Vec<_>>());
        assert_eq!(got, code, "{file}: {stderr}");
        assert!(stdout.contains(&format!("verdict = {word}\n")), "{stdout}");
    }
}

#[test]
fn missing_trips_file_exits_one() {
    let (code, _, stderr) = stackroute(&[
        "so",
        "--net",
        &data("pigou_net.tntp"),
        "--trips",
        "/nonexistent/trips.tntp",
    ]);
    assert_eq!(code, 1);
    assert!(stderr.contains("/nonexistent/trips.tntp"));
}

#[test]
fn malformed_compliant_demand_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.tntp");
    std::fs::write(
        &bad,
        "<NUMBER OF ZONES> 2\n<END OF METADATA>\nOrigin 1\n 2 : lots;\n",
    )
    .unwrap();
    let mut args = pigou("check");
    args.push("--compliant-demand".into());
    args.push(bad.display().to_string());
    let (code, _, _) = stackroute(&args.iter().map(String::as_str).collect::<Vec<_>>());
    assert_eq!(code, 1);
}

#[test]
fn environment_supplies_flags() {
    let out = Command::new(env!("CARGO_BIN_EXE_stackroute"))
        .arg("so")
        .env("STACKROUTE_NET", data("pigou_net.tntp"))
        .env("STACKROUTE_TRIPS", data("pigou_trips.tntp"))
        .env("STACKROUTE_AEC", "1e-10")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("aec = 0.0000000001\n"), "{text}");
    assert!(text.contains("total_travel_time = 1.75\n"));
}

#[test]
fn non_convergence_exits_two() {
    let (code, _, stderr) = stackroute(&[
        "ue",
        "--net",
        &data("SiouxFalls_net.tntp"),
        "--trips",
        &data("SiouxFalls_trips.tntp"),
        "--max-iterations",
        "2",
    ]);
    assert_eq!(code, 2, "{stderr}");
    assert!(stderr.contains("not converged"));
}

#[test]
fn writes_report_json_and_mps() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.txt");
    let json = dir.path().join("r.json");
    let mps = dir.path().join("share.mps");
    let mut args = pigou("max-ue");
    for (k, v) in [("--out", &out), ("--json", &json), ("--export-lp", &mps)] {
        args.push(k.into());
        args.push(v.display().to_string());
    }
    let (code, stdout, _) = stackroute(&args.iter().map(String::as_str).collect::<Vec<_>>());
    assert_eq!(code, 0);
    assert!(stdout.starts_with("max-ue: 50% compliant"), "{stdout}");
    let v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&json).unwrap()).unwrap();
    assert_eq!(v["command"], "max-ue");
    let lp = stackroute::lp::read_mps(&std::fs::read_to_string(&mps).unwrap()).unwrap();
    let sol = stackroute::lp::solve_lp(&lp).unwrap();
    assert!((sol.objective_value - 0.5).abs() < 1e-9);
}
