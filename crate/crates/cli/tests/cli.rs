use std::path::Path;
use std::process::{Command, Output};

use netdiff_cli::RunConfig;

fn netdiff(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_netdiff"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn every_command_writes_a_manifest_with_the_resolved_config() {
    let dir = tempfile::tempdir().unwrap();
    let cases: [(&[&str], &str); 6] = [
        (&["simulate", "--seed", "1", "--n", "300"], "simulate.json"),
        (&["lln"], "lln.json"),
        (&["fclt", "--paths", "2", "--seed", "1"], "fclt.json"),
        (&["profile", "--betas", "0.5,1,2", "--m-times", "11"], "profile.json"),
        (&["cost"], "cost.json"),
        (
            &[
                "compare",
                "--seed",
                "1",
                "--n",
                "300",
                "--replicas",
                "20",
                "--checkpoints",
                "1",
            ],
            "compare.json",
        ),
    ];
    for (args, manifest) in cases {
        let out = dir.path().join(args[0]);
        let o = netdiff(args, &out);
        let code = o.status.code().unwrap();
        // compare may legitimately report a tolerance failure at this size
        assert!(
            code == 0 || (args[0] == "compare" && code == 2),
            "{}: {}",
            args[0],
            stderr(&o)
        );
        let json: serde_json::Value = serde_json::from_slice(&std::fs::read(out.join(manifest)).unwrap()).unwrap();
        let cfg = &json["config"];
        assert_eq!(cfg["dist"], "poisson:5");
        assert!(cfg["h"].as_f64().unwrap() > 0.0, "h must be resolved");
        for f in json["files"].as_array().unwrap() {
            assert!(out.join(f.as_str().unwrap()).exists());
        }
    }
}

#[test]
fn lln_csv_starts_at_initial_condition() {
    let dir = tempfile::tempdir().unwrap();
    let o = netdiff(
        &["lln", "--dist", "regular:3", "--alpha-s", "0.8", "--T", "1"],
        dir.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = std::fs::read_to_string(dir.path().join("lln.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "t,xS,xSI,xSS,theta,infected_fraction");
    let first: Vec<f64> = lines.next().unwrap().split(',').map(|v| v.parse().unwrap()).collect();
    let expect = [0.0, 0.8, 0.8 * 0.2 * 3.0, 0.64 * 3.0, 1.0, 0.2];
    for (a, b) in first.iter().zip(expect) {
        assert!((a - b).abs() < 1e-12, "{first:?}");
    }
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("run.toml");
    std::fs::write(&cfg_path, "dist = \"regular:4\"\nbeta = 1.5\nT = 0.5\n").unwrap();
    let out = dir.path().join("o");
    let o = netdiff(&["lln", "--config", cfg_path.to_str().unwrap(), "--beta", "0.25"], &out);
    assert!(o.status.success(), "{}", stderr(&o));
    let json: serde_json::Value = serde_json::from_slice(&std::fs::read(out.join("lln.json")).unwrap()).unwrap();
    assert_eq!(json["config"]["dist"], "regular:4");
    assert_eq!(json["config"]["beta"], 0.25);
    assert_eq!(json["config"]["t_max"], 0.5);
}

#[test]
fn manifest_config_reparses_to_the_same_run() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let o = netdiff(
        &["simulate", "--seed", "9", "--n", "200", "--dist", "negbin:2,0.75"],
        &out,
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let json: serde_json::Value = serde_json::from_slice(&std::fs::read(out.join("simulate.json")).unwrap()).unwrap();
    let cfg: RunConfig = serde_json::from_value(json["config"].clone()).unwrap();
    let toml_path = dir.path().join("again.toml");
    std::fs::write(&toml_path, cfg.to_toml()).unwrap();
    let before = std::fs::read(out.join("trajectory.csv")).unwrap();
    std::fs::remove_dir_all(&out).unwrap();
    let o = netdiff(&["simulate", "--config", toml_path.to_str().unwrap()], &out);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(before, std::fs::read(out.join("trajectory.csv")).unwrap());
}

#[test]
fn usage_errors_exit_1_and_name_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let cases: [(&[&str], &str); 6] = [
        (&["lln", "--alpha-s", "1.5"], "alpha_s"),
        (&["lln", "--dist", "poisson:-1"], "dist"),
        (&["simulate"], "seed"),
        (&["profile", "--betas", "2,1"], "betas"),
        (&["compare", "--seed", "1", "--checkpoints", "9"], "checkpoints"),
        (&["lln", "--bogus"], "--bogus"),
    ];
    for (args, field) in cases {
        let o = netdiff(args, dir.path());
        assert_eq!(o.status.code(), Some(1), "{args:?}");
        assert!(stderr(&o).contains(field), "{args:?}: {}", stderr(&o));
    }
}

#[test]
fn unknown_config_keys_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("bad.toml");
    std::fs::write(&cfg_path, "n = 100\nbetta = 1.0\n").unwrap();
    let o = netdiff(&["lln", "--config", cfg_path.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("betta"));
}

#[test]
fn singular_limit_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let o = netdiff(
        &[
            "lln",
            "--dist",
            "regular:3",
            "--alpha-s",
            "0.1",
            "--beta",
            "50",
            "--T",
            "10",
        ],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(stderr(&o).contains("singular"));
}

#[test]
fn help_exits_0() {
    let o = Command::new(env!("CARGO_BIN_EXE_netdiff"))
        .arg("--help")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&o.stdout).contains("simulate"));
}
