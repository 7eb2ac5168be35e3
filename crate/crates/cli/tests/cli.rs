use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bin(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_stable-alloc"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

const BASE: [&str; 12] = [
    "--sides",
    "6,6",
    "--resolution",
    "48,48",
    "--lambda",
    "1",
    "--alpha",
    "0.8",
    "--seed",
    "4",
    "--render",
    "ppm:4",
];

#[test]
fn allocate_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    for out in ["a", "b"] {
        let mut args = vec!["allocate", "--out", out];
        args.extend(BASE);
        let o = bin(&args, dir.path());
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    }
    for name in [
        "allocation.csv",
        "allocation.json",
        "allocation.ppm",
        "centers.csv",
        "stats.json",
    ] {
        let a = fs::read(dir.path().join("a").join(name)).unwrap();
        assert_eq!(
            a,
            fs::read(dir.path().join("b").join(name)).unwrap(),
            "{name}"
        );
    }
    let ppm = fs::read(dir.path().join("a/allocation.ppm")).unwrap();
    assert!(ppm.starts_with(b"P6\n24 24\n255\n"));
}

#[test]
fn saved_allocation_round_trips_through_subcommands() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec!["allocate", "--out", "run", "--algo", "site"];
    args.extend(BASE);
    assert_eq!(code(&bin(&args, dir.path())), 0);

    let saved = [
        "--allocation",
        "run/allocation.csv",
        "--centers",
        "run/centers.csv",
    ];
    let mut verify = vec!["verify"];
    verify.extend(saved);
    let o = bin(&verify, dir.path());
    assert_eq!(code(&o), 0);
    let report: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(report["stable"], true);

    let mut stats = vec!["stats"];
    stats.extend(saved);
    let o = bin(&stats, dir.path());
    assert_eq!(code(&o), 0);
    let report: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(report["phase"]["quota"], 51);

    let mut render = vec![
        "render", "--out", "img.ppm", "--ppu", "2", "--style", "annuli",
    ];
    render.extend(saved);
    assert_eq!(code(&bin(&render, dir.path())), 0);
    assert!(fs::read(dir.path().join("img.ppm"))
        .unwrap()
        .starts_with(b"P6\n12 12\n255\n"));

    // move one cell to a different center: no longer stable
    let path = dir.path().join("run/allocation.csv");
    let text = fs::read_to_string(&path).unwrap();
    let mut lines: Vec<String> = text.lines().map(String::from).collect();
    let owner: i64 = lines[1].split(',').nth(1).unwrap().parse().unwrap();
    let other = if owner == 0 { 1 } else { 0 };
    lines[1] = format!("0,{other}");
    fs::write(&path, lines.join("\n") + "\n").unwrap();
    let o = bin(&verify, dir.path());
    assert_eq!(code(&o), 2);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let o = bin(
        &["allocate", "--sides", "4,4", "--resolution", "8"],
        dir.path(),
    );
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("resolution"));
    assert_eq!(
        code(&bin(
            &[
                "allocate",
                "--sides",
                "4,4",
                "--resolution",
                "8,8",
                "--alpha",
                "-1"
            ],
            dir.path()
        )),
        1
    );
    assert_eq!(code(&bin(&["no-such-command"], dir.path())), 1);
    let o = bin(
        &[
            "allocate",
            "--sides",
            "4,4",
            "--resolution",
            "8,8",
            "--centers",
            "missing.csv",
        ],
        dir.path(),
    );
    assert_eq!(code(&o), 3);
    let o = bin(
        &[
            "render",
            "--allocation",
            "x.csv",
            "--centers",
            "y.csv",
            "--out",
            "z.ppm",
        ],
        dir.path(),
    );
    assert_eq!(code(&o), 3);
}

#[test]
fn config_file_with_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let config = r#"{
        "region": {"kind": "torus", "sides": [4.0, 4.0]},
        "resolution": [16, 16],
        "source": {"kind": "uniform", "count": 8},
        "appetite": 2.0,
        "seed": 9,
        "out_dir": "from-config"
    }"#;
    fs::write(dir.path().join("c.json"), config).unwrap();
    assert_eq!(
        code(&bin(&["allocate", "--config", "c.json"], dir.path())),
        0
    );
    let stats: serde_json::Value =
        serde_json::from_slice(&fs::read(dir.path().join("from-config/stats.json")).unwrap())
            .unwrap();
    // 8 centers x 32 cells = 256 cells: exactly critical
    assert_eq!(stats["phase"], "critical");
    assert_eq!(stats["unclaimed_fraction"], 0.0);

    let o = bin(
        &[
            "allocate", "--config", "c.json", "--alpha", "0", "--out", "override",
        ],
        dir.path(),
    );
    assert_eq!(code(&o), 0);
    let stats: serde_json::Value =
        serde_json::from_slice(&fs::read(dir.path().join("override/stats.json")).unwrap()).unwrap();
    assert_eq!(stats["unclaimed_fraction"], 1.0);
    assert_eq!(stats["seed"], 9);
}

#[test]
fn generate_writes_centers_and_config() {
    let dir = tempfile::tempdir().unwrap();
    let o = bin(
        &[
            "generate",
            "--sides",
            "2,2",
            "--resolution",
            "4,4",
            "--lattice",
            "1",
            "--out",
            "g",
        ],
        dir.path(),
    );
    assert_eq!(code(&o), 0);
    let centers = fs::read_to_string(dir.path().join("g/centers.csv")).unwrap();
    assert_eq!(centers, "x0,x1\n0.0,0.0\n0.0,1.0\n1.0,0.0\n1.0,1.0\n");
    assert!(dir.path().join("g/config.json").exists());
}

#[test]
fn sweep_writes_runs_and_summaries() {
    let dir = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_stable-alloc"))
        .args([
            "sweep",
            "--sides",
            "4,4",
            "--resolution",
            "16,16",
            "--alphas",
            "0.5,1,2",
            "--seeds",
            "0..5",
            "--csv",
            "s.csv",
        ])
        .env("STABLE_ALLOC_THREADS", "2")
        .current_dir(dir.path())
        .output()
        .unwrap();
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(dir.path().join("s.csv")).unwrap();
    assert_eq!(text.lines().filter(|l| l.starts_with("run,")).count(), 15);
    assert_eq!(
        text.lines().filter(|l| l.starts_with("summary,")).count(),
        3
    );

    let o = bin(
        &[
            "sweep",
            "--sides",
            "4,4",
            "--resolution",
            "16,16",
            "--alphas",
            "1",
            "--seeds",
            "",
            "--csv",
            "t.csv",
        ],
        dir.path(),
    );
    assert_eq!(code(&o), 1);
}

#[test]
fn hidden_oracle_subcommand() {
    let dir = tempfile::tempdir().unwrap();
    let inst = r#"{"distances": [[0.1, 0.4], [0.2, 0.3], [0.5, 0.05]], "quotas": [1, 1]}"#;
    fs::write(dir.path().join("i.json"), inst).unwrap();
    let o = bin(&["oracle", "i.json"], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["sites_propose"], serde_json::json!([0, null, 1]));
    assert_eq!(v["stable"].as_array().unwrap().len(), 1);
    let help = bin(&["--help"], dir.path());
    assert!(!String::from_utf8_lossy(&help.stdout).contains("oracle"));
}
