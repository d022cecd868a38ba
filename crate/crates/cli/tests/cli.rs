use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn istbc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_istbc"))
        .args(args)
        .env_remove("ISTBC_WORKERS")
        .output()
        .expect("run istbc")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn json(args: &[&str]) -> Value {
    let o = istbc(args);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    serde_json::from_str(&stdout(&o)).unwrap()
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("istbc-cli-{}-{name}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

#[test]
fn design_reports_integer_range() {
    let v = json(&["design", "--code", "ic", "-n", "2", "-m", "2", "--json"]);
    assert_eq!((v["alpha"].as_u64(), v["d"].as_u64(), v["bits"].as_u64()), (Some(2), Some(3), Some(3)));
    assert_eq!(v["basis"].as_array().unwrap().len(), 8);

    let v = json(&["design", "--code", "ic", "-n", "2", "-m", "4", "--json"]);
    assert_eq!((v["alpha"].as_u64(), v["d"].as_u64(), v["bits"].as_u64()), (Some(4), Some(15), Some(5)));

    let v = json(&["design", "--code", "golden", "--json"]);
    assert_eq!(v["exact_integer"], Value::Bool(false));
    assert_eq!(v["real_dimensions"].as_u64(), Some(8));
    assert!(v.get("alpha").is_none());

    let text = stdout(&istbc(&["design", "--code", "ic", "-n", "3", "-m", "2"]));
    assert!(text.contains("d: 7") && text.contains("bits: 4"));
}

#[test]
fn papr_carries_rounding_note() {
    let v = json(&["analyze", "papr", "--code", "ic", "-n", "4", "-m", "2"]);
    assert_eq!(v["papr_db_rounded"], "4.23");
    assert!(v["note"].as_str().unwrap().contains("4.22"));

    let v = json(&["analyze", "papr", "--code", "golden", "-m", "2"]);
    assert!((v["papr_db"].as_f64().unwrap() - 2.77).abs() < 0.05);
    assert!(v["note"].is_null());
}

#[test]
fn spectrum_row_for_four_qam() {
    let o = istbc(&["analyze", "spectrum", "--code", "ic", "-n", "2", "-m", "2", "--format", "csv"]);
    let text = stdout(&o);
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "distinct_count,zero_det_count,zero_det_percent,min_trace,min_det_sq,norm_scale,exhaustive"
    );
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(row[0], "6561");
    assert_eq!(row[1], "32");
    assert!((row[3].parse::<f64>().unwrap() - 0.4).abs() < 1e-12);
    assert!((row[4].parse::<f64>().unwrap() - 0.04).abs() < 1e-12);
}

#[test]
fn long_enumeration_needs_flag() {
    let o = istbc(&["analyze", "spectrum", "-n", "2", "-m", "6"]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn sampled_spectrum_for_larger_codes() {
    let v = json(&["analyze", "spectrum", "-n", "3", "-m", "2", "--sampled", "2000", "--seed", "1"]);
    assert_eq!(v["exhaustive"], Value::Bool(false));
    assert!((v["min_trace"].as_f64().unwrap() - 4.0 / 9.0).abs() < 1e-12);
    assert!(v["distinct_count"].as_u64().unwrap() <= 2001);
}

#[test]
fn trace_for_three_antennas() {
    let v = json(&["analyze", "trace", "--code", "ic", "-n", "3", "-m", "4"]);
    assert_eq!(v["raw_min_trace"].as_u64(), Some(1092));
    assert!((v["normalized_min_trace"].as_f64().unwrap() - 2.0 / 15.0).abs() < 1e-12);
}

#[test]
fn simulate_is_deterministic() {
    let args = ["simulate", "--code", "ic", "-n", "2", "-m", "2", "--snr", "6:4:14", "--seed", "7", "--target-errors", "30"];
    let a = istbc(&args);
    assert!(a.status.success());
    let mut with_workers = args.to_vec();
    with_workers.extend(["--workers", "3"]);
    let b = istbc(&with_workers);
    assert_eq!(a.stdout, b.stdout);
    let text = stdout(&a);
    assert!(text.starts_with("snr_db,axis,trials,errors,cer,ci_low,ci_high\n"));
    assert_eq!(text.lines().count(), 4);
}

#[test]
fn psnr_axis_shifts_grid() {
    let eta_db = json(&["analyze", "papr", "-n", "2", "-m", "2"])["papr_db"].as_f64().unwrap();
    let snr = stdout(&istbc(&["simulate", "--snr", "4,8", "--seed", "2", "--target-errors", "30"]));
    let grid = format!("{},{}", 4.0 + eta_db, 8.0 + eta_db);
    let psnr = stdout(&istbc(&[
        "simulate", "--snr", &grid, "--axis", "psnr", "--seed", "2", "--target-errors", "30",
    ]));
    let counts = |csv: &str| -> Vec<(String, String)> {
        csv.lines()
            .skip(1)
            .map(|l| {
                let f: Vec<&str> = l.split(',').collect();
                (f[2].to_string(), f[3].to_string())
            })
            .collect()
    };
    assert_eq!(counts(&snr), counts(&psnr));
    assert!(psnr.lines().nth(1).unwrap().contains(",psnr,"));
}

#[test]
fn config_file_with_flag_override() {
    let dir = scratch("config");
    let cfg = dir.join("run.cfg");
    std::fs::write(
        &cfg,
        "# golden, quantized\ndesign = golden\nsnr_db = 30\nencoder = q=3\nseed = 5\ntarget_errors = 500\n",
    )
    .unwrap();
    let prefix = dir.join("out").join("g");
    let o = istbc(&[
        "simulate",
        "--config",
        cfg.to_str().unwrap(),
        "--target-errors",
        "20",
        "--sweep",
        "4",
        "--out",
        prefix.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));

    let manifest: Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("out/g.manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["subcommand"], "simulate");
    assert_eq!(manifest["parameters"]["design"], "golden");
    assert_eq!(manifest["parameters"]["target_errors"].as_u64(), Some(20));
    assert_eq!(manifest["parameters"]["encoder"]["quantized"]["q"].as_u64(), Some(3));
    assert_eq!(manifest["seed"].as_u64(), Some(5));
    assert_eq!(manifest["outputs"].as_array().unwrap().len(), 4);

    let result: Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("out/g.json")).unwrap()).unwrap();
    assert!(result["points"][0]["errors"].as_u64().unwrap() >= 20);
    let csv = std::fs::read_to_string(dir.join("out/g.csv")).unwrap();
    let first = csv.clone();

    let again = istbc(&[
        "simulate",
        "--config",
        cfg.to_str().unwrap(),
        "--target-errors",
        "20",
        "--sweep",
        "4",
        "--out",
        prefix.to_str().unwrap(),
    ]);
    assert!(again.status.success());
    assert_eq!(std::fs::read_to_string(dir.join("out/g.csv")).unwrap(), first);
    assert!(dir.join("out/g-q4.csv").exists());
    let _ = std::fs::remove_dir_all(&dir);
}

#[test]
fn exit_codes() {
    assert_eq!(istbc(&["simulate", "--snr", "5:1:2"]).status.code(), Some(2));
    assert_eq!(istbc(&["simulate"]).status.code(), Some(2));
    assert_eq!(istbc(&["design", "--code", "golden", "-n", "3"]).status.code(), Some(2));
    assert_eq!(istbc(&["design", "--code", "nope"]).status.code(), Some(2));
    assert_eq!(istbc(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(
        istbc(&["simulate", "--snr", "5", "-m", "6", "--decoder", "exhaustive"]).status.code(),
        Some(3)
    );
    let dir = scratch("badcfg");
    let cfg = dir.join("bad.cfg");
    std::fs::write(&cfg, "snr_db = 1\nunknown_key = 3\n").unwrap();
    assert_eq!(istbc(&["simulate", "--config", cfg.to_str().unwrap()]).status.code(), Some(2));
    let _ = std::fs::remove_dir_all(&dir);
}
