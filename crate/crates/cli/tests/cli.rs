use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn fpe(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fourier-pe"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn path(p: &Path) -> &str {
    p.to_str().expect("utf-8 temp path")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn meta_value(meta: &str, key: &str) -> String {
    meta.lines()
        .find_map(|l| l.strip_prefix(&format!("{key} = ")))
        .unwrap_or_else(|| panic!("no `{key}` in\n{meta}"))
        .to_string()
}

const POSITIONS: &str = "r0,c0,r1,c1\n0,0,1,1\n2.5,-1,3,4\n10,20,30,40\n";

#[test]
fn encode_writes_one_row_per_position_and_is_deterministic() {
    let dir = TempDir::new().unwrap();
    let input = dir.path().join("pos.csv");
    fs::write(&input, POSITIONS).unwrap();
    let run = |seed: &str, name: &str| {
        let out = dir.path().join(name);
        let o = fpe(&[
            "--preset",
            "widget-2-2",
            "--seed",
            seed,
            "encode",
            path(&input),
            "-o",
            path(&out),
        ]);
        assert!(o.status.success(), "{}", stderr(&o));
        fs::read_to_string(out).unwrap()
    };
    let a = run("3", "a.csv");
    let lines: Vec<&str> = a.lines().collect();
    assert_eq!(lines.len(), 4);
    assert_eq!(lines[0].split(',').count(), 128);
    assert!(lines[0].starts_with("e0,e1,"));
    for row in &lines[1..] {
        let vals: Vec<f64> = row.split(',').map(|v| v.parse().unwrap()).collect();
        assert_eq!(vals.len(), 128);
        assert!(vals.iter().all(|v| v.is_finite()));
    }
    assert_eq!(a, run("3", "b.csv"));
    assert_ne!(a, run("4", "c.csv"));
}

#[test]
fn encode_to_stdout_without_out_dir() {
    let dir = TempDir::new().unwrap();
    let input = dir.path().join("pos.csv");
    fs::write(&input, "x\n1\n2\n").unwrap();
    let o = fpe(&["--preset", "sine-1d", "encode", path(&input)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = String::from_utf8(o.stdout).unwrap();
    assert_eq!(text.lines().count(), 3);
    assert_eq!(text.lines().next().unwrap().split(',').count(), 768);
}

#[test]
fn malformed_rows_are_input_errors_naming_the_line() {
    let dir = TempDir::new().unwrap();
    let input = dir.path().join("pos.csv");
    fs::write(&input, "r0,c0,r1,c1\n0,0,1,1\n1,2,3\n").unwrap();
    let o = fpe(&["--preset", "widget-2-2", "encode", path(&input)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 3"), "{}", stderr(&o));
    assert!(stderr(&o).contains("expected 4 columns, found 3"), "{}", stderr(&o));

    fs::write(&input, "r0,c0,r1,c1\n0,0,one,1\n").unwrap();
    let o = fpe(&["--preset", "widget-2-2", "encode", path(&input)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 2, column 3"), "{}", stderr(&o));
}

#[test]
fn usage_errors_exit_with_status_two() {
    let dir = TempDir::new().unwrap();
    let input = dir.path().join("pos.csv");
    fs::write(&input, "x,y\n0,0\n").unwrap();
    for args in [
        vec!["encode", path(&input)],
        vec!["--preset", "no-such-preset", "encode", path(&input)],
        vec!["--preset", "detr", "--config", path(&input), "encode", path(&input)],
        vec!["verify", "everything"],
    ] {
        let o = fpe(&args);
        assert_eq!(o.status.code(), Some(2), "{args:?}: {}", stderr(&o));
    }
}

#[test]
fn printed_preset_parses_back_to_the_same_encoder() {
    let dir = TempDir::new().unwrap();
    let o = fpe(&["presets", "widget-2-2"]);
    assert!(o.status.success());
    let config = dir.path().join("widget.conf");
    fs::write(&config, &o.stdout).unwrap();
    let input = dir.path().join("pos.csv");
    fs::write(&input, POSITIONS).unwrap();
    let via_preset = fpe(&["--preset", "widget-2-2", "--seed", "9", "encode", path(&input)]);
    let via_config = fpe(&["--config", path(&config), "--seed", "9", "encode", path(&input)]);
    assert!(via_config.status.success(), "{}", stderr(&via_config));
    assert_eq!(via_preset.stdout, via_config.stdout);

    let list = String::from_utf8(fpe(&["presets"]).stdout).unwrap();
    for name in [
        "reformer-s41",
        "reformer-apxD",
        "detr",
        "widget-1-4",
        "sine-2d",
        "embed-2d",
        "toy-zero",
    ] {
        assert!(list.lines().any(|l| l.starts_with(name)), "{name} missing from\n{list}");
    }
}

#[test]
fn heatmap_writes_five_probes_with_sidecars() {
    let dir = TempDir::new().unwrap();
    let o = fpe(&[
        "--preset",
        "toy-fourier",
        "--out",
        path(dir.path()),
        "heatmap",
        "--stage",
        "fourier",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    for probe in ["top-left", "top-right", "center", "bottom-left", "bottom-right"] {
        for ext in ["pgm", "csv", "meta"] {
            assert!(
                dir.path().join(format!("heatmap-{probe}.{ext}")).exists(),
                "{probe}.{ext}"
            );
        }
    }
    let pgm = fs::read_to_string(dir.path().join("heatmap-center.pgm")).unwrap();
    assert!(pgm.starts_with("P2\n64 64\n255\n"));
    assert_eq!(pgm.split_whitespace().count(), 4 + 64 * 64);
    let meta = fs::read_to_string(dir.path().join("heatmap-center.meta")).unwrap();
    assert_eq!(meta_value(&meta, "anchor"), "31,31");
    assert_eq!(meta_value(&meta, "argmax"), "31,31");
    assert_eq!(meta_value(&meta, "max"), "0.5");
    let csv = fs::read_to_string(dir.path().join("heatmap-center.csv")).unwrap();
    assert_eq!(csv.lines().count(), 65);
    assert!(csv.starts_with("c0,c1,"));
}

#[test]
fn sine_concat_heatmap_is_anisotropic() {
    let dir = TempDir::new().unwrap();
    let o = fpe(&[
        "--preset",
        "sine-2d",
        "--out",
        path(dir.path()),
        "heatmap",
        "--anchor",
        "31,31",
        "--prefix",
        "s",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let meta = fs::read_to_string(dir.path().join("s-r31-c31.meta")).unwrap();
    assert_eq!(meta_value(&meta, "encoder"), "sine-concat");
    let ratio: f64 = meta_value(&meta, "anisotropy_ratio").parse().unwrap();
    assert!(ratio > 1.15, "{ratio}");
}

#[test]
fn verify_reports_one_line_per_check() {
    let o = fpe(&["verify", "shift", "--seed", "11"]);
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8(o.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 10);
    assert!(lines[..9]
        .iter()
        .all(|l| l.starts_with("check=shift.") && l.contains(" status=pass")));
    assert_eq!(lines[9], "summary checks=9 passed=9 failed=0");
}

#[test]
fn kernel_fit_with_kl_writes_artifacts_and_reduces_the_penalty() {
    let dir = TempDir::new().unwrap();
    let o = fpe(&[
        "--preset",
        "fit-fourier",
        "--out",
        path(dir.path()),
        "train",
        "kernel-fit",
        "--steps",
        "200",
        "--alpha",
        "1",
        "--w-mean-shift",
        "0.5",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let stdout = String::from_utf8(o.stdout).unwrap();
    assert!(stdout.contains("final_loss="));
    let trace = fs::read_to_string(dir.path().join("trace.csv")).unwrap();
    let mut lines = trace.lines();
    assert_eq!(lines.next(), Some("step,model_loss,kl_loss,total_loss"));
    let kl: Vec<f64> = lines.map(|l| l.split(',').nth(2).unwrap().parse().unwrap()).collect();
    assert!(kl.len() >= 2);
    assert!(
        kl.last().unwrap() < &(0.1 * kl[0]),
        "{} -> {}",
        kl[0],
        kl.last().unwrap()
    );
    let metrics = fs::read_to_string(dir.path().join("metrics.csv")).unwrap();
    assert!(metrics.starts_with("metric,value\n"));
    assert!(metrics.contains("w_r_mean,"));

    let checkpoint = dir.path().join("checkpoint.fpec");
    let input = dir.path().join("pos.csv");
    fs::write(&input, "x,y\n0,0\n1,2\n").unwrap();
    let enc = |cp: &Path| fpe(&["encode", path(&input), "--checkpoint", path(cp)]);
    let a = enc(&checkpoint);
    assert!(a.status.success(), "{}", stderr(&a));
    assert_eq!(a.stdout, enc(&checkpoint).stdout);
    let fresh = fpe(&["--preset", "fit-fourier", "encode", path(&input)]);
    assert_ne!(a.stdout, fresh.stdout);

    let mismatched = fpe(&[
        "--preset",
        "detr",
        "encode",
        path(&input),
        "--checkpoint",
        path(&checkpoint),
    ]);
    assert_eq!(mismatched.status.code(), Some(2));
}

#[test]
fn retrieval_writes_results_and_instances() {
    let dir = TempDir::new().unwrap();
    let o = fpe(&[
        "--preset",
        "toy-zero",
        "--out",
        path(dir.path()),
        "train",
        "retrieval",
        "--steps",
        "20",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let results = fs::read_to_string(dir.path().join("results.csv")).unwrap();
    let lines: Vec<&str> = results.lines().collect();
    assert_eq!(lines[0], "encoder,seed,seen_acc,unseen_acc");
    assert_eq!(lines.len(), 2);
    assert!(lines[1].starts_with("toy-zero,0,"));
    assert!(dir.path().join("instances.csv").exists());
    assert!(dir.path().join("trace-toy-zero.csv").exists());
    assert!(dir.path().join("checkpoint-toy-zero.fpec").exists());
}

#[test]
fn default_retrieval_compares_encoders_on_the_same_seed() {
    let dir = TempDir::new().unwrap();
    let o = fpe(&["--out", path(dir.path()), "train", "retrieval"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let results = fs::read_to_string(dir.path().join("results.csv")).unwrap();
    let rows: Vec<Vec<&str>> = results.lines().skip(1).map(|l| l.split(',').collect()).collect();
    let acc = |name: &str, col: usize| -> f64 {
        rows.iter()
            .find(|r| r[0] == name)
            .unwrap_or_else(|| panic!("{name} missing"))[col]
            .parse()
            .unwrap()
    };
    assert_eq!(rows.len(), 3);
    assert!(rows.iter().all(|r| r[1] == "0"));
    assert!(acc("toy-fourier", 3) >= acc("toy-embed", 3), "{results}");
    let chance = 1.0 / 3.0;
    for col in [2, 3] {
        assert!((acc("toy-zero", col) - chance).abs() < 0.1, "{results}");
    }
}

#[test]
fn heatmap_averages_over_seeds() {
    let dir = TempDir::new().unwrap();
    let run = |seeds: &str| {
        let o = fpe(&[
            "--preset",
            "toy-fourier",
            "--out",
            path(dir.path()),
            "heatmap",
            "--anchor",
            "10,20",
            "--seeds",
            seeds,
            "--prefix",
            seeds,
        ]);
        assert!(o.status.success(), "{}", stderr(&o));
        let stem = dir.path().join(format!("{seeds}-r10-c20"));
        (
            fs::read_to_string(stem.with_extension("meta")).unwrap(),
            fs::read_to_string(stem.with_extension("csv")).unwrap(),
        )
    };
    let (meta1, csv1) = run("1");
    let (meta3, csv3) = run("3");
    assert_eq!(meta_value(&meta3, "seeds"), "3");
    assert_eq!(meta_value(&meta3, "argmax"), "10,20");
    assert_eq!(meta_value(&meta1, "argmax"), "10,20");
    assert_ne!(csv1, csv3);

    let o = fpe(&[
        "--preset",
        "toy-fourier",
        "--out",
        path(dir.path()),
        "heatmap",
        "--anchor",
        "64,0",
    ]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}
