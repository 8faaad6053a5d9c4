// SPDX-License-Identifier: Apache-2.0

use std::path::Path;
use std::process::{Command, Output};

fn hs(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hypersense"))
        .arg("--out-dir")
        .arg(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

const SMALL: &str = "frames = 40\nheight = 48\nwidth = 48\nradius_min = 3\nradius_max = 5\n\
                     # model\nfragment = 12\ndim = 480\nper_frame = 6\nepochs = 4\nstride = 6\n";

fn small_config(dir: &Path) -> String {
    let p = dir.join("small.cfg");
    std::fs::write(&p, SMALL).unwrap();
    p.to_string_lossy().into_owned()
}

fn roc_endpoints(path: &Path) -> ((f64, f64), (f64, f64)) {
    let text = std::fs::read_to_string(path).unwrap();
    let rows: Vec<(f64, f64)> = text
        .lines()
        .skip(1)
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (f[1].parse().unwrap(), f[2].parse().unwrap())
        })
        .collect();
    (rows[0], *rows.last().unwrap())
}

#[test]
fn default_pipeline_smoke() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    for cmd in ["synth", "train", "eval"] {
        let o = hs(d, &[cmd]);
        assert_eq!(code(&o), 0, "{cmd}: {}", stderr(&o));
    }
    assert_eq!(
        roc_endpoints(&d.join("roc_td0.csv")),
        ((0.0, 0.0), (1.0, 1.0))
    );
    let metrics = std::fs::read_to_string(d.join("train_metrics.csv")).unwrap();
    assert!(metrics.starts_with("metric,value\n"));
}

#[test]
fn small_pipeline_all_commands() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let cfg = small_config(d);
    for cmd in ["synth", "train", "eval", "sense"] {
        let o = hs(d, &["--config", &cfg, cmd]);
        assert_eq!(code(&o), 0, "{cmd}: {}", stderr(&o));
    }
    assert_eq!(
        roc_endpoints(&d.join("roc_td1.csv")),
        ((0.0, 0.0), (1.0, 1.0))
    );
    let log = std::fs::read_to_string(d.join("gate_log.csv")).unwrap();
    assert!(log.starts_with("frame,truth,decision,count,gate,reason\n"));
    assert_eq!(log.lines().count(), 41);
    let energy = std::fs::read_to_string(d.join("energy.csv")).unwrap();
    assert!(energy.starts_with("system,sense,edge,tx,cloud,total\nconventional,"));

    let o = hs(
        d,
        &[
            "--config",
            &cfg,
            "sweep",
            "--metric",
            "f1",
            "--stride",
            "6,12",
            "--t-score",
            "0,0.1",
        ],
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let sweep = std::fs::read_to_string(d.join("sweep.csv")).unwrap();
    let mut lines = sweep.lines();
    assert_eq!(
        lines.next().unwrap(),
        "fragment,dim,stride,t_detection,t_score,skipped_rows,skipped_cols,f1"
    );
    assert_eq!(lines.count(), 2 * 3 * 2);
    let f1: Vec<f64> = sweep
        .lines()
        .skip(1)
        .map(|l| l.rsplit(',').next().unwrap().parse().unwrap())
        .collect();
    let mut best = f1.clone();
    best.sort_by(|a, b| b.total_cmp(a));
    let top10 = best[..10].iter().sum::<f64>() / 10.0;
    let meta = std::fs::read_to_string(d.join("sweep_meta.csv")).unwrap();
    let row: Vec<&str> = meta.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(row[1], "frames.hsf");
    assert_eq!(row[2], "12");
    assert!((row[3].parse::<f64>().unwrap() - top10).abs() < 1e-12);
}

#[test]
fn outputs_are_reproducible() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [a.path(), b.path()] {
        let cfg = small_config(d);
        for cmd in ["synth", "train"] {
            assert_eq!(code(&hs(d, &["--config", &cfg, "--seed", "5", cmd])), 0);
        }
    }
    for f in ["frames.hsf", "labels.csv", "model.hsm", "train_metrics.csv"] {
        assert_eq!(
            std::fs::read(a.path().join(f)).unwrap(),
            std::fs::read(b.path().join(f)).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn flags_override_config() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let cfg = small_config(d);
    let o = hs(
        d,
        &[
            "--config",
            &cfg,
            "synth",
            "--frames",
            "7",
            "--presence",
            "0",
        ],
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(stdout(&o), "frames,occupied\n7,0\n");
    // No objects: the labels file is just its header.
    assert_eq!(
        std::fs::read_to_string(d.join("labels.csv")).unwrap(),
        "frame,x,y,w,h\n"
    );
}

#[test]
fn out_of_bounds_box_names_frame() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let cfg = small_config(d);
    assert_eq!(code(&hs(d, &["--config", &cfg, "synth"])), 0);
    std::fs::write(
        d.join("labels.csv"),
        "frame,x,y,w,h\n0,1,1,5,5\n3,40,40,20,20\n",
    )
    .unwrap();
    let o = hs(d, &["--config", &cfg, "train"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("frame 3"), "{}", stderr(&o));
}

#[test]
fn malformed_inputs_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("frames.hsf"), b"XXXX\0\0\0\0").unwrap();
    std::fs::write(d.join("labels.csv"), "frame,x,y,w,h\n").unwrap();
    let o = hs(d, &["train"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("magic"));
    std::fs::write(d.join("model.hsm"), b"HSM1").unwrap();
    assert_eq!(code(&hs(d, &["eval"])), 2);
    assert_eq!(code(&hs(d, &["eval", "--model", "/no/such/model.hsm"])), 2);
}

#[test]
fn usage_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(code(&hs(d, &["frobnicate"])), 1);
    assert_eq!(code(&hs(d, &["synth", "--frames", "many"])), 1);
    assert_eq!(code(&hs(d, &["synth", "--radius-max", "100"])), 1);
    let cfg = d.join("bad.cfg");
    std::fs::write(&cfg, "colour = blue\n").unwrap();
    let o = hs(d, &["--config", cfg.to_str().unwrap(), "synth"]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("colour"));
    assert_eq!(
        code(&hs(d, &["bench", "--fragment", "8", "--dim", "60"])),
        1
    );
    assert_eq!(code(&hs(d, &["--help"])), 0);
}

#[test]
fn bench_reports_exact_steady_state_factor() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let o = hs(
        d,
        &[
            "bench",
            "--fragment",
            "8",
            "--stride",
            "1",
            "--dim",
            "64",
            "--height",
            "32",
        ],
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let csv = std::fs::read_to_string(d.join("bench.csv")).unwrap();
    assert!(csv.contains("\n512,120,4.27,64/15\n"), "{csv}");
    assert!(stdout(&o).contains("wall_ms"));
    let naive: u64 = csv
        .lines()
        .nth(1)
        .unwrap()
        .split(',')
        .nth(1)
        .unwrap()
        .parse()
        .unwrap();
    // 25 x 25 windows of 64 pixels, D = 64.
    assert_eq!(naive, 25 * 25 * 64 * 64);
}

#[test]
fn accsim_writes_trace_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let o = hs(
        d,
        &[
            "accsim",
            "--height",
            "12",
            "--fragment",
            "4",
            "--dim",
            "16",
            "--t2",
            "2",
        ],
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let trace = std::fs::read_to_string(d.join("trace.csv")).unwrap();
    assert!(trace.starts_with("cycle,sa,pe_row,pe_col,active,mults,forwards,completions\n"));
    let summary = std::fs::read_to_string(d.join("accsim_summary.csv")).unwrap();
    assert!(summary.starts_with("cycles,projection_cycles,"));
    assert_eq!(
        code(&hs(
            d,
            &[
                "accsim",
                "--height",
                "12",
                "--fragment",
                "4",
                "--dim",
                "16",
                "--t2",
                "20"
            ]
        )),
        1
    );
}
