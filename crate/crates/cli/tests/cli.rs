use std::path::Path;
use std::process::{Command, Output};

fn toch(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_toch"))
        .args(["--threads", "1"])
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = toch(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn demo_pipeline_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let listed = ok(&["make-demo", "--out-dir", p(d), "--frames", "8"]);
    assert_eq!(listed.lines().count(), 4);
    for f in [
        "hand.json",
        "object.obj",
        "groundtruth.json",
        "noisy.json",
        "untrained_weights.json",
    ] {
        assert!(d.join(f).exists(), "{f}");
    }

    let field = d.join("gt.toch");
    ok(&[
        "extract",
        "--sequence",
        p(&d.join("groundtruth.json")),
        "--n-points",
        "500",
        "--out",
        p(&field),
    ]);
    let smoothed = d.join("smooth.toch");
    ok(&[
        "denoise",
        "--field",
        p(&field),
        "--baseline",
        "--window",
        "3",
        "--out",
        p(&smoothed),
    ]);
    let decoded = d.join("net.toch");
    ok(&[
        "denoise",
        "--field",
        p(&field),
        "--weights",
        p(&d.join("untrained_weights.json")),
        "--out",
        p(&decoded),
    ]);

    let refined = d.join("refined.json");
    let report = d.join("report.json");
    ok(&[
        "refine",
        "--sequence",
        p(&d.join("noisy.json")),
        "--oracle-field",
        p(&field),
        "--n-points",
        "500",
        "--stage2-iters",
        "300",
        "--report",
        p(&report),
        "--out",
        p(&refined),
    ]);
    assert!(json(&report)["fit"]["stages"].is_array());

    let before = d.join("before.json");
    let after = d.join("after.json");
    let gt = d.join("groundtruth.json");
    ok(&[
        "metrics",
        "--pred",
        p(&d.join("noisy.json")),
        "--gt",
        p(&gt),
        "--n-points",
        "500",
        "--out",
        p(&before),
    ]);
    ok(&[
        "metrics",
        "--pred",
        p(&refined),
        "--gt",
        p(&gt),
        "--n-points",
        "500",
        "--out",
        p(&after),
    ]);
    let (b, a) = (json(&before), json(&after));
    assert!(a["mpvpe"].as_f64().unwrap() < b["mpvpe"].as_f64().unwrap());
    assert_eq!(a["frames"].as_array().unwrap().len(), 8);

    let fitted = d.join("fitted.json");
    ok(&[
        "fit",
        "--model",
        p(&d.join("hand.json")),
        "--init",
        p(&d.join("noisy.json")),
        "--field",
        p(&field),
        "--stage1-iters",
        "0",
        "--stage2-iters",
        "0",
        "--out",
        p(&fitted),
    ]);
    // Zero iterations keep the tracked input.
    assert_eq!(
        json(&fitted)["frames"],
        json(&d.join("noisy.json"))["frames"]
    );
}

#[test]
fn perturb_and_sample_points_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&["make-demo", "--out-dir", p(d), "--frames", "4"]);
    let gt = d.join("groundtruth.json");
    let run = |name: &str| {
        let out = d.join(name);
        ok(&[
            "perturb",
            "--sequence",
            p(&gt),
            "--kind",
            "pose",
            "--sigma-pose",
            "0.1",
            "--seed",
            "3",
            "--out",
            p(&out),
        ]);
        std::fs::read_to_string(out).unwrap()
    };
    assert_eq!(run("a.json"), run("b.json"));

    let pts = d.join("points.json");
    ok(&[
        "sample-points",
        "--mesh",
        p(&d.join("object.obj")),
        "--n",
        "64",
        "--seed",
        "9",
        "--out",
        p(&pts),
    ]);
    let v = json(&pts);
    assert_eq!(v["points"].as_array().unwrap().len(), 64);
    assert_eq!(v["normals"].as_array().unwrap().len(), 64);
}

#[test]
fn transfer_writes_a_sequence_on_the_new_object() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&["make-demo", "--out-dir", p(d), "--frames", "3"]);
    let target = d.join("target.obj");
    std::fs::write(
        &target,
        std::fs::read_to_string(d.join("object.obj"))
            .unwrap()
            .lines()
            .map(|l| {
                if let Some(rest) = l.strip_prefix("v ") {
                    let c: Vec<f64> = rest
                        .split_whitespace()
                        .map(|x| x.parse().unwrap())
                        .collect();
                    format!("v {} {} {}", c[0] * 1.2, c[1], c[2])
                } else {
                    l.to_string()
                }
            })
            .collect::<Vec<_>>()
            .join("\n"),
    )
    .unwrap();
    let out = d.join("moved.json");
    ok(&[
        "transfer",
        "--sequence",
        p(&d.join("groundtruth.json")),
        "--target-object",
        p(&target),
        "--weights",
        p(&d.join("untrained_weights.json")),
        "--n-points",
        "300",
        "--stage1-iters",
        "5",
        "--stage2-iters",
        "5",
        "--out",
        p(&out),
    ]);
    let v = json(&out);
    assert_eq!(v["frames"].as_array().unwrap().len(), 3);
    assert!(v["object_mesh"].as_str().unwrap().ends_with("target.obj"));
}

#[test]
fn errors_are_reported_on_one_line() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&["make-demo", "--out-dir", p(d), "--frames", "2"]);

    let out = toch(&[
        "refine",
        "--sequence",
        p(&d.join("noisy.json")),
        "--out",
        p(&d.join("x.json")),
    ]);
    assert!(!out.status.success());
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.starts_with("error: invalid-argument: "), "{err}");
    assert!(err.contains("--weights"), "{err}");
    assert_eq!(err.trim_end().lines().count(), 1);

    let out = toch(&[
        "extract",
        "--sequence",
        p(&d.join("missing.json")),
        "--out",
        p(&d.join("x.toch")),
    ]);
    assert!(!out.status.success());
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.starts_with("error: io: "), "{err}");

    std::fs::write(d.join("bad.toch"), b"NOPE").unwrap();
    let out = toch(&[
        "denoise",
        "--field",
        p(&d.join("bad.toch")),
        "--baseline",
        "--out",
        p(&d.join("y.toch")),
    ]);
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.starts_with("error: format: "), "{err}");
}
