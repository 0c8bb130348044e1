use std::path::Path;
use std::process::{Command, Output};

fn pedpath(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pedpath"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn quick_train(out: &Path) -> Output {
    pedpath(&[
        "train",
        "--seed",
        "3",
        "--out",
        s(out),
        "--set",
        "train.total_steps=100",
        "--set",
        "train.hidden=8",
    ])
}

#[test]
fn train_eval_compare_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let run = dir.path().join("run");
    let o = quick_train(&run);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let curve = std::fs::read_to_string(run.join("curve.csv")).unwrap();
    assert!(curve.starts_with("step,mean_reward,loss,clip_fraction\n"));
    assert_eq!(curve.lines().count(), 2);
    let manifest = std::fs::read_to_string(run.join("manifest.txt")).unwrap();
    assert!(manifest.contains("train_seed=3") && manifest.contains("config_hash="));

    let ckpt = run.join("policy.ckpt");
    let eval_dir = dir.path().join("eval");
    let o = pedpath(&["eval", "--checkpoint", s(&ckpt), "--out", s(&eval_dir)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let metrics = std::fs::read_to_string(eval_dir.join("metrics.csv")).unwrap();
    assert_eq!(
        metrics.lines().next().unwrap(),
        "scenario,method,total_length,max_turn_deg,min_clearance,left_fraction,boundary_violations,total_reward"
    );
    assert_eq!(metrics.lines().count(), 5);
    let svgs = std::fs::read_dir(&eval_dir)
        .unwrap()
        .filter(|e| {
            e.as_ref()
                .unwrap()
                .path()
                .extension()
                .is_some_and(|x| x == "svg")
        })
        .count();
    assert_eq!(svgs, 4);

    let cmp_dir = dir.path().join("cmp");
    let o = pedpath(&["compare", "--checkpoint", s(&ckpt), "--out", s(&cmp_dir)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let compare = std::fs::read_to_string(cmp_dir.join("compare.csv")).unwrap();
    assert_eq!(compare.lines().count(), 1 + 8);
    assert!(compare.lines().skip(1).any(|l| l.contains(",sfm,")));
}

#[test]
fn invalid_inputs_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");

    let bad_cfg = dir.path().join("bad.json");
    std::fs::write(&bad_cfg, "{ \"train\": { \"total_steps\": } }").unwrap();
    let o = pedpath(&["train", "--config", s(&bad_cfg), "--out", s(&out)]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 1"));

    let o = pedpath(&["train", "--out", s(&out), "--set", "train.warp=9"]);
    assert_eq!(code(&o), 1);

    let corrupt = dir.path().join("corrupt.ckpt");
    std::fs::write(&corrupt, "pedpath-checkpoint v1\nnot a checkpoint\n").unwrap();
    let o = pedpath(&["eval", "--checkpoint", s(&corrupt), "--out", s(&out)]);
    assert_eq!(code(&o), 1);

    let o = pedpath(&["eval", "--out", s(&out)]);
    assert_eq!(code(&o), 1, "missing checkpoint");

    let o = pedpath(&["oracle", "--budget", "10", "--out", s(&out)]);
    assert_eq!(code(&o), 1);

    let bad_suite = dir.path().join("suite.json");
    std::fs::write(
        &bad_suite,
        r#"{"scenarios":[{"name":"x","start":{"x":0,"y":-12},"destination":{"x":0,"y":10},
            "obstacle":{"center":{"x":0,"y":0},"radius":7,"danger":0.5}}]}"#,
    )
    .unwrap();
    let o = pedpath(&["oracle", "--suite", s(&bad_suite), "--out", s(&out)]);
    assert_eq!(code(&o), 1);
}

#[test]
fn empty_suite_gives_header_only() {
    let dir = tempfile::tempdir().unwrap();
    let suite = dir.path().join("empty.json");
    std::fs::write(&suite, r#"{"scenarios": []}"#).unwrap();
    let out = dir.path().join("o");
    let o = pedpath(&["oracle", "--suite", s(&suite), "--out", s(&out)]);
    assert_eq!(code(&o), 0);
    let csv = std::fs::read_to_string(out.join("oracle.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1);
}

#[test]
fn sfm_failure_exits_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let run = dir.path().join("run");
    assert_eq!(code(&quick_train(&run)), 0);
    let o = pedpath(&[
        "compare",
        "--checkpoint",
        s(&run.join("policy.ckpt")),
        "--out",
        s(&dir.path().join("cmp")),
        "--set",
        "sfm.max_steps=1",
    ]);
    assert_eq!(code(&o), 3);
}

#[test]
fn diverging_training_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let o = pedpath(&[
        "train",
        "--out",
        s(dir.path()),
        "--set",
        "train.total_steps=2048",
        "--set",
        "train.learning_rate=1e300",
        "--set",
        "train.max_grad_norm=0",
    ]);
    assert_eq!(code(&o), 2, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn inputs_are_left_untouched() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    let text = r#"{"train": {"total_steps": 64, "hidden": 8}}"#;
    std::fs::write(&cfg, text).unwrap();
    let o = pedpath(&[
        "train",
        "--config",
        s(&cfg),
        "--out",
        s(&dir.path().join("o")),
    ]);
    assert_eq!(code(&o), 0);
    assert_eq!(std::fs::read_to_string(&cfg).unwrap(), text);
}
