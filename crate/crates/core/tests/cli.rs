use std::path::Path;
use std::process::{Command, Output};

fn routecraft(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_routecraft")).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = routecraft(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn arg(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn generate_bench_train_solve_inspect() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("d.jsonl");
    let refs = dir.path().join("ref.csv");
    ok(&["generate", "--variant", "tsptw_hard", "--n", "8", "--count", "6", "--seed", "5", "--out", arg(&data)]);
    assert_eq!(std::fs::read_to_string(&data).unwrap().lines().count(), 6);

    let summary = ok(&["bench", "--method", "brute", "--data", arg(&data), "--write-ref", arg(&refs)]);
    assert!(summary.starts_with("Method,Instances,Obj,Gap"));
    let greedy = ok(&["bench", "--method", "greedy_c", "--data", arg(&data), "--ref", arg(&refs)]);
    assert_eq!(greedy.lines().count(), 2);

    let cfg = dir.path().join("run.toml");
    std::fs::write(
        &cfg,
        "variant = \"tsptw_hard\"\nn = 8\nbatch_size = 2\ninstances_per_epoch = 4\nsamples = 4\ntop_p = 2\nrefine_steps = 2\nwarmup_epochs = 0\n",
    )
    .unwrap();
    let run = dir.path().join("run");
    ok(&["train", "--config", arg(&cfg), "--steps", "3", "--seed", "9", "--out", arg(&run)]);
    let trace = std::fs::read_to_string(run.join("trace.csv")).unwrap();
    assert!(trace.lines().next().unwrap().starts_with('#'));
    assert_eq!(trace.lines().filter(|l| !l.starts_with('#')).count(), 4);
    let ckpt = run.join("policy.ckpt");
    assert!(ckpt.exists());

    let inspected = ok(&["inspect", arg(&ckpt)]);
    assert!(inspected.contains("routecraft-policy/1"));
    let rows = ok(&["solve", "--checkpoint", arg(&ckpt), "--data", arg(&data), "--refine-steps", "2"]);
    assert_eq!(rows.lines().count(), 7);
    assert!(ok(&["inspect", arg(&data)]).contains("tsptw_hard n=8: 6"));

    let cvrp = dir.path().join("cvrp.jsonl");
    ok(&["generate", "--variant", "cvrp", "--n", "6", "--count", "2", "--out", arg(&cvrp)]);
    let wrong = routecraft(&["solve", "--checkpoint", arg(&ckpt), "--data", arg(&cvrp)]);
    assert_eq!(wrong.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&wrong.stderr).starts_with("error:"));
}

#[test]
fn usage_errors() {
    assert_eq!(routecraft(&["bench", "--method", "nope", "--data", "x"]).status.code(), Some(2));
    assert_eq!(routecraft(&["generate", "--n", "4"]).status.code(), Some(1));
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "variant = \"tsptw_hard\"\nbogus = 1\n").unwrap();
    assert_eq!(routecraft(&["train", "--config", arg(&cfg), "--out", arg(dir.path())]).status.code(), Some(1));
}
