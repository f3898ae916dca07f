//! End-to-end checks of the command surface: every subcommand is
//! exercised through the real binary, including the failure exits.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use qagcl::synthetic::{self, SyntheticSpec};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_qagcl"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("failed to spawn qagcl")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[track_caller]
fn assert_code(out: &Output, want: i32, ctx: &str) {
    let got = out.status.code().unwrap_or(-1);
    assert_eq!(
        got,
        want,
        "{ctx}: expected exit {want}, got {got}\nstdout:\n{}\nstderr:\n{}",
        stdout(out),
        stderr(out)
    );
}

/// Writes a raw synthetic corpus under `dir` and returns the directory.
fn raw_corpus(dir: &Path, seed: u64) -> PathBuf {
    let spec = SyntheticSpec {
        num_users: 40,
        num_services: 60,
        seed,
        ..SyntheticSpec::default()
    };
    let (qos, geo_users, geo_services) = synthetic::generate(&spec).unwrap();
    let raw = dir.join("raw");
    synthetic::write_raw_files(&raw, &qos, &geo_users, &geo_services).unwrap();
    raw
}

/// Runs `prepare` on a fresh corpus; returns the prepared directory.
fn prepared(dir: &Path, seed: u64) -> PathBuf {
    let raw = raw_corpus(dir, seed);
    let prep = dir.join("prep");
    let out = run(&[
        "prepare",
        "--raw",
        raw.to_str().unwrap(),
        "--out",
        prep.to_str().unwrap(),
        "--gamma",
        "0.05",
        "--core",
        "2",
        "--seed",
        "11",
        "--deterministic",
    ]);
    assert_code(&out, 0, "prepare");
    prep
}

/// Trains a small model on `prep`; returns the run directory.
fn trained(dir: &Path, prep: &Path, extra: &[&str]) -> PathBuf {
    let run_dir = dir.join("run");
    let mut args = vec![
        "train",
        "--prepared",
        prep.to_str().unwrap(),
        "--out",
        run_dir.to_str().unwrap(),
        "--epochs",
        "2",
        "--embed-dim",
        "8",
        "--batch-size",
        "32",
        "--layers",
        "2",
        "--seed",
        "5",
        "--deterministic",
    ];
    args.extend_from_slice(extra);
    let out = run(&args);
    assert_code(&out, 0, "train");
    run_dir
}

/// File names and bytes of every regular file directly under `dir`.
fn snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.is_file())
        .map(|p| {
            (
                p.file_name().unwrap().to_string_lossy().into_owned(),
                fs::read(&p).unwrap(),
            )
        })
        .collect();
    files.sort();
    files
}

fn first_mapped_user(prep: &Path) -> usize {
    let map = fs::read_to_string(prep.join("user_map.tsv")).unwrap();
    let line = map.lines().next().unwrap();
    line.split('\t').nth(1).unwrap().parse().unwrap()
}

#[test]
fn prepare_writes_artifacts_and_reruns_identically() {
    let tmp = tempfile::tempdir().unwrap();
    let prep = prepared(tmp.path(), 1);
    for name in [
        "split.tsv",
        "qos_train.tsv",
        "user_map.tsv",
        "service_map.tsv",
        "geo_users.tsv",
        "geo_services.tsv",
        "meta.tsv",
        "summary.txt",
        "manifest.txt",
    ] {
        assert!(prep.join(name).is_file(), "missing {name}");
    }
    let summary = fs::read_to_string(prep.join("summary.txt")).unwrap();
    assert!(summary.contains("users\t"), "summary: {summary}");
    assert!(summary.contains("density\t"), "summary: {summary}");

    let before = snapshot(&prep);
    let raw = tmp.path().join("raw");
    let again = run(&[
        "prepare",
        "--raw",
        raw.to_str().unwrap(),
        "--out",
        prep.to_str().unwrap(),
        "--gamma",
        "0.05",
        "--core",
        "2",
        "--seed",
        "11",
        "--deterministic",
    ]);
    assert_code(&again, 0, "second prepare");
    assert_eq!(before, snapshot(&prep), "re-run changed prepared bytes");
}

#[test]
fn train_evaluate_recommend_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    let prep = prepared(tmp.path(), 2);
    let run_dir = trained(tmp.path(), &prep, &[]);

    let ckpt = run_dir.join("checkpoint.txt");
    let head = fs::read_to_string(&ckpt).unwrap();
    assert!(
        head.starts_with("qagcl-checkpoint v1"),
        "checkpoint header: {}",
        head.lines().next().unwrap_or("")
    );
    let history = fs::read_to_string(run_dir.join("loss_history.csv")).unwrap();
    assert_eq!(history.lines().count(), 3, "header plus one row per epoch");
    assert!(history.starts_with("epoch,bpr,cl,reg,total"));
    assert!(run_dir.join("mask_a.tsv").is_file());
    assert!(run_dir.join("mask_b.tsv").is_file());

    let eval_dir = tmp.path().join("eval");
    let eval = run(&[
        "evaluate",
        "--checkpoint",
        ckpt.to_str().unwrap(),
        "--prepared",
        prep.to_str().unwrap(),
        "--out",
        eval_dir.to_str().unwrap(),
        "--ks",
        "5,10",
        "--deterministic",
    ]);
    assert_code(&eval, 0, "evaluate");
    let table = stdout(&eval);
    assert!(table.contains("Recall"), "table: {table}");
    assert!(table.contains("users evaluated: "), "table: {table}");
    let csv = fs::read_to_string(eval_dir.join("metrics.csv")).unwrap();
    assert!(csv.starts_with("model,dataset,K,recall,ndcg,seed,config_hash"));
    assert_eq!(csv.lines().count(), 3, "one row per K plus header: {csv}");
    assert!(csv.contains("qagcl,"), "model column: {csv}");

    let user = first_mapped_user(&prep);
    let user_arg = user.to_string();
    let rec = run(&[
        "recommend",
        "--checkpoint",
        ckpt.to_str().unwrap(),
        "--prepared",
        prep.to_str().unwrap(),
        "--user",
        &user_arg,
        "--k",
        "3",
    ]);
    assert_code(&rec, 0, "recommend");
    let rec_out = stdout(&rec);
    let lines: Vec<&str> = rec_out.lines().collect();
    assert_eq!(lines.len(), 3);
    for (i, line) in lines.iter().enumerate() {
        let fields: Vec<&str> = line.split('\t').collect();
        assert_eq!(fields.len(), 3, "line {line:?}");
        assert_eq!(fields[0].parse::<usize>().unwrap(), i + 1);
        fields[2].parse::<f64>().unwrap();
    }
}

#[test]
fn evaluate_baselines_without_checkpoint() {
    let tmp = tempfile::tempdir().unwrap();
    let prep = prepared(tmp.path(), 3);
    for baseline in ["umean", "imean"] {
        let eval_dir = tmp.path().join(format!("eval-{baseline}"));
        let out = run(&[
            "evaluate",
            "--baseline",
            baseline,
            "--prepared",
            prep.to_str().unwrap(),
            "--out",
            eval_dir.to_str().unwrap(),
            "--ks",
            "10",
        ]);
        assert_code(&out, 0, baseline);
        let csv = fs::read_to_string(eval_dir.join("metrics.csv")).unwrap();
        assert!(csv.contains(&format!("{baseline},")), "csv: {csv}");
    }
    // Trained models have no baseline path, and evaluate needs one of
    // --checkpoint or --baseline.
    let out = run(&[
        "evaluate",
        "--baseline",
        "qagcl",
        "--prepared",
        prep.to_str().unwrap(),
    ]);
    assert_code(&out, 1, "trained model as baseline");
    let out = run(&["evaluate", "--prepared", prep.to_str().unwrap()]);
    assert_code(&out, 1, "evaluate without source");
}

#[test]
fn stale_checkpoint_is_refused() {
    let tmp = tempfile::tempdir().unwrap();
    let prep_a = prepared(&tmp.path().join("a"), 4);
    let prep_b = prepared(&tmp.path().join("b"), 5);
    let run_dir = trained(tmp.path(), &prep_a, &[]);
    let out = run(&[
        "evaluate",
        "--checkpoint",
        run_dir.join("checkpoint.txt").to_str().unwrap(),
        "--prepared",
        prep_b.to_str().unwrap(),
    ]);
    assert_code(&out, 4, "checkpoint from another dataset");
    assert!(
        stderr(&out).contains("checkpoint"),
        "stderr: {}",
        stderr(&out)
    );
}

#[test]
fn unknown_user_exits_five() {
    let tmp = tempfile::tempdir().unwrap();
    let prep = prepared(tmp.path(), 6);
    let run_dir = trained(tmp.path(), &prep, &[]);
    let out = run(&[
        "recommend",
        "--checkpoint",
        run_dir.join("checkpoint.txt").to_str().unwrap(),
        "--prepared",
        prep.to_str().unwrap(),
        "--user",
        "99999",
    ]);
    assert_code(&out, 5, "user outside the map");
}

#[test]
fn missing_inputs_exit_two() {
    let tmp = tempfile::tempdir().unwrap();
    let ghost = tmp.path().join("nope");
    let out = run(&["train", "--prepared", ghost.to_str().unwrap()]);
    assert_code(&out, 2, "train on missing dir");

    let prep = prepared(tmp.path(), 7);
    let out = run(&[
        "evaluate",
        "--checkpoint",
        ghost.join("checkpoint.txt").to_str().unwrap(),
        "--prepared",
        prep.to_str().unwrap(),
    ]);
    assert_code(&out, 2, "evaluate with missing checkpoint");
}

#[test]
fn flags_override_config_file_and_presets_apply() {
    let tmp = tempfile::tempdir().unwrap();
    let prep = prepared(tmp.path(), 8);
    let conf = tmp.path().join("run.conf");
    fs::write(&conf, "epochs = 4\nembed_dim = 8\nbatch_size = 32\n").unwrap();

    let run_dir = tmp.path().join("flagged");
    let out = run(&[
        "train",
        "--prepared",
        prep.to_str().unwrap(),
        "--config",
        conf.to_str().unwrap(),
        "--epochs",
        "2",
        "--out",
        run_dir.to_str().unwrap(),
    ]);
    assert_code(&out, 0, "train with config and flag");
    let history = fs::read_to_string(run_dir.join("loss_history.csv")).unwrap();
    assert_eq!(
        history.lines().count(),
        3,
        "flag epochs=2 must beat file epochs=4: {history}"
    );

    // The lightgcn preset pins the contrastive weight to zero, so the cl
    // column of the history is exactly zero.
    let lg_dir = tmp.path().join("lightgcn");
    let out = run(&[
        "train",
        "--prepared",
        prep.to_str().unwrap(),
        "--model",
        "lightgcn",
        "--epochs",
        "1",
        "--embed-dim",
        "8",
        "--batch-size",
        "32",
        "--out",
        lg_dir.to_str().unwrap(),
    ]);
    assert_code(&out, 0, "lightgcn train");
    let history = fs::read_to_string(lg_dir.join("loss_history.csv")).unwrap();
    let row = history.lines().nth(1).unwrap();
    let cl: f64 = row.split(',').nth(2).unwrap().parse().unwrap();
    assert_eq!(cl, 0.0, "row: {row}");
}

#[test]
fn bad_config_inputs_exit_one() {
    let tmp = tempfile::tempdir().unwrap();
    let prep = prepared(tmp.path(), 9);
    let conf = tmp.path().join("bad.conf");
    fs::write(&conf, "no_such_key = 1\n").unwrap();
    let out = run(&[
        "train",
        "--prepared",
        prep.to_str().unwrap(),
        "--config",
        conf.to_str().unwrap(),
    ]);
    assert_code(&out, 1, "unknown config key");
    assert!(
        stderr(&out).contains("no_such_key"),
        "stderr: {}",
        stderr(&out)
    );

    let out = run(&[
        "train",
        "--prepared",
        prep.to_str().unwrap(),
        "--rho",
        "1.5",
    ]);
    assert_code(&out, 1, "rho out of range");
}

#[test]
fn train_rerun_is_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let prep = prepared(tmp.path(), 10);
    let run_dir = trained(tmp.path(), &prep, &[]);
    let before = snapshot(&run_dir);
    let again = trained(tmp.path(), &prep, &[]);
    assert_eq!(run_dir, again);
    assert_eq!(before, snapshot(&run_dir), "re-run changed run bytes");
}

#[test]
fn ablate_and_sweep_write_tables() {
    let tmp = tempfile::tempdir().unwrap();
    let prep = prepared(tmp.path(), 12);
    let small = [
        "--epochs",
        "1",
        "--embed-dim",
        "8",
        "--batch-size",
        "32",
        "--ks",
        "5",
    ];

    let abl_dir = tmp.path().join("ablation");
    let mut args = vec![
        "ablate",
        "--prepared",
        prep.to_str().unwrap(),
        "--pairs",
        "hd-ed,ed-ed",
        "--seeds",
        "1",
        "--out",
        abl_dir.to_str().unwrap(),
    ];
    args.extend_from_slice(&small);
    let out = run(&args);
    assert_code(&out, 0, "ablate");
    assert!(stdout(&out).contains("HD & ED"), "table: {}", stdout(&out));
    let csv = fs::read_to_string(abl_dir.join("ablation.csv")).unwrap();
    assert!(csv.starts_with("pair,K,recall,ndcg,seed,config_hash"));
    assert_eq!(csv.lines().count(), 3, "two pairs, one seed: {csv}");

    let sweep_dir = tmp.path().join("sweep");
    let mut args = vec![
        "sweep-layers",
        "--prepared",
        prep.to_str().unwrap(),
        "--sweep",
        "1,2",
        "--seeds",
        "1",
        "--out",
        sweep_dir.to_str().unwrap(),
    ];
    args.extend_from_slice(&small);
    let out = run(&args);
    assert_code(&out, 0, "sweep-layers");
    let csv = fs::read_to_string(sweep_dir.join("sweep.csv")).unwrap();
    assert!(csv.starts_with("layers,K,recall,ndcg,seed,config_hash"));
    assert_eq!(csv.lines().count(), 3, "two depths, one seed, one K: {csv}");
    assert!(sweep_dir.join("sweep.md").is_file());
}
