//! End-to-end runs of the `mdne` binary on a toy dataset.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_mdne")
}

fn fixture_dir(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("mdne-cli-it-{}-{name}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

/// Two loose communities with distinguishing attributes and labels.
fn write_toy_dataset(dir: &Path) {
    std::fs::write(
        dir.join("toy.edges"),
        "a b\nb c\nc d\na c\nb d\ne f\nf g\ng h\ne g\nf h\nd e\n",
    )
    .unwrap();
    std::fs::write(
        dir.join("toy.attrs"),
        "a 0:1 1:1\nb 0:1 2:1\nc 1:1 2:1\nd 0:1 1:1 2:1\ne 3:1 4:1\nf 3:1 5:1\ng 4:1 5:1\nh 3:1 4:1 5:1\n",
    )
    .unwrap();
    std::fs::write(
        dir.join("toy.labels"),
        "a red\nb red\nc red\nd red\ne blue\nf blue\ng blue\nh blue\n",
    )
    .unwrap();
}

fn write_toy_config(dir: &Path) -> PathBuf {
    let config = dir.join("toy.conf");
    std::fs::write(
        &config,
        "[dataset]\n\
         format = generic\n\
         edges = toy.edges\n\
         attributes = toy.attrs\n\
         labels = toy.labels\n\
         \n\
         [model]\n\
         pre_struct_dim = 4\n\
         pre_attr_dim = 3\n\
         hidden_dims = 2\n\
         \n\
         [train]\n\
         max_iters = 40\n\
         lr = 0.001\n\
         seed = 7\n\
         pretrain_epochs = 10\n\
         pretrain_batch = 4\n\
         convergence_tol = 0\n\
         \n\
         [output]\n\
         dir = out\n",
    )
    .unwrap();
    config
}

fn run(args: &[&str]) -> Output {
    Command::new(bin()).args(args).output().expect("spawn mdne")
}

fn assert_ok(out: &Output) {
    assert!(
        out.status.success(),
        "command failed\nstdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn train_writes_three_artifacts_with_expected_row_counts() {
    let dir = fixture_dir("train");
    write_toy_dataset(&dir);
    let config = write_toy_config(&dir);
    let out = run(&["train", "--config", config.to_str().unwrap()]);
    assert_ok(&out);

    let out_dir = dir.join("out");
    assert!(out_dir.join("model.ckpt").exists());
    let emb = std::fs::read_to_string(out_dir.join("embeddings.tsv")).unwrap();
    let lines: Vec<&str> = emb.lines().collect();
    assert_eq!(lines.len(), 9, "header + 8 nodes");
    assert!(lines[0].starts_with("#mdne v1 n=8 d=2"));
    assert_eq!(lines[1].split('\t').count(), 3, "id + 2 embedding columns");
    let report = std::fs::read_to_string(out_dir.join("train_report.csv")).unwrap();
    assert_eq!(report.lines().count(), 41, "header + 40 iterations");
}

#[test]
fn train_is_byte_reproducible() {
    let dir = fixture_dir("repro");
    write_toy_dataset(&dir);
    let config = write_toy_config(&dir);
    let out1 = dir.join("run1");
    let out2 = dir.join("run2");
    assert_ok(&run(&[
        "train",
        "--config",
        config.to_str().unwrap(),
        "--out",
        out1.to_str().unwrap(),
    ]));
    assert_ok(&run(&[
        "train",
        "--config",
        config.to_str().unwrap(),
        "--out",
        out2.to_str().unwrap(),
    ]));
    let a = std::fs::read(out1.join("embeddings.tsv")).unwrap();
    let b = std::fs::read(out2.join("embeddings.tsv")).unwrap();
    assert_eq!(a, b, "same config and seed must give byte-identical embeddings");
    let ca = std::fs::read(out1.join("model.ckpt")).unwrap();
    let cb = std::fs::read(out2.join("model.ckpt")).unwrap();
    assert_eq!(ca, cb);
}

#[test]
fn eval_reconstruct_writes_one_csv_row_per_k() {
    let dir = fixture_dir("reconstruct");
    write_toy_dataset(&dir);
    let config = write_toy_config(&dir);
    assert_ok(&run(&["train", "--config", config.to_str().unwrap()]));
    let artifact = dir.join("out/embeddings.tsv");
    let out = run(&[
        "eval",
        "--config",
        config.to_str().unwrap(),
        "--artifact",
        artifact.to_str().unwrap(),
        "--task",
        "reconstruct",
        "--k",
        "2,5",
    ]);
    assert_ok(&out);
    let csv = std::fs::read_to_string(dir.join("out/metrics.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 3, "header + 2 rows: {csv}");
    assert!(lines[1].starts_with("reconstruct,toy,k=2,precision,"));
    assert!(lines[2].starts_with("reconstruct,toy,k=5,precision,"));
}

#[test]
fn eval_checkpoint_artifact_matches_embeddings_artifact() {
    let dir = fixture_dir("ckpt-eval");
    write_toy_dataset(&dir);
    let config = write_toy_config(&dir);
    assert_ok(&run(&["train", "--config", config.to_str().unwrap()]));
    let from_emb = run(&[
        "eval",
        "--config",
        config.to_str().unwrap(),
        "--artifact",
        dir.join("out/embeddings.tsv").to_str().unwrap(),
        "--task",
        "reconstruct",
        "--k",
        "3",
    ]);
    assert_ok(&from_emb);
    let csv_emb = std::fs::read_to_string(dir.join("out/metrics.csv")).unwrap();
    let from_ckpt = run(&[
        "eval",
        "--config",
        config.to_str().unwrap(),
        "--artifact",
        dir.join("out/model.ckpt").to_str().unwrap(),
        "--task",
        "reconstruct",
        "--k",
        "3",
    ]);
    assert_ok(&from_ckpt);
    let csv_ckpt = std::fs::read_to_string(dir.join("out/metrics.csv")).unwrap();
    assert_eq!(csv_emb, csv_ckpt);
}

#[test]
fn eval_linkpred_runs_on_citation_style_toys() {
    // Expected to score poorly on sparse graphs; the command must still work.
    let dir = fixture_dir("linkpred");
    write_toy_dataset(&dir);
    let config = write_toy_config(&dir);
    // Train on the masked network so the protocol is coherent.
    let held = dir.join("held.conf");
    let base = std::fs::read_to_string(&config).unwrap();
    std::fs::write(&held, format!("{base}\n[holdout]\ntask = links\nratio = 0.2\n")).unwrap();
    assert_ok(&run(&["train", "--config", held.to_str().unwrap()]));
    let out = run(&[
        "eval",
        "--config",
        held.to_str().unwrap(),
        "--artifact",
        dir.join("out/model.ckpt").to_str().unwrap(),
        "--task",
        "linkpred",
        "--ratio",
        "0.2",
    ]);
    assert_ok(&out);
    let csv = std::fs::read_to_string(dir.join("out/metrics.csv")).unwrap();
    assert!(csv.lines().nth(1).unwrap().starts_with("linkpred,toy,ratio=0.2,auc,"));
}

#[test]
fn eval_attrpred_runs() {
    let dir = fixture_dir("attrpred");
    write_toy_dataset(&dir);
    let config = write_toy_config(&dir);
    let held = dir.join("held.conf");
    let base = std::fs::read_to_string(&config).unwrap();
    std::fs::write(&held, format!("{base}\n[holdout]\ntask = attributes\nratio = 0.2\n")).unwrap();
    assert_ok(&run(&["train", "--config", held.to_str().unwrap()]));
    let out = run(&[
        "eval",
        "--config",
        held.to_str().unwrap(),
        "--artifact",
        dir.join("out/model.ckpt").to_str().unwrap(),
        "--task",
        "attrpred",
        "--ratio",
        "0.2",
    ]);
    assert_ok(&out);
}

#[test]
fn eval_classify_without_labels_is_validation_error() {
    let dir = fixture_dir("nolabels");
    write_toy_dataset(&dir);
    let config = dir.join("nolabel.conf");
    std::fs::write(
        &config,
        "[dataset]\nformat = generic\nedges = toy.edges\nattributes = toy.attrs\n\
         [model]\npre_struct_dim = 4\npre_attr_dim = 3\nhidden_dims = 2\n\
         [train]\nmax_iters = 5\nlr = 0.001\nseed = 7\npretrain_epochs = 2\npretrain_batch = 4\n\
         [output]\ndir = out\n",
    )
    .unwrap();
    assert_ok(&run(&["train", "--config", config.to_str().unwrap()]));
    let out = run(&[
        "eval",
        "--config",
        config.to_str().unwrap(),
        "--artifact",
        dir.join("out/embeddings.tsv").to_str().unwrap(),
        "--task",
        "classify",
    ]);
    assert_eq!(out.status.code(), Some(2), "stderr: {}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn eval_rejects_malformed_embeddings_file() {
    let dir = fixture_dir("badartifact");
    write_toy_dataset(&dir);
    let config = write_toy_config(&dir);
    let bad = dir.join("bad.tsv");
    std::fs::write(&bad, "#mdne v1 n=8 d=2\na\t0.5\n").unwrap();
    let out = run(&[
        "eval",
        "--config",
        config.to_str().unwrap(),
        "--artifact",
        bad.to_str().unwrap(),
        "--task",
        "reconstruct",
        "--k",
        "2",
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("columns"));
}

#[test]
fn unknown_config_key_is_validation_error() {
    let dir = fixture_dir("badconf");
    write_toy_dataset(&dir);
    let config = dir.join("bad.conf");
    std::fs::write(
        &config,
        "[dataset]\nformat = generic\nedges = toy.edges\nattributes = toy.attrs\nturbo = yes\n[model]\n",
    )
    .unwrap();
    let out = run(&["train", "--config", config.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn embed_node_matches_training_embedding_row() {
    let dir = fixture_dir("embed");
    write_toy_dataset(&dir);
    let config = write_toy_config(&dir);
    assert_ok(&run(&["train", "--config", config.to_str().unwrap()]));

    // Node "a" has neighbors b (idx 1) and c (idx 2); attributes 0 and 1.
    std::fs::write(dir.join("a.struct"), "1:1 2:1\n").unwrap();
    std::fs::write(dir.join("a.attrs"), "0:1 1:1\n").unwrap();
    let out = run(&[
        "embed-node",
        "--checkpoint",
        dir.join("out/model.ckpt").to_str().unwrap(),
        "--structure",
        dir.join("a.struct").to_str().unwrap(),
        "--attributes",
        dir.join("a.attrs").to_str().unwrap(),
    ]);
    assert_ok(&out);
    let line = String::from_utf8_lossy(&out.stdout);
    let values: Vec<f64> = line
        .trim()
        .split('\t')
        .map(|v| v.parse().unwrap())
        .collect();
    assert_eq!(values.len(), 2);

    let emb = std::fs::read_to_string(dir.join("out/embeddings.tsv")).unwrap();
    let row_a = emb.lines().nth(1).unwrap();
    let want: Vec<f64> = row_a
        .split('\t')
        .skip(1)
        .map(|v| v.parse().unwrap())
        .collect();
    assert_eq!(values, want, "embed-node must reproduce the training row exactly");
}

#[test]
fn embed_node_single_modality_and_missing_both() {
    let dir = fixture_dir("embed2");
    write_toy_dataset(&dir);
    let config = write_toy_config(&dir);
    assert_ok(&run(&["train", "--config", config.to_str().unwrap()]));
    std::fs::write(dir.join("x.attrs"), "3:1 5:1\n").unwrap();
    let out = run(&[
        "embed-node",
        "--checkpoint",
        dir.join("out/model.ckpt").to_str().unwrap(),
        "--attributes",
        dir.join("x.attrs").to_str().unwrap(),
    ]);
    assert_ok(&out);
    let line = String::from_utf8_lossy(&out.stdout);
    for v in line.trim().split('\t') {
        let f: f64 = v.parse().unwrap();
        assert!(f.is_finite() && f > 0.0 && f < 1.0);
    }

    let none = run(&[
        "embed-node",
        "--checkpoint",
        dir.join("out/model.ckpt").to_str().unwrap(),
    ]);
    assert_eq!(none.status.code(), Some(2));
}

#[test]
fn sweep_writes_ranked_results() {
    let dir = fixture_dir("sweep");
    write_toy_dataset(&dir);
    let config = write_toy_config(&dir);
    std::fs::write(dir.join("grid.txt"), "lambda = 0, 0.02\n").unwrap();
    let out = run(&[
        "sweep",
        "--config",
        config.to_str().unwrap(),
        "--grid",
        dir.join("grid.txt").to_str().unwrap(),
        "--task",
        "reconstruct",
        "--k",
        "5",
    ]);
    assert_ok(&out);
    let csv = std::fs::read_to_string(dir.join("out/sweep_results.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 3, "header + 2 cells: {csv}");
    assert!(lines[0].starts_with("rank,assignment,score"));
}

#[test]
fn commands_do_not_mutate_inputs() {
    let dir = fixture_dir("immutability");
    write_toy_dataset(&dir);
    let config = write_toy_config(&dir);
    let before: Vec<Vec<u8>> = ["toy.edges", "toy.attrs", "toy.labels"]
        .iter()
        .map(|f| std::fs::read(dir.join(f)).unwrap())
        .collect();
    assert_ok(&run(&["train", "--config", config.to_str().unwrap()]));
    let after: Vec<Vec<u8>> = ["toy.edges", "toy.attrs", "toy.labels"]
        .iter()
        .map(|f| std::fs::read(dir.join(f)).unwrap())
        .collect();
    assert_eq!(before, after);
}
