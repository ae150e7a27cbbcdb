//! End-to-end checks of the `prodesign` binary: the full curate → vocab →
//! train → generate → evaluate chain, plus the exit-code contract for the
//! documented failure modes.

mod common;

use std::fs;
use std::path::Path;

use common::{assert_success, corpus_string, error_record, prodesign, tree_bytes};

fn s(path: &Path) -> &str {
    path.to_str().expect("utf-8 path")
}

fn write(path: &Path, content: &str) {
    fs::write(path, content).expect("writable temp file");
}

fn count_lines(path: &Path) -> usize {
    fs::read_to_string(path)
        .expect("readable file")
        .lines()
        .count()
}

const TRAIN_TOML: &str = "seed = 11\n\n[model]\npreset = \"toy\"\n\n[train]\n\
total_steps = 4\nwarmup_steps = 2\ntokens_per_batch = 512\ncheckpoint_interval = 2\n";

#[test]
fn full_pipeline_produces_coherent_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    write(&dir.join("corpus.jsonl"), &corpus_string(42, 120));

    // Curate with the documented default threshold spelled out.
    let out = prodesign(&[
        "curate",
        "--input",
        s(&dir.join("corpus.jsonl")),
        "--out-dir",
        s(&dir.join("curated")),
        "--threshold",
        "0.3",
        "--seed",
        "7",
    ]);
    assert_success(&out, "curate");
    for name in [
        "train.jsonl",
        "val.jsonl",
        "val-dropped.jsonl",
        "test-seen.jsonl",
        "test-unseen.jsonl",
        "clusters.tsv",
        "rejects.tsv",
        "report.json",
        "run-manifest.json",
    ] {
        assert!(dir.join("curated").join(name).exists(), "curate wrote {name}");
    }
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.join("curated/report.json")).unwrap())
            .unwrap();
    assert_eq!(report["conserved"], serde_json::json!(true));
    assert_eq!(report["accepted"]["records"], serde_json::json!(120));

    // Vocabularies from the training split only.
    let out = prodesign(&[
        "build-vocab",
        "--input",
        s(&dir.join("curated/train.jsonl")),
        "--out-dir",
        s(&dir.join("vocab")),
    ]);
    assert_success(&out, "build-vocab");
    for name in ["text.vocab", "smiles.vocab", "protein.vocab", "vocab-report.json"] {
        assert!(dir.join("vocab").join(name).exists(), "build-vocab wrote {name}");
    }

    // A short training run with a mid-run checkpoint.
    write(&dir.join("train.toml"), TRAIN_TOML);
    let out = prodesign(&[
        "train",
        "--data",
        s(&dir.join("curated/train.jsonl")),
        "--vocab-dir",
        s(&dir.join("vocab")),
        "--out-dir",
        s(&dir.join("run")),
        "--config",
        s(&dir.join("train.toml")),
    ]);
    assert_success(&out, "train");
    assert!(dir.join("run/checkpoints/step-00000002.ckpt").exists());
    assert!(dir.join("run/checkpoints/final.ckpt").exists());
    assert_eq!(count_lines(&dir.join("run/train-log.jsonl")), 4);
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.join("run/train-report.json")).unwrap())
            .unwrap();
    assert_eq!(summary["steps_run"], serde_json::json!(4));
    assert!(summary["final_loss"].as_f64().unwrap().is_finite());

    // Inspect recognizes every artifact kind it claims to.
    for (path, needle) in [
        (dir.join("run/checkpoints/final.ckpt"), "kind: checkpoint"),
        (dir.join("vocab/text.vocab"), "kind: vocabulary (text)"),
        (dir.join("curated/train.jsonl"), "kind: triples"),
        (dir.join("run/run-manifest.json"), "command: train"),
        (dir.join("run/train-log.jsonl"), "kind: jsonl"),
    ] {
        let out = prodesign(&["inspect", s(&path)]);
        assert_success(&out, "inspect");
        let stdout = String::from_utf8_lossy(&out.stdout);
        assert!(stdout.contains(needle), "inspect {path:?} printed:\n{stdout}");
    }

    // Greedy generation: one record per request.
    write(
        &dir.join("prompts.jsonl"),
        "{\"id\":\"g1\",\"description\":\"binds heme pocket\",\"smiles\":\"CCO\"}\n\
         {\"id\":\"g2\",\"description\":\"kinase domain stable fold\",\"smiles\":\"c1ccccc1\"}\n",
    );
    let out = prodesign(&[
        "generate",
        "--checkpoint",
        s(&dir.join("run/checkpoints/final.ckpt")),
        "--requests",
        s(&dir.join("prompts.jsonl")),
        "--vocab-dir",
        s(&dir.join("vocab")),
        "--out-dir",
        s(&dir.join("greedy")),
        "--max-length",
        "40",
    ]);
    assert_success(&out, "generate (greedy)");
    let fasta = fs::read_to_string(dir.join("greedy/designs.fasta")).unwrap();
    assert_eq!(fasta.matches('>').count(), 2);
    assert_eq!(count_lines(&dir.join("greedy/generation.jsonl")), 2);

    // Nucleus sampling at p = 0.4 with five samples: five records per request.
    let out = prodesign(&[
        "generate",
        "--checkpoint",
        s(&dir.join("run/checkpoints/final.ckpt")),
        "--requests",
        s(&dir.join("prompts.jsonl")),
        "--vocab-dir",
        s(&dir.join("vocab")),
        "--out-dir",
        s(&dir.join("sampled")),
        "--mode",
        "nucleus",
        "--nucleus-p",
        "0.4",
        "--num-samples",
        "5",
        "--max-length",
        "40",
        "--seed",
        "3",
    ]);
    assert_success(&out, "generate (nucleus)");
    let fasta = fs::read_to_string(dir.join("sampled/designs.fasta")).unwrap();
    for id in ["g1", "g2"] {
        let per_request = fasta
            .lines()
            .filter(|l| l.starts_with(&format!(">{id} ")))
            .count();
        assert_eq!(per_request, 5, "request {id} should yield 5 sequences");
    }

    // Evaluate against the training proteins.
    let train_text = fs::read_to_string(dir.join("curated/train.jsonl")).unwrap();
    let mut refs = String::new();
    for line in train_text.lines().skip(1).take(5) {
        let rec: serde_json::Value = serde_json::from_str(line).unwrap();
        refs.push_str(&format!(
            ">{}\n{}\n",
            rec["id"].as_str().unwrap(),
            rec["protein"].as_str().unwrap()
        ));
    }
    write(&dir.join("refs.fasta"), &refs);
    write(
        &dir.join("ligands.jsonl"),
        "{\"id\":\"g1\",\"smiles\":\"CCO\"}\n{\"id\":\"g2\",\"smiles\":\"c1ccccc1\"}\n",
    );
    let out = prodesign(&[
        "evaluate",
        "--generated",
        s(&dir.join("sampled/designs.fasta")),
        "--references",
        s(&dir.join("refs.fasta")),
        "--out-dir",
        s(&dir.join("eval")),
        "--emit-manifests",
        "--ligands",
        s(&dir.join("ligands.jsonl")),
    ]);
    assert_success(&out, "evaluate");
    let metrics = fs::read_to_string(dir.join("eval/metrics.tsv")).unwrap();
    assert_eq!(metrics.lines().count(), 11, "header + one row per design");
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.join("eval/summary.json")).unwrap()).unwrap();
    let novelty = summary["mean_novelty"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&novelty));
    assert!(summary["diversity"].as_f64().unwrap().is_finite());
    let cases: Vec<_> = fs::read_dir(dir.join("eval/manifests"))
        .unwrap()
        .map(|e| e.unwrap().path())
        .collect();
    assert_eq!(cases.len(), 10, "one job directory per generated sequence");
    for case in &cases {
        for name in ["job.manifest", "protein.fasta", "ligand.smi"] {
            assert!(case.join(name).exists(), "{case:?} is missing {name}");
        }
    }

    // A file evaluated against itself is novelty zero throughout.
    let out = prodesign(&[
        "evaluate",
        "--generated",
        s(&dir.join("sampled/designs.fasta")),
        "--references",
        s(&dir.join("sampled/designs.fasta")),
        "--out-dir",
        s(&dir.join("eval-self")),
    ]);
    assert_success(&out, "evaluate (self)");
    let metrics = fs::read_to_string(dir.join("eval-self/metrics.tsv")).unwrap();
    for row in metrics.lines().skip(1) {
        let novelty = row.split('\t').nth(4).unwrap();
        assert_eq!(novelty, "0.000000", "self-novelty must be zero: {row}");
    }
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.join("eval-self/summary.json")).unwrap())
            .unwrap();
    assert_eq!(summary["mean_novelty"].as_f64().unwrap(), 0.0);
}

#[test]
fn curate_reruns_are_byte_identical_and_resume_matches_a_full_run() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    write(&dir.join("corpus.jsonl"), &corpus_string(5, 120));
    let corpus = dir.join("corpus.jsonl");
    let curated = dir.join("curated");
    let args = [
        "curate",
        "--input",
        s(&corpus),
        "--out-dir",
        s(&curated),
        "--seed",
        "13",
    ];
    assert_success(&prodesign(&args), "curate (first)");
    let first = tree_bytes(&dir.join("curated"));
    assert_success(&prodesign(&args), "curate (rerun)");
    let second = tree_bytes(&dir.join("curated"));
    assert_eq!(first, second, "curate reruns must be byte-identical");

    // Train six steps; also train three and resume from the mid checkpoint.
    assert_success(
        &prodesign(&[
            "build-vocab",
            "--input",
            s(&dir.join("curated/train.jsonl")),
            "--out-dir",
            s(&dir.join("vocab")),
        ]),
        "build-vocab",
    );
    write(
        &dir.join("train.toml"),
        "seed = 2\n\n[train]\ntotal_steps = 6\nwarmup_steps = 2\n\
         tokens_per_batch = 512\ncheckpoint_interval = 3\n",
    );
    let train = |out_dir: &Path, resume: Option<&Path>| {
        let mut args = vec![
            "train".to_string(),
            "--data".into(),
            s(&dir.join("curated/train.jsonl")).into(),
            "--vocab-dir".into(),
            s(&dir.join("vocab")).into(),
            "--out-dir".into(),
            s(out_dir).into(),
            "--config".into(),
            s(&dir.join("train.toml")).into(),
        ];
        if let Some(ckpt) = resume {
            args.push("--resume".into());
            args.push(s(ckpt).into());
        }
        let refs: Vec<&str> = args.iter().map(String::as_str).collect();
        prodesign(&refs)
    };
    assert_success(&train(&dir.join("full"), None), "train (full)");
    assert_success(
        &train(
            &dir.join("resumed"),
            Some(&dir.join("full/checkpoints/step-00000003.ckpt")),
        ),
        "train (resumed)",
    );
    let a = fs::read(dir.join("full/checkpoints/final.ckpt")).unwrap();
    let b = fs::read(dir.join("resumed/checkpoints/final.ckpt")).unwrap();
    assert_eq!(a, b, "resumed training must land on the same final checkpoint");
}

#[test]
fn missing_inputs_and_bad_flags_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();

    let out = prodesign(&[
        "curate",
        "--input",
        s(&dir.join("absent.jsonl")),
        "--out-dir",
        s(&dir.join("x")),
    ]);
    assert_eq!(out.status.code(), Some(2));
    let record = error_record(&out);
    assert_eq!(record["exit_code"], serde_json::json!(2));
    assert_eq!(record["kind"], serde_json::json!("usage"));

    // An empty request list is a usage error, not a silent no-op.
    write(&dir.join("corpus.jsonl"), &corpus_string(1, 30));
    write(&dir.join("empty.jsonl"), "");
    assert_success(
        &prodesign(&[
            "build-vocab",
            "--input",
            s(&dir.join("corpus.jsonl")),
            "--out-dir",
            s(&dir.join("vocab")),
        ]),
        "build-vocab",
    );
    write(
        &dir.join("train.toml"),
        "[train]\ntotal_steps = 1\nwarmup_steps = 1\n",
    );
    assert_success(
        &prodesign(&[
            "train",
            "--data",
            s(&dir.join("corpus.jsonl")),
            "--vocab-dir",
            s(&dir.join("vocab")),
            "--out-dir",
            s(&dir.join("run")),
            "--config",
            s(&dir.join("train.toml")),
        ]),
        "train",
    );
    let out = prodesign(&[
        "generate",
        "--checkpoint",
        s(&dir.join("run/checkpoints/final.ckpt")),
        "--requests",
        s(&dir.join("empty.jsonl")),
        "--vocab-dir",
        s(&dir.join("vocab")),
        "--out-dir",
        s(&dir.join("gen")),
    ]);
    assert_eq!(out.status.code(), Some(2), "empty request file");

    // Duplicate request ids would collide in the FASTA output.
    write(
        &dir.join("dupes.jsonl"),
        "{\"id\":\"a\",\"description\":\"x\",\"smiles\":\"CCO\"}\n\
         {\"id\":\"a\",\"description\":\"y\",\"smiles\":\"CCO\"}\n",
    );
    let out = prodesign(&[
        "generate",
        "--checkpoint",
        s(&dir.join("run/checkpoints/final.ckpt")),
        "--requests",
        s(&dir.join("dupes.jsonl")),
        "--vocab-dir",
        s(&dir.join("vocab")),
        "--out-dir",
        s(&dir.join("gen2")),
    ]);
    assert_eq!(out.status.code(), Some(2), "duplicate request ids");
    assert!(error_record(&out)["error"]
        .as_str()
        .unwrap()
        .contains("a"));
}

#[test]
fn config_errors_exit_2_and_name_the_problem() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    write(&dir.join("corpus.jsonl"), &corpus_string(2, 30));
    assert_success(
        &prodesign(&[
            "build-vocab",
            "--input",
            s(&dir.join("corpus.jsonl")),
            "--out-dir",
            s(&dir.join("vocab")),
        ]),
        "build-vocab",
    );
    let try_config = |name: &str, toml: &str| {
        write(&dir.join(name), toml);
        prodesign(&[
            "train",
            "--data",
            s(&dir.join("corpus.jsonl")),
            "--vocab-dir",
            s(&dir.join("vocab")),
            "--out-dir",
            s(&dir.join("run")),
            "--config",
            s(&dir.join(name)),
        ])
    };

    let out = try_config("unknown.toml", "[train]\ntotal_steps = 2\nbanana = 1\n");
    assert_eq!(out.status.code(), Some(2));
    assert!(error_record(&out)["error"].as_str().unwrap().contains("banana"));

    let out = try_config("warmup.toml", "[train]\ntotal_steps = 2\nwarmup_steps = 5\n");
    assert_eq!(out.status.code(), Some(2));
    assert!(error_record(&out)["error"]
        .as_str()
        .unwrap()
        .contains("warmup_steps"));

    let out = try_config(
        "preset.toml",
        "[model]\npreset = \"huge\"\n\n[train]\ntotal_steps = 2\nwarmup_steps = 1\n",
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(error_record(&out)["error"].as_str().unwrap().contains("toy"));

    // Flags override the config file: the manifest records the winning seed.
    write(
        &dir.join("seeded.toml"),
        "seed = 11\n\n[train]\ntotal_steps = 1\nwarmup_steps = 1\n",
    );
    assert_success(
        &prodesign(&[
            "train",
            "--data",
            s(&dir.join("corpus.jsonl")),
            "--vocab-dir",
            s(&dir.join("vocab")),
            "--out-dir",
            s(&dir.join("run-seeded")),
            "--config",
            s(&dir.join("seeded.toml")),
            "--seed",
            "5",
        ]),
        "train (seed flag)",
    );
    let manifest: serde_json::Value = serde_json::from_str(
        &fs::read_to_string(dir.join("run-seeded/run-manifest.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(manifest["seed"], serde_json::json!(5));
}

#[test]
fn corrupted_artifacts_exit_3() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    write(&dir.join("corpus.jsonl"), &corpus_string(3, 30));
    assert_success(
        &prodesign(&[
            "build-vocab",
            "--input",
            s(&dir.join("corpus.jsonl")),
            "--out-dir",
            s(&dir.join("vocab")),
        ]),
        "build-vocab",
    );
    write(
        &dir.join("train.toml"),
        "[train]\ntotal_steps = 1\nwarmup_steps = 1\n",
    );
    assert_success(
        &prodesign(&[
            "train",
            "--data",
            s(&dir.join("corpus.jsonl")),
            "--vocab-dir",
            s(&dir.join("vocab")),
            "--out-dir",
            s(&dir.join("run")),
            "--config",
            s(&dir.join("train.toml")),
        ]),
        "train",
    );

    // Truncated checkpoint.
    let full = fs::read(dir.join("run/checkpoints/final.ckpt")).unwrap();
    fs::write(dir.join("broken.ckpt"), &full[..200]).unwrap();
    let out = prodesign(&["inspect", s(&dir.join("broken.ckpt"))]);
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(error_record(&out)["kind"], serde_json::json!("data"));

    // Vocabulary whose content no longer matches its declared hash.
    let mut vocab = fs::read_to_string(dir.join("vocab/text.vocab")).unwrap();
    vocab.push_str("zzz\n");
    write(&dir.join("tampered.vocab"), &vocab);
    let out = prodesign(&["inspect", s(&dir.join("tampered.vocab"))]);
    assert_eq!(out.status.code(), Some(3));

    // Generation against vocabularies the checkpoint was not trained with.
    write(&dir.join("other.jsonl"), &corpus_string(99, 30));
    assert_success(
        &prodesign(&[
            "build-vocab",
            "--input",
            s(&dir.join("other.jsonl")),
            "--out-dir",
            s(&dir.join("vocab2")),
        ]),
        "build-vocab (other)",
    );
    write(
        &dir.join("prompt.jsonl"),
        "{\"id\":\"a\",\"description\":\"x\",\"smiles\":\"CCO\"}\n",
    );
    let out = prodesign(&[
        "generate",
        "--checkpoint",
        s(&dir.join("run/checkpoints/final.ckpt")),
        "--requests",
        s(&dir.join("prompt.jsonl")),
        "--vocab-dir",
        s(&dir.join("vocab2")),
        "--out-dir",
        s(&dir.join("gen")),
    ]);
    assert_eq!(out.status.code(), Some(3), "vocab hash mismatch");

    // Triples file without its header line.
    write(&dir.join("headerless.jsonl"), "{\"id\":\"t0\"}\n");
    let out = prodesign(&[
        "curate",
        "--input",
        s(&dir.join("headerless.jsonl")),
        "--out-dir",
        s(&dir.join("c")),
    ]);
    assert_eq!(out.status.code(), Some(3));

    // A file no sniffer recognizes.
    write(&dir.join("mystery.bin"), "not an artifact\n");
    let out = prodesign(&["inspect", s(&dir.join("mystery.bin"))]);
    assert_eq!(out.status.code(), Some(3));
}
