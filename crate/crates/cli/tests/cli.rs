use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use garec_core::contrastive::LinearAdapter;
use garec_core::embed_store::EmbeddingStore;
use serde_json::Value;

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/e2e")
}

fn garec(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_garec"))
        .args(args)
        .env("RUST_LOG", "error")
        .output()
        .unwrap()
}

fn ok(args: &[&str]) -> Output {
    let out = garec(args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn code(args: &[&str]) -> i32 {
    garec(args).status.code().unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Canonical corpus in a fresh temp dir.
fn ingested() -> (tempfile::TempDir, PathBuf) {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("corpus.jsonl");
    ok(&[
        "ingest",
        "--input",
        s(&fixtures().join("corpus.jsonl")),
        "--output",
        s(&corpus),
    ]);
    (dir, corpus)
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn ingest_is_idempotent_and_sorted() {
    let (dir, corpus) = ingested();
    let again = dir.path().join("again.jsonl");
    ok(&["ingest", "--input", s(&corpus), "--output", s(&again)]);
    let first = std::fs::read_to_string(&corpus).unwrap();
    assert_eq!(first, std::fs::read_to_string(&again).unwrap());
    let ids: Vec<String> = first
        .lines()
        .map(|l| {
            serde_json::from_str::<Value>(l).unwrap()["paper_id"]
                .as_str()
                .unwrap()
                .to_string()
        })
        .collect();
    assert_eq!(ids, ["p1", "p2", "p3", "p4", "p5", "p6"]);
}

#[test]
fn invalid_input_exits_with_two() {
    let (dir, corpus) = ingested();
    let bad = dir.path().join("bad.jsonl");
    std::fs::write(&bad, "{\"paper_id\": \"a\", \"split\": \"dev\"}\n").unwrap();
    assert_eq!(
        code(&[
            "ingest",
            "--input",
            s(&bad),
            "--output",
            s(&dir.path().join("x"))
        ]),
        2
    );
    let missing = dir.path().join("nope.jsonl");
    assert_eq!(code(&["stats", "--corpus", s(&missing)]), 2);
    // random scoring needs a seed
    let out = s(&dir.path().join("r.csv")).to_string();
    assert_eq!(
        code(&[
            "score",
            "--corpus",
            s(&corpus),
            "--task",
            "intra",
            "--method",
            "random",
            "--out",
            &out
        ]),
        2
    );
    // embedding methods need a store
    assert_eq!(
        code(&[
            "score",
            "--corpus",
            s(&corpus),
            "--task",
            "intra",
            "--method",
            "abs2fig",
            "--out",
            &out
        ]),
        2
    );
    assert_eq!(
        code(&["--alpha", "1.5", "stats", "--corpus", s(&corpus)]),
        2
    );
    assert_eq!(code(&["score", "--bogus"]), 2);
}

#[test]
fn missing_abstract_embedding_exits_with_three() {
    let (dir, corpus) = ingested();
    let emb = dir.path().join("emb.tsv");
    let text = std::fs::read_to_string(fixtures().join("embeddings.tsv")).unwrap();
    let kept: String = text
        .lines()
        .filter(|l| !l.starts_with("abstract:p4\t"))
        .map(|l| format!("{l}\n"))
        .collect();
    std::fs::write(&emb, kept).unwrap();
    let out = dir.path().join("o.csv");
    let args = [
        "score",
        "--corpus",
        s(&corpus),
        "--task",
        "intra",
        "--method",
        "abs2fig",
        "--embeddings",
        s(&emb),
        "--out",
        s(&out),
    ];
    assert_eq!(code(&args), 3);
}

#[test]
fn score_writes_matrix_and_manifest() {
    let (dir, corpus) = ingested();
    let out = dir.path().join("bm25.csv");
    ok(&[
        "score",
        "--corpus",
        s(&corpus),
        "--task",
        "intra",
        "--method",
        "bm25",
        "--out",
        s(&out),
    ]);
    let text = std::fs::read_to_string(&out).unwrap();
    assert!(text.starts_with("query_id,candidate_id,raw_score,rank\n"));
    // 3 test papers with 3 + 4 + 2 figures
    assert_eq!(text.lines().count(), 1 + 9);

    let manifest = json(&dir.path().join("bm25.csv.manifest.json"));
    assert_eq!(manifest["tool"], "garec");
    assert_eq!(manifest["config"]["command"]["command"], "score");
    assert_eq!(manifest["config"]["command"]["method"], "abs2cap-bm25");
    assert_eq!(manifest["inputs"].as_array().unwrap().len(), 1);
    let output = &manifest["outputs"][0];
    assert_eq!(output["bytes"].as_u64().unwrap(), text.len() as u64);
    assert_eq!(output["sha256"].as_str().unwrap().len(), 64);
}

#[test]
fn inter_pool_is_the_reference_split() {
    let (dir, corpus) = ingested();
    let out = dir.path().join("inter.csv");
    ok(&[
        "score",
        "--corpus",
        s(&corpus),
        "--task",
        "inter",
        "--method",
        "abs2fig",
        "--embeddings",
        s(&fixtures().join("embeddings.tsv")),
        "--out",
        s(&out),
    ]);
    let text = std::fs::read_to_string(&out).unwrap();
    for line in text.lines().skip(1) {
        let cand = line.split(',').nth(1).unwrap();
        assert!(["p1", "p2", "p3"].contains(&cand), "{line}");
    }
    assert_eq!(text.lines().count(), 1 + 3 * 3);
}

#[test]
fn alpha_sweep_writes_one_directory_per_value() {
    let (dir, corpus) = ingested();
    let scores = dir.path().join("rouge.csv");
    ok(&[
        "score",
        "--corpus",
        s(&corpus),
        "--task",
        "intra",
        "--method",
        "rougeL",
        "--out",
        s(&scores),
    ]);
    let single = dir.path().join("single");
    ok(&[
        "eval",
        "--task",
        "intra",
        "--scores",
        s(&scores),
        "--corpus",
        s(&corpus),
        "--out-dir",
        s(&single),
    ]);
    for f in [
        "per_query.csv",
        "car_histogram.csv",
        "summary.json",
        "manifest.json",
    ] {
        assert!(single.join(f).exists(), "{f}");
    }
    assert_eq!(json(&single.join("summary.json"))["alpha"], 0.5);

    let sweep = dir.path().join("sweep");
    ok(&[
        "--alpha",
        "0,0.5,1",
        "eval",
        "--task",
        "intra",
        "--scores",
        s(&scores),
        "--corpus",
        s(&corpus),
        "--out-dir",
        s(&sweep),
    ]);
    let mut confidence = Vec::new();
    for a in [0.0, 0.5, 1.0] {
        let summary = json(&sweep.join(garec_cli::alpha_dir(a)).join("summary.json"));
        confidence.push(summary["means"]["car_confidence"].as_f64().unwrap());
    }
    assert!(
        confidence.windows(2).all(|w| w[0] <= w[1]),
        "{confidence:?}"
    );
    assert_eq!(confidence[2], 1.0);
    let hist = std::fs::read_to_string(sweep.join("alpha_0.5/car_histogram.csv")).unwrap();
    assert_eq!(hist.lines().count(), 21);
}

#[test]
fn unknown_query_in_scores_is_rejected() {
    let (dir, corpus) = ingested();
    let scores = dir.path().join("s.csv");
    std::fs::write(
        &scores,
        "query_id,candidate_id,raw_score,rank\nghost,f1,0.5,1\n",
    )
    .unwrap();
    let out = dir.path().join("e");
    let args = [
        "eval",
        "--task",
        "intra",
        "--scores",
        s(&scores),
        "--corpus",
        s(&corpus),
        "--out-dir",
        s(&out),
    ];
    assert_eq!(code(&args), 2);
}

#[test]
fn zero_learning_rate_gives_identity_adapter() {
    let (dir, corpus) = ingested();
    let out = dir.path().join("train");
    ok(&[
        "train",
        "--corpus",
        s(&corpus),
        "--embeddings",
        s(&fixtures().join("embeddings.tsv")),
        "--m",
        "2",
        "--batch-size",
        "2",
        "--steps",
        "3",
        "--lr",
        "0",
        "--out-dir",
        s(&out),
    ]);
    let adapter =
        LinearAdapter::<f64>::from_store(&EmbeddingStore::load(out.join("adapter.sgem")).unwrap())
            .unwrap();
    assert_eq!(adapter, LinearAdapter::identity(4));
    let trace = std::fs::read_to_string(out.join("loss_trace.csv")).unwrap();
    assert_eq!(trace.lines().next().unwrap(), "step,loss");
    assert_eq!(trace.lines().count(), 1 + 4);
    let summary = json(&out.join("summary.json"));
    assert_eq!(summary["initial_loss"], summary["final_loss"]);
    assert_eq!(summary["seed"], 0);
}

#[test]
fn stats_to_stdout_and_file_agree() {
    let (dir, corpus) = ingested();
    let stdout = ok(&["stats", "--corpus", s(&corpus)]).stdout;
    let file = dir.path().join("stats.json");
    ok(&["stats", "--corpus", s(&corpus), "--output", s(&file)]);
    let a: Value = serde_json::from_slice(&stdout).unwrap();
    assert_eq!(a, json(&file));
}
