use std::path::Path;
use std::process::{Command, Output};

fn lexsplit(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lexsplit"))
        .args(args)
        .current_dir(dir)
        .env_remove("LEXSPLIT_CONFIG")
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = lexsplit(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn small_corpus(dir: &Path) {
    ok(
        dir,
        &["synth", "--out", "c.jsonl", "--truth", "t.json", "--docs-per-class", "60", "--seed", "1"],
    );
}

#[test]
fn nb_pipeline_produces_metrics_and_report() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    // the default size; much smaller corpora cannot reach the ratio cutoff
    ok(d, &["synth", "--out", "c.jsonl", "--truth", "t.json", "--seed", "1"]);
    let truth = json(&d.join("t.json"));
    assert_eq!(truth["keywords"].as_object().unwrap().len(), 4);

    let out = ok(
        d,
        &["split", "lexicon", "--corpus", "c.jsonl", "--k", "150", "--ratio-cutoff", "0.6", "--out", "lex.json", "--verify"],
    );
    assert!(out.contains("0 violation(s)"), "{out}");
    assert!(json(&d.join("lex.json"))["ratio"].as_f64().unwrap() >= 0.6);
    ok(d, &["split", "random", "--corpus", "c.jsonl", "--out", "rnd.json", "--seed", "2"]);

    for split in ["lex", "rnd"] {
        let manifest = format!("{split}.json");
        let model = format!("nb_{split}.json");
        let metrics = format!("m_{split}.json");
        ok(d, &["train", "--model", "nb", "--corpus", "c.jsonl", "--manifest", &manifest, "--out", &model]);
        ok(d, &["eval", "--model", &model, "--corpus", "c.jsonl", "--manifest", &manifest, "--out", &metrics]);
        let m = json(&d.join(&metrics));
        let acc = m["accuracy"].as_f64().unwrap();
        assert!((0.0..=1.0).contains(&acc));
        assert_eq!(m["paths"]["manifest"], manifest.as_str());
    }

    ok(d, &["report", "--metrics", "m_lex.json", "m_rnd.json", "--out", "report.tsv"]);
    let report = std::fs::read_to_string(d.join("report.tsv")).unwrap();
    let rows: Vec<&str> = report.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows[0], "model\tregularizer\tsplit\tseed_count\taccuracy\tdelta");
    assert_eq!(rows.len(), 3);
    let cols: Vec<&str> = rows[1].split('\t').collect();
    assert_eq!(&cols[..3], ["nb", "none", "random"]);
    assert_ne!(cols[5], "-");
    assert!(report.contains("# mlpmax: embedding_dim=50"));
}

#[test]
fn usage_errors_exit_two() {
    let tmp = tempfile::tempdir().unwrap();
    for args in [&["frobnicate"][..], &["split", "random", "--nope"], &["train", "--model", "svm"]] {
        let out = lexsplit(tmp.path(), args);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
        assert!(String::from_utf8_lossy(&out.stderr).contains("--help"), "{args:?}");
    }
}

#[test]
fn runtime_errors_exit_nonzero_with_message() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let out = lexsplit(d, &["split", "random", "--corpus", "missing.jsonl", "--out", "m.json"]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("missing.jsonl"), "{err}");

    small_corpus(d);
    ok(d, &["split", "random", "--corpus", "c.jsonl", "--out", "m.json"]);
    let out = lexsplit(
        d,
        &["train", "--model", "nb", "--regularizer", "adadrop", "--corpus", "c.jsonl", "--manifest", "m.json", "--out", "x.json"],
    );
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("embedding"));
}

#[test]
fn config_file_is_overridden_by_flags() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    small_corpus(d);
    std::fs::write(d.join("run.conf"), "# shared settings\nseed = 7\ntest_ratio = 0.25\n").unwrap();
    let with_config = |args: &[&str]| {
        let out = Command::new(env!("CARGO_BIN_EXE_lexsplit"))
            .args(args)
            .current_dir(d)
            .env("LEXSPLIT_CONFIG", d.join("run.conf"))
            .output()
            .unwrap();
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    };
    with_config(&["split", "random", "--corpus", "c.jsonl", "--out", "a.json"]);
    ok(d, &["split", "random", "--corpus", "c.jsonl", "--out", "b.json", "--seed", "7", "--test-ratio", "0.25"]);
    assert_eq!(json(&d.join("a.json")), json(&d.join("b.json")));
    assert_eq!(json(&d.join("a.json"))["seed"], 7);

    with_config(&["split", "random", "--corpus", "c.jsonl", "--out", "c.json", "--seed", "8", "--test-ratio", "0.5"]);
    let c = json(&d.join("c.json"));
    assert_eq!(c["seed"], 8);
    assert!((c["ratio"].as_f64().unwrap() - 0.5).abs() < 0.05);

    std::fs::write(d.join("bad.conf"), "test_ratio = 0.25\nbogus_key = 1\n").unwrap();
    let out = lexsplit(d, &["--config", "bad.conf", "split", "random", "--corpus", "c.jsonl", "--out", "d.json"]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("bad.conf:2") && err.contains("bogus_key"), "{err}");
}

#[test]
fn seeds_make_runs_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    ok(d, &["synth", "--out", "a.jsonl", "--truth", "ta.json", "--docs-per-class", "30", "--seed", "5"]);
    ok(d, &["synth", "--out", "b.jsonl", "--truth", "tb.json", "--docs-per-class", "30", "--seed", "5"]);
    assert_eq!(std::fs::read(d.join("a.jsonl")).unwrap(), std::fs::read(d.join("b.jsonl")).unwrap());
    ok(d, &["synth", "--out", "c.jsonl", "--truth", "tc.json", "--docs-per-class", "30", "--seed", "6"]);
    assert_ne!(std::fs::read(d.join("a.jsonl")).unwrap(), std::fs::read(d.join("c.jsonl")).unwrap());

    let args = ["experiment", "--models", "nb,lr", "--regularizers", "none", "--seeds", "0,1"];
    let first = ok(d, &[&args[..], &["--out-dir", "run1"]].concat());
    let second = ok(d, &[&args[..], &["--out-dir", "run2"]].concat());
    assert_eq!(first, second);
    let r1 = std::fs::read(d.join("run1/report.tsv")).unwrap();
    assert_eq!(r1, std::fs::read(d.join("run2/report.tsv")).unwrap());
    let body: Vec<String> = String::from_utf8(r1)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .map(String::from)
        .collect();
    // 2 models x 1 regularizer x 2 splits
    assert_eq!(body.len(), 5);
    assert!(d.join("run1/seed1/metrics_lr_none_lexicon_s1.json").exists());
    assert!(d.join("run1/seed0/split_lexicon_s0.json").exists());
}

#[test]
fn neural_training_writes_stats_and_checkpoint() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    small_corpus(d);
    ok(d, &["split", "random", "--corpus", "c.jsonl", "--out", "m.json"]);
    ok(
        d,
        &[
            "train", "--model", "mlpmax", "--regularizer", "adadrop", "--epochs", "2", "--corpus", "c.jsonl",
            "--manifest", "m.json", "--out", "mlp.json", "--stats", "stats.tsv", "--epoch-log", "epochs.json",
        ],
    );
    let stats = std::fs::read_to_string(d.join("stats.tsv")).unwrap();
    assert!(stats.starts_with("word\tacc_norm\tavg_norm\tp_drop\n"));
    assert_eq!(json(&d.join("epochs.json")).as_array().unwrap().len(), 2);
    let model = json(&d.join("mlp.json"));
    assert_eq!(model["trained"]["kind"], "mlpmax");
    assert_eq!(model["regularizer"], "adadrop");
    ok(d, &["eval", "--model", "mlp.json", "--corpus", "c.jsonl", "--manifest", "m.json", "--out", "e.json"]);
    assert_eq!(json(&d.join("e.json"))["model"], "mlpmax");

    ok(d, &["report", "--metrics", "e.json", "--out", "r.tsv", "--stats", "stats.tsv", "--top", "2"]);
    let report = std::fs::read_to_string(d.join("r.tsv")).unwrap();
    assert!(report.contains("# most-dropped words: "), "{report}");
    assert!(report.contains("mlpmax\tadadrop\trandom\t1\t"));
    assert!(report.trim_end().ends_with('-'));
}
