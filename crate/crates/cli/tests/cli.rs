use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn tfagen(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tfagen"))
        .arg("--output-dir")
        .arg(out)
        .arg("--log-level")
        .arg("warn")
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(out: &Path, args: &[&str]) -> Output {
    let o = tfagen(out, args);
    assert!(
        o.status.success(),
        "{args:?} failed:\n{}",
        String::from_utf8_lossy(&o.stderr)
    );
    o
}

fn jsonl(path: &Path) -> Vec<Value> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

fn toy_manifest() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures/toy/manifest.tsv")
}

fn write_manifest(dir: &Path, docs: &[(&str, &str, &str)]) -> PathBuf {
    let mut manifest = String::new();
    for (name, sbn, reference) in docs {
        fs::write(dir.join(name), sbn).unwrap();
        manifest.push_str(&format!("{name}\t{reference}\n"));
    }
    let path = dir.join("manifest.tsv");
    fs::write(&path, manifest).unwrap();
    path
}

const ACTIVE: &str = "wolf.n.01\nkill.v.01 Agent -1 Time +1 Patient +2\ntime.n.08 TPR now\nsheep.n.01 Quantity 2\n";
const PASSIVE: &str = "sheep.n.01 Quantity 2\nkill.v.01 Patient -1 Time +1 Agent +2\ntime.n.08 TPR now\nwolf.n.01\n";
const INTRANSITIVE: &str = "dog.n.01\nsleep.v.01 Agent -1 Time +1\ntime.n.08 TPR now\n";

#[test]
fn convert_three_rows() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = write_manifest(
        dir.path(),
        &[
            ("a.sbn", ACTIVE, "The wolf killed two sheep."),
            ("p.sbn", PASSIVE, "Two sheep were killed by the wolf."),
            ("i.sbn", INTRANSITIVE, "The dog slept."),
        ],
    );
    ok(dir.path(), &["convert", "--manifest", manifest.to_str().unwrap()]);
    let graphs = jsonl(&dir.path().join("graphs.jsonl"));
    assert_eq!(graphs.len(), 3);
    assert_eq!(graphs[0]["voice"]["voice"], "active");
    assert_eq!(graphs[1]["voice"]["voice"], "passive");
    assert_eq!(graphs[2]["voice"]["voice"], "not_transitive");
    let stats: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("conversion_stats.json")).unwrap()).unwrap();
    assert_eq!(stats["converted"], 3);
    assert_eq!(stats["voice_types"]["Patient"]["active"], 1);
    assert_eq!(stats["voice_types"]["Patient"]["passive"], 1);
    assert!(dir.path().join("convert.config.json").is_file());
}

#[test]
fn bad_rows_and_empty_manifests_are_not_fatal() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = write_manifest(
        dir.path(),
        &[("a.sbn", ACTIVE, "The wolf killed two sheep."), ("bad.sbn", "wolf.n.01 Agent +5\n", "x")],
    );
    let o = ok(dir.path(), &["convert", "--manifest", manifest.to_str().unwrap()]);
    assert!(String::from_utf8_lossy(&o.stderr).contains("row 2"));
    assert_eq!(jsonl(&dir.path().join("graphs.jsonl")).len(), 1);

    let empty = dir.path().join("empty.tsv");
    fs::write(&empty, "").unwrap();
    let o = ok(dir.path(), &["convert", "--manifest", empty.to_str().unwrap(), "--out", "none.jsonl"]);
    assert!(String::from_utf8_lossy(&o.stderr).contains("no documents"));
    assert_eq!(fs::read_to_string(dir.path().join("none.jsonl")).unwrap(), "");
}

#[test]
fn fatal_errors_exit_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let o = tfagen(dir.path(), &["convert", "--manifest", "/nonexistent/manifest.tsv"]);
    assert!(!o.status.success());

    let manifest = write_manifest(dir.path(), &[("a.sbn", ACTIVE, "The wolf killed two sheep.")]);
    ok(dir.path(), &["convert", "--manifest", manifest.to_str().unwrap()]);
    let config = dir.path().join("bad.json");
    fs::write(&config, r#"{"hidden": 0}"#).unwrap();
    let graphs = dir.path().join("graphs.jsonl");
    let o = tfagen(
        dir.path(),
        &["train", "--train", graphs.to_str().unwrap(), "--config", config.to_str().unwrap()],
    );
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("hidden"));

    fs::write(&config, r#"{"hiden": 8}"#).unwrap();
    let o = tfagen(
        dir.path(),
        &["train", "--train", graphs.to_str().unwrap(), "--config", config.to_str().unwrap()],
    );
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("hiden"));
}

#[test]
fn augment_marks_and_skips() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = write_manifest(
        dir.path(),
        &[("a.sbn", ACTIVE, "The wolf killed two sheep."), ("i.sbn", INTRANSITIVE, "The dog slept.")],
    );
    ok(dir.path(), &["convert", "--manifest", manifest.to_str().unwrap()]);
    let graphs = dir.path().join("graphs.jsonl");
    ok(dir.path(), &["augment", "--input", graphs.to_str().unwrap(), "--strategy", "ctc"]);
    ok(dir.path(), &["augment", "--input", graphs.to_str().unwrap(), "--strategy", "ctc", "--flip"]);
    ok(dir.path(), &["augment", "--input", graphs.to_str().unwrap(), "--strategy", "rtr"]);

    let topic_token = |g: &Value| {
        let i = g["tfa"]["topic_node"].as_u64().unwrap() as usize;
        g["graph"]["nodes"][i]["token"].as_str().unwrap().to_string()
    };
    let ctc = jsonl(&dir.path().join("graphs.ctc.jsonl"));
    assert_eq!(topic_token(&ctc[0]), "wolf.n.01");
    let flipped = jsonl(&dir.path().join("graphs.ctc.flipped.jsonl"));
    assert_eq!(topic_token(&flipped[0]), "sheep.n.01");
    let rtr = jsonl(&dir.path().join("graphs.rtr.jsonl"));
    assert!(rtr[1]["tag"].as_str().unwrap().starts_with("skipped"));
    assert!(rtr[1].get("tfa").is_none());

    let o = tfagen(dir.path(), &["augment", "--input", graphs.to_str().unwrap(), "--strategy", "xyz"]);
    assert!(!o.status.success());
}

fn toy_run(out: &Path, judgments: Option<&Path>) {
    let p = |name: &str| out.join(name).to_str().unwrap().to_string();
    fs::create_dir_all(out).unwrap();
    fs::write(
        out.join("train.json"),
        r#"{"encoder": "ggnn", "neighborhood": "deep", "hidden": 16, "embedding": 16,
            "dropout": 0.1, "train": {"epochs": 3, "batch_size": 4}}"#,
    )
    .unwrap();
    ok(out, &["convert", "--manifest", toy_manifest().to_str().unwrap()]);
    ok(out, &["augment", "--input", &p("graphs.jsonl"), "--strategy", "ctc"]);
    ok(out, &["challenge-set", "--input", &p("graphs.jsonl")]);
    ok(
        out,
        &["augment", "--input", &p("challenge.jsonl"), "--strategy", "ctc", "--flip", "--out", "ap.jsonl"],
    );
    ok(out, &["train", "--train", &p("graphs.ctc.jsonl"), "--config", &p("train.json")]);
    ok(out, &["generate", "--model", &p("model.json"), "--input", &p("graphs.ctc.jsonl")]);
    ok(
        out,
        &["generate", "--model", &p("model.json"), "--input", &p("ap.jsonl"), "--out", "gen_ap.jsonl"],
    );
    let system = format!("ggnn-deep,ctc,{},{}", p("generations.jsonl"), p("gen_ap.jsonl"));
    let mut args = vec!["evaluate", "--system", &system];
    let j;
    if let Some(path) = judgments {
        j = path.to_str().unwrap().to_string();
        args.extend(["--judgments", &j]);
    }
    ok(out, &args);
}

#[test]
fn toy_pipeline_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    toy_run(&a, None);
    toy_run(&b, None);
    for file in ["graphs.jsonl", "model.json", "metrics.csv", "generations.jsonl", "gen_ap.jsonl", "report.json"] {
        assert_eq!(fs::read(a.join(file)).unwrap(), fs::read(b.join(file)).unwrap(), "{file} differs");
    }
    let report: Value = serde_json::from_str(&fs::read_to_string(a.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["rose"], "pending");
    let row = &report["automatic"][0];
    assert!(row["normal"]["bleu"].as_f64().unwrap() >= 0.0);
    assert!(row["active_passive"]["meteor_lite"].is_number());
    assert_eq!(jsonl(&a.join("generations.jsonl")).len(), 100);
    let metrics = fs::read_to_string(a.join("metrics.csv")).unwrap();
    assert_eq!(metrics.lines().count(), 4);
    assert!(a.join("checkpoints/epoch-003.json").is_file());

    let snapshot: Value = serde_json::from_str(&fs::read_to_string(a.join("train.config.json")).unwrap()).unwrap();
    assert_eq!(snapshot["seed"], 1);
    assert_eq!(snapshot["resolved"]["neighborhood"], "deep_traversal");
    assert_eq!(snapshot["resolved"]["train"]["epochs"], 3);
}

#[test]
fn rose_report_with_judgments() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    fs::create_dir_all(&out).unwrap();
    // Judge every challenge item: correct iff its id ends in an even digit.
    ok(&out, &["convert", "--manifest", toy_manifest().to_str().unwrap()]);
    ok(&out, &["challenge-set", "--input", out.join("graphs.jsonl").to_str().unwrap()]);
    let mut tsv = String::from("source_id\tsem\tgram\tphen\tnote\n");
    for item in jsonl(&out.join("challenge.jsonl")) {
        let id = item["source_id"].as_str().unwrap();
        let even = id.trim_end_matches(".sbn").ends_with(['0', '2', '4', '6', '8']);
        tsv.push_str(&format!("{id}\t1\t1\t{}\t\n", u8::from(even)));
    }
    let judgments = dir.path().join("judgments.tsv");
    fs::write(&judgments, tsv).unwrap();
    toy_run(&out, Some(&judgments));
    let report: Value = serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    let rose = &report["rose"];
    // Toy ids alternate active (even) / passive (odd).
    assert_eq!(rose["active_to_passive"]["count"], 50);
    assert_eq!(rose["active_to_passive"]["rose"], 100.0);
    assert_eq!(rose["passive_to_active"]["rose"], 0.0);
    assert_eq!(rose["all"]["rose"], 50.0);
    assert_eq!(rose["all"]["semantics"], 100.0);
}
