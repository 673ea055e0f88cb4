mod common;

use std::fs;

use common::*;
use compeval_core::estimators::{estimate_complementary, estimate_ivw_plugin, estimate_ml, estimate_ordinary};
use compeval_core::records::{read_annotations, summarize_records};
use serde_json::Value;
use tempfile::tempdir;

fn estimate_value(doc: &Value, label: &str) -> f64 {
    doc["result"]["estimates"]
        .as_array()
        .unwrap()
        .iter()
        .find(|e| e["label"] == label)
        .unwrap_or_else(|| panic!("no {label}"))["value"]
        .as_f64()
        .unwrap()
}

#[test]
fn ml_on_ordinary_only_file_is_the_ordinary_estimate() {
    let dir = tempdir().unwrap();
    let f = dir.path().join("ord.jsonl");
    let lines: Vec<String> = (0..20)
        .map(|i| annotation(&format!("o{i}"), 4, "ordinary", i % 4, if i < 13 { i % 4 } else { (i + 1) % 4 }))
        .collect();
    write_lines(&f, &lines);
    let ml = stdout_json(&compeval(&["estimate", p(&f), "--method", "ml"]));
    let ord = stdout_json(&compeval(&["estimate", p(&f), "--method", "ord"]));
    assert_eq!(estimate_value(&ml, "ml"), 13.0 / 20.0);
    assert_eq!(estimate_value(&ml, "ml"), estimate_value(&ord, "ordinary"));

    let comp_only = compeval(&["estimate", p(&f), "--method", "comp"]);
    assert_eq!(code(&comp_only), 3);
}

#[test]
fn empty_and_malformed_inputs() {
    let dir = tempdir().unwrap();
    let empty = dir.path().join("empty.jsonl");
    fs::write(&empty, "").unwrap();
    let out = compeval(&["estimate", p(&empty)]);
    assert_eq!(code(&out), 3);
    assert!(out.stdout.is_empty());

    let bad = dir.path().join("bad.jsonl");
    write_lines(&bad, &[annotation("a", 4, "ordinary", 0, 0), "{oops".into()]);
    let out = compeval(&["estimate", p(&bad)]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("line 2"), "{}", stderr(&out));

    let out_of_range = dir.path().join("range.jsonl");
    write_lines(&out_of_range, &[annotation("a", 4, "complementary", 4, 0)]);
    assert_eq!(code(&compeval(&["estimate", p(&out_of_range)])), 2);

    assert_eq!(code(&compeval(&["estimate", p(&dir.path().join("missing.jsonl"))])), 2);
    assert_eq!(code(&compeval(&["estimate", p(&bad), "--delta", "1.5"])), 2);
}

#[test]
fn mixed_k_is_rejected() {
    let dir = tempdir().unwrap();
    let f = dir.path().join("mixed.jsonl");
    write_lines(
        &f,
        &[
            annotation("a", 4, "ordinary", 0, 0),
            annotation("b", 3, "complementary", 1, 0),
            annotation("c", 3, "complementary", 2, 2),
        ],
    );
    let out = compeval(&["estimate", p(&f)]);
    assert_eq!(code(&out), 2);
    assert!(out.stdout.is_empty());

    let out = compeval(&["estimate", p(&f), "--allow-mixed-k"]);
    assert_eq!(code(&out), 2);
    let doc: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(doc["result"]["per_k"]["3"]["n_complementary"], 2);
    assert_eq!(doc["result"]["per_k"]["4"]["n_ordinary"], 1);
}

#[test]
fn collect_then_estimate_matches_library() {
    let dir = tempdir().unwrap();
    let items = dir.path().join("items.jsonl");
    let ann = dir.path().join("ann.jsonl");
    write_items(&items, 3000, 4, 0.7, 42);
    let out = compeval(&["collect", p(&items), "--seed", "9", "--output", p(&ann)]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert!(out.stdout.is_empty());

    let records = read_annotations(fs::File::open(&ann).map(std::io::BufReader::new).unwrap()).unwrap();
    let s = summarize_records(&records).unwrap();
    let doc = stdout_json(&compeval(&["estimate", p(&ann)]));
    assert_eq!(estimate_value(&doc, "ordinary"), estimate_ordinary(&s).unwrap().value);
    assert_eq!(estimate_value(&doc, "complementary"), estimate_complementary(&s).unwrap().value);
    assert_eq!(estimate_value(&doc, "ivw"), estimate_ivw_plugin(&s).unwrap().value);
    assert_eq!(estimate_value(&doc, "ml"), estimate_ml(&s).unwrap().value);
    assert_eq!(doc["input"]["n_complementary"], s.n_complementary());
    assert!((estimate_value(&doc, "ml") - 0.7).abs() < 0.05);
    assert!(doc["result"]["bounds"]["complementary"]["radius"].as_f64().unwrap() > 0.0);
    assert!(doc["result"]["bounds"]["union"]["weight_used"].as_f64().is_some());
}

#[test]
fn estimate_flags() {
    let dir = tempdir().unwrap();
    let f = dir.path().join("neg.jsonl");
    // q̂ = 0.5 with K=4 gives a negative complementary estimate.
    let mut lines: Vec<String> = (0..10).map(|i| annotation(&format!("c{i}"), 4, "complementary", 1, i % 2)).collect();
    lines.push(annotation("o", 4, "ordinary", 0, 0));
    write_lines(&f, &lines);
    let raw = stdout_json(&compeval(&["estimate", p(&f), "--method", "comp"]));
    assert_eq!(estimate_value(&raw, "complementary"), -0.5);
    let clamped = stdout_json(&compeval(&["estimate", p(&f), "--method", "comp", "--clamp"]));
    assert_eq!(estimate_value(&clamped, "complementary"), 0.0);

    let fixed = stdout_json(&compeval(&["estimate", p(&f), "--method", "ivw-fixed=0.25", "--delta-split", "0.01,0.04"]));
    assert_eq!(estimate_value(&fixed, "ivw_fixed(0.25)"), 0.25 * 1.0 + 0.75 * -0.5);
    assert_eq!(fixed["result"]["bounds"]["union"]["weight_used"], 0.25);
    assert_eq!(fixed["result"]["bounds"]["union"]["delta_split"], serde_json::json!([0.01, 0.04]));
    assert_eq!(code(&compeval(&["estimate", p(&f), "--delta-split", "0.5,0.5"])), 2);

    let out = compeval(&["estimate", p(&f), "--format", "csv"]);
    assert_eq!(code(&out), 0);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("record_type,name,value"));
    assert!(text.lines().any(|l| l.starts_with("bound,union,")));
}

#[test]
fn weight_split_uses_held_out_weight() {
    let dir = tempdir().unwrap();
    let items = dir.path().join("items.jsonl");
    let ann = dir.path().join("ann.jsonl");
    write_items(&items, 2000, 4, 0.7, 3);
    assert_eq!(code(&compeval(&["collect", p(&items), "--output", p(&ann)])), 0);
    let doc = stdout_json(&compeval(&["estimate", p(&ann), "--method", "ivw", "--weight-split", "0.3"]));
    let e = &doc["result"]["estimates"][0];
    assert_eq!(e["weight"]["source"], "held_out_plug_in");
    assert_eq!(code(&compeval(&["estimate", p(&ann), "--weight-split", "1.5"])), 2);
}

#[test]
fn plan_examples() {
    let get = |args: &[&str]| stdout_json(&compeval(args))["result"]["required_n_complementary"].as_u64().unwrap();
    assert_eq!(get(&["plan", "--pilot", "1", "--k", "4", "--n-ord", "100"]), 300);
    assert_eq!(get(&["plan", "--pilot", "0.7", "--k", "4", "--n-ord", "300"]), 1158);

    let out = compeval(&["plan", "--pilot", "0", "--k", "4", "--n-ord", "100"]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("pilot"));
    assert_eq!(code(&compeval(&["plan", "--pilot", "0.5", "--n-ord", "100"])), 2);

    let dir = tempdir().unwrap();
    let f = dir.path().join("pilot.jsonl");
    let lines: Vec<String> = (0..50)
        .map(|i| annotation(&format!("o{i}"), 10, "ordinary", 3, if i % 2 == 0 { 3 } else { 4 }))
        .collect();
    write_lines(&f, &lines);
    let doc = stdout_json(&compeval(&["plan", "--pilot-from", p(&f)]));
    assert_eq!(doc["result"]["required_n_complementary"], 850);
    assert_eq!(doc["result"]["assumed_accuracy"], 0.5);
    assert_eq!(doc["input"]["n_ordinary"], 50);
}

#[test]
fn collect_modes() {
    let dir = tempdir().unwrap();
    let items = dir.path().join("items.jsonl");
    write_items(&items, 25, 5, 0.6, 1);

    let run = |extra: &[&str]| {
        let mut args = vec!["collect", p(&items), "--seed", "4"];
        args.extend_from_slice(extra);
        let out = compeval(&args);
        assert_eq!(code(&out), 0, "{}", stderr(&out));
        String::from_utf8(out.stdout).unwrap()
    };
    let count = |text: &str, kind: &str| text.lines().filter(|l| l.contains(&format!("\"{kind}\""))).count();

    let ex = run(&["--mode", "exhaustive"]);
    assert_eq!(count(&ex, "complementary"), 25 * 4);
    assert_eq!(count(&ex, "ordinary"), 0);
    let keep = run(&["--mode", "exhaustive", "--keep-ordinary"]);
    assert_eq!(count(&keep, "complementary"), 100);
    assert_eq!(count(&keep, "ordinary"), 25);

    let forced = run(&["--mode", "forced:10,15"]);
    assert_eq!(count(&forced, "ordinary"), 10);
    assert_eq!(count(&forced, "complementary"), 15);
    assert_eq!(code(&compeval(&["collect", p(&items), "--mode", "forced:20,20"])), 3);
    assert_eq!(code(&compeval(&["collect", p(&items), "--mode", "sideways"])), 2);

    assert_eq!(run(&[]), run(&[]));
    let other_seed = compeval(&["collect", p(&items), "--seed", "5"]).stdout;
    assert_ne!(run(&[]).into_bytes(), other_seed);
    for line in run(&[]).lines() {
        let v: Value = serde_json::from_str(line).unwrap();
        let keys: Vec<&str> = v.as_object().unwrap().keys().map(|k| k.as_str()).collect();
        assert_eq!(keys, ["id", "k", "label_index", "label_type", "permutation", "prediction_index"]);
    }
}

#[test]
fn collect_seed_from_environment() {
    let dir = tempdir().unwrap();
    let items = dir.path().join("items.jsonl");
    write_items(&items, 30, 4, 0.6, 1);
    let env = compeval_with_env(&["collect", p(&items)], "SEED", "12");
    let flag = compeval(&["collect", p(&items), "--seed", "12"]);
    assert_eq!(env.stdout, flag.stdout);
    let both = compeval_with_env(&["collect", p(&items), "--seed", "13"], "SEED", "12");
    assert_ne!(both.stdout, flag.stdout);
}

#[test]
fn collect_rejects_missing_truth() {
    let dir = tempdir().unwrap();
    let items = dir.path().join("items.jsonl");
    fs::write(&items, "{\"id\":\"a\",\"k\":4,\"truth_index\":1,\"prediction_index\":1}\n{\"id\":\"b\",\"k\":4,\"prediction_index\":0}\n").unwrap();
    let out = compeval(&["collect", p(&items)]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("b"));
    assert!(out.stdout.is_empty());
}

#[test]
fn routed_collection_frequency() {
    let dir = tempdir().unwrap();
    let items = dir.path().join("items.jsonl");
    write_items(&items, 30_000, 4, 0.7, 8);
    let out = compeval(&["collect", p(&items), "--seed", "1"]);
    let text = String::from_utf8(out.stdout).unwrap();
    let ordinary = text.lines().filter(|l| l.contains("\"ordinary\"")).count();
    assert!((ordinary as f64 / 30_000.0 - 0.25).abs() <= 0.02);
}

#[test]
fn simulate_examples() {
    let dir = tempdir().unwrap();
    let rows = dir.path().join("rows.jsonl");
    let doc = stdout_json(&compeval(&["simulate", "--replicas", "1", "--dump-replicas", p(&rows)]));
    for s in doc["result"]["estimators"].as_array().unwrap() {
        assert_eq!(s["std_dev"], 0.0);
    }
    assert_eq!(fs::read_to_string(&rows).unwrap().lines().count(), 1);

    let doc = stdout_json(&compeval(&[
        "simulate", "--replicas", "20000", "--n-ord", "0", "--n-comp", "300", "--estimators", "comp", "--seed", "3",
    ]));
    let comp = &doc["result"]["estimators"][0];
    assert!((comp["mean"].as_f64().unwrap() - 0.7).abs() <= 0.002);
    let var = comp["variance"].as_f64().unwrap();
    assert!((0.002565..=0.002835).contains(&var), "{var}");

    let doc = stdout_json(&compeval(&[
        "simulate", "--replicas", "20000", "--planner", "--estimators", "ord,comp", "--seed", "4",
    ]));
    assert_eq!(doc["result"]["n_complementary"], 1158);
    let v = |i: usize| doc["result"]["estimators"][i]["variance"].as_f64().unwrap();
    let ratio = v(1) / v(0);
    assert!((0.9..=1.1).contains(&ratio), "{ratio}");

    assert_eq!(code(&compeval(&["simulate", "--accuracy", "1.2"])), 2);
    assert_eq!(code(&compeval(&["simulate", "--error-skew", "0.5,0.5"])), 2);
    assert_eq!(code(&compeval(&["simulate", "--replicas", "0"])), 2);
}

#[test]
fn simulate_ablation() {
    let doc = stdout_json(&compeval(&["simulate", "--replicas", "1", "--ablation", "1,2,3,4,5,10,20"]));
    let rows = doc["result"]["ablation"].as_array().unwrap();
    assert_eq!(rows.len(), 7);
    for r in rows {
        assert!(r["variance_optimal"].as_f64().unwrap() <= r["variance_half"].as_f64().unwrap());
    }
}

fn write_candidates(dir: &std::path::Path, cands: &[(&str, Vec<usize>)]) {
    for (id, preds) in cands {
        let lines: Vec<String> = preds
            .iter()
            .enumerate()
            .map(|(i, &p)| serde_json::json!({"id": format!("q{i}"), "prediction_index": p}).to_string())
            .collect();
        write_lines(&dir.join(format!("{id}.jsonl")), &lines);
    }
}

#[test]
fn select_examples() {
    let dir = tempdir().unwrap();
    let comp = dir.path().join("comp.jsonl");
    let labels = [1usize, 2, 0, 3];
    let lines: Vec<String> = labels
        .iter()
        .enumerate()
        .map(|(i, &l)| annotation(&format!("q{i}"), 4, "complementary", l, 0))
        .collect();
    write_lines(&comp, &lines);

    let single = dir.path().join("single");
    fs::create_dir(&single).unwrap();
    write_candidates(&single, &[("solo", vec![0, 0, 0, 0])]);
    let doc = stdout_json(&compeval(&["select", p(&single), p(&comp)]));
    assert_eq!(doc["result"]["chosen_id"], "solo");
    assert_eq!(doc["result"]["scores"]["solo"], 0.75);

    let tie = dir.path().join("tie");
    fs::create_dir(&tie).unwrap();
    write_candidates(&tie, &[("zed", vec![0, 0, 1, 0]), ("amy", vec![2, 1, 1, 0]), ("low", vec![1, 2, 0, 3])]);
    for fitness in ["q", "transformed"] {
        let doc = stdout_json(&compeval(&["select", p(&tie), p(&comp), "--fitness", fitness]));
        assert_eq!(doc["result"]["chosen_id"], "amy");
        assert_eq!(doc["result"]["tie_broken"], true);
        assert_eq!(doc["result"]["argmax_invariant"], true);
    }
    let doc = stdout_json(&compeval(&["select", p(&tie), p(&comp), "--fitness", "transformed"]));
    assert_eq!(doc["result"]["scores"]["low"], -2.0);

    let empty = dir.path().join("empty");
    fs::create_dir(&empty).unwrap();
    assert_eq!(code(&compeval(&["select", p(&empty), p(&comp)])), 2);

    let short = dir.path().join("short");
    fs::create_dir(&short).unwrap();
    write_candidates(&short, &[("few", vec![0, 0])]);
    assert_eq!(code(&compeval(&["select", p(&short), p(&comp)])), 2);
}
