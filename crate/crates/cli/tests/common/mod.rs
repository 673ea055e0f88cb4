#![allow(dead_code)]

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use compeval_core::rng::substream;
use compeval_core::simulator::synthesize_prediction;
use rand::Rng;
use serde_json::{json, Value};

pub fn compeval(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_compeval"))
        .args(args)
        .env_remove("SEED")
        .output()
        .expect("run compeval")
}

pub fn compeval_with_env(args: &[&str], key: &str, value: &str) -> Output {
    Command::new(env!("CARGO_BIN_EXE_compeval"))
        .args(args)
        .env(key, value)
        .output()
        .expect("run compeval")
}

pub fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

pub fn stdout_json(out: &Output) -> Value {
    assert_eq!(code(out), 0, "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("json report")
}

pub fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

/// Ground-truthed items with uniform truth and synthetic predictions.
pub fn write_items(path: &Path, n: usize, k: usize, accuracy: f64, seed: u64) {
    let mut rng = substream(seed, 0);
    let mut text = String::new();
    for i in 0..n {
        let truth = rng.gen_range(0..k);
        let pred = synthesize_prediction(truth, accuracy, k, None, &mut rng).unwrap();
        text.push_str(&json!({"id": format!("item{i:05}"), "k": k, "truth_index": truth, "prediction_index": pred}).to_string());
        text.push('\n');
    }
    fs::write(path, text).unwrap();
}

pub fn annotation(id: &str, k: usize, label_type: &str, label: usize, pred: usize) -> String {
    json!({"id": id, "k": k, "label_type": label_type, "label_index": label, "prediction_index": pred}).to_string()
}

pub fn write_lines(path: &Path, lines: &[String]) {
    let mut text = lines.join("\n");
    if !lines.is_empty() {
        text.push('\n');
    }
    fs::write(path, text).unwrap();
}

pub fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}
