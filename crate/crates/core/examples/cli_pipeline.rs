//! Drives the command-line pipeline in-process on a synthetic corpus, from
//! generation to ROUGE scoring.

use std::path::Path;

fn step(dir: &Path, args: &[&str]) {
    let mut argv = vec!["semaug".to_string()];
    argv.extend(args.iter().map(|a| a.replace("{}", &dir.display().to_string())));
    println!("$ {}", argv[1..].join(" "));
    let code = semaug::cli::run(argv);
    assert_eq!(code, 0, "step failed");
}

fn main() {
    let dir = tempfile::tempdir().expect("temp dir");
    let d = dir.path();
    let data = "--manifest {}/manifest.jsonl --frames {}/frames.semb --texts {}/texts.semb --split {}/split.json";
    let data: Vec<&str> = data.split(' ').collect();

    step(d, &["gen-synth", "--out", "{}", "--seed", "1"]);
    step(d, &["split", "--manifest", "{}/manifest.jsonl", "--out", "{}/split.json", "--seed", "1"]);
    step(d, &[&["train"], &data[..], &["--epochs", "40", "--checkpoint", "{}/model.srck", "--report", "{}/train.json", "--seed", "1"]].concat());
    step(d, &[&["eval-retrieval"], &data[..], &["--checkpoint", "{}/model.srck", "--out", "{}/retrieval.json", "--predictions", "{}/preds.jsonl"]].concat());
    step(d, &["prompts", "--manifest", "{}/manifest.jsonl", "--transcripts", "{}/transcripts.jsonl", "--predictions", "{}/preds.jsonl", "--out", "{}/prompts.jsonl"]);
    step(d, &["score", "--pred", "{}/prompts.jsonl", "--pred-field", "prompt", "--manifest", "{}/manifest.jsonl", "--out", "{}/score.json"]);
    step(d, &["report", "--train-report", "{}/train.json", "--retrieval", "{}/retrieval.json", "--score", "prompts={}/score.json", "--out", "{}/report.txt"]);
    print!("{}", std::fs::read_to_string(d.join("report.txt")).expect("report"));
}
