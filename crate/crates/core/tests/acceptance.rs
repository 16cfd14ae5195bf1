//! End-to-end acceptance criteria. Runs as a plain binary so that every
//! criterion prints one PASS/FAIL line; exits non-zero if any fails.

mod common;

use std::path::Path;
use std::time::{Duration, Instant};

use common::*;
use ndarray::{s, Array2};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use semaug::contrastive_trainer::{finite_difference_check, BatchingMode, FdOptions};
use semaug::diversity_batcher::{kmeans_fit, KMeansConfig};
use semaug::evaluation::{rouge_l, rouge_n, RougeScore};
use semaug::resampler_head::{Head, HeadConfig, HeadMode};

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

fn gradient_correctness() -> Outcome {
    let start = Instant::now();
    let mut worst = 0.0f64;
    let mut failures = Vec::new();
    for seed in 0..20u64 {
        let mode = if seed % 2 == 0 { HeadMode::Perceiver } else { HeadMode::LearnablePool };
        let model = tiny_model(mode, seed);
        let (images, texts) = tiny_inputs(seed);
        let report = finite_difference_check(&model, &batch(&images, &texts), &FdOptions { seed, ..FdOptions::default() }).unwrap();
        worst = worst.max(report.max_rel_error());
        if !report.passed() {
            failures.push(format!("{mode:?}/seed {seed}"));
        }
    }
    let elapsed = start.elapsed();
    outcome(
        failures.is_empty() && elapsed < Duration::from_secs(30),
        format!("20 configs, worst relative error {worst:.2e}, failures {failures:?}, {elapsed:.1?}"),
    )
}

const SENTENCE_PAIRS: [(&str, &str); 20] = [
    ("the cat sat", "the cat ate"),
    ("the cat sat", "the cat sat"),
    ("the cat sat on the mat", "the mat was under the cat"),
    ("a b c d", "a c b d"),
    ("Melt the butter, then add the onions.", "melt butter and add onions"),
    ("boil pasta in salted water", "the pasta is boiled in water with salt"),
    ("the the the the", "the cat"),
    ("cat", "the cat the cat the cat"),
    ("whisk eggs", "fold the flour"),
    ("Stir; stir; STIR!", "stir the sauce and stir again"),
    ("add 2 cups of flour", "add 3 cups of flour"),
    ("chop the garlic finely and fry it", "fry the chopped garlic"),
    ("one two three four five six", "six five four three two one"),
    ("x y x y x y", "y x y x"),
    ("season with salt and pepper to taste", "season to taste with pepper and salt"),
    ("pour the batter into the pan", "pour batter into a hot pan"),
    ("serve warm", "serve the soup warm with bread"),
    ("a a b b a a", "a b a b a b"),
    ("knead the dough for ten minutes", "knead dough ten minutes then rest"),
    ("grill the chicken on both sides", "grill chicken both sides until done"),
];

fn rouge_oracle() -> Outcome {
    let close = |s: &RougeScore, (p, r, f): (f64, f64, f64)| {
        (s.precision - p).abs() <= 1e-9 && (s.recall - r).abs() <= 1e-9 && (s.f1 - f).abs() <= 1e-9
    };
    let mut mismatches = Vec::new();
    for (i, (pred, reference)) in SENTENCE_PAIRS.iter().enumerate() {
        for n in [1, 2] {
            if !close(&rouge_n(pred, reference, n), oracle_rouge_n(pred, reference, n)) {
                mismatches.push(format!("pair {i} R{n}"));
            }
        }
        if !close(&rouge_l(pred, reference), oracle_rouge_l(pred, reference)) {
            mismatches.push(format!("pair {i} RL"));
        }
    }
    let r1 = rouge_n("the cat sat", "the cat ate", 1);
    let r2 = rouge_n("the cat sat", "the cat ate", 2);
    let worked = (r1.f1 - 2.0 / 3.0).abs() <= 1e-12 && (r2.f1 - 0.5).abs() <= 1e-12;
    outcome(
        mismatches.is_empty() && worked,
        format!("20 pairs x 3 variants, mismatches {mismatches:?}, worked pair R1 F {:.4} R2 F {:.4}", r1.f1, r2.f1),
    )
}

struct SyntheticSweep {
    perceiver_kmeans: Vec<SyntheticRun>,
    perceiver_random: Vec<SyntheticRun>,
    learnable_kmeans: Vec<SyntheticRun>,
    frozen_kmeans: Vec<SyntheticRun>,
    elapsed_a3: Duration,
}

fn sweep() -> SyntheticSweep {
    let runs = |mode, batching| -> Vec<SyntheticRun> { (0..5).map(|seed| synthetic_run(mode, batching, seed)).collect() };
    let start = Instant::now();
    let perceiver_kmeans = runs(HeadMode::Perceiver, BatchingMode::Kmeans);
    let learnable_kmeans = runs(HeadMode::LearnablePool, BatchingMode::Kmeans);
    let frozen_kmeans = runs(HeadMode::FrozenMean, BatchingMode::Kmeans);
    let elapsed_a3 = start.elapsed();
    let perceiver_random = runs(HeadMode::Perceiver, BatchingMode::Random);
    SyntheticSweep {
        perceiver_kmeans,
        perceiver_random,
        learnable_kmeans,
        frozen_kmeans,
        elapsed_a3,
    }
}

fn synthetic_learning(sweep: &SyntheticSweep) -> Outcome {
    let top1 = |runs: &[SyntheticRun]| mean(runs.iter().map(|r| r.test_top1));
    let (p, l, f) = (top1(&sweep.perceiver_kmeans), top1(&sweep.learnable_kmeans), top1(&sweep.frozen_kmeans));
    outcome(
        p >= 0.90 && p >= l && l >= f && sweep.elapsed_a3 < Duration::from_secs(300),
        format!(
            "mean test Top-1 perceiver {p:.3} >= learnable_pool {l:.3} >= frozen_mean {f:.3}, {:.1?}",
            sweep.elapsed_a3
        ),
    )
}

fn diversity_batching(sweep: &SyntheticSweep) -> Outcome {
    let (km, rnd) = (&sweep.perceiver_kmeans, &sweep.perceiver_random);
    let div_km = mean(km.iter().map(|r| r.batch_diversity));
    let div_rnd = mean(rnd.iter().map(|r| r.batch_diversity));
    let val_km = mean(km.iter().map(|r| r.final_val_top1));
    let val_rnd = mean(rnd.iter().map(|r| r.final_val_top1));
    let test_km = mean(km.iter().map(|r| r.test_top1));
    let test_rnd = mean(rnd.iter().map(|r| r.test_top1));
    outcome(
        div_km > div_rnd && val_km >= val_rnd,
        format!(
            "batch distance kmeans {div_km:.4} vs random {div_rnd:.4}; final val Top-1 {val_km:.3} vs {val_rnd:.3} \
             (test Top-1 {test_km:.3} vs {test_rnd:.3})"
        ),
    )
}

fn kmeans_sanity() -> Outcome {
    let (x, labels) = three_blobs(0);
    let model = kmeans_fit(x.view(), &KMeansConfig::new(3, 0)).unwrap();
    let ari = adjusted_rand_index(&labels, &model.assignments);

    let mut increases = 0;
    let mut rng = ChaCha8Rng::seed_from_u64(50);
    for i in 0..50u64 {
        let n = rng.random_range(10..80);
        let d = rng.random_range(1..6);
        let k = rng.random_range(1..8.min(n));
        let data = gaussian(n, d, &mut rng);
        let fit = kmeans_fit(data.view(), &KMeansConfig::new(k, i)).unwrap();
        increases += fit
            .inertia_history
            .windows(2)
            .filter(|w| w[1] > w[0] * (1.0 + 1e-12))
            .count();
    }
    outcome(
        ari == 1.0 && increases == 0,
        format!("blob ARI {ari}, inertia increases over 50 datasets: {increases}"),
    )
}

fn run_chain(dir: &Path) -> bool {
    let d = dir.display().to_string();
    let data = format!("--manifest {d}/manifest.jsonl --frames {d}/frames.semb --texts {d}/texts.semb --split {d}/split.json");
    let steps = [
        format!("gen-synth --out {d} --seed 5"),
        format!("split --manifest {d}/manifest.jsonl --out {d}/split.json --seed 5"),
        format!("batch-plan --manifest {d}/manifest.jsonl --frames {d}/frames.semb --split {d}/split.json --out {d}/plan.jsonl --seed 5"),
        format!("train {data} --epochs 20 --checkpoint {d}/model.srck --report {d}/train.json --seed 5"),
        format!("eval-retrieval {data} --checkpoint {d}/model.srck --out {d}/retrieval.json --predictions {d}/preds.jsonl"),
        format!("prompts --manifest {d}/manifest.jsonl --transcripts {d}/transcripts.jsonl --predictions {d}/preds.jsonl --out {d}/prompts.jsonl"),
        format!("score --pred {d}/prompts.jsonl --pred-field prompt --manifest {d}/manifest.jsonl --out {d}/score.json"),
        format!("report --train-report {d}/train.json --retrieval {d}/retrieval.json --score aug={d}/score.json --out {d}/report.txt"),
    ];
    steps.iter().all(|step| {
        let argv = std::iter::once("semaug").chain(step.split(' '));
        semaug::cli::run(argv) == 0
    })
}

fn pipeline_determinism() -> Outcome {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    if !(run_chain(a.path()) && run_chain(b.path())) {
        return outcome(false, "a pipeline step failed".into());
    }
    let mut names: Vec<_> = std::fs::read_dir(a.path())
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .collect();
    names.sort();
    let differing: Vec<_> = names
        .iter()
        .filter(|n| std::fs::read(a.path().join(n)).ok() != std::fs::read(b.path().join(n)).ok())
        .map(|n| n.to_string_lossy().into_owned())
        .collect();
    outcome(
        differing.is_empty() && names.len() >= 13,
        format!("{} artifacts compared byte for byte, differing {differing:?}", names.len()),
    )
}

fn fixed_size_contract() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut dims = Vec::new();
    let mut worst = 0.0f64;
    for mode in [HeadMode::Perceiver, HeadMode::LearnablePool, HeadMode::FrozenMean] {
        let config = HeadConfig {
            embed_dim: if mode == HeadMode::FrozenMean { 12 } else { 6 },
            ..HeadConfig::new(12, mode)
        };
        let head = Head::new(config, 3).unwrap();
        for t in [1, 2, 5, 17, 50] {
            let x = gaussian(t, 12, &mut rng);
            let y = head.forward(x.view()).unwrap();
            dims.push(y.len() == config.embed_dim);
            let mut order: Vec<usize> = (0..t).collect();
            order.shuffle(&mut rng);
            let mut shuffled = Array2::zeros(x.raw_dim());
            for (to, &from) in order.iter().enumerate() {
                shuffled.slice_mut(s![to, ..]).assign(&x.row(from));
            }
            let z = head.forward(shuffled.view()).unwrap();
            worst = worst.max((&y - &z).iter().fold(0.0f64, |m, v| m.max(v.abs())));
        }
    }
    outcome(
        dims.iter().all(|&ok| ok) && worst <= 1e-6,
        format!("3 heads x T in {{1,2,5,17,50}}: constant dims {}, max permutation deviation {worst:.1e}", dims.iter().all(|&ok| ok)),
    )
}

fn main() {
    let sweep = sweep();
    let results = [
        ("A1 gradient correctness", gradient_correctness()),
        ("A2 ROUGE oracle", rouge_oracle()),
        ("A3 synthetic retrieval learning", synthetic_learning(&sweep)),
        ("A4 diversity batching", diversity_batching(&sweep)),
        ("A5 k-means sanity", kmeans_sanity()),
        ("A6 pipeline determinism", pipeline_determinism()),
        ("A7 fixed-size contract", fixed_size_contract()),
    ];
    let mut failed = 0;
    for (name, o) in &results {
        println!("{} {name}: {}", if o.passed { "PASS" } else { "FAIL" }, o.detail);
        failed += usize::from(!o.passed);
    }
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
