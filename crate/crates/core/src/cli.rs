//! Command-line entry point. Every subcommand is a file-in/file-out stage
//! whose randomness flows from `--seed`.

use std::collections::HashMap;
use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::LevelFilter;
use serde::{Deserialize, Serialize};

use crate::contrastive_trainer::{plan_diversity, train, BatchingMode, EpochPlanner, TrainConfig, TrainReport};
use crate::corpus::PairedSegments;
use crate::dataset::{
    load_manifest, load_transcripts, read_embedding_table, read_jsonl, split_dataset, write_embedding_table,
    write_jsonl, DatasetSplit, EmbeddingTable, RowDescriptor, SegmentRecord, SplitSpec, SplitSubset,
};
use crate::error::{Error, Result};
use crate::evaluation::{evaluate_concepts, render_rouge_table, score_summary_corpus, CorpusRouge, RetrievalResult};
use crate::frame_sampler::{FrameLookup, SamplingStrategy};
use crate::prompt_assembler::{build_prompts, gold_references, ConceptPrediction, PromptRecord, SummaryRecord};
use crate::resampler_head::{read_checkpoint, write_checkpoint, HeadMode};
use crate::synth::{self, SynthConfig};

#[derive(Debug, Parser)]
#[command(name = "semaug", version, about = "Concept retrieval from video-segment embeddings")]
struct Cli {
    /// Seed for every stochastic step; overrides seeds from --config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// TOML or JSON file with optional [split], [train] and [synth] tables.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overwrite existing outputs.
    #[arg(long, global = true)]
    force: bool,
    #[arg(long, global = true, default_value = "warn")]
    log_level: LevelFilter,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Split a manifest into train/val/test by video.
    Split {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long, default_value = "split.json")]
        out: PathBuf,
    },
    /// Generate a synthetic concept-plus-noise corpus.
    GenSynth {
        /// Output directory for manifest, transcripts, embeddings and references.
        #[arg(long)]
        out: PathBuf,
    },
    /// Sample frame indices per segment and optionally write the concatenated features.
    SampleFrames {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        frames: PathBuf,
        /// Evenly spaced frames instead of the three middle frames.
        #[arg(long)]
        uniform: Option<u32>,
        /// JSONL of {"video_id","segment_id","frames"}.
        #[arg(long)]
        out: PathBuf,
        /// Embedding table with one concatenated feature row per segment.
        #[arg(long)]
        features: Option<PathBuf>,
    },
    /// Build the batch plan the trainer uses for one epoch.
    BatchPlan {
        #[command(flatten)]
        data: SubsetArgs,
        #[command(flatten)]
        train: TrainOverrides,
        #[arg(long, default_value_t = 0)]
        epoch: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train the dual encoder on the train subset, validating on val.
    Train {
        #[command(flatten)]
        data: PairedArgs,
        #[command(flatten)]
        train: TrainOverrides,
        #[arg(long)]
        checkpoint: PathBuf,
        /// Training report JSON.
        #[arg(long)]
        report: PathBuf,
    },
    /// Top-1/Top-3 concept retrieval on one subset.
    EvalRetrieval {
        #[command(flatten)]
        data: PairedArgs,
        #[arg(long, default_value = "test")]
        subset: SplitSubset,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// JSONL of the Top-1 concept per segment.
        #[arg(long)]
        predictions: PathBuf,
    },
    /// Join predicted concepts with transcripts into summarizer prompts.
    Prompts {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        transcripts: PathBuf,
        #[arg(long)]
        predictions: PathBuf,
        /// Emit the transcript alone.
        #[arg(long)]
        no_concepts: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// ROUGE-1/2/L of predictions against references.
    Score {
        #[arg(long)]
        pred: PathBuf,
        /// References as {"video_id","summary"}; defaults to gold annotations from --manifest.
        #[arg(long, required_unless_present = "manifest")]
        r#ref: Option<PathBuf>,
        #[arg(long, conflicts_with = "ref")]
        manifest: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = PredField::Summary)]
        pred_field: PredField,
        #[arg(long, default_value = "semaug")]
        label: String,
        /// Score JSON; the table is printed to stdout.
        #[arg(long)]
        out: PathBuf,
    },
    /// Summarize training, retrieval and ROUGE outputs as a text report.
    Report {
        #[arg(long)]
        train_report: Option<PathBuf>,
        #[arg(long)]
        retrieval: Option<PathBuf>,
        /// Score JSON as LABEL=PATH; repeatable.
        #[arg(long = "score", value_parser = parse_labelled)]
        scores: Vec<(String, PathBuf)>,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Args)]
struct SubsetArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    frames: PathBuf,
    #[arg(long)]
    split: PathBuf,
    #[arg(long, default_value = "train")]
    subset: SplitSubset,
}

#[derive(Debug, Args)]
struct PairedArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    frames: PathBuf,
    #[arg(long)]
    texts: PathBuf,
    #[arg(long)]
    split: PathBuf,
}

#[derive(Debug, Args)]
struct TrainOverrides {
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    batching: Option<BatchingMode>,
    #[arg(long)]
    clusters: Option<usize>,
    #[arg(long)]
    head_mode: Option<HeadMode>,
    #[arg(long)]
    learning_rate: Option<f64>,
}

impl TrainOverrides {
    fn apply(&self, config: &mut TrainConfig) {
        if let Some(v) = self.epochs {
            config.epochs = v;
        }
        if let Some(v) = self.batch_size {
            config.batch_size = v;
        }
        if let Some(v) = self.batching {
            config.batching_mode = v;
        }
        if let Some(v) = self.clusters {
            config.clusters = v;
        }
        if let Some(v) = self.head_mode {
            config.head_mode = v;
        }
        if let Some(v) = self.learning_rate {
            config.learning_rate = v;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum PredField {
    Summary,
    Prompt,
}

impl PredField {
    fn key(self) -> &'static str {
        match self {
            PredField::Summary => "summary",
            PredField::Prompt => "prompt",
        }
    }
}

fn parse_labelled(s: &str) -> std::result::Result<(String, PathBuf), String> {
    match s.split_once('=') {
        Some((label, path)) if !label.is_empty() && !path.is_empty() => Ok((label.to_string(), path.into())),
        _ => Err(format!("expected LABEL=PATH, got {s:?}")),
    }
}

/// Settings overlay read from `--config`.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub split: SplitSpec,
    pub train: TrainConfig,
    pub synth: SynthConfig,
}

impl FileConfig {
    /// Parses TOML for `.toml` files and JSON otherwise.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let is_toml = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("toml"));
        let parsed = if is_toml {
            toml::from_str(&text).map_err(|e| e.to_string())
        } else {
            serde_json::from_str(&text).map_err(|e| e.to_string())
        };
        parsed.map_err(|message| Error::Parse {
            path: path.to_path_buf(),
            line: 0,
            message,
        })
    }

    fn with_seed(mut self, seed: Option<u64>) -> Self {
        if let Some(seed) = seed {
            self.split.seed = seed;
            self.train.seed = seed;
            self.synth.seed = seed;
        }
        self
    }
}

/// Sampled frame indices of one segment, as written by `sample-frames`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrameSample {
    pub video_id: String,
    pub segment_id: String,
    pub frames: Vec<u32>,
}

/// Parses `argv` (program name first), runs one subcommand and returns the
/// process exit code: 0 on success, 1 on validation errors, 2 on I/O errors.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let _ = env_logger::Builder::new().filter_level(cli.log_level).try_init();
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn execute(cli: &Cli) -> Result<()> {
    let config = match &cli.config {
        Some(path) => {
            require_inputs(&[path])?;
            FileConfig::load(path)?
        }
        None => FileConfig::default(),
    }
    .with_seed(cli.seed);
    let out = Outputs { force: cli.force };

    match &cli.command {
        Command::Split { manifest, out: path } => {
            require_inputs(&[manifest])?;
            out.check(&[path])?;
            let records = load_manifest(manifest)?;
            let split = split_dataset(&records, &config.split)?;
            let (train, val, test) = split.sizes();
            log::info!("split {train}/{val}/{test} videos");
            write_json(path, &split)
        }
        Command::GenSynth { out: dir } => {
            let names = [synth::files::MANIFEST, synth::files::TRANSCRIPTS, synth::files::REFERENCES];
            let mut targets: Vec<PathBuf> = names.iter().map(|n| dir.join(n)).collect();
            for table in [synth::files::FRAMES, synth::files::TEXTS] {
                let path = dir.join(table);
                targets.push(crate::dataset::index_path(&path));
                targets.push(path);
            }
            out.check(&targets)?;
            synth::generate(&config.synth)?.write_to(dir)
        }
        Command::SampleFrames {
            manifest,
            frames,
            uniform,
            out: path,
            features,
        } => {
            require_inputs(&[manifest, frames])?;
            let mut targets = vec![path.clone()];
            targets.extend(features.clone());
            out.check(&targets)?;
            let strategy = match uniform {
                Some(k) => SamplingStrategy::Uniform { k: *k },
                None => config.train.sampling,
            };
            sample_frames(manifest, frames, strategy, path, features.as_deref())
        }
        Command::BatchPlan {
            data,
            train: overrides,
            epoch,
            out: path,
        } => {
            require_inputs(&[&data.manifest, &data.frames, &data.split])?;
            out.check(&[path])?;
            let mut train_config = config.train;
            overrides.apply(&mut train_config);
            batch_plan(data, &train_config, *epoch, path)
        }
        Command::Train {
            data,
            train: overrides,
            checkpoint,
            report,
        } => {
            require_inputs(&[&data.manifest, &data.frames, &data.texts, &data.split])?;
            out.check(&[checkpoint, report])?;
            let mut train_config = config.train;
            overrides.apply(&mut train_config);
            train_command(data, &train_config, checkpoint, report)
        }
        Command::EvalRetrieval {
            data,
            subset,
            checkpoint,
            out: path,
            predictions,
        } => {
            require_inputs(&[&data.manifest, &data.frames, &data.texts, &data.split, checkpoint])?;
            out.check(&[path, predictions])?;
            eval_retrieval(data, *subset, config.train.sampling, checkpoint, path, predictions)
        }
        Command::Prompts {
            manifest,
            transcripts,
            predictions,
            no_concepts,
            out: path,
        } => {
            require_inputs(&[manifest, transcripts, predictions])?;
            out.check(&[path])?;
            let segments = load_manifest(manifest)?;
            let transcripts = load_transcripts(transcripts)?;
            let predictions: Vec<ConceptPrediction> = read_jsonl(predictions)?;
            let prompts = build_prompts(&segments, &predictions, &transcripts, !no_concepts)?;
            let records: Vec<PromptRecord> = prompts
                .into_iter()
                .map(|p| PromptRecord {
                    video_id: p.video_id,
                    prompt: p.rendered,
                })
                .collect();
            write_jsonl(path, &records)
        }
        Command::Score {
            pred,
            r#ref,
            manifest,
            pred_field,
            label,
            out: path,
        } => {
            let reference_path = r#ref.as_ref().or(manifest.as_ref()).expect("clap requires one");
            require_inputs(&[pred, reference_path])?;
            out.check(&[path])?;
            let references = match r#ref {
                Some(r) => read_jsonl::<SummaryRecord>(r)?,
                None => gold_references(&load_manifest(reference_path)?),
            };
            let scores = score(pred, *pred_field, &references)?;
            print!("{}", render_rouge_table(&[(label.clone(), scores)]));
            write_json(path, &scores)
        }
        Command::Report {
            train_report,
            retrieval,
            scores,
            out: path,
        } => {
            let mut inputs: Vec<&PathBuf> = train_report.iter().chain(retrieval).collect();
            inputs.extend(scores.iter().map(|(_, p)| p));
            require_inputs(&inputs)?;
            out.check(&[path])?;
            let text = report(train_report.as_deref(), retrieval.as_deref(), scores)?;
            fs::write(path, text).map_err(|e| Error::io(path, e))
        }
    }
}

struct Outputs {
    force: bool,
}

impl Outputs {
    fn check<P: AsRef<Path>>(&self, paths: &[P]) -> Result<()> {
        if self.force {
            return Ok(());
        }
        match paths.iter().map(AsRef::as_ref).find(|p| p.exists()) {
            Some(p) => Err(Error::Validation(format!(
                "{} already exists; pass --force to overwrite",
                p.display()
            ))),
            None => Ok(()),
        }
    }
}

fn require_inputs<P: AsRef<Path>>(paths: &[P]) -> Result<()> {
    for path in paths {
        let path = path.as_ref();
        fs::metadata(path).map_err(|e| Error::io(path, e))?;
    }
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::Format(e.to_string()))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        line: e.line(),
        message: e.to_string(),
    })
}

fn subset_segments(manifest: &Path, split: &Path, subset: SplitSubset) -> Result<Vec<SegmentRecord>> {
    let records = load_manifest(manifest)?;
    let split: DatasetSplit = read_json(split)?;
    let videos: std::collections::HashSet<&str> = split.subset(subset).iter().map(String::as_str).collect();
    Ok(records.into_iter().filter(|r| videos.contains(r.video_id.as_str())).collect())
}

fn sample_frames(
    manifest: &Path,
    frames: &Path,
    strategy: SamplingStrategy,
    out: &Path,
    features: Option<&Path>,
) -> Result<()> {
    let segments = load_manifest(manifest)?;
    let table = read_embedding_table(frames)?;
    let lookup = FrameLookup::new(&table);
    let mut samples = Vec::with_capacity(segments.len());
    let mut rows = Vec::new();
    let mut index = Vec::with_capacity(segments.len());
    let mut width = 0;
    for seg in &segments {
        let picked = strategy.indices(seg.frame_count)?;
        if features.is_some() {
            let feature = lookup.temporal_feature(seg, strategy)?;
            width = feature.as_slice().len();
            rows.extend_from_slice(feature.as_slice());
            index.push(RowDescriptor::frame(&seg.video_id, &seg.segment_id, picked[0]));
        }
        samples.push(FrameSample {
            video_id: seg.video_id.clone(),
            segment_id: seg.segment_id.clone(),
            frames: picked,
        });
    }
    if let Some(path) = features {
        let rows = ndarray::Array2::from_shape_vec((index.len(), width), rows)
            .map_err(|e| Error::Shape(e.to_string()))?;
        let table = EmbeddingTable::new(rows, index)?;
        write_embedding_table(&table, path)?;
    }
    write_jsonl(out, &samples)
}

fn batch_plan(data: &SubsetArgs, config: &TrainConfig, epoch: usize, out: &Path) -> Result<()> {
    let segments = subset_segments(&data.manifest, &data.split, data.subset)?;
    let table = read_embedding_table(&data.frames)?;
    let lookup = FrameLookup::new(&table);
    let mut rows = Vec::new();
    let mut width = 0;
    for seg in &segments {
        let feature = lookup.temporal_feature(seg, config.sampling)?;
        width = feature.as_slice().len();
        rows.extend(feature.as_slice().iter().map(|&v| f64::from(v)));
    }
    let temporal =
        ndarray::Array2::from_shape_vec((segments.len(), width), rows).map_err(|e| Error::Shape(e.to_string()))?;
    let planner = EpochPlanner::new(temporal.view(), config)?;
    let plan = planner.plan(epoch)?;
    if let Some(d) = plan_diversity(&plan, temporal.view()) {
        log::info!("{} batches, mean pairwise distance {d:.6}", plan.batches.len());
    }
    plan.write_jsonl(out)
}

fn paired_subset(data: &PairedArgs, subset: SplitSubset, strategy: SamplingStrategy) -> Result<PairedSegments> {
    let segments = subset_segments(&data.manifest, &data.split, subset)?;
    let frames = read_embedding_table(&data.frames)?;
    let texts = read_embedding_table(&data.texts)?;
    PairedSegments::build(&segments, &frames, &texts, strategy)
}

fn train_command(data: &PairedArgs, config: &TrainConfig, checkpoint: &Path, report_path: &Path) -> Result<()> {
    let train_set = paired_subset(data, SplitSubset::Train, config.sampling)?;
    let val_set = paired_subset(data, SplitSubset::Val, config.sampling)?;
    let (model, mut report) = train(&train_set, Some(&val_set), config)?;
    write_checkpoint(checkpoint, &model, config.seed, report.steps)?;
    report.checkpoint = checkpoint.file_name().map(|n| n.to_string_lossy().into_owned());
    log::info!("final loss {:.6}", report.final_loss());
    write_json(report_path, &report)
}

fn eval_retrieval(
    data: &PairedArgs,
    subset: SplitSubset,
    strategy: SamplingStrategy,
    checkpoint: &Path,
    out: &Path,
    predictions_path: &Path,
) -> Result<()> {
    let (model, _) = read_checkpoint(checkpoint)?;
    let set = paired_subset(data, subset, strategy)?;
    let mut eval = evaluate_concepts(&model, &set)?;
    let predictions: Vec<ConceptPrediction> = set
        .segments
        .iter()
        .zip(&eval.predictions)
        .map(|(seg, &p)| ConceptPrediction {
            video_id: seg.video_id.clone(),
            segment_id: seg.segment_id.clone(),
            concept: eval.annotations[p].clone(),
        })
        .collect();
    eval.result.ranked = None;
    println!(
        "{subset}: top1 {:.4} top3 {:.4} over {} segments, {} candidates",
        eval.result.top1, eval.result.top3, eval.result.query_count, eval.result.candidate_count
    );
    write_json(out, &eval.result)?;
    write_jsonl(predictions_path, &predictions)
}

fn score(pred: &Path, field: PredField, references: &[SummaryRecord]) -> Result<CorpusRouge> {
    let by_video: HashMap<&str, &str> = references
        .iter()
        .map(|r| (r.video_id.as_str(), r.summary.as_str()))
        .collect();
    let lines: Vec<serde_json::Value> = read_jsonl(pred)?;
    let mut pairs = Vec::with_capacity(lines.len());
    for (i, line) in lines.iter().enumerate() {
        let text_field = |key: &str| {
            line.get(key).and_then(|v| v.as_str()).ok_or_else(|| Error::Parse {
                path: pred.to_path_buf(),
                line: i + 1,
                message: format!("missing string field {key:?}"),
            })
        };
        let video = text_field("video_id")?;
        let text = text_field(field.key())?;
        let reference = by_video
            .get(video)
            .ok_or_else(|| Error::Validation(format!("no reference for video {video}")))?;
        pairs.push((text.to_string(), reference.to_string()));
    }
    score_summary_corpus(&pairs)
}

fn report(train_report: Option<&Path>, retrieval: Option<&Path>, scores: &[(String, PathBuf)]) -> Result<String> {
    let mut out = String::new();
    if let Some(path) = train_report {
        let r: TrainReport = read_json(path)?;
        let _ = writeln!(out, "Training");
        let _ = writeln!(
            out,
            "  head {:?}, batching {:?}, {} epochs, {} steps on {} segments",
            r.config.head_mode,
            r.config.batching_mode,
            r.epochs.len(),
            r.steps,
            r.train_segments
        );
        if let (Some(first), Some(last)) = (r.epochs.first(), r.epochs.last()) {
            let _ = writeln!(out, "  loss {:.4} -> {:.4}", first.loss, last.loss);
            if let (Some(t1), Some(t3)) = (last.val_top1, last.val_top3) {
                let _ = writeln!(out, "  final val top1 {t1:.4} top3 {t3:.4}");
            }
        }
        if let Some(d) = r.first_epoch_batch_diversity {
            let _ = writeln!(out, "  first-epoch batch diversity {d:.4}");
        }
        out.push('\n');
    }
    if let Some(path) = retrieval {
        let r: RetrievalResult = read_json(path)?;
        let _ = writeln!(out, "Retrieval");
        let _ = writeln!(
            out,
            "  top1 {:.4} top3 {:.4} ({} queries, {} candidates)",
            r.top1, r.top3, r.query_count, r.candidate_count
        );
        out.push('\n');
    }
    if !scores.is_empty() {
        let rows = scores
            .iter()
            .map(|(label, path)| Ok((label.clone(), read_json::<CorpusRouge>(path)?)))
            .collect::<Result<Vec<_>>>()?;
        let _ = writeln!(out, "ROUGE");
        out.push_str(&render_rouge_table(&rows));
    }
    Ok(out)
}
