//! `gazeflow` command line: synthesize, train, detect, evaluate, compare
//! and trace.
//!
//! Exit codes: 0 success, 2 usage or configuration, 3 data, 4 format or
//! alignment.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use gazeflow::config::{RunConfig, EXAMPLE_CONFIG};
use gazeflow::detect::{Baseline, BaselineKind, CnnDetector, Detector};
use gazeflow::eval::evaluate;
use gazeflow::io::{self, ManifestEntry, ModelFile, SynthManifest};
use gazeflow::model::events_from_labels;
use gazeflow::net::NetworkShape;
use gazeflow::pipeline::{compare, train_on_corpus, Comparison};
use gazeflow::synth::{generate_sequence, CorpusStats};
use gazeflow::{Error, Result};

#[derive(Parser)]
#[command(name = "gazeflow", version, about = "Fixation, saccade and smooth pursuit detection from gaze data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate labelled synthetic gaze sequences plus a manifest.
    Synth(SynthArgs),
    /// Train the network on a directory of labelled gaze CSVs.
    Train(TrainArgs),
    /// Run the network or a baseline over one gaze CSV.
    Detect(DetectArgs),
    /// Score predictions against labelled gaze data and write reports.
    Eval(EvalArgs),
    /// Tune the baselines and evaluate all five detectors on the test split.
    Compare(CompareArgs),
    /// Join gaze, predictions and truth into one CSV for plotting.
    Trace(TraceArgs),
    /// Print an annotated configuration file with every default.
    ExampleConfig,
}

#[derive(Args)]
struct ConfigArg {
    /// Run configuration (TOML). Missing keys take their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
}

impl ConfigArg {
    fn load(&self) -> Result<RunConfig> {
        match &self.config {
            Some(p) => RunConfig::load(p),
            None => Ok(RunConfig::default()),
        }
    }
}

#[derive(Args)]
struct SynthArgs {
    #[command(flatten)]
    config: ConfigArg,
    /// Directory receiving seq_NNNN.csv files and manifest.json.
    #[arg(long)]
    out_dir: PathBuf,
    /// Number of sequences.
    #[arg(long, default_value_t = 10)]
    sequences: usize,
    /// Corpus seed; overrides [stimulus] seed.
    #[arg(long, env = "GAZEFLOW_SEED")]
    seed: Option<u64>,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    config: ConfigArg,
    /// Directory of labelled gaze CSVs.
    #[arg(long)]
    data_dir: PathBuf,
    /// Model file to write.
    #[arg(long)]
    out: PathBuf,
    /// Per-epoch history CSV [default: <out>.history.csv].
    #[arg(long)]
    history: Option<PathBuf>,
    /// Split, initialization and batch-order seed; overrides [training] seed.
    #[arg(long, env = "GAZEFLOW_SEED")]
    seed: Option<u64>,
}

#[derive(Args)]
struct DetectArgs {
    #[command(flatten)]
    config: ConfigArg,
    /// Trained model file.
    #[arg(long, required_unless_present = "baseline", conflicts_with = "baseline")]
    model: Option<PathBuf>,
    /// Threshold baseline: ivt, ivt-idt, ivmp or pca (thresholds from [baselines]).
    #[arg(long)]
    baseline: Option<String>,
    /// Gaze CSV to classify.
    #[arg(long = "in")]
    input: PathBuf,
    /// Predictions CSV to write.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    #[command(flatten)]
    config: ConfigArg,
    /// Predictions CSV.
    #[arg(long)]
    preds: PathBuf,
    /// Labelled gaze CSV of the same sequence.
    #[arg(long)]
    truth: PathBuf,
    /// Directory for the report tables and summary.json.
    #[arg(long)]
    report_dir: PathBuf,
}

#[derive(Args)]
struct CompareArgs {
    #[command(flatten)]
    config: ConfigArg,
    /// Directory of labelled gaze CSVs (the corpus the model was trained on).
    #[arg(long)]
    data_dir: PathBuf,
    /// Trained model file.
    #[arg(long)]
    model: PathBuf,
    /// Directory for comparison.csv and one report directory per detector.
    #[arg(long)]
    report_dir: PathBuf,
    /// Split seed; must match the one used for training.
    #[arg(long, env = "GAZEFLOW_SEED")]
    seed: Option<u64>,
}

#[derive(Args)]
struct TraceArgs {
    /// Predictions CSV.
    #[arg(long)]
    preds: PathBuf,
    /// Gaze CSV the predictions belong to.
    #[arg(long = "in")]
    input: PathBuf,
    /// Trace CSV to write.
    #[arg(long)]
    out: PathBuf,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::Io { .. } => 2,
        Error::InvalidInput(_)
        | Error::NonFinite { .. }
        | Error::SequenceTooShort { .. }
        | Error::EventGap { .. }
        | Error::EventOverlap { .. }
        | Error::EmptyDataset
        | Error::NoCoverage => 3,
        Error::Shape(_)
        | Error::MissingClass(_)
        | Error::Misaligned(_)
        | Error::ModelVersion { .. }
        | Error::ModelCorrupt(_)
        | Error::ModelShape(_)
        | Error::Format { .. } => 4,
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|source| Error::Io { path: dir.into(), source })
}

fn synth(args: SynthArgs) -> Result<()> {
    if args.sequences == 0 {
        return Err(Error::Config("--sequences must be at least 1".into()));
    }
    let mut run = args.config.load()?;
    if let Some(seed) = args.seed {
        run.stimulus.seed = seed;
    }
    run.stimulus.validate()?;
    create_dir(&args.out_dir)?;
    let mut entries = Vec::with_capacity(args.sequences);
    let mut totals = CorpusStats::default();
    for i in 0..args.sequences {
        let trace = generate_sequence(&run.stimulus, i as u64)?;
        let file = format!("seq_{i:04}.csv");
        io::save_gaze_csv(&args.out_dir.join(&file), &trace.sequence)?;
        let labels = trace.sequence.require_labels()?;
        let mut one = CorpusStats::default();
        one.add(labels);
        totals.add(labels);
        entries.push(ManifestEntry {
            file,
            frames: labels.len() as u64,
            frames_per_class: one.frames,
            events_per_class: one.events,
        });
    }
    let manifest = SynthManifest { seed: run.stimulus.seed, stimulus: run.stimulus, sequences: entries, totals };
    manifest.save(&args.out_dir.join(SynthManifest::FILE_NAME))?;
    println!(
        "wrote {} sequences ({} frames; fixation/saccade/pursuit frames {:?}, events {:?}) to {}",
        args.sequences,
        totals.total_frames(),
        totals.frames,
        totals.events,
        args.out_dir.display()
    );
    Ok(())
}

fn history_path(out: &Path) -> PathBuf {
    out.with_extension("history.csv")
}

fn train(args: TrainArgs) -> Result<()> {
    let mut run = args.config.load()?;
    if let Some(seed) = args.seed {
        run.training.seed = seed;
    }
    let seqs = io::load_gaze_dir(&args.data_dir)?;
    if seqs.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let trained = train_on_corpus(&seqs, &run)?;
    ModelFile::save(&args.out, &trained.model)?;
    let history = args.history.unwrap_or_else(|| history_path(&args.out));
    io::save_history_csv(&history, &trained.history)?;
    let last = trained.history.records.last();
    println!(
        "windows train/validation/test {}/{}/{}; final validation accuracy {}",
        trained.split.train.len(),
        trained.split.validation.len(),
        trained.split.test.len(),
        last.map_or("n/a".into(), |r| format!("{:.4}", r.val_accuracy)),
    );
    println!("model checksum {:08x} written to {}", ModelFile::checksum(&trained.model), args.out.display());
    println!("best_val_accuracy={}", trained.history.best_val_accuracy);
    Ok(())
}

fn detect(args: DetectArgs) -> Result<()> {
    let run = args.config.load()?;
    let seq = io::load_gaze_csv(&args.input)?;
    let output = match (&args.model, &args.baseline) {
        (Some(model), _) => {
            let shape = NetworkShape { input_len: run.frontend.window_len, ..NetworkShape::with_kernel_len(run.network.kernel_len) };
            let params = ModelFile::load(model)?;
            if params.shape().input_len != shape.input_len {
                return Err(Error::ModelShape(format!(
                    "model expects {}-sample windows, frontend produces {}",
                    params.shape().input_len,
                    shape.input_len
                )));
            }
            CnnDetector::new(params, run.frontend)?.detect(&seq)?
        }
        (None, Some(name)) => Baseline::new(name.parse::<BaselineKind>()?, run.baselines.config())?.detect(&seq)?,
        (None, None) => return Err(Error::Config("one of --model or --baseline is required".into())),
    };
    io::save_predictions_csv(&args.out, &output)?;
    println!("{} of {} samples covered; predictions written to {}", output.covered_count(), output.len(), args.out.display());
    Ok(())
}

fn eval(args: EvalArgs) -> Result<()> {
    let run = args.config.load()?;
    let preds = io::load_predictions_csv(&args.preds)?;
    let seq = io::load_gaze_csv(&args.truth)?;
    let truth = seq.require_labels()?;
    if preds.len() != truth.len() {
        return Err(Error::Misaligned(format!("{} prediction rows, {} truth samples", preds.len(), truth.len())));
    }
    let report = evaluate(std::slice::from_ref(&preds), &[truth], None, &run.evaluation)?;
    let summary = io::write_eval_report(&args.report_dir, &report)?;
    println!(
        "{} frames, {} events; accuracy {:.4}; AUC fixation/saccade/pursuit {:.4}/{:.4}/{:.4}",
        summary.frames, summary.events, summary.accuracy, summary.auc[0], summary.auc[1], summary.auc[2]
    );
    println!("mean_auc={} macro_f1={}", summary.mean_auc, summary.macro_f1);
    Ok(())
}

const COMPARISON_HEADER: [&str; 12] = [
    "rank",
    "detector",
    "mean_auc",
    "auc_fixation",
    "auc_saccade",
    "auc_pursuit",
    "accuracy",
    "macro_f1",
    "validation_macro_f1",
    "velocity_threshold_deg_s",
    "stage2_threshold",
    "frames",
];

fn comparison_rows(cmp: &Comparison) -> Vec<[String; 12]> {
    cmp.rows
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let ova = &r.report.one_vs_all;
            let stage2 = r.thresholds.map(|t| match r.detector.parse::<BaselineKind>() {
                Ok(BaselineKind::IvtIdt) => t.dispersion_threshold_deg.to_string(),
                Ok(BaselineKind::Ivmp) => t.angle_threshold_rad.to_string(),
                Ok(BaselineKind::Pca) => t.pca_ratio_threshold.to_string(),
                _ => String::new(),
            });
            [
                (i + 1).to_string(),
                r.detector.clone(),
                ova.mean_auc.to_string(),
                ova.aucs[0].to_string(),
                ova.aucs[1].to_string(),
                ova.aucs[2].to_string(),
                r.report.confusion.accuracy().to_string(),
                r.report.prf.macro_f1.to_string(),
                r.validation_macro_f1.map_or(String::new(), |f| f.to_string()),
                r.thresholds.map_or(String::new(), |t| t.velocity_threshold_deg_s.to_string()),
                stage2.unwrap_or_default(),
                r.report.frames.to_string(),
            ]
        })
        .collect()
}

fn compare_cmd(args: CompareArgs) -> Result<()> {
    let mut run = args.config.load()?;
    if let Some(seed) = args.seed {
        run.training.seed = seed;
    }
    let seqs = io::load_gaze_dir(&args.data_dir)?;
    if seqs.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let model = ModelFile::load(&args.model)?;
    let cmp = compare(&seqs, &model, &run)?;
    create_dir(&args.report_dir)?;
    for row in &cmp.rows {
        io::write_eval_report(&args.report_dir.join(&row.detector), &row.report)?;
    }
    let path = args.report_dir.join("comparison.csv");
    let mut text = COMPARISON_HEADER.join(",") + "\n";
    for row in comparison_rows(&cmp) {
        text += &(row.join(",") + "\n");
    }
    fs::write(&path, &text).map_err(|source| Error::Io { path: path.clone(), source })?;
    let json_path = args.report_dir.join("comparison.json");
    let json = serde_json::to_string_pretty(&cmp).expect("comparison serializes");
    fs::write(&json_path, json + "\n").map_err(|source| Error::Io { path: json_path.clone(), source })?;
    println!("{:<4} {:<8} {:>9} {:>9} {:>9}", "rank", "detector", "mean_auc", "accuracy", "macro_f1");
    for (i, r) in cmp.rows.iter().enumerate() {
        println!(
            "{:<4} {:<8} {:>9.4} {:>9.4} {:>9.4}",
            i + 1,
            r.detector,
            r.report.one_vs_all.mean_auc,
            r.report.confusion.accuracy(),
            r.report.prf.macro_f1
        );
    }
    Ok(())
}

fn trace(args: TraceArgs) -> Result<()> {
    let preds = io::load_predictions_csv(&args.preds)?;
    let seq = io::load_gaze_csv(&args.input)?;
    io::save_trace_csv(&args.out, &seq, &preds)?;
    let events = seq.labels().map_or(0, |l| events_from_labels(l).len());
    println!("{} rows ({} truth events) written to {}", seq.len(), events, args.out.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Synth(a) => synth(a),
        Command::Train(a) => train(a),
        Command::Detect(a) => detect(a),
        Command::Eval(a) => eval(a),
        Command::Compare(a) => compare_cmd(a),
        Command::Trace(a) => trace(a),
        Command::ExampleConfig => {
            print!("{EXAMPLE_CONFIG}");
            Ok(())
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("gazeflow: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
