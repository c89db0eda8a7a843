//! File formats: gaze and prediction CSVs, trace export, training history,
//! the binary model file, synthetic corpus manifest and evaluation reports.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::detect::DetectorOutput;
use crate::error::{Error, Result};
use crate::eval::EvalReport;
use crate::model::{argmax_class, GazeSample, GazeSequence, LabelClass};
use crate::net::{EpochRecord, NetworkParams, NetworkShape, TrainHistory};
use crate::synth::{CorpusStats, StimulusConfig};

pub const GAZE_HEADER: [&str; 5] = ["t_ms", "x_deg", "y_deg", "valid", "label"];
pub const PREDICTION_HEADER: [&str; 6] = ["sample_idx", "p_fix", "p_sac", "p_pur", "label", "covered"];
pub const TRACE_HEADER: [&str; 8] = ["t_ms", "x_deg", "y_deg", "p_fix", "p_sac", "p_pur", "truth", "pred"];
pub const HISTORY_HEADER: [&str; 4] = ["phase", "epoch", "train_loss", "val_accuracy"];

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path).map(BufReader::new).map_err(|e| Error::io(path, e))
}

fn csv_writer<W: Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new().has_headers(false).from_writer(w)
}

fn csv_err(what: &'static str) -> impl Fn(csv::Error) -> Error {
    move |e| Error::format(what, e)
}

/// Reads all records, checking the header row exactly.
fn read_records<R: Read>(r: R, what: &'static str, header: &[&str]) -> Result<Vec<csv::StringRecord>> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(r);
    let found = reader.headers().map_err(csv_err(what))?.clone();
    if found.iter().ne(header.iter().copied()) {
        return Err(Error::format(what, format!("header {:?}, expected {}", found.iter().collect::<Vec<_>>(), header.join(","))));
    }
    reader.records().collect::<std::result::Result<Vec<_>, _>>().map_err(csv_err(what))
}

fn field<'a>(rec: &'a csv::StringRecord, i: usize, line: usize, what: &'static str) -> Result<&'a str> {
    rec.get(i).map(str::trim).ok_or_else(|| Error::format(what, format!("line {line}: missing column {i}")))
}

fn parse_f64(s: &str, line: usize, what: &'static str) -> Result<f64> {
    s.parse::<f64>().map_err(|_| Error::format(what, format!("line {line}: '{s}' is not a number")))
}

fn parse_flag(s: &str, line: usize, what: &'static str) -> Result<bool> {
    match s {
        "1" => Ok(true),
        "0" => Ok(false),
        _ => Err(Error::format(what, format!("line {line}: '{s}' is not 0 or 1"))),
    }
}

fn parse_label(s: &str, line: usize, what: &'static str) -> Result<LabelClass> {
    s.parse::<u8>()
        .ok()
        .and_then(LabelClass::from_code)
        .ok_or_else(|| Error::format(what, format!("line {line}: '{s}' is not a class code")))
}

fn fmt_coord(v: f64) -> String {
    if v.is_finite() {
        v.to_string()
    } else {
        String::new()
    }
}

pub fn write_gaze_csv<W: Write>(w: W, seq: &GazeSequence) -> Result<()> {
    let mut out = csv_writer(w);
    out.write_record(GAZE_HEADER).map_err(csv_err("gaze csv"))?;
    for (i, s) in seq.samples().iter().enumerate() {
        let label = seq.labels().map_or(String::new(), |l| l[i].code().to_string());
        out.write_record([
            s.t_ms.to_string(),
            fmt_coord(s.x_deg),
            fmt_coord(s.y_deg),
            u8::from(s.valid).to_string(),
            label,
        ])
        .map_err(csv_err("gaze csv"))?;
    }
    out.flush().map_err(|e| Error::format("gaze csv", e))
}

/// Labels must be given on every row or on none.
pub fn read_gaze_csv<R: Read>(r: R, source_id: &str) -> Result<GazeSequence> {
    const WHAT: &str = "gaze csv";
    let records = read_records(r, WHAT, &GAZE_HEADER)?;
    let mut samples = Vec::with_capacity(records.len());
    let mut labels = Vec::with_capacity(records.len());
    for (k, rec) in records.iter().enumerate() {
        let line = k + 2;
        if rec.len() != GAZE_HEADER.len() {
            return Err(Error::format(WHAT, format!("line {line}: {} columns", rec.len())));
        }
        let t = parse_f64(field(rec, 0, line, WHAT)?, line, WHAT)?;
        let valid = parse_flag(field(rec, 3, line, WHAT)?, line, WHAT)?;
        let coord = |i| -> Result<f64> {
            match field(rec, i, line, WHAT)? {
                "" if !valid => Ok(f64::NAN),
                "" => Err(Error::format(WHAT, format!("line {line}: valid sample without coordinates"))),
                s => parse_f64(s, line, WHAT),
            }
        };
        samples.push(GazeSample { t_ms: t, x_deg: coord(1)?, y_deg: coord(2)?, valid });
        match field(rec, 4, line, WHAT)? {
            "" => labels.push(None),
            s => labels.push(Some(parse_label(s, line, WHAT)?)),
        }
    }
    let labeled = labels.iter().filter(|l| l.is_some()).count();
    let labels = match labeled {
        0 => None,
        n if n == labels.len() => Some(labels.into_iter().flatten().collect()),
        _ => return Err(Error::format(WHAT, "labels present on some rows only")),
    };
    GazeSequence::new(samples, labels, source_id)
}

pub fn save_gaze_csv(path: &Path, seq: &GazeSequence) -> Result<()> {
    write_gaze_csv(create(path)?, seq)
}

pub fn load_gaze_csv(path: &Path) -> Result<GazeSequence> {
    let id = path.file_stem().map_or_else(|| path.display().to_string(), |s| s.to_string_lossy().into_owned());
    read_gaze_csv(open(path)?, &id).map_err(|e| with_path(e, path))
}

fn with_path(e: Error, path: &Path) -> Error {
    match e {
        Error::Format { what, detail } => Error::Format { what, detail: format!("{}: {detail}", path.display()) },
        other => other,
    }
}

/// Labelled or unlabelled gaze CSVs of a directory, in file-name order.
pub fn load_gaze_dir(dir: &Path) -> Result<Vec<GazeSequence>> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .collect();
    paths.sort();
    paths.iter().map(|p| load_gaze_csv(p)).collect()
}

pub fn write_predictions_csv<W: Write>(w: W, preds: &DetectorOutput) -> Result<()> {
    let mut out = csv_writer(w);
    out.write_record(PREDICTION_HEADER).map_err(csv_err("predictions csv"))?;
    for i in 0..preds.len() {
        let row = match preds.get(i) {
            Some(e) => [
                i.to_string(),
                e.scores[0].to_string(),
                e.scores[1].to_string(),
                e.scores[2].to_string(),
                e.label.code().to_string(),
                "1".into(),
            ],
            None => [i.to_string(), String::new(), String::new(), String::new(), String::new(), "0".into()],
        };
        out.write_record(row).map_err(csv_err("predictions csv"))?;
    }
    out.flush().map_err(|e| Error::format("predictions csv", e))
}

/// Rows must be numbered 0, 1, 2, ...; covered rows carry three scores and
/// their arg-max label, uncovered rows leave those fields empty.
pub fn read_predictions_csv<R: Read>(r: R) -> Result<DetectorOutput> {
    const WHAT: &str = "predictions csv";
    let records = read_records(r, WHAT, &PREDICTION_HEADER)?;
    let mut scores = Vec::with_capacity(records.len());
    for (k, rec) in records.iter().enumerate() {
        let line = k + 2;
        if rec.len() != PREDICTION_HEADER.len() {
            return Err(Error::format(WHAT, format!("line {line}: {} columns", rec.len())));
        }
        let idx = field(rec, 0, line, WHAT)?;
        if idx.parse::<usize>().ok() != Some(k) {
            return Err(Error::format(WHAT, format!("line {line}: sample_idx '{idx}', expected {k}")));
        }
        if parse_flag(field(rec, 5, line, WHAT)?, line, WHAT)? {
            let mut s = [0.0; 3];
            for (c, v) in s.iter_mut().enumerate() {
                *v = parse_f64(field(rec, 1 + c, line, WHAT)?, line, WHAT)?;
                if !v.is_finite() {
                    return Err(Error::format(WHAT, format!("line {line}: non-finite score")));
                }
            }
            let label = parse_label(field(rec, 4, line, WHAT)?, line, WHAT)?;
            if label != argmax_class(&s) {
                return Err(Error::format(WHAT, format!("line {line}: label {} is not the arg-max", label.code())));
            }
            scores.push(Some(s));
        } else {
            if (1..5).any(|c| rec.get(c).is_some_and(|v| !v.trim().is_empty())) {
                return Err(Error::format(WHAT, format!("line {line}: uncovered row with values")));
            }
            scores.push(None);
        }
    }
    Ok(DetectorOutput::from_scores(scores))
}

pub fn save_predictions_csv(path: &Path, preds: &DetectorOutput) -> Result<()> {
    write_predictions_csv(create(path)?, preds)
}

pub fn load_predictions_csv(path: &Path) -> Result<DetectorOutput> {
    read_predictions_csv(open(path)?).map_err(|e| with_path(e, path))
}

/// One row per sample joining gaze, scores, truth and prediction. Empty
/// fields mark uncovered samples and missing truth.
pub fn write_trace_csv<W: Write>(w: W, seq: &GazeSequence, preds: &DetectorOutput) -> Result<()> {
    if seq.len() != preds.len() {
        return Err(Error::Misaligned(format!("{} gaze samples, {} predictions", seq.len(), preds.len())));
    }
    let mut out = csv_writer(w);
    out.write_record(TRACE_HEADER).map_err(csv_err("trace csv"))?;
    for (i, s) in seq.samples().iter().enumerate() {
        let truth = seq.labels().map_or(String::new(), |l| l[i].code().to_string());
        let (probs, pred) = match preds.get(i) {
            Some(e) => (e.scores.map(|p| p.to_string()), e.label.code().to_string()),
            None => (Default::default(), String::new()),
        };
        let [pf, ps, pp] = probs;
        out.write_record([s.t_ms.to_string(), fmt_coord(s.x_deg), fmt_coord(s.y_deg), pf, ps, pp, truth, pred])
            .map_err(csv_err("trace csv"))?;
    }
    out.flush().map_err(|e| Error::format("trace csv", e))
}

pub fn save_trace_csv(path: &Path, seq: &GazeSequence, preds: &DetectorOutput) -> Result<()> {
    write_trace_csv(create(path)?, seq, preds)
}

pub fn write_history_csv<W: Write>(w: W, history: &TrainHistory) -> Result<()> {
    let mut out = csv_writer(w);
    out.write_record(HISTORY_HEADER).map_err(csv_err("history csv"))?;
    for r in &history.records {
        out.write_record([r.phase.to_string(), r.epoch.to_string(), r.train_loss.to_string(), r.val_accuracy.to_string()])
            .map_err(csv_err("history csv"))?;
    }
    out.flush().map_err(|e| Error::format("history csv", e))
}

pub fn read_history_csv<R: Read>(r: R) -> Result<Vec<EpochRecord>> {
    const WHAT: &str = "history csv";
    read_records(r, WHAT, &HISTORY_HEADER)?
        .iter()
        .enumerate()
        .map(|(k, rec)| {
            let line = k + 2;
            let phase = field(rec, 0, line, WHAT)?;
            let epoch = field(rec, 1, line, WHAT)?;
            Ok(EpochRecord {
                phase: phase.parse().map_err(|_| Error::format(WHAT, format!("line {line}: phase '{phase}'")))?,
                epoch: epoch.parse().map_err(|_| Error::format(WHAT, format!("line {line}: epoch '{epoch}'")))?,
                train_loss: parse_f64(field(rec, 2, line, WHAT)?, line, WHAT)?,
                val_accuracy: parse_f64(field(rec, 3, line, WHAT)?, line, WHAT)?,
            })
        })
        .collect()
}

pub fn save_history_csv(path: &Path, history: &TrainHistory) -> Result<()> {
    write_history_csv(create(path)?, history)
}

pub fn load_history_csv(path: &Path) -> Result<Vec<EpochRecord>> {
    read_history_csv(open(path)?).map_err(|e| with_path(e, path))
}

/// Binary model container.
///
/// Layout, all little-endian: magic `GZNN`; u32 format version; u32 dims
/// `input_len, channels, filters, kernel_len, pool_factor, classes`; the
/// f64 payload `conv_weights [filter][tap][channel]`, `conv_bias`,
/// `dense_weights [class][flat]`, `dense_bias`; u32 CRC-32 of the payload.
pub struct ModelFile;

impl ModelFile {
    pub const MAGIC: [u8; 4] = *b"GZNN";
    pub const VERSION: u32 = 1;
    const HEADER_LEN: usize = 4 + 4 + 6 * 4;

    pub fn to_bytes(params: &NetworkParams) -> Vec<u8> {
        let s = params.shape();
        let mut out = Vec::with_capacity(Self::HEADER_LEN + 8 * s.param_count() + 4);
        out.extend_from_slice(&Self::MAGIC);
        out.extend_from_slice(&Self::VERSION.to_le_bytes());
        for d in [s.input_len, s.channels, s.filters, s.kernel_len, s.pool_factor, s.classes] {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        let payload_start = out.len();
        for v in params.iter() {
            out.extend_from_slice(&v.to_le_bytes());
        }
        let crc = crc32fast::hash(&out[payload_start..]);
        out.extend_from_slice(&crc.to_le_bytes());
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<NetworkParams> {
        if bytes.len() < Self::HEADER_LEN + 4 {
            return Err(Error::ModelCorrupt(format!("{} bytes is shorter than the header", bytes.len())));
        }
        if bytes[..4] != Self::MAGIC {
            return Err(Error::ModelCorrupt("missing GZNN magic".into()));
        }
        let u32_at = |at: usize| u32::from_le_bytes(bytes[at..at + 4].try_into().expect("4 bytes"));
        let version = u32_at(4);
        if version != Self::VERSION {
            return Err(Error::ModelVersion { found: version, expected: Self::VERSION });
        }
        let d: Vec<usize> = (0..6).map(|k| u32_at(8 + 4 * k) as usize).collect();
        let shape = NetworkShape {
            input_len: d[0],
            channels: d[1],
            filters: d[2],
            kernel_len: d[3],
            pool_factor: d[4],
            classes: d[5],
        };
        shape.validate().map_err(|e| Error::ModelShape(e.to_string()))?;
        let expected = Self::HEADER_LEN + 8 * shape.param_count() + 4;
        if bytes.len() < expected {
            return Err(Error::ModelCorrupt(format!("truncated: {} of {expected} bytes", bytes.len())));
        }
        if bytes.len() > expected {
            return Err(Error::ModelShape(format!(
                "{} bytes, declared dimensions account for {expected}",
                bytes.len()
            )));
        }
        let payload = &bytes[Self::HEADER_LEN..expected - 4];
        let stored = u32_at(expected - 4);
        let actual = crc32fast::hash(payload);
        if stored != actual {
            return Err(Error::ModelCorrupt(format!("checksum {stored:08x}, payload hashes to {actual:08x}")));
        }
        let values: Vec<f64> =
            payload.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
        let mut params = NetworkParams::zeros(shape).map_err(|e| Error::ModelShape(e.to_string()))?;
        let mut at = 0;
        for t in params.tensors_mut() {
            t.copy_from_slice(&values[at..at + t.len()]);
            at += t.len();
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::ModelCorrupt(format!("non-finite weight at payload index {i}")));
        }
        Ok(params)
    }

    pub fn save(path: &Path, params: &NetworkParams) -> Result<()> {
        fs::write(path, Self::to_bytes(params)).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<NetworkParams> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }

    /// Loads and insists on a particular architecture.
    pub fn load_expecting(path: &Path, shape: &NetworkShape) -> Result<NetworkParams> {
        let params = Self::load(path)?;
        if params.shape() != shape {
            return Err(Error::ModelShape(format!("file holds {:?}, expected {shape:?}", params.shape())));
        }
        Ok(params)
    }

    /// CRC-32 of a model's payload, used to compare trained models.
    pub fn checksum(params: &NetworkParams) -> u32 {
        let bytes = Self::to_bytes(params);
        u32::from_le_bytes(bytes[bytes.len() - 4..].try_into().expect("4 bytes"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub file: String,
    pub frames: u64,
    /// Indexed by class code.
    pub frames_per_class: [u64; 3],
    pub events_per_class: [u64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthManifest {
    pub seed: u64,
    pub stimulus: StimulusConfig,
    pub sequences: Vec<ManifestEntry>,
    pub totals: CorpusStats,
}

impl SynthManifest {
    pub const FILE_NAME: &'static str = "manifest.json";

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).expect("manifest serializes");
        fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::format("manifest", e))
    }
}

/// Headline numbers of an evaluation, written as `summary.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalSummary {
    pub frames: u64,
    pub accuracy: f64,
    pub macro_f1: f64,
    pub mean_auc: f64,
    /// Fixation, saccade, pursuit.
    pub auc: [f64; 3],
    pub events: u64,
}

impl EvalSummary {
    pub fn of(report: &EvalReport) -> Self {
        Self {
            frames: report.frames,
            accuracy: report.confusion.accuracy(),
            macro_f1: report.prf.macro_f1,
            mean_auc: report.one_vs_all.mean_auc,
            auc: report.one_vs_all.aucs,
            events: report.event_majority.total_events(),
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::format("summary", e))
    }
}

/// A header row and string cells, for re-reading report tables.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    fn new(header: &[&str]) -> Self {
        Self { header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    fn push(&mut self, row: Vec<String>) {
        self.rows.push(row);
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut out = csv_writer(create(path)?);
        out.write_record(&self.header).map_err(csv_err("report table"))?;
        for r in &self.rows {
            out.write_record(r).map_err(csv_err("report table"))?;
        }
        out.flush().map_err(|e| Error::io(path, e))
    }

    /// Reads a table; every row must have as many cells as the header.
    pub fn load(path: &Path) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(open(path)?);
        let header: Vec<String> = reader.headers().map_err(csv_err("report table"))?.iter().map(String::from).collect();
        let mut rows = Vec::new();
        for rec in reader.records() {
            let rec = rec.map_err(csv_err("report table"))?;
            rows.push(rec.iter().map(String::from).collect());
        }
        Ok(Self { header, rows })
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }
}

fn class_matrix_table(m: &[[String; 3]; 3]) -> Table {
    let mut t = Table::new(&["truth", "fixation", "saccade", "pursuit"]);
    for c in LabelClass::ALL {
        let mut row = vec![c.name().to_string()];
        row.extend(m[c.index()].iter().cloned());
        t.push(row);
    }
    t
}

/// Report tables keyed by file name.
pub fn report_tables(report: &EvalReport) -> Vec<(String, Table)> {
    let mut out = Vec::new();
    let c = &report.confusion;
    out.push(("confusion_counts.csv".into(), class_matrix_table(&c.counts.map(|r| r.map(|v| v.to_string())))));
    out.push(("confusion_row_normalized.csv".into(), class_matrix_table(&c.row_normalized().map(|r| r.map(|v| v.to_string())))));
    out.push(("confusion_col_normalized.csv".into(), class_matrix_table(&c.col_normalized().map(|r| r.map(|v| v.to_string())))));

    let mut prf = Table::new(&["class", "accuracy", "precision", "recall", "f1"]);
    let rows = LabelClass::ALL.iter().map(|c| (c.name(), report.prf.per_class[c.index()]));
    for (name, m) in rows.chain([("macro", report.prf.macro_avg)]) {
        prf.push(vec![name.into(), m.accuracy.to_string(), m.precision.to_string(), m.recall.to_string(), m.f1.to_string()]);
    }
    out.push(("prf.csv".into(), prf));

    for c in LabelClass::ALL {
        let mut roc = Table::new(&["fpr", "tpr"]);
        for &(x, y) in &report.one_vs_all.curves[c.index()].points {
            roc.push(vec![x.to_string(), y.to_string()]);
        }
        out.push((format!("roc_{}.csv", c.name()), roc));
    }

    let mut ev = Table::new(&["truth", "events", "fixation", "saccade", "pursuit", "no_majority"]);
    let fr = report.event_majority.fractions();
    for c in LabelClass::ALL {
        let (row, none) = fr[c.index()];
        ev.push(vec![
            c.name().into(),
            report.event_majority.events[c.index()].to_string(),
            row[0].to_string(),
            row[1].to_string(),
            row[2].to_string(),
            none.to_string(),
        ]);
    }
    out.push(("event_majority.csv".into(), ev));

    let mut conf = Table::new(&["class", "min_probability", "accuracy", "support"]);
    for p in &report.confidence {
        conf.push(vec![
            p.class.name().into(),
            p.min_probability.to_string(),
            p.accuracy.map_or(String::new(), |a| a.to_string()),
            p.support.to_string(),
        ]);
    }
    out.push(("confidence.csv".into(), conf));
    out
}

pub const SUMMARY_FILE: &str = "summary.json";

/// Writes every report table plus `summary.json` into `dir`, creating it.
pub fn write_eval_report(dir: &Path, report: &EvalReport) -> Result<EvalSummary> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for (name, table) in report_tables(report) {
        table.save(&dir.join(name))?;
    }
    let summary = EvalSummary::of(report);
    let path = dir.join(SUMMARY_FILE);
    let text = serde_json::to_string_pretty(&summary).expect("summary serializes");
    fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))?;
    Ok(summary)
}
