//! Run artifacts: `history.csv`, `metrics.json`, feature and confidence-grid
//! dumps.

use std::io::Write;
use std::path::Path;

use crate::data::LabeledDataset;
use crate::error::{Error, Result};
use crate::metrics::MetricsReport;
use crate::network::Model;
use crate::numerics::{softmax, Tensor};

use super::train::{evaluate, EpochRecord};

pub const HISTORY_HEADER: &str = "epoch,train_loss,train_acc,lambda_used,lr,test_acc";

pub fn history_csv(history: &[EpochRecord]) -> String {
    let mut out = String::from(HISTORY_HEADER);
    out.push('\n');
    for r in history {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.epoch, r.train_loss, r.train_acc, r.lambda_used, r.lr, r.test_acc
        ));
    }
    out
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn write_history(path: &Path, history: &[EpochRecord]) -> Result<()> {
    write_file(path, history_csv(history).as_bytes())
}

pub fn write_metrics(path: &Path, report: &MetricsReport) -> Result<()> {
    let mut text = serde_json::to_string_pretty(&report.to_json())
        .map_err(|e| Error::Format(e.to_string()))?;
    text.push('\n');
    write_file(path, text.as_bytes())
}

fn csv_writer(path: &Path) -> Result<csv::Writer<std::fs::File>> {
    csv::Writer::from_path(path).map_err(csv_err(path))
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> Error + '_ {
    move |e| match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Format(format!("{other:?}")),
    }
}

/// One row per sample: `sample_id,class,f0…f{d−1},predicted_class,confidence`.
pub fn dump_features(model: &Model, ds: &LabeledDataset, path: &Path) -> Result<()> {
    let eval = evaluate(model, ds)?;
    let d = eval.features.row_len();
    let mut w = csv_writer(path)?;
    let mut header = vec!["sample_id".to_string(), "class".to_string()];
    header.extend((0..d).map(|k| format!("f{k}")));
    header.extend(["predicted_class".to_string(), "confidence".to_string()]);
    w.write_record(&header).map_err(csv_err(path))?;
    for i in 0..ds.len() {
        let mut rec = vec![ds.sample_ids()[i].to_string(), ds.labels()[i].to_string()];
        rec.extend(eval.features.row(i).iter().map(f64::to_string));
        rec.push(eval.predictions[i].to_string());
        rec.push(eval.confidences[i].to_string());
        w.write_record(&rec).map_err(csv_err(path))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Classifier confidence over a `resolution × resolution` lattice spanning
/// `[min − 1, max + 1]` of the features on each axis; rows
/// `f0,f1,predicted_class,confidence`. Only for 2-D features.
pub fn dump_grid(model: &Model, features: &Tensor, resolution: usize, path: &Path) -> Result<()> {
    let (_, d) = features.dims2("dump_grid")?;
    if d != 2 {
        return Err(Error::InvalidArgument(format!(
            "confidence grid needs 2-D features, got {d}"
        )));
    }
    if resolution < 2 {
        return Err(Error::InvalidArgument("grid resolution must be >= 2".into()));
    }
    let axis = |k: usize| -> Vec<f64> {
        let (lo, hi) = features
            .data()
            .iter()
            .skip(k)
            .step_by(2)
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
        let (lo, hi) = (lo - 1.0, hi + 1.0);
        (0..resolution)
            .map(|i| lo + (hi - lo) * i as f64 / (resolution - 1) as f64)
            .collect()
    };
    let (xs, ys) = (axis(0), axis(1));
    let mut pts = Vec::with_capacity(2 * resolution * resolution);
    for &y in &ys {
        for &x in &xs {
            pts.extend_from_slice(&[x, y]);
        }
    }
    let grid = Tensor::new(vec![resolution * resolution, 2], pts)?;
    let probs = softmax(&model.forward_logits(&grid)?)?;
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = std::io::BufWriter::new(file);
    let io = |e| Error::io(path, e);
    writeln!(out, "f0,f1,predicted_class,confidence").map_err(io)?;
    for i in 0..grid.rows() {
        let k = probs.argmax_row(i);
        let p = grid.row(i);
        writeln!(out, "{},{},{},{}", p[0], p[1], k, probs.row(i)[k]).map_err(io)?;
    }
    out.flush().map_err(io)
}
