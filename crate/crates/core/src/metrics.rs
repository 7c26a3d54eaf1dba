//! Classification metrics, k-fold aggregation and history export.

use std::fs::File;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::autodiff::NumArray;
use crate::checkpoint::write_atomic;
use crate::corpus::{kfold_split, Label, LabeledCorpus, TokenSequence};
use crate::discriminator::Discriminator;
use crate::error::{Error, Result};
use crate::trainer::{train, HistoryRecord, TrainConfig, TrainOptions, TrainOutcome, TrainingHistory};

/// Column order of the history CSV.
pub const HISTORY_COLUMNS: [&str; 8] = [
    "step",
    "phase",
    "d_acc",
    "dprime_acc",
    "d_loss",
    "dprime_loss",
    "gen_reward",
    "seconds",
];

/// Confusion counts with one class treated as positive.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

impl Confusion {
    fn precision(&self) -> Option<f64> {
        ratio(self.tp, self.tp + self.fp)
    }

    fn recall(&self) -> Option<f64> {
        ratio(self.tp, self.tp + self.fn_)
    }
}

fn ratio(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

/// Precision and recall with `label` as the positive class. An undefined
/// ratio (zero denominator) is `None`, never 0.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub label: Label,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub confusion: Confusion,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub fold: Option<usize>,
    pub total: usize,
    pub accuracy: f64,
    /// Class whose precision and recall are reported as the headline.
    pub positive: Label,
    pub truthful: ClassMetrics,
    pub deceptive: ClassMetrics,
}

impl MetricsReport {
    pub fn class(&self, label: Label) -> &ClassMetrics {
        match label {
            Label::Truthful => &self.truthful,
            Label::Deceptive => &self.deceptive,
        }
    }

    pub fn precision(&self) -> Option<f64> {
        self.class(self.positive).precision
    }

    pub fn recall(&self) -> Option<f64> {
        self.class(self.positive).recall
    }
}

fn class_metrics(predictions: &[Label], labels: &[Label], positive: Label) -> ClassMetrics {
    let mut c = Confusion::default();
    for (&p, &y) in predictions.iter().zip(labels) {
        match (p == positive, y == positive) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, false) => c.tn += 1,
            (false, true) => c.fn_ += 1,
        }
    }
    ClassMetrics {
        label: positive,
        precision: c.precision(),
        recall: c.recall(),
        confusion: c,
    }
}

/// Exact confusion-matrix metrics for both class conventions.
pub fn compute_metrics(predictions: &[Label], labels: &[Label], positive: Label) -> Result<MetricsReport> {
    if predictions.len() != labels.len() {
        return Err(Error::Contract(format!(
            "{} predictions for {} labels",
            predictions.len(),
            labels.len()
        )));
    }
    if labels.is_empty() {
        return Err(Error::Contract("metrics need at least one prediction".into()));
    }
    let correct = predictions.iter().zip(labels).filter(|(p, y)| p == y).count();
    Ok(MetricsReport {
        fold: None,
        total: labels.len(),
        accuracy: correct as f64 / labels.len() as f64,
        positive,
        truthful: class_metrics(predictions, labels, Label::Truthful),
        deceptive: class_metrics(predictions, labels, Label::Deceptive),
    })
}

/// Maps D's decision onto dataset labels: above the threshold is truthful.
pub fn predict_label(d: &Discriminator, seq: &TokenSequence, threshold: f64) -> Result<Label> {
    Ok(if d.score(seq)? >= threshold {
        Label::Truthful
    } else {
        Label::Deceptive
    })
}

/// Scores D on a labelled test set.
pub fn evaluate_discriminator(d: &Discriminator, test: &LabeledCorpus, positive: Label) -> Result<MetricsReport> {
    let mut predictions = Vec::with_capacity(test.len());
    let mut labels = Vec::with_capacity(test.len());
    for (seq, label) in test.labeled() {
        predictions.push(predict_label(d, seq, 0.5)?);
        labels.push(label);
    }
    compute_metrics(&predictions, &labels, positive)
}

/// Mean and population standard deviation over the folds where a metric
/// is defined.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub std: f64,
    pub count: usize,
}

impl Summary {
    pub fn of(values: &[f64]) -> Option<Summary> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        Some(Summary {
            mean,
            std: var.sqrt(),
            count: values.len(),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FoldAggregate {
    pub reports: Vec<MetricsReport>,
    pub accuracy: Summary,
    pub precision: Option<Summary>,
    pub recall: Option<Summary>,
    /// The same figures under the other class convention.
    pub other_precision: Option<Summary>,
    pub other_recall: Option<Summary>,
}

impl FoldAggregate {
    pub fn from_reports(reports: Vec<MetricsReport>) -> Result<Self> {
        let first = reports
            .first()
            .ok_or_else(|| Error::EmptyInput("no fold reports to aggregate".into()))?;
        let positive = first.positive;
        if reports.iter().any(|r| r.positive != positive) {
            return Err(Error::Contract("fold reports use different positive classes".into()));
        }
        let collect = |f: &dyn Fn(&MetricsReport) -> Option<f64>| -> Vec<f64> { reports.iter().filter_map(f).collect() };
        let accuracy = Summary::of(&collect(&|r| Some(r.accuracy))).expect("nonempty");
        let other = positive.other();
        Ok(FoldAggregate {
            accuracy,
            precision: Summary::of(&collect(&|r| r.precision())),
            recall: Summary::of(&collect(&|r| r.recall())),
            other_precision: Summary::of(&collect(&|r| r.class(other).precision)),
            other_recall: Summary::of(&collect(&|r| r.class(other).recall)),
            reports,
        })
    }
}

/// Per-fold training results alongside the aggregate.
pub struct KFoldOutcome {
    pub aggregate: FoldAggregate,
    pub outcomes: Vec<TrainOutcome>,
}

/// Stratified `config.folds`-fold cross-validation. Fold `i` trains with
/// seed `config.seed + i` and is scored with its best D checkpoint on its
/// own test split. Folds run concurrently; results do not depend on the
/// schedule.
pub fn run_kfold(
    config: &TrainConfig,
    corpus: &LabeledCorpus,
    vocab_size: usize,
    embedding: Option<&NumArray>,
    positive: Label,
) -> Result<KFoldOutcome> {
    config.validate()?;
    let folds = kfold_split(corpus, config.folds, config.seed)?;
    let results: Vec<Result<(MetricsReport, TrainOutcome)>> = folds
        .into_par_iter()
        .enumerate()
        .map(|(i, fold)| {
            let cfg = TrainConfig {
                seed: config.seed.wrapping_add(i as u64),
                ..config.clone()
            };
            let test = fold.test.clone();
            let outcome = train(&cfg, fold, vocab_size, embedding.cloned(), TrainOptions::default())?;
            let mut report = evaluate_discriminator(&outcome.best_d, &test, positive)?;
            report.fold = Some(i);
            Ok((report, outcome))
        })
        .collect();
    let mut reports = Vec::new();
    let mut outcomes = Vec::new();
    for r in results {
        let (report, outcome) = r?;
        reports.push(report);
        outcomes.push(outcome);
    }
    Ok(KFoldOutcome {
        aggregate: FoldAggregate::from_reports(reports)?,
        outcomes,
    })
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Format {
            path: path.to_path_buf(),
            msg: format!("{other:?}"),
        },
    }
}

/// Serializes a history to CSV text. The header is always written, so an
/// empty history yields a header-only file.
pub fn history_to_csv(history: &TrainingHistory) -> Vec<u8> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    w.write_record(HISTORY_COLUMNS).expect("in-memory write");
    for r in &history.records {
        w.serialize(r).expect("in-memory write");
    }
    w.into_inner().expect("in-memory flush")
}

/// Writes the history CSV atomically.
pub fn export_history(history: &TrainingHistory, path: &Path) -> Result<()> {
    write_atomic(path, &history_to_csv(history))
}

/// Reads a history CSV written by [`export_history`]. Floats round-trip
/// exactly.
pub fn read_history(path: &Path) -> Result<TrainingHistory> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = csv::Reader::from_reader(file);
    let header = r.headers().map_err(|e| csv_err(path, e))?;
    if header.iter().ne(HISTORY_COLUMNS) {
        return Err(Error::Format {
            path: path.to_path_buf(),
            msg: format!("unexpected header {header:?}"),
        });
    }
    let records = r
        .deserialize::<HistoryRecord>()
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|e| csv_err(path, e))?;
    Ok(TrainingHistory { records })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trainer::Phase;

    #[test]
    fn perfect_predictions() {
        let y = [Label::Truthful, Label::Deceptive, Label::Deceptive];
        let m = compute_metrics(&y, &y, Label::Deceptive).unwrap();
        assert_eq!(m.accuracy, 1.0);
        assert_eq!(m.precision(), Some(1.0));
        assert_eq!(m.recall(), Some(1.0));
        assert_eq!(m.truthful.precision, Some(1.0));
    }

    #[test]
    fn all_positive_on_balanced_labels() {
        let y = [Label::Truthful, Label::Deceptive, Label::Truthful, Label::Deceptive];
        let p = [Label::Deceptive; 4];
        let m = compute_metrics(&p, &y, Label::Deceptive).unwrap();
        assert_eq!(m.accuracy, 0.5);
        assert_eq!(m.recall(), Some(1.0));
        assert_eq!(m.precision(), Some(0.5));
        // Nothing predicted truthful: precision for that class is undefined.
        assert_eq!(m.truthful.precision, None);
        assert_eq!(m.truthful.recall, Some(0.0));
    }

    #[test]
    fn length_mismatch_is_contract_error() {
        let r = compute_metrics(&[Label::Truthful], &[], Label::Deceptive);
        assert!(matches!(r, Err(Error::Contract(_))));
        assert!(compute_metrics(&[], &[], Label::Deceptive).is_err());
    }

    #[test]
    fn identical_folds_have_zero_std() {
        let y = [Label::Truthful, Label::Deceptive];
        let p = [Label::Truthful, Label::Truthful];
        let r = compute_metrics(&p, &y, Label::Deceptive).unwrap();
        let agg = FoldAggregate::from_reports(vec![r.clone(); 5]).unwrap();
        assert_eq!(agg.reports.len(), 5);
        assert_eq!(agg.accuracy.mean, 0.5);
        assert_eq!(agg.accuracy.std, 0.0);
        assert_eq!(agg.precision, None);
        assert_eq!(agg.recall.unwrap().mean, 0.0);
    }

    #[test]
    fn std_uses_population_denominator() {
        let s = Summary::of(&[1.0, 3.0]).unwrap();
        assert_eq!(s.mean, 2.0);
        assert_eq!(s.std, 1.0);
    }

    #[test]
    fn empty_history_is_header_only() {
        let text = history_to_csv(&TrainingHistory::default());
        assert_eq!(
            String::from_utf8(text).unwrap(),
            "step,phase,d_acc,dprime_acc,d_loss,dprime_loss,gen_reward,seconds\n"
        );
    }

    #[test]
    fn history_round_trip() {
        let history = TrainingHistory {
            records: vec![
                HistoryRecord {
                    step: 1,
                    phase: Phase::Pretrain,
                    d_acc: Some(0.1 + 0.2),
                    dprime_acc: None,
                    d_loss: Some(1e-300),
                    dprime_loss: None,
                    gen_reward: None,
                    seconds: 0.0,
                },
                HistoryRecord {
                    step: 2,
                    phase: Phase::Adversarial,
                    d_acc: Some(0.875),
                    dprime_acc: Some(std::f64::consts::PI),
                    d_loss: Some(0.5),
                    dprime_loss: Some(2.0 / 3.0),
                    gen_reward: Some(-1.25),
                    seconds: 12.5,
                },
            ],
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("h.csv");
        export_history(&history, &path).unwrap();
        assert_eq!(read_history(&path).unwrap(), history);
        let empty = dir.path().join("e.csv");
        export_history(&TrainingHistory::default(), &empty).unwrap();
        assert!(read_history(&empty).unwrap().is_empty());
    }
}
