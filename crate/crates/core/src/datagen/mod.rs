//! Data streams: synthetic drift generators, CSV ingestion, the base model
//! and the adversarial outcome source.

mod adversary;
mod csv_ingest;
mod features;
mod logistic;
mod rng;
mod synthetic;

use std::path::Path;

use serde::{Deserialize, Serialize};

pub use adversary::{adversarial_outcome, AdversaryTarget};
pub use csv_ingest::{read_csv, stream_order, CsvSource, CsvTable};
pub use features::{pairwise_expansion, sinusoidal_features, SINUSOID_DIM};
pub use logistic::{train_base_logistic, train_logistic_with, BaseModelWeights, LogisticOptions};
pub use rng::{substream, Purpose};
pub use synthetic::{
    cov1d_covariate, label1d_prior, label1d_truth, labelmulti_delta, labelmulti_truth,
    reg1d_covariate, reg_truth, stripe_truth, CovMultiParams, Generator, Sample, SyntheticKind,
    MULTI_DIM,
};

use crate::error::{CalibError, Result};
use crate::prob::{ClippedScore, SCORE_CLIP_HI, SCORE_CLIP_LO};
use crate::trace::ForecastTrace;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StreamKind {
    Synthetic(SyntheticKind),
    Csv(CsvSource),
    Adversarial { target: AdversaryTarget },
}

/// Declarative stream description. Time inside the test stream runs
/// `1..=t_test`; `t_cal` and `window` are measured in that clock.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreamSpec {
    pub kind: StreamKind,
    pub t_train: usize,
    /// `None` uses every row after the training block (CSV only).
    pub t_test: Option<usize>,
    pub t_cal: usize,
    pub window: usize,
}

impl StreamSpec {
    /// 1000 training points, a 5000-point test stream, `T_cal = 1000`, `W = 500`.
    pub fn synthetic(kind: SyntheticKind) -> Self {
        Self {
            kind: StreamKind::Synthetic(kind),
            t_train: 1000,
            t_test: Some(5000),
            t_cal: 1000,
            window: 500,
        }
    }

    /// Uniform scores with adversarial outcomes; no training block.
    pub fn adversarial(target: AdversaryTarget) -> Self {
        Self {
            kind: StreamKind::Adversarial { target },
            t_train: 0,
            t_test: Some(10_000),
            t_cal: 1000,
            window: 500,
        }
    }

    pub fn csv(source: CsvSource) -> Self {
        Self {
            kind: StreamKind::Csv(source),
            t_train: 1000,
            t_test: None,
            t_cal: 1000,
            window: 500,
        }
    }

    pub fn name(&self) -> String {
        match &self.kind {
            StreamKind::Synthetic(k) => k.name().to_string(),
            StreamKind::Csv(src) => src.path.display().to_string(),
            StreamKind::Adversarial { target } => format!("adversarial-{}", target.name()),
        }
    }

    /// Points the evaluation needs after the training block.
    pub fn min_test_len(&self) -> usize {
        self.t_cal + 2 * self.window
    }

    pub fn validate(&self) -> Result<()> {
        if self.window == 0 {
            return Err(CalibError::Config("window must be positive".into()));
        }
        if self.t_cal == 0 {
            return Err(CalibError::Config(
                "calibration size must be positive".into(),
            ));
        }
        if !matches!(self.kind, StreamKind::Adversarial { .. }) && self.t_train == 0 {
            return Err(CalibError::Config("training block must be nonempty".into()));
        }
        if let Some(t) = self.t_test {
            if t < self.min_test_len() {
                return Err(CalibError::InsufficientData {
                    needed: self.min_test_len(),
                    have: t,
                });
            }
        }
        if matches!(
            self.kind,
            StreamKind::Synthetic(_) | StreamKind::Adversarial { .. }
        ) && self.t_test.is_none()
        {
            return Err(CalibError::Config(
                "synthetic streams need an explicit test length".into(),
            ));
        }
        Ok(())
    }
}

/// One test-stream point. `t` is the global time index, training included.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StreamPoint {
    pub t: usize,
    pub score: ClippedScore,
    pub y: u8,
    pub truth: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Outcomes {
    Fixed(Vec<u8>),
    /// Chosen online by an adversary watching the named forecaster.
    Adversary(AdversaryTarget),
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct IngestReport {
    pub rows: usize,
    pub dropped_rows: usize,
    pub skipped_columns: Vec<String>,
}

/// A realized test stream.
#[derive(Debug, Clone, PartialEq)]
pub struct Stream {
    /// Global time of the first test point (`t_train + 1`).
    pub start: usize,
    pub scores: Vec<ClippedScore>,
    pub outcomes: Outcomes,
    pub truth: Option<Vec<f64>>,
    pub base: Option<BaseModelWeights>,
    pub ingest: Option<IngestReport>,
}

impl Stream {
    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    /// Points with known outcomes; `None` for adversarial streams.
    pub fn points(&self) -> Option<Vec<StreamPoint>> {
        let Outcomes::Fixed(ys) = &self.outcomes else {
            return None;
        };
        Some(
            self.scores
                .iter()
                .zip(ys)
                .enumerate()
                .map(|(i, (&score, &y))| StreamPoint {
                    t: self.start + i,
                    score,
                    y,
                    truth: self.truth.as_ref().map(|v| v[i]),
                })
                .collect(),
        )
    }
}

/// Builds replication `replication` of `spec` from `master_seed`.
pub fn realize(spec: &StreamSpec, master_seed: u64, replication: u64) -> Result<Stream> {
    spec.validate()?;
    match &spec.kind {
        StreamKind::Synthetic(kind) => {
            let t_test = spec.t_test.expect("validated");
            let total = spec.t_train + t_test;
            let mut rng = substream(master_seed, replication, Purpose::Generator);
            let generator = Generator::new(*kind, total, &mut rng);
            let samples = generator.run(total, &mut rng);
            let (train, test) = samples.split_at(spec.t_train);
            let features: Vec<Vec<f64>> = train.iter().map(|s| s.features.clone()).collect();
            let labels: Vec<u8> = train.iter().map(|s| s.y).collect();
            let base = train_base_logistic(&features, &labels)?;
            let scores = test
                .iter()
                .map(|s| base.score(&s.features))
                .collect::<Result<Vec<_>>>()?;
            Ok(Stream {
                start: spec.t_train + 1,
                scores,
                outcomes: Outcomes::Fixed(test.iter().map(|s| s.y).collect()),
                truth: Some(test.iter().map(|s| s.truth).collect()),
                base: Some(base),
                ingest: None,
            })
        }
        StreamKind::Adversarial { target } => {
            use rand::Rng;
            let mut rng = substream(master_seed, replication, Purpose::AdversaryScores);
            let scores = (0..spec.t_test.expect("validated"))
                .map(|_| ClippedScore::new(rng.random_range(SCORE_CLIP_LO..=SCORE_CLIP_HI)))
                .collect::<Result<Vec<_>>>()?;
            Ok(Stream {
                start: spec.t_train + 1,
                scores,
                outcomes: Outcomes::Adversary(*target),
                truth: None,
                base: None,
                ingest: None,
            })
        }
        StreamKind::Csv(source) => {
            let table = read_csv(source)?;
            let needed = spec.t_train + spec.min_test_len();
            if table.len() < needed {
                return Err(CalibError::InsufficientData {
                    needed,
                    have: table.len(),
                });
            }
            let mut rng = substream(master_seed, replication, Purpose::Shuffle);
            let table = table.reordered(&stream_order(&table, &mut rng));
            let end = match spec.t_test {
                Some(t) => (spec.t_train + t).min(table.len()),
                None => table.len(),
            };
            let (scores, base) = match &table.scores {
                Some(s) => (
                    s[spec.t_train..end]
                        .iter()
                        .map(|&v| ClippedScore::new(v))
                        .collect::<Result<Vec<_>>>()?,
                    None,
                ),
                None => {
                    let base = train_base_logistic(
                        &table.features[..spec.t_train],
                        &table.labels[..spec.t_train],
                    )?;
                    let scores = table.features[spec.t_train..end]
                        .iter()
                        .map(|x| base.score(x))
                        .collect::<Result<Vec<_>>>()?;
                    (scores, Some(base))
                }
            };
            Ok(Stream {
                start: spec.t_train + 1,
                scores,
                outcomes: Outcomes::Fixed(table.labels[spec.t_train..end].to_vec()),
                truth: None,
                base,
                ingest: Some(IngestReport {
                    rows: table.len(),
                    dropped_rows: table.dropped_rows,
                    skipped_columns: table.skipped_columns.clone(),
                }),
            })
        }
    }
}

/// Writes `t, score, y, truth` rows from a trace's `BM` column. `truth` is
/// left empty when unknown.
pub fn dump_stream(trace: &ForecastTrace, path: &Path) -> Result<()> {
    let scores = trace.base_scores()?;
    let csv_err = |e| CalibError::Csv {
        path: path.to_path_buf(),
        source: e,
    };
    let mut writer = csv::Writer::from_path(path).map_err(csv_err)?;
    writer
        .write_record(["t", "score", "y", "truth"])
        .map_err(csv_err)?;
    for i in 0..trace.len() {
        let truth = trace.truth().map(|v| v[i].to_string()).unwrap_or_default();
        writer
            .write_record([
                (trace.start() + i).to_string(),
                scores[i].to_string(),
                trace.outcomes()[i].to_string(),
                truth,
            ])
            .map_err(csv_err)?;
    }
    writer.flush()?;
    Ok(())
}
