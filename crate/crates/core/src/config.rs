//! TOML run configuration. Every field is optional; values not given fall
//! back to the stream's defaults, and command-line overrides win over both.
//!
//! ```toml
//! [stream]
//! kind = "csv"            # cov1d, label1d, reg1d, covmulti[-iid],
//!                         # labelmulti[-iid], adversarial-ops,
//!                         # adversarial-hops or csv
//! csv = "bank.csv"
//! label = "y"
//! sortby = "age"
//! t_train = 1000
//! t_cal = 1000
//! window = 500
//!
//! [experiment]
//! methods = ["BM", "OPS", "TOPS"]
//! epsilon = 0.1
//! replications = 100
//! seed = 0
//! eval_stride = 250
//!
//! [output]
//! dir = "out"
//! ```

use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::datagen::{AdversaryTarget, CsvSource, StreamSpec, SyntheticKind};
use crate::error::{CalibError, Result};
use crate::pipeline::ExperimentConfig;
use crate::trace::Method;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StreamSection {
    pub kind: Option<String>,
    pub csv: Option<PathBuf>,
    pub label: Option<String>,
    pub sortby: Option<String>,
    pub score: Option<String>,
    pub t_train: Option<usize>,
    pub t_test: Option<usize>,
    pub t_cal: Option<usize>,
    pub window: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    pub methods: Option<Vec<String>>,
    pub epsilon: Option<f64>,
    pub replications: Option<usize>,
    pub seed: Option<u64>,
    pub eval_stride: Option<usize>,
    pub histogram_bins: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub dir: Option<PathBuf>,
}

/// A config file, or the set of command-line overrides (same shape).
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSettings {
    #[serde(default)]
    pub stream: StreamSection,
    #[serde(default)]
    pub experiment: ExperimentSection,
    #[serde(default)]
    pub output: OutputSection,
}

macro_rules! take {
    ($dst:expr, $src:expr, [$($f:ident),*]) => {
        $( if $src.$f.is_some() { $dst.$f = $src.$f.clone(); } )*
    };
}

impl RunSettings {
    pub fn parse(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// Fields set in `other` replace those in `self`.
    pub fn overridden_by(mut self, other: &RunSettings) -> Self {
        take!(
            self.stream,
            other.stream,
            [kind, csv, label, sortby, score, t_train, t_test, t_cal, window]
        );
        take!(
            self.experiment,
            other.experiment,
            [
                methods,
                epsilon,
                replications,
                seed,
                eval_stride,
                histogram_bins
            ]
        );
        take!(self.output, other.output, [dir]);
        self
    }

    /// The stream with its defaults, then any explicit sizes.
    pub fn stream_spec(&self) -> Result<StreamSpec> {
        let s = &self.stream;
        let kind = match (s.kind.as_deref(), &s.csv) {
            (None, Some(_)) => "csv",
            (None, None) => "cov1d",
            (Some(k), _) => k,
        };
        let mut spec = match kind.trim().to_ascii_lowercase().as_str() {
            "csv" => {
                let path = s
                    .csv
                    .clone()
                    .ok_or_else(|| CalibError::Config("csv stream needs a csv path".into()))?;
                let label = s
                    .label
                    .clone()
                    .ok_or_else(|| CalibError::Config("csv stream needs a label column".into()))?;
                StreamSpec::csv(CsvSource {
                    path,
                    label,
                    sortby: s.sortby.clone(),
                    score: s.score.clone(),
                })
            }
            "adversarial-ops" => StreamSpec::adversarial(AdversaryTarget::Ops),
            "adversarial-hops" => StreamSpec::adversarial(AdversaryTarget::Hops),
            other => StreamSpec::synthetic(SyntheticKind::from_str(other)?),
        };
        if kind != "csv"
            && (s.csv.is_some() || s.label.is_some() || s.sortby.is_some() || s.score.is_some())
        {
            return Err(CalibError::Config(format!(
                "csv options given for a `{kind}` stream"
            )));
        }
        if let Some(v) = s.t_train {
            spec.t_train = v;
        }
        if s.t_test.is_some() {
            spec.t_test = s.t_test;
        }
        if let Some(v) = s.t_cal {
            spec.t_cal = v;
        }
        if let Some(v) = s.window {
            spec.window = v;
        }
        Ok(spec)
    }

    pub fn experiment(&self) -> Result<ExperimentConfig> {
        let mut config = ExperimentConfig::new(self.stream_spec()?);
        let e = &self.experiment;
        if let Some(methods) = &e.methods {
            config.methods = methods
                .iter()
                .map(|m| m.parse())
                .collect::<Result<Vec<Method>>>()?;
        }
        if let Some(v) = e.epsilon {
            config.epsilon = v;
        }
        if let Some(v) = e.replications {
            config.replications = v;
        }
        if let Some(v) = e.seed {
            config.master_seed = v;
        }
        if let Some(v) = e.eval_stride {
            config.eval_stride = v;
        }
        if e.histogram_bins.is_some() {
            config.histogram_bins = e.histogram_bins;
        }
        config.validate()?;
        Ok(config)
    }

    pub fn output_dir(&self) -> PathBuf {
        self.output
            .dir
            .clone()
            .unwrap_or_else(|| PathBuf::from("out"))
    }
}
