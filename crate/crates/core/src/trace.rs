//! Aligned per-step records of base scores, forecasts and outcomes.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{CalibError, Result};

/// Every forecaster the pipeline can emit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Method {
    /// Base model pass-through.
    Bm,
    Fps,
    Wps,
    Ops,
    Tops,
    Hops,
    Fbs,
    Wbs,
    Obs,
    Tobs,
    Hobs,
    Whb,
    Twhb,
    /// Covariate-free hedging forecaster (climatology runs).
    F99,
}

impl Method {
    /// Methods selectable in a pipeline run, in output order.
    pub const PIPELINE: [Method; 13] = [
        Method::Bm,
        Method::Fps,
        Method::Wps,
        Method::Ops,
        Method::Tops,
        Method::Hops,
        Method::Fbs,
        Method::Wbs,
        Method::Obs,
        Method::Tobs,
        Method::Hobs,
        Method::Whb,
        Method::Twhb,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Bm => "BM",
            Method::Fps => "FPS",
            Method::Wps => "WPS",
            Method::Ops => "OPS",
            Method::Tops => "TOPS",
            Method::Hops => "HOPS",
            Method::Fbs => "FBS",
            Method::Wbs => "WBS",
            Method::Obs => "OBS",
            Method::Tobs => "TOBS",
            Method::Hobs => "HOBS",
            Method::Whb => "WHB",
            Method::Twhb => "TWHB",
            Method::F99 => "F99",
        }
    }

    /// Whether the method is defined from the first step of the stream, as
    /// opposed to only after the calibration prefix.
    pub fn is_online(self) -> bool {
        matches!(
            self,
            Method::Bm
                | Method::Ops
                | Method::Tops
                | Method::Hops
                | Method::Obs
                | Method::Tobs
                | Method::Hobs
        )
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = CalibError;

    fn from_str(s: &str) -> Result<Self> {
        let upper = s.trim().to_ascii_uppercase();
        Method::PIPELINE
            .iter()
            .chain(std::iter::once(&Method::F99))
            .copied()
            .find(|m| m.name() == upper)
            .ok_or_else(|| CalibError::Config(format!("unknown method `{s}`")))
    }
}

/// Forecast columns aligned with outcomes (and optional truth) over a
/// contiguous range of time indices starting at `start`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ForecastTrace {
    start: usize,
    outcomes: Vec<u8>,
    truth: Option<Vec<f64>>,
    columns: Vec<(Method, Vec<f64>)>,
}

impl ForecastTrace {
    pub fn new(start: usize, outcomes: Vec<u8>, truth: Option<Vec<f64>>) -> Result<Self> {
        if let Some(t) = &truth {
            check_len(outcomes.len(), t.len())?;
        }
        Ok(Self {
            start,
            outcomes,
            truth,
            columns: Vec::new(),
        })
    }

    pub fn with_column(mut self, method: Method, values: Vec<f64>) -> Result<Self> {
        self.insert(method, values)?;
        Ok(self)
    }

    pub fn insert(&mut self, method: Method, values: Vec<f64>) -> Result<()> {
        check_len(self.outcomes.len(), values.len())?;
        match self.columns.iter_mut().find(|(m, _)| *m == method) {
            Some((_, col)) => *col = values,
            None => self.columns.push((method, values)),
        }
        Ok(())
    }

    /// Time index of the first record.
    pub fn start(&self) -> usize {
        self.start
    }

    /// Time index of the last record.
    pub fn end(&self) -> usize {
        self.start + self.outcomes.len().saturating_sub(1)
    }

    pub fn len(&self) -> usize {
        self.outcomes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outcomes.is_empty()
    }

    pub fn outcomes(&self) -> &[u8] {
        &self.outcomes
    }

    pub fn truth(&self) -> Option<&[f64]> {
        self.truth.as_deref()
    }

    pub fn column(&self, method: Method) -> Option<&[f64]> {
        self.columns
            .iter()
            .find(|(m, _)| *m == method)
            .map(|(_, c)| c.as_slice())
    }

    pub fn methods(&self) -> impl Iterator<Item = Method> + '_ {
        self.columns.iter().map(|(m, _)| *m)
    }

    /// The base-model column.
    pub fn base_scores(&self) -> Result<&[f64]> {
        self.column(Method::Bm)
            .ok_or_else(|| CalibError::Config("trace has no BM column".into()))
    }

    /// Sub-trace covering time indices `from..=to` (clamped to the trace).
    pub fn window(&self, from: usize, to: usize) -> Result<ForecastTrace> {
        let lo = from.max(self.start);
        let hi = to.min(self.end());
        if self.is_empty() || lo > hi {
            return Err(CalibError::Empty("trace window"));
        }
        let (a, b) = (lo - self.start, hi - self.start + 1);
        Ok(ForecastTrace {
            start: lo,
            outcomes: self.outcomes[a..b].to_vec(),
            truth: self.truth.as_ref().map(|t| t[a..b].to_vec()),
            columns: self
                .columns
                .iter()
                .map(|(m, c)| (*m, c[a..b].to_vec()))
                .collect(),
        })
    }
}

fn check_len(left: usize, right: usize) -> Result<()> {
    if left == right {
        Ok(())
    } else {
        Err(CalibError::LengthMismatch { left, right })
    }
}
