//! Lockstep experiment engine: every method is computed in one pass over the
//! test stream, replications run in parallel and are reduced in order.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::calibeating::{HedgeDistribution, HopsState, TrackingState};
use crate::datagen::{
    adversarial_outcome, realize, substream, AdversaryTarget, IngestReport, Outcomes, Purpose,
    Stream, StreamSpec,
};
use crate::error::{CalibError, Result};
use crate::metrics::{true_accuracy, true_ce, MetricReport};
use crate::ons::{ons_regret_bound, regret};
use crate::prob::{BinStats, BinningScheme, Probability};
use crate::scalers::{
    fit_platt_batch, Family, Labeled, OnlineFamily, OnlineScaler, WindowedLearner,
};
use crate::trace::{ForecastTrace, Method};

/// Columns defined from the first test step.
pub const ONLINE_METHODS: [Method; 7] = [
    Method::Bm,
    Method::Ops,
    Method::Tops,
    Method::Hops,
    Method::Obs,
    Method::Tobs,
    Method::Hobs,
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub stream: StreamSpec,
    pub methods: Vec<Method>,
    pub epsilon: f64,
    pub replications: usize,
    pub master_seed: u64,
    pub eval_stride: usize,
    /// Histogram-binning bins; `ceil(1/ε)` when absent.
    pub histogram_bins: Option<usize>,
}

impl ExperimentConfig {
    pub fn new(stream: StreamSpec) -> Self {
        Self {
            stream,
            methods: Method::PIPELINE.to_vec(),
            epsilon: 0.1,
            replications: 100,
            master_seed: 0,
            eval_stride: 250,
            histogram_bins: None,
        }
    }

    pub fn scheme(&self) -> Result<BinningScheme> {
        BinningScheme::new(self.epsilon)
    }

    pub fn validate(&self) -> Result<()> {
        self.scheme()?;
        self.stream.validate()?;
        if self.methods.is_empty() {
            return Err(CalibError::Config("at least one method is required".into()));
        }
        if let Some(m) = self.methods.iter().find(|m| !Method::PIPELINE.contains(m)) {
            return Err(CalibError::Config(format!("{m} is not a pipeline method")));
        }
        if self.replications == 0 {
            return Err(CalibError::Config("replications must be positive".into()));
        }
        if self.eval_stride == 0 {
            return Err(CalibError::Config("eval_stride must be positive".into()));
        }
        if self.histogram_bins == Some(0) {
            return Err(CalibError::Config("histogram_bins must be positive".into()));
        }
        Ok(())
    }

    fn bins(&self) -> Result<usize> {
        Ok(self.histogram_bins.unwrap_or(self.scheme()?.len()))
    }
}

/// Forecast traces of one replication, indexed by global time.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicationResult {
    /// Every test step, columns [`ONLINE_METHODS`].
    pub online: ForecastTrace,
    /// Steps after the calibration prefix, all pipeline methods.
    pub eval: ForecastTrace,
}

#[derive(Default)]
struct Columns {
    values: Vec<(Method, Vec<f64>)>,
}

impl Columns {
    fn push(&mut self, method: Method, v: Probability) {
        match self.values.iter_mut().find(|(m, _)| *m == method) {
            Some((_, col)) => col.push(v.value()),
            None => self.values.push((method, vec![v.value()])),
        }
    }

    fn take(&mut self, method: Method) -> Vec<f64> {
        self.values
            .iter_mut()
            .find(|(m, _)| *m == method)
            .map(|(_, c)| std::mem::take(c))
            .unwrap_or_default()
    }
}

/// Runs all methods over `stream`. `rep` selects the hedging substream.
pub fn run_replication(
    stream: &Stream,
    config: &ExperimentConfig,
    rep: u64,
) -> Result<ReplicationResult> {
    let spec = &config.stream;
    let scheme = config.scheme()?;
    let n = stream.len();
    let t_cal = spec.t_cal;
    if n < spec.min_test_len() {
        return Err(CalibError::InsufficientData {
            needed: spec.min_test_len(),
            have: n,
        });
    }
    let bins = config.bins()?;
    let mut hedge_rng = substream(config.master_seed, rep, Purpose::Hedge);

    let mut ops = OnlineScaler::new(OnlineFamily::Platt);
    let mut obs = OnlineScaler::new(OnlineFamily::Beta);
    let mut tops = TrackingState::new(scheme);
    let mut tobs = TrackingState::new(scheme);
    let mut hops = HopsState::new(scheme);
    let mut hobs = HopsState::new(scheme);
    let mut fps = WindowedLearner::new(Family::Platt, t_cal, None)?;
    let mut wps = WindowedLearner::new(Family::Platt, t_cal, Some(spec.window))?;
    let mut fbs = WindowedLearner::new(Family::Beta, t_cal, None)?;
    let mut wbs = WindowedLearner::new(Family::Beta, t_cal, Some(spec.window))?;
    let mut whb = WindowedLearner::new(Family::Histogram { bins }, t_cal, Some(spec.window))?;
    let mut twhb = TrackingState::new(scheme);

    let mut online = Columns::default();
    let mut batch = Columns::default();
    let mut outcomes = Vec::with_capacity(n);
    let mut history: Vec<Labeled> = Vec::with_capacity(n);

    for (i, &s) in stream.scores.iter().enumerate() {
        let tau = i + 1;
        let p_ops = ops.forecast(s);
        let p_obs = obs.forecast(s);
        let p_tops = tops.forecast(p_ops);
        let p_tobs = tobs.forecast(p_obs);
        let d_hops = hops.distribution(p_ops)?;
        let d_hobs = hobs.distribution(p_obs)?;

        let p_whb = if tau > t_cal {
            batch.push(Method::Fps, fps.windowed_step(tau, &history, s)?);
            batch.push(Method::Wps, wps.windowed_step(tau, &history, s)?);
            batch.push(Method::Fbs, fbs.windowed_step(tau, &history, s)?);
            batch.push(Method::Wbs, wbs.windowed_step(tau, &history, s)?);
            let p_whb = whb.windowed_step(tau, &history, s)?;
            batch.push(Method::Whb, p_whb);
            batch.push(Method::Twhb, twhb.forecast(p_whb));
            Some(p_whb)
        } else {
            None
        };

        let y = match &stream.outcomes {
            Outcomes::Fixed(ys) => ys[i],
            Outcomes::Adversary(AdversaryTarget::Ops) => {
                adversarial_outcome(&HedgeDistribution::Point(p_ops.value()))
            }
            Outcomes::Adversary(AdversaryTarget::Hops) => adversarial_outcome(&d_hops),
        };
        let p_hops = d_hops.sample(&mut hedge_rng);
        let p_hobs = d_hobs.sample(&mut hedge_rng);

        ops.update(s, y)?;
        obs.update(s, y)?;
        tops.update(p_ops, y);
        tobs.update(p_obs, y);
        hops.update(p_ops, p_hops, y)?;
        hobs.update(p_obs, p_hobs, y)?;
        if let Some(p) = p_whb {
            twhb.update(p, y);
        }
        history.push((s, y));
        outcomes.push(y);

        online.push(Method::Bm, s.probability());
        online.push(Method::Ops, p_ops);
        online.push(Method::Tops, p_tops);
        online.push(Method::Hops, p_hops);
        online.push(Method::Obs, p_obs);
        online.push(Method::Tobs, p_tobs);
        online.push(Method::Hobs, p_hobs);
    }

    let mut online_trace = ForecastTrace::new(stream.start, outcomes, stream.truth.clone())?;
    for m in ONLINE_METHODS {
        online_trace.insert(m, online.take(m))?;
    }
    let eval_start = stream.start + t_cal;
    let mut eval = online_trace.window(eval_start, online_trace.end())?;
    for m in [
        Method::Fps,
        Method::Wps,
        Method::Fbs,
        Method::Wbs,
        Method::Whb,
        Method::Twhb,
    ] {
        eval.insert(m, batch.take(m))?;
    }
    Ok(ReplicationResult {
        online: online_trace,
        eval,
    })
}

/// Snapshot times in the test-stream clock: `T_cal + 2W`, then every
/// `stride`, always ending at `T`.
pub fn snapshot_times(t_cal: usize, window: usize, stride: usize, len: usize) -> Vec<usize> {
    let first = t_cal + 2 * window;
    if first > len {
        return Vec::new();
    }
    let mut out: Vec<usize> = (first..=len).step_by(stride).collect();
    if out.last() != Some(&len) {
        out.push(len);
    }
    out
}

/// Cumulative CE and SHP of one column from the first evaluated step up to
/// each snapshot. `times` use the test clock; the trace starts at `T_cal + 1`.
fn cumulative_metrics(
    forecasts: &[f64],
    outcomes: &[u8],
    t_cal: usize,
    times: &[usize],
    scheme: BinningScheme,
) -> (Vec<f64>, Vec<f64>) {
    let mut stats = BinStats::new(scheme);
    let (mut ce, mut shp) = (
        Vec::with_capacity(times.len()),
        Vec::with_capacity(times.len()),
    );
    let mut next = 0;
    for (k, (&p, &y)) in forecasts.iter().zip(outcomes).enumerate() {
        stats.push(p, y);
        let tau = t_cal + k + 1;
        while next < times.len() && times[next] == tau {
            ce.push(stats.calibration_error());
            shp.push(stats.sharpness());
            next += 1;
        }
    }
    (ce, shp)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

impl MeanStd {
    /// Mean and sample standard deviation (0 for a single value).
    pub fn of(values: &[f64]) -> Self {
        let n = values.len() as f64;
        if values.is_empty() {
            return Self {
                mean: f64::NAN,
                std: f64::NAN,
            };
        }
        let mean = values.iter().sum::<f64>() / n;
        let std = if values.len() > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        Self { mean, std }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSeries {
    pub method: Method,
    pub ce: Vec<MeanStd>,
    pub shp: Vec<MeanStd>,
}

/// Metrics of a method over the whole evaluated range, across replications.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinalMetrics {
    pub method: Method,
    pub ce: MeanStd,
    pub shp: MeanStd,
    pub refinement: MeanStd,
    pub brier: MeanStd,
    pub true_ce: Option<MeanStd>,
    pub true_accuracy: Option<MeanStd>,
}

/// Truth-based metrics on a window of global time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthWindow {
    pub method: Method,
    pub from: usize,
    pub to: usize,
    pub accuracy: MeanStd,
    pub ce: MeanStd,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegretSummary {
    pub rounds: usize,
    pub mean_regret: f64,
    pub max_regret: f64,
    /// Smallest per-replication slack `bound − regret`.
    pub min_slack: f64,
    pub mean_bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub stream: String,
    pub epsilon: f64,
    pub replications: usize,
    pub master_seed: u64,
    pub t_train: usize,
    pub t_cal: usize,
    pub window: usize,
    /// Test-stream clock.
    pub timestamps: Vec<usize>,
    pub series: Vec<MethodSeries>,
    pub final_metrics: Vec<FinalMetrics>,
    pub truth_windows: Vec<TruthWindow>,
    pub regret: RegretSummary,
    /// Replications whose base model stopped before the gradient tolerance.
    pub base_not_converged: usize,
    pub ingest: Option<IngestReport>,
}

impl RunReport {
    pub fn series(&self, method: Method) -> Option<&MethodSeries> {
        self.series.iter().find(|s| s.method == method)
    }

    pub fn final_metrics(&self, method: Method) -> Option<&FinalMetrics> {
        self.final_metrics.iter().find(|s| s.method == method)
    }

    pub fn truth_window(&self, method: Method, from: usize, to: usize) -> Option<&TruthWindow> {
        self.truth_windows
            .iter()
            .find(|w| w.method == method && w.from == from && w.to == to)
    }
}

struct RepSummary {
    ce: Vec<Vec<f64>>,
    shp: Vec<Vec<f64>>,
    finals: Vec<MetricReport>,
    windows: Vec<Vec<(f64, f64)>>,
    regret: f64,
    bound: f64,
    base_converged: bool,
    ingest: Option<IngestReport>,
}

/// `[start, start + W − 1]` blocks of global time covering the test stream.
fn truth_window_bounds(start: usize, len: usize, width: usize) -> Vec<(usize, usize)> {
    (0..len.div_ceil(width))
        .map(|k| {
            let from = start + k * width;
            (from, (from + width - 1).min(start + len - 1))
        })
        .collect()
}

fn summarize(config: &ExperimentConfig, rep: u64, times: &[usize]) -> Result<RepSummary> {
    let stream = realize(&config.stream, config.master_seed, rep)?;
    let result = run_replication(&stream, config, rep)?;
    let scheme = config.scheme()?;
    let spec = &config.stream;
    let eval = &result.eval;

    let mut ce = Vec::new();
    let mut shp = Vec::new();
    let mut finals = Vec::new();
    let mut windows = Vec::new();
    let bounds = truth_window_bounds(result.online.start(), result.online.len(), spec.window);
    for &m in &config.methods {
        let col = eval.column(m).expect("all pipeline columns present");
        let (c, s) = cumulative_metrics(col, eval.outcomes(), spec.t_cal, times, scheme);
        ce.push(c);
        shp.push(s);
        finals.push(MetricReport::compute(
            col,
            eval.outcomes(),
            eval.truth(),
            scheme,
        )?);
        let mut per_window = Vec::new();
        if let (Some(truth), Some(col)) = (result.online.truth(), result.online.column(m)) {
            for &(from, to) in &bounds {
                let (a, b) = (from - result.online.start(), to - result.online.start() + 1);
                per_window.push((
                    true_accuracy(&col[a..b], Some(&truth[a..b]))?,
                    true_ce(&col[a..b], Some(&truth[a..b]))?,
                ));
            }
        }
        windows.push(per_window);
    }

    let data: Vec<Labeled> = result
        .online
        .base_scores()?
        .iter()
        .zip(result.online.outcomes())
        .map(|(&s, &y)| Ok((crate::prob::ClippedScore::new(s)?, y)))
        .collect::<Result<_>>()?;
    let oracle = fit_platt_batch(&data)?;
    let report = regret(&result.online, Method::Ops, &oracle)?;
    Ok(RepSummary {
        ce,
        shp,
        finals,
        windows,
        regret: report.regret,
        bound: ons_regret_bound(oracle.norm(), report.rounds),
        base_converged: stream.base.as_ref().is_none_or(|b| b.converged),
        ingest: stream.ingest,
    })
}

/// Runs every replication and aggregates per method.
pub fn run_pipeline(config: &ExperimentConfig) -> Result<RunReport> {
    config.validate()?;
    let spec = &config.stream;
    let probe_len = match spec.t_test {
        Some(t) => t,
        None => realize(spec, config.master_seed, 0)?.len(),
    };
    let times = snapshot_times(spec.t_cal, spec.window, config.eval_stride, probe_len);
    let reps: Vec<RepSummary> = (0..config.replications as u64)
        .into_par_iter()
        .map(|rep| summarize(config, rep, &times))
        .collect::<Result<_>>()?;

    let collect = |f: &dyn Fn(&RepSummary) -> f64| -> MeanStd {
        MeanStd::of(&reps.iter().map(f).collect::<Vec<_>>())
    };
    let mut series = Vec::new();
    let mut final_metrics = Vec::new();
    let mut truth_windows = Vec::new();
    let start = spec.t_train + 1;
    let bounds = truth_window_bounds(start, probe_len, spec.window);
    for (j, &method) in config.methods.iter().enumerate() {
        series.push(MethodSeries {
            method,
            ce: (0..times.len()).map(|k| collect(&|r| r.ce[j][k])).collect(),
            shp: (0..times.len())
                .map(|k| collect(&|r| r.shp[j][k]))
                .collect(),
        });
        let has_truth = reps[0].finals[j].true_ce.is_some();
        final_metrics.push(FinalMetrics {
            method,
            ce: collect(&|r| r.finals[j].ce),
            shp: collect(&|r| r.finals[j].shp),
            refinement: collect(&|r| r.finals[j].refinement),
            brier: collect(&|r| r.finals[j].brier),
            true_ce: has_truth.then(|| collect(&|r| r.finals[j].true_ce.unwrap_or(f64::NAN))),
            true_accuracy: has_truth
                .then(|| collect(&|r| r.finals[j].true_accuracy.unwrap_or(f64::NAN))),
        });
        if !reps[0].windows[j].is_empty() {
            for (k, &(from, to)) in bounds.iter().enumerate() {
                truth_windows.push(TruthWindow {
                    method,
                    from,
                    to,
                    accuracy: collect(&|r| r.windows[j][k].0),
                    ce: collect(&|r| r.windows[j][k].1),
                });
            }
        }
    }
    let regrets: Vec<f64> = reps.iter().map(|r| r.regret).collect();
    let regret = RegretSummary {
        rounds: probe_len,
        mean_regret: MeanStd::of(&regrets).mean,
        max_regret: regrets.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        min_slack: reps
            .iter()
            .map(|r| r.bound - r.regret)
            .fold(f64::INFINITY, f64::min),
        mean_bound: reps.iter().map(|r| r.bound).sum::<f64>() / reps.len() as f64,
    };
    Ok(RunReport {
        stream: spec.name(),
        epsilon: config.epsilon,
        replications: config.replications,
        master_seed: config.master_seed,
        t_train: spec.t_train,
        t_cal: spec.t_cal,
        window: spec.window,
        timestamps: times,
        series,
        final_metrics,
        truth_windows,
        regret,
        base_not_converged: reps.iter().filter(|r| !r.base_converged).count(),
        ingest: reps[0].ingest.clone(),
    })
}
