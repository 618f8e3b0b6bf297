//! Executable checks of the guarantees behind OPS, TOPS and HOPS, reported
//! as measured-vs-bound rows.

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::datagen::{realize, AdversaryTarget, StreamSpec, SyntheticKind};
use crate::error::{CalibError, Result};
use crate::metrics::{brier, calibration_error, sharpness};
use crate::ons::{ons_regret_bound, regret};
use crate::pipeline::{run_replication, ExperimentConfig, MeanStd};
use crate::prob::{BinningScheme, ClippedScore};
use crate::scalers::{fit_platt_batch, Labeled};
use crate::trace::{ForecastTrace, Method};

/// Largest SHP loss tracking can incur: `ε + ε²/4 + (ln T + 1)/(εT)`.
pub fn sharpness_slack(epsilon: f64, rounds: usize) -> f64 {
    let t = rounds.max(1) as f64;
    epsilon + epsilon * epsilon / 4.0 + (t.ln() + 1.0) / (epsilon * t)
}

/// Expected CE of hedged forecasts against any outcome sequence:
/// `ε/2 + 2√(1/(ε²T))`.
pub fn hops_ce_bound(epsilon: f64, rounds: usize) -> f64 {
    let t = rounds.max(1) as f64;
    epsilon / 2.0 + 2.0 * (1.0 / (epsilon * epsilon * t)).sqrt()
}

/// Extra Brier score hedging may cost: `2ε + ε²/4 + (ln T + 1)/(ε²T)`.
pub fn brier_slack(epsilon: f64, rounds: usize) -> f64 {
    let t = rounds.max(1) as f64;
    2.0 * epsilon + epsilon * epsilon / 4.0 + (t.ln() + 1.0) / (epsilon * epsilon * t)
}

/// Sampling tolerance added to the Brier comparison.
pub const BRIER_TOLERANCE: f64 = 0.01;

/// CE a deterministic forecaster must at least reach on its own adversarial
/// stream.
pub const DETERMINISTIC_CE_FLOOR: f64 = 0.4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoremSuiteConfig {
    pub master_seed: u64,
    /// Binning for the CE and Brier checks.
    pub epsilon: f64,
    pub sharpness_epsilons: Vec<f64>,
    pub synthetic: Vec<SyntheticKind>,
    pub synthetic_seeds: usize,
    pub adversarial_seeds: usize,
    pub adversarial_len: usize,
}

impl Default for TheoremSuiteConfig {
    fn default() -> Self {
        Self {
            master_seed: 0,
            epsilon: 0.1,
            sharpness_epsilons: vec![0.05, 0.1, 0.2],
            synthetic: SyntheticKind::ALL.to_vec(),
            synthetic_seeds: 20,
            adversarial_seeds: 100,
            adversarial_len: 10_000,
        }
    }
}

impl TheoremSuiteConfig {
    pub fn validate(&self) -> Result<()> {
        BinningScheme::new(self.epsilon)?;
        for &e in &self.sharpness_epsilons {
            BinningScheme::new(e)?;
        }
        if self.synthetic_seeds == 0 && self.adversarial_seeds == 0 {
            return Err(CalibError::Config(
                "theorem suite needs at least one seed".into(),
            ));
        }
        Ok(())
    }
}

/// One row of the suite. `measured ≤ bound` unless `lower` is set, in which
/// case the requirement is `measured ≥ bound`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoremCheck {
    pub check: String,
    pub case: String,
    pub measured: f64,
    pub bound: f64,
    pub lower: bool,
    pub pass: bool,
}

impl TheoremCheck {
    fn upper(check: &str, case: String, measured: f64, bound: f64) -> Self {
        Self {
            check: check.into(),
            case,
            measured,
            bound,
            lower: false,
            pass: measured <= bound,
        }
    }

    fn lower(check: &str, case: String, measured: f64, bound: f64) -> Self {
        Self {
            check: check.into(),
            case,
            measured,
            bound,
            lower: true,
            pass: measured >= bound,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TheoremReport {
    pub checks: Vec<TheoremCheck>,
}

impl TheoremReport {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn find(&self, check: &str, case: &str) -> Option<&TheoremCheck> {
        self.checks
            .iter()
            .find(|c| c.check == check && c.case == case)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = std::fs::File::create(path)?;
        writeln!(out, "check,case,measured,relation,bound,pass")?;
        for c in &self.checks {
            let relation = if c.lower { ">=" } else { "<=" };
            writeln!(
                out,
                "{},{},{:.6},{},{:.6},{}",
                c.check, c.case, c.measured, relation, c.bound, c.pass
            )?;
        }
        Ok(())
    }
}

fn online_trace(
    spec: &StreamSpec,
    epsilon: f64,
    master_seed: u64,
    rep: u64,
) -> Result<ForecastTrace> {
    let mut config = ExperimentConfig::new(spec.clone());
    config.epsilon = epsilon;
    config.master_seed = master_seed;
    config.replications = 1;
    let stream = realize(spec, master_seed, rep)?;
    Ok(run_replication(&stream, &config, rep)?.online)
}

/// `(regret, bound)` of OPS against the best Platt map fitted in hindsight on
/// the same trace.
pub fn ops_regret(trace: &ForecastTrace) -> Result<(f64, f64)> {
    let data: Vec<Labeled> = trace
        .base_scores()?
        .iter()
        .zip(trace.outcomes())
        .map(|(&s, &y)| Ok((ClippedScore::new(s)?, y)))
        .collect::<Result<_>>()?;
    let oracle = fit_platt_batch(&data)?;
    let report = regret(trace, Method::Ops, &oracle)?;
    Ok((
        report.regret,
        ons_regret_bound(oracle.norm(), report.rounds),
    ))
}

/// `(SHP(TOPS), SHP(OPS) − slack)` on one trace.
pub fn tracking_sharpness(trace: &ForecastTrace, epsilon: f64) -> Result<(f64, f64)> {
    let scheme = BinningScheme::new(epsilon)?;
    let column = |m: Method| {
        trace
            .column(m)
            .ok_or_else(|| CalibError::Config(format!("trace has no {m} column")))
    };
    let tops = sharpness(column(Method::Tops)?, trace.outcomes(), scheme)?;
    let ops = sharpness(column(Method::Ops)?, trace.outcomes(), scheme)?;
    Ok((tops, ops - sharpness_slack(epsilon, trace.len())))
}

fn column_metric(
    trace: &ForecastTrace,
    m: Method,
    f: impl Fn(&[f64], &[u8]) -> Result<f64>,
) -> Result<f64> {
    let col = trace
        .column(m)
        .ok_or_else(|| CalibError::Config(format!("trace has no {m} column")))?;
    f(col, trace.outcomes())
}

struct SyntheticRun {
    regret: f64,
    bound: f64,
    brier_ops: f64,
    brier_hops: f64,
    /// Per sharpness ε: (SHP(TOPS), lower bound).
    sharpness: Vec<(f64, f64)>,
}

fn synthetic_run(
    kind: SyntheticKind,
    config: &TheoremSuiteConfig,
    rep: u64,
) -> Result<SyntheticRun> {
    let spec = StreamSpec::synthetic(kind);
    let trace = online_trace(&spec, config.epsilon, config.master_seed, rep)?;
    let (regret, bound) = ops_regret(&trace)?;
    let sharpness = config
        .sharpness_epsilons
        .iter()
        .map(|&e| {
            if e == config.epsilon {
                tracking_sharpness(&trace, e)
            } else {
                tracking_sharpness(&online_trace(&spec, e, config.master_seed, rep)?, e)
            }
        })
        .collect::<Result<_>>()?;
    Ok(SyntheticRun {
        regret,
        bound,
        brier_ops: column_metric(&trace, Method::Ops, brier)?,
        brier_hops: column_metric(&trace, Method::Hops, brier)?,
        sharpness,
    })
}

struct AdversarialRun {
    ce_hops: f64,
    brier_hops: f64,
    /// OPS on the stream chosen against HOPS.
    brier_ops: f64,
    /// OPS on the stream chosen against OPS itself.
    ce_ops_attacked: f64,
    sharpness: Vec<(f64, f64)>,
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    MeanStd::of(&values.collect::<Vec<_>>()).mean
}

fn sharpness_rows(case: &str, epsilons: &[f64], runs: &[Vec<(f64, f64)>]) -> Vec<TheoremCheck> {
    epsilons
        .iter()
        .enumerate()
        .map(|(k, &e)| {
            // Report the run with the least margin.
            let (tops, floor) = runs
                .iter()
                .map(|r| r[k])
                .min_by(|a, b| (a.0 - a.1).total_cmp(&(b.0 - b.1)))
                .expect("at least one run");
            let mut row =
                TheoremCheck::lower("tracking_sharpness", format!("{case}/eps={e}"), tops, floor);
            row.pass = runs.iter().all(|r| r[k].0 >= r[k].1);
            row
        })
        .collect()
}

/// Runs every check. Synthetic streams use their default lengths; the
/// adversarial runs use `adversarial_len` rounds.
pub fn run_theorem_suite(config: &TheoremSuiteConfig) -> Result<TheoremReport> {
    config.validate()?;
    let eps = config.epsilon;
    let mut checks = Vec::new();

    if config.synthetic_seeds > 0 {
        for &kind in &config.synthetic {
            let spec = StreamSpec::synthetic(kind);
            let rounds = spec.t_test.expect("synthetic streams have a length");
            let runs: Vec<SyntheticRun> = (0..config.synthetic_seeds as u64)
                .into_par_iter()
                .map(|rep| synthetic_run(kind, config, rep))
                .collect::<Result<_>>()?;
            let worst = runs
                .iter()
                .max_by(|a, b| (a.regret - a.bound).total_cmp(&(b.regret - b.bound)))
                .expect("at least one run");
            let mut row =
                TheoremCheck::upper("ops_regret", kind.name().into(), worst.regret, worst.bound);
            row.pass = runs.iter().all(|r| r.regret <= r.bound);
            checks.push(row);

            let shp: Vec<Vec<(f64, f64)>> = runs.iter().map(|r| r.sharpness.clone()).collect();
            checks.extend(sharpness_rows(
                kind.name(),
                &config.sharpness_epsilons,
                &shp,
            ));

            let ops = mean(runs.iter().map(|r| r.brier_ops));
            let hops = mean(runs.iter().map(|r| r.brier_hops));
            checks.push(TheoremCheck::upper(
                "hops_brier",
                kind.name().into(),
                hops,
                ops + brier_slack(eps, rounds) + BRIER_TOLERANCE,
            ));
        }
    }

    if config.adversarial_seeds > 0 {
        let rounds = config.adversarial_len;
        let spec_for = |target| {
            let mut spec = StreamSpec::adversarial(target);
            spec.t_test = Some(rounds);
            spec
        };
        let hops_spec = spec_for(AdversaryTarget::Hops);
        let ops_spec = spec_for(AdversaryTarget::Ops);
        let runs: Vec<AdversarialRun> = (0..config.adversarial_seeds as u64)
            .into_par_iter()
            .map(|rep| {
                let scheme = BinningScheme::new(eps)?;
                let ce = |p: &[f64], y: &[u8]| calibration_error(p, y, scheme);
                let hedged = online_trace(&hops_spec, eps, config.master_seed, rep)?;
                let attacked = online_trace(&ops_spec, eps, config.master_seed, rep)?;
                Ok(AdversarialRun {
                    ce_hops: column_metric(&hedged, Method::Hops, ce)?,
                    brier_hops: column_metric(&hedged, Method::Hops, brier)?,
                    brier_ops: column_metric(&hedged, Method::Ops, brier)?,
                    ce_ops_attacked: column_metric(&attacked, Method::Ops, ce)?,
                    sharpness: vec![
                        tracking_sharpness(&hedged, eps)?,
                        tracking_sharpness(&attacked, eps)?,
                    ],
                })
            })
            .collect::<Result<_>>()?;
        let case = format!("adversarial/T={rounds}");
        checks.push(TheoremCheck::upper(
            "hops_ce",
            case.clone(),
            mean(runs.iter().map(|r| r.ce_hops)),
            hops_ce_bound(eps, rounds),
        ));
        checks.push(TheoremCheck::lower(
            "ops_adversarial_ce",
            case.clone(),
            mean(runs.iter().map(|r| r.ce_ops_attacked)),
            DETERMINISTIC_CE_FLOOR,
        ));
        checks.push(TheoremCheck::upper(
            "hops_brier",
            case.clone(),
            mean(runs.iter().map(|r| r.brier_hops)),
            mean(runs.iter().map(|r| r.brier_ops)) + brier_slack(eps, rounds) + BRIER_TOLERANCE,
        ));
        // Both adversarial streams, flattened into one set of runs.
        let shp: Vec<Vec<(f64, f64)>> = runs
            .iter()
            .flat_map(|r| r.sharpness.iter().map(|&v| vec![v]))
            .collect();
        checks.extend(sharpness_rows(&case, &[eps], &shp));
    }
    Ok(TheoremReport { checks })
}
