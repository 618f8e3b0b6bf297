//! Writes run artifacts. Given the same report, every file is byte-identical.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::Result;
use crate::pipeline::{MeanStd, RunReport};
use crate::plot::{line_chart, Series};
use crate::trace::{ForecastTrace, Method};

fn series_csv(times: &[usize], values: &[MeanStd]) -> String {
    let mut out = String::from("t,mean,std\n");
    for (t, v) in times.iter().zip(values) {
        let _ = writeln!(out, "{t},{},{}", v.mean, v.std);
    }
    out
}

/// `<method>_ce.csv`, `<method>_shp.csv`, `ce.svg`, `shp.svg` and
/// `report.json` under `dir`. Returns the written paths.
pub fn write_run_outputs(report: &RunReport, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let mut put = |name: String, body: &str| -> Result<()> {
        let path = dir.join(name);
        fs::write(&path, body)?;
        written.push(path);
        Ok(())
    };
    let x: Vec<f64> = report.timestamps.iter().map(|&t| t as f64).collect();
    let mut ce_lines = Vec::new();
    let mut shp_lines = Vec::new();
    for s in &report.series {
        let name = s.method.name().to_ascii_lowercase();
        put(
            format!("{name}_ce.csv"),
            &series_csv(&report.timestamps, &s.ce),
        )?;
        put(
            format!("{name}_shp.csv"),
            &series_csv(&report.timestamps, &s.shp),
        )?;
        ce_lines.push(Series {
            name: s.method.name().into(),
            values: s.ce.iter().map(|v| v.mean).collect(),
        });
        shp_lines.push(Series {
            name: s.method.name().into(),
            values: s.shp.iter().map(|v| v.mean).collect(),
        });
    }
    let title = |metric: &str| {
        format!(
            "{metric} on {} (mean of {} runs)",
            report.stream, report.replications
        )
    };
    put(
        "ce.svg".into(),
        &line_chart(&title("CE"), "calibration error", &x, &ce_lines),
    )?;
    put(
        "shp.svg".into(),
        &line_chart(&title("SHP"), "sharpness", &x, &shp_lines),
    )?;
    put(
        "report.json".into(),
        &(serde_json::to_string_pretty(report)? + "\n"),
    )?;
    Ok(written)
}

/// `f99.csv` (t, y, forecast) and `f99.svg` for a climatology trace.
pub fn write_climatology_outputs(trace: &ForecastTrace, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let forecasts = trace.column(Method::F99).unwrap_or(&[]);
    let mut csv = String::from("t,y,forecast\n");
    for (i, (&y, &p)) in trace.outcomes().iter().zip(forecasts).enumerate() {
        let _ = writeln!(csv, "{},{y},{p}", trace.start() + i);
    }
    let x: Vec<f64> = (0..trace.len())
        .map(|i| (trace.start() + i) as f64)
        .collect();
    let mut running = Vec::with_capacity(trace.len());
    let mut sum = 0.0;
    for (i, &y) in trace.outcomes().iter().enumerate() {
        sum += f64::from(y);
        running.push(sum / (i + 1) as f64);
    }
    let svg = line_chart(
        "Hedged forecasts without covariates",
        "probability",
        &x,
        &[
            Series {
                name: "F99".into(),
                values: forecasts.to_vec(),
            },
            Series {
                name: "running mean of y".into(),
                values: running,
            },
        ],
    );
    let csv_path = dir.join("f99.csv");
    let svg_path = dir.join("f99.svg");
    fs::write(&csv_path, csv)?;
    fs::write(&svg_path, svg)?;
    Ok(vec![csv_path, svg_path])
}
