use std::fs;
use std::io::Write;
use std::path::Path;

use calibeat::config::RunSettings;
use calibeat::datagen::{read_csv, realize, stream_order, CsvSource, CsvTable, StreamSpec};
use calibeat::output::write_run_outputs;
use calibeat::pipeline::{run_pipeline, run_replication, ExperimentConfig};
use calibeat::prob::sigmoid;
use calibeat::trace::Method;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Age drives both the drift (when sorted by it) and the label.
fn write_bank_like(path: &Path, rows: usize) {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut f = fs::File::create(path).unwrap();
    writeln!(f, "age,income,job,y").unwrap();
    for i in 0..rows {
        let age: u32 = rng.random_range(18..80);
        let income: f64 = rng.random_range(0.0..2.0);
        let job = ["admin", "tech", "services"][i % 3];
        let p = sigmoid(0.08 * (f64::from(age) - 50.0) + income - 1.0).value();
        let y = u8::from(rng.random_bool(p));
        if i % 97 == 0 {
            writeln!(f, "{age},NA,{job},{y}").unwrap();
        } else {
            writeln!(f, "{age},{income:.4},{job},{y}").unwrap();
        }
    }
}

fn source(path: &Path, sortby: Option<&str>) -> CsvSource {
    CsvSource {
        path: path.to_path_buf(),
        label: "y".into(),
        sortby: sortby.map(String::from),
        score: None,
    }
}

fn config(src: CsvSource) -> ExperimentConfig {
    let mut c = ExperimentConfig::new(StreamSpec::csv(src));
    c.replications = 3;
    c
}

#[test]
fn csv_pipeline_reports_ingestion_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bank.csv");
    write_bank_like(&path, 4000);
    let cfg = config(source(&path, Some("age")));
    let a = run_pipeline(&cfg).unwrap();
    let b = run_pipeline(&cfg).unwrap();
    assert_eq!(a, b);
    let ingest = a.ingest.as_ref().unwrap();
    assert_eq!(ingest.skipped_columns, vec!["job"]);
    assert_eq!(ingest.dropped_rows, 4000_usize.div_ceil(97));
    assert_eq!(ingest.rows, 4000 - ingest.dropped_rows);
    // Test stream holds every row after the training block.
    assert_eq!(*a.timestamps.last().unwrap(), ingest.rows - 1000);
    assert_eq!(a.base_not_converged, 0);
}

#[test]
fn sorted_stream_drifts_in_age() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bank.csv");
    write_bank_like(&path, 3500);
    let spec = StreamSpec::csv(source(&path, Some("age")));
    let stream = realize(&spec, 0, 0).unwrap();
    let shuffled = realize(&StreamSpec::csv(source(&path, None)), 0, 0).unwrap();
    let rate = |s: &calibeat::datagen::Stream, from: usize, to: usize| {
        let calibeat::datagen::Outcomes::Fixed(y) = &s.outcomes else {
            panic!()
        };
        y[from..to].iter().map(|&v| f64::from(v)).sum::<f64>() / (to - from) as f64
    };
    let n = stream.len();
    // Older customers come last in drift mode, and they say yes more often.
    assert!(rate(&stream, n - 500, n) - rate(&stream, 0, 500) > 0.3);
    assert!((rate(&shuffled, n - 500, n) - rate(&shuffled, 0, 500)).abs() < 0.15);
}

#[test]
fn score_column_bypasses_the_base_model() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("scored.csv");
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut f = fs::File::create(&path).unwrap();
    writeln!(f, "x,score,y").unwrap();
    for _ in 0..3000 {
        let s: f64 = rng.random_range(0.0..1.0);
        writeln!(
            f,
            "{},{s},{}",
            rng.random_range(0.0..1.0),
            u8::from(rng.random_bool(s))
        )
        .unwrap();
    }
    drop(f);
    let mut src = source(&path, None);
    src.score = Some("score".into());
    let spec = StreamSpec::csv(src);
    let stream = realize(&spec, 4, 0).unwrap();
    assert!(stream.base.is_none());
    let table = read_csv(&CsvSource {
        score: Some("score".into()),
        ..source(&path, None)
    })
    .unwrap();
    assert_eq!(table.feature_names, vec!["x"]);
    let mut cfg = ExperimentConfig::new(spec);
    cfg.methods = vec![Method::Bm];
    cfg.replications = 1;
    cfg.master_seed = 4;
    let online = run_replication(&stream, &cfg, 0).unwrap().online;
    let expected: Vec<f64> = stream.scores.iter().map(|s| s.value()).collect();
    assert_eq!(online.column(Method::Bm).unwrap(), expected.as_slice());
}

#[test]
fn short_csv_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("short.csv");
    write_bank_like(&path, 2500);
    assert!(realize(&StreamSpec::csv(source(&path, None)), 0, 0).is_err());
}

#[test]
fn identical_config_files_give_identical_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("bank.csv");
    write_bank_like(&csv, 3200);
    let text = format!(
        "[stream]\ncsv = {:?}\nlabel = \"y\"\nsortby = \"age\"\n\n[experiment]\nmethods = [\"BM\", \"OPS\", \"TOPS\", \"HOPS\", \"WPS\"]\nreplications = 4\nseed = 7\n",
        csv.display().to_string()
    );
    let mut outputs = Vec::new();
    for run in ["a", "b"] {
        let settings = RunSettings::parse(&text).unwrap();
        let report = run_pipeline(&settings.experiment().unwrap()).unwrap();
        let files = write_run_outputs(&report, &dir.path().join(run)).unwrap();
        outputs.push(
            files
                .iter()
                .map(|p| fs::read(p).unwrap())
                .collect::<Vec<_>>(),
        );
    }
    assert_eq!(outputs[0], outputs[1]);
}

fn keyed(keys: &[i32]) -> CsvTable {
    CsvTable {
        labels: vec![0; keys.len()],
        features: vec![vec![]; keys.len()],
        sort_key: Some(keys.iter().map(|&k| f64::from(k)).collect()),
        ..CsvTable::default()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn noisy_sort_is_a_near_sorted_permutation(keys in proptest::collection::vec(-50i32..50, 1..200), seed in any::<u64>()) {
        let table = keyed(&keys);
        let order = stream_order(&table, &mut ChaCha8Rng::seed_from_u64(seed));
        let mut seen = order.clone();
        seen.sort_unstable();
        prop_assert_eq!(seen, (0..keys.len()).collect::<Vec<_>>());
        // Noise is at most one unit per key, so inversions span at most 2.
        for w in order.windows(2) {
            prop_assert!(keys[w[0]] <= keys[w[1]] + 2);
        }
        let again = stream_order(&table, &mut ChaCha8Rng::seed_from_u64(seed));
        prop_assert_eq!(order, again);
    }
}
