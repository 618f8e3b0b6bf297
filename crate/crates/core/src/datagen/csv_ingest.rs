//! Real-data CSV ingestion with optional drift induction by noisy sorting.

use std::collections::HashMap;
use std::path::PathBuf;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{CalibError, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CsvSource {
    pub path: PathBuf,
    pub label: String,
    #[serde(default)]
    pub sortby: Option<String>,
    #[serde(default)]
    pub score: Option<String>,
}

/// Numeric content of a CSV after cleaning, in file order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CsvTable {
    pub feature_names: Vec<String>,
    pub features: Vec<Vec<f64>>,
    pub labels: Vec<u8>,
    pub scores: Option<Vec<f64>>,
    pub sort_key: Option<Vec<f64>>,
    /// Rows dropped for a missing value in a used column.
    pub dropped_rows: usize,
    /// Non-numeric columns left out of the features.
    pub skipped_columns: Vec<String>,
}

impl CsvTable {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Rows rearranged as `order[k]` becomes row `k`.
    pub fn reordered(&self, order: &[usize]) -> CsvTable {
        let pick = |v: &Vec<f64>| order.iter().map(|&i| v[i]).collect::<Vec<_>>();
        CsvTable {
            feature_names: self.feature_names.clone(),
            features: order.iter().map(|&i| self.features[i].clone()).collect(),
            labels: order.iter().map(|&i| self.labels[i]).collect(),
            scores: self.scores.as_ref().map(pick),
            sort_key: self.sort_key.as_ref().map(pick),
            dropped_rows: self.dropped_rows,
            skipped_columns: self.skipped_columns.clone(),
        }
    }
}

fn is_missing(cell: &str) -> bool {
    let c = cell.trim();
    c.is_empty() || ["na", "nan", "null", "none", "?"].contains(&c.to_ascii_lowercase().as_str())
}

fn parse(cell: &str) -> Option<f64> {
    cell.trim().parse::<f64>().ok().filter(|v| v.is_finite())
}

pub fn read_csv(source: &CsvSource) -> Result<CsvTable> {
    let csv_err = |source_err| CalibError::Csv {
        path: source.path.clone(),
        source: source_err,
    };
    let mut reader = csv::Reader::from_path(&source.path).map_err(csv_err)?;
    let headers: Vec<String> = reader
        .headers()
        .map_err(csv_err)?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    let mut rows: Vec<csv::StringRecord> = Vec::new();
    for record in reader.records() {
        rows.push(record.map_err(csv_err)?);
    }

    let index: HashMap<&str, usize> = headers
        .iter()
        .enumerate()
        .map(|(i, h)| (h.as_str(), i))
        .collect();
    let column = |name: &str| -> Result<usize> {
        index
            .get(name)
            .copied()
            .ok_or_else(|| CalibError::MissingColumn(name.to_string()))
    };
    let label_col = column(&source.label)?;
    let score_col = source.score.as_deref().map(column).transpose()?;
    let sort_col = source.sortby.as_deref().map(column).transpose()?;

    let numeric: Vec<bool> = (0..headers.len())
        .map(|j| {
            rows.iter()
                .filter_map(|r| r.get(j))
                .filter(|c| !is_missing(c))
                .all(|c| parse(c).is_some())
        })
        .collect();
    for (name, col) in [
        (Some(&source.label), Some(label_col)),
        (source.score.as_ref(), score_col),
        (source.sortby.as_ref(), sort_col),
    ] {
        if let (Some(name), Some(col)) = (name, col) {
            if !numeric[col] {
                return Err(CalibError::Config(format!(
                    "column `{name}` is not numeric"
                )));
            }
        }
    }
    let feature_cols: Vec<usize> = (0..headers.len())
        .filter(|&j| numeric[j] && j != label_col && Some(j) != score_col)
        .collect();
    let skipped_columns = (0..headers.len())
        .filter(|&j| !numeric[j])
        .map(|j| headers[j].clone())
        .collect();

    let mut table = CsvTable {
        feature_names: feature_cols.iter().map(|&j| headers[j].clone()).collect(),
        scores: score_col.map(|_| Vec::new()),
        sort_key: sort_col.map(|_| Vec::new()),
        skipped_columns,
        ..CsvTable::default()
    };
    let mut used: Vec<usize> = feature_cols.clone();
    used.push(label_col);
    used.extend(score_col);
    used.extend(sort_col);
    for row in &rows {
        let cell = |j: usize| row.get(j).filter(|c| !is_missing(c)).and_then(parse);
        if used.iter().any(|&j| cell(j).is_none()) {
            table.dropped_rows += 1;
            continue;
        }
        let y = cell(label_col).expect("checked above");
        if y != 0.0 && y != 1.0 {
            return Err(CalibError::NonBinaryOutcome(y));
        }
        table.labels.push(y as u8);
        table.features.push(
            feature_cols
                .iter()
                .map(|&j| cell(j).expect("checked above"))
                .collect(),
        );
        if let (Some(scores), Some(j)) = (table.scores.as_mut(), score_col) {
            let s = cell(j).expect("checked above");
            if !(0.0..=1.0).contains(&s) {
                return Err(CalibError::InvalidProbability(s));
            }
            scores.push(s);
        }
        if let (Some(keys), Some(j)) = (table.sort_key.as_mut(), sort_col) {
            keys.push(cell(j).expect("checked above"));
        }
    }
    Ok(table)
}

/// Row order for the stream. With a sort key, each key gets independent
/// uniform noise from {−1, 0, 1} and rows are stably sorted ascending;
/// otherwise rows are shuffled uniformly.
pub fn stream_order<R: Rng + ?Sized>(table: &CsvTable, rng: &mut R) -> Vec<usize> {
    let mut order: Vec<usize> = (0..table.len()).collect();
    match &table.sort_key {
        Some(keys) => {
            let noisy: Vec<f64> = keys
                .iter()
                .map(|&k| k + f64::from(rng.random_range(-1i8..=1)))
                .collect();
            order.sort_by(|&a, &b| noisy[a].total_cmp(&noisy[b]));
        }
        None => order.shuffle(rng),
    }
    order
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::io::Write;

    fn write(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    fn source(path: &std::path::Path, sortby: Option<&str>) -> CsvSource {
        CsvSource {
            path: path.to_path_buf(),
            label: "y".into(),
            sortby: sortby.map(String::from),
            score: None,
        }
    }

    #[test]
    fn parses_numeric_columns_and_drops_missing_rows() {
        let f = write("age,job,balance,y\n30,admin,100,0\n41,tech,,1\n25,admin,7.5,1\nNA,x,3,0\n");
        let table = read_csv(&source(f.path(), None)).unwrap();
        assert_eq!(table.feature_names, vec!["age", "balance"]);
        assert_eq!(table.skipped_columns, vec!["job"]);
        assert_eq!(table.dropped_rows, 2);
        assert_eq!(table.labels, vec![0, 1]);
        assert_eq!(table.features, vec![vec![30.0, 100.0], vec![25.0, 7.5]]);
    }

    #[test]
    fn reports_missing_and_malformed_columns() {
        let f = write("a,y\n1,0\n2,1\n");
        let mut src = source(f.path(), None);
        src.label = "target".into();
        assert!(matches!(read_csv(&src), Err(CalibError::MissingColumn(c)) if c == "target"));
        let f = write("a,y\n1,0\n2,3\n");
        assert!(matches!(
            read_csv(&source(f.path(), None)),
            Err(CalibError::NonBinaryOutcome(_))
        ));
        let f = write("a,y\n1,no\n2,yes\n");
        assert!(matches!(
            read_csv(&source(f.path(), None)),
            Err(CalibError::Config(_))
        ));
    }

    #[test]
    fn widely_spaced_sort_key_is_a_plain_sort() {
        let keys = [30.0, 3.0, 12.0, 27.0, 6.0, 21.0, 9.0, 0.0];
        let table = CsvTable {
            labels: vec![0; keys.len()],
            features: vec![vec![]; keys.len()],
            sort_key: Some(keys.to_vec()),
            ..CsvTable::default()
        };
        for seed in 0..20 {
            let order = stream_order(&table, &mut ChaCha8Rng::seed_from_u64(seed));
            let sorted: Vec<f64> = order.iter().map(|&i| keys[i]).collect();
            assert!(sorted.windows(2).all(|w| w[0] < w[1]));
        }
    }

    #[test]
    fn two_clusters_stay_separated() {
        let keys: Vec<f64> = (0..200)
            .map(|i| {
                if i % 2 == 0 {
                    20.0 + (i % 3) as f64
                } else {
                    60.0 - (i % 5) as f64
                }
            })
            .collect();
        let table = CsvTable {
            labels: vec![0; keys.len()],
            features: vec![vec![]; keys.len()],
            sort_key: Some(keys.clone()),
            ..CsvTable::default()
        };
        let order = stream_order(&table, &mut ChaCha8Rng::seed_from_u64(3));
        let first_b = order.iter().position(|&i| keys[i] > 40.0).unwrap();
        assert!(order[..first_b].iter().all(|&i| keys[i] < 40.0));
        assert!(order[first_b..].iter().all(|&i| keys[i] > 40.0));
    }

    #[test]
    fn shuffle_is_seeded() {
        let table = CsvTable {
            labels: vec![0; 50],
            features: vec![vec![]; 50],
            ..CsvTable::default()
        };
        let a = stream_order(&table, &mut ChaCha8Rng::seed_from_u64(8));
        let b = stream_order(&table, &mut ChaCha8Rng::seed_from_u64(8));
        assert_eq!(a, b);
        assert_ne!(a, (0..50).collect::<Vec<_>>());
    }
}
