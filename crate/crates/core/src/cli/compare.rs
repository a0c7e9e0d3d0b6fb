use serde::Serialize;

use super::{CliError, Table};

#[derive(Clone, Debug, Default)]
pub struct CompareOptions {
    pub tolerance: f64,
    /// Scale the tolerance by the peak magnitude of each column of the first table.
    pub relative_to_peak: bool,
    /// Explicit `(column in A, column in B)` pairs; empty means all shared columns.
    pub map: Vec<(String, String)>,
    /// Ignore rows whose key (first column) is below this value.
    pub key_min: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ColumnDeviation {
    pub a: String,
    pub b: String,
    pub max_abs: f64,
    pub rms: f64,
    pub limit: f64,
    pub passed: bool,
}

fn mismatch(msg: String) -> CliError {
    CliError::Config(format!("schema mismatch: {msg}"))
}

/// Per-column max and RMS deviations over rows with matching keys.
pub fn compare_tables(a: &Table, b: &Table, opts: &CompareOptions) -> Result<Vec<ColumnDeviation>, CliError> {
    let (Some(key_a), Some(key_b)) = (a.columns.first(), b.columns.first()) else {
        return Err(mismatch("empty table".into()));
    };
    if key_a != key_b {
        return Err(mismatch(format!("key columns {key_a} and {key_b}")));
    }
    if a.rows.len() != b.rows.len() {
        return Err(mismatch(format!("{} rows vs {}", a.rows.len(), b.rows.len())));
    }
    for (ra, rb) in a.rows.iter().zip(&b.rows) {
        if (ra[0] - rb[0]).abs() > 1e-9 * ra[0].abs().max(1.0) {
            return Err(mismatch(format!("{key_a} = {} vs {}", ra[0], rb[0])));
        }
    }
    let pairs: Vec<(String, String)> = if opts.map.is_empty() {
        a.columns[1..].iter().filter(|c| b.column_index(c).is_some()).map(|c| (c.clone(), c.clone())).collect()
    } else {
        opts.map.clone()
    };
    if pairs.is_empty() {
        return Err(mismatch("no shared columns".into()));
    }
    let rows: Vec<usize> =
        (0..a.rows.len()).filter(|&r| opts.key_min.is_none_or(|m| a.rows[r][0] >= m)).collect();
    if rows.is_empty() {
        return Err(mismatch("no rows above the key minimum".into()));
    }
    pairs
        .into_iter()
        .map(|(ca, cb)| {
            let ia = a.column_index(&ca).ok_or_else(|| mismatch(format!("no column {ca} in first file")))?;
            let ib = b.column_index(&cb).ok_or_else(|| mismatch(format!("no column {cb} in second file")))?;
            let diffs: Vec<f64> = rows.iter().map(|&r| (a.rows[r][ia] - b.rows[r][ib]).abs()).collect();
            let max_abs = diffs.iter().copied().fold(0.0, f64::max);
            let rms = (diffs.iter().map(|d| d * d).sum::<f64>() / diffs.len() as f64).sqrt();
            let scale = if opts.relative_to_peak {
                rows.iter().map(|&r| a.rows[r][ia].abs()).fold(0.0, f64::max)
            } else {
                1.0
            };
            let limit = opts.tolerance * scale;
            Ok(ColumnDeviation { a: ca, b: cb, max_abs, rms, limit, passed: max_abs <= limit })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table(cols: &[&str], rows: &[&[f64]]) -> Table {
        let mut t = Table::new(cols.iter().map(|c| c.to_string()).collect());
        for r in rows {
            t.push(r.to_vec());
        }
        t
    }

    #[test]
    fn identical_tables_have_zero_deviation() {
        let a = table(&["t", "x", "y"], &[&[0.0, 1.0, 2.0], &[1.0, 3.0, 4.0]]);
        let report = compare_tables(&a, &a, &CompareOptions { tolerance: 0.0, ..Default::default() }).unwrap();
        assert_eq!(report.len(), 2);
        assert!(report.iter().all(|c| c.passed && c.max_abs == 0.0));
    }

    #[test]
    fn mapping_peak_scaling_and_key_cut() {
        let a = table(&["t", "x", "y"], &[&[0.0, 10.0, 0.0], &[1.0, 5.0, 5.4]]);
        let opts = CompareOptions {
            tolerance: 0.05,
            relative_to_peak: true,
            map: vec![("x".into(), "y".into())],
            key_min: Some(0.5),
        };
        let c = &compare_tables(&a, &a, &opts).unwrap()[0];
        assert!((c.max_abs - 0.4).abs() < 1e-12);
        assert!((c.limit - 0.25).abs() < 1e-12);
        assert!(!c.passed);
    }

    #[test]
    fn schema_mismatch_is_an_error() {
        let a = table(&["t", "x"], &[&[0.0, 1.0]]);
        let b = table(&["delta", "x"], &[&[0.0, 1.0]]);
        assert!(compare_tables(&a, &b, &Default::default()).is_err());
        let c = table(&["t", "z"], &[&[0.0, 1.0]]);
        assert!(compare_tables(&a, &c, &Default::default()).is_err());
        let d = table(&["t", "x"], &[&[0.5, 1.0]]);
        assert!(compare_tables(&a, &d, &Default::default()).is_err());
    }
}
