//! Versioned CSV outputs. Every file starts with one `#` metadata line that
//! names the schema and the resolved config hash.

use std::io::Write;
use std::path::Path;

use metalevel::episode::{paired_difference, EvalReport};
use serde::{Deserialize, Serialize};

use crate::error::{BenchError, Result};

pub const RESULTS_SCHEMA: &str = "metalevel-results v1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub domain: String,
    pub k_or_h: usize,
    pub cost: f64,
    pub policy: String,
    pub mean: f64,
    pub sd: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub n: usize,
    pub seed: u64,
    pub config_hash: String,
}

impl ResultRow {
    pub fn from_report(domain: &str, k_or_h: usize, cost: f64, policy: &str, r: &EvalReport, hash: &str) -> Self {
        ResultRow {
            domain: domain.into(),
            k_or_h,
            cost,
            policy: policy.into(),
            mean: r.mean,
            sd: r.sd,
            ci_lo: r.ci_lo,
            ci_hi: r.ci_hi,
            n: r.n,
            seed: r.base_seed,
            config_hash: hash.into(),
        }
    }
}

/// Paired difference `policy_a − policy_b` over identical seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub domain: String,
    pub k_or_h: usize,
    pub cost: f64,
    pub policy_a: String,
    pub policy_b: String,
    pub mean_diff: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub n: usize,
    pub config_hash: String,
}

impl ComparisonRow {
    pub fn paired(
        domain: &str,
        k_or_h: usize,
        cost: f64,
        a: (&str, &EvalReport),
        b: (&str, &EvalReport),
        hash: &str,
    ) -> Result<Self> {
        let d = paired_difference(a.1, b.1)?;
        Ok(ComparisonRow {
            domain: domain.into(),
            k_or_h,
            cost,
            policy_a: a.0.into(),
            policy_b: b.0.into(),
            mean_diff: d.mean,
            ci_lo: d.ci_lo,
            ci_hi: d.ci_hi,
            n: d.n,
            config_hash: hash.into(),
        })
    }
}

/// Writes `rows` as CSV after a `# <schema> <meta>` line.
pub fn write_csv<T: Serialize>(path: &Path, schema: &str, meta: &str, rows: &[T]) -> Result<()> {
    let mut buf = Vec::new();
    writeln!(buf, "# {schema} {meta}").expect("writing to memory");
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        for r in rows {
            w.serialize(r).map_err(|e| BenchError::Config(format!("csv encoding: {e}")))?;
        }
        w.flush().map_err(|e| BenchError::io(path, e))?;
    }
    std::fs::write(path, buf).map_err(|e| BenchError::io(path, e))
}

pub fn read_csv<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let text = std::fs::read(path).map_err(|e| BenchError::io(path, e))?;
    let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_slice());
    r.deserialize()
        .map(|row| row.map_err(|e| BenchError::Parse { path: path.into(), message: e.to_string() }))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip_with_metadata_line() {
        let dir = std::env::temp_dir().join(format!("metalevel-output-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("r.csv");
        let r = EvalReport::from_returns(vec![0.5, 0.7, 0.6], &[1, 2, 3], 11);
        let rows = vec![ResultRow::from_report("bandit", 2, 0.01, "bmps", &r, "abc")];
        write_csv(&path, RESULTS_SCHEMA, "config_hash=abc", &rows).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("# metalevel-results v1 config_hash=abc\ndomain,k_or_h,cost,policy,mean,sd,ci_lo,ci_hi,n,seed,config_hash\n"));
        let back: Vec<ResultRow> = read_csv(&path).unwrap();
        assert_eq!(back, rows);
        std::fs::remove_dir_all(&dir).unwrap();
    }
}
