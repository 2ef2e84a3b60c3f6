//! CSV and key-value files.
//!
//! Every file starts with a block of `# key = value` comment lines holding
//! the configuration that produced it. Numbers are written with Rust's
//! shortest round-trip formatting, so reruns are byte-identical.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::experiments::{CurveRow, SpeedupRow};

pub const CURVES_HEADER: [&str; 6] = ["experiment", "replication", "agent", "t_or_episode", "metric", "value"];
pub const SUMMARY_HEADER: [&str; 6] = ["experiment", "N", "T", "mse_mean", "mse_stderr", "ratio"];

/// Ordered `key = value` pairs.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct KeyValues(Vec<(String, String)>);

impl KeyValues {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, key: impl Into<String>, value: impl ToString) -> &mut Self {
        self.0.push((key.into(), value.to_string()));
        self
    }

    pub fn push_vec(&mut self, key: impl Into<String>, values: &[f64]) -> &mut Self {
        let joined = values.iter().map(f64::to_string).collect::<Vec<_>>().join(", ");
        self.push(key, format!("[{joined}]"))
    }

    pub fn extend(&mut self, other: &KeyValues) -> &mut Self {
        self.0.extend(other.0.iter().cloned());
        self
    }

    pub fn entries(&self) -> &[(String, String)] {
        &self.0
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.0.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    fn write_to(&self, out: &mut impl Write, prefix: &str) -> std::io::Result<()> {
        for (k, v) in &self.0 {
            writeln!(out, "{prefix}{k} = {}", v.replace('\n', " "))?;
        }
        Ok(())
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

fn write_csv<const N: usize>(
    path: &Path,
    config: &KeyValues,
    header: [&str; N],
    rows: impl Iterator<Item = [String; N]>,
) -> Result<()> {
    let mut out = create(path)?;
    config.write_to(&mut out, "# ").map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header)?;
    for row in rows {
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_curves(path: &Path, config: &KeyValues, rows: &[CurveRow]) -> Result<()> {
    write_csv(
        path,
        config,
        CURVES_HEADER,
        rows.iter().map(|r| {
            [
                r.experiment.clone(),
                r.replication.clone(),
                r.agent.clone(),
                r.index.to_string(),
                r.metric.to_string(),
                r.value.to_string(),
            ]
        }),
    )
}

pub fn write_summary(path: &Path, config: &KeyValues, experiment: &str, rows: &[SpeedupRow]) -> Result<()> {
    write_csv(
        path,
        config,
        SUMMARY_HEADER,
        rows.iter().map(|r| {
            [
                experiment.to_string(),
                r.n.to_string(),
                r.t.to_string(),
                r.mse_mean.to_string(),
                r.mse_stderr.to_string(),
                r.ratio.to_string(),
            ]
        }),
    )
}

/// A CSV with an arbitrary header; every row must match its width.
pub fn write_table(path: &Path, config: &KeyValues, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    if let Some(row) = rows.iter().find(|r| r.len() != header.len()) {
        return Err(Error::Dimension {
            axis: "table row",
            expected: header.len(),
            found: row.len(),
        });
    }
    let mut out = create(path)?;
    config.write_to(&mut out, "# ").map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header)?;
    for row in rows {
        w.write_record(row)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// A plain `key = value` report.
pub fn write_report(path: &Path, report: &KeyValues) -> Result<()> {
    let mut out = create(path)?;
    report.write_to(&mut out, "").map_err(|e| Error::io(path, e))?;
    out.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn curves_file_has_comment_block_and_header() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("curves.csv");
        let mut cfg = KeyValues::new();
        cfg.push("seed", 7).push_vec("agents", &[1.0, 2.0]);
        let rows = vec![CurveRow {
            experiment: "run".into(),
            replication: "0".into(),
            agent: "avg".into(),
            index: 10,
            metric: "dist_avg",
            value: 0.25,
        }];
        write_curves(&path, &cfg, &rows).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(
            text,
            "# seed = 7\n# agents = [1, 2]\nexperiment,replication,agent,t_or_episode,metric,value\nrun,0,avg,10,dist_avg,0.25\n"
        );
    }

    #[test]
    fn unwritable_path_names_the_path() {
        let dir = tempfile::tempdir().unwrap();
        let blocker = dir.path().join("file");
        std::fs::write(&blocker, "x").unwrap();
        let err = write_report(&blocker.join("report.txt"), &KeyValues::new()).unwrap_err();
        assert!(err.to_string().contains("file"), "{err}");
    }
}
