//! CSV reading and writing for records and summaries.

use std::io::{Read, Write};

use anyhow::{bail, Context, Result};

use crate::experiment::{ExperimentRecord, SummaryRow};

pub const RECORDS_HEADER: [&str; 8] =
    ["method", "n_per_cell", "replication", "safe_estimate", "true_optimal", "realized_return", "regret", "violation"];
pub const SUMMARY_HEADER: [&str; 6] =
    ["method", "n_per_cell", "mean_regret", "stderr_regret", "violation_rate", "replications"];
/// Violation column value of a failed row.
pub const FAILED: &str = "failed";

pub fn write_records<W: Write>(out: W, records: &[ExperimentRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(RECORDS_HEADER)?;
    for r in records {
        let violation = match r.violation {
            Some(true) => "1",
            Some(false) => "0",
            None => FAILED,
        };
        w.write_record([
            r.method.name().to_string(),
            r.n_per_cell.to_string(),
            r.replication.to_string(),
            r.safe_estimate.to_string(),
            r.true_optimal.to_string(),
            r.realized_return.to_string(),
            r.regret.to_string(),
            violation.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_records<R: Read>(input: R) -> Result<Vec<ExperimentRecord>> {
    let mut reader = csv::Reader::from_reader(input);
    let header = reader.headers()?.clone();
    if header.iter().ne(RECORDS_HEADER) {
        bail!("unexpected records header: {}", header.iter().collect::<Vec<_>>().join(","));
    }
    let mut records = Vec::new();
    for (line, row) in reader.records().enumerate() {
        let row = row?;
        let parse = |i: usize| -> Result<f64> {
            row[i].parse().with_context(|| format!("row {}: bad {} `{}`", line + 1, RECORDS_HEADER[i], &row[i]))
        };
        let violation = match &row[7] {
            "1" => Some(true),
            "0" => Some(false),
            FAILED => None,
            other => bail!("row {}: bad violation flag `{other}`", line + 1),
        };
        records.push(ExperimentRecord {
            method: row[0].parse()?,
            n_per_cell: row[1].parse().with_context(|| format!("row {}: bad n_per_cell", line + 1))?,
            replication: row[2].parse().with_context(|| format!("row {}: bad replication", line + 1))?,
            safe_estimate: parse(3)?,
            true_optimal: parse(4)?,
            realized_return: parse(5)?,
            regret: parse(6)?,
            violation,
        });
    }
    Ok(records)
}

pub fn write_summary<W: Write>(out: W, rows: &[SummaryRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SUMMARY_HEADER)?;
    for r in rows {
        w.write_record([
            r.method.name().to_string(),
            r.n_per_cell.to_string(),
            r.mean_regret.to_string(),
            r.stderr_regret.to_string(),
            r.violation_rate.to_string(),
            r.replications.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
