//! Versioned CSV schema for per-round metrics.

use std::path::Path;

use crate::engine::MetricsRecord;
use crate::error::{Error, Result};

pub const CSV_SCHEMA_VERSION: u32 = 1;

/// Exact header row; field order is part of the schema.
pub const CSV_HEADER: &str = "schema_version,round,strategy,test_accuracy,sum_tx_energy_j,\
max_tx_delay_s,max_local_delay_s,delay_spread_s,round_wallclock_s,cum_sum_tx_energy_j,\
cum_max_tx_delay_s,cum_max_local_delay_s";

/// Locale-independent float rendering with 9 significant digits.
pub fn format_float(v: f64) -> String {
    format!("{v:.8e}")
}

pub fn csv_row(strategy: &str, r: &MetricsRecord) -> String {
    [
        CSV_SCHEMA_VERSION.to_string(),
        r.round.to_string(),
        strategy.to_string(),
        format_float(r.test_accuracy),
        format_float(r.sum_tx_energy_j),
        format_float(r.max_tx_delay_s),
        format_float(r.max_local_delay_s),
        format_float(r.delay_spread_s),
        format_float(r.round_wallclock_s),
        format_float(r.cum_sum_tx_energy_j),
        format_float(r.cum_max_tx_delay_s),
        format_float(r.cum_max_local_delay_s),
    ]
    .join(",")
}

/// Renders header plus one row per (strategy, record) pair.
pub fn render_csv<'a>(rows: impl IntoIterator<Item = (&'a str, &'a MetricsRecord)>) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for (strategy, record) in rows {
        out.push_str(&csv_row(strategy, record));
        out.push('\n');
    }
    out
}

/// A parsed CSV with header-indexed column access.
#[derive(Debug, Clone)]
pub struct CsvTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl CsvTable {
    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header: Vec<String> = lines
            .next()
            .ok_or_else(|| Error::Parse("csv: missing header row".into()))?
            .split(',')
            .map(str::to_string)
            .collect();
        let mut rows = Vec::new();
        for (i, line) in lines.enumerate() {
            if line.is_empty() {
                continue;
            }
            let row: Vec<String> = line.split(',').map(str::to_string).collect();
            if row.len() != header.len() {
                return Err(Error::Parse(format!(
                    "csv: row {} has {} fields, header has {}",
                    i + 2,
                    row.len(),
                    header.len()
                )));
            }
            rows.push(row);
        }
        Ok(Self { header, rows })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    pub fn numeric(&self, row: usize, col: usize) -> Result<f64> {
        self.rows[row][col]
            .parse()
            .map_err(|_| Error::Parse(format!("csv: {:?} is not numeric", self.rows[row][col])))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record() -> MetricsRecord {
        MetricsRecord {
            round: 3,
            test_accuracy: 0.85,
            sum_tx_energy_j: 0.0076349278,
            max_tx_delay_s: 0.7634927859,
            max_local_delay_s: 4.0,
            delay_spread_s: 0.0,
            round_wallclock_s: 4.7634927859,
            cum_sum_tx_energy_j: 0.0229,
            cum_max_tx_delay_s: 2.29,
            cum_max_local_delay_s: 12.0,
        }
    }

    #[test]
    fn header_is_pinned() {
        assert_eq!(
            CSV_HEADER,
            "schema_version,round,strategy,test_accuracy,sum_tx_energy_j,max_tx_delay_s,\
max_local_delay_s,delay_spread_s,round_wallclock_s,cum_sum_tx_energy_j,cum_max_tx_delay_s,\
cum_max_local_delay_s"
        );
    }

    #[test]
    fn floats_carry_nine_significant_digits() {
        assert_eq!(format_float(0.85), "8.50000000e-1");
        assert_eq!(format_float(0.0), "0.00000000e0");
        assert_eq!(format_float(0.7634927859), "7.63492786e-1");
    }

    #[test]
    fn rows_round_trip_through_the_parser() {
        let r = record();
        let text = render_csv([("cnc_optimized", &r)]);
        let table = CsvTable::parse(&text).unwrap();
        assert_eq!(table.rows.len(), 1);
        let round_col = table.column("round").unwrap();
        assert_eq!(table.rows[0][round_col], "3");
        let acc = table.numeric(0, table.column("test_accuracy").unwrap()).unwrap();
        assert_eq!(acc, 0.85);
        assert!(table.column("no_such_field").is_none());
    }
}
