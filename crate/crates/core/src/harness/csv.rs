//! CSV emission with a fixed column order and lossless float formatting.
//!
//! Floats are written with `{:e}`: shortest scientific notation that parses
//! back to the identical bit pattern. Files are UTF-8 with LF line endings,
//! so a rerun with the same seed is byte-identical.

use std::path::Path;

use crate::error::Result;

pub trait CsvRecord {
    fn header() -> &'static str;
    fn format(&self, out: &mut String);
}

pub fn fmt_f64(v: f64) -> String {
    format!("{v:e}")
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

pub fn render_csv<R: CsvRecord>(rows: &[R]) -> String {
    let mut s = String::new();
    s.push_str(R::header());
    s.push('\n');
    for row in rows {
        row.format(&mut s);
        s.push('\n');
    }
    s
}

/// Writes `header + one line per row`; an empty table produces a header-only
/// file.
pub fn emit_csv<R: CsvRecord>(rows: &[R], path: &Path) -> Result<()> {
    std::fs::write(path, render_csv(rows))?;
    Ok(())
}

/// One Monte-Carlo trial of one solver at one grid point.
#[derive(Debug, Clone)]
pub struct ResultRow {
    pub scenario: String,
    pub grid_key: String,
    pub grid_value: f64,
    pub solver: String,
    pub trial: usize,
    pub aligned_error: f64,
    pub error_db: f64,
    pub iterations: usize,
    pub termination: String,
}

impl CsvRecord for ResultRow {
    fn header() -> &'static str {
        "scenario,grid_key,grid_value,solver,trial,aligned_error,error_db,iterations,termination"
    }

    fn format(&self, out: &mut String) {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}",
            self.scenario,
            self.grid_key,
            fmt_f64(self.grid_value),
            self.solver,
            self.trial,
            fmt_f64(self.aligned_error),
            fmt_f64(self.error_db),
            self.iterations,
            self.termination,
        ));
    }
}

/// Aggregated statistics of one solver at one grid point.
#[derive(Debug, Clone)]
pub struct AggregateRow {
    pub scenario: String,
    pub grid_key: String,
    pub grid_value: f64,
    pub solver: String,
    pub trials: usize,
    pub mean_error: f64,
    pub mse_db: f64,
    pub median_error: f64,
    pub median_error_db: f64,
    pub success_rate: f64,
    pub crb_laplacian: Option<f64>,
    pub crb_gaussian: Option<f64>,
}

impl CsvRecord for AggregateRow {
    fn header() -> &'static str {
        "scenario,grid_key,grid_value,solver,trials,mean_error,mse_db,median_error,median_error_db,success_rate,crb_laplacian,crb_gaussian"
    }

    fn format(&self, out: &mut String) {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            self.scenario,
            self.grid_key,
            fmt_f64(self.grid_value),
            self.solver,
            self.trials,
            fmt_f64(self.mean_error),
            fmt_f64(self.mse_db),
            fmt_f64(self.median_error),
            fmt_f64(self.median_error_db),
            fmt_f64(self.success_rate),
            fmt_opt(self.crb_laplacian),
            fmt_opt(self.crb_gaussian),
        ));
    }
}

/// One grid point of the bound table.
#[derive(Debug, Clone)]
pub struct CrbRow {
    pub scenario: String,
    pub snr_db: f64,
    pub n: usize,
    pub m: usize,
    pub trials: usize,
    pub sigma_sq: f64,
    pub crb_laplacian_complex: f64,
    pub crb_gaussian_complex: f64,
    pub crb_amplitude: f64,
    pub crb_phase: f64,
    pub rank: usize,
}

impl CsvRecord for CrbRow {
    fn header() -> &'static str {
        "scenario,snr_db,n,m,trials,sigma_sq,crb_laplacian_complex,crb_gaussian_complex,crb_amplitude,crb_phase,rank"
    }

    fn format(&self, out: &mut String) {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{}",
            self.scenario,
            fmt_f64(self.snr_db),
            self.n,
            self.m,
            self.trials,
            fmt_f64(self.sigma_sq),
            fmt_f64(self.crb_laplacian_complex),
            fmt_f64(self.crb_gaussian_complex),
            fmt_f64(self.crb_amplitude),
            fmt_f64(self.crb_phase),
            self.rank,
        ));
    }
}

/// Wall-clock sidecar; deliberately kept out of the deterministic files.
#[derive(Debug, Clone)]
pub struct TimingRow {
    pub scenario: String,
    pub grid_key: String,
    pub grid_value: f64,
    pub solver: String,
    pub trial: usize,
    pub wall_time_s: f64,
}

impl CsvRecord for TimingRow {
    fn header() -> &'static str {
        "scenario,grid_key,grid_value,solver,trial,wall_time_s"
    }

    fn format(&self, out: &mut String) {
        out.push_str(&format!(
            "{},{},{},{},{},{}",
            self.scenario,
            self.grid_key,
            fmt_f64(self.grid_value),
            self.solver,
            self.trial,
            fmt_f64(self.wall_time_s),
        ));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip_exactly() {
        for v in [
            0.0,
            -0.0,
            1.0,
            -1.5e-308,
            3.141592653589793,
            1e-7,
            123456.789,
            f64::NEG_INFINITY,
        ] {
            let s = fmt_f64(v);
            let back: f64 = s.parse().unwrap();
            assert!(back == v || (back.is_nan() && v.is_nan()), "{v} -> {s} -> {back}");
        }
    }

    #[test]
    fn empty_table_is_header_only() {
        let rendered = render_csv::<ResultRow>(&[]);
        assert_eq!(rendered, format!("{}\n", ResultRow::header()));
    }

    #[test]
    fn row_round_trip() {
        let row = ResultRow {
            scenario: "snr_sweep".to_string(),
            grid_key: "snr_db".to_string(),
            grid_value: 12.5,
            solver: "irls_p1.3".to_string(),
            trial: 7,
            aligned_error: 3.25e-9,
            error_db: -84.87990909,
            iterations: 231,
            termination: "tolerance".to_string(),
        };
        let rendered = render_csv(std::slice::from_ref(&row));
        let mut lines = rendered.lines();
        assert_eq!(lines.next().unwrap(), ResultRow::header());
        let fields: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(fields[0], "snr_sweep");
        assert_eq!(fields[2].parse::<f64>().unwrap(), 12.5);
        assert_eq!(fields[5].parse::<f64>().unwrap(), 3.25e-9);
        assert_eq!(fields[6].parse::<f64>().unwrap(), -84.87990909);
        assert_eq!(fields[7].parse::<usize>().unwrap(), 231);
    }
}
