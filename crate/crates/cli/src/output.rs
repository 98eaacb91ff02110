//! Report serialization: the plot-ready CSV and the JSON sidecar.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::run::BoundsReport;
use crate::CliError;

/// 12 significant digits, locale-free: enough that equal runs produce
/// byte-identical files and plots don't visibly quantize.
pub fn format_sig12(x: f64) -> String {
    if x.is_nan() {
        return "nan".to_string();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf" } else { "-inf" }.to_string();
    }
    format!("{x:.11e}")
}

fn opt(x: Option<f64>) -> String {
    match x {
        Some(v) => format_sig12(v),
        None => "nan".to_string(),
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io { path: path.display().to_string(), source }
}

/// Writes `nl,lower,upper,gap` rows plus the JSON sidecar (same path,
/// `.json` extension). The CSV `gap` column is `upper − lower`; with the
/// usual greedy+swap+cr_lower method set that equals the report's
/// `swap_J − lower_bound`.
pub fn emit_plot_data(report: &BoundsReport, csv_path: &Path) -> Result<(PathBuf, PathBuf), CliError> {
    if let Some(dir) = csv_path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir).map_err(io_err(dir))?;
        }
    }

    let mut csv = String::from("nl,lower,upper,gap\n");
    for row in &report.rows {
        let gap = match (row.upper, row.lower_bound) {
            (Some(u), Some(lo)) => Some(u - lo),
            _ => None,
        };
        csv.push_str(&format!(
            "{},{},{},{}\n",
            row.nl,
            opt(row.lower_bound),
            opt(row.upper),
            opt(gap)
        ));
    }
    let mut f = fs::File::create(csv_path).map_err(io_err(csv_path))?;
    f.write_all(csv.as_bytes()).map_err(io_err(csv_path))?;

    let json_path = csv_path.with_extension("json");
    let mut payload =
        serde_json::to_vec_pretty(report).expect("report serialization cannot fail");
    payload.push(b'\n');
    let mut f = fs::File::create(&json_path).map_err(io_err(&json_path))?;
    f.write_all(&payload).map_err(io_err(&json_path))?;

    Ok((csv_path.to_path_buf(), json_path))
}
