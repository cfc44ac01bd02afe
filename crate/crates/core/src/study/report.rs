use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::rate::{RateReport, RateRow, StudyError};

pub const RATE_REPORT_HEADER: &str = "epsilon,error_sq,std_error,aux_gap,increment_stat";
pub const FIT_HEADER: &str = "slope,intercept,r_squared,verdict";

fn io_err(path: &Path, e: std::io::Error) -> StudyError {
    StudyError::Io(format!("{}: {e}", path.display()))
}

pub fn rate_report_csv(report: &RateReport) -> String {
    let mut s = String::new();
    writeln!(s, "{RATE_REPORT_HEADER}").unwrap();
    for r in &report.rows {
        writeln!(
            s,
            "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
            r.epsilon, r.error_sq, r.std_error, r.aux_gap, r.increment_stat
        )
        .unwrap();
    }
    s
}

pub fn fit_csv(report: &RateReport) -> String {
    let f = &report.fit;
    format!(
        "{FIT_HEADER}\n{:.16e},{:.16e},{:.16e},{}\n",
        f.slope,
        f.intercept,
        f.r_squared,
        verdict(report)
    )
}

pub fn verdict(report: &RateReport) -> &'static str {
    if report.fit.pass {
        "pass"
    } else {
        "fail"
    }
}

pub fn summary_text(report: &RateReport) -> String {
    let f = &report.fit;
    let mut s = String::new();
    writeln!(s, "model: {}", report.model).unwrap();
    writeln!(
        s,
        "particles: {}  replications: {}  seed: {}  t_end: {}  record points: {}",
        report.n_particles, report.replications, report.seed, report.t_end, report.record_points
    )
    .unwrap();
    writeln!(
        s,
        "error norm: {}  block exponent: {:.4}",
        report.norm, report.delta_exponent
    )
    .unwrap();
    writeln!(s).unwrap();
    writeln!(
        s,
        "{:>12} {:>14} {:>12} {:>12} {:>14}",
        "epsilon", "error_sq", "std_error", "aux_gap", "increment"
    )
    .unwrap();
    for r in &report.rows {
        writeln!(
            s,
            "{:>12.4e} {:>14.6e} {:>12.4e} {:>12.4e} {:>14.6e}",
            r.epsilon, r.error_sq, r.std_error, r.aux_gap, r.increment_stat
        )
        .unwrap();
    }
    writeln!(s).unwrap();
    writeln!(s, "slope of log error_sq on log epsilon: {:.4}", f.slope).unwrap();
    writeln!(s, "implied rate on the error itself:     {:.4}", f.error_rate).unwrap();
    writeln!(s, "r_squared: {:.4}", f.r_squared).unwrap();
    writeln!(s, "threshold on error_sq slope: {:.4}", f.threshold).unwrap();
    writeln!(s, "strictly decreasing: {}", f.strictly_decreasing).unwrap();
    if !report.complete {
        writeln!(s, "incomplete grid:").unwrap();
        for g in &report.failures {
            writeln!(
                s,
                "  epsilon {} replication {}: {}",
                g.epsilon, g.replication, g.message
            )
            .unwrap();
        }
    }
    writeln!(s, "verdict: {}", verdict(report)).unwrap();
    s
}

/// Writes `rate_report.csv`, `fit.csv` and `summary.txt` into `dir`.
pub fn write_report(report: &RateReport, dir: &Path) -> Result<(), StudyError> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    for (name, body) in [
        ("rate_report.csv", rate_report_csv(report)),
        ("fit.csv", fit_csv(report)),
        ("summary.txt", summary_text(report)),
    ] {
        let path = dir.join(name);
        fs::write(&path, body).map_err(|e| io_err(&path, e))?;
    }
    Ok(())
}

/// Parses a `rate_report.csv`.
pub fn read_rate_report(path: &Path) -> Result<Vec<RateRow>, StudyError> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let mut lines = text.lines();
    if lines.next() != Some(RATE_REPORT_HEADER) {
        return Err(StudyError::Io(format!("{}: unexpected header", path.display())));
    }
    lines
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            let v: Result<Vec<f64>, _> = l.split(',').map(str::parse).collect();
            match v {
                Ok(v) if v.len() == 5 => Ok(RateRow {
                    epsilon: v[0],
                    error_sq: v[1],
                    std_error: v[2],
                    aux_gap: v[3],
                    increment_stat: v[4],
                }),
                _ => Err(StudyError::Io(format!("{}: malformed row {l:?}", path.display()))),
            }
        })
        .collect()
}
