use std::fs;
use std::path::{Path, PathBuf};

use rydberg_reuse::evaluation::{ConvergenceRow, ExperimentSpec, ResultTable};

use crate::plot::{self, Series};
use crate::CliError;

pub const RESULTS_HEADER: [&str; 7] = ["label", "sweep_param", "sweep_value", "mean_se_bps_hz", "stderr", "trials", "seed"];
pub const CONVERGENCE_HEADER: [&str; 6] = ["label", "iteration", "mean_objective", "stderr", "trials", "seed"];

/// C `%.12e` formatting (`1.234567890123e+00`).
pub fn sci(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let s = format!("{x:.12e}");
    let (mantissa, exp) = s.split_once('e').expect("exponent in scientific format");
    let exp: i32 = exp.parse().expect("integer exponent");
    let sign = if exp < 0 { '-' } else { '+' };
    format!("{mantissa}e{sign}{:02}", exp.abs())
}

fn csv_string(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    w.write_record(header).expect("write to memory");
    for r in rows {
        w.write_record(&r).expect("write to memory");
    }
    String::from_utf8(w.into_inner().expect("flush to memory")).expect("utf-8 records")
}

/// `results.csv` contents for `table`.
pub fn results_csv(table: &ResultTable) -> String {
    csv_string(
        &RESULTS_HEADER,
        table.rows.iter().map(|r| {
            vec![
                r.label.clone(),
                r.sweep_param.clone(),
                r.sweep_value.to_string(),
                sci(r.mean_se),
                sci(r.stderr),
                r.trials.to_string(),
                table.seed.to_string(),
            ]
        }),
    )
}

pub fn convergence_csv(rows: &[ConvergenceRow], seed: u64) -> String {
    csv_string(
        &CONVERGENCE_HEADER,
        rows.iter().map(|r| {
            vec![
                r.label.clone(),
                r.iteration.to_string(),
                sci(r.mean_objective),
                sci(r.stderr),
                r.trials.to_string(),
                seed.to_string(),
            ]
        }),
    )
}

/// The resolved spec as pretty JSON; parsing it back gives the same spec.
pub fn manifest_json(spec: &ExperimentSpec) -> String {
    let mut s = serde_json::to_string_pretty(spec).expect("spec serializes");
    s.push('\n');
    s
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<PathBuf, CliError> {
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|e| CliError::Write { path: path.clone(), message: e.to_string() })?;
    Ok(path)
}

fn prepare(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::Write { path: dir.to_path_buf(), message: e.to_string() })
}

fn group<T>(items: &[T], label: impl Fn(&T) -> &str, point: impl Fn(&T) -> (f64, f64)) -> Vec<Series> {
    let mut out: Vec<Series> = Vec::new();
    for it in items {
        let l = label(it);
        match out.iter_mut().find(|s| s.label == l) {
            Some(s) => s.points.push(point(it)),
            None => out.push(Series { label: l.to_string(), points: vec![point(it)] }),
        }
    }
    out
}

/// Writes `results.csv`, `results.svg` and `manifest.json` into `dir`.
pub fn emit_results(table: &ResultTable, spec: &ExperimentSpec, dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    if table.rows.is_empty() {
        return Err(CliError::Usage("nothing to write: the result table is empty".into()));
    }
    prepare(dir)?;
    let series = group(&table.rows, |r| &r.label, |r| (r.sweep_value, r.mean_se));
    let x_label = table.rows[0].sweep_param.as_str();
    Ok(vec![
        write(dir, "results.csv", &results_csv(table))?,
        write(dir, "results.svg", &plot::line_plot(&spec.name, x_label, "spectral efficiency (bits/s/Hz)", &series))?,
        write(dir, "manifest.json", &manifest_json(spec))?,
    ])
}

/// Writes `convergence.csv`, `convergence.svg` and `manifest.json` into `dir`.
pub fn emit_convergence(rows: &[ConvergenceRow], spec: &ExperimentSpec, dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    if rows.is_empty() {
        return Err(CliError::Usage("nothing to write: no convergence rows".into()));
    }
    prepare(dir)?;
    let series = group(rows, |r| &r.label, |r| (r.iteration as f64, r.mean_objective));
    Ok(vec![
        write(dir, "convergence.csv", &convergence_csv(rows, spec.seed))?,
        write(dir, "convergence.svg", &plot::line_plot(&spec.name, "iteration", "objective", &series))?,
        write(dir, "manifest.json", &manifest_json(spec))?,
    ])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn c_style_exponent() {
        assert_eq!(sci(1.0), "1.000000000000e+00");
        assert_eq!(sci(-0.00123), "-1.230000000000e-03");
        assert_eq!(sci(12345.0), "1.234500000000e+04");
        assert_eq!(sci(0.0), "0.000000000000e+00");
        assert_eq!(sci(1e-120), "1.000000000000e-120");
    }

    #[test]
    fn labels_with_commas_are_quoted() {
        let s = csv_string(&["a"], [vec!["x, y".to_string()]]);
        assert_eq!(s, "a\n\"x, y\"\n");
    }
}
