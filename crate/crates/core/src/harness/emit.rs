use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::cdf::{CdfCurve, CdfResult};
use super::sweep::{Method, SweepResult, SweepRow};
use super::HarnessError;

pub const CSV_HEADER: &str = "theta_deg,method,sinr_db,iterations,flops,feasible";

fn writer(buf: &mut Vec<u8>) -> csv::Writer<&mut Vec<u8>> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .has_headers(true)
        .from_writer(buf)
}

fn csv_err(path: &Path, e: csv::Error) -> HarnessError {
    HarnessError::Csv {
        path: path.to_path_buf(),
        source: e,
    }
}

/// Rows as CSV text: LF line endings, shortest round-trip float formatting.
pub fn rows_to_csv(rows: &[SweepRow]) -> String {
    let mut buf = Vec::new();
    {
        let mut w = writer(&mut buf);
        if rows.is_empty() {
            w.write_record(CSV_HEADER.split(',')).expect("in-memory write");
        }
        for r in rows {
            w.serialize(r).expect("in-memory write");
        }
        w.flush().expect("in-memory write");
    }
    String::from_utf8(buf).expect("csv output is UTF-8")
}

pub fn parse_csv(text: &str, source: &Path) -> Result<Vec<SweepRow>, HarnessError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
    let header = rdr.headers().map_err(|e| csv_err(source, e))?.clone();
    if header.iter().collect::<Vec<_>>().join(",") != CSV_HEADER {
        return Err(HarnessError::Validation(vec![format!(
            "{}: expected header `{CSV_HEADER}`",
            source.display()
        )]));
    }
    rdr.deserialize()
        .collect::<Result<Vec<SweepRow>, _>>()
        .map_err(|e| csv_err(source, e))
}

fn write_text(path: &Path, text: &str) -> Result<(), HarnessError> {
    std::fs::write(path, text).map_err(|e| HarnessError::io(path, e))
}

pub fn write_csv(rows: &[SweepRow], path: &Path) -> Result<(), HarnessError> {
    write_text(path, &rows_to_csv(rows))
}

pub fn read_csv(path: &Path) -> Result<Vec<SweepRow>, HarnessError> {
    let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
    parse_csv(&text, path)
}

/// gnuplot script plotting SINR against direction, one line per method.
pub fn plot_script(csv_file: &str, methods: &[Method], title: &str) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# Achieved SINR per sensing direction; run with `gnuplot -p <this file>`.");
    let _ = writeln!(s, "set datafile separator ','");
    let _ = writeln!(s, "set key autotitle columnhead");
    let _ = writeln!(s, "set title '{}'", title.replace('\'', "''"));
    let _ = writeln!(s, "set xlabel 'sensing direction (deg)'");
    let _ = writeln!(s, "set ylabel 'SINR (dB)'");
    let _ = writeln!(s, "set xrange [-90:90]");
    let _ = writeln!(s, "set grid");
    let _ = writeln!(s, "set key outside right");
    let _ = writeln!(s, "data = '{csv_file}'");
    let parts: Vec<String> = methods
        .iter()
        .map(|m| format!("data using 1:(strcol(2) eq '{m}' ? $3 : NaN) with linespoints title '{m}'"))
        .collect();
    let _ = writeln!(s, "plot {}", parts.join(", \\\n     "));
    s
}

pub fn write_plot_script(csv_path: &Path, script_path: &Path, methods: &[Method], title: &str) -> Result<(), HarnessError> {
    let name = csv_path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| csv_path.display().to_string());
    write_text(script_path, &plot_script(&name, methods, title))
}

/// Writes `<dir>/sweep_<name>.csv` and the matching `.gp` script; returns
/// both paths.
pub fn write_sweep(result: &SweepResult, dir: &Path) -> Result<(PathBuf, PathBuf), HarnessError> {
    std::fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    let csv_path = dir.join(format!("sweep_{}.csv", result.scenario));
    let gp_path = dir.join(format!("sweep_{}.gp", result.scenario));
    write_csv(&result.rows(), &csv_path)?;
    let mut methods: Vec<Method> = result.records.iter().map(|r| r.method).collect();
    methods.sort();
    methods.dedup();
    write_plot_script(&csv_path, &gp_path, &methods, &format!("Scenario {}", result.scenario))?;
    Ok((csv_path, gp_path))
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

/// `theta_deg,comm_dir_deg,threshold,method,sinr_db,feasible`.
pub fn cdf_samples_csv(r: &CdfResult) -> String {
    let mut s = String::from("theta_deg,comm_dir_deg,threshold,method,sinr_db,feasible\n");
    for x in &r.samples {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{}",
            x.theta_deg, x.comm_dir_deg, x.threshold, x.method, x.sinr_db, x.feasible
        );
    }
    s
}

fn curves_csv(curves: &[CdfCurve], with_combo: bool) -> String {
    let mut s = String::from(if with_combo {
        "comm_dir_deg,threshold,method,sinr_db,cdf\n"
    } else {
        "method,sinr_db,cdf\n"
    });
    for c in curves {
        for (x, f) in &c.points {
            if with_combo {
                let _ = write!(s, "{},{},", fmt_opt(c.comm_dir_deg), fmt_opt(c.threshold));
            }
            let _ = writeln!(s, "{},{},{}", c.method, x, f);
        }
    }
    s
}

/// `method,sinr_db,cdf`.
pub fn cdf_pooled_csv(r: &CdfResult) -> String {
    curves_csv(&r.pooled, false)
}

/// `comm_dir_deg,threshold,method,sinr_db,cdf`.
pub fn cdf_by_combination_csv(r: &CdfResult) -> String {
    curves_csv(&r.per_combination, true)
}

fn cdf_plot_script(pooled_file: &str, methods: &[Method], title: &str) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# Pooled empirical CDF of achieved SINR; run with `gnuplot -p <this file>`.");
    let _ = writeln!(s, "set datafile separator ','");
    let _ = writeln!(s, "set title '{}'", title.replace('\'', "''"));
    let _ = writeln!(s, "set xlabel 'SINR (dB)'");
    let _ = writeln!(s, "set key autotitle columnhead");
    let _ = writeln!(s, "set ylabel 'CDF'");
    let _ = writeln!(s, "set yrange [0:1]");
    let _ = writeln!(s, "set grid");
    let _ = writeln!(s, "set key outside right");
    let _ = writeln!(s, "data = '{pooled_file}'");
    let parts: Vec<String> = methods
        .iter()
        .map(|m| format!("data using (strcol(1) eq '{m}' ? $2 : NaN):3 with steps title '{m}'"))
        .collect();
    let _ = writeln!(s, "plot {}", parts.join(", \\\n     "));
    s
}

/// Writes samples, pooled and per-combination CSVs plus a plot script;
/// returns the written paths.
pub fn write_cdf(r: &CdfResult, dir: &Path) -> Result<Vec<PathBuf>, HarnessError> {
    std::fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    let name = &r.scenario;
    let files = [
        (format!("cdf_{name}_samples.csv"), cdf_samples_csv(r)),
        (format!("cdf_{name}_pooled.csv"), cdf_pooled_csv(r)),
        (format!("cdf_{name}_by_combination.csv"), cdf_by_combination_csv(r)),
        (
            format!("cdf_{name}.gp"),
            cdf_plot_script(
                &format!("cdf_{name}_pooled.csv"),
                &r.pooled.iter().map(|c| c.method).collect::<Vec<_>>(),
                &format!("Scenario {name}"),
            ),
        ),
    ];
    let mut out = Vec::new();
    for (f, text) in files {
        let p = dir.join(f);
        write_text(&p, &text)?;
        out.push(p);
    }
    Ok(out)
}
