//! CSV tables and the run manifest.

use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::{Path, PathBuf};

use ifprony::{Signal, TfMatrix};
use num_complex::Complex64;
use serde::Serialize;
use serde_json::json;

use crate::error::CliError;
use crate::experiment::{EstimatorRun, RunResult};
use crate::plot;

pub const DETERMINISM: &str = "No random numbers are drawn anywhere in the pipeline and parallel \
results are collected in a fixed order: re-running the same config with the same build \
reproduces byte-identical CSV files.";

/// Empty cell for undefined values.
fn num(v: f64) -> String {
    if v.is_finite() {
        format!("{v}")
    } else {
        String::new()
    }
}

fn writer(path: &Path) -> Result<csv::Writer<File>, CliError> {
    let file = File::create(path).map_err(CliError::io(path))?;
    Ok(csv::Writer::from_writer(file))
}

/// Writes `# fs = <F_s>` followed by `index,re,im` rows.
pub fn write_signal_csv(signal: &Signal, path: &Path) -> Result<(), CliError> {
    let mut file = File::create(path).map_err(CliError::io(path))?;
    writeln!(file, "# fs = {}", signal.fs).map_err(CliError::io(path))?;
    let mut w = csv::Writer::from_writer(file);
    w.write_record(["index", "re", "im"])?;
    for (n, z) in signal.samples.iter().enumerate() {
        w.write_record([n.to_string(), num(z.re), num(z.im)])?;
    }
    w.flush().map_err(CliError::io(path))?;
    Ok(())
}

fn parse_fs_header(line: &str) -> Option<f64> {
    let body = line.trim().trim_start_matches('#').trim();
    let (key, value) = body.split_once(['=', ','])?;
    if !key.trim().eq_ignore_ascii_case("fs") {
        return None;
    }
    value.trim().parse().ok()
}

/// Reads a raw signal: a header line carrying `fs`, then `index,re,im`
/// rows with consecutive indices from 0.
pub fn read_signal_csv(path: &Path) -> Result<Signal, CliError> {
    let file = File::open(path).map_err(CliError::io(path))?;
    let mut reader = BufReader::new(file);
    let mut first = String::new();
    reader.read_line(&mut first).map_err(CliError::io(path))?;
    let fs = parse_fs_header(&first).ok_or_else(|| {
        CliError::Config(format!(
            "{}: first line must carry the sampling rate, e.g. '# fs = 1024', got '{}'",
            path.display(),
            first.trim()
        ))
    })?;
    let mut rest = String::new();
    reader
        .read_to_string(&mut rest)
        .map_err(CliError::io(path))?;
    let mut csv = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(rest.as_bytes());
    let bad = |msg: String| CliError::Config(format!("{}: {msg}", path.display()));
    let headers = csv.headers()?.clone();
    let column = |name: &str| {
        headers
            .iter()
            .position(|h| h.eq_ignore_ascii_case(name))
            .ok_or_else(|| bad(format!("missing column '{name}'")))
    };
    let (ci, cr, cm) = (column("index")?, column("re")?, column("im")?);
    let mut samples = Vec::new();
    for (row, record) in csv.records().enumerate() {
        let record = record?;
        let field = |c: usize| -> Result<f64, CliError> {
            let text = record.get(c).unwrap_or("");
            text.parse()
                .map_err(|_| bad(format!("row {row}: cannot parse '{text}'")))
        };
        let index = field(ci)?;
        if index != row as f64 {
            return Err(bad(format!("row {row}: expected index {row}, got {index}")));
        }
        samples.push(Complex64::new(field(cr)?, field(cm)?));
    }
    Ok(Signal::new(samples, fs)?)
}

/// Wide layout: one row per time index, one column per frequency bin,
/// values with seven significant digits.
pub fn write_tf_csv(tf: &TfMatrix<f64>, path: &Path) -> Result<(), CliError> {
    let mut w = writer(path)?;
    let params = tf.params;
    let mut header = vec!["n".to_string(), "t_seconds".to_string()];
    header.extend((0..tf.cols()).map(|k| num(params.bin_freq(k))));
    w.write_record(&header)?;
    for n in 0..tf.rows() {
        let mut rec = vec![n.to_string(), num(n as f64 / params.fs)];
        rec.extend(tf.row(n).iter().map(|&v| format!("{v:.6e}")));
        w.write_record(&rec)?;
    }
    w.flush().map_err(CliError::io(path))?;
    Ok(())
}

pub fn write_truth_csv(truth: &[Vec<f64>], fs: f64, path: &Path) -> Result<(), CliError> {
    let mut w = writer(path)?;
    w.write_record(["n", "t_seconds", "mode_id", "if_hz"])?;
    for (p, series) in truth.iter().enumerate() {
        for (n, &f) in series.iter().enumerate() {
            w.write_record([n.to_string(), num(n as f64 / fs), p.to_string(), num(f)])?;
        }
    }
    w.flush().map_err(CliError::io(path))?;
    Ok(())
}

/// `n, t_seconds, mode_id, if_hz, ia, interpolated_flag`.
pub fn write_if_csv(run: &EstimatorRun, fs: f64, path: &Path) -> Result<(), CliError> {
    let mut w = writer(path)?;
    w.write_record([
        "n",
        "t_seconds",
        "mode_id",
        "if_hz",
        "ia",
        "interpolated_flag",
    ])?;
    for (p, est) in run.estimates.iter().enumerate() {
        for n in 0..est.len() {
            let ia = est.amplitude.as_ref().map_or(f64::NAN, |a| a[n]);
            w.write_record([
                n.to_string(),
                num(n as f64 / fs),
                p.to_string(),
                num(est.freq[n]),
                num(ia),
                u8::from(est.interpolated[n]).to_string(),
            ])?;
        }
    }
    w.flush().map_err(CliError::io(path))?;
    Ok(())
}

pub fn write_ridges_csv(
    run: &EstimatorRun,
    fs: f64,
    bins: usize,
    path: &Path,
) -> Result<(), CliError> {
    let mut w = writer(path)?;
    w.write_record(["n", "ridge_id", "bin", "freq_hz"])?;
    for (id, ridge) in run.ridges.iter().enumerate() {
        for (n, bin) in ridge.bins.iter().enumerate() {
            let (b, f) = match bin {
                Some(k) => (k.to_string(), num(*k as f64 * fs / bins as f64)),
                None => (String::new(), String::new()),
            };
            w.write_record([n.to_string(), id.to_string(), b, f])?;
        }
    }
    w.flush().map_err(CliError::io(path))?;
    Ok(())
}

/// Long error table `sigma, estimator, mode_id, rmse_hz`.
pub fn write_errors_csv(result: &RunResult, path: &Path) -> Result<(), CliError> {
    let mut w = writer(path)?;
    w.write_record(["sigma", "estimator", "mode_id", "rmse_hz"])?;
    for r in &result.runs {
        for (p, e) in r.errors.iter().enumerate() {
            w.write_record([num(r.sigma), r.label.clone(), p.to_string(), num(e.rmse)])?;
        }
    }
    w.flush().map_err(CliError::io(path))?;
    Ok(())
}

/// Wide table: one row per window width, one column per estimator holding
/// the RMSE averaged over modes.
pub fn write_sweep_csv(result: &RunResult, path: &Path) -> Result<(), CliError> {
    let mut w = writer(path)?;
    let labels = result.labels();
    let mut header = vec!["sigma".to_string()];
    header.extend(labels.iter().cloned());
    w.write_record(&header)?;
    for sigma in result.sigmas() {
        let mut rec = vec![num(sigma)];
        for l in &labels {
            let v = result
                .runs
                .iter()
                .find(|r| &r.label == l && r.sigma == sigma)
                .map_or(f64::NAN, EstimatorRun::mean_rmse);
            rec.push(num(v));
        }
        w.write_record(&rec)?;
    }
    w.flush().map_err(CliError::io(path))?;
    Ok(())
}

#[derive(Serialize)]
struct ErrorRow<'a> {
    sigma: f64,
    estimator: &'a str,
    mode_id: usize,
    rmse_hz: f64,
}

fn file_name(path: &Path) -> String {
    path.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default()
}

/// Writes every table of a run, the plots derived from them and
/// `manifest.json`. Returns the written paths, manifest last.
pub fn write_run(
    result: &RunResult,
    dir: &Path,
    label: &str,
    extra: Option<serde_json::Value>,
) -> Result<Vec<PathBuf>, CliError> {
    std::fs::create_dir_all(dir).map_err(CliError::io(dir))?;
    let fs = result.signal.fs;
    let mut files = Vec::new();
    let mut overlays = Vec::new();

    let truth_path = dir.join("truth.csv");
    if let Some(truth) = &result.truth {
        write_truth_csv(truth, fs, &truth_path)?;
        files.push(truth_path.clone());
    }
    if let Some(tf) = &result.transforms {
        let path = dir.join("spectrogram.csv");
        write_tf_csv(&tf.spectrogram, &path)?;
        files.push(path.clone());
        let svg = dir.join("spectrogram.svg");
        plot::tf_heatmap(&path, &svg)?;
        files.push(svg);
        if let Some((m, _)) = &tf.fsst {
            let path = dir.join("fsst.csv");
            write_tf_csv(m, &path)?;
            files.push(path);
        }
        for r in &result.runs {
            let path = dir.join(format!("if_{}.csv", r.label));
            write_if_csv(r, fs, &path)?;
            overlays.push((r.label.clone(), path.clone()));
            files.push(path);
            if !r.ridges.is_empty() {
                let path = dir.join(format!("ridges_{}.csv", r.label));
                write_ridges_csv(r, fs, tf.params.bins, &path)?;
                files.push(path);
            }
        }
        let svg = dir.join("if_overlay.svg");
        let truth = result.truth.as_ref().map(|_| truth_path.as_path());
        plot::if_overlay(&overlays, truth, &svg)?;
        files.push(svg);
    }
    let mut errors = Vec::new();
    if result.truth.is_some() {
        let path = dir.join("errors.csv");
        write_errors_csv(result, &path)?;
        files.push(path);
        for r in &result.runs {
            for (p, e) in r.errors.iter().enumerate() {
                errors.push(ErrorRow {
                    sigma: r.sigma,
                    estimator: &r.label,
                    mode_id: p,
                    rmse_hz: e.rmse,
                });
            }
        }
        if result.sigmas().len() > 1 {
            let path = dir.join("error_vs_sigma.csv");
            write_sweep_csv(result, &path)?;
            files.push(path.clone());
            let svg = dir.join("error_vs_sigma.svg");
            plot::error_vs_sigma(&path, &svg)?;
            files.push(svg);
        }
    }

    let warnings: Vec<String> = result
        .runs
        .iter()
        .flat_map(|r| {
            r.warnings
                .iter()
                .map(move |w| format!("{} sigma={}: {w}", r.label, r.sigma))
        })
        .collect();
    let manifest_path = dir.join("manifest.json");
    let manifest = json!({
        "name": result.config.name,
        "label": label,
        "library_version": ifprony::VERSION,
        "cli_version": env!("CARGO_PKG_VERSION"),
        "determinism": DETERMINISM,
        "config": result.config,
        "signal": { "samples": result.signal.len(), "fs": fs },
        "files": files.iter().map(|p| file_name(p)).collect::<Vec<_>>(),
        "errors": errors,
        "warnings": warnings,
        "summary": extra,
    });
    let text = serde_json::to_string_pretty(&manifest)
        .map_err(|e| CliError::Config(format!("cannot render manifest: {e}")))?;
    std::fs::write(&manifest_path, text + "\n").map_err(CliError::io(&manifest_path))?;
    files.push(manifest_path);
    Ok(files)
}
