//! SVG plots rendered from the emitted CSV files only.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::CliError;

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 500.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 160.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;
const COLOURS: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

struct Series {
    label: String,
    points: Vec<(f64, f64)>,
    dashed: bool,
}

fn read_table(path: &Path) -> Result<(Vec<String>, Vec<Vec<String>>), CliError> {
    let mut r = csv::Reader::from_path(path)?;
    let headers = r.headers()?.iter().map(str::to_string).collect();
    let rows = r
        .records()
        .map(|rec| rec.map(|r| r.iter().map(str::to_string).collect()))
        .collect::<Result<_, _>>()?;
    Ok((headers, rows))
}

fn column(headers: &[String], name: &str, path: &Path) -> Result<usize, CliError> {
    headers
        .iter()
        .position(|h| h == name)
        .ok_or_else(|| CliError::Config(format!("{}: no column '{name}'", path.display())))
}

fn value(cell: &str) -> Option<f64> {
    cell.parse().ok().filter(|v: &f64| v.is_finite())
}

/// "Nice" tick positions covering `[lo, hi]`.
fn ticks(lo: f64, hi: f64) -> Vec<f64> {
    let span = (hi - lo).max(f64::MIN_POSITIVE);
    let raw = span / 6.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0]
        .into_iter()
        .map(|m| m * mag)
        .find(|s| *s >= raw)
        .unwrap_or(10.0 * mag);
    let start = (lo / step).ceil() as i64;
    let end = (hi / step).floor() as i64;
    (start..=end).map(|i| i as f64 * step).collect()
}

fn fmt_tick(v: f64) -> String {
    if v != 0.0 && (v.abs() < 1e-2 || v.abs() >= 1e4) {
        format!("{v:.0e}")
    } else {
        let s = format!("{v:.3}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

fn line_plot(
    series: &[Series],
    title: &str,
    x_label: &str,
    y_label: &str,
    log_y: bool,
    path: &Path,
) -> Result<(), CliError> {
    let ty = |y: f64| if log_y { y.log10() } else { y };
    let pts = series
        .iter()
        .flat_map(|s| s.points.iter())
        .filter(|p| !log_y || p.1 > 0.0);
    let (mut x0, mut x1, mut y0, mut y1) = (
        f64::INFINITY,
        f64::NEG_INFINITY,
        f64::INFINITY,
        f64::NEG_INFINITY,
    );
    for &(x, y) in pts {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(ty(y));
        y1 = y1.max(ty(y));
    }
    if !x0.is_finite() {
        (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
    }
    if log_y {
        y0 = y0.floor();
        y1 = y1.ceil().max(y0 + 1.0);
    } else {
        let pad = 0.05 * (y1 - y0).max(1e-9);
        y0 -= pad;
        y1 += pad;
    }
    if x1 <= x0 {
        x1 = x0 + 1.0;
    }
    let (pw, ph) = (WIDTH - LEFT - RIGHT, HEIGHT - TOP - BOTTOM);
    let sx = |x: f64| LEFT + (x - x0) / (x1 - x0) * pw;
    let sy = |y: f64| TOP + (1.0 - (ty(y) - y0) / (y1 - y0)) * ph;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="24" text-anchor="middle" font-size="15">{title}</text>"#,
        LEFT + pw / 2.0
    );
    let _ = writeln!(
        svg,
        r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
    );
    for t in ticks(x0, x1) {
        let x = sx(t);
        let _ = writeln!(
            svg,
            r#"<line x1="{x:.2}" y1="{}" x2="{x:.2}" y2="{}" stroke="black"/><text x="{x:.2}" y="{}" text-anchor="middle">{}</text>"#,
            TOP + ph,
            TOP + ph + 5.0,
            TOP + ph + 20.0,
            fmt_tick(t)
        );
    }
    let yticks: Vec<f64> = if log_y {
        (y0 as i64..=y1 as i64)
            .map(|e| 10f64.powi(e as i32))
            .collect()
    } else {
        ticks(y0, y1)
    };
    for t in yticks {
        let y = sy(t);
        let _ = writeln!(
            svg,
            r##"<line x1="{}" y1="{y:.2}" x2="{}" y2="{y:.2}" stroke="#ddd"/><text x="{}" y="{:.2}" text-anchor="end">{}</text>"##,
            LEFT,
            LEFT + pw,
            LEFT - 6.0,
            y + 4.0,
            fmt_tick(t)
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" text-anchor="middle">{x_label}</text>"#,
        LEFT + pw / 2.0,
        HEIGHT - 15.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="20" y="{0}" text-anchor="middle" transform="rotate(-90 20 {0})">{y_label}</text>"#,
        TOP + ph / 2.0
    );
    for (i, s) in series.iter().enumerate() {
        let colour = COLOURS[i % COLOURS.len()];
        let dash = if s.dashed {
            r#" stroke-dasharray="6 4""#
        } else {
            ""
        };
        // split the polyline wherever a point is missing
        let mut d = String::new();
        let mut pen_down = false;
        let mut last_x = f64::NEG_INFINITY;
        for &(x, y) in &s.points {
            let ok = y.is_finite() && (!log_y || y > 0.0) && x > last_x;
            if !ok {
                pen_down = false;
                continue;
            }
            let _ = write!(
                d,
                "{}{:.2},{:.2} ",
                if pen_down { "L" } else { "M" },
                sx(x),
                sy(y)
            );
            pen_down = true;
            last_x = x;
        }
        let _ = writeln!(
            svg,
            r#"<path d="{d}" fill="none" stroke="{colour}" stroke-width="1.5"{dash}/>"#
        );
        let ly = TOP + 10.0 + 18.0 * i as f64;
        let _ = writeln!(
            svg,
            r#"<line x1="{0}" y1="{ly}" x2="{1}" y2="{ly}" stroke="{colour}" stroke-width="2"{dash}/><text x="{2}" y="{3}">{4}</text>"#,
            WIDTH - RIGHT + 10.0,
            WIDTH - RIGHT + 35.0,
            WIDTH - RIGHT + 40.0,
            ly + 4.0,
            s.label
        );
    }
    svg.push_str("</svg>\n");
    std::fs::write(path, svg).map_err(CliError::io(path))
}

/// IF tracks of each estimator CSV, with the true IF dashed when available.
pub fn if_overlay(
    estimates: &[(String, std::path::PathBuf)],
    truth: Option<&Path>,
    out: &Path,
) -> Result<(), CliError> {
    let mut series = Vec::new();
    let mut load =
        |label: &str, path: &Path, value_col: &str, dashed: bool| -> Result<(), CliError> {
            let (h, rows) = read_table(path)?;
            let (ct, cm, cv) = (
                column(&h, "t_seconds", path)?,
                column(&h, "mode_id", path)?,
                column(&h, value_col, path)?,
            );
            let mut by_mode: Vec<Vec<(f64, f64)>> = Vec::new();
            for row in &rows {
                let (Some(t), Ok(m)) = (value(&row[ct]), row[cm].parse::<usize>()) else {
                    continue;
                };
                if by_mode.len() <= m {
                    by_mode.resize(m + 1, Vec::new());
                }
                by_mode[m].push((t, value(&row[cv]).unwrap_or(f64::NAN)));
            }
            for (m, points) in by_mode.into_iter().enumerate() {
                series.push(Series {
                    label: format!("{label} #{m}"),
                    points,
                    dashed,
                });
            }
            Ok(())
        };
    for (label, path) in estimates {
        load(label, path, "if_hz", false)?;
    }
    if let Some(t) = truth {
        load("true", t, "if_hz", true)?;
    }
    line_plot(
        &series,
        "Instantaneous frequency",
        "time (s)",
        "IF (Hz)",
        false,
        out,
    )
}

/// RMSE against window width, one curve per estimator column.
pub fn error_vs_sigma(csv_path: &Path, out: &Path) -> Result<(), CliError> {
    let (h, rows) = read_table(csv_path)?;
    let cs = column(&h, "sigma", csv_path)?;
    let series: Vec<Series> = (0..h.len())
        .filter(|&c| c != cs)
        .map(|c| Series {
            label: h[c].clone(),
            points: rows
                .iter()
                .filter_map(|r| Some((value(&r[cs])?, value(&r[c]).unwrap_or(f64::NAN))))
                .collect(),
            dashed: false,
        })
        .collect();
    line_plot(
        &series,
        "IF error against window width",
        "sigma (s)",
        "RMSE (Hz)",
        true,
        out,
    )
}

/// Log-scaled heat map of a wide TF CSV, max-pooled to at most 200x200
/// cells and cropped to the band holding the energy.
pub fn tf_heatmap(csv_path: &Path, out: &Path) -> Result<(), CliError> {
    let (h, rows) = read_table(csv_path)?;
    let first = column(&h, "t_seconds", csv_path)? + 1;
    let freqs: Vec<f64> = h[first..].iter().map(|s| value(s).unwrap_or(0.0)).collect();
    let grid: Vec<Vec<f64>> = rows
        .iter()
        .map(|r| r[first..].iter().map(|c| value(c).unwrap_or(0.0)).collect())
        .collect();
    let times: Vec<f64> = rows
        .iter()
        .map(|r| value(&r[first - 1]).unwrap_or(0.0))
        .collect();
    let peak = grid.iter().flatten().cloned().fold(0.0, f64::max);
    let floor = peak * 1e-6;
    let cols = freqs.len();
    let active: Vec<usize> = (0..cols)
        .filter(|&k| grid.iter().any(|r| r[k] > floor * 100.0))
        .collect();
    let (k_lo, k_hi) = match (active.first(), active.last()) {
        (Some(&a), Some(&b)) => (a.saturating_sub(4), (b + 5).min(cols)),
        _ => (0, cols),
    };
    let nt = rows.len().max(1);
    let nk = (k_hi - k_lo).max(1);
    let (bt, bk) = (nt.div_ceil(200), nk.div_ceil(200));
    let (gt, gk) = (nt.div_ceil(bt), nk.div_ceil(bk));
    let (pw, ph) = (WIDTH - LEFT - RIGHT, HEIGHT - TOP - BOTTOM);
    let (cw, ch) = (pw / gt as f64, ph / gk as f64);

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="24" text-anchor="middle" font-size="15">Spectrogram (60 dB range)</text>"#,
        LEFT + pw / 2.0
    );
    for i in 0..gt {
        for j in 0..gk {
            let mut v: f64 = 0.0;
            for row in grid.iter().skip(i * bt).take(bt) {
                for &x in row[k_lo..k_hi].iter().skip(j * bk).take(bk) {
                    v = v.max(x);
                }
            }
            let level = if peak > 0.0 {
                ((10.0 * (v.max(floor) / peak).log10() + 60.0) / 60.0).clamp(0.0, 1.0)
            } else {
                0.0
            };
            let g = (255.0 * (1.0 - level)).round() as u8;
            let _ = writeln!(
                svg,
                r#"<rect x="{:.1}" y="{:.1}" width="{:.1}" height="{:.1}" fill="rgb({g},{g},255)"/>"#,
                LEFT + i as f64 * cw,
                TOP + ph - (j + 1) as f64 * ch,
                cw + 0.3,
                ch + 0.3
            );
        }
    }
    let _ = writeln!(
        svg,
        r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
    );
    let (t0, t1) = (times[0], *times.last().unwrap_or(&1.0));
    for t in ticks(t0, t1) {
        let x = LEFT + (t - t0) / (t1 - t0).max(f64::MIN_POSITIVE) * pw;
        let _ = writeln!(
            svg,
            r#"<text x="{x:.2}" y="{}" text-anchor="middle">{}</text>"#,
            TOP + ph + 20.0,
            fmt_tick(t)
        );
    }
    let (f0, f1) = (freqs[k_lo], freqs[k_hi - 1]);
    for f in ticks(f0, f1) {
        let y = TOP + ph - (f - f0) / (f1 - f0).max(f64::MIN_POSITIVE) * ph;
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{:.2}" text-anchor="end">{}</text>"#,
            LEFT - 6.0,
            y + 4.0,
            fmt_tick(f)
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" text-anchor="middle">time (s)</text>"#,
        LEFT + pw / 2.0,
        HEIGHT - 15.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="20" y="{0}" text-anchor="middle" transform="rotate(-90 20 {0})">frequency (Hz)</text>"#,
        TOP + ph / 2.0
    );
    svg.push_str("</svg>\n");
    std::fs::write(out, svg).map_err(CliError::io(out))
}
