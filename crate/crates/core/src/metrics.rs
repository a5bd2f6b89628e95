//! IF error metric and the closed-form two-tone spectrogram.

use std::f64::consts::PI;
use std::ops::Range;

use crate::error::{Error, Result};
use crate::IfEstimate;

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorReport {
    /// Root-mean-square IF error in Hz.
    pub rmse: f64,
    /// Number of samples L entering the mean.
    pub count: usize,
    /// `truth − estimate` per sample.
    pub residuals: Vec<f64>,
}

/// `E = sqrt((1/L) Σ (φ'(n/F_s) − IF(n))²)` over paired samples.
pub fn estimation_error(estimate: &[f64], truth: &[f64]) -> Result<ErrorReport> {
    if estimate.len() != truth.len() {
        return Err(Error::LengthMismatch(estimate.len(), truth.len()));
    }
    if estimate.is_empty() {
        return Err(Error::InvalidParameter("empty series".into()));
    }
    let residuals: Vec<f64> = truth.iter().zip(estimate).map(|(t, e)| t - e).collect();
    let rmse = (residuals.iter().map(|r| r * r).sum::<f64>() / residuals.len() as f64).sqrt();
    Ok(ErrorReport {
        rmse,
        count: residuals.len(),
        residuals,
    })
}

fn mean_abs_diff(est: &[f64], truth: &[f64], range: &Range<usize>) -> f64 {
    let n = range.len().max(1) as f64;
    range
        .clone()
        .map(|i| (est[i] - truth[i]).abs())
        .sum::<f64>()
        / n
}

/// Pairs each true IF series with an estimate by minimal mean |Δf| over
/// `range`. With at least as many estimates as modes the assignment is
/// one-to-one; otherwise every mode takes its closest estimate.
pub fn match_modes(
    estimates: &[IfEstimate],
    truths: &[Vec<f64>],
    range: &Range<usize>,
) -> Result<Vec<usize>> {
    if estimates.is_empty() {
        return Err(Error::InvalidParameter("no estimates to match".into()));
    }
    for series in estimates
        .iter()
        .map(|e| e.freq.len())
        .chain(truths.iter().map(Vec::len))
    {
        if series < range.end {
            return Err(Error::LengthMismatch(series, range.end));
        }
    }
    let cost: Vec<Vec<f64>> = truths
        .iter()
        .map(|t| {
            estimates
                .iter()
                .map(|e| mean_abs_diff(&e.freq, t, range))
                .collect()
        })
        .collect();
    if estimates.len() < truths.len() {
        return Ok(cost
            .iter()
            .map(|row| {
                (0..row.len())
                    .min_by(|&a, &b| row[a].total_cmp(&row[b]))
                    .unwrap()
            })
            .collect());
    }
    let mut best = (f64::INFINITY, Vec::new());
    let mut current = Vec::with_capacity(truths.len());
    let mut used = vec![false; estimates.len()];
    assign(&cost, 0, 0.0, &mut current, &mut used, &mut best);
    Ok(best.1)
}

fn assign(
    cost: &[Vec<f64>],
    mode: usize,
    acc: f64,
    current: &mut Vec<usize>,
    used: &mut [bool],
    best: &mut (f64, Vec<usize>),
) {
    if acc >= best.0 {
        return;
    }
    if mode == cost.len() {
        *best = (acc, current.clone());
        return;
    }
    for j in 0..used.len() {
        if !used[j] {
            used[j] = true;
            current.push(j);
            assign(cost, mode + 1, acc + cost[mode][j], current, used, best);
            current.pop();
            used[j] = false;
        }
    }
}

/// Matches estimates to modes and scores each mode over `range`.
pub fn score_modes(
    estimates: &[IfEstimate],
    truths: &[Vec<f64>],
    range: Range<usize>,
) -> Result<Vec<ErrorReport>> {
    let matching = match_modes(estimates, truths, &range)?;
    truths
        .iter()
        .zip(matching)
        .map(|(t, j)| estimation_error(&estimates[j].freq[range.clone()], &t[range.clone()]))
        .collect()
}

/// Closed-form spectrogram of `A·e^{2iπω₁t} + e^{2iπω₂t}` with window
/// `e^{-πt²/σ²}`.
pub fn two_tone_spectrogram(t: f64, eta: f64, amp: f64, w1: f64, w2: f64, sigma: f64) -> f64 {
    let s2 = sigma * sigma;
    let d1 = eta - w1;
    let d2 = eta - w2;
    let modes = amp * amp * (-2.0 * PI * s2 * d1 * d1).exp() + (-2.0 * PI * s2 * d2 * d2).exp();
    let cross =
        2.0 * amp * (-PI * s2 * (d1 * d1 + d2 * d2)).exp() * (2.0 * PI * (w2 - w1) * t).cos();
    s2 * (modes + cross)
}

/// Amplitude `B = 2A·e^{-πσ²δω²/2}` of the interference Gaussian.
pub fn interference_amplitude(amp: f64, delta: f64, sigma: f64) -> f64 {
    2.0 * amp * (-PI * sigma * sigma * delta * delta / 2.0).exp()
}

/// Window width `σ* = 1/(√(π/2)·δω)` below which two equal tones merge into
/// one spectrogram ridge.
pub fn separability_sigma(delta: f64) -> f64 {
    1.0 / ((PI / 2.0).sqrt() * delta.abs())
}
