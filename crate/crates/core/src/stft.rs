//! Gaussian-window STFT on the grid `t = n/F_s`, `η = (k/K)·F_s`.
//!
//! The discretization is the Riemann sum
//!
//! ```text
//! V[n,k] = (1/F_s) Σ_{m=-R..R} f[n+m] h(m/F_s) e^{-2iπ k m / K}
//! ```
//!
//! with `f` zero outside `[0, N)`. Keeping the `1/F_s` factor makes the
//! discrete values approximate the continuous transform, so a tone of
//! amplitude `A` shows up as `|V|² = A²σ² e^{-2πσ²(η-ω)²}`.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::signal::Signal;

/// Window values below this are dropped when choosing the support radius.
pub const WINDOW_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StftParams {
    /// Gaussian window width σ in seconds.
    pub sigma: f64,
    /// Number of frequency bins K.
    pub bins: usize,
    /// Sampling rate in Hz.
    pub fs: f64,
    /// Window support radius R in samples.
    pub radius: usize,
}

impl StftParams {
    /// Builds parameters with the default radius `⌈σ·F_s·√(ln(1/ε)/π)⌉`.
    pub fn new(sigma: f64, bins: usize, fs: f64) -> Result<Self> {
        let radius = if sigma > 0.0 && fs > 0.0 {
            ((sigma * fs * ((1.0 / WINDOW_FLOOR).ln() / PI).sqrt()).ceil() as usize).max(1)
        } else {
            1
        };
        Self::with_radius(sigma, bins, fs, radius)
    }

    pub fn with_radius(sigma: f64, bins: usize, fs: f64, radius: usize) -> Result<Self> {
        let p = Self {
            sigma,
            bins,
            fs,
            radius,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma.is_finite() && self.sigma > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "sigma must be positive, got {}",
                self.sigma
            )));
        }
        if self.bins < 2 {
            return Err(Error::InvalidParameter(format!(
                "K must be at least 2, got {}",
                self.bins
            )));
        }
        if !(self.fs.is_finite() && self.fs > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "sampling rate must be positive, got {}",
                self.fs
            )));
        }
        if self.radius < 1 {
            return Err(Error::InvalidParameter("window radius must be >= 1".into()));
        }
        Ok(())
    }

    /// Frequency of bin `k` in Hz.
    pub fn bin_freq(&self, k: usize) -> f64 {
        k as f64 / self.bins as f64 * self.fs
    }

    /// Bin width `F_s/K` in Hz.
    pub fn bin_width(&self) -> f64 {
        self.fs / self.bins as f64
    }

    /// `h_σ(t) = exp(-π t²/σ²)`
    pub fn window(&self, t: f64) -> f64 {
        (-PI * t * t / (self.sigma * self.sigma)).exp()
    }

    /// `h'_σ(t) = (-2πt/σ²)·h_σ(t)`
    pub fn window_derivative(&self, t: f64) -> f64 {
        -2.0 * PI * t / (self.sigma * self.sigma) * self.window(t)
    }

    /// Range of time indices at least `4σ` away from both signal ends.
    pub fn interior(&self, n: usize) -> std::ops::Range<usize> {
        let margin = (4.0 * self.sigma * self.fs).ceil() as usize;
        let end = n.saturating_sub(margin);
        margin.min(end)..end
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TfKind {
    Stft,
    StftDerivative,
    Spectrogram,
    Fsst,
}

/// Row-major N×K time-frequency grid.
#[derive(Debug, Clone, PartialEq)]
pub struct TfMatrix<T> {
    values: Vec<T>,
    rows: usize,
    pub params: StftParams,
    pub kind: TfKind,
}

impl<T: Copy> TfMatrix<T> {
    pub fn from_vec(values: Vec<T>, rows: usize, params: StftParams, kind: TfKind) -> Result<Self> {
        if values.len() != rows * params.bins {
            return Err(Error::ShapeMismatch {
                expected: (rows, params.bins),
                got: (values.len() / params.bins.max(1), params.bins),
            });
        }
        Ok(Self {
            values,
            rows,
            params,
            kind,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.params.bins
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.params.bins)
    }

    pub fn get(&self, n: usize, k: usize) -> T {
        self.values[n * self.params.bins + k]
    }

    pub fn row(&self, n: usize) -> &[T] {
        let k = self.params.bins;
        &self.values[n * k..(n + 1) * k]
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn map<U: Copy>(&self, kind: TfKind, f: impl Fn(T) -> U) -> TfMatrix<U> {
        TfMatrix {
            values: self.values.iter().map(|&v| f(v)).collect(),
            rows: self.rows,
            params: self.params,
            kind,
        }
    }

    pub(crate) fn check_same_shape<U: Copy>(&self, other: &TfMatrix<U>) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(Error::ShapeMismatch {
                expected: self.shape(),
                got: other.shape(),
            });
        }
        Ok(())
    }
}

fn check_rates(signal: &Signal, params: &StftParams) -> Result<()> {
    params.validate()?;
    if (signal.fs - params.fs).abs() > 1e-9 * params.fs {
        return Err(Error::InvalidParameter(format!(
            "signal sampled at {} Hz but STFT parameters use {} Hz",
            signal.fs, params.fs
        )));
    }
    Ok(())
}

fn sampled_window(params: &StftParams, derivative: bool) -> Vec<f64> {
    let r = params.radius as i64;
    (-r..=r)
        .map(|m| {
            let t = m as f64 / params.fs;
            if derivative {
                params.window_derivative(t)
            } else {
                params.window(t)
            }
        })
        .collect()
}

fn transform(
    signal: &Signal,
    params: &StftParams,
    derivative: bool,
) -> Result<TfMatrix<Complex64>> {
    check_rates(signal, params)?;
    let k = params.bins;
    let n = signal.len();
    let r = params.radius as i64;
    let window = sampled_window(params, derivative);
    let fft: Arc<dyn Fft<f64>> = FftPlanner::new().plan_fft_forward(k);
    let scale = 1.0 / params.fs;

    let mut values = vec![Complex64::new(0.0, 0.0); n * k];
    values.par_chunks_mut(k).enumerate().for_each_init(
        || vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()],
        |scratch, (row, out)| {
            // fold the windowed segment onto K points; the K-point DFT of the
            // folded buffer equals the direct sum at every bin
            for (i, &w) in window.iter().enumerate() {
                let m = i as i64 - r;
                let idx = row as i64 + m;
                if idx < 0 || idx >= n as i64 {
                    continue;
                }
                let slot = m.rem_euclid(k as i64) as usize;
                out[slot] += signal.samples[idx as usize] * (w * scale);
            }
            fft.process_with_scratch(out, scratch);
        },
    );
    let kind = if derivative {
        TfKind::StftDerivative
    } else {
        TfKind::Stft
    };
    TfMatrix::from_vec(values, n, *params, kind)
}

/// Gaussian-window STFT `V_f^h[n,k]`.
pub fn stft(signal: &Signal, params: &StftParams) -> Result<TfMatrix<Complex64>> {
    transform(signal, params, false)
}

/// STFT with the derivative window `h'_σ`, used by the LIF estimator.
pub fn stft_derivative_window(signal: &Signal, params: &StftParams) -> Result<TfMatrix<Complex64>> {
    transform(signal, params, true)
}

/// Direct O(N·K·R) evaluation of the Riemann sum. Reference for the FFT path.
pub fn stft_direct(
    signal: &Signal,
    params: &StftParams,
    derivative: bool,
) -> Result<TfMatrix<Complex64>> {
    check_rates(signal, params)?;
    let k_bins = params.bins;
    let n = signal.len();
    let r = params.radius as i64;
    let window = sampled_window(params, derivative);
    let mut values = Vec::with_capacity(n * k_bins);
    for row in 0..n as i64 {
        for k in 0..k_bins {
            let mut acc = Complex64::new(0.0, 0.0);
            for m in -r..=r {
                let idx = row + m;
                if idx < 0 || idx >= n as i64 {
                    continue;
                }
                let phase = -2.0 * PI * (k as f64) * (m as f64) / k_bins as f64;
                acc += signal.samples[idx as usize]
                    * window[(m + r) as usize]
                    * Complex64::from_polar(1.0, phase);
            }
            values.push(acc / params.fs);
        }
    }
    let kind = if derivative {
        TfKind::StftDerivative
    } else {
        TfKind::Stft
    };
    TfMatrix::from_vec(values, n, *params, kind)
}

/// Entry-wise squared modulus `S[n,k] = |V[n,k]|²`.
pub fn spectrogram(stft: &TfMatrix<Complex64>) -> TfMatrix<f64> {
    stft.map(TfKind::Spectrogram, |z| z.norm_sqr())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::{synthesize, ModeSpec};

    fn params() -> StftParams {
        StftParams::new(0.04, 128, 256.0).unwrap()
    }

    #[test]
    fn rejects_bad_params() {
        assert!(StftParams::new(0.0, 64, 100.0).is_err());
        assert!(StftParams::new(-0.1, 64, 100.0).is_err());
        assert!(StftParams::new(0.1, 1, 100.0).is_err());
        assert!(StftParams::with_radius(0.1, 16, 100.0, 0).is_err());
    }

    #[test]
    fn default_radius_truncates_below_floor() {
        let p = params();
        let t = p.radius as f64 / p.fs;
        assert!(p.window(t) <= WINDOW_FLOOR);
        assert!(p.window((p.radius - 1) as f64 / p.fs) > WINDOW_FLOOR * 1e-3);
    }

    #[test]
    fn rate_mismatch_is_rejected() {
        let s = synthesize(&[ModeSpec::pure_tone(1.0, 10.0)], 200.0, 64).unwrap();
        assert!(stft(&s, &params()).is_err());
    }

    #[test]
    fn zero_signal_gives_zero_matrix() {
        let p = params();
        let s = Signal::new(vec![Complex64::new(0.0, 0.0); 100], p.fs).unwrap();
        let v = stft(&s, &p).unwrap();
        let d = stft_derivative_window(&s, &p).unwrap();
        assert!(v.values().iter().all(|z| z.norm() == 0.0));
        assert!(d.values().iter().all(|z| z.norm() == 0.0));
        assert!(spectrogram(&v).values().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn window_symmetry() {
        let p = params();
        let w = sampled_window(&p, false);
        let dw = sampled_window(&p, true);
        let len = w.len();
        for i in 0..len {
            assert_eq!(w[i], w[len - 1 - i]);
            assert_eq!(dw[i], -dw[len - 1 - i]);
        }
    }

    #[test]
    fn constant_signal_derivative_window_vanishes_at_dc() {
        let p = params();
        let s = Signal::new(vec![Complex64::new(1.0, 0.0); 256], p.fs).unwrap();
        let d = stft_derivative_window(&s, &p).unwrap();
        for n in p.interior(256) {
            assert!(d.get(n, 0).norm() < 1e-12, "{}", d.get(n, 0));
        }
    }

    #[test]
    fn fft_path_matches_direct_sum() {
        let p = StftParams::new(0.05, 16, 64.0).unwrap();
        // radius exceeds K so the folding path is exercised
        assert!(2 * p.radius + 1 > p.bins);
        let s = synthesize(
            &[
                ModeSpec::pure_tone(1.0, 9.3),
                ModeSpec::linear_chirp(0.5, 20.0, 4.0),
            ],
            p.fs,
            90,
        )
        .unwrap();
        for derivative in [false, true] {
            let fast = transform(&s, &p, derivative).unwrap();
            let slow = stft_direct(&s, &p, derivative).unwrap();
            for (a, b) in fast.values().iter().zip(slow.values()) {
                assert!((a - b).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn tone_gives_gaussian_ribbon() {
        let p = params();
        let k0 = 37;
        let w = p.bin_freq(k0);
        let s = synthesize(&[ModeSpec::pure_tone(1.0, w)], p.fs, 256).unwrap();
        let spec = spectrogram(&stft(&s, &p).unwrap());
        let sigma = p.sigma;
        for n in p.interior(256) {
            for k in 0..p.bins {
                let d = (k as f64 - k0 as f64) * p.bin_width();
                let expected = sigma * sigma * (-2.0 * PI * sigma * sigma * d * d).exp();
                if expected > 1e-8 * sigma * sigma {
                    let rel = (spec.get(n, k) - expected).abs() / expected;
                    assert!(rel < 1e-3, "n={n} k={k} rel={rel}");
                }
            }
        }
    }

    #[test]
    fn spectrogram_is_nonnegative() {
        let p = params();
        let s = synthesize(
            &[
                ModeSpec::pure_tone(2.0, 30.0),
                ModeSpec::sinusoidal_fm(1.0, 70.0, 10.0, 2.0),
            ],
            p.fs,
            200,
        )
        .unwrap();
        let spec = spectrogram(&stft(&s, &p).unwrap());
        assert!(spec.values().iter().all(|&x| x >= 0.0));
    }
}
