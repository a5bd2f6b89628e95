//! Synthetic multicomponent signals with analytic IF ground truth.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Phase law of a single mode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ModeKind {
    /// φ(t) = ω·t
    PureTone { freq: f64 },
    /// φ(t) = ω₀·t + (c/2)·t²
    LinearChirp { freq: f64, rate: f64 },
    /// φ(t) = ω₀·t − depth/(2π·rate)·cos(2π·rate·t)
    SinusoidalFm { freq: f64, depth: f64, rate: f64 },
}

/// A constant-amplitude mode `A·exp(2iπ φ(t))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeSpec {
    pub kind: ModeKind,
    pub amplitude: f64,
}

impl ModeSpec {
    pub fn pure_tone(amplitude: f64, freq: f64) -> Self {
        Self {
            kind: ModeKind::PureTone { freq },
            amplitude,
        }
    }

    pub fn linear_chirp(amplitude: f64, freq: f64, rate: f64) -> Self {
        Self {
            kind: ModeKind::LinearChirp { freq, rate },
            amplitude,
        }
    }

    pub fn sinusoidal_fm(amplitude: f64, freq: f64, depth: f64, rate: f64) -> Self {
        Self {
            kind: ModeKind::SinusoidalFm { freq, depth, rate },
            amplitude,
        }
    }

    /// Phase φ(t) in cycles.
    pub fn phase(&self, t: f64) -> f64 {
        match self.kind {
            ModeKind::PureTone { freq } => freq * t,
            ModeKind::LinearChirp { freq, rate } => freq * t + 0.5 * rate * t * t,
            ModeKind::SinusoidalFm { freq, depth, rate } => {
                freq * t - depth / (2.0 * PI * rate) * (2.0 * PI * rate * t).cos()
            }
        }
    }

    /// Analytic instantaneous frequency φ'(t) in Hz.
    pub fn true_if(&self, t: f64) -> f64 {
        match self.kind {
            ModeKind::PureTone { freq } => freq,
            ModeKind::LinearChirp { freq, rate } => freq + rate * t,
            ModeKind::SinusoidalFm { freq, depth, rate } => {
                freq + depth * (2.0 * PI * rate * t).sin()
            }
        }
    }

    /// Smallest IF over `[0, duration]`.
    pub fn min_if(&self, duration: f64) -> f64 {
        let mut candidates = vec![0.0, duration];
        if let ModeKind::SinusoidalFm { rate, .. } = self.kind {
            // extrema of sin(2π·rate·t) sit at quarter periods
            let quarter = 0.25 / rate;
            let mut t = quarter;
            while t <= duration {
                candidates.push(t);
                t += 2.0 * quarter;
            }
        }
        candidates
            .into_iter()
            .map(|t| self.true_if(t))
            .fold(f64::INFINITY, f64::min)
    }

    /// Checks amplitude and IF sign over a support of `duration` seconds.
    pub fn validate(&self, duration: f64) -> Result<()> {
        if !(self.amplitude.is_finite() && self.amplitude > 0.0) {
            return Err(Error::InvalidMode(format!(
                "amplitude must be positive, got {}",
                self.amplitude
            )));
        }
        let params: &[f64] = match &self.kind {
            ModeKind::PureTone { freq } => &[*freq],
            ModeKind::LinearChirp { freq, rate } => &[*freq, *rate],
            ModeKind::SinusoidalFm { freq, depth, rate } => {
                if *rate <= 0.0 {
                    return Err(Error::InvalidMode(format!(
                        "modulation rate must be positive, got {rate}"
                    )));
                }
                &[*freq, *depth, *rate]
            }
        };
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::InvalidMode("non-finite phase parameter".into()));
        }
        let min_if = self.min_if(duration);
        if min_if < 0.0 {
            return Err(Error::InvalidMode(format!(
                "instantaneous frequency drops to {min_if} Hz on [0, {duration}] s"
            )));
        }
        Ok(())
    }
}

/// Uniformly sampled complex signal.
#[derive(Debug, Clone, PartialEq)]
pub struct Signal {
    pub samples: Vec<Complex64>,
    pub fs: f64,
}

impl Signal {
    pub fn new(samples: Vec<Complex64>, fs: f64) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::InvalidSignal("empty sample sequence".into()));
        }
        if !(fs.is_finite() && fs > 0.0) {
            return Err(Error::InvalidSignal(format!(
                "sampling rate must be positive, got {fs}"
            )));
        }
        if samples
            .iter()
            .any(|z| !(z.re.is_finite() && z.im.is_finite()))
        {
            return Err(Error::InvalidSignal("non-finite sample".into()));
        }
        Ok(Self { samples, fs })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / self.fs
    }

    pub fn time(&self, n: usize) -> f64 {
        n as f64 / self.fs
    }
}

/// Samples `Σ_p A_p·exp(2iπ φ_p(n/F_s))` for `n = 0..N`.
pub fn synthesize(specs: &[ModeSpec], fs: f64, n: usize) -> Result<Signal> {
    if specs.is_empty() {
        return Err(Error::InvalidMode("at least one mode is required".into()));
    }
    if !(fs.is_finite() && fs > 0.0) {
        return Err(Error::InvalidSignal(format!(
            "sampling rate must be positive, got {fs}"
        )));
    }
    if n == 0 {
        return Err(Error::InvalidSignal("N must be at least 1".into()));
    }
    let duration = (n - 1) as f64 / fs;
    for spec in specs {
        spec.validate(duration)?;
    }
    let samples = (0..n)
        .map(|i| {
            let t = i as f64 / fs;
            specs
                .iter()
                .map(|s| Complex64::from_polar(s.amplitude, 2.0 * PI * s.phase(t)))
                .sum()
        })
        .collect();
    Signal::new(samples, fs)
}
