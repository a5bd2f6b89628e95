//! Instantaneous frequency (IF) and amplitude (IA) estimation for
//! multicomponent signals whose modes interfere in the time-frequency plane.
//!
//! Each spectrogram time slice is modelled as a finite sum of shifted
//! Gaussians (one per mode plus one per pair of interfering modes) and the
//! shifts are recovered with an annihilating-filter (Prony) solve. Ridge
//! based estimators on the spectrogram and on the Fourier synchrosqueezing
//! transform are provided as baselines.

pub mod error;
pub mod fsst;
pub mod interp;
pub mod metrics;
pub mod prony;
pub mod ridge;
pub mod signal;
pub mod stft;

/// Library version, echoed in experiment manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub use error::{Error, Result};
pub use fsst::{fsst, lif, LifField};
pub use metrics::{estimation_error, ErrorReport};
pub use prony::{prony_if, PronyConfig, PronyOutput, SliceEstimate, Track, TrackKind};
pub use ridge::{extract_lmf, extract_ridges, off_grid_refine, Ridge};
pub use signal::{synthesize, ModeKind, ModeSpec, Signal};
pub use stft::{spectrogram, stft, stft_derivative_window, StftParams, TfKind, TfMatrix};

/// Per-mode IF (and optional IA) series on the signal time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct IfEstimate {
    /// IF in Hz, one value per time index.
    pub freq: Vec<f64>,
    /// IA per time index, when the estimator provides one.
    pub amplitude: Option<Vec<f64>>,
    /// `true` where the value was filled by interpolation rather than estimated.
    pub interpolated: Vec<bool>,
}

impl IfEstimate {
    pub fn from_freq(freq: Vec<f64>) -> Self {
        let n = freq.len();
        Self {
            freq,
            amplitude: None,
            interpolated: vec![false; n],
        }
    }

    pub fn len(&self) -> usize {
        self.freq.len()
    }

    pub fn is_empty(&self) -> bool {
        self.freq.is_empty()
    }
}
