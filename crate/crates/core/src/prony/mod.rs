//! Prony-based IF/IA estimation on spectrogram slices.
//!
//! Each slice of the spectrogram of `P` modes is modelled as
//! `Q = P(P+1)/2` Gaussians: one per mode, centred on its IF with a positive
//! weight, and one per pair of modes, centred halfway between them with a
//! weight that oscillates in sign with the beat between the pair. The
//! pipeline estimates all `Q` components per slice, links them over time,
//! drops jumps and weak points, interpolates the holes and finally discards
//! the components whose weight goes negative.

mod slice;
mod tracks;

use log::{debug, warn};
use rayon::prelude::*;

pub use slice::{
    condition_number, fourier_coeffs, project_slice, refine, root_frequency, roots_to_freqs,
    solve_amplitudes, solve_annihilating, yule_walker_matrix, Annihilator, FourierCoeffs,
    Projection, Root,
};
pub use tracks::{
    classify, fill_gaps, prune_amplitude, prune_jumps, track, Classification, Track, TrackKind,
};

use crate::error::{Error, Result};
use crate::signal::Signal;
use crate::stft::{spectrogram, stft, StftParams, TfMatrix};
use crate::IfEstimate;

/// Gauss–Newton polishing steps applied to each slice solution.
const REFINE_STEPS: usize = 4;

/// Fourier coefficients kept beyond the `2Q` the annihilating filter needs;
/// the polishing step fits all of them.
pub const FOURIER_MARGIN: usize = 2;

/// Knobs of the Prony pipeline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PronyConfig {
    /// Number of modes P.
    pub modes: usize,
    /// Number of Gaussian components Q per slice.
    pub components: usize,
    /// Fourier truncation order M₀.
    pub fourier_order: usize,
    /// Relative amplitude threshold ρ.
    pub amplitude_ratio: f64,
    /// Tracking gate and jump threshold in Hz; `None` means `3·F_s/K`.
    pub jump_hz: Option<f64>,
    /// Half width w of the median window used for jump removal.
    pub median_half_window: usize,
    /// Minimum run of negative amplitude tagging an interference track.
    pub min_negative_run: usize,
    /// Yule–Walker systems above this condition number are reduced in order.
    pub max_condition: f64,
    /// Roots farther than this from the unit circle are counted as off-model.
    pub radius_tol: f64,
}

impl PronyConfig {
    /// Defaults for `modes` modes: `Q = P(P+1)/2`, `M₀ = Q + 2`.
    pub fn new(modes: usize) -> Self {
        let q = modes * (modes + 1) / 2;
        Self {
            modes,
            components: q,
            fourier_order: q + FOURIER_MARGIN,
            amplitude_ratio: 1e-2,
            jump_hz: None,
            median_half_window: 5,
            min_negative_run: 3,
            max_condition: 1e12,
            radius_tol: 1e-4,
        }
    }

    /// Overrides Q, with `M₀ = Q + 2`.
    pub fn with_components(mut self, q: usize) -> Self {
        self.components = q;
        self.fourier_order = q + FOURIER_MARGIN;
        self
    }

    pub fn jump_threshold(&self, params: &StftParams) -> f64 {
        self.jump_hz.unwrap_or(3.0 * params.bin_width())
    }

    pub fn validate(&self, params: &StftParams) -> Result<()> {
        if self.modes == 0 || self.components == 0 {
            return Err(Error::InvalidParameter("P and Q must be >= 1".into()));
        }
        if self.components < self.modes {
            return Err(Error::InvalidParameter(format!(
                "Q = {} cannot hold P = {} modes",
                self.components, self.modes
            )));
        }
        if self.fourier_order < self.components {
            return Err(Error::InvalidParameter(format!(
                "M0 = {} must be >= Q = {}",
                self.fourier_order, self.components
            )));
        }
        if params.bins < 2 * self.fourier_order + 1 {
            return Err(Error::InvalidParameter(format!(
                "K = {} must be >= 2M0+1 = {}",
                params.bins,
                2 * self.fourier_order + 1
            )));
        }
        if !(self.amplitude_ratio > 0.0 && self.amplitude_ratio < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "amplitude ratio must lie in (0, 1), got {}",
                self.amplitude_ratio
            )));
        }
        if let Some(j) = self.jump_hz {
            if !(j > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "jump threshold must be positive, got {j}"
                )));
            }
        }
        if !(self.max_condition > 1.0) {
            return Err(Error::InvalidParameter(
                "condition bound must exceed 1".into(),
            ));
        }
        Ok(())
    }
}

/// One Gaussian component recovered from a slice.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Component {
    /// Centre frequency in `[0, F_s)` Hz.
    pub freq: f64,
    /// Real part of the recovered weight.
    pub amplitude: f64,
    /// Magnitude of the imaginary part of the weight.
    pub residual: f64,
    /// Modulus of the annihilating-filter root.
    pub radius: f64,
}

/// Components recovered at one time index, sorted by frequency.
#[derive(Debug, Clone, PartialEq)]
pub struct SliceEstimate {
    pub index: usize,
    pub components: Vec<Component>,
    /// Condition number of the full-order Yule–Walker matrix.
    pub condition: f64,
    /// The full-order system was rejected; `components` holds a lower-order
    /// solution (possibly empty).
    pub degenerate: bool,
}

/// Precomputed per-slice solver.
#[derive(Debug, Clone)]
pub struct SliceSolver {
    cfg: PronyConfig,
    fs: f64,
    coeffs: FourierCoeffs,
}

impl SliceSolver {
    pub fn new(cfg: &PronyConfig, params: &StftParams) -> Result<Self> {
        cfg.validate(params)?;
        Ok(Self {
            cfg: *cfg,
            fs: params.fs,
            coeffs: fourier_coeffs(params.sigma, params.fs, cfg.fourier_order)?,
        })
    }

    pub fn project(&self, slice: &[f64]) -> Result<Projection> {
        project_slice(slice, &self.coeffs)
    }

    fn solve_order(&self, l: &Projection, order: usize) -> Result<(Vec<Component>, f64)> {
        let h = solve_annihilating(l, order)?;
        if h.condition > self.cfg.max_condition {
            return Err(Error::Singular(format!(
                "condition number {:e} at order {order}",
                h.condition
            )));
        }
        let roots = roots_to_freqs(&h.coeffs, self.fs)?;
        let freqs: Vec<f64> = roots.iter().map(|r| r.freq).collect();
        let amps = solve_amplitudes(l, &freqs, self.fs)?;
        let real: Vec<f64> = amps.iter().map(|a| a.re).collect();
        let (freqs, real) = refine(l, &freqs, &real, self.fs, REFINE_STEPS);
        let mut components: Vec<Component> = roots
            .iter()
            .zip(amps)
            .zip(freqs.iter().zip(real))
            .map(|((r, a), (&freq, amplitude))| Component {
                freq,
                amplitude,
                residual: a.im.abs(),
                radius: r.radius,
            })
            .collect();
        components.sort_by(|a, b| a.freq.total_cmp(&b.freq));
        Ok((components, h.condition))
    }

    /// Prony estimate of the slice at time index `index`.
    ///
    /// When the order-Q system is ill-conditioned (fewer than Q components
    /// present, e.g. where an interference term vanishes) the order is
    /// lowered until the system is solvable.
    pub fn estimate(&self, index: usize, slice: &[f64]) -> SliceEstimate {
        let q = self.cfg.components;
        let mut out = SliceEstimate {
            index,
            components: Vec::new(),
            condition: f64::INFINITY,
            degenerate: true,
        };
        let Ok(l) = self.project(slice) else {
            return out;
        };
        for order in (1..=q).rev() {
            match self.solve_order(&l, order) {
                Ok((components, condition)) => {
                    if order == q {
                        out.condition = condition;
                        out.degenerate = false;
                    }
                    out.components = components;
                    return out;
                }
                Err(e) => {
                    if order == q {
                        out.condition = condition_number(&yule_walker_matrix(&l, q));
                    }
                    debug!("slice {index}: order {order} rejected: {e}");
                }
            }
        }
        out
    }
}

/// Single-slice convenience wrapper around [`SliceSolver`].
pub fn estimate_slice(
    slice: &[f64],
    index: usize,
    cfg: &PronyConfig,
    params: &StftParams,
) -> Result<SliceEstimate> {
    Ok(SliceSolver::new(cfg, params)?.estimate(index, slice))
}

#[derive(Debug, Clone, PartialEq)]
pub struct PronyOutput {
    pub slices: Vec<SliceEstimate>,
    /// Mode tracks, ascending mean frequency.
    pub modes: Vec<Track>,
    pub interference: Vec<Track>,
    /// Human-readable notes on degenerate or unexpected results.
    pub warnings: Vec<String>,
}

impl PronyOutput {
    pub fn estimates(&self) -> Vec<IfEstimate> {
        self.modes
            .iter()
            .map(|t| IfEstimate {
                freq: t.freq.iter().map(|f| f.unwrap_or(f64::NAN)).collect(),
                amplitude: Some(t.amplitude.iter().map(|a| a.unwrap_or(f64::NAN)).collect()),
                interpolated: t.interpolated.clone(),
            })
            .collect()
    }
}

/// Time indices whose window support `[n-R, n+R]` lies inside the signal.
pub fn supported_range(rows: usize, params: &StftParams) -> std::ops::Range<usize> {
    let r = params.radius;
    let end = rows.saturating_sub(r);
    r.min(end)..end
}

/// Runs the per-slice estimation over a spectrogram. Slices are divided by
/// σ² first, so mode weights read as `A_p²`. Slices whose window overlaps
/// the zero padding do not follow the Gaussian model and are returned empty.
pub fn estimate_slices(spec: &TfMatrix<f64>, cfg: &PronyConfig) -> Result<Vec<SliceEstimate>> {
    let params = spec.params;
    let solver = SliceSolver::new(cfg, &params)?;
    let support = supported_range(spec.rows(), &params);
    if support.is_empty() {
        return Err(Error::InvalidParameter(format!(
            "signal of {} samples is shorter than the window support 2R+1 = {}",
            spec.rows(),
            2 * params.radius + 1
        )));
    }
    let scale = 1.0 / (params.sigma * params.sigma);
    Ok((0..spec.rows())
        .into_par_iter()
        .map(|n| {
            if !support.contains(&n) {
                return SliceEstimate {
                    index: n,
                    components: Vec::new(),
                    condition: f64::NAN,
                    degenerate: false,
                };
            }
            let slice: Vec<f64> = spec.row(n).iter().map(|s| s * scale).collect();
            solver.estimate(n, &slice)
        })
        .collect())
}

/// Tracking and post-processing on precomputed slice estimates.
pub fn post_process(
    slices: Vec<SliceEstimate>,
    cfg: &PronyConfig,
    params: &StftParams,
) -> PronyOutput {
    let mut warnings = Vec::new();
    let degenerate = slices.iter().filter(|s| s.degenerate).count();
    if degenerate > 0 {
        debug!(
            "{degenerate} of {} slices used a reduced order",
            slices.len()
        );
    }
    let empty = slices
        .iter()
        .filter(|s| s.degenerate && s.components.is_empty())
        .count();
    if empty > 0 {
        warnings.push(format!("{empty} slices produced no estimate"));
    }
    let mismatch = slices
        .iter()
        .flat_map(|s| &s.components)
        .filter(|c| c.residual > 1e-3 * c.amplitude.abs())
        .count();
    if mismatch > 0 {
        debug!("{mismatch} components carry an imaginary weight above 1e-3 of the real part");
    }
    let off_circle = slices
        .iter()
        .filter(|s| !s.degenerate)
        .flat_map(|s| &s.components)
        .filter(|c| (c.radius - 1.0).abs() > cfg.radius_tol)
        .count();
    if off_circle > 0 {
        debug!(
            "{off_circle} roots lie off the unit circle by more than {}",
            cfg.radius_tol
        );
    }

    let gate = cfg.jump_threshold(params);
    let tracks = track(&slices, cfg.components, gate, cfg.amplitude_ratio);
    let tracks = prune_jumps(tracks, gate, cfg.median_half_window);
    let tracks = prune_amplitude(tracks, cfg.amplitude_ratio);
    let tracks = fill_gaps(tracks);
    let classes = classify(tracks, cfg.amplitude_ratio, cfg.min_negative_run, cfg.modes);
    if classes.count_mismatch {
        let msg = format!(
            "expected {} mode tracks, {} survived classification",
            cfg.modes,
            classes.modes.len()
        );
        warn!("{msg}");
        warnings.push(msg);
    }
    PronyOutput {
        slices,
        modes: classes.modes,
        interference: classes.interference,
        warnings,
    }
}

/// Full pipeline on a precomputed spectrogram.
pub fn prony_from_spectrogram(spec: &TfMatrix<f64>, cfg: &PronyConfig) -> Result<PronyOutput> {
    let slices = estimate_slices(spec, cfg)?;
    Ok(post_process(slices, cfg, &spec.params))
}

/// Full pipeline: spectrogram, per-slice Prony, tracking, jump and amplitude
/// pruning, gap filling, classification.
pub fn prony_if(signal: &Signal, params: &StftParams, cfg: &PronyConfig) -> Result<PronyOutput> {
    cfg.validate(params)?;
    let spec = spectrogram(&stft(signal, params)?);
    prony_from_spectrogram(&spec, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config() {
        let c = PronyConfig::new(3);
        assert_eq!(c.components, 6);
        assert_eq!(c.fourier_order, 8);
        let c = PronyConfig::new(2).with_components(2);
        assert_eq!(c.components, 2);
        assert_eq!(c.fourier_order, 4);
    }

    #[test]
    fn config_validation() {
        let p = StftParams::new(0.04, 512, 1024.0).unwrap();
        assert!(PronyConfig::new(2).validate(&p).is_ok());
        let small = StftParams::new(0.04, 12, 1024.0).unwrap();
        assert!(PronyConfig::new(3).validate(&small).is_err());
        let mut c = PronyConfig::new(2);
        c.fourier_order = 2;
        assert!(c.validate(&p).is_err());
        let mut c = PronyConfig::new(2);
        c.amplitude_ratio = 1.0;
        assert!(c.validate(&p).is_err());
        assert!(PronyConfig::new(0).validate(&p).is_err());
        assert!(PronyConfig::new(3).with_components(2).validate(&p).is_err());
    }

    #[test]
    fn zero_slice_is_degenerate_without_components() {
        let p = StftParams::new(0.04, 64, 256.0).unwrap();
        let e = estimate_slice(&[0.0; 64], 3, &PronyConfig::new(1), &p).unwrap();
        assert!(e.degenerate);
        assert!(e.components.is_empty());
        assert_eq!(e.index, 3);
    }
}
