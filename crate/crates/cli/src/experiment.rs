//! Running estimators on a signal and scoring them against the analytic IF.

use std::ops::Range;
use std::path::Path;

use ifprony::fsst::default_gamma;
use ifprony::metrics::score_modes;
use ifprony::prony::prony_from_spectrogram;
use ifprony::ridge::{extract_ridges, sort_by_frequency, DEFAULT_JUMP_BINS};
use ifprony::{
    fsst, lif, off_grid_refine, spectrogram, stft, stft_derivative_window, synthesize, ErrorReport,
    IfEstimate, LifField, PronyConfig, Ridge, Signal, StftParams, TfMatrix,
};
use log::{info, warn};
use rayon::prelude::*;

use crate::config::{Estimator, ExperimentConfig};
use crate::error::CliError;
use crate::output::read_signal_csv;

/// Result of one estimator at one window width.
#[derive(Debug, Clone)]
pub struct EstimatorRun {
    /// Estimator name, possibly with a suffix such as `prony-q3`.
    pub label: String,
    pub estimator: Estimator,
    pub sigma: f64,
    /// Mode estimates, ascending frequency.
    pub estimates: Vec<IfEstimate>,
    /// Ridges behind a ridge-based estimate.
    pub ridges: Vec<Ridge>,
    /// Interference tracks found by Prony.
    pub interference: usize,
    pub warnings: Vec<String>,
    /// Time indices the errors are computed over.
    pub scored: Range<usize>,
    /// One report per true mode, empty when the truth is unknown.
    pub errors: Vec<ErrorReport>,
}

impl EstimatorRun {
    pub fn rmse(&self) -> Vec<f64> {
        self.errors.iter().map(|e| e.rmse).collect()
    }

    /// Mean RMSE over modes, `NaN` without ground truth.
    pub fn mean_rmse(&self) -> f64 {
        if self.errors.is_empty() {
            return f64::NAN;
        }
        self.errors.iter().map(|e| e.rmse).sum::<f64>() / self.errors.len() as f64
    }
}

/// Transforms of one signal at one window width.
#[derive(Debug, Clone)]
pub struct Transforms {
    pub params: StftParams,
    pub spectrogram: TfMatrix<f64>,
    /// Magnitude of the FSST and the LIF field it was built from.
    pub fsst: Option<(TfMatrix<f64>, LifField)>,
}

impl Transforms {
    pub fn compute(
        signal: &Signal,
        params: &StftParams,
        with_fsst: bool,
    ) -> Result<Self, CliError> {
        let vh = stft(signal, params)?;
        let fsst = if with_fsst {
            let vdh = stft_derivative_window(signal, params)?;
            let field = lif(&vh, &vdh, default_gamma(&vh))?;
            Some((fsst(&vh, &field)?, field))
        } else {
            None
        };
        Ok(Self {
            params: *params,
            spectrogram: spectrogram(&vh),
            fsst,
        })
    }
}

/// Everything a run produced.
#[derive(Debug, Clone)]
pub struct RunResult {
    pub config: ExperimentConfig,
    pub signal: Signal,
    /// True IF per mode and time index, when the signal was synthesised.
    pub truth: Option<Truth>,
    /// Runs ordered by window width, then estimator.
    pub runs: Vec<EstimatorRun>,
    /// Transforms for single-width runs (kept for export).
    pub transforms: Option<Transforms>,
}

impl RunResult {
    pub fn find(&self, label: &str, sigma: f64) -> Option<&EstimatorRun> {
        self.runs
            .iter()
            .filter(|r| r.label == label)
            .min_by(|a, b| (a.sigma - sigma).abs().total_cmp(&(b.sigma - sigma).abs()))
    }

    pub fn labels(&self) -> Vec<String> {
        let mut labels: Vec<String> = Vec::new();
        for r in &self.runs {
            if !labels.contains(&r.label) {
                labels.push(r.label.clone());
            }
        }
        labels
    }

    pub fn sigmas(&self) -> Vec<f64> {
        let mut s: Vec<f64> = self.runs.iter().map(|r| r.sigma).collect();
        s.dedup();
        s
    }
}

/// True IF per mode, sampled at every time index.
pub type Truth = Vec<Vec<f64>>;

/// Synthesises (or reads) the signal of a config.
pub fn load_signal(cfg: &ExperimentConfig) -> Result<(Signal, Option<Truth>), CliError> {
    if let Some(path) = &cfg.input {
        return Ok((read_signal_csv(Path::new(path))?, None));
    }
    let specs = cfg.mode_specs();
    let signal = synthesize(&specs, cfg.fs, cfg.samples)?;
    let truth = specs
        .iter()
        .map(|m| {
            (0..cfg.samples)
                .map(|n| m.true_if(signal.time(n)))
                .collect()
        })
        .collect();
    Ok((signal, Some(truth)))
}

/// Runs one estimator on precomputed transforms.
pub fn run_estimator(
    estimator: Estimator,
    tf: &Transforms,
    prony: &PronyConfig,
) -> Result<EstimatorRun, CliError> {
    let params = &tf.params;
    let modes = prony.modes;
    let mut run = EstimatorRun {
        label: estimator.name().to_string(),
        estimator,
        sigma: params.sigma,
        estimates: Vec::new(),
        ridges: Vec::new(),
        interference: 0,
        warnings: Vec::new(),
        scored: params.interior(tf.spectrogram.rows()),
        errors: Vec::new(),
    };
    match estimator {
        Estimator::Prony => {
            let out = prony_from_spectrogram(&tf.spectrogram, prony)?;
            if out.modes.is_empty() {
                return Err(CliError::Numerical(format!(
                    "Prony found no mode track at sigma = {} ({})",
                    params.sigma,
                    out.warnings.join("; ")
                )));
            }
            run.estimates = out.estimates();
            run.interference = out.interference.len();
            run.warnings = out.warnings;
        }
        Estimator::IfSr | Estimator::IfFsstr | Estimator::IfFsstrOg => {
            let matrix = match (estimator, &tf.fsst) {
                (Estimator::IfSr, _) => &tf.spectrogram,
                (_, Some((m, _))) => m,
                (_, None) => {
                    return Err(CliError::Config(format!(
                        "{estimator} needs the FSST, which was not computed"
                    )))
                }
            };
            let set = extract_ridges(matrix, modes, DEFAULT_JUMP_BINS)?;
            if set.incomplete {
                run.warnings.push(format!(
                    "{estimator} extracted {} of {modes} ridges",
                    set.ridges.len()
                ));
            }
            let mut ridges = set.ridges;
            sort_by_frequency(&mut ridges);
            run.estimates = ridges
                .iter()
                .map(|r| match (estimator, &tf.fsst) {
                    (Estimator::IfFsstrOg, Some((_, field))) => off_grid_refine(r, field, params),
                    _ => r.to_estimate(params),
                })
                .collect();
            run.ridges = ridges;
        }
    }
    for w in &run.warnings {
        warn!("sigma={}: {w}", params.sigma);
    }
    Ok(run)
}

/// Scores a run against the true IF series over its interior range.
pub fn score(run: &mut EstimatorRun, truth: &[Vec<f64>]) -> Result<(), CliError> {
    if run.estimates.is_empty() {
        return Err(CliError::Numerical(format!(
            "{} produced no estimate at sigma = {}",
            run.label, run.sigma
        )));
    }
    run.errors = score_modes(&run.estimates, truth, run.scored.clone())?;
    Ok(())
}

fn run_sigma(
    cfg: &ExperimentConfig,
    signal: &Signal,
    truth: Option<&[Vec<f64>]>,
    sigma: f64,
) -> Result<(Vec<EstimatorRun>, Transforms), CliError> {
    let params = StftParams::new(sigma, cfg.bins, signal.fs)?;
    let prony = cfg.prony_config();
    prony.validate(&params)?;
    let tf = Transforms::compute(
        signal,
        &params,
        cfg.estimators
            .iter()
            .any(|e| matches!(e, Estimator::IfFsstr | Estimator::IfFsstrOg)),
    )?;
    let mut runs = Vec::with_capacity(cfg.estimators.len());
    for &e in &cfg.estimators {
        let mut r = run_estimator(e, &tf, &prony)?;
        if let Some(t) = truth {
            score(&mut r, t)?;
        }
        runs.push(r);
    }
    Ok((runs, tf))
}

/// Runs every configured estimator at every configured window width.
/// Widths are processed in parallel; results come back in sweep order.
pub fn run(cfg: &ExperimentConfig) -> Result<RunResult, CliError> {
    cfg.validate()?;
    let (signal, truth) = load_signal(cfg)?;
    let sigmas = cfg.sigma.values();
    info!(
        "{}: {} samples at {} Hz, {} window width(s), estimators {:?}",
        cfg.name,
        signal.len(),
        signal.fs,
        sigmas.len(),
        cfg.estimators
    );
    let per_sigma: Vec<(Vec<EstimatorRun>, Transforms)> = sigmas
        .par_iter()
        .map(|&s| run_sigma(cfg, &signal, truth.as_deref(), s))
        .collect::<Result<_, _>>()?;
    let single = per_sigma.len() == 1;
    let mut runs = Vec::new();
    let mut transforms = None;
    for (r, tf) in per_sigma {
        runs.extend(r);
        if single {
            transforms = Some(tf);
        }
    }
    Ok(RunResult {
        config: cfg.clone(),
        signal,
        truth,
        runs,
        transforms,
    })
}
