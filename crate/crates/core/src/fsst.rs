//! Local instantaneous frequency (LIF) estimator and Fourier-based
//! synchrosqueezing transform (FSST).

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::stft::{TfKind, TfMatrix};

/// Default LIF validity threshold relative to `max |V|`.
pub const DEFAULT_GAMMA_RATIO: f64 = 1e-3;

/// LIF estimate `ω̂[n,k]` in Hz, defined only where `|V[n,k]| > γ`.
#[derive(Debug, Clone, PartialEq)]
pub struct LifField {
    freq: Vec<f64>,
    valid: Vec<bool>,
    rows: usize,
    cols: usize,
    pub gamma: f64,
}

impl LifField {
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn get(&self, n: usize, k: usize) -> Option<f64> {
        let i = n * self.cols + k;
        self.valid[i].then(|| self.freq[i])
    }

    pub fn is_valid(&self, n: usize, k: usize) -> bool {
        self.valid[n * self.cols + k]
    }
}

/// `γ = ratio · max|V|`
pub fn default_gamma(vh: &TfMatrix<Complex64>) -> f64 {
    DEFAULT_GAMMA_RATIO * vh.values().iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// `ω̂[n,k] = η_k − (1/2π)·Im(V^{h'}[n,k] / V^h[n,k])` where `|V^h| > γ`.
pub fn lif(vh: &TfMatrix<Complex64>, vdh: &TfMatrix<Complex64>, gamma: f64) -> Result<LifField> {
    vh.check_same_shape(vdh)?;
    if vh.params != vdh.params {
        return Err(Error::InvalidParameter(
            "STFT matrices were computed with different parameters".into(),
        ));
    }
    let (rows, cols) = vh.shape();
    let params = vh.params;
    let (freq, valid) = vh
        .values()
        .iter()
        .zip(vdh.values())
        .enumerate()
        .map(|(i, (&v, &dv))| {
            if v.norm() > gamma {
                let eta = params.bin_freq(i % cols);
                (eta - (dv / v).im / (2.0 * PI), true)
            } else {
                (f64::NAN, false)
            }
        })
        .unzip();
    Ok(LifField {
        freq,
        valid,
        rows,
        cols,
        gamma,
    })
}

/// Reassigns `|V[n,k]|` of every valid cell to bin `round(ω̂·K/F_s)`,
/// clipped to `[0, K-1]`.
pub fn fsst(vh: &TfMatrix<Complex64>, lif: &LifField) -> Result<TfMatrix<f64>> {
    if vh.shape() != lif.shape() {
        return Err(Error::ShapeMismatch {
            expected: vh.shape(),
            got: lif.shape(),
        });
    }
    let (rows, cols) = vh.shape();
    let params = vh.params;
    let mut out = vec![0.0; rows * cols];
    out.par_chunks_mut(cols).enumerate().for_each(|(n, row)| {
        for k in 0..cols {
            if let Some(w) = lif.get(n, k) {
                let bin = (w / params.bin_width())
                    .round()
                    .clamp(0.0, (cols - 1) as f64) as usize;
                row[bin] += vh.get(n, k).norm();
            }
        }
    });
    TfMatrix::from_vec(out, rows, params, TfKind::Fsst)
}
