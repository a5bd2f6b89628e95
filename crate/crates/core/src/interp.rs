//! Fritsch–Carlson monotone piecewise cubic Hermite interpolation.

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct MonotoneCubic {
    xs: Vec<f64>,
    ys: Vec<f64>,
    slopes: Vec<f64>,
}

impl MonotoneCubic {
    /// Knots must be finite with strictly increasing abscissae.
    pub fn new(xs: &[f64], ys: &[f64]) -> Result<Self> {
        if xs.len() != ys.len() {
            return Err(Error::LengthMismatch(xs.len(), ys.len()));
        }
        if xs.is_empty() {
            return Err(Error::InvalidParameter("no interpolation knots".into()));
        }
        if xs.iter().chain(ys).any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("non-finite knot".into()));
        }
        if xs.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidParameter(
                "knot abscissae must be strictly increasing".into(),
            ));
        }
        let n = xs.len();
        if n == 1 {
            return Ok(Self {
                xs: xs.to_vec(),
                ys: ys.to_vec(),
                slopes: vec![0.0],
            });
        }
        let secants: Vec<f64> = (0..n - 1)
            .map(|i| (ys[i + 1] - ys[i]) / (xs[i + 1] - xs[i]))
            .collect();
        let mut slopes = vec![0.0; n];
        slopes[0] = secants[0];
        slopes[n - 1] = secants[n - 2];
        for i in 1..n - 1 {
            slopes[i] = if secants[i - 1] * secants[i] <= 0.0 {
                0.0
            } else {
                0.5 * (secants[i - 1] + secants[i])
            };
        }
        for i in 0..n - 1 {
            let d = secants[i];
            if d == 0.0 {
                slopes[i] = 0.0;
                slopes[i + 1] = 0.0;
                continue;
            }
            let a = slopes[i] / d;
            let b = slopes[i + 1] / d;
            let r = a * a + b * b;
            if r > 9.0 {
                let tau = 3.0 / r.sqrt();
                slopes[i] = tau * a * d;
                slopes[i + 1] = tau * b * d;
            }
        }
        Ok(Self {
            xs: xs.to_vec(),
            ys: ys.to_vec(),
            slopes,
        })
    }

    /// Evaluates the interpolant; outside the knot range the nearest knot
    /// value is returned.
    pub fn eval(&self, x: f64) -> f64 {
        let n = self.xs.len();
        if x <= self.xs[0] {
            return self.ys[0];
        }
        if x >= self.xs[n - 1] {
            return self.ys[n - 1];
        }
        let i = self.xs.partition_point(|&k| k <= x) - 1;
        let h = self.xs[i + 1] - self.xs[i];
        let t = (x - self.xs[i]) / h;
        let t2 = t * t;
        let t3 = t2 * t;
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        h00 * self.ys[i]
            + h10 * h * self.slopes[i]
            + h01 * self.ys[i + 1]
            + h11 * h * self.slopes[i + 1]
    }
}

/// Fills `None` entries of a series: interior runs by monotone cubic
/// interpolation over the defined points, leading and trailing runs by the
/// nearest defined value. Returns `None` when nothing is defined.
pub fn fill_series(series: &[Option<f64>]) -> Option<Vec<f64>> {
    let (xs, ys): (Vec<f64>, Vec<f64>) = series
        .iter()
        .enumerate()
        .filter_map(|(i, v)| v.map(|v| (i as f64, v)))
        .unzip();
    if xs.is_empty() {
        return None;
    }
    let interp = MonotoneCubic::new(&xs, &ys).ok()?;
    Some(
        series
            .iter()
            .enumerate()
            .map(|(i, v)| v.unwrap_or_else(|| interp.eval(i as f64)))
            .collect(),
    )
}
