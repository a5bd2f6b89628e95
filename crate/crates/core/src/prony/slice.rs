//! Per-slice Prony estimation.
//!
//! A spectrogram slice `s[k] = Σ_q a_q g(k F_s/K − η_q)` with
//! `g(x) = exp(-2πσ²x²)` is projected onto its low-order Fourier
//! coefficients `l_m = Σ_q a_q exp(-2iπ m η_q / F_s)`, a sum of complex
//! exponentials in `m`. The annihilating filter of `l` has the roots
//! `exp(-2iπ η_q / F_s)`, and the amplitudes follow from a Vandermonde solve.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

const UNDERFLOW: f64 = 1e-300;

/// `c_m = exp(-π m² / (2σ²F_s²)) / (√2 σ F_s)` for `m = -M₀..=M₀`.
#[derive(Debug, Clone, PartialEq)]
pub struct FourierCoeffs {
    m0: usize,
    values: Vec<f64>,
}

impl FourierCoeffs {
    pub fn order(&self) -> usize {
        self.m0
    }

    pub fn get(&self, m: i64) -> f64 {
        self.values[(m + self.m0 as i64) as usize]
    }
}

pub fn fourier_coeffs(sigma: f64, fs: f64, m0: usize) -> Result<FourierCoeffs> {
    if !(sigma > 0.0 && fs > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "sigma and F_s must be positive, got {sigma}, {fs}"
        )));
    }
    let sf = sigma * fs;
    let c0 = 1.0 / (2f64.sqrt() * sf);
    let values = (-(m0 as i64)..=m0 as i64)
        .map(|m| c0 * (-PI * (m * m) as f64 / (2.0 * sf * sf)).exp())
        .collect();
    Ok(FourierCoeffs { m0, values })
}

/// `l_m` for `m = -M₀..=M₀`.
#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    m0: usize,
    values: Vec<Complex64>,
}

impl Projection {
    pub fn from_fn(m0: usize, f: impl Fn(i64) -> Complex64) -> Self {
        Self {
            m0,
            values: (-(m0 as i64)..=m0 as i64).map(f).collect(),
        }
    }

    pub fn order(&self) -> usize {
        self.m0
    }

    pub fn get(&self, m: i64) -> Complex64 {
        self.values[(m + self.m0 as i64) as usize]
    }

    pub fn conj(&self) -> Self {
        Self {
            m0: self.m0,
            values: self.values.iter().map(|z| z.conj()).collect(),
        }
    }
}

/// `l_m = (1/(K c_m)) Σ_k s[k] exp(-2iπ m k / K)`: orthogonal projection of
/// the slice on the first `2M₀+1` Fourier atoms, scaled by `1/c_m`.
pub fn project_slice(slice: &[f64], coeffs: &FourierCoeffs) -> Result<Projection> {
    let k_bins = slice.len();
    let m0 = coeffs.order();
    if k_bins < 2 * m0 + 1 {
        return Err(Error::InvalidParameter(format!(
            "K = {k_bins} bins cannot resolve M0 = {m0} (need K >= 2M0+1)"
        )));
    }
    for m in -(m0 as i64)..=m0 as i64 {
        let c = coeffs.get(m);
        if c < UNDERFLOW {
            return Err(Error::CoefficientUnderflow { m, value: c });
        }
    }
    let k = k_bins as i64;
    Ok(Projection::from_fn(m0, |m| {
        let sum: Complex64 = slice
            .iter()
            .enumerate()
            .map(|(j, &s)| {
                // reduce m·j modulo K before forming the angle
                let r = (m * j as i64).rem_euclid(k);
                s * Complex64::from_polar(1.0, -2.0 * PI * r as f64 / k as f64)
            })
            .sum();
        sum / (k_bins as f64 * coeffs.get(m))
    }))
}

/// Yule–Walker matrix `T[j][i] = l_{j-i}`, `j, i = 0..order`.
pub fn yule_walker_matrix(l: &Projection, order: usize) -> DMatrix<Complex64> {
    DMatrix::from_fn(order, order, |j, i| l.get(j as i64 - i as i64))
}

/// 2-norm condition number; infinite for singular matrices.
pub fn condition_number(m: &DMatrix<Complex64>) -> f64 {
    let sv = m.clone().svd(false, false).singular_values;
    let max = sv.iter().cloned().fold(0.0, f64::max);
    let min = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    if min == 0.0 || !max.is_finite() {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Annihilating filter `1 + h₁z⁻¹ + … + h_Q z⁻Q` of `l`.
#[derive(Debug, Clone, PartialEq)]
pub struct Annihilator {
    /// `h₁..h_Q`
    pub coeffs: Vec<Complex64>,
    /// Condition number of the Yule–Walker matrix.
    pub condition: f64,
}

/// Solves `Σ_{i=1..Q} h_i l_{j-i} = -l_j` for `j = 1..Q`, using the indices
/// `-Q+1..Q` of `l`.
pub fn solve_annihilating(l: &Projection, order: usize) -> Result<Annihilator> {
    if order == 0 {
        return Err(Error::InvalidParameter(
            "annihilator order must be >= 1".into(),
        ));
    }
    if l.order() < order {
        return Err(Error::InvalidParameter(format!(
            "projection of order {} is too short for Q = {order}",
            l.order()
        )));
    }
    let t = yule_walker_matrix(l, order);
    let condition = condition_number(&t);
    let rhs = DVector::from_fn(order, |j, _| -l.get(j as i64 + 1));
    let h = t
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Singular("Yule-Walker system".into()))?;
    if h.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
        return Err(Error::Singular("Yule-Walker system".into()));
    }
    Ok(Annihilator {
        coeffs: h.iter().copied().collect(),
        condition,
    })
}

/// A root of the annihilating polynomial mapped to a frequency.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Root {
    pub value: Complex64,
    /// `(-arg(z)/2π mod 1)·F_s`, in `[0, F_s)`.
    pub freq: f64,
    pub radius: f64,
}

fn horner(coeffs: &[Complex64], z: Complex64) -> (Complex64, Complex64) {
    // monic polynomial z^Q + h₁ z^{Q-1} + … + h_Q and its derivative
    let mut p = Complex64::new(1.0, 0.0);
    let mut dp = Complex64::new(0.0, 0.0);
    for &c in coeffs {
        dp = dp * z + p;
        p = p * z + c;
    }
    (p, dp)
}

/// Frequency encoded by a root `z = exp(-2iπ η/F_s)`.
pub fn root_frequency(z: Complex64, fs: f64) -> f64 {
    let f = (-z.arg() / (2.0 * PI)).rem_euclid(1.0) * fs;
    if f >= fs {
        0.0
    } else {
        f
    }
}

/// Roots of `z^Q + h₁z^{Q-1} + … + h_Q` (companion eigenvalues refined by
/// Newton steps), sorted by frequency.
pub fn roots_to_freqs(h: &[Complex64], fs: f64) -> Result<Vec<Root>> {
    if h.is_empty() {
        return Ok(Vec::new());
    }
    if h.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
        return Err(Error::RootFinding("non-finite filter coefficient".into()));
    }
    let q = h.len();
    let companion = DMatrix::from_fn(q, q, |i, j| {
        if i == 0 {
            -h[j]
        } else if i == j + 1 {
            Complex64::new(1.0, 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        }
    });
    let eig = companion
        .eigenvalues()
        .ok_or_else(|| Error::RootFinding("companion eigenvalues did not converge".into()))?;
    let mut roots: Vec<Root> = eig
        .iter()
        .map(|&z0| {
            let mut z = z0;
            let mut res = horner(h, z).0.norm();
            for _ in 0..4 {
                let (p, dp) = horner(h, z);
                if dp.norm() == 0.0 {
                    break;
                }
                let cand = z - p / dp;
                let cand_res = horner(h, cand).0.norm();
                if cand_res < res {
                    z = cand;
                    res = cand_res;
                } else {
                    break;
                }
            }
            z
        })
        .map(|z| Root {
            value: z,
            freq: root_frequency(z, fs),
            radius: z.norm(),
        })
        .collect();
    if roots.iter().any(|r| !r.freq.is_finite() || r.radius == 0.0) {
        return Err(Error::RootFinding("degenerate root".into()));
    }
    roots.sort_by(|a, b| a.freq.total_cmp(&b.freq));
    Ok(roots)
}

/// Least-squares solution of `Σ_q exp(-2iπ m η_q/F_s) a_q = l_m` over
/// `m = -M₀..=M₀`.
pub fn solve_amplitudes(l: &Projection, freqs: &[f64], fs: f64) -> Result<Vec<Complex64>> {
    let q = freqs.len();
    if q == 0 {
        return Ok(Vec::new());
    }
    let m0 = l.order() as i64;
    let rows = 2 * l.order() + 1;
    if rows < q {
        return Err(Error::InvalidParameter(format!(
            "projection of order {} is too short for {q} amplitudes",
            l.order()
        )));
    }
    let nodes: Vec<Complex64> = freqs
        .iter()
        .map(|f| Complex64::from_polar(1.0, -2.0 * PI * f / fs))
        .collect();
    for i in 0..q {
        for j in i + 1..q {
            if (nodes[i] - nodes[j]).norm() < 1e-12 {
                return Err(Error::Singular(format!(
                    "coincident frequencies {} and {} Hz",
                    freqs[i], freqs[j]
                )));
            }
        }
    }
    let w = DMatrix::from_fn(rows, q, |r, j| nodes[j].powi(r as i32 - m0 as i32));
    let rhs = DVector::from_fn(rows, |r, _| l.get(r as i64 - m0));
    let svd = w.svd(true, true);
    let smax = svd.singular_values.max();
    let a = svd
        .solve(&rhs, smax * 1e-14)
        .map_err(|e| Error::Singular(format!("Vandermonde system: {e}")))?;
    Ok(a.iter().copied().collect())
}

fn model_residual(l: &Projection, freqs: &[f64], amps: &[f64], fs: f64) -> Vec<Complex64> {
    let m0 = l.order() as i64;
    (-m0..=m0)
        .map(|m| {
            let model: Complex64 = freqs
                .iter()
                .zip(amps)
                .map(|(f, a)| a * Complex64::from_polar(1.0, -2.0 * PI * m as f64 * f / fs))
                .sum();
            model - l.get(m)
        })
        .collect()
}

fn sum_sq(r: &[Complex64]) -> f64 {
    r.iter().map(|z| z.norm_sqr()).sum()
}

/// Gauss–Newton polishing of frequencies and real amplitudes against all
/// coefficients `l_m`, `|m| ≤ M₀`. A step is kept only when it lowers the
/// squared residual; at most `iterations` steps are taken.
pub fn refine(
    l: &Projection,
    freqs: &[f64],
    amps: &[f64],
    fs: f64,
    iterations: usize,
) -> (Vec<f64>, Vec<f64>) {
    let q = freqs.len();
    let m0 = l.order() as i64;
    let rows = 2 * l.order() + 1;
    let mut f = freqs.to_vec();
    let mut a = amps.to_vec();
    if q == 0 || 2 * rows < 2 * q {
        return (f, a);
    }
    let mut r = model_residual(l, &f, &a, fs);
    let mut cost = sum_sq(&r);
    for _ in 0..iterations {
        if cost == 0.0 {
            break;
        }
        let mut jac = DMatrix::<f64>::zeros(2 * rows, 2 * q);
        for (row, m) in (-m0..=m0).enumerate() {
            for j in 0..q {
                let z = Complex64::from_polar(1.0, -2.0 * PI * m as f64 * f[j] / fs);
                let dz = a[j] * z * Complex64::new(0.0, -2.0 * PI * m as f64 / fs);
                for (col, v) in [(j, dz), (q + j, z)] {
                    jac[(2 * row, col)] = v.re;
                    jac[(2 * row + 1, col)] = v.im;
                }
            }
        }
        let rhs = DVector::from_fn(2 * rows, |i, _| {
            let z = r[i / 2];
            -if i % 2 == 0 { z.re } else { z.im }
        });
        let svd = jac.svd(true, true);
        let tol = svd.singular_values.max() * 1e-14;
        let Ok(step) = svd.solve(&rhs, tol) else {
            break;
        };
        let nf: Vec<f64> = (0..q).map(|j| f[j] + step[j]).collect();
        let na: Vec<f64> = (0..q).map(|j| a[j] + step[q + j]).collect();
        let nr = model_residual(l, &nf, &na, fs);
        let ncost = sum_sq(&nr);
        if !(ncost < cost) {
            break;
        }
        f = nf;
        a = na;
        r = nr;
        cost = ncost;
    }
    for x in &mut f {
        *x = x.rem_euclid(fs);
    }
    (f, a)
}
