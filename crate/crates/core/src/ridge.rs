//! Ridge-based IF baselines: spectrogram ridges (IF-SR), FSST ridges
//! (IF-FSSTR) and off-grid refined FSST ridges (IF-FSSTR-OG).

use std::cmp::Ordering;

use log::warn;

use crate::error::{Error, Result};
use crate::fsst::LifField;
use crate::stft::{StftParams, TfMatrix};
use crate::IfEstimate;

/// Default modulation bound between consecutive ridge points, in bins.
pub const DEFAULT_JUMP_BINS: usize = 3;
/// Seeds and continuations below this fraction of the matrix maximum are ignored.
pub const DEFAULT_FLOOR_RATIO: f64 = 1e-6;

/// One ridge: a bin index per time index, `None` marking a gap.
#[derive(Debug, Clone, PartialEq)]
pub struct Ridge {
    pub bins: Vec<Option<usize>>,
}

impl Ridge {
    /// Bin series with gaps held at the previous bin (leading gaps take the
    /// first defined bin).
    pub fn held_bins(&self) -> Vec<usize> {
        let first = self.bins.iter().flatten().next().copied().unwrap_or(0);
        let mut last = first;
        self.bins
            .iter()
            .map(|b| {
                if let Some(k) = b {
                    last = *k;
                }
                last
            })
            .collect()
    }

    /// On-grid IF estimate `ψ(n) = (k(n)/K)·F_s`.
    pub fn to_estimate(&self, params: &StftParams) -> IfEstimate {
        let mut est = IfEstimate::from_freq(
            self.held_bins()
                .into_iter()
                .map(|k| params.bin_freq(k))
                .collect(),
        );
        est.interpolated = self.bins.iter().map(Option::is_none).collect();
        est
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RidgeSet {
    pub ridges: Vec<Ridge>,
    /// Fewer ridges than requested could be extracted.
    pub incomplete: bool,
}

/// Local maxima along frequency, strongest first.
///
/// A bin `k` qualifies when `s[k] > s[k-1]` and `s[k] >= s[k+1]`; the first
/// and last bins never do. Equal values keep ascending bin order.
pub fn extract_lmf(slice: &[f64]) -> Vec<usize> {
    if slice.len() < 3 {
        return Vec::new();
    }
    let mut peaks: Vec<usize> = (1..slice.len() - 1)
        .filter(|&k| slice[k] > slice[k - 1] && slice[k] >= slice[k + 1])
        .collect();
    peaks.sort_by(|&a, &b| slice[b].total_cmp(&slice[a]).then(a.cmp(&b)));
    peaks
}

/// Greedy max-energy ridge extraction with the default seed floor.
pub fn extract_ridges(tf: &TfMatrix<f64>, count: usize, jump_bins: usize) -> Result<RidgeSet> {
    extract_ridges_with_floor(tf, count, jump_bins, DEFAULT_FLOOR_RATIO)
}

/// Extracts up to `count` ridges. Each ridge is seeded at the strongest
/// unclaimed LMF, then extended both ways in time by picking the strongest
/// unclaimed LMF within `±jump_bins` of the previous bin. Cells within
/// `±jump_bins` of an extracted ridge are claimed.
pub fn extract_ridges_with_floor(
    tf: &TfMatrix<f64>,
    count: usize,
    jump_bins: usize,
    floor_ratio: f64,
) -> Result<RidgeSet> {
    if count == 0 {
        return Err(Error::InvalidParameter("ridge count must be >= 1".into()));
    }
    let (rows, cols) = tf.shape();
    let floor = floor_ratio * tf.values().iter().cloned().fold(0.0, f64::max);
    let lmfs: Vec<Vec<usize>> = (0..rows)
        .map(|n| {
            let row = tf.row(n);
            extract_lmf(row)
                .into_iter()
                .filter(|&k| row[k] > floor)
                .collect()
        })
        .collect();
    let mut claimed = vec![false; rows * cols];
    let mut ridges = Vec::with_capacity(count);

    // strongest unclaimed LMF in a row, optionally restricted to a bin window
    let best_in_row = |n: usize, claimed: &[bool], near: Option<usize>| -> Option<usize> {
        lmfs[n]
            .iter()
            .copied()
            .filter(|&k| !claimed[n * cols + k])
            .find(|&k| near.is_none_or(|p| k.abs_diff(p) <= jump_bins))
    };

    for _ in 0..count {
        let seed = (0..rows)
            .filter_map(|n| best_in_row(n, &claimed, None).map(|k| (n, k)))
            .max_by(|&(n1, k1), &(n2, k2)| {
                tf.get(n1, k1)
                    .total_cmp(&tf.get(n2, k2))
                    // earlier time, then lower bin wins ties
                    .then(n2.cmp(&n1))
                    .then(k2.cmp(&k1))
            });
        let Some((n0, k0)) = seed else {
            warn!(
                "only {} of {} ridges could be extracted",
                ridges.len(),
                count
            );
            return Ok(RidgeSet {
                ridges,
                incomplete: true,
            });
        };
        let mut bins = vec![None; rows];
        bins[n0] = Some(k0);
        for direction in [Direction::Forward, Direction::Backward] {
            let mut prev = k0;
            let mut n = n0;
            while let Some(next) = direction.step(n, rows) {
                n = next;
                if let Some(k) = best_in_row(n, &claimed, Some(prev)) {
                    bins[n] = Some(k);
                    prev = k;
                }
            }
        }
        for (n, bin) in bins.iter().enumerate() {
            if let Some(k) = *bin {
                let lo = k.saturating_sub(jump_bins);
                let hi = (k + jump_bins).min(cols - 1);
                claimed[n * cols + lo..=n * cols + hi].fill(true);
            }
        }
        ridges.push(Ridge { bins });
    }
    Ok(RidgeSet {
        ridges,
        incomplete: false,
    })
}

#[derive(Clone, Copy)]
enum Direction {
    Forward,
    Backward,
}

impl Direction {
    fn step(self, n: usize, rows: usize) -> Option<usize> {
        match self {
            Direction::Forward => (n + 1 < rows).then_some(n + 1),
            Direction::Backward => n.checked_sub(1),
        }
    }
}

/// IF-FSSTR-OG: reads the LIF field along the ridge, `IF(n) = ω̂[n, k(n)]`.
/// Cells outside the LIF mask keep the on-grid bin frequency.
pub fn off_grid_refine(ridge: &Ridge, lif: &LifField, params: &StftParams) -> IfEstimate {
    let held = ridge.held_bins();
    let freq = held
        .iter()
        .enumerate()
        .map(|(n, &k)| lif.get(n, k).unwrap_or_else(|| params.bin_freq(k)))
        .collect();
    let mut est = IfEstimate::from_freq(freq);
    est.interpolated = ridge.bins.iter().map(Option::is_none).collect();
    est
}

/// Orders ridges by mean frequency, ascending.
pub fn sort_by_frequency(ridges: &mut [Ridge]) {
    let mean = |r: &Ridge| {
        let held = r.held_bins();
        held.iter().sum::<usize>() as f64 / held.len().max(1) as f64
    };
    ridges.sort_by(|a, b| mean(a).partial_cmp(&mean(b)).unwrap_or(Ordering::Equal));
}
