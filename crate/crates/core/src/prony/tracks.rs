//! Linking per-slice estimates into tracks, then cleaning, filling and
//! classifying them.

use std::collections::VecDeque;

use crate::interp::fill_series;

use super::SliceEstimate;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrackKind {
    Mode,
    Interference,
}

/// Time series of one Prony component.
#[derive(Debug, Clone, PartialEq)]
pub struct Track {
    pub id: usize,
    pub freq: Vec<Option<f64>>,
    pub amplitude: Vec<Option<f64>>,
    /// Set by [`fill_gaps`] on values that were interpolated.
    pub interpolated: Vec<bool>,
    /// Set by [`classify`].
    pub kind: Option<TrackKind>,
}

impl Track {
    pub fn empty(id: usize, len: usize) -> Self {
        Self {
            id,
            freq: vec![None; len],
            amplitude: vec![None; len],
            interpolated: vec![false; len],
            kind: None,
        }
    }

    pub fn len(&self) -> usize {
        self.freq.len()
    }

    pub fn is_empty(&self) -> bool {
        self.freq.is_empty()
    }

    pub fn defined(&self) -> usize {
        self.freq.iter().filter(|f| f.is_some()).count()
    }

    fn clear(&mut self, n: usize) {
        self.freq[n] = None;
        self.amplitude[n] = None;
    }

    pub fn mean_freq(&self) -> Option<f64> {
        let (sum, count) = self
            .freq
            .iter()
            .flatten()
            .fold((0.0, 0usize), |(s, c), f| (s + f, c + 1));
        (count > 0).then(|| sum / count as f64)
    }
}

/// Number of recent points used to extrapolate a track.
const HISTORY: usize = 16;

/// Recent defined points of a track during propagation.
#[derive(Debug, Clone, Default)]
struct History {
    points: VecDeque<(usize, f64)>,
}

impl History {
    fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Least-squares line `(intercept, slope)` through the recent points,
    /// with the abscissa relative to the last point.
    fn fit(&self) -> Option<(f64, f64)> {
        if self.points.len() < 2 {
            return None;
        }
        let m = self.points.len() as f64;
        let origin = self.points.back()?.0 as f64;
        let (mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0);
        for &(i, f) in &self.points {
            let x = i as f64 - origin;
            sx += x;
            sy += f;
            sxx += x * x;
            sxy += x * f;
        }
        let slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
        slope.is_finite().then(|| ((sy - slope * sx) / m, slope))
    }

    /// Frequency expected at time `n`: least-squares line through the recent
    /// points when its slope stays within `max_slope` Hz per step, otherwise
    /// the last value.
    fn predict(&self, n: usize, max_slope: f64) -> Option<f64> {
        let &(origin, last) = self.points.back()?;
        match self.fit() {
            Some((intercept, slope)) if slope.abs() <= max_slope => {
                Some(intercept + slope * (n as f64 - origin as f64))
            }
            _ => Some(last),
        }
    }

    /// RMS deviation of the recent points from their fitted line; infinite
    /// for histories too short to judge.
    fn roughness(&self) -> f64 {
        if self.points.len() < 3 {
            return f64::INFINITY;
        }
        let Some((intercept, slope)) = self.fit() else {
            return f64::INFINITY;
        };
        let origin = self.points.back().unwrap().0 as f64;
        let ss: f64 = self
            .points
            .iter()
            .map(|&(i, f)| {
                let r = f - intercept - slope * (i as f64 - origin);
                r * r
            })
            .sum();
        (ss / self.points.len() as f64).sqrt()
    }

    fn restart(&mut self, n: usize, f: f64) {
        self.points.clear();
        self.points.push_back((n, f));
    }

    fn push(&mut self, n: usize, f: f64) {
        if self.points.len() == HISTORY {
            self.points.pop_front();
        }
        self.points.push_back((n, f));
    }
}

/// Greedy nearest-frequency assignment of the components at time `n` to
/// tracks. Components weaker than `floor · max |a|` are ignored. Tracks take
/// turns from the smoothest recent history to the roughest, each linking the
/// component nearest to its predicted frequency within `gate`. Leftover
/// components then go to the remaining tracks, never-defined tracks before
/// the nearest lost ones, and restart their history.
fn assign(
    slice: &SliceEstimate,
    n: usize,
    state: &mut [History],
    gate: f64,
    floor: f64,
) -> Vec<Option<usize>> {
    let comps = &slice.components;
    let strongest = comps.iter().map(|c| c.amplitude.abs()).fold(0.0, f64::max);
    let mut used: Vec<bool> = comps
        .iter()
        .map(|c| c.amplitude.abs() < floor * strongest)
        .collect();
    let predicted: Vec<Option<f64>> = state.iter().map(|h| h.predict(n, gate)).collect();
    let roughness: Vec<f64> = state.iter().map(History::roughness).collect();
    let mut order: Vec<usize> = (0..state.len())
        .filter(|&i| predicted[i].is_some())
        .collect();
    order.sort_by(|&a, &b| roughness[a].total_cmp(&roughness[b]).then(a.cmp(&b)));

    let nearest = |expected: f64, used: &[bool]| {
        (0..comps.len())
            .filter(|&j| !used[j])
            .map(|j| ((comps[j].freq - expected).abs(), j))
            .min_by(|a, b| a.0.total_cmp(&b.0))
    };
    let mut track_of = vec![None; state.len()];
    for &i in &order {
        let expected = predicted[i].unwrap();
        if let Some((d, j)) = nearest(expected, &used) {
            if d <= gate {
                track_of[i] = Some(j);
                used[j] = true;
                state[i].push(n, comps[j].freq);
            }
        }
    }
    let fresh: Vec<usize> = (0..state.len()).filter(|&i| state[i].is_empty()).collect();
    let mut fresh = fresh.into_iter();
    for j in 0..comps.len() {
        if used[j] {
            continue;
        }
        if let Some(i) = fresh.next() {
            track_of[i] = Some(j);
            used[j] = true;
            state[i].restart(n, comps[j].freq);
        }
    }
    let mut lost: Vec<(f64, usize, usize)> = Vec::new();
    for &i in &order {
        if track_of[i].is_some() {
            continue;
        }
        for j in (0..comps.len()).filter(|&j| !used[j]) {
            lost.push(((comps[j].freq - predicted[i].unwrap()).abs(), i, j));
        }
    }
    lost.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    for (_, i, j) in lost {
        if track_of[i].is_none() && !used[j] {
            track_of[i] = Some(j);
            used[j] = true;
            state[i].restart(n, comps[j].freq);
        }
    }
    track_of
}

/// Links slice components into `count` tracks.
///
/// Tracks are seeded at a reference slice (among the slices holding the
/// most common non-zero component count, the one with the lowest
/// Yule–Walker condition number) and propagated forward and backward
/// in time. Components weaker than `floor` times the strongest one in their
/// slice are left out. Each step assigns components to tracks greedily by distance to
/// the track's extrapolated frequency, gated at `gate` Hz. Slices without
/// components leave a gap in every track.
pub fn track(slices: &[SliceEstimate], count: usize, gate: f64, floor: f64) -> Vec<Track> {
    let len = slices.len();
    let mut tracks: Vec<Track> = (0..count).map(|id| Track::empty(id, len)).collect();
    let mut counts = vec![0usize; slices.iter().map(|s| s.components.len()).max().unwrap_or(0) + 1];
    for s in slices {
        counts[s.components.len()] += 1;
    }
    // most frequent component count, larger count on ties
    let typical = (1..counts.len()).max_by_key(|&c| (counts[c], c));
    let reference = typical.and_then(|c| {
        slices
            .iter()
            .enumerate()
            .filter(|(_, s)| s.components.len() == c)
            .min_by(|(_, a), (_, b)| a.condition.total_cmp(&b.condition))
            .map(|(n, _)| n)
    });
    let Some(reference) = reference else {
        return tracks;
    };

    let record = |n: usize, track_of: &[Option<usize>], tracks: &mut [Track]| {
        for (i, j) in track_of.iter().enumerate() {
            if let Some(j) = j {
                let c = &slices[n].components[*j];
                tracks[i].freq[n] = Some(c.freq);
                tracks[i].amplitude[n] = Some(c.amplitude);
            }
        }
    };

    let mut seed = vec![History::default(); count];
    let seeded = assign(&slices[reference], reference, &mut seed, gate, floor);
    record(reference, &seeded, &mut tracks);

    let mut state = seed.clone();
    for n in reference + 1..len {
        let t = assign(&slices[n], n, &mut state, gate, floor);
        record(n, &t, &mut tracks);
    }
    let mut state = seed;
    for n in (0..reference).rev() {
        let t = assign(&slices[n], n, &mut state, gate, floor);
        record(n, &t, &mut tracks);
    }
    tracks
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let m = values.len() / 2;
    if values.len() % 2 == 1 {
        values[m]
    } else {
        0.5 * (values[m - 1] + values[m])
    }
}

/// Removes points deviating from the median of their `2·half_window + 1`
/// surrounding defined points by more than `gate` Hz.
pub fn prune_jumps(mut tracks: Vec<Track>, gate: f64, half_window: usize) -> Vec<Track> {
    for t in &mut tracks {
        let defined: Vec<(usize, f64)> = t
            .freq
            .iter()
            .enumerate()
            .filter_map(|(n, f)| f.map(|f| (n, f)))
            .collect();
        let outliers: Vec<usize> = (0..defined.len())
            .filter(|&p| {
                let lo = p.saturating_sub(half_window);
                let hi = (p + half_window + 1).min(defined.len());
                let mut window: Vec<f64> = defined[lo..hi].iter().map(|d| d.1).collect();
                (defined[p].1 - median(&mut window)).abs() > gate
            })
            .map(|p| defined[p].0)
            .collect();
        for n in outliers {
            t.clear(n);
        }
    }
    tracks
}

/// Per-time maximum of `|amplitude|` over all tracks.
fn max_abs_amplitude(tracks: &[Track], len: usize) -> Vec<f64> {
    (0..len)
        .map(|n| {
            tracks
                .iter()
                .filter_map(|t| t.amplitude[n])
                .map(f64::abs)
                .fold(0.0, f64::max)
        })
        .collect()
}

/// At each time, removes points with `|a| < ratio · max_q |a_q|`.
pub fn prune_amplitude(mut tracks: Vec<Track>, ratio: f64) -> Vec<Track> {
    let len = tracks.first().map_or(0, Track::len);
    let max = max_abs_amplitude(&tracks, len);
    for t in &mut tracks {
        for n in 0..len {
            if let Some(a) = t.amplitude[n] {
                if a.abs() < ratio * max[n] {
                    t.clear(n);
                }
            }
        }
    }
    tracks
}

/// Fills gaps with monotone piecewise cubic interpolation (nearest value at
/// the ends). Tracks with no defined point are left untouched.
pub fn fill_gaps(mut tracks: Vec<Track>) -> Vec<Track> {
    for t in &mut tracks {
        let (Some(freq), Some(amp)) = (fill_series(&t.freq), fill_series(&t.amplitude)) else {
            continue;
        };
        t.interpolated = t.freq.iter().map(Option::is_none).collect();
        t.freq = freq.into_iter().map(Some).collect();
        t.amplitude = amp.into_iter().map(Some).collect();
    }
    tracks
}

#[derive(Debug, Clone, PartialEq)]
pub struct Classification {
    /// Tracks kept as mode estimates, ascending mean frequency.
    pub modes: Vec<Track>,
    pub interference: Vec<Track>,
    /// Tracks that never received a point.
    pub empty: usize,
    /// The number of mode tracks differs from the expected mode count.
    pub count_mismatch: bool,
}

/// Tags a track as interference when its amplitude stays below
/// `-ratio · max_q |a_q|` for at least `min_run` consecutive samples.
pub fn classify(tracks: Vec<Track>, ratio: f64, min_run: usize, modes: usize) -> Classification {
    let len = tracks.first().map_or(0, Track::len);
    let max = max_abs_amplitude(&tracks, len);
    let mut out = Classification {
        modes: Vec::new(),
        interference: Vec::new(),
        empty: 0,
        count_mismatch: false,
    };
    for mut t in tracks {
        if t.defined() == 0 {
            out.empty += 1;
            continue;
        }
        let mut run = 0;
        let mut longest = 0;
        for n in 0..len {
            match t.amplitude[n] {
                Some(a) if a < -ratio * max[n] => {
                    run += 1;
                    longest = longest.max(run);
                }
                _ => run = 0,
            }
        }
        if longest >= min_run.max(1) {
            t.kind = Some(TrackKind::Interference);
            out.interference.push(t);
        } else {
            t.kind = Some(TrackKind::Mode);
            out.modes.push(t);
        }
    }
    out.modes.sort_by(|a, b| {
        a.mean_freq()
            .unwrap_or(0.0)
            .total_cmp(&b.mean_freq().unwrap_or(0.0))
    });
    out.count_mismatch = out.modes.len() != modes;
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prony::Component;

    fn slice(index: usize, comps: &[(f64, f64)]) -> SliceEstimate {
        SliceEstimate {
            index,
            components: comps
                .iter()
                .map(|&(freq, amplitude)| Component {
                    freq,
                    amplitude,
                    residual: 0.0,
                    radius: 1.0,
                })
                .collect(),
            condition: 1.0,
            degenerate: false,
        }
    }

    fn track_from(freq: Vec<Option<f64>>, amp: Vec<Option<f64>>) -> Track {
        let len = freq.len();
        Track {
            id: 0,
            freq,
            amplitude: amp,
            interpolated: vec![false; len],
            kind: None,
        }
    }

    #[test]
    fn constant_slices_give_constant_tracks() {
        let slices: Vec<_> = (0..20)
            .map(|n| slice(n, &[(10.0, 1.0), (30.0, 2.0)]))
            .collect();
        let tracks = track(&slices, 2, 3.0, 0.0);
        assert_eq!(tracks[0].freq, vec![Some(10.0); 20]);
        assert_eq!(tracks[1].freq, vec![Some(30.0); 20]);
        assert_eq!(tracks[1].amplitude, vec![Some(2.0); 20]);
    }

    #[test]
    fn crossing_tracks_keep_identity() {
        // ascending and descending lines crossing at n = 10; components are
        // reported sorted by frequency, so the slice order swaps
        let slices: Vec<_> = (0..21)
            .map(|n| {
                let up = 50.0 + n as f64;
                let down = 70.5 - n as f64;
                let mut c = vec![(up, 1.0), (down, 2.0)];
                c.sort_by(|a, b| a.0.total_cmp(&b.0));
                slice(n, &c)
            })
            .collect();
        let tracks = track(&slices, 2, 1.5, 0.0);
        let up = tracks.iter().find(|t| t.amplitude[0] == Some(1.0)).unwrap();
        for n in 0..21 {
            if let Some(f) = up.freq[n] {
                assert_eq!(f, 50.0 + n as f64);
            }
        }
        assert_eq!(up.defined(), 21);
    }

    #[test]
    fn empty_slice_leaves_gap_everywhere() {
        let mut slices: Vec<_> = (0..10)
            .map(|n| slice(n, &[(10.0, 1.0), (30.0, 2.0)]))
            .collect();
        slices[4] = SliceEstimate {
            components: Vec::new(),
            degenerate: true,
            condition: f64::INFINITY,
            ..slices[4].clone()
        };
        let tracks = track(&slices, 2, 3.0, 0.0);
        for t in &tracks {
            assert_eq!(t.freq[4], None);
            assert_eq!(t.defined(), 9);
        }
    }

    #[test]
    fn jump_pruning() {
        let flat = track_from(vec![Some(100.0); 30], vec![Some(1.0); 30]);
        assert_eq!(prune_jumps(vec![flat.clone()], 6.0, 5), vec![flat.clone()]);
        let mut spiked = flat;
        spiked.freq[12] = Some(160.0);
        let out = prune_jumps(vec![spiked], 6.0, 5);
        assert_eq!(out[0].freq[12], None);
        assert_eq!(out[0].amplitude[12], None);
        assert_eq!(out[0].defined(), 29);
    }

    #[test]
    fn amplitude_pruning() {
        let a = track_from(vec![Some(10.0); 5], vec![Some(2.0); 5]);
        let b = track_from(vec![Some(20.0); 5], vec![Some(-2.0); 5]);
        let out = prune_amplitude(vec![a.clone(), b.clone()], 1e-2);
        assert_eq!(out, vec![a.clone(), b]);
        let mut c = track_from(vec![Some(30.0); 5], vec![Some(1.0); 5]);
        c.amplitude[2] = Some(2e-3);
        let out = prune_amplitude(vec![a, c], 1e-2);
        assert_eq!(out[1].freq[2], None);
        assert_eq!(out[1].defined(), 4);
    }

    #[test]
    fn fill_without_gaps_is_identity() {
        let t = track_from(vec![Some(1.0), Some(2.0)], vec![Some(3.0), Some(4.0)]);
        let out = fill_gaps(vec![t.clone()]);
        assert_eq!(out[0].freq, t.freq);
        assert!(out[0].interpolated.iter().all(|&b| !b));
    }

    #[test]
    fn fill_marks_interpolated_and_skips_empty() {
        let t = track_from(
            vec![Some(1.0), None, Some(3.0)],
            vec![Some(1.0), None, Some(1.0)],
        );
        let e = track_from(vec![None; 3], vec![None; 3]);
        let out = fill_gaps(vec![t, e]);
        assert_eq!(out[0].freq, vec![Some(1.0), Some(2.0), Some(3.0)]);
        assert_eq!(out[0].interpolated, vec![false, true, false]);
        assert_eq!(out[1].defined(), 0);
    }

    #[test]
    fn classification_by_negative_runs() {
        let len = 200;
        let mode = track_from(vec![Some(100.0); len], vec![Some(1.0); len]);
        let cosine: Vec<Option<f64>> = (0..len)
            .map(|n| Some(0.8 * (2.0 * std::f64::consts::PI * n as f64 / 50.0).cos()))
            .collect();
        let interf = track_from(vec![Some(110.0); len], cosine);
        let empty = track_from(vec![None; len], vec![None; len]);
        let c = classify(vec![mode, interf, empty], 1e-2, 3, 1);
        assert_eq!(c.modes.len(), 1);
        assert_eq!(c.modes[0].kind, Some(TrackKind::Mode));
        assert_eq!(c.interference.len(), 1);
        assert_eq!(c.empty, 1);
        assert!(!c.count_mismatch);
    }

    #[test]
    fn classification_removes_exactly_negative_laws() {
        // synthetic set: positive constants, decaying positives, and laws
        // dipping negative for various run lengths
        let len = 100;
        let laws: Vec<(Box<dyn Fn(usize) -> f64>, bool)> = vec![
            (Box::new(|_| 3.0), false),
            (Box::new(|n| 1.0 + 0.5 * (n as f64 / 7.0).sin()), false),
            (
                Box::new(|n| if (40..45).contains(&n) { -1.0 } else { 1.0 }),
                true,
            ),
            (Box::new(|n| (n as f64 / 9.0).cos()), true),
            (Box::new(|n| if n == 50 { -1.0 } else { 1.0 }), false),
        ];
        let tracks: Vec<Track> = laws
            .iter()
            .enumerate()
            .map(|(i, (law, _))| {
                let mut t = track_from(
                    vec![Some(i as f64 * 10.0); len],
                    (0..len).map(|n| Some(law(n))).collect(),
                );
                t.id = i;
                t
            })
            .collect();
        let c = classify(tracks, 1e-2, 3, 3);
        let mut removed: Vec<usize> = c.interference.iter().map(|t| t.id).collect();
        removed.sort();
        let expected: Vec<usize> = laws
            .iter()
            .enumerate()
            .filter(|(_, l)| l.1)
            .map(|(i, _)| i)
            .collect();
        assert_eq!(removed, expected);
    }
}
