//! Discretization of continuous series into finite symbol alphabets.
//!
//! Three fitting methods are provided:
//!
//! * [`fit_uniform`] splits the observed range into equal-width bins.
//! * [`fit_max_entropy`] places boundaries at empirical quantiles so that every
//!   symbol is (as near as possible) equally frequent.
//! * [`fit_mbd`] is a supervised scheme for input/output pairs: the output is
//!   partitioned by maximum entropy and the input boundaries are searched to
//!   maximize the mutual information between input and output symbols.
//!
//! Bins are right-open: a value equal to a boundary belongs to the upper bin,
//! and values outside the training range clamp to the edge bins.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::infotheory::mutual_information_from_counts;
use crate::markov::SymbolSequence;

/// A uniformly sampled, finite-valued series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawTimeSeries")]
pub struct TimeSeries {
    id: String,
    values: Vec<f64>,
    sample_period: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    units: Option<String>,
}

#[derive(Deserialize)]
struct RawTimeSeries {
    id: String,
    values: Vec<f64>,
    sample_period: f64,
    #[serde(default)]
    units: Option<String>,
}

impl TryFrom<RawTimeSeries> for TimeSeries {
    type Error = Error;

    fn try_from(raw: RawTimeSeries) -> Result<Self> {
        let mut ts = TimeSeries::new(raw.id, raw.values, raw.sample_period)?;
        ts.units = raw.units;
        Ok(ts)
    }
}

impl TimeSeries {
    pub fn new(id: impl Into<String>, values: Vec<f64>, sample_period: f64) -> Result<Self> {
        let id = id.into();
        if values.is_empty() {
            return Err(invalid(format!("series '{id}' is empty")));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(invalid(format!(
                "series '{id}' has a non-finite value at index {pos}"
            )));
        }
        if !(sample_period.is_finite() && sample_period > 0.0) {
            return Err(invalid(format!(
                "series '{id}' has non-positive sample period {sample_period}"
            )));
        }
        Ok(Self {
            id,
            values,
            sample_period,
            units: None,
        })
    }

    pub fn with_units(mut self, units: impl Into<String>) -> Self {
        self.units = Some(units.into());
        self
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn sample_period(&self) -> f64 {
        self.sample_period
    }

    pub fn units(&self) -> Option<&str> {
        self.units.as_deref()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Contiguous sub-range `[start, end)` keeping id, period and units.
    pub fn slice(&self, start: usize, end: usize) -> Result<Self> {
        if start >= end || end > self.values.len() {
            return Err(invalid(format!(
                "slice {start}..{end} out of range for series '{}' of length {}",
                self.id,
                self.values.len()
            )));
        }
        Ok(Self {
            id: self.id.clone(),
            values: self.values[start..end].to_vec(),
            sample_period: self.sample_period,
            units: self.units.clone(),
        })
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PartitionMethod {
    Uniform,
    MaxEntropy,
    Mbd,
}

impl PartitionMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            PartitionMethod::Uniform => "uniform",
            PartitionMethod::MaxEntropy => "max_entropy",
            PartitionMethod::Mbd => "mbd",
        }
    }
}

impl std::str::FromStr for PartitionMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(Self::Uniform),
            "max_entropy" | "max-entropy" => Ok(Self::MaxEntropy),
            "mbd" => Ok(Self::Mbd),
            other => Err(invalid(format!("unknown partition method '{other}'"))),
        }
    }
}

/// Training occupancy of one bin. `mean` is `None` for bins no training
/// value fell into.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BinStat {
    pub count: u64,
    pub mean: Option<f64>,
}

/// Ordered bin boundaries mapping a real line onto `alphabet_size` symbols.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawScheme")]
pub struct PartitionScheme {
    method: PartitionMethod,
    alphabet_size: usize,
    boundaries: Vec<f64>,
    bin_stats: Vec<BinStat>,
}

#[derive(Deserialize)]
struct RawScheme {
    method: PartitionMethod,
    alphabet_size: usize,
    boundaries: Vec<f64>,
    bin_stats: Vec<BinStat>,
}

impl TryFrom<RawScheme> for PartitionScheme {
    type Error = Error;

    fn try_from(raw: RawScheme) -> Result<Self> {
        let scheme = PartitionScheme {
            method: raw.method,
            alphabet_size: raw.alphabet_size,
            boundaries: raw.boundaries,
            bin_stats: raw.bin_stats,
        };
        scheme.validate()?;
        Ok(scheme)
    }
}

impl PartitionScheme {
    /// Builds a scheme from explicit boundaries and computes its bin
    /// statistics from `training`.
    pub fn from_boundaries(
        method: PartitionMethod,
        boundaries: Vec<f64>,
        training: &[f64],
    ) -> Result<Self> {
        let mut scheme = PartitionScheme {
            method,
            alphabet_size: boundaries.len() + 1,
            boundaries,
            bin_stats: Vec::new(),
        };
        scheme.validate_boundaries()?;
        scheme.bin_stats = scheme.compute_bin_stats(training);
        Ok(scheme)
    }

    fn validate_boundaries(&self) -> Result<()> {
        if self.alphabet_size < 2 {
            return Err(invalid("alphabet size must be at least 2"));
        }
        if self.boundaries.len() + 1 != self.alphabet_size {
            return Err(Error::DimensionMismatch {
                expected: self.alphabet_size - 1,
                found: self.boundaries.len(),
            });
        }
        if self.boundaries.iter().any(|b| !b.is_finite()) {
            return Err(invalid("partition boundaries must be finite"));
        }
        if self.boundaries.windows(2).any(|w| w[0] >= w[1]) {
            return Err(invalid("partition boundaries must be strictly increasing"));
        }
        Ok(())
    }

    fn validate(&self) -> Result<()> {
        self.validate_boundaries()?;
        if self.bin_stats.len() != self.alphabet_size {
            return Err(Error::DimensionMismatch {
                expected: self.alphabet_size,
                found: self.bin_stats.len(),
            });
        }
        for (j, stat) in self.bin_stats.iter().enumerate() {
            match stat.mean {
                Some(mean) => {
                    let (lo, hi) = self.bin_interval(j);
                    if !(mean >= lo && mean <= hi) || stat.count == 0 {
                        return Err(invalid(format!(
                            "bin {j} mean {mean} inconsistent with interval [{lo}, {hi}] or count {}",
                            stat.count
                        )));
                    }
                }
                None if stat.count > 0 => {
                    return Err(invalid(format!("bin {j} has samples but no mean")));
                }
                None => {}
            }
        }
        Ok(())
    }

    pub fn method(&self) -> PartitionMethod {
        self.method
    }

    pub fn alphabet_size(&self) -> usize {
        self.alphabet_size
    }

    pub fn boundaries(&self) -> &[f64] {
        &self.boundaries
    }

    pub fn bin_stats(&self) -> &[BinStat] {
        &self.bin_stats
    }

    /// Closed interval of bin `j`, with ±∞ at the extremes.
    pub fn bin_interval(&self, j: usize) -> (f64, f64) {
        let lo = if j == 0 {
            f64::NEG_INFINITY
        } else {
            self.boundaries[j - 1]
        };
        let hi = if j + 1 == self.alphabet_size {
            f64::INFINITY
        } else {
            self.boundaries[j]
        };
        (lo, hi)
    }

    pub fn symbol_of(&self, value: f64) -> usize {
        self.boundaries.partition_point(|&b| b <= value)
    }

    /// Per-bin count and mean of `values` under this scheme's boundaries.
    pub fn compute_bin_stats(&self, values: &[f64]) -> Vec<BinStat> {
        let mut sums = vec![0.0; self.alphabet_size];
        let mut counts = vec![0u64; self.alphabet_size];
        for &v in values {
            let s = self.symbol_of(v);
            sums[s] += v;
            counts[s] += 1;
        }
        (0..self.alphabet_size)
            .map(|j| {
                let count = counts[j];
                let mean = (count > 0).then(|| {
                    let (lo, hi) = self.bin_interval(j);
                    // summation rounding can push the mean a hair outside the bin
                    (sums[j] / count as f64).clamp(lo, hi)
                });
                BinStat { count, mean }
            })
            .collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// Maps every value of `series` to the index of its bin.
pub fn symbolize(series: &TimeSeries, scheme: &PartitionScheme) -> SymbolSequence {
    let symbols = series.values().iter().map(|&v| scheme.symbol_of(v)).collect();
    SymbolSequence::new(series.id(), symbols, scheme.alphabet_size())
        .expect("bin indices are always below the alphabet size")
}

fn check_alphabet(alphabet_size: usize) -> Result<()> {
    if alphabet_size < 2 {
        return Err(invalid(format!(
            "alphabet size must be at least 2, got {alphabet_size}"
        )));
    }
    Ok(())
}

fn sorted_values(values: &[f64]) -> Vec<f64> {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted
}

fn count_distinct(sorted: &[f64]) -> usize {
    if sorted.is_empty() {
        return 0;
    }
    1 + sorted.windows(2).filter(|w| w[0] < w[1]).count()
}

/// Equal-width partition of `[min, max]`.
pub fn fit_uniform(series: &TimeSeries, alphabet_size: usize) -> Result<PartitionScheme> {
    check_alphabet(alphabet_size)?;
    let values = series.values();
    let (min, max) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    if max <= min {
        return Err(Error::ConstantSeries);
    }
    let span = max - min;
    let boundaries: Vec<f64> = (1..alphabet_size)
        .map(|k| min + span * k as f64 / alphabet_size as f64)
        .collect();
    if boundaries.windows(2).any(|w| w[0] >= w[1]) || boundaries[0] <= min {
        return Err(invalid(format!(
            "range [{min}, {max}] too narrow for {alphabet_size} distinguishable bins"
        )));
    }
    PartitionScheme::from_boundaries(PartitionMethod::Uniform, boundaries, values)
}

/// Equal-occupancy (quantile) partition.
pub fn fit_max_entropy(series: &TimeSeries, alphabet_size: usize) -> Result<PartitionScheme> {
    check_alphabet(alphabet_size)?;
    let sorted = sorted_values(series.values());
    let boundaries = quantile_boundaries(&sorted, alphabet_size)?;
    PartitionScheme::from_boundaries(PartitionMethod::MaxEntropy, boundaries, series.values())
}

/// Quantile boundaries on sorted data.
///
/// Each boundary is the linearly interpolated empirical quantile at `k/bins`
/// whenever that value splits the sample at the expected rank. When repeated
/// values make the quantile land inside a tie run, the boundary moves to the
/// nearest gap between distinct values instead (the midpoint of the gap).
fn quantile_boundaries(sorted: &[f64], bins: usize) -> Result<Vec<f64>> {
    let n = sorted.len();
    let distinct = count_distinct(sorted);
    if distinct < bins {
        return Err(Error::InsufficientDistinct {
            required: bins,
            found: distinct,
        });
    }
    // gap positions: `i` values lie strictly below any boundary in (sorted[i-1], sorted[i]]
    let gaps: Vec<usize> = (1..n).filter(|&i| sorted[i - 1] < sorted[i]).collect();

    let mut boundaries: Vec<f64> = Vec::with_capacity(bins - 1);
    for k in 1..bins {
        let h = (n - 1) as f64 * k as f64 / bins as f64;
        let lo = h.floor() as usize;
        let frac = h - lo as f64;
        let q = if lo + 1 < n {
            sorted[lo] + frac * (sorted[lo + 1] - sorted[lo])
        } else {
            sorted[lo]
        };
        let below = sorted.partition_point(|&x| x < q);
        let boundary = if below == h.ceil() as usize && below > 0 && below < n {
            q
        } else {
            let target = n as f64 * k as f64 / bins as f64;
            let i = nearest_gap(&gaps, target);
            gap_midpoint(sorted[i - 1], sorted[i])
        };
        if let Some(&prev) = boundaries.last() {
            if boundary <= prev {
                return Err(Error::CollapsedBoundaries { bins, distinct });
            }
        }
        boundaries.push(boundary);
    }
    Ok(boundaries)
}

fn nearest_gap(gaps: &[usize], target: f64) -> usize {
    let idx = gaps.partition_point(|&g| (g as f64) < target);
    let below = idx.checked_sub(1).map(|i| gaps[i]);
    let above = gaps.get(idx).copied();
    match (below, above) {
        (Some(b), Some(a)) => {
            if target - b as f64 <= a as f64 - target {
                b
            } else {
                a
            }
        }
        (Some(b), None) => b,
        (None, Some(a)) => a,
        (None, None) => unreachable!("at least two distinct values guarantee a gap"),
    }
}

/// A boundary in `(lo, hi]`; falls back to `hi` when the midpoint rounds
/// down to `lo`.
fn gap_midpoint(lo: f64, hi: f64) -> f64 {
    let mid = lo + (hi - lo) / 2.0;
    if mid > lo {
        mid
    } else {
        hi
    }
}

/// Search settings for [`fit_mbd_with`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MbdConfig {
    /// Quantile grid density: the grid has this many points per input bin.
    pub candidates_per_boundary: usize,
    pub max_sweeps: usize,
}

impl Default for MbdConfig {
    fn default() -> Self {
        Self {
            candidates_per_boundary: 64,
            max_sweeps: 100,
        }
    }
}

/// Result of a maximally bijective discretization.
#[derive(Debug, Clone, PartialEq)]
pub struct MbdFit {
    pub input: PartitionScheme,
    pub output: PartitionScheme,
    /// Mutual information (bits) between input and output symbols.
    pub score: f64,
    /// Score of the plain max-entropy input scheme the search started from.
    pub baseline_score: f64,
}

pub fn fit_mbd(
    input: &TimeSeries,
    output: &TimeSeries,
    alphabet_in: usize,
    alphabet_out: usize,
) -> Result<MbdFit> {
    fit_mbd_with(input, output, alphabet_in, alphabet_out, &MbdConfig::default())
}

/// Supervised partition of `input` that keeps the input→output symbol map as
/// close to a bijection as the data allows.
///
/// The output is partitioned by maximum entropy. Input boundaries start at
/// the max-entropy solution and are improved by coordinate ascent on the
/// input/output symbol mutual information. Candidate boundary positions are a
/// quantile grid plus every gap where the output symbol changes along the
/// sorted input.
pub fn fit_mbd_with(
    input: &TimeSeries,
    output: &TimeSeries,
    alphabet_in: usize,
    alphabet_out: usize,
    config: &MbdConfig,
) -> Result<MbdFit> {
    check_alphabet(alphabet_in)?;
    check_alphabet(alphabet_out)?;
    if input.len() != output.len() {
        return Err(Error::LengthMismatch {
            left: input.len(),
            right: output.len(),
        });
    }
    let n = input.len();
    if n < alphabet_in * alphabet_out {
        return Err(invalid(format!(
            "need at least {} paired samples for a {alphabet_in}x{alphabet_out} discretization, got {n}",
            alphabet_in * alphabet_out
        )));
    }
    if config.candidates_per_boundary == 0 {
        return Err(invalid("candidates_per_boundary must be positive"));
    }

    let output_scheme = fit_max_entropy(output, alphabet_out)?;
    let baseline = fit_max_entropy(input, alphabet_in)?;
    let out_symbols: Vec<usize> = output
        .values()
        .iter()
        .map(|&v| output_scheme.symbol_of(v))
        .collect();

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| input.values()[a].total_cmp(&input.values()[b]));
    let xs: Vec<f64> = order.iter().map(|&i| input.values()[i]).collect();
    let ys: Vec<usize> = order.iter().map(|&i| out_symbols[i]).collect();

    let table = PrefixCounts::new(&ys, alphabet_out);
    let gaps: Vec<usize> = (1..n).filter(|&i| xs[i - 1] < xs[i]).collect();

    let baseline_pos: Vec<usize> = baseline
        .boundaries()
        .iter()
        .map(|&b| xs.partition_point(|&x| x < b))
        .collect();

    let mut candidates: Vec<usize> = baseline_pos.clone();
    let grid = config.candidates_per_boundary * alphabet_in;
    candidates.extend((1..grid).map(|g| nearest_gap(&gaps, n as f64 * g as f64 / grid as f64)));
    candidates.extend(gaps.iter().copied().filter(|&i| ys[i - 1] != ys[i]));
    candidates.sort_unstable();
    candidates.dedup();

    let baseline_score = table.score(&baseline_pos);
    let mut positions = baseline_pos.clone();
    let mut score = baseline_score;
    for _ in 0..config.max_sweeps {
        let mut improved = false;
        for b in 0..positions.len() {
            let lo = if b == 0 { 0 } else { positions[b - 1] };
            let hi = positions.get(b + 1).copied().unwrap_or(n);
            let start = candidates.partition_point(|&c| c <= lo);
            let end = candidates.partition_point(|&c| c < hi);
            let current = positions[b];
            let mut best = (score, current);
            for &c in &candidates[start..end] {
                if c == current {
                    continue;
                }
                positions[b] = c;
                let s = table.score(&positions);
                if s > best.0 + 1e-12 {
                    best = (s, c);
                }
            }
            positions[b] = best.1;
            if best.1 != current {
                score = best.0;
                improved = true;
            }
        }
        if !improved {
            break;
        }
    }

    let boundaries: Vec<f64> = positions
        .iter()
        .zip(&baseline_pos)
        .zip(baseline.boundaries())
        .map(|((&p, &p0), &b0)| if p == p0 { b0 } else { gap_midpoint(xs[p - 1], xs[p]) })
        .collect();
    let input_scheme =
        PartitionScheme::from_boundaries(PartitionMethod::Mbd, boundaries, input.values())?;

    Ok(MbdFit {
        input: input_scheme,
        output: output_scheme,
        score,
        baseline_score,
    })
}

/// Cumulative output-symbol counts along the input-sorted order, so any set
/// of split positions yields its joint histogram in O(bins · alphabet).
struct PrefixCounts {
    alphabet: usize,
    n: usize,
    cumulative: Vec<u64>,
}

impl PrefixCounts {
    fn new(ys: &[usize], alphabet: usize) -> Self {
        let n = ys.len();
        let mut cumulative = vec![0u64; (n + 1) * alphabet];
        for (i, &y) in ys.iter().enumerate() {
            let (prev, next) = cumulative.split_at_mut((i + 1) * alphabet);
            next[..alphabet].copy_from_slice(&prev[i * alphabet..]);
            next[y] += 1;
        }
        Self {
            alphabet,
            n,
            cumulative,
        }
    }

    fn row(&self, i: usize) -> &[u64] {
        &self.cumulative[i * self.alphabet..(i + 1) * self.alphabet]
    }

    fn score(&self, positions: &[usize]) -> f64 {
        let bins = positions.len() + 1;
        let mut joint = vec![0u64; bins * self.alphabet];
        let mut prev = 0;
        for (b, &p) in positions.iter().chain(std::iter::once(&self.n)).enumerate() {
            let (hi, lo) = (self.row(p), self.row(prev));
            for o in 0..self.alphabet {
                joint[b * self.alphabet + o] = hi[o] - lo[o];
            }
            prev = p;
        }
        mutual_information_from_counts(&joint, bins, self.alphabet)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ts(values: Vec<f64>) -> TimeSeries {
        TimeSeries::new("x", values, 1.0).unwrap()
    }

    #[test]
    fn time_series_rejects_bad_input() {
        assert!(TimeSeries::new("a", vec![], 1.0).is_err());
        assert!(TimeSeries::new("a", vec![1.0, f64::NAN], 1.0).is_err());
        assert!(TimeSeries::new("a", vec![1.0, f64::INFINITY], 1.0).is_err());
        assert!(TimeSeries::new("a", vec![1.0], 0.0).is_err());
    }

    #[test]
    fn uniform_on_zero_to_eight() {
        let s = fit_uniform(&ts(vec![0.0, 1.0, 3.0, 5.0, 8.0]), 4).unwrap();
        assert_eq!(s.boundaries(), &[2.0, 4.0, 6.0]);
    }

    #[test]
    fn uniform_constant_series_errors() {
        let err = fit_uniform(&ts(vec![5.0, 5.0, 5.0]), 2).unwrap_err();
        assert!(matches!(err, Error::ConstantSeries));
        assert_eq!(err.to_string(), "constant series cannot be partitioned");
    }

    #[test]
    fn uniform_zero_to_ninety_nine() {
        let s = fit_uniform(&ts((0..100).map(f64::from).collect()), 5).unwrap();
        let expected = [19.8, 39.6, 59.4, 79.2];
        for (b, e) in s.boundaries().iter().zip(expected) {
            assert!((b - e).abs() < 1e-12, "{b} vs {e}");
        }
    }

    #[test]
    fn max_entropy_one_to_eight() {
        let series = ts((1..=8).map(f64::from).collect());
        let s = fit_max_entropy(&series, 4).unwrap();
        let counts: Vec<u64> = s.bin_stats().iter().map(|b| b.count).collect();
        assert_eq!(counts, vec![2, 2, 2, 2]);
    }

    #[test]
    fn max_entropy_binary_is_median() {
        let odd = fit_max_entropy(&ts(vec![9.0, 1.0, 4.0, 7.0, 2.0]), 2).unwrap();
        assert_eq!(odd.boundaries(), &[4.0]);
        let even = fit_max_entropy(&ts(vec![9.0, 1.0, 4.0, 7.0]), 2).unwrap();
        assert_eq!(even.boundaries(), &[5.5]);
    }

    #[test]
    fn max_entropy_needs_distinct_values() {
        let err = fit_max_entropy(&ts(vec![1.0, 1.0, 2.0, 2.0]), 3).unwrap_err();
        assert!(matches!(
            err,
            Error::InsufficientDistinct {
                required: 3,
                found: 2
            }
        ));
        assert!(err.to_string().starts_with("insufficient distinct values"));
    }

    #[test]
    fn max_entropy_ties_move_to_gaps() {
        // plateaus of unequal mass: quantiles land inside the big plateau
        let mut v = vec![1.0; 20];
        v.extend(vec![2.0; 50]);
        v.extend(vec![3.0; 30]);
        let s = fit_max_entropy(&ts(v), 3).unwrap();
        let counts: Vec<u64> = s.bin_stats().iter().map(|b| b.count).collect();
        assert_eq!(counts, vec![20, 50, 30]);
    }

    #[test]
    fn max_entropy_collapsing_ties_error() {
        // three distinct values but one dominates: both quantiles want the same gap
        let mut v = vec![1.0];
        v.extend(vec![2.0; 98]);
        v.push(3.0);
        let s = fit_max_entropy(&ts(v.clone()), 3);
        // gaps exist at 1 and 99, targets 33.3 and 66.7 → gaps 1 and 99; still valid
        assert!(s.is_ok());
        let mut w = vec![2.0; 98];
        w.extend([3.0, 4.0]);
        let err = fit_max_entropy(&ts(w), 3).unwrap_err();
        assert!(matches!(err, Error::CollapsedBoundaries { .. }));
    }

    #[test]
    fn symbolize_conventions() {
        let s = PartitionScheme::from_boundaries(
            PartitionMethod::Uniform,
            vec![2.0, 4.0, 6.0],
            &[1.0, 3.0, 5.0, 7.0],
        )
        .unwrap();
        let seq = symbolize(&ts(vec![1.0, 3.0, 5.0, 7.0, 2.0, 1000.0, -5.0]), &s);
        assert_eq!(seq.symbols(), &[0, 1, 2, 3, 1, 3, 0]);
    }

    #[test]
    fn scheme_json_field_order_and_revalidation() {
        let s = fit_uniform(&ts(vec![0.0, 1.0, 3.0, 5.0, 8.0]), 4).unwrap();
        let json = serde_json::to_string(&s).unwrap();
        let m = json.find("\"method\"").unwrap();
        let a = json.find("\"alphabet_size\"").unwrap();
        let b = json.find("\"boundaries\"").unwrap();
        let st = json.find("\"bin_stats\"").unwrap();
        assert!(m < a && a < b && b < st);
        assert_eq!(PartitionScheme::from_json(&json).unwrap(), s);

        let broken = json.replace("[2.0,4.0,6.0]", "[4.0,2.0,6.0]");
        assert!(PartitionScheme::from_json(&broken).is_err());
    }

    #[test]
    fn empty_bins_have_no_mean() {
        let s = PartitionScheme::from_boundaries(
            PartitionMethod::Uniform,
            vec![4.0, 6.0],
            &[1.0, 2.0, 7.0],
        )
        .unwrap();
        assert_eq!(s.bin_stats()[1], BinStat { count: 0, mean: None });
        assert_eq!(s.bin_stats()[0].mean, Some(1.5));
    }

    #[test]
    fn mbd_identity_pair() {
        let values: Vec<f64> = (0..400).map(|i| ((i * 37) % 400) as f64 * 0.25).collect();
        let x = ts(values.clone());
        let fit = fit_mbd(&x, &x, 4, 4).unwrap();
        assert_eq!(fit.input.boundaries(), fit.output.boundaries());
        assert!((fit.score - 2.0).abs() < 1e-12);
    }

    #[test]
    fn mbd_length_mismatch() {
        let err = fit_mbd(&ts(vec![1.0; 20]), &ts(vec![1.0; 21]), 2, 2).unwrap_err();
        assert!(matches!(err, Error::LengthMismatch { .. }));
        assert!(fit_mbd(&ts(vec![1.0, 2.0, 3.0]), &ts(vec![1.0, 2.0, 3.0]), 2, 2).is_err());
    }
}
