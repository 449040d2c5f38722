//! Prediction of a target stream from an observed source stream.
//!
//! Symbolic prediction looks up, for every source state, the row of the
//! cross-transition matrix `lag` steps ahead. Continuous prediction weights
//! each target bin's expected value by those symbol probabilities:
//! `W(k) = Σ_j Pr_k(j) · W(E|j)`.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::markov::{Aligned, RelationalModel, StateSequence};
use crate::parallel::run_with_workers;
use crate::partitioning::PartitionScheme;

/// Per-symbol expected value `W(E|j)`: the training mean of bin `j`, or the
/// bin midpoint when no training value fell into it. Empty edge bins sit half
/// an adjacent bin width beyond their boundary.
pub fn bin_expectations(scheme: &PartitionScheme) -> Vec<f64> {
    let b = scheme.boundaries();
    let h = scheme.alphabet_size();
    scheme
        .bin_stats()
        .iter()
        .enumerate()
        .map(|(j, stat)| {
            stat.mean.unwrap_or_else(|| {
                if j == 0 {
                    let width = if b.len() > 1 { b[1] - b[0] } else { 0.0 };
                    b[0] - width / 2.0
                } else if j == h - 1 {
                    let width = if b.len() > 1 { b[j - 1] - b[j - 2] } else { 0.0 };
                    b[j - 1] + width / 2.0
                } else {
                    (b[j - 1] + b[j]) / 2.0
                }
            })
        })
        .collect()
}

fn check_compatible(source: &StateSequence, model: &RelationalModel) -> Result<()> {
    if source.depth() != model.depth() || source.alphabet_size() != model.alphabet_size() {
        return Err(invalid(format!(
            "source encoding (depth {}, alphabet {}) does not match the model (depth {}, alphabet {})",
            source.depth(),
            source.alphabet_size(),
            model.depth(),
            model.alphabet_size()
        )));
    }
    Ok(())
}

/// Target distributions on a shared clock; `dists[k]` predicts clock index
/// `start + k`.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictedDists {
    pub start: usize,
    pub dists: Vec<Vec<f64>>,
}

/// Exact per-step target distributions: row `s_n` of the cross matrix
/// predicts clock index `n + lag`.
pub fn predict_dist(source: &StateSequence, model: &RelationalModel) -> Result<PredictedDists> {
    check_compatible(source, model)?;
    let pi = model.pi_cross();
    let dists = source.states().iter().map(|&s| pi.row(s).to_vec()).collect();
    Ok(PredictedDists {
        start: source.start() + model.lag(),
        dists,
    })
}

/// Monte Carlo estimate of [`predict_dist`]: `draws` independent samples from
/// each step's row, tallied into empirical frequencies.
///
/// Each step draws from its own ChaCha stream keyed by `(seed, step)`, so the
/// output is reproducible and independent of `workers`.
pub fn predict_mc(
    source: &StateSequence,
    model: &RelationalModel,
    draws: usize,
    seed: u64,
    workers: usize,
) -> Result<PredictedDists> {
    check_compatible(source, model)?;
    if draws < 1 {
        return Err(invalid("draws must be at least 1"));
    }
    let pi = model.pi_cross();
    let cumulative: Vec<Vec<f64>> = pi
        .iter_rows()
        .map(|row| {
            row.iter()
                .scan(0.0, |acc, &p| {
                    *acc += p;
                    Some(*acc)
                })
                .collect()
        })
        .collect();
    let states = source.states();
    let dists = run_with_workers(workers, || {
        states
            .par_iter()
            .enumerate()
            .map(|(step, &s)| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(step as u64);
                sample_frequencies(pi.row(s), &cumulative[s], draws, &mut rng)
            })
            .collect()
    });
    Ok(PredictedDists {
        start: source.start() + model.lag(),
        dists,
    })
}

fn sample_frequencies(row: &[f64], cumulative: &[f64], draws: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    // fallback for u beyond the rounded total: the last symbol with mass
    let last = row.iter().rposition(|&p| p > 0.0).unwrap_or(row.len() - 1);
    let mut tally = vec![0u64; row.len()];
    for _ in 0..draws {
        let u: f64 = rng.gen();
        let j = cumulative.partition_point(|&c| c <= u).min(last);
        tally[j] += 1;
    }
    tally.iter().map(|&c| c as f64 / draws as f64).collect()
}

/// `W(k) = Σ_j Pr_k(j)·W(E|j)` for every step.
pub fn predict_continuous(dists: &[Vec<f64>], bin_exp: &[f64]) -> Result<Vec<f64>> {
    dists
        .iter()
        .map(|d| {
            if d.len() != bin_exp.len() {
                return Err(Error::DimensionMismatch {
                    expected: bin_exp.len(),
                    found: d.len(),
                });
            }
            Ok(d.iter().zip(bin_exp).map(|(p, w)| p * w).sum())
        })
        .collect()
}

/// Index of the largest probability; ties resolve to the lowest index.
pub fn most_likely(dist: &[f64]) -> usize {
    let mut best = 0;
    for (j, &p) in dist.iter().enumerate().skip(1) {
        if p > dist[best] {
            best = j;
        }
    }
    best
}

pub fn mse(predicted: &[f64], actual: &[f64]) -> Result<f64> {
    if predicted.len() != actual.len() {
        return Err(Error::LengthMismatch {
            left: predicted.len(),
            right: actual.len(),
        });
    }
    if predicted.is_empty() {
        return Err(invalid("mean squared error of empty sequences"));
    }
    let sum: f64 = predicted
        .iter()
        .zip(actual)
        .map(|(p, a)| (p - a) * (p - a))
        .sum();
    Ok(sum / predicted.len() as f64)
}

/// Fraction of positions where the two symbol sequences agree.
pub fn symbolic_accuracy(predicted: &[usize], actual: &[usize]) -> Result<f64> {
    if predicted.len() != actual.len() {
        return Err(Error::LengthMismatch {
            left: predicted.len(),
            right: actual.len(),
        });
    }
    if predicted.is_empty() {
        return Err(invalid("accuracy of empty sequences"));
    }
    let hits = predicted.iter().zip(actual).filter(|(p, a)| p == a).count();
    Ok(hits as f64 / predicted.len() as f64)
}

/// Symbolic and continuous prediction of one target stream.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PredictionResult {
    /// Clock index of the first prediction.
    pub start: usize,
    pub per_step_dist: Vec<Vec<f64>>,
    pub symbolic_map: Vec<usize>,
    pub continuous: Vec<f64>,
    pub bin_expectations: Vec<f64>,
}

impl PredictionResult {
    pub fn new(dists: PredictedDists, bin_expectations: Vec<f64>) -> Result<Self> {
        for (k, d) in dists.dists.iter().enumerate() {
            let sum: f64 = d.iter().sum();
            if (sum - 1.0).abs() > 1e-9 {
                return Err(invalid(format!("step {k} distribution sums to {sum}")));
            }
        }
        let continuous = predict_continuous(&dists.dists, &bin_expectations)?;
        let symbolic_map = dists.dists.iter().map(|d| most_likely(d)).collect();
        Ok(Self {
            start: dists.start,
            per_step_dist: dists.dists,
            symbolic_map,
            continuous,
            bin_expectations,
        })
    }

    pub fn len(&self) -> usize {
        self.continuous.len()
    }

    pub fn is_empty(&self) -> bool {
        self.continuous.is_empty()
    }

    /// Number of predicted steps whose clock index falls inside a series of
    /// length `series_len`.
    pub fn overlap(&self, series_len: usize) -> usize {
        series_len.saturating_sub(self.start).min(self.len())
    }

    /// Writes `step_index, actual, predicted_symbol, predicted_value, p_0..`.
    /// `actual` is indexed by clock; steps beyond it leave the column empty.
    pub fn write_csv<W: Write>(&self, writer: W, actual: Option<&[f64]>) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec![
            "step_index".to_owned(),
            "actual".to_owned(),
            "predicted_symbol".to_owned(),
            "predicted_value".to_owned(),
        ];
        header.extend((0..self.bin_expectations.len()).map(|j| format!("p_{j}")));
        w.write_record(&header)?;
        for k in 0..self.len() {
            let clock = self.start + k;
            let mut record = vec![
                clock.to_string(),
                actual
                    .and_then(|a| a.get(clock))
                    .map(|v| v.to_string())
                    .unwrap_or_default(),
                self.symbolic_map[k].to_string(),
                self.continuous[k].to_string(),
            ];
            record.extend(self.per_step_dist[k].iter().map(|p| p.to_string()));
            w.write_record(&record)?;
        }
        w.flush()?;
        Ok(())
    }
}
