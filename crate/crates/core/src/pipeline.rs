//! End-to-end wiring: partition, fit a cross model on training data, predict
//! a held-out target stream, and optionally project component predictions
//! onto a measured aggregate.

use serde::Serialize;

use crate::disaggregation::{disaggregate_with_workers, DisaggregationInstance, DisaggregationResult};
use crate::error::{invalid, Error, Result};
use crate::infotheory::mutual_info_relational;
use crate::markov::{embed_states, fit_relational, RelationalModel};
use crate::partitioning::{fit_max_entropy, fit_mbd, fit_uniform, symbolize, PartitionMethod, PartitionScheme, TimeSeries};
use crate::prediction::{bin_expectations, mse, predict_dist, predict_mc, symbolic_accuracy, PredictionResult};

/// Unsupervised scheme for one stream.
pub fn fit_scheme(series: &TimeSeries, method: PartitionMethod, alphabet: usize) -> Result<PartitionScheme> {
    match method {
        PartitionMethod::Uniform => fit_uniform(series, alphabet),
        PartitionMethod::MaxEntropy => fit_max_entropy(series, alphabet),
        PartitionMethod::Mbd => Err(invalid(
            "mbd partitioning needs an input/output pair, not a single stream",
        )),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredictConfig {
    pub alphabet: usize,
    pub depth: usize,
    pub lag: usize,
    pub smoothing: f64,
    pub method: PartitionMethod,
    /// `None` uses the exact row lookup; `Some(n)` uses `n` Monte Carlo draws.
    pub draws: Option<usize>,
    pub seed: u64,
    pub workers: usize,
}

impl Default for PredictConfig {
    fn default() -> Self {
        Self {
            alphabet: 8,
            depth: 1,
            lag: 1,
            smoothing: 1e-3,
            method: PartitionMethod::MaxEntropy,
            draws: None,
            seed: 0,
            workers: 1,
        }
    }
}

/// Fitted schemes and model for predicting one stream from another.
#[derive(Debug, Clone, PartialEq)]
pub struct StreamPredictor {
    pub source_scheme: PartitionScheme,
    pub target_scheme: PartitionScheme,
    pub model: RelationalModel,
    /// Relational MI of the model on its training data (bits).
    pub train_mi: f64,
}

impl StreamPredictor {
    /// Fits schemes on the training pair, then the source-state → target-symbol
    /// cross model at `config.lag`.
    pub fn fit(source: &TimeSeries, target: &TimeSeries, config: &PredictConfig) -> Result<Self> {
        if source.len() != target.len() {
            return Err(Error::LengthMismatch {
                left: source.len(),
                right: target.len(),
            });
        }
        let (source_scheme, target_scheme) = match config.method {
            PartitionMethod::Mbd => {
                let fit = fit_mbd(source, target, config.alphabet, config.alphabet)?;
                (fit.input, fit.output)
            }
            m => (
                fit_scheme(source, m, config.alphabet)?,
                fit_scheme(target, m, config.alphabet)?,
            ),
        };
        let states = embed_states(&symbolize(source, &source_scheme), config.depth)?;
        let target_symbols = symbolize(target, &target_scheme);
        let model = fit_relational(&states, &target_symbols, config.lag, config.smoothing)?;
        let train_mi = mutual_info_relational(&model, model.source_marginal())?;
        Ok(Self {
            source_scheme,
            target_scheme,
            model,
            train_mi,
        })
    }

    pub fn from_parts(source_scheme: PartitionScheme, target_scheme: PartitionScheme, model: RelationalModel) -> Result<Self> {
        if model.alphabet_size() != source_scheme.alphabet_size()
            || model.target_dimension() != target_scheme.alphabet_size()
        {
            return Err(invalid("model dimensions do not match the partition schemes"));
        }
        let train_mi = mutual_info_relational(&model, model.source_marginal())?;
        Ok(Self {
            source_scheme,
            target_scheme,
            model,
            train_mi,
        })
    }

    /// Predicts the target over the clock of `source`.
    pub fn predict(&self, source: &TimeSeries, config: &PredictConfig) -> Result<PredictionResult> {
        let states = embed_states(&symbolize(source, &self.source_scheme), self.model.depth())?;
        let dists = match config.draws {
            None => predict_dist(&states, &self.model)?,
            Some(draws) => predict_mc(&states, &self.model, draws, config.seed, config.workers)?,
        };
        PredictionResult::new(dists, bin_expectations(&self.target_scheme))
    }
}

/// Prediction scored against the actual target on the overlapping steps.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredPrediction {
    pub result: PredictionResult,
    /// Actual target values at clock `result.start ..`.
    pub actual: Vec<f64>,
    pub actual_symbols: Vec<usize>,
    pub mse: f64,
    pub accuracy: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PredictionSummary {
    pub mse: f64,
    pub symbolic_accuracy: f64,
    pub steps: usize,
    pub first_step: usize,
    pub train_mi: f64,
}

impl ScoredPrediction {
    pub fn score(result: PredictionResult, target: &TimeSeries, target_scheme: &PartitionScheme) -> Result<Self> {
        let n = result.overlap(target.len());
        if n == 0 {
            return Err(invalid("prediction does not overlap the target series"));
        }
        let actual = target.values()[result.start..result.start + n].to_vec();
        let actual_symbols: Vec<usize> = actual.iter().map(|&v| target_scheme.symbol_of(v)).collect();
        let mse = mse(&result.continuous[..n], &actual)?;
        let accuracy = symbolic_accuracy(&result.symbolic_map[..n], &actual_symbols)?;
        Ok(Self {
            result,
            actual,
            actual_symbols,
            mse,
            accuracy,
        })
    }
}

/// Fits on the training pair and scores on the test pair.
pub fn predict_stream(
    train_source: &TimeSeries,
    train_target: &TimeSeries,
    test_source: &TimeSeries,
    test_target: &TimeSeries,
    config: &PredictConfig,
) -> Result<(StreamPredictor, ScoredPrediction)> {
    let predictor = StreamPredictor::fit(train_source, train_target, config)?;
    if test_source.len() != test_target.len() {
        return Err(Error::LengthMismatch {
            left: test_source.len(),
            right: test_target.len(),
        });
    }
    let result = predictor.predict(test_source, config)?;
    let scored = ScoredPrediction::score(result, test_target, &predictor.target_scheme)?;
    Ok((predictor, scored))
}

/// Per-component predictions from the aggregate, then the exact projection.
#[derive(Debug, Clone, PartialEq)]
pub struct StpnDisaggregation {
    /// First clock index (within the test data) covered by the projection.
    pub start: usize,
    pub instance: DisaggregationInstance,
    pub result: DisaggregationResult,
    /// `truth[i]` aligned with `result.components[i]`.
    pub truth: Vec<Vec<f64>>,
}

impl StpnDisaggregation {
    /// Per-component squared error before and after the projection.
    pub fn squared_errors(&self) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
        let sq = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).collect::<Vec<f64>>();
        let before = self
            .instance
            .predictions()
            .iter()
            .zip(&self.truth)
            .map(|(p, t)| sq(p, t))
            .collect();
        let after = self
            .result
            .components
            .iter()
            .zip(&self.truth)
            .map(|(c, t)| sq(c, t))
            .collect();
        (before, after)
    }
}

/// Predicts each component from the aggregate stream and projects the
/// predictions so they are non-negative and sum to the aggregate.
pub fn stpn_disaggregate(
    train_aggregate: &TimeSeries,
    train_components: &[TimeSeries],
    test_aggregate: &TimeSeries,
    test_components: &[TimeSeries],
    config: &PredictConfig,
) -> Result<StpnDisaggregation> {
    if train_components.len() != test_components.len() || train_components.is_empty() {
        return Err(invalid("train and test must list the same, non-empty set of components"));
    }
    let mut predictions = Vec::new();
    let mut truth = Vec::new();
    let mut start = 0;
    for (train, test) in train_components.iter().zip(test_components) {
        let (_, scored) = predict_stream(train_aggregate, train, test_aggregate, test, config)?;
        start = scored.result.start;
        predictions.push(scored.result.continuous[..scored.actual.len()].to_vec());
        truth.push(scored.actual);
    }
    let n = truth[0].len();
    let aggregate = test_aggregate.values()[start..start + n].to_vec();
    let names = test_components.iter().map(|c| c.id().to_owned()).collect();
    let instance = DisaggregationInstance::new(aggregate, names, predictions)?;
    let result = disaggregate_with_workers(&instance, config.workers)?;
    Ok(StpnDisaggregation {
        start,
        instance,
        result,
        truth,
    })
}
