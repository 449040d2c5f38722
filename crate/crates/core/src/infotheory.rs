//! Entropy and mutual information of atomic and relational patterns, and the
//! pattern network built from them. All quantities are in bits.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::markov::{embed_states, fit_atomic, fit_relational, AtomicModel, RelationalModel, StateSequence, SymbolSequence};
use crate::parallel::run_with_workers;

/// Negative values this close to zero are rounding noise.
const MI_CLAMP: f64 = 1e-12;

fn plogp_sum(dist: impl IntoIterator<Item = f64>) -> f64 {
    -dist
        .into_iter()
        .filter(|&p| p > 0.0)
        .map(|p| p * p.log2())
        .sum::<f64>()
}

fn clamp_mi(mi: f64) -> f64 {
    debug_assert!(mi > -1e-9, "mutual information {mi} is meaningfully negative");
    if mi < MI_CLAMP {
        mi.max(0.0)
    } else {
        mi
    }
}

/// Shannon entropy of a probability vector.
pub fn entropy(dist: &[f64]) -> Result<f64> {
    if dist.is_empty() {
        return Err(invalid("empty distribution"));
    }
    if let Some(p) = dist.iter().find(|p| !(p.is_finite() && **p >= 0.0)) {
        return Err(invalid(format!("distribution entry {p} is not a probability")));
    }
    let sum: f64 = dist.iter().sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(invalid(format!("distribution sums to {sum}, not 1")));
    }
    Ok(plogp_sum(dist.iter().copied()).max(0.0))
}

/// `H(next) − Σ_i P(i)·H(row i)` for a row-stochastic matrix.
fn conditional_mi(marginal: &[f64], rows: &crate::matrix::Matrix<f64>) -> f64 {
    let mut next = vec![0.0; rows.cols()];
    let mut conditional = 0.0;
    for (i, &p) in marginal.iter().enumerate() {
        if p == 0.0 {
            continue;
        }
        let row = rows.row(i);
        for (n, &q) in next.iter_mut().zip(row) {
            *n += p * q;
        }
        conditional += p * plogp_sum(row.iter().copied());
    }
    clamp_mi(plogp_sum(next) - conditional)
}

/// Self-predictability I(s_{n+1}; s_n) of an atomic pattern.
pub fn mutual_info_atomic(model: &AtomicModel) -> f64 {
    conditional_mi(model.stationary(), model.pi())
}

/// Directed dependency I(s^B_{n+lag}; s^A_n) of a relational pattern.
pub fn mutual_info_relational(model: &RelationalModel, source_stationary: &[f64]) -> Result<f64> {
    if source_stationary.len() != model.source_state_count() {
        return Err(Error::DimensionMismatch {
            expected: model.source_state_count(),
            found: source_stationary.len(),
        });
    }
    let sum: f64 = source_stationary.iter().sum();
    if source_stationary.iter().any(|p| !(p.is_finite() && *p >= 0.0)) || (sum - 1.0).abs() > 1e-9 {
        return Err(invalid("source stationary distribution is not a probability vector"));
    }
    Ok(conditional_mi(source_stationary, model.pi_cross()))
}

/// Mutual information of a row-major joint count table.
pub fn mutual_information_from_counts(joint: &[u64], rows: usize, cols: usize) -> f64 {
    debug_assert_eq!(joint.len(), rows * cols);
    let total: u64 = joint.iter().sum();
    if total == 0 {
        return 0.0;
    }
    let n = total as f64;
    let mut row_sums = vec![0u64; rows];
    let mut col_sums = vec![0u64; cols];
    for r in 0..rows {
        for c in 0..cols {
            let v = joint[r * cols + c];
            row_sums[r] += v;
            col_sums[c] += v;
        }
    }
    let h = |counts: &mut dyn Iterator<Item = u64>| plogp_sum(counts.map(|c| c as f64 / n));
    let hx = h(&mut row_sums.iter().copied());
    let hy = h(&mut col_sums.iter().copied());
    let hxy = h(&mut joint.iter().copied());
    clamp_mi(hx + hy - hxy)
}

/// Mutual information between two equally long discrete sequences.
pub fn pair_mutual_information(xs: &[usize], ys: &[usize], card_x: usize, card_y: usize) -> Result<f64> {
    if xs.len() != ys.len() {
        return Err(Error::LengthMismatch {
            left: xs.len(),
            right: ys.len(),
        });
    }
    let mut joint = vec![0u64; card_x * card_y];
    for (&x, &y) in xs.iter().zip(ys) {
        if x >= card_x || y >= card_y {
            return Err(invalid(format!("code ({x}, {y}) outside {card_x}x{card_y} table")));
        }
        joint[x * card_y + y] += 1;
    }
    Ok(mutual_information_from_counts(&joint, card_x, card_y))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LagPoint {
    pub lag: usize,
    pub mi: f64,
}

/// Relational MI from `source` to `target` at each lag, refitting per lag.
/// Both streams are embedded at `depth`.
pub fn lag_sweep(
    source: &SymbolSequence,
    target: &SymbolSequence,
    depth: usize,
    lags: &[usize],
    smoothing: f64,
) -> Result<Vec<LagPoint>> {
    if let Some(&bad) = lags.iter().find(|&&l| l < 1) {
        return Err(invalid(format!("lags must be at least 1, got {bad}")));
    }
    let src = embed_states(source, depth)?;
    let tgt = embed_states(target, depth)?;
    lags.iter()
        .map(|&lag| {
            let model = fit_relational(&src, &tgt, lag, smoothing)?;
            let mi = mutual_info_relational(&model, model.source_marginal())?;
            Ok(LagPoint { lag, mi })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AtomicWeight {
    pub node: String,
    pub mi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelationalEdge {
    pub src: String,
    pub dst: String,
    pub mi: f64,
    pub lag: usize,
}

/// Directed graph of streams: node weights are atomic MI, edge weights are
/// relational MI.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatternNetwork {
    pub nodes: Vec<String>,
    pub ap: Vec<AtomicWeight>,
    pub rp: Vec<RelationalEdge>,
    #[serde(skip)]
    pub lag: usize,
    #[serde(skip)]
    pub prune_threshold: f64,
}

impl PatternNetwork {
    pub fn edge(&self, src: &str, dst: &str) -> Option<&RelationalEdge> {
        self.rp.iter().find(|e| e.src == src && e.dst == dst)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Graphviz rendering; node labels carry atomic MI, edge labels relational MI.
    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph stpn {\n");
        for w in &self.ap {
            let _ = writeln!(out, "  \"{}\" [label=\"{}\\nAP={:.4}\"];", w.node, w.node, w.mi);
        }
        for e in &self.rp {
            let _ = writeln!(
                out,
                "  \"{}\" -> \"{}\" [label=\"{:.4} (lag {})\", penwidth={:.3}];",
                e.src,
                e.dst,
                e.mi,
                e.lag,
                1.0 + 4.0 * e.mi
            );
        }
        out.push_str("}\n");
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NetworkConfig {
    pub depth: usize,
    pub lag: usize,
    pub smoothing: f64,
    pub prune_threshold: f64,
    pub workers: usize,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        Self {
            depth: 1,
            lag: 1,
            smoothing: 1e-3,
            prune_threshold: 0.0,
            workers: 1,
        }
    }
}

/// Evaluates every ordered pair of streams and drops relational edges whose
/// MI falls below the prune threshold.
pub fn build_network(streams: &[SymbolSequence], config: &NetworkConfig) -> Result<PatternNetwork> {
    if streams.len() < 2 {
        return Err(invalid(format!(
            "a pattern network needs at least 2 streams, got {}",
            streams.len()
        )));
    }
    if !(config.prune_threshold.is_finite() && config.prune_threshold >= 0.0) {
        return Err(invalid("prune threshold must be finite and non-negative"));
    }
    let len = streams[0].len();
    if let Some(s) = streams.iter().find(|s| s.len() != len) {
        return Err(invalid(format!(
            "stream '{}' has length {} but '{}' has {len}; streams must share a clock",
            s.stream_id(),
            s.len(),
            streams[0].stream_id()
        )));
    }
    let mut ids: Vec<&str> = streams.iter().map(|s| s.stream_id()).collect();
    ids.sort_unstable();
    if ids.windows(2).any(|w| w[0] == w[1]) {
        return Err(invalid("stream ids must be unique"));
    }

    let states: Vec<StateSequence> = streams
        .iter()
        .map(|s| embed_states(s, config.depth))
        .collect::<Result<_>>()?;

    let mut order: Vec<usize> = (0..streams.len()).collect();
    order.sort_by(|&a, &b| streams[a].stream_id().cmp(streams[b].stream_id()));
    let pairs: Vec<(usize, usize)> = order
        .iter()
        .flat_map(|&a| order.iter().map(move |&b| (a, b)))
        .collect();

    let weights: Vec<f64> = run_with_workers(config.workers, || {
        pairs
            .par_iter()
            .map(|&(a, b)| {
                if a == b {
                    let model = fit_atomic(&states[a], config.smoothing)?;
                    Ok(mutual_info_atomic(&model))
                } else {
                    let model = fit_relational(&states[a], &states[b], config.lag, config.smoothing)?;
                    mutual_info_relational(&model, model.source_marginal())
                }
            })
            .collect::<Result<Vec<f64>>>()
    })?;

    let mut ap = Vec::new();
    let mut rp = Vec::new();
    for (&(a, b), &mi) in pairs.iter().zip(&weights) {
        if a == b {
            ap.push(AtomicWeight {
                node: streams[a].stream_id().to_owned(),
                mi,
            });
        } else if mi >= config.prune_threshold {
            rp.push(RelationalEdge {
                src: streams[a].stream_id().to_owned(),
                dst: streams[b].stream_id().to_owned(),
                mi,
                lag: config.lag,
            });
        }
    }
    Ok(PatternNetwork {
        nodes: order.iter().map(|&i| streams[i].stream_id().to_owned()).collect(),
        ap,
        rp,
        lag: config.lag,
        prune_threshold: config.prune_threshold,
    })
}
