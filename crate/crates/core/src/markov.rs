//! D-Markov and xD-Markov machines estimated from symbol streams.
//!
//! A depth-`D` state at time `n` is the window of the last `D` symbols,
//! encoded with the most recent symbol as the lowest-order digit:
//! `state[n] = Σ_{d=0}^{D-1} symbol[n-d] · |H|^d`.
//!
//! Every series carries the time index of its first element (`start`) so
//! that state sequences of different depths, and plain symbol sequences, can
//! be paired on a common clock.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::matrix::Matrix;

/// Upper bound on `source states × target states` for dense count matrices.
pub const MAX_MATRIX_ENTRIES: usize = 1 << 26;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SymbolSequence {
    stream_id: String,
    symbols: Vec<usize>,
    alphabet_size: usize,
}

impl SymbolSequence {
    pub fn new(stream_id: impl Into<String>, symbols: Vec<usize>, alphabet_size: usize) -> Result<Self> {
        let stream_id = stream_id.into();
        if symbols.is_empty() {
            return Err(invalid(format!("symbol sequence '{stream_id}' is empty")));
        }
        if alphabet_size < 1 {
            return Err(invalid("alphabet size must be positive"));
        }
        if let Some(pos) = symbols.iter().position(|&s| s >= alphabet_size) {
            return Err(invalid(format!(
                "symbol {} at index {pos} of '{stream_id}' exceeds alphabet size {alphabet_size}",
                symbols[pos]
            )));
        }
        Ok(Self {
            stream_id,
            symbols,
            alphabet_size,
        })
    }

    pub fn stream_id(&self) -> &str {
        &self.stream_id
    }

    pub fn symbols(&self) -> &[usize] {
        &self.symbols
    }

    pub fn alphabet_size(&self) -> usize {
        self.alphabet_size
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    /// Drops the first `k` symbols.
    pub fn shifted(&self, k: usize) -> Result<Self> {
        Self::new(
            self.stream_id.clone(),
            self.symbols.get(k..).unwrap_or_default().to_vec(),
            self.alphabet_size,
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StateSequence {
    stream_id: String,
    depth: usize,
    alphabet_size: usize,
    states: Vec<usize>,
}

impl StateSequence {
    pub fn stream_id(&self) -> &str {
        &self.stream_id
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn alphabet_size(&self) -> usize {
        self.alphabet_size
    }

    pub fn states(&self) -> &[usize] {
        &self.states
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// `|H|^D`, the size of the full state space.
    pub fn state_count(&self) -> usize {
        self.alphabet_size.pow(self.depth as u32)
    }
}

fn state_space(alphabet_size: usize, depth: usize) -> Result<usize> {
    u32::try_from(depth)
        .ok()
        .and_then(|d| alphabet_size.checked_pow(d))
        .filter(|&q| q <= MAX_MATRIX_ENTRIES)
        .ok_or_else(|| {
            invalid(format!(
                "state space {alphabet_size}^{depth} is too large for a dense model"
            ))
        })
}

/// Windows of the last `depth` symbols, most recent symbol lowest-order.
pub fn embed_states(seq: &SymbolSequence, depth: usize) -> Result<StateSequence> {
    if depth < 1 {
        return Err(invalid("depth must be at least 1"));
    }
    if seq.len() < depth {
        return Err(invalid(format!(
            "sequence '{}' of length {} is shorter than depth {depth}",
            seq.stream_id(),
            seq.len()
        )));
    }
    let h = seq.alphabet_size();
    state_space(h, depth)?;
    let states = seq
        .symbols()
        .windows(depth)
        .map(|w| w.iter().rev().fold((0, 1), |(acc, place), &s| (acc + s * place, place * h)).0)
        .collect();
    Ok(StateSequence {
        stream_id: seq.stream_id().to_owned(),
        depth,
        alphabet_size: h,
        states,
    })
}

/// What the columns of a cross model index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum TargetKind {
    /// Depth-`depth` states of the target stream.
    States { depth: usize, alphabet_size: usize },
    /// Raw symbols of the target stream.
    Symbols { alphabet_size: usize },
}

impl TargetKind {
    pub fn dimension(self) -> usize {
        match self {
            TargetKind::States {
                depth,
                alphabet_size,
            } => alphabet_size.pow(depth as u32),
            TargetKind::Symbols { alphabet_size } => alphabet_size,
        }
    }
}

/// A discrete series aligned on a shared clock.
pub trait Aligned {
    /// Clock index of the first element.
    fn start(&self) -> usize;
    fn codes(&self) -> &[usize];
    fn target_kind(&self) -> TargetKind;

    /// Clock index one past the last element.
    fn end(&self) -> usize {
        self.start() + self.codes().len()
    }
}

impl Aligned for SymbolSequence {
    fn start(&self) -> usize {
        0
    }

    fn codes(&self) -> &[usize] {
        &self.symbols
    }

    fn target_kind(&self) -> TargetKind {
        TargetKind::Symbols {
            alphabet_size: self.alphabet_size,
        }
    }
}

impl Aligned for StateSequence {
    fn start(&self) -> usize {
        self.depth - 1
    }

    fn codes(&self) -> &[usize] {
        &self.states
    }

    fn target_kind(&self) -> TargetKind {
        TargetKind::States {
            depth: self.depth,
            alphabet_size: self.alphabet_size,
        }
    }
}

fn check_smoothing(smoothing: f64) -> Result<()> {
    if !(smoothing.is_finite() && smoothing >= 0.0) {
        return Err(invalid(format!(
            "smoothing must be finite and non-negative, got {smoothing}"
        )));
    }
    Ok(())
}

/// Additive smoothing per row; rows without observations become uniform.
fn normalize(counts: &Matrix<u64>, smoothing: f64) -> Matrix<f64> {
    let cols = counts.cols();
    let mut pi = Matrix::zeros(counts.rows(), cols);
    for r in 0..counts.rows() {
        let row = counts.row(r);
        let total: u64 = row.iter().sum();
        let denom = total as f64 + smoothing * cols as f64;
        let out = pi.row_mut(r);
        if denom > 0.0 {
            for (p, &c) in out.iter_mut().zip(row) {
                *p = (c as f64 + smoothing) / denom;
            }
        } else {
            out.fill(1.0 / cols as f64);
        }
    }
    pi
}

fn frequencies(codes: impl Iterator<Item = usize>, size: usize) -> Vec<f64> {
    let mut counts = vec![0u64; size];
    let mut total = 0u64;
    for c in codes {
        counts[c] += 1;
        total += 1;
    }
    counts.iter().map(|&c| c as f64 / total as f64).collect()
}

fn check_rows_stochastic(pi: &Matrix<f64>, what: &str) -> Result<()> {
    for (r, row) in pi.iter_rows().enumerate() {
        if row.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(invalid(format!("{what} row {r} has an entry outside [0, 1]")));
        }
        let sum: f64 = row.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(invalid(format!("{what} row {r} sums to {sum}, not 1")));
        }
    }
    Ok(())
}

fn check_distribution(p: &[f64], what: &str) -> Result<()> {
    if p.iter().any(|x| !(0.0..=1.0).contains(x)) {
        return Err(invalid(format!("{what} has an entry outside [0, 1]")));
    }
    let sum: f64 = p.iter().sum();
    if (sum - 1.0).abs() > 1e-12 {
        return Err(invalid(format!("{what} sums to {sum}, not 1")));
    }
    Ok(())
}

fn check_matches_counts(counts: &Matrix<u64>, pi: &Matrix<f64>, smoothing: f64) -> Result<()> {
    let expected = normalize(counts, smoothing);
    let worst = expected
        .as_slice()
        .iter()
        .zip(pi.as_slice())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    if worst > 1e-12 {
        return Err(invalid(format!(
            "transition probabilities disagree with counts (max deviation {worst:e})"
        )));
    }
    Ok(())
}

/// Self-transition model Π of one stream (a D-Markov machine).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "AtomicRepr", into = "AtomicRepr")]
pub struct AtomicModel {
    depth: usize,
    alphabet_size: usize,
    smoothing: f64,
    counts: Matrix<u64>,
    pi: Matrix<f64>,
    stationary: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct AtomicRepr {
    depth: usize,
    alphabet_size: usize,
    smoothing: f64,
    counts: Matrix<u64>,
    pi: Matrix<f64>,
    stationary: Vec<f64>,
}

impl From<AtomicModel> for AtomicRepr {
    fn from(m: AtomicModel) -> Self {
        AtomicRepr {
            depth: m.depth,
            alphabet_size: m.alphabet_size,
            smoothing: m.smoothing,
            counts: m.counts,
            pi: m.pi,
            stationary: m.stationary,
        }
    }
}

impl TryFrom<AtomicRepr> for AtomicModel {
    type Error = Error;

    fn try_from(r: AtomicRepr) -> Result<Self> {
        if r.depth < 1 || r.alphabet_size < 1 {
            return Err(invalid("depth and alphabet size must be positive"));
        }
        check_smoothing(r.smoothing)?;
        let q = state_space(r.alphabet_size, r.depth)?;
        for (name, rows, cols) in [
            ("counts", r.counts.rows(), r.counts.cols()),
            ("pi", r.pi.rows(), r.pi.cols()),
        ] {
            if rows != q || cols != q {
                return Err(invalid(format!(
                    "{name} is {rows}x{cols}, expected {q}x{q}"
                )));
            }
        }
        if r.stationary.len() != q {
            return Err(Error::DimensionMismatch {
                expected: q,
                found: r.stationary.len(),
            });
        }
        check_rows_stochastic(&r.pi, "pi")?;
        check_matches_counts(&r.counts, &r.pi, r.smoothing)?;
        check_distribution(&r.stationary, "stationary")?;
        Ok(AtomicModel {
            depth: r.depth,
            alphabet_size: r.alphabet_size,
            smoothing: r.smoothing,
            counts: r.counts,
            pi: r.pi,
            stationary: r.stationary,
        })
    }
}

impl AtomicModel {
    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn alphabet_size(&self) -> usize {
        self.alphabet_size
    }

    pub fn state_count(&self) -> usize {
        self.pi.rows()
    }

    pub fn smoothing(&self) -> f64 {
        self.smoothing
    }

    pub fn counts(&self) -> &Matrix<u64> {
        &self.counts
    }

    /// Row `j` is the distribution of the next state given current state `j`.
    pub fn pi(&self) -> &Matrix<f64> {
        &self.pi
    }

    /// Empirical frequency of the states that start a transition.
    pub fn stationary(&self) -> &[f64] {
        &self.stationary
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

pub fn fit_atomic(states: &StateSequence, smoothing: f64) -> Result<AtomicModel> {
    check_smoothing(smoothing)?;
    if states.len() < 2 {
        return Err(invalid(format!(
            "need at least 2 states to count transitions, got {}",
            states.len()
        )));
    }
    let q = states.state_count();
    if q.saturating_mul(q) > MAX_MATRIX_ENTRIES {
        return Err(invalid(format!("{q} states are too many for a dense transition matrix")));
    }
    let mut counts = Matrix::zeros(q, q);
    for w in states.states().windows(2) {
        counts.add_at(w[0], w[1], 1);
    }
    let pi = normalize(&counts, smoothing);
    let stationary = frequencies(states.states()[..states.len() - 1].iter().copied(), q);
    Ok(AtomicModel {
        depth: states.depth(),
        alphabet_size: states.alphabet_size(),
        smoothing,
        counts,
        pi,
        stationary,
    })
}

/// Cross-transition model Π^AB from a source's states to a target's states
/// or symbols `lag` steps later (an xD-Markov machine).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RelationalRepr", into = "RelationalRepr")]
pub struct RelationalModel {
    depth: usize,
    alphabet_size: usize,
    target: TargetKind,
    lag: usize,
    smoothing: f64,
    counts: Matrix<u64>,
    pi_cross: Matrix<f64>,
    source_marginal: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct RelationalRepr {
    depth: usize,
    alphabet_size: usize,
    target: TargetKind,
    lag: usize,
    smoothing: f64,
    counts: Matrix<u64>,
    pi: Matrix<f64>,
    stationary: Vec<f64>,
}

impl From<RelationalModel> for RelationalRepr {
    fn from(m: RelationalModel) -> Self {
        RelationalRepr {
            depth: m.depth,
            alphabet_size: m.alphabet_size,
            target: m.target,
            lag: m.lag,
            smoothing: m.smoothing,
            counts: m.counts,
            pi: m.pi_cross,
            stationary: m.source_marginal,
        }
    }
}

impl TryFrom<RelationalRepr> for RelationalModel {
    type Error = Error;

    fn try_from(r: RelationalRepr) -> Result<Self> {
        if r.depth < 1 || r.alphabet_size < 1 {
            return Err(invalid("depth and alphabet size must be positive"));
        }
        if r.lag < 1 {
            return Err(invalid("lag must be at least 1"));
        }
        check_smoothing(r.smoothing)?;
        let q = state_space(r.alphabet_size, r.depth)?;
        let t = match r.target {
            TargetKind::States {
                depth,
                alphabet_size,
            } => state_space(alphabet_size, depth)?,
            TargetKind::Symbols { alphabet_size } => alphabet_size,
        };
        for (name, rows, cols) in [
            ("counts", r.counts.rows(), r.counts.cols()),
            ("pi", r.pi.rows(), r.pi.cols()),
        ] {
            if rows != q || cols != t {
                return Err(invalid(format!(
                    "{name} is {rows}x{cols}, expected {q}x{t}"
                )));
            }
        }
        if r.stationary.len() != q {
            return Err(Error::DimensionMismatch {
                expected: q,
                found: r.stationary.len(),
            });
        }
        check_rows_stochastic(&r.pi, "pi")?;
        check_matches_counts(&r.counts, &r.pi, r.smoothing)?;
        check_distribution(&r.stationary, "stationary")?;
        Ok(RelationalModel {
            depth: r.depth,
            alphabet_size: r.alphabet_size,
            target: r.target,
            lag: r.lag,
            smoothing: r.smoothing,
            counts: r.counts,
            pi_cross: r.pi,
            source_marginal: r.stationary,
        })
    }
}

impl RelationalModel {
    /// Depth of the source state embedding.
    pub fn depth(&self) -> usize {
        self.depth
    }

    /// Source alphabet size.
    pub fn alphabet_size(&self) -> usize {
        self.alphabet_size
    }

    pub fn source_state_count(&self) -> usize {
        self.pi_cross.rows()
    }

    pub fn target(&self) -> TargetKind {
        self.target
    }

    pub fn target_dimension(&self) -> usize {
        self.pi_cross.cols()
    }

    pub fn lag(&self) -> usize {
        self.lag
    }

    pub fn smoothing(&self) -> f64 {
        self.smoothing
    }

    pub fn counts(&self) -> &Matrix<u64> {
        &self.counts
    }

    pub fn pi_cross(&self) -> &Matrix<f64> {
        &self.pi_cross
    }

    /// Empirical frequency of source states over the fitted pairs.
    pub fn source_marginal(&self) -> &[f64] {
        &self.source_marginal
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// Index pairs `(source index, target index)` whose clock times differ by
/// `lag`.
pub(crate) fn lagged_pairs<T: Aligned + ?Sized>(
    source: &StateSequence,
    target: &T,
    lag: usize,
) -> Result<std::ops::Range<usize>> {
    if source.end() != target.end() {
        return Err(invalid(format!(
            "source '{}' and target are misaligned: they end at clock {} and {}",
            source.stream_id(),
            source.end(),
            target.end()
        )));
    }
    let first = source.start().max(target.start().saturating_sub(lag));
    let last = source.end().saturating_sub(lag);
    Ok(first..last.max(first))
}

pub fn fit_relational<T: Aligned + ?Sized>(
    source: &StateSequence,
    target: &T,
    lag: usize,
    smoothing: f64,
) -> Result<RelationalModel> {
    check_smoothing(smoothing)?;
    if lag < 1 {
        return Err(invalid("lag must be at least 1"));
    }
    let times = lagged_pairs(source, target, lag)?;
    if times.len() < 2 {
        return Err(invalid(format!(
            "only {} overlapping pairs at lag {lag}; need at least 2",
            times.len()
        )));
    }
    let kind = target.target_kind();
    let q = source.state_count();
    let t = kind.dimension();
    if q.saturating_mul(t) > MAX_MATRIX_ENTRIES {
        return Err(invalid(format!("{q}x{t} cross matrix is too large")));
    }
    let src = source.codes();
    let tgt = target.codes();
    let mut counts = Matrix::zeros(q, t);
    for time in times.clone() {
        counts.add_at(src[time - source.start()], tgt[time + lag - target.start()], 1);
    }
    let pi_cross = normalize(&counts, smoothing);
    let source_marginal = frequencies(times.map(|time| src[time - source.start()]), q);
    Ok(RelationalModel {
        depth: source.depth(),
        alphabet_size: source.alphabet_size(),
        target: kind,
        lag,
        smoothing,
        counts,
        pi_cross,
        source_marginal,
    })
}
