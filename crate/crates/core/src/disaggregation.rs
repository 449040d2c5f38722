//! Refinement of per-component predictions so that they are non-negative and
//! add up to the measured aggregate.
//!
//! At every step the least-squares problem
//!
//! ```text
//! minimize Σ_i (c_i − ĉ_i)²  subject to  Σ_i c_i = s,  c ≥ 0
//! ```
//!
//! decouples across time and is the Euclidean projection of `ĉ` onto the
//! scaled simplex. Its solution is `c_i = max(0, ĉ_i + λ)` where `λ` is found
//! exactly by sorting.

use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::parallel::run_with_workers;

/// Optimality tolerance used by [`kkt_check`].
pub const KKT_TOLERANCE: f64 = 1e-8;

/// Projects `c_hat` onto `{x ≥ 0, Σx = s}`; returns the projection and the
/// multiplier `λ` of the sum constraint.
pub fn project_step(c_hat: &[f64], s: f64) -> Result<(Vec<f64>, f64)> {
    if c_hat.is_empty() {
        return Err(invalid("projection needs at least one component"));
    }
    if !(s.is_finite() && s >= 0.0) {
        return Err(invalid(format!("aggregate must be finite and non-negative, got {s}")));
    }
    if let Some(v) = c_hat.iter().find(|v| !v.is_finite()) {
        return Err(invalid(format!("prediction {v} is not finite")));
    }
    let top = c_hat.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if s == 0.0 {
        return Ok((vec![0.0; c_hat.len()], -top));
    }
    // already feasible up to summation-order rounding: keep the input as is
    let total: f64 = c_hat.iter().sum();
    if c_hat.iter().all(|&v| v >= 0.0) && (total - s).abs() <= c_hat.len() as f64 * f64::EPSILON * s {
        return Ok((c_hat.to_vec(), 0.0));
    }

    let mut sorted = c_hat.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    // the active set is the longest prefix of the descending order whose
    // shifted values stay positive
    let mut prefix = 0.0;
    let mut lambda = s - sorted[0];
    for (k, &u) in sorted.iter().enumerate() {
        prefix += u;
        let candidate = (s - prefix) / (k + 1) as f64;
        if u + candidate > 0.0 {
            lambda = candidate;
        } else {
            break;
        }
    }

    let mut c: Vec<f64> = c_hat.iter().map(|&v| (v + lambda).max(0.0)).collect();
    // fold the rounding residual of the sum into the largest component
    let residual = s - c.iter().sum::<f64>();
    if residual != 0.0 {
        let big = (0..c.len())
            .max_by(|&a, &b| c[a].total_cmp(&c[b]))
            .expect("non-empty");
        c[big] = (c[big] + residual).max(0.0);
    }
    Ok((c, lambda))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KktReport {
    /// `|Σc − s|`.
    pub sum_residual: f64,
    /// Magnitude of the most negative component (0 when all are ≥ 0).
    pub nonneg_residual: f64,
    /// Largest `|c_i − ĉ_i − λ|` over components with `c_i > 0`.
    pub stationarity_residual: f64,
    /// Largest `ĉ_i + λ` over components held at zero (positive means the
    /// multiplier of the bound would be negative).
    pub dual_residual: f64,
    pub passed: bool,
}

impl KktReport {
    pub fn max_residual(&self) -> f64 {
        self.sum_residual
            .max(self.nonneg_residual)
            .max(self.stationarity_residual)
            .max(self.dual_residual)
    }
}

/// Certifies that `c` solves the projection of `c_hat` with multiplier
/// `lambda` onto the simplex of total `s`.
pub fn kkt_check(c_hat: &[f64], c: &[f64], lambda: f64, s: f64) -> Result<KktReport> {
    if c_hat.len() != c.len() {
        return Err(Error::DimensionMismatch {
            expected: c_hat.len(),
            found: c.len(),
        });
    }
    let sum_residual = (c.iter().sum::<f64>() - s).abs();
    let nonneg_residual = c.iter().fold(0.0_f64, |acc, &v| acc.max(-v));
    let mut stationarity_residual = 0.0_f64;
    let mut dual_residual = 0.0_f64;
    for (&ci, &hi) in c.iter().zip(c_hat) {
        if ci > 0.0 {
            stationarity_residual = stationarity_residual.max((ci - hi - lambda).abs());
        } else {
            dual_residual = dual_residual.max(hi + lambda);
        }
    }
    let mut report = KktReport {
        sum_residual,
        nonneg_residual,
        stationarity_residual,
        dual_residual,
        passed: false,
    };
    report.passed = report.max_residual() <= KKT_TOLERANCE;
    Ok(report)
}

/// Aggregate series plus per-component predictions aligned to it.
#[derive(Debug, Clone, PartialEq)]
pub struct DisaggregationInstance {
    aggregate: Vec<f64>,
    names: Vec<String>,
    predictions: Vec<Vec<f64>>,
}

impl DisaggregationInstance {
    pub fn new(aggregate: Vec<f64>, names: Vec<String>, predictions: Vec<Vec<f64>>) -> Result<Self> {
        if predictions.is_empty() {
            return Err(invalid("at least one component is required"));
        }
        if names.len() != predictions.len() {
            return Err(Error::DimensionMismatch {
                expected: predictions.len(),
                found: names.len(),
            });
        }
        for p in &predictions {
            if p.len() != aggregate.len() {
                return Err(Error::LengthMismatch {
                    left: aggregate.len(),
                    right: p.len(),
                });
            }
            if let Some(k) = p.iter().position(|v| !v.is_finite()) {
                return Err(invalid(format!("non-finite prediction at step {k}")));
            }
        }
        if let Some(k) = aggregate.iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(invalid(format!(
                "aggregate must be finite and non-negative; step {k} is {}",
                aggregate[k]
            )));
        }
        Ok(Self {
            aggregate,
            names,
            predictions,
        })
    }

    /// Unnamed components `c0, c1, …`.
    pub fn unnamed(aggregate: Vec<f64>, predictions: Vec<Vec<f64>>) -> Result<Self> {
        let names = (0..predictions.len()).map(|i| format!("c{i}")).collect();
        Self::new(aggregate, names, predictions)
    }

    pub fn aggregate(&self) -> &[f64] {
        &self.aggregate
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn predictions(&self) -> &[Vec<f64>] {
        &self.predictions
    }

    pub fn len(&self) -> usize {
        self.aggregate.len()
    }

    pub fn is_empty(&self) -> bool {
        self.aggregate.is_empty()
    }

    fn step(&self, k: usize) -> Vec<f64> {
        self.predictions.iter().map(|p| p[k]).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DisaggregationResult {
    pub names: Vec<String>,
    /// `components[i][k]`: component `i` at step `k`.
    pub components: Vec<Vec<f64>>,
    pub objective: Vec<f64>,
    pub lambda: Vec<f64>,
    pub kkt: Vec<KktReport>,
}

impl DisaggregationResult {
    pub fn total_objective(&self) -> f64 {
        self.objective.iter().sum()
    }

    /// `step_index, <component columns>`.
    pub fn write_components_csv<W: Write>(&self, writer: W, offset: usize) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["step_index".to_owned()];
        header.extend(self.names.iter().cloned());
        w.write_record(&header)?;
        for k in 0..self.objective.len() {
            let mut rec = vec![(offset + k).to_string()];
            rec.extend(self.components.iter().map(|c| c[k].to_string()));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    /// `step_index, J, lambda, sum_residual, nonneg_residual,
    /// stationarity_residual, dual_residual, kkt_pass`.
    pub fn write_diagnostics_csv<W: Write>(&self, writer: W, offset: usize) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record([
            "step_index",
            "J",
            "lambda",
            "sum_residual",
            "nonneg_residual",
            "stationarity_residual",
            "dual_residual",
            "kkt_pass",
        ])?;
        for (k, r) in self.kkt.iter().enumerate() {
            w.write_record([
                (offset + k).to_string(),
                self.objective[k].to_string(),
                self.lambda[k].to_string(),
                r.sum_residual.to_string(),
                r.nonneg_residual.to_string(),
                r.stationarity_residual.to_string(),
                r.dual_residual.to_string(),
                r.passed.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Projects every step independently.
pub fn disaggregate(instance: &DisaggregationInstance) -> Result<DisaggregationResult> {
    disaggregate_with_workers(instance, 1)
}

pub fn disaggregate_with_workers(instance: &DisaggregationInstance, workers: usize) -> Result<DisaggregationResult> {
    let steps: Vec<(Vec<f64>, f64, f64, KktReport)> = run_with_workers(workers, || {
        (0..instance.len())
            .into_par_iter()
            .map(|k| {
                let c_hat = instance.step(k);
                let s = instance.aggregate[k];
                let (c, lambda) = project_step(&c_hat, s)?;
                let objective = c.iter().zip(&c_hat).map(|(a, b)| (a - b) * (a - b)).sum();
                let report = kkt_check(&c_hat, &c, lambda, s)?;
                Ok((c, lambda, objective, report))
            })
            .collect::<Result<_>>()
    })?;

    let n = instance.predictions.len();
    let mut components = vec![Vec::with_capacity(instance.len()); n];
    let mut objective = Vec::with_capacity(instance.len());
    let mut lambda = Vec::with_capacity(instance.len());
    let mut kkt = Vec::with_capacity(instance.len());
    for (c, l, j, r) in steps {
        for (col, v) in components.iter_mut().zip(c) {
            col.push(v);
        }
        lambda.push(l);
        objective.push(j);
        kkt.push(r);
    }
    Ok(DisaggregationResult {
        names: instance.names.clone(),
        components,
        objective,
        lambda,
        kkt,
    })
}
