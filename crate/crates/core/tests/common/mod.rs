//! Independent reference implementations used to check the library.
#![allow(dead_code)]

use std::collections::HashMap;

/// MI in bits straight from a joint histogram: Σ p(x,y)·log2(p(x,y)/(p(x)p(y))).
pub fn brute_force_mi(pairs: &[(usize, usize)]) -> f64 {
    let n = pairs.len() as f64;
    let mut joint: HashMap<(usize, usize), f64> = HashMap::new();
    let mut px: HashMap<usize, f64> = HashMap::new();
    let mut py: HashMap<usize, f64> = HashMap::new();
    for &(x, y) in pairs {
        *joint.entry((x, y)).or_default() += 1.0;
        *px.entry(x).or_default() += 1.0;
        *py.entry(y).or_default() += 1.0;
    }
    joint
        .iter()
        .map(|(&(x, y), &c)| {
            let pxy = c / n;
            pxy * (pxy / ((px[&x] / n) * (py[&y] / n))).log2()
        })
        .sum::<f64>()
        .max(0.0)
}

/// State at position `t` (needs `t + 1 >= depth`), built digit by digit.
pub fn naive_state(symbols: &[usize], h: usize, depth: usize, t: usize) -> usize {
    let mut state = 0;
    let mut place = 1;
    for d in 0..depth {
        state += symbols[t - d] * place;
        place *= h;
    }
    state
}

/// (source state at t, target code at t + lag) for every t where both exist.
/// `target_depth` of `None` uses target symbols.
pub fn naive_pairs(
    source: &[usize],
    target: &[usize],
    h_src: usize,
    h_tgt: usize,
    depth: usize,
    target_depth: Option<usize>,
    lag: usize,
) -> Vec<(usize, usize)> {
    let first_target = target_depth.map_or(0, |d| d - 1);
    let mut out = Vec::new();
    for t in 0..source.len() {
        if t + 1 < depth || t + lag >= target.len() || t + lag < first_target {
            continue;
        }
        let s = naive_state(source, h_src, depth, t);
        let y = match target_depth {
            Some(d) => naive_state(target, h_tgt, d, t + lag),
            None => target[t + lag],
        };
        out.push((s, y));
    }
    out
}

/// Dense count table by a double loop over all cells.
pub fn naive_counts(pairs: &[(usize, usize)], rows: usize, cols: usize) -> Vec<Vec<u64>> {
    let mut out = vec![vec![0u64; cols]; rows];
    for (r, row) in out.iter_mut().enumerate() {
        for (c, cell) in row.iter_mut().enumerate() {
            *cell = pairs.iter().filter(|&&p| p == (r, c)).count() as u64;
        }
    }
    out
}

/// Projection onto {x ≥ 0, Σx = s} by bisection on the shift λ.
pub fn bisection_projection(v: &[f64], s: f64) -> Vec<f64> {
    let g = |lambda: f64| v.iter().map(|&x| (x + lambda).max(0.0)).sum::<f64>() - s;
    let max = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = v.iter().cloned().fold(f64::INFINITY, f64::min);
    let (mut lo, mut hi) = (-max, s - min + 1.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo <= f64::EPSILON * (1.0 + hi.abs()) {
            break;
        }
    }
    let lambda = 0.5 * (lo + hi);
    v.iter().map(|&x| (x + lambda).max(0.0)).collect()
}

/// Projected gradient descent on ‖x − ĉ‖² over the scaled simplex, stopped
/// when an iterate moves less than `tol`.
pub fn pgd_projection(c_hat: &[f64], s: f64, tol: f64) -> Vec<f64> {
    let n = c_hat.len();
    let mut x = vec![s / n as f64; n];
    let step = 0.25;
    for _ in 0..10_000 {
        let moved: Vec<f64> = x
            .iter()
            .zip(c_hat)
            .map(|(&xi, &ci)| xi - step * 2.0 * (xi - ci))
            .collect();
        let next = bisection_projection(&moved, s);
        let delta = next
            .iter()
            .zip(&x)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        x = next;
        if delta < tol {
            break;
        }
    }
    x
}

/// Exhaustive search over active sets: the unique candidate satisfying the
/// optimality conditions.
pub fn active_set_projection(c_hat: &[f64], s: f64) -> Vec<f64> {
    let n = c_hat.len();
    let mut best: Option<(f64, Vec<f64>)> = None;
    for mask in 1u32..(1 << n) {
        let active: Vec<usize> = (0..n).filter(|i| mask & (1 << i) != 0).collect();
        let lambda = (s - active.iter().map(|&i| c_hat[i]).sum::<f64>()) / active.len() as f64;
        let ok = (0..n).all(|i| {
            if mask & (1 << i) != 0 {
                c_hat[i] + lambda >= -1e-12
            } else {
                c_hat[i] + lambda <= 1e-12
            }
        });
        if !ok {
            continue;
        }
        let x: Vec<f64> = (0..n)
            .map(|i| if mask & (1 << i) != 0 { (c_hat[i] + lambda).max(0.0) } else { 0.0 })
            .collect();
        let obj: f64 = x.iter().zip(c_hat).map(|(a, b)| (a - b) * (a - b)).sum();
        if best.as_ref().is_none_or(|(o, _)| obj < *o) {
            best = Some((obj, x));
        }
    }
    best.expect("some active set is optimal").1
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
