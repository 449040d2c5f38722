//! Seeded synthetic datasets with known coupling structure.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{upsample, Dataset, UpsampleMode};
use crate::error::{invalid, Result};
use crate::partitioning::TimeSeries;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SynthKind {
    CoupledChains,
    SpatialLattice,
    Household,
}

impl std::str::FromStr for SynthKind {
    type Err = crate::error::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "coupled_chains" => Ok(Self::CoupledChains),
            "spatial_lattice" => Ok(Self::SpatialLattice),
            "household" => Ok(Self::Household),
            other => Err(invalid(format!("unknown synthetic kind '{other}'"))),
        }
    }
}

/// Mean load scale (kW) of each household end use.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HouseholdShares {
    pub hvac: f64,
    pub lights: f64,
    pub appl: f64,
    pub mels: f64,
}

impl Default for HouseholdShares {
    fn default() -> Self {
        Self {
            hvac: 3.0,
            lights: 0.6,
            appl: 1.0,
            mels: 0.4,
        }
    }
}

/// Generator parameters. Which fields matter depends on `kind`.
///
/// Chains: a sticky driver Markov chain plus `nodes` followers. Follower `k`
/// sits at distance `spacing · k` and copies the driver `delay` steps late,
/// flipping each symbol to a different uniformly chosen one with probability
/// `chance · (1 − coupling · exp(−decay · distance))`, where
/// `chance = (alphabet − 1)/alphabet` is the flip rate of an independent stream.
///
/// Household: `length` base samples (hours) upsampled by `upsample_fold`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthSpec {
    pub kind: SynthKind,
    pub seed: u64,
    pub length: usize,
    pub nodes: usize,
    pub alphabet: usize,
    pub stay_prob: f64,
    pub delay: usize,
    pub coupling: f64,
    pub decay: f64,
    pub spacing: f64,
    /// Width of the uniform jitter around each bin centre, as a fraction of
    /// the bin width; must be < 1 so values stay inside their bin.
    pub jitter: f64,
    pub sample_period: f64,
    pub upsample_fold: usize,
    pub shares: HouseholdShares,
}

impl SynthSpec {
    pub fn new(kind: SynthKind, seed: u64) -> Self {
        let base = SynthSpec {
            kind,
            seed,
            length: 100_000,
            nodes: 3,
            alphabet: 4,
            stay_prob: 0.9,
            delay: 1,
            coupling: 1.0,
            decay: 0.35,
            spacing: 1.0,
            jitter: 0.8,
            sample_period: 1.0,
            upsample_fold: 30,
            shares: HouseholdShares::default(),
        };
        match kind {
            SynthKind::CoupledChains => base,
            SynthKind::SpatialLattice => SynthSpec { nodes: 5, ..base },
            SynthKind::Household => SynthSpec {
                length: 24 * 28,
                sample_period: 3600.0,
                ..base
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.length < 1 {
            return Err(invalid("length must be at least 1"));
        }
        if !(self.sample_period.is_finite() && self.sample_period > 0.0) {
            return Err(invalid("sample period must be positive"));
        }
        match self.kind {
            SynthKind::CoupledChains | SynthKind::SpatialLattice => {
                if self.alphabet < 2 {
                    return Err(invalid("alphabet must be at least 2"));
                }
                if !(0.0..=1.0).contains(&self.stay_prob) {
                    return Err(invalid("stay_prob must lie in [0, 1]"));
                }
                if !(0.0..=1.0).contains(&self.coupling) {
                    return Err(invalid("coupling must lie in [0, 1]"));
                }
                if !(self.decay.is_finite() && self.decay >= 0.0) {
                    return Err(invalid("decay must be finite and non-negative"));
                }
                if !(self.spacing.is_finite() && self.spacing > 0.0) {
                    return Err(invalid("spacing must be positive"));
                }
                if !(0.0..1.0).contains(&self.jitter) {
                    return Err(invalid("jitter must lie in [0, 1)"));
                }
            }
            SynthKind::Household => {
                if self.upsample_fold < 1 {
                    return Err(invalid("upsample_fold must be at least 1"));
                }
                let s = &self.shares;
                if [s.hvac, s.lights, s.appl, s.mels]
                    .iter()
                    .any(|v| !(v.is_finite() && *v > 0.0))
                {
                    return Err(invalid("household shares must be positive"));
                }
            }
        }
        Ok(())
    }

    /// Flip probability of a follower at `distance`.
    pub fn noise_at(&self, distance: f64) -> f64 {
        let chance = (self.alphabet - 1) as f64 / self.alphabet as f64;
        chance * (1.0 - self.coupling * (-self.decay * distance).exp())
    }

    pub fn generate(&self) -> Result<Dataset> {
        match self.kind {
            SynthKind::CoupledChains => synth_coupled_chains(self),
            SynthKind::SpatialLattice => synth_spatial_lattice(self),
            SynthKind::Household => synth_household(self),
        }
    }
}

fn sticky_chain(rng: &mut ChaCha8Rng, len: usize, alphabet: usize, stay: f64) -> Vec<usize> {
    let mut out = Vec::with_capacity(len);
    let mut s = rng.gen_range(0..alphabet);
    for _ in 0..len {
        out.push(s);
        if rng.gen::<f64>() >= stay {
            s = other_symbol(rng, s, alphabet);
        }
    }
    out
}

fn other_symbol(rng: &mut ChaCha8Rng, s: usize, alphabet: usize) -> usize {
    let r = rng.gen_range(0..alphabet - 1);
    if r >= s {
        r + 1
    } else {
        r
    }
}

fn noisy_copy(rng: &mut ChaCha8Rng, driver: &[usize], delay: usize, noise: f64, alphabet: usize) -> Vec<usize> {
    (0..driver.len())
        .map(|t| {
            if t < delay {
                rng.gen_range(0..alphabet)
            } else {
                let s = driver[t - delay];
                if noise > 0.0 && rng.gen::<f64>() < noise {
                    other_symbol(rng, s, alphabet)
                } else {
                    s
                }
            }
        })
        .collect()
}

fn to_values(rng: &mut ChaCha8Rng, symbols: &[usize], jitter: f64) -> Vec<f64> {
    symbols
        .iter()
        .map(|&s| s as f64 + 0.5 + jitter * (rng.gen::<f64>() - 0.5))
        .collect()
}

struct Chains {
    driver: Vec<usize>,
    followers: Vec<(Vec<usize>, f64, f64)>,
}

fn chains(spec: &SynthSpec) -> Result<(Chains, ChaCha8Rng)> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let driver = sticky_chain(&mut rng, spec.length, spec.alphabet, spec.stay_prob);
    let followers = (1..=spec.nodes)
        .map(|k| {
            let distance = spec.spacing * k as f64;
            let noise = spec.noise_at(distance);
            let symbols = noisy_copy(&mut rng, &driver, spec.delay, noise, spec.alphabet);
            (symbols, distance, noise)
        })
        .collect();
    Ok((Chains { driver, followers }, rng))
}

fn chain_dataset(
    spec: &SynthSpec,
    names: &[String],
    extra: impl Fn(usize, f64) -> serde_json::Value,
) -> Result<Dataset> {
    let (chains, mut rng) = chains(spec)?;
    let mut streams = vec![TimeSeries::new(
        names[0].clone(),
        to_values(&mut rng, &chains.driver, spec.jitter),
        spec.sample_period,
    )?];
    let mut coupling = Vec::new();
    for (k, (symbols, distance, noise)) in chains.followers.iter().enumerate() {
        streams.push(TimeSeries::new(
            names[k + 1].clone(),
            to_values(&mut rng, symbols, spec.jitter),
            spec.sample_period,
        )?);
        let mut entry = json!({
            "stream": names[k + 1],
            "source": names[0],
            "distance": distance,
            "delay": spec.delay,
            "noise": noise,
        });
        if let (Some(obj), serde_json::Value::Object(more)) = (entry.as_object_mut(), extra(k + 1, *distance)) {
            obj.extend(more);
        }
        coupling.push(entry);
    }
    Ok(Dataset::new(streams)?
        .with_metadata("spec", serde_json::to_value(spec)?)
        .with_metadata("coupling", serde_json::Value::Array(coupling)))
}

/// Driver `driver` and followers `f1..fN` at distances `spacing·k`.
pub fn synth_coupled_chains(spec: &SynthSpec) -> Result<Dataset> {
    let mut names = vec!["driver".to_owned()];
    names.extend((1..=spec.nodes).map(|k| format!("f{k}")));
    chain_dataset(spec, &names, |_, _| json!({}))
}

/// Source node `n0` at the origin and nodes `n1..nN` along a line at
/// increasing distance; coordinates are recorded in the metadata.
pub fn synth_spatial_lattice(spec: &SynthSpec) -> Result<Dataset> {
    let mut names = vec!["n0".to_owned()];
    names.extend((1..=spec.nodes).map(|k| format!("n{k}")));
    chain_dataset(spec, &names, |_, d| json!({ "x": d, "y": 0.0 }))
        .map(|d| d.with_metadata("origin", json!({ "node": "n0", "x": 0.0, "y": 0.0 })))
}

/// Names of the household end uses in column order after `WBE`.
pub fn household_components() -> [&'static str; 4] {
    ["HVAC", "LIGHTS", "APPL", "MELS"]
}

/// Whole-building load `WBE` and its four end uses. `WBE` is the exact
/// floating-point sum of the components at every step.
pub fn synth_household(spec: &SynthSpec) -> Result<Dataset> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let sh = spec.shares;
    let n = spec.length;
    let tau = std::f64::consts::TAU;

    let mut hvac = Vec::with_capacity(n);
    let mut lights = Vec::with_capacity(n);
    let mut appl = Vec::with_capacity(n);
    let mut mels = Vec::with_capacity(n);
    let mut burst_left = 0usize;
    let mut burst_level = 0.0;
    for t in 0..n {
        let hour = (t % 24) as f64;
        // cooling load peaking mid-afternoon
        let cycle = 0.5 * (1.0 + (tau * (hour - 9.0) / 24.0).sin());
        hvac.push(2.0 * sh.hvac * cycle * (0.8 + 0.4 * rng.gen::<f64>()));

        let on = (6.0..8.0).contains(&hour) || (18.0..23.0).contains(&hour);
        lights.push(if on {
            sh.lights * 3.0 * (0.9 + 0.2 * rng.gen::<f64>())
        } else {
            sh.lights * 0.1 * (0.5 + rng.gen::<f64>())
        });

        if burst_left == 0 && rng.gen::<f64>() < 0.15 {
            burst_left = rng.gen_range(1..=3);
            burst_level = sh.appl * 4.0 * (0.5 + rng.gen::<f64>());
        }
        let standby = sh.appl * 0.1 * (0.5 + rng.gen::<f64>());
        if burst_left > 0 {
            appl.push(standby + burst_level);
            burst_left -= 1;
        } else {
            appl.push(standby);
        }

        mels.push(sh.mels * (1.0 + 0.2 * (rng.gen::<f64>() - 0.5)));
    }

    let period = spec.sample_period;
    let fold = spec.upsample_fold;
    let components = household_components()
        .into_iter()
        .zip([hvac, lights, appl, mels])
        .map(|(name, values)| {
            let base = TimeSeries::new(name, values, period)?.with_units("kW");
            upsample(&base, fold, UpsampleMode::Hold)
        })
        .collect::<Result<Vec<_>>>()?;
    let total: Vec<f64> = (0..components[0].len())
        .map(|k| components.iter().map(|c| c.values()[k]).sum())
        .collect();
    let wbe = TimeSeries::new("WBE", total, period / fold as f64)?.with_units("kW");

    let mut streams = vec![wbe];
    streams.extend(components);
    Ok(Dataset::new(streams)?
        .with_metadata("spec", serde_json::to_value(spec)?)
        .with_metadata("aggregate", json!("WBE"))
        .with_metadata("components", json!(household_components())))
}
