//! Acceptance suite: one line per criterion, non-zero exit if any fails.

mod common;

use std::collections::BTreeMap;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use stpn::dataio::{split, SynthKind, SynthSpec};
use stpn::disaggregation::{kkt_check, project_step};
use stpn::experiments::{
    exp_distance_decay, exp_lag_decay, run_household_disaggregation, DisaggConfig, DistanceDecayConfig,
    LagDecayConfig, Status,
};
use stpn::infotheory::{mutual_info_atomic, mutual_info_relational};
use stpn::markov::{embed_states, fit_atomic, fit_relational, SymbolSequence};
use stpn::partitioning::{fit_max_entropy, fit_mbd, fit_uniform, symbolize, TimeSeries};
use stpn::prediction::{predict_dist, predict_mc};

use common::{brute_force_mi, max_abs_diff, naive_pairs, pgd_projection};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn random_symbols(rng: &mut ChaCha8Rng, len: usize, h: usize) -> Vec<usize> {
    // sticky walk so that higher-order states are actually visited unevenly
    let mut s = rng.gen_range(0..h);
    (0..len)
        .map(|_| {
            if rng.gen::<f64>() < 0.4 {
                s = rng.gen_range(0..h);
            }
            s
        })
        .collect()
}

fn c1_row_stochasticity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let h = rng.gen_range(2..=8);
        let depth = rng.gen_range(1..=3);
        let smoothing = [0.0, 1e-3, 1.0][rng.gen_range(0..3)];
        let len = rng.gen_range(depth + 3..400);
        let a = SymbolSequence::new("a", random_symbols(&mut rng, len, h), h).unwrap();
        let b = SymbolSequence::new("b", random_symbols(&mut rng, len, h), h).unwrap();
        let states = embed_states(&a, depth).unwrap();
        let atomic = fit_atomic(&states, smoothing).unwrap();
        let rel = fit_relational(&states, &b, 1, smoothing).unwrap();
        for row in atomic.pi().iter_rows().chain(rel.pi_cross().iter_rows()) {
            worst = worst.max((row.iter().sum::<f64>() - 1.0).abs());
        }
    }
    outcome(worst <= 1e-12, format!("1000 fits, max |row sum - 1| = {worst:e} (tol 1e-12)"))
}

fn c2_mi_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst: f64 = 0.0;
    for case in 0..500 {
        let h = rng.gen_range(2..=4);
        let depth = rng.gen_range(1..=2);
        let lag = rng.gen_range(1..=3);
        let len = rng.gen_range(depth + lag + 2..=200);
        let xs = random_symbols(&mut rng, len, h);
        // half the cases couple y to x so MI spans small and large values
        let ys: Vec<usize> = if case % 2 == 0 {
            random_symbols(&mut rng, len, h)
        } else {
            (0..len)
                .map(|t| if t >= lag && rng.gen::<f64>() < 0.8 { xs[t - lag] } else { rng.gen_range(0..h) })
                .collect()
        };
        let x = SymbolSequence::new("x", xs.clone(), h).unwrap();
        let y = SymbolSequence::new("y", ys.clone(), h).unwrap();
        let states = embed_states(&x, depth).unwrap();
        let rel = fit_relational(&states, &y, lag, 0.0).unwrap();
        let mi = mutual_info_relational(&rel, rel.source_marginal()).unwrap();
        worst = worst.max((mi - brute_force_mi(&naive_pairs(&xs, &ys, h, h, depth, None, lag))).abs());
        let atomic = fit_atomic(&states, 0.0).unwrap();
        let oracle = brute_force_mi(&naive_pairs(&xs, &xs, h, h, depth, Some(depth), 1));
        worst = worst.max((mutual_info_atomic(&atomic) - oracle).abs());
    }
    outcome(worst <= 1e-12, format!("500 cases, max |MI - oracle| = {worst:e} bits (tol 1e-12)"))
}

fn c3_lag_decay() -> Outcome {
    let config = LagDecayConfig::default();
    let report = exp_lag_decay(&config).unwrap();
    let key_lags = [5usize, 20];
    let mut checked = 0;
    let mut pass = config.spec.length == 100_000 && report.passed();
    for a in &report.assertions {
        if key_lags.iter().any(|l| a.name.ends_with(&format!("MI(lag {l})"))) {
            checked += 1;
            pass &= a.status == Status::Pass;
        }
    }
    pass &= checked == config.spec.nodes * key_lags.len();
    let worst = report
        .assertions
        .iter()
        .map(|a| a.measured)
        .fold(f64::INFINITY, f64::min);
    outcome(
        pass,
        format!(
            "{} followers, {} samples, smallest MI margin over other lags {worst:.4} bits",
            config.spec.nodes, config.spec.length
        ),
    )
}

fn c4_distance_decay() -> Outcome {
    let config = DistanceDecayConfig::default();
    let report = exp_distance_decay(&config).unwrap();
    let levels = report.curves["mi_vs_distance"].len();
    let all_pass = report.assertions.len() == 2 && report.assertions.iter().all(|a| a.status == Status::Pass);
    let fmt = |name: &str| {
        report.curves[name]
            .iter()
            .map(|p| format!("{:.3}", p.1))
            .collect::<Vec<_>>()
            .join(" ")
    };
    outcome(
        all_pass && levels == 5,
        format!("{levels} levels, MI [{}], MSE [{}]", fmt("mi_vs_distance"), fmt("mse_vs_distance")),
    )
}

fn c5_projection() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (mut gap, mut kkt, mut feas) = (0.0f64, 0.0f64, 0.0f64);
    for _ in 0..10_000 {
        let n = rng.gen_range(2..=8);
        let c_hat: Vec<f64> = (0..n).map(|_| rng.gen_range(-3.0..5.0)).collect();
        let s = if rng.gen::<f64>() < 0.05 { 0.0 } else { rng.gen_range(0.0..10.0) };
        let (c, lambda) = project_step(&c_hat, s).unwrap();
        gap = gap.max(max_abs_diff(&c, &pgd_projection(&c_hat, s, 1e-10)));
        kkt = kkt.max(kkt_check(&c_hat, &c, lambda, s).unwrap().max_residual());
        feas = feas.max((c.iter().sum::<f64>() - s).abs());
        if c.iter().any(|&v| v < 0.0) {
            feas = f64::INFINITY;
        }
    }
    outcome(
        gap <= 1e-6 && kkt <= 1e-8 && feas <= 1e-9,
        format!("10000 instances, max |c - oracle| {gap:e}, KKT {kkt:e}, feasibility {feas:e}"),
    )
}

fn c6_disaggregation() -> Outcome {
    let run = run_household_disaggregation(&DisaggConfig::default()).unwrap();
    let (before, after) = run.squared_errors();
    let agg = run.instance.aggregate();
    let steps = agg.len();
    let mut worse_steps = 0;
    let mut feas: f64 = 0.0;
    for k in 0..steps {
        let b: f64 = before.iter().map(|e| e[k]).sum();
        let a: f64 = after.iter().map(|e| e[k]).sum();
        if a > b {
            worse_steps += 1;
        }
        let total: f64 = run.result.components.iter().map(|c| c[k]).sum();
        feas = feas.max((total - agg[k]).abs());
    }
    let nonneg = run.result.components.iter().flatten().all(|&v| v >= 0.0);
    let tb: f64 = before.iter().flatten().sum();
    let ta: f64 = after.iter().flatten().sum();
    outcome(
        worse_steps == 0 && feas <= 1e-9 && nonneg && ta <= tb,
        format!(
            "{steps} steps, steps with higher error {worse_steps}, total SE {tb:.2} -> {ta:.2}, max |sum C - S| {feas:e}"
        ),
    )
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let m = v.len() / 2;
    if v.len().is_multiple_of(2) {
        0.5 * (v[m - 1] + v[m])
    } else {
        v[m]
    }
}

fn c7_mc_agreement() -> Outcome {
    let data = SynthSpec {
        length: 20_000,
        ..SynthSpec::new(SynthKind::CoupledChains, 7)
    }
    .generate()
    .unwrap();
    let (train, test) = split(&data, 0.5).unwrap();
    let sym = |d: &stpn::dataio::Dataset, name: &str, scheme: &stpn::partitioning::PartitionScheme| {
        symbolize(d.column(name).unwrap(), scheme)
    };
    let src_scheme = fit_uniform(train.column("driver").unwrap(), 4).unwrap();
    let tgt_scheme = fit_uniform(train.column("f2").unwrap(), 4).unwrap();
    let states = embed_states(&sym(&train, "driver", &src_scheme), 1).unwrap();
    let model = fit_relational(&states, &sym(&train, "f2", &tgt_scheme), 1, 1e-3).unwrap();
    let test_symbols = sym(&test, "driver", &src_scheme);
    let probe = SymbolSequence::new("driver", test_symbols.symbols()[..200].to_vec(), 4).unwrap();
    let probe = embed_states(&probe, 1).unwrap();
    let exact = predict_dist(&probe, &model).unwrap();

    let mut medians = Vec::new();
    let mut worst_at_max = 0.0;
    for draws in [100, 1_000, 10_000, 100_000] {
        let mc = predict_mc(&probe, &model, draws, 42, 0).unwrap();
        let l1: Vec<f64> = mc
            .dists
            .iter()
            .zip(&exact.dists)
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum())
            .collect();
        if draws == 100_000 {
            worst_at_max = l1.iter().cloned().fold(0.0, f64::max);
        }
        medians.push(median(l1));
    }
    let decreasing = medians.windows(2).all(|w| w[1] < w[0]);
    outcome(
        worst_at_max <= 0.02 && decreasing,
        format!(
            "max per-step L1 at 1e5 draws {worst_at_max:.5}; median L1 {}",
            medians.iter().map(|m| format!("{m:.5}")).collect::<Vec<_>>().join(" > ")
        ),
    )
}

fn c8_max_entropy() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let values: Vec<f64> = (0..10_000).map(|i| i as f64 * 1e-3 + rng.gen::<f64>() * 1e-4).collect();
    let mut shuffled = values;
    for i in (1..shuffled.len()).rev() {
        shuffled.swap(i, rng.gen_range(0..=i));
    }
    let series = TimeSeries::new("x", shuffled, 1.0).unwrap();
    let scheme = fit_max_entropy(&series, 8).unwrap();
    let counts: Vec<u64> = scheme.bin_stats().iter().map(|b| b.count).collect();
    let direct = {
        let sym = symbolize(&series, &scheme);
        let mut c = vec![0u64; 8];
        for &s in sym.symbols() {
            c[s] += 1;
        }
        c
    };
    let pass = counts == direct && counts.iter().all(|&c| c.abs_diff(1250) <= 1);
    outcome(pass, format!("bin counts {counts:?}"))
}

fn c9_mbd() -> Outcome {
    let mut all_perm = true;
    let mut all_score = true;
    let mut gains = Vec::new();
    for rerun in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(900 + rerun);
        let n = rng.gen_range(300..900);
        let c1 = rng.gen_range(0.15..0.45);
        let c2 = rng.gen_range(0.55..0.9);
        let levels = [rng.gen_range(0.0..1.0), rng.gen_range(2.0..3.0), rng.gen_range(4.0..5.0)];
        let x: Vec<f64> = (0..n).map(|_| rng.gen::<f64>()).collect();
        let y: Vec<f64> = x
            .iter()
            .map(|&v| if v < c1 { levels[0] } else if v < c2 { levels[1] } else { levels[2] })
            .collect();
        let xs = TimeSeries::new("x", x, 1.0).unwrap();
        let ys = TimeSeries::new("y", y, 1.0).unwrap();
        let fit = fit_mbd(&xs, &ys, 3, 3).unwrap();
        let a = symbolize(&xs, &fit.input);
        let b = symbolize(&ys, &fit.output);
        let mut confusion = [[0usize; 3]; 3];
        for (&i, &o) in a.symbols().iter().zip(b.symbols()) {
            confusion[i][o] += 1;
        }
        let rows_ok = confusion.iter().all(|r| r.iter().filter(|&&c| c > 0).count() == 1);
        let cols_ok = (0..3).all(|j| confusion.iter().filter(|r| r[j] > 0).count() == 1);
        all_perm &= rows_ok && cols_ok;
        all_score &= fit.score >= fit.baseline_score;
        gains.push(fit.score - fit.baseline_score);
    }
    let min_gain = gains.iter().cloned().fold(f64::INFINITY, f64::min);
    outcome(
        all_perm && all_score,
        format!("20 reruns, permutation confusion {all_perm}, min score - baseline {min_gain:.4} bits"),
    )
}

fn run_cli(dir: &Path, args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_stpn"))
        .current_dir(dir)
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    if out.status.success() {
        Ok(())
    } else {
        Err(format!("{args:?}: {}", String::from_utf8_lossy(&out.stderr)))
    }
}

fn snapshot(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        out.insert(
            path.file_name().unwrap().to_string_lossy().into_owned(),
            std::fs::read(&path).unwrap(),
        );
    }
    out
}

fn c10_determinism() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let setup = [
        vec!["--seed", "7", "--output-dir", "in", "synth", "--kind", "household", "--out", "house.csv"],
        vec!["--seed", "7", "--output-dir", "in", "synth", "--kind", "coupled_chains", "--length", "20000", "--out", "chains.csv"],
        vec!["--output-dir", "in", "predict", "--input", "in/chains.csv", "--source", "driver", "--target", "f1"],
    ];
    for args in &setup {
        if let Err(e) = run_cli(d, args) {
            return outcome(false, format!("setup failed: {e}"));
        }
    }
    let commands: Vec<(&str, Vec<&str>)> = vec![
        ("synth household", vec!["synth", "--kind", "household"]),
        ("synth lattice", vec!["synth", "--kind", "spatial_lattice", "--length", "5000"]),
        ("partition", vec!["partition", "--input", "in/chains.csv"]),
        ("partition mbd", vec!["partition", "--input", "in/chains.csv", "--method", "mbd", "--target", "f1", "--alphabet", "4"]),
        ("mi", vec!["mi", "--input", "in/chains.csv", "--lags", "1,2,5,20"]),
        ("predict", vec!["predict", "--input", "in/chains.csv", "--source", "driver", "--target", "f2"]),
        ("predict mc", vec!["predict", "--input", "in/chains.csv", "--source", "driver", "--target", "f2", "--draws", "2000"]),
        ("predict saved", vec!["predict", "--input", "in/chains.csv", "--source", "driver", "--target", "f1", "--model-dir", "in", "--draws", "500"]),
        ("disagg", vec!["disagg", "--input", "in/house.csv", "--aggregate", "WBE", "--predict", "--truth", "HVAC,LIGHTS,APPL,MELS"]),
        ("disagg columns", vec!["disagg", "--input", "in/house.csv", "--aggregate", "WBE", "--predictions", "HVAC,APPL", "--truth", "LIGHTS,MELS"]),
        ("eval", vec!["eval", "--predicted", "in/prediction.csv", "--actual", "in/prediction.csv"]),
        ("experiments", vec!["experiments", "run"]),
    ];
    let mut mismatched = Vec::new();
    for (i, (name, args)) in commands.iter().enumerate() {
        let mut snaps = Vec::new();
        for (run, workers) in [(0, "1"), (1, "1"), (2, "4")] {
            let out = format!("o{i}_{run}");
            let mut full = vec!["--seed", "11", "--workers", workers, "--output-dir", out.as_str()];
            full.extend(args.iter().copied());
            if let Err(e) = run_cli(d, &full) {
                return outcome(false, format!("{name} failed: {e}"));
            }
            snaps.push(snapshot(&d.join(&out)));
        }
        if snaps[0].is_empty() || snaps[0] != snaps[1] || snaps[0] != snaps[2] {
            mismatched.push(*name);
        }
    }
    outcome(
        mismatched.is_empty(),
        format!(
            "{} invocations x (2 runs at 1 worker + 1 run at 4 workers); differing: {:?}",
            commands.len(),
            mismatched
        ),
    )
}

type Criterion = (&'static str, Option<Duration>, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 10] = [
        ("1 row-stochasticity", Some(Duration::from_secs(10)), c1_row_stochasticity),
        ("2 MI oracle equivalence", Some(Duration::from_secs(30)), c2_mi_oracle),
        ("3 lag decay", Some(Duration::from_secs(60)), c3_lag_decay),
        ("4 distance monotonicity", Some(Duration::from_secs(120)), c4_distance_decay),
        ("5 projection exactness", Some(Duration::from_secs(60)), c5_projection),
        ("6 disaggregation improvement", Some(Duration::from_secs(30)), c6_disaggregation),
        ("7 MC/exact agreement", Some(Duration::from_secs(60)), c7_mc_agreement),
        ("8 max-entropy occupancy", None, c8_max_entropy),
        ("9 MBD recovery", None, c9_mbd),
        ("10 CLI determinism", None, c10_determinism),
    ];
    let mut failures = 0;
    for (name, limit, run) in criteria {
        let started = Instant::now();
        let result = run();
        let elapsed = started.elapsed();
        let in_time = limit.is_none_or(|l| elapsed <= l);
        let pass = result.pass && in_time;
        if !pass {
            failures += 1;
        }
        let budget = limit.map_or(String::new(), |l| format!(" / {}s", l.as_secs()));
        println!(
            "[{}] criterion {name}: {} ({:.2}s{budget})",
            if pass { "PASS" } else { "FAIL" },
            result.detail,
            elapsed.as_secs_f64()
        );
    }
    println!("acceptance: {}/10 criteria passed", 10 - failures);
    if failures > 0 {
        std::process::exit(1);
    }
}
