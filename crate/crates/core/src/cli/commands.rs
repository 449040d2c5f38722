use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use rayon::prelude::*;
use serde_json::json;

use super::config::FileConfig;
use super::{
    Cli, CliError, Command, DisaggArgs, EvalArgs, ExperimentsAction, MiArgs, ModelArgs, PartitionArgs, PredictArgs,
    SynthArgs,
};
use crate::dataio::{load_csv, split, CsvSchema, Dataset, SynthSpec};
use crate::disaggregation::{disaggregate_with_workers, DisaggregationInstance, DisaggregationResult};
use crate::error::{invalid, Error, Result};
use crate::experiments::run_experiments;
use crate::infotheory::{build_network, entropy, lag_sweep, pair_mutual_information, NetworkConfig};
use crate::markov::{RelationalModel, SymbolSequence};
use crate::parallel::run_with_workers;
use crate::partitioning::{fit_mbd, symbolize, PartitionMethod, PartitionScheme, TimeSeries};
use crate::pipeline::{fit_scheme, predict_stream, stpn_disaggregate, PredictConfig, ScoredPrediction, StreamPredictor};
use crate::prediction::{mse, PredictionResult};

const DEFAULT_LAGS: [usize; 6] = [1, 2, 3, 5, 10, 20];

struct Ctx {
    seed: u64,
    workers: usize,
    out: PathBuf,
    file: FileConfig,
}

/// Model parameters after applying flag > config file > default.
struct Resolved {
    alphabet: usize,
    depth: usize,
    smoothing: f64,
    method: PartitionMethod,
}

impl Ctx {
    fn resolve(&self, m: &ModelArgs) -> Resolved {
        Resolved {
            alphabet: m.alphabet.or(self.file.alphabet).unwrap_or(8),
            depth: m.depth.or(self.file.depth).unwrap_or(1),
            smoothing: m.smoothing.or(self.file.smoothing).unwrap_or(1e-3),
            method: m.method.or(self.file.method).unwrap_or(PartitionMethod::MaxEntropy),
        }
    }

    fn predict_config(&self, m: &ModelArgs, lag: Option<usize>, draws: Option<usize>) -> PredictConfig {
        let r = self.resolve(m);
        PredictConfig {
            alphabet: r.alphabet,
            depth: r.depth,
            lag: lag.or(self.file.lag).unwrap_or(1),
            smoothing: r.smoothing,
            method: r.method,
            draws: draws.or(self.file.draws),
            seed: self.seed,
            workers: self.workers,
        }
    }

    fn train_fraction(&self, flag: Option<f64>) -> f64 {
        flag.or(self.file.train_fraction).unwrap_or(0.5)
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn create(&self, name: &str) -> Result<BufWriter<File>> {
        Ok(BufWriter::new(File::create(self.path(name))?))
    }

    fn write(&self, name: &str, text: &str) -> Result<()> {
        let mut f = self.create(name)?;
        f.write_all(text.as_bytes())?;
        if !text.ends_with('\n') {
            f.write_all(b"\n")?;
        }
        f.flush()?;
        Ok(())
    }

    fn write_json(&self, name: &str, value: &serde_json::Value) -> Result<()> {
        self.write(name, &serde_json::to_string_pretty(value)?)
    }
}

pub(super) fn execute(cli: &Cli) -> std::result::Result<(), CliError> {
    let file = match &cli.global.config {
        Some(path) => FileConfig::load(path)?,
        None => FileConfig::default(),
    };
    let ctx = Ctx {
        seed: cli.global.seed.or(file.seed).unwrap_or(0),
        workers: cli.global.workers.or(file.workers).unwrap_or(1),
        out: cli
            .global
            .output_dir
            .clone()
            .or_else(|| file.output_dir.clone())
            .unwrap_or_else(|| PathBuf::from(".")),
        file,
    };
    std::fs::create_dir_all(&ctx.out).map_err(Error::from)?;
    match &cli.command {
        Command::Synth(a) => cmd_synth(&ctx, a)?,
        Command::Partition(a) => cmd_partition(&ctx, a)?,
        Command::Mi(a) => cmd_mi(&ctx, a)?,
        Command::Predict(a) => cmd_predict(&ctx, a)?,
        Command::Disagg(a) => cmd_disagg(&ctx, a)?,
        Command::Eval(a) => cmd_eval(&ctx, a)?,
        Command::Experiments {
            action: ExperimentsAction::Run { only },
        } => cmd_experiments(&ctx, only.as_deref())?,
    }
    Ok(())
}

/// Keeps column names usable as file-name fragments.
fn file_stem(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}

fn dedup(names: &[&str]) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for n in names {
        if !out.iter().any(|o| o == n) {
            out.push((*n).to_owned());
        }
    }
    out
}

fn cmd_synth(ctx: &Ctx, a: &SynthArgs) -> Result<()> {
    let mut spec = SynthSpec::new(a.kind, ctx.seed);
    macro_rules! set {
        ($($field:ident),*) => { $( if let Some(v) = a.$field { spec.$field = v; } )* };
    }
    set!(length, nodes, alphabet, stay_prob, delay, coupling, decay, spacing, jitter, sample_period, upsample_fold);
    let data = spec.generate()?;
    data.save_csv(&ctx.path(&a.out))?;
    println!("wrote {} ({} rows, {} columns)", a.out, data.len(), data.streams().len());
    Ok(())
}

fn cmd_partition(ctx: &Ctx, a: &PartitionArgs) -> std::result::Result<(), CliError> {
    let data = load_csv(&a.input, &CsvSchema::default())?;
    let r = ctx.resolve(&a.model);
    let mut schemes: Vec<(String, PartitionScheme)> = Vec::new();
    match r.method {
        PartitionMethod::Mbd => {
            let target = a
                .target
                .as_deref()
                .ok_or_else(|| CliError::Usage("the mbd method needs --target".into()))?;
            let output = data.column(target)?;
            let inputs: Vec<String> = match &a.columns {
                Some(c) => c.iter().filter(|n| *n != target).cloned().collect(),
                None => data.names().into_iter().filter(|n| *n != target).map(str::to_owned).collect(),
            };
            if inputs.is_empty() {
                return Err(invalid("mbd needs at least one input column besides the target").into());
            }
            let mut scores = Vec::new();
            let mut output_scheme = None;
            for name in &inputs {
                let fit = fit_mbd(data.column(name)?, output, r.alphabet, r.alphabet)?;
                scores.push(json!({
                    "column": name,
                    "score": fit.score,
                    "baseline_score": fit.baseline_score,
                }));
                schemes.push((name.clone(), fit.input));
                output_scheme = Some(fit.output);
            }
            if let Some(s) = output_scheme {
                schemes.push((target.to_owned(), s));
            }
            ctx.write_json("mbd_scores.json", &json!({ "target": target, "inputs": scores }))?;
        }
        method => {
            let names: Vec<String> = match &a.columns {
                Some(c) => c.clone(),
                None => data.names().into_iter().map(str::to_owned).collect(),
            };
            for name in names {
                let scheme = fit_scheme(data.column(&name)?, method, r.alphabet)?;
                schemes.push((name, scheme));
            }
        }
    }

    let mut symbols = Vec::new();
    for (name, scheme) in &schemes {
        ctx.write(&format!("scheme_{}.json", file_stem(name)), &scheme.to_json()?)?;
        symbols.push(symbolize(data.column(name)?, scheme));
    }
    let mut w = csv::Writer::from_writer(ctx.create("symbols.csv")?);
    w.write_record(schemes.iter().map(|(n, _)| n.as_str())).map_err(Error::from)?;
    for k in 0..data.len() {
        w.write_record(symbols.iter().map(|s| s.symbols()[k].to_string()))
            .map_err(Error::from)?;
    }
    w.flush().map_err(Error::from)?;
    println!("partitioned {} columns with {}", schemes.len(), r.method.as_str());
    Ok(())
}

fn load_columns(path: &std::path::Path, columns: &Option<Vec<String>>) -> Result<Dataset> {
    let schema = match columns {
        Some(c) => CsvSchema::columns(c.clone()),
        None => CsvSchema::default(),
    };
    load_csv(path, &schema)
}

fn cmd_mi(ctx: &Ctx, a: &MiArgs) -> Result<()> {
    let data = load_columns(&a.input, &a.columns)?;
    if data.streams().len() < 2 {
        return Err(invalid(format!(
            "pairwise MI needs at least 2 streams, got {}",
            data.streams().len()
        )));
    }
    let r = ctx.resolve(&a.model);
    let lags = a.lags.clone().or_else(|| ctx.file.lags.clone()).unwrap_or(DEFAULT_LAGS.to_vec());
    let syms: Vec<SymbolSequence> = data
        .streams()
        .iter()
        .map(|s| Ok(symbolize(s, &fit_scheme(s, r.method, r.alphabet)?)))
        .collect::<Result<_>>()?;

    let mut order: Vec<usize> = (0..syms.len()).collect();
    order.sort_by(|&x, &y| syms[x].stream_id().cmp(syms[y].stream_id()));
    let pairs: Vec<(usize, usize)> = order
        .iter()
        .flat_map(|&x| order.iter().filter(move |&&y| y != x).map(move |&y| (x, y)))
        .collect();
    let sweeps = run_with_workers(ctx.workers, || {
        pairs
            .par_iter()
            .map(|&(x, y)| lag_sweep(&syms[x], &syms[y], r.depth, &lags, r.smoothing))
            .collect::<Result<Vec<_>>>()
    })?;
    let mut w = csv::Writer::from_writer(ctx.create("mi_table.csv")?);
    w.write_record(["source", "target", "lag", "mi"])?;
    for (&(x, y), sweep) in pairs.iter().zip(&sweeps) {
        for p in sweep {
            w.write_record([
                syms[x].stream_id(),
                syms[y].stream_id(),
                &p.lag.to_string(),
                &p.mi.to_string(),
            ])?;
        }
    }
    w.flush()?;

    let network = build_network(
        &syms,
        &NetworkConfig {
            depth: r.depth,
            lag: a.lag.or(ctx.file.lag).unwrap_or(1),
            smoothing: r.smoothing,
            prune_threshold: a.prune_threshold.or(ctx.file.prune_threshold).unwrap_or(0.0),
            workers: ctx.workers,
        },
    )?;
    ctx.write("network.json", &network.to_json()?)?;
    ctx.write("network.dot", &network.to_dot())?;
    println!(
        "{} pairs x {} lags; network with {} edges",
        pairs.len(),
        lags.len(),
        network.rp.len()
    );
    Ok(())
}

/// Keeps the steps that fall inside the data and moves them to file clock.
fn scored_rows(result: &PredictionResult, series_len: usize, offset: usize) -> PredictionResult {
    let n = result.overlap(series_len);
    PredictionResult {
        start: result.start + offset,
        per_step_dist: result.per_step_dist[..n].to_vec(),
        symbolic_map: result.symbolic_map[..n].to_vec(),
        continuous: result.continuous[..n].to_vec(),
        bin_expectations: result.bin_expectations.clone(),
    }
}

fn read_json_file(dir: &std::path::Path, name: &str) -> Result<String> {
    Ok(std::fs::read_to_string(dir.join(name))?)
}

fn cmd_predict(ctx: &Ctx, a: &PredictArgs) -> Result<()> {
    let names = dedup(&[&a.source, &a.target]);
    let data = load_csv(&a.input, &CsvSchema::columns(names))?;
    let cfg = ctx.predict_config(&a.model, a.lag, a.draws);
    let (predictor, scored, offset, test_len) = match &a.model_dir {
        Some(dir) => {
            let predictor = StreamPredictor::from_parts(
                PartitionScheme::from_json(&read_json_file(dir, "source_scheme.json")?)?,
                PartitionScheme::from_json(&read_json_file(dir, "target_scheme.json")?)?,
                RelationalModel::from_json(&read_json_file(dir, "model.json")?)?,
            )?;
            let target = data.column(&a.target)?;
            let result = predictor.predict(data.column(&a.source)?, &cfg)?;
            let scored = ScoredPrediction::score(result, target, &predictor.target_scheme)?;
            (predictor, scored, 0, data.len())
        }
        None => {
            let (train, test) = split(&data, ctx.train_fraction(a.train_fraction))?;
            let (predictor, scored) = predict_stream(
                train.column(&a.source)?,
                train.column(&a.target)?,
                test.column(&a.source)?,
                test.column(&a.target)?,
                &cfg,
            )?;
            (predictor, scored, train.len(), test.len())
        }
    };
    ctx.write("source_scheme.json", &predictor.source_scheme.to_json()?)?;
    ctx.write("target_scheme.json", &predictor.target_scheme.to_json()?)?;
    ctx.write("model.json", &predictor.model.to_json()?)?;

    let rows = scored_rows(&scored.result, test_len, offset);
    rows.write_csv(ctx.create("prediction.csv")?, Some(data.column(&a.target)?.values()))?;
    let summary = json!({
        "source": a.source,
        "target": a.target,
        "method": predictor.source_scheme.method().as_str(),
        "alphabet": predictor.target_scheme.alphabet_size(),
        "depth": predictor.model.depth(),
        "lag": predictor.model.lag(),
        "draws": cfg.draws,
        "first_step": rows.start,
        "steps": rows.len(),
        "unscored_steps": scored.result.len() - rows.len(),
        "mse": scored.mse,
        "symbolic_accuracy": scored.accuracy,
        "train_mi": predictor.train_mi,
    });
    ctx.write_json("prediction_summary.json", &summary)?;
    println!("mse {} symbolic accuracy {}", scored.mse, scored.accuracy);
    Ok(())
}

fn cmd_disagg(ctx: &Ctx, a: &DisaggArgs) -> std::result::Result<(), CliError> {
    let (instance, result, truth, offset, mode) = if a.predict {
        let comps = a
            .truth
            .clone()
            .ok_or_else(|| CliError::Usage("--predict needs --truth naming the component columns".into()))?;
        let mut names: Vec<&str> = vec![&a.aggregate];
        names.extend(comps.iter().map(String::as_str));
        let data = load_csv(&a.input, &CsvSchema::columns(dedup(&names)))?;
        let (train, test) = split(&data, ctx.train_fraction(a.train_fraction))?;
        let pick = |d: &Dataset| -> Result<Vec<TimeSeries>> { comps.iter().map(|c| d.column(c).cloned()).collect() };
        let cfg = ctx.predict_config(&a.model, a.lag, a.draws);
        let run = stpn_disaggregate(
            train.column(&a.aggregate)?,
            &pick(&train)?,
            test.column(&a.aggregate)?,
            &pick(&test)?,
            &cfg,
        )?;
        (run.instance, run.result, Some(run.truth), train.len() + run.start, "predict")
    } else {
        let preds = a
            .predictions
            .clone()
            .ok_or_else(|| CliError::Usage("disagg needs --predictions or --predict".into()))?;
        if let Some(t) = &a.truth {
            if t.len() != preds.len() {
                return Err(CliError::Usage(format!(
                    "--truth lists {} columns but --predictions lists {}",
                    t.len(),
                    preds.len()
                )));
            }
        }
        let mut names: Vec<&str> = vec![&a.aggregate];
        names.extend(preds.iter().map(String::as_str));
        names.extend(a.truth.iter().flatten().map(String::as_str));
        let data = load_csv(&a.input, &CsvSchema::columns(dedup(&names)))?;
        let values = |c: &str| -> Result<Vec<f64>> { Ok(data.column(c)?.values().to_vec()) };
        let instance = DisaggregationInstance::new(
            values(&a.aggregate)?,
            preds.clone(),
            preds.iter().map(|c| values(c)).collect::<Result<_>>()?,
        )?;
        let result = disaggregate_with_workers(&instance, ctx.workers)?;
        let truth = a
            .truth
            .as_ref()
            .map(|t| t.iter().map(|c| values(c)).collect::<Result<Vec<_>>>())
            .transpose()?;
        (instance, result, truth, 0, "predictions")
    };

    result.write_components_csv(ctx.create("components.csv")?, offset)?;
    result.write_diagnostics_csv(ctx.create("diagnostics.csv")?, offset)?;
    ctx.write_json("disagg_summary.json", &disagg_summary(&instance, &result, truth.as_deref(), offset, mode))?;
    println!(
        "projected {} steps of {} components; total J {}",
        instance.len(),
        result.names.len(),
        result.total_objective()
    );
    Ok(())
}

fn disagg_summary(
    instance: &DisaggregationInstance,
    result: &DisaggregationResult,
    truth: Option<&[Vec<f64>]>,
    offset: usize,
    mode: &str,
) -> serde_json::Value {
    let aggregate = instance.aggregate();
    let feasibility = (0..instance.len())
        .map(|k| (result.components.iter().map(|c| c[k]).sum::<f64>() - aggregate[k]).abs())
        .fold(0.0, f64::max);
    let kkt = result.kkt.iter().map(|r| r.max_residual()).fold(0.0, f64::max);
    let mut summary = json!({
        "mode": mode,
        "first_step": offset,
        "steps": instance.len(),
        "total_objective": result.total_objective(),
        "max_feasibility_residual": feasibility,
        "max_kkt_residual": kkt,
        "kkt_passed": result.kkt.iter().all(|r| r.passed),
    });
    if let Some(truth) = truth {
        let mse_of = |a: &[f64], b: &[f64]| mse(a, b).unwrap_or(f64::NAN);
        let per: Vec<serde_json::Value> = result
            .names
            .iter()
            .enumerate()
            .map(|(i, name)| {
                json!({
                    "component": name,
                    "mse_before": mse_of(&instance.predictions()[i], &truth[i]),
                    "mse_after": mse_of(&result.components[i], &truth[i]),
                })
            })
            .collect();
        let total = |key: &str| per.iter().map(|p| p[key].as_f64().unwrap_or(f64::NAN)).sum::<f64>();
        summary["total_mse_before"] = json!(total("mse_before"));
        summary["total_mse_after"] = json!(total("mse_after"));
        summary["components"] = serde_json::Value::Array(per);
    }
    summary
}

fn cmd_eval(ctx: &Ctx, a: &EvalArgs) -> Result<()> {
    let predicted = load_csv(&a.predicted, &CsvSchema::columns([a.predicted_column.clone()]))?;
    let actual = load_csv(&a.actual, &CsvSchema::columns([a.actual_column.clone()]))?;
    let (p, t) = (predicted.column(&a.predicted_column)?, actual.column(&a.actual_column)?);
    if p.len() != t.len() {
        return Err(Error::LengthMismatch {
            left: p.len(),
            right: t.len(),
        });
    }
    let error = mse(p.values(), t.values())?;
    let alphabet = a.alphabet.or(ctx.file.alphabet).unwrap_or(8);
    let method = a.method.unwrap_or(PartitionMethod::Uniform);
    let symbolic = match fit_scheme(t, method, alphabet) {
        Ok(scheme) => {
            let ps = symbolize(p, &scheme);
            let ts = symbolize(t, &scheme);
            let h = scheme.alphabet_size();
            let mut confusion = vec![vec![0u64; h]; h];
            for (&x, &y) in ts.symbols().iter().zip(ps.symbols()) {
                confusion[x][y] += 1;
            }
            let hits: u64 = (0..h).map(|j| confusion[j][j]).sum();
            let marginal: Vec<f64> = confusion
                .iter()
                .map(|row| row.iter().sum::<u64>() as f64 / t.len() as f64)
                .collect();
            json!({
                "method": method.as_str(),
                "alphabet": h,
                "boundaries": scheme.boundaries(),
                "accuracy": hits as f64 / t.len() as f64,
                "confusion": confusion,
                "mutual_information": pair_mutual_information(ts.symbols(), ps.symbols(), h, h)?,
                "actual_entropy": entropy(&marginal)?,
            })
        }
        Err(Error::ConstantSeries | Error::InsufficientDistinct { .. } | Error::CollapsedBoundaries { .. }) => {
            serde_json::Value::Null
        }
        Err(e) => return Err(e),
    };
    let report = json!({
        "predicted_column": a.predicted_column,
        "actual_column": a.actual_column,
        "steps": t.len(),
        "mse": error,
        "symbolic": symbolic,
    });
    ctx.write_json("eval.json", &report)?;
    println!("mse {error}");
    Ok(())
}

fn cmd_experiments(ctx: &Ctx, only: Option<&str>) -> Result<()> {
    let reports = run_experiments(only)?;
    ctx.write_json("experiments.json", &serde_json::to_value(&reports)?)?;
    let text: String = reports.iter().map(|r| r.to_text()).collect();
    ctx.write("experiments.txt", &text)?;
    print!("{text}");
    let failed: Vec<&str> = reports.iter().filter(|r| !r.passed()).map(|r| r.id.as_str()).collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(invalid(format!("experiments failed: {}", failed.join(", "))))
    }
}
