//! Subcommand implementations.
//!
//! Every command prints its summary as `key=value` lines on stdout. The main
//! result (a delimited table, cascade, model or dataset) goes to `--out` when
//! given; otherwise tables are printed before the summary, separated by a
//! blank line.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use hawkes_core::experiment::{
    run_classification_experiment, run_regression_experiment, train_layer as train_predictive_layer,
    ClassificationMethod, Record, RegressionMethod,
};
use hawkes_core::features::{build_user_history, extract_features, FeatureSchema, FeatureVector, UserHistory};
use hawkes_core::fitting::{fit as fit_cascade, FitResult};
use hawkes_core::io::{load_cascade, write_simulated_cascade, DatasetIndex, Split};
use hawkes_core::likelihood::log_likelihood;
use hawkes_core::model::{branching_factor, Cascade};
use hawkes_core::prediction::{predict_raw, PredictiveLayer};
use hawkes_core::seed;
use hawkes_core::simulation::{simulate as simulate_cascade, SimConfig, DEFAULT_MAX_EVENTS};
use hawkes_core::synthetic::{generate_corpus, write_dataset};

use crate::settings::Settings;
use crate::{Common, Failure, EXIT_FIT};

type Summary = Vec<(String, String)>;

fn kv(key: &str, value: impl ToString) -> (String, String) {
    (key.to_string(), value.to_string())
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), Failure> {
    std::fs::write(path, bytes)
        .map_err(|e| Failure::config(format!("cannot write {}: {e}", path.display())))
}

/// Writes `body` to `out` (or stdout) and prints the summary.
fn emit(out: Option<&Path>, body: &str, mut summary: Summary) -> Result<(), Failure> {
    let mut stdout = String::new();
    match out {
        Some(path) => {
            write_file(path, body.as_bytes())?;
            summary.push(kv("out", path.display()));
        }
        None if !body.is_empty() => {
            stdout.push_str(body);
            stdout.push('\n');
        }
        None => {}
    }
    for (k, v) in &summary {
        let _ = writeln!(stdout, "{k}={v}");
    }
    print!("{stdout}");
    Ok(())
}

fn load(path: &Path, settings: &Settings) -> Result<(Cascade, usize), Failure> {
    let format = settings.format_for(path)?;
    let parsed = load_cascade(path, format)?;
    if parsed.clamped > 0 {
        eprintln!(
            "warning: {}: {} magnitudes below 1 clamped to 1",
            path.display(),
            parsed.clamped
        );
    }
    Ok((parsed.cascade, parsed.clamped))
}

/// The cascade observed up to `horizon`, or in full.
fn observe(cascade: Cascade, horizon: Option<f64>) -> Result<(Cascade, f64), Failure> {
    match horizon {
        Some(h) => Ok((cascade.prefix_until(h)?, h)),
        None => {
            let h = cascade.observed_until();
            Ok((cascade, h))
        }
    }
}

fn load_records(index_path: &Path, settings: &Settings) -> Result<Vec<Record>, Failure> {
    let mut index = DatasetIndex::load(index_path)?;
    if let Some(cutoff) = settings.get::<f64>("split_cutoff")? {
        index.split_by_date(cutoff).map_err(|e| Failure::config(e.to_string()))?;
    }
    let first = index
        .entries
        .first()
        .ok_or_else(|| Failure::config(format!("{}: dataset index is empty", index_path.display())))?;
    let format = settings.format_for(&index.resolve(first))?;
    Ok(Record::load_all(&index, format)?)
}

fn reason(e: &hawkes_core::Error) -> String {
    e.to_string().replace([',', '\n'], ";")
}

const FIT_HEADER: &str = "id,events,kappa,beta,c,theta,n_star,log_likelihood,converged,active_constraints,starts_tried,failure";

pub fn fit(inputs: &[PathBuf], common: &Common) -> Result<(), Failure> {
    let settings = Settings::new(common)?;
    let cfg = settings.experiment()?;
    let horizon = settings.horizon()?;
    let mut table = format!("{FIT_HEADER}\n");
    let (mut fitted, mut clamped) = (0, 0);
    for path in inputs {
        let (cascade, c) = load(path, &settings)?;
        clamped += c;
        let (cascade, h) = observe(cascade, horizon)?;
        let fit_config = cfg.fit.clone().with_horizon(h);
        match fit_cascade(&cascade, &fit_config, &cfg.dist) {
            Ok(f) => {
                fitted += 1;
                let constraints: Vec<String> = f.active_constraints.iter().map(ToString::to_string).collect();
                let p = f.params;
                let _ = writeln!(
                    table,
                    "{},{},{},{},{},{},{},{},{},{},{},",
                    cascade.id(),
                    cascade.len(),
                    p.kappa,
                    p.beta,
                    p.c,
                    p.theta,
                    f.n_star,
                    f.log_likelihood,
                    f.converged,
                    constraints.join(";"),
                    f.starts_tried
                );
            }
            Err(e) => {
                let _ = writeln!(table, "{},{},,,,,,,,,,{}", cascade.id(), cascade.len(), reason(&e));
            }
        }
    }
    let summary = vec![
        kv("cascades", inputs.len()),
        kv("fitted", fitted),
        kv("failed", inputs.len() - fitted),
        kv("clamped_magnitudes", clamped),
        kv("alpha", cfg.dist.alpha),
    ];
    emit(settings.out().as_deref(), &table, summary)?;
    if fitted == 0 {
        return Err(Failure::new(EXIT_FIT, "no cascade could be fitted"));
    }
    Ok(())
}

const PREDICT_HEADER: &str = "id,n_observed,horizon,a1,n_star,n_inf_raw,omega,n_inf_corrected,failure";

pub fn predict(inputs: &[PathBuf], layer: Option<&Path>, common: &Common) -> Result<(), Failure> {
    let settings = Settings::new(common)?;
    let cfg = settings.experiment()?;
    let horizon = settings.horizon()?;
    let fixed = settings.params()?;
    let layer = layer
        .map(|path| -> Result<PredictiveLayer, Failure> {
            let bytes = std::fs::read(path).map_err(|e| Failure::from(hawkes_core::Error::Io(e)))?;
            Ok(PredictiveLayer::load(&bytes)?)
        })
        .transpose()?;
    let mut table = format!("{PREDICT_HEADER}\n");
    let (mut predicted, mut fit_failures) = (0, 0);
    for path in inputs {
        let (cascade, _) = load(path, &settings)?;
        let (cascade, h) = observe(cascade, horizon)?;
        let fitted: Result<FitResult, hawkes_core::Error> = match fixed {
            Some(params) => branching_factor(&params, &cfg.dist).and_then(|n_star| {
                Ok(FitResult {
                    params,
                    log_likelihood: log_likelihood(&params, &cascade, h)?,
                    n_star,
                    converged: true,
                    active_constraints: Vec::new(),
                    starts_tried: 0,
                })
            }),
            None => fit_cascade(&cascade, &cfg.fit.clone().with_horizon(h), &cfg.dist),
        };
        let outcome = fitted
            .inspect_err(|_| fit_failures += 1)
            .and_then(|f| match &layer {
                Some(layer) => layer.predict(&f, &cascade, h),
                None => predict_raw(&f.params, &cascade, h, &cfg.dist),
            });
        match outcome {
            Ok(o) => {
                predicted += 1;
                let opt = |v: Option<f64>| v.map_or(String::new(), |v| v.to_string());
                let _ = writeln!(
                    table,
                    "{},{},{},{},{},{},{},{},",
                    cascade.id(),
                    o.n_observed,
                    h,
                    o.a1,
                    o.n_star,
                    o.n_inf_raw,
                    opt(o.omega),
                    opt(o.n_inf_corrected)
                );
            }
            Err(e) => {
                let _ = writeln!(table, "{},{},{},,,,,,{}", cascade.id(), cascade.len(), h, reason(&e));
            }
        }
    }
    let summary = vec![
        kv("cascades", inputs.len()),
        kv("predicted", predicted),
        kv("failed", inputs.len() - predicted),
        kv("layer", layer.is_some()),
    ];
    emit(settings.out().as_deref(), &table, summary)?;
    if fixed.is_none() && fit_failures == inputs.len() {
        return Err(Failure::new(EXIT_FIT, "no cascade could be fitted"));
    }
    Ok(())
}

pub fn simulate(corpus: Option<usize>, common: &Common) -> Result<(), Failure> {
    let settings = Settings::new(common)?;
    let corpus = match corpus {
        Some(n) => Some(n),
        None => settings.get("corpus_size")?,
    };
    if let Some(n) = corpus {
        let dir = settings
            .out()
            .ok_or_else(|| Failure::config("simulate --corpus needs an --out directory"))?;
        let config = settings.corpus(n)?;
        let history_fraction: f64 = settings.get_or("history_fraction", 0.2)?;
        if !(0.0..1.0).contains(&history_fraction) {
            return Err(Failure::config("history_fraction must lie in [0, 1)"));
        }
        let items = generate_corpus(&config).map_err(|e| Failure::config(e.to_string()))?;
        let index = write_dataset(&dir, &items, history_fraction)?;
        let events: usize = items.iter().map(|c| c.cascade.len()).sum();
        let history = index.entries.iter().filter(|e| e.split == Split::History).count();
        return emit(
            None,
            "",
            vec![
                kv("cascades", items.len()),
                kv("events", events),
                kv("history", history),
                kv("seed", config.seed),
                kv("index", dir.join("index.csv").display()),
            ],
        );
    }

    let params = settings
        .params()?
        .ok_or_else(|| Failure::config("simulate needs kappa, beta, c and theta"))?;
    let dist = settings.dist()?;
    let root = settings.seed()?;
    let mut config = SimConfig::new(
        params,
        dist,
        settings.get_or("seed_magnitude", 1000.0)?,
        seed::derive(root, "simulate", 0),
    )
    .with_max_events(settings.get_or("max_events", DEFAULT_MAX_EVENTS)?);
    if let Some(h) = settings.horizon()? {
        config = config.with_horizon(h);
    }
    let sim = simulate_cascade(&config).map_err(|e| Failure::config(e.to_string()))?;
    let generations = sim.generation.iter().max().map_or(0, |g| g + 1);
    let summary = vec![
        kv("events", sim.cascade.len()),
        kv("generations", generations),
        kv("truncated", sim.truncated),
        kv("n_star", branching_factor(&params, &dist)?),
        kv("seed", root),
    ];
    emit(settings.out().as_deref(), &write_simulated_cascade(&sim), summary)
}

pub fn features(
    inputs: &[PathBuf],
    history: Option<&Path>,
    schema: Option<&str>,
    common: &Common,
) -> Result<(), Failure> {
    let settings = Settings::new(common)?;
    let schema = match schema.unwrap_or("regression") {
        "regression" => FeatureSchema::Regression,
        "classification" => FeatureSchema::Classification,
        other => return Err(Failure::config(format!("unknown schema {other:?} (regression|classification)"))),
    };
    let index = history.map(DatasetIndex::load).transpose()?;
    let history = match &index {
        Some(index) => build_user_history(
            index
                .entries
                .iter()
                .filter(|e| e.split == Split::History && !e.initiator.is_empty())
                .map(|e| (e.initiator.as_str(), e.final_size as f64)),
        ),
        None => UserHistory::new(),
    };
    let start_of = |id: &str| -> Option<f64> {
        index.as_ref()?.entries.iter().find(|e| e.id == id)?.start_time
    };
    let horizon = settings.horizon()?;
    let observed_count: usize = settings.get_or("observed_count", 25)?;
    let mut table = format!("id,{}\n", FeatureVector::header(schema));
    for path in inputs {
        let (mut cascade, _) = load(path, &settings)?;
        match start_of(cascade.id()) {
            Some(start) => cascade = cascade.with_start_time(start),
            None => eprintln!(
                "warning: {}: start time unknown, account ages are measured from time 0",
                path.display()
            ),
        }
        let prefix = match schema {
            FeatureSchema::Regression => observe(cascade, horizon)?.0,
            FeatureSchema::Classification => cascade.first_events(observed_count)?,
        };
        let v = extract_features(&prefix, &history, schema)?;
        let _ = writeln!(table, "{},{}", prefix.id(), v.to_csv_row());
    }
    let summary = vec![kv("cascades", inputs.len()), kv("features", schema.len())];
    emit(settings.out().as_deref(), &table, summary)
}

pub fn train_layer(index: &Path, common: &Common) -> Result<(), Failure> {
    let settings = Settings::new(common)?;
    let cfg = settings.experiment()?;
    let out = settings
        .out()
        .ok_or_else(|| Failure::config("train-layer needs --out for the model file"))?;
    let records = load_records(index, &settings)?;
    let (layer, n_train) = train_predictive_layer(&records, &cfg).map_err(|e| match e {
        hawkes_core::Error::InsufficientTraining { .. } => Failure::new(EXIT_FIT, e.to_string()),
        other => other.into(),
    })?;
    let bytes = layer.save();
    write_file(&out, &bytes)?;
    emit(
        None,
        "",
        vec![
            kv("horizon_seconds", cfg.horizon),
            kv("training_cascades", n_train),
            kv("trees", layer.model().trees().len()),
            kv("bytes", bytes.len()),
            kv("out", out.display()),
        ],
    )
}

pub fn evaluate_regression(index: &Path, common: &Common) -> Result<(), Failure> {
    let settings = Settings::new(common)?;
    let cfg = settings.experiment()?;
    let method = settings.method(RegressionMethod::Hawkes)?;
    let records = load_records(index, &settings)?;
    let report = run_regression_experiment(&records, method, &cfg)?;
    let mut summary = report.summary();
    summary.push(kv("seed", cfg.seed));
    emit(settings.out().as_deref(), &report.table(), summary)?;
    if report.aggregates().predicted == 0 {
        return Err(Failure::new(EXIT_FIT, "no test cascade could be predicted"));
    }
    Ok(())
}

pub fn evaluate_classification(index: &Path, observed_count: Option<usize>, common: &Common) -> Result<(), Failure> {
    let settings = Settings::new(common)?;
    let mut cfg = settings.experiment()?;
    if let Some(k) = observed_count {
        cfg.observed_count = k;
    }
    let method = settings.method(ClassificationMethod::HawkesC)?;
    let records = load_records(index, &settings)?;
    let report = run_classification_experiment(&records, method, &cfg)?;
    let mut summary = report.summary();
    summary.push(kv("seed", cfg.seed));
    emit(settings.out().as_deref(), &report.table(), summary)
}
