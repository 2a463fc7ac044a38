//! Evaluation protocols.
//!
//! Regression: observe every cascade up to a horizon, predict its final size
//! and score the test split by absolute relative error. Classification:
//! observe the first `k` events and predict whether the cascade reaches
//! `2k`, over repeated stratified splits.
//!
//! Per-cascade work (fitting, feature extraction) runs on a bounded rayon
//! pool; results are collected in input order so reports do not depend on
//! scheduling. All randomness derives from `ExperimentConfig::seed`.

use std::fmt::{self, Write as _};
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::features::{build_user_history, extract_features, FeatureSchema, FeatureVector, UserHistory};
use crate::fitting::{fit, FitConfig, FitResult};
use crate::forest::{ForestConfig, ForestModel};
use crate::io::{DatasetIndex, Format, Split};
use crate::model::{Cascade, InfluenceDistribution};
use crate::prediction::{
    build_hawkesc_features, build_layer_features, predict_raw, LayerFeatures, LayerSample, PercentileMap,
    PredictionOutcome, PredictiveLayer,
};
use crate::seed;

/// Absolute relative error `|predicted - actual| / actual`.
pub fn compute_are(predicted: f64, actual: f64) -> Result<f64> {
    if !(actual >= 1.0) {
        return Err(Error::Domain(format!("actual size {actual} must be at least 1")));
    }
    Ok((predicted - actual).abs() / actual)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RegressionMethod {
    Hawkes,
    FeatureDriven,
    Hybrid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClassificationMethod {
    HawkesC,
    FeatureDriven,
    Hybrid,
}

impl FromStr for RegressionMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hawkes" => Ok(RegressionMethod::Hawkes),
            "feature-driven" => Ok(RegressionMethod::FeatureDriven),
            "hybrid" => Ok(RegressionMethod::Hybrid),
            other => Err(Error::Config(format!(
                "unknown regression method {other:?} (hawkes|feature-driven|hybrid)"
            ))),
        }
    }
}

impl FromStr for ClassificationMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hawkesc" | "hawkes" => Ok(ClassificationMethod::HawkesC),
            "feature-driven" => Ok(ClassificationMethod::FeatureDriven),
            "hybrid" => Ok(ClassificationMethod::Hybrid),
            other => Err(Error::Config(format!(
                "unknown classification method {other:?} (hawkesc|feature-driven|hybrid)"
            ))),
        }
    }
}

impl fmt::Display for RegressionMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RegressionMethod::Hawkes => "hawkes",
            RegressionMethod::FeatureDriven => "feature-driven",
            RegressionMethod::Hybrid => "hybrid",
        })
    }
}

impl fmt::Display for ClassificationMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ClassificationMethod::HawkesC => "hawkesc",
            ClassificationMethod::FeatureDriven => "feature-driven",
            ClassificationMethod::Hybrid => "hybrid",
        })
    }
}

impl RegressionMethod {
    fn uses_hawkes(self) -> bool {
        self != RegressionMethod::FeatureDriven
    }

    fn uses_features(self) -> bool {
        self != RegressionMethod::Hawkes
    }
}

impl ClassificationMethod {
    fn uses_hawkes(self) -> bool {
        self != ClassificationMethod::FeatureDriven
    }

    fn uses_features(self) -> bool {
        self != ClassificationMethod::HawkesC
    }
}

/// One cascade of a dataset with its ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    pub cascade: Cascade,
    pub final_size: u64,
    pub initiator: String,
    pub split: Split,
}

impl Record {
    pub fn load_all(index: &DatasetIndex, format: Format) -> Result<Vec<Record>> {
        Ok(index
            .load_cascades(format)?
            .into_iter()
            .map(|(entry, parsed)| Record {
                cascade: parsed.cascade,
                final_size: entry.final_size,
                initiator: entry.initiator,
                split: entry.split,
            })
            .collect())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    /// Observation window for regression, seconds.
    pub horizon: f64,
    /// Events observed before classifying.
    pub observed_count: usize,
    pub dist: InfluenceDistribution,
    pub fit: FitConfig,
    pub regression_forest: ForestConfig,
    pub classification_forest: ForestConfig,
    /// Candidate `min_leaf` values for the regression forests, chosen by
    /// cross-validation on the training split.
    pub min_leaf_grid: Vec<usize>,
    pub cv_folds: usize,
    pub train_fraction: f64,
    /// Stratified splits for classification.
    pub repeats: usize,
    /// Worker threads for per-cascade work; 0 uses all cores.
    pub threads: usize,
    pub seed: u64,
}

impl ExperimentConfig {
    pub fn new(dist: InfluenceDistribution) -> Self {
        ExperimentConfig {
            horizon: 3600.0,
            observed_count: 25,
            dist,
            fit: FitConfig::new(&dist),
            regression_forest: ForestConfig::regression(),
            classification_forest: ForestConfig::classification(),
            min_leaf_grid: vec![1, 2, 5, 10, 20],
            cv_folds: 10,
            train_fraction: 0.4,
            repeats: 10,
            threads: 0,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.fit.validate()?;
        if !(self.horizon.is_finite() && self.horizon >= 0.0) {
            return Err(Error::Config(format!("horizon {} must be finite and >= 0", self.horizon)));
        }
        if self.observed_count < 2 {
            return Err(Error::Config("observed_count must be at least 2".into()));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::Config("train_fraction must lie in (0, 1)".into()));
        }
        if self.cv_folds == 1 || self.min_leaf_grid.contains(&0) {
            return Err(Error::Config("cv_folds must be 0 or >= 2 and min_leaf values positive".into()));
        }
        if self.repeats == 0 {
            return Err(Error::Config("repeats must be at least 1".into()));
        }
        Ok(())
    }

    fn pool(&self) -> Result<rayon::ThreadPool> {
        rayon::ThreadPoolBuilder::new()
            .num_threads(self.threads)
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))
    }
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig::new(InfluenceDistribution::default())
    }
}

/// Seeded shuffle of `0..n`; the first `fraction` of the result is training
/// data.
pub fn random_split(n: usize, fraction: f64, seed: u64, replicate: u64) -> (Vec<usize>, Vec<usize>) {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed::derive(seed, "split", replicate)));
    let n_train = (fraction * n as f64).round() as usize;
    let test = order.split_off(n_train.min(n));
    (order, test)
}

/// Random split within each label class.
pub fn stratified_split(labels: &[bool], fraction: f64, seed: u64, replicate: u64) -> (Vec<usize>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed::derive(seed, "stratified", replicate));
    let mut train = Vec::new();
    let mut test = Vec::new();
    for class in [false, true] {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        members.shuffle(&mut rng);
        let n_train = (fraction * members.len() as f64).round() as usize;
        test.extend(members.split_off(n_train));
        train.extend(members);
    }
    train.sort_unstable();
    test.sort_unstable();
    (train, test)
}

fn require_metadata(records: &[Record], needed: bool) -> Result<()> {
    match records.iter().find(|r| needed && !r.cascade.has_metadata()) {
        Some(r) => Err(Error::Config(format!(
            "cascade {} has no user metadata; feature methods need the extended format",
            r.cascade.id()
        ))),
        None => Ok(()),
    }
}

fn history_of(records: &[Record]) -> UserHistory {
    build_user_history(
        records
            .iter()
            .filter(|r| r.split == Split::History && !r.initiator.is_empty())
            .map(|r| (r.initiator.as_str(), r.final_size as f64)),
    )
}

/// Hawkes fit of an observed prefix together with its raw prediction.
#[derive(Debug, Clone, PartialEq)]
pub struct HawkesView {
    pub fit: FitResult,
    pub raw: PredictionOutcome,
}

/// Everything a method needs to know about one observed cascade.
#[derive(Debug, Clone, PartialEq)]
struct Observation {
    n_observed: usize,
    n_real: f64,
    hawkes: Option<std::result::Result<HawkesView, String>>,
    features: Option<std::result::Result<FeatureVector, String>>,
}

impl Observation {
    fn hawkes(&self) -> Option<&HawkesView> {
        self.hawkes.as_ref().and_then(|h| h.as_ref().ok())
    }

    fn features(&self) -> Option<&FeatureVector> {
        self.features.as_ref().and_then(|f| f.as_ref().ok())
    }

    /// First reason this observation cannot be used, if any.
    fn failure(&self) -> Option<&str> {
        let hawkes = self.hawkes.as_ref().and_then(|h| h.as_ref().err());
        let features = self.features.as_ref().and_then(|f| f.as_ref().err());
        hawkes.or(features).map(String::as_str)
    }
}

fn failure_reason(e: &Error) -> String {
    match e {
        Error::InsufficientEvents { .. } => "too_few_events".into(),
        Error::Supercritical { .. } => "supercritical".into(),
        Error::MissingMetadata { .. } => "missing_metadata".into(),
        Error::FitFailure { .. } => "fit_failed".into(),
        other => format!("error: {}", other.to_string().replace(',', ";")),
    }
}

fn hawkes_view(prefix: &Cascade, horizon: f64, config: &ExperimentConfig) -> std::result::Result<HawkesView, String> {
    let fit_config = config.fit.clone().with_horizon(horizon);
    let fitted = fit(prefix, &fit_config, &config.dist).map_err(|e| failure_reason(&e))?;
    let raw = predict_raw(&fitted.params, prefix, horizon, &config.dist).map_err(|e| failure_reason(&e))?;
    if !(raw.a1 > 0.0 && raw.n_inf_raw.is_finite()) {
        return Err("no_future_events".into());
    }
    Ok(HawkesView { fit: fitted, raw })
}

fn observe(
    prefix: &Cascade,
    horizon: f64,
    n_real: f64,
    hawkes: bool,
    schema: Option<FeatureSchema>,
    history: &UserHistory,
    config: &ExperimentConfig,
) -> Observation {
    Observation {
        n_observed: prefix.len(),
        n_real,
        hawkes: hawkes.then(|| hawkes_view(prefix, horizon, config)),
        features: schema.map(|s| extract_features(prefix, history, s).map_err(|e| failure_reason(&e))),
    }
}

/// One test-set row of a regression report.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub id: String,
    pub n_observed: usize,
    pub n_real: u64,
    pub n_inf_raw: Option<f64>,
    pub n_inf_pred: Option<f64>,
    pub are: Option<f64>,
    pub failure: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aggregates {
    pub test_cascades: usize,
    pub predicted: usize,
    pub failed: usize,
    pub mean_are: f64,
    pub std_are: f64,
    pub median_are: f64,
    /// Mean ARE of the closed-form prediction over the same predicted rows,
    /// when every one of them has it.
    pub raw_mean_are: Option<f64>,
}

fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Population standard deviation.
fn std_dev(xs: &[f64]) -> f64 {
    let m = mean(xs);
    (xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / xs.len() as f64).sqrt()
}

fn median(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    let mut s = xs.to_vec();
    s.sort_by(f64::total_cmp);
    let k = s.len();
    if k % 2 == 1 {
        s[k / 2]
    } else {
        0.5 * (s[k / 2 - 1] + s[k / 2])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport {
    pub method: RegressionMethod,
    pub horizon: f64,
    pub min_leaf: usize,
    pub rows: Vec<ReportRow>,
}

pub const REPORT_HEADER: &str = "id,n_observed,n_real,n_inf_raw,n_inf_pred,are,failure";

fn cell(v: Option<f64>) -> String {
    v.map_or(String::new(), |v| v.to_string())
}

impl ExperimentReport {
    pub fn aggregates(&self) -> Aggregates {
        let predicted: Vec<&ReportRow> = self.rows.iter().filter(|r| r.are.is_some()).collect();
        let ares: Vec<f64> = predicted.iter().filter_map(|r| r.are).collect();
        let raw: Option<Vec<f64>> = predicted
            .iter()
            .map(|r| r.n_inf_raw.map(|n| (n - r.n_real as f64).abs() / r.n_real as f64))
            .collect();
        Aggregates {
            test_cascades: self.rows.len(),
            predicted: predicted.len(),
            failed: self.rows.len() - predicted.len(),
            mean_are: mean(&ares),
            std_are: std_dev(&ares),
            median_are: median(&ares),
            raw_mean_are: raw.filter(|r| !r.is_empty()).map(|r| mean(&r)),
        }
    }

    pub fn table(&self) -> String {
        let mut out = format!("{REPORT_HEADER}\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                r.id,
                r.n_observed,
                r.n_real,
                cell(r.n_inf_raw),
                cell(r.n_inf_pred),
                cell(r.are),
                r.failure.as_deref().unwrap_or("")
            );
        }
        out
    }

    /// Stable `key=value` summary lines.
    pub fn summary(&self) -> Vec<(String, String)> {
        let a = self.aggregates();
        let mut out = vec![
            ("method".to_string(), self.method.to_string()),
            ("horizon_seconds".to_string(), self.horizon.to_string()),
            ("min_leaf".to_string(), self.min_leaf.to_string()),
            ("test_cascades".to_string(), a.test_cascades.to_string()),
            ("predicted".to_string(), a.predicted.to_string()),
            ("failed".to_string(), a.failed.to_string()),
            ("mean_are".to_string(), a.mean_are.to_string()),
            ("std_are".to_string(), a.std_are.to_string()),
            ("median_are".to_string(), a.median_are.to_string()),
        ];
        if let Some(raw) = a.raw_mean_are {
            out.push(("raw_mean_are".to_string(), raw.to_string()));
        }
        out
    }
}

/// Fitted per-cascade views for a regression experiment, reusable across
/// train/test splits.
#[derive(Debug, Clone)]
pub struct RegressionData {
    method: RegressionMethod,
    horizon: f64,
    ids: Vec<String>,
    finals: Vec<u64>,
    observations: Vec<Observation>,
}

impl RegressionData {
    /// Observes every record up to the configured horizon.
    pub fn prepare(records: &[Record], method: RegressionMethod, config: &ExperimentConfig) -> Result<Self> {
        config.validate()?;
        require_metadata(records, method.uses_features())?;
        let history = history_of(records);
        let horizon = config.horizon;
        let observations = config.pool()?.install(|| {
            records
                .par_iter()
                .map(|r| -> Result<Observation> {
                    if (r.final_size as usize) < r.cascade.count_until(horizon) {
                        return Err(Error::Domain(format!(
                            "{}: final size {} below the observed prefix",
                            r.cascade.id(),
                            r.final_size
                        )));
                    }
                    let prefix = r.cascade.prefix_until(horizon)?;
                    Ok(observe(
                        &prefix,
                        horizon,
                        r.final_size as f64,
                        method.uses_hawkes(),
                        method.uses_features().then_some(FeatureSchema::Regression),
                        &history,
                        config,
                    ))
                })
                .collect::<Result<Vec<_>>>()
        })?;
        Ok(RegressionData {
            method,
            horizon,
            ids: records.iter().map(|r| r.cascade.id().to_string()).collect(),
            finals: records.iter().map(|r| r.final_size).collect(),
            observations,
        })
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    /// Hawkes view of record `i`, when the fit succeeded.
    pub fn hawkes_view(&self, i: usize) -> Option<&HawkesView> {
        self.observations[i].hawkes()
    }

    fn usable(&self, i: usize) -> bool {
        self.observations[i].failure().is_none()
    }

    /// Predictive layer trained on the usable Hawkes fits among `train`.
    pub fn train_layer(&self, train: &[usize], forest: &ForestConfig) -> Result<PredictiveLayer> {
        let samples: Vec<LayerSample> = train
            .iter()
            .filter_map(|&i| {
                let o = &self.observations[i];
                let h = o.hawkes()?;
                Some(LayerSample {
                    fit: h.fit.clone(),
                    a1: h.raw.a1,
                    n_observed: o.n_observed,
                    n_real: o.n_real,
                })
            })
            .collect();
        PredictiveLayer::train(&samples, forest)
    }

    /// Trains on `train` (with `min_leaf` and forest seed `forest_seed`) and
    /// predicts the final sizes of the usable cascades in `eval`.
    fn fit_predict(&self, train: &[usize], eval: &[usize], forest: &ForestConfig) -> Result<Vec<f64>> {
        let train: Vec<usize> = train.iter().copied().filter(|&i| self.usable(i)).collect();
        let obs = &self.observations;
        match self.method {
            RegressionMethod::Hawkes => {
                let layer = self.train_layer(&train, forest)?;
                eval.iter()
                    .map(|&i| {
                        let h = obs[i].hawkes().expect("usable");
                        let features = build_layer_features(&h.fit, h.raw.a1, layer.percentiles());
                        let omega = layer.omega(&features)?;
                        Ok(h.raw.with_omega(omega).n_inf_corrected.expect("omega applied"))
                    })
                    .collect()
            }
            RegressionMethod::FeatureDriven | RegressionMethod::Hybrid => {
                if train.len() < 2 {
                    return Err(Error::InsufficientTraining {
                        usable: train.len(),
                        needed: 2,
                    });
                }
                let pmap = if self.method == RegressionMethod::Hybrid {
                    Some(PercentileMap::from_fits(train.iter().map(|&i| &obs[i].hawkes().expect("usable").fit))?)
                } else {
                    None
                };
                let row = |i: usize| -> Vec<f64> {
                    let mut x = Vec::new();
                    if let Some(pmap) = &pmap {
                        let h = obs[i].hawkes().expect("usable");
                        x.extend(build_layer_features(&h.fit, h.raw.a1, pmap).to_array());
                    }
                    x.extend_from_slice(obs[i].features().expect("usable").values());
                    x
                };
                let mut names = Vec::new();
                if pmap.is_some() {
                    names.extend(LayerFeatures::names());
                }
                names.extend(FeatureSchema::Regression.names());
                let x: Vec<Vec<f64>> = train.iter().map(|&i| row(i)).collect();
                let y: Vec<f64> = train.iter().map(|&i| obs[i].n_real.ln()).collect();
                let model = ForestModel::train_regressor(&x, &y, &names, forest)?;
                eval.iter()
                    .map(|&i| Ok(model.predict(&row(i))?.exp().max(obs[i].n_observed as f64)))
                    .collect()
            }
        }
    }

    fn mean_are(&self, eval: &[usize], predictions: &[f64]) -> f64 {
        let ares: Vec<f64> = eval
            .iter()
            .zip(predictions)
            .map(|(&i, &p)| (p - self.observations[i].n_real).abs() / self.observations[i].n_real)
            .collect();
        mean(&ares)
    }

    /// `min_leaf` with the lowest cross-validated mean ARE on `train`.
    fn select_min_leaf(&self, train: &[usize], config: &ExperimentConfig, replicate: u64) -> usize {
        let default = config.regression_forest.min_leaf;
        if config.cv_folds < 2 || config.min_leaf_grid.len() < 2 {
            return config.min_leaf_grid.first().copied().unwrap_or(default);
        }
        let mut usable: Vec<usize> = train.iter().copied().filter(|&i| self.usable(i)).collect();
        usable.shuffle(&mut ChaCha8Rng::seed_from_u64(seed::derive(config.seed, "cv", replicate)));
        let folds = config.cv_folds.min(usable.len());
        if folds < 2 {
            return default;
        }
        let mut best: Option<(f64, usize)> = None;
        for &min_leaf in &config.min_leaf_grid {
            let mut scores = Vec::with_capacity(folds);
            for k in 0..folds {
                let in_fold = |pos: &usize| pos % folds == k;
                let val: Vec<usize> = (0..usable.len()).filter(in_fold).map(|p| usable[p]).collect();
                let fit_on: Vec<usize> = (0..usable.len()).filter(|p| !in_fold(p)).map(|p| usable[p]).collect();
                let forest = ForestConfig {
                    min_leaf,
                    rng_seed: seed::derive(config.seed, "cv-forest", replicate * 1000 + k as u64),
                    ..config.regression_forest.clone()
                };
                match self.fit_predict(&fit_on, &val, &forest) {
                    Ok(p) => scores.push(self.mean_are(&val, &p)),
                    Err(_) => break,
                }
            }
            if scores.len() == folds {
                let score = mean(&scores);
                if best.is_none_or(|(b, _)| score < b) {
                    best = Some((score, min_leaf));
                }
            }
        }
        best.map_or(default, |(_, m)| m)
    }

    /// Trains on `train`, tuning `min_leaf` by cross-validation, and scores
    /// `test`.
    pub fn evaluate(
        &self,
        train: &[usize],
        test: &[usize],
        config: &ExperimentConfig,
        replicate: u64,
    ) -> Result<ExperimentReport> {
        if test.is_empty() {
            return Err(Error::EmptyInput);
        }
        let min_leaf = self.select_min_leaf(train, config, replicate);
        let forest = ForestConfig {
            min_leaf,
            rng_seed: seed::derive(config.seed, "forest", replicate),
            ..config.regression_forest.clone()
        };
        let predictable: Vec<usize> = test.iter().copied().filter(|&i| self.usable(i)).collect();
        let predictions = self.fit_predict(train, &predictable, &forest)?;
        let mut by_index = predictable.iter().zip(&predictions);
        let mut next = by_index.next();
        let rows = test
            .iter()
            .map(|&i| {
                let o = &self.observations[i];
                let raw = o.hawkes().map(|h| h.raw.n_inf_raw);
                let prediction = match next {
                    Some((&j, &p)) if j == i => {
                        next = by_index.next();
                        Some(p)
                    }
                    _ => None,
                };
                ReportRow {
                    id: self.ids[i].clone(),
                    n_observed: o.n_observed,
                    n_real: self.finals[i],
                    n_inf_raw: raw,
                    n_inf_pred: prediction,
                    are: prediction.map(|p| (p - o.n_real).abs() / o.n_real),
                    failure: o.failure().map(str::to_string),
                }
            })
            .collect();
        Ok(ExperimentReport {
            method: self.method,
            horizon: self.horizon,
            min_leaf,
            rows,
        })
    }
}

/// Regression experiment on a labelled or unlabelled dataset.
///
/// Records labelled `train`/`test` are used as such; when no record carries
/// either label, the non-history records are split at random with
/// `train_fraction` going to training. History records only feed the
/// past-user-success feature.
pub fn run_regression_experiment(
    records: &[Record],
    method: RegressionMethod,
    config: &ExperimentConfig,
) -> Result<ExperimentReport> {
    let data = RegressionData::prepare(records, method, config)?;
    let (train, test) = dataset_split(records, config);
    if train.is_empty() || test.is_empty() {
        return Err(Error::EmptyInput);
    }
    config.pool()?.install(|| data.evaluate(&train, &test, config, 0))
}

/// Train/test indices: explicit labels when any record has one, otherwise a
/// seeded random split of the non-history records.
pub fn dataset_split(records: &[Record], config: &ExperimentConfig) -> (Vec<usize>, Vec<usize>) {
    if records.iter().any(|r| matches!(r.split, Split::Train | Split::Test)) {
        let pick = |s: Split| -> Vec<usize> { (0..records.len()).filter(|&i| records[i].split == s).collect() };
        return (pick(Split::Train), pick(Split::Test));
    }
    let pool: Vec<usize> = (0..records.len()).filter(|&i| records[i].split != Split::History).collect();
    let (a, b) = random_split(pool.len(), config.train_fraction, config.seed, 0);
    let remap = |side: Vec<usize>| -> Vec<usize> {
        let mut v: Vec<usize> = side.into_iter().map(|k| pool[k]).collect();
        v.sort_unstable();
        v
    };
    (remap(a), remap(b))
}

/// Fits the training records at the configured horizon and trains the
/// predictive layer on them. Returns the layer and the number of training
/// cascades it saw.
pub fn train_layer(records: &[Record], config: &ExperimentConfig) -> Result<(PredictiveLayer, usize)> {
    let (train, _) = dataset_split(records, config);
    if train.is_empty() {
        return Err(Error::EmptyInput);
    }
    let subset: Vec<Record> = train.iter().map(|&i| records[i].clone()).collect();
    let data = RegressionData::prepare(&subset, RegressionMethod::Hawkes, config)?;
    let all: Vec<usize> = (0..subset.len()).collect();
    let min_leaf = data.select_min_leaf(&all, config, 0);
    let forest = ForestConfig {
        min_leaf,
        rng_seed: seed::derive(config.seed, "forest", 0),
        ..config.regression_forest.clone()
    };
    let layer = config.pool()?.install(|| data.train_layer(&all, &forest))?;
    Ok((layer, subset.len()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassificationReport {
    pub method: ClassificationMethod,
    pub observed_count: usize,
    /// Cascades with at least `observed_count` events.
    pub eligible: usize,
    /// Eligible cascades the method could not describe.
    pub failed: usize,
    pub positives: usize,
    pub accuracies: Vec<f64>,
    /// Accuracy of predicting the training split's majority class.
    pub baselines: Vec<f64>,
}

impl ClassificationReport {
    pub fn mean_accuracy(&self) -> f64 {
        mean(&self.accuracies)
    }

    pub fn mean_baseline(&self) -> f64 {
        mean(&self.baselines)
    }

    pub fn table(&self) -> String {
        let mut out = String::from("repeat,accuracy,baseline\n");
        for (r, (a, b)) in self.accuracies.iter().zip(&self.baselines).enumerate() {
            let _ = writeln!(out, "{r},{a},{b}");
        }
        out
    }

    pub fn summary(&self) -> Vec<(String, String)> {
        vec![
            ("method".into(), self.method.to_string()),
            ("observed_count".into(), self.observed_count.to_string()),
            ("eligible".into(), self.eligible.to_string()),
            ("failed".into(), self.failed.to_string()),
            ("positives".into(), self.positives.to_string()),
            ("repeats".into(), self.accuracies.len().to_string()),
            ("mean_accuracy".into(), self.mean_accuracy().to_string()),
            ("std_accuracy".into(), std_dev(&self.accuracies).to_string()),
            ("mean_baseline".into(), self.mean_baseline().to_string()),
            ("std_baseline".into(), std_dev(&self.baselines).to_string()),
        ]
    }
}

/// Will-double classification after the first `observed_count` events.
pub fn run_classification_experiment(
    records: &[Record],
    method: ClassificationMethod,
    config: &ExperimentConfig,
) -> Result<ClassificationReport> {
    config.validate()?;
    require_metadata(records, method.uses_features())?;
    let k = config.observed_count;
    let history = history_of(records);
    let eligible: Vec<&Record> = records
        .iter()
        .filter(|r| r.split != Split::History && r.final_size as usize >= k && r.cascade.len() >= k)
        .collect();
    if eligible.is_empty() {
        return Err(Error::EmptyInput);
    }
    let pool = config.pool()?;
    let observations: Vec<Observation> = pool.install(|| {
        eligible
            .par_iter()
            .map(|r| -> Result<Observation> {
                let prefix = r.cascade.first_events(k)?;
                let horizon = prefix.observed_until();
                Ok(observe(
                    &prefix,
                    horizon,
                    r.final_size as f64,
                    method.uses_hawkes(),
                    method.uses_features().then_some(FeatureSchema::Classification),
                    &history,
                    config,
                ))
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let usable: Vec<&Observation> = observations.iter().filter(|o| o.failure().is_none()).collect();
    let labels: Vec<bool> = usable.iter().map(|o| o.n_real >= 2.0 * k as f64).collect();
    let positives = labels.iter().filter(|&&l| l).count();
    if positives == 0 || positives == labels.len() {
        return Err(Error::DegenerateLabels);
    }

    let mut names = Vec::new();
    if method.uses_hawkes() {
        names.extend(LayerFeatures::names());
    }
    if method.uses_features() {
        names.extend(FeatureSchema::Classification.names());
    }

    let mut accuracies = Vec::with_capacity(config.repeats);
    let mut baselines = Vec::with_capacity(config.repeats);
    for r in 0..config.repeats as u64 {
        let (train, test) = stratified_split(&labels, config.train_fraction, config.seed, r);
        let train_positive = train.iter().filter(|&&i| labels[i]).count();
        if train_positive == 0 || train_positive == train.len() || test.is_empty() {
            return Err(Error::DegenerateLabels);
        }
        let pmap = if method.uses_hawkes() {
            Some(PercentileMap::from_fits(train.iter().map(|&i| &usable[i].hawkes().expect("usable").fit))?)
        } else {
            None
        };
        let row = |i: usize| -> Vec<f64> {
            let mut x = Vec::new();
            if let Some(pmap) = &pmap {
                let h = usable[i].hawkes().expect("usable");
                x.extend(build_hawkesc_features(&h.fit, h.raw.a1, pmap).to_array());
            }
            if let Some(f) = usable[i].features() {
                x.extend_from_slice(f.values());
            }
            x
        };
        let x: Vec<Vec<f64>> = train.iter().map(|&i| row(i)).collect();
        let y: Vec<usize> = train.iter().map(|&i| usize::from(labels[i])).collect();
        let forest = ForestConfig {
            rng_seed: seed::derive(config.seed, "classifier", r),
            ..config.classification_forest.clone()
        };
        let model = pool.install(|| ForestModel::train_classifier(&x, &y, 2, &names, &forest))?;
        let mut correct = 0;
        for &i in &test {
            correct += usize::from((model.predict_class(&row(i))? == 1) == labels[i]);
        }
        let majority = 2 * train_positive >= train.len();
        let baseline = test.iter().filter(|&&i| labels[i] == majority).count();
        accuracies.push(correct as f64 / test.len() as f64);
        baselines.push(baseline as f64 / test.len() as f64);
    }

    Ok(ClassificationReport {
        method,
        observed_count: k,
        eligible: eligible.len(),
        failed: eligible.len() - usable.len(),
        positives,
        accuracies,
        baselines,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn are_examples() {
        assert_eq!(compute_are(10.0, 10.0).unwrap(), 0.0);
        assert_eq!(compute_are(20.0, 10.0).unwrap(), 1.0);
        assert!(compute_are(1.0, 0.0).is_err());
    }

    #[test]
    fn splits_partition_and_stratify() {
        let (train, test) = random_split(10, 0.4, 3, 0);
        assert_eq!(train.len(), 4);
        let mut all: Vec<usize> = train.iter().chain(&test).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..10).collect::<Vec<_>>());
        assert_ne!(random_split(10, 0.4, 3, 1).0, train);

        let labels: Vec<bool> = (0..50).map(|i| i % 5 == 0).collect();
        let (train, test) = stratified_split(&labels, 0.4, 1, 0);
        assert_eq!(train.iter().filter(|&&i| labels[i]).count(), 4);
        assert_eq!(train.len() + test.len(), 50);
    }

    #[test]
    fn aggregates_from_rows() {
        let row = |are: Option<f64>, raw: Option<f64>| ReportRow {
            id: "x".into(),
            n_observed: 5,
            n_real: 10,
            n_inf_raw: raw,
            n_inf_pred: are.map(|a| 10.0 * (1.0 + a)),
            are,
            failure: are.is_none().then(|| "fit_failed".to_string()),
        };
        let report = ExperimentReport {
            method: RegressionMethod::Hawkes,
            horizon: 300.0,
            min_leaf: 5,
            rows: vec![row(Some(0.1), Some(12.0)), row(None, None), row(Some(0.3), Some(10.0))],
        };
        let a = report.aggregates();
        assert_eq!((a.test_cascades, a.predicted, a.failed), (3, 2, 1));
        assert!((a.mean_are - 0.2).abs() < 1e-15);
        assert!((a.std_are - 0.1).abs() < 1e-15);
        assert!((a.median_are - 0.2).abs() < 1e-15);
        assert!((a.raw_mean_are.unwrap() - 0.1).abs() < 1e-15);
        assert_eq!(report.table().lines().count(), 4);
        assert!(report.table().lines().nth(2).unwrap().ends_with(",,,,fit_failed"));
    }
}
