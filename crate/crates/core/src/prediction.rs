//! Expected final cascade size and its learned correction.
//!
//! Having observed `n` events up to `T`, the expected number of direct
//! children still to come is
//!
//! ```text
//! A1 = kappa * sum_i m_i^beta / (theta (T + c - t_i)^theta)
//! ```
//!
//! and every later generation is `n*` times the previous one, so the
//! expected final size is `N_inf = n + A1 / (1 - n*)`. The predictive layer
//! learns a per-cascade factor `omega` from `{c, theta, A1, n*}` (with
//! `theta` and `n*` as training-set percentiles) and predicts
//! `n + omega * A1 / (1 - n*)`.

use crate::error::{Error, Result};
use crate::fitting::FitResult;
use crate::forest::{ForestConfig, ForestModel, Reader};
use crate::model::{branching_factor, Cascade, HawkesParams, InfluenceDistribution};

pub const OMEGA_MIN: f64 = 1e-3;
pub const OMEGA_MAX: f64 = 1e3;
pub const MIN_TRAINING_CASCADES: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PredictionOutcome {
    pub n_observed: usize,
    pub a1: f64,
    pub n_star: f64,
    pub n_inf_raw: f64,
    pub omega: Option<f64>,
    pub n_inf_corrected: Option<f64>,
}

impl PredictionOutcome {
    /// Expected number of events after the horizon, `A1 / (1 - n*)`.
    pub fn expected_future(&self) -> f64 {
        self.a1 / (1.0 - self.n_star)
    }

    /// Applies a scaling factor to the expected future events.
    pub fn with_omega(mut self, omega: f64) -> Self {
        self.omega = Some(omega);
        self.n_inf_corrected = Some(self.n_observed as f64 + omega * self.expected_future());
        self
    }
}

/// Expected number of first-generation events after `horizon`.
pub fn expected_first_generation(params: &HawkesParams, cascade: &Cascade, horizon: f64) -> Result<f64> {
    params.validate()?;
    if let Some(late) = cascade.events().iter().find(|e| e.time > horizon) {
        return Err(Error::Domain(format!(
            "event at {} lies beyond the horizon {horizon}",
            late.time
        )));
    }
    Ok(cascade
        .events()
        .iter()
        .map(|e| params.tail_mass(e.magnitude, horizon - e.time))
        .sum())
}

/// Closed-form expected final size `n + A1 / (1 - n*)`.
pub fn predict_raw(
    params: &HawkesParams,
    cascade: &Cascade,
    horizon: f64,
    dist: &InfluenceDistribution,
) -> Result<PredictionOutcome> {
    let n_star = branching_factor(params, dist)?;
    outcome(params, cascade, horizon, n_star)
}

fn outcome(params: &HawkesParams, cascade: &Cascade, horizon: f64, n_star: f64) -> Result<PredictionOutcome> {
    if !(n_star < 1.0) {
        return Err(Error::Supercritical { n_star });
    }
    let a1 = expected_first_generation(params, cascade, horizon)?;
    let n_observed = cascade.len();
    Ok(PredictionOutcome {
        n_observed,
        a1,
        n_star,
        n_inf_raw: n_observed as f64 + a1 / (1.0 - n_star),
        omega: None,
        n_inf_corrected: None,
    })
}

/// Regression target for the layer: the `omega` that makes the corrected
/// prediction hit `n_real`, clamped to `[OMEGA_MIN, OMEGA_MAX]`.
pub fn omega_target(n_real: f64, n_observed: usize, a1: f64, n_star: f64) -> Result<f64> {
    if !(a1 > 0.0) {
        return Err(Error::Domain("omega target undefined for A1 = 0".into()));
    }
    if !(n_star < 1.0) {
        return Err(Error::Supercritical { n_star });
    }
    let omega = (n_real - n_observed as f64) * (1.0 - n_star) / a1;
    Ok(omega.clamp(OMEGA_MIN, OMEGA_MAX))
}

/// Linear interpolation on the empirical CDF of a training sample.
fn percentile_rank(sorted: &[f64], x: f64) -> f64 {
    let k = sorted.len();
    if k == 0 || x <= sorted[0] {
        return 0.0;
    }
    if x >= sorted[k - 1] {
        return 1.0;
    }
    // Last index with sorted[i] <= x; x < max guarantees i + 1 < k.
    let i = sorted.partition_point(|&v| v <= x) - 1;
    let (lo, hi) = (sorted[i], sorted[i + 1]);
    (i as f64 + (x - lo) / (hi - lo)) / (k - 1) as f64
}

/// Training-set distributions of `theta` and `n*`.
#[derive(Debug, Clone, PartialEq)]
pub struct PercentileMap {
    theta: Vec<f64>,
    n_star: Vec<f64>,
}

impl PercentileMap {
    pub fn new(mut theta: Vec<f64>, mut n_star: Vec<f64>) -> Result<Self> {
        if theta.is_empty() || n_star.is_empty() {
            return Err(Error::EmptyInput);
        }
        if theta.iter().chain(&n_star).any(|v| !v.is_finite()) {
            return Err(Error::Domain("percentile sample contains non-finite values".into()));
        }
        theta.sort_by(f64::total_cmp);
        n_star.sort_by(f64::total_cmp);
        Ok(PercentileMap { theta, n_star })
    }

    pub fn from_fits<'a>(fits: impl IntoIterator<Item = &'a FitResult>) -> Result<Self> {
        let (theta, n_star) = fits.into_iter().map(|f| (f.params.theta, f.n_star)).unzip();
        PercentileMap::new(theta, n_star)
    }

    pub fn theta_rank(&self, theta: f64) -> f64 {
        percentile_rank(&self.theta, theta)
    }

    pub fn n_star_rank(&self, n_star: f64) -> f64 {
        percentile_rank(&self.n_star, n_star)
    }
}

/// The four inputs of the predictive layer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LayerFeatures {
    pub c: f64,
    pub theta_pct: f64,
    pub a1: f64,
    pub n_star_pct: f64,
}

impl LayerFeatures {
    pub const NAMES: [&'static str; 4] = ["c", "theta_pct", "a1", "n_star_pct"];

    pub fn to_array(&self) -> [f64; 4] {
        [self.c, self.theta_pct, self.a1, self.n_star_pct]
    }

    pub fn names() -> Vec<String> {
        Self::NAMES.iter().map(|s| s.to_string()).collect()
    }
}

/// `kappa` and `beta` are deliberately left out: `A1` already carries `kappa`.
pub fn build_layer_features(fit: &FitResult, a1: f64, pmap: &PercentileMap) -> LayerFeatures {
    LayerFeatures {
        c: fit.params.c,
        theta_pct: pmap.theta_rank(fit.params.theta),
        a1,
        n_star_pct: pmap.n_star_rank(fit.n_star),
    }
}

/// Features for the will-double classifier; the same four as the layer.
pub fn build_hawkesc_features(fit: &FitResult, a1: f64, pmap: &PercentileMap) -> LayerFeatures {
    build_layer_features(fit, a1, pmap)
}

/// One training cascade for the layer.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerSample {
    pub fit: FitResult,
    pub a1: f64,
    pub n_observed: usize,
    pub n_real: f64,
}

impl LayerSample {
    fn usable(&self) -> bool {
        self.a1 > 0.0 && self.fit.n_star < 1.0
    }
}

/// Percentile map plus a forest regressing `ln omega`.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictiveLayer {
    pmap: PercentileMap,
    model: ForestModel,
}

const LAYER_MAGIC: &[u8; 4] = b"HWKL";
const LAYER_VERSION: u32 = 1;

impl PredictiveLayer {
    pub fn train(samples: &[LayerSample], config: &ForestConfig) -> Result<Self> {
        let usable: Vec<&LayerSample> = samples.iter().filter(|s| s.usable()).collect();
        if usable.len() < MIN_TRAINING_CASCADES {
            return Err(Error::InsufficientTraining {
                usable: usable.len(),
                needed: MIN_TRAINING_CASCADES,
            });
        }
        let pmap = PercentileMap::from_fits(usable.iter().map(|s| &s.fit))?;
        let mut x = Vec::with_capacity(usable.len());
        let mut y = Vec::with_capacity(usable.len());
        for s in &usable {
            x.push(build_layer_features(&s.fit, s.a1, &pmap).to_array().to_vec());
            y.push(omega_target(s.n_real, s.n_observed, s.a1, s.fit.n_star)?.ln());
        }
        let model = ForestModel::train_regressor(&x, &y, &LayerFeatures::names(), config)?;
        Ok(PredictiveLayer { pmap, model })
    }

    pub fn percentiles(&self) -> &PercentileMap {
        &self.pmap
    }

    pub fn model(&self) -> &ForestModel {
        &self.model
    }

    pub fn omega(&self, features: &LayerFeatures) -> Result<f64> {
        let log_omega = self.model.predict(&features.to_array())?;
        Ok(log_omega.exp().clamp(OMEGA_MIN, OMEGA_MAX))
    }

    /// Corrected prediction for a fitted cascade observed until `horizon`.
    pub fn predict(&self, fit: &FitResult, cascade: &Cascade, horizon: f64) -> Result<PredictionOutcome> {
        let raw = outcome(&fit.params, cascade, horizon, fit.n_star)?;
        let features = build_layer_features(fit, raw.a1, &self.pmap);
        Ok(raw.with_omega(self.omega(&features)?))
    }

    /// Layout: `"HWKL"`, u32 version, u32 count + f64 sorted theta values,
    /// u32 count + f64 sorted n* values, then the forest in its own format.
    pub fn save(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(LAYER_MAGIC);
        out.extend_from_slice(&LAYER_VERSION.to_le_bytes());
        for values in [&self.pmap.theta, &self.pmap.n_star] {
            out.extend_from_slice(&(values.len() as u32).to_le_bytes());
            for v in values.iter() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        self.model.write(&mut out);
        out
    }

    pub fn load(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes);
        if r.take(4)? != LAYER_MAGIC {
            return Err(Error::CorruptPayload("bad layer magic".into()));
        }
        let version = r.u32()?;
        if version != LAYER_VERSION {
            return Err(Error::VersionMismatch {
                found: version,
                expected: LAYER_VERSION,
            });
        }
        let read_values = |r: &mut Reader<'_>| -> Result<Vec<f64>> {
            let n = r.u32()? as usize;
            let values = (0..n).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
            if values.windows(2).any(|w| !(w[0] <= w[1])) {
                return Err(Error::CorruptPayload("percentile values are not sorted".into()));
            }
            Ok(values)
        };
        let theta = read_values(&mut r)?;
        let n_star = read_values(&mut r)?;
        let pmap = PercentileMap::new(theta, n_star).map_err(|e| Error::CorruptPayload(e.to_string()))?;
        let model = ForestModel::read(&mut r)?;
        if !r.finished() || model.feature_names().len() != 4 {
            return Err(Error::CorruptPayload("unexpected layer payload".into()));
        }
        Ok(PredictiveLayer { pmap, model })
    }
}

/// Corrected prediction `n + omega * A1 / (1 - n*)` for a trained layer.
pub fn predict_corrected(
    layer: &PredictiveLayer,
    fit: &FitResult,
    cascade: &Cascade,
    horizon: f64,
) -> Result<PredictionOutcome> {
    layer.predict(fit, cascade, horizon)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Event;

    fn toy() -> Cascade {
        Cascade::new("toy", vec![Event::new(0.0, 4.0), Event::new(1.0, 1.0)], 2.0).unwrap()
    }

    fn toy_params() -> HawkesParams {
        HawkesParams::new(0.5, 0.5, 1.0, 1.0)
    }

    #[test]
    fn first_generation_by_hand() {
        let a1 = expected_first_generation(&toy_params(), &toy(), 2.0).unwrap();
        assert!((a1 - 0.5 * (2.0 / 3.0 + 0.5)).abs() < 1e-15);
        let tiny = HawkesParams { kappa: 1e-300, ..toy_params() };
        assert!(expected_first_generation(&tiny, &toy(), 2.0).unwrap() < 1e-299);
        assert!(matches!(
            expected_first_generation(&toy_params(), &toy(), 0.5),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn raw_prediction_by_hand() {
        let dist = InfluenceDistribution::with_alpha(3.0).unwrap();
        let out = predict_raw(&toy_params(), &toy(), 2.0, &dist).unwrap();
        assert!((out.n_star - 2.0 / 3.0).abs() < 1e-15);
        assert!((out.n_inf_raw - (2.0 + 0.58333333333 / (1.0 / 3.0))).abs() < 1e-9);
        assert!((out.n_inf_raw - 3.75).abs() < 1e-9);
        assert_eq!(out.n_observed, 2);
    }

    #[test]
    fn supercritical_prediction_fails() {
        let dist = InfluenceDistribution::with_alpha(3.0).unwrap();
        let p = HawkesParams { kappa: 5.0, ..toy_params() };
        assert!(matches!(predict_raw(&p, &toy(), 2.0, &dist), Err(Error::Supercritical { .. })));
    }

    #[test]
    fn omega_targets() {
        let a1 = 0.5 * (2.0 / 3.0 + 0.5);
        let w = omega_target(10.0, 2, a1, 2.0 / 3.0).unwrap();
        assert!((w - 8.0 / 3.0 / a1).abs() < 1e-12);
        assert!((w - 4.571).abs() < 1e-3);
        assert_eq!(omega_target(2.0, 2, a1, 2.0 / 3.0).unwrap(), OMEGA_MIN);
        let n_inf = 2.0 + a1 / (1.0 / 3.0);
        assert!((omega_target(n_inf, 2, a1, 2.0 / 3.0).unwrap() - 1.0).abs() < 1e-12);
        assert!(omega_target(5.0, 2, 0.0, 0.5).is_err());
    }

    #[test]
    fn percentile_endpoints_and_clamping() {
        let pmap = PercentileMap::new(vec![0.5, 0.1, 0.9], vec![0.2, 0.4, 0.3]).unwrap();
        assert_eq!(pmap.theta_rank(0.1), 0.0);
        assert_eq!(pmap.theta_rank(0.5), 0.5);
        assert_eq!(pmap.theta_rank(0.9), 1.0);
        assert_eq!(pmap.theta_rank(5.0), 1.0);
        assert_eq!(pmap.n_star_rank(0.01), 0.0);
        assert!((pmap.theta_rank(0.3) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn omega_one_reduces_to_raw() {
        let dist = InfluenceDistribution::with_alpha(3.0).unwrap();
        let raw = predict_raw(&toy_params(), &toy(), 2.0, &dist).unwrap();
        assert_eq!(raw.with_omega(1.0).n_inf_corrected.unwrap(), raw.n_inf_raw);
        let floor = raw.with_omega(OMEGA_MIN).n_inf_corrected.unwrap();
        assert!((floor - 2.0).abs() < 0.01);
    }
}
