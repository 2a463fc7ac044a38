//! Feature catalogue for the feature-driven predictors.
//!
//! Every per-user quantity is summarised by a five-point summary
//! `(min, p25, median, p75, max)`. Each event contributes the snapshot of the
//! user who produced it, so a user retweeting twice is counted twice.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::model::{Cascade, UserMeta};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FivePoint {
    pub min: f64,
    pub p25: f64,
    pub median: f64,
    pub p75: f64,
    pub max: f64,
}

impl FivePoint {
    pub const SUFFIXES: [&'static str; 5] = ["min", "p25", "median", "p75", "max"];

    /// Value reported when there is nothing to summarise.
    pub const ZERO: FivePoint = FivePoint {
        min: 0.0,
        p25: 0.0,
        median: 0.0,
        p75: 0.0,
        max: 0.0,
    };

    pub fn to_array(&self) -> [f64; 5] {
        [self.min, self.p25, self.median, self.p75, self.max]
    }
}

/// Linear interpolation between closest ranks: the quantile at `p` sits at
/// position `p (n - 1)` of the sorted sample.
pub fn five_point(values: &[f64]) -> Result<FivePoint> {
    if values.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let q = |p: f64| {
        let h = p * (sorted.len() - 1) as f64;
        let lo = h.floor() as usize;
        let hi = h.ceil() as usize;
        sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
    };
    Ok(FivePoint {
        min: sorted[0],
        p25: q(0.25),
        median: q(0.5),
        p75: q(0.75),
        max: sorted[sorted.len() - 1],
    })
}

fn five_point_or_zero(values: &[f64]) -> FivePoint {
    five_point(values).unwrap_or(FivePoint::ZERO)
}

fn users(cascade: &Cascade) -> Result<Vec<&UserMeta>> {
    cascade
        .events()
        .iter()
        .enumerate()
        .map(|(index, e)| e.user.as_ref().ok_or(Error::MissingMetadata { index }))
        .collect()
}

/// Followers, friends, statuses and account age, summarised over the users
/// of the cascade: 20 values in that order.
///
/// Account age is measured in seconds before the cascade start; cascades
/// without an absolute start time are taken to start at 0.
pub fn basic_user_features(cascade: &Cascade) -> Result<Vec<f64>> {
    let users = users(cascade)?;
    let start = cascade.start_time().unwrap_or(0.0);
    let columns: [Vec<f64>; 4] = [
        users.iter().map(|u| u.followers as f64).collect(),
        users.iter().map(|u| u.friends as f64).collect(),
        users.iter().map(|u| u.statuses as f64).collect(),
        users.iter().map(|u| start - u.account_created).collect(),
    ];
    let mut out = Vec::with_capacity(20);
    for column in &columns {
        out.extend(five_point(column)?.to_array());
    }
    Ok(out)
}

/// First-half rate, second-half rate and the five-point summary of the
/// waiting times; with `for_classification` the exposure summary follows.
///
/// The `n - 1` waiting times are split by count: the first `(n - 1) / 2`
/// (rounded down) form the first half. An empty half reports 0. Exposure
/// summarises the followers of every user who posted strictly before the
/// last event, the initiator included.
pub fn temporal_features(cascade: &Cascade, for_classification: bool) -> Result<Vec<f64>> {
    let events = cascade.events();
    if events.len() < 2 {
        return Err(Error::InsufficientEvents {
            needed: 2,
            got: events.len(),
        });
    }
    let waits: Vec<f64> = events.windows(2).map(|w| w[1].time - w[0].time).collect();
    let (first, second) = waits.split_at(waits.len() / 2);
    let mean = |xs: &[f64]| {
        if xs.is_empty() {
            0.0
        } else {
            xs.iter().sum::<f64>() / xs.len() as f64
        }
    };
    let mut out = vec![mean(first), mean(second)];
    out.extend(five_point(&waits)?.to_array());
    if for_classification {
        let last = events[events.len() - 1].time;
        let users = users(cascade)?;
        let exposure: Vec<f64> = events
            .iter()
            .zip(users)
            .filter(|(e, _)| e.time < last)
            .map(|(_, u)| u.followers as f64)
            .collect();
        out.extend(five_point_or_zero(&exposure).to_array());
    }
    Ok(out)
}

pub fn volume(cascade: &Cascade) -> f64 {
    cascade.len() as f64
}

/// Final sizes of the cascades each user initiated in the past.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct UserHistory {
    sizes: HashMap<String, Vec<f64>>,
}

impl UserHistory {
    pub const ACTIVE_THRESHOLD: usize = 2;

    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(&mut self, initiator: impl Into<String>, final_size: f64) {
        self.sizes.entry(initiator.into()).or_default().push(final_size);
    }

    pub fn contains(&self, user: &str) -> bool {
        self.sizes.contains_key(user)
    }

    pub fn is_active(&self, user: &str) -> bool {
        self.sizes.get(user).is_some_and(|s| s.len() >= Self::ACTIVE_THRESHOLD)
    }

    /// Mean past cascade size for active users, 0 otherwise.
    pub fn success(&self, user: &str) -> f64 {
        match self.sizes.get(user) {
            Some(s) if s.len() >= Self::ACTIVE_THRESHOLD => s.iter().sum::<f64>() / s.len() as f64,
            _ => 0.0,
        }
    }
}

/// History from `(initiator, final_size)` records.
pub fn build_user_history<'a>(records: impl IntoIterator<Item = (&'a str, f64)>) -> UserHistory {
    let mut history = UserHistory::new();
    for (user, size) in records {
        history.record(user, size);
    }
    history
}

/// Five-point summary of past success over the users of the cascade.
pub fn past_user_success(cascade: &Cascade, history: &UserHistory) -> Result<Vec<f64>> {
    let values: Vec<f64> = users(cascade)?.iter().map(|u| history.success(&u.user_key)).collect();
    Ok(five_point(&values)?.to_array().to_vec())
}

/// Which feature set a vector follows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FeatureSchema {
    /// Basic user, temporal, volume and past success: 33 features.
    Regression,
    /// Basic user, temporal, exposure and past success: 37 features.
    Classification,
}

fn summary_names(prefix: &str) -> impl Iterator<Item = String> + '_ {
    FivePoint::SUFFIXES.iter().map(move |s| format!("{prefix}_{s}"))
}

impl FeatureSchema {
    pub fn names(self) -> Vec<String> {
        let mut names = Vec::new();
        for prefix in ["followers", "friends", "statuses", "account_age"] {
            names.extend(summary_names(prefix));
        }
        names.push("first_half_rate".into());
        names.push("second_half_rate".into());
        names.extend(summary_names("wait"));
        match self {
            FeatureSchema::Regression => names.push("volume".into()),
            FeatureSchema::Classification => names.extend(summary_names("exposure")),
        }
        names.extend(summary_names("past_success"));
        names
    }

    pub fn len(self) -> usize {
        match self {
            FeatureSchema::Regression => 33,
            FeatureSchema::Classification => 37,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    schema: FeatureSchema,
    values: Vec<f64>,
}

impl FeatureVector {
    pub fn new(schema: FeatureSchema, values: Vec<f64>) -> Result<Self> {
        if values.len() != schema.len() {
            return Err(Error::SchemaMismatch {
                expected: schema.len(),
                got: values.len(),
            });
        }
        Ok(FeatureVector { schema, values })
    }

    pub fn schema(&self) -> FeatureSchema {
        self.schema
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.schema.names().iter().position(|n| n == name).map(|i| self.values[i])
    }

    pub fn header(schema: FeatureSchema) -> String {
        schema.names().join(",")
    }

    /// Comma-separated values; the shortest representation that parses back
    /// to the same `f64`.
    pub fn to_csv_row(&self) -> String {
        let cells: Vec<String> = self.values.iter().map(|v| v.to_string()).collect();
        cells.join(",")
    }

    pub fn parse_csv_row(schema: FeatureSchema, row: &str) -> Result<Self> {
        let values = row
            .split(',')
            .map(|cell| {
                cell.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Domain(format!("bad feature value {cell:?}: {e}")))
            })
            .collect::<Result<Vec<_>>>()?;
        FeatureVector::new(schema, values)
    }
}

/// Full feature vector of an observed cascade.
pub fn extract_features(cascade: &Cascade, history: &UserHistory, schema: FeatureSchema) -> Result<FeatureVector> {
    let classification = schema == FeatureSchema::Classification;
    let mut values = basic_user_features(cascade)?;
    values.extend(temporal_features(cascade, classification)?);
    if !classification {
        values.push(volume(cascade));
    }
    values.extend(past_user_success(cascade, history)?);
    FeatureVector::new(schema, values)
}
