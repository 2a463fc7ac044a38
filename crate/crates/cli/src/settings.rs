//! Merges the `--config` file with command-line overrides.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use hawkes_core::config::KeyValues;
use hawkes_core::experiment::ExperimentConfig;
use hawkes_core::io::{Format, EXTENDED_HEADER};
use hawkes_core::model::{HawkesParams, InfluenceDistribution};
use hawkes_core::synthetic::CorpusConfig;

use crate::{Common, Failure};

/// Every key the configuration file may contain.
pub const KNOWN_KEYS: &[&str] = &[
    "alpha",
    "m_min",
    "seed",
    "horizon_seconds",
    "method",
    "format",
    "out",
    "threads",
    // fitting
    "max_iterations",
    "gradient_tolerance",
    "n_star_slack",
    "min_events",
    // forests and protocol
    "n_trees",
    "min_leaf_grid",
    "cv_folds",
    "train_fraction",
    "repeats",
    "observed_count",
    "split_cutoff",
    // simulation
    "kappa",
    "beta",
    "c",
    "theta",
    "seed_magnitude",
    "max_events",
    "corpus_size",
    "corpus_n_star_min",
    "corpus_n_star_max",
    "n_initiators",
    "history_fraction",
];

pub struct Settings {
    kv: KeyValues,
}

fn config_error(e: hawkes_core::Error) -> Failure {
    Failure::config(e.to_string())
}

impl Settings {
    pub fn new(common: &Common) -> Result<Self, Failure> {
        let mut kv = match &common.config {
            Some(path) => KeyValues::load(path).map_err(config_error)?,
            None => KeyValues::default(),
        };
        kv.check_known(KNOWN_KEYS).map_err(config_error)?;
        if let Some(v) = common.horizon_seconds {
            kv.set("horizon_seconds", v);
        }
        if let Some(v) = common.alpha {
            kv.set("alpha", v);
        }
        if let Some(v) = common.seed {
            kv.set("seed", v);
        }
        if let Some(v) = &common.method {
            kv.set("method", v);
        }
        if let Some(v) = &common.format {
            kv.set("format", v);
        }
        if let Some(v) = &common.out {
            kv.set("out", v.display());
        }
        Ok(Settings { kv })
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>, Failure> {
        self.kv.get(key).map_err(config_error)
    }

    pub fn get_or<T: FromStr>(&self, key: &str, default: T) -> Result<T, Failure> {
        Ok(self.get(key)?.unwrap_or(default))
    }

    pub fn seed(&self) -> Result<u64, Failure> {
        self.get_or("seed", 0)
    }

    pub fn horizon(&self) -> Result<Option<f64>, Failure> {
        let h: Option<f64> = self.get("horizon_seconds")?;
        match h {
            Some(h) if !(h.is_finite() && h >= 0.0) => {
                Err(Failure::config(format!("horizon_seconds={h} must be finite and >= 0")))
            }
            other => Ok(other),
        }
    }

    pub fn out(&self) -> Option<PathBuf> {
        self.kv.get_str("out").map(PathBuf::from)
    }

    pub fn method<T: FromStr<Err = hawkes_core::Error>>(&self, default: T) -> Result<T, Failure> {
        match self.kv.get_str("method") {
            Some(m) => m.parse().map_err(config_error),
            None => Ok(default),
        }
    }

    pub fn format(&self) -> Result<Option<Format>, Failure> {
        self.kv.get_str("format").map(str::parse).transpose().map_err(config_error)
    }

    /// Configured format, or the one named by the header of `sample`.
    pub fn format_for(&self, sample: &Path) -> Result<Format, Failure> {
        if let Some(f) = self.format()? {
            return Ok(f);
        }
        let text = std::fs::read_to_string(sample).map_err(|e| Failure::from(hawkes_core::Error::Io(e)))?;
        let header = text.lines().next().unwrap_or("").trim_end_matches('\r');
        Ok(if header == EXTENDED_HEADER {
            Format::Extended
        } else {
            Format::Basic
        })
    }

    pub fn dist(&self) -> Result<InfluenceDistribution, Failure> {
        let default = InfluenceDistribution::default();
        InfluenceDistribution::new(self.get_or("alpha", default.alpha)?, self.get_or("m_min", default.m_min)?)
            .map_err(|e| Failure::config(e.to_string()))
    }

    /// Kernel parameters when all four are configured.
    pub fn params(&self) -> Result<Option<HawkesParams>, Failure> {
        let values: Vec<Option<f64>> = ["kappa", "beta", "c", "theta"]
            .iter()
            .map(|k| self.get(k))
            .collect::<Result<_, _>>()?;
        match values.as_slice() {
            [Some(k), Some(b), Some(c), Some(t)] => Ok(Some(HawkesParams::new(*k, *b, *c, *t))),
            [None, None, None, None] => Ok(None),
            _ => Err(Failure::config("kappa, beta, c and theta must be given together")),
        }
    }

    pub fn experiment(&self) -> Result<ExperimentConfig, Failure> {
        let dist = self.dist()?;
        let mut cfg = ExperimentConfig::new(dist);
        if let Some(h) = self.horizon()? {
            cfg.horizon = h;
        }
        cfg.seed = self.seed()?;
        cfg.threads = self.get_or("threads", cfg.threads)?;
        cfg.observed_count = self.get_or("observed_count", cfg.observed_count)?;
        cfg.cv_folds = self.get_or("cv_folds", cfg.cv_folds)?;
        cfg.train_fraction = self.get_or("train_fraction", cfg.train_fraction)?;
        cfg.repeats = self.get_or("repeats", cfg.repeats)?;
        if let Some(grid) = self.kv.get_list("min_leaf_grid").map_err(config_error)? {
            cfg.min_leaf_grid = grid;
        }
        let n_trees = self.get_or("n_trees", cfg.regression_forest.n_trees)?;
        cfg.regression_forest.n_trees = n_trees;
        cfg.classification_forest.n_trees = n_trees;
        cfg.fit.max_iterations = self.get_or("max_iterations", cfg.fit.max_iterations)?;
        cfg.fit.gradient_tolerance = self.get_or("gradient_tolerance", cfg.fit.gradient_tolerance)?;
        cfg.fit.n_star_slack = self.get_or("n_star_slack", cfg.fit.n_star_slack)?;
        cfg.fit.min_events = self.get_or("min_events", cfg.fit.min_events)?;
        if n_trees == 0 {
            return Err(Failure::config("n_trees must be at least 1"));
        }
        cfg.validate().map_err(config_error)?;
        Ok(cfg)
    }

    pub fn corpus(&self, n_cascades: usize) -> Result<CorpusConfig, Failure> {
        let d = CorpusConfig::default();
        Ok(CorpusConfig {
            n_cascades,
            dist: self.dist()?,
            n_star: (
                self.get_or("corpus_n_star_min", d.n_star.0)?,
                self.get_or("corpus_n_star_max", d.n_star.1)?,
            ),
            n_initiators: self.get_or("n_initiators", d.n_initiators)?,
            max_events: self.get_or("max_events", d.max_events)?,
            seed: self.seed()?,
            ..d
        })
    }
}
