//! Random forests of CART trees for regression and classification.
//!
//! Trees grow on bootstrap resamples (optional) and consider a random subset
//! of features at each node. Regression splits maximise variance reduction,
//! classification splits minimise Gini impurity. Thresholds are midpoints
//! between consecutive distinct values; ties in split quality go to the
//! lowest feature index, then the lowest threshold.

mod format;
mod tree;

pub use format::{FORMAT_VERSION, MAGIC};
pub use tree::{Node, Tree};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::seed;
use tree::{majority, Builder, Criterion};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Task {
    Regression,
    Classification { n_classes: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeaturesPerSplit {
    /// `sqrt(d)` for classification, `d / 3` for regression (at least 1).
    Auto,
    Count(usize),
    All,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForestConfig {
    pub n_trees: usize,
    pub max_depth: Option<usize>,
    pub min_leaf: usize,
    pub features_per_split: FeaturesPerSplit,
    pub bootstrap: bool,
    pub rng_seed: u64,
}

impl ForestConfig {
    pub fn regression() -> Self {
        ForestConfig {
            n_trees: 100,
            max_depth: None,
            min_leaf: 5,
            features_per_split: FeaturesPerSplit::Auto,
            bootstrap: true,
            rng_seed: 0,
        }
    }

    pub fn classification() -> Self {
        ForestConfig {
            min_leaf: 1,
            ..ForestConfig::regression()
        }
    }

    /// One unbootstrapped tree using every feature: an exact CART fit.
    pub fn single_tree() -> Self {
        ForestConfig {
            n_trees: 1,
            max_depth: None,
            min_leaf: 1,
            features_per_split: FeaturesPerSplit::All,
            bootstrap: false,
            rng_seed: 0,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.rng_seed = seed;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.n_trees == 0 {
            return Err(Error::Config("n_trees must be at least 1".into()));
        }
        if self.min_leaf == 0 {
            return Err(Error::Config("min_leaf must be at least 1".into()));
        }
        if self.features_per_split == FeaturesPerSplit::Count(0) {
            return Err(Error::Config("features_per_split must be at least 1".into()));
        }
        Ok(())
    }

    fn features_for(&self, task: Task, d: usize) -> usize {
        match self.features_per_split {
            FeaturesPerSplit::All => d,
            FeaturesPerSplit::Count(k) => k.min(d),
            FeaturesPerSplit::Auto => match task {
                Task::Regression => (d / 3).max(1),
                Task::Classification { .. } => ((d as f64).sqrt() as usize).max(1),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForestModel {
    task: Task,
    trees: Vec<Tree>,
    feature_names: Vec<String>,
}

fn check_matrix(x: &[Vec<f64>], n_targets: usize, names: &[String]) -> Result<()> {
    if x.is_empty() {
        return Err(Error::EmptyInput);
    }
    if x.len() != n_targets {
        return Err(Error::Domain(format!(
            "{} feature rows but {} targets",
            x.len(),
            n_targets
        )));
    }
    for row in x {
        if row.len() != names.len() {
            return Err(Error::SchemaMismatch {
                expected: names.len(),
                got: row.len(),
            });
        }
        if row.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("feature matrix contains non-finite values".into()));
        }
    }
    if names.is_empty() {
        return Err(Error::Domain("feature schema is empty".into()));
    }
    Ok(())
}

impl ForestModel {
    /// Trains a regression forest; each tree predicts the mean of its leaf.
    pub fn train_regressor(
        x: &[Vec<f64>],
        y: &[f64],
        feature_names: &[String],
        config: &ForestConfig,
    ) -> Result<Self> {
        check_matrix(x, y.len(), feature_names)?;
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("targets contain non-finite values".into()));
        }
        Self::train(x, y, feature_names, config, Task::Regression)
    }

    /// Trains a classification forest over labels `0..n_classes`.
    pub fn train_classifier(
        x: &[Vec<f64>],
        labels: &[usize],
        n_classes: usize,
        feature_names: &[String],
        config: &ForestConfig,
    ) -> Result<Self> {
        check_matrix(x, labels.len(), feature_names)?;
        if n_classes == 0 || labels.iter().any(|&l| l >= n_classes) {
            return Err(Error::Domain(format!("labels must lie in 0..{n_classes}")));
        }
        let y: Vec<f64> = labels.iter().map(|&l| l as f64).collect();
        Self::train(x, &y, feature_names, config, Task::Classification { n_classes })
    }

    fn train(x: &[Vec<f64>], y: &[f64], names: &[String], config: &ForestConfig, task: Task) -> Result<Self> {
        config.validate()?;
        let criterion = match task {
            Task::Regression => Criterion::Variance,
            Task::Classification { n_classes } => Criterion::Gini { n_classes },
        };
        let mtry = config.features_for(task, names.len());
        let n = x.len();
        let trees = (0..config.n_trees)
            .into_par_iter()
            .map(|t| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed::derive(config.rng_seed, "tree", t as u64));
                let rows: Vec<usize> = if config.bootstrap {
                    (0..n).map(|_| rng.random_range(0..n)).collect()
                } else {
                    (0..n).collect()
                };
                Builder {
                    x,
                    y,
                    criterion,
                    max_depth: config.max_depth,
                    min_leaf: config.min_leaf,
                    features_per_split: mtry,
                    rng,
                }
                .build(rows)
            })
            .collect();
        Ok(ForestModel {
            task,
            trees,
            feature_names: names.to_vec(),
        })
    }

    /// Assembles a model from prebuilt trees, validating their structure.
    pub fn from_trees(task: Task, trees: Vec<Tree>, feature_names: Vec<String>) -> Result<Self> {
        let model = ForestModel {
            task,
            trees,
            feature_names,
        };
        ForestModel::load(&model.save())
    }

    pub fn task(&self) -> Task {
        self.task
    }

    pub fn trees(&self) -> &[Tree] {
        &self.trees
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    fn check_row(&self, row: &[f64]) -> Result<()> {
        if row.len() != self.feature_names.len() {
            return Err(Error::SchemaMismatch {
                expected: self.feature_names.len(),
                got: row.len(),
            });
        }
        Ok(())
    }

    /// Mean of the tree outputs (regression) or the winning class index as
    /// a float (classification).
    pub fn predict(&self, row: &[f64]) -> Result<f64> {
        match self.task {
            Task::Regression => {
                self.check_row(row)?;
                let sum: f64 = self.trees.iter().map(|t| t.evaluate(row)).sum();
                Ok(sum / self.trees.len() as f64)
            }
            Task::Classification { .. } => self.predict_class(row).map(|c| c as f64),
        }
    }

    /// Majority vote; ties go to the lower class index.
    pub fn predict_class(&self, row: &[f64]) -> Result<usize> {
        self.check_row(row)?;
        let Task::Classification { n_classes } = self.task else {
            return Err(Error::Domain("model is a regressor".into()));
        };
        let mut votes = vec![0usize; n_classes];
        for t in &self.trees {
            votes[t.evaluate(row) as usize] += 1;
        }
        Ok(majority(&votes))
    }

    pub fn save(&self) -> Vec<u8> {
        let mut out = Vec::new();
        format::encode(self, &mut out);
        out
    }

    pub fn load(bytes: &[u8]) -> Result<Self> {
        let mut r = format::Reader::new(bytes);
        let model = Self::read(&mut r)?;
        if !r.finished() {
            return Err(Error::CorruptPayload(format!(
                "{} trailing bytes",
                bytes.len() - r.position()
            )));
        }
        Ok(model)
    }

    pub(crate) fn read(r: &mut format::Reader<'_>) -> Result<Self> {
        let model = format::decode(r)?;
        if let Task::Classification { n_classes } = model.task {
            let bad_leaf = model.trees.iter().flat_map(|t| &t.nodes).any(|n| match *n {
                Node::Leaf { value } => value < 0.0 || value.fract() != 0.0 || value >= n_classes as f64,
                Node::Split { .. } => false,
            });
            if bad_leaf {
                return Err(Error::CorruptPayload("class label out of range".into()));
            }
        }
        Ok(model)
    }

    pub(crate) fn write(&self, out: &mut Vec<u8>) {
        format::encode(self, out);
    }
}

pub(crate) use format::Reader;

#[cfg(test)]
mod tests {
    use super::*;

    fn names(d: usize) -> Vec<String> {
        (0..d).map(|i| format!("x{i}")).collect()
    }

    fn uniform_rows(n: usize, d: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| (0..d).map(|_| rng.random::<f64>()).collect()).collect()
    }

    #[test]
    fn constant_targets() {
        let x = uniform_rows(40, 3, 1);
        let y = vec![2.5; 40];
        let m = ForestModel::train_regressor(&x, &y, &names(3), &ForestConfig::regression()).unwrap();
        for row in uniform_rows(20, 3, 2) {
            assert_eq!(m.predict(&row).unwrap(), 2.5);
        }
    }

    #[test]
    fn separable_threshold_rule() {
        let x = uniform_rows(200, 3, 3);
        let labels: Vec<usize> = x.iter().map(|r| usize::from(r[1] > 0.4)).collect();
        let m = ForestModel::train_classifier(&x, &labels, 2, &names(3), &ForestConfig::single_tree()).unwrap();
        for (row, &l) in x.iter().zip(&labels) {
            assert_eq!(m.predict_class(row).unwrap(), l);
        }
    }

    #[test]
    fn step_regression_generalises() {
        let x = uniform_rows(1000, 2, 4);
        let y: Vec<f64> = x.iter().map(|r| f64::from(u8::from(r[0] > 0.5))).collect();
        let m = ForestModel::train_regressor(&x, &y, &names(2), &ForestConfig::regression().with_seed(9)).unwrap();
        let test = uniform_rows(1000, 2, 5);
        let mse: f64 = test
            .iter()
            .map(|r| (m.predict(r).unwrap() - f64::from(u8::from(r[0] > 0.5))).powi(2))
            .sum::<f64>()
            / 1000.0;
        assert!(mse <= 0.02, "mse {mse}");
    }

    #[test]
    fn single_leaf_and_identical_trees() {
        let leaf = Tree {
            nodes: vec![Node::Leaf { value: 3.2 }],
        };
        let m = ForestModel::from_trees(Task::Regression, vec![leaf.clone()], names(2)).unwrap();
        assert_eq!(m.predict(&[0.1, 0.9]).unwrap(), 3.2);

        let split = Tree {
            nodes: vec![
                Node::Split {
                    feature: 0,
                    threshold: 0.5,
                    left: 1,
                    right: 2,
                },
                Node::Leaf { value: -1.0 },
                Node::Leaf { value: 4.0 },
            ],
        };
        let one = ForestModel::from_trees(Task::Regression, vec![split.clone()], names(2)).unwrap();
        let many = ForestModel::from_trees(Task::Regression, vec![split; 7], names(2)).unwrap();
        for row in uniform_rows(50, 2, 6) {
            assert_eq!(one.predict(&row).unwrap(), many.predict(&row).unwrap());
        }
    }

    #[test]
    fn majority_vote_and_ties() {
        let leaf = |v: f64| Tree {
            nodes: vec![Node::Leaf { value: v }],
        };
        let task = Task::Classification { n_classes: 2 };
        let m = ForestModel::from_trees(task, vec![leaf(0.0), leaf(0.0), leaf(1.0)], names(1)).unwrap();
        assert_eq!(m.predict_class(&[0.0]).unwrap(), 0);
        let m = ForestModel::from_trees(task, vec![leaf(1.0), leaf(0.0)], names(1)).unwrap();
        assert_eq!(m.predict_class(&[0.0]).unwrap(), 0);
        let m = ForestModel::from_trees(task, vec![leaf(1.0), leaf(1.0), leaf(0.0)], names(1)).unwrap();
        assert_eq!(m.predict_class(&[0.0]).unwrap(), 1);
    }

    #[test]
    fn schema_mismatch() {
        let x = uniform_rows(10, 2, 1);
        let y = vec![1.0; 10];
        let m = ForestModel::train_regressor(&x, &y, &names(2), &ForestConfig::regression()).unwrap();
        assert!(matches!(
            m.predict(&[1.0]),
            Err(Error::SchemaMismatch { expected: 2, got: 1 })
        ));
        assert!(matches!(
            ForestModel::train_regressor(&[], &[], &names(2), &ForestConfig::regression()),
            Err(Error::EmptyInput)
        ));
    }

    #[test]
    fn round_trip_and_corruption() {
        let x = uniform_rows(100, 4, 7);
        let y: Vec<f64> = x.iter().map(|r| r[0] * 3.0 + r[2]).collect();
        let m = ForestModel::train_regressor(&x, &y, &names(4), &ForestConfig::regression().with_seed(1)).unwrap();
        let bytes = m.save();
        let back = ForestModel::load(&bytes).unwrap();
        assert_eq!(back, m);
        for row in uniform_rows(100, 4, 8) {
            assert_eq!(back.predict(&row).unwrap(), m.predict(&row).unwrap());
        }
        assert!(matches!(
            ForestModel::load(&bytes[..bytes.len() - 3]),
            Err(Error::CorruptPayload(_))
        ));
        let mut bumped = bytes.clone();
        bumped[4] = 9;
        assert!(matches!(ForestModel::load(&bumped), Err(Error::VersionMismatch { found: 9, .. })));
        assert!(matches!(
            ForestModel::from_trees(Task::Regression, vec![], names(1)),
            Err(Error::CorruptPayload(_))
        ));
    }

    #[test]
    fn deterministic_under_seed() {
        let x = uniform_rows(80, 5, 10);
        let y: Vec<f64> = x.iter().map(|r| r[3] - r[1]).collect();
        let cfg = ForestConfig::regression().with_seed(77);
        let a = ForestModel::train_regressor(&x, &y, &names(5), &cfg).unwrap();
        let b = ForestModel::train_regressor(&x, &y, &names(5), &cfg).unwrap();
        assert_eq!(a, b);
        let c = ForestModel::train_regressor(&x, &y, &names(5), &cfg.clone().with_seed(78)).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn depth_limit() {
        let x = uniform_rows(300, 2, 11);
        let y: Vec<f64> = x.iter().map(|r| r[0].sin() + r[1]).collect();
        let cfg = ForestConfig {
            max_depth: Some(3),
            ..ForestConfig::regression()
        };
        let m = ForestModel::train_regressor(&x, &y, &names(2), &cfg).unwrap();
        assert!(m.trees().iter().all(|t| t.depth() <= 3));
    }
}
