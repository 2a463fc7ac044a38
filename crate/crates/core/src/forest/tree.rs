//! CART decision trees stored as flat node arrays.

use rand::Rng;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Node {
    Leaf {
        value: f64,
    },
    /// Rows with `x[feature] <= threshold` go left.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

/// A binary tree whose root is `nodes[0]`; children always follow their
/// parent in the array.
#[derive(Debug, Clone, PartialEq)]
pub struct Tree {
    pub(crate) nodes: Vec<Node>,
}

impl Tree {
    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn evaluate(&self, row: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf { value } => return value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if row[feature] <= threshold { left } else { right },
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], i: usize) -> usize {
            match nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, left).max(walk(nodes, right)),
            }
        }
        walk(&self.nodes, 0)
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) enum Criterion {
    Variance,
    Gini { n_classes: usize },
}

pub(crate) struct Builder<'a, R> {
    pub x: &'a [Vec<f64>],
    pub y: &'a [f64],
    pub criterion: Criterion,
    pub max_depth: Option<usize>,
    pub min_leaf: usize,
    pub features_per_split: usize,
    pub rng: R,
}

struct BestSplit {
    feature: usize,
    threshold: f64,
    score: f64,
}

impl<R: Rng> Builder<'_, R> {
    pub fn build(mut self, mut rows: Vec<usize>) -> Tree {
        let mut nodes = Vec::new();
        self.grow(&mut nodes, &mut rows, 0);
        Tree { nodes }
    }

    fn leaf_value(&self, rows: &[usize]) -> f64 {
        match self.criterion {
            Criterion::Variance => rows.iter().map(|&i| self.y[i]).sum::<f64>() / rows.len() as f64,
            Criterion::Gini { n_classes } => {
                let counts = self.class_counts(rows, n_classes);
                majority(&counts) as f64
            }
        }
    }

    fn class_counts(&self, rows: &[usize], n_classes: usize) -> Vec<usize> {
        let mut counts = vec![0; n_classes];
        for &i in rows {
            counts[self.y[i] as usize] += 1;
        }
        counts
    }

    fn grow(&mut self, nodes: &mut Vec<Node>, rows: &mut [usize], depth: usize) -> usize {
        let id = nodes.len();
        nodes.push(Node::Leaf {
            value: self.leaf_value(rows),
        });
        let pure = rows.iter().all(|&i| self.y[i] == self.y[rows[0]]);
        if pure || rows.len() < 2 * self.min_leaf || self.max_depth.is_some_and(|d| depth >= d) {
            return id;
        }
        let Some(best) = self.best_split(rows) else {
            return id;
        };
        let (feature, threshold) = (best.feature, best.threshold);
        let mut split = 0;
        for k in 0..rows.len() {
            if self.x[rows[k]][feature] <= threshold {
                rows.swap(split, k);
                split += 1;
            }
        }
        let (left_rows, right_rows) = rows.split_at_mut(split);
        let left = self.grow(nodes, left_rows, depth + 1);
        let right = self.grow(nodes, right_rows, depth + 1);
        nodes[id] = Node::Split {
            feature,
            threshold,
            left,
            right,
        };
        id
    }

    /// Scores are "higher is better" proxies: `sum_L^2/n_L + sum_R^2/n_R`
    /// for variance, `sum_k c_Lk^2/n_L + sum_k c_Rk^2/n_R` for Gini.
    fn best_split(&mut self, rows: &[usize]) -> Option<BestSplit> {
        let d = self.x[0].len();
        let mut features: Vec<usize> = if self.features_per_split >= d {
            (0..d).collect()
        } else {
            rand::seq::index::sample(&mut self.rng, d, self.features_per_split).into_vec()
        };
        features.sort_unstable();

        let n = rows.len() as f64;
        let parent_score = match self.criterion {
            Criterion::Variance => {
                let s: f64 = rows.iter().map(|&i| self.y[i]).sum();
                s * s / n
            }
            Criterion::Gini { n_classes } => {
                let counts = self.class_counts(rows, n_classes);
                counts.iter().map(|&c| (c * c) as f64).sum::<f64>() / n
            }
        };

        let mut best: Option<BestSplit> = None;
        let mut sorted = rows.to_vec();
        for &f in &features {
            sorted.sort_by(|&a, &b| self.x[a][f].total_cmp(&self.x[b][f]).then(a.cmp(&b)));
            let candidate = match self.criterion {
                Criterion::Variance => self.sweep_variance(&sorted, f),
                Criterion::Gini { n_classes } => self.sweep_gini(&sorted, f, n_classes),
            };
            if let Some(c) = candidate {
                if best.as_ref().is_none_or(|b| c.score > b.score) {
                    best = Some(c);
                }
            }
        }
        best.filter(|b| b.score > parent_score + 1e-12 * parent_score.abs().max(1e-300))
    }

    fn threshold(lo: f64, hi: f64) -> f64 {
        let mid = lo + 0.5 * (hi - lo);
        if mid < hi {
            mid
        } else {
            lo
        }
    }

    fn sweep_variance(&self, sorted: &[usize], f: usize) -> Option<BestSplit> {
        let total: f64 = sorted.iter().map(|&i| self.y[i]).sum();
        let n = sorted.len();
        let mut left = 0.0;
        let mut best: Option<BestSplit> = None;
        for k in 1..n {
            left += self.y[sorted[k - 1]];
            if k < self.min_leaf || n - k < self.min_leaf {
                continue;
            }
            let (lo, hi) = (self.x[sorted[k - 1]][f], self.x[sorted[k]][f]);
            if !(lo < hi) {
                continue;
            }
            let right = total - left;
            let score = left * left / k as f64 + right * right / (n - k) as f64;
            if best.as_ref().is_none_or(|b| score > b.score) {
                best = Some(BestSplit {
                    feature: f,
                    threshold: Self::threshold(lo, hi),
                    score,
                });
            }
        }
        best
    }

    fn sweep_gini(&self, sorted: &[usize], f: usize, n_classes: usize) -> Option<BestSplit> {
        let mut right = self.class_counts(sorted, n_classes);
        let mut left = vec![0usize; n_classes];
        let n = sorted.len();
        let mut best: Option<BestSplit> = None;
        for k in 1..n {
            let class = self.y[sorted[k - 1]] as usize;
            left[class] += 1;
            right[class] -= 1;
            if k < self.min_leaf || n - k < self.min_leaf {
                continue;
            }
            let (lo, hi) = (self.x[sorted[k - 1]][f], self.x[sorted[k]][f]);
            if !(lo < hi) {
                continue;
            }
            let sq = |c: &[usize]| c.iter().map(|&v| (v * v) as f64).sum::<f64>();
            let score = sq(&left) / k as f64 + sq(&right) / (n - k) as f64;
            if best.as_ref().is_none_or(|b| score > b.score) {
                best = Some(BestSplit {
                    feature: f,
                    threshold: Self::threshold(lo, hi),
                    score,
                });
            }
        }
        best
    }
}

/// Index of the largest count; ties go to the lowest index.
pub(crate) fn majority(counts: &[usize]) -> usize {
    let mut best = 0;
    for (k, &c) in counts.iter().enumerate() {
        if c > counts[best] {
            best = k;
        }
    }
    best
}
