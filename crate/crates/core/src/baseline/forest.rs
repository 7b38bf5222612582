//! CART trees with Gini impurity and a bagged random forest over them.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MaxFeatures {
    All,
    Sqrt,
}

impl MaxFeatures {
    fn count(self, n: usize) -> usize {
        match self {
            MaxFeatures::All => n,
            MaxFeatures::Sqrt => ((n as f64).sqrt() as usize).max(1),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeParams {
    pub max_depth: Option<usize>,
    pub min_samples_split: usize,
    pub max_features: MaxFeatures,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
enum Node {
    Leaf { distribution: Vec<f64> },
    Split { feature: usize, threshold: f64, left: usize, right: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    classes: usize,
    nodes: Vec<Node>,
}

fn gini(counts: &[f64], total: f64) -> f64 {
    if total == 0.0 {
        return 0.0;
    }
    1.0 - counts.iter().map(|c| (c / total).powi(2)).sum::<f64>()
}

struct Builder<'a> {
    x: &'a [Vec<f64>],
    y: &'a [usize],
    classes: usize,
    params: TreeParams,
    nodes: Vec<Node>,
}

impl Builder<'_> {
    fn leaf(&mut self, counts: &[f64], total: f64) -> usize {
        self.nodes.push(Node::Leaf { distribution: counts.iter().map(|c| c / total).collect() });
        self.nodes.len() - 1
    }

    /// Best `(feature, threshold, impurity decrease)` over the sampled
    /// features. Features are drawn in random order; drawing continues past
    /// the quota until a non-constant feature has been seen.
    fn best_split(&self, idx: &[usize], counts: &[f64], rng: &mut ChaCha8Rng) -> Option<(usize, f64)> {
        let n_features = self.x[0].len();
        let quota = self.params.max_features.count(n_features);
        let mut features: Vec<usize> = (0..n_features).collect();
        features.shuffle(rng);
        let total = idx.len() as f64;
        let parent = gini(counts, total);
        let mut best: Option<(usize, f64, f64)> = None;
        let mut sorted = idx.to_vec();
        for (visited, &f) in features.iter().enumerate() {
            if visited >= quota && best.is_some() {
                break;
            }
            sorted.sort_by(|&a, &b| self.x[a][f].total_cmp(&self.x[b][f]));
            let mut left = vec![0.0; self.classes];
            let mut right = counts.to_vec();
            for k in 0..sorted.len() - 1 {
                let c = self.y[sorted[k]];
                left[c] += 1.0;
                right[c] -= 1.0;
                let (v, next) = (self.x[sorted[k]][f], self.x[sorted[k + 1]][f]);
                if v == next {
                    continue;
                }
                let nl = (k + 1) as f64;
                let nr = total - nl;
                let child = (nl * gini(&left, nl) + nr * gini(&right, nr)) / total;
                let gain = parent - child;
                if best.is_none_or(|(_, _, g)| gain > g + 1e-12) {
                    best = Some((f, v + (next - v) / 2.0, gain));
                }
            }
        }
        best.map(|(f, t, _)| (f, t))
    }

    fn grow(&mut self, idx: &[usize], depth: usize, rng: &mut ChaCha8Rng) -> usize {
        let mut counts = vec![0.0; self.classes];
        for &i in idx {
            counts[self.y[i]] += 1.0;
        }
        let total = idx.len() as f64;
        let pure = counts.iter().filter(|&&c| c > 0.0).count() <= 1;
        let depth_reached = self.params.max_depth.is_some_and(|d| depth >= d);
        if pure || depth_reached || idx.len() < self.params.min_samples_split {
            return self.leaf(&counts, total);
        }
        let Some((feature, threshold)) = self.best_split(idx, &counts, rng) else {
            return self.leaf(&counts, total);
        };
        let (l, r): (Vec<usize>, Vec<usize>) = idx.iter().partition(|&&i| self.x[i][feature] <= threshold);
        let id = self.nodes.len();
        self.nodes.push(Node::Split { feature, threshold, left: 0, right: 0 });
        let left = self.grow(&l, depth + 1, rng);
        let right = self.grow(&r, depth + 1, rng);
        self.nodes[id] = Node::Split { feature, threshold, left, right };
        id
    }
}

impl DecisionTree {
    /// Fits on the rows listed in `idx` (repeats allowed, as in a bootstrap).
    pub fn fit(x: &[Vec<f64>], y: &[usize], idx: &[usize], classes: usize, params: TreeParams, rng: &mut ChaCha8Rng) -> Self {
        assert!(!idx.is_empty(), "cannot fit a tree on no rows");
        let mut b = Builder { x, y, classes, params, nodes: Vec::new() };
        b.grow(idx, 0, rng);
        Self { classes, nodes: b.nodes }
    }

    pub fn predict_proba(&self, row: &[f64]) -> &[f64] {
        let mut n = 0;
        loop {
            match &self.nodes[n] {
                Node::Leaf { distribution } => return distribution,
                Node::Split { feature, threshold, left, right } => {
                    n = if row[*feature] <= *threshold { *left } else { *right };
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], n: usize) -> usize {
            match &nodes[n] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
            }
        }
        walk(&self.nodes, 0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ForestParams {
    pub n_trees: usize,
    pub tree: TreeParams,
    pub bootstrap: bool,
    pub seed: u64,
}

impl Default for ForestParams {
    fn default() -> Self {
        Self {
            n_trees: 100,
            tree: TreeParams { max_depth: None, min_samples_split: 2, max_features: MaxFeatures::Sqrt },
            bootstrap: true,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomForest {
    classes: usize,
    trees: Vec<DecisionTree>,
}

impl RandomForest {
    pub fn fit(x: &[Vec<f64>], y: &[usize], classes: usize, params: &ForestParams) -> Self {
        assert_eq!(x.len(), y.len());
        assert!(params.n_trees >= 1 && !x.is_empty());
        let trees = (0..params.n_trees)
            .map(|t| {
                let mut rng = ChaCha8Rng::seed_from_u64(params.seed.wrapping_add(t as u64));
                let idx: Vec<usize> = if params.bootstrap {
                    (0..x.len()).map(|_| rng.gen_range(0..x.len())).collect()
                } else {
                    (0..x.len()).collect()
                };
                DecisionTree::fit(x, y, &idx, classes, params.tree, &mut rng)
            })
            .collect();
        Self { classes, trees }
    }

    /// Mean of the trees' leaf distributions.
    pub fn predict_proba(&self, row: &[f64]) -> Vec<f64> {
        let mut p = vec![0.0; self.classes];
        for t in &self.trees {
            for (acc, v) in p.iter_mut().zip(t.predict_proba(row)) {
                *acc += v;
            }
        }
        p.iter_mut().for_each(|v| *v /= self.trees.len() as f64);
        p
    }

    /// Most probable class; ties go to the lower index.
    pub fn predict(&self, row: &[f64]) -> usize {
        let p = self.predict_proba(row);
        (1..p.len()).fold(0, |best, i| if p[i] > p[best] { i } else { best })
    }

    pub fn trees(&self) -> &[DecisionTree] {
        &self.trees
    }
}
