use rand::seq::SliceRandom;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Simplex, N_CLASSES};
use crate::hash::Fnv1a;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node {
    /// Samples with `x[feature] <= threshold` go left.
    Split { feature: usize, threshold: f64, left: usize, right: usize },
    Leaf { proba: Simplex },
}

/// A CART classification tree grown to purity on Gini impurity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

fn counts(y: &[usize], idx: &[usize]) -> [usize; N_CLASSES] {
    let mut c = [0; N_CLASSES];
    for &i in idx {
        c[y[i]] += 1;
    }
    c
}

/// `n · gini`, the impurity weighted by node size.
fn weighted_gini(c: &[usize; N_CLASSES], n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let sq: f64 = c.iter().map(|&k| (k * k) as f64).sum();
    n as f64 - sq / n as f64
}

struct Grower<'a> {
    x: &'a [Vec<f64>],
    y: &'a [usize],
    max_features: usize,
    nodes: Vec<Node>,
}

impl Grower<'_> {
    fn best_split(&self, idx: &[usize], rng: &mut ChaCha8Rng) -> Option<(usize, f64)> {
        let d = self.x[0].len();
        let mut features: Vec<usize> = (0..d).collect();
        features.shuffle(rng);
        let total = counts(self.y, idx);
        let parent = weighted_gini(&total, idx.len());
        let mut best: Option<(f64, usize, f64)> = None;
        let mut visited = 0;
        let mut sorted = idx.to_vec();
        for f in features {
            if visited == self.max_features && best.is_some() {
                break;
            }
            sorted.sort_by(|&a, &b| self.x[a][f].total_cmp(&self.x[b][f]));
            if self.x[sorted[0]][f] == self.x[sorted[sorted.len() - 1]][f] {
                continue;
            }
            visited += 1;
            let mut left = [0usize; N_CLASSES];
            for s in 0..sorted.len() - 1 {
                left[self.y[sorted[s]]] += 1;
                let (lo, hi) = (self.x[sorted[s]][f], self.x[sorted[s + 1]][f]);
                if lo == hi {
                    continue;
                }
                let mut right = total;
                for k in 0..N_CLASSES {
                    right[k] -= left[k];
                }
                let n_left = s + 1;
                let impurity = weighted_gini(&left, n_left) + weighted_gini(&right, sorted.len() - n_left);
                if impurity < parent && best.is_none_or(|b| impurity < b.0) {
                    let mid = 0.5 * (lo + hi);
                    best = Some((impurity, f, if mid < hi { mid } else { lo }));
                }
            }
        }
        best.map(|(_, f, t)| (f, t))
    }

    fn grow(&mut self, idx: Vec<usize>, rng: &mut ChaCha8Rng) -> usize {
        let c = counts(self.y, &idx);
        let id = self.nodes.len();
        let leaf = |c: &[usize; N_CLASSES]| {
            let n: usize = c.iter().sum();
            let mut proba = [0.0; N_CLASSES];
            for k in 0..N_CLASSES {
                proba[k] = c[k] as f64 / n as f64;
            }
            Node::Leaf { proba }
        };
        self.nodes.push(leaf(&c));
        if idx.len() < 2 || c.iter().filter(|&&k| k > 0).count() < 2 {
            return id;
        }
        let Some((feature, threshold)) = self.best_split(&idx, rng) else {
            return id;
        };
        let (l, r): (Vec<usize>, Vec<usize>) = idx.iter().partition(|&&i| self.x[i][feature] <= threshold);
        let left = self.grow(l, rng);
        let right = self.grow(r, rng);
        self.nodes[id] = Node::Split { feature, threshold, left, right };
        id
    }
}

impl Tree {
    pub fn fit(x: &[Vec<f64>], y: &[usize], sample: Vec<usize>, max_features: usize, rng: &mut ChaCha8Rng) -> Self {
        let mut g = Grower { x, y, max_features, nodes: Vec::new() };
        g.grow(sample, rng);
        Tree { nodes: g.nodes }
    }

    pub fn predict_proba(&self, x: &[f64]) -> Simplex {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                Node::Leaf { proba } => return *proba,
                Node::Split { feature, threshold, left, right } => {
                    at = if x[*feature] <= *threshold { *left } else { *right };
                }
            }
        }
    }

    fn hash_into(&self, h: &mut Fnv1a) {
        for node in &self.nodes {
            match node {
                Node::Split { feature, threshold, left, right } => {
                    h.write(b"S");
                    h.write_u64(*feature as u64);
                    h.write_f64(*threshold);
                    h.write_u64(*left as u64);
                    h.write_u64(*right as u64);
                }
                Node::Leaf { proba } => {
                    h.write(b"L");
                    proba.iter().for_each(|&p| h.write_f64(p));
                }
            }
        }
    }
}

/// Bootstrap-aggregated trees with `⌊√D⌋` candidate features per split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomForest {
    pub trees: Vec<Tree>,
}

impl RandomForest {
    pub fn fit(x: &[Vec<f64>], y: &[usize], n_trees: usize, seed: u64) -> Self {
        let n = x.len();
        let max_features = ((x[0].len() as f64).sqrt() as usize).max(1);
        let mut master = ChaCha8Rng::seed_from_u64(seed);
        let trees = (0..n_trees)
            .map(|_| {
                let mut rng = ChaCha8Rng::seed_from_u64(master.next_u64());
                let sample: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
                Tree::fit(x, y, sample, max_features, &mut rng)
            })
            .collect();
        Self { trees }
    }

    /// Mean of the per-tree leaf distributions.
    pub fn predict_proba(&self, x: &[f64]) -> Simplex {
        let mut p = [0.0; N_CLASSES];
        for t in &self.trees {
            for (acc, v) in p.iter_mut().zip(t.predict_proba(x)) {
                *acc += v;
            }
        }
        p.map(|v| v / self.trees.len() as f64)
    }

    /// FNV-1a over every split and leaf record.
    pub fn digest(&self) -> u64 {
        let mut h = Fnv1a::new();
        for t in &self.trees {
            h.write(b"T");
            t.hash_into(&mut h);
        }
        h.finish()
    }
}
