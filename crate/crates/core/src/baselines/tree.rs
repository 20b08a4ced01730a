use serde::{Deserialize, Serialize};

use super::BaselineError;
use crate::canbus::Label;
use crate::ingest::FeatureVector;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TreeNode {
    Leaf {
        label: Label,
        /// `[normal, attack]` training rows reaching this leaf.
        counts: [usize; 2],
    },
    Split {
        feature: usize,
        /// Rows with `x[feature] <= threshold` go left.
        threshold: f64,
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeConfig {
    pub max_depth: usize,
    pub min_leaf: usize,
}

impl Default for TreeConfig {
    fn default() -> Self {
        Self { max_depth: 12, min_leaf: 1 }
    }
}

fn majority(counts: [usize; 2]) -> Label {
    if counts[1] >= counts[0] {
        Label::Attack
    } else {
        Label::Normal
    }
}

/// `n · gini` for a node with the given class counts.
fn weighted_gini(c: [usize; 2]) -> f64 {
    let n = (c[0] + c[1]) as f64;
    if n == 0.0 {
        return 0.0;
    }
    n - (c[0] * c[0] + c[1] * c[1]) as f64 / n
}

struct Builder<'a, S> {
    x: &'a [S],
    y: &'a [Label],
    cfg: TreeConfig,
    dim: usize,
}

impl<S: AsRef<[f64]>> Builder<'_, S> {
    fn counts(&self, idx: &[usize]) -> [usize; 2] {
        let mut c = [0; 2];
        for &i in idx {
            c[self.y[i].index()] += 1;
        }
        c
    }

    fn best_split(&self, idx: &[usize]) -> Option<(usize, f64)> {
        let total = self.counts(idx);
        let mut best: Option<(f64, usize, f64)> = None;
        let mut sorted = idx.to_vec();
        for f in 0..self.dim {
            let val = |i: usize| self.x[i].as_ref()[f];
            sorted.sort_by(|&a, &b| val(a).total_cmp(&val(b)).then(a.cmp(&b)));
            let mut left = [0usize; 2];
            for pos in 0..sorted.len() - 1 {
                left[self.y[sorted[pos]].index()] += 1;
                let (a, b) = (val(sorted[pos]), val(sorted[pos + 1]));
                if a == b {
                    continue;
                }
                let n_left = pos + 1;
                if n_left < self.cfg.min_leaf || sorted.len() - n_left < self.cfg.min_leaf {
                    continue;
                }
                let right = [total[0] - left[0], total[1] - left[1]];
                let score = weighted_gini(left) + weighted_gini(right);
                let mut threshold = a + (b - a) / 2.0;
                if threshold >= b {
                    threshold = a;
                }
                if best.is_none_or(|(s, _, _)| score < s - 1e-12) {
                    best = Some((score, f, threshold));
                }
            }
        }
        best.map(|(_, f, t)| (f, t))
    }

    fn grow(&self, idx: &[usize], depth: usize) -> TreeNode {
        let counts = self.counts(idx);
        let leaf = TreeNode::Leaf { label: majority(counts), counts };
        if counts[0] == 0 || counts[1] == 0 || depth >= self.cfg.max_depth || idx.len() < 2 * self.cfg.min_leaf.max(1) {
            return leaf;
        }
        let Some((feature, threshold)) = self.best_split(idx) else { return leaf };
        let (l, r): (Vec<usize>, Vec<usize>) = idx.iter().partition(|&&i| self.x[i].as_ref()[feature] <= threshold);
        TreeNode::Split { feature, threshold, left: Box::new(self.grow(&l, depth + 1)), right: Box::new(self.grow(&r, depth + 1)) }
    }
}

/// Greedy CART growth on weighted Gini impurity. Candidate thresholds are
/// midpoints between consecutive distinct values; equal scores keep the lower
/// feature, then the lower threshold.
pub fn tree_fit_rows<S: AsRef<[f64]>>(x: &[S], y: &[Label], cfg: TreeConfig) -> Result<TreeNode, BaselineError> {
    if x.is_empty() {
        return Err(BaselineError::EmptyTrainingSet);
    }
    if x.len() != y.len() {
        return Err(BaselineError::DimensionMismatch { expected: x.len(), got: y.len() });
    }
    let dim = x[0].as_ref().len();
    if let Some(r) = x.iter().find(|r| r.as_ref().len() != dim) {
        return Err(BaselineError::DimensionMismatch { expected: dim, got: r.as_ref().len() });
    }
    if x.iter().any(|r| r.as_ref().iter().any(|v| !v.is_finite())) {
        return Err(BaselineError::InvalidArgument("non-finite feature value".into()));
    }
    let b = Builder { x, y, cfg, dim };
    let idx: Vec<usize> = (0..x.len()).collect();
    Ok(b.grow(&idx, 0))
}

pub fn tree_fit(train: &[FeatureVector], max_depth: usize, min_leaf: usize) -> Result<TreeNode, BaselineError> {
    let x: Vec<&[f64]> = train.iter().map(|fv| &fv.x[..]).collect();
    let y: Vec<Label> = train.iter().map(|fv| fv.y).collect();
    tree_fit_rows(&x, &y, TreeConfig { max_depth, min_leaf })
}

impl TreeNode {
    /// Label and `[normal, attack]` counts of the leaf `x` falls into.
    pub fn leaf_for(&self, x: &[f64]) -> (Label, [usize; 2]) {
        let mut node = self;
        loop {
            match node {
                TreeNode::Leaf { label, counts } => return (*label, *counts),
                TreeNode::Split { feature, threshold, left, right } => {
                    node = if x[*feature] <= *threshold { left } else { right };
                }
            }
        }
    }

    pub fn predict(&self, x: &[f64]) -> Label {
        self.leaf_for(x).0
    }

    /// Attack share of the training rows in the reached leaf.
    pub fn attack_score(&self, x: &[f64]) -> f64 {
        let (_, c) = self.leaf_for(x);
        c[1] as f64 / (c[0] + c[1]).max(1) as f64
    }

    pub fn depth(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 0,
            TreeNode::Split { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }

    pub fn leaves(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 1,
            TreeNode::Split { left, right, .. } => left.leaves() + right.leaves(),
        }
    }
}

pub fn tree_predict(tree: &TreeNode, x: &[f64]) -> Label {
    tree.predict(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn accuracy<S: AsRef<[f64]>>(t: &TreeNode, x: &[S], y: &[Label]) -> f64 {
        x.iter().zip(y).filter(|(r, l)| t.predict(r.as_ref()) == **l).count() as f64 / x.len() as f64
    }

    #[test]
    fn single_class_is_a_leaf() {
        let t = tree_fit_rows(&[[0.1], [0.5], [0.9]], &[Label::Normal; 3], TreeConfig::default()).unwrap();
        assert_eq!(t, TreeNode::Leaf { label: Label::Normal, counts: [3, 0] });
    }

    #[test]
    fn one_dimensional_split() {
        let t = tree_fit_rows(&[[0.0], [1.0]], &[Label::Normal, Label::Attack], TreeConfig::default()).unwrap();
        match &t {
            TreeNode::Split { feature: 0, threshold, .. } => assert_eq!(*threshold, 0.5),
            other => panic!("{other:?}"),
        }
        assert_eq!(accuracy(&t, &[[0.0], [1.0]], &[Label::Normal, Label::Attack]), 1.0);
    }

    #[test]
    fn xor_needs_depth_two() {
        let x = [[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0]];
        let y = [Label::Normal, Label::Attack, Label::Attack, Label::Normal];
        let d2 = tree_fit_rows(&x, &y, TreeConfig { max_depth: 2, min_leaf: 1 }).unwrap();
        assert_eq!(accuracy(&d2, &x, &y), 1.0);
        let d1 = tree_fit_rows(&x, &y, TreeConfig { max_depth: 1, min_leaf: 1 }).unwrap();
        assert!(accuracy(&d1, &x, &y) <= 0.5);
        // Every depth-1 stump on these four points is at best 50% accurate.
        for f in 0..2 {
            for t in [-0.5, 0.5, 1.5] {
                for (l, r) in [
                    (Label::Normal, Label::Attack),
                    (Label::Attack, Label::Normal),
                    (Label::Normal, Label::Normal),
                    (Label::Attack, Label::Attack),
                ] {
                    let hits = x.iter().zip(&y).filter(|(p, lab)| (if p[f] <= t { l } else { r }) == **lab).count();
                    assert!(hits <= 2);
                }
            }
        }
    }

    #[test]
    fn depth_monotonic_and_leaf_routing() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x: Vec<Vec<f64>> = (0..300).map(|_| (0..4).map(|_| rng.gen_range(0.0..1.0)).collect()).collect();
        let y: Vec<Label> =
            x.iter().map(|r| if (r[0] - 0.5) * (r[1] - 0.3) + 0.05 * r[2] > 0.0 { Label::Attack } else { Label::Normal }).collect();
        let mut prev = 0.0;
        for depth in 0..10 {
            let t = tree_fit_rows(&x, &y, TreeConfig { max_depth: depth, min_leaf: 1 }).unwrap();
            assert!(t.depth() <= depth);
            let acc = accuracy(&t, &x, &y);
            assert!(acc >= prev, "depth {depth}: {acc} < {prev}");
            prev = acc;
            let mut routed = 0;
            fn total(n: &TreeNode, acc: &mut usize) {
                match n {
                    TreeNode::Leaf { counts, .. } => *acc += counts[0] + counts[1],
                    TreeNode::Split { left, right, .. } => {
                        total(left, acc);
                        total(right, acc);
                    }
                }
            }
            total(&t, &mut routed);
            assert_eq!(routed, 300);
        }
    }

    #[test]
    fn min_leaf_is_respected() {
        let x: Vec<[f64; 1]> = (0..10).map(|i| [i as f64]).collect();
        let y: Vec<Label> = (0..10).map(|i| if i == 9 { Label::Attack } else { Label::Normal }).collect();
        let t = tree_fit_rows(&x, &y, TreeConfig { max_depth: 5, min_leaf: 3 }).unwrap();
        fn smallest(n: &TreeNode) -> usize {
            match n {
                TreeNode::Leaf { counts, .. } => counts[0] + counts[1],
                TreeNode::Split { left, right, .. } => smallest(left).min(smallest(right)),
            }
        }
        assert!(smallest(&t) >= 3);
    }

    #[test]
    fn empty_is_an_error() {
        let x: Vec<Vec<f64>> = vec![];
        assert_eq!(tree_fit_rows(&x, &[], TreeConfig::default()), Err(BaselineError::EmptyTrainingSet));
    }
}
