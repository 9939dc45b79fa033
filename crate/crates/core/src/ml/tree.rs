use serde::{Deserialize, Serialize};

use super::{Matrix, MlError};
use crate::dataset::mean;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TreeHyper {
    /// `None` grows until leaves are pure or too small to split.
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
}

impl Default for TreeHyper {
    fn default() -> Self {
        Self {
            max_depth: Some(8),
            min_samples_leaf: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        value: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeModel {
    /// Node 0 is the root.
    pub nodes: Vec<Node>,
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
}

impl TreeModel {
    pub fn predict_row(&self, x: &[f64]) -> f64 {
        let mut at = 0;
        loop {
            match self.nodes[at] {
                Node::Leaf { value } => return value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    at = if x[feature] <= threshold { left } else { right };
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], at: usize) -> usize {
            match nodes[at] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, left).max(walk(nodes, right)),
            }
        }
        walk(&self.nodes, 0)
    }

    pub fn leaf_count(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, Node::Leaf { .. }))
            .count()
    }
}

fn sse(y: &[f64], idx: &[usize]) -> f64 {
    let vals: Vec<f64> = idx.iter().map(|&i| y[i]).collect();
    let m = mean(&vals);
    vals.iter().map(|v| (v - m) * (v - m)).sum()
}

struct BestSplit {
    feature: usize,
    threshold: f64,
    gain: f64,
}

fn best_split(
    x: &Matrix,
    y: &[f64],
    idx: &[usize],
    min_leaf: usize,
    parent_sse: f64,
) -> Option<BestSplit> {
    let n = idx.len();
    let vals: Vec<f64> = idx.iter().map(|&i| y[i]).collect();
    let centre = mean(&vals);
    let mut best: Option<BestSplit> = None;
    let mut order = idx.to_vec();
    for f in 0..x.cols() {
        order.sort_by(|&a, &b| x.get(a, f).total_cmp(&x.get(b, f)));
        // prefix sums of centred targets keep the SSE difference well conditioned
        let total: f64 = order.iter().map(|&i| y[i] - centre).sum();
        let total_sq: f64 = order.iter().map(|&i| (y[i] - centre).powi(2)).sum();
        let (mut s, mut sq) = (0.0, 0.0);
        for k in 0..n - 1 {
            let d = y[order[k]] - centre;
            s += d;
            sq += d * d;
            let (lo, hi) = (x.get(order[k], f), x.get(order[k + 1], f));
            let n_left = k + 1;
            if lo == hi || n_left < min_leaf || n - n_left < min_leaf {
                continue;
            }
            let left = sq - s * s / n_left as f64;
            let (rs, rsq) = (total - s, total_sq - sq);
            let right = rsq - rs * rs / (n - n_left) as f64;
            let gain = parent_sse - left - right;
            if gain > parent_sse * 1e-12 && best.as_ref().is_none_or(|b| gain > b.gain) {
                let mut threshold = 0.5 * lo + 0.5 * hi;
                if threshold >= hi {
                    threshold = lo;
                }
                best = Some(BestSplit {
                    feature: f,
                    threshold,
                    gain,
                });
            }
        }
    }
    best
}

/// Greedy CART regression tree. Candidate thresholds are midpoints of
/// consecutive distinct values; ties go to the lower feature index, then the
/// lower threshold.
pub fn fit_tree(x: &Matrix, y: &[f64], hyper: &TreeHyper) -> Result<TreeModel, MlError> {
    let n = x.rows();
    if y.len() != n {
        return Err(MlError::Dimension {
            expected: n,
            got: y.len(),
        });
    }
    if hyper.min_samples_leaf == 0 {
        return Err(MlError::Domain(
            "min_samples_leaf must be at least 1".into(),
        ));
    }
    if n == 0 || n < hyper.min_samples_leaf {
        return Err(MlError::Domain(format!(
            "tree needs at least {} rows, got {n}",
            hyper.min_samples_leaf.max(1)
        )));
    }
    let mut nodes = Vec::new();
    grow(x, y, (0..n).collect(), 0, hyper, &mut nodes);
    Ok(TreeModel {
        nodes,
        max_depth: hyper.max_depth,
        min_samples_leaf: hyper.min_samples_leaf,
    })
}

fn grow(
    x: &Matrix,
    y: &[f64],
    idx: Vec<usize>,
    depth: usize,
    hyper: &TreeHyper,
    nodes: &mut Vec<Node>,
) -> usize {
    let at = nodes.len();
    let vals: Vec<f64> = idx.iter().map(|&i| y[i]).collect();
    nodes.push(Node::Leaf { value: mean(&vals) });
    if hyper.max_depth.is_some_and(|d| depth >= d) || idx.len() < 2 * hyper.min_samples_leaf {
        return at;
    }
    let parent_sse = sse(y, &idx);
    if parent_sse <= 0.0 {
        return at;
    }
    let Some(split) = best_split(x, y, &idx, hyper.min_samples_leaf, parent_sse) else {
        return at;
    };
    let (l, r): (Vec<usize>, Vec<usize>) = idx
        .iter()
        .partition(|&&i| x.get(i, split.feature) <= split.threshold);
    let left = grow(x, y, l, depth + 1, hyper, nodes);
    let right = grow(x, y, r, depth + 1, hyper, nodes);
    nodes[at] = Node::Split {
        feature: split.feature,
        threshold: split.threshold,
        left,
        right,
    };
    at
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn unlimited() -> TreeHyper {
        TreeHyper {
            max_depth: None,
            min_samples_leaf: 1,
        }
    }

    #[test]
    fn pure_targets_single_leaf() {
        let x = Matrix::from_rows(&[[1.0], [2.0], [3.0], [4.0]]);
        let t = fit_tree(&x, &[0.3; 4], &unlimited()).unwrap();
        assert_eq!(t.nodes, vec![Node::Leaf { value: 0.3 }]);
    }

    #[test]
    fn step_function_split_at_midpoint() {
        let xs = [-2.0, -1.5, -0.5, 0.0, 0.5, 3.0];
        let rows: Vec<[f64; 1]> = xs.iter().map(|&v| [v]).collect();
        let y: Vec<f64> = xs
            .iter()
            .map(|&v| if v < 0.0 { -1.0 } else { 1.0 })
            .collect();
        let x = Matrix::from_rows(&rows);
        let t = fit_tree(&x, &y, &unlimited()).unwrap();

        // brute force over every candidate threshold
        let mut best = (f64::INFINITY, 0.0);
        for w in 0..xs.len() - 1 {
            let th = 0.5 * (xs[w] + xs[w + 1]);
            let (l, r): (Vec<_>, Vec<_>) = (0..xs.len()).partition(|&i| xs[i] <= th);
            let cost = sse(&y, &l) + sse(&y, &r);
            if cost < best.0 {
                best = (cost, th);
            }
        }
        assert_eq!(best.1, -0.25);
        match t.nodes[0] {
            Node::Split {
                feature,
                threshold,
                left,
                right,
            } => {
                assert_eq!((feature, threshold), (0, best.1));
                assert_eq!(t.nodes[left], Node::Leaf { value: -1.0 });
                assert_eq!(t.nodes[right], Node::Leaf { value: 1.0 });
            }
            ref other => panic!("{other:?}"),
        }
    }

    #[test]
    fn ties_prefer_lower_feature() {
        // both columns separate the targets identically
        let x = Matrix::from_rows(&[[0.0, 0.0], [1.0, 1.0], [2.0, 2.0], [3.0, 3.0]]);
        let t = fit_tree(&x, &[0.0, 0.0, 1.0, 1.0], &unlimited()).unwrap();
        assert!(
            matches!(t.nodes[0], Node::Split { feature: 0, threshold, .. } if threshold == 1.5)
        );
    }

    #[test]
    fn depth_and_leaf_limits() {
        let rows: Vec<[f64; 1]> = (0..64).map(|i| [i as f64]).collect();
        let y: Vec<f64> = (0..64).map(|i| ((i * 37) % 11) as f64).collect();
        let x = Matrix::from_rows(&rows);
        let t = fit_tree(
            &x,
            &y,
            &TreeHyper {
                max_depth: Some(3),
                min_samples_leaf: 5,
            },
        )
        .unwrap();
        assert!(t.depth() <= 3);
        assert!(t.leaf_count() <= 8);
        assert!(fit_tree(
            &x,
            &y[..],
            &TreeHyper {
                max_depth: None,
                min_samples_leaf: 0
            }
        )
        .is_err());
        let few = Matrix::from_rows(&rows[..3]);
        assert!(fit_tree(
            &few,
            &y[..3],
            &TreeHyper {
                max_depth: None,
                min_samples_leaf: 4
            }
        )
        .is_err());
    }

    fn check_node(
        t: &TreeModel,
        x: &Matrix,
        y: &[f64],
        at: usize,
        idx: Vec<usize>,
    ) -> Result<(), TestCaseError> {
        let vals: Vec<f64> = idx.iter().map(|&i| y[i]).collect();
        match t.nodes[at] {
            Node::Leaf { value } => prop_assert_eq!(value, mean(&vals)),
            Node::Split {
                feature,
                threshold,
                left,
                right,
            } => {
                let (l, r): (Vec<usize>, Vec<usize>) =
                    idx.iter().partition(|&&i| x.get(i, feature) <= threshold);
                prop_assert!(!l.is_empty() && !r.is_empty());
                prop_assert!(l.len() >= t.min_samples_leaf && r.len() >= t.min_samples_leaf);
                prop_assert!(sse(y, &l) + sse(y, &r) < sse(y, &idx));
                check_node(t, x, y, left, l)?;
                check_node(t, x, y, right, r)?;
            }
        }
        Ok(())
    }

    proptest! {
        #[test]
        fn splits_reduce_error_and_leaves_are_means(
            rows in prop::collection::vec(prop::array::uniform2(-5i32..5), 2..80),
            ys in prop::collection::vec(-3.0f64..3.0, 80),
            leaf in 1usize..6,
        ) {
            let rows: Vec<[f64; 2]> = rows.iter().map(|r| [r[0] as f64, r[1] as f64]).collect();
            let x = Matrix::from_rows(&rows);
            let y = &ys[..rows.len()];
            prop_assume!(rows.len() >= leaf);
            let t = fit_tree(&x, y, &TreeHyper { max_depth: Some(6), min_samples_leaf: leaf }).unwrap();
            check_node(&t, &x, y, 0, (0..rows.len()).collect())?;
        }

        #[test]
        fn unlimited_tree_memorizes_distinct_rows(
            xs in prop::collection::btree_set(-1000i32..1000, 2..60),
            ys in prop::collection::vec(-1.0f64..1.0, 60),
        ) {
            let rows: Vec<[f64; 1]> = xs.iter().map(|&v| [v as f64 / 10.0]).collect();
            let x = Matrix::from_rows(&rows);
            let y = &ys[..rows.len()];
            let t = fit_tree(&x, y, &unlimited()).unwrap();
            for (r, v) in rows.iter().zip(y) {
                prop_assert_eq!(t.predict_row(r), *v);
            }
        }
    }
}
