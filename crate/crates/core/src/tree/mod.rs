//! Locally growing random tree of local GP experts.
//!
//! Leaves are exact [`LocalGp`] models holding at most `max_local_data`
//! points. When a full leaf receives a point and the leaf budget allows it,
//! the leaf splits at the median of its widest input dimension. Internal
//! nodes route with a linear gate that saturates outside an overlap band;
//! training points are routed stochastically by the gate, predictions are
//! the gate-weighted mixture of the leaf means.

mod rng;

pub use rng::TreeRng;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gp::{Hyperparameters, LocalGp};

pub const DEFAULT_OVERLAP_RATIO: f64 = 0.1;
/// Lower bound on the overlap band so the gate stays well defined when all
/// points of a leaf share one coordinate.
pub const MIN_OVERLAP_WIDTH: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeConfig {
    /// "Max. Local GP Quantity".
    pub max_leaves: usize,
    /// "Max. Local Data Quantity".
    pub max_local_data: usize,
    #[serde(default = "default_overlap_ratio")]
    pub overlap_ratio: f64,
    #[serde(default)]
    pub rng_seed: u64,
    pub hp: Hyperparameters,
}

fn default_overlap_ratio() -> f64 {
    DEFAULT_OVERLAP_RATIO
}

impl TreeConfig {
    pub fn new(hp: Hyperparameters, max_leaves: usize, max_local_data: usize) -> Self {
        TreeConfig {
            max_leaves,
            max_local_data,
            overlap_ratio: DEFAULT_OVERLAP_RATIO,
            rng_seed: 0,
            hp,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.rng_seed = seed;
        self
    }

    pub fn with_overlap_ratio(mut self, ratio: f64) -> Self {
        self.overlap_ratio = ratio;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.hp.validate()?;
        if self.max_leaves < 1 {
            return Err(Error::InvalidConfig("max_leaves must be at least 1".into()));
        }
        if self.max_local_data < 2 {
            return Err(Error::InvalidConfig("max_local_data must be at least 2".into()));
        }
        if !(self.overlap_ratio > 0.0 && self.overlap_ratio < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "overlap_ratio must lie in (0, 1), got {}",
                self.overlap_ratio
            )));
        }
        Ok(())
    }

    /// Upper bound on the number of stored training points.
    pub fn capacity(&self) -> usize {
        self.max_leaves.saturating_mul(self.max_local_data)
    }
}

pub type NodeId = usize;

/// Gating parameters of an internal node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Split {
    pub dim: usize,
    pub value: f64,
    pub overlap_width: f64,
    pub left: NodeId,
    pub right: NodeId,
}

impl Split {
    /// Probability of routing `x` to the left child.
    pub fn gate_left(&self, x: &[f64]) -> f64 {
        gate_left(self.value, self.overlap_width, x[self.dim])
    }
}

/// `clamp(0.5 + (split_value - coord) / overlap_width, 0, 1)`.
pub fn gate_left(split_value: f64, overlap_width: f64, coord: f64) -> f64 {
    (0.5 + (split_value - coord) / overlap_width).clamp(0.0, 1.0)
}

#[derive(Debug, Clone)]
pub enum TreeNode {
    Leaf(LocalGp),
    Internal(Split),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct InsertOutcome {
    pub stored: bool,
    pub split_occurred: bool,
    pub leaf_id: Option<NodeId>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeStats {
    pub leaves: usize,
    pub stored_points: usize,
    pub depth: usize,
}

/// Arena-backed binary tree; node 0 is the root.
#[derive(Debug, Clone)]
pub struct LogGpTree {
    cfg: TreeConfig,
    nodes: Vec<TreeNode>,
    rng: TreeRng,
    leaves: usize,
    stored: usize,
}

const ROOT: NodeId = 0;

impl LogGpTree {
    pub fn new(cfg: TreeConfig) -> Result<Self> {
        cfg.validate()?;
        let root = LocalGp::empty(cfg.hp.clone())?;
        Ok(LogGpTree {
            rng: TreeRng::new(cfg.rng_seed),
            nodes: vec![TreeNode::Leaf(root)],
            leaves: 1,
            stored: 0,
            cfg,
        })
    }

    pub fn config(&self) -> &TreeConfig {
        &self.cfg
    }

    pub fn node(&self, id: NodeId) -> Option<&TreeNode> {
        self.nodes.get(id)
    }

    pub fn root(&self) -> NodeId {
        ROOT
    }

    pub fn leaf_ids(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.nodes
            .iter()
            .enumerate()
            .filter_map(|(id, n)| matches!(n, TreeNode::Leaf(_)).then_some(id))
    }

    pub fn leaf(&self, id: NodeId) -> Option<&LocalGp> {
        match self.nodes.get(id) {
            Some(TreeNode::Leaf(m)) => Some(m),
            _ => None,
        }
    }

    /// Back to a single empty leaf with the generator re-seeded from the config.
    pub fn reset(&mut self) {
        let root = LocalGp::empty(self.cfg.hp.clone()).expect("config validated at construction");
        self.nodes.clear();
        self.nodes.push(TreeNode::Leaf(root));
        self.rng = TreeRng::new(self.cfg.rng_seed);
        self.leaves = 1;
        self.stored = 0;
    }

    pub fn stats(&self) -> TreeStats {
        let mut depth = 0;
        let mut stack = vec![(ROOT, 0usize)];
        while let Some((id, d)) = stack.pop() {
            match &self.nodes[id] {
                TreeNode::Leaf(_) => depth = depth.max(d),
                TreeNode::Internal(s) => {
                    stack.push((s.left, d + 1));
                    stack.push((s.right, d + 1));
                }
            }
        }
        TreeStats {
            leaves: self.leaves,
            stored_points: self.stored,
            depth,
        }
    }

    fn check_sample(&self, x: &[f64], y: &[f64]) -> Result<()> {
        self.cfg.hp.check_input(x)?;
        self.cfg.hp.check_output(y)?;
        if x.iter().chain(y).any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("training points must be finite".into()));
        }
        Ok(())
    }

    /// Walks from `from` to a leaf, drawing from the tree generator at every
    /// internal node whose gate lies strictly between 0 and 1.
    fn route(&mut self, from: NodeId, x: &[f64]) -> NodeId {
        let mut id = from;
        while let TreeNode::Internal(split) = &self.nodes[id] {
            let split = *split;
            id = if self.rng.go_left(split.gate_left(x)) {
                split.left
            } else {
                split.right
            };
        }
        id
    }

    pub fn insert(&mut self, x: &[f64], y: &[f64]) -> Result<InsertOutcome> {
        self.check_sample(x, y)?;
        let mut split_occurred = false;
        let mut from = ROOT;
        loop {
            let leaf = self.route(from, x);
            let TreeNode::Leaf(model) = &mut self.nodes[leaf] else {
                unreachable!("route ends at a leaf")
            };
            if model.len() < self.cfg.max_local_data {
                model.add_point(x, y)?;
                self.stored += 1;
                return Ok(InsertOutcome {
                    stored: true,
                    split_occurred,
                    leaf_id: Some(leaf),
                });
            }
            if self.leaves >= self.cfg.max_leaves {
                // split_occurred can only be set here if a split sent every
                // point of the leaf to the same child and used the last leaf slot
                return Ok(InsertOutcome {
                    stored: false,
                    split_occurred,
                    leaf_id: None,
                });
            }
            self.split_leaf(leaf)?;
            split_occurred = true;
            from = leaf;
        }
    }

    /// Turns a full leaf into an internal node with two freshly fitted children.
    pub fn split_leaf(&mut self, leaf: NodeId) -> Result<()> {
        let model = match self.nodes.get(leaf) {
            Some(TreeNode::Leaf(m)) => m,
            _ => return Err(Error::Internal(format!("node {leaf} is not a leaf"))),
        };
        if model.len() != self.cfg.max_local_data {
            return Err(Error::Internal(format!(
                "leaf {leaf} holds {} points, split requires exactly {}",
                model.len(),
                self.cfg.max_local_data
            )));
        }
        if self.leaves >= self.cfg.max_leaves {
            return Err(Error::Internal("leaf budget exhausted".into()));
        }

        let d_in = self.cfg.hp.d_in;
        let mut lo = vec![f64::INFINITY; d_in];
        let mut hi = vec![f64::NEG_INFINITY; d_in];
        for (x, _) in model.points() {
            for d in 0..d_in {
                lo[d] = lo[d].min(x[d]);
                hi[d] = hi[d].max(x[d]);
            }
        }
        let mut dim = 0;
        let mut spread = hi[0] - lo[0];
        for d in 1..d_in {
            if hi[d] - lo[d] > spread {
                dim = d;
                spread = hi[d] - lo[d];
            }
        }
        let mut coords: Vec<f64> = model.points().map(|(x, _)| x[dim]).collect();
        let value = median(&mut coords);
        let overlap_width = (self.cfg.overlap_ratio * spread).max(MIN_OVERLAP_WIDTH);

        let mut left = (Vec::new(), Vec::new());
        let mut right = (Vec::new(), Vec::new());
        let points: Vec<(Vec<f64>, Vec<f64>)> = model.points().map(|(x, y)| (x.to_vec(), y.to_vec())).collect();
        for (x, y) in points {
            let side = if self.rng.go_left(gate_left(value, overlap_width, x[dim])) {
                &mut left
            } else {
                &mut right
            };
            side.0.push(x);
            side.1.push(y);
        }

        let left_model = self.fit_child(&left.0, &left.1)?;
        let right_model = self.fit_child(&right.0, &right.1)?;
        let left_id = self.nodes.len();
        self.nodes.push(TreeNode::Leaf(left_model));
        self.nodes.push(TreeNode::Leaf(right_model));
        self.nodes[leaf] = TreeNode::Internal(Split {
            dim,
            value,
            overlap_width,
            left: left_id,
            right: left_id + 1,
        });
        self.leaves += 1;
        Ok(())
    }

    fn fit_child(&self, xs: &[Vec<f64>], ys: &[Vec<f64>]) -> Result<LocalGp> {
        if xs.is_empty() {
            LocalGp::empty(self.cfg.hp.clone())
        } else {
            LocalGp::fit(xs, ys, self.cfg.hp.clone())
        }
    }

    /// Path weight of every leaf (empty leaves included): the product of the
    /// gate probabilities from the root down to the leaf.
    pub fn leaf_weights(&self, x: &[f64]) -> Result<Vec<(NodeId, f64)>> {
        self.cfg.hp.check_input(x)?;
        let mut out = Vec::with_capacity(self.leaves);
        let mut stack = vec![(ROOT, 1.0)];
        while let Some((id, w)) = stack.pop() {
            match &self.nodes[id] {
                TreeNode::Leaf(_) => out.push((id, w)),
                TreeNode::Internal(s) => {
                    let g = s.gate_left(x);
                    stack.push((s.right, w * (1.0 - g)));
                    stack.push((s.left, w * g));
                }
            }
        }
        Ok(out)
    }

    /// Gate-weighted mixture of the non-empty leaves' posterior means; the
    /// zero vector when no non-empty leaf has positive weight.
    pub fn predict(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.cfg.hp.check_input(x)?;
        let d_out = self.cfg.hp.d_out;
        let mut acc = vec![0.0; d_out];
        let mut total = 0.0;
        let mut stack = vec![(ROOT, 1.0)];
        while let Some((id, w)) = stack.pop() {
            if w <= 0.0 {
                continue;
            }
            match &self.nodes[id] {
                TreeNode::Leaf(m) if !m.is_empty() => {
                    let mu = m.predict_mean(x)?;
                    for (a, v) in acc.iter_mut().zip(mu) {
                        *a += w * v;
                    }
                    total += w;
                }
                TreeNode::Leaf(_) => {}
                TreeNode::Internal(s) => {
                    let g = s.gate_left(x);
                    stack.push((s.right, w * (1.0 - g)));
                    stack.push((s.left, w * g));
                }
            }
        }
        if total > 0.0 {
            for a in &mut acc {
                *a /= total;
            }
        }
        Ok(acc)
    }
}

/// Median of a non-empty slice; even counts take the midpoint of the two middle order statistics.
fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}
