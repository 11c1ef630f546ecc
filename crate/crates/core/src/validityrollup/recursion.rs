//! Timing model for aggregating per-transaction proofs in a binary tree,
//! where each internal node proves the verification of its two children.

use serde::{Deserialize, Serialize};

use super::ValidityError;

/// Time to prove the verification of a child proof that took `child` seconds.
pub trait ProverModel {
    fn verify_time(&self, child: f64) -> f64;
}

/// `c · log2(1 + t)^2`, clamped so a parent never takes longer than its
/// slowest child.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolyLogModel {
    pub c: f64,
}

impl Default for PolyLogModel {
    fn default() -> Self {
        Self { c: 0.5 }
    }
}

impl ProverModel for PolyLogModel {
    fn verify_time(&self, child: f64) -> f64 {
        (self.c * (1.0 + child).log2().powi(2)).min(child)
    }
}

impl<F: Fn(f64) -> f64> ProverModel for F {
    fn verify_time(&self, child: f64) -> f64 {
        self(child)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum AggregationNode {
    Leaf { index: usize, time: f64 },
    Internal { left: Box<AggregationNode>, right: Box<AggregationNode>, time: f64 },
}

impl AggregationNode {
    /// Own proving time.
    pub fn time(&self) -> f64 {
        match self {
            AggregationNode::Leaf { time, .. } | AggregationNode::Internal { time, .. } => *time,
        }
    }

    pub fn leaves(&self) -> usize {
        match self {
            AggregationNode::Leaf { .. } => 1,
            AggregationNode::Internal { left, right, .. } => left.leaves() + right.leaves(),
        }
    }

    /// Completion time when all leaves start together and every node waits
    /// for both children.
    pub fn critical_path(&self) -> f64 {
        match self {
            AggregationNode::Leaf { time, .. } => *time,
            AggregationNode::Internal { left, right, time } => left.critical_path().max(right.critical_path()) + time,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregation {
    pub tree: AggregationNode,
    pub t_tree: f64,
    pub t_sequential: f64,
    /// Slowest node per level, leaves first.
    pub level_times: Vec<f64>,
}

/// Pairs proofs level by level; an odd proof out is carried up unchanged.
pub fn aggregate_recursive(leaf_times: &[f64], model: &dyn ProverModel) -> Result<Aggregation, ValidityError> {
    if leaf_times.is_empty() {
        return Err(ValidityError::NoLeaves);
    }
    let mut level: Vec<AggregationNode> =
        leaf_times.iter().enumerate().map(|(index, &time)| AggregationNode::Leaf { index, time }).collect();
    let t_max = leaf_times.iter().copied().fold(0.0, f64::max);
    let mut level_times = vec![t_max];
    while level.len() > 1 {
        let mut next = Vec::with_capacity(level.len().div_ceil(2));
        let mut slowest: f64 = 0.0;
        let mut it = level.into_iter();
        while let Some(left) = it.next() {
            match it.next() {
                Some(right) => {
                    let time = model.verify_time(left.time().max(right.time()));
                    slowest = slowest.max(time);
                    next.push(AggregationNode::Internal { left: Box::new(left), right: Box::new(right), time });
                }
                None => next.push(left),
            }
        }
        level_times.push(slowest);
        level = next;
    }
    let tree = level.pop().expect("one root");
    let t_tree = tree.critical_path();
    let k = leaf_times.len() as u64;
    let depth = if k <= 1 { 0 } else { 64 - (k - 1).leading_zeros() };
    assert!(t_tree <= (depth as f64 + 1.0) * t_max + 1e-9, "tree time exceeds the depth bound");
    Ok(Aggregation { tree, t_tree, t_sequential: leaf_times.iter().sum(), level_times })
}
