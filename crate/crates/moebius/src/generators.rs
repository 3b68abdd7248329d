//! Deterministic constructors for test antipodal spaces and random certified
//! points: discrete spaces, cyclic chord kernels, dendrogram ultrametrics,
//! snowflaked quasi-metrics with a prescribed constant, and seeded random
//! members via antipodalization.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::{antipodalize, FlowConfig};
use crate::matrix::SquareMatrix;
use crate::rng::SplitMix64;
use crate::space::{AntipodalSpace, MoebiusPoint, Tolerances};

/// The discrete space: all off-diagonal entries 1. Ultrametric with K = 1;
/// n = 3 is the tripod space.
pub fn gen_discrete(n: usize) -> Result<AntipodalSpace> {
    if n < 2 {
        return Err(Error::Argument(format!(
            "discrete space needs n >= 2, got {n}"
        )));
    }
    let rho = SquareMatrix::from_fn(n, |i, j| if i == j { 0.0 } else { 1.0 });
    AntipodalSpace::with_default_labels(rho, &Tolerances::default())
}

/// The cyclic chord kernel on n equally spaced points: `sin(pi d / n)` for
/// cyclic distance d, with exact antipodes at d = n/2. A metric, so K <= 2.
pub fn gen_circle(n: usize) -> Result<AntipodalSpace> {
    if n < 4 || !n.is_multiple_of(2) {
        return Err(Error::Argument(format!(
            "circle space needs even n >= 4 (exact antipodes), got {n}"
        )));
    }
    let rho = SquareMatrix::from_fn(n, |i, j| {
        let raw = (i as i64 - j as i64).unsigned_abs();
        let d = raw.min(n as u64 - raw);
        if d == 0 {
            0.0
        } else if 2 * d == n as u64 {
            1.0
        } else {
            (std::f64::consts::PI * d as f64 / n as f64).sin()
        }
    });
    AntipodalSpace::with_default_labels(rho, &Tolerances::default())
}

/// A rooted dendrogram with leaf labels and strictly decreasing node heights.
/// Serialized as `{"height": h, "children": [...]}` with bare strings as
/// leaves.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DendrogramNode {
    Leaf(String),
    Internal {
        height: f64,
        children: Vec<DendrogramNode>,
    },
}

impl DendrogramNode {
    fn leaf_count(&self) -> usize {
        match self {
            DendrogramNode::Leaf(_) => 1,
            DendrogramNode::Internal { children, .. } => {
                children.iter().map(|c| c.leaf_count()).sum()
            }
        }
    }

    fn check_heights(&self, parent: f64) -> Result<()> {
        if let DendrogramNode::Internal { height, children } = self {
            if !(*height > 0.0) || *height >= parent {
                return Err(Error::InvalidSpec(format!(
                    "node height {height} must lie in (0, parent {parent})"
                )));
            }
            if children.is_empty() {
                return Err(Error::InvalidSpec("internal node without children".into()));
            }
            for c in children {
                c.check_heights(*height)?;
            }
        }
        Ok(())
    }

    fn collect_leaves(&self, out: &mut Vec<String>) {
        match self {
            DendrogramNode::Leaf(l) => out.push(l.clone()),
            DendrogramNode::Internal { children, .. } => {
                for c in children {
                    c.collect_leaves(out);
                }
            }
        }
    }

    /// Fills `rho` with the LCA height for every cross-child leaf pair.
    fn fill_lca(&self, rho: &mut SquareMatrix, offset: usize) -> usize {
        match self {
            DendrogramNode::Leaf(_) => offset + 1,
            DendrogramNode::Internal { height, children } => {
                let mut bounds = vec![offset];
                let mut cur = offset;
                for c in children {
                    cur = c.fill_lca(rho, cur);
                    bounds.push(cur);
                }
                for a in 0..children.len() {
                    for b in (a + 1)..children.len() {
                        for i in bounds[a]..bounds[a + 1] {
                            for j in bounds[b]..bounds[b + 1] {
                                rho[(i, j)] = *height;
                                rho[(j, i)] = *height;
                            }
                        }
                    }
                }
                cur
            }
        }
    }
}

/// The ultrametric of a dendrogram: `rho(leaf_i, leaf_j)` is the height of
/// their lowest common ancestor. K = 1 exactly.
pub fn gen_dendrogram(root: &DendrogramNode) -> Result<AntipodalSpace> {
    match root {
        DendrogramNode::Leaf(_) => Err(Error::InvalidSpec(
            "dendrogram root must be an internal node with height 1".into(),
        )),
        DendrogramNode::Internal { height, children } => {
            if *height != 1.0 {
                return Err(Error::InvalidSpec(format!(
                    "root height must be exactly 1, got {height}"
                )));
            }
            if children.len() < 2 {
                return Err(Error::InvalidSpec(
                    "root needs at least two children for antipodality".into(),
                ));
            }
            for c in children {
                c.check_heights(*height)?;
            }
            let n = root.leaf_count();
            if n < 2 {
                return Err(Error::InvalidSpec(
                    "dendrogram needs at least 2 leaves".into(),
                ));
            }
            let mut labels = Vec::with_capacity(n);
            root.collect_leaves(&mut labels);
            let mut rho = SquareMatrix::zeros(n);
            root.fill_lca(&mut rho, 0);
            AntipodalSpace::new(labels, rho, &Tolerances::default())
        }
    }
}

/// Balanced 8-leaf dendrogram with heights 1, 0.5, 0.25.
pub fn dendrogram_balanced8() -> DendrogramNode {
    let pair = |h: f64, a: &str, b: &str| DendrogramNode::Internal {
        height: h,
        children: vec![
            DendrogramNode::Leaf(a.into()),
            DendrogramNode::Leaf(b.into()),
        ],
    };
    DendrogramNode::Internal {
        height: 1.0,
        children: vec![
            DendrogramNode::Internal {
                height: 0.5,
                children: vec![pair(0.25, "a", "b"), pair(0.25, "c", "d")],
            },
            DendrogramNode::Internal {
                height: 0.5,
                children: vec![pair(0.25, "e", "f"), pair(0.25, "g", "h")],
            },
        ],
    }
}

/// Caterpillar dendrogram on 5 leaves with heights 1, 0.8, 0.6, 0.4.
pub fn dendrogram_caterpillar5() -> DendrogramNode {
    let mut node = DendrogramNode::Internal {
        height: 0.4,
        children: vec![
            DendrogramNode::Leaf("d".into()),
            DendrogramNode::Leaf("e".into()),
        ],
    };
    for (h, l) in [(0.6, "c"), (0.8, "b"), (1.0, "a")] {
        node = DendrogramNode::Internal {
            height: h,
            children: vec![DendrogramNode::Leaf(l.into()), node],
        };
    }
    node
}

/// A seeded quasi-metric with a prescribed constant: the cyclic chord kernel
/// snowflaked to `K = k_target` exactly, then relabeled by a seeded
/// permutation (which preserves K bit-for-bit).
pub fn gen_quasimetric(n: usize, k_target: f64, seed: u64) -> Result<AntipodalSpace> {
    if !(k_target > 1.0) {
        return Err(Error::Argument(format!(
            "quasi-metric generator needs K > 1, got {k_target} (use a dendrogram for K = 1)"
        )));
    }
    let circle = gen_circle(n)?;
    let k_base = 2.0 * (std::f64::consts::PI / n as f64).cos();
    let p = k_target.ln() / k_base.ln();
    let rho = circle.rho().map(|x| {
        if x == 0.0 {
            0.0
        } else if x == 1.0 {
            1.0
        } else {
            x.powf(p)
        }
    });
    let snowflaked = AntipodalSpace::with_default_labels(rho, &Tolerances::default())?;
    let mut perm: Vec<usize> = (0..n).collect();
    SplitMix64::new(seed).shuffle(&mut perm);
    snowflaked.pushforward(&perm)
}

/// A random certified member: antipodalization of a uniform draw in
/// `[-amplitude, amplitude]^n`. Fully deterministic per (seed, amplitude,
/// space).
pub fn random_point(
    space: &AntipodalSpace,
    seed: u64,
    amplitude: f64,
    config: &FlowConfig,
) -> Result<MoebiusPoint> {
    if !(amplitude > 0.0) {
        return Err(Error::Argument(format!(
            "amplitude must be positive, got {amplitude}"
        )));
    }
    let mut rng = SplitMix64::new(seed);
    let g: Vec<f64> = (0..space.n())
        .map(|_| rng.next_symmetric(amplitude))
        .collect();
    let zeros = vec![0.0; space.n()];
    antipodalize(space, &zeros, &g, config)
}
