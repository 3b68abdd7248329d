//! Data-parallel scan kernels with sequential fallbacks.
//!
//! The hot loops of this crate are embarrassingly parallel reductions over
//! index tuples: quasi-metric triples, hyperbolicity quadruples, pairwise
//! distance matrices. Each kernel exists in a `_seq` and (behind the
//! `parallel` feature) a `_par` variant; the unsuffixed function dispatches
//! to rayon when available. Both variants enumerate the same candidates and
//! break value ties toward the lexicographically smallest witness, so their
//! results are bit-identical regardless of reduction order.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::matrix::SquareMatrix;

/// Maximal value plus its witness tuple.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Best<W> {
    pub value: f64,
    pub witness: W,
}

#[inline]
fn fold_best<W: PartialOrd + Copy>(acc: Option<Best<W>>, cand: Best<W>) -> Option<Best<W>> {
    match acc {
        None => Some(cand),
        Some(b) => {
            if cand.value > b.value || (cand.value == b.value && cand.witness < b.witness) {
                Some(cand)
            } else {
                Some(b)
            }
        }
    }
}

#[inline]
fn merge_best<W: PartialOrd + Copy>(a: Option<Best<W>>, b: Option<Best<W>>) -> Option<Best<W>> {
    match (a, b) {
        (x, None) => x,
        (None, y) => y,
        (Some(x), Some(y)) => fold_best(Some(x), y),
    }
}

fn qm_row(rho: &SquareMatrix, i: usize) -> Option<Best<(usize, usize, usize)>> {
    let n = rho.n();
    let mut best = None;
    for j in 0..n {
        if j == i {
            continue;
        }
        let direct = rho[(i, j)];
        for k in 0..n {
            if k == i || k == j {
                continue;
            }
            let via = rho[(i, k)].max(rho[(k, j)]);
            if via > 0.0 {
                best = fold_best(
                    best,
                    Best {
                        value: direct / via,
                        witness: (i, j, k),
                    },
                );
            }
        }
    }
    best
}

/// Max over ordered pairwise-distinct triples of `rho(i,j) / max(rho(i,k), rho(k,j))`.
pub fn qm_scan_seq(rho: &SquareMatrix) -> Option<Best<(usize, usize, usize)>> {
    (0..rho.n()).fold(None, |acc, i| merge_best(acc, qm_row(rho, i)))
}

#[cfg(feature = "parallel")]
pub fn qm_scan_par(rho: &SquareMatrix) -> Option<Best<(usize, usize, usize)>> {
    (0..rho.n())
        .into_par_iter()
        .map(|i| qm_row(rho, i))
        .reduce(|| None, merge_best)
}

pub fn qm_scan(rho: &SquareMatrix) -> Option<Best<(usize, usize, usize)>> {
    #[cfg(feature = "parallel")]
    {
        qm_scan_par(rho)
    }
    #[cfg(not(feature = "parallel"))]
    {
        qm_scan_seq(rho)
    }
}

#[inline]
fn gromov_product_from(d: &SquareMatrix, a: usize, b: usize, w: usize) -> f64 {
    0.5 * (d[(w, a)] + d[(w, b)] - d[(a, b)])
}

fn delta_block(d: &SquareMatrix, x: usize) -> Option<Best<[usize; 4]>> {
    let m = d.n();
    let mut best = None;
    for y in 0..m {
        if y == x {
            continue;
        }
        for z in 0..m {
            if z == x || z == y {
                continue;
            }
            for w in 0..m {
                if w == x || w == y || w == z {
                    continue;
                }
                let xz = gromov_product_from(d, x, z, w);
                let zy = gromov_product_from(d, z, y, w);
                let xy = gromov_product_from(d, x, y, w);
                best = fold_best(
                    best,
                    Best {
                        value: xz.min(zy) - xy,
                        witness: [x, y, z, w],
                    },
                );
            }
        }
    }
    best
}

/// Max over ordered pairwise-distinct quadruples `(x, y, z, w)` of
/// `min((x|z)_w, (z|y)_w) - (x|y)_w`, the four-point hyperbolicity defect.
pub fn delta_scan_seq(d: &SquareMatrix) -> Option<Best<[usize; 4]>> {
    (0..d.n()).fold(None, |acc, x| merge_best(acc, delta_block(d, x)))
}

#[cfg(feature = "parallel")]
pub fn delta_scan_par(d: &SquareMatrix) -> Option<Best<[usize; 4]>> {
    (0..d.n())
        .into_par_iter()
        .map(|x| delta_block(d, x))
        .reduce(|| None, merge_best)
}

pub fn delta_scan(d: &SquareMatrix) -> Option<Best<[usize; 4]>> {
    #[cfg(feature = "parallel")]
    {
        delta_scan_par(d)
    }
    #[cfg(not(feature = "parallel"))]
    {
        delta_scan_seq(d)
    }
}

fn dist_row(taus: &[&[f64]], i: usize) -> Vec<f64> {
    taus.iter()
        .map(|t| crate::space::sup_norm_diff(taus[i], t))
        .collect()
}

/// Pairwise sup-norm distance matrix of coordinate vectors.
pub fn pairwise_distances_seq(taus: &[&[f64]]) -> SquareMatrix {
    let rows: Vec<Vec<f64>> = (0..taus.len()).map(|i| dist_row(taus, i)).collect();
    SquareMatrix::from_rows(rows).expect("rows are square by construction")
}

#[cfg(feature = "parallel")]
pub fn pairwise_distances_par(taus: &[&[f64]]) -> SquareMatrix {
    let rows: Vec<Vec<f64>> = (0..taus.len())
        .into_par_iter()
        .map(|i| dist_row(taus, i))
        .collect();
    SquareMatrix::from_rows(rows).expect("rows are square by construction")
}

pub fn pairwise_distances(taus: &[&[f64]]) -> SquareMatrix {
    #[cfg(feature = "parallel")]
    {
        pairwise_distances_par(taus)
    }
    #[cfg(not(feature = "parallel"))]
    {
        pairwise_distances_seq(taus)
    }
}
