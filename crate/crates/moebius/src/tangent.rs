//! Tangent spaces of M(Z) at a point: the antipodal graph, odd functions,
//! exact tangent-line realization, and the odd projection at uniquely
//! antipodal points.
//!
//! The tangent space at a member equals the space of functions summing to
//! zero across every antipodal pair. On a finite space this is computed from
//! the bipartite components of the antipodal graph: each contributes one
//! basis direction, while components with an odd cycle force zero.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::flow::{antipodalize, FlowConfig};
use crate::matrix::sup_norm;
use crate::space::{sup_norm_diff, AntipodalSpace, MoebiusPoint};

#[derive(Debug, Clone, Serialize)]
pub struct AntipodalGraph {
    pub n: usize,
    /// Pairs (i, j), i < j, with kernel value within tol_antipode of 1.
    pub edges: Vec<(usize, usize)>,
    pub components: Vec<GraphComponent>,
    /// Pairs whose kernel value sits within a factor 10 of the antipode
    /// cutoff on either side. Graph topology (hence tangent dimension) is
    /// discontinuous there, so they are surfaced rather than tie-broken.
    pub near_threshold: Vec<(usize, usize)>,
}

#[derive(Debug, Clone, Serialize)]
pub struct GraphComponent {
    pub vertices: Vec<usize>,
    pub bipartite: bool,
    /// Two-coloring as (vertex, side) when bipartite.
    pub coloring: Option<Vec<(usize, bool)>>,
    /// Vertex list of an odd cycle when not bipartite.
    pub odd_cycle: Option<Vec<usize>>,
}

impl AntipodalGraph {
    pub fn degree(&self, v: usize) -> usize {
        self.edges
            .iter()
            .filter(|&&(a, b)| a == v || b == v)
            .count()
    }

    /// The matching involution, when every vertex has exactly one partner.
    pub fn matching_involution(&self) -> Result<Vec<usize>> {
        let mut partner = vec![usize::MAX; self.n];
        for &(a, b) in &self.edges {
            for (x, y) in [(a, b), (b, a)] {
                if partner[x] != usize::MAX {
                    return Err(Error::UnsupportedStructure(format!(
                        "vertex {x} has degree > 1, not a perfect matching"
                    )));
                }
                partner[x] = y;
            }
        }
        if let Some(v) = partner.iter().position(|&p| p == usize::MAX) {
            return Err(Error::UnsupportedStructure(format!(
                "vertex {v} has degree 0, not a perfect matching"
            )));
        }
        Ok(partner)
    }
}

/// Builds the antipodal graph of a certified point: edges where the kernel
/// `E(tau)` comes within `tol_antipode` of 1, plus per-component bipartition
/// analysis.
pub fn antipodal_graph(space: &AntipodalSpace, x: &MoebiusPoint) -> Result<AntipodalGraph> {
    if !space.owns(x) {
        return Err(Error::SpaceMismatch);
    }
    let n = space.n();
    let tol = space.tol_antipode();
    let edge_cut = 2.0 * (1.0 - tol).ln();
    let near_lo = 2.0 * (1.0 - 10.0 * tol).ln();
    let near_hi = 2.0 * (1.0 - 0.1 * tol).ln();
    let mut edges = Vec::new();
    let mut near_threshold = Vec::new();
    let mut adj = vec![Vec::new(); n];
    for i in 0..n {
        let row = space.log2rho().row(i);
        for j in (i + 1)..n {
            let s = x.tau()[i] + x.tau()[j] + row[j];
            if s >= edge_cut {
                edges.push((i, j));
                adj[i].push(j);
                adj[j].push(i);
            }
            if s >= near_lo && s < near_hi {
                near_threshold.push((i, j));
            }
        }
    }
    if let Some(v) = adj.iter().position(|a| a.is_empty()) {
        return Err(Error::NotCertified(format!(
            "index {v} has no antipode within tolerance; not a valid member"
        )));
    }
    let components = analyze_components(n, &adj);
    Ok(AntipodalGraph {
        n,
        edges,
        components,
        near_threshold,
    })
}

fn analyze_components(n: usize, adj: &[Vec<usize>]) -> Vec<GraphComponent> {
    let mut color = vec![None::<bool>; n];
    let mut parent = vec![usize::MAX; n];
    let mut components = Vec::new();
    for root in 0..n {
        if color[root].is_some() {
            continue;
        }
        let mut vertices = Vec::new();
        let mut odd_cycle = None;
        color[root] = Some(false);
        let mut queue = std::collections::VecDeque::from([root]);
        while let Some(u) = queue.pop_front() {
            vertices.push(u);
            for &v in &adj[u] {
                match color[v] {
                    None => {
                        color[v] = Some(!color[u].unwrap());
                        parent[v] = u;
                        queue.push_back(v);
                    }
                    Some(c) if c == color[u].unwrap() && odd_cycle.is_none() => {
                        odd_cycle = Some(extract_cycle(u, v, &parent));
                    }
                    _ => {}
                }
            }
        }
        vertices.sort_unstable();
        let bipartite = odd_cycle.is_none();
        let coloring = bipartite.then(|| {
            vertices
                .iter()
                .map(|&v| (v, color[v].unwrap()))
                .collect::<Vec<_>>()
        });
        components.push(GraphComponent {
            vertices,
            bipartite,
            coloring,
            odd_cycle,
        });
    }
    components
}

/// Reconstructs the cycle through conflict edge (u, v) from BFS parents.
fn extract_cycle(u: usize, v: usize, parent: &[usize]) -> Vec<usize> {
    let ancestors = |mut x: usize| {
        let mut path = vec![x];
        while parent[x] != usize::MAX {
            x = parent[x];
            path.push(x);
        }
        path
    };
    let pu = ancestors(u);
    let pv = ancestors(v);
    let in_pv: std::collections::HashSet<usize> = pv.iter().copied().collect();
    let lca_pos = pu.iter().position(|x| in_pv.contains(x)).unwrap();
    let lca = pu[lca_pos];
    let mut cycle: Vec<usize> = pu[..=lca_pos].to_vec();
    let tail: Vec<usize> = pv.iter().take_while(|&&x| x != lca).copied().collect();
    cycle.extend(tail.into_iter().rev());
    cycle
}

/// The odd tangent space: one signed indicator per bipartite component.
#[derive(Debug, Clone, Serialize)]
pub struct OddSpace {
    pub basis: Vec<Vec<f64>>,
    pub dimension: usize,
    pub graph: AntipodalGraph,
}

pub fn odd_basis(space: &AntipodalSpace, x: &MoebiusPoint) -> Result<OddSpace> {
    let graph = antipodal_graph(space, x)?;
    let mut basis = Vec::new();
    for comp in &graph.components {
        if !comp.bipartite {
            continue;
        }
        let mut v = vec![0.0_f64; graph.n];
        for &(vertex, side) in comp.coloring.as_ref().unwrap() {
            v[vertex] = if side { -1.0 } else { 1.0 };
        }
        basis.push(v);
    }
    Ok(OddSpace {
        dimension: basis.len(),
        basis,
        graph,
    })
}

/// Checks `v(xi) + v(eta) = 0` on every antipodal edge; returns the worst
/// violation alongside the verdict.
pub fn is_odd(
    space: &AntipodalSpace,
    x: &MoebiusPoint,
    v: &[f64],
    tol: f64,
) -> Result<(bool, f64)> {
    let graph = antipodal_graph(space, x)?;
    Ok(is_odd_on(&graph, v, tol))
}

pub fn is_odd_on(graph: &AntipodalGraph, v: &[f64], tol: f64) -> (bool, f64) {
    let worst = graph
        .edges
        .iter()
        .map(|&(i, j)| (v[i] + v[j]).abs())
        .fold(0.0_f64, f64::max);
    (worst <= tol, worst)
}

#[derive(Debug, Clone, Serialize)]
pub struct TangentLineCheck {
    /// Sup norm of the discrepancy of `tau + t v`.
    pub disc_norm: f64,
    /// `d(x, x + t v)`, equal to `|t| |v|` in the flat regime.
    pub distance: f64,
    /// Radius of exact flatness: `gap / (2 |v|)` over non-edge pairs
    /// (infinite when every pair is an edge). Reported as a diagnostic.
    pub t_star: f64,
    pub flat: bool,
    /// Antipodalization of the line point when `|t| >= t_star`.
    pub projected: Option<MoebiusPoint>,
    /// Deviation of the projection from the straight line.
    pub deviation: Option<f64>,
}

/// Moves along the straight line `tau + t v` for an odd direction `v`. Inside
/// the flatness radius the discrepancy vanishes identically and the motion is
/// isometric to the line; beyond it the flow projection is returned as well.
pub fn tangent_line_check(
    space: &AntipodalSpace,
    x: &MoebiusPoint,
    v: &[f64],
    t: f64,
    config: &FlowConfig,
) -> Result<TangentLineCheck> {
    if v.len() != space.n() {
        return Err(Error::Argument("vector length differs from space".into()));
    }
    let graph = antipodal_graph(space, x)?;
    let (odd, worst) = is_odd_on(&graph, v, 1e-12);
    if !odd {
        return Err(Error::Argument(format!(
            "direction is not odd: worst edge sum {worst:.3e}"
        )));
    }
    let mut is_edge = vec![false; space.n() * space.n()];
    for &(i, j) in &graph.edges {
        is_edge[i * space.n() + j] = true;
        is_edge[j * space.n() + i] = true;
    }
    // Gap in the -log E(tau) scale: the flatness radius gap / (2 |v|) is
    // then conservative by a factor of two against the squared-log values
    // the discrepancy maximizes.
    let mut gap = f64::INFINITY;
    for i in 0..space.n() {
        let row = space.log2rho().row(i);
        for j in (i + 1)..space.n() {
            if !is_edge[i * space.n() + j] {
                gap = gap.min(-0.5 * (x.tau()[i] + x.tau()[j] + row[j]));
            }
        }
    }
    let v_norm = sup_norm(v);
    let t_star = if v_norm == 0.0 {
        f64::INFINITY
    } else {
        gap / (2.0 * v_norm)
    };
    let line: Vec<f64> = x.tau().iter().zip(v).map(|(&a, &b)| a + t * b).collect();
    let disc_norm = sup_norm(&space.discrepancy_at(&line));
    let moved: Vec<f64> = v.iter().map(|&b| t * b).collect();
    let distance = sup_norm(&moved);
    let flat = t.abs() < t_star;
    let (projected, deviation) = if flat {
        (None, None)
    } else {
        let p = antipodalize(space, x.tau(), &moved, config)?;
        let dev = sup_norm_diff(p.tau(), &line);
        (Some(p), Some(dev))
    };
    Ok(TangentLineCheck {
        disc_norm,
        distance,
        t_star,
        flat,
        projected,
        deviation,
    })
}

/// Odd projection at a uniquely antipodal point: `(u - u o i) / 2` for the
/// matching involution `i`. Linear and idempotent; the image is exactly odd.
pub fn odd_projection(space: &AntipodalSpace, x: &MoebiusPoint, u: &[f64]) -> Result<Vec<f64>> {
    if u.len() != space.n() {
        return Err(Error::Argument("vector length differs from space".into()));
    }
    let graph = antipodal_graph(space, x)?;
    let involution = graph.matching_involution()?;
    Ok((0..space.n())
        .map(|i| 0.5 * (u[i] - u[involution[i]]))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::SquareMatrix;
    use crate::space::Tolerances;

    fn discrete(n: usize) -> AntipodalSpace {
        let rho = SquareMatrix::from_fn(n, |i, j| if i == j { 0.0 } else { 1.0 });
        AntipodalSpace::with_default_labels(rho, &Tolerances::default()).unwrap()
    }

    fn circle(n: usize) -> AntipodalSpace {
        let rho = SquareMatrix::from_fn(n, |i, j| {
            let d = (i as i64 - j as i64)
                .unsigned_abs()
                .min(n as u64 - (i as i64 - j as i64).unsigned_abs());
            if d == 0 {
                0.0
            } else if 2 * d == n as u64 {
                1.0
            } else {
                (std::f64::consts::PI * d as f64 / n as f64).sin()
            }
        });
        AntipodalSpace::with_default_labels(rho, &Tolerances::default()).unwrap()
    }

    #[test]
    fn discrete3_base_is_k3() {
        let s = discrete(3);
        let g = antipodal_graph(&s, &s.base_point()).unwrap();
        assert_eq!(g.edges.len(), 3);
        assert_eq!(g.components.len(), 1);
        assert!(!g.components[0].bipartite);
        let cycle = g.components[0].odd_cycle.as_ref().unwrap();
        assert_eq!(cycle.len() % 2, 1);
        // The witness is a genuine cycle: consecutive vertices are edges.
        for k in 0..cycle.len() {
            let (a, b) = (cycle[k], cycle[(k + 1) % cycle.len()]);
            assert!(
                g.edges.contains(&(a.min(b), a.max(b))),
                "({a},{b}) is not an edge"
            );
        }
    }

    #[test]
    fn tripod_interior_point_is_path() {
        let s = discrete(3);
        let p = s.certify(vec![0.5, -0.5, -0.5], 1e-8).unwrap();
        let g = antipodal_graph(&s, &p).unwrap();
        let mut edges = g.edges.clone();
        edges.sort_unstable();
        assert_eq!(edges, vec![(0, 1), (0, 2)]);
        assert!(g.components[0].bipartite);
    }

    #[test]
    fn circle4_base_is_perfect_matching() {
        let s = circle(4);
        let g = antipodal_graph(&s, &s.base_point()).unwrap();
        let mut edges = g.edges.clone();
        edges.sort_unstable();
        assert_eq!(edges, vec![(0, 2), (1, 3)]);
        assert_eq!(g.components.len(), 2);
        assert!(g.components.iter().all(|c| c.bipartite));
    }

    #[test]
    fn dimension_formula_on_catalogued_graphs() {
        let s3 = discrete(3);
        assert_eq!(odd_basis(&s3, &s3.base_point()).unwrap().dimension, 0);

        let p = s3.certify(vec![0.5, -0.5, -0.5], 1e-8).unwrap();
        let o = odd_basis(&s3, &p).unwrap();
        assert_eq!(o.dimension, 1);
        assert_eq!(o.basis[0], vec![1.0, -1.0, -1.0]);

        let c4 = circle(4);
        let o = odd_basis(&c4, &c4.base_point()).unwrap();
        assert_eq!(o.dimension, 2);
        let mut basis = o.basis.clone();
        basis.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(basis[0], vec![0.0, 1.0, 0.0, -1.0]);
        assert_eq!(basis[1], vec![1.0, 0.0, -1.0, 0.0]);
        // Basis vectors live on disjoint components, hence are orthogonal
        // and every edge sum vanishes.
        let dot: f64 = basis[0].iter().zip(&basis[1]).map(|(a, b)| a * b).sum();
        assert_eq!(dot, 0.0);
        for v in &o.basis {
            let (ok, worst) = is_odd_on(&o.graph, v, 0.0);
            assert!(ok, "edge sum violation {worst}");
        }
    }

    #[test]
    fn is_odd_examples() {
        let s = discrete(3);
        let base = s.base_point();
        assert!(is_odd(&s, &base, &[0.0; 3], 1e-12).unwrap().0);
        let (ok, worst) = is_odd(&s, &base, &[1.0; 3], 1e-12).unwrap();
        assert!(!ok);
        assert_eq!(worst, 2.0);
    }

    #[test]
    fn tangent_line_flat_on_tripod() {
        let s = discrete(3);
        let cfg = FlowConfig::default();
        let p = s.certify(vec![0.5, -0.5, -0.5], 1e-8).unwrap();
        let chk = tangent_line_check(&s, &p, &[1.0, -1.0, -1.0], 0.2, &cfg).unwrap();
        assert!((chk.t_star - 0.25).abs() < 1e-12);
        assert!(chk.flat);
        assert!(chk.disc_norm <= 1e-12);
        assert!((chk.distance - 0.2).abs() < 1e-15);
    }

    #[test]
    fn tangent_line_zero_t() {
        let s = circle(4);
        let cfg = FlowConfig::default();
        let base = s.base_point();
        let chk = tangent_line_check(&s, &base, &[1.0, 0.0, -1.0, 0.0], 0.0, &cfg).unwrap();
        assert_eq!(chk.disc_norm, 0.0);
        assert_eq!(chk.distance, 0.0);
    }

    #[test]
    fn tangent_line_rejects_non_odd() {
        let s = circle(4);
        let cfg = FlowConfig::default();
        assert!(matches!(
            tangent_line_check(&s, &s.base_point(), &[1.0, 0.0, 0.0, 0.0], 0.1, &cfg),
            Err(Error::Argument(_))
        ));
    }

    #[test]
    fn odd_projection_on_circle4() {
        let s = circle(4);
        let base = s.base_point();
        let w = odd_projection(&s, &base, &[1.0, 0.0, 0.0, 0.0]).unwrap();
        assert_eq!(w, vec![0.5, 0.0, -0.5, 0.0]);
        let ones = odd_projection(&s, &base, &[1.0; 4]).unwrap();
        assert_eq!(ones, vec![0.0; 4]);
        // Idempotent.
        let again = odd_projection(&s, &base, &w).unwrap();
        assert_eq!(again, w);
    }

    #[test]
    fn odd_projection_needs_matching() {
        let s = discrete(3);
        match odd_projection(&s, &s.base_point(), &[1.0, 0.0, 0.0]) {
            Err(Error::UnsupportedStructure(msg)) => {
                assert!(msg.contains("degree"), "{msg}");
            }
            other => panic!("expected UnsupportedStructure, got {other:?}"),
        }
    }
}
