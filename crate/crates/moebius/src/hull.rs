//! Isbell extremal-function machinery on finite samples of M(Z).
//!
//! A finite sample stands in for the continuum: membership in Delta, the
//! extremal defect of distance functions, the hull isometry gap, and boundary
//! values of extremal functions are all tested as limits in ray depth.
//!
//! Membership of a kernel itself is the exact counterpart: `E(tau)` is
//! antipodal iff its discrepancy vanishes, so the residual carried by every
//! [`MoebiusPoint`] doubles as the exact extremality diagnostic for the
//! log-distance picture; this module never re-solves it.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::FlowConfig;
use crate::generators::random_point;
use crate::geometry::extend_ray;
use crate::matrix::SquareMatrix;
use crate::rng::SplitMix64;
use crate::scan;
use crate::space::{AntipodalSpace, MoebiusPoint};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PointTag {
    Base,
    RayTip { xi: usize, k: usize },
    Random { seed: u64 },
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct SampleSpec {
    #[serde(default)]
    pub rays: Vec<RaySpec>,
    #[serde(default)]
    pub random: Option<RandomSpec>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RaySpec {
    pub xi: usize,
    pub depth: usize,
    pub step: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RandomSpec {
    pub count: usize,
    pub seed: u64,
    pub amplitude: f64,
}

/// A finite sample S of M(Z) with its distance matrix and provenance tags.
/// The base point is always present at index 0.
#[derive(Debug, Clone, Serialize)]
pub struct SampleSpace {
    pub points: Vec<MoebiusPoint>,
    pub dist_matrix: SquareMatrix,
    pub tags: Vec<PointTag>,
    /// Ray tips by direction: (xi, indices into `points` in depth order).
    pub rays: Vec<(usize, Vec<usize>)>,
    /// Worst triangle-inequality violation in the distance matrix.
    pub triangle_defect: f64,
}

impl SampleSpace {
    pub fn len(&self) -> usize {
        self.points.len()
    }
    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
    pub fn ray_toward(&self, xi: usize) -> Option<&[usize]> {
        self.rays
            .iter()
            .find(|&&(x, _)| x == xi)
            .map(|(_, idx)| idx.as_slice())
    }
}

/// Assembles a sample from ray tips and random antipodalized points.
pub fn build_sample(
    space: &AntipodalSpace,
    spec: &SampleSpec,
    config: &FlowConfig,
) -> Result<SampleSpace> {
    let base = space.base_point();
    let mut points = vec![base.clone()];
    let mut tags = vec![PointTag::Base];
    let mut rays = Vec::new();
    for ray_spec in &spec.rays {
        let ray = extend_ray(
            space,
            &base,
            ray_spec.xi,
            ray_spec.step,
            ray_spec.depth,
            config,
        )?;
        if !ray.complete() {
            return Err(Error::NotCertified(format!(
                "ray toward {} truncated: {:?}",
                ray_spec.xi, ray.diagnostics
            )));
        }
        let mut indices = Vec::with_capacity(ray_spec.depth);
        for (k, p) in ray.points.into_iter().enumerate().skip(1) {
            indices.push(points.len());
            points.push(p);
            tags.push(PointTag::RayTip { xi: ray_spec.xi, k });
        }
        rays.push((ray_spec.xi, indices));
    }
    if let Some(rnd) = &spec.random {
        let mut stream = SplitMix64::new(rnd.seed);
        for _ in 0..rnd.count {
            let seed = stream.next_u64();
            points.push(random_point(space, seed, rnd.amplitude, config)?);
            tags.push(PointTag::Random { seed });
        }
    }
    let taus: Vec<&[f64]> = points.iter().map(|p| p.tau()).collect();
    let dist_matrix = scan::pairwise_distances(&taus);
    let m = dist_matrix.n();
    let mut triangle_defect = 0.0_f64;
    for i in 0..m {
        for j in 0..m {
            for k in 0..m {
                triangle_defect = triangle_defect
                    .max(dist_matrix[(i, j)] - dist_matrix[(i, k)] - dist_matrix[(k, j)]);
            }
        }
    }
    Ok(SampleSpace {
        points,
        dist_matrix,
        tags,
        rays,
        triangle_defect,
    })
}

/// Membership and extremality of a candidate function on the sample.
#[derive(Debug, Clone, Serialize)]
pub struct ExtremalReport {
    pub in_delta: bool,
    /// `sup_y (d(x,y) - f(x) - f(y))` per point (the sup includes y = x).
    pub defect_per_point: Vec<f64>,
    pub max_abs_defect: f64,
    pub extremal: bool,
}

pub fn extremal_check(sample: &SampleSpace, f: &[f64], tol: f64) -> Result<ExtremalReport> {
    let m = sample.len();
    if f.len() != m {
        return Err(Error::Argument(format!(
            "function length {} differs from sample size {m}",
            f.len()
        )));
    }
    let d = &sample.dist_matrix;
    let defect_per_point: Vec<f64> = (0..m)
        .map(|x| {
            (0..m)
                .map(|y| d[(x, y)] - f[x] - f[y])
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .collect();
    let in_delta = defect_per_point.iter().all(|&v| v <= tol);
    let max_abs_defect = defect_per_point
        .iter()
        .fold(0.0_f64, |m, &v| m.max(v.abs()));
    let extremal = in_delta && defect_per_point.iter().all(|&v| v >= -tol);
    Ok(ExtremalReport {
        in_delta,
        defect_per_point,
        max_abs_defect,
        extremal,
    })
}

/// The distance function `d_alpha` restricted to the sample. Always in
/// Delta(S); its extremal defect shrinks as the sample gains deep ray tips
/// toward the argmax directions of `alpha`.
pub fn dist_function(
    space: &AntipodalSpace,
    sample: &SampleSpace,
    alpha: &MoebiusPoint,
) -> Result<Vec<f64>> {
    sample.points.iter().map(|s| space.dist(alpha, s)).collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct HullGap {
    /// `max_s |d_alpha(s) - d_beta(s)|` over the sample.
    pub sup_norm: f64,
    /// `d(alpha, beta)` in M(Z).
    pub distance: f64,
    /// `distance - sup_norm`; nonnegative up to residual slack, shrinking to
    /// zero as the sample deepens toward the argmax directions.
    pub gap: f64,
}

/// Compares the hull embedding `alpha -> d_alpha` against the metric of M(Z).
pub fn hull_isometry_check(
    space: &AntipodalSpace,
    sample: &SampleSpace,
    alpha: &MoebiusPoint,
    beta: &MoebiusPoint,
) -> Result<HullGap> {
    let fa = dist_function(space, sample, alpha)?;
    let fb = dist_function(space, sample, beta)?;
    let sup_norm = fa
        .iter()
        .zip(&fb)
        .fold(0.0_f64, |m, (&a, &b)| m.max((a - b).abs()));
    let distance = space.dist(alpha, beta)?;
    Ok(HullGap {
        sup_norm,
        distance,
        gap: distance - sup_norm,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundaryValueReport {
    /// `d(o, tip) - f(tip)` along the ray, in depth order.
    pub values: Vec<f64>,
    /// The deepest value, the boundary-value estimate.
    pub value: f64,
    /// Monotone non-decreasing along the ray within the given slack.
    pub monotone_ok: bool,
}

/// Boundary value of an extremal function along a tagged ray toward `xi`.
pub fn boundary_value(
    sample: &SampleSpace,
    xi: usize,
    f: &[f64],
    o_index: usize,
    slack: f64,
) -> Result<BoundaryValueReport> {
    if f.len() != sample.len() {
        return Err(Error::Argument(format!(
            "function length {} differs from sample size {}",
            f.len(),
            sample.len()
        )));
    }
    if o_index >= sample.len() {
        return Err(Error::Argument(format!(
            "base index {o_index} out of range"
        )));
    }
    let tips = sample
        .ray_toward(xi)
        .ok_or_else(|| Error::Argument(format!("sample has no ray toward {xi}")))?;
    let d = &sample.dist_matrix;
    let values: Vec<f64> = tips.iter().map(|&t| d[(o_index, t)] - f[t]).collect();
    let monotone_ok = values.windows(2).all(|w| w[1] >= w[0] - slack);
    let value = *values
        .last()
        .ok_or_else(|| Error::Argument(format!("ray toward {xi} has no tips")))?;
    Ok(BoundaryValueReport {
        values,
        value,
        monotone_ok,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::Tolerances;

    fn discrete(n: usize) -> AntipodalSpace {
        let rho = SquareMatrix::from_fn(n, |i, j| if i == j { 0.0 } else { 1.0 });
        AntipodalSpace::with_default_labels(rho, &Tolerances::default()).unwrap()
    }

    fn tripod_tip_sample(space: &AntipodalSpace) -> SampleSpace {
        let spec = SampleSpec {
            rays: vec![
                RaySpec {
                    xi: 0,
                    depth: 2,
                    step: 1.0,
                },
                RaySpec {
                    xi: 1,
                    depth: 2,
                    step: 1.0,
                },
                RaySpec {
                    xi: 2,
                    depth: 2,
                    step: 1.0,
                },
            ],
            random: None,
        };
        build_sample(space, &spec, &FlowConfig::default()).unwrap()
    }

    #[test]
    fn empty_spec_gives_singleton_base() {
        let s = discrete(3);
        let sample = build_sample(&s, &SampleSpec::default(), &FlowConfig::default()).unwrap();
        assert_eq!(sample.len(), 1);
        assert!(matches!(sample.tags[0], PointTag::Base));
    }

    #[test]
    fn tripod_tips_pairwise_distance() {
        let s = discrete(3);
        let sample = tripod_tip_sample(&s);
        assert_eq!(sample.len(), 7);
        // Depth-2 tips of different rays sit at distance 4 from each other.
        let t0 = sample.ray_toward(0).unwrap()[1];
        let t1 = sample.ray_toward(1).unwrap()[1];
        assert!((sample.dist_matrix[(t0, t1)] - 4.0).abs() < 1e-6);
        assert!(sample.triangle_defect <= 1e-12);
    }

    #[test]
    fn extremal_check_tripod_examples() {
        let s = discrete(3);
        let sample = tripod_tip_sample(&s);
        // Restrict to the three depth-2 tips plus the arithmetic of d_alpha
        // for alpha = origin: f = (2,2,2) on tips, f(base) = 0.
        let f = dist_function(&s, &sample, &s.base_point()).unwrap();
        let rep = extremal_check(&sample, &f, 1e-6).unwrap();
        assert!(rep.in_delta);
        assert!(rep.extremal, "defects {:?}", rep.defect_per_point);

        // Fattened function: still in Delta, no longer extremal.
        let fat: Vec<f64> = f.iter().map(|v| v + 1.0).collect();
        let rep = extremal_check(&sample, &fat, 1e-6).unwrap();
        assert!(rep.in_delta);
        assert!(!rep.extremal);

        // A negative entry violates the diagonal constraint.
        let mut neg = f.clone();
        neg[0] = -0.5;
        let rep = extremal_check(&sample, &neg, 1e-6).unwrap();
        assert!(!rep.in_delta);
    }

    #[test]
    fn dist_function_has_zero_at_its_point() {
        let s = discrete(3);
        let sample = tripod_tip_sample(&s);
        let f = dist_function(&s, &sample, &sample.points[3]).unwrap();
        assert_eq!(f[3], 0.0);
    }

    #[test]
    fn hull_isometry_tripod_exact() {
        let s = discrete(3);
        let sample = tripod_tip_sample(&s);
        let alpha = s.base_point();
        let beta = s.certify(vec![1.0, -1.0, -1.0], 1e-8).unwrap();
        let gap = hull_isometry_check(&s, &sample, &alpha, &beta).unwrap();
        assert!((gap.distance - 1.0).abs() < 1e-9);
        assert!(gap.gap.abs() < 1e-6, "gap {}", gap.gap);
        let same = hull_isometry_check(&s, &sample, &alpha, &alpha).unwrap();
        assert_eq!(same.sup_norm, 0.0);
        assert_eq!(same.gap, 0.0);
    }

    #[test]
    fn boundary_value_tripod() {
        let s = discrete(3);
        let sample = tripod_tip_sample(&s);
        // f = d_alpha for alpha the base: values vanish along every ray.
        let f = dist_function(&s, &sample, &s.base_point()).unwrap();
        let rep = boundary_value(&sample, 0, &f, 0, 8e-8).unwrap();
        for v in &rep.values {
            assert!(v.abs() < 1e-6);
        }
        assert!(rep.monotone_ok);

        // f = d_alpha for alpha = (1,-1,-1): values are identically 1 along
        // the ray toward 0.
        let alpha = s.certify(vec![1.0, -1.0, -1.0], 1e-8).unwrap();
        let f = dist_function(&s, &sample, &alpha).unwrap();
        let rep = boundary_value(&sample, 0, &f, 0, 8e-8).unwrap();
        for v in &rep.values {
            assert!((v - 1.0).abs() < 1e-6, "{:?}", rep.values);
        }
        assert!(rep.monotone_ok);
    }

    #[test]
    fn boundary_value_requires_ray() {
        let s = discrete(3);
        let sample = build_sample(&s, &SampleSpec::default(), &FlowConfig::default()).unwrap();
        assert!(matches!(
            boundary_value(&sample, 0, &[0.0], 0, 1e-6),
            Err(Error::Argument(_))
        ));
    }
}
