//! The `selftest` command: runs every module's property battery across the
//! generator zoo (discrete 2/3/6, circle 4/8/16, two dendrograms, one
//! K = 1.7 quasi-metric), deterministically for a given seed.

#![allow(clippy::needless_range_loop)]

use moebius::flow::{antipodalize, discrepancy, integrate_flow, FlowConfig};
use moebius::generators::*;
use moebius::geometry::*;
use moebius::hull::*;
use moebius::matrix::sup_norm;
use moebius::rng::SplitMix64;
use moebius::space::{cross_ratio, derivative, validate_matrix, Tolerances};
use moebius::tangent::*;
use moebius::{AntipodalSpace, MoebiusPoint};

use crate::report::Check;

pub const SUITES: &[&str] = &["space", "flow", "geometry", "tangent", "hull"];

pub fn zoo() -> Vec<(&'static str, AntipodalSpace)> {
    vec![
        ("discrete2", gen_discrete(2).unwrap()),
        ("discrete3", gen_discrete(3).unwrap()),
        ("discrete6", gen_discrete(6).unwrap()),
        ("circle4", gen_circle(4).unwrap()),
        ("circle8", gen_circle(8).unwrap()),
        ("circle16", gen_circle(16).unwrap()),
        ("dendro8", gen_dendrogram(&dendrogram_balanced8()).unwrap()),
        (
            "dendro5",
            gen_dendrogram(&dendrogram_caterpillar5()).unwrap(),
        ),
        ("quasi17", gen_quasimetric(8, 1.7, 2024).unwrap()),
    ]
}

pub fn run_suite(suite: &str, seed: u64, cfg: &FlowConfig, tol: &Tolerances) -> Vec<Check> {
    match suite {
        "space" => space_suite(seed, cfg, tol),
        "flow" => flow_suite(seed, cfg),
        "geometry" => geometry_suite(seed, cfg),
        "tangent" => tangent_suite(seed, cfg),
        "hull" => hull_suite(seed, cfg),
        _ => vec![Check::flag(format!("unknown suite {suite}"), false)],
    }
}

fn points(
    space: &AntipodalSpace,
    count: usize,
    rng: &mut SplitMix64,
    cfg: &FlowConfig,
) -> Vec<MoebiusPoint> {
    (0..count)
        .map(|_| random_point(space, rng.next_u64(), 1.2, cfg).unwrap())
        .collect()
}

fn rand_tau(rng: &mut SplitMix64, n: usize, amp: f64) -> Vec<f64> {
    (0..n).map(|_| rng.next_symmetric(amp)).collect()
}

fn space_suite(seed: u64, cfg: &FlowConfig, tol: &Tolerances) -> Vec<Check> {
    let mut checks = Vec::new();
    let mut rng = SplitMix64::new(seed);
    for (name, s) in zoo() {
        let report = validate_matrix(s.rho(), tol).unwrap();
        checks.push(Check::le(
            format!("space/{name}/validate-failures"),
            report.failures.len() as f64,
            0.0,
        ));
        let pts = points(&s, 4, &mut rng, cfg);
        // Lemma maxmin: max+min defect of coordinate differences.
        let mut worst = 0.0_f64;
        for a in &pts {
            for b in &pts {
                worst = worst.max(s.dist_detail(a, b).unwrap().maxmin_defect);
            }
        }
        checks.push(Check::le(
            format!("space/{name}/maxmin-defect"),
            worst,
            1e-9,
        ));
        // Antipodal kernels for certified members.
        let mut worst_row = 0.0_f64;
        for p in &pts {
            let e = s.apply_e(p.tau());
            for i in 0..s.n() {
                let row_max = (0..s.n())
                    .filter(|&j| j != i)
                    .map(|j| e[(i, j)])
                    .fold(f64::NEG_INFINITY, f64::max);
                worst_row = worst_row.max(1.0 - row_max);
            }
        }
        checks.push(Check::le(
            format!("space/{name}/member-antipodality"),
            worst_row,
            tol.antipode,
        ));
        if s.n() >= 4 {
            // Cross-ratio invariance under E.
            let tau = rand_tau(&mut rng, s.n(), 1.0);
            let image = s.apply_e(&tau);
            let mut worst_cr = 0.0_f64;
            for _ in 0..10 {
                let mut q = [0usize; 4];
                loop {
                    for slot in q.iter_mut() {
                        *slot = rng.next_below(s.n());
                    }
                    let mut v = q.to_vec();
                    v.sort_unstable();
                    v.dedup();
                    if v.len() == 4 {
                        break;
                    }
                }
                let a = cross_ratio(s.rho(), q).unwrap();
                let b = cross_ratio(&image, q).unwrap();
                worst_cr = worst_cr.max((a - b).abs() / a.abs().max(1.0));
            }
            checks.push(Check::le(
                format!("space/{name}/cross-ratio-invariance"),
                worst_cr,
                1e-10,
            ));
        }
        if s.n() >= 3 {
            // Chain rule on E-generated triples.
            let t1 = rand_tau(&mut rng, s.n(), 1.0);
            let t2 = rand_tau(&mut rng, s.n(), 1.0);
            let r1 = s.apply_e(&t1);
            let r2 = s.apply_e(&t2);
            let mut worst_chain = 0.0_f64;
            for xi in 0..s.n() {
                let aux: Vec<usize> = (0..s.n()).filter(|&k| k != xi).collect();
                let d31 = derivative(&r2, s.rho(), xi, aux[0], aux[1]).unwrap();
                let d32 = derivative(&r2, &r1, xi, aux[0], aux[1]).unwrap();
                let d21 = derivative(&r1, s.rho(), xi, aux[0], aux[1]).unwrap();
                worst_chain = worst_chain.max((d31 - d32 * d21).abs() / d31.abs().max(1.0));
            }
            checks.push(Check::le(
                format!("space/{name}/chain-rule"),
                worst_chain,
                1e-10,
            ));
        }
        // Pushforward isometry, bit-exact.
        let mut perm: Vec<usize> = (0..s.n()).collect();
        rng.shuffle(&mut perm);
        let (s2, a2) = s.pushforward_point(&perm, &pts[0]).unwrap();
        let (_, b2) = s.pushforward_point(&perm, &pts[1]).unwrap();
        let exact =
            s.dist(&pts[0], &pts[1]).unwrap().to_bits() == s2.dist(&a2, &b2).unwrap().to_bits();
        checks.push(Check::flag(
            format!("space/{name}/pushforward-isometry"),
            exact,
        ));
    }
    checks
}

fn flow_suite(seed: u64, cfg: &FlowConfig) -> Vec<Check> {
    let mut checks = Vec::new();
    let mut rng = SplitMix64::new(seed.wrapping_add(1));
    for (name, s) in zoo() {
        let n = s.n();
        let zeros = vec![0.0; n];
        // Lipschitz bounds.
        let mut worst_bound = 0.0_f64;
        let mut worst_lip = 0.0_f64;
        for _ in 0..5 {
            let tau = rand_tau(&mut rng, n, 2.0);
            let sigma = rand_tau(&mut rng, n, 2.0);
            let dt = discrepancy(&s, &zeros, &tau);
            let ds = discrepancy(&s, &zeros, &sigma);
            worst_bound = worst_bound.max(sup_norm(&dt) - 2.0 * sup_norm(&tau));
            let diff: Vec<f64> = dt.iter().zip(&ds).map(|(a, b)| a - b).collect();
            let gap: Vec<f64> = tau.iter().zip(&sigma).map(|(a, b)| a - b).collect();
            worst_lip = worst_lip.max(sup_norm(&diff) - 2.0 * sup_norm(&gap));
        }
        checks.push(Check::le(
            format!("flow/{name}/lipschitz-bound"),
            worst_bound,
            1e-12,
        ));
        checks.push(Check::le(
            format!("flow/{name}/lipschitz-difference"),
            worst_lip,
            1e-12,
        ));
        // Decay envelopes along traces.
        let mut worst_env = f64::NEG_INFINITY;
        let mut worst_pt = f64::NEG_INFINITY;
        for _ in 0..3 {
            let tau0 = rand_tau(&mut rng, n, 1.5);
            let trace = integrate_flow(&s, &zeros, &tau0, cfg).unwrap();
            let discs: Vec<Vec<f64>> = trace
                .taus
                .iter()
                .map(|t| discrepancy(&s, &zeros, t))
                .collect();
            for j in 0..trace.times.len() {
                for k in j..trace.times.len() {
                    let dt = trace.times[k] - trace.times[j];
                    worst_env = worst_env
                        .max(trace.disc_norms[k] - 2.0 * trace.disc_norms[j] * (-dt / 2.0).exp());
                    for i in 0..n {
                        if discs[j][i] >= 0.0 {
                            worst_pt = worst_pt.max(discs[k][i] - discs[j][i] * (-2.0 * dt).exp());
                        }
                    }
                }
            }
        }
        checks.push(Check::le(
            format!("flow/{name}/decay-envelope"),
            worst_env,
            1e-6,
        ));
        checks.push(Check::le(
            format!("flow/{name}/pointwise-decay"),
            worst_pt,
            1e-6,
        ));
        // pinfest sandwich.
        let mut worst_sand = f64::NEG_INFINITY;
        for _ in 0..5 {
            let tau0 = rand_tau(&mut rng, n, 1.5);
            let p = antipodalize(&s, &zeros, &tau0, cfg).unwrap();
            let d0 = discrepancy(&s, &zeros, &tau0);
            let e0 = s.apply_e(&tau0);
            for i in 0..n {
                let partner = (0..n)
                    .filter(|&j| j != i)
                    .max_by(|&a, &b| e0[(i, a)].partial_cmp(&e0[(i, b)]).unwrap())
                    .unwrap();
                worst_sand = worst_sand
                    .max(tau0[i] - 0.5 * d0[i] - p.tau()[i])
                    .max(p.tau()[i] - (tau0[i] - d0[i] + 0.5 * d0[partner]));
            }
        }
        checks.push(Check::le(
            format!("flow/{name}/pinfest-sandwich"),
            worst_sand,
            4.0 * cfg.tol_flow,
        ));
        // Base invariance and idempotence.
        let base = random_point(&s, rng.next_u64(), 1.0, cfg).unwrap();
        let tau0 = rand_tau(&mut rng, n, 1.0);
        let via_base = antipodalize(&s, base.tau(), &tau0, cfg).unwrap();
        let shifted: Vec<f64> = base.tau().iter().zip(&tau0).map(|(b, t)| b + t).collect();
        let via_zero = antipodalize(&s, &zeros, &shifted, cfg).unwrap();
        checks.push(Check::le(
            format!("flow/{name}/base-invariance"),
            s.dist(&via_base, &via_zero).unwrap(),
            1e-6,
        ));
        let twice = antipodalize(&s, &zeros, via_zero.tau(), cfg).unwrap();
        checks.push(Check::le(
            format!("flow/{name}/idempotence"),
            s.dist(&via_zero, &twice).unwrap(),
            4.0 * cfg.tol_flow,
        ));
    }
    checks
}

fn geometry_suite(seed: u64, cfg: &FlowConfig) -> Vec<Check> {
    let mut checks = Vec::new();
    let mut rng = SplitMix64::new(seed.wrapping_add(2));
    for (name, s) in zoo() {
        // Geodesic additivity, 30 seeded pairs per space.
        let mut worst_add = 0.0_f64;
        for _ in 0..30 {
            let a = random_point(&s, rng.next_u64(), 1.0, cfg).unwrap();
            let b = random_point(&s, rng.next_u64(), 1.0, cfg).unwrap();
            let d = s.dist(&a, &b).unwrap();
            for t in [0.25, 0.5, 0.75] {
                let p = combine(&s, &[a.clone(), b.clone()], &[1.0 - t, t], cfg).unwrap();
                worst_add = worst_add.max((s.dist(&a, &p).unwrap() - t * d).abs());
            }
        }
        checks.push(Check::le(
            format!("geometry/{name}/geodesic-additivity"),
            worst_add,
            5.0 * cfg.tol_flow,
        ));
        // Ray concatenation.
        let xi = rng.next_below(s.n());
        let ray = extend_ray(&s, &s.base_point(), xi, 1.0, 8, cfg).unwrap();
        checks.push(Check::flag(
            format!("geometry/{name}/ray-complete"),
            ray.complete(),
        ));
        let mut worst_ray = f64::NEG_INFINITY;
        for i in 0..ray.points.len() {
            for j in i..ray.points.len() {
                let got = s.dist(&ray.points[i], &ray.points[j]).unwrap();
                let want = (j - i) as f64;
                worst_ray =
                    worst_ray.max((got - want).abs() - ((j - i) + 1) as f64 * 4.0 * cfg.tol_flow);
            }
        }
        checks.push(Check::le(
            format!("geometry/{name}/ray-concatenation"),
            worst_ray,
            0.0,
        ));
        // Gromov product upper bound.
        let pts = points(&s, 4, &mut rng, cfg);
        let mut bound_ok = true;
        for a in &pts {
            for b in &pts {
                for w in &pts {
                    bound_ok &= gromov_product(&s, a, b, w, cfg.tol_flow).unwrap().bound_ok;
                }
            }
        }
        checks.push(Check::flag(
            format!("geometry/{name}/gromov-upper-bound"),
            bound_ok,
        ));
        // maxdiam superlevel bound.
        let mut worst_md = f64::NEG_INFINITY;
        for r in [0.25, 0.5, 1.0] {
            let rep = maxdiam_check(&s, &pts[0], &pts[1], r, cfg.tol_flow).unwrap();
            worst_md = worst_md.max(rep.diameter - rep.bound - 8.0 * cfg.tol_flow);
        }
        checks.push(Check::le(
            format!("geometry/{name}/maxdiam-bound"),
            worst_md,
            0.0,
        ));
    }
    // Ultrametric closure and tree degeneration on dendrogram spaces.
    for (name, s) in zoo() {
        if !name.starts_with("dendro") {
            continue;
        }
        let pts = points(&s, 10, &mut rng, cfg);
        let mut worst_k = 0.0_f64;
        for p in &pts {
            worst_k = worst_k.max(quasimetric_constant(&s.apply_e(p.tau())).k);
        }
        checks.push(Check::le(
            format!("geometry/{name}/ultrametric-closure"),
            worst_k,
            1.0 + 1e-6,
        ));
        let rep = hyperbolicity_delta(&s, &pts, pts.len(), seed).unwrap();
        checks.push(Check::le(
            format!("geometry/{name}/tree-delta"),
            rep.delta_hat,
            1e-6,
        ));
    }
    // Delta vs K on circle spaces, deep rays with the base as the pivot.
    for n in [8usize, 16] {
        let s = gen_circle(n).unwrap();
        let base = s.base_point();
        let mut pts = vec![base.clone()];
        for xi in 0..n {
            let ray = extend_ray(&s, &base, xi, 1.0, 10, cfg).unwrap();
            pts.push(ray.tip().clone());
        }
        let taus: Vec<&[f64]> = pts.iter().map(|p| p.tau()).collect();
        let d = moebius::scan::pairwise_distances(&taus);
        let gp = |a: usize, b: usize| 0.5 * (d[(0, a)] + d[(0, b)] - d[(a, b)]);
        let mut delta_hat = 0.0_f64;
        for x in 1..=n {
            for y in 1..=n {
                for z in 1..=n {
                    if x != y && x != z && y != z {
                        delta_hat = delta_hat.max(gp(x, z).min(gp(z, y)) - gp(x, y));
                    }
                }
            }
        }
        let log_k = quasimetric_constant(s.rho()).k.ln();
        checks.push(Check::ge(
            format!("geometry/circle{n}/delta-vs-logk"),
            delta_hat,
            log_k - 0.05,
        ));
    }
    // Frink bounds.
    for (name, m) in [
        ("circle4", gen_circle(4).unwrap().rho().clone()),
        (
            "dendro5",
            gen_dendrogram(&dendrogram_caterpillar5())
                .unwrap()
                .rho()
                .clone(),
        ),
        (
            "quasi17",
            gen_quasimetric(8, 1.7, 2024).unwrap().rho().clone(),
        ),
    ] {
        let rep = frink_metric(&m).unwrap();
        checks.push(Check::flag(
            format!("geometry/{name}/frink-bounds"),
            rep.lower_ok && rep.upper_ok,
        ));
    }
    checks
}

fn tangent_suite(seed: u64, cfg: &FlowConfig) -> Vec<Check> {
    let mut checks = Vec::new();
    let mut rng = SplitMix64::new(seed.wrapping_add(3));
    // Dimension formula on the catalogued graphs.
    let s3 = gen_discrete(3).unwrap();
    let k3 = odd_basis(&s3, &s3.base_point()).unwrap().dimension;
    checks.push(Check::le("tangent/k3-dimension", k3 as f64, 0.0));
    let path_pt = s3.certify(vec![0.5, -0.5, -0.5], cfg.tol_flow).unwrap();
    let path_dim = odd_basis(&s3, &path_pt).unwrap().dimension;
    checks.push(Check::flag("tangent/path-dimension-1", path_dim == 1));
    let c4 = gen_circle(4).unwrap();
    let match_dim = odd_basis(&c4, &c4.base_point()).unwrap().dimension;
    checks.push(Check::flag("tangent/matching-dimension-2", match_dim == 2));
    // Exact line realization on random certified points.
    for (name, s) in zoo() {
        if s.n() < 4 {
            continue;
        }
        let mut worst = 0.0_f64;
        let mut tried = 0;
        for _ in 0..6 {
            let x = random_point(&s, rng.next_u64(), 1.0, cfg).unwrap();
            let odd = odd_basis(&s, &x).unwrap();
            if odd.dimension == 0 {
                continue;
            }
            let mut v = vec![0.0_f64; s.n()];
            for b in &odd.basis {
                let c = rng.next_symmetric(1.0);
                for (vi, bi) in v.iter_mut().zip(b) {
                    *vi += c * bi;
                }
            }
            if sup_norm(&v) < 1e-3 {
                continue;
            }
            let probe = tangent_line_check(&s, &x, &v, 0.0, cfg).unwrap();
            if !probe.t_star.is_finite() {
                continue;
            }
            let chk = tangent_line_check(&s, &x, &v, 0.9 * probe.t_star, cfg).unwrap();
            worst = worst.max(chk.disc_norm);
            tried += 1;
        }
        if tried > 0 {
            checks.push(Check::le(
                format!("tangent/{name}/exact-lines"),
                worst,
                1e-12,
            ));
        }
    }
    // Odd projection linearity and idempotence at a uniquely antipodal point.
    let c8 = gen_circle(8).unwrap();
    let base = c8.base_point();
    let u = rand_tau(&mut rng, 8, 2.0);
    let v = rand_tau(&mut rng, 8, 2.0);
    let pu = odd_projection(&c8, &base, &u).unwrap();
    let pv = odd_projection(&c8, &base, &v).unwrap();
    let again = odd_projection(&c8, &base, &pu).unwrap();
    let sum: Vec<f64> = u.iter().zip(&v).map(|(a, b)| a + b).collect();
    let psum = odd_projection(&c8, &base, &sum).unwrap();
    let mut worst_proj = 0.0_f64;
    for i in 0..8 {
        worst_proj = worst_proj
            .max((again[i] - pu[i]).abs())
            .max((psum[i] - pu[i] - pv[i]).abs());
    }
    checks.push(Check::le(
        "tangent/odd-projection-linear-idempotent",
        worst_proj,
        1e-12,
    ));
    checks
}

fn hull_suite(seed: u64, cfg: &FlowConfig) -> Vec<Check> {
    let mut checks = Vec::new();
    let mut rng = SplitMix64::new(seed.wrapping_add(4));
    let s = gen_circle(8).unwrap();
    let alpha = random_point(&s, rng.next_u64(), 1.0, cfg).unwrap();
    let beta = random_point(&s, rng.next_u64(), 1.0, cfg).unwrap();
    let mut defects = Vec::new();
    let mut gaps = Vec::new();
    for depth in [4usize, 7, 10] {
        let spec = SampleSpec {
            rays: (0..8)
                .map(|xi| RaySpec {
                    xi,
                    depth,
                    step: 1.0,
                })
                .collect(),
            random: Some(RandomSpec {
                count: 10,
                seed: rng.next_u64(),
                amplitude: 1.0,
            }),
        };
        let sample = build_sample(&s, &spec, cfg).unwrap();
        checks.push(Check::le(
            format!("hull/depth{depth}/triangle-defect"),
            sample.triangle_defect,
            8.0 * cfg.tol_flow,
        ));
        let f = dist_function(&s, &sample, &alpha).unwrap();
        let rep = extremal_check(&sample, &f, 8.0 * cfg.tol_flow).unwrap();
        checks.push(Check::flag(
            format!("hull/depth{depth}/dist-in-delta"),
            rep.in_delta,
        ));
        defects.push(rep.max_abs_defect);
        gaps.push(
            hull_isometry_check(&s, &sample, &alpha, &beta)
                .unwrap()
                .gap
                .abs(),
        );
        // Boundary values of d_alpha along each ray approximate the
        // coordinates of alpha.
        if depth == 10 {
            let mut worst_bv = 0.0_f64;
            let mut monotone = true;
            for xi in 0..8 {
                let rep = boundary_value(&sample, xi, &f, 0, 8.0 * cfg.tol_flow).unwrap();
                monotone &= rep.monotone_ok;
                worst_bv = worst_bv.max((rep.value - alpha.tau()[xi]).abs());
            }
            checks.push(Check::flag("hull/depth10/boundary-monotone", monotone));
            checks.push(Check::le("hull/depth10/boundary-value-gap", worst_bv, 0.05));
        }
    }
    checks.push(Check::le("hull/defect-at-depth10", defects[2], 0.02));
    checks.push(Check::le("hull/gap-at-depth10", gaps[2], 0.02));
    checks.push(Check::le(
        "hull/defect-monotone-fallback",
        defects[2] - defects[0],
        1e-3,
    ));
    checks.push(Check::le(
        "hull/gap-monotone-fallback",
        gaps[2] - gaps[0],
        1e-3,
    ));
    checks
}
