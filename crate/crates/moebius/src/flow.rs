//! The antipodal flow `d tau / dt = -D(tau)` and the maps built on its limit:
//! antipodalization, retraction onto M(Z), and the contraction homotopy.
//!
//! The discrepancy `D` is globally 2-Lipschitz, so fixed-step explicit
//! integration is stable; correctness of the returned point is certified a
//! posteriori by the residual bound `|tau_end - tau_inf| <= 4 |D(tau_end)|`,
//! not by integration order. After the integrator reaches tolerance, a
//! terminal projection solves the active antipode pattern exactly, which
//! typically drops the residual to rounding level.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{sup_norm, SquareMatrix};
use crate::space::{moebius_equivalent, sup_norm_diff, AntipodalSpace, MoebiusPoint};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopReason {
    ToleranceReached,
    MaxTime,
    Stationary,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Rk4,
    Euler,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct FlowConfig {
    pub tol_flow: f64,
    pub step_h: f64,
    pub max_time: f64,
    pub sample_every: f64,
    pub method: Method,
    /// Terminal exact-pattern projection after the integrator stops.
    pub polish: bool,
}

impl Default for FlowConfig {
    fn default() -> Self {
        FlowConfig {
            tol_flow: 1e-8,
            step_h: 0.01,
            max_time: 80.0,
            sample_every: 0.5,
            method: Method::Rk4,
            polish: true,
        }
    }
}

impl FlowConfig {
    fn check(&self) -> Result<()> {
        if !(self.tol_flow > 0.0) || !(self.step_h > 0.0) {
            return Err(Error::Argument(
                "flow config requires tol_flow > 0 and step_h > 0".into(),
            ));
        }
        Ok(())
    }
}

/// Time-stamped record of one integration.
#[derive(Debug, Clone, Serialize)]
pub struct FlowTrace {
    pub times: Vec<f64>,
    /// Sampled states, in base-relative coordinates.
    pub taus: Vec<Vec<f64>>,
    pub disc_norms: Vec<f64>,
    pub stop_reason: StopReason,
    /// False when max_time was reached before the tolerance.
    pub certified: bool,
}

impl FlowTrace {
    pub fn final_tau(&self) -> &[f64] {
        self.taus.last().expect("trace has at least one sample")
    }

    pub fn final_disc_norm(&self) -> f64 {
        *self
            .disc_norms
            .last()
            .expect("trace has at least one sample")
    }
}

/// Discrepancy of `tau` relative to the member with base coordinate
/// `base_tau` (pass zeros for the base kernel itself). Both sides of the
/// base-shift identity reduce to the same arithmetic on `base + tau`.
pub fn discrepancy(space: &AntipodalSpace, base_tau: &[f64], tau: &[f64]) -> Vec<f64> {
    let w: Vec<f64> = base_tau.iter().zip(tau).map(|(&b, &t)| b + t).collect();
    space.discrepancy_at(&w)
}

fn neg_discrepancy_into(space: &AntipodalSpace, base: &[f64], tau: &[f64], out: &mut [f64]) {
    let d = discrepancy(space, base, tau);
    for (o, v) in out.iter_mut().zip(d) {
        *o = -v;
    }
}

/// Integrates the antipodal flow from `tau0` (coordinates relative to the
/// member at `base_tau`) until `|D| <= tol_flow / 4` or `max_time`.
pub fn integrate_flow(
    space: &AntipodalSpace,
    base_tau: &[f64],
    tau0: &[f64],
    config: &FlowConfig,
) -> Result<FlowTrace> {
    config.check()?;
    let n = space.n();
    if base_tau.len() != n || tau0.len() != n {
        return Err(Error::Argument(format!(
            "coordinate length must equal space size {n}"
        )));
    }
    let stop_at = config.tol_flow / 4.0;
    let h = config.step_h;
    let steps_per_sample = (config.sample_every / h).round().max(1.0) as u64;

    let mut tau = tau0.to_vec();
    let mut t = 0.0_f64;
    let mut d = discrepancy(space, base_tau, &tau);
    let mut norm = sup_norm(&d);

    let mut trace = FlowTrace {
        times: vec![0.0],
        taus: vec![tau.clone()],
        disc_norms: vec![norm],
        stop_reason: StopReason::Stationary,
        certified: true,
    };
    if norm <= stop_at {
        return Ok(trace);
    }

    let mut k1 = vec![0.0; n];
    let mut k2 = vec![0.0; n];
    let mut k3 = vec![0.0; n];
    let mut k4 = vec![0.0; n];
    let mut stage = vec![0.0; n];
    let mut step_count: u64 = 0;

    loop {
        match config.method {
            Method::Euler => {
                for i in 0..n {
                    tau[i] -= h * d[i];
                }
            }
            Method::Rk4 => {
                for i in 0..n {
                    k1[i] = -d[i];
                }
                for i in 0..n {
                    stage[i] = tau[i] + 0.5 * h * k1[i];
                }
                neg_discrepancy_into(space, base_tau, &stage, &mut k2);
                for i in 0..n {
                    stage[i] = tau[i] + 0.5 * h * k2[i];
                }
                neg_discrepancy_into(space, base_tau, &stage, &mut k3);
                for i in 0..n {
                    stage[i] = tau[i] + h * k3[i];
                }
                neg_discrepancy_into(space, base_tau, &stage, &mut k4);
                for i in 0..n {
                    tau[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
                }
            }
        }
        t += h;
        step_count += 1;
        d = discrepancy(space, base_tau, &tau);
        norm = sup_norm(&d);

        let done = norm <= stop_at;
        let timed_out = !done && t >= config.max_time;
        if done || timed_out || step_count.is_multiple_of(steps_per_sample) {
            trace.times.push(t);
            trace.taus.push(tau.clone());
            trace.disc_norms.push(norm);
        }
        if done {
            trace.stop_reason = StopReason::ToleranceReached;
            return Ok(trace);
        }
        if timed_out {
            trace.stop_reason = StopReason::MaxTime;
            trace.certified = false;
            return Ok(trace);
        }
    }
}

/// Terminal projection: reads off the active antipode pattern near the flow
/// limit and solves it exactly in the least-squares sense, keeping the
/// correction minimal-norm (conjugate gradient on the edge normal equations).
/// Returns the polished coordinates when they strictly improve the residual.
fn polish_pattern(space: &AntipodalSpace, tau: &[f64]) -> Option<(Vec<f64>, f64)> {
    let n = space.n();
    let mut best = tau.to_vec();
    let mut best_res = sup_norm(&space.discrepancy_at(&best));
    let mut improved = false;

    for _ in 0..4 {
        if best_res <= 1e-15 {
            break;
        }
        let slack = 8.0 * best_res + 1e-12;
        // Edge (i, j) is near-active when tau_i + tau_j + log rho0^2 >= -slack.
        let mut edges: Vec<(usize, usize, f64)> = Vec::new();
        let mut degree = vec![0usize; n];
        for i in 0..n {
            let row = space.log2rho().row(i);
            for j in (i + 1)..n {
                let s = best[i] + best[j] + row[j];
                if s >= -slack {
                    edges.push((i, j, -s));
                    degree[i] += 1;
                    degree[j] += 1;
                }
            }
        }
        if degree.contains(&0) {
            break;
        }
        // Normal equations (A^T A) sigma = A^T c for rows sigma_i + sigma_j = c_e.
        let mut b = vec![0.0_f64; n];
        for &(i, j, c) in &edges {
            b[i] += c;
            b[j] += c;
        }
        let apply = |x: &[f64], out: &mut [f64]| {
            for (o, (&xi, &deg)) in out.iter_mut().zip(x.iter().zip(&degree)) {
                *o = deg as f64 * xi;
            }
            for &(i, j, _) in &edges {
                out[i] += x[j];
                out[j] += x[i];
            }
        };
        let sigma = conjugate_gradient(apply, &b, n, 4 * n + 16);
        let cand: Vec<f64> = best.iter().zip(&sigma).map(|(&t, &s)| t + s).collect();
        let res = sup_norm(&space.discrepancy_at(&cand));
        if res < best_res {
            best = cand;
            best_res = res;
            improved = true;
        } else {
            break;
        }
    }
    improved.then_some((best, best_res))
}

fn conjugate_gradient(
    apply: impl Fn(&[f64], &mut [f64]),
    b: &[f64],
    n: usize,
    max_iter: usize,
) -> Vec<f64> {
    let mut x = vec![0.0_f64; n];
    let mut r = b.to_vec();
    let mut p = b.to_vec();
    let mut ap = vec![0.0_f64; n];
    let b_norm2: f64 = b.iter().map(|v| v * v).sum();
    if b_norm2 == 0.0 {
        return x;
    }
    let mut rs: f64 = b_norm2;
    for _ in 0..max_iter {
        apply(&p, &mut ap);
        let pap: f64 = p.iter().zip(&ap).map(|(a, b)| a * b).sum();
        if pap <= 0.0 {
            break;
        }
        let alpha = rs / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rs_new: f64 = r.iter().map(|v| v * v).sum();
        if rs_new <= 1e-30 * b_norm2 {
            break;
        }
        let beta = rs_new / rs;
        rs = rs_new;
        for i in 0..n {
            p[i] = r[i] + beta * p[i];
        }
    }
    x
}

/// The antipodalization map: flows `tau0` (relative to the member at
/// `base_tau`) to its limit and returns the limit in base-kernel coordinates.
pub fn antipodalize(
    space: &AntipodalSpace,
    base_tau: &[f64],
    tau0: &[f64],
    config: &FlowConfig,
) -> Result<MoebiusPoint> {
    antipodalize_traced(space, base_tau, tau0, config).map(|(p, _)| p)
}

/// Same as [`antipodalize`] but also returns the integration trace.
pub fn antipodalize_traced(
    space: &AntipodalSpace,
    base_tau: &[f64],
    tau0: &[f64],
    config: &FlowConfig,
) -> Result<(MoebiusPoint, FlowTrace)> {
    let trace = integrate_flow(space, base_tau, tau0, config)?;
    if !trace.certified {
        return Err(Error::NotCertified(format!(
            "flow hit max_time {} with residual {:.3e}",
            config.max_time,
            trace.final_disc_norm()
        )));
    }
    // Back to rho0 coordinates per the base-invariance identity.
    let mut tau: Vec<f64> = base_tau
        .iter()
        .zip(trace.final_tau())
        .map(|(&b, &t)| b + t)
        .collect();
    let mut residual = sup_norm(&space.discrepancy_at(&tau));
    // The stationary case returns the input unchanged; only flowed states
    // get the terminal projection.
    if config.polish && trace.stop_reason == StopReason::ToleranceReached {
        if let Some((polished, res)) = polish_pattern(space, &tau) {
            tau = polished;
            residual = res;
        }
    }
    Ok((MoebiusPoint::from_parts(tau, residual, space.id()), trace))
}

/// Reruns the flow with half the step and checks that both limits agree
/// within `10 * tol_flow`. Returns (point, limit gap).
pub fn antipodalize_verified(
    space: &AntipodalSpace,
    base_tau: &[f64],
    tau0: &[f64],
    config: &FlowConfig,
) -> Result<(MoebiusPoint, f64)> {
    let p = antipodalize(space, base_tau, tau0, config)?;
    let halved = FlowConfig {
        step_h: config.step_h / 2.0,
        ..*config
    };
    let q = antipodalize(space, base_tau, tau0, &halved)?;
    let gap = sup_norm_diff(p.tau(), q.tau());
    if gap > 10.0 * config.tol_flow {
        return Err(Error::NotCertified(format!(
            "step-halving check failed: limits differ by {gap:.3e}"
        )));
    }
    Ok((p, gap))
}

/// Retraction of the unrestricted Moebius space onto M(Z): reads coordinates
/// off a Moebius-equivalent kernel and antipodalizes them. Fixes members.
pub fn retract(
    space: &AntipodalSpace,
    rho: &SquareMatrix,
    equiv_tol: f64,
    config: &FlowConfig,
) -> Result<MoebiusPoint> {
    if rho.n() != space.n() {
        return Err(Error::Argument("matrix size differs from space".into()));
    }
    let (ok, deviation) = moebius_equivalent(space.rho(), rho, equiv_tol)?;
    if !ok {
        return Err(Error::NotMoebius {
            deviation,
            tol: equiv_tol,
        });
    }
    let tau = crate::space::log_derivative(rho, space.rho())?;
    let zeros = vec![0.0; space.n()];
    antipodalize(space, &zeros, &tau, config)
}

/// The contraction homotopy `H(x, t) = P_inf(t * x)`; `H(., 0)` is the base
/// point and `H(., 1)` is the identity on members.
pub fn homotopy_point(
    space: &AntipodalSpace,
    x: &MoebiusPoint,
    t: f64,
    config: &FlowConfig,
) -> Result<MoebiusPoint> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::Argument(format!("homotopy time {t} outside [0,1]")));
    }
    if !space.owns(x) {
        return Err(Error::SpaceMismatch);
    }
    let scaled: Vec<f64> = x.tau().iter().map(|&v| t * v).collect();
    let zeros = vec![0.0; space.n()];
    antipodalize(space, &zeros, &scaled, config)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::Tolerances;

    fn discrete(n: usize) -> AntipodalSpace {
        let rho = SquareMatrix::from_fn(n, |i, j| if i == j { 0.0 } else { 1.0 });
        AntipodalSpace::with_default_labels(rho, &Tolerances::default()).unwrap()
    }

    fn zeros(n: usize) -> Vec<f64> {
        vec![0.0; n]
    }

    #[test]
    fn two_point_flow_matches_hand_integration() {
        // On two points with rho = 1, D(tau) = (s, s) for s = tau0 + tau1,
        // so s' = -2s and the limit is tau - s0/2 in each coordinate.
        let s = discrete(2);
        let p = antipodalize(&s, &zeros(2), &[1.0, 0.0], &FlowConfig::default()).unwrap();
        assert!((p.tau()[0] - 0.5).abs() < 1e-6, "{:?}", p.tau());
        assert!((p.tau()[1] + 0.5).abs() < 1e-6);
        assert!(p.residual() <= 1e-8);
    }

    #[test]
    fn euler_agrees_with_rk4_on_two_point_flow() {
        let s = discrete(2);
        let cfg = FlowConfig {
            method: Method::Euler,
            step_h: 0.001,
            ..FlowConfig::default()
        };
        let p = antipodalize(&s, &zeros(2), &[1.0, 0.0], &cfg).unwrap();
        assert!((p.tau()[0] - 0.5).abs() < 1e-6);
    }

    #[test]
    fn discrete3_closed_form_limit() {
        let s = discrete(3);
        let p = antipodalize(&s, &zeros(3), &[1.0, 0.0, 0.0], &FlowConfig::default()).unwrap();
        let expect = [0.5, -0.5, -0.5];
        for (a, b) in p.tau().iter().zip(expect) {
            assert!((a - b).abs() < 1e-6, "{:?}", p.tau());
        }
    }

    #[test]
    fn stationary_input_is_returned_unchanged() {
        let s = discrete(3);
        let tau0 = [0.5, -0.5, -0.5];
        let (p, trace) = antipodalize_traced(&s, &zeros(3), &tau0, &FlowConfig::default()).unwrap();
        assert_eq!(trace.stop_reason, StopReason::Stationary);
        assert_eq!(trace.times.len(), 1);
        assert_eq!(p.tau(), &tau0);
    }

    #[test]
    fn max_time_is_a_non_certifying_stop() {
        let s = discrete(3);
        let cfg = FlowConfig {
            max_time: 0.05,
            ..FlowConfig::default()
        };
        let trace = integrate_flow(&s, &zeros(3), &[3.0, 0.0, 0.0], &cfg).unwrap();
        assert_eq!(trace.stop_reason, StopReason::MaxTime);
        assert!(!trace.certified);
        assert!(matches!(
            antipodalize(&s, &zeros(3), &[3.0, 0.0, 0.0], &cfg),
            Err(Error::NotCertified(_))
        ));
    }

    #[test]
    fn polish_reaches_rounding_level() {
        let s = discrete(3);
        let p = antipodalize(&s, &zeros(3), &[0.9, -0.2, 0.4], &FlowConfig::default()).unwrap();
        assert!(
            p.residual() <= 1e-12,
            "polished residual {:.3e}",
            p.residual()
        );
    }

    #[test]
    fn base_invariance_shift_identity_is_exact() {
        let s = discrete(3);
        let base = [0.5, -0.5, -0.5];
        let tau = [0.3, -0.7, 0.2];
        let shifted: Vec<f64> = base.iter().zip(&tau).map(|(&b, &t)| b + t).collect();
        let lhs = discrepancy(&s, &base, &tau);
        let rhs = discrepancy(&s, &zeros(3), &shifted);
        assert_eq!(lhs, rhs);
    }

    #[test]
    fn retract_fixes_members_and_handles_scaling() {
        let s = discrete(3);
        let cfg = FlowConfig::default();
        // A member kernel is fixed.
        let member = s.apply_e(&[0.5, -0.5, -0.5]);
        let p = retract(&s, &member, 1e-8, &cfg).unwrap();
        for (a, b) in p.tau().iter().zip([0.5, -0.5, -0.5]) {
            assert!((a - b).abs() < 1e-9);
        }
        // Uniform scaling breaks diameter one; the retraction lands on the base.
        let scaled = s.apply_e(&[0.8, 0.8, 0.8]);
        let q = retract(&s, &scaled, 1e-8, &cfg).unwrap();
        for &v in q.tau() {
            assert!(v.abs() < 1e-6, "{:?}", q.tau());
        }
        // A non-member image flows to the same limit as its coordinates.
        let bump = s.apply_e(&[1.0, 0.0, 0.0]);
        let r = retract(&s, &bump, 1e-8, &cfg).unwrap();
        for (a, b) in r.tau().iter().zip([0.5, -0.5, -0.5]) {
            assert!((a - b).abs() < 1e-6, "{:?}", r.tau());
        }
    }

    #[test]
    fn retract_rejects_non_moebius() {
        let c = {
            let rho = SquareMatrix::from_fn(4, |i, j| {
                let d = (i as i64 - j as i64)
                    .unsigned_abs()
                    .min(4 - (i as i64 - j as i64).unsigned_abs());
                match d {
                    0 => 0.0,
                    2 => 1.0,
                    _ => std::f64::consts::FRAC_1_SQRT_2,
                }
            });
            AntipodalSpace::with_default_labels(rho, &Tolerances::default()).unwrap()
        };
        let d4 = discrete(4);
        assert!(matches!(
            retract(&c, d4.rho(), 1e-8, &FlowConfig::default()),
            Err(Error::NotMoebius { .. })
        ));
    }

    #[test]
    fn homotopy_endpoints() {
        let s = discrete(3);
        let cfg = FlowConfig::default();
        let tip = s.certify(vec![2.0, -2.0, -2.0], 1e-8).unwrap();
        let at0 = homotopy_point(&s, &tip, 0.0, &cfg).unwrap();
        assert_eq!(at0.tau(), &[0.0, 0.0, 0.0]);
        let at1 = homotopy_point(&s, &tip, 1.0, &cfg).unwrap();
        assert!(sup_norm_diff(at1.tau(), tip.tau()) <= 4.0 * cfg.tol_flow);
        let half = homotopy_point(&s, &tip, 0.5, &cfg).unwrap();
        for (a, b) in half.tau().iter().zip([1.0, -1.0, -1.0]) {
            assert!((a - b).abs() < 1e-9);
        }
        assert!(matches!(
            homotopy_point(&s, &tip, 1.5, &cfg),
            Err(Error::Argument(_))
        ));
    }

    #[test]
    fn decay_envelope_along_trace() {
        let s = discrete(3);
        let trace =
            integrate_flow(&s, &zeros(3), &[2.0, -1.0, 0.5], &FlowConfig::default()).unwrap();
        for j in 0..trace.times.len() {
            for k in j..trace.times.len() {
                let bound =
                    2.0 * trace.disc_norms[j] * (-(trace.times[k] - trace.times[j]) / 2.0).exp()
                        + 1e-6;
                assert!(
                    trace.disc_norms[k] <= bound,
                    "envelope violated at ({j}, {k})"
                );
            }
        }
    }

    #[test]
    fn step_halving_check_passes() {
        let s = discrete(3);
        let (_, gap) =
            antipodalize_verified(&s, &zeros(3), &[1.0, -0.3, 0.2], &FlowConfig::default())
                .unwrap();
        assert!(gap <= 1e-7);
    }
}
