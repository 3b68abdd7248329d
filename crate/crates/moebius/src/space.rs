//! Finite antipodal spaces and the coordinate geometry of their Moebius spaces.
//!
//! An antipodal space is a finite set `Z` carrying a symmetric, positive,
//! diameter-one kernel `rho0` in which every point has a partner at value
//! exactly 1 (its antipode). Points of the Moebius space `M(Z)` are stored in
//! base coordinates `tau = log d(rho)/d(rho0)`, a length-`n` vector; the metric
//! is the sup norm of coordinate differences.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{sup_norm, SquareMatrix};

/// Sentinel for `log rho^2` on the diagonal. Maxima over partners always
/// exclude the diagonal explicitly, so this value never enters any result.
pub const LOG_DIAG_SENTINEL: f64 = f64::MIN;

/// Hard cap on the number of points; matrices are dense.
pub const MAX_POINTS: usize = 4096;

/// The canonical tolerance block. Echoed into reports by the CLI.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Tolerances {
    /// Slack for structural validation (diameter one, symmetry).
    pub validate: f64,
    /// Certification tolerance for flow limits and membership residuals.
    pub flow: f64,
    /// An entry counts as an antipode iff it is >= 1 - antipode.
    pub antipode: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            validate: 1e-12,
            flow: 1e-8,
            antipode: 1e-6,
        }
    }
}

/// Outcome of checking a candidate matrix against the antipodal-space rules.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ValidationReport {
    pub ok: bool,
    pub failures: Vec<RuleFailure>,
    pub diameter: f64,
    pub min_offdiag: f64,
    pub antipode_count_per_row: Vec<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RuleFailure {
    pub rule: String,
    pub witness: (usize, usize),
    pub value: f64,
}

/// Validates a candidate kernel. Structural problems (n < 2) are errors;
/// rule violations are reported, all of them, deterministically.
pub fn validate_matrix(matrix: &SquareMatrix, tol: &Tolerances) -> Result<ValidationReport> {
    let n = matrix.n();
    if n < 2 {
        return Err(Error::Structural(format!(
            "antipodal space needs at least 2 points, got {n}"
        )));
    }
    if n > MAX_POINTS {
        return Err(Error::Structural(format!(
            "space size {n} exceeds the configured cap {MAX_POINTS}"
        )));
    }
    let mut failures = Vec::new();
    let mut diameter = f64::NEG_INFINITY;
    let mut min_offdiag = f64::INFINITY;
    for i in 0..n {
        let d = matrix[(i, i)];
        if d != 0.0 {
            failures.push(RuleFailure {
                rule: "zero-diagonal".into(),
                witness: (i, i),
                value: d,
            });
        }
        for j in 0..n {
            if i == j {
                continue;
            }
            let v = matrix[(i, j)];
            if i < j {
                let w = matrix[(j, i)];
                if v != w {
                    failures.push(RuleFailure {
                        rule: "symmetry".into(),
                        witness: (i, j),
                        value: v - w,
                    });
                }
            }
            if !(v > 0.0) {
                failures.push(RuleFailure {
                    rule: "positivity".into(),
                    witness: (i, j),
                    value: v,
                });
            }
            diameter = diameter.max(v);
            min_offdiag = min_offdiag.min(v);
        }
    }
    if (diameter - 1.0).abs() > tol.validate {
        failures.push(RuleFailure {
            rule: "diameter-one".into(),
            witness: (0, 0),
            value: diameter,
        });
    }
    let cutoff = 1.0 - tol.antipode;
    let antipode_count_per_row: Vec<usize> = (0..n)
        .map(|i| {
            (0..n)
                .filter(|&j| j != i && matrix[(i, j)] >= cutoff)
                .count()
        })
        .collect();
    for (i, &c) in antipode_count_per_row.iter().enumerate() {
        if c == 0 {
            let row_max = (0..n)
                .filter(|&j| j != i)
                .map(|j| matrix[(i, j)])
                .fold(f64::NEG_INFINITY, f64::max);
            failures.push(RuleFailure {
                rule: "antipodality".into(),
                witness: (i, i),
                value: row_max,
            });
        }
    }
    Ok(ValidationReport {
        ok: failures.is_empty(),
        failures,
        diameter,
        min_offdiag,
        antipode_count_per_row,
    })
}

/// A finite antipodal space: the base kernel `rho0` plus its log-matrix.
/// Immutable after construction and safe to share across threads.
#[derive(Debug, Clone, Serialize)]
pub struct AntipodalSpace {
    labels: Vec<String>,
    rho: SquareMatrix,
    #[serde(skip)]
    log2rho: SquareMatrix,
    #[serde(skip)]
    tol_antipode: f64,
    #[serde(skip)]
    id: u64,
}

impl AntipodalSpace {
    pub fn new(labels: Vec<String>, rho: SquareMatrix, tol: &Tolerances) -> Result<Self> {
        let report = validate_matrix(&rho, tol)?;
        if !report.ok {
            return Err(Error::Validation(Box::new(report)));
        }
        let n = rho.n();
        if labels.len() != n {
            return Err(Error::Structural(format!(
                "got {} labels for {} points",
                labels.len(),
                n
            )));
        }
        {
            let mut seen = labels.clone();
            seen.sort();
            seen.dedup();
            if seen.len() != n {
                return Err(Error::Structural("labels are not distinct".into()));
            }
        }
        let log2rho = SquareMatrix::from_fn(n, |i, j| {
            if i == j {
                LOG_DIAG_SENTINEL
            } else {
                2.0 * rho[(i, j)].ln()
            }
        });
        let id = space_digest(&labels, &rho);
        Ok(AntipodalSpace {
            labels,
            rho,
            log2rho,
            tol_antipode: tol.antipode,
            id,
        })
    }

    /// Convenience constructor with labels "0", "1", ...
    pub fn with_default_labels(rho: SquareMatrix, tol: &Tolerances) -> Result<Self> {
        let labels = (0..rho.n()).map(|i| i.to_string()).collect();
        AntipodalSpace::new(labels, rho, tol)
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.rho.n()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn rho(&self) -> &SquareMatrix {
        &self.rho
    }

    /// `log rho0(i,j)^2` with the diagonal sentinel.
    pub fn log2rho(&self) -> &SquareMatrix {
        &self.log2rho
    }

    pub fn tol_antipode(&self) -> f64 {
        self.tol_antipode
    }

    /// Content digest; two spaces with equal labels and bit-equal kernels share it.
    pub fn id(&self) -> u64 {
        self.id
    }

    /// The base point `tau = 0`. Its residual is zero whenever the kernel
    /// attains 1 exactly on every row (true for all generated spaces).
    pub fn base_point(&self) -> MoebiusPoint {
        let tau = vec![0.0; self.n()];
        let residual = sup_norm(&self.discrepancy_at(&tau));
        MoebiusPoint {
            tau,
            residual,
            space_id: self.id,
        }
    }

    /// Discrepancy of a coordinate vector against the base kernel:
    /// `D(i) = max_{j != i} (w(i) + w(j) + log rho0(i,j)^2)`.
    ///
    /// Base changes reduce to this same arithmetic on `w = base + tau`, which
    /// makes the base-shift identity hold exactly.
    pub fn discrepancy_at(&self, w: &[f64]) -> Vec<f64> {
        let n = self.n();
        debug_assert_eq!(w.len(), n);
        let mut out = Vec::with_capacity(n);
        for i in 0..n {
            let row = self.log2rho.row(i);
            let mut best = f64::NEG_INFINITY;
            for j in 0..n {
                if j != i {
                    let v = w[i] + w[j] + row[j];
                    if v > best {
                        best = v;
                    }
                }
            }
            out.push(best);
        }
        out
    }

    /// The map E: entries `exp(w(i)/2) exp(w(j)/2) rho0(i,j)`, zero diagonal.
    pub fn apply_e(&self, tau: &[f64]) -> SquareMatrix {
        let n = self.n();
        debug_assert_eq!(tau.len(), n);
        let half: Vec<f64> = tau.iter().map(|&t| (0.5 * t).exp()).collect();
        SquareMatrix::from_fn(n, |i, j| {
            if i == j {
                0.0
            } else {
                half[i] * half[j] * self.rho[(i, j)]
            }
        })
    }

    /// E relative to a base coordinate: composes via the chain rule,
    /// `E_base(tau) = E_0(base + tau)`.
    pub fn apply_e_from(&self, base_tau: &[f64], tau: &[f64]) -> SquareMatrix {
        let w: Vec<f64> = base_tau.iter().zip(tau).map(|(&b, &t)| b + t).collect();
        self.apply_e(&w)
    }

    /// Certifies a coordinate vector as a member of M(Z).
    pub fn certify(&self, tau: Vec<f64>, tol_flow: f64) -> Result<MoebiusPoint> {
        if tau.len() != self.n() {
            return Err(Error::Argument(format!(
                "coordinate length {} != space size {}",
                tau.len(),
                self.n()
            )));
        }
        let residual = sup_norm(&self.discrepancy_at(&tau));
        if residual > tol_flow {
            return Err(Error::NotCertified(format!(
                "discrepancy {residual:.3e} exceeds tol {tol_flow:.3e}"
            )));
        }
        Ok(MoebiusPoint {
            tau,
            residual,
            space_id: self.id,
        })
    }

    /// Membership of a point in this space's chart.
    pub fn owns(&self, p: &MoebiusPoint) -> bool {
        p.space_id == self.id && p.tau.len() == self.n()
    }

    fn check_owns2(&self, a: &MoebiusPoint, b: &MoebiusPoint) -> Result<()> {
        if !self.owns(a) || !self.owns(b) {
            return Err(Error::SpaceMismatch);
        }
        Ok(())
    }

    /// The metric d_M: sup norm of the coordinate difference.
    pub fn dist(&self, a: &MoebiusPoint, b: &MoebiusPoint) -> Result<f64> {
        self.check_owns2(a, b)?;
        Ok(sup_norm_diff(&a.tau, &b.tau))
    }

    /// Distance plus the argmax/argmin sets of the difference and the
    /// max+min defect (zero for exact members).
    pub fn dist_detail(&self, a: &MoebiusPoint, b: &MoebiusPoint) -> Result<DistanceDetail> {
        self.check_owns2(a, b)?;
        let diff: Vec<f64> = b.tau.iter().zip(&a.tau).map(|(&x, &y)| x - y).collect();
        let max = diff.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let min = diff.iter().cloned().fold(f64::INFINITY, f64::min);
        let slack = 8.0 * (a.residual + b.residual) + 1e-9;
        let argmax = (0..diff.len())
            .filter(|&i| diff[i] >= max - slack)
            .collect();
        let argmin = (0..diff.len())
            .filter(|&i| diff[i] <= min + slack)
            .collect();
        Ok(DistanceDetail {
            value: max.max(-min),
            argmax,
            argmin,
            maxmin_defect: (max + min).abs(),
            slack,
        })
    }

    /// Indices where `b - a` comes within `slack` of its maximum.
    /// Default slack is `8 (res_a + res_b) + 1e-9`.
    pub fn argmax_set(
        &self,
        a: &MoebiusPoint,
        b: &MoebiusPoint,
        slack: Option<f64>,
    ) -> Result<Vec<usize>> {
        self.check_owns2(a, b)?;
        let slack = slack.unwrap_or(8.0 * (a.residual + b.residual) + 1e-9);
        let diff: Vec<f64> = b.tau.iter().zip(&a.tau).map(|(&x, &y)| x - y).collect();
        let max = diff.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        Ok((0..diff.len())
            .filter(|&i| diff[i] >= max - slack)
            .collect())
    }

    /// Antipodes of `i` in the kernel `E(tau)`: partners within `tol_antipode` of 1.
    pub fn antipodes_at(&self, tau: &[f64], i: usize) -> Vec<usize> {
        let cutoff = 2.0 * (1.0 - self.tol_antipode).ln();
        let row = self.log2rho.row(i);
        (0..self.n())
            .filter(|&j| j != i && tau[i] + tau[j] + row[j] >= cutoff)
            .collect()
    }

    /// Relabels the space by a permutation; `perm[i]` is the source index
    /// landing at slot `i`. The pushed kernel is Moebius equivalent to itself
    /// under relabeling, and all distances are preserved exactly.
    pub fn pushforward(&self, perm: &[usize]) -> Result<AntipodalSpace> {
        check_permutation(perm, self.n())?;
        let labels: Vec<String> = perm.iter().map(|&i| self.labels[i].clone()).collect();
        let rho = self.rho.permuted(perm);
        let log2rho = self.log2rho.permuted(perm);
        let id = space_digest(&labels, &rho);
        Ok(AntipodalSpace {
            labels,
            rho,
            log2rho,
            tol_antipode: self.tol_antipode,
            id,
        })
    }

    /// Pushes a point along with the space; coordinates permute, the residual
    /// is unchanged (the discrepancy is permutation-equivariant).
    pub fn pushforward_point(
        &self,
        perm: &[usize],
        p: &MoebiusPoint,
    ) -> Result<(AntipodalSpace, MoebiusPoint)> {
        if !self.owns(p) {
            return Err(Error::SpaceMismatch);
        }
        let space = self.pushforward(perm)?;
        let tau: Vec<f64> = perm.iter().map(|&i| p.tau[i]).collect();
        let point = MoebiusPoint {
            tau,
            residual: p.residual,
            space_id: space.id,
        };
        Ok((space, point))
    }
}

fn check_permutation(perm: &[usize], n: usize) -> Result<()> {
    if perm.len() != n {
        return Err(Error::Argument(format!(
            "permutation length {} != space size {n}",
            perm.len()
        )));
    }
    let mut seen = vec![false; n];
    for &p in perm {
        if p >= n || seen[p] {
            return Err(Error::Argument("map is not a bijection on indices".into()));
        }
        seen[p] = true;
    }
    Ok(())
}

fn space_digest(labels: &[String], rho: &SquareMatrix) -> u64 {
    let mut h = Fnv1a::new();
    for l in labels {
        h.update(l.as_bytes());
        h.update(&[0xff]);
    }
    for v in rho.iter() {
        h.update(&v.to_bits().to_le_bytes());
    }
    h.finish()
}

/// FNV-1a 64-bit, used for stable content digests in reports.
pub struct Fnv1a(u64);

impl Fnv1a {
    pub fn new() -> Self {
        Fnv1a(0xcbf29ce484222325)
    }
    pub fn update(&mut self, bytes: &[u8]) {
        for &b in bytes {
            self.0 ^= b as u64;
            self.0 = self.0.wrapping_mul(0x100000001b3);
        }
    }
    pub fn finish(&self) -> u64 {
        self.0
    }
}

impl Default for Fnv1a {
    fn default() -> Self {
        Self::new()
    }
}

#[inline]
pub(crate) fn sup_norm_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .fold(0.0_f64, |m, (&x, &y)| m.max((x - y).abs()))
}

/// A point of M(Z) in base coordinates, with its certification residual.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MoebiusPoint {
    tau: Vec<f64>,
    residual: f64,
    space_id: u64,
}

impl MoebiusPoint {
    pub fn tau(&self) -> &[f64] {
        &self.tau
    }

    pub fn residual(&self) -> f64 {
        self.residual
    }

    pub fn space_id(&self) -> u64 {
        self.space_id
    }

    pub(crate) fn from_parts(tau: Vec<f64>, residual: f64, space_id: u64) -> Self {
        MoebiusPoint {
            tau,
            residual,
            space_id,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct DistanceDetail {
    pub value: f64,
    pub argmax: Vec<usize>,
    pub argmin: Vec<usize>,
    pub maxmin_defect: f64,
    pub slack: f64,
}

/// Cross-ratio of a separating matrix at four pairwise-distinct indices:
/// `rho(a,c) rho(b,d) / (rho(a,d) rho(b,c))`.
pub fn cross_ratio(rho: &SquareMatrix, q: [usize; 4]) -> Result<f64> {
    let n = rho.n();
    if n < 4 {
        return Err(Error::UnsupportedSize { needed: 4, got: n });
    }
    for i in 0..4 {
        for j in (i + 1)..4 {
            if q[i] == q[j] {
                return Err(Error::Argument(format!(
                    "cross-ratio indices must be pairwise distinct, got {q:?}"
                )));
            }
        }
        if q[i] >= n {
            return Err(Error::Argument(format!("index {} out of range", q[i])));
        }
    }
    let [a, b, c, d] = q;
    Ok(rho[(a, c)] * rho[(b, d)] / (rho[(a, d)] * rho[(b, c)]))
}

/// Derivative `d rho2 / d rho1` at `xi` by the three-point formula with
/// auxiliary pair `(eta, eta2)`. Independent of the pair when the inputs are
/// Moebius equivalent.
pub fn derivative(
    rho2: &SquareMatrix,
    rho1: &SquareMatrix,
    xi: usize,
    eta: usize,
    eta2: usize,
) -> Result<f64> {
    let n = rho1.n();
    if rho2.n() != n {
        return Err(Error::Argument("matrices have different sizes".into()));
    }
    if n < 3 {
        return Err(Error::UnsupportedSize { needed: 3, got: n });
    }
    if eta == eta2 || eta == xi || eta2 == xi || xi >= n || eta >= n || eta2 >= n {
        return Err(Error::Argument(format!(
            "auxiliary indices ({eta}, {eta2}) must be distinct and differ from {xi}"
        )));
    }
    Ok(rho2[(xi, eta)] * rho2[(xi, eta2)] * rho1[(eta, eta2)]
        / (rho1[(xi, eta)] * rho1[(xi, eta2)] * rho2[(eta, eta2)]))
}

/// Fits the full log-derivative vector `log d(rho2)/d(rho1)` using the
/// three-point formula with a fixed auxiliary pair per index.
///
/// With two points the derivative is determined only up to the product of its
/// values; the symmetric split is used.
pub fn log_derivative(rho2: &SquareMatrix, rho1: &SquareMatrix) -> Result<Vec<f64>> {
    let n = rho1.n();
    if rho2.n() != n {
        return Err(Error::Argument("matrices have different sizes".into()));
    }
    if n == 2 {
        let r = (rho2[(0, 1)] / rho1[(0, 1)]).ln();
        return Ok(vec![r, r]);
    }
    (0..n)
        .map(|xi| {
            let mut aux = (0..n).filter(|&k| k != xi);
            let eta = aux.next().unwrap();
            let eta2 = aux.next().unwrap();
            derivative(rho2, rho1, xi, eta, eta2).map(f64::ln)
        })
        .collect()
}

/// Checks Moebius equivalence by the Geometric Mean-Value Theorem: fits the
/// derivative from one auxiliary pair, then verifies the residual
/// `max |log rho2^2 - f(xi) - f(eta) - log rho1^2|` over all pairs.
pub fn moebius_equivalent(
    rho1: &SquareMatrix,
    rho2: &SquareMatrix,
    tol: f64,
) -> Result<(bool, f64)> {
    let f = log_derivative(rho2, rho1)?;
    let n = rho1.n();
    let mut deviation = 0.0_f64;
    for i in 0..n {
        for j in (i + 1)..n {
            let lhs = 2.0 * rho2[(i, j)].ln();
            let rhs = f[i] + f[j] + 2.0 * rho1[(i, j)].ln();
            deviation = deviation.max((lhs - rhs).abs());
        }
    }
    Ok((deviation <= tol, deviation))
}
