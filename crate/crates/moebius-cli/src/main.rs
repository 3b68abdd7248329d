//! Command-line front door: loads spaces and points, runs the requested
//! operation, and emits a JSON run report with input digests, the tolerance
//! block, results, and named checks. Exit code 0 means every check passed,
//! 2 means the report contains failed checks, 1 means usage or input errors.

// `!(x > 0.0)` rejects NaN as well as nonpositive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod inputs;
mod report;
mod selftest;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use moebius::flow::{
    antipodalize_traced, antipodalize_verified, integrate_flow, FlowConfig, Method, StopReason,
};
use moebius::generators::*;
use moebius::geometry::*;
use moebius::hull::*;
use moebius::space::{validate_matrix, AntipodalSpace, MoebiusPoint, Tolerances};
use moebius::tangent::*;

use inputs::{point_json, space_json, Inputs};
use report::{Check, ConfigEcho, RunReport};

#[derive(Parser)]
#[command(
    name = "moebius",
    version,
    about = "Moebius spaces over finite antipodal spaces"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    global: GlobalOpts,
}

#[derive(Args, Clone)]
struct GlobalOpts {
    /// Write the report (or, for `gen`, the artifact) to this path.
    #[arg(long, global = true)]
    out: Option<String>,
    /// Rayon thread count for parallel scans.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[arg(long, global = true, default_value_t = 7)]
    seed: u64,
    #[arg(long, global = true, default_value_t = 1e-8)]
    tol_flow: f64,
    #[arg(long, global = true, default_value_t = 1e-12)]
    tol_validate: f64,
    #[arg(long, global = true, default_value_t = 1e-6)]
    tol_antipode: f64,
    #[arg(long, global = true, default_value_t = 0.01)]
    step_h: f64,
    #[arg(long, global = true, default_value_t = 80.0)]
    max_time: f64,
    #[arg(long, global = true, default_value_t = 0.5)]
    sample_every: f64,
    /// Integrator: rk4 or euler.
    #[arg(long, global = true, default_value = "rk4")]
    method: String,
    /// Rescale a loaded kernel to diameter one before validating.
    #[arg(long, global = true)]
    renormalize: bool,
    /// Zero the wall_time_ms field for byte-stable reports.
    #[arg(long, global = true)]
    no_timing: bool,
}

impl GlobalOpts {
    fn tolerances(&self) -> Tolerances {
        Tolerances {
            validate: self.tol_validate,
            flow: self.tol_flow,
            antipode: self.tol_antipode,
        }
    }

    fn flow_config(&self) -> Result<FlowConfig, String> {
        let method = match self.method.as_str() {
            "rk4" => Method::Rk4,
            "euler" => Method::Euler,
            other => return Err(format!("unknown method `{other}` (use rk4 or euler)")),
        };
        Ok(FlowConfig {
            tol_flow: self.tol_flow,
            step_h: self.step_h,
            max_time: self.max_time,
            sample_every: self.sample_every,
            method,
            polish: true,
        })
    }

    fn echo(&self) -> ConfigEcho {
        ConfigEcho {
            tol_validate: self.tol_validate,
            tol_flow: self.tol_flow,
            tol_antipode: self.tol_antipode,
            seed: self.seed,
            jobs: self.jobs,
            step_h: self.step_h,
            max_time: self.max_time,
            sample_every: self.sample_every,
            method: self.method.clone(),
            renormalize: self.renormalize,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Validate a space file against the antipodal-space rules.
    Validate { space: String },
    /// Summarize a space: diameter, quasi-metric constant, antipode counts.
    Info { space: String },
    /// Generate spaces and points.
    Gen {
        #[command(subcommand)]
        kind: GenKind,
    },
    /// Integrate the antipodal flow and emit the trace.
    Flow {
        #[arg(long)]
        space: String,
        /// Initial coordinates: inline JSON array or a file path.
        #[arg(long, conflicts_with = "random")]
        tau: Option<String>,
        /// Draw the initial coordinates from the seeded generator.
        #[arg(long)]
        random: bool,
        #[arg(long, default_value_t = 1.0)]
        amp: f64,
        /// Flow relative to this member point instead of the base kernel.
        #[arg(long)]
        base: Option<String>,
    },
    /// Flow to the limit and certify the resulting member.
    Antipodalize {
        #[arg(long)]
        space: String,
        #[arg(long, conflicts_with = "random")]
        tau: Option<String>,
        #[arg(long)]
        random: bool,
        #[arg(long, default_value_t = 1.0)]
        amp: f64,
        #[arg(long)]
        base: Option<String>,
        /// Rerun with half the step and require matching limits.
        #[arg(long)]
        verify_step: bool,
    },
    /// Distance between two member points, with argmax/argmin sets.
    Distance {
        #[arg(long)]
        space: String,
        #[arg(long)]
        a: String,
        #[arg(long)]
        b: String,
    },
    /// Midpoint of two members.
    Midpoint {
        #[arg(long)]
        space: String,
        #[arg(long)]
        a: String,
        #[arg(long)]
        b: String,
    },
    /// Geodesic between two members sampled at k+1 parameters.
    Geodesic {
        #[arg(long)]
        space: String,
        #[arg(long)]
        a: String,
        #[arg(long)]
        b: String,
        #[arg(long)]
        k: usize,
    },
    /// Geodesic ray toward a boundary direction.
    Ray {
        #[arg(long)]
        space: String,
        #[arg(long)]
        xi: usize,
        #[arg(long, default_value_t = 1.0)]
        step: f64,
        #[arg(long)]
        depth: usize,
        /// Start from this member instead of the base point.
        #[arg(long)]
        point: Option<String>,
    },
    /// Boundary Gromov product estimate along rays.
    Gromov {
        #[arg(long)]
        space: String,
        #[arg(long)]
        xi: usize,
        #[arg(long)]
        eta: usize,
        #[arg(long)]
        depth: usize,
        #[arg(long, default_value_t = 1.0)]
        step: f64,
    },
    /// Busemann cocycle estimate along a ray.
    Busemann {
        #[arg(long)]
        space: String,
        #[arg(long)]
        a: String,
        #[arg(long)]
        b: String,
        #[arg(long)]
        xi: usize,
        #[arg(long)]
        depth: usize,
        #[arg(long, default_value_t = 1.0)]
        step: f64,
    },
    /// Sampled four-point hyperbolicity defect.
    Delta {
        #[arg(long)]
        space: String,
        /// JSON file with an array of member points (or coordinate arrays).
        #[arg(long, conflicts_with = "random")]
        points: Option<String>,
        /// Number of seeded random members to scan instead.
        #[arg(long)]
        random: Option<usize>,
        #[arg(long, default_value_t = 1.0)]
        amp: f64,
        #[arg(long, default_value_t = 40)]
        cap: usize,
    },
    /// Quasi-metric constant with witness triple.
    QmConstant {
        #[arg(long, conflicts_with = "matrix")]
        space: Option<String>,
        #[arg(long)]
        matrix: Option<String>,
    },
    /// Frink metrization of a quasi-metric.
    Frink {
        #[arg(long, conflicts_with = "matrix")]
        space: Option<String>,
        #[arg(long)]
        matrix: Option<String>,
    },
    /// Antipodal graph, odd basis, and tangent-line checks at a member.
    Tangent {
        #[arg(long)]
        space: String,
        #[arg(long)]
        point: String,
        /// Odd direction to move along (inline JSON or file).
        #[arg(long)]
        vector: Option<String>,
        /// Emit the odd basis.
        #[arg(long)]
        basis: bool,
        #[arg(long, default_value_t = 0.1)]
        t: f64,
    },
    /// Isbell-hull diagnostics on a finite sample.
    Hull {
        #[arg(long)]
        space: String,
        /// Sample spec JSON: {"rays": [{"xi", "depth", "step"}...], "random": {...}}.
        #[arg(long)]
        sample: String,
        #[arg(long)]
        alpha: Option<String>,
        #[arg(long)]
        beta: Option<String>,
        /// Check this function vector instead of a distance function.
        #[arg(long, conflicts_with = "alpha")]
        f: Option<String>,
        /// Index of the basepoint in the sample.
        #[arg(long, default_value_t = 0)]
        o: usize,
    },
    /// Run the property suites over the generator zoo.
    Selftest {
        #[arg(long, default_value = "all")]
        suite: String,
    },
}

#[derive(Subcommand)]
enum GenKind {
    /// Discrete space: all off-diagonal entries 1.
    Discrete {
        #[arg(long)]
        n: usize,
    },
    /// Cyclic chord kernel on n points (even n).
    Circle {
        #[arg(long)]
        n: usize,
    },
    /// Ultrametric from a dendrogram spec or preset.
    Dendrogram {
        #[arg(long)]
        spec: Option<String>,
        /// balanced8 or caterpillar5.
        #[arg(long)]
        preset: Option<String>,
    },
    /// Snowflaked circle with a prescribed quasi-metric constant.
    Quasimetric {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        k: f64,
    },
    /// Seeded random certified member of a space.
    RandomPoint {
        #[arg(long)]
        space: String,
        #[arg(long, default_value_t = 1.0)]
        amp: f64,
    },
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind::{DisplayHelp, DisplayVersion};
            let code = match e.kind() {
                DisplayHelp | DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    if let Some(jobs) = cli.global.jobs {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global();
    }
    let started = std::time::Instant::now();
    let mut inputs = Inputs::new();
    match dispatch(&cli.command, &cli.global, &mut inputs) {
        Err(msg) => {
            eprintln!("error: {msg}");
            std::process::exit(1);
        }
        Ok((results, checks, artifact)) => {
            let report = RunReport {
                command: command_name(&cli.command).to_string(),
                inputs: inputs.digests,
                config: cli.global.echo(),
                results,
                checks,
                wall_time_ms: if cli.global.no_timing {
                    0
                } else {
                    started.elapsed().as_millis() as u64
                },
            };
            let all_pass = report.all_pass();
            let text = serde_json::to_string_pretty(&report).expect("report serializes");
            match (&artifact, &cli.global.out) {
                (Some(body), Some(path)) => {
                    // `gen` writes the artifact to --out; the report goes to stdout.
                    if let Err(e) = std::fs::write(path, body) {
                        eprintln!("error: cannot write {path}: {e}");
                        std::process::exit(1);
                    }
                    println!("{text}");
                }
                (Some(body), None) => println!("{body}"),
                (None, Some(path)) => {
                    if let Err(e) = std::fs::write(path, text) {
                        eprintln!("error: cannot write {path}: {e}");
                        std::process::exit(1);
                    }
                }
                (None, None) => println!("{text}"),
            }
            std::process::exit(if all_pass { 0 } else { 2 });
        }
    }
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Validate { .. } => "validate",
        Command::Info { .. } => "info",
        Command::Gen { .. } => "gen",
        Command::Flow { .. } => "flow",
        Command::Antipodalize { .. } => "antipodalize",
        Command::Distance { .. } => "distance",
        Command::Midpoint { .. } => "midpoint",
        Command::Geodesic { .. } => "geodesic",
        Command::Ray { .. } => "ray",
        Command::Gromov { .. } => "gromov",
        Command::Busemann { .. } => "busemann",
        Command::Delta { .. } => "delta",
        Command::QmConstant { .. } => "qm-constant",
        Command::Frink { .. } => "frink",
        Command::Tangent { .. } => "tangent",
        Command::Hull { .. } => "hull",
        Command::Selftest { .. } => "selftest",
    }
}

type Outcome = Result<(Value, Vec<Check>, Option<String>), String>;

fn dispatch(cmd: &Command, g: &GlobalOpts, inputs: &mut Inputs) -> Outcome {
    let tol = g.tolerances();
    let cfg = g.flow_config()?;
    match cmd {
        Command::Validate { space } => {
            let text = inputs.read_file("space", space)?;
            let parsed: inputs::SpaceJson =
                serde_json::from_str(&text).map_err(|e| format!("{space}: {e}"))?;
            let rho = if g.renormalize {
                let max = parsed.rho.iter().fold(0.0_f64, f64::max);
                if !(max > 0.0) {
                    return Err(format!("{space}: cannot renormalize an all-zero matrix"));
                }
                parsed.rho.map(|x| x / max)
            } else {
                parsed.rho
            };
            let report = validate_matrix(&rho, &tol).map_err(|e| e.to_string())?;
            let checks = vec![Check::flag("validate/ok", report.ok)];
            Ok((serde_json::to_value(&report).unwrap(), checks, None))
        }
        Command::Info { space } => {
            let s = inputs.load_space(space, &tol, g.renormalize)?;
            let vr = validate_matrix(s.rho(), &tol).map_err(|e| e.to_string())?;
            let qm = quasimetric_constant(s.rho());
            let results = json!({
                "n": s.n(),
                "labels": s.labels(),
                "id": format!("{:016x}", s.id()),
                "diameter": vr.diameter,
                "min_offdiag": vr.min_offdiag,
                "antipode_count_per_row": vr.antipode_count_per_row,
                "qm_constant": qm.k,
                "qm_witness": qm.witness,
                "ultrametric": qm.ultrametric,
            });
            Ok((results, Vec::new(), None))
        }
        Command::Gen { kind } => gen_command(kind, g, inputs, &cfg),
        Command::Flow {
            space,
            tau,
            random,
            amp,
            base,
        } => {
            let s = inputs.load_space(space, &tol, g.renormalize)?;
            let tau0 = initial_tau(inputs, &s, tau.as_deref(), *random, *amp, g.seed)?;
            let base_tau = match base {
                Some(path) => inputs
                    .load_point("base", path, &s, g.tol_flow)?
                    .tau()
                    .to_vec(),
                None => vec![0.0; s.n()],
            };
            let trace = integrate_flow(&s, &base_tau, &tau0, &cfg).map_err(|e| e.to_string())?;
            let tau_final: Vec<f64> = base_tau
                .iter()
                .zip(trace.final_tau())
                .map(|(b, t)| b + t)
                .collect();
            let results = json!({
                "times": trace.times,
                "disc_norms": trace.disc_norms,
                "tau_final": tau_final,
                "residual": trace.final_disc_norm(),
                "stop_reason": trace.stop_reason,
            });
            let checks = vec![Check::flag(
                "flow/certified",
                trace.stop_reason != StopReason::MaxTime,
            )];
            Ok((results, checks, None))
        }
        Command::Antipodalize {
            space,
            tau,
            random,
            amp,
            base,
            verify_step,
        } => {
            let s = inputs.load_space(space, &tol, g.renormalize)?;
            let tau0 = initial_tau(inputs, &s, tau.as_deref(), *random, *amp, g.seed)?;
            let base_tau = match base {
                Some(path) => inputs
                    .load_point("base", path, &s, g.tol_flow)?
                    .tau()
                    .to_vec(),
                None => vec![0.0; s.n()],
            };
            let (point, trace) =
                antipodalize_traced(&s, &base_tau, &tau0, &cfg).map_err(|e| e.to_string())?;
            let mut checks = vec![Check::le(
                "antipodalize/residual",
                point.residual(),
                g.tol_flow,
            )];
            let mut results = json!({
                "tau_final": point.tau(),
                "residual": point.residual(),
                "stop_reason": trace.stop_reason,
                "flow_time": trace.times.last(),
            });
            if *verify_step {
                let (_, gap) =
                    antipodalize_verified(&s, &base_tau, &tau0, &cfg).map_err(|e| e.to_string())?;
                results["step_halving_gap"] = json!(gap);
                checks.push(Check::le(
                    "antipodalize/step-halving",
                    gap,
                    10.0 * g.tol_flow,
                ));
            }
            Ok((results, checks, None))
        }
        Command::Distance { space, a, b } => {
            let s = inputs.load_space(space, &tol, g.renormalize)?;
            let pa = inputs.load_point("a", a, &s, g.tol_flow)?;
            let pb = inputs.load_point("b", b, &s, g.tol_flow)?;
            let detail = s.dist_detail(&pa, &pb).map_err(|e| e.to_string())?;
            let checks = vec![Check::le(
                "distance/maxmin-defect",
                detail.maxmin_defect,
                detail.slack,
            )];
            Ok((serde_json::to_value(&detail).unwrap(), checks, None))
        }
        Command::Midpoint { space, a, b } => {
            let s = inputs.load_space(space, &tol, g.renormalize)?;
            let pa = inputs.load_point("a", a, &s, g.tol_flow)?;
            let pb = inputs.load_point("b", b, &s, g.tol_flow)?;
            let m = midpoint(&s, &pa, &pb, &cfg).map_err(|e| e.to_string())?;
            let d = s.dist(&pa, &pb).unwrap();
            let da = s.dist(&pa, &m).unwrap();
            let db = s.dist(&pb, &m).unwrap();
            let results = json!({
                "tau": m.tau(),
                "residual": m.residual(),
                "d_ab": d,
                "d_a_mid": da,
                "d_b_mid": db,
            });
            let checks = vec![
                Check::le("midpoint/left-half", (da - d / 2.0).abs(), 5.0 * g.tol_flow),
                Check::le(
                    "midpoint/right-half",
                    (db - d / 2.0).abs(),
                    5.0 * g.tol_flow,
                ),
            ];
            Ok((results, checks, None))
        }
        Command::Geodesic { space, a, b, k } => {
            let s = inputs.load_space(space, &tol, g.renormalize)?;
            let pa = inputs.load_point("a", a, &s, g.tol_flow)?;
            let pb = inputs.load_point("b", b, &s, g.tol_flow)?;
            let path = geodesic(&s, &pa, &pb, *k, &cfg).map_err(|e| e.to_string())?;
            let d = s.dist(&pa, &pb).unwrap();
            let mut worst = 0.0_f64;
            for (j, p) in path.iter().enumerate() {
                let want = j as f64 / *k as f64 * d;
                worst = worst.max((s.dist(&pa, p).unwrap() - want).abs());
            }
            let results = json!({
                "distance": d,
                "points": path
                    .iter()
                    .map(|p| json!({"tau": p.tau(), "residual": p.residual()}))
                    .collect::<Vec<_>>(),
            });
            let checks = vec![Check::le("geodesic/additivity", worst, 5.0 * g.tol_flow)];
            Ok((results, checks, None))
        }
        Command::Ray {
            space,
            xi,
            step,
            depth,
            point,
        } => {
            let s = inputs.load_space(space, &tol, g.renormalize)?;
            let base = match point {
                Some(path) => inputs.load_point("point", path, &s, g.tol_flow)?,
                None => s.base_point(),
            };
            let ray = extend_ray(&s, &base, *xi, *step, *depth, &cfg).map_err(|e| e.to_string())?;
            let mut worst = 0.0_f64;
            for k in 1..ray.points.len() {
                let got = s.dist(&ray.points[0], &ray.points[k]).unwrap();
                worst =
                    worst.max((got - k as f64 * step).abs() - (k + 1) as f64 * 4.0 * g.tol_flow);
            }
            let results = json!({
                "direction_xi": ray.direction_xi,
                "reverse_eta": ray.reverse_eta,
                "step": ray.step,
                "points": ray
                    .points
                    .iter()
                    .map(|p| json!({"tau": p.tau(), "residual": p.residual()}))
                    .collect::<Vec<_>>(),
                "diagnostics": ray.diagnostics,
            });
            let checks = vec![
                Check::flag("ray/complete", ray.complete()),
                Check::le("ray/concatenation-excess", worst.max(0.0), 0.0),
            ];
            Ok((results, checks, None))
        }
        Command::Gromov {
            space,
            xi,
            eta,
            depth,
            step,
        } => {
            let s = inputs.load_space(space, &tol, g.renormalize)?;
            let base = s.base_point();
            let rep = boundary_gromov_limit(&s, &base, *xi, *eta, *step, *depth, &cfg)
                .map_err(|e| e.to_string())?;
            let results = json!({
                "estimates": rep.estimates,
                "reference": rep.reference,
                "final_gap": rep.final_gap(),
            });
            let checks = vec![Check::flag("gromov/gap-monotone", rep.monotone_ok)];
            Ok((results, checks, None))
        }
        Command::Busemann {
            space,
            a,
            b,
            xi,
            depth,
            step,
        } => {
            let s = inputs.load_space(space, &tol, g.renormalize)?;
            let pa = inputs.load_point("a", a, &s, g.tol_flow)?;
            let pb = inputs.load_point("b", b, &s, g.tol_flow)?;
            let rep = busemann_estimate(&s, &pa, &pb, *xi, *step, *depth, &cfg)
                .map_err(|e| e.to_string())?;
            let gap = |k: usize| (rep.estimates[k - 1] - rep.reference).abs();
            let monotone = if *depth >= 8 {
                gap(*depth) <= gap(*depth - 2) + 1e-9 && gap(*depth - 2) <= gap(*depth - 4) + 1e-9
            } else {
                true
            };
            let results = json!({
                "estimates": rep.estimates,
                "reference": rep.reference,
                "final_gap": rep.final_gap(),
            });
            let checks = vec![Check::flag("busemann/gap-monotone", monotone)];
            Ok((results, checks, None))
        }
        Command::Delta {
            space,
            points,
            random,
            amp,
            cap,
        } => {
            let s = inputs.load_space(space, &tol, g.renormalize)?;
            let pts: Vec<MoebiusPoint> = match (points, random) {
                (Some(path), _) => load_point_list(inputs, path, &s, g.tol_flow)?,
                (None, Some(m)) => {
                    let mut rng = moebius::rng::SplitMix64::new(g.seed);
                    (0..*m)
                        .map(|_| random_point(&s, rng.next_u64(), *amp, &cfg))
                        .collect::<Result<_, _>>()
                        .map_err(|e| e.to_string())?
                }
                (None, None) => return Err("delta needs --points or --random".into()),
            };
            let rep = hyperbolicity_delta(&s, &pts, *cap, g.seed).map_err(|e| e.to_string())?;
            Ok((serde_json::to_value(&rep).unwrap(), Vec::new(), None))
        }
        Command::QmConstant { space, matrix } => {
            let m = load_space_or_matrix(inputs, space, matrix, g, &tol)?;
            let rep = quasimetric_constant(&m);
            Ok((serde_json::to_value(&rep).unwrap(), Vec::new(), None))
        }
        Command::Frink { space, matrix } => {
            let m = load_space_or_matrix(inputs, space, matrix, g, &tol)?;
            let rep = frink_metric(&m).map_err(|e| e.to_string())?;
            let checks = vec![
                Check::ge("frink/lower-ratio", rep.min_ratio, 0.25 - 1e-12),
                Check::le("frink/upper-ratio", rep.max_ratio, 1.0 + 1e-12),
            ];
            Ok((serde_json::to_value(&rep).unwrap(), checks, None))
        }
        Command::Tangent {
            space,
            point,
            vector,
            basis,
            t,
        } => {
            let s = inputs.load_space(space, &tol, g.renormalize)?;
            let x = inputs.load_point("point", point, &s, g.tol_flow)?;
            let odd = odd_basis(&s, &x).map_err(|e| e.to_string())?;
            let mut results = json!({
                "dimension": odd.dimension,
                "graph": odd.graph,
            });
            if *basis {
                results["basis"] = json!(odd.basis);
            }
            let mut checks = Vec::new();
            if let Some(varg) = vector {
                let v = inputs.load_tau("vector", varg)?;
                let (ok, worst) = is_odd(&s, &x, &v, 1e-12).map_err(|e| e.to_string())?;
                checks.push(Check::le("tangent/vector-odd", worst, 1e-12));
                if ok {
                    let chk =
                        tangent_line_check(&s, &x, &v, *t, &cfg).map_err(|e| e.to_string())?;
                    if chk.flat {
                        checks.push(Check::le("tangent/flat-discrepancy", chk.disc_norm, 1e-12));
                    }
                    results["line_check"] = serde_json::to_value(&chk).unwrap();
                }
            }
            Ok((results, checks, None))
        }
        Command::Hull {
            space,
            sample,
            alpha,
            beta,
            f,
            o,
        } => {
            let s = inputs.load_space(space, &tol, g.renormalize)?;
            let text = inputs.read_file("sample", sample)?;
            let spec: SampleSpec =
                serde_json::from_str(&text).map_err(|e| format!("{sample}: {e}"))?;
            let built = build_sample(&s, &spec, &cfg).map_err(|e| e.to_string())?;
            let mut checks = vec![Check::le(
                "hull/triangle-defect",
                built.triangle_defect,
                8.0 * g.tol_flow,
            )];
            let mut results = json!({
                "size": built.len(),
                "triangle_defect": built.triangle_defect,
                "tags": built.tags,
            });
            let fvec: Option<Vec<f64>> = if let Some(path) = alpha {
                let pa = inputs.load_point("alpha", path, &s, g.tol_flow)?;
                let fv = dist_function(&s, &built, &pa).map_err(|e| e.to_string())?;
                if let Some(bpath) = beta {
                    let pb = inputs.load_point("beta", bpath, &s, g.tol_flow)?;
                    let gap =
                        hull_isometry_check(&s, &built, &pa, &pb).map_err(|e| e.to_string())?;
                    checks.push(Check::ge(
                        "hull/gap-nonnegative",
                        gap.gap,
                        -8.0 * g.tol_flow,
                    ));
                    results["isometry"] = serde_json::to_value(&gap).unwrap();
                }
                Some(fv)
            } else if let Some(fa) = f {
                Some(inputs.load_tau("f", fa)?)
            } else {
                None
            };
            if let Some(fv) = fvec {
                let rep =
                    extremal_check(&built, &fv, 8.0 * g.tol_flow).map_err(|e| e.to_string())?;
                checks.push(Check::flag("hull/in-delta", rep.in_delta));
                results["extremal"] = serde_json::to_value(&rep).unwrap();
                let mut sequences = Vec::new();
                let mut monotone = true;
                for (xi, _) in &built.rays {
                    let bv = boundary_value(&built, *xi, &fv, *o, 8.0 * g.tol_flow)
                        .map_err(|e| e.to_string())?;
                    monotone &= bv.monotone_ok;
                    sequences.push(json!({"xi": xi, "values": bv.values, "value": bv.value}));
                }
                results["boundary_values"] = json!(sequences);
                if !built.rays.is_empty() {
                    checks.push(Check::flag("hull/boundary-monotone", monotone));
                }
            }
            Ok((results, checks, None))
        }
        Command::Selftest { suite } => {
            let suites: Vec<&str> = if suite == "all" {
                selftest::SUITES.to_vec()
            } else {
                selftest::SUITES
                    .iter()
                    .copied()
                    .filter(|s| *s == suite)
                    .collect()
            };
            if suites.is_empty() {
                return Err(format!(
                    "unknown suite `{suite}` (use all, {})",
                    selftest::SUITES.join(", ")
                ));
            }
            let mut checks = Vec::new();
            for name in &suites {
                checks.extend(selftest::run_suite(name, g.seed, &cfg, &tol));
            }
            let failed: Vec<&str> = checks
                .iter()
                .filter(|c| !c.pass)
                .map(|c| c.name.as_str())
                .collect();
            let results = json!({
                "suites": suites,
                "total_checks": checks.len(),
                "failed": failed,
            });
            Ok((results, checks, None))
        }
    }
}

fn initial_tau(
    inputs: &mut Inputs,
    space: &AntipodalSpace,
    tau: Option<&str>,
    random: bool,
    amp: f64,
    seed: u64,
) -> Result<Vec<f64>, String> {
    match (tau, random) {
        (Some(arg), _) => {
            let v = inputs.load_tau("tau", arg)?;
            if v.len() != space.n() {
                return Err(format!(
                    "tau has length {}, space has {} points",
                    v.len(),
                    space.n()
                ));
            }
            Ok(v)
        }
        (None, true) => {
            let mut rng = moebius::rng::SplitMix64::new(seed);
            Ok((0..space.n()).map(|_| rng.next_symmetric(amp)).collect())
        }
        (None, false) => Err("provide --tau or --random".into()),
    }
}

fn load_point_list(
    inputs: &mut Inputs,
    path: &str,
    space: &AntipodalSpace,
    tol_flow: f64,
) -> Result<Vec<MoebiusPoint>, String> {
    let text = inputs.read_file("points", path)?;
    let value: Value = serde_json::from_str(&text).map_err(|e| format!("{path}: {e}"))?;
    let items = value
        .as_array()
        .ok_or_else(|| format!("{path}: expected a JSON array of points"))?;
    items
        .iter()
        .map(|item| {
            let tau: Vec<f64> = if item.is_array() {
                serde_json::from_value(item.clone()).map_err(|e| format!("{path}: {e}"))?
            } else {
                serde_json::from_value(item["tau"].clone()).map_err(|e| format!("{path}: {e}"))?
            };
            space
                .certify(tau, tol_flow)
                .map_err(|e| format!("{path}: {e}"))
        })
        .collect()
}

fn load_space_or_matrix(
    inputs: &mut Inputs,
    space: &Option<String>,
    matrix: &Option<String>,
    g: &GlobalOpts,
    tol: &Tolerances,
) -> Result<moebius::SquareMatrix, String> {
    match (space, matrix) {
        (Some(path), _) => Ok(inputs.load_space(path, tol, g.renormalize)?.rho().clone()),
        (None, Some(path)) => inputs.load_matrix("matrix", path),
        (None, None) => Err("provide --space or --matrix".into()),
    }
}

fn gen_command(kind: &GenKind, g: &GlobalOpts, inputs: &mut Inputs, cfg: &FlowConfig) -> Outcome {
    let (artifact, summary) = match kind {
        GenKind::Discrete { n } => {
            let s = gen_discrete(*n).map_err(|e| e.to_string())?;
            (
                serde_json::to_string_pretty(&space_json(&s)).unwrap(),
                json!({"kind": "discrete", "n": n, "id": format!("{:016x}", s.id())}),
            )
        }
        GenKind::Circle { n } => {
            let s = gen_circle(*n).map_err(|e| e.to_string())?;
            (
                serde_json::to_string_pretty(&space_json(&s)).unwrap(),
                json!({"kind": "circle", "n": n, "id": format!("{:016x}", s.id())}),
            )
        }
        GenKind::Dendrogram { spec, preset } => {
            let node = match (spec, preset.as_deref()) {
                (Some(path), _) => {
                    let text = inputs.read_file("spec", path)?;
                    serde_json::from_str(&text).map_err(|e| format!("{path}: {e}"))?
                }
                (None, Some("balanced8")) => dendrogram_balanced8(),
                (None, Some("caterpillar5")) => dendrogram_caterpillar5(),
                (None, Some(other)) => {
                    return Err(format!(
                        "unknown preset `{other}` (use balanced8 or caterpillar5)"
                    ))
                }
                (None, None) => return Err("provide --spec or --preset".into()),
            };
            let s = gen_dendrogram(&node).map_err(|e| e.to_string())?;
            (
                serde_json::to_string_pretty(&space_json(&s)).unwrap(),
                json!({"kind": "dendrogram", "n": s.n(), "id": format!("{:016x}", s.id())}),
            )
        }
        GenKind::Quasimetric { n, k } => {
            let s = gen_quasimetric(*n, *k, g.seed).map_err(|e| e.to_string())?;
            let observed = quasimetric_constant(s.rho()).k;
            (
                serde_json::to_string_pretty(&space_json(&s)).unwrap(),
                json!({
                    "kind": "quasimetric", "n": n, "target_k": k,
                    "observed_k": observed, "id": format!("{:016x}", s.id()),
                }),
            )
        }
        GenKind::RandomPoint { space, amp } => {
            let tol = g.tolerances();
            let s = inputs.load_space(space, &tol, g.renormalize)?;
            let p = random_point(&s, g.seed, *amp, cfg).map_err(|e| e.to_string())?;
            (
                serde_json::to_string_pretty(&point_json(space, &p)).unwrap(),
                json!({"kind": "random-point", "residual": p.residual(), "space": space}),
            )
        }
    };
    Ok((summary, Vec::new(), Some(artifact)))
}
