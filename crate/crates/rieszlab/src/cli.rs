//! Argument parsing and dispatch for the batch front end.
//!
//! Every subcommand reads a measure (or generates one), calls into the
//! library, and prints one JSON report to stdout. Exit codes: 0 success,
//! 1 invalid input or configuration, 2 numerical degeneracy (truncation
//! tie, coincident points, mass-free ball, broken accuracy contract).

use clap::{Args, Parser, Subcommand, ValueEnum};
use rieszlab::blowup::{main_lemma_ratio, max_density_ball, multiscale_energy_profile};
use rieszlab::defect::{
    defect_functional, perturbation_curve, reflectionless_pairing, variational_derivative,
    PairingMode, TestFunction, DEFAULT_FD_STEPS,
};
use rieszlab::error::{Error, Result};
use rieszlab::generators::{
    cantor_measure_capped, random_cloud, segment_uniform, CantorSpec, DEFAULT_ATOM_CAP,
};
use rieszlab::io::{read_measure, write_measure};
use rieszlab::kernel::KernelSpec;
use rieszlab::measure::{atoms_in_ball, bounding_ball, Ball, DiscreteMeasure, Region};
use rieszlab::symmetrization::{
    global_identity_check, pointwise_identity_check, total_energy, EnergyMode,
    DEFAULT_EXACT_ATOM_CAP,
};
use rieszlab::transform::{transform_field, truncated_transform_point, weighted_field_inner};
use rieszlab::tree::tree_transform_field;
use serde::Serialize;
use serde_json::{json, Value};
use std::path::PathBuf;
use std::time::Instant;

use crate::report::Report;

#[derive(Parser)]
#[command(
    name = "rieszlab",
    version,
    about = "Numerical laboratory for truncated Riesz-type transforms of atomic measures"
)]
pub struct TopCli {
    /// Worker threads (default: all cores; env RIESZLAB_THREADS).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Also write the JSON report to this file.
    #[arg(long, global = true)]
    report: Option<PathBuf>,
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Args, Serialize, Clone)]
struct KernelOpts {
    /// Kernel exponent, in (0,1).
    #[arg(long)]
    s: f64,
    /// Odd kernel power (1 for the classical case).
    #[arg(long, default_value_t = 1)]
    n: u32,
}

impl KernelOpts {
    fn build(&self) -> Result<KernelSpec> {
        KernelSpec::new(self.s, self.n)
    }
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a reference measure file.
    Gen(GenArgs),
    /// Evaluate the truncated transform of the measure.
    Transform(TransformArgs),
    /// Total symmetrized triple energy, exact or Monte Carlo.
    Energy(EnergyArgs),
    /// Verify the pointwise and global square-sum regroupings.
    IdentityCheck(IdentityArgs),
    /// Pair the transform against a Lipschitz test function.
    Pairing(PairingArgs),
    /// Ball defect (exterior-field variance), optionally along a
    /// perturbation curve.
    Defect(DefectArgs),
    /// Analytic defect derivative vs central finite differences.
    Derivative(DerivativeArgs),
    /// Multiscale energy growth profile over a chain of doubled balls.
    Blowup(BlowupArgs),
    /// Falsifier ratio: local triple energy over squared dyadic density.
    Falsify(FalsifyArgs),
    /// Naive vs treecode transform: timings and deviation.
    Bench(BenchArgs),
}

#[derive(Args)]
struct GenArgs {
    #[command(subcommand)]
    kind: GenKind,
}

#[derive(Subcommand, Serialize)]
#[serde(rename_all = "snake_case")]
enum GenKind {
    /// Self-similar measure with contraction branching^(-1/s).
    Cantor {
        /// Target dimension, in (0,1).
        #[arg(long)]
        s: f64,
        #[arg(long)]
        generations: u32,
        /// 2 for the line construction, 4 for planar corners.
        #[arg(long, default_value_t = 2)]
        branching: u32,
        #[arg(long, default_value_t = 1.0)]
        mass: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Equally spaced, equally weighted atoms on a segment.
    Segment {
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 1.0)]
        length: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Seeded uniform atoms in a box.
    Cloud {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 1)]
        dim: usize,
        #[arg(long = "box", default_value_t = 1.0)]
        box_size: f64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args, Serialize)]
struct TransformArgs {
    /// Measure file (.json or .csv).
    #[arg(long = "in")]
    #[serde(rename = "in")]
    input: PathBuf,
    #[command(flatten)]
    #[serde(flatten)]
    kernel: KernelOpts,
    /// Truncation radius.
    #[arg(long)]
    eps: f64,
    /// Evaluation points "x1,x2;y1,y2;..." (default: all atoms).
    #[arg(long, allow_hyphen_values = true)]
    points: Option<String>,
    /// Use the treecode field evaluator (atom targets only).
    #[arg(long)]
    tree: bool,
    /// Treecode opening angle.
    #[arg(long, default_value_t = 0.3)]
    theta_mac: f64,
}

#[derive(ValueEnum, Serialize, Clone, Copy)]
#[serde(rename_all = "snake_case")]
enum EnergyModeArg {
    Exact,
    Montecarlo,
}

#[derive(Args, Serialize)]
struct EnergyArgs {
    #[arg(long = "in")]
    #[serde(rename = "in")]
    input: PathBuf,
    #[command(flatten)]
    #[serde(flatten)]
    kernel: KernelOpts,
    #[arg(long, value_enum, default_value_t = EnergyModeArg::Exact)]
    mode: EnergyModeArg,
    #[arg(long, default_value_t = 1_000_000)]
    mc_samples: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Atom cap of the exact cubic sum.
    #[arg(long, default_value_t = DEFAULT_EXACT_ATOM_CAP)]
    exact_cap: usize,
}

#[derive(ValueEnum, Serialize, Clone, Copy)]
#[serde(rename_all = "snake_case")]
enum IdentityKind {
    Pointwise,
    Global,
    Both,
}

#[derive(Args, Serialize)]
struct IdentityArgs {
    #[arg(long = "in")]
    #[serde(rename = "in")]
    input: PathBuf,
    #[command(flatten)]
    #[serde(flatten)]
    kernel: KernelOpts,
    #[arg(long)]
    eps: f64,
    #[arg(long, value_enum, default_value_t = IdentityKind::Both)]
    kind: IdentityKind,
    /// Evaluation point for the pointwise check (default: the bounding
    /// ball center).
    #[arg(long, allow_hyphen_values = true)]
    x: Option<String>,
    /// Restrict the first index set to a ball: "c1,c2".
    #[arg(long, allow_hyphen_values = true)]
    e_center: Option<String>,
    #[arg(long)]
    e_radius: Option<f64>,
    /// Restrict the second index set to a ball.
    #[arg(long, allow_hyphen_values = true)]
    f_center: Option<String>,
    #[arg(long)]
    f_radius: Option<f64>,
}

#[derive(ValueEnum, Serialize, Clone, Copy)]
#[serde(rename_all = "snake_case")]
enum PairingModeArg {
    Direct,
    Antisymmetrized,
    Both,
}

#[derive(Args, Serialize)]
struct PairingArgs {
    #[arg(long = "in")]
    #[serde(rename = "in")]
    input: PathBuf,
    #[command(flatten)]
    #[serde(flatten)]
    kernel: KernelOpts,
    #[arg(long)]
    eps: f64,
    /// Test function file: a JSON list of radial hat terms.
    #[arg(long)]
    psi: PathBuf,
    #[arg(long, value_enum, default_value_t = PairingModeArg::Both)]
    mode: PairingModeArg,
}

#[derive(Args, Serialize)]
struct DefectArgs {
    #[arg(long = "in")]
    #[serde(rename = "in")]
    input: PathBuf,
    #[command(flatten)]
    #[serde(flatten)]
    kernel: KernelOpts,
    #[arg(long)]
    eps: f64,
    /// Ball center "c1,c2".
    #[arg(long, allow_hyphen_values = true)]
    ball_center: String,
    #[arg(long)]
    ball_radius: f64,
    /// Also evaluate the defect along (1 + t 1_Delta) mu at these t.
    #[arg(long, allow_hyphen_values = true)]
    curve_ts: Option<String>,
    /// Perturbation set as a ball center (with --delta-radius).
    #[arg(long, allow_hyphen_values = true)]
    delta_center: Option<String>,
    #[arg(long)]
    delta_radius: Option<f64>,
    /// Perturbation set as explicit atom indices "0,3,17".
    #[arg(long)]
    delta_indices: Option<String>,
}

#[derive(Args, Serialize)]
struct DerivativeArgs {
    #[arg(long = "in")]
    #[serde(rename = "in")]
    input: PathBuf,
    #[command(flatten)]
    #[serde(flatten)]
    kernel: KernelOpts,
    #[arg(long)]
    eps: f64,
    #[arg(long, allow_hyphen_values = true)]
    ball_center: String,
    #[arg(long)]
    ball_radius: f64,
    #[arg(long, allow_hyphen_values = true)]
    delta_center: Option<String>,
    #[arg(long)]
    delta_radius: Option<f64>,
    #[arg(long)]
    delta_indices: Option<String>,
    /// Finite difference steps "1e-2,5e-3,..." (default: four halvings
    /// from 1e-2).
    #[arg(long, allow_hyphen_values = true)]
    steps: Option<String>,
}

#[derive(Args, Serialize)]
struct BlowupArgs {
    #[arg(long = "in")]
    #[serde(rename = "in")]
    input: PathBuf,
    #[command(flatten)]
    #[serde(flatten)]
    kernel: KernelOpts,
    /// Number of doubling levels above the base ball.
    #[arg(long, default_value_t = 8)]
    scales: usize,
    /// Base ball center (default: a near-maximal density ball).
    #[arg(long, allow_hyphen_values = true)]
    ball_center: Option<String>,
    #[arg(long)]
    ball_radius: Option<f64>,
    /// Evaluation point (default: the heaviest atom in the base ball).
    #[arg(long, allow_hyphen_values = true)]
    x: Option<String>,
    /// Also write the profile as CSV (j, r, theta, e_j, cumulative).
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct FalsifyArgs {
    #[arg(long = "in")]
    #[serde(rename = "in")]
    input: PathBuf,
    #[command(flatten)]
    #[serde(flatten)]
    kernel: KernelOpts,
    /// Ball to test (default: the bounding ball of the support).
    #[arg(long, allow_hyphen_values = true)]
    ball_center: Option<String>,
    #[arg(long)]
    ball_radius: Option<f64>,
    #[arg(long, default_value_t = 32)]
    x_samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Serialize)]
struct BenchArgs {
    #[arg(long = "in")]
    #[serde(rename = "in")]
    input: PathBuf,
    #[command(flatten)]
    #[serde(flatten)]
    kernel: KernelOpts,
    #[arg(long)]
    eps: f64,
    #[arg(long, default_value_t = 0.3)]
    theta_mac: f64,
}

fn parse_vector(text: &str, what: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| Error::InvalidParameter(format!("{what}: bad number '{t}'")))
        })
        .collect()
}

fn parse_points(text: &str) -> Result<Vec<Vec<f64>>> {
    text.split(';')
        .map(|p| parse_vector(p, "points"))
        .collect()
}

fn parse_indices(text: &str) -> Result<Vec<usize>> {
    text.split(',')
        .map(|t| {
            t.trim()
                .parse::<usize>()
                .map_err(|_| Error::InvalidParameter(format!("indices: bad index '{t}'")))
        })
        .collect()
}

fn parse_ball(center: &str, radius: f64) -> Result<Ball> {
    Ball::new(parse_vector(center, "ball center")?, radius)
}

fn optional_ball_region(
    center: &Option<String>,
    radius: Option<f64>,
    what: &str,
) -> Result<Region> {
    match (center, radius) {
        (Some(c), Some(r)) => Ok(Region::Ball(parse_ball(c, r)?)),
        (None, None) => Ok(Region::All),
        _ => Err(Error::InvalidParameter(format!(
            "{what}: center and radius must be given together"
        ))),
    }
}

fn delta_region(
    center: &Option<String>,
    radius: Option<f64>,
    indices: &Option<String>,
) -> Result<Region> {
    match (center, radius, indices) {
        (Some(c), Some(r), None) => Ok(Region::Ball(parse_ball(c, r)?)),
        (None, None, Some(idx)) => Ok(Region::Indices(parse_indices(idx)?)),
        (None, None, None) => Err(Error::InvalidParameter(
            "perturbation set required: give --delta-center/--delta-radius or --delta-indices"
                .into(),
        )),
        _ => Err(Error::InvalidParameter(
            "give the perturbation set either as a ball or as indices, not both".into(),
        )),
    }
}

fn env_override(name: &str) -> Result<Option<u64>> {
    match std::env::var(name) {
        Ok(v) => v
            .parse::<u64>()
            .map(Some)
            .map_err(|_| Error::InvalidParameter(format!("{name} must be an integer, got '{v}'"))),
        Err(_) => Ok(None),
    }
}

fn measure_summary(mu: &DiscreteMeasure) -> Value {
    json!({
        "atoms": mu.len(),
        "dim": mu.dim(),
        "total_mass": mu.total_mass(),
        "resolution": mu.resolution(),
    })
}

struct Output {
    name: &'static str,
    config: Value,
    results: Value,
    timings: Option<Value>,
}

fn to_config<T: Serialize>(args: &T) -> Value {
    serde_json::to_value(args).expect("config serialization cannot fail")
}

fn insert(mut value: Value, key: &str, extra: Value) -> Value {
    value
        .as_object_mut()
        .expect("report fragment is an object")
        .insert(key.to_string(), extra);
    value
}

fn run_gen(args: &GenArgs) -> Result<Output> {
    let config = to_config(&args.kind);
    let (mu, out, extra) = match &args.kind {
        GenKind::Cantor {
            s,
            generations,
            branching,
            mass,
            out,
        } => {
            let spec = CantorSpec {
                s: *s,
                generations: *generations,
                branching: *branching,
                total_mass: *mass,
            };
            let cap = env_override("RIESZLAB_ATOM_CAP")?.unwrap_or(DEFAULT_ATOM_CAP);
            let mu = cantor_measure_capped(&spec, cap)?;
            let extra = json!({ "contraction": spec.contraction() });
            (mu, out.clone(), extra)
        }
        GenKind::Segment { n, length, out } => {
            (segment_uniform(*n, *length)?, out.clone(), json!({}))
        }
        GenKind::Cloud {
            seed,
            n,
            dim,
            box_size,
            out,
        } => (
            random_cloud(*seed, *n, *dim, *box_size)?,
            out.clone(),
            json!({}),
        ),
    };
    write_measure(&mu, &out)?;
    let mut results = measure_summary(&mu);
    results = insert(results, "out", json!(out));
    if let Some(obj) = extra.as_object() {
        for (k, v) in obj {
            results = insert(results, k, v.clone());
        }
    }
    Ok(Output {
        name: "gen",
        config,
        results,
        timings: None,
    })
}

fn run_transform(args: &TransformArgs) -> Result<Output> {
    let mu = read_measure(&args.input)?;
    let spec = args.kernel.build()?;
    let results = if let Some(points) = &args.points {
        if args.tree {
            return Err(Error::InvalidParameter(
                "the treecode evaluates at atoms; drop --tree or --points".into(),
            ));
        }
        let pts = parse_points(points)?;
        let mut rows = Vec::with_capacity(pts.len());
        for p in &pts {
            let v = truncated_transform_point(&mu, &spec, args.eps, p, None)?;
            rows.push(json!({ "point": p, "value": v }));
        }
        json!({ "measure": measure_summary(&mu), "evaluations": rows })
    } else {
        let field = if args.tree {
            tree_transform_field(&mu, &spec, args.eps, args.theta_mac)?
        } else {
            let ones = vec![1.0; mu.len()];
            transform_field(&mu, &spec, args.eps, &ones)?
        };
        let l2 = weighted_field_inner(&mu, &field, &field).sqrt();
        let max_component = field
            .values
            .iter()
            .flatten()
            .fold(0.0f64, |m, v| m.max(v.abs()));
        json!({
            "measure": measure_summary(&mu),
            "targets": "atoms",
            "weighted_l2": l2,
            "max_component": max_component,
            "field": field.values,
        })
    };
    Ok(Output {
        name: "transform",
        config: to_config(args),
        results,
        timings: None,
    })
}

fn run_energy(args: &EnergyArgs) -> Result<Output> {
    let mu = read_measure(&args.input)?;
    let spec = args.kernel.build()?;
    let mode = match args.mode {
        EnergyModeArg::Exact => EnergyMode::Exact {
            atom_cap: args.exact_cap,
        },
        EnergyModeArg::Montecarlo => EnergyMode::MonteCarlo {
            samples: args.mc_samples,
            seed: args.seed,
        },
    };
    let estimate = total_energy(&mu, &spec, mode)?;
    let results = json!({
        "measure": measure_summary(&mu),
        "energy": estimate,
    });
    Ok(Output {
        name: "energy",
        config: to_config(args),
        results,
        timings: None,
    })
}

fn run_identity(args: &IdentityArgs) -> Result<Output> {
    let mu = read_measure(&args.input)?;
    let spec = args.kernel.build()?;
    let mut results = json!({ "measure": measure_summary(&mu) });
    if matches!(args.kind, IdentityKind::Pointwise | IdentityKind::Both) {
        let x = match &args.x {
            Some(t) => parse_vector(t, "x")?,
            None => bounding_ball(&mu).center,
        };
        let e = optional_ball_region(&args.e_center, args.e_radius, "e ball")?;
        let f = optional_ball_region(&args.f_center, args.f_radius, "f ball")?;
        let rep = pointwise_identity_check(&mu, &spec, args.eps, &x, &e, &f)?;
        let rel = rep.relative_residual();
        let mut frag = serde_json::to_value(&rep).expect("report fragment");
        frag = insert(frag, "relative_residual", json!(rel));
        frag = insert(frag, "x", json!(x));
        results = insert(results, "pointwise", frag);
    }
    if matches!(args.kind, IdentityKind::Global | IdentityKind::Both) {
        let rep = global_identity_check(&mu, &spec, args.eps)?;
        let rel = rep.relative_residual();
        let mut frag = serde_json::to_value(&rep).expect("report fragment");
        frag = insert(frag, "relative_residual", json!(rel));
        results = insert(results, "global", frag);
    }
    Ok(Output {
        name: "identity-check",
        config: to_config(args),
        results,
        timings: None,
    })
}

fn run_pairing(args: &PairingArgs) -> Result<Output> {
    let mu = read_measure(&args.input)?;
    let spec = args.kernel.build()?;
    let text = std::fs::read_to_string(&args.psi)?;
    let psi: TestFunction = serde_json::from_str(&text)
        .map_err(|e| Error::Parse(format!("test function {}: {e}", args.psi.display())))?;
    let mut results = json!({
        "measure": measure_summary(&mu),
        "lip_bound": psi.lip_bound(),
    });
    let run_mode = |m: PairingMode| reflectionless_pairing(&mu, &spec, args.eps, &psi, m);
    match args.mode {
        PairingModeArg::Direct => {
            results = insert(results, "direct", serde_json::to_value(run_mode(PairingMode::Direct)?).unwrap());
        }
        PairingModeArg::Antisymmetrized => {
            results = insert(
                results,
                "antisymmetrized",
                serde_json::to_value(run_mode(PairingMode::Antisymmetrized)?).unwrap(),
            );
        }
        PairingModeArg::Both => {
            let d = run_mode(PairingMode::Direct)?;
            let a = run_mode(PairingMode::Antisymmetrized)?;
            let gap = d
                .value
                .iter()
                .zip(&a.value)
                .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
            results = insert(results, "direct", serde_json::to_value(&d).unwrap());
            results = insert(results, "antisymmetrized", serde_json::to_value(&a).unwrap());
            results = insert(results, "max_component_gap", json!(gap));
        }
    }
    Ok(Output {
        name: "pairing",
        config: to_config(args),
        results,
        timings: None,
    })
}

fn run_defect(args: &DefectArgs) -> Result<Output> {
    let mu = read_measure(&args.input)?;
    let spec = args.kernel.build()?;
    let ball = parse_ball(&args.ball_center, args.ball_radius)?;
    let ones = vec![1.0; mu.len()];
    let f = defect_functional(&mu, &ball, &spec, args.eps, &ones)?;
    let mut results = json!({
        "measure": measure_summary(&mu),
        "ball": ball,
        "ball_atoms": atoms_in_ball(&mu, &ball).len(),
        "F": f,
    });
    if let Some(ts_text) = &args.curve_ts {
        let ts = parse_vector(ts_text, "curve parameters")?;
        let delta = delta_region(&args.delta_center, args.delta_radius, &args.delta_indices)?;
        let curve = perturbation_curve(&mu, &ball, &delta, &spec, args.eps, &ts)?;
        results = insert(results, "curve", json!(curve));
    }
    Ok(Output {
        name: "defect",
        config: to_config(args),
        results,
        timings: None,
    })
}

fn run_derivative(args: &DerivativeArgs) -> Result<Output> {
    let mu = read_measure(&args.input)?;
    let spec = args.kernel.build()?;
    let ball = parse_ball(&args.ball_center, args.ball_radius)?;
    let delta = delta_region(&args.delta_center, args.delta_radius, &args.delta_indices)?;
    let steps = match &args.steps {
        Some(t) => parse_vector(t, "steps")?,
        None => DEFAULT_FD_STEPS.to_vec(),
    };
    let rep = variational_derivative(&mu, &ball, &delta, &spec, args.eps, &steps)?;
    let results = json!({
        "measure": measure_summary(&mu),
        "ball": ball,
        "derivative": rep,
    });
    Ok(Output {
        name: "derivative",
        config: to_config(args),
        results,
        timings: None,
    })
}

fn auto_radius_grid(mu: &DiscreteMeasure) -> Vec<f64> {
    let res = mu.resolution();
    let rmax = bounding_ball(mu).radius.max(res);
    if rmax <= res {
        return vec![res];
    }
    (0..16)
        .map(|k| res * (rmax / res).powf(k as f64 / 15.0))
        .collect()
}

fn run_blowup(args: &BlowupArgs) -> Result<Output> {
    let mu = read_measure(&args.input)?;
    let spec = args.kernel.build()?;
    let ball = match (&args.ball_center, args.ball_radius) {
        (Some(c), Some(r)) => parse_ball(c, r)?,
        (None, None) => max_density_ball(&mu, &spec, &auto_radius_grid(&mu))?.0,
        _ => {
            return Err(Error::InvalidParameter(
                "base ball: center and radius must be given together".into(),
            ))
        }
    };
    let x = match &args.x {
        Some(t) => parse_vector(t, "x")?,
        None => {
            let inside = atoms_in_ball(&mu, &ball);
            let heaviest = inside
                .iter()
                .copied()
                .max_by(|&a, &b| {
                    mu.weight(a)
                        .partial_cmp(&mu.weight(b))
                        .unwrap()
                        .then(b.cmp(&a))
                })
                .ok_or_else(|| {
                    Error::EmptyBall("base ball holds no atom to anchor the profile".into())
                })?;
            mu.point(heaviest).to_vec()
        }
    };
    let profile = multiscale_energy_profile(&mu, &spec, &x, &ball, args.scales)?;
    if let Some(csv) = &args.csv {
        let mut text = String::from("j,r,theta,e_j,cumulative\n");
        for j in 0..profile.scales.len() {
            text.push_str(&format!(
                "{},{},{},{},{}\n",
                j,
                profile.scales[j],
                profile.densities[j],
                profile.shell_energies[j],
                profile.cumulative[j]
            ));
        }
        std::fs::write(csv, text)?;
    }
    let mut results = json!({
        "measure": measure_summary(&mu),
        "ball": ball,
        "x": x,
        "profile": profile,
    });
    if let Some(csv) = &args.csv {
        results = insert(results, "csv", json!(csv));
    }
    Ok(Output {
        name: "blowup",
        config: to_config(args),
        results,
        timings: None,
    })
}

fn run_falsify(args: &FalsifyArgs) -> Result<Output> {
    let mu = read_measure(&args.input)?;
    let spec = args.kernel.build()?;
    let ball = match (&args.ball_center, args.ball_radius) {
        (Some(c), Some(r)) => parse_ball(c, r)?,
        (None, None) => bounding_ball(&mu),
        _ => {
            return Err(Error::InvalidParameter(
                "ball: center and radius must be given together".into(),
            ))
        }
    };
    let rep = main_lemma_ratio(&mu, &spec, &ball, args.x_samples, args.seed)?;
    let results = json!({
        "measure": measure_summary(&mu),
        "ball": ball,
        "report": rep,
    });
    Ok(Output {
        name: "falsify",
        config: to_config(args),
        results,
        timings: None,
    })
}

fn run_bench(args: &BenchArgs) -> Result<Output> {
    let mu = read_measure(&args.input)?;
    let spec = args.kernel.build()?;
    let ones = vec![1.0; mu.len()];

    let t0 = Instant::now();
    let naive = transform_field(&mu, &spec, args.eps, &ones)?;
    let naive_ms = t0.elapsed().as_secs_f64() * 1e3;

    let t1 = Instant::now();
    let tree = tree_transform_field(&mu, &spec, args.eps, args.theta_mac)?;
    let tree_ms = t1.elapsed().as_secs_f64() * 1e3;

    let scale = naive
        .values
        .iter()
        .flatten()
        .fold(0.0f64, |m, v| m.max(v.abs()));
    let max_abs_dev = naive
        .values
        .iter()
        .flatten()
        .zip(tree.values.iter().flatten())
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    let deviation = if scale == 0.0 {
        max_abs_dev
    } else {
        max_abs_dev / scale
    };

    // The accuracy contract: at opening angles up to 0.3 the deviation
    // must stay within 1e-2 of the naive field (scale-relative).
    let bound = 1e-2;
    let checked = args.theta_mac <= 0.3;
    if checked && deviation > bound {
        return Err(Error::AccuracyContract {
            deviation,
            bound,
            theta_mac: args.theta_mac,
        });
    }
    let results = json!({
        "measure": measure_summary(&mu),
        "theta_mac": args.theta_mac,
        "max_scale_relative_deviation": deviation,
        "accuracy_bound": bound,
        "accuracy_checked": checked,
    });
    let timings = json!({
        "naive_ms": naive_ms,
        "tree_ms": tree_ms,
        "speedup": naive_ms / tree_ms,
    });
    Ok(Output {
        name: "bench",
        config: to_config(args),
        results,
        timings: Some(timings),
    })
}

fn dispatch(cmd: &Cmd) -> Result<Output> {
    match cmd {
        Cmd::Gen(a) => run_gen(a),
        Cmd::Transform(a) => run_transform(a),
        Cmd::Energy(a) => run_energy(a),
        Cmd::IdentityCheck(a) => run_identity(a),
        Cmd::Pairing(a) => run_pairing(a),
        Cmd::Defect(a) => run_defect(a),
        Cmd::Derivative(a) => run_derivative(a),
        Cmd::Blowup(a) => run_blowup(a),
        Cmd::Falsify(a) => run_falsify(a),
        Cmd::Bench(a) => run_bench(a),
    }
}

pub fn run() -> ! {
    let cli = match TopCli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    let threads = match cli.threads {
        Some(t) => t,
        None => match env_override("RIESZLAB_THREADS") {
            Ok(v) => v.unwrap_or(0) as usize,
            Err(e) => {
                eprintln!("error: {e}");
                std::process::exit(e.exit_code());
            }
        },
    };
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: cannot build thread pool: {e}");
            std::process::exit(1);
        }
    };
    let started = Instant::now();
    let outcome = pool.install(|| dispatch(&cli.command));
    match outcome {
        Ok(out) => {
            let report = Report::new(
                out.name,
                out.config,
                out.results,
                started.elapsed().as_millis() as u64,
                pool.current_num_threads(),
                out.timings,
            );
            let mut text = report.to_json();
            println!("{text}");
            text.push('\n');
            if let Some(path) = &cli.report {
                if let Err(e) = std::fs::write(path, &text) {
                    eprintln!("error: cannot write report file: {e}");
                    std::process::exit(1);
                }
            }
            std::process::exit(0);
        }
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(e.exit_code());
        }
    }
}
