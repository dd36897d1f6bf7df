use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use dqeflow::complex::{Builtin, Triangulation};
use dqeflow::curvature::{cr_curvature, CurvatureState, Geometry, PackingMetric};
use dqeflow::flows::{
    find_dqe, prescribe_curvature, run_flow, FlowConfig, FlowKind, FlowOptions, FlowResult,
    Strategy, Target, Verdict,
};
use dqeflow::operators::{assemble, dqe_stability_report, spectrum, AssemblyMethod, OperatorSet};

use dqeflow_cli::{
    exit, fmt_num, matrix_dump, metric_or_unit, read_target, read_triangulation, trajectory_csv,
    verdict_exit_code, write, CliError, Result, RunManifest, TOOL_VERSION,
};

#[derive(Parser)]
#[command(
    name = "dqeflow",
    version,
    about = "Curvature, operators and curvature flows on sphere-packed 3-manifolds"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check that a triangulation is a closed, connected pseudo-3-manifold.
    Validate { triangulation: PathBuf },
    /// Write a built-in triangulation.
    Generate {
        #[arg(value_enum)]
        name: BuiltinArg,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Per-vertex curvature of a metric.
    Curvature {
        #[command(flatten)]
        input: Input,
        /// Also write the state as JSON.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Eigenvalues of Λ and λ₁ on the complement of r.
    Spectrum(OperatorArgs),
    /// Assembled operators and assembly cross-checks.
    Operators(OperatorArgs),
    /// Integrate a curvature flow.
    Flow(FlowArgs),
    /// Search for a DQE metric near the input metric.
    FindDqe {
        #[command(flatten)]
        input: Input,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Find a metric with prescribed K or C.
    Prescribe {
        #[command(flatten)]
        input: Input,
        /// Target document, `{"K": [..]}` or `{"C": [..]}`.
        #[arg(long)]
        target: PathBuf,
        #[arg(long, default_value = "flow", value_parser = ["flow", "gradient_descent"])]
        strategy: String,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Re-run a flow from its manifest.
    Replay {
        manifest: PathBuf,
        /// Where to write the trajectory; defaults to the path the manifest records.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Compare against the recorded trajectory instead of writing it.
        #[arg(long)]
        check: bool,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum BuiltinArg {
    Pentachoron,
    Cross16,
}

#[derive(Clone, Copy, ValueEnum)]
enum GeometryArg {
    Euclidean,
    Hyperbolic,
}

impl From<GeometryArg> for Geometry {
    fn from(g: GeometryArg) -> Self {
        match g {
            GeometryArg::Euclidean => Geometry::Euclidean,
            GeometryArg::Hyperbolic => Geometry::Hyperbolic,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum MethodArg {
    Dual,
    Fd,
    Both,
}

#[derive(Args)]
struct Input {
    triangulation: PathBuf,
    /// Metric document `{"r": [..]}`; all radii 1 when omitted.
    #[arg(long)]
    metric: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "euclidean")]
    geometry: GeometryArg,
}

impl Input {
    fn load(&self) -> Result<(Triangulation, PackingMetric)> {
        let t = read_triangulation(&self.triangulation)?;
        let m = metric_or_unit(
            self.metric.as_deref(),
            self.geometry.into(),
            t.vertex_count(),
        )?;
        m.check_dimension(&t)?;
        Ok((t, m))
    }
}

#[derive(Args)]
struct OperatorArgs {
    #[command(flatten)]
    input: Input,
    /// Assembly route; defaults to dual for Euclidean, fd for hyperbolic.
    #[arg(long, value_enum)]
    method: Option<MethodArg>,
    /// Write Λ, L and (Euclidean) G as row-major text.
    #[arg(long)]
    dump: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    /// Stop once the driving vector's sup-norm is below this.
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
    #[arg(long, default_value_t = 100_000)]
    max_steps: usize,
    #[arg(long)]
    dt0: Option<f64>,
    #[arg(long)]
    t_end: Option<f64>,
    #[arg(long, default_value_t = 1)]
    log_stride: usize,
    /// Multiply each radius by exp(η), η uniform in (−x, x).
    #[arg(long, default_value_t = 0.0)]
    perturb: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Trajectory CSV.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl RunArgs {
    fn options(&self) -> FlowOptions {
        let mut o = FlowOptions::default();
        o.stop.tol = self.tol;
        o.stop.max_steps = self.max_steps;
        o.stop.t_end = self.t_end;
        if let Some(dt0) = self.dt0 {
            o.step.dt0 = dt0;
            o.step.dt_max = o.step.dt_max.max(dt0);
        }
        o.log_stride = self.log_stride;
        o
    }
}

#[derive(Args)]
struct FlowArgs {
    #[command(flatten)]
    input: Input,
    #[arg(long, value_parser = FlowKind::NAMES)]
    kind: String,
    /// Target document; `cr4_normalized` defaults to the curvature of the
    /// unperturbed input metric.
    #[arg(long)]
    target: Option<PathBuf>,
    #[command(flatten)]
    run: RunArgs,
    /// Write a manifest that reproduces this run.
    #[arg(long)]
    manifest: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn dispatch(cmd: Command) -> Result<u8> {
    match cmd {
        Command::Validate { triangulation } => validate(&triangulation),
        Command::Generate { name, out } => generate(name, out.as_deref()),
        Command::Curvature { input, out } => curvature(&input, out.as_deref()),
        Command::Spectrum(args) => operators(&args, false),
        Command::Operators(args) => operators(&args, true),
        Command::Flow(args) => flow(&args),
        Command::FindDqe { input, run } => dqe(&input, &run),
        Command::Prescribe {
            input,
            target,
            strategy,
            run,
        } => prescribe(&input, &target, &strategy, &run),
        Command::Replay {
            manifest,
            out,
            check,
        } => replay(&manifest, out.as_deref(), check),
    }
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => write(p, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn list(xs: &[f64]) -> String {
    let items: Vec<String> = xs.iter().map(|&x| fmt_num(x)).collect();
    format!("[{}]", items.join(", "))
}

fn opt(x: Option<f64>) -> String {
    x.map(fmt_num).unwrap_or_else(|| "null".into())
}

fn validate(path: &Path) -> Result<u8> {
    let t = read_triangulation(path)?;
    let report = t.validate();
    let (v, e, f, tets) = report.counts();
    println!("vertices: {v}");
    println!("edges: {e}");
    println!("faces: {f}");
    println!("tets: {tets}");
    println!(
        "euler_characteristic: {}",
        v as i64 - e as i64 + f as i64 - tets as i64
    );
    println!("violations: {}", report.violations.len());
    for violation in &report.violations {
        println!("  - {violation}");
    }
    Ok(if report.is_clean() {
        exit::OK
    } else {
        exit::INVALID
    })
}

fn generate(name: BuiltinArg, out: Option<&Path>) -> Result<u8> {
    let b = match name {
        BuiltinArg::Pentachoron => Builtin::Pentachoron,
        BuiltinArg::Cross16 => Builtin::Cross16,
    };
    let doc = b.build().to_doc();
    let mut text = serde_json::to_string(&doc).expect("triangulation serializes");
    text.push('\n');
    emit(out, &text)?;
    Ok(exit::OK)
}

fn state_report(s: &CurvatureState) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "geometry: {}", geometry_name(s.geometry));
    let _ = writeln!(out, "K: {}", list(&s.k));
    let _ = writeln!(out, "C: {}", list(&s.c));
    let _ = writeln!(out, "S: {}", opt(s.total));
    let _ = writeln!(out, "lambda: {}", opt(s.lambda));
    let _ = writeln!(out, "energy_K: {}", fmt_num(s.quadratic_energy));
    let _ = writeln!(out, "energy_C: {}", fmt_num(s.g_energy));
    out
}

fn geometry_name(g: Geometry) -> &'static str {
    match g {
        Geometry::Euclidean => "euclidean",
        Geometry::Hyperbolic => "hyperbolic",
    }
}

fn curvature(input: &Input, out: Option<&Path>) -> Result<u8> {
    let (t, m) = input.load()?;
    let state = cr_curvature(&t, &m)?;
    print!("{}", state_report(&state));
    if let Some(p) = out {
        let mut text = serde_json::to_string_pretty(&state).expect("state serializes");
        text.push('\n');
        write(p, &text)?;
    }
    Ok(exit::OK)
}

fn operators(args: &OperatorArgs, full: bool) -> Result<u8> {
    let (t, m) = args.input.load()?;
    let method = args
        .method
        .unwrap_or(match AssemblyMethod::default_for(m.geometry()) {
            AssemblyMethod::DualGeometry => MethodArg::Dual,
            AssemblyMethod::FiniteDifference => MethodArg::Fd,
        });
    let primary = match method {
        MethodArg::Fd => AssemblyMethod::FiniteDifference,
        _ => AssemblyMethod::DualGeometry,
    };
    let ops = assemble(&t, &m, primary)?;
    let spec = spectrum(&ops, &m);
    println!("method: {}", method_name(ops.method));
    println!("eigenvalues: {}", list(&spec.eigenvalues));
    println!("lambda1: {}", fmt_num(spec.lambda1));
    println!("kernel_angle: {}", fmt_num(spec.kernel_angle));
    println!("asymmetry: {}", fmt_num(ops.asymmetry));
    if full {
        let n = ops.n();
        let ones = vec![1.0; n];
        let l1 = mat_vec(&ops.laplacian, &ones);
        let rt_l = mat_t_vec(&ops.laplacian, m.radii());
        println!("residual_L1: {}", fmt_num(sup(&l1)));
        println!("residual_rTL: {}", fmt_num(sup(&rt_l)));
        println!("norm_L_max: {}", fmt_num(ops.laplacian.abs().max()));
        for w in &ops.edge_weights {
            println!(
                "edge {} {}: {} {}",
                w.edge[0],
                w.edge[1],
                fmt_num(w.forward),
                fmt_num(w.backward)
            );
        }
    }
    if method == MethodArg::Both {
        let fd = assemble(&t, &m, AssemblyMethod::FiniteDifference)?;
        let scale = ops.lambda.abs().max();
        let gap = (&ops.lambda - &fd.lambda).abs().max();
        println!("max_discrepancy: {}", fmt_num(gap));
        println!("max_relative_discrepancy: {}", fmt_num(gap / scale));
    }
    if let Some(p) = &args.dump {
        write(p, &dump(&ops))?;
    }
    Ok(exit::OK)
}

fn method_name(m: AssemblyMethod) -> &'static str {
    match m {
        AssemblyMethod::DualGeometry => "dual_geometry",
        AssemblyMethod::FiniteDifference => "finite_difference",
    }
}

fn dump(ops: &OperatorSet) -> String {
    let mut out = matrix_dump("Lambda", &ops.lambda);
    out.push_str(&matrix_dump("L", &ops.laplacian));
    out.push_str(&matrix_dump("L_weighted", &ops.weighted_laplacian));
    if let Some(g) = &ops.g_laplacian {
        out.push_str(&matrix_dump("G", g));
    }
    out
}

fn mat_vec(a: &nalgebra::DMatrix<f64>, x: &[f64]) -> Vec<f64> {
    (0..a.nrows())
        .map(|i| (0..a.ncols()).map(|j| a[(i, j)] * x[j]).sum())
        .collect()
}

fn mat_t_vec(a: &nalgebra::DMatrix<f64>, x: &[f64]) -> Vec<f64> {
    (0..a.ncols())
        .map(|j| (0..a.nrows()).map(|i| a[(i, j)] * x[i]).sum())
        .collect()
}

fn sup(x: &[f64]) -> f64 {
    x.iter().fold(0.0f64, |acc, v| acc.max(v.abs()))
}

fn summary(res: &FlowResult) -> String {
    let mut out = String::new();
    let verdict = match res.verdict {
        Verdict::Converged => "converged",
        Verdict::MaxSteps => "max_steps",
        Verdict::HitDegeneracy => "hit_degeneracy",
        Verdict::Diverged => "diverged",
    };
    let _ = writeln!(out, "kind: {}", res.kind.name());
    let _ = writeln!(out, "geometry: {}", geometry_name(res.geometry));
    let _ = writeln!(out, "verdict: {verdict}");
    let _ = writeln!(out, "steps: {}", res.steps);
    let _ = writeln!(out, "rejected_steps: {}", res.rejected_steps);
    let _ = writeln!(out, "t: {}", fmt_num(res.t));
    let _ = writeln!(out, "driving_norm: {}", fmt_num(res.driving_norm));
    if let Some(d) = &res.dqe {
        let _ = writeln!(out, "dqe_lambda: {}", fmt_num(d.lambda));
        let _ = writeln!(out, "dqe_residual: {}", fmt_num(d.residual));
    }
    let _ = writeln!(out, "target_residual: {}", opt(res.target_residual));
    let _ = writeln!(out, "drift_product_r: {}", opt(res.drift.product_r));
    let _ = writeln!(out, "drift_norm_r_sq: {}", opt(res.drift.norm_r_sq));
    let _ = writeln!(
        out,
        "monotonicity_violations: {}",
        res.drift.monotonicity_violations.len()
    );
    if let Some(d) = &res.degeneracy {
        let _ = writeln!(out, "degeneracy: {d}");
    }
    let _ = writeln!(out, "r: {}", list(res.final_metric.radii()));
    let _ = writeln!(out, "K: {}", list(&res.final_state.k));
    out
}

fn finish(res: &FlowResult, out: Option<&Path>) -> Result<u8> {
    if let Some(p) = out {
        write(p, &trajectory_csv(res))?;
    }
    print!("{}", summary(res));
    Ok(verdict_exit_code(res.verdict))
}

fn canonical(p: &Path) -> PathBuf {
    std::fs::canonicalize(p).unwrap_or_else(|_| p.to_owned())
}

fn flow(args: &FlowArgs) -> Result<u8> {
    let (t, m) = args.input.load()?;
    let target = match &args.target {
        Some(p) => {
            let doc = read_target(p)?;
            let wants_c = args.kind == "g4_prescribed";
            match (doc.k, doc.c) {
                (Some(k), None) if !wants_c => Some(k),
                (None, Some(c)) if wants_c => Some(c),
                _ => {
                    return Err(CliError::Usage(format!(
                        "{}: flow `{}` takes a {} target",
                        p.display(),
                        args.kind,
                        if wants_c { "C" } else { "K" }
                    )))
                }
            }
        }
        None if args.kind == "cr4_normalized" => Some(cr_curvature(&t, &m)?.k),
        None => None,
    };
    let kind = FlowKind::from_name(&args.kind, target)?;
    let initial = m.perturbed(args.run.perturb, args.run.seed);
    let config = FlowConfig {
        kind,
        initial,
        options: args.run.options(),
    };
    let res = run_flow(&t, &config)?;
    if let Some(p) = &args.manifest {
        let manifest = RunManifest {
            tool_version: TOOL_VERSION.into(),
            triangulation: canonical(&args.input.triangulation),
            metric: args.input.metric.as_deref().map(canonical),
            target: args.target.as_deref().map(canonical),
            seed: args.run.seed,
            perturb: args.run.perturb,
            config,
            trajectory: args.run.out.as_deref().map(|o| {
                // The CSV is written below; canonicalize its directory.
                let dir = o
                    .parent()
                    .filter(|d| !d.as_os_str().is_empty())
                    .unwrap_or(Path::new("."));
                canonical(dir).join(o.file_name().unwrap_or_default())
            }),
        };
        let mut text = manifest.to_json();
        text.push('\n');
        write(p, &text)?;
    }
    finish(&res, args.run.out.as_deref())
}

fn dqe(input: &Input, run: &RunArgs) -> Result<u8> {
    let (t, m) = input.load()?;
    let initial = m.perturbed(run.perturb, run.seed);
    let res = find_dqe(&t, &initial, run.options())?;
    let code = finish(&res, run.out.as_deref())?;
    if res.verdict == Verdict::Converged {
        let tolerance = res.dqe.map_or(0.0, |d| d.residual).max(1e-8);
        let report = dqe_stability_report(&t, &res.final_metric, tolerance)?;
        println!("lambda_star: {}", fmt_num(report.lambda_star));
        println!("lambda1: {}", fmt_num(report.lambda1));
        println!(
            "attractor: {}",
            serde_json::to_string(&report.class).expect("class serializes")
        );
        println!(
            "jacobian_eigenvalues: {}",
            list(&report.jacobian_eigenvalues)
        );
    }
    Ok(code)
}

fn prescribe(input: &Input, target: &Path, strategy: &str, run: &RunArgs) -> Result<u8> {
    let (t, m) = input.load()?;
    let doc = read_target(target)?;
    let target = match (doc.k, doc.c) {
        (Some(k), _) => Target::K(k),
        (_, Some(c)) => Target::C(c),
        _ => unreachable!("read_target checks the shape"),
    };
    let strategy: Strategy = strategy.parse()?;
    let initial = m.perturbed(run.perturb, run.seed);
    let res = prescribe_curvature(&t, &target, &initial, strategy, run.options())?;
    finish(&res, run.out.as_deref())
}

fn replay(path: &Path, out: Option<&Path>, check: bool) -> Result<u8> {
    let manifest = RunManifest::read(path)?;
    let base = path.parent().unwrap_or(Path::new("."));
    let res = manifest.replay(base)?;
    let csv = trajectory_csv(&res);
    let recorded = manifest
        .trajectory
        .as_deref()
        .map(|p| dqeflow_cli::resolve(base, p));
    if check {
        let Some(p) = recorded else {
            return Err(CliError::Usage(
                "manifest records no trajectory to check against".into(),
            ));
        };
        let old = std::fs::read_to_string(&p).map_err(|source| CliError::Io {
            path: p.clone(),
            source,
        })?;
        if old == csv {
            println!("identical: {}", p.display());
            return Ok(exit::OK);
        }
        println!("differs: {}", p.display());
        return Ok(exit::INVALID);
    }
    let target = out.map(Path::to_owned).or(recorded);
    if let Some(p) = target {
        write(&p, &csv)?;
    }
    print!("{}", summary(&res));
    Ok(verdict_exit_code(res.verdict))
}
